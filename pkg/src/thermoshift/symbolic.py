"""Subshifts of finite type with interval realizations.

A system is an alphabet ``{0..k-1}`` with a 0/1 transition matrix ``A`` and,
optionally, a geometric realization: one orientation-preserving contraction
``g[i][j]`` per admissible transition, mapping the base interval of symbol
``j`` into the base interval of symbol ``i``.  Words are read left to right
and the first symbol is the outermost constraint, so the interval of a word
``w`` is ``g[w0][w1](interval(tail(w)))`` and the shift drops the leading
symbol.

All word lengths count symbols (a "length m" cylinder in the classical
indexing has m+1 symbols here).
"""

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import (
    EmptyRowOrColumn,
    NoRealization,
    NotAdmissible,
    NotAperiodic,
    RealizationOverlap,
)
from .expr import Expr

_CONTINUATION_STEPS = 256  # backward iterations; error <= gamma**-256


def encode_word(word, k):
    code = 0
    for s in word:
        code = code * k + int(s)
    return code


def decode_word(code, k, n):
    out = []
    for _ in range(n):
        out.append(code % k)
        code //= k
    return tuple(reversed(out))


class BranchMap:
    """One inverse branch g_{ij}: interval of j -> interval of i."""

    def __init__(self, kind, a=None, b=None, expr=None, dmin=None, dmax=None):
        self.kind = kind
        if kind == "affine":
            self.a = float(a)
            self.b = float(b)
            if not (0.0 < self.a < 1.0):
                raise ValueError(f"affine branch slope must be in (0,1), got {a}")
            self.frac_a = Fraction(str(a)) if not isinstance(a, Fraction) else a
            self.frac_b = Fraction(str(b)) if not isinstance(b, Fraction) else b
            self.dmin = self.a
            self.dmax = self.a
        elif kind == "expr":
            self.expr = expr if isinstance(expr, Expr) else Expr(expr)
            if dmin is None or dmax is None:
                raise ValueError("expr branch needs declared derivative bounds dmin/dmax")
            self.dmin = float(dmin)
            self.dmax = float(dmax)
            if not (0.0 < self.dmin <= self.dmax < 1.0):
                raise ValueError("expr branch derivative bounds must satisfy 0 < dmin <= dmax < 1")
        else:
            raise ValueError(f"unknown branch kind {kind!r}")

    def __call__(self, x):
        if self.kind == "affine":
            return self.a * x + self.b
        return self.expr(x)

    def inverse(self, y, lo, hi):
        """Invert on [lo, hi] (monotone increasing)."""
        if self.kind == "affine":
            return (y - self.b) / self.a
        a, b = lo, hi
        for _ in range(80):
            m = 0.5 * (a + b)
            if self(m) < y:
                a = m
            else:
                b = m
        return 0.5 * (a + b)

    def frac(self, x):
        if self.kind != "affine":
            raise NoRealization("exact rational arithmetic requires affine branches")
        return self.frac_a * x + self.frac_b


class Realization:
    """Branch table plus base intervals and expansion constants."""

    def __init__(self, k, A, branches, c0=None, gamma=None, gamma1=None):
        self.k = k
        self.branches = branches  # dict (i, j) -> BranchMap
        for i in range(k):
            for j in range(k):
                if A[i, j] and (i, j) not in branches:
                    raise ValueError(f"missing branch for admissible transition ({i},{j})")
        dmins = [br.dmin for br in branches.values()]
        dmaxs = [br.dmax for br in branches.values()]
        self.gamma = float(gamma) if gamma is not None else 1.0 / max(dmaxs)
        self.gamma1 = float(gamma1) if gamma1 is not None else 1.0 / min(dmins)
        self.c0 = float(c0) if c0 is not None else 1.0
        if not (self.gamma > 1.0 and self.gamma1 >= self.gamma and 0.0 < self.c0 <= 1.0):
            raise ValueError("need c0 in (0,1], gamma1 >= gamma > 1")
        self.intervals = self._solve_intervals(A)
        self._validate(A)

    def _solve_intervals(self, A):
        k = self.k
        ivals = [(0.0, 1.0)] * k
        for _ in range(400):
            nxt = []
            for i in range(k):
                los, his = [], []
                for j in range(k):
                    if A[i, j]:
                        lo, hi = ivals[j]
                        g = self.branches[(i, j)]
                        los.append(g(lo))
                        his.append(g(hi))
                nxt.append((min(los), max(his)))
            if max(abs(a - c) + abs(b - d) for (a, b), (c, d) in zip(ivals, nxt)) < 1e-15:
                ivals = nxt
                break
            ivals = nxt
        return nxt

    def _validate(self, A):
        k = self.k
        for i in range(k):
            images = []
            for j in range(k):
                if A[i, j]:
                    lo, hi = self.intervals[j]
                    g = self.branches[(i, j)]
                    glo, ghi = g(lo), g(hi)
                    if not (ghi > glo):
                        raise RealizationOverlap(f"branch ({i},{j}) has empty or reversed image")
                    li, hi_i = self.intervals[i]
                    if glo < li - 1e-12 or ghi > hi_i + 1e-12:
                        raise RealizationOverlap(f"branch ({i},{j}) image leaves interval of symbol {i}")
                    images.append((glo, ghi, j))
            images.sort()
            for (lo1, hi1, j1), (lo2, hi2, j2) in zip(images, images[1:]):
                if lo2 < hi1 - 1e-12:
                    raise RealizationOverlap(
                        f"branch images for successors {j1} and {j2} of symbol {i} overlap"
                    )

    def interval_frac(self, A):
        """Exact base intervals (affine branches only); cached on first use.

        The float fixed point identifies which successor branch attains each
        endpoint; the endpoints then solve a small linear system over Q.
        """
        if not hasattr(self, "_frac_intervals"):
            k = self.k
            lo_arg, hi_arg = [], []
            for i in range(k):
                cands = []
                for j in range(k):
                    if A[i, j]:
                        lo, hi = self.intervals[j]
                        g = self.branches[(i, j)]
                        cands.append((g(lo), g(hi), j))
                lo_arg.append(min(cands)[2])
                hi_arg.append(max(cands, key=lambda t: t[1])[2])

            def solve(arg, side):
                # x_i = a_i * x_{arg[i]} + b_i  ->  (I - M) x = c
                M = [[Fraction(0)] * k for _ in range(k)]
                c = [Fraction(0)] * k
                for i in range(k):
                    g = self.branches[(i, arg[i])]
                    M[i][arg[i]] = g.frac_a
                    c[i] = g.frac_b
                aug = [[Fraction(int(i == j)) - M[i][j] for j in range(k)] + [c[i]] for i in range(k)]
                for col in range(k):
                    piv = next(r for r in range(col, k) if aug[r][col] != 0)
                    aug[col], aug[piv] = aug[piv], aug[col]
                    inv = 1 / aug[col][col]
                    aug[col] = [v * inv for v in aug[col]]
                    for r in range(k):
                        if r != col and aug[r][col] != 0:
                            f = aug[r][col]
                            aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
                return [aug[i][k] for i in range(k)]

            los = solve(lo_arg, "lo")
            his = solve(hi_arg, "hi")
            self._frac_intervals = list(zip(los, his))
        return self._frac_intervals


@dataclass(frozen=True)
class Cylinder:
    word: tuple
    lo: float
    hi: float
    system: "SymbolicSystem" = field(repr=False, compare=False)

    @property
    def diameter(self):
        return self.hi - self.lo

    @property
    def depth(self):
        return len(self.word)


@dataclass(frozen=True)
class PointRep:
    """Canonical point of a cylinder: word followed by the smallest admissible
    continuation.  ``coordinate`` is the realized limit of the nested intervals."""

    word: tuple
    coordinate: float
    system: "SymbolicSystem" = field(repr=False, compare=False)

    def symbol(self, j):
        w = self.word
        if j < len(w):
            return w[j]
        s = w[-1] if w else 0
        nxt = self.system._smallest_successor
        for _ in range(j - len(w) + 1):
            s = nxt[s]
        return s

    def shifted(self, m):
        """sigma^m of this point (drop m leading symbols)."""
        sys = self.system
        w = list(self.word)
        while len(w) <= m:
            w.append(sys._smallest_successor[w[-1]])
        nw = tuple(w[m:])
        return PointRep(nw, sys.rep_coordinate(nw), sys)


class CylinderIndex:
    """Vectorized catalogue of all admissible words of one depth.

    Arrays sorted by integer word code (lexicographic order):
      words   int64 codes, sum_j w_j k^(n-1-j)
      first   leading symbol
      last    trailing symbol
      tail    index of the (n-1)-symbol suffix in the depth-(n-1) catalogue
      lo, hi  realized interval endpoints (NaN without realization)
      rep     realized coordinate of the canonical representative
    """

    def __init__(self, depth, words, first, last, tail, lo, hi, rep):
        self.depth = depth
        self.words = words
        self.first = first
        self.last = last
        self.tail = tail
        self.lo = lo
        self.hi = hi
        self.rep = rep

    @property
    def n(self):
        return len(self.words)

    @property
    def diam(self):
        return self.hi - self.lo

    def locate(self, codes):
        idx = np.searchsorted(self.words, codes)
        if np.any(idx >= self.n) or np.any(self.words[np.minimum(idx, self.n - 1)] != codes):
            raise NotAdmissible("word code not in catalogue")
        return idx


class SymbolicSystem:
    """Validated subshift of finite type, optionally realized on an interval."""

    def __init__(self, k, A, realization=None):
        self.k = int(k)
        self.A = np.asarray(A, dtype=np.int8)
        if self.A.shape != (self.k, self.k) or not np.isin(self.A, (0, 1)).all():
            raise ValueError("A must be a k x k matrix over {0,1}")
        if (self.A.sum(axis=1) == 0).any() or (self.A.sum(axis=0) == 0).any():
            raise EmptyRowOrColumn("every row and column of A needs at least one 1")
        self.M0 = self._aperiodicity_exponent()
        self.realization = realization
        self._smallest_successor = [int(np.argmax(self.A[i] == 1)) for i in range(self.k)]
        self._indices = {}
        self._rep_base = self._continuation_coordinates() if realization else None

    def _aperiodicity_exponent(self):
        B = (self.A > 0).astype(np.int64)
        P = B.copy()
        for m in range(1, self.k * self.k + 1):
            if (P > 0).all():
                return m
            P = np.minimum(P @ B, 1)
        raise NotAperiodic(f"no M0 <= k^2 = {self.k * self.k} with A^M0 > 0")

    # -- realization-backed geometry -------------------------------------

    def _continuation_coordinates(self):
        """Realized coordinate of the smallest-continuation point per symbol."""
        out = []
        for i in range(self.k):
            stream = [i]
            for _ in range(_CONTINUATION_STEPS):
                stream.append(self._smallest_successor[stream[-1]])
            lo, hi = self.realization.intervals[stream[-1]]
            x = 0.5 * (lo + hi)
            for t in range(len(stream) - 2, -1, -1):
                x = self.realization.branches[(stream[t], stream[t + 1])](x)
            out.append(x)
        return out

    def rep_coordinate(self, word):
        """Realized coordinate of word + smallest continuation (backward fold)."""
        if self.realization is None:
            raise NoRealization("system has no geometric realization")
        stream = list(word)
        x = self._rep_base[stream[-1]]
        for t in range(len(stream) - 2, -1, -1):
            x = self.realization.branches[(stream[t], stream[t + 1])](x)
        return x

    def index(self, depth):
        """Cylinder catalogue at the given depth (cached)."""
        if depth < 1:
            raise ValueError("depth must be >= 1")
        if depth in self._indices:
            return self._indices[depth]
        k, A = self.k, self.A
        if 1 not in self._indices:
            words = np.arange(k, dtype=np.int64)
            sym = words.astype(np.int16)
            if self.realization is not None:
                lo = np.array([iv[0] for iv in self.realization.intervals])
                hi = np.array([iv[1] for iv in self.realization.intervals])
                rep = np.array(self._rep_base)
            else:
                lo = hi = rep = np.full(k, np.nan)
            self._indices[1] = CylinderIndex(1, words, sym, sym, np.zeros(k, np.int64), lo, hi, rep)
        for n in range(2, depth + 1):
            if n in self._indices:
                continue
            prev = self._indices[n - 1]
            shift = k ** (n - 1)
            parts_w, parts_tail, parts_first = [], [], []
            for v in range(k):
                mask = A[v, prev.first] == 1
                tails = np.nonzero(mask)[0].astype(np.int64)
                parts_w.append(v * shift + prev.words[tails])
                parts_tail.append(tails)
                parts_first.append(np.full(tails.shape, v, np.int16))
            words = np.concatenate(parts_w)
            tail = np.concatenate(parts_tail)
            first = np.concatenate(parts_first)
            # per-prepend blocks are already sorted and blocks are increasing in v
            last = prev.last[tail]
            if self.realization is not None:
                lo = np.empty(len(words))
                hi = np.empty(len(words))
                rep = np.empty(len(words))
                second = prev.first[tail]
                for i in range(k):
                    for j in range(k):
                        if not A[i, j]:
                            continue
                        m = (first == i) & (second == j)
                        if not m.any():
                            continue
                        g = self.realization.branches[(i, j)]
                        lo[m] = g(prev.lo[tail[m]])
                        hi[m] = g(prev.hi[tail[m]])
                        rep[m] = g(prev.rep[tail[m]])
            else:
                lo = hi = rep = np.full(len(words), np.nan)
            self._indices[n] = CylinderIndex(n, words, first, last, tail, lo, hi, rep)
        return self._indices[depth]

    # -- word-level operations -------------------------------------------

    def is_admissible(self, word):
        return all(self.A[a, b] == 1 for a, b in zip(word, word[1:]))

    def interval_frac(self, word):
        """Exact interval of a word (affine realizations)."""
        if self.realization is None:
            raise NoRealization("system has no geometric realization")
        ivals = self.realization.interval_frac(self.A)
        lo, hi = ivals[word[-1]]
        for t in range(len(word) - 2, -1, -1):
            g = self.realization.branches[(word[t], word[t + 1])]
            lo, hi = g.frac(lo), g.frac(hi)
        return lo, hi


def build_system(k, A, realization_spec=None):
    """Validate and build a system.

    ``realization_spec`` maps transition pairs ``(i, j)`` to branch
    descriptions: ``("affine", a, b)`` or ``("expr", text, dmin, dmax)``; the
    key ``"constants"`` may carry ``(c0, gamma, gamma1)``.
    """
    A = np.asarray(A, dtype=np.int8)
    realization = None
    if realization_spec is not None:
        consts = realization_spec.get("constants", (None, None, None))
        branches = {}
        for key, val in realization_spec.items():
            if key == "constants":
                continue
            i, j = key
            if val[0] == "affine":
                branches[(i, j)] = BranchMap("affine", a=val[1], b=val[2])
            elif val[0] == "expr":
                branches[(i, j)] = BranchMap("expr", expr=val[1], dmin=val[2], dmax=val[3])
            else:
                raise ValueError(f"unknown branch spec {val!r}")
        realization = Realization(int(k), A, branches, *consts)
    system = SymbolicSystem(k, A, realization)
    if realization is not None:
        _check_expansion_bounds(system)
    return system


def _check_expansion_bounds(system, depth=4, samples=16):
    """Spot-check the two-sided expansion bound on sampled cylinder pairs."""
    r = system.realization
    for m in range(1, depth):
        idx = system.index(m + 1)
        take = np.linspace(0, idx.n - 1, min(samples, idx.n)).astype(int)
        for t in take:
            lo, hi = idx.lo[t], idx.hi[t]
            if hi - lo <= 0:
                continue
            word = decode_word(idx.words[t], system.k, m + 1)
            x, y = lo, hi
            for j in range(m):
                g = r.branches[(word[j], word[j + 1])]
                x = g.inverse(x, *r.intervals[word[j + 1]])
                y = g.inverse(y, *r.intervals[word[j + 1]])
            d0, dm = hi - lo, abs(y - x)
            if not (r.c0 * r.gamma**m * d0 <= dm * (1 + 1e-9) and dm <= r.gamma1**m / r.c0 * d0 * (1 + 1e-9)):
                raise RealizationOverlap(
                    f"expansion bound violated on sampled {m}-cylinder {word}"
                )


def admissible_words(system, n):
    """All admissible words of n symbols, lexicographically sorted."""
    if n < 1:
        raise ValueError("n must be >= 1")
    idx = system.index(n)
    return [decode_word(c, system.k, n) for c in idx.words]


def cylinder_of(system, word):
    word = tuple(int(s) for s in word)
    if not system.is_admissible(word):
        raise NotAdmissible(f"word {word} is not admissible")
    if system.realization is None:
        raise NoRealization("system has no geometric realization")
    lo, hi = system.realization.intervals[word[-1]]
    for t in range(len(word) - 2, -1, -1):
        g = system.realization.branches[(word[t], word[t + 1])]
        lo, hi = g(lo), g(hi)
    return Cylinder(word, lo, hi, system)


def subcylinders(cyl, q):
    """All admissible extensions of a cylinder's word by q symbols."""
    if q < 1:
        raise ValueError("q must be >= 1")
    system = cyl.system
    words = [cyl.word]
    for _ in range(q):
        words = [w + (j,) for w in words for j in range(system.k) if system.A[w[-1], j]]
    return [cylinder_of(system, w) for w in words]


def representative(cyl):
    return PointRep(cyl.word, cyl.system.rep_coordinate(cyl.word), cyl.system)


def metric_D(x, y, max_depth=200):
    """Cylinder metric: diameter of the smallest cylinder containing both
    points, 1 if they share no first symbol, 0 for equal streams."""
    system = x.system
    if x.symbol(0) != y.symbol(0):
        return 1.0
    prefix = [x.symbol(0)]
    for j in range(1, max_depth):
        a, b = x.symbol(j), y.symbol(j)
        if a != b:
            return cylinder_of(system, tuple(prefix)).diameter
        prefix.append(a)
    return 0.0


@dataclass
class DistortionReport:
    ratio_min: float
    ratio_max: float
    rho_est: float
    p0_est: int
    colength_max: dict

    def __iter__(self):
        return iter((self.ratio_min, self.ratio_max, self.p0_est, self.rho_est))


def distortion_ratios(system, n_max):
    """Diameter ratios of subcylinders over cylinders up to depth ``n_max``.

    ``rho_est`` is the smallest co-length-1 ratio (the lower distortion
    constant); ``p0_est`` the smallest co-length with all ratios <= rho_est.
    """
    if system.realization is None:
        raise NoRealization("distortion diagnostics need a realization")
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    k = system.k
    ratios1 = []
    for n in range(2, n_max + 1):
        idx, par = system.index(n), system.index(n - 1)
        pidx = par.locate(idx.words // k)
        ratios1.append(idx.diam / par.diam[pidx])
    allr = np.concatenate(ratios1)
    ratio_min, ratio_max = float(allr.min()), float(allr.max())
    rho_est = ratio_min
    colength_max = {1: ratio_max}
    p0_est = None
    for q in range(1, n_max):
        worst = 0.0
        for n in range(q + 1, n_max + 1):
            idx, anc = system.index(n), system.index(n - q)
            aidx = anc.locate(idx.words // k**q)
            worst = max(worst, float((idx.diam / anc.diam[aidx]).max()))
        colength_max[q] = worst
        if worst <= rho_est * (1 + 1e-12):
            p0_est = q
            break
    if p0_est is None:
        raise NoRealization(
            f"no co-length <= {n_max - 1} contracts below rho_est={rho_est}; deepen n_max"
        )
    return DistortionReport(ratio_min, ratio_max, rho_est, p0_est, colength_max)
