"""Ruelle transfer operators with real weights, pressure and Gibbs data.

Functions are discretized on depth-``d`` cylinders and the operator becomes a
sparse nonnegative matrix: the row of a word ``C`` collects its one-symbol
preimage extensions ``v.C`` with weight ``exp(g(v.C))`` evaluated at the
depth-``d+1`` representative.  This is exact for locally constant data.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import BracketFailure, DepthMismatch, NoConvergence, NonPositiveEigenvector
from .fields import ScalarField, as_field, constant_field, eval_at_level_reps


def operator_arrays(system, depth):
    """Per-prepend-symbol gather arrays for the depth-``depth`` operator.

    Returns a list over symbols v of (row_idx, col_idx, weight_idx): rows are
    depth-d words C with A[v, C_0] = 1, columns the depth-d prefix of v.C,
    weight positions the full d+1 word v.C.
    """
    cache = getattr(system, "_op_arrays", None)
    if cache is None:
        cache = system._op_arrays = {}
    if depth in cache:
        return cache[depth]
    idx = system.index(depth)
    idx1 = system.index(depth + 1)
    k = system.k
    out = []
    for v in range(k):
        rows = np.flatnonzero(system.A[v, idx.first] == 1)
        cols = system.index(depth).locate(v * k ** (depth - 1) + idx.words[rows] // k)
        wts = idx1.locate(v * k**depth + idx.words[rows])
        out.append((rows, cols, wts))
    cache[depth] = out
    return out


def transfer_matrix(system, gvals, depth):
    """Sparse matrix of L_g at depth ``depth``; ``gvals`` indexed by depth+1 words."""
    n = system.index(depth).n
    parts_r, parts_c, parts_d = [], [], []
    for rows, cols, wts in operator_arrays(system, depth):
        parts_r.append(rows)
        parts_c.append(cols)
        parts_d.append(np.exp(gvals[wts]))
    data = np.concatenate(parts_d)
    mat = sp.csr_matrix(
        (data, (np.concatenate(parts_r), np.concatenate(parts_c))), shape=(n, n)
    )
    return mat


def transfer_apply(system, g, h):
    """One application of L_g to a depth-``d`` field (result at depth ``d``)."""
    depth = h.depth
    gfield = as_field(system, g, depth + 1, complex_=np.iscomplexobj(getattr(g, "values", None)))
    out = np.zeros(system.index(depth).n, dtype=h.values.dtype)
    wvals = np.exp(gfield.values)
    for rows, cols, wts in operator_arrays(system, depth):
        out[rows] += wvals[wts] * h.values[cols]
    return type(h)(system, depth, out)


class Measure:
    """Nonnegative cylinder weights at one depth, with marginals for shorter
    words and an optional one-step refinement factor for longer ones."""

    def __init__(self, system, depth, weights, refine_vals=None):
        self.system = system
        self.depth = depth
        self.weights = np.asarray(weights, dtype=np.float64)
        self.refine_vals = refine_vals  # multiplicative weight of the leading depth+1 window
        self._marginals = {depth: self.weights}

    def total(self):
        return float(self.weights.sum())

    def marginal(self, n):
        """Weights on depth-``n`` cylinders, n <= depth (additivity under refinement)."""
        if n in self._marginals:
            return self._marginals[n]
        if not 1 <= n < self.depth:
            raise DepthMismatch("marginal depth out of range")
        prev = self.marginal(n + 1)
        idxn = self.system.index(n)
        prefixes = self.system.index(n + 1).words // self.system.k
        starts = np.flatnonzero(np.r_[True, prefixes[1:] != prefixes[:-1]])
        sums = np.add.reduceat(prev, starts)
        out = np.zeros(idxn.n)
        out[idxn.locate(prefixes[starts])] = sums
        self._marginals[n] = out
        return out

    def mass(self, word):
        from .symbolic import encode_word

        word = tuple(int(s) for s in word)
        n = len(word)
        k = self.system.k
        if n <= self.depth:
            idx = self.system.index(n)
            return float(self.marginal(n)[idx.locate(np.array([encode_word(word, k)]))[0]])
        if self.refine_vals is None:
            raise DepthMismatch("measure has no refinement factor for deeper cylinders")
        idx1 = self.system.index(self.depth + 1)
        factor = 1.0
        while n > self.depth:
            code = encode_word(word[: self.depth + 1], k)
            factor *= self.refine_vals[idx1.locate(np.array([code]))[0]]
            word = word[1:]
            n -= 1
        return factor * self.mass(word)


@dataclass
class RPFData:
    lam: float
    h: ScalarField
    nu_hat: Measure
    iterations: int
    residual: float


def _power_iteration(mat, tol, max_iter):
    n = mat.shape[0]
    x = np.full(n, 1.0)
    lam = 1.0
    for it in range(max_iter):
        y = mat @ x
        ratios = y / x
        lo, hi = ratios.min(), ratios.max()
        lam = 0.5 * (lo + hi)
        if hi - lo <= tol * max(hi, 1e-300):
            return y / y.max(), lam, it + 1
        x = y / y.max()
    raise NoConvergence(f"power iteration did not reach tol={tol} in {max_iter} iterations")


def rpf_solve(system, g, depth, tol=1e-12, max_iter=100000):
    """Leading eigendata of L_g at depth ``depth``.

    Returns eigenvalue lambda > 0, positive eigenfunction h normalized by
    integral h d(nu_hat) = 1 and the adjoint eigenmeasure nu_hat of mass 1.
    """
    gfield = as_field(system, g, depth + 1)
    mat = transfer_matrix(system, gfield.values, depth)
    x, lam_f, it_f = _power_iteration(mat, tol, max_iter)
    matT = mat.T.tocsr()
    y, lam_a, it_a = _power_iteration(matT, tol, max_iter)
    if (x <= 0).any() or (y <= 0).any():
        raise NonPositiveEigenvector("leading eigenvector not strictly positive (bug)")
    lam = float((y @ (mat @ x)) / (y @ x))
    residual = float(np.abs(mat @ x - lam * x).max() / (lam * x.max()))
    if residual > 100 * tol:
        raise NoConvergence(f"eigen residual {residual} above tolerance")
    nu_hat_w = y / y.sum()
    gv = gfield.values
    refine = np.exp(gv) / lam
    nu_hat = Measure(system, depth, nu_hat_w, refine_vals=refine)
    h = x / float(x @ nu_hat_w)
    return RPFData(lam, ScalarField(system, depth, h), nu_hat, it_f + it_a, residual)


def pressure(system, g, depth, tol=1e-12):
    """Topological pressure ln(lambda) of the weighted shift."""
    return math.log(rpf_solve(system, g, depth, tol=tol).lam)


def pressure_with_refinement_gap(system, g, depth, tol=1e-12):
    """Pressure at depth and depth+2; the gap is a discretization-error proxy
    for data that is not locally constant."""
    p1 = pressure(system, g, depth, tol)
    p2 = pressure(system, g, depth + 2, tol)
    return p1, p2, abs(p2 - p1)


def _combine(system, f, tau, coef, depth):
    ff = as_field(system, f, depth)
    tf = as_field(system, tau, depth)
    return ScalarField(system, depth, ff.values + coef * tf.values)


def solve_pressure_root(system, f, tau, depth, tol=1e-12):
    """The unique P with Pr(f - P tau) = 0, by bisection.

    Uses strict monotone decrease of P -> Pr(f - P tau) (slope <= -tau_min).
    """
    tauf = as_field(system, tau, depth + 1)
    tau_min, tau_max = float(tauf.values.min()), float(tauf.values.max())
    if tau_min <= 0:
        raise BracketFailure(f"roof must be positive, measured min {tau_min}")
    pr_f = pressure(system, f, depth, tol)
    lo = pr_f / tau_max - 1.0
    hi = pr_f / tau_min + 1.0

    def pr(P):
        return pressure(system, _combine(system, f, tau, -P, depth + 1), depth, tol)

    pr_lo, pr_hi = pr(lo), pr(hi)
    grow = 0
    while pr_lo < 0 and grow < 8:
        lo -= 2.0**grow
        pr_lo = pr(lo)
        grow += 1
    grow = 0
    while pr_hi > 0 and grow < 8:
        hi += 2.0**grow
        pr_hi = pr(hi)
        grow += 1
    if not (pr_lo >= 0 >= pr_hi):
        raise BracketFailure(f"no sign change on bracket [{lo}, {hi}]")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = pr(mid)
        if abs(val) < tol:
            return mid
        if val > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass
class ThermoState:
    """RPF data of the offset-normalized operator family at one offset a."""

    system: object = field(repr=False)
    a: float
    P: float
    lam_a: float
    h_a: ScalarField
    nu_hat_a: Measure
    f_a: ScalarField  # normalized potential, depth + 1
    depth: int
    nu: Optional[Measure] = None  # Gibbs measure, present for a = 0
    normalization_residual: float = 0.0


def birkhoff_sum(g, m, x):
    """Sum of g over the first m shift iterates of a point."""
    total = 0.0
    for j in range(m):
        xx = x.shifted(j) if j else x
        if isinstance(g, ScalarField):
            from .symbolic import encode_word

            d = g.depth
            word = tuple(xx.symbol(t) for t in range(d))
            total += float(g.values[g.system.index(d).locate(np.array([encode_word(word, g.system.k)]))[0]])
        else:
            total += float(g(xx.coordinate))
    return total


def birkhoff_at_level_reps(system, gfield, n):
    """g_n at the representatives of all depth-``n`` cylinders (n-term sums)."""
    k = system.k
    idx = system.index(n)
    total = np.zeros(idx.n)
    for j in range(n):
        m = n - j
        suffix = idx.words % k**m
        sub = system.index(m)
        vals = eval_at_level_reps(gfield, m)
        total += vals[sub.locate(suffix)]
    return total


def normalized_potential(system, f, tau, a, depth, tol=1e-12, P=None):
    """ThermoState at offset ``a``: eigendata of L_{f-(P+a)tau} and the
    twisted potential with row sums exactly one."""
    if P is None:
        P = solve_pressure_root(system, f, tau, depth, tol)
    g = _combine(system, f, tau, -(P + a), depth + 1)
    data = rpf_solve(system, g, depth, tol)
    idx1 = system.index(depth + 1)
    k = system.k
    h = data.h.values
    pref = system.index(depth).locate(idx1.words // k)
    suff = system.index(depth).locate(idx1.words % k**depth)
    f_a_vals = g.values + np.log(h[pref]) - np.log(h[suff]) - math.log(data.lam)
    f_a = ScalarField(system, depth + 1, f_a_vals)
    ones = constant_field(system, depth, 1.0)
    resid = float(np.abs(transfer_apply(system, f_a, ones).values - 1.0).max())
    nu = None
    if a == 0:
        w = h * data.nu_hat.weights
        w = w / w.sum()
        nu = Measure(system, depth, w, refine_vals=np.exp(f_a_vals))
    return ThermoState(
        system=system,
        a=a,
        P=P,
        lam_a=data.lam,
        h_a=data.h,
        nu_hat_a=data.nu_hat,
        f_a=f_a,
        depth=depth,
        nu=nu,
        normalization_residual=resid,
    )


def gibbs_measure(system, f, tau, depth, tol=1e-12, P=None):
    """Gibbs measure of f - P tau plus the measured two-sided comparison
    constants over all cylinders up to ``depth``.

    The comparison weight uses full-word Birkhoff sums (n terms for an
    n-symbol word); the classical indexing differs by one bounded factor,
    which this convention absorbs into the reported constants.
    """
    state = normalized_potential(system, f, tau, 0.0, depth, tol, P=P)
    g = _combine(system, f, tau, -state.P, depth + 1)
    ratios = []
    for n in range(1, depth + 1):
        masses = state.nu.marginal(n)
        gn = birkhoff_at_level_reps(system, g, n)
        ratios.append(masses / np.exp(gn))
    allr = np.concatenate(ratios)
    return state.nu, float(allr.min()), float(allr.max())


def adjoint_invariance_residual(state, depth_cap):
    """max over cylinders C to depth_cap of |int L_{f^(0)} chi_C d nu - nu(C)|."""
    from .fields import indicator_field
    from .symbolic import decode_word

    system = state.system
    worst = 0.0
    nu_d = state.nu.weights
    for n in range(1, depth_cap + 1):
        idx = system.index(n)
        masses = state.nu.marginal(n)
        for i, code in enumerate(idx.words):
            chi = indicator_field(system, state.depth, decode_word(code, system.k, n))
            lhs = float(transfer_apply(system, state.f_a, chi).values @ nu_d)
            worst = max(worst, abs(lhs - masses[i]))
    return worst
