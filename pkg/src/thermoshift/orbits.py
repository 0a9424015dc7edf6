"""Periodic orbits of the suspension flow, truncated zeta function and the
prime-orbit counting comparison.

Orbits correspond to primitive cyclic admissible words; their flow periods
are roof sums over the exact periodic points (closed-form fixed points for
affine branches, iterated otherwise).
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.integrate

from .errors import DivergentRegion, DomainError, TruncationBias
from .fields import ScalarField, as_field
from .symbolic import decode_word

_FIXED_POINT_ROUNDS = 90


def fixed_point_count(system, n):
    """Number of n-periodic sequences: trace of A^n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    P = np.linalg.matrix_power(system.A.astype(np.int64), n)
    return int(np.trace(P))


def _admissible_codes(system, n):
    """Sorted admissible word codes at depth n (codes only, no geometry)."""
    k = system.k
    codes = np.arange(k, dtype=np.int64)
    for _ in range(n - 1):
        last = codes % k
        parts = [codes[system.A[last, j] == 1] * k + j for j in range(k)]
        codes = np.concatenate(parts)
        codes.sort()
    return codes


def _necklace_codes(system, n):
    """Primitive cyclic words of length n, as their minimal-rotation codes,
    restricted to cyclically admissible words."""
    k = system.k
    codes = _admissible_codes(system, n)
    first = codes // k ** (n - 1)
    last = codes % k
    codes = codes[system.A[last, first] == 1]
    if n == 1:
        return codes
    rot = codes.copy()
    minrot = codes.copy()
    period = np.zeros(len(codes), np.int64)
    base = k ** (n - 1)
    for j in range(1, n):
        rot = (rot % base) * k + rot // base
        np.minimum(minrot, rot, out=minrot)
        hit = (period == 0) & (rot == codes)
        period[hit] = j
    keep = (period == 0) & (codes == minrot)
    return codes[keep]


def _digits(codes, k, n):
    """(n, len) array of word digits, most significant first."""
    out = np.empty((n, len(codes)), np.int64)
    c = codes.copy()
    for t in range(n - 1, -1, -1):
        out[t] = c % k
        c //= k
    return out


def _cycle_points(system, codes, n):
    """Realized coordinates of all n rotations of each periodic word.

    Returns an (n, len) array: row t holds the point whose symbol stream is
    the rotation starting at position t."""
    r = system.realization
    k = system.k
    dig = _digits(codes, k, n)
    trans = np.empty((n, len(codes)), np.int64)
    for t in range(n):
        trans[t] = dig[t] * k + dig[(t + 1) % n]
    affine = all(br.kind == "affine" for br in r.branches.values())
    if affine:
        a_tab = np.zeros(k * k)
        b_tab = np.zeros(k * k)
        for (i, j), br in r.branches.items():
            a_tab[i * k + j] = br.a
            b_tab[i * k + j] = br.b
        A_comp = np.ones(len(codes))
        B_comp = np.zeros(len(codes))
        for t in range(n):
            a, b = a_tab[trans[t]], b_tab[trans[t]]
            B_comp = A_comp * b + B_comp
            A_comp = A_comp * a
        x0 = B_comp / (1.0 - A_comp)
    else:
        x0 = np.full(len(codes), 0.5)
        for _ in range(_FIXED_POINT_ROUNDS):
            x = x0
            for t in range(n - 1, -1, -1):
                x = _branch_apply_by_transition(system, trans[t], x)
            x0 = x
    pts = np.empty((n, len(codes)))
    pts[0] = x0
    for t in range(n - 1, 0, -1):
        nxt = pts[(t + 1) % n]
        pts[t] = _branch_apply_by_transition(system, trans[t], nxt)
    return pts


def _branch_apply_by_transition(system, tcodes, x):
    r = system.realization
    k = system.k
    out = np.empty_like(x)
    for (i, j), br in r.branches.items():
        m = tcodes == i * k + j
        if m.any():
            out[m] = br(x[m])
    return out


def _roof_on_points(system, tau, pts, codes, n):
    """Periods: sum of the roof over the cycle points (exact periodic points
    for callables, cyclic window sums for cylinder fields)."""
    if isinstance(tau, (int, float)):
        return np.full(len(codes), float(tau) * n)
    if isinstance(tau, ScalarField):
        k, dF = system.k, tau.depth
        idx = system.index(dF)
        dig = _digits(codes, k, n)
        total = np.zeros(len(codes))
        for t in range(n):
            w = np.zeros(len(codes), np.int64)
            for d in range(dF):
                w = w * k + dig[(t + d) % n]
            total += tau.values[idx.locate(w)]
        return total
    return sum(tau(pts[t]) for t in range(n))


@dataclass(frozen=True)
class PeriodicOrbit:
    word: tuple
    period: float

    @property
    def length(self):
        return len(self.word)


def primitive_orbits(system, tau, n_max):
    """All primitive closed orbits of word length <= n_max with their flow
    periods; canonical form is the minimal rotation."""
    out = []
    for n, codes, periods in _orbit_arrays(system, tau, n_max):
        for c, p in zip(codes, periods):
            out.append(PeriodicOrbit(decode_word(int(c), system.k, n), float(p)))
    return out


def _orbit_arrays(system, tau, n_max):
    for n in range(1, n_max + 1):
        codes = _necklace_codes(system, n)
        if len(codes) == 0:
            continue
        pts = _cycle_points(system, codes, n)
        periods = _roof_on_points(system, tau, pts, codes, n)
        yield n, codes, periods


def flow_entropy(system, tau, depth, tol=1e-12):
    """Topological entropy of the suspension flow: root of Pr(-s tau) = 0."""
    from .thermo import solve_pressure_root

    return solve_pressure_root(system, 0.0, tau, depth, tol)


def li(x):
    """Logarithmic integral int_2^x du/log u by adaptive quadrature
    (log-spaced panels keep the subdivision shallow for large x)."""
    if x <= 2:
        raise DomainError("li(x) defined here for x > 2")
    edges = [2.0]
    while edges[-1] < x:
        edges.append(min(x, edges[-1] * 100.0))
    total = 0.0
    for a, b in zip(edges, edges[1:]):
        val, _ = scipy.integrate.quad(lambda u: 1.0 / math.log(u), a, b, limit=200, epsrel=1e-12)
        total += val
    return total


@dataclass
class CountingReport:
    lambdas: np.ndarray
    pi: np.ndarray
    li_vals: np.ndarray
    ratios: np.ndarray
    h_T: float
    n_max: int
    tau_min: float
    horizon: float
    biased: np.ndarray  # lambda beyond the unbiased enumeration horizon
    lattice_flag: bool


def counting_report(system, tau, lambda_grid=None, n_max=16, depth=10, lattice=None, tol=1e-10):
    """pi(lambda) against li(e^{h_T lambda}).

    Periods are enumerated exactly up to word length n_max; the unbiased
    horizon is n_max * tau_min.  A lattice roof gets flagged: the ratio curve
    oscillates and carries no convergence claim."""
    tau_f = as_field(system, tau, depth)
    tau_min = float(tau_f.values.min())
    horizon = n_max * tau_min
    if lambda_grid is None:
        lambda_grid = np.linspace(horizon * 0.9 / 12, 0.9 * horizon, 12)
    lambda_grid = np.asarray(lambda_grid, float)
    if lattice is None:
        lattice = isinstance(tau, ScalarField)
        if not lattice and not isinstance(tau, (int, float)):
            from .dolgopyat import select_branch_pair, temporal_increment_bound

            try:
                pair = select_branch_pair(system, max(2, system.M0 + 1))
                lattice = temporal_increment_bound(pair, tau, grid_size=256).degenerate
            except Exception:
                lattice = False
        elif isinstance(tau, (int, float)):
            lattice = True
    periods = []
    for _, _, pers in _orbit_arrays(system, tau, n_max):
        periods.append(pers)
    all_periods = np.sort(np.concatenate(periods))
    h_T = flow_entropy(system, tau, depth, tol)
    pi_vals = np.searchsorted(all_periods, lambda_grid, side="right")
    li_vals = np.array([li(math.exp(h_T * lam)) if h_T * lam > math.log(2) + 1e-9 else np.nan for lam in lambda_grid])
    ratios = pi_vals / li_vals
    biased = lambda_grid > horizon
    if biased.any():
        warnings.warn(
            f"{int(biased.sum())} lambda values beyond the unbiased horizon {horizon}",
            TruncationBias,
        )
    return CountingReport(
        lambda_grid, pi_vals, li_vals, ratios, h_T, n_max, tau_min, horizon, biased, bool(lattice)
    )


@dataclass
class ZetaValue:
    value: complex  # spectrally tail-completed evaluation
    truncated: complex  # bare truncation at n_max
    tail_bound: float
    n_max: int
    divergent: bool

    def __complex__(self):
        return self.value


def zeta_truncated(system, tau, s, n_max, depth=None, tol=1e-12):
    """The dynamical zeta function via log zeta = sum_n (1/n) sum_{period-n
    points} e^{-s tau_n}.

    The per-n sums are traces of powers of the depth-d weighted matrix (exact
    for cylinder-constant roofs), evaluated from its eigenvalues; the same
    eigenvalues supply the spectral completion of the tail, which is what the
    headline accuracy requires (bare truncation stalls near 1e-7 at n_max=40).
    Outside the convergent half-plane the bare truncation is returned and
    flagged."""
    from .thermo import pressure, transfer_matrix

    s = complex(s)
    if depth is None:
        depth = 1 if isinstance(tau, (int, float)) else (tau.depth if isinstance(tau, ScalarField) else 8)
    tau_vals = as_field(system, tau, depth + 1).values
    mat = transfer_matrix(system, (-s * tau_vals).astype(np.complex128), depth).toarray()
    eig = np.linalg.eigvals(mat)
    ns = np.arange(1, n_max + 1)
    powers = eig[None, :] ** ns[:, None]
    log_trunc = complex((powers.sum(axis=1) / ns).sum())
    pr = pressure(system, ScalarField(system, depth + 1, -s.real * tau_vals), depth, tol)
    q = math.exp(pr)
    if q < 1:
        tail_bound = q ** (n_max + 1) / ((n_max + 1) * (1 - q))
    else:
        tail_bound = math.inf
    divergent = not bool(np.abs(eig).max() < 1)
    if divergent:
        warnings.warn(f"Re(s)={s.real} at or below the flow entropy: tail not summable", DivergentRegion)
        value = np.exp(log_trunc)
    else:
        log_full = complex(-np.log(1.0 - eig).sum())
        value = np.exp(log_full)
    return ZetaValue(complex(value), complex(np.exp(log_trunc)), tail_bound, n_max, divergent)
