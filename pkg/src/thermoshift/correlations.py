"""Suspension-flow correlation estimates under the Gibbs measure.

A seeded Markov sampler on depth-d cylinder states (exact transition kernel
from the normalized potential) produces long symbolic orbits; correlations
are time averages along the suspension with uniform flow-time sampling, and
decay rates come from a least-squares fit of the log-envelope.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BelowNoiseFloor, InsufficientSample
from .fields import as_field
from .kernels import sample_path

_CHUNK = 1 << 21


@dataclass
class MarkovApprox:
    """Forward shift kernel on depth-d cylinder states; stationary vector is
    the Gibbs marginal."""

    system: object = field(repr=False)
    depth: int
    succ_state: np.ndarray
    succ_cum: np.ndarray
    row_start: np.ndarray
    stationary: np.ndarray
    reps: np.ndarray
    roof: np.ndarray  # roof increment per state
    tau_min: float

    @property
    def n_states(self):
        return len(self.stationary)


def markov_approximation(state, tau, depth=None):
    """Transition kernel P[w -> shift(w) + a] = nu(w.a)/nu(w) built from the
    depth-(d+1) normalized weights; rows sum to one exactly and the
    stationary vector is the nu marginal."""
    system = state.system
    if depth is None:
        depth = state.depth
    if depth != state.depth:
        raise ValueError("kernel depth must match the thermo state depth")
    if state.nu is None:
        raise ValueError("markov approximation needs the a=0 state (Gibbs measure)")
    k = system.k
    idx = system.index(depth)
    idx1 = system.index(depth + 1)
    nu = state.nu.weights
    pref = idx.locate(idx1.words // k)
    suff = idx.locate(idx1.words % k**depth)
    probs = np.exp(state.f_a.values) * nu[suff] / nu[pref]
    order = np.argsort(pref, kind="stable")
    rows, cols, p = pref[order], suff[order], probs[order]
    row_start = np.searchsorted(rows, np.arange(idx.n + 1), side="left").astype(np.int64)
    cum = p.copy()
    for r in range(idx.n):
        lo, hi = row_start[r], row_start[r + 1]
        cum[lo:hi] = np.cumsum(p[lo:hi])
        cum[hi - 1] = 1.0  # rows sum to one; pin the top to close float gaps
    tau_vals = as_field(system, tau, depth).values
    return MarkovApprox(
        system,
        depth,
        cols.astype(np.int32),
        cum,
        row_start,
        nu,
        idx.rep.copy(),
        tau_vals.astype(np.float64),
        float(tau_vals.min()),
    )


@dataclass
class OrbitSample:
    states: np.ndarray
    coords: np.ndarray
    cum_times: np.ndarray  # cumulative roof times, cum_times[0] = 0
    seed: int
    approx: MarkovApprox = field(repr=False)

    @property
    def length(self):
        return len(self.states)

    @property
    def total_time(self):
        return float(self.cum_times[-1])


def sample_orbit(approx, L, seed):
    """Deterministic seeded orbit of L symbols with its flow clock."""
    if L < 1:
        raise ValueError("L must be >= 1")
    rng = np.random.default_rng(seed)
    u0 = rng.random()
    start = int(np.searchsorted(np.cumsum(approx.stationary), u0))
    start = min(start, approx.n_states - 1)
    uniforms = rng.random(L - 1)
    states = sample_path(approx.succ_state, approx.succ_cum, approx.row_start, start, uniforms)
    coords = approx.reps[states]
    incs = approx.roof[states]
    cum = np.empty(L + 1)
    cum[0] = 0.0
    np.cumsum(incs, out=cum[1:])
    return OrbitSample(states, coords, cum, seed, approx)


@dataclass
class CorrelationCurve:
    t: np.ndarray
    C: np.ndarray
    stderr: np.ndarray
    sample_size: int
    delta: float
    obs_norms: tuple
    fitted: Optional[tuple] = None  # (C_amp, c_rate, r2) after fit_decay_rate


def _observable_norm(obs, grid=512):
    """Lipschitz constant of the observable on (coordinate, height) by finite
    differences on a grid (reported alongside the curve)."""
    xs = np.linspace(0.0, 1.0, grid)
    hs = np.linspace(0.0, 2.0, grid)
    vx = np.broadcast_to(obs(xs, 0.5 * np.ones_like(xs)), xs.shape)
    vh = np.broadcast_to(obs(0.5 * np.ones_like(hs), hs), hs.shape)
    gx = np.abs(np.diff(vx) / np.diff(xs)).max()
    gh = np.abs(np.diff(vh) / np.diff(hs)).max()
    return float(max(gx, gh))


def suspension_correlation(sample, A, B, t_grid, max_anchor_fraction=0.01):
    """Time-average estimate of the flow correlation C(t) along a suspension
    orbit, uniform flow-time sampling at step tau_min/10.

    t values snap to multiples of the sampling step.  Block-partitioned sums
    provide a standard error per lag."""
    approx = sample.approx
    delta = approx.tau_min / 10.0
    t_grid = np.asarray(t_grid, float)
    lags = np.unique(np.maximum(np.round(t_grid / delta).astype(np.int64), 0))
    t_snapped = lags * delta
    T_tot = sample.total_time
    if t_snapped.max() > max_anchor_fraction * T_tot:
        raise InsufficientSample(
            f"t_max {t_snapped.max():.3g} exceeds {max_anchor_fraction:.0%} of the flow time {T_tot:.3g}"
        )
    n_tot = int(T_tot / delta) - 1
    max_lag = int(lags.max())
    n_anchor = n_tot - max_lag
    cum = sample.cum_times
    coords = sample.coords

    def values(i0, i1):
        s = np.arange(i0, i1, dtype=np.float64) * delta
        j = np.searchsorted(cum, s, side="right") - 1
        h = s - cum[j]
        x = coords[j]
        return x, h

    n_lags = len(lags)
    cross_blocks, a_blocks, b_blocks, n_blocks = [], [], [], []
    tailA = np.empty(0)
    tailB = np.empty(0)
    sum_A = sum_B = 0.0
    for c0 in range(0, n_anchor, _CHUNK):
        c1 = min(c0 + _CHUNK, n_anchor)
        x, h = values(c0, c1 + max_lag)
        Av = np.broadcast_to(np.asarray(A(x, h), dtype=np.float64), x.shape)
        Bv = np.broadcast_to(np.asarray(B(x, h), dtype=np.float64), x.shape)
        An = Av[: c1 - c0]
        cross = np.array([float(An @ Bv[l : l + c1 - c0]) for l in lags])
        cross_blocks.append(cross)
        a_blocks.append(float(An.sum()))
        b_blocks.append(float(Bv[: c1 - c0].sum()))
        n_blocks.append(c1 - c0)
    cross_blocks = np.array(cross_blocks)  # (blocks, lags)
    counts = np.array(n_blocks, float)
    mean_A = sum(a_blocks) / counts.sum()
    mean_B = sum(b_blocks) / counts.sum()
    C = cross_blocks.sum(axis=0) / counts.sum() - mean_A * mean_B
    block_means = cross_blocks / counts[:, None] - mean_A * mean_B
    nb = len(n_blocks)
    stderr = block_means.std(axis=0, ddof=1) / math.sqrt(nb) if nb > 1 else np.full(n_lags, np.nan)
    return CorrelationCurve(
        t_snapped,
        C,
        stderr,
        int(counts.sum()),
        delta,
        (_observable_norm(A), _observable_norm(B)),
    )


def fit_decay_rate(curve, window, noise_floor=None):
    """Least-squares exponential fit of |C(t)| on the window.

    Oscillatory curves are fitted on the local maxima of |C| (the decay
    envelope); monotone curves directly.  Returns (C_amp, c_rate, r2)."""
    t, C = curve.t, np.abs(curve.C)
    lo, hi = window
    if noise_floor is None:
        finite = curve.stderr[np.isfinite(curve.stderr)]
        noise_floor = 5 * float(np.median(finite)) if len(finite) else 0.0
    sel = (t >= lo) & (t <= hi) & (C > noise_floor)
    if sel.sum() < 3:
        raise BelowNoiseFloor(
            f"only {int(sel.sum())} usable points in window [{lo}, {hi}] above floor {noise_floor:.3g}"
        )
    ts, cs = t[sel], C[sel]
    interior = np.flatnonzero((cs[1:-1] >= cs[:-2]) & (cs[1:-1] >= cs[2:])) + 1
    if len(interior) >= 4:
        ts, cs = ts[interior], cs[interior]
    y = np.log(cs)
    slope, intercept = np.polyfit(ts, y, 1)
    pred = slope * ts + intercept
    ss_res = float(((y - pred) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    fitted = (float(np.exp(intercept)), float(-slope), float(r2))
    curve.fitted = fitted
    return fitted
