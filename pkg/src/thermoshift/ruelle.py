"""Normalized complex transfer operators L_{f^(a) - i b tau} and empirical
contraction sweeps.

The b-weighted norm is ||h||_0 + Lip_D(h)/|b|; iterate norms are L2 against
the Gibbs measure at the operator's depth.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DepthMismatch, FitFailure
from .fields import ComplexField, ScalarField, as_field, constant_field, field_from_callable, indicator_field
from .thermo import Measure, ThermoState, operator_arrays


@dataclass
class OperatorParams:
    """Assembled L_ab = L_{f^(a) - i b tau} at the thermo state's depth."""

    thermo: ThermoState = field(repr=False)
    b: float
    tau_vals: np.ndarray = field(repr=False)  # depth+1 roof values, same grid as weights
    weights: np.ndarray = field(repr=False)  # complex weights exp(f_a - i b tau)
    real_weights: np.ndarray = field(repr=False)  # exp(f_a), for the dominating operator

    @property
    def system(self):
        return self.thermo.system

    @property
    def depth(self):
        return self.thermo.depth


def make_params(state: ThermoState, tau, b: float) -> OperatorParams:
    tau_field = as_field(state.system, tau, state.depth + 1)
    real = np.exp(state.f_a.values)
    weights = real * np.exp(-1j * b * tau_field.values)
    return OperatorParams(state, float(b), tau_field.values, weights, real)


def _apply_weights(system, depth, wvals, values):
    out = np.zeros(system.index(depth).n, dtype=np.result_type(wvals, values))
    for rows, cols, wts in operator_arrays(system, depth):
        out[rows] += wvals[wts] * values[cols]
    return out


def apply_Lab(params: OperatorParams, h) -> ComplexField:
    """One application of the complex operator to a depth-d field."""
    if h.depth > params.depth:
        raise DepthMismatch("test function deeper than the operator discretization")
    hv = h.refine(params.depth).values.astype(np.complex128)
    out = _apply_weights(params.system, params.depth, params.weights, hv)
    return ComplexField(params.system, params.depth, out)


def apply_Ma(params: OperatorParams, h) -> ScalarField:
    """The dominating normalized operator M_a (b = 0 weights)."""
    hv = h.refine(params.depth).values
    out = _apply_weights(params.system, params.depth, params.real_weights, hv)
    return ScalarField(params.system, params.depth, out)


def l2_norm(values, nu: Measure):
    return float(np.sqrt(np.abs(values) ** 2 @ nu.weights))


def lip_norm_b(h, b: float) -> float:
    """||h||_0 + Lip_D(h)/|b| (requires |b| >= 1)."""
    if abs(b) < 1.0:
        raise ValueError("the b-weighted norm is used for |b| >= 1")
    return h.sup + h.lip_D / abs(b)


def iterate_norms(params: OperatorParams, h, N: int, m_max: int, nu: Measure, track_lip=False):
    """L2(nu) norms of L_ab^{N m} h for m = 1..m_max.

    The test function is rescaled to ||h||_{Lip,b} <= 1 first.
    """
    scale = lip_norm_b(h, params.b) if abs(params.b) >= 1 else h.sup
    cur = h.refine(params.depth).values.astype(np.complex128)
    if scale > 0:
        cur = cur / scale
    norms, lipb = [], []
    system, depth = params.system, params.depth
    for _ in range(m_max):
        for _ in range(N):
            cur = _apply_weights(system, depth, params.weights, cur)
        norms.append(l2_norm(cur, nu))
        if track_lip:
            fld = ComplexField(system, depth, cur)
            lipb.append(lip_norm_b(fld, params.b))
    if track_lip:
        return np.array(norms), np.array(lipb)
    return np.array(norms)


def domination_check(params: OperatorParams, h, m: int):
    """Max pointwise violation of |L_ab^m h| <= M_a^m |h| (should be <= 1e-12)."""
    hv = h.refine(params.depth).values.astype(np.complex128)
    dom = np.abs(hv)
    for _ in range(m):
        hv = _apply_weights(params.system, params.depth, params.weights, hv)
        dom = _apply_weights(params.system, params.depth, params.real_weights, dom)
    viol = np.abs(hv) - dom
    return float(viol.max())


def fit_rho(norms, N=None, skip=1):
    """exp(slope) of the least-squares line through (m, ln norm_m), m > skip."""
    m = np.arange(1, len(norms) + 1, dtype=float)
    y = np.log(np.maximum(norms, 1e-300))
    m, y = m[skip:], y[skip:]
    slope, intercept = np.polyfit(m, y, 1)
    resid = float(np.abs(y - (slope * m + intercept)).max())
    return float(np.exp(slope)), resid


@dataclass
class SweepCell:
    a: float
    b: float
    norms: dict  # h label -> norm sequence
    lipb: dict  # h label -> Lip,b norm sequence
    rho_hat: float  # worst fitted factor over the family
    rho_by_h: dict
    fit_residual: float
    monotone: bool  # strictly decreasing norms for every test function


@dataclass
class SweepResult:
    a_list: list
    b_list: list
    N: int
    m_max: int
    depth: int
    cells: dict  # (a, b) -> SweepCell
    h_labels: list
    refinement_audit: Optional[dict] = None


def default_h_family(system, depth):
    """Constant, rough (indicator) and oscillatory test functions."""
    idx3 = system.index(3)
    from .symbolic import decode_word

    word = decode_word(idx3.words[0], system.k, 3)
    fam = {
        "one": constant_field(system, depth, 1.0),
        "indicator3": indicator_field(system, depth, word),
        "osc": field_from_callable(system, depth, lambda x: np.exp(1j * x), complex_=True),
    }
    return fam


def contraction_sweep(
    system,
    f,
    tau,
    a_list,
    b_list,
    N,
    m_max,
    depth,
    h_family=None,
    tol=1e-12,
    audit_cell=None,
):
    """Iterate-norm sweep over an (a, b) grid; worst-case fitted factor per cell."""
    from .thermo import normalized_potential, solve_pressure_root

    P = solve_pressure_root(system, f, tau, depth, tol)
    state0 = normalized_potential(system, f, tau, 0.0, depth, tol, P=P)
    nu = state0.nu
    fam = h_family if h_family is not None else default_h_family(system, depth)
    labels = list(fam)
    cells = {}
    for a in a_list:
        state = state0 if a == 0 else normalized_potential(system, f, tau, a, depth, tol, P=P)
        for b in b_list:
            params = make_params(state, tau, b)
            norms_by, lip_by, rho_by = {}, {}, {}
            worst, worst_resid, mono = 0.0, 0.0, True
            for label, h in fam.items():
                norms, lipb = iterate_norms(params, h, N, m_max, nu, track_lip=True)
                norms_by[label] = norms
                lip_by[label] = lipb
                rho, resid = fit_rho(norms)
                rho_by[label] = rho
                worst = max(worst, rho)
                worst_resid = max(worst_resid, resid)
                mono = mono and bool(np.all(np.diff(norms) < 0))
            cells[(a, b)] = SweepCell(a, b, norms_by, lip_by, worst, rho_by, worst_resid, mono)
    result = SweepResult(list(a_list), list(b_list), N, m_max, depth, cells, labels)
    if audit_cell is not None:
        a, b = audit_cell
        state = normalized_potential(system, f, tau, a, depth + 2, tol, P=P)
        params = make_params(state, tau, b)
        label = labels[0]
        h_fine = fam[label].refine(depth + 2) if h_family is not None else default_h_family(system, depth + 2)[label]
        fine = iterate_norms(params, h_fine, N, m_max, state.nu)
        coarse = cells[(a, b)].norms[label]
        result.refinement_audit = {
            "cell": (a, b),
            "coarse": coarse,
            "fine": fine,
            "max_gap": float(np.abs(coarse - fine).max()),
        }
    return result


@dataclass
class ContractionFit:
    C_fit: float
    rho_fit: float
    eps_fit: float
    prefactor_slope: float
    witness_cells: list
    a0_box: tuple


def eventually_contracting_report(sweep: SweepResult, eps_grid, b_min=None):
    """Fit ||L^{Nm} h||_{Lip,b} <= C rho^{Nm} |b|^eps over the sweep cells.

    rho is the worst per-step decay of the Lip,b norms; eps the smallest grid
    value covering the growth of the residual prefactor in |b|; FitFailure
    when no rho < 1 fits (the lattice outcome).
    """
    b_min = b_min if b_min is not None else min(sweep.b_list)
    slopes, no_contraction = [], []
    pref = {}
    for (a, b), cell in sweep.cells.items():
        if abs(b) < b_min:
            continue
        for label, lipb in cell.lipb.items():
            rho, _ = fit_rho(lipb)
            slopes.append((rho, (a, b), label))
    rho_block = max(s[0] for s in slopes)
    witness = [s[1:] for s in slopes if s[0] == rho_block]
    rho_fit = rho_block ** (1.0 / sweep.N)
    if rho_fit >= 1.0 - 1e-10:
        raise FitFailure(f"no contracting fit: worst per-step factor {rho_fit}")
    for (a, b), cell in sweep.cells.items():
        if abs(b) < b_min:
            continue
        worst = 0.0
        for lipb in cell.lipb.values():
            m = np.arange(1, len(lipb) + 1)
            worst = max(worst, float((lipb / rho_block**m).max()))
        pref[b] = max(pref.get(b, 0.0), worst)
    bs = np.array(sorted(pref))
    ps = np.array([pref[b] for b in bs])
    slope_b = float(np.polyfit(np.log(bs), np.log(np.maximum(ps, 1e-300)), 1)[0]) if len(bs) > 1 else 0.0
    eps_candidates = [e for e in eps_grid if e >= slope_b]
    if not eps_candidates:
        raise FitFailure(f"prefactor grows like |b|^{slope_b}, above the eps grid")
    eps_fit = min(eps_candidates)
    C_fit = float((ps / bs**eps_fit).max())
    a_max = max(abs(a) for a, _ in sweep.cells)
    return ContractionFit(C_fit, rho_fit, eps_fit, slope_b, witness, (a_max, 1.0 / b_min))


def cone_constant(system, depth, values):
    """Exact max of |H(u)-H(u')| / (min(H(u),H(u')) D(u,u')) over pairs in a
    common depth-1 cylinder (the cone membership constant)."""
    from .fields import level_structure

    vals = np.asarray(values, dtype=np.float64)
    out = 0.0
    for lev in level_structure(system, depth):
        if lev.p == 0:
            continue
        hi = np.maximum.reduceat(vals, lev.starts)
        lo = np.minimum.reduceat(vals, lev.starts)
        if (lo <= 0).any():
            return math.inf
        cand = (hi - lo) / (lo * lev.diams)
        if cand.size:
            out = max(out, float(cand.max()))
    return out


def saturating_cone_function(system, depth, A_target, level):
    """Deterministic cone function using the whole oscillation budget at one
    prefix level: alternating sign in the digit at ``level``, scaled so the
    cone constant is exactly the target there."""
    idx = system.index(depth)
    digit = (idx.words // system.k ** (depth - 1 - level)) % system.k
    phi = np.where(digit % 2 == 0, -1.0, 1.0)
    from .fields import level_structure

    lev = level_structure(system, depth)[level]
    s = 0.5 * math.log1p(A_target * float(lev.diams.min()))
    return ScalarField(system, depth, np.exp(s * phi))


def random_cone_function(system, depth, A_target, rng):
    """A random strictly positive field with cone constant <= A_target.

    Hierarchical noise is scaled so that every per-level oscillation budget
    (exp(s * range) - 1 <= A_target * diam) holds, which implies membership.
    """
    from .fields import level_structure

    levels = level_structure(system, depth)
    phi = np.zeros(system.index(depth).n)
    for lev in levels:
        if lev.p == 0:
            continue
        noise = rng.standard_normal(len(lev.starts)) * lev.diams
        phi += np.repeat(noise, lev.counts)
    budget = []
    for lev in levels:
        if lev.p == 0:
            continue
        rng_p = np.maximum.reduceat(phi, lev.starts) - np.minimum.reduceat(phi, lev.starts)
        budget.append((float(rng_p.max()), float(lev.diams.min())))
    lo, hi = 0.0, 64.0
    for _ in range(48):
        s = 0.5 * (lo + hi)
        if all(math.expm1(s * r) <= A_target * d for r, d in budget if r > 0):
            lo = s
        else:
            hi = s
    return ScalarField(system, depth, np.exp(lo * phi))


def lasota_yorke_probe(system, f, tau, a, depth, trials, seed, m_list=(1, 2, 3, 4, 5), b=2.0, tol=1e-12):
    """Smallest A0 making both norm inequalities of the two-part estimate hold
    on random cone functions and random dominated complex functions."""
    from .fields import level_structure
    from .thermo import normalized_potential, solve_pressure_root

    P = solve_pressure_root(system, f, tau, depth, tol)
    state = normalized_potential(system, f, tau, a, depth, tol, P=P)
    params = make_params(state, tau, b)
    tau_f = as_field(system, tau, depth + 1)
    T = max(state.f_a.sup, state.f_a.lip_D, tau_f.sup, tau_f.lip_D)
    gamma = system.realization.gamma
    rng = np.random.default_rng(seed)
    A0 = 0.0
    level_data = [(lev.starts, lev.diams) for lev in level_structure(system, depth) if lev.p > 0]

    def pair_constant(numer, denom):
        """max over same-U_i pairs of |numer(u)-numer(u')| / (denom(u') D(u,u'))."""
        worst = 0.0
        for starts, diams in level_data:
            if np.iscomplexobj(numer):
                rng_v = np.maximum.reduceat(numer.real, starts) - np.minimum.reduceat(numer.real, starts)
                rng_i = np.maximum.reduceat(numer.imag, starts) - np.minimum.reduceat(numer.imag, starts)
                rng_v = np.sqrt(rng_v**2 + rng_i**2)
            else:
                rng_v = np.maximum.reduceat(numer, starts) - np.minimum.reduceat(numer, starts)
            dmin = np.minimum.reduceat(denom, starts)
            worst = max(worst, float((rng_v / (dmin * diams)).max()))
        return worst

    candidates = []
    for _ in range(trials):
        for B in (1.0, 10.0, 100.0):
            candidates.append((B, random_cone_function(system, depth, B, rng)))
    # deterministic budget-saturating functions pin the estimate (random draws
    # scatter below them)
    for B in (1.0, 10.0, 100.0):
        for level in (1, depth // 2, depth - 1):
            candidates.append((B, saturating_cone_function(system, depth, B, level)))
    for B, H in candidates:
        hv = H.values * np.exp(0.05j * rng.standard_normal(H.values.shape))
        Bh = pair_constant(hv, H.values)
        MH, Lh, Mabs = H.values.copy(), hv.copy(), np.abs(hv)
        for m in m_list:
            MH = _apply_weights(system, depth, params.real_weights, MH)
            Lh = _apply_weights(system, depth, params.weights, Lh)
            Mabs = _apply_weights(system, depth, params.real_weights, Mabs)
            lhs_a = pair_constant(MH, MH)
            A0 = max(A0, lhs_a / (B / gamma**m + T / (gamma - 1)))
            denom_b = (Bh / gamma**m) * MH + abs(b) * Mabs
            lhs_b = pair_constant(Lh, denom_b)
            A0 = max(A0, lhs_b)
    return A0
