import numpy as np
import pytest

from thermoshift.dolgopyat import (
    apply_NJ,
    build_beta,
    build_partition,
    check_cohomology_witness,
    compute_params,
    cone_membership,
    contraction_envelope,
    dense_J_construct,
    measure_constants,
    phase_gap_report,
    select_branch_pair,
    temporal_increment_bound,
    verify_L2_contraction,
    verify_partition_inequalities,
    verify_pointwise_domination,
)
from thermoshift.errors import DegenerateRoof, NoAdmissiblePair, OverlappingSupports
from thermoshift.fields import ComplexField, ScalarField
from thermoshift.ruelle import make_params, random_cone_function
from thermoshift.symbolic import build_system, cylinder_of
from thermoshift.thermo import normalized_potential


@pytest.fixture(scope="module")
def consts(full2, quad_roof):
    return measure_constants(full2, 0.0, quad_roof, depth=10)


@pytest.fixture(scope="module")
def desk(full2, quad_roof, consts):
    """Small desk setup shared across the structural tests: b = 4, shallow
    blocks (co-length 4), operator depth 13."""
    pair = select_branch_pair(full2, 6)
    inc = temporal_increment_bound(pair, quad_roof)
    pair.delta_est = inc.delta_est
    dparams = compute_params(consts, inc.delta_est, N_user=6, eps1_user=1.0, mu_user=1e-6)
    scheme = build_partition(full2, 4.0, 1.0, 4)
    d_op = 6 + scheme.d_max
    state = normalized_potential(full2, 0.0, quad_roof, 0.0, d_op, P=consts.P)
    params = make_params(state, quad_roof, 4.0)
    return pair, dparams, scheme, state, params, d_op


def test_select_branch_pair_full_shift(full2):
    pair = select_branch_pair(full2, 3)
    assert pair.word1 == (0, 0, 0) and pair.word2 == (1, 0, 0)
    c1, c2 = pair.image_intervals()
    assert (c1.lo, c1.hi) == (0.0, 0.125)
    assert (c2.lo, c2.hi) == (0.5, 0.625)


def test_select_branch_pair_golden(golden):
    pair = select_branch_pair(golden, 3)
    assert pair.word1 == (0, 0, 0) and pair.word2 == (1, 0, 0)


def test_select_branch_pair_reconnects():
    # no transition 0 -> 0: the swapped word needs a reconnected prefix
    spec = {
        (0, 1): ("affine", "0.45", "0"),
        (1, 0): ("affine", "0.45", "0.5"),
        (1, 1): ("affine", "0.45", "0.55"),
    }
    system = build_system(2, [[0, 1], [1, 1]], spec)
    pair = select_branch_pair(system, 4)
    assert pair.word1 != pair.word2
    assert pair.word1[-1] == pair.word2[-1]
    assert system.is_admissible(pair.word2)
    assert pair.word1[0] != pair.word2[0]


def test_branch_identity_realized(full2, golden):
    # realized sigma^N(v_i(u)) = u within 1e-12 on a grid
    from thermoshift.dolgopyat import _fold_stages

    for system in (full2, golden):
        pair = select_branch_pair(system, 5)
        r = system.realization
        for word in pair.words:
            for s in range(system.k):
                if not system.A[pair.tail, s]:
                    continue
                lo, hi = r.intervals[s]
                u = np.linspace(lo + 1e-6, hi - 1e-6, 17)
                x = _fold_stages(system, word, u)[0].copy()
                for t in range(5):
                    nxt = word[t + 1] if t + 1 < 5 else s
                    g = r.branches[(word[t], nxt)]
                    x = np.array([g.inverse(v, *r.intervals[nxt]) for v in x])
                assert np.abs(x - u).max() < 1e-12


def test_increment_detector(full2, quad_roof, affine_roof):
    pair = select_branch_pair(full2, 6)
    const = temporal_increment_bound(pair, lambda x: np.full_like(x, 2.0))
    assert const.degenerate and const.delta_est < 1e-10
    aff = temporal_increment_bound(pair, affine_roof)
    assert aff.degenerate
    quad = temporal_increment_bound(pair, quad_roof)
    assert not quad.degenerate
    assert quad.delta_est == pytest.approx(2.0**-7, rel=1e-3)
    finer = temporal_increment_bound(pair, quad_roof, grid_size=4096)
    assert abs(finer.delta_est - quad.delta_est) <= 0.1 * quad.delta_est


def test_partition_dyadic_example(full2):
    # cap 0.1: the 16 depth-4 cylinders (1/8 > 0.1 >= 1/16)
    scheme = build_partition(full2, 10.0, 1.0, 2)
    assert len(scheme.C_words) == 16
    assert all(len(w) == 4 for w in scheme.C_words)
    assert len(scheme.D_words) == 64
    assert all(cylinder_of(full2, w).diameter == 1 / 64 for w in scheme.D_words)
    chk = verify_partition_inequalities(scheme, 0.5, 1, 2, exact=True)
    assert chk["C_blocks"] and chk["D_blocks"] and chk["exact"]


def test_partition_golden_variable_depth(golden):
    # co-length = p0 * q0 with measured p0 = 3 and a small q0 = 2
    scheme = build_partition(golden, 8.0, 1.0, 6)
    depths = {len(w) for w in scheme.C_words}
    assert len(depths) > 1  # block depth varies with branch history
    for w in scheme.C_words:
        assert cylinder_of(golden, w).diameter <= scheme.cap + 1e-15
    chk = verify_partition_inequalities(scheme, 0.4, 3, 2, exact=False)
    assert chk["C_blocks"] and chk["D_blocks"]


def test_partition_cap_too_small(full2):
    from thermoshift.errors import CapTooSmall

    with pytest.raises(CapTooSmall):
        build_partition(full2, 1e12, 1.0, 1, depth_cap=20)


def test_compute_params(consts):
    with pytest.raises(DegenerateRoof):
        compute_params(consts, 0.0)
    p = compute_params(consts, 2.0**-7, N_user=6, eps1_user=1.0, mu_user=1e-6)
    assert p.q0 == 11  # 32 rho^(q0-1) < theta1 - theta0 at rho = 1/2
    assert 0 < p.mu <= 0.25
    assert not p.certified and "NOT CERTIFIED" in p.banner
    assert p.mu_cert < 1e-16  # the certified damping underflows float spacing below one
    echo = p.formula_echo()
    assert echo["gamma^N"] == 64.0 and not echo["satisfied"]
    cert = compute_params(consts, 2.0**-7)
    assert cert.certified
    assert cert.N >= cert.N_cert


def test_build_beta_values_and_overlap(full2, desk):
    pair, dparams, scheme, state, params, d_op = desk
    mu = 1e-6
    beta0 = build_beta(full2, scheme, [], mu, pair, d_op)
    assert np.all(beta0.values == 1.0)
    beta1 = build_beta(full2, scheme, [(1, 0)], mu, pair, d_op)
    assert set(np.unique(beta1.values)) == {1.0 - mu, 1.0}
    X = pair.word1 + scheme.D_words[0]
    inside = cylinder_of(full2, X)
    idx = full2.index(d_op)
    sel = (idx.lo >= inside.lo - 1e-15) & (idx.hi <= inside.hi + 1e-15)
    assert np.all(beta1.values[sel] == 1.0 - mu)
    assert np.all(beta1.values[~sel] == 1.0)
    with pytest.raises(OverlappingSupports):
        build_beta(full2, scheme, [(1, 0), (1, 0)], mu, pair, d_op)
    # full dense J: exactly two values, Lipschitz within the displayed bound
    full_J = [(1, j) for j in range(len(scheme.D_words))]
    beta = build_beta(full2, scheme, full_J, mu, pair, d_op)
    gamma_bound = (
        2 * mu * dparams.consts.gamma1**6 / (dparams.consts.c0 * dparams.consts.rho ** (1 * 4 + 2))
        * abs(params.b) / dparams.eps1
    )
    assert beta.lip_D <= gamma_bound


def test_apply_NJ_bounds(full2, desk):
    pair, dparams, scheme, state, params, d_op = desk
    ones = ScalarField(full2, d_op, np.ones(full2.index(d_op).n))
    out = apply_NJ(params, 6, build_beta(full2, scheme, [], 1e-6, pair, d_op), ones)
    assert np.abs(out.values - 1.0).max() < 1e-12
    full_J = [(1, j) for j in range(len(scheme.D_words))]
    damped = apply_NJ(params, 6, build_beta(full2, scheme, full_J, 1e-6, pair, d_op), ones)
    assert np.all(damped.values <= 1.0 + 1e-15)
    assert np.all(damped.values >= 1.0 - 1e-6 - 1e-15)


def test_cone_membership(full2):
    ones = ScalarField(full2, 8, np.ones(full2.index(8).n))
    assert cone_membership(ones, 0.1)
    expu = ScalarField(full2, 8, np.exp(full2.index(8).rep))
    assert cone_membership(expu, 2.0)
    flat_zero = ScalarField(full2, 8, np.zeros(full2.index(8).n))
    assert not cone_membership(flat_zero, 10.0)


def test_dense_J_trivial_h(full2, desk):
    pair, dparams, scheme, state, params, d_op = desk
    zero = ComplexField(full2, d_op, np.zeros(full2.index(d_op).n, np.complex128))
    ones = ScalarField(full2, d_op, np.ones(full2.index(d_op).n))
    J = dense_J_construct(zero, ones, params, pair, scheme, 1e-6)
    assert J.dense
    assert all(i == 1 for i, _ in J.pairs)
    assert len(J.pairs) == len(scheme.D_words)


def test_dense_J_flat_and_L2(full2, desk):
    pair, dparams, scheme, state, params, d_op = desk
    ones = ScalarField(full2, d_op, np.ones(full2.index(d_op).n))
    flat = ComplexField(full2, d_op, np.ones(full2.index(d_op).n, np.complex128))
    J = dense_J_construct(flat, ones, params, pair, scheme, 1e-6)
    assert J.dense
    rep = verify_L2_contraction(state, params, scheme, J, pair, 1e-6, dparams.E * 4.0, trials=6, seed=3)
    assert rep["all_below_one"]
    # empty J: exact Cauchy-Schwarz equality path on the constant function
    beta0 = build_beta(full2, scheme, [], 1e-6, pair, d_op)
    NH = apply_NJ(params, 6, beta0, ones)
    ratio = float((NH.values**2) @ state.nu.weights) / float((ones.values**2) @ state.nu.weights)
    assert ratio == pytest.approx(1.0, abs=1e-12)


def test_pointwise_domination(full2, desk):
    pair, dparams, scheme, state, params, d_op = desk
    n = full2.index(d_op).n
    ones = ScalarField(full2, d_op, np.ones(n))
    flat = ComplexField(full2, d_op, np.ones(n, np.complex128))
    J = dense_J_construct(flat, ones, params, pair, scheme, 1e-6)
    rep = verify_pointwise_domination(flat, ones, params, pair, scheme, J, 1e-6, dparams.E * 4.0)
    assert rep["passed"]
    zero = ComplexField(full2, d_op, np.zeros(n, np.complex128))
    rep0 = verify_pointwise_domination(zero, ones, params, pair, scheme, J, 1e-6, dparams.E * 4.0)
    assert rep0["passed"]


def test_phase_reports(full2, desk):
    pair, dparams, scheme, state, params, d_op = desk
    rep = phase_gap_report(params, pair, scheme, dparams)
    assert rep["gap_ok"]
    assert rep["spread_below_eighth"]


def test_envelope(full2, desk):
    pair, dparams, scheme, state, params, d_op = desk
    n = full2.index(d_op).n
    ones = ScalarField(full2, d_op, np.ones(n))
    h = ComplexField(full2, d_op, np.exp(1j * full2.index(d_op).rep))
    h_sq, H_sq = contraction_envelope(state, params, pair, scheme, 1e-6, dparams.E * 4.0, h, ones, 3)
    for a, b in zip(h_sq, H_sq):
        assert a <= b * (1 + 1e-9)
    # geometric envelope: the worst per-step ratio dominates the sequence
    steps = np.array(H_sq) / np.array([1.0] + H_sq[:-1])
    rho_env = steps.max()
    assert rho_env < 1.0
    for m, val in enumerate(H_sq, start=1):
        assert val <= rho_env**m * (1 + 1e-9)


def test_cone_preservation_random(full2, desk):
    pair, dparams, scheme, state, params, d_op = desk
    full_J = [(1, j) for j in range(len(scheme.D_words))]
    beta = build_beta(full2, scheme, full_J, 1e-6, pair, d_op)
    rng = np.random.default_rng(12)
    E_abs_b = dparams.E * 4.0
    for _ in range(10):
        H = random_cone_function(full2, d_op, E_abs_b, rng)
        NH = apply_NJ(params, 6, beta, H)
        assert cone_membership(NH, E_abs_b)


def test_cohomology_witness(full2, affine_roof):
    rep = check_cohomology_witness(full2, affine_roof, lambda x: x / 2)
    assert rep["max_deviation"] < 1e-12
    assert rep["values"][0] == pytest.approx(1.0, abs=1e-12)
    assert rep["values"][1] == pytest.approx(1.5, abs=1e-12)


def test_no_full_row_rejected():
    # cyclic-ish matrix without any full successor row
    spec = {
        (0, 1): ("affine", "0.4", "0"),
        (1, 0): ("affine", "0.4", "0.5"),
        (1, 2): ("affine", "0.4", "0.55"),
        (2, 0): ("affine", "0.4", "0.9"),
    }
    system = build_system(3, [[0, 1, 0], [1, 0, 1], [1, 0, 0]], spec)
    with pytest.raises(NoAdmissiblePair):
        select_branch_pair(system, 4)
