import math

import numpy as np
import pytest

from thermoshift.errors import BracketFailure
from thermoshift.fields import ScalarField, constant_field
from thermoshift.symbolic import cylinder_of, representative
from thermoshift.thermo import (
    adjoint_invariance_residual,
    birkhoff_sum,
    gibbs_measure,
    normalized_potential,
    pressure,
    rpf_solve,
    solve_pressure_root,
    transfer_apply,
)

PHI = (1 + math.sqrt(5)) / 2


def test_birkhoff_constant(full2):
    x = representative(cylinder_of(full2, (0,)))
    assert birkhoff_sum(lambda _: 1.0, 5, x) == 5.0
    assert birkhoff_sum(lambda _: 0.0, 7, x) == 0.0


def test_birkhoff_at_periodic_point(full2, affine_roof):
    # point 010101... has coordinate 1/3; tau(1/3) + tau(2/3) = 7/6 + 4/3
    word = (0, 1) * 24
    x = representative(cylinder_of(full2, word))
    assert birkhoff_sum(affine_roof, 2, x) == pytest.approx(2.5, abs=1e-12)


def test_transfer_apply_counts(full2, golden):
    ones = constant_field(full2, 6, 1.0)
    out = transfer_apply(full2, 0.0, ones)
    assert np.abs(out.values - 2.0).max() < 1e-14
    onesg = constant_field(golden, 6, 1.0)
    outg = transfer_apply(golden, 0.0, onesg)
    first = golden.index(6).first
    # two preimages for cylinders starting with 0, one for those starting with 1
    assert np.all(outg.values[first == 0] == 2.0)
    assert np.all(outg.values[first == 1] == 1.0)
    # constant weight shifts by e^c
    out_c = transfer_apply(full2, lambda x: np.full_like(x, 0.7), ones)
    assert np.abs(out_c.values - 2 * math.exp(0.7)).max() < 1e-12


def test_rpf_full_shift(full2):
    data = rpf_solve(full2, 0.0, 8)
    assert data.lam == pytest.approx(2.0, abs=1e-12)
    assert np.abs(data.h.values - data.h.values[0]).max() < 1e-12
    # uniform Bernoulli eigenmeasure
    assert np.abs(data.nu_hat.weights - 2.0**-8).max() < 1e-12


def test_rpf_golden_eigenvalue(golden):
    data = rpf_solve(golden, 0.0, 8)
    assert data.lam == pytest.approx(PHI, abs=1e-10)


def test_rpf_bernoulli_column_stochastic(full2):
    g = ScalarField(full2, 1, np.log([1 / 3, 2 / 3]))
    data = rpf_solve(full2, g, 8)
    assert data.lam == pytest.approx(1.0, abs=1e-12)
    # nu_hat is the Bernoulli(1/3, 2/3) product measure
    idx = full2.index(8)
    expected = np.ones(idx.n)
    for t in range(8):
        digit = (idx.words // 2 ** (7 - t)) % 2
        expected *= np.where(digit == 0, 1 / 3, 2 / 3)
    assert np.abs(data.nu_hat.weights - expected).max() < 1e-12


def test_pressure_values(full2, golden):
    assert pressure(full2, 0.0, 8) == pytest.approx(math.log(2), abs=1e-12)
    assert pressure(golden, 0.0, 8) == pytest.approx(math.log(PHI), abs=1e-10)


def test_pressure_constant_shift_covariance(full2):
    rng = np.random.default_rng(7)
    g = ScalarField(full2, 3, rng.standard_normal(8))
    base = pressure(full2, g, 8)
    for c in (-1.0, 0.3, 2.0):
        shifted = ScalarField(full2, 3, g.values + c)
        assert pressure(full2, shifted, 8) == pytest.approx(base + c, abs=1e-12)


def test_pressure_depth_consistency_locally_constant(full2):
    rng = np.random.default_rng(3)
    g = ScalarField(full2, 3, rng.standard_normal(8))
    assert pressure(full2, g, 6) == pytest.approx(pressure(full2, g, 8), abs=1e-12)


def test_pressure_root_constant_roofs(full2):
    assert solve_pressure_root(full2, 0.0, 1.0, 8) == pytest.approx(math.log(2), abs=1e-12)
    assert solve_pressure_root(full2, 0.0, 2.0, 8) == pytest.approx(math.log(2) / 2, abs=1e-12)


def test_pressure_root_rejects_nonpositive_roof(full2):
    with pytest.raises(BracketFailure):
        solve_pressure_root(full2, 0.0, lambda x: x - 0.5, 6)


def test_pressure_root_depth_refinement(full2, quad_roof):
    # expression roofs converge geometrically in depth
    p = [solve_pressure_root(full2, 0.0, quad_roof, d) for d in (8, 11, 14)]
    gap1, gap2 = abs(p[1] - p[0]), abs(p[2] - p[1])
    assert gap1 < 2e-3
    assert gap2 < gap1 / 4


def test_gibbs_fair_coin(full2):
    nu, c1, c2 = gibbs_measure(full2, 0.0, 1.0, 10)
    for n in (1, 4, 8):
        assert np.abs(nu.marginal(n) - 2.0**-n).max() < 1e-12
    # deeper than the discretization depth, via the refinement factor
    assert nu.mass((0,) * 13) == pytest.approx(2.0**-13, abs=1e-15)
    assert c1 == pytest.approx(1.0, abs=1e-10)
    assert c2 == pytest.approx(1.0, abs=1e-10)


def test_gibbs_bernoulli_ratio_constant(full2):
    f = ScalarField(full2, 1, np.log([1 / 3, 2 / 3]))
    nu, c1, c2 = gibbs_measure(full2, f, 1.0, 10)
    assert c2 - c1 < 1e-10
    idx = full2.index(3)
    expected = np.ones(idx.n)
    for t in range(3):
        digit = (idx.words // 2 ** (2 - t)) % 2
        expected *= np.where(digit == 0, 1 / 3, 2 / 3)
    assert np.abs(nu.marginal(3) - expected).max() < 1e-12


def test_gibbs_golden_bounded_ratio(golden):
    nu, c1, c2 = gibbs_measure(golden, 0.0, 1.0, 12)
    assert 0 < c1 <= c2
    assert c2 / c1 < 10


def test_measure_additivity_and_invariance(full2, quad_roof):
    state = normalized_potential(full2, 0.0, quad_roof, 0.0, 8)
    nu = state.nu
    # additivity under refinement
    for n in (3, 5, 7):
        fine, coarse = nu.marginal(n + 1), nu.marginal(n)
        idxf = full2.index(n + 1)
        sums = np.zeros_like(coarse)
        np.add.at(sums, full2.index(n).locate(idxf.words // 2), fine)
        assert np.abs(sums - coarse).max() < 1e-14
    # sigma-invariance through the transfer identity
    ones = constant_field(full2, 8, 1.0)
    assert float(transfer_apply(full2, state.f_a, ones).values @ nu.weights) == pytest.approx(
        1.0, abs=1e-12
    )


def test_normalized_potential_full_shift_constant_roof(full2):
    state = normalized_potential(full2, 0.0, 1.0, 0.0, 8)
    assert np.abs(state.f_a.values + math.log(2)).max() < 1e-12
    assert state.normalization_residual < 1e-12
    assert state.lam_a == pytest.approx(1.0, abs=1e-12)
    # a-offset with constant roof multiplies the operator by e^{-a}
    st = normalized_potential(full2, 0.0, 1.0, 0.05, 8)
    assert st.lam_a == pytest.approx(math.exp(-0.05), abs=1e-12)
    assert st.normalization_residual < 1e-12


def test_normalized_potential_offsets(full2, quad_roof):
    P = solve_pressure_root(full2, 0.0, quad_roof, 10)
    for a in (0.0, 0.01, -0.01, 0.05, -0.05):
        st = normalized_potential(full2, 0.0, quad_roof, a, 10, P=P)
        assert st.normalization_residual < 1e-10


def test_normalized_potential_golden(golden):
    state = normalized_potential(golden, 0.0, 1.0, 0.0, 8)
    assert state.normalization_residual < 1e-10
    h = state.h_a.values
    idx1 = golden.index(9)
    pref = golden.index(8).locate(idx1.words // 2)
    suff = golden.index(8).locate(idx1.words % 2**8)
    expected = -math.log(PHI) + np.log(h[pref]) - np.log(h[suff])
    assert np.abs(state.f_a.values - expected).max() < 1e-10


def test_adjoint_invariance(full2, quad_roof):
    state = normalized_potential(full2, 0.0, quad_roof, 0.0, 8)
    assert adjoint_invariance_residual(state, 8) < 1e-10


def test_eigenvalue_lipschitz_in_a(full2, quad_roof):
    P = solve_pressure_root(full2, 0.0, quad_roof, 8)
    grid = (0.01, 0.02, 0.05, 0.1)
    C0 = max(
        abs(normalized_potential(full2, 0.0, quad_roof, s * a, 8, P=P).lam_a - 1.0) / a
        for a in grid
        for s in (1, -1)
    )
    assert np.isfinite(C0) and C0 < 10
    # the fitted constant covers a fresh finer offset
    st = normalized_potential(full2, 0.0, quad_roof, 0.005, 8, P=P)
    assert abs(st.lam_a - 1.0) <= C0 * 0.005 * 1.5


def test_thermo_cache_roundtrip(tmp_path, full2, quad_roof):
    from thermoshift.cache import load_thermo, save_thermo

    state = normalized_potential(full2, 0.0, quad_roof, 0.0, 6)
    path = tmp_path / "state.txt"
    save_thermo(state, path)
    loaded = load_thermo(full2, path)
    assert loaded.P == state.P
    assert loaded.lam_a == state.lam_a
    assert np.array_equal(loaded.h_a.values, state.h_a.values)
    assert np.array_equal(loaded.nu.weights, state.nu.weights)
    assert np.array_equal(loaded.f_a.values, state.f_a.values)
