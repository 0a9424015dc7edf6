"""Quick built-in checks on the two stock systems (the fast, closed-form
cases); one PASS/FAIL line each."""

import math

import numpy as np


def _dyadic():
    from .symbolic import build_system

    spec = {
        (0, 0): ("affine", "0.5", "0"),
        (0, 1): ("affine", "0.5", "0"),
        (1, 0): ("affine", "0.5", "0.5"),
        (1, 1): ("affine", "0.5", "0.5"),
    }
    return build_system(2, [[1, 1], [1, 1]], spec)


def run():
    from .fields import constant_field
    from .orbits import fixed_point_count, zeta_truncated
    from .ruelle import iterate_norms, make_params
    from .symbolic import admissible_words, cylinder_of, distortion_ratios, metric_D, representative
    from .thermo import normalized_potential, pressure, solve_pressure_root, transfer_apply

    checks = []
    full2 = _dyadic()
    checks.append(("M0 = 1 on the full 2-shift", full2.M0 == 1))
    checks.append(("8 words of 3 symbols", len(admissible_words(full2, 3)) == 8))
    c = cylinder_of(full2, (0, 1))
    checks.append(("cylinder 01 = [1/4, 1/2]", (c.lo, c.hi) == (0.25, 0.5)))
    checks.append(("diam(000) = 1/8", cylinder_of(full2, (0, 0, 0)).diameter == 0.125))
    x = representative(cylinder_of(full2, (0,)))
    y = representative(cylinder_of(full2, (1,)))
    checks.append(("D(x, y) = 1 across first symbols", metric_D(x, y) == 1.0))
    checks.append(("D(x, x) = 0", metric_D(x, x) == 0.0))
    checks.append(
        ("pressure(0) = ln 2", abs(pressure(full2, 0.0, 8) - math.log(2)) < 1e-12)
    )
    checks.append(
        ("pressure root of tau=1 is ln 2", abs(solve_pressure_root(full2, 0.0, 1.0, 8) - math.log(2)) < 1e-10)
    )
    ones = constant_field(full2, 8, 1.0)
    L1 = transfer_apply(full2, 0.0, ones)
    checks.append(("L_0 1 = 2", float(np.abs(L1.values - 2.0).max()) < 1e-14))
    dist = distortion_ratios(full2, 6)
    checks.append(("dyadic co-length-1 ratios = 1/2", dist.ratio_min == 0.5 == dist.ratio_max))
    state = normalized_potential(full2, 0.0, 1.0, 0.0, 8)
    checks.append(("M_0 1 = 1", state.normalization_residual < 1e-12))
    params = make_params(state, 1.0, 5.0)
    norms = iterate_norms(params, ones, 3, 4, state.nu)
    checks.append(("constant roof: unimodular iterates", float(np.abs(norms - 1).max()) < 1e-12))
    checks.append(("trace A^3 = 8", fixed_point_count(full2, 3) == 8))
    z = zeta_truncated(full2, 1.0, 1.0, 40)
    closed = 1.0 / (1.0 - 2.0 * math.exp(-1.0))
    checks.append(("zeta closed form at s=1", abs(z.value - closed) / closed < 1e-8))

    failures = 0
    for label, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {label}")
        failures += 0 if ok else 1
    print(f"{len(checks) - failures}/{len(checks)} checks passed")
    return 0 if failures == 0 else 1
