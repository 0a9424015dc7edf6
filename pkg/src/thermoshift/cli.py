"""Command-line front door.

Exit codes: 0 success, 2 configuration error (offending key named), 1
computational failure (module error class named).  Reports are JSON, curves
and sweeps are CSV; identical inputs and seeds reproduce byte-identical
output.
"""

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .config import parse_system_file
from .errors import ConfigError, ThermoshiftError


def _float_list(text):
    """Comma list or start:stop:step (inclusive) grid."""
    if ":" in text:
        parts = [float(v) for v in text.split(":")]
        if len(parts) != 3:
            raise argparse.ArgumentTypeError("grid syntax is start:stop:step")
        start, stop, step = parts
        n = int(round((stop - start) / step))
        return [start + i * step for i in range(n + 1)]
    return [float(v) for v in text.split(",")]


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    text = "\n".join(lines) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _write_json(path, payload):
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


def build_parser():
    p = argparse.ArgumentParser(prog="thermoshift", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, roof=False, potential=False, depth=10):
        sp.add_argument("--system", required=True, help="system definition file")
        if potential:
            sp.add_argument("--potential", default="zero")
        if roof:
            sp.add_argument("--roof", required=True)
        sp.add_argument("--depth", type=int, default=depth)
        sp.add_argument("--out", default=None)
        sp.add_argument("--tol", type=float, default=1e-12)

    sp = sub.add_parser("pressure", help="topological pressure of a potential")
    common(sp, potential=True)
    sp.add_argument("--roof", default=None, help="if given, solve the pressure root P instead")

    sp = sub.add_parser("rpf", help="leading eigendata of the weighted operator")
    common(sp, potential=True)
    sp.add_argument("--roof", default=None)
    sp.add_argument("--a", type=float, default=0.0)
    sp.add_argument("--cache", action="store_true", help="reuse solved states (THERMOSHIFT_CACHE_DIR)")

    sp = sub.add_parser("gibbs", help="Gibbs measure and two-sided comparison constants")
    common(sp, roof=True, potential=True)

    sp = sub.add_parser("distortion", help="cylinder diameter-ratio diagnostics")
    sp.add_argument("--system", required=True)
    sp.add_argument("--nmax", type=int, default=8)
    sp.add_argument("--out", default=None)

    sp = sub.add_parser("sweep", help="iterate-norm contraction sweep over (a,b)")
    common(sp, roof=True, potential=True, depth=12)
    sp.add_argument("--a", type=_float_list, default=[0.0])
    sp.add_argument("--b", type=_float_list, required=True)
    sp.add_argument("--N", type=int, default=6)
    sp.add_argument("--m", type=int, default=8)
    sp.add_argument("--threads", type=int, default=1)

    sp = sub.add_parser("dolgopyat", help="damped-operator lemma suite (JSON report)")
    common(sp, roof=True, potential=True)
    sp.add_argument("--N", type=int, default=6)
    sp.add_argument("--b", type=float, default=8.0)
    sp.add_argument("--eps1", type=float, default=1.0)
    sp.add_argument("--mu", type=float, default=5e-7)
    sp.add_argument("--trials-cone", type=int, default=50)
    sp.add_argument("--trials-l2", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("orbits", help="primitive closed orbits and periods")
    common(sp, roof=True)
    sp.add_argument("--nmax", type=int, default=12)

    sp = sub.add_parser("count", help="orbit counting against li(e^{h_T lambda})")
    common(sp, roof=True)
    sp.add_argument("--nmax", type=int, default=16)
    sp.add_argument("--lambda", dest="lambdas", type=_float_list, default=None)

    sp = sub.add_parser("zeta", help="truncated zeta function on a complex grid")
    common(sp, roof=True)
    sp.add_argument("--re", type=_float_list, required=True)
    sp.add_argument("--im", type=_float_list, default=[0.0])
    sp.add_argument("--nmax", type=int, default=40)

    sp = sub.add_parser("corr", help="suspension correlation curve and decay fit")
    common(sp, roof=True, potential=True)
    sp.add_argument("--A", required=True, help="observable name from the config")
    sp.add_argument("--B", default=None)
    sp.add_argument("--L", type=int, default=10**6)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--tmax", type=float, default=8.0)
    sp.add_argument("--tstep", type=float, default=0.2)
    sp.add_argument("--window", type=_float_list, default=[0.0, 8.0])

    sp = sub.add_parser("selftest", help="run the quick built-in example checks")
    return p


def cmd_pressure(args, spec):
    from .expr import Expr
    from .thermo import pressure, pressure_with_refinement_gap, solve_pressure_root

    f = spec.potential(args.potential)
    if args.roof:
        tau = spec.roof(args.roof)
        value = solve_pressure_root(spec.system, f, tau, args.depth, args.tol)
        payload = {"pressure_root": value, "depth": args.depth}
    elif isinstance(f, Expr):
        # not locally constant: report two depths, gap as the error proxy
        value, fine, gap = pressure_with_refinement_gap(spec.system, f, args.depth, args.tol)
        payload = {"pressure": value, "pressure_refined": fine, "refinement_gap": gap, "depth": args.depth}
    else:
        value = pressure(spec.system, f, args.depth, args.tol)
        payload = {"pressure": value, "depth": args.depth}
    print(repr(value))
    if args.out:
        _write_json(args.out, payload)
    return 0


def cmd_rpf(args, spec):
    from .thermo import normalized_potential, rpf_solve

    f = spec.potential(args.potential)
    if args.roof:
        if args.cache:
            from .cache import cached_normalized_potential

            state = cached_normalized_potential(spec, args.potential, args.roof, args.a, args.depth, args.tol)
        else:
            state = normalized_potential(spec.system, f, spec.roof(args.roof), args.a, args.depth, args.tol)
        payload = {
            "a": args.a,
            "P": state.P,
            "lambda_a": state.lam_a,
            "normalization_residual": state.normalization_residual,
            "h_min": float(state.h_a.values.min()),
            "h_max": float(state.h_a.values.max()),
        }
        print(repr(state.lam_a))
    else:
        data = rpf_solve(spec.system, f, args.depth, args.tol)
        payload = {
            "lambda": data.lam,
            "iterations": data.iterations,
            "residual": data.residual,
            "h_min": float(data.h.values.min()),
            "h_max": float(data.h.values.max()),
        }
        print(repr(data.lam))
    if args.out:
        _write_json(args.out, payload)
    return 0


def cmd_gibbs(args, spec):
    from .thermo import gibbs_measure

    nu, c1, c2 = gibbs_measure(spec.system, spec.potential(args.potential), spec.roof(args.roof), args.depth, args.tol)
    payload = {"c1": c1, "c2": c2, "ratio": c2 / c1, "depth": args.depth}
    print(f"c1={c1!r} c2={c2!r} c2/c1={c2 / c1!r}")
    if args.out:
        _write_json(args.out, payload)
    return 0


def cmd_distortion(args, spec):
    from .symbolic import distortion_ratios

    rep = distortion_ratios(spec.system, args.nmax)
    payload = {
        "ratio_min": rep.ratio_min,
        "ratio_max": rep.ratio_max,
        "rho_est": rep.rho_est,
        "p0_est": rep.p0_est,
        "colength_max": rep.colength_max,
    }
    print(f"ratio_min={rep.ratio_min!r} ratio_max={rep.ratio_max!r} rho_est={rep.rho_est!r} p0_est={rep.p0_est}")
    if args.out:
        _write_json(args.out, payload)
    return 0


def cmd_sweep(args, spec):
    from .ruelle import contraction_sweep

    f = spec.potential(args.potential)
    tau = spec.roof(args.roof)

    if args.threads > 1:
        # cells are independent; keep output order deterministic
        def run_cell(ab):
            a, b = ab
            return contraction_sweep(spec.system, f, tau, [a], [b], args.N, args.m, args.depth, tol=args.tol)

        cells = {}
        with ThreadPoolExecutor(max_workers=args.threads) as ex:
            jobs = [(a, b) for a in args.a for b in args.b]
            for sw in ex.map(run_cell, jobs):
                cells.update(sw.cells)
        labels = sw.h_labels
    else:
        sw = contraction_sweep(spec.system, f, tau, args.a, args.b, args.N, args.m, args.depth, tol=args.tol)
        cells, labels = sw.cells, sw.h_labels
    rows = []
    for a in args.a:
        for b in args.b:
            cell = cells[(a, b)]
            for m in range(1, args.m + 1):
                worst_norm = max(cell.norms[l][m - 1] for l in labels)
                worst_lip = max(cell.lipb[l][m - 1] for l in labels)
                rows.append((a, b, m, worst_norm, cell.rho_hat, worst_lip, int(cell.monotone)))
    _write_csv(args.out, ["a", "b", "m", "l2_norm", "rho_hat", "lip_b_norm", "monotone_flag"], rows)
    return 0


def cmd_dolgopyat(args, spec):
    from .dolgopyat import dolgopyat_report

    rep = dolgopyat_report(
        spec.system,
        spec.potential(args.potential),
        spec.roof(args.roof),
        N_user=args.N,
        b=args.b,
        eps1=args.eps1,
        mu=args.mu,
        depth_consts=args.depth,
        trials_cone=args.trials_cone,
        trials_l2=args.trials_l2,
        seed=args.seed,
        tol=args.tol,
    )
    _write_json(args.out, rep)
    if args.out:
        banner = rep.get("params", {}).get("banner", "")
        print(banner or "report written")
    return 0


def cmd_orbits(args, spec):
    from .orbits import primitive_orbits

    orbs = primitive_orbits(spec.system, spec.roof(args.roof), args.nmax)
    rows = [("".join(map(str, o.word)), len(o.word), o.period) for o in orbs]
    _write_csv(args.out, ["word", "length", "period"], rows)
    return 0


def cmd_count(args, spec):
    from .orbits import counting_report

    rep = counting_report(spec.system, spec.roof(args.roof), args.lambdas, args.nmax, args.depth)
    rows = list(zip(rep.lambdas, rep.pi, rep.li_vals, rep.ratios, rep.biased.astype(int)))
    _write_csv(args.out, ["lambda", "pi", "li", "ratio", "biased_flag"], rows)
    if rep.lattice_flag:
        print("lattice roof: ratio curve oscillates, no convergence claim", file=sys.stderr)
    return 0


def cmd_zeta(args, spec):
    from .orbits import zeta_truncated

    rows = []
    for re in args.re:
        for im in args.im:
            z = zeta_truncated(spec.system, spec.roof(args.roof), complex(re, im), args.nmax)
            rows.append(
                (re, im, z.value.real, z.value.imag, z.truncated.real, z.truncated.imag, z.tail_bound, int(z.divergent))
            )
    _write_csv(
        args.out,
        ["s_re", "s_im", "zeta_re", "zeta_im", "trunc_re", "trunc_im", "tail_bound", "divergent_flag"],
        rows,
    )
    return 0


def cmd_corr(args, spec):
    from .correlations import fit_decay_rate, markov_approximation, sample_orbit, suspension_correlation
    from .errors import BelowNoiseFloor
    from .thermo import normalized_potential

    A = spec.observables.get(args.A)
    if A is None:
        raise ConfigError(f"unknown observable {args.A!r}")
    B = spec.observables.get(args.B) if args.B else A
    if args.B and B is None:
        raise ConfigError(f"unknown observable {args.B!r}")
    state = normalized_potential(spec.system, spec.potential(args.potential), spec.roof(args.roof), 0.0, args.depth, args.tol)
    approx = markov_approximation(state, spec.roof(args.roof))
    sample = sample_orbit(approx, args.L, args.seed)
    curve = suspension_correlation(sample, A, B, np.arange(0.0, args.tmax + args.tstep / 2, args.tstep))
    try:
        amp, rate, r2 = fit_decay_rate(curve, tuple(args.window))
        print(f"c_rate={rate!r} r2={r2!r} C_amp={amp!r}")
    except BelowNoiseFloor as exc:
        print(f"fit: BelowNoiseFloor ({exc})", file=sys.stderr)
    rows = list(zip(curve.t, curve.C, curve.stderr))
    _write_csv(args.out, ["t", "C", "stderr"], rows)
    return 0


def cmd_selftest(args, spec=None):
    from . import selftest

    return selftest.run()


_COMMANDS = {
    "pressure": cmd_pressure,
    "rpf": cmd_rpf,
    "gibbs": cmd_gibbs,
    "distortion": cmd_distortion,
    "sweep": cmd_sweep,
    "dolgopyat": cmd_dolgopyat,
    "orbits": cmd_orbits,
    "count": cmd_count,
    "zeta": cmd_zeta,
    "corr": cmd_corr,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "selftest":
            return cmd_selftest(args)
        spec = parse_system_file(args.system)
        return _COMMANDS[args.command](args, spec)
    except ConfigError as exc:
        print(f"CONFIG ERROR: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"CONFIG ERROR: {exc}", file=sys.stderr)
        return 2
    except ThermoshiftError as exc:
        print(f"ERROR {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
