"""Content-addressed cache for solved thermo states (versioned text files)."""

import hashlib
import os
from pathlib import Path

import numpy as np

from .thermo import Measure, ThermoState
from .fields import ScalarField

_FORMAT = "thermoshift-cache 1"


def cache_dir():
    env = os.environ.get("THERMOSHIFT_CACHE_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "thermoshift"


def cache_key(*parts):
    """Content hash of canonicalized inputs; any field change misses."""
    h = hashlib.sha256()
    for part in parts:
        h.update(_canon(part).encode())
        h.update(b"\x00")
    return h.hexdigest()


def _canon(part):
    if isinstance(part, dict):
        return "{" + ",".join(f"{k}:{_canon(v)}" for k, v in sorted(part.items())) + "}"
    if isinstance(part, (list, tuple)):
        return "[" + ",".join(_canon(v) for v in part) + "]"
    if isinstance(part, float):
        return repr(part)
    if isinstance(part, np.ndarray):
        return "[" + ",".join(repr(float(v)) for v in part.ravel()) + "]"
    return str(part)


def _fmt_array(name, values):
    return name + " " + " ".join(repr(float(v)) for v in values)


def save_thermo(state, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        _FORMAT,
        f"a {state.a!r}",
        f"P {state.P!r}",
        f"lam {state.lam_a!r}",
        f"depth {state.depth}",
        f"residual {state.normalization_residual!r}",
        _fmt_array("h", state.h_a.values),
        _fmt_array("nu_hat", state.nu_hat_a.weights),
        _fmt_array("nu_hat_refine", state.nu_hat_a.refine_vals),
        _fmt_array("f_a", state.f_a.values),
    ]
    if state.nu is not None:
        lines.append(_fmt_array("nu", state.nu.weights))
    path.write_text("\n".join(lines) + "\n")


def load_thermo(system, path):
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != _FORMAT:
        raise ValueError(f"unrecognized cache format in {path}")
    fields = {}
    for line in lines[1:]:
        name, _, rest = line.partition(" ")
        fields[name] = rest
    depth = int(fields["depth"])
    arr = lambda name: np.array([float(v) for v in fields[name].split()])
    f_a_vals = arr("f_a")
    nu = None
    if "nu" in fields:
        nu = Measure(system, depth, arr("nu"), refine_vals=np.exp(f_a_vals))
    return ThermoState(
        system=system,
        a=float(fields["a"]),
        P=float(fields["P"]),
        lam_a=float(fields["lam"]),
        h_a=ScalarField(system, depth, arr("h")),
        nu_hat_a=Measure(system, depth, arr("nu_hat"), refine_vals=arr("nu_hat_refine")),
        f_a=ScalarField(system, depth + 1, f_a_vals),
        depth=depth,
        nu=nu,
        normalization_residual=float(fields["residual"]),
    )


def cached_normalized_potential(spec, f_name, tau_name, a, depth, tol=1e-12, directory=None):
    """Solve-or-load a thermo state keyed by the canonical config content."""
    from .thermo import normalized_potential

    directory = Path(directory) if directory else cache_dir()
    key = cache_key(spec.canonical, f_name, tau_name, float(a), depth, tol)
    path = directory / f"{key}.txt"
    system = spec.system
    if path.exists():
        return load_thermo(system, path)
    f = spec.potential(f_name)
    tau = spec.roof(tau_name)
    state = normalized_potential(system, f, tau, a, depth, tol)
    save_thermo(state, path)
    return state
