"""System definition files.

Line-oriented, ``#`` comments, versioned::

    version 1
    alphabet 2
    matrix 1 1
    matrix 1 1
    branch 0 0 affine 0.5 0        # x -> a*x + b into symbol 0 from symbol 0
    branch 1 0 expr 0.5*x + 0.5 dmin 0.45 dmax 0.55
    constants c0 1.0 gamma 2.0 gamma1 2.0
    potential bern13 depth 1 values -1.0986122886681098 -0.4054651081081644
    roof quad expr 1 + x*x/2 tau_min 1.0
    observable obsA expr sin(2*pi*h) + 0.3*cos(pi*x)
    witness uhalf expr x/2

Parse errors carry line numbers.  Branch coefficients keep their literal text
so exact rational checks use the numbers as written.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ThermoshiftError
from .expr import Expr
from .fields import ScalarField
from .symbolic import build_system


@dataclass
class RoofSpec:
    name: str
    spec: object  # Expr | (depth, values)
    tau_min: float

    def resolve(self, system):
        if isinstance(self.spec, Expr):
            return self.spec
        depth, values = self.spec
        return ScalarField(system, depth, np.asarray(values))


@dataclass
class SystemSpec:
    system: object
    potentials: dict
    roofs: dict
    observables: dict
    witnesses: dict
    canonical: str
    version: int = 1

    def potential(self, name, system=None):
        if name == "zero":
            return 0.0
        if name not in self.potentials:
            raise ConfigError(f"unknown potential {name!r}")
        spec = self.potentials[name]
        if isinstance(spec, Expr):
            return spec
        depth, values = spec
        return ScalarField(system or self.system, depth, np.asarray(values))

    def roof(self, name, system=None):
        if name not in self.roofs:
            raise ConfigError(f"unknown roof {name!r}")
        return self.roofs[name].resolve(system or self.system)


def _tokens(text):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        yield lineno, line.split()


def canonicalize(text):
    """Whitespace- and comment-insensitive canonical form."""
    return "\n".join(" ".join(tok) for _, tok in _tokens(text))


def parse_system_text(text):
    version = None
    alphabet = None
    rows = []
    branches = {}
    constants = (None, None, None)
    potentials, roofs, observables, witnesses = {}, {}, {}, {}
    for lineno, tok in _tokens(text):
        key = tok[0]
        try:
            if key == "version":
                version = int(tok[1])
            elif key == "alphabet":
                alphabet = int(tok[1])
            elif key == "matrix":
                rows.append([int(v) for v in tok[1:]])
            elif key == "branch":
                i, j = int(tok[1]), int(tok[2])
                kind = tok[3]
                if kind == "affine":
                    branches[(i, j)] = ("affine", tok[4], tok[5])
                elif kind == "expr":
                    rest = tok[4:]
                    if "dmin" not in rest or "dmax" not in rest:
                        raise ConfigError("expr branch needs dmin and dmax", lineno)
                    di = rest.index("dmin")
                    expr = " ".join(rest[:di])
                    dmin = float(rest[di + 1])
                    dmax = float(rest[rest.index("dmax") + 1])
                    branches[(i, j)] = ("expr", expr, dmin, dmax)
                else:
                    raise ConfigError(f"unknown branch kind {kind!r}", lineno)
            elif key == "constants":
                d = dict(zip(tok[1::2], tok[2::2]))
                constants = (
                    float(d["c0"]) if "c0" in d else None,
                    float(d["gamma"]) if "gamma" in d else None,
                    float(d["gamma1"]) if "gamma1" in d else None,
                )
            elif key == "potential":
                name = tok[1]
                potentials[name] = _parse_function(tok[2:], lineno)
            elif key == "roof":
                name = tok[1]
                rest = tok[2:]
                if "tau_min" not in rest:
                    raise ConfigError("roof needs a tau_min declaration", lineno)
                ti = rest.index("tau_min")
                tau_min = float(rest[ti + 1])
                if tau_min <= 0:
                    raise ConfigError("tau_min must be positive", lineno)
                roofs[name] = RoofSpec(name, _parse_function(rest[:ti], lineno), tau_min)
            elif key == "observable":
                if tok[2] != "expr":
                    raise ConfigError("observables are expressions in x and h", lineno)
                observables[tok[1]] = Expr(" ".join(tok[3:]), variables=("x", "h"))
            elif key == "witness":
                if tok[2] != "expr":
                    raise ConfigError("witnesses are expressions in x", lineno)
                witnesses[tok[1]] = Expr(" ".join(tok[3:]))
            else:
                raise ConfigError(f"unknown key {key!r}", lineno)
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(f"{key}: {exc}", lineno) from exc
    if version != 1:
        raise ConfigError("missing or unsupported `version` (expected `version 1`)")
    if alphabet is None or not rows:
        raise ConfigError("config needs `alphabet` and `matrix` rows")
    if len(rows) != alphabet or any(len(r) != alphabet for r in rows):
        raise ConfigError(f"matrix must be {alphabet} rows of {alphabet} entries")
    spec = dict(branches)
    if any(c is not None for c in constants):
        spec["constants"] = constants
    try:
        system = build_system(alphabet, rows, spec if branches else None)
    except (ValueError, ThermoshiftError) as exc:
        raise ConfigError(f"{type(exc).__name__}: {exc}") from exc
    _validate_roofs(system, roofs)
    return SystemSpec(system, potentials, roofs, observables, witnesses, canonicalize(text))


def _parse_function(tok, lineno):
    if not tok:
        raise ConfigError("missing function body", lineno)
    if tok[0] == "expr":
        return Expr(" ".join(tok[1:]))
    if tok[0] == "depth":
        depth = int(tok[1])
        if tok[2] != "values":
            raise ConfigError("expected `values` after depth", lineno)
        return (depth, [float(v) for v in tok[3:]])
    raise ConfigError(f"expected `expr` or `depth`, got {tok[0]!r}", lineno)


def _validate_roofs(system, roofs):
    for name, roof in roofs.items():
        if isinstance(roof.spec, Expr):
            if system.realization is None:
                continue
            grid = np.linspace(0.0, 1.0, 2048)
            lo = float(np.min(np.broadcast_to(roof.spec(grid), grid.shape)))
        else:
            lo = float(np.min(roof.spec[1]))
        if lo < roof.tau_min - 1e-9:
            raise ConfigError(
                f"roof {name!r}: declared tau_min {roof.tau_min} above measured minimum {lo}"
            )


def parse_system_file(path):
    with open(path) as fh:
        return parse_system_text(fh.read())
