"""Piecewise-cylinder-constant functions on the shift space.

A field of depth ``d`` holds one value per admissible depth-``d`` word,
aligned with ``system.index(d).words``.  ``lip_D`` estimates the Lipschitz
constant with respect to the cylinder metric; it is the exact maximum of
``|value(u) - value(u')| / D(rep_u, rep_u')`` over all pairs of depth-``d``
representatives (computed level by level from per-prefix value ranges), or
any larger assigned hint (e.g. ``1/diam`` for indicators).
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DepthMismatch, NoRealization


@dataclass
class LevelInfo:
    p: int
    starts: np.ndarray  # group start offsets into the depth-d arrays
    counts: np.ndarray  # group sizes
    diams: np.ndarray  # diameter of each depth-p group cylinder


def level_structure(system, depth):
    """Per-prefix-level grouping of the depth-``depth`` catalogue (cached).

    Level p groups the sorted depth-d words by their depth-p prefix; groups
    are contiguous runs.  Level 0 is the single all-words group with the
    conventional distance 1 between different first symbols.
    """
    cache = getattr(system, "_level_cache", None)
    if cache is None:
        cache = system._level_cache = {}
    if depth in cache:
        return cache[depth]
    idx = system.index(depth)
    levels = [LevelInfo(0, np.array([0]), np.array([idx.n]), np.array([1.0]))]
    for p in range(1, depth):
        prefixes = idx.words // system.k ** (depth - p)
        starts = np.flatnonzero(np.r_[True, prefixes[1:] != prefixes[:-1]])
        counts = np.diff(np.r_[starts, idx.n])
        sub = system.index(p)
        diams = sub.diam[sub.locate(prefixes[starts])]
        levels.append(LevelInfo(p, starts, counts, diams))
    cache[depth] = levels
    return levels


def measured_lip_D(system, depth, values):
    """Exact pairwise Lipschitz constant of a depth-``depth`` value table."""
    vals = np.asarray(values)
    out = 0.0
    if np.iscomplexobj(vals):
        re, im = vals.real, vals.imag
    else:
        re, im = vals, None
    for lev in level_structure(system, depth):
        rng = np.maximum.reduceat(re, lev.starts) - np.minimum.reduceat(re, lev.starts)
        if im is not None:
            rng_i = np.maximum.reduceat(im, lev.starts) - np.minimum.reduceat(im, lev.starts)
            rng = np.sqrt(rng**2 + rng_i**2)
        with np.errstate(divide="ignore", invalid="ignore"):
            cand = np.where(lev.diams > 0, rng / lev.diams, 0.0)
        if cand.size:
            out = max(out, float(cand.max()))
    return out


@dataclass
class ScalarField:
    system: object = field(repr=False)
    depth: int
    values: np.ndarray
    lip_hint: Optional[float] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=self._dtype)
        if len(self.values) != self.system.index(self.depth).n:
            raise DepthMismatch(
                f"expected {self.system.index(self.depth).n} values at depth {self.depth}, "
                f"got {len(self.values)}"
            )

    _dtype = np.float64

    @property
    def lip_D(self):
        if not hasattr(self, "_lip"):
            measured = measured_lip_D(self.system, self.depth, self.values)
            self._lip = max(measured, self.lip_hint) if self.lip_hint else measured
        return self._lip

    @property
    def sup(self):
        return float(np.abs(self.values).max())

    def refine(self, depth):
        """Exact representation at a deeper depth (locally constant)."""
        if depth < self.depth:
            raise DepthMismatch("cannot coarsen a cylinder field exactly")
        if depth == self.depth:
            return self
        idx = self.system.index(depth)
        src = self.system.index(self.depth)
        vals = self.values[src.locate(idx.words // self.system.k ** (depth - self.depth))]
        return type(self)(self.system, depth, vals, self.lip_hint)

    def __mul__(self, c):
        return type(self)(self.system, self.depth, self.values * c)

    __rmul__ = __mul__


class ComplexField(ScalarField):
    _dtype = np.complex128

    @property
    def modulus(self):
        return ScalarField(self.system, self.depth, np.abs(self.values))


def constant_field(system, depth, c):
    n = system.index(depth).n
    if isinstance(c, complex) and c.imag != 0:
        return ComplexField(system, depth, np.full(n, c, np.complex128))
    return ScalarField(system, depth, np.full(n, float(c)))


def field_from_callable(system, depth, fn, complex_=False):
    """Discretize a coordinate function by evaluation at representatives."""
    idx = system.index(depth)
    if np.isnan(idx.rep).any():
        raise NoRealization("coordinate functions need a realized system")
    vals = fn(idx.rep)
    vals = np.broadcast_to(vals, idx.rep.shape).astype(np.complex128 if complex_ else np.float64)
    cls = ComplexField if complex_ else ScalarField
    return cls(system, depth, vals.copy())


def indicator_field(system, depth, word):
    """Indicator of the cylinder of ``word`` at depth ``depth``; carries the
    analytic Lipschitz bound 1/diam."""
    from .symbolic import cylinder_of, encode_word

    if len(word) > depth:
        raise DepthMismatch("indicator word deeper than field depth")
    idx = system.index(depth)
    prefix = idx.words // system.k ** (depth - len(word))
    vals = (prefix == encode_word(word, system.k)).astype(np.float64)
    cyl = cylinder_of(system, word)
    return ScalarField(system, depth, vals, lip_hint=1.0 / cyl.diameter)


def as_field(system, spec, depth, complex_=False):
    """Coerce a field/constant/callable into a field at ``depth``."""
    if isinstance(spec, ScalarField):
        return spec.refine(depth)
    if isinstance(spec, (int, float)):
        return constant_field(system, depth, spec)
    return field_from_callable(system, depth, spec, complex_=complex_)


def eval_at_level_reps(field_obj, n):
    """Values of a field at the representative points of depth-``n`` cylinders.

    For n >= field depth the prefix determines the value; for shallower n the
    representative's smallest-admissible continuation fixes the deeper digits.
    """
    system = field_obj.system
    dF = field_obj.depth
    idx = system.index(n)
    if n >= dF:
        src = system.index(dF)
        return field_obj.values[src.locate(idx.words // system.k ** (n - dF))]
    m = dF - n
    cont = _continuation_codes(system, m)
    codes = idx.words * system.k**m + cont[idx.last]
    return field_obj.values[system.index(dF).locate(codes)]


def _continuation_codes(system, m):
    """Code of the m smallest-continuation digits after each symbol."""
    out = np.zeros(system.k, np.int64)
    for s in range(system.k):
        cur, code = s, 0
        for _ in range(m):
            cur = system._smallest_successor[cur]
            code = code * system.k + cur
        out[s] = code
    return out
