"""Sample domains and the sampled zero test."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .evaluate import Evaluator, SingularityError
from .nodes import CONST, Expr, as_expr, count_nodes, postorder

DEFAULT_BOX = (0.1, 1.1)
ZERO_RTOL = 1e-9


@dataclass(frozen=True)
class SampleDomain:
    """Box of sample points with a seeded generator.

    Parameters
    ----------
    box : dict
        Per-variable closed interval ``name -> (lo, hi)``; variables not
        listed use ``default``.
    n_samples : int
        Number of sample points.
    seed : int
        Seed of the point generator.
    default : tuple
        Interval for unlisted variables.
    """

    box: dict = field(default_factory=dict)
    n_samples: int = 7
    seed: int = 42
    default: tuple = DEFAULT_BOX

    def interval(self, name):
        return tuple(self.box.get(name, self.default))

    def bounds(self, names):
        lo = np.array([self.interval(n)[0] for n in names], dtype=float)
        hi = np.array([self.interval(n)[1] for n in names], dtype=float)
        return lo, hi

    def points(self, names, n=None, stream=0) -> np.ndarray:
        """Deterministic sample points, one column per name."""
        n = self.n_samples if n is None else n
        rng = np.random.default_rng([self.seed, stream])
        lo, hi = self.bounds(names)
        return lo + (hi - lo) * rng.random((n, len(names)))

    def __hash__(self):
        return hash((tuple(sorted(self.box.items())), self.n_samples, self.seed, self.default))


def is_zero(e, domain: SampleDomain | None = None, rtol: float = ZERO_RTOL) -> bool:
    """Sampled zero test.

    True iff ``|e| < rtol * (1 + max |subterm|)`` at every sample point.
    Exact zeros short-circuit; small expressions are simplified first.
    Singular samples are redrawn up to three times.
    """
    e = as_expr(e)
    if e.kind == CONST:
        return abs(float(e.value)) < 1e-300
    if count_nodes(e) <= 200:
        from .simplify import simplify

        s = simplify(e)
        if s.kind == CONST:
            return abs(float(s.value)) < 1e-300
    domain = domain or SampleDomain()
    names = sorted(e.free)
    pts = domain.points(names)
    ok = _check(e, names, pts, rtol)
    for attempt in range(1, 4):
        bad = np.isnan(ok)
        if not bad.any():
            break
        fresh = domain.points(names, n=int(bad.sum()), stream=attempt)
        pts = pts.copy()
        pts[bad] = fresh
        ok = _check(e, names, pts, rtol)
    if np.isnan(ok).any():
        raise SingularityError("expression is singular at sample points after 3 retries")
    return bool(np.all(ok == 1.0))


def _check(e: Expr, names, pts, rtol):
    ev = Evaluator(names, pts)
    nodes = postorder([e])
    vals = ev.values(nodes)
    top = vals[-1]
    with np.errstate(invalid="ignore"):
        scale = np.max(np.abs(vals), axis=0)
    out = np.where(np.abs(top) < rtol * (1.0 + scale), 1.0, 0.0)
    out[~np.isfinite(top) | ~np.isfinite(scale)] = np.nan
    return out
