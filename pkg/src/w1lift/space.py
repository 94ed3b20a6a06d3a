"""Finite metric spaces and discrete probability measures on them.

Every other object in the package (couplings, step curves, measure curves,
lifts) refers to points of a :class:`MetricSpace` by integer index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

EPS = 1e-9
MASS_TOL = 1e-12
COORD_TOL = 1e-12


class MetricError(ValueError):
    """Raised when a distance matrix violates the metric axioms."""

    def __init__(self, violations):
        self.violations = list(violations)
        shown = "; ".join(str(v) for v in self.violations[:5])
        more = "" if len(self.violations) <= 5 else f" (+{len(self.violations) - 5} more)"
        super().__init__(f"invalid metric: {shown}{more}")


@dataclass(frozen=True)
class Violation:
    axiom: str
    indices: tuple
    detail: str = ""

    def __str__(self):
        return f"{self.axiom} at {self.indices}" + (f": {self.detail}" if self.detail else "")

    def to_dict(self):
        return {"axiom": self.axiom, "indices": list(self.indices), "detail": self.detail}


@dataclass(frozen=True, eq=False)
class MetricSpace:
    """A finite metric space with a dense distance matrix.

    Construction checks the matrix shape. With ``check=True`` (the default)
    the full set of axioms is verified as well, including discreteness
    (distinct points at positive distance), and a :class:`MetricError` is
    raised listing every violation.
    """

    dist: np.ndarray
    labels: tuple = ()
    coords: Optional[np.ndarray] = None
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        d = np.array(self.dist, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError(f"distance matrix must be square, got shape {d.shape}")
        if d.shape[0] == 0:
            raise ValueError("metric space must have at least one point")
        d.setflags(write=False)
        object.__setattr__(self, "dist", d)
        n = d.shape[0]
        labels = tuple(self.labels) if len(self.labels) else tuple(str(i) for i in range(n))
        if len(labels) != n:
            raise ValueError(f"{len(labels)} labels for {n} points")
        object.__setattr__(self, "labels", labels)
        if self.coords is not None:
            c = np.array(self.coords, dtype=float)
            if c.ndim == 1:
                c = c[:, None]
            if c.shape[0] != n:
                raise ValueError(f"{c.shape[0]} coordinate rows for {n} points")
            c.setflags(write=False)
            object.__setattr__(self, "coords", c)
        if self.check:
            violations = validate_metric(self)
            if violations:
                raise MetricError(violations)

    @property
    def size(self) -> int:
        return self.dist.shape[0]

    def __len__(self):
        return self.size

    @property
    def is_line(self) -> bool:
        return self.coords is not None and self.coords.shape[1] == 1

    def separation(self) -> np.ndarray:
        """Per-point distance to the nearest other point (``inf`` for a singleton)."""
        d = self.dist + np.diag(np.full(self.size, np.inf))
        return d.min(axis=1)

    @classmethod
    def from_coords(cls, coords, labels=(), check=True) -> "MetricSpace":
        c = np.array(coords, dtype=float)
        if c.ndim == 1:
            c = c[:, None]
        diff = c[:, None, :] - c[None, :, :]
        d = np.sqrt((diff**2).sum(axis=-1))
        return cls(d, labels=labels, coords=c, check=check)

    def to_json(self) -> dict:
        return {
            "labels": list(self.labels),
            "coords": None if self.coords is None else self.coords.tolist(),
            "dist": None if self.coords is not None else self.dist.tolist(),
        }

    @classmethod
    def from_json(cls, data) -> "MetricSpace":
        if isinstance(data, str):
            data = json.loads(data)
        coords, dist = data.get("coords"), data.get("dist")
        labels = data.get("labels") or ()
        if coords is None and dist is None:
            raise ValueError("space descriptor needs 'coords' or 'dist'")
        if coords is None:
            return cls(np.asarray(dist, dtype=float), labels=labels)
        space = cls.from_coords(coords, labels=labels)
        if dist is not None:
            d = np.asarray(dist, dtype=float)
            if d.shape != space.dist.shape or np.max(np.abs(d - space.dist)) > COORD_TOL:
                raise MetricError([Violation("coords-consistency", (), "dist differs from Euclidean coords")])
        return space


def validate_metric(space: MetricSpace, tol: float = 0.0) -> list:
    """Return every metric-axiom violation of ``space.dist``.

    The triangle check is exhaustive over ordered triples; each violation
    carries the offending indices.
    """
    d = np.asarray(space.dist, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError(f"distance matrix must be square, got shape {d.shape}")
    n = d.shape[0]
    out = []
    for i in np.flatnonzero(np.abs(np.diag(d)) > tol):
        out.append(Violation("identity", (int(i), int(i)), f"d={float(d[i, i])!r}"))
    bad = ~np.isfinite(d)
    for i, j in zip(*np.nonzero(bad)):
        out.append(Violation("finite", (int(i), int(j))))
    off = ~np.eye(n, dtype=bool)
    for i, j in zip(*np.nonzero(off & (d <= tol))):
        if i < j or d[i, j] < 0:
            out.append(Violation("positivity", (int(i), int(j)), f"d={float(d[i, j])!r}"))
    for i, j in zip(*np.nonzero(np.abs(d - d.T) > tol)):
        if i < j:
            out.append(Violation("symmetry", (int(i), int(j)), f"{float(d[i, j])!r} != {float(d[j, i])!r}"))
    # d[i,k] <= d[i,j] + d[j,k]; excess[i,j,k] > 0 marks a violation
    excess = d[:, None, :] - (d[:, :, None] + d[None, :, :])
    scale = 1.0 + np.abs(d).max() if n else 1.0
    for i, j, k in zip(*np.nonzero(excess > tol + 1e-12 * scale)):
        out.append(Violation("triangle", (int(i), int(j), int(k)),
                             f"d[{i},{k}]={float(d[i, k])!r} > {float(d[i, j])!r} + {float(d[j, k])!r}"))
    if space.coords is not None:
        c = space.coords
        euclid = np.sqrt(((c[:, None, :] - c[None, :, :]) ** 2).sum(axis=-1))
        for i, j in zip(*np.nonzero(np.abs(euclid - d) > COORD_TOL)):
            if i < j:
                out.append(Violation("coords-consistency", (int(i), int(j))))
    return out


def line_space(xs: Sequence[float], labels=()) -> MetricSpace:
    """Points of the real line with the absolute-difference distance."""
    x = np.asarray(xs, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("line_space needs a nonempty 1-d sequence")
    if np.any(np.diff(x) <= 0):
        raise ValueError("line_space coordinates must be strictly increasing")
    return MetricSpace(np.abs(x[:, None] - x[None, :]), labels=labels, coords=x[:, None])


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Probability weights indexed by the points of a space."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1:
            raise ValueError("weights must be a vector")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > MASS_TOL:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.weights.size

    def __getitem__(self, i):
        return self.weights[i]

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > 0)

    def on(self, space: MetricSpace) -> "DiscreteMeasure":
        if len(self) != space.size:
            raise ValueError(f"measure has {len(self)} weights, space has {space.size} points")
        return self


def dirac(n: int, i: int) -> DiscreteMeasure:
    w = np.zeros(n)
    w[i] = 1.0
    return DiscreteMeasure(w)


def uniform(n: int, support: Optional[Sequence[int]] = None) -> DiscreteMeasure:
    w = np.zeros(n)
    idx = np.arange(n) if support is None else np.asarray(support, dtype=int)
    w[idx] = 1.0 / idx.size
    return DiscreteMeasure(w)


def as_weights(mu) -> np.ndarray:
    return mu.weights if isinstance(mu, DiscreteMeasure) else np.asarray(mu, dtype=float)


def first_moment(space: MetricSpace, mu, base: int) -> float:
    """Mean distance from ``base`` under ``mu``; finite on any finite space."""
    if not 0 <= base < space.size:
        raise IndexError(f"base point {base} out of range for {space.size} points")
    w = as_weights(mu)
    if w.size != space.size:
        raise ValueError(f"measure has {w.size} weights, space has {space.size} points")
    return float(space.dist[base] @ w)
