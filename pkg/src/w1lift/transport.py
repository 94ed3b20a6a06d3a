"""Exact 1-Wasserstein distances, optimal couplings and gluing.

``w1`` solves the transportation problem with a successive-shortest-path
min-cost flow and returns, alongside the coupling, a 1-Lipschitz potential
whose integral against ``mu - nu`` reproduces the optimal cost.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._ssp import ssp_transport
from .space import EPS, MetricSpace, as_weights

PRUNE = 1e-15


class TransportError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Coupling:
    """Sparse joint weights ``(i, j) -> mass`` between two measures on a space."""

    entries: dict
    n: int

    def __post_init__(self):
        for (i, j), m in self.entries.items():
            if m < 0:
                raise TransportError(f"negative coupling mass {m!r} at {(i, j)}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise TransportError(f"coupling index {(i, j)} outside space of size {self.n}")

    @classmethod
    def from_dense(cls, matrix, prune: float = 0.0) -> "Coupling":
        p = np.asarray(matrix, dtype=float)
        idx = zip(*np.nonzero(p > prune))
        return cls({(int(i), int(j)): float(p[i, j]) for i, j in idx}, p.shape[0])

    def dense(self) -> np.ndarray:
        p = np.zeros((self.n, self.n))
        for (i, j), m in self.entries.items():
            p[i, j] += m
        return p

    def first_marginal(self) -> np.ndarray:
        out = np.zeros(self.n)
        for (i, _), m in self.entries.items():
            out[i] += m
        return out

    def second_marginal(self) -> np.ndarray:
        out = np.zeros(self.n)
        for (_, j), m in self.entries.items():
            out[j] += m
        return out

    def cost(self, space: MetricSpace) -> float:
        return float(sum(space.dist[i, j] * m for (i, j), m in self.entries.items()))

    def rows(self) -> dict:
        """``i -> [(j, mass), ...]`` sorted by ``j``."""
        out = {}
        for (i, j), m in sorted(self.entries.items()):
            out.setdefault(i, []).append((j, m))
        return out

    def to_json(self) -> list:
        return [{"i": i, "j": j, "m": m} for (i, j), m in sorted(self.entries.items())]

    @classmethod
    def from_json(cls, atoms, n: int) -> "Coupling":
        entries = {}
        for a in atoms:
            key = (int(a["i"]), int(a["j"]))
            entries[key] = entries.get(key, 0.0) + float(a["m"])
        return cls(entries, n)


@dataclass(frozen=True, eq=False)
class DualCertificate:
    potential: np.ndarray
    reported_gap: float

    def lipschitz_excess(self, space: MetricSpace) -> float:
        """Largest ``|phi(x) - phi(y)| - d(x, y)``; nonpositive when feasible."""
        phi = self.potential
        return float(np.max(np.abs(phi[:, None] - phi[None, :]) - space.dist))


@dataclass(frozen=True)
class W1Result:
    distance: float
    coupling: Coupling
    cert: DualCertificate

    def __iter__(self):
        return iter((self.distance, self.coupling, self.cert))


def _check_pair(space, mu, nu):
    a, b = as_weights(mu), as_weights(nu)
    if a.size != space.size or b.size != space.size:
        raise TransportError("measures must live on the given space")
    if abs(a.sum() - b.sum()) > EPS:
        raise TransportError(f"mass mismatch: {a.sum()!r} vs {b.sum()!r}")
    if np.any(a < 0) or np.any(b < 0):
        raise TransportError("negative mass")
    return a, b


def w1(space: MetricSpace, mu, nu) -> W1Result:
    """Optimal cost, a deterministic optimal coupling and a dual potential.

    Mass shared by ``mu`` and ``nu`` is left in place (optimal for any metric
    cost), so only the excess of ``mu`` over ``nu`` is routed through the
    flow solver.
    """
    a, b = _check_pair(space, mu, nu)
    stay = np.minimum(a, b)
    src = np.flatnonzero(a - stay > PRUNE)
    snk = np.flatnonzero(b - stay > PRUNE)
    entries = {(int(i), int(i)): float(stay[i]) for i in np.flatnonzero(stay > PRUNE)}
    phi = np.zeros(space.size)
    if src.size and snk.size:
        cost = np.ascontiguousarray(space.dist[np.ix_(src, snk)])
        flow, pu, pv = ssp_transport((a - stay)[src], (b - stay)[snk], cost)
        for r, c in zip(*np.nonzero(flow > PRUNE)):
            entries[(int(src[r]), int(snk[c]))] = float(flow[r, c])
        # c-transform of the sink potentials is 1-Lipschitz on the whole space
        beta = -pv
        phi = np.min(space.dist[:, snk] + beta[None, :], axis=1)
    coupling = Coupling(entries, space.size)
    distance = coupling.cost(space)
    gap = abs(distance - float(phi @ (a - b)))
    return W1Result(distance, coupling, DualCertificate(phi, gap))


def w1_distance(space: MetricSpace, mu, nu) -> float:
    return w1(space, mu, nu).distance


def w1_line_oracle(space: MetricSpace, mu, nu) -> float:
    """Closed-form W1 on the line: the area between the two CDFs."""
    if not space.is_line:
        raise TransportError("w1_line_oracle needs a line-embedded space")
    a, b = as_weights(mu), as_weights(nu)
    x = space.coords[:, 0]
    order = np.argsort(x, kind="stable")
    xs = x[order]
    gap = np.cumsum(a[order] - b[order])[:-1]
    return float(np.sum(np.abs(gap) * np.diff(xs)))


def is_optimal(space: MetricSpace, coupling: Coupling, tol: float = EPS) -> bool:
    """True when the coupling's cost is within ``tol`` of the optimum."""
    best = w1(space, coupling.first_marginal(), coupling.second_marginal())
    return coupling.cost(space) - best.distance <= tol


def product_coupling(mu, nu) -> Coupling:
    a, b = as_weights(mu), as_weights(nu)
    return Coupling.from_dense(np.outer(a, b))


def shuffled_coupling(mu, nu) -> Coupling:
    """Feasible coupling from the north-west corner rule with the target order reversed.

    Deterministic and generally far from optimal; used to build adversarial lifts.
    """
    a = as_weights(mu).astype(float).copy()
    b = as_weights(nu).astype(float).copy()
    rows = [int(i) for i in np.flatnonzero(a > 0)]
    cols = [int(j) for j in np.flatnonzero(b > 0)][::-1]
    entries = {}
    r = c = 0
    while r < len(rows) and c < len(cols):
        i, j = rows[r], cols[c]
        m = min(a[i], b[j])
        if m > PRUNE:
            entries[(i, j)] = entries.get((i, j), 0.0) + m
        a[i] -= m
        b[j] -= m
        if a[i] <= PRUNE:
            r += 1
        if b[j] <= PRUNE:
            c += 1
    return Coupling(entries, a.size)


@dataclass(frozen=True, eq=False)
class MultiCoupling:
    """Sparse plan on ``X^k``: a list of ``(path, mass)`` atoms."""

    atoms: list
    n: int
    pruned: float = 0.0

    @property
    def arity(self) -> int:
        return len(self.atoms[0][0]) if self.atoms else 0

    def total_mass(self) -> float:
        return float(sum(m for _, m in self.atoms))

    def marginal(self, k: int) -> np.ndarray:
        out = np.zeros(self.n)
        for path, m in self.atoms:
            out[path[k]] += m
        return out

    def pair_projection(self, k: int, l: int) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        for path, m in self.atoms:
            out[path[k], path[l]] += m
        return out


def glue(c12: Coupling, c23: Coupling, tol: float = EPS) -> MultiCoupling:
    """Glue two couplings along their shared marginal (0/0 taken as 0)."""
    return glue_chain([c12, c23], tol=tol)


class GluingTooLarge(TransportError):
    pass


def glue_chain(couplings: Sequence[Coupling], tol: float = EPS, prune: float = PRUNE,
               method: str = "markov", max_atoms: Optional[int] = None) -> MultiCoupling:
    """Glue consecutive couplings into one multi-marginal plan.

    ``method="markov"`` is iterated gluing: a path ending at ``y`` is split
    along row ``y`` of the next coupling in proportion ``c(y, z) / m(y)``
    with ``m`` the next coupling's first marginal. ``method="sequential"``
    instead fills the targets of ``y`` in index order from the paths ending
    at ``y`` in path order, so each step adds at most as many atoms as the
    coupling has entries. Both have the prescribed consecutive pair
    marginals. Atoms lighter than ``prune`` are dropped and the rest
    renormalised; the dropped mass is kept in ``pruned``. Exceeding
    ``max_atoms`` raises :class:`GluingTooLarge`.
    """
    couplings = list(couplings)
    if not couplings:
        raise TransportError("glue_chain needs at least one coupling")
    if method not in ("markov", "sequential"):
        raise ValueError(f"unknown gluing method {method!r}")
    n = couplings[0].n
    for k in range(len(couplings) - 1):
        left = couplings[k].second_marginal()
        right = couplings[k + 1].first_marginal()
        if np.max(np.abs(left - right)) > tol:
            raise TransportError(f"interface marginal mismatch between couplings {k} and {k + 1}")
    paths = {(i, j): m for (i, j), m in sorted(couplings[0].entries.items()) if m > prune}
    step = _markov_step if method == "markov" else _sequential_step
    for c in couplings[1:]:
        paths = step(paths, c.rows(), prune)
        if max_atoms is not None and len(paths) > max_atoms:
            raise GluingTooLarge(f"glued plan exceeds {max_atoms} atoms")
    total = sum(paths.values())
    start = sum(couplings[0].entries.values())
    atoms = [(p, m / total) for p, m in sorted(paths.items())]
    return MultiCoupling(atoms, n, pruned=max(start - total, 0.0))


def _markov_step(paths: dict, rows: dict, prune: float) -> dict:
    mass = {y: sum(m for _, m in row) for y, row in rows.items()}
    nxt = {}
    for path, m in paths.items():
        y = path[-1]
        my = mass.get(y, 0.0)
        if my <= 0.0:
            continue
        for z, w in rows[y]:
            piece = m * w / my
            if piece > prune:
                nxt[path + (z,)] = piece
    return nxt


def _sequential_step(paths: dict, rows: dict, prune: float) -> dict:
    by_end = {}
    for path in sorted(paths):
        by_end.setdefault(path[-1], []).append(path)
    nxt = {}
    for y, group in by_end.items():
        row = rows.get(y)
        if not row:
            continue
        have = sum(paths[p] for p in group)
        my = sum(w for _, w in row)
        # targets rescaled to the mass actually arriving at y
        need = [w * have / my for _, w in row]
        k = 0
        for p in group:
            left = paths[p]
            while left > prune and k < len(row):
                piece = min(left, need[k])
                if k == len(row) - 1:
                    piece = left
                if piece > prune:
                    key = p + (row[k][0],)
                    nxt[key] = nxt.get(key, 0.0) + piece
                left -= piece
                need[k] -= piece
                if need[k] <= prune:
                    k += 1
    return nxt
