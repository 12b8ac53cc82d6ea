"""Correlation-induced distances and agglomerative dendrograms."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass

import numpy as np

from mfx.errors import DomainError, ParameterError
from mfx.rho import RhoMatrix

LINKAGES = ("single", "complete", "average")
_RHO_SLACK = 1e-9


@dataclass
class DistanceMatrix:
    labels: list
    values: np.ndarray


@dataclass
class Merge:
    a: int
    b: int
    height: float
    new_id: int
    size: int


@dataclass
class Dendrogram:
    """Merge tree in the usual id convention: leaves are 0..n-1, merge i creates n+i."""

    leaves: list
    merges: list
    linkage: str = "average"

    def to_dict(self) -> dict:
        return {
            "leaves": list(self.leaves),
            "linkage": self.linkage,
            "merges": [[m.a, m.b, m.height, m.new_id] for m in self.merges],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @property
    def heights(self) -> np.ndarray:
        return np.array([m.height for m in self.merges])

    def to_newick(self) -> str:
        """Newick string; each branch length is the parent height minus the child height."""
        n = len(self.leaves)
        height = {i: 0.0 for i in range(n)}
        children = {}
        for m in self.merges:
            height[m.new_id] = m.height
            children[m.new_id] = (m.a, m.b)

        def render(node, parent_h):
            bl = parent_h - height[node]
            if node < n:
                return f"{_newick_label(self.leaves[node])}:{bl:.12g}"
            a, b = children[node]
            return f"({render(a, height[node])},{render(b, height[node])}):{bl:.12g}"

        if not self.merges:
            return f"{_newick_label(self.leaves[0])};"
        root = self.merges[-1].new_id
        a, b = children[root]
        return f"({render(a, height[root])},{render(b, height[root])});"


def _newick_label(label: str) -> str:
    if re.search(r"[\s()\[\]':;,]", label):
        return "'" + label.replace("'", "''") + "'"
    return label


def to_distance(matrix: RhoMatrix) -> DistanceMatrix:
    """d(i, j) = sqrt(2 * (1 - rho_ij)), with a zero diagonal."""
    r = np.asarray(matrix.values, dtype=float)
    if np.any(np.abs(r) > 1.0 + _RHO_SLACK) or not np.all(np.isfinite(r)):
        raise DomainError("correlation entries must lie in [-1, 1]")
    d = np.sqrt(2.0 * (1.0 - np.clip(r, -1.0, 1.0)))
    np.fill_diagonal(d, 0.0)
    return DistanceMatrix(list(matrix.labels), d)


def agglomerate(d: DistanceMatrix, linkage: str = "average") -> Dendrogram:
    """Naive Lance-Williams agglomeration.

    Ties go to the pair of clusters whose smallest leaf indices are
    lexicographically lowest, so the output does not depend on floating-point
    ordering accidents.
    """
    if linkage not in LINKAGES:
        raise ParameterError(f"linkage must be one of {LINKAGES}, got {linkage!r}")
    D = np.array(d.values, dtype=float)
    n = len(D)
    if n < 2:
        raise ParameterError("need at least two leaves")
    if D.shape != (n, n) or not np.allclose(D, D.T, rtol=0, atol=1e-12):
        raise ParameterError("distance matrix must be square and symmetric")

    # active cluster slot -> (cluster id, size, smallest leaf)
    active = {i: (i, 1, i) for i in range(n)}
    merges = []
    for step in range(n - 1):
        best = None
        slots = sorted(active, key=lambda s: active[s][2])
        for ai, sa in enumerate(slots):
            for sb in slots[ai + 1:]:
                h = D[sa, sb]
                if best is None or h < best[0]:
                    best = (h, sa, sb)
        h, sa, sb = best
        ida, na, la = active[sa]
        idb, nb, lb = active[sb]
        for sk in active:
            if sk in (sa, sb):
                continue
            if linkage == "single":
                v = min(D[sk, sa], D[sk, sb])
            elif linkage == "complete":
                v = max(D[sk, sa], D[sk, sb])
            else:
                v = (na * D[sk, sa] + nb * D[sk, sb]) / (na + nb)
            D[sk, sa] = D[sa, sk] = v
        new_id = n + step
        merges.append(Merge(min(ida, idb), max(ida, idb), float(h), new_id, na + nb))
        active[sa] = (new_id, na + nb, min(la, lb))
        del active[sb]
    return Dendrogram(list(d.labels), merges, linkage)


def cut(dendrogram: Dendrogram, k: int) -> list:
    """Partition into ``k`` clusters by undoing the last k-1 merges.

    Clusters are lists of labels ordered by leaf index, and the clusters are
    ordered by their first leaf.
    """
    n = len(dendrogram.leaves)
    if not 1 <= k <= n:
        raise ParameterError(f"cluster count k={k} outside 1..{n}")
    members = {i: [i] for i in range(n)}
    for m in dendrogram.merges[: n - k]:
        members[m.new_id] = members.pop(m.a) + members.pop(m.b)
    groups = sorted(sorted(g) for g in members.values())
    return [[dendrogram.leaves[i] for i in g] for g in groups]


def largest_gap_k(dendrogram: Dendrogram) -> int:
    """Cluster count obtained by cutting inside the largest gap between merge heights."""
    n = len(dendrogram.leaves)
    if n < 3:
        return 1
    gaps = np.diff(dendrogram.heights)
    # cutting inside gap j (after merge j+1) leaves n - (j+1) clusters
    return n - (int(np.argmax(gaps)) + 1)
