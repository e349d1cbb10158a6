"""Road multigraph, origin-destination path enumeration and incidence structure.

Nodes are 1-based (Home is node 1, Work is node n by default).  Edges are kept
in an ordered list and identified by their 0-based list position, which makes
parallel edges first-class: two edges with identical endpoints are distinct
strategies as long as they sit at different indices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyPathSet, ValidationError

Path = tuple[int, ...]


@dataclass(frozen=True)
class NetworkSpec:
    node_count: int
    edges: tuple[tuple[int, int], ...]
    origin: int = 1
    destination: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple((int(t), int(h)) for t, h in self.edges))
        if self.destination is None:
            object.__setattr__(self, "destination", self.node_count)
        n = self.node_count
        if not isinstance(n, int) or n < 1:
            raise ValidationError(f"node_count must be a positive integer, got {n!r}", "node_count")
        for idx, (tail, head) in enumerate(self.edges):
            if not (1 <= tail <= n and 1 <= head <= n):
                raise ValidationError(f"edge ({tail}, {head}) references a node outside 1..{n}", f"edges[{idx}]")
        for name in ("origin", "destination"):
            node = getattr(self, name)
            if not 1 <= node <= n:
                raise ValidationError(f"node {node} outside 1..{n}", name)
        if self.origin == self.destination:
            raise ValidationError("origin and destination must differ", "destination")

    @property
    def edge_count(self) -> int:
        return len(self.edges)


def enumerate_paths(net: NetworkSpec) -> tuple[Path, ...]:
    """All edge-distinct walks from origin to destination, as edge-index tuples.

    A walk stops the first time it reaches the destination.  Node revisits are
    allowed as long as no edge repeats.  Output is sorted lexicographically.
    """
    outgoing: dict[int, list[int]] = {}
    for idx, (tail, _) in enumerate(net.edges):
        outgoing.setdefault(tail, []).append(idx)

    found: list[Path] = []
    used: list[int] = []
    used_set: set[int] = set()

    def extend(node: int) -> None:
        if node == net.destination:
            found.append(tuple(used))
            return
        for idx in outgoing.get(node, ()):
            if idx in used_set:
                continue
            used.append(idx)
            used_set.add(idx)
            extend(net.edges[idx][1])
            used.pop()
            used_set.discard(idx)

    extend(net.origin)
    if not found:
        raise EmptyPathSet(f"no path from node {net.origin} to node {net.destination}")
    return tuple(sorted(found))


def incidence_matrix(net: NetworkSpec, paths: Sequence[Path]) -> np.ndarray:
    """L x K path-link incidence matrix: entry (j, k) is 1 iff edge j is on path k."""
    delta = np.zeros((net.edge_count, len(paths)), dtype=np.int64)
    for k, path in enumerate(paths):
        delta[list(path), k] = 1
    return delta


def overlap_matrix(delta: np.ndarray) -> np.ndarray:
    """Shared-edge counts between every pair of paths (delta' delta)."""
    delta = np.asarray(delta)
    return delta.T @ delta


def link_loads(delta: np.ndarray, x) -> np.ndarray:
    """Mass on every edge given the per-path aggregate state ``x``."""
    delta = np.asarray(delta)
    x = np.asarray(x)
    if x.shape != (delta.shape[1],):
        raise ValueError(f"aggregate state has shape {x.shape}, expected ({delta.shape[1]},)")
    return delta @ x


def describe_path(net: NetworkSpec, path: Path) -> str:
    """Human-readable node sequence, e.g. ``1->2->4``."""
    nodes = [net.origin] + [net.edges[idx][1] for idx in path]
    return "->".join(str(n) for n in nodes)
