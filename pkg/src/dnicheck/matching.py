"""Hopcroft-Karp maximum matching on bipartite graphs."""

from __future__ import annotations

from collections import deque
from collections.abc import Hashable, Iterable
from dataclasses import dataclass


@dataclass(frozen=True)
class BipartiteGraph:
    """Vertices are tagged by side, so the same label may appear on both."""

    left: tuple
    right: tuple
    edges: frozenset

    def __init__(self, left: Iterable[Hashable], right: Iterable[Hashable],
                 edges: Iterable[tuple[Hashable, Hashable]]):
        object.__setattr__(self, "left", tuple(left))
        object.__setattr__(self, "right", tuple(right))
        object.__setattr__(self, "edges", frozenset(edges))
        lset, rset = set(self.left), set(self.right)
        for u, v in self.edges:
            if u not in lset or v not in rset:
                raise ValueError(f"edge {(u, v)!r} leaves the vertex sets")


def hopcroft_karp(graph: BipartiteGraph) -> dict:
    """Maximum matching as a left -> right dict.

    Alternates a BFS that layers free left vertices with DFS augmentation
    along shortest paths; O(E sqrt(V)).
    """
    adj: dict = {u: [] for u in graph.left}
    for u, v in sorted(graph.edges, key=repr):
        adj[u].append(v)
    match_left: dict = {u: None for u in graph.left}
    match_right: dict = {v: None for v in graph.right}
    inf = float("inf")

    while True:
        dist: dict = {}
        queue = deque()
        for u in graph.left:
            if match_left[u] is None:
                dist[u] = 0
                queue.append(u)
            else:
                dist[u] = inf
        found = False
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                w = match_right[v]
                if w is None:
                    found = True
                elif dist[w] == inf:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        if not found:
            break

        def augment(root) -> bool:
            # iterative DFS restricted to the BFS layering
            path = [(root, iter(adj[root]))]
            while path:
                u, it = path[-1]
                advanced = False
                for v in it:
                    w = match_right[v]
                    if w is None:
                        for (x, _), y in zip(path, _targets(path, v)):
                            match_left[x] = y
                            match_right[y] = x
                        return True
                    if dist[w] == dist[u] + 1:
                        path.append((w, iter(adj[w])))
                        advanced = True
                        break
                if not advanced:
                    dist[u] = inf
                    path.pop()
            return False

        def _targets(path, last):
            # right vertex each path member is re-matched to
            return [match_left[x] for x, _ in path[1:]] + [last]

        for u in graph.left:
            if match_left[u] is None:
                augment(u)

    return {u: v for u, v in match_left.items() if v is not None}


def hopcroft_karp_perfect_matching(graph: BipartiteGraph) -> tuple[bool, dict | None]:
    """Whether some matching covers every vertex on both sides, and one such matching."""
    if len(graph.left) != len(graph.right):
        return False, None
    matching = hopcroft_karp(graph)
    if len(matching) != len(graph.left):
        return False, None
    return True, matching
