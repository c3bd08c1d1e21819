"""Directed acyclic graphs over named covariates.

A :class:`Dag` is the hypothesized structure of a path model: nodes are
observed covariates, directed edges are hypothesized effects.  This module
provides random structure generation, d-separation, the union basis set of
independence claims, the edge transformations (shuffle/drop/add) that define
the misspecification scenarios, and a plain-text serialization grammar
(``TARGET ~ SOURCE1 + SOURCE2``).
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelSpecError

Edge = tuple[str, str]

_TOKEN_RE = re.compile(r"[^\s~+#]+\Z")


class ScenarioKind(enum.Enum):
    """Data-generation scenario relative to the fitted model structure."""

    RANDOM = "random"
    EXACT = "exact"
    SHUFFLED = "shuffled"
    OVERSPECIFIED = "overspecified"
    UNDERSPECIFIED = "underspecified"

    @classmethod
    def parse(cls, name: str) -> "ScenarioKind":
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown scenario {name!r}; expected one of: {valid}") from None


@dataclass(frozen=True)
class IndependenceClaim:
    """A conditional-independence statement implied by a DAG.

    ``x`` and ``y`` are non-adjacent nodes, claimed independent given
    ``conditioning_set``.
    """

    x: str
    y: str
    conditioning_set: frozenset[str]

    def __post_init__(self):
        if self.x == self.y:
            raise ValueError("claim endpoints must differ")
        if self.x in self.conditioning_set or self.y in self.conditioning_set:
            raise ValueError("claim endpoints cannot appear in the conditioning set")


@dataclass(frozen=True)
class Dag:
    """Directed acyclic graph with an ordered node list.

    Invariants enforced at construction: acyclicity, no self-loops, at most
    one edge per unordered node pair, and all edge endpoints known.
    """

    node_names: tuple[str, ...]
    edges: frozenset[Edge]
    _parents: dict[str, frozenset[str]] = field(
        init=False, repr=False, compare=False, default_factory=dict
    )
    _children: dict[str, frozenset[str]] = field(
        init=False, repr=False, compare=False, default_factory=dict
    )

    def __init__(self, node_names, edges=()):
        object.__setattr__(self, "node_names", tuple(node_names))
        object.__setattr__(self, "edges", frozenset((str(a), str(b)) for a, b in edges))
        self._validate()

    def _validate(self) -> None:
        names = self.node_names
        if len(set(names)) != len(names):
            raise ValueError("duplicate node names")
        known = set(names)
        parents: dict[str, set[str]] = {v: set() for v in names}
        children: dict[str, set[str]] = {v: set() for v in names}
        for src, tgt in self.edges:
            if src not in known or tgt not in known:
                raise ValueError(f"edge ({src}, {tgt}) references unknown node")
            if src == tgt:
                raise ValueError(f"self-loop on node {src!r}")
            if (tgt, src) in self.edges:
                raise ValueError(f"both directions present between {src!r} and {tgt!r}")
            parents[tgt].add(src)
            children[src].add(tgt)
        object.__setattr__(self, "_parents", {v: frozenset(p) for v, p in parents.items()})
        object.__setattr__(self, "_children", {v: frozenset(c) for v, c in children.items()})
        # Kahn's algorithm doubles as the acyclicity check.
        order = self._kahn()
        if len(order) != len(names):
            raise ValueError("graph contains a cycle")

    def _kahn(self) -> list[str]:
        indeg = {v: len(self._parents[v]) for v in self.node_names}
        index = {v: i for i, v in enumerate(self.node_names)}
        ready = sorted((v for v in self.node_names if indeg[v] == 0), key=index.get)
        order: list[str] = []
        while ready:
            v = ready.pop(0)
            order.append(v)
            for c in sorted(self._children[v], key=index.get):
                indeg[c] -= 1
                if indeg[c] == 0:
                    # insertion keeps `ready` sorted by node index
                    pos = 0
                    while pos < len(ready) and index[ready[pos]] < index[c]:
                        pos += 1
                    ready.insert(pos, c)
        return order

    # -- basic accessors ----------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.node_names)

    def parents(self, node: str) -> frozenset[str]:
        return self._parents[node]

    def children(self, node: str) -> frozenset[str]:
        return self._children[node]

    def exogenous(self) -> tuple[str, ...]:
        """Nodes with in-degree zero, in node order."""
        return tuple(v for v in self.node_names if not self._parents[v])

    def endogenous(self) -> tuple[str, ...]:
        """Nodes with at least one parent, in node order."""
        return tuple(v for v in self.node_names if self._parents[v])

    def adjacent(self, a: str, b: str) -> bool:
        return (a, b) in self.edges or (b, a) in self.edges

    def descendants(self, node: str) -> frozenset[str]:
        """All nodes reachable from ``node`` along directed edges (exclusive)."""
        seen: set[str] = set()
        stack = list(self._children[node])
        while stack:
            v = stack.pop()
            if v not in seen:
                seen.add(v)
                stack.extend(self._children[v])
        return frozenset(seen)

    def with_edges(self, edges) -> "Dag":
        """New Dag over the same nodes with a different edge set."""
        return Dag(self.node_names, edges)

    # -- serialization ------------------------------------------------------

    def to_spec(self) -> str:
        """Render as the plain-text grammar, one line per endogenous node.

        Isolated nodes cannot be expressed in the grammar and raise.
        """
        index = {v: i for i, v in enumerate(self.node_names)}
        involved = {v for e in self.edges for v in e}
        isolated = [v for v in self.node_names if v not in involved]
        if isolated:
            raise ValueError(f"isolated node(s) {isolated} cannot be serialized")
        lines = []
        for tgt in self.node_names:
            pars = sorted(self._parents[tgt], key=index.get)
            if pars:
                lines.append(f"{tgt} ~ {' + '.join(pars)}")
        return "\n".join(lines) + "\n"


def topological_order(dag: Dag) -> list[str]:
    """Deterministic topological order (every edge source precedes its target)."""
    return dag._kahn()


def parse_model_spec(text: str) -> Dag:
    """Parse the ``TARGET ~ SOURCE1 + SOURCE2`` grammar into a Dag.

    One line per endogenous node; ``#`` starts a comment; blank lines are
    skipped.  Exogenous nodes are those never appearing as a target.  Node
    order is order of first appearance.

    Raises
    ------
    ModelSpecError
        On any grammar violation, carrying the offending line number.
    """
    names: list[str] = []
    seen: set[str] = set()
    targets: set[str] = set()
    edges: set[Edge] = set()

    def register(tok: str) -> None:
        if tok not in seen:
            seen.add(tok)
            names.append(tok)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "~" not in line:
            raise ModelSpecError("expected 'TARGET ~ SOURCE1 + SOURCE2'", lineno)
        left, _, right = line.partition("~")
        target = left.strip()
        if not _TOKEN_RE.match(target):
            raise ModelSpecError(f"invalid target {target!r}", lineno)
        if target in targets:
            raise ModelSpecError(f"duplicate target {target!r}", lineno)
        sources = [s.strip() for s in right.split("+")]
        if not right.strip() or any(not s for s in sources):
            raise ModelSpecError("empty source list", lineno)
        register(target)
        targets.add(target)
        for src in sources:
            if not _TOKEN_RE.match(src):
                raise ModelSpecError(f"invalid source {src!r}", lineno)
            if src == target:
                raise ModelSpecError(f"self-reference on {target!r}", lineno)
            if (src, target) in edges:
                raise ModelSpecError(f"duplicate source {src!r}", lineno)
            register(src)
            edges.add((src, target))
    if not edges:
        raise ModelSpecError("model spec declares no relations")
    try:
        return Dag(names, edges)
    except ValueError as exc:
        raise ModelSpecError(str(exc)) from exc


def read_model_spec(path) -> Dag:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_model_spec(fh.read())


# -- random structure generation ---------------------------------------------


def random_dag(n: int, connectance: float, rng: np.random.Generator) -> Dag:
    """Draw a uniformly random DAG with ``floor(connectance * n**2)`` edges.

    A random topological ordering is drawn first; the edge budget is then
    sampled uniformly without replacement from all forward pairs under that
    ordering, which guarantees acyclicity and leaves the first node of the
    ordering exogenous.

    Parameters
    ----------
    n : int
        Node count, at least 2.  Nodes are named ``x1`` .. ``xn``.
    connectance : float
        Edge density in (0, 1]; the edge count is ``floor(connectance * n**2)``,
        capped by the DAG maximum ``n * (n - 1) / 2``.
    rng : numpy.random.Generator
        Source of randomness; the draw is deterministic given its state.
    """
    if n < 2:
        raise ValueError("need at least 2 nodes")
    if not 0.0 < connectance <= 1.0:
        raise ValueError("connectance must be in (0, 1]")
    max_edges = n * (n - 1) // 2
    n_edges = min(int(np.floor(connectance * n * n)), max_edges)
    names = tuple(f"x{i + 1}" for i in range(n))
    order = [names[i] for i in rng.permutation(n)]
    forward = [(order[i], order[j]) for i in range(n) for j in range(i + 1, n)]
    chosen = rng.choice(len(forward), size=n_edges, replace=False) if n_edges else []
    return Dag(names, (forward[i] for i in chosen))


# -- d-separation -------------------------------------------------------------


def d_separated(dag: Dag, x: str, y: str, z) -> bool:
    """Decide whether ``x`` and ``y`` are d-separated given the set ``z``.

    Uses the linear-time reachability algorithm: a node is reachable from
    ``x`` along an active trail, travelling either "up" (towards parents) or
    "down" (towards children); colliders pass only when they have a
    descendant in ``z``.
    """
    z = frozenset(z)
    known = set(dag.node_names)
    for node in {x, y} | z:
        if node not in known:
            raise ValueError(f"unknown node {node!r}")
    if x == y:
        raise ValueError("x and y must differ")
    if x in z or y in z:
        raise ValueError("x and y cannot be in the conditioning set")

    # z together with all its ancestors: colliders open iff they are in here.
    anc_z: set[str] = set()
    stack = list(z)
    while stack:
        v = stack.pop()
        if v not in anc_z:
            anc_z.add(v)
            stack.extend(dag.parents(v))

    visited: set[tuple[str, str]] = set()
    frontier: list[tuple[str, str]] = [(x, "up")]
    while frontier:
        node, direction = frontier.pop()
        if (node, direction) in visited:
            continue
        visited.add((node, direction))
        if node == y:
            return False
        if direction == "up" and node not in z:
            frontier.extend((p, "up") for p in dag.parents(node))
            frontier.extend((c, "down") for c in dag.children(node))
        elif direction == "down":
            if node not in z:
                frontier.extend((c, "down") for c in dag.children(node))
            if node in anc_z:
                frontier.extend((p, "up") for p in dag.parents(node))
    return True


def basis_set(dag: Dag) -> list[IndependenceClaim]:
    """Union basis set: one claim per non-adjacent pair.

    For each non-adjacent unordered pair the member later in the (fixed)
    topological order is taken as ``y`` and the claim conditions on
    ``parents(x) | parents(y)``.  Claims come back sorted by node indices.
    """
    index = {v: i for i, v in enumerate(dag.node_names)}
    topo_pos = {v: i for i, v in enumerate(topological_order(dag))}
    claims: list[IndependenceClaim] = []
    for i, a in enumerate(dag.node_names):
        for b in dag.node_names[i + 1:]:
            if dag.adjacent(a, b):
                continue
            x, y = (a, b) if topo_pos[a] < topo_pos[b] else (b, a)
            cond = (dag.parents(x) | dag.parents(y)) - {x, y}
            claims.append(IndependenceClaim(x, y, frozenset(cond)))
    claims.sort(key=lambda c: (index[c.x], index[c.y]))
    return claims


# -- scenario edge transformations --------------------------------------------


def _round_count(fraction: float, n_edges: int) -> int:
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must be in [0, 1]")
    return int(round(fraction * n_edges))


def _edges_acyclic(nodes, edges) -> bool:
    indeg = {v: 0 for v in nodes}
    children: dict[str, list[str]] = {v: [] for v in nodes}
    for src, tgt in edges:
        indeg[tgt] += 1
        children[src].append(tgt)
    ready = [v for v in nodes if indeg[v] == 0]
    count = 0
    while ready:
        v = ready.pop()
        count += 1
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
    return count == len(indeg)


def shuffle_edges(dag: Dag, fraction: float, rng: np.random.Generator) -> Dag:
    """Reverse a random ``round(fraction * |edges|)`` subset of edges.

    Acyclicity is preserved: a whole selection that would create a cycle is
    resampled (bounded retries), after which reversals are applied greedily
    one edge at a time, skipping any that would close a cycle, until the
    quota is met or no legal reversal remains.
    """
    edge_list = sorted(dag.edges)
    k = _round_count(fraction, len(edge_list))
    if k == 0:
        return dag
    for _ in range(100):
        chosen = set(rng.choice(len(edge_list), size=k, replace=False).tolist())
        new_edges = [
            (tgt, src) if i in chosen else (src, tgt)
            for i, (src, tgt) in enumerate(edge_list)
        ]
        if _edges_acyclic(dag.node_names, new_edges):
            return dag.with_edges(new_edges)
    # greedy fallback
    current = set(edge_list)
    reversed_count = 0
    for i in rng.permutation(len(edge_list)):
        if reversed_count == k:
            break
        src, tgt = edge_list[i]
        if (src, tgt) not in current:
            continue
        candidate = (current - {(src, tgt)}) | {(tgt, src)}
        if _edges_acyclic(dag.node_names, candidate):
            current = candidate
            reversed_count += 1
    return dag.with_edges(current)


def drop_edges(dag: Dag, fraction: float, rng: np.random.Generator) -> Dag:
    """Remove a random ``round(fraction * |edges|)`` subset of edges.

    When ``fraction > 0`` at least one edge is removed so the transformation
    is never vacuous.
    """
    edge_list = sorted(dag.edges)
    k = _round_count(fraction, len(edge_list))
    if fraction > 0 and edge_list and k == 0:
        k = 1
    if k == 0:
        return dag
    chosen = set(rng.choice(len(edge_list), size=k, replace=False).tolist())
    return dag.with_edges(e for i, e in enumerate(edge_list) if i not in chosen)


def add_edges(dag: Dag, fraction: float, rng: np.random.Generator) -> Dag:
    """Add ``round(fraction * |edges|)`` new edges between non-adjacent pairs.

    New edges are oriented forward in the fixed topological order, so the
    result stays acyclic.  Never vacuous for ``fraction > 0``; raises when the
    DAG is complete (no addable pair).
    """
    edge_list = sorted(dag.edges)
    k = _round_count(fraction, len(edge_list))
    if fraction > 0 and edge_list and k == 0:
        k = 1
    if k == 0:
        return dag
    order = topological_order(dag)
    candidates = [
        (order[i], order[j])
        for i in range(dag.n)
        for j in range(i + 1, dag.n)
        if not dag.adjacent(order[i], order[j])
    ]
    if not candidates:
        raise ValueError("graph is complete; no edge can be added")
    k = min(k, len(candidates))
    chosen = rng.choice(len(candidates), size=k, replace=False).tolist()
    return dag.with_edges(set(edge_list) | {candidates[i] for i in chosen})
