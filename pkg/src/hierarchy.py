# src/hierarchy.py
# Laminar containment forest over horizontal types.
#
# Types are declared structurally (id + optional parent). An individual's
# type set must be a root-path in that forest: upward-closed (holding a type
# means holding every containing type) and totally ordered by containment.
# Any realized population then satisfies the nesting condition, whoever applies.
#
# The forest also yields the peel order that drives the hierarchical choice
# rule: level 1 = types containing no other type, level n = the leaves left
# after removing levels 1..n-1.

from __future__ import annotations

from functools import cached_property

import networkx as nx

from src.errors import ErrorCode, HierarchyError, ValidationIssue


class HierarchyForest:
    """Immutable parent -> child forest of horizontal type ids."""

    def __init__(self, graph):
        self._graph = nx.DiGraph(graph)
        nx.freeze(self._graph)

    # ---------------- structure ----------------

    @cached_property
    def types(self):
        return tuple(sorted(self._graph.nodes))

    def __contains__(self, h):
        return h in self._graph

    def __len__(self):
        return self._graph.number_of_nodes()

    def __eq__(self, other):
        if not isinstance(other, HierarchyForest):
            return NotImplemented
        return self.declarations() == other.declarations()

    def __hash__(self):
        return hash(tuple((d["id"], d["parent"]) for d in self.declarations()))

    def __repr__(self):
        return f"HierarchyForest({self.declarations()!r})"

    def _require(self, h):
        if h not in self._graph:
            raise HierarchyError(
                [ValidationIssue(ErrorCode.UNKNOWN_TYPE, f"unknown horizontal type {h!r}")]
            )

    def parent(self, h):
        self._require(h)
        preds = list(self._graph.predecessors(h))
        return preds[0] if preds else None

    def children(self, h):
        self._require(h)
        return tuple(sorted(self._graph.successors(h)))

    @cached_property
    def roots(self):
        return tuple(h for h in self.types if self._graph.in_degree(h) == 0)

    @cached_property
    def leaves(self):
        return tuple(h for h in self.types if self._graph.out_degree(h) == 0)

    @cached_property
    def _ancestor_chains(self):
        chains = {}
        for h in self.types:
            chain = []
            p = self.parent(h)
            while p is not None:
                chain.append(p)
                p = self.parent(p)
            chains[h] = tuple(chain)
        return chains

    def ancestors(self, h):
        """Containing types of h, nearest first; empty for a root."""
        self._require(h)
        return self._ancestor_chains[h]

    def depth(self, h):
        return len(self.ancestors(h)) + 1

    def is_ancestor(self, a, b):
        """True when type a (strictly) contains type b."""
        return a in self.ancestors(b)

    def comparable(self, a, b):
        return a == b or self.is_ancestor(a, b) or self.is_ancestor(b, a)

    @cached_property
    def max_depth(self):
        return max((self.depth(h) for h in self.types), default=0)

    def declarations(self):
        return [{"id": h, "parent": self.parent(h)} for h in self.types]

    # ---------------- individuals ----------------

    def root_path_issues(self, types, who="", path=""):
        """
        Issues that stop `types` from being a root-path in this forest.
        Empty list means the set is valid (the empty set always is).
        """
        issues = []
        types = set(types)
        unknown = sorted(h for h in types if h not in self._graph)
        for h in unknown:
            issues.append(
                ValidationIssue(ErrorCode.UNKNOWN_TYPE, f"{who} holds unknown type {h!r}", path)
            )
        known = sorted(types - set(unknown))

        for h in known:
            p = self.parent(h)
            if p is not None and p not in types:
                issues.append(
                    ValidationIssue(
                        ErrorCode.HIERARCHY_VIOLATION,
                        f"{who} holds {h!r} but not its containing type {p!r}",
                        path,
                    )
                )
        for i, a in enumerate(known):
            for b in known[i + 1:]:
                if not self.comparable(a, b):
                    issues.append(
                        ValidationIssue(
                            ErrorCode.HIERARCHY_VIOLATION,
                            f"{who} holds incomparable types {a!r} and {b!r}",
                            path,
                        )
                    )
        return issues

    def deepest(self, types):
        """Deepest type of a valid root-path, or None for the empty set."""
        if not types:
            return None
        return max(types, key=lambda h: (self.depth(h), h))

    # ---------------- levels ----------------

    @cached_property
    def levels(self):
        return peel_levels(self)


def build_forest(declarations, individual_types=None):
    """
    Build and validate a forest.

    Args:
        declarations: iterable of {"id": type, "parent": type-or-None}
            (tuples (id, parent) are accepted too).
        individual_types: optional mapping individual id -> iterable of types;
            every entry is checked to be a root-path.

    Returns:
        HierarchyForest

    Raises:
        HierarchyError carrying every issue found (UNKNOWN_TYPE, CYCLE,
        DUPLICATE_ID, HIERARCHY_VIOLATION).
    """
    issues = []
    graph = nx.DiGraph()
    parents = {}
    for n, decl in enumerate(declarations or []):
        if isinstance(decl, dict):
            h, p = decl.get("id"), decl.get("parent")
        else:
            h, p = decl
        path = f"horizontal_types[{n}]"
        if not isinstance(h, str) or not h:
            issues.append(ValidationIssue(ErrorCode.BAD_SCHEMA, "type id must be a non-empty string", path))
            continue
        if h in parents:
            issues.append(ValidationIssue(ErrorCode.DUPLICATE_ID, f"type {h!r} declared twice", path))
            continue
        parents[h] = p
        graph.add_node(h)

    for h, p in parents.items():
        if p is None:
            continue
        if p not in parents:
            issues.append(
                ValidationIssue(ErrorCode.UNKNOWN_TYPE, f"type {h!r} has unknown parent {p!r}", h)
            )
            continue
        graph.add_edge(p, h)

    if not nx.is_directed_acyclic_graph(graph):
        cycle = [u for u, _ in nx.find_cycle(graph)]
        issues.append(
            ValidationIssue(ErrorCode.CYCLE, f"parent declarations form a cycle: {' -> '.join(cycle)}")
        )
    if issues:
        raise HierarchyError(issues)

    forest = HierarchyForest(graph)

    for who, types in sorted((individual_types or {}).items()):
        issues += forest.root_path_issues(types, who=f"individual {who!r}", path=f"individuals.{who}")
    if issues:
        raise HierarchyError(issues)
    return forest


def peel_levels(forest):
    """
    Leaf-peeling order: tuple of levels, each a tuple of type ids sorted by id.
    """
    remaining = set(forest.types)
    levels = []
    while remaining:
        level = sorted(
            h for h in remaining if not any(c in remaining for c in forest.children(h))
        )
        levels.append(tuple(level))
        remaining.difference_update(level)
    return tuple(levels)


def topological_levels(forest):
    """
    Same layering computed independently: a type's level is the length of
    its longest downward path to a leaf, via a reverse topological sweep.
    """
    graph = forest._graph
    height = {}
    for h in reversed(list(nx.topological_sort(graph))):
        height[h] = 1 + max((height[c] for c in graph.successors(h)), default=-1)
    out = {}
    for h, k in height.items():
        out.setdefault(k, []).append(h)
    return tuple(tuple(sorted(out[k])) for k in sorted(out))


def ancestors(forest, h):
    return forest.ancestors(h)
