"""Partitioned feature forests: parent pointers, group labels, tree bookkeeping.

A graph over d features is a forest (each node has at most one feature
parent) whose trees each carry a group label: Group 1 trees additionally
condition every member on the class variable, Group 0 trees do not.  All
nodes of a tree share its label.

Mutations are in place; a chain owns its Graph exclusively.  Tree identity,
edge counts per group, and the Group 1 node count are maintained
incrementally because the sampling moves are the hot path; ``validate``
recomputes everything from scratch and is used in tests and periodic
self-checks.
"""

from __future__ import annotations

from typing import NamedTuple

from .errors import GraphCycleError


class ParentSet(NamedTuple):
    """The conditioning set of one feature: optional feature parent + class flag."""

    feature_parent: int | None
    includes_class: bool


class GraphSnapshot(NamedTuple):
    """Immutable (parents, groups) copy of a graph, cheap to store in traces."""

    parents: tuple
    groups: tuple

    def undirected_edges(self) -> tuple:
        return undirected_edges(self.parents)

    def class_key(self) -> tuple:
        return class_key(self.parents, self.groups)


def undirected_edges(parents) -> tuple:
    """Sorted tuple of (lo, hi) feature pairs joined by a parent pointer."""
    return tuple(sorted((j, p) if j < p else (p, j)
                        for j, p in enumerate(parents) if p is not None))


def class_key(parents, groups) -> tuple:
    """Equivalence-class key: rootings of a tree all map to the same key."""
    return (undirected_edges(parents), tuple(groups))


class Graph:
    """Mutable partitioned forest over ``d`` features."""

    __slots__ = ("d", "parents", "groups", "tree_ids", "children",
                 "members", "e0", "e1", "d1", "_next_tid")

    def __init__(self, d: int):
        if d < 1:
            raise ValueError("need at least one feature")
        self.d = d
        self.parents: list = [None] * d
        self.groups: list = [0] * d
        self.tree_ids: list = list(range(d))
        self.children: list = [set() for _ in range(d)]
        self.members: dict = {j: {j} for j in range(d)}
        self.e0 = 0
        self.e1 = 0
        self.d1 = 0
        self._next_tid = d

    # -- construction ---------------------------------------------------

    @classmethod
    def from_vectors(cls, parents, groups) -> "Graph":
        """Build a graph from parent/group vectors, checking forest validity."""
        d = len(parents)
        g = cls(d)
        order = _topological_order(parents)
        for j in order:
            p = parents[j]
            if p is not None:
                g.reattach_subtree(j, p)
        # group labels: flip whole trees whose vector label is 1
        for tid, nodes in list(g.members.items()):
            labels = {groups[u] for u in nodes}
            if len(labels) != 1:
                raise ValueError("group label differs within one tree")
            if labels == {1}:
                g.switch_tree_group(tid)
        return g

    def copy(self) -> "Graph":
        g = Graph.__new__(Graph)
        g.d = self.d
        g.parents = list(self.parents)
        g.groups = list(self.groups)
        g.tree_ids = list(self.tree_ids)
        g.children = [set(s) for s in self.children]
        g.members = {t: set(s) for t, s in self.members.items()}
        g.e0 = self.e0
        g.e1 = self.e1
        g.d1 = self.d1
        g._next_tid = self._next_tid
        return g

    def snapshot(self) -> GraphSnapshot:
        return GraphSnapshot(parents=tuple(self.parents), groups=tuple(self.groups))

    # -- queries ----------------------------------------------------------

    def parent_set(self, j: int) -> ParentSet:
        return ParentSet(self.parents[j], self.groups[j] == 1)

    def descendants(self, j: int) -> set:
        """All nodes in the subtree rooted at j, including j itself."""
        return set(self.subtree_nodes(j))

    def subtree_nodes(self, j: int) -> list:
        """Subtree of j in DFS order (j first); list form for hot-path reuse."""
        out = [j]
        stack = [j]
        children = self.children
        while stack:
            for c in children[stack.pop()]:
                out.append(c)
                stack.append(c)
        return out

    def tree_of(self, j: int) -> int:
        return self.tree_ids[j]

    def tree_members(self, tid: int) -> set:
        return self.members[tid]

    def structure_counts(self) -> tuple:
        """(E0, E1, D1): feature-feature edges per group, Group 1 node count."""
        return (self.e0, self.e1, self.d1)

    def undirected_edges(self) -> tuple:
        return undirected_edges(self.parents)

    def class_key(self) -> tuple:
        return class_key(self.parents, self.groups)

    def to_json_obj(self) -> dict:
        return {"groups": list(self.groups), "parents": list(self.parents)}

    # -- mutations --------------------------------------------------------

    def reattach_subtree(self, j: int, new_parent: int | None,
                         target_group: int | None = None) -> "Graph":
        """Detach the subtree rooted at j and hang it under ``new_parent``.

        The subtree takes the group of its new parent; when ``new_parent`` is
        None, j becomes a root and the subtree takes ``target_group``
        (defaulting to its current group).  ``new_parent`` must not lie inside
        the subtree.
        """
        sub = self.subtree_nodes(j)
        if new_parent is not None and new_parent in set(sub):
            raise GraphCycleError(
                f"node {new_parent} is inside the subtree of {j}")
        old_parent = self.parents[j]
        old_group = self.groups[j]
        old_tid = self.tree_ids[j]
        s = len(sub)

        if new_parent is not None:
            new_group = self.groups[new_parent]
        elif target_group is not None:
            if target_group not in (0, 1):
                raise ValueError("group label must be 0 or 1")
            new_group = target_group
        else:
            new_group = old_group

        # drop the edge into the old parent
        if old_parent is not None:
            self.children[old_parent].discard(j)
            if old_group == 0:
                self.e0 -= 1
            else:
                self.e1 -= 1

        # relabel the subtree if it changes group (s-1 internal edges move too)
        if new_group != old_group:
            if new_group == 1:
                self.e0 -= s - 1
                self.e1 += s - 1
                self.d1 += s
            else:
                self.e1 -= s - 1
                self.e0 += s - 1
                self.d1 -= s
            groups = self.groups
            for u in sub:
                groups[u] = new_group

        # attach
        if new_parent is not None:
            self.parents[j] = new_parent
            self.children[new_parent].add(j)
            if new_group == 0:
                self.e0 += 1
            else:
                self.e1 += 1
            new_tid = self.tree_ids[new_parent]
        else:
            self.parents[j] = None
            if old_parent is None:
                new_tid = old_tid  # already a root: tree keeps its identity
            else:
                new_tid = self._next_tid
                self._next_tid += 1
                self.members[new_tid] = set()

        if new_tid != old_tid:
            old_members = self.members[old_tid]
            new_members = self.members[new_tid]
            tree_ids = self.tree_ids
            for u in sub:
                old_members.discard(u)
                new_members.add(u)
                tree_ids[u] = new_tid
            if not old_members:
                del self.members[old_tid]
        return self

    def switch_tree_group(self, tid: int) -> "Graph":
        """Flip the group label of one whole tree; structure is untouched."""
        nodes = self.members[tid]
        m = len(nodes)
        groups = self.groups
        first = next(iter(nodes))
        if groups[first] == 0:
            self.d1 += m
            self.e0 -= m - 1
            self.e1 += m - 1
            for u in nodes:
                groups[u] = 1
        else:
            self.d1 -= m
            self.e1 -= m - 1
            self.e0 += m - 1
            for u in nodes:
                groups[u] = 0
        return self

    def pivot_tree(self, new_root: int) -> "Graph":
        """Re-root the tree containing ``new_root`` by reversing the root path."""
        parents = self.parents
        children = self.children
        prev = None
        node = new_root
        while node is not None:
            nxt = parents[node]
            if nxt is not None:
                children[nxt].discard(node)
            if prev is not None:
                children[prev].add(node)
            parents[node] = prev
            prev = node
            node = nxt
        return self

    # -- verification -------------------------------------------------------

    def validate(self) -> None:
        """Recompute all derived state and compare; raises on any mismatch."""
        d = self.d
        # acyclicity + component of each node via root-walk
        roots = []
        for j in range(d):
            seen = set()
            node = j
            while self.parents[node] is not None:
                if node in seen:
                    raise RuntimeError(f"cycle through node {node}")
                seen.add(node)
                node = self.parents[node]
            roots.append(node)
        for j in range(d):
            if self.tree_ids[j] != self.tree_ids[roots[j]]:
                raise RuntimeError(f"tree id of {j} differs from its root")
            if self.groups[j] != self.groups[roots[j]]:
                raise RuntimeError(f"group of {j} differs from its root")
        by_root: dict = {}
        for j, r in enumerate(roots):
            by_root.setdefault(r, set()).add(j)
        comp_tids = [self.tree_ids[r] for r in by_root]
        if len(set(comp_tids)) != len(comp_tids):
            raise RuntimeError("two components share a tree id")
        recomputed = {self.tree_ids[r]: nodes for r, nodes in by_root.items()}
        if recomputed != self.members:
            raise RuntimeError("tree membership map out of date")
        for j in range(d):
            for c in self.children[j]:
                if self.parents[c] != j:
                    raise RuntimeError(f"children set of {j} lists non-child {c}")
        n_children = sum(len(s) for s in self.children)
        n_edges = sum(1 for p in self.parents if p is not None)
        if n_children != n_edges:
            raise RuntimeError("children sets disagree with parent pointers")
        e0 = sum(1 for j, p in enumerate(self.parents)
                 if p is not None and self.groups[j] == 0)
        e1 = n_edges - e0
        d1 = sum(self.groups)
        if (e0, e1, d1) != (self.e0, self.e1, self.d1):
            raise RuntimeError(
                f"structure counters {(self.e0, self.e1, self.d1)} != recount {(e0, e1, d1)}")


def empty_graph(d: int) -> Graph:
    """Every feature a singleton Group 0 root: the chain's initial state."""
    return Graph(d)


def random_graph(d: int, rng, attach_prob: float = 0.6) -> Graph:
    """Random partitioned forest, built through the public mutation ops.

    Test/benchmark helper: visits features in a random order, attaching each
    with probability ``attach_prob`` to a uniformly chosen earlier feature,
    then flips each tree to Group 1 with probability 1/2.
    """
    g = Graph(d)
    order = list(rng.permutation(d))
    for i, j in enumerate(order):
        if i > 0 and rng.random() < attach_prob:
            g.reattach_subtree(int(j), int(order[rng.integers(i)]))
    for tid in list(g.members):
        if rng.random() < 0.5:
            g.switch_tree_group(tid)
    return g


def _topological_order(parents) -> list:
    """Roots-first ordering of a parent vector; rejects cyclic inputs."""
    d = len(parents)
    children: list = [[] for _ in range(d)]
    roots = []
    for j, p in enumerate(parents):
        if p is None:
            roots.append(j)
        else:
            children[p].append(j)
    order = []
    stack = list(roots)
    while stack:
        u = stack.pop()
        order.append(u)
        stack.extend(children[u])
    if len(order) != d:
        raise GraphCycleError("parent vector contains a cycle")
    return order
