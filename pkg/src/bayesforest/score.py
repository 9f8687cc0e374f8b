"""Log-posterior scoring of partitioned forests.

The unnormalized log posterior of a graph decomposes as

    structure prior  +  class marginal  +  sum over feature families

where a family is one feature together with its conditioning set (optional
feature parent, plus the class for Group 1 nodes).  Family terms are
Dirichlet-multinomial marginals computed from count tables; every family
carries the same total pseudo-count ``alpha`` spread uniformly over its
cells, which is what makes the score invariant to re-rooting a tree.

Family scores depend only on (feature, parent, class-flag) and the data,
never on the rest of the graph, so :class:`FamilyScoreCache` memoizes them.
Everything is computed in natural-log space via log-gamma; probability-space
products would underflow at realistic sample sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .dataio import Dataset
from .errors import GraphCycleError
from .graph import Graph, ParentSet


@dataclass(frozen=True)
class Hyperparams:
    """Dirichlet pseudo-count total, prior edge coefficient, class count."""

    class_arity: int
    alpha: float = 5.0
    prior_edge_coeff: float = 4.0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.class_arity < 2:
            raise ValueError("need at least 2 classes")


@dataclass(frozen=True)
class CountTable:
    """Sufficient statistics of one family.

    ``counts[l, k]`` is the number of training rows with feature value k and
    parent configuration l; ``row_totals[l]`` sums each row.
    """

    feature: int
    parent_config_arity: int
    value_arity: int
    counts: np.ndarray
    row_totals: np.ndarray

    def __post_init__(self):
        if self.counts.shape != (self.parent_config_arity, self.value_arity):
            raise ValueError("count table shape mismatch")
        if not np.array_equal(self.counts.sum(axis=1), self.row_totals):
            raise ValueError("row totals do not match counts")
        if (self.counts < 0).any():
            raise ValueError("negative count")


def count_family(data: Dataset, j: int, ps: ParentSet) -> CountTable:
    """Tally the (parent configuration, value) table for feature j.

    Parent configurations are laid out parent-value-major, class-minor:
    ``l = x_parent * v + y`` when the class is included.
    """
    x = data.features[:, j]
    vj = data.arities[j]
    gamma = data.class_arity if ps.includes_class else 1
    if ps.feature_parent is not None:
        wp = data.arities[ps.feature_parent]
        xp = data.features[:, ps.feature_parent]
    else:
        wp = 1
        xp = 0
    w = wp * gamma
    l = xp * gamma + (data.klass if ps.includes_class else 0)
    counts = np.bincount(l * vj + x, minlength=w * vj).reshape(w, vj)
    return CountTable(feature=j, parent_config_arity=w, value_arity=vj,
                      counts=counts, row_totals=counts.sum(axis=1))


def family_log_score(ct: CountTable, hp: Hyperparams) -> float:
    """Dirichlet-multinomial log marginal of one family's counts."""
    a_row = hp.alpha / ct.parent_config_arity
    a_cell = a_row / ct.value_arity
    cell_term = gammaln(a_cell + ct.counts) - gammaln(a_cell)
    row_term = gammaln(a_row) - gammaln(a_row + ct.row_totals)
    return float(cell_term.sum() + row_term.sum())


def class_log_marginal(data: Dataset, hp: Hyperparams) -> float:
    """Marginal of the class vector, pseudo-count alpha/v per class.

    Constant across graphs; it cancels from move ratios but belongs in any
    reported total score.
    """
    counts = np.bincount(data.klass, minlength=data.class_arity).astype(float)
    a = hp.alpha / data.class_arity
    return float(gammaln(hp.alpha) - gammaln(hp.alpha + counts.sum())
                 + (gammaln(a + counts) - gammaln(a)).sum())


def log_prior(counts: tuple, d: int, hp: Hyperparams) -> float:
    """Unnormalized structure prior: d^(-c*(E0 + E1/v) - D1/v) in log space."""
    e0, e1, d1 = counts
    v = hp.class_arity
    exponent = -hp.prior_edge_coeff * (e0 + e1 / v) - d1 / v
    return exponent * math.log(d)


class FamilyScoreCache:
    """Memo of family log scores keyed by (feature, parent, class-flag).

    Count tables never change while sampling (they depend on the data, not
    the graph), so entries are valid for the cache's lifetime.  Root scores
    and the class marginal are computed eagerly; the full per-parent rows a
    feature needs for Gibbs candidate scoring are filled lazily and
    vectorized, and one-off lookups (from tree switches) land in a point
    memo.  Memory is O(d^2) once every feature has been reassigned at least
    once.
    """

    def __init__(self, data: Dataset, hp: Hyperparams):
        self.data = data
        self.hp = hp
        d = data.d
        self.class_marginal = class_log_marginal(data, hp)
        self._root = [
            [family_log_score(count_family(data, j, ParentSet(None, False)), hp)
             for j in range(d)],
            [family_log_score(count_family(data, j, ParentSet(None, True)), hp)
             for j in range(d)],
        ]
        self._rows: dict = {}
        self._points: dict = {}
        self._arities = np.asarray(data.arities, dtype=np.int64)
        self._max_arity = int(self._arities.max())

    def root_score(self, j: int, includes_class: bool) -> float:
        return self._root[1 if includes_class else 0][j]

    def score(self, j: int, parent: int | None, includes_class: bool) -> float:
        if parent is None:
            return self._root[1 if includes_class else 0][j]
        rows = self._rows.get(j)
        if rows is not None:
            return rows[1 if includes_class else 0][parent]
        key = (j, parent, includes_class)
        val = self._points.get(key)
        if val is None:
            val = family_log_score(
                count_family(self.data, j, ParentSet(parent, includes_class)), self.hp)
            self._points[key] = val
        return val

    def rows(self, j: int) -> tuple:
        """(no-class row, with-class row) of length d; entry [j] is NaN."""
        rows = self._rows.get(j)
        if rows is None:
            rows = (self._fill_row(j, False), self._fill_row(j, True))
            self._rows[j] = rows
        return rows

    def _fill_row(self, j: int, includes_class: bool) -> list:
        data = self.data
        d = data.d
        vj = int(self._arities[j])
        gamma = data.class_arity if includes_class else 1
        cap = self._max_arity * gamma  # uniform row stride; unused slots stay 0
        x = data.features[:, j]
        codes = data.features * gamma
        if includes_class:
            codes = codes + data.klass[:, None]
        codes = codes * vj + x[:, None]
        codes = codes + np.arange(d, dtype=np.int64) * (cap * vj)
        counts = np.bincount(codes.ravel(), minlength=d * cap * vj)
        counts = counts.reshape(d, cap, vj).astype(float)

        w = self._arities * gamma
        a_row = self.hp.alpha / w
        a_cell = a_row / vj
        cell_term = gammaln(a_cell[:, None, None] + counts) - gammaln(a_cell)[:, None, None]
        row_totals = counts.sum(axis=2)
        row_term = gammaln(a_row)[:, None] - gammaln(a_row[:, None] + row_totals)
        scores = cell_term.sum(axis=(1, 2)) + row_term.sum(axis=1)
        scores[j] = math.nan  # a feature cannot parent itself
        return scores.tolist()


def graph_log_score(g: Graph, data: Dataset, hp: Hyperparams,
                    cache: FamilyScoreCache | None = None) -> float:
    """Full unnormalized log posterior of a graph.

    With ``cache=None`` every family is recounted from the data; this slower
    path is the reference the cached path is tested against.
    """
    total = log_prior(g.structure_counts(), g.d, hp)
    if cache is None:
        total += class_log_marginal(data, hp)
        for j in range(g.d):
            total += family_log_score(count_family(data, j, g.parent_set(j)), hp)
    else:
        total += cache.class_marginal
        parents = g.parents
        groups = g.groups
        score = cache.score
        for j in range(g.d):
            total += score(j, parents[j], groups[j] == 1)
    return total


class ReassignContext:
    """Shared terms for scoring every candidate of one subtree reassignment.

    Candidate weights differ from the full graph log score by a constant
    (the families outside the subtree and the class marginal), which cancels
    in Gibbs normalization and in weight differences.
    """

    __slots__ = ("j", "sub", "sub_set", "size", "sum_other", "row0", "row1",
                 "root0", "root1", "base_e0", "base_e1", "base_d1",
                 "log_d", "coeff", "inv_v")

    def __init__(self, g: Graph, hp: Hyperparams, cache: FamilyScoreCache, j: int):
        sub = g.subtree_nodes(j)
        self.j = j
        self.sub = sub
        self.sub_set = set(sub)
        s = len(sub)
        self.size = s
        parents = g.parents
        score = cache.score
        sum0 = 0.0
        sum1 = 0.0
        for u in sub:
            if u != j:
                sum0 += score(u, parents[u], False)
                sum1 += score(u, parents[u], True)
        self.sum_other = (sum0, sum1)
        self.row0, self.row1 = cache.rows(j)
        self.root0 = cache.root_score(j, False)
        self.root1 = cache.root_score(j, True)
        g0 = g.groups[j]
        has_parent = 1 if parents[j] is not None else 0
        e0, e1, d1 = g.structure_counts()
        if g0 == 0:
            self.base_e0 = e0 - (s - 1) - has_parent
            self.base_e1 = e1
            self.base_d1 = d1
        else:
            self.base_e0 = e0
            self.base_e1 = e1 - (s - 1) - has_parent
            self.base_d1 = d1 - s
        self.log_d = math.log(g.d)
        self.coeff = hp.prior_edge_coeff
        self.inv_v = 1.0 / hp.class_arity

    def weight(self, new_parent: int | None, group: int) -> float:
        """Log score of the candidate graph, up to a candidate-independent constant."""
        s_edges = self.size - 1 + (1 if new_parent is not None else 0)
        if group == 0:
            e0 = self.base_e0 + s_edges
            e1 = self.base_e1
            d1 = self.base_d1
            fam = self.root0 if new_parent is None else self.row0[new_parent]
        else:
            e0 = self.base_e0
            e1 = self.base_e1 + s_edges
            d1 = self.base_d1 + self.size
            fam = self.root1 if new_parent is None else self.row1[new_parent]
        prior = (-self.coeff * (e0 + e1 * self.inv_v) - d1 * self.inv_v) * self.log_d
        return fam + self.sum_other[group] + prior


def delta_score_reassign(g: Graph, data: Dataset, hp: Hyperparams,
                         cache: FamilyScoreCache, j: int, candidate: tuple) -> float:
    """Log-score change of reattaching j's subtree, touching only the
    families that actually change (j's own, plus subtree families when the
    group flips) and the prior terms.

    ``candidate`` is (new_parent, target_group); the group is taken from the
    new parent when one is given.
    """
    new_parent, target_group = candidate
    ctx = ReassignContext(g, hp, cache, j)
    if new_parent is not None:
        if new_parent in ctx.sub_set:
            raise GraphCycleError(f"candidate parent {new_parent} is a descendant of {j}")
        new_group = g.groups[new_parent]
    else:
        new_group = g.groups[j] if target_group is None else target_group
    current = (g.parents[j], g.groups[j])
    return ctx.weight(new_parent, new_group) - ctx.weight(*current)


def delta_score_switch(g: Graph, data: Dataset, hp: Hyperparams,
                       cache: FamilyScoreCache, tid: int) -> float:
    """Log-score change of flipping one tree's group label."""
    nodes = g.members[tid]
    m = len(nodes)
    g0 = g.groups[next(iter(nodes))]
    flipped = g0 == 0
    parents = g.parents
    score = cache.score
    delta = 0.0
    for u in nodes:
        delta += score(u, parents[u], flipped) - score(u, parents[u], not flipped)
    v = hp.class_arity
    edge_shift = (m - 1) * hp.prior_edge_coeff * (1.0 - 1.0 / v)
    node_shift = m / v
    # moving to Group 1 trades E0 edges for cheaper E1 edges but pays for nodes
    if flipped:
        delta += (edge_shift - node_shift) * math.log(g.d)
    else:
        delta += (-edge_shift + node_shift) * math.log(g.d)
    return delta
