"""MCMC over partitioned forests.

Each iteration runs one tree-switch sweep (repeated Metropolis: propose
flipping the group of up to k randomly chosen trees, one by one) followed by
one subtree reassignment (Gibbs: detach the subtree at a random node and
sample its new parent, or a root slot in either group, from the conditional
posterior; always accepted).

Re-rooting a tree never changes its score, so instead of re-rooting every
tree each iteration the chain lazily pivots just the tree containing the
chosen node to a uniformly random root before reassigning -- the only moment
a tree's parametrization matters.  That lazy schedule samples the same
posterior.

Chains are deterministic functions of (data, hyperparams, config): all
randomness flows from one seeded PCG64 generator whose algorithm name is
recorded in the trace.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .dataio import Dataset
from .errors import ConfigurationError
from .graph import Graph, GraphSnapshot, class_key, empty_graph
from .score import (
    FamilyScoreCache,
    Hyperparams,
    ReassignContext,
    delta_score_switch,
    graph_log_score,
    log_prior,
)

RNG_NAME = "pcg64"

# cached-score self-check cadence and tolerance (drift is reset on success)
SCORE_CHECK_EVERY = 1000
SCORE_CHECK_TOL = 1e-6


@dataclass
class SamplerConfig:
    """Chain length and move parameters.

    ``iterations=None`` resolves to max(10000, 10*d) for the dataset at hand.
    Snapshots are taken every ``thin`` iterations after the burn-in prefix.
    """

    iterations: int | None = None
    thin: int = 50
    burnin_fraction: float = 0.2
    switch_k: int = 10
    seed: int = 0
    validate_every: int = 0  # 0 = off; full forest validation cadence (debug)

    def resolve_iterations(self, d: int) -> int:
        it = self.iterations if self.iterations is not None else max(10000, 10 * d)
        if it < 0:
            raise ConfigurationError("iterations must be >= 0")
        if self.thin < 1:
            raise ConfigurationError("thinning factor must be >= 1")
        if not 0.0 <= self.burnin_fraction < 1.0:
            raise ConfigurationError("burn-in fraction must lie in [0, 1)")
        if self.switch_k < 0:
            raise ConfigurationError("switch_k must be >= 0")
        return it


@dataclass
class ChainState:
    """One chain's mutable state; owns its graph, shares the score cache."""

    graph: Graph
    cache: FamilyScoreCache
    current_log_score: float
    iteration: int
    rng: np.random.Generator

    def clone(self, rng: np.random.Generator | None = None) -> "ChainState":
        """Copy with an independent graph; the memo cache is shared (pure)."""
        return ChainState(graph=self.graph.copy(), cache=self.cache,
                          current_log_score=self.current_log_score,
                          iteration=self.iteration,
                          rng=self.rng if rng is None else rng)


@dataclass
class SampleTrace:
    """Thinned post-burn-in snapshots with matching log scores."""

    samples: list = field(default_factory=list)
    log_scores: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    rng_name: str = RNG_NAME

    def __len__(self) -> int:
        return len(self.samples)

    def extend(self, other: "SampleTrace") -> None:
        """Concatenate another chain's snapshots (multi-chain merging)."""
        self.samples.extend(other.samples)
        self.log_scores.extend(other.log_scores)
        self.iterations.extend(other.iterations)


def make_chain_state(data: Dataset, hp: Hyperparams, seed: int = 0,
                     cache: FamilyScoreCache | None = None) -> ChainState:
    """Fresh chain at the all-singletons Group 0 graph."""
    if cache is None:
        cache = FamilyScoreCache(data, hp)
    g = empty_graph(data.d)
    return ChainState(graph=g, cache=cache,
                      current_log_score=graph_log_score(g, data, hp, cache),
                      iteration=0, rng=np.random.default_rng(seed))


def switch_trees_move(state: ChainState, data: Dataset, hp: Hyperparams,
                      k: int = 10) -> ChainState:
    """Propose flipping min(k, #trees) distinct trees, one Metropolis test each.

    The flip proposal is its own inverse, so acceptance uses the bare
    posterior ratio min(1, exp(delta)).
    """
    g = state.graph
    rng = state.rng
    tids = list(g.members.keys())
    nt = len(tids)
    m = nt if nt <= k else k
    for i in range(m):
        r = i + int(rng.integers(nt - i))  # partial Fisher-Yates draw
        tids[i], tids[r] = tids[r], tids[i]
        tid = tids[i]
        delta = delta_score_switch(g, data, hp, state.cache, tid)
        if delta >= 0.0 or rng.random() < math.exp(delta):
            g.switch_tree_group(tid)
            state.current_log_score += delta
    return state


def gibbs_reassign(state: ChainState, data: Dataset, hp: Hyperparams,
                   j: int, new_root: int) -> ChainState:
    """Reassign the subtree at j after pivoting its tree to ``new_root``.

    Candidates are every non-descendant of j (the subtree joins the parent's
    group) plus one null-parent slot per group; one is drawn proportionally
    to exp(log score) with the max log score subtracted for stability.  As a
    Gibbs draw it is unconditionally applied.
    """
    g = state.graph
    g.pivot_tree(new_root)
    ctx = ReassignContext(g, hp, state.cache, j)
    s = ctx.size
    log_d = ctx.log_d
    coeff = ctx.coeff
    inv_v = ctx.inv_v
    # candidate-constant offsets: family sums of the rest of the subtree plus
    # the structure prior at the candidate's edge/node counts
    prior_attach0 = (-coeff * ((ctx.base_e0 + s) + ctx.base_e1 * inv_v)
                     - ctx.base_d1 * inv_v) * log_d
    prior_attach1 = (-coeff * (ctx.base_e0 + (ctx.base_e1 + s) * inv_v)
                     - (ctx.base_d1 + s) * inv_v) * log_d
    prior_null0 = prior_attach0 + coeff * log_d
    prior_null1 = prior_attach1 + coeff * inv_v * log_d
    k0 = ctx.sum_other[0] + prior_attach0
    k1 = ctx.sum_other[1] + prior_attach1

    row0 = ctx.row0
    row1 = ctx.row1
    groups = g.groups
    sub_set = ctx.sub_set
    cand_parents: list = []
    weights: list = []
    wmax = -math.inf
    for u in range(g.d):
        if u in sub_set:
            continue
        w = (row1[u] + k1) if groups[u] else (row0[u] + k0)
        cand_parents.append(u)
        weights.append(w)
        if w > wmax:
            wmax = w
    w_null0 = ctx.root0 + ctx.sum_other[0] + prior_null0
    w_null1 = ctx.root1 + ctx.sum_other[1] + prior_null1
    cand_parents.append(None)
    weights.append(w_null0)
    cand_parents.append(None)
    weights.append(w_null1)
    if w_null0 > wmax:
        wmax = w_null0
    if w_null1 > wmax:
        wmax = w_null1

    exps = [math.exp(w - wmax) for w in weights]
    r = state.rng.random() * math.fsum(exps)
    idx = len(exps) - 1
    acc = 0.0
    for i, e in enumerate(exps):
        acc += e
        if r < acc:
            idx = i
            break
    new_parent = cand_parents[idx]
    if new_parent is None:
        new_group = 0 if idx == len(exps) - 2 else 1
    else:
        new_group = groups[new_parent]

    # score bookkeeping: current state is itself one of the candidates
    p0 = g.parents[j]
    g0 = groups[j]
    if p0 is None:
        w_cur = w_null0 if g0 == 0 else w_null1
    else:
        w_cur = (row1[p0] + k1) if g0 else (row0[p0] + k0)
    state.current_log_score += weights[idx] - w_cur
    if new_parent != p0 or new_group != g0:
        g.reattach_subtree(j, new_parent, target_group=new_group)
    return state


def reassign_subtree_move(state: ChainState, data: Dataset,
                          hp: Hyperparams) -> ChainState:
    """Pick a node uniformly, pivot its tree to a uniform root, reassign."""
    g = state.graph
    rng = state.rng
    j = int(rng.integers(g.d))
    tree = tuple(g.members[g.tree_ids[j]])
    new_root = tree[int(rng.integers(len(tree)))] if len(tree) > 1 else j
    return gibbs_reassign(state, data, hp, j, new_root)


def iter_chain(data: Dataset, hp: Hyperparams, config: SamplerConfig,
               cache: FamilyScoreCache | None = None
               ) -> Iterator[tuple]:
    """Run a chain, yielding (iteration, state) at every thinning point.

    The yielded state is live; callers must copy anything they keep.
    """
    iterations = config.resolve_iterations(data.d)
    burn = int(config.burnin_fraction * iterations)
    state = make_chain_state(data, hp, seed=config.seed, cache=cache)
    thin = config.thin
    k = config.switch_k
    for it in range(1, iterations + 1):
        switch_trees_move(state, data, hp, k=k)
        reassign_subtree_move(state, data, hp)
        state.iteration = it
        if it % SCORE_CHECK_EVERY == 0:
            fresh = graph_log_score(state.graph, data, hp, state.cache)
            if abs(fresh - state.current_log_score) > SCORE_CHECK_TOL:
                raise RuntimeError(
                    f"cached log score drifted by {fresh - state.current_log_score!r} "
                    f"at iteration {it}")
            state.current_log_score = fresh
        if config.validate_every and it % config.validate_every == 0:
            state.graph.validate()
        if it > burn and (it - burn) % thin == 0:
            yield it, state


def run_chain(data: Dataset, hp: Hyperparams, config: SamplerConfig,
              cache: FamilyScoreCache | None = None) -> SampleTrace:
    """Materialize a chain into a trace of graph snapshots."""
    iterations = config.resolve_iterations(data.d)
    trace = SampleTrace(config={
        "iterations": iterations, "thin": config.thin,
        "burnin_fraction": config.burnin_fraction, "switch_k": config.switch_k,
        "seed": config.seed, "alpha": hp.alpha, "class_arity": hp.class_arity,
        "d": data.d, "n": data.n,
    })
    for it, state in iter_chain(data, hp, config, cache=cache):
        trace.samples.append(state.graph.snapshot())
        trace.log_scores.append(state.current_log_score)
        trace.iterations.append(it)
    return trace


def chain_class_distribution(data: Dataset, hp: Hyperparams,
                             config: SamplerConfig) -> dict:
    """Empirical distribution over graph equivalence classes, streamed.

    Keys are (undirected edges, groups) so all rootings of a forest pool
    into one class, matching ``enumerate_exact_posterior``.
    """
    counts: dict = {}
    total = 0
    for _, state in iter_chain(data, hp, config):
        key = state.graph.class_key()
        counts[key] = counts.get(key, 0) + 1
        total += 1
    if total == 0:
        return {}
    return {k: c / total for k, c in counts.items()}


def enumerate_exact_posterior(data: Dataset, hp: Hyperparams,
                              d_max: int = 5) -> dict:
    """Exact posterior over graph equivalence classes by brute enumeration.

    Walks every rooted labeled forest (parent vectors filtered for
    acyclicity) with every per-tree group labeling, scores each, and merges
    graphs that differ only in within-tree root choice.  Tractable only for
    a handful of features; refuses beyond ``d_max``.
    """
    d = data.d
    if d > d_max:
        raise ConfigurationError(
            f"exact enumeration supports at most {d_max} features, got {d}")
    cache = FamilyScoreCache(data, hp)
    log_weights: dict = {}
    options = [[None] + [p for p in range(d) if p != j] for j in range(d)]
    for parents in itertools.product(*options):
        roots = _forest_roots(parents)
        if roots is None:
            continue
        comp_roots = sorted(set(roots))
        for labels in itertools.product((0, 1), repeat=len(comp_roots)):
            by_root = dict(zip(comp_roots, labels))
            groups = tuple(by_root[r] for r in roots)
            e1 = sum(1 for jj, p in enumerate(parents)
                     if p is not None and groups[jj] == 1)
            e0 = sum(1 for p in parents if p is not None) - e1
            d1 = sum(groups)
            lw = log_prior((e0, e1, d1), d, hp) + cache.class_marginal
            for jj in range(d):
                lw += cache.score(jj, parents[jj], groups[jj] == 1)
            key = class_key(parents, groups)
            prev = log_weights.get(key)
            log_weights[key] = lw if prev is None else _logaddexp(prev, lw)
    top = max(log_weights.values())
    z = math.fsum(math.exp(w - top) for w in log_weights.values())
    return {k: math.exp(w - top) / z for k, w in log_weights.items()}


def total_variation(p: dict, q: dict) -> float:
    """TV distance between two distributions given as key->probability maps."""
    keys = set(p) | set(q)
    return 0.5 * math.fsum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def _forest_roots(parents) -> list | None:
    """Per-node root of the parent vector, or None if it contains a cycle."""
    d = len(parents)
    roots = [-1] * d
    for j in range(d):
        path = []
        node = j
        while roots[node] == -1 and parents[node] is not None:
            path.append(node)
            node = parents[node]
            if len(path) > d:
                return None
        r = roots[node] if roots[node] != -1 else node
        for u in path:
            roots[u] = r
        roots[j] = r
    return roots


def _logaddexp(a: float, b: float) -> float:
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))
