"""Turning sampled graphs into predictions, rankings, and summary graphs.

Per-graph class probabilities use training counts with posterior-mean
Dirichlet smoothing; only Group 1 features enter (Group 0 families are
class-independent and cancel).  Model averaging is a plain equal-weight mean
over the thinned snapshots, so predictions depend only on the multiset of
snapshots, never their order.

The average graph condenses a trace into node relevances (how often each
feature sat in Group 1) and undirected edge frequencies, with the display
thresholds applied here so exports stay dumb.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dataio import Dataset
from .errors import InferenceError
from .graph import ParentSet
from .score import CountTable, Hyperparams, count_family

EDGE_MIN_FREQUENCY = 0.10
NODE_OMIT_GROUP0_FREQUENCY = 0.80


class Prediction(NamedTuple):
    class_probs: tuple
    label: int


@dataclass(frozen=True)
class AverageGraph:
    """Posterior inclusion summary of a trace.

    ``node_relevance[j]`` is the fraction of snapshots with feature j in
    Group 1; ``edge_relevance`` maps retained unordered pairs to their
    frequency.  ``included`` lists the nodes that survived omission.
    """

    node_relevance: tuple
    edge_relevance: dict
    included: tuple
    thresholds: tuple = (EDGE_MIN_FREQUENCY, NODE_OMIT_GROUP0_FREQUENCY)


def predict_one(graph, data: Dataset, hp: Hyperparams, x,
                count_cache: dict | None = None) -> np.ndarray:
    """Class probabilities for one discretized row under one graph.

    Works for both live graphs and trace snapshots (anything with
    ``parents``/``groups``).  Each Group 1 conditional is the smoothed
    estimate (n_jkl + a/(w*v_j)) / (n_jl + a/w); a parent configuration or
    feature value never seen in training degrades to the pure pseudo-count
    ratio.  Normalization happens in log space.
    """
    parents = graph.parents
    groups = graph.groups
    v = data.class_arity
    alpha = hp.alpha
    class_counts = np.bincount(data.klass, minlength=v)
    n = data.n
    logp = [math.log(class_counts[y] + alpha / v) - math.log(n + alpha)
            for y in range(v)]
    for j in range(data.d):
        if groups[j] != 1:
            continue
        p = parents[j]
        vj = data.arities[j]
        wp = data.arities[p] if p is not None else 1
        w = wp * v
        a_row = alpha / w
        a_cell = a_row / vj
        ct = _family_counts(data, j, p, count_cache)
        xj = int(x[j])
        xp = int(x[p]) if p is not None else 0
        for y in range(v):
            l = xp * v + y
            if l >= w:  # parent value unseen during training
                num, den = a_cell, a_row
            else:
                den = ct.row_totals[l] + a_row
                num = (ct.counts[l, xj] + a_cell) if xj < vj else a_cell
            logp[y] += math.log(num) - math.log(den)
    top = max(logp)
    probs = np.array([math.exp(lp - top) for lp in logp])
    return probs / probs.sum()


def predict_bma(trace, data: Dataset, hp: Hyperparams, x,
                count_cache: dict | None = None) -> Prediction:
    """Equal-weight average of per-snapshot probabilities, argmax label.

    Ties break toward the lowest class index.  The per-class mean uses exact
    summation, so permuting the trace cannot change the result.
    """
    samples = trace.samples
    if not samples:
        raise InferenceError("cannot predict from an empty trace")
    if count_cache is None:
        count_cache = {}
    per_graph = [predict_one(snap, data, hp, x, count_cache) for snap in samples]
    s = len(per_graph)
    probs = tuple(math.fsum(pg[y] for pg in per_graph) / s
                  for y in range(data.class_arity))
    return Prediction(class_probs=probs, label=max(range(len(probs)),
                                                   key=lambda y: (probs[y], -y)))


def predict_dataset(trace, data: Dataset, hp: Hyperparams,
                    features: np.ndarray) -> tuple:
    """Predict every row of a discretized feature matrix.

    Returns (probs matrix of shape (n, v), label vector).
    """
    count_cache: dict = {}
    probs = np.empty((features.shape[0], data.class_arity))
    labels = np.empty(features.shape[0], dtype=np.int64)
    for i in range(features.shape[0]):
        pred = predict_bma(trace, data, hp, features[i], count_cache=count_cache)
        probs[i] = pred.class_probs
        labels[i] = pred.label
    return probs, labels


def rank_features(trace) -> list:
    """(feature, Group 1 frequency) pairs, most relevant first.

    Ties break toward the lower feature index.
    """
    samples = trace.samples
    if not samples:
        raise InferenceError("cannot rank features from an empty trace")
    d = len(samples[0].groups)
    counts = [0] * d
    for snap in samples:
        g = snap.groups
        for j in range(d):
            counts[j] += g[j]
    s = len(samples)
    return sorted(((j, counts[j] / s) for j in range(d)),
                  key=lambda t: (-t[1], t[0]))


def build_average_graph(trace, high_dim: bool = False) -> AverageGraph:
    """Tally node/edge inclusion frequencies and apply display thresholds.

    Edges appearing in fewer than 10% of snapshots are dropped.  With
    ``high_dim``, nodes sitting in Group 0 more than 80% of the time are
    omitted along with their incident edges.
    """
    samples = trace.samples
    if not samples:
        raise InferenceError("cannot summarize an empty trace")
    s = len(samples)
    d = len(samples[0].groups)
    node_counts = [0] * d
    edge_counts: dict = {}
    for snap in samples:
        g = snap.groups
        for j in range(d):
            node_counts[j] += g[j]
        for e in snap.undirected_edges():
            edge_counts[e] = edge_counts.get(e, 0) + 1
    relevance = tuple(c / s for c in node_counts)
    if high_dim:
        included = tuple(j for j in range(d)
                         if relevance[j] >= 1.0 - NODE_OMIT_GROUP0_FREQUENCY)
    else:
        included = tuple(range(d))
    keep = set(included)
    edges = {e: c / s for e, c in sorted(edge_counts.items())
             if c / s >= EDGE_MIN_FREQUENCY and e[0] in keep and e[1] in keep}
    return AverageGraph(node_relevance=relevance, edge_relevance=edges,
                        included=included)


def _gray_bucket(relevance: float) -> int:
    """Grayscale value for a relevance in [0, 1]: 10 buckets, 1.0 darkest."""
    return 90 - 10 * min(9, int(relevance * 10))


def export_dot(avg: AverageGraph, names) -> str:
    """Deterministic DOT text: fill darkness ~ relevance, pen width ~ edge frequency."""
    lines = ["graph averaged_forest {", "  node [shape=ellipse, style=filled];"]
    for j in included_sorted(avg):
        gray = _gray_bucket(avg.node_relevance[j])
        font = "white" if gray < 50 else "black"
        lines.append(f'  "{_dot_escape(names[j])}" '
                     f'[fillcolor="gray{gray}", fontcolor="{font}"];')
    lo = EDGE_MIN_FREQUENCY
    for (a, b) in sorted(avg.edge_relevance):
        f = avg.edge_relevance[(a, b)]
        width = 1.0 + 7.0 * (f - lo) / (1.0 - lo)
        lines.append(f'  "{_dot_escape(names[a])}" -- "{_dot_escape(names[b])}" '
                     f'[penwidth={width:.2f}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def average_graph_json(avg: AverageGraph, names) -> dict:
    return {
        "nodes": [{"name": names[j], "relevance": avg.node_relevance[j]}
                  for j in included_sorted(avg)],
        "edges": [{"a": names[a], "b": names[b],
                   "relevance": avg.edge_relevance[(a, b)]}
                  for (a, b) in sorted(avg.edge_relevance)],
    }


def included_sorted(avg: AverageGraph) -> list:
    return sorted(avg.included)


def _dot_escape(name: str) -> str:
    return name.replace("\\", "\\\\").replace('"', '\\"')


def _family_counts(data: Dataset, j: int, parent: int | None,
                   count_cache: dict | None) -> CountTable:
    if count_cache is None:
        return count_family(data, j, ParentSet(parent, True))
    key = (j, parent)
    ct = count_cache.get(key)
    if ct is None:
        ct = count_family(data, j, ParentSet(parent, True))
        count_cache[key] = ct
    return ct
