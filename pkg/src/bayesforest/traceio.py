"""JSON-lines trace files.

One header line echoing the run configuration and RNG identifier, then one
line per snapshot: {"iter": ..., "log_score": ..., "groups": [...],
"parents": [...]} with null marking roots.
"""

from __future__ import annotations

import json

from .errors import ParseError
from .graph import GraphSnapshot
from .sampler import RNG_NAME, SampleTrace


def write_trace(trace: SampleTrace, path) -> None:
    with open(path, "w") as fh:
        header = {"type": "header", "rng": trace.rng_name, "config": trace.config}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for it, score, snap in zip(trace.iterations, trace.log_scores, trace.samples):
            line = {"iter": it, "log_score": score,
                    "groups": list(snap.groups), "parents": list(snap.parents)}
            fh.write(json.dumps(line, sort_keys=True) + "\n")


def read_trace(path) -> SampleTrace:
    trace = SampleTrace()
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as e:
                raise ParseError(f"bad trace line: {e}", line=lineno) from None
            if obj.get("type") == "header":
                trace.config = obj.get("config", {})
                trace.rng_name = obj.get("rng", RNG_NAME)
                continue
            try:
                snap = GraphSnapshot(
                    parents=tuple(None if p is None else int(p)
                                  for p in obj["parents"]),
                    groups=tuple(int(g) for g in obj["groups"]))
                trace.samples.append(snap)
                trace.log_scores.append(float(obj["log_score"]))
                trace.iterations.append(int(obj["iter"]))
            except (KeyError, TypeError, ValueError) as e:
                raise ParseError(f"bad trace line: {e}", line=lineno) from None
    return trace
