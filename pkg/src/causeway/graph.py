"""Directed causal graph: structural pruning and parent ranking.

Pruning removes a direct edge i->j when some two-hop path i->k->j explains it
almost as well: the direct F must exceed ``factor`` times the indirect path's
bottleneck strength min(F(i->k), F(k->j)), maximized over intermediaries k.
All decisions read the original, unpruned graph, so removals never cascade and
the result is independent of evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .config import PruneConfig
from .errors import UnknownTarget
from .frames import _num


@dataclass(frozen=True)
class EdgeStat:
    f_stat: float     # +inf allowed (perfect unrestricted fit)
    p_value: float
    lag: int


@dataclass
class CausalGraph:
    nodes: list[str] = field(default_factory=list)
    edges: dict[tuple[str, str], EdgeStat] = field(default_factory=dict)
    diagnostics: list[str] = field(default_factory=list)

    def parents(self, target: str) -> list[tuple[str, EdgeStat]]:
        return [(src, stat) for (src, dst), stat in self.edges.items() if dst == target]

    def to_json(self, target: str | None = None,
                window: tuple[int, int] | None = None) -> dict:
        doc = {
            "target": target,
            "window": None if window is None else
                      {"start_index": window[0], "end_index": window[1]},
            "edges": [
                {
                    "source": src,
                    "dest": dst,
                    "f_stat": _f_json(stat.f_stat),
                    "p_value": stat.p_value,
                    "lag": stat.lag,
                }
                for (src, dst), stat in sorted(self.edges.items())
            ],
        }
        return doc


@dataclass
class CauseSet:
    """Ranked, F-weighted parents of the target, ready for explanation."""

    target: str
    causes: list[tuple[str, float]]      # (channel, f_stat), f_stat non-increasing
    anomaly_time: float | None = None

    def channels(self) -> list[str]:
        return [c for c, _ in self.causes]

    def to_json(self) -> dict:
        return {
            "target": self.target,
            "anomaly_time": None if self.anomaly_time is None else _num(self.anomaly_time),
            "causes": [{"channel": c, "f_stat": _f_json(f)} for c, f in self.causes],
        }


def _f_json(f: float):
    return "inf" if math.isinf(f) else f


def f_from_json(value) -> float:
    return math.inf if value == "inf" else float(value)


def prune(graph: CausalGraph, cfg: PruneConfig) -> CausalGraph:
    """Single pass over the original graph applying the indirect-path rule.

    For edge i->j the competing strength is S = max_k min(F(i->k), F(k->j));
    the edge survives iff it has no intermediary, or F(i->j) > factor * S.
    An infinite direct F always survives; an infinite S removes any finite
    direct edge.
    """
    kept: dict[tuple[str, str], EdgeStat] = {}
    for (i, j), stat in graph.edges.items():
        strongest_indirect = -math.inf
        for k in graph.nodes:
            if k == i or k == j:
                continue
            first = graph.edges.get((i, k))
            second = graph.edges.get((k, j))
            if first is None or second is None:
                continue
            strongest_indirect = max(strongest_indirect,
                                     min(first.f_stat, second.f_stat))
        if strongest_indirect == -math.inf:
            kept[(i, j)] = stat
        elif math.isinf(stat.f_stat):
            kept[(i, j)] = stat
        elif stat.f_stat > cfg.factor * strongest_indirect:
            kept[(i, j)] = stat
    return CausalGraph(list(graph.nodes), kept, list(graph.diagnostics))


def rank_causes(graph: CausalGraph, target: str, k: int) -> CauseSet:
    """Top-k parents of the target by descending F, ties broken by channel id.

    An empty result is valid and means no causal explanation was found.
    """
    if target not in graph.nodes:
        raise UnknownTarget(f"target {target!r} is not a node of the graph")
    ranked = sorted(graph.parents(target), key=lambda item: (-item[1].f_stat, item[0]))
    return CauseSet(target, [(src, stat.f_stat) for src, stat in ranked[:k]])
