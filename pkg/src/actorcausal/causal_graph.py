"""Significance-filtered directed causality graph and its exports."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Mapping, Sequence

from .granger import GrangerResult


@dataclass
class CausalEdge:
    source: str
    target: str
    p_values: dict[int, float]
    reverse_p_values: dict[int, float]
    min_p: float
    significant_lags: list[int]
    asymmetric: bool  # every significant lag is one-directional

    @property
    def bidirectional(self) -> bool:
        return not self.asymmetric


@dataclass
class CausalGraph:
    nodes: dict[str, str] = field(default_factory=dict)  # name -> role
    edges: list[CausalEdge] = field(default_factory=list)
    alpha: float = 0.05


def build_graph(
    results: Sequence[GrangerResult],
    alpha: float = 0.05,
    roles: Mapping[str, str] | None = None,
) -> CausalGraph:
    """One edge per (source, target) pair with at least one lag below alpha.

    Node roles default to the Granger convention: sources are behavior
    series, targets KPI series. Bidirectional relations (some significant lag
    whose reverse test is also significant) are kept but flagged.
    """
    if not results:
        raise ValueError("no Granger results to build a graph from")
    nodes: dict[str, str] = {}
    grouped: dict[tuple[str, str], list[GrangerResult]] = {}
    for r in results:
        if r.source == r.target:
            continue
        nodes.setdefault(r.source, "behavior")
        nodes.setdefault(r.target, "kpi")
        grouped.setdefault((r.source, r.target), []).append(r)
    if roles:
        nodes.update({n: roles[n] for n in nodes if n in roles})

    edges: list[CausalEdge] = []
    for (source, target), group in sorted(grouped.items()):
        significant = [r for r in group if r.p_value < alpha]
        if not significant:
            continue
        edges.append(
            CausalEdge(
                source=source,
                target=target,
                p_values={r.lag_order: r.p_value for r in sorted(group, key=lambda g: g.lag_order)},
                reverse_p_values={
                    r.lag_order: r.reverse_p_value
                    for r in sorted(group, key=lambda g: g.lag_order)
                },
                min_p=min(r.p_value for r in group),
                significant_lags=sorted(r.lag_order for r in significant),
                asymmetric=all(r.reverse_p_value >= alpha for r in significant),
            )
        )
    return CausalGraph(
        nodes={k: nodes[k] for k in sorted(nodes)}, edges=edges, alpha=alpha
    )


def top_edges(graph: CausalGraph, k: int) -> list[CausalEdge]:
    """The k most significant edges, ranked by min_p, ties by name."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = sorted(graph.edges, key=lambda e: (e.min_p, e.source, e.target))
    return ranked[:k]


def _quote(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


_ROLE_SHAPES = {"behavior": "ellipse", "kpi": "box"}


def export_dot(graph: CausalGraph) -> str:
    """Deterministic DOT text; behavior nodes are ellipses, KPI nodes boxes,
    bidirectional edges dashed, labels carry min_p to 3 significant digits."""
    lines = ["digraph causality {", "  rankdir=LR;"]
    for name in sorted(graph.nodes):
        shape = _ROLE_SHAPES.get(graph.nodes[name], "ellipse")
        lines.append(f"  {_quote(name)} [shape={shape}];")
    for edge in sorted(graph.edges, key=lambda e: (e.source, e.target)):
        attrs = [f'label="{edge.min_p:.3g}"']
        if edge.bidirectional:
            attrs.append("style=dashed")
        lines.append(f"  {_quote(edge.source)} -> {_quote(edge.target)} [{', '.join(attrs)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_to_dict(graph: CausalGraph) -> dict:
    return {
        "alpha": graph.alpha,
        "nodes": [{"name": n, "role": r} for n, r in sorted(graph.nodes.items())],
        "edges": [
            {
                "source": e.source,
                "target": e.target,
                "min_p": e.min_p,
                "significant_lags": e.significant_lags,
                "asymmetric": e.asymmetric,
                "p_values": {str(l): p for l, p in sorted(e.p_values.items())},
                "reverse_p_values": {
                    str(l): p for l, p in sorted(e.reverse_p_values.items())
                },
            }
            for e in sorted(graph.edges, key=lambda e: (e.source, e.target))
        ],
    }


def write_graph_json(graph: CausalGraph, destination: str | IO[str]) -> None:
    own = destination if not isinstance(destination, str) else open(
        destination, "w", encoding="utf-8"
    )
    try:
        json.dump(graph_to_dict(graph), own, indent=2, sort_keys=True)
        own.write("\n")
    finally:
        if isinstance(destination, str):
            own.close()
