"""Command-transition graphs over segments and their topology metrics."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from tracepat.model import AssistantStep

NO_COMMAND = "<none>"


def base_command(command: str) -> str:
    parts = command.split()
    return parts[0].lower() if parts else NO_COMMAND


@dataclass(frozen=True)
class TransitionGraph:
    nodes: frozenset[str]
    edges: dict[tuple[str, str], int]
    sequence: tuple[str, ...] = field(default=())

    @property
    def sequence_length(self) -> int:
        return len(self.sequence)

    def successors(self) -> dict[str, set[str]]:
        succ: dict[str, set[str]] = {n: set() for n in self.nodes}
        for a, b in self.edges:
            succ[a].add(b)
        return succ

    def edge_list(self) -> list[tuple[str, str, int]]:
        return [(a, b, c) for (a, b), c in sorted(self.edges.items())]


def command_sequence(segment: Iterable[AssistantStep]) -> list[str]:
    return [base_command(s.command) for s in segment if s.command.strip()]


def graph_from_sequence(seq: Sequence[str]) -> TransitionGraph:
    edges = Counter(zip(seq, seq[1:]))
    return TransitionGraph(nodes=frozenset(seq), edges=dict(edges), sequence=tuple(seq))


def build_graph(segment: Iterable[AssistantStep]) -> TransitionGraph:
    return graph_from_sequence(command_sequence(segment))


def has_cycle(nodes: Iterable[str], edges: Iterable[tuple[str, str]]) -> bool:
    """Iterative three-colour depth-first search; self-loops count."""
    succ: dict[str, list[str]] = defaultdict(list)
    for a, b in edges:
        succ[a].append(b)
    WHITE, GREY, BLACK = 0, 1, 2
    colour = {n: WHITE for n in nodes}
    for a, b in edges:
        colour.setdefault(a, WHITE)
        colour.setdefault(b, WHITE)
    for root in sorted(colour):
        if colour[root] != WHITE:
            continue
        colour[root] = GREY
        stack = [(root, iter(succ[root]))]
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                colour[node] = BLACK
                stack.pop()
            elif colour[nxt] == GREY:
                return True
            elif colour[nxt] == WHITE:
                colour[nxt] = GREY
                stack.append((nxt, iter(succ[nxt])))
    return False


def max_run_length(seq: Sequence[str]) -> int:
    best = run = 0
    prev = None
    for item in seq:
        run = run + 1 if item == prev else 1
        prev = item
        best = max(best, run)
    return best


def transition_entropy(edges: dict[tuple[str, str], int]) -> float:
    """Out-degree-weighted mean of per-command successor entropies (bits)."""
    total = sum(edges.values())
    if total == 0:
        return 0.0
    outgoing: dict[str, list[int]] = defaultdict(list)
    for (a, _), c in edges.items():
        outgoing[a].append(c)
    h = 0.0
    for counts in outgoing.values():
        out = sum(counts)
        node_h = -sum((c / out) * math.log2(c / out) for c in counts)
        h += (out / total) * node_h
    return max(h, 0.0)


@dataclass(frozen=True)
class TopologyMetrics:
    diversity: int
    length: int
    max_depth: int
    max_fanout: int
    has_cycle: bool
    transition_entropy: float


def topology_metrics(graph: TransitionGraph, segment: Sequence[AssistantStep] | None = None) -> TopologyMetrics:
    seq = graph.sequence if segment is None else tuple(command_sequence(segment))
    succ = graph.successors()
    return TopologyMetrics(
        diversity=len(graph.nodes),
        length=graph.sequence_length,
        max_depth=max_run_length(seq),
        max_fanout=max((len(s) for s in succ.values()), default=0),
        has_cycle=has_cycle(graph.nodes, graph.edges),
        transition_entropy=transition_entropy(graph.edges),
    )


def segment_topology(segment: Sequence[AssistantStep]) -> TopologyMetrics:
    return topology_metrics(build_graph(segment))


TOPOLOGY_FIELDS = ("diversity", "length", "max_depth", "max_fanout", "transition_entropy")


def aggregate_topology(grouped: dict[str, Sequence[TopologyMetrics]]) -> dict[str, dict[str, float]]:
    out = {}
    for pattern, rows in sorted(grouped.items()):
        if not rows:
            continue
        n = len(rows)
        summary = {f: sum(getattr(r, f) for r in rows) / n for f in TOPOLOGY_FIELDS}
        summary["cycle_pct"] = 100.0 * sum(r.has_cycle for r in rows) / n
        summary["count"] = n
        out[pattern] = summary
    return out


def format_edge_list(graph: TransitionGraph) -> str:
    return "".join(f"{a}\t{b}\t{c}\n" for a, b, c in graph.edge_list())
