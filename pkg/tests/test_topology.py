from __future__ import annotations

import math
import random
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import steps_from
from tracepat.topology import (
    NO_COMMAND,
    TopologyMetrics,
    aggregate_topology,
    base_command,
    build_graph,
    format_edge_list,
    graph_from_sequence,
    has_cycle,
    topology_metrics,
    transition_entropy,
)


def reachable_self(nodes, edges) -> bool:
    succ = {n: {b for a, b in edges if a == n} for n in nodes}
    for start in nodes:
        seen, frontier = set(), list(succ[start])
        while frontier:
            x = frontier.pop()
            if x == start:
                return True
            if x not in seen:
                seen.add(x)
                frontier.extend(succ[x])
    return False


def entropy_direct(seq) -> float:
    pairs = list(zip(seq, seq[1:]))
    if not pairs:
        return 0.0
    by_src = Counter(a for a, _ in pairs)
    total = 0.0
    for src, out in by_src.items():
        succ = Counter(b for a, b in pairs if a == src)
        h = sum(-(c / out) * math.log2(c / out) for c in succ.values())
        total += out / len(pairs) * h
    return total


def test_base_command():
    assert base_command("pdf @sym.SetAcEntry") == "pdf"
    assert base_command("axt @@ sym.imp.doSystemCmd") == "axt"
    assert base_command("") == NO_COMMAND
    assert base_command("  PDF  x") == "pdf"


def test_graph_shapes():
    g = graph_from_sequence(["pd", "pd", "pd"])
    assert g.nodes == {"pd"} and g.edges == {("pd", "pd"): 2} and g.sequence_length == 3
    g = graph_from_sequence(["i", "afl", "pdf", "pdf", "axt"])
    assert len(g.nodes) == 4
    assert g.edges == {("i", "afl"): 1, ("afl", "pdf"): 1, ("pdf", "pdf"): 1, ("pdf", "axt"): 1}
    g = build_graph([])
    assert g.nodes == frozenset() and g.sequence_length == 0


def test_empty_commands_skipped():
    g = build_graph(steps_from(["a", "b", "c"], commands=["pd 1", "", "pdf"]))
    assert g.sequence == ("pd", "pdf")


def test_metrics_examples():
    m = topology_metrics(graph_from_sequence(["pd", "pd", "pd"]))
    assert m == TopologyMetrics(1, 3, 3, 1, True, 0.0)
    m = topology_metrics(graph_from_sequence(["a", "b", "a", "c"]))
    assert m.transition_entropy == pytest.approx(2 / 3)
    m = topology_metrics(graph_from_sequence(["a", "b", "c", "d"]))
    assert (m.has_cycle, m.max_fanout, m.transition_entropy) == (False, 1, 0.0)


def test_aggregate():
    rows = [TopologyMetrics(2, 4, 1, 1, c, 0.5) for c in (True, True, True, False)]
    agg = aggregate_topology({"P1": rows, "P2": [TopologyMetrics(3, 5, 2, 2, False, 1.0)], "P3": []})
    assert agg["P1"]["cycle_pct"] == 75.0 and agg["P1"]["count"] == 4
    assert agg["P2"]["diversity"] == 3 and agg["P2"]["transition_entropy"] == 1.0
    assert "P3" not in agg


def test_edge_list_format():
    text = format_edge_list(graph_from_sequence(["pd", "afl", "pd"]))
    assert text == "afl\tpd\t1\npd\tafl\t1\n"


def test_random_graphs_against_reachability():
    rng = random.Random(11)
    for _ in range(500):
        n = rng.randint(1, 8)
        nodes = [f"n{i}" for i in range(n)]
        edges = {(rng.choice(nodes), rng.choice(nodes)) for _ in range(rng.randint(0, 2 * n))}
        assert has_cycle(nodes, edges) == reachable_self(nodes, edges)


@given(st.lists(st.sampled_from(["pd", "pdf", "afl", "axt", "s", "iz"]), max_size=40))
def test_graph_invariants(seq):
    g = graph_from_sequence(seq)
    assert sum(g.edges.values()) == max(len(seq) - 1, 0)
    assert all(a in g.nodes and b in g.nodes for a, b in g.edges)
    m = topology_metrics(g)
    assert m.diversity == len(set(seq)) and m.length == len(seq)
    if seq:
        assert m.max_depth >= 1
        assert m.transition_entropy <= math.log2(m.diversity) + 1e-12
    assert abs(transition_entropy(g.edges) - entropy_direct(seq)) < 1e-9
