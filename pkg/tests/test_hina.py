import json
import math

import networkx as nx
import numpy as np
import pytest

from cpsflow.errors import DegenerateNetworkError, EmptyConditionError, UnknownNodeError, ZeroGlobalMaxError
from cpsflow.hina import (
    BipartiteNetwork, NodeKind, PrunedNetwork, binomial_threshold, build_behaviour_phase_network,
    build_student_phase_network, diversity, engagement_csv, engagement_profiles, global_max_quantity, null_p_values,
    prune_edges
)
from cpsflow.model.dataset import CodedUtterance, PhaseEntry, RosterEntry, SessionDataset
from cpsflow.model.framework import Condition, Phase
from cpsflow.model.time import parse_timestamp


def aligned(records: list[tuple[str, Phase, str]], condition: Condition = Condition.MINIMAL) -> SessionDataset:
    """ Phase-aligned dataset from (student, phase, code) records, one second apart, phases a minute apart. """
    students = sorted({s for s, _, _ in records})
    phase_log = [
        PhaseEntry(s, phase, parse_timestamp(f"2024-03-04T09:{phase.index * 10:02d}:00Z"))
        for s in students for phase in Phase
    ]
    utterances = [
        CodedUtterance(
            student_id = s, triad_id = "t1", condition = condition,
            timestamp = parse_timestamp(f"2024-03-04T09:{phase.index * 10 + 1:02d}:{i % 60:02d}Z"),
            indicator = code, phase = phase, source_line = i + 2,
        )
        for i, (s, phase, code) in enumerate(records)
    ]
    return SessionDataset(utterances, phase_log, {s: RosterEntry("t1", condition) for s in students})


def test_student_phase_network():
    d = aligned([("s1", Phase.A1, "PS04"), ("s1", Phase.A1, "S4"), ("s1", Phase.A2, "OT2")])
    n = build_student_phase_network(d, Condition.MINIMAL)
    assert n.edges == {("s1", Phase.A1): 2, ("s1", Phase.A2): 1}
    assert n.left_nodes == ["s1"]
    assert n.right_nodes == list(Phase)
    assert n.quantity("s1") == 3
    assert n.weights_of("s1") == [2, 1, 0, 0]
    assert n.weight("s1", Phase.A4) == 0

    with pytest.raises(UnknownNodeError):
        n.quantity("s2")

    with pytest.raises(EmptyConditionError):
        build_student_phase_network(d, Condition.MAXIMAL)


def test_total_weight_counts_utterances():
    records = [("s1", Phase.A1, "PS04")] * 4 + [("s2", Phase.A2, "S1")] * 3 + [("s3", Phase.A3, "OT2")] * 3
    n = build_student_phase_network(aligned(records), Condition.MINIMAL)
    assert n.total_weight == 10
    assert all(w >= 1 for w in n.edges.values())

    graph = n.to_networkx()
    assert isinstance(graph, nx.Graph)
    assert nx.is_bipartite(graph)
    assert graph.number_of_nodes() == 3 + 4


def test_behaviour_phase_network():
    d = aligned([("s1", Phase.A1, "PS04"), ("s2", Phase.A1, "PS04"), ("s1", Phase.A2, "S1")])
    n = build_behaviour_phase_network(d, Condition.MINIMAL)
    assert n.edges == {("PS04", Phase.A1): 2, ("S1", Phase.A2): 1}
    assert n.cell_count == 2 * 4


def test_diversity_closed_forms():
    assert diversity([5, 5, 5, 5]) == pytest.approx(1.0, abs = 1e-12)
    assert diversity([7, 0, 0, 0]) == 0.0
    assert diversity([2, 1, 1, 0]) == pytest.approx(0.75, abs = 1e-12)
    assert diversity([2, 1, 1, 0]) == pytest.approx(1.5 * math.log(2) / (2 * math.log(2)), abs = 1e-12)


def test_engagement_profiles():
    minimal = aligned([("s1", Phase.A1, "PS04")] * 2 + [("s1", Phase.A2, "S4")] + [("s2", Phase.A3, "OT2")])
    maximal = aligned([("s3", p, "S1") for p in Phase] * 2, Condition.MAXIMAL)
    networks = [build_student_phase_network(minimal, Condition.MINIMAL),
                build_student_phase_network(maximal, Condition.MAXIMAL)]
    maximum = global_max_quantity(*networks)
    assert maximum == 8

    profiles = {p.student_id: p for n in networks for p in engagement_profiles(n, maximum)}
    assert profiles["s3"].normalized_quantity == 1.0
    assert profiles["s3"].diversity == pytest.approx(1.0)
    assert profiles["s1"].quantity == 3
    assert profiles["s1"].normalized_quantity == pytest.approx(3 / 8)
    assert profiles["s2"].diversity == 0.0
    assert all(0 < p.normalized_quantity <= 1 for p in profiles.values())

    with pytest.raises(ZeroGlobalMaxError):
        engagement_profiles(networks[0], 0)

    lines = engagement_csv(list(profiles.values())).splitlines()
    assert lines[0] == "student_id,condition,quantity,normalized_quantity,diversity"
    assert lines[1].startswith("s3,Maximal,8,1.0,")
    assert len(lines) == 4


def test_binomial_threshold():
    # P(X <= 8) = 0.959 >= 0.95 > P(X <= 7) = 0.898 for X ~ Binomial(20, 0.25)
    assert binomial_threshold(20, 4, 0.05) == 8
    assert binomial_threshold(20, 1, 0.05) == 20

    p_values = null_p_values(np.array([8, 9]), 20, 4)
    assert p_values[0] > 0.05
    assert p_values[1] < 0.05
    assert null_p_values(np.array([20]), 20, 1)[0] == pytest.approx(1.0)

    with pytest.raises(DegenerateNetworkError):
        binomial_threshold(20, 0)


def test_p_values_are_monotone():
    rng = np.random.default_rng(7)
    for _ in range(100):
        total_weight = int(rng.integers(1, 10001))
        cells = int(rng.integers(1, 257))
        p_values = null_p_values(np.arange(0, total_weight + 1), total_weight, cells)
        assert np.all(np.diff(p_values) <= 1e-12)
        assert np.all((0 <= p_values) & (p_values <= 1))


def test_prune_edges():
    # one behaviour carries 16 of 20 utterances, all in A1
    records = [("s1", Phase.A1, "OT2")] * 16 + [("s1", Phase.A2, "PS04")] * 2 + [("s1", Phase.A3, "PS04")] * 2
    n = build_behaviour_phase_network(aligned(records), Condition.MINIMAL)
    assert n.total_weight == 20
    assert n.cell_count == 8

    edges = prune_edges(n, 0.05)
    assert [(e.behaviour, e.phase) for e in edges] == [("OT2", Phase.A1), ("PS04", Phase.A2), ("PS04", Phase.A3)]
    significant = {(e.behaviour, e.phase) for e in edges if e.significant}
    assert significant == {("OT2", Phase.A1)}
    for e in edges:
        assert e.significant == (e.weight > e.threshold)


def test_pruned_network_export():
    records = [("s1", Phase.A1, "OT2")] * 16 + [("s1", Phase.A2, "PS04")] * 2 + [("s1", Phase.A3, "PS04")] * 2
    pruned = PrunedNetwork.of(build_behaviour_phase_network(aligned(records), Condition.MINIMAL))

    data = json.loads(pruned.to_json())
    assert data["condition"] == "Minimal"
    assert data["total_weight"] == 20
    assert data["nodes"]["phases"] == ["A1", "A2", "A3", "A4"]
    assert data["edges"][0]["behaviour"] == "OT2"
    assert data["edges"][0]["dimension"] == "Other"
    assert data["edges"][1]["subskill"] == "SS2"

    dot = pruned.to_dot()
    assert "b_OT2 -- p_A1" in dot
    assert "b_PS04" not in dot

    dot = pruned.to_dot(keep_all = True)
    assert "b_PS04 -- p_A2" in dot
    assert "dashed" in dot


CODES = ["PS01", "PS04", "PS20", "S1", "S4", "OT2"]


def random_records(rng: np.random.Generator, n: int) -> list[tuple[str, Phase, str]]:
    phases = list(Phase)
    return [
        (f"s{int(rng.integers(1, 6))}", phases[int(rng.integers(0, 4))], CODES[int(rng.integers(0, len(CODES)))])
        for _ in range(n)
    ]


def test_networks_ignore_utterance_order():
    rng = np.random.default_rng(17)
    for _ in range(30):
        d = aligned(random_records(rng, int(rng.integers(1, 60))))
        shuffled = d.with_utterances(d.utterances[i] for i in rng.permutation(len(d.utterances)))
        for build in (build_student_phase_network, build_behaviour_phase_network):
            assert list(build(shuffled, Condition.MINIMAL).edges.items()) == \
                list(build(d, Condition.MINIMAL).edges.items())


def test_diversity_invariances():
    rng = np.random.default_rng(19)
    for _ in range(100):
        weights = rng.integers(0, 20, size = 4)
        weights[int(rng.integers(0, 4))] += 1
        d = diversity(weights)
        assert 0 <= d <= 1 + 1e-12
        assert diversity(rng.permutation(weights)) == pytest.approx(d, abs = 1e-12)
        assert diversity(weights * int(rng.integers(2, 10))) == pytest.approx(d, abs = 1e-12)


def test_stricter_alpha_keeps_a_subset_of_edges():
    rng = np.random.default_rng(23)
    for _ in range(50):
        weights = {(code, phase): int(rng.integers(0, 30)) for code in CODES for phase in Phase}
        weights[("OT2", Phase.A1)] += 1
        n = BipartiteNetwork(NodeKind.BEHAVIOUR, Condition.MAXIMAL, weights)
        assert binomial_threshold(n.total_weight, n.cell_count, 0.01) >= \
            binomial_threshold(n.total_weight, n.cell_count, 0.05)

        strict = {(e.behaviour, e.phase) for e in prune_edges(n, 0.01) if e.significant}
        loose = {(e.behaviour, e.phase) for e in prune_edges(n, 0.05) if e.significant}
        assert strict <= loose
