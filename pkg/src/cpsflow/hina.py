"""
Heterogeneous interaction networks: student–phase and behaviour–phase bipartite networks,
engagement metrics over the former and null-model edge pruning over the latter.
"""
import csv
import io
import json
import logging
from collections import Counter
from collections.abc import Mapping
from dataclasses import dataclass
from enum import Enum

import graphviz
import networkx as nx
import numpy as np
from scipy.stats import binom, entropy

from cpsflow.errors import (
    DegenerateNetworkError, EmptyConditionError, PreconditionError, UnknownNodeError, ZeroGlobalMaxError
)
from cpsflow.model.dataset import SessionDataset
from cpsflow.model.framework import Condition, Phase, indicator, vocabulary

logger = logging.getLogger(__name__)

_LEFT = 0
_RIGHT = 1


class NodeKind(str, Enum):
    STUDENT = "Student"
    BEHAVIOUR = "Behaviour"


class BipartiteNetwork:
    """
    Weighted two-mode network between students or behaviours (left) and the four CPS phases (right).
    All four phases are always right nodes; left nodes are only those with at least one edge.
    """

    def __init__(self, left_kind: NodeKind, condition: Condition, weights: Mapping[tuple[str, Phase], int]):
        self.__left_kind = left_kind
        self.__condition = condition
        self.__graph = nx.Graph()
        self.__graph.add_nodes_from([(_RIGHT, phase) for phase in Phase], bipartite = _RIGHT)
        for (left, phase), weight in sorted(weights.items(), key = lambda kv: (kv[0][0], kv[0][1].index)):
            if weight < 1:
                continue
            self.__graph.add_node((_LEFT, left), bipartite = _LEFT)
            self.__graph.add_edge((_LEFT, left), (_RIGHT, phase), weight = int(weight))

    def __repr__(self):
        return (f"BipartiteNetwork({self.__left_kind.value} × Phase :: {self.__condition.value}, "
                f"left = {len(self.left_nodes)}, edges = {self.__graph.number_of_edges()}, W = {self.total_weight})")

    @property
    def left_kind(self) -> NodeKind:
        return self.__left_kind

    @property
    def condition(self) -> Condition:
        return self.__condition

    @property
    def left_nodes(self) -> list[str]:
        """ Left node labels in canonical order. """
        labels = [label for side, label in self.__graph.nodes if side == _LEFT]
        if self.__left_kind == NodeKind.BEHAVIOUR:
            order = {code: i for i, code in enumerate(vocabulary())}
            return sorted(labels, key = lambda code: order.get(code, len(order)))
        return sorted(labels)

    @property
    def right_nodes(self) -> list[Phase]:
        return list(Phase)

    @property
    def edges(self) -> dict[tuple[str, Phase], int]:
        """ Edge weights keyed by (left, phase), ordered by phase and then by left node. """
        left_order = {label: i for i, label in enumerate(self.left_nodes)}
        weighted = {
            (u[1], v[1]) if u[0] == _LEFT else (v[1], u[1]): w
            for u, v, w in self.__graph.edges(data = "weight")
        }
        return dict(sorted(weighted.items(), key = lambda kv: (kv[0][1].index, left_order[kv[0][0]])))

    @property
    def total_weight(self) -> int:
        return int(self.__graph.size(weight = "weight"))

    @property
    def cell_count(self) -> int:
        return len(self.left_nodes) * len(self.right_nodes)

    def weight(self, left: str, phase: Phase) -> int:
        data = self.__graph.get_edge_data((_LEFT, left), (_RIGHT, phase))
        return 0 if data is None else data["weight"]

    def weights_of(self, left: str) -> list[int]:
        """ Weights of a left node towards A1..A4. Raises UnknownNodeError for absent nodes. """
        if (_LEFT, left) not in self.__graph:
            raise UnknownNodeError(f"{self.__left_kind.value} {left} is not in the network")
        return [self.weight(left, phase) for phase in Phase]

    def quantity(self, left: str) -> int:
        """ Weighted degree of a left node. Raises UnknownNodeError for absent nodes. """
        if (_LEFT, left) not in self.__graph:
            raise UnknownNodeError(f"{self.__left_kind.value} {left} is not in the network")
        return int(self.__graph.degree((_LEFT, left), weight = "weight"))

    def to_networkx(self) -> nx.Graph:
        """ Copy of the underlying graph. Nodes are (0, left label) and (1, Phase) tuples. """
        return self.__graph.copy()


def _count(d: SessionDataset, condition: Condition, key) -> Counter:
    if not d.is_aligned():
        raise PreconditionError("Dataset must be phase-aligned before building networks")
    counts = Counter(key(u) for u in d.utterances if u.condition == condition)
    if len(counts) == 0:
        raise EmptyConditionError(f"No utterances under condition {condition.value}")
    return counts


def build_student_phase_network(d: SessionDataset, c: Condition) -> BipartiteNetwork:
    """ Student–phase network: w(s, p) is the number of utterances by student s in phase p. """
    counts = _count(d, c, lambda u: (u.student_id, u.phase))
    return BipartiteNetwork(NodeKind.STUDENT, c, counts)


def build_behaviour_phase_network(d: SessionDataset, c: Condition) -> BipartiteNetwork:
    """ Behaviour–phase network: w(b, p) is the number of utterances coded b in phase p. """
    counts = _count(d, c, lambda u: (u.indicator, u.phase))
    return BipartiteNetwork(NodeKind.BEHAVIOUR, c, counts)


################################ Engagement ################################
@dataclass(frozen = True)
class EngagementProfile:
    student_id: str
    condition: Condition
    quantity: int
    normalized_quantity: float
    diversity: float


def global_max_quantity(*networks: BipartiteNetwork) -> int:
    """ Largest student quantity across all given student–phase networks. """
    return max((n.quantity(s) for n in networks for s in n.left_nodes), default = 0)


def diversity(weights: list[int] | np.ndarray) -> float:
    """ Shannon entropy of a weight distribution over the phases in base |P|, so the result lies in [0, 1]. """
    return float(entropy(np.asarray(weights, dtype = float), base = len(Phase))) + 0.0


def engagement_profiles(n: BipartiteNetwork, global_max_quantity: int) -> list[EngagementProfile]:
    """
    Quantity, normalized quantity and diversity for every student in a student–phase network.
    `global_max_quantity` must be the maximum quantity over every compared network.
    """
    if n.left_kind != NodeKind.STUDENT:
        raise PreconditionError("Engagement profiles need a student–phase network")
    if global_max_quantity <= 0:
        raise ZeroGlobalMaxError("Global maximum quantity must be positive")

    profiles = []
    for student_id in n.left_nodes:
        quantity = n.quantity(student_id)
        if quantity > global_max_quantity:
            raise PreconditionError(
                f"Quantity {quantity} of {student_id} exceeds the global maximum {global_max_quantity}"
            )
        profiles.append(EngagementProfile(
            student_id = student_id,
            condition = n.condition,
            quantity = quantity,
            normalized_quantity = quantity / global_max_quantity,
            diversity = diversity(n.weights_of(student_id)),
        ))
    return profiles


def engagement_csv(profiles: list[EngagementProfile]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator = "\n")
    writer.writerow(["student_id", "condition", "quantity", "normalized_quantity", "diversity"])
    for p in sorted(profiles, key = lambda p: (p.condition.value, p.student_id)):
        writer.writerow([p.student_id, p.condition.value, p.quantity, repr(p.normalized_quantity), repr(p.diversity)])
    return buffer.getvalue()


################################ Null-model pruning ################################
@dataclass(frozen = True)
class PrunedEdge:
    behaviour: str
    phase: Phase
    weight: int
    p_value: float
    significant: bool
    threshold: int


def binomial_threshold(total_weight: int, cells: int, alpha: float = 0.05) -> int:
    """
    Smallest q with P(X <= q) >= 1 - alpha for X ~ Binomial(total_weight, 1 / cells). An edge is
    significant when its weight strictly exceeds q.
    """
    if cells <= 0:
        raise DegenerateNetworkError("Null model needs at least one cell")
    if not 0 < alpha < 1:
        raise PreconditionError(f"alpha must lie in (0, 1), got {alpha}")

    p = 1.0 / cells
    level = 1.0 - alpha
    q = int(binom.ppf(level, total_weight, p))
    # ppf is computed in floating point, settle the boundary against the CDF
    while q > 0 and binom.cdf(q - 1, total_weight, p) >= level:
        q -= 1
    while q < total_weight and binom.cdf(q, total_weight, p) < level:
        q += 1
    return q


def null_p_values(weights: np.ndarray, total_weight: int, cells: int) -> np.ndarray:
    """ P(X >= w) for each weight w under X ~ Binomial(total_weight, 1 / cells). """
    if cells <= 0:
        raise DegenerateNetworkError("Null model needs at least one cell")
    return np.clip(binom.sf(np.asarray(weights) - 1, total_weight, 1.0 / cells), 0.0, 1.0)


def prune_edges(n: BipartiteNetwork, alpha: float = 0.05) -> list[PrunedEdge]:
    """
    Test every behaviour–phase edge against a binomial null model that spreads the network's total
    weight uniformly over all (behaviour, phase) cells. Output is ordered by phase, then behaviour.
    """
    if n.left_kind != NodeKind.BEHAVIOUR:
        raise PreconditionError("Edge pruning needs a behaviour–phase network")
    if n.cell_count == 0:
        raise DegenerateNetworkError("Network has no behaviour nodes")

    edges = n.edges
    total_weight = n.total_weight
    threshold = binomial_threshold(total_weight, n.cell_count, alpha)
    p_values = null_p_values(np.array(list(edges.values()), dtype = np.int64), total_weight, n.cell_count)

    pruned = [
        PrunedEdge(
            behaviour = behaviour,
            phase = phase,
            weight = weight,
            p_value = float(p_value),
            significant = weight > threshold,
            threshold = threshold,
        )
        for ((behaviour, phase), weight), p_value in zip(edges.items(), p_values)
    ]
    logger.info(
        f"{n.condition.value}: {sum(e.significant for e in pruned)} of {len(pruned)} behaviour–phase edges "
        f"exceed the null threshold {threshold} (W = {total_weight}, K = {n.cell_count})"
    )
    return pruned


@dataclass(frozen = True)
class PrunedNetwork:
    """ Behaviour–phase network together with the outcome of its null-model test. """
    condition: Condition
    alpha: float
    total_weight: int
    cell_count: int
    threshold: int
    behaviours: tuple[str, ...]
    edges: tuple[PrunedEdge, ...]

    @staticmethod
    def of(n: BipartiteNetwork, alpha: float = 0.05) -> "PrunedNetwork":
        edges = prune_edges(n, alpha)
        return PrunedNetwork(
            condition = n.condition,
            alpha = alpha,
            total_weight = n.total_weight,
            cell_count = n.cell_count,
            threshold = binomial_threshold(n.total_weight, n.cell_count, alpha),
            behaviours = tuple(n.left_nodes),
            edges = tuple(edges),
        )

    @property
    def significant_edges(self) -> list[PrunedEdge]:
        return [e for e in self.edges if e.significant]

    def to_json(self) -> str:
        def edge_json(e: PrunedEdge) -> dict:
            entry = indicator(e.behaviour)
            return {
                "behaviour": e.behaviour,
                "dimension": entry.dimension.value,
                "subskill": entry.subskill.value,
                "phase": e.phase.value,
                "weight": e.weight,
                "p_value": e.p_value,
                "significant": e.significant,
            }

        return json.dumps({
            "condition": self.condition.value,
            "alpha": self.alpha,
            "total_weight": self.total_weight,
            "cell_count": self.cell_count,
            "threshold": self.threshold,
            "nodes": {
                "behaviours": list(self.behaviours),
                "phases": [phase.value for phase in Phase],
            },
            "edges": [edge_json(e) for e in self.edges],
        }, indent = 2) + "\n"

    def to_dot(self, keep_all: bool = False) -> str:
        """
        DOT source of the pruned network. Edge label is the weight. With `keep_all` the
        non-significant edges are kept and drawn dashed, otherwise they are left out.
        """
        shown = list(self.edges) if keep_all else self.significant_edges
        dot = graphviz.Graph(
            name = f"behaviour_phase_{self.condition.value.lower()}",
            graph_attr = {"rankdir": "LR", "label": f"{self.condition.value} (alpha = {self.alpha})"},
        )
        for behaviour in sorted({e.behaviour for e in shown}, key = self.behaviours.index):
            dot.node(f"b_{behaviour}", label = behaviour, shape = "box")
        for phase in Phase:
            dot.node(f"p_{phase.value}", label = f"{phase.value}\\n{phase.label}", shape = "ellipse")
        for e in shown:
            attrs = {"label": str(e.weight)}
            if not e.significant:
                attrs["style"] = "dashed"
            dot.edge(f"b_{e.behaviour}", f"p_{e.phase.value}", **attrs)
        return dot.source
