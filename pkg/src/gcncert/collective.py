"""Maximum robust global limits per node, the input to collective certification.

The limit for a node is the largest total flip budget at which the sound
certifier still certifies it. The search is a plain incremental walk: the
certifier's judgment is not proven monotone in the budget, so walking up from
zero and stopping at the first failure is the faithful reading and guarantees
certification at every budget up to the returned limit.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .certify import certify_sound
from .errors import DataError
from .graph import GcnModel, Graph
from .intervals import interval_certify
from .perturbation import PerturbationBudget

FAMILIES = ("poly", "interval")


@dataclass(frozen=True)
class RobustLimitVector:
    """Per-node maximum robust limits; a limit equal to ``search_cap`` means "at least cap"."""

    limits: np.ndarray  # (n,) int
    never_certified: np.ndarray  # (n,) bool; limit forced to 0, node uncertifiable even unperturbed
    search_cap: int


def _certified_at(
    model: GcnModel,
    graph: Graph,
    budget: PerturbationBudget,
    node: int,
    family: str,
    variant: str,
    mode: str,
) -> bool:
    if family == "poly":
        judgment = certify_sound(model, graph, budget, variant, nodes=[node], mode=mode)[0]
        return judgment.certified
    if family == "interval":
        return bool(interval_certify(model, graph, budget, variant)[node] > 0)
    raise DataError(f"unknown certifier family {family!r}, expected one of {FAMILIES}")


def max_robust_limit(
    model: GcnModel,
    graph: Graph,
    local_budget: int,
    node: int,
    cap: int = 100,
    variant: str = "topk",
    family: str = "poly",
    mode: str = "both",
) -> tuple[int, bool]:
    """(limit, never_certified) for one node; certification holds at every step.

    Walks total budgets 0, 1, 2, ... while the node stays certified and
    returns the last certified budget. A node not certified even at budget 0
    reports limit 0 with the never-certified flag.
    """
    if cap < 0:
        raise DataError("search cap must be non-negative")
    for total in range(cap + 1):
        budget = PerturbationBudget(per_node=local_budget, total=total)
        if not _certified_at(model, graph, budget, node, family, variant, mode):
            if total == 0:
                return 0, True
            return total - 1, False
    return cap, False


def compute_robust_limits(
    model: GcnModel,
    graph: Graph,
    local_budget: int,
    cap: int = 100,
    variant: str = "topk",
    family: str = "poly",
    mode: str = "both",
    threads: int = 1,
) -> RobustLimitVector:
    """Limit vector over all nodes; per-node searches are independent."""

    def search(node: int) -> tuple[int, bool]:
        return max_robust_limit(model, graph, local_budget, node, cap, variant, family, mode)

    nodes = range(graph.num_nodes)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(search, nodes))
    else:
        results = [search(node) for node in nodes]
    limits = np.array([limit for limit, _ in results], dtype=np.int64)
    never = np.array([flag for _, flag in results], dtype=bool)
    return RobustLimitVector(limits=limits, never_certified=never, search_cap=cap)
