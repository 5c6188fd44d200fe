"""Overlay topology formation and the degree scaling experiment.

Random node pairs exchange traffic; a direct link is created only when
the overlay cannot already connect the pair within the hop budget.
Run long enough, the average degree settles near (2 n ln n)^(1/h) for
n nodes and hop budget h, so the budget is the knob trading per-node
link state against worst-case path stretch.

This module works on bare adjacency sets rather than Overlay objects:
the experiment needs millions of pair draws, and bookkeeping on full
forwarder state would drown the measurement.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

AT_MOST = "at-most-d"  # link when no path of <= h hops (default)
STRICTLY_LESS = "strictly-less-d"  # link when no path of < h hops

COMPARISONS = (AT_MOST, STRICTLY_LESS)


class NotSaturated(Warning):
    """Experiment ended while links were still being added."""


def bfs_bounded(
    adjacency: Sequence[Set[int]], src: int, dst: int, bound: int
) -> Optional[int]:
    """Shortest path length src->dst if it is <= bound, else None.

    Bidirectional level-synchronized search. Each round expands the
    smaller frontier by one hop; the first time the two sides touch,
    the sum of the expanded radii is exact, because any shorter meeting
    would have been seen on an earlier round. Frontier expansion is a
    single set-union over neighbor sets, which keeps the hot loop in C.
    """
    if bound < 0:
        raise ValueError("bound must be >= 0")
    if src == dst:
        return 0
    if bound == 0:
        return None

    seen_s: Set[int] = {src}
    seen_d: Set[int] = {dst}
    frontier_s: Set[int] = {src}
    frontier_d: Set[int] = {dst}
    dist = 0
    while frontier_s and frontier_d and dist < bound:
        # grow the cheaper side; ties grow the source side
        if len(frontier_s) <= len(frontier_d):
            frontier, seen, other_seen = frontier_s, seen_s, seen_d
            grew_src = True
        else:
            frontier, seen, other_seen = frontier_d, seen_d, seen_s
            grew_src = False
        nxt = set().union(*(adjacency[v] for v in frontier)) - seen
        dist += 1
        if nxt & other_seen:
            return dist
        seen |= nxt
        if grew_src:
            frontier_s = nxt
        else:
            frontier_d = nxt
    return None


@dataclass(frozen=True)
class ExperimentConfig:
    """One topology-formation run.

    pair_count defaults to 50 * n * ln n draws, enough for the link
    rate to die out at every size this package targets. series_stride
    thins the degree series to one sample per n draws.
    """

    n_nodes: int
    max_hops: int
    seed: int = 0
    pair_count: Optional[int] = None
    comparison: str = AT_MOST
    series_stride: Optional[int] = None
    saturation_window: Optional[int] = None

    def __post_init__(self) -> None:
        if self.n_nodes < 2:
            raise ValueError("n_nodes must be >= 2")
        if self.max_hops < 1:
            raise ValueError("max_hops must be >= 1")
        if self.comparison not in COMPARISONS:
            raise ValueError(f"comparison must be one of {COMPARISONS}")
        if self.pair_count is not None and self.pair_count < 1:
            raise ValueError("pair_count must be >= 1")

    @property
    def pairs(self) -> int:
        if self.pair_count is not None:
            return self.pair_count
        return default_pair_count(self.n_nodes)

    @property
    def stride(self) -> int:
        return self.series_stride if self.series_stride is not None else self.n_nodes

    @property
    def window(self) -> int:
        if self.saturation_window is not None:
            return self.saturation_window
        return 10 * self.n_nodes


def default_pair_count(n_nodes: int) -> int:
    return max(1, int(round(50 * n_nodes * math.log(n_nodes))))


@dataclass
class TopologyStats:
    """Outcome of one run: final graph plus the degree trajectory."""

    config: ExperimentConfig
    adjacency: List[Set[int]]
    degree_series: List[Tuple[int, float]]  # (pair index, average degree)
    links_created: int
    last_link_pair: int  # pair index of the final link, -1 if none
    saturated: bool

    @property
    def edge_count(self) -> int:
        return sum(len(nbrs) for nbrs in self.adjacency) // 2

    @property
    def final_degree(self) -> float:
        return 2.0 * self.edge_count / len(self.adjacency)


def run_topology_experiment(config: ExperimentConfig) -> TopologyStats:
    """Draw random pairs and link the ones the overlay cannot serve.

    The hop test uses bound = max_hops for the at-most comparison and
    max_hops - 1 for strictly-less: a pair is linked exactly when
    bfs_bounded finds nothing within the bound.
    """
    n = config.n_nodes
    rng = random.Random(config.seed)
    adjacency: List[Set[int]] = [set() for _ in range(n)]
    bound = config.max_hops if config.comparison == AT_MOST else config.max_hops - 1

    series: List[Tuple[int, float]] = []
    stride = max(1, config.stride)
    links = 0
    last_link = -1
    edge_total = 0

    for i in range(config.pairs):
        u = rng.randrange(n)
        v = rng.randrange(n - 1)
        if v >= u:
            v += 1
        if v not in adjacency[u] and bfs_bounded(adjacency, u, v, bound) is None:
            adjacency[u].add(v)
            adjacency[v].add(u)
            links += 1
            last_link = i
            edge_total += 1
        if (i + 1) % stride == 0 or i + 1 == config.pairs:
            series.append((i + 1, 2.0 * edge_total / n))

    saturated = (config.pairs - 1 - last_link) >= config.window
    return TopologyStats(
        config=config,
        adjacency=adjacency,
        degree_series=series,
        links_created=links,
        last_link_pair=last_link,
        saturated=saturated,
    )


def predicted_degree(n_nodes: float, max_hops: int) -> float:
    """Model value (2 n ln n)^(1/h) the saturated degree should track."""
    if n_nodes < 2:
        raise ValueError("n_nodes must be >= 2")
    if max_hops < 1:
        raise ValueError("max_hops must be >= 1")
    return (2.0 * n_nodes * math.log(n_nodes)) ** (1.0 / max_hops)


@dataclass(frozen=True)
class SeedRun:
    n_nodes: int
    max_hops: int
    seed: int
    final_degree: float
    predicted: float
    ratio: float
    saturated: bool


@dataclass(frozen=True)
class ScalingRow:
    """Seed-averaged measurement for one (n, h) point."""

    n_nodes: int
    max_hops: int
    measured_degree: float
    predicted: float
    ratio: float
    saturated: bool  # all seeds saturated


@dataclass
class ScalingFit:
    """Measured-vs-model comparison across sizes for one hop budget."""

    max_hops: int
    rows: List[ScalingRow]
    per_seed: List[SeedRun]
    warnings: List[str] = field(default_factory=list)

    @property
    def spread(self) -> float:
        """max/min of the measured/model ratio across sizes."""
        ratios = [r.ratio for r in self.rows]
        return max(ratios) / min(ratios)


def scaling_check(
    sizes: Iterable[int],
    max_hops: int,
    seeds: Sequence[int] = (0, 1, 2),
    pair_count: Optional[Dict[int, int]] = None,
    comparison: str = AT_MOST,
) -> ScalingFit:
    """Run the experiment over several sizes and compare to the model.

    A run that did not saturate is kept but flagged in ``warnings``;
    its degree is still a lower bound and the caller decides severity.
    """
    rows: List[ScalingRow] = []
    per_seed: List[SeedRun] = []
    warnings: List[str] = []
    for n in sizes:
        predicted = predicted_degree(n, max_hops)
        degrees: List[float] = []
        all_saturated = True
        for seed in seeds:
            pairs = None if pair_count is None else pair_count.get(n)
            config = ExperimentConfig(
                n_nodes=n,
                max_hops=max_hops,
                seed=seed,
                pair_count=pairs,
                comparison=comparison,
            )
            stats = run_topology_experiment(config)
            degrees.append(stats.final_degree)
            per_seed.append(
                SeedRun(n, max_hops, seed, stats.final_degree, predicted,
                        stats.final_degree / predicted, stats.saturated)
            )
            if not stats.saturated:
                all_saturated = False
                warnings.append(f"n={n} h={max_hops} seed={seed}: not saturated")
        measured = sum(degrees) / len(degrees)
        rows.append(
            ScalingRow(n, max_hops, measured, predicted, measured / predicted, all_saturated)
        )
    return ScalingFit(max_hops=max_hops, rows=rows, per_seed=per_seed, warnings=warnings)
