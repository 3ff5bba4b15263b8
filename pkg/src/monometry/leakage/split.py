"""Cluster-level train/val/test assignment."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Mapping, Optional, Sequence

import numpy as np

from .dbscan import NOISE

SUBSETS = ("train", "val", "test")


@dataclass(frozen=True)
class ClusterPartition:
    labels: dict[Hashable, int]
    split: dict[Hashable, str]
    dbcv: Optional[float] = None
    proportions: dict[str, float] = field(default_factory=dict)

    def spanning_clusters(self) -> list[int]:
        """Non-noise clusters whose members landed in more than one subset."""
        seen: dict[int, set] = {}
        for image_id, c in self.labels.items():
            if c != NOISE:
                seen.setdefault(c, set()).add(self.split[image_id])
        return sorted(c for c, s in seen.items() if len(s) > 1)

    def ids(self, subset: str) -> list[Hashable]:
        return sorted((i for i, s in self.split.items() if s == subset), key=str)


def _groups(labels: Mapping[Hashable, int]) -> list[list[Hashable]]:
    clusters: dict[int, list] = {}
    groups = []
    for image_id, c in labels.items():
        if c == NOISE:
            groups.append([image_id])
        else:
            clusters.setdefault(c, []).append(image_id)
    groups.extend(clusters[c] for c in sorted(clusters))
    return groups


def cluster_split(labels: Mapping[Hashable, int] | Sequence[int],
                  ratios: tuple[float, float, float] = (0.8, 0.1, 0.1), seed: int = 0,
                  dbcv: Optional[float] = None) -> ClusterPartition:
    """Assign whole clusters to train/val/test.

    Noise points act as singleton clusters. Clusters are shuffled with
    ``seed``, then placed largest first (the shuffle decides among equal
    sizes); each goes to the subset with the largest remaining deficit against
    its target image count (ties favour train, then val, then test).
    """
    if not isinstance(labels, Mapping):
        labels = dict(enumerate(labels))
    if not labels:
        raise ValueError("cluster_split needs at least one labelled image")
    if len(ratios) != 3 or min(ratios) < 0 or not np.isclose(sum(ratios), 1.0):
        raise ValueError(f"ratios must be three non-negative values summing to 1, got {ratios}")

    groups = _groups(labels)
    shuffled = np.random.default_rng(seed).permutation(len(groups))
    # largest first keeps the final overshoot below the smallest cluster size
    order = sorted(shuffled, key=lambda g: -len(groups[g]))
    n = len(labels)
    targets = np.array(ratios, dtype=float) * n
    filled = np.zeros(3)
    split: dict[Hashable, str] = {}
    for g in order:
        k = int(np.argmax(targets - filled))
        filled[k] += len(groups[g])
        for image_id in groups[g]:
            split[image_id] = SUBSETS[k]
    proportions = {s: float(filled[k] / n) for k, s in enumerate(SUBSETS)}
    return ClusterPartition(labels=dict(labels), split=split, dbcv=dbcv, proportions=proportions)
