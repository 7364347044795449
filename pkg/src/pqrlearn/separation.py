"""Feature-frequency counting and the top-k high/low frequency bi-partition.

A feature's count is the number of instances whose nonzero support contains
it, not a sum of magnitudes; presence counting is scale-invariant. The
partition is computed once, before training, and frozen.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterable

from .io import LabeledInstance

SEPARATION_MAGIC = "pqr-sep v1"


@dataclass
class FeatureCounts:
    """Occurrence counts keyed by feature index, plus the instance total."""

    counts: dict[int, int] = field(default_factory=dict)
    total_instances: int = 0
    max_index: int = 0

    def merge(self, other: "FeatureCounts") -> "FeatureCounts":
        """Pointwise-add another partial count (disjoint stream segments)."""
        for index, count in other.counts.items():
            self.counts[index] = self.counts.get(index, 0) + count
        self.total_instances += other.total_instances
        self.max_index = max(self.max_index, other.max_index)
        return self


@dataclass(frozen=True)
class FeatureSeparation:
    """Bi-partition of the feature index set {1..d}.

    ``high`` lists the high-frequency indices in rank order (most frequent
    first); every index in [1, d] not listed is low-frequency.
    """

    d: int
    high: tuple[int, ...]

    def __post_init__(self):
        if self.d < 0:
            raise ValueError(f"dimension {self.d} negative")
        if len(self.high) > self.d:
            raise ValueError(f"|H| = {len(self.high)} exceeds dimension {self.d}")
        seen = set()
        for index in self.high:
            if not 1 <= index <= self.d:
                raise ValueError(f"high-frequency index {index} outside [1, {self.d}]")
            if index in seen:
                raise ValueError(f"duplicate high-frequency index {index}")
            seen.add(index)

    @property
    def k(self) -> int:
        return len(self.high)

    def is_high(self, index: int) -> bool:
        return index in self._high_set

    def is_low(self, index: int) -> bool:
        return 1 <= index <= self.d and index not in self._high_set

    @property
    def _high_set(self) -> frozenset[int]:
        # cached on first use; object.__setattr__ because the dataclass is frozen
        cached = getattr(self, "_high_set_cache", None)
        if cached is None:
            cached = frozenset(self.high)
            object.__setattr__(self, "_high_set_cache", cached)
        return cached


def count_features(instances: Iterable[LabeledInstance]) -> FeatureCounts:
    """Count per-instance feature presence over a stream, in one pass."""
    counts: dict[int, int] = {}
    total = 0
    max_index = 0
    for instance in instances:
        total += 1
        features = instance.features
        if features:
            last = features[-1][0]
            if last > max_index:
                max_index = last
        for index, _ in features:
            counts[index] = counts.get(index, 0) + 1
    return FeatureCounts(counts, total, max_index)


def select_top_k(counts: FeatureCounts, k: int, d: int) -> FeatureSeparation:
    """Pick the k most frequent feature indices as the high-frequency set.

    Ties are broken by the smaller index; indices never seen count as zero.
    """
    if k < 0:
        raise ValueError(f"k = {k} negative")
    if k > d:
        raise ValueError(f"k = {k} exceeds dimension d = {d}")
    if counts.max_index > d:
        raise ValueError(f"counts contain index {counts.max_index} beyond d = {d}")
    ranked = sorted(counts.counts.items(), key=lambda item: (-item[1], item[0]))
    high = [index for index, _ in ranked[:k]]
    if len(high) < k:
        # fewer than k features ever seen: pad with unseen indices, ascending
        present = set(high)
        for index in range(1, d + 1):
            if index not in present:
                high.append(index)
                if len(high) == k:
                    break
    return FeatureSeparation(d=d, high=tuple(high))


def save_separation(separation: FeatureSeparation, path: str | os.PathLike) -> None:
    """Persist as the versioned text format; round-trips bit-exactly."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(serialize_separation(separation))


def serialize_separation(separation: FeatureSeparation) -> str:
    lines = [f"{SEPARATION_MAGIC} d={separation.d} k={separation.k}"]
    lines.extend(str(index) for index in separation.high)
    return "\n".join(lines) + "\n"


def load_separation(path: str | os.PathLike) -> FeatureSeparation:
    with open(path, "r", encoding="utf-8") as handle:
        header = handle.readline()
        d, k = parse_separation_header(header)
        high = [int(handle.readline()) for _ in range(k)]
    return FeatureSeparation(d=d, high=tuple(high))


def parse_separation_header(header: str) -> tuple[int, int]:
    fields = header.split()
    if fields[:2] != SEPARATION_MAGIC.split() or len(fields) != 4:
        raise ValueError(f"not a separation header: {header!r}")
    if not fields[2].startswith("d=") or not fields[3].startswith("k="):
        raise ValueError(f"not a separation header: {header!r}")
    return int(fields[2][2:]), int(fields[3][2:])


def save_counts(counts: FeatureCounts, path: str | os.PathLike) -> None:
    """Write counts as "index count" lines sorted by index."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for index in sorted(counts.counts):
            handle.write(f"{index} {counts.counts[index]}\n")
