"""The sparse feature expansion at the heart of the model.

A separation with |H| = k induces a deterministic map from original feature
coordinates into an expanded space of dimension

    D = d + k(k-1)/2 + k + 1

laid out as four contiguous blocks:

    [0, d)                          original features, slot(i) = i - 1
    [d, d + k(k-1)/2)               one slot per unordered high-high pair,
                                    addressed by rank pairs in lexicographic
                                    order
    [d + k(k-1)/2, d + k(k-1)/2+k)  one shared slot per high feature, carrying
                                    its product with the summed active low
                                    features
    D - 1                           constant bias coordinate

A linear model over this expansion is exactly the quadratic model with the
shared-parameter interaction structure (see ``oracle`` for the dense check).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .separation import FeatureSeparation


@dataclass(frozen=True)
class PqrIndexMap:
    """Slot layout for one separation; immutable and shareable."""

    separation: FeatureSeparation
    rank: dict[int, int] = field(init=False, repr=False, compare=False)
    d: int = field(init=False)
    k: int = field(init=False)
    D: int = field(init=False)
    pair_base: int = field(init=False)
    shared_base: int = field(init=False)
    bias_slot: int = field(init=False)

    def __post_init__(self):
        d = self.separation.d
        k = self.separation.k
        object.__setattr__(self, "rank", {index: r for r, index in enumerate(self.separation.high)})
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "pair_base", d)
        object.__setattr__(self, "shared_base", d + k * (k - 1) // 2)
        object.__setattr__(self, "bias_slot", d + k * (k - 1) // 2 + k)
        object.__setattr__(self, "D", d + k * (k - 1) // 2 + k + 1)

    def linear_slot(self, index: int) -> int:
        if not 1 <= index <= self.d:
            raise ValueError(f"feature index {index} outside [1, {self.d}]")
        return index - 1

    def pair_slot(self, i: int, j: int) -> int:
        """Slot of the high-high pair {i, j}; symmetric in its arguments."""
        ri = self.rank.get(i)
        rj = self.rank.get(j)
        if ri is None or rj is None:
            raise ValueError(f"pair ({i}, {j}) not in the high-frequency set")
        if ri == rj:
            raise ValueError(f"pair slot undefined for i == j == {i}")
        if ri > rj:
            ri, rj = rj, ri
        return self.pair_base + self._pair_offset(ri, rj)

    def _pair_offset(self, a: int, b: int) -> int:
        # position of (a, b), a < b, in lexicographic order over {0..k-1} pairs
        return a * (self.k - 1) - a * (a - 1) // 2 + (b - a - 1)

    def shared_slot(self, index: int) -> int:
        r = self.rank.get(index)
        if r is None:
            raise ValueError(f"feature index {index} not in the high-frequency set")
        return self.shared_base + r


def build_index_map(separation: FeatureSeparation) -> PqrIndexMap:
    return PqrIndexMap(separation)


def expand(features: list[tuple[int, float]], index_map: PqrIndexMap) -> list[tuple[int, float]]:
    """Expand a sparse feature vector; returns (slot, value) pairs, slots strictly increasing.

    Emits the original coordinates, products for every active high-high pair,
    the product of each active high feature with the sum of active low
    features (skipped when that sum is zero), and a constant-1 bias entry.
    """
    d = index_map.d
    rank = index_map.rank
    out: list[tuple[int, float]] = []
    high: list[tuple[int, float]] = []  # (rank, value), ascending rank below
    low_sum = 0.0
    previous = 0
    for index, value in features:
        if not 1 <= index <= d:
            raise ValueError(f"feature index {index} outside [1, {d}]")
        if index <= previous:
            raise ValueError(f"feature index {index} not strictly increasing after {previous}")
        previous = index
        out.append((index - 1, value))
        r = rank.get(index)
        if r is None:
            low_sum += value
        else:
            high.append((r, value))

    high.sort()
    pair_base = index_map.pair_base
    k = index_map.k
    for a_pos, (ra, va) in enumerate(high):
        row_base = pair_base + ra * (k - 1) - ra * (ra - 1) // 2 - ra - 1
        for rb, vb in high[a_pos + 1:]:
            out.append((row_base + rb, va * vb))

    if low_sum != 0.0:
        shared_base = index_map.shared_base
        for r, value in high:
            out.append((shared_base + r, value * low_sum))

    out.append((index_map.bias_slot, 1.0))
    return out
