# Array-backed sum tree: leaves hold priorities, every internal node holds
# the sum of its two children.  Node 0 is the root; the children of node i
# are 2i+1 and 2i+2; leaf j lives at index capacity-1+j.
from __future__ import annotations

import numpy as np


def _next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p <<= 1
    return p


class SumTree:
    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = _next_pow2(capacity)
        self.nodes = np.zeros(2 * self.capacity - 1)
        self.depth = self.capacity.bit_length() - 1

    @property
    def total(self) -> float:
        return float(self.nodes[0])

    @property
    def leaves(self) -> np.ndarray:
        return self.nodes[self.capacity - 1:]

    def get(self, idx):
        return self.nodes[self.capacity - 1 + np.asarray(idx)]

    def update(self, idx: int, value: float) -> None:
        if value < 0 or not np.isfinite(value):
            raise ValueError(f"priority must be finite and >= 0, got {value}")
        node = self.capacity - 1 + int(idx)
        self.nodes[node] = value
        while node > 0:
            node = (node - 1) // 2
            self.nodes[node] = self.nodes[2 * node + 1] + self.nodes[2 * node + 2]

    def update_many(self, idx, values) -> None:
        idx = np.asarray(idx, dtype=np.int64)
        values = np.asarray(values, dtype=float)
        if idx.size == 0:
            return
        if (values < 0).any() or not np.isfinite(values).all():
            raise ValueError("priorities must be finite and >= 0")
        nodes = self.capacity - 1 + idx
        # duplicate indices: last write wins, as with sequential updates
        self.nodes[nodes] = values
        nodes = np.unique(nodes)
        while nodes[0] > 0:
            nodes = np.unique((nodes - 1) // 2)
            self.nodes[nodes] = self.nodes[2 * nodes + 1] + self.nodes[2 * nodes + 2]

    def rebuild(self, leaf_values) -> None:
        """Overwrite the first ``len(leaf_values)`` leaves, zero the rest, resum."""
        leaf_values = np.asarray(leaf_values, dtype=float)
        if (leaf_values < 0).any():
            raise ValueError("priorities must be >= 0")
        leaves = self.nodes[self.capacity - 1:]
        leaves[:] = 0.0
        leaves[:leaf_values.size] = leaf_values
        start, width = self.capacity - 1, self.capacity
        while width > 1:
            parent_start = (start - 1) // 2
            level = self.nodes[start:start + width]
            self.nodes[parent_start:parent_start + width // 2] = level[0::2] + level[1::2]
            start, width = parent_start, width // 2

    def find(self, prefix):
        """Leaf indices whose cumulative-sum interval contains each prefix value."""
        u = np.array(prefix, dtype=float, ndmin=1)
        node = np.zeros(u.shape, dtype=np.int64)
        for _ in range(self.depth):
            left = 2 * node + 1
            lsum = self.nodes[left]
            go_right = u >= lsum
            # never descend into an empty subtree because of rounding
            go_right &= self.nodes[left + 1] > 0
            go_right |= lsum <= 0
            u = np.where(go_right, u - lsum, u)
            node = np.where(go_right, left + 1, left)
        return node - (self.capacity - 1)

    def check(self, atol: float = 1e-9) -> bool:
        internal = np.arange(self.capacity - 1)
        sums = self.nodes[2 * internal + 1] + self.nodes[2 * internal + 2]
        return bool(np.all(np.abs(self.nodes[internal] - sums) <= atol))
