from __future__ import annotations

import numpy as np

from ..core import UsageError


class ReplayBuffer:
    """Fixed-capacity FIFO of integer tuples with uniform sampling with replacement."""

    def __init__(self, capacity: int, width: int, rng: np.random.Generator):
        if capacity < 1 or width < 1:
            raise UsageError("capacity and width must be >= 1")
        self.capacity = capacity
        self.rng = rng
        self._data = np.zeros((capacity, width), dtype=np.int64)
        self._next = 0
        self._size = 0

    def __len__(self):
        return self._size

    def add(self, item) -> None:
        self._data[self._next] = item
        self._next = (self._next + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def items(self) -> np.ndarray:
        """Contents, oldest first."""
        if self._size < self.capacity:
            return self._data[:self._size].copy()
        return np.roll(self._data, -self._next, axis=0)

    def sample(self, batch_size: int) -> np.ndarray:
        if self._size == 0:
            raise UsageError("cannot sample from an empty buffer")
        idx = self.rng.integers(self._size, size=batch_size)
        return self._data[idx]

    def clear(self) -> None:
        self._next = 0
        self._size = 0
