"""Flat parameter vectors with named array views.

Both the update cell and the output head store their weights in a single
float64 vector; the layout order is the serialization order and the order
in which the optimizer sees the parameters.
"""

from __future__ import annotations

import numpy as np


class ParamSet:
    """Base class: subclasses define ``_layout()`` as (name, shape, is_weight) triples."""

    def __init__(self, vector=None):
        layout = self._layout()
        sizes = [int(np.prod(shape)) for _, shape, _ in layout]
        total = sum(sizes)
        if vector is None:
            vector = np.zeros(total)
        else:
            vector = np.asarray(vector, dtype=np.float64)
            if vector.shape != (total,):
                raise ValueError(f"expected {total} parameters, got {vector.shape}")
        self.vector = vector
        self.arrays = {}
        mask = np.zeros(total, dtype=bool)
        offset = 0
        for (name, shape, is_weight), size in zip(layout, sizes):
            self.arrays[name] = vector[offset:offset + size].reshape(shape)
            mask[offset:offset + size] = is_weight
            offset += size
        self.weight_mask = mask

    def _layout(self):
        raise NotImplementedError

    def __getitem__(self, name):
        return self.arrays[name]

    def __len__(self):
        return self.vector.size

    def names(self):
        return [name for name, _, _ in self._layout()]

    def weight_names(self):
        return [name for name, _, w in self._layout() if w]

    def zeros_like(self):
        return self._rebuild(np.zeros_like(self.vector))

    def copy(self):
        return self._rebuild(self.vector.copy())

    def with_vector(self, vector):
        return self._rebuild(vector)

    def _rebuild(self, vector):
        raise NotImplementedError

    def weight_norm_sq(self) -> float:
        w = self.vector[self.weight_mask]
        return float(w @ w)

    def __eq__(self, other):
        return (
            type(self) is type(other)
            and self._layout() == other._layout()
            and np.array_equal(self.vector, other.vector)
        )

    __hash__ = None
