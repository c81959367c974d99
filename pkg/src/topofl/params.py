"""Flat parameter vectors with a named-layer index."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

LayerIndex = Dict[str, Tuple[int, int]]


@dataclass(frozen=True)
class ParameterVector:
    """Model parameters flattened into one float64 array.

    ``layer_index`` maps a layer name to a half-open ``(start, stop)`` range
    into ``values``. Ranges are disjoint and cover the whole vector.
    """

    values: np.ndarray
    layer_index: LayerIndex = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).ravel()
        if not np.all(np.isfinite(values)):
            raise ValueError("parameter vector contains NaN or Inf")
        index = dict(self.layer_index) or {"all": (0, values.size)}
        _check_index(index, values.size)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "layer_index", index)

    def __len__(self) -> int:
        return self.values.size

    def layer(self, name: str) -> np.ndarray:
        start, stop = self.layer_index[name]
        return self.values[start:stop]

    def select(self, layers: Optional[Iterable[str]] = None) -> np.ndarray:
        """Concatenate the named layers in index order (all layers if None)."""
        if layers is None:
            return self.values
        names = set(layers)
        missing = names - set(self.layer_index)
        if missing:
            raise KeyError(f"unknown layers: {sorted(missing)}")
        spans = sorted(self.layer_index[n] for n in names)
        return np.concatenate([self.values[a:b] for a, b in spans])

    def with_values(self, values: np.ndarray) -> "ParameterVector":
        values = np.asarray(values, dtype=np.float64).ravel()
        if values.size != self.values.size:
            raise ValueError(
                f"length mismatch: expected {self.values.size}, got {values.size}"
            )
        return ParameterVector(values, self.layer_index)

    def same_shape(self, other: "ParameterVector") -> bool:
        return len(self) == len(other) and self.layer_index == other.layer_index

    def copy(self) -> "ParameterVector":
        return ParameterVector(self.values.copy(), self.layer_index)


def _check_index(index: LayerIndex, size: int) -> None:
    spans = sorted(index.values())
    pos = 0
    for start, stop in spans:
        if start != pos or stop < start:
            raise ValueError(f"layer index is not contiguous at offset {pos}")
        pos = stop
    if pos != size:
        raise ValueError(f"layer index covers {pos} entries, vector has {size}")


def check_same_shape(vectors) -> None:
    first = vectors[0]
    for v in vectors[1:]:
        if not first.same_shape(v):
            raise ValueError("parameter vectors differ in shape or layer layout")
