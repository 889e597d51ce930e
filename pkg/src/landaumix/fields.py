"""Per-species nodal fields on the momentum grid."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FIELD_KINDS = ("density", "perturbation")


@dataclass
class DistributionField:
    """N blocks of G nodal values, species-major.

    kind "density" holds nonnegative F_i values; kind "perturbation" holds
    signed f_i values from the sqrt(M)-weighted expansion F = M + sqrt(M) f.
    """

    values: np.ndarray  # shape (N, G)
    kind: str = "density"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError(f"field values must be (N, G), got shape {self.values.shape}")
        if self.kind not in FIELD_KINDS:
            raise ValueError(f"kind must be one of {FIELD_KINDS}, got {self.kind!r}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")
        if self.kind == "density" and np.any(self.values < 0):
            raise ValueError("density field must be componentwise nonnegative")

    @property
    def n_species(self) -> int:
        return self.values.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.values.shape[1]

    def copy(self) -> "DistributionField":
        return DistributionField(values=self.values.copy(), kind=self.kind)

    def stacked(self) -> np.ndarray:
        """Flat view, species-major then node-lexicographic."""
        return self.values.reshape(-1)


def field_from_stacked(flat: np.ndarray, n_species: int, kind: str = "density") -> DistributionField:
    flat = np.asarray(flat, dtype=float)
    return DistributionField(values=flat.reshape(n_species, -1), kind=kind)
