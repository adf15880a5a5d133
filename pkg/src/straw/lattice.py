"""Regular integer lattices of test locations.

Sites are 1-based integer coordinate tuples. Per-site fields (p-values,
sparsity levels, decisions) are flat numpy arrays in row-major order, so
``field[lat.index(site)]`` is the value at ``site``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

Site = tuple[int, ...]


def _as_site(site: Iterable[int]) -> Site:
    return tuple(int(c) for c in site)


def euclidean_distance(a: Sequence[int], b: Sequence[int]) -> float:
    """Euclidean distance between two sites of the same dimension."""
    if len(a) != len(b):
        raise ValueError(f"dimension mismatch: {len(a)} vs {len(b)}")
    return math.sqrt(sum((float(x) - float(y)) ** 2 for x, y in zip(a, b)))


@dataclass(frozen=True)
class Lattice:
    """Regular lattice ``{1..n1} x ... x {1..nd}`` with d in {1, 2, 3}."""

    extents: tuple[int, ...]

    def __post_init__(self):
        ext = tuple(int(e) for e in self.extents)
        if not 1 <= len(ext) <= 3:
            raise ValueError(f"lattice dimension must be 1, 2 or 3, got {len(ext)}")
        if any(e <= 0 for e in ext):
            raise ValueError(f"extents must be positive, got {ext}")
        object.__setattr__(self, "extents", ext)

    @property
    def dimension(self) -> int:
        return len(self.extents)

    @property
    def size(self) -> int:
        return int(np.prod(self.extents))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.extents

    def __len__(self) -> int:
        return self.size

    def contains(self, site: Sequence[int]) -> bool:
        return len(site) == self.dimension and all(
            1 <= c <= e for c, e in zip(site, self.extents)
        )

    def _check(self, site: Sequence[int]) -> Site:
        site = _as_site(site)
        if len(site) != self.dimension:
            raise ValueError(
                f"dimension mismatch: site {site} on a {self.dimension}-d lattice"
            )
        if not self.contains(site):
            raise ValueError(f"site {site} outside lattice extents {self.extents}")
        return site

    def index(self, site: Sequence[int]) -> int:
        """0-based row-major linear index of ``site``."""
        site = self._check(site)
        return int(np.ravel_multi_index(tuple(c - 1 for c in site), self.extents))

    def site(self, index: int) -> Site:
        """Inverse of :meth:`index`."""
        if not 0 <= index < self.size:
            raise IndexError(f"linear index {index} out of range for m={self.size}")
        return tuple(int(c) + 1 for c in np.unravel_index(index, self.extents))

    def sites(self) -> list[Site]:
        return [tuple(int(c) for c in row) for row in self.coords()]

    def coords(self) -> np.ndarray:
        """All site coordinates as an ``(m, d)`` integer array, row-major."""
        grids = np.indices(self.extents).reshape(self.dimension, -1).T
        return grids + 1

    def to_grid(self, field: np.ndarray) -> np.ndarray:
        field = np.asarray(field)
        if field.shape != (self.size,):
            raise ValueError(f"field of shape {field.shape} does not match m={self.size}")
        return field.reshape(self.extents)

    def sites_within_radius(self, center: Sequence[int], c: float) -> list[Site]:
        """Sites ``s`` with ``|center - s| < c`` in row-major order.

        The neighbourhood is truncated at the lattice boundary; no padding.
        """
        if c <= 0:
            raise ValueError("radius must be positive")
        center = self._check(center)
        reach = max(int(math.ceil(c)) - 1, 0)
        ranges = [
            range(max(1, x - reach), min(e, x + reach) + 1)
            for x, e in zip(center, self.extents)
        ]
        box = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, self.dimension)
        d2 = ((box - np.asarray(center)) ** 2).sum(axis=1)
        keep = box[d2 < c * c]
        return [tuple(int(v) for v in row) for row in keep]


def distance_stencil(dimension: int, c: float) -> tuple[np.ndarray, np.ndarray]:
    """Distances from the origin over the smallest box holding ``|o| < c``.

    Returns ``(dist, inside)``, both of shape ``(2r+1,)*d`` and centred on
    the origin, where ``inside`` marks offsets strictly closer than ``c``.
    """
    reach = max(int(math.ceil(c)) - 1, 0)
    axes = [np.arange(-reach, reach + 1, dtype=float)] * dimension
    mesh = np.meshgrid(*axes, indexing="ij")
    dist2 = sum(g * g for g in mesh)
    return np.sqrt(dist2), dist2 < c * c
