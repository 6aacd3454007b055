"""Coordinate-addressed unified noise field.

Every finest-grid cell ``(y, x, d)`` owns one unit-Gaussian value that is a
pure function of ``(master_seed, y, x, d)``. Coarse blocks do not get their
own noise: a level-``L`` block value is the mean of its ``2^L x 2^L`` fine
values scaled by ``2^L``, which keeps it unit variance and makes every
resolution a view of the same realization.

The hash and Gaussian conversion are documented in :mod:`fresco._kernels`.
"""

from dataclasses import asdict, dataclass
from functools import cached_property

import numpy as np

from . import _kernels
from .errors import BoundsError


@dataclass(frozen=True)
class FieldCoord:
    y: int
    x: int
    d: int


@dataclass(frozen=True)
class NoiseField:
    master_seed: int
    height: int
    width: int
    channels: int

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError(f"master_seed must fit in 64 bits, got {self.master_seed}")
        for name in ("height", "width", "channels"):
            if int(getattr(self, name)) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def shape(self):
        return (self.height, self.width, self.channels)

    def _check(self, y, x, d):
        if not (0 <= y < self.height and 0 <= x < self.width and 0 <= d < self.channels):
            raise BoundsError(f"coordinate (y={y}, x={x}, d={d}) outside canvas {self.shape}")

    def hash_coord(self, coord):
        self._check(coord.y, coord.x, coord.d)
        return _kernels.digest_int(self.master_seed, coord.y, coord.x, coord.d)

    def sample_unit_gaussian(self, coord):
        return _kernels.gaussian_from_digest_int(self.hash_coord(coord))

    def sample_block(self, level, block_row, block_col, d):
        """Normalized block average of the fine noise under one level-``level`` block."""
        if level < 0:
            raise ValueError("level must be non-negative")
        size = 1 << level
        y0, x0 = block_row * size, block_col * size
        if block_row < 0 or block_col < 0 or y0 + size > self.height or x0 + size > self.width:
            raise BoundsError(f"level-{level} block ({block_row}, {block_col}) outside canvas {self.shape}")
        if not 0 <= d < self.channels:
            raise BoundsError(f"channel {d} outside canvas {self.shape}")
        block = self._fine[y0:y0 + size, x0:x0 + size, d]
        return float(block.sum() / size)

    @cached_property
    def _fine(self):
        values = _kernels.field_block(self.master_seed, 0, 0, self.height, self.width, self.channels)
        values.setflags(write=False)
        return values

    def fine_values(self):
        """The whole fine field, shape ``(H, W, D)``; read-only."""
        return self._fine

    def block_values(self, level):
        """All level-``level`` block values, shape ``(H / 2^L, W / 2^L, D)``."""
        size = 1 << level
        if self.height % size or self.width % size:
            raise BoundsError(f"canvas {self.shape} is not tiled by level-{level} blocks")
        fine = self.fine_values()
        h, w = self.height // size, self.width // size
        return fine.reshape(h, size, w, size, self.channels).sum(axis=(1, 3)) / size

    def values_at(self, ys, xs, ds):
        """Vectorized lookup at explicit, unchecked-by-shape coordinate arrays."""
        ys, xs, ds = (np.asarray(a, dtype=np.int64) for a in (ys, xs, ds))
        if ys.size and (
            ys.min() < 0 or xs.min() < 0 or ds.min() < 0
            or ys.max() >= self.height or xs.max() >= self.width or ds.max() >= self.channels
        ):
            raise BoundsError("coordinate array reaches outside the canvas")
        shape = np.broadcast(ys, xs, ds).shape
        ys, xs, ds = (np.broadcast_to(a, shape).ravel() for a in (ys, xs, ds))
        return _kernels.gaussians_at(self.master_seed, ys, xs, ds).reshape(shape)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)
