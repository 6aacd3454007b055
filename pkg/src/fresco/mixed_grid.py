"""Quadtree of active latent tokens at mixed resolution levels.

Storage is dense per level: level ``L`` owns arrays of shape
``(H / 2^L, W / 2^L, ...)`` plus an ``active`` mask, so vectorized updates
stay cheap while the set of active cells is still a quadtree partition of
the fine canvas.

Token values are kept in the variance-normalized scale of their level: a
level-``L`` value is ``2^L`` times the mean of the fine cells it covers, the
same convention as :meth:`NoiseField.sample_block` and :func:`downsample`.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, GridConsistencyError

CANVAS_MAGIC = b"FRSC"


@dataclass(frozen=True, order=True)
class TokenCoord:
    level: int
    row: int
    col: int

    @property
    def size(self):
        return 1 << self.level

    def footprint(self):
        """Fine-grid ``(y0, y1, x0, x1)`` half-open bounds."""
        s = self.size
        return self.row * s, (self.row + 1) * s, self.col * s, (self.col + 1) * s


@dataclass(frozen=True)
class LatentToken:
    coord: TokenCoord
    value: np.ndarray
    history: tuple


class MixedGrid:
    def __init__(self, height, width, channels, max_level, window=4, t=1.0):
        if window < 1:
            raise ConfigurationError("history window must be positive")
        size = 1 << max_level
        if height % size or width % size:
            raise ConfigurationError(
                f"canvas {height}x{width} is not divisible by 2^{max_level} = {size}"
            )
        self.height = height
        self.width = width
        self.channels = channels
        self.max_level = max_level
        self.window = window
        self.t = float(t)
        self.values = []
        self.active = []
        self.history = []
        self.hist_len = []
        for level in range(max_level + 1):
            h, w = height >> level, width >> level
            self.values.append(np.zeros((h, w, channels)))
            self.active.append(np.zeros((h, w), dtype=bool))
            self.history.append(np.zeros((window, h, w, channels)))
            self.hist_len.append(np.zeros((h, w), dtype=np.int64))

    @classmethod
    def init_grid(cls, level, field, window=4, max_level=None):
        """Fully tiled grid at ``level`` carrying the field's block values at t = 1."""
        if max_level is None:
            max_level = level
        if level > max_level:
            raise ConfigurationError("init level exceeds max_level")
        grid = cls(field.height, field.width, field.channels, max_level, window, t=1.0)
        grid.values[level][...] = field.block_values(level)
        grid.active[level][...] = True
        return grid

    @classmethod
    def from_level_values(cls, level, values, max_level=None, window=4, t=1.0):
        h, w, channels = values.shape
        if max_level is None:
            max_level = level
        grid = cls(h << level, w << level, channels, max_level, window, t)
        grid.values[level][...] = values
        grid.active[level][...] = True
        return grid

    @property
    def shape(self):
        return (self.height, self.width, self.channels)

    @property
    def active_count(self):
        return int(sum(a.sum() for a in self.active))

    def level_counts(self):
        return [int(a.sum()) for a in self.active]

    def levels_present(self):
        return [lv for lv, a in enumerate(self.active) if a.any()]

    def is_active(self, coord):
        if not 0 <= coord.level <= self.max_level:
            return False
        a = self.active[coord.level]
        return 0 <= coord.row < a.shape[0] and 0 <= coord.col < a.shape[1] and bool(a[coord.row, coord.col])

    def coords(self):
        """Active coordinates, ordered by (level, row, col)."""
        out = []
        for level, a in enumerate(self.active):
            for r, c in zip(*np.nonzero(a)):
                out.append(TokenCoord(level, int(r), int(c)))
        return out

    def token(self, coord):
        if not self.is_active(coord):
            raise KeyError(coord)
        n = int(self.hist_len[coord.level][coord.row, coord.col])
        hist = self.history[coord.level][self.window - n:, coord.row, coord.col]
        return LatentToken(
            coord,
            self.values[coord.level][coord.row, coord.col].copy(),
            tuple(h.copy() for h in hist),
        )

    def tokens(self):
        return [self.token(c) for c in self.coords()]

    def copy(self):
        new = MixedGrid.__new__(MixedGrid)
        new.__dict__.update(self.__dict__)
        for name in ("values", "active", "history", "hist_len"):
            setattr(new, name, [a.copy() for a in getattr(self, name)])
        return new

    # -- mutation ----------------------------------------------------------

    def record_step(self):
        """Append every active token's value to its history (ring of ``window``)."""
        for level in range(self.max_level + 1):
            if not self.active[level].any():
                continue
            hist = self.history[level]
            hist[:-1] = hist[1:]
            hist[-1] = self.values[level]
            n = self.hist_len[level]
            n[self.active[level]] = np.minimum(n[self.active[level]] + 1, self.window)

    def clear_histories(self):
        for level in range(self.max_level + 1):
            self.hist_len[level][...] = 0

    def deactivate(self, coord):
        self.active[coord.level][coord.row, coord.col] = False
        self.hist_len[coord.level][coord.row, coord.col] = 0

    def activate(self, coord, value):
        self.values[coord.level][coord.row, coord.col] = value
        self.active[coord.level][coord.row, coord.col] = True
        self.hist_len[coord.level][coord.row, coord.col] = 0

    # -- invariants ----------------------------------------------------------

    def footprint_counts(self):
        """Number of active tokens covering each fine cell."""
        counts = np.zeros((self.height, self.width), dtype=np.int64)
        for level, a in enumerate(self.active):
            s = 1 << level
            counts += np.kron(a.astype(np.int64), np.ones((s, s), dtype=np.int64))
        return counts

    def check_partition(self):
        counts = self.footprint_counts()
        if not (counts == 1).all():
            gaps = int((counts == 0).sum())
            overlaps = int((counts > 1).sum())
            raise GridConsistencyError(f"partition violated: {gaps} uncovered, {overlaps} multiply covered cells")

    def check_finite(self):
        for level, a in enumerate(self.active):
            if a.any() and not np.isfinite(self.values[level][a]).all():
                raise GridConsistencyError(f"non-finite token value at level {level}, t={self.t}")

    # -- export --------------------------------------------------------------

    def assemble_canvas(self):
        """Fine ``(H, W, D)`` canvas; a level-L value fills its footprint scaled by 2^-L."""
        self.check_partition()
        canvas = np.zeros(self.shape)
        for level, a in enumerate(self.active):
            if not a.any():
                continue
            s = 1 << level
            v = np.where(a[..., None], self.values[level], 0.0) / s
            canvas += np.repeat(np.repeat(v, s, axis=0), s, axis=1)
        return canvas


def write_canvas(path, canvas):
    """Write ``FRSC`` magic, u32 H, W, D, then f32 little-endian row-major values."""
    canvas = np.asarray(canvas)
    if canvas.ndim != 3:
        raise ValueError("canvas must be (H, W, D)")
    h, w, d = canvas.shape
    with open(path, "wb") as fh:
        fh.write(CANVAS_MAGIC)
        fh.write(struct.pack("<III", h, w, d))
        fh.write(np.ascontiguousarray(canvas, dtype="<f4").tobytes())


def read_canvas(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != CANVAS_MAGIC:
        raise ValueError(f"{path}: not a FRSC canvas file")
    h, w, d = struct.unpack("<III", data[4:16])
    payload = data[16:]
    if len(payload) != 4 * h * w * d:
        raise ValueError(f"{path}: payload size {len(payload)} does not match {h}x{w}x{d}")
    return np.frombuffer(payload, dtype="<f4").reshape(h, w, d).copy()
