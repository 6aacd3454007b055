"""Hadamard 1->4 token expansion.

Children are ordered row-major inside the parent block: (2r, 2c), (2r, 2c+1),
(2r+1, 2c), (2r+1, 2c+1). The detail vectors fed to the expansion are read
from the unified field at the children's own coordinates: the three detail
coefficients of the four child-level field values,

    e = (H4 @ [c1, c2, c3, c4]) / 2,  keeping e[1:],

which are iid unit Gaussians independent of the children's block sum. With
the parent's normalized value halved on entry (converting level-L scale to
level-(L-1) scale) and ``detail_scale = 1/2`` a promotion of an exact field
block reproduces the child-level field values exactly.
"""

import numpy as np

from .errors import CannotExpandError, StaleSelectionError
from .mixed_grid import TokenCoord

H4 = np.array(
    [
        [1, 1, 1, 1],
        [1, -1, 1, -1],
        [1, 1, -1, -1],
        [1, -1, -1, 1],
    ],
    dtype=np.int64,
)


def child_coords(parent):
    if parent.level < 1:
        raise CannotExpandError(f"{parent} is already at the finest level")
    lv, r, c = parent.level - 1, 2 * parent.row, 2 * parent.col
    return [TokenCoord(lv, r, c), TokenCoord(lv, r, c + 1), TokenCoord(lv, r + 1, c), TokenCoord(lv, r + 1, c + 1)]


def expand_token(parent_value, detail_scale, eps1, eps2, eps3):
    """``[z1..z4] = H4 @ [parent, s*eps1, s*eps2, s*eps3]``; returns shape ``(4, D)``.

    The children average to ``parent_value`` exactly.
    """
    if detail_scale < 0:
        raise ValueError("detail_scale must be non-negative")
    cols = np.stack(
        [
            np.asarray(parent_value, dtype=np.float64),
            detail_scale * np.asarray(eps1, dtype=np.float64),
            detail_scale * np.asarray(eps2, dtype=np.float64),
            detail_scale * np.asarray(eps3, dtype=np.float64),
        ]
    )
    return H4 @ cols


def field_details(field, parent):
    """The three unit-Gaussian detail vectors for ``parent``, shape ``(3, D)``."""
    kids = child_coords(parent)
    size = 1 << kids[0].level
    block = field.fine_values()[
        parent.row * 2 * size:(parent.row + 1) * 2 * size,
        parent.col * 2 * size:(parent.col + 1) * 2 * size,
    ]
    # child-level normalized values in row-major child order
    child_vals = block.reshape(2, size, 2, size, -1).sum(axis=(1, 3)).reshape(4, -1) / size
    return (H4 @ child_vals)[1:] / 2.0


def promote(grid, coords, field, sigma_detail):
    """Replace each parent in ``coords`` by its four children.

    ``sigma_detail`` is a float or a callable ``level -> float`` evaluated at
    the parent's level. Children start with empty histories.
    """
    for coord in coords:
        if coord.level < 1:
            raise CannotExpandError(f"{coord} is already at the finest level")
        if not grid.is_active(coord):
            raise StaleSelectionError(coord)
    for coord in coords:
        scale = sigma_detail(coord.level) if callable(sigma_detail) else sigma_detail
        parent = grid.values[coord.level][coord.row, coord.col]
        e1, e2, e3 = field_details(field, coord)
        children = expand_token(parent / 2.0, scale, e1, e2, e3)
        grid.deactivate(coord)
        for kid, value in zip(child_coords(coord), children):
            grid.activate(kid, value)


def promote_all(grid, to_level, field, sigma_detail):
    """Promote every token coarser than ``to_level``; returns the number of expansions."""
    n = 0
    for level in range(grid.max_level, to_level, -1):
        coords = [TokenCoord(level, int(r), int(c)) for r, c in zip(*np.nonzero(grid.active[level]))]
        promote(grid, coords, field, sigma_detail)
        n += len(coords)
    return n
