import numpy as np
import pytest

from fresco.errors import CannotExpandError, StaleSelectionError
from fresco.hadamard import H4, child_coords, expand_token, field_details, promote, promote_all
from fresco.mixed_grid import MixedGrid, TokenCoord
from fresco.noise_field import NoiseField


def test_sign_matrix_is_orthogonal():
    assert (H4 @ H4.T == 4 * np.eye(4, dtype=np.int64)).all()
    assert (H4[0] == 1).all()


def test_child_coords():
    assert child_coords(TokenCoord(1, 0, 0)) == [
        TokenCoord(0, 0, 0), TokenCoord(0, 0, 1), TokenCoord(0, 1, 0), TokenCoord(0, 1, 1)]
    assert child_coords(TokenCoord(2, 1, 2)) == [
        TokenCoord(1, 2, 4), TokenCoord(1, 2, 5), TokenCoord(1, 3, 4), TokenCoord(1, 3, 5)]
    with pytest.raises(CannotExpandError):
        child_coords(TokenCoord(0, 0, 0))


@pytest.mark.parametrize("parent", [TokenCoord(1, 0, 0), TokenCoord(2, 1, 2), TokenCoord(3, 0, 1)])
def test_children_tile_parent(parent):
    cells = set()
    for kid in child_coords(parent):
        y0, y1, x0, x1 = kid.footprint()
        cells |= {(y, x) for y in range(y0, y1) for x in range(x0, x1)}
    y0, y1, x0, x1 = parent.footprint()
    assert cells == {(y, x) for y in range(y0, y1) for x in range(x0, x1)}
    assert len(cells) == 4 * child_coords(parent)[0].size ** 2


def test_zero_detail_copies_parent():
    kids = expand_token(np.array([0.7, -2.0]), 1.3, np.zeros(2), np.zeros(2), np.zeros(2))
    np.testing.assert_array_equal(kids, np.tile([0.7, -2.0], (4, 1)))


def test_hand_evaluated_expansion():
    # rows (+,+,+,+), (+,-,+,-), (+,+,-,-), (+,-,-,+) applied to (1, 1, 2, 3)
    kids = expand_token(np.array([1.0]), 1.0, np.array([1.0]), np.array([2.0]), np.array([3.0]))
    np.testing.assert_array_equal(kids[:, 0], [7.0, -1.0, -3.0, 1.0])
    assert kids.mean() == 1.0


def test_mean_preservation_random():
    rng = np.random.default_rng(0)
    for _ in range(200):
        p = rng.normal(size=3) * 10
        kids = expand_token(p, abs(rng.normal()), *rng.normal(size=(3, 3)))
        np.testing.assert_allclose(kids.mean(axis=0), p, atol=1e-12, rtol=0)


def test_field_details_are_unit_gaussian():
    field = NoiseField(5, 256, 256, 1)
    eps = np.array([field_details(field, TokenCoord(1, r, c)) for r in range(0, 128, 2) for c in range(0, 128, 2)])
    assert abs(eps.mean()) < 0.05
    assert abs(eps.var() - 1.0) < 0.05


def test_exact_field_block_is_reproduced():
    # parent/2 then scale 1/2 recovers the child-level field values
    field = NoiseField(17, 16, 16, 2)
    grid = MixedGrid.init_grid(2, field)
    promote(grid, grid.coords(), field, 0.5)
    np.testing.assert_allclose(grid.values[1], field.block_values(1), atol=1e-12, rtol=0)
    promote(grid, grid.coords(), field, 0.5)
    np.testing.assert_allclose(grid.values[0], field.fine_values(), atol=1e-12, rtol=0)


def test_empty_promotion_is_noop():
    field = NoiseField(0, 4, 4, 1)
    grid = MixedGrid.init_grid(1, field)
    before = grid.copy()
    promote(grid, [], field, 1.0)
    for a, b in zip(grid.values, before.values):
        np.testing.assert_array_equal(a, b)
    assert grid.coords() == before.coords()


def test_single_promotion_preserves_block_mean():
    field = NoiseField(3, 2, 2, 1)
    grid = MixedGrid.init_grid(1, field)
    before = grid.assemble_canvas().mean()
    promote(grid, [TokenCoord(1, 0, 0)], field, 0.8)
    assert grid.level_counts() == [4, 0]
    assert grid.assemble_canvas().mean() == pytest.approx(before, abs=1e-12)


def test_full_refinement_token_count():
    field = NoiseField(1, 16, 8, 1)
    grid = MixedGrid.init_grid(3, field)
    n = promote_all(grid, 0, field, lambda level: 0.1 * level)
    assert n == 2 + 8 + 32
    assert grid.active_count == 16 * 8
    grid.check_partition()


def test_stale_and_fine_selections_rejected():
    field = NoiseField(1, 4, 4, 1)
    grid = MixedGrid.init_grid(1, field, max_level=1)
    promote(grid, [TokenCoord(1, 0, 0)], field, 1.0)
    with pytest.raises(StaleSelectionError):
        promote(grid, [TokenCoord(1, 0, 0)], field, 1.0)
    with pytest.raises(CannotExpandError):
        promote(grid, [TokenCoord(0, 0, 0)], field, 1.0)
