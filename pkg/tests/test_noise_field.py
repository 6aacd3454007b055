import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fresco import _kernels
from fresco.errors import BoundsError
from fresco.noise_field import FieldCoord, NoiseField

u64 = st.integers(min_value=0, max_value=2**64 - 1)


@given(seed=u64, y=st.integers(0, 31), x=st.integers(0, 31), d=st.integers(0, 3))
def test_hash_is_pure(seed, y, x, d):
    field = NoiseField(seed, 32, 32, 4)
    c = FieldCoord(y, x, d)
    assert field.hash_coord(c) == field.hash_coord(c)
    assert field.sample_unit_gaussian(c) == field.sample_unit_gaussian(c)


def test_neighbouring_channel_digests_differ():
    field = NoiseField(12345, 4, 4, 2)
    assert field.hash_coord(FieldCoord(0, 0, 0)) != field.hash_coord(FieldCoord(0, 0, 1))


def test_seed_bit_flip_avalanche():
    rng = np.random.default_rng(0)
    seeds = rng.integers(0, 2**63, size=10_000, dtype=np.uint64)
    bits = rng.integers(0, 64, size=seeds.size).astype(np.uint64)
    flipped = seeds ^ (np.uint64(1) << bits)
    y, x, d = np.uint64(5), np.uint64(0), np.uint64(0)
    a = _kernels.digest_np(seeds, y, x, d)
    b = _kernels.digest_np(flipped, y, x, d)
    diff = np.bitwise_xor(a, b)
    popcount = np.unpackbits(diff.view(np.uint8)).reshape(-1, 64).sum(axis=1)
    assert abs(popcount.mean() - 32.0) <= 2.0


def test_vectorized_hash_matches_scalar_reference():
    rng = np.random.default_rng(1)
    seeds = rng.integers(0, 2**63, size=50, dtype=np.uint64)
    for s in seeds:
        ys = rng.integers(0, 1000, size=4, dtype=np.uint64)
        got = _kernels.digest_np(s, ys, np.uint64(3), np.uint64(1))
        want = [_kernels.digest_int(int(s), int(v), 3, 1) for v in ys]
        assert [int(g) for g in got] == want


def test_bounds_are_enforced():
    field = NoiseField(0, 4, 4, 1)
    with pytest.raises(BoundsError):
        field.hash_coord(FieldCoord(4, 0, 0))
    with pytest.raises(BoundsError):
        field.sample_block(1, 2, 0, 0)
    with pytest.raises(BoundsError):
        field.values_at([0], [0], [1])
    with pytest.raises(ValueError):
        NoiseField(2**64, 4, 4, 1)


def test_moments_over_a_million_coords():
    values = NoiseField(3, 1000, 1000, 1).fine_values().ravel()
    assert abs(values.mean()) < 0.005
    assert abs(values.var() - 1.0) < 0.01


def test_horizontal_neighbours_uncorrelated():
    f = NoiseField(11, 1000, 101, 1).fine_values()[..., 0]
    a, b = f[:, :-1].ravel(), f[:, 1:].ravel()
    assert a.size == 100_000
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.02


def test_block_level_zero_is_the_fine_sample():
    field = NoiseField(5, 8, 8, 2)
    for y, x, d in [(0, 0, 0), (3, 7, 1), (7, 2, 0)]:
        assert field.sample_block(0, y, x, d) == field.sample_unit_gaussian(FieldCoord(y, x, d))


def test_level_one_block_from_four_scalar_samples():
    field = NoiseField(99, 8, 8, 1)
    for r, c in [(0, 0), (1, 2), (3, 3)]:
        cells = [field.sample_unit_gaussian(FieldCoord(2 * r + i, 2 * c + j, 0)) for i in (0, 1) for j in (0, 1)]
        assert field.sample_block(1, r, c, 0) == pytest.approx(sum(cells) / 2, abs=1e-12)


def test_level_two_block_variance():
    blocks = NoiseField(21, 4 * 317, 4 * 316, 1).block_values(2).ravel()
    assert blocks.size >= 100_000
    assert abs(blocks.var() - 1.0) < 0.02


def test_block_values_agree_with_sample_block():
    field = NoiseField(8, 16, 16, 3)
    vals = field.block_values(2)
    for r in range(4):
        for c in range(4):
            for d in range(3):
                assert vals[r, c, d] == pytest.approx(field.sample_block(2, r, c, d), abs=1e-12)


def test_fine_and_coarse_views_share_the_realization():
    # a level-1 block over 4 iid cells correlates 1/2 with each of them
    f = NoiseField(2, 632, 632, 1)
    fine = f.fine_values()[0::2, 0::2, 0].ravel()
    coarse = f.block_values(1)[..., 0].ravel()
    assert coarse.size >= 99_000
    assert abs(np.corrcoef(fine, coarse)[0, 1] - 0.5) < 0.02


def test_values_at_matches_fine_values():
    field = NoiseField(4, 16, 16, 2)
    ys, xs, ds = np.array([0, 5, 15]), np.array([1, 9, 15]), np.array([0, 1, 1])
    fine = field.fine_values()
    np.testing.assert_array_equal(field.values_at(ys, xs, ds), fine[ys, xs, ds])


def test_fine_values_read_only():
    with pytest.raises(ValueError):
        NoiseField(0, 2, 2, 1).fine_values()[0, 0, 0] = 1.0


def test_dict_round_trip():
    field = NoiseField(2**63 + 5, 8, 4, 2)
    assert NoiseField.from_dict(field.to_dict()) == field


@settings(max_examples=25)
@given(seed=u64)
def test_numpy_and_numba_fields_agree(seed):
    if not _kernels.USE_NUMBA:
        pytest.skip("numba backend disabled")
    a = _kernels.field_block_np(seed, 3, 5, 6, 7, 2)
    b = _kernels._field_block_nb(np.uint64(seed), 3, 5, 6, 7, 2)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)
