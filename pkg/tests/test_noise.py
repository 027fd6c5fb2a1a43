import numpy as np
import pytest

from msde.noise import (
    SUBSTREAM_AUX,
    SUBSTREAM_LIMIT,
    SUBSTREAM_W1,
    SUBSTREAM_W2,
    NoiseError,
    NoisePath,
)


def test_same_address_same_numbers():
    a = NoisePath(seed=42, stream_id=3).normals(SUBSTREAM_W1, 7, (5, 2))
    b = NoisePath(seed=42, stream_id=3).normals(SUBSTREAM_W1, 7, (5, 2))
    assert np.array_equal(a, b)


def test_addresses_are_independent_coordinates():
    base = NoisePath(seed=42, stream_id=3)
    ref = base.normals(SUBSTREAM_W1, 7, (4,))
    assert not np.array_equal(ref, NoisePath(seed=43, stream_id=3).normals(SUBSTREAM_W1, 7, (4,)))
    assert not np.array_equal(ref, NoisePath(seed=42, stream_id=4).normals(SUBSTREAM_W1, 7, (4,)))
    assert not np.array_equal(ref, base.normals(SUBSTREAM_W2, 7, (4,)))
    assert not np.array_equal(ref, base.normals(SUBSTREAM_W1, 8, (4,)))


def test_substream_tags_are_distinct():
    assert len({SUBSTREAM_W1, SUBSTREAM_W2, SUBSTREAM_LIMIT, SUBSTREAM_AUX}) == 4


def test_increment_variance_scaling():
    noise = NoisePath(seed=0, stream_id=0)
    dt = 0.04
    z = noise.increments(SUBSTREAM_W1, 0, (200_000,), dt)
    assert abs(z.std() - np.sqrt(dt)) < 3.0 * np.sqrt(dt) / np.sqrt(2 * z.size)
    assert abs(z.mean()) < 3.0 * np.sqrt(dt / z.size)


@pytest.mark.parametrize("base_div", [2, 3, 4, 8])
def test_coarse_increment_is_exact_sum_of_fine(base_div):
    noise = NoisePath(seed=9, stream_id=1)
    dt = 0.01
    for step in range(5):
        coarse = noise.coarse_increment(SUBSTREAM_W1, step, (3, 2), dt, base_div=base_div)
        total = np.zeros((3, 2))
        for j in range(base_div):
            total += noise.increments(
                SUBSTREAM_W1, step * base_div + j, (3, 2), dt / base_div
            )
        assert np.array_equal(coarse, total)


def test_coarse_increment_div_one_is_plain_block():
    noise = NoisePath(seed=9, stream_id=1)
    a = noise.coarse_increment(SUBSTREAM_W2, 4, (6,), 0.5, base_div=1)
    b = noise.increments(SUBSTREAM_W2, 4, (6,), 0.5)
    assert np.array_equal(a, b)


def test_batched_rows_differ():
    z = NoisePath(seed=5, stream_id=0).normals(SUBSTREAM_W1, 0, (8, 3))
    assert len({tuple(row) for row in z}) == 8


def test_with_stream_keeps_seed():
    n = NoisePath(seed=11, stream_id=2).with_stream(9)
    assert n.seed == 11 and n.stream_id == 9


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(seed=-1, stream_id=0),
        dict(seed=2**64, stream_id=0),
        dict(seed=0.5, stream_id=0),
        dict(seed=0, stream_id=-3),
    ],
)
def test_bad_addresses_rejected(kwargs):
    with pytest.raises(NoiseError):
        NoisePath(**kwargs)


def test_bad_increment_arguments_rejected():
    noise = NoisePath(seed=0, stream_id=0)
    with pytest.raises(NoiseError):
        noise.increments(SUBSTREAM_W1, 0, (2,), 0.0)
    with pytest.raises(NoiseError):
        noise.coarse_increment(SUBSTREAM_W1, 0, (2,), 0.1, base_div=0)
    with pytest.raises(NoiseError):
        noise.normals(-1, 0, (2,))
