import numpy as np
import pytest

from onebit_gc.rng import Purpose, reseed, stream


def test_streams_are_reproducible():
    a = stream(3, Purpose.QUANTIZE, t=10, worker=4).random(5)
    b = stream(3, Purpose.QUANTIZE, t=10, worker=4).random(5)
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize(
    "other",
    [(4, Purpose.QUANTIZE, 10, 4), (3, Purpose.STRAGGLER, 10, 4), (3, Purpose.QUANTIZE, 11, 4), (3, Purpose.QUANTIZE, 10, 5)],
)
def test_streams_differ_in_every_coordinate(other):
    base = stream(3, Purpose.QUANTIZE, t=10, worker=4).random(4)
    seed, purpose, t, worker = other
    assert not np.array_equal(base, stream(seed, purpose, t=t, worker=worker).random(4))


def test_negative_arguments_rejected():
    with pytest.raises(ValueError):
        stream(-1, Purpose.DATA)


def test_reseed_matches_fresh_stream():
    gen = stream(0, Purpose.DATA)
    gen.random(3)
    for args in [(3, Purpose.QUANTIZE, 10, 4), (0, Purpose.STRAGGLER, 0, 0), (2**40, Purpose.INIT, 7, 99)]:
        np.testing.assert_array_equal(reseed(gen, *args).random(9), stream(*args).random(9))
