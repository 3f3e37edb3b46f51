import numpy as np

from sparsediff.rng import GRAPH, NOISE, run_seed, stream


def test_streams_are_reproducible_and_independent():
    assert np.array_equal(stream(1, GRAPH).random(5), stream(1, GRAPH).random(5))
    assert not np.array_equal(stream(1, GRAPH).random(5), stream(1, NOISE).random(5))
    assert not np.array_equal(stream(1, NOISE, 0).random(5), stream(1, NOISE, 1).random(5))


def test_run_seed_frozen_derivation():
    expected = np.random.SeedSequence(7, spawn_key=(128, 3)).generate_state(1, np.uint64)[0]
    assert run_seed(7, 128, 3) == int(expected)
    assert len({run_seed(0, n, r) for n in (128, 512) for r in range(50)}) == 100
    # frozen value pins the derivation across releases
    assert run_seed(5, 16, 0) == 4147181539217398538


def test_stream_is_philox():
    assert isinstance(stream(0, 1).bit_generator, np.random.Philox)
