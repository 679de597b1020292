import numpy as np
import pytest

from hselab.rng import RandomStream, bulk_uniforms, scaled_index, stream_key, trial_keys


def test_same_seed_same_sequence():
    a = RandomStream(1234, "role", 9)
    b = RandomStream(1234, "role", 9)
    assert [a.uniform() for _ in range(20)] == [b.uniform() for _ in range(20)]


def test_different_ids_give_different_sequences():
    draws = {
        ids: tuple(RandomStream(7, *ids).uniforms(4).tolist())
        for ids in [("alice", 0), ("alice", 1), ("bob", 0), ("eve", 0), (0, "alice")]
    }
    assert len(set(draws.values())) == len(draws)


def test_substream_matches_direct_construction():
    direct = RandomStream(5, "alice", 3)
    derived = RandomStream(5).substream("alice").substream(3)
    assert direct.key == derived.key
    assert direct.uniform() == derived.uniform()


def test_substream_does_not_advance_parent():
    parent = RandomStream(5)
    first = RandomStream(5).uniform()
    parent.substream("x")
    assert parent.uniform() == first


def test_skip_equals_discarding():
    a = RandomStream(99, 1)
    b = RandomStream(99, 1)
    for _ in range(5):
        a.uniform()
    b.skip(5)
    assert a.uniform() == b.uniform()


def test_uniforms_match_sequential():
    a = RandomStream(3, "z")
    b = RandomStream(3, "z")
    assert a.uniforms(10).tolist() == [b.uniform() for _ in range(10)]


def test_bulk_uniforms_match_per_stream():
    trials = np.arange(10, 20, dtype=np.uint64)
    keys = trial_keys(123, "bob", trials)
    for counter in (0, 1, 7):
        bulk = bulk_uniforms(keys, counter)
        for i, t in enumerate(range(10, 20)):
            stream = RandomStream(123, "bob", t)
            stream.skip(counter)
            assert bulk[i] == stream.uniform()


def test_trial_keys_match_scalar_keys():
    trials = np.arange(0, 5, dtype=np.uint64)
    keys = trial_keys(42, "alice", trials)
    for i, t in enumerate(range(5)):
        assert int(keys[i]) == stream_key(42, "alice", t)


def test_values_lie_in_unit_interval():
    draws = RandomStream(0).uniforms(10_000)
    assert np.all(draws >= 0.0) and np.all(draws < 1.0)


def test_uniformity_coarse():
    draws = RandomStream(2024).uniforms(100_000)
    counts, _ = np.histogram(draws, bins=10, range=(0.0, 1.0))
    expected = 10_000
    assert np.all(np.abs(counts - expected) < 4 * np.sqrt(expected))


def test_randint_range_and_coverage():
    stream = RandomStream(1)
    draws = [stream.randint(6) for _ in range(5000)]
    assert set(draws) == set(range(6))


def test_scaled_index_scalar_and_array_agree():
    u = RandomStream(8).uniforms(1000)
    array_result = scaled_index(u, 7)
    assert array_result.tolist() == [scaled_index(float(v), 7) for v in u]
    assert array_result.min() >= 0 and array_result.max() <= 6


def test_bad_stream_ids_rejected():
    with pytest.raises(TypeError):
        RandomStream(0, 1.5)
    with pytest.raises(TypeError):
        RandomStream(0, True)


def test_randint_rejects_nonpositive():
    with pytest.raises(ValueError):
        RandomStream(0).randint(0)
