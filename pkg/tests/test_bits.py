"""The mixing layer: determinism, range, uniformity, backend agreement."""

import numpy as np

from cssp_lab._bits import (
    GOLDEN,
    MASK64,
    mix64,
    prf64,
    stream64,
    stream64_array,
    unit_from_bits,
)


def test_mix64_is_a_permutation_on_samples(rng):
    vals = rng.integers(0, 2**64, size=20000, dtype=np.uint64)
    out = {mix64(int(v)) for v in vals}
    assert len(out) == len(set(vals.tolist()))


def test_stream64_array_matches_scalar(rng):
    for key in (0, 1, 0xDEADBEEF, MASK64):
        vec = stream64_array(key, 257)
        for i in (0, 1, 2, 127, 256):
            assert int(vec[i]) == stream64(key, i)


def test_prf64_is_deterministic_and_keyed():
    k = (1, 2, 3, 4)
    a = prf64(*k, msg=99, tag=1, index=0)
    assert a == prf64(*k, msg=99, tag=1, index=0)
    assert a != prf64(*k, msg=100, tag=1, index=0)
    assert a != prf64(*k, msg=99, tag=2, index=0)
    assert a != prf64(*k, msg=99, tag=1, index=1)
    assert a != prf64(5, 2, 3, 4, msg=99, tag=1, index=0)


def test_unit_from_bits_stays_inside_open_interval():
    assert 0.0 < unit_from_bits(0) < 1.0
    assert 0.0 < unit_from_bits(MASK64) < 1.0
    assert unit_from_bits(0) == 2.0**-53
    # the naive (n + 0.5) / 2^64 rounds to 1.0 up here; ours must not
    for bits in range(MASK64 - 4096, MASK64 + 1, 64):
        assert unit_from_bits(bits) < 1.0


def test_prf_stream_uniformity():
    # KS distance of 1e5 outputs to U(0,1) below the 1% critical value.
    n = 100_000
    u = np.sort((stream64_array(31337, n).astype(np.float64) + 0.5) * 2.0**-64)
    steps = np.arange(1, n + 1) / n
    ks = max(np.max(steps - u), np.max(u - (steps - 1 / n)))
    assert ks < 1.6276 / np.sqrt(n)


def test_golden_increment_streams_do_not_collide():
    a = stream64_array(7, 4096)
    b = stream64_array(8, 4096)
    assert not np.intersect1d(a, b).size
    assert GOLDEN % 2 == 1  # odd increment: the stream never cycles early
