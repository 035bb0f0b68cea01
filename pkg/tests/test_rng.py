import numpy as np

from hybridfem import SplitMix64


def test_known_first_outputs_for_seed_zero():
    # published SplitMix64 sequence for seed 0
    rng = SplitMix64(0)
    assert rng.next_u64() == 0xE220A8397B1DCDAF
    assert rng.next_u64() == 0x6E789E6AA1B965F4
    assert rng.next_u64() == 0x06C45D188009454F


def test_scalar_and_vector_paths_agree():
    # the pure-int and numpy-uint64 pipelines must produce one stream
    a = SplitMix64(987654321)
    b = SplitMix64(987654321)
    scalar = np.array([a.uniform() for _ in range(100)])
    vector = b.uniforms(100)
    assert np.array_equal(scalar, vector)
    # and the stream continues identically after a vectorized block
    assert a.uniform() == b.uniform()


def test_uniform_range_and_determinism():
    rng = SplitMix64(7)
    xs = rng.uniforms(10000, 0.25, 0.75)
    assert np.all((xs >= 0.25) & (xs < 0.75))
    assert np.array_equal(xs, SplitMix64(7).uniforms(10000, 0.25, 0.75))


def test_permutation_is_valid_and_seeded():
    rng = SplitMix64(3)
    p = rng.permutation(50)
    assert sorted(p.tolist()) == list(range(50))
    assert np.array_equal(p, SplitMix64(3).permutation(50))
    assert not np.array_equal(p, SplitMix64(4).permutation(50))


def test_randint_below_covers_range():
    rng = SplitMix64(11)
    draws = {rng.randint_below(4) for _ in range(200)}
    assert draws == {0, 1, 2, 3}
