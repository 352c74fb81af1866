import numpy as np
import numba as nb

from rwre import rng


def test_uniforms_are_deterministic_and_open():
    key = rng.derive_key(7, rng.DOMAIN_STREAMS)
    a = rng.hash_uniform(key, np.arange(-1000, 1000))
    b = rng.hash_uniform(key, np.arange(-1000, 1000))
    assert np.array_equal(a, b)
    assert a.min() > 0.0 and a.max() < 1.0


def test_uniform_moments():
    key = rng.derive_key(3, rng.DOMAIN_ENVIRONMENT)
    u = rng.hash_uniform(key, np.arange(200_000))
    assert abs(u.mean() - 0.5) < 4 * np.sqrt(1 / 12 / u.size)
    assert abs(u.var() - 1 / 12) < 0.002


def test_domains_and_seeds_separate():
    c = np.arange(100)
    u1 = rng.hash_uniform(rng.derive_key(1, rng.DOMAIN_STREAMS), c)
    u2 = rng.hash_uniform(rng.derive_key(1, rng.DOMAIN_ENVIRONMENT), c)
    u3 = rng.hash_uniform(rng.derive_key(2, rng.DOMAIN_STREAMS), c)
    assert not np.array_equal(u1, u2)
    assert not np.array_equal(u1, u3)


@nb.njit
def _first_uniforms(base, n_streams, n):
    out = np.empty((n_streams, n))
    for s in range(n_streams):
        key = rng.nb_stream_key(base, s)
        for i in range(n):
            out[s, i] = rng.nb_uniform(key, i)
    return out


def test_numba_matches_numpy():
    base = rng.derive_key(11, rng.DOMAIN_STREAMS)
    keys = rng.stream_keys(11, np.arange(5))
    got = _first_uniforms(base, 5, 8)
    for s in range(5):
        assert np.array_equal(got[s], rng.hash_uniform(keys[s], np.arange(8)))


@nb.njit
def _normals(key, n):
    out = np.empty(2 * n)
    ctr = 0
    for i in range(n):
        z0, z1, ctr = rng.nb_normal_pair(key, ctr)
        out[2 * i] = z0
        out[2 * i + 1] = z1
    return out


def test_polar_normals():
    z = _normals(rng.stream_keys(5, np.array([0]))[0], 100_000)
    assert abs(z.mean()) < 4 / np.sqrt(z.size)
    assert abs(z.var() - 1.0) < 0.02
    assert abs(np.mean(z ** 4) - 3.0) < 0.1


def test_run_chunked_is_thread_invariant():
    def work(start, count):
        return (start, count, float(rng.hash_uniform(rng.stream_keys(1, [start])[0], [0])[0]))

    serial = rng.run_chunked(work, 10_000, threads=1, chunk=1000)
    parallel = rng.run_chunked(work, 10_000, threads=4, chunk=1000)
    assert serial == parallel
    assert [b[1] for b in serial] == [1000] * 10
