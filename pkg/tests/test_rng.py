import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hetdetect import _kernels_py, rng
from hetdetect._backend import BACKEND, load

# Random123 known-answer vectors for Philox4x32-10
KAT = [
    ((0, 0, 0, 0), (0, 0), (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
    ((0xFFFFFFFF,) * 4, (0xFFFFFFFF, 0xFFFFFFFF), (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)),
    (
        (0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344),
        (0xA4093822, 0x299F31D0),
        (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1),
    ),
]


def backends():
    out = [_kernels_py]
    try:
        out.append(load("cython"))
    except ImportError:
        pass
    return out


@pytest.mark.parametrize("kern", backends(), ids=lambda k: k.BACKEND)
@pytest.mark.parametrize("ctr,key,expected", KAT)
def test_philox_known_answers(kern, ctr, key, expected):
    assert kern.philox4x32(ctr, key) == expected


def test_philox_matches_randomgen():
    randomgen = pytest.importorskip("randomgen")
    key = (0x12345678, 0x9ABCDEF0)
    ref = randomgen.Philox(number=4, width=32, counter=0, key=key[0] | (key[1] << 32))
    raw = [int(x) for x in ref.random_raw(4 * 5)]
    # randomgen increments the counter before each block
    ours = [w for c in range(1, 6) for w in _kernels_py.philox4x32((c, 0, 0, 0), key)]
    assert raw == ours


def test_backends_agree():
    kerns = backends()
    if len(kerns) < 2:
        pytest.skip("compiled extension not built")
    py, cy = kerns
    np.testing.assert_array_equal(py.uniform_block(9, 1, 5, 40, 17), cy.uniform_block(9, 1, 5, 40, 17))
    np.testing.assert_array_equal(py.normal_block(9, 0, 2**33, 40, 17), cy.normal_block(9, 0, 2**33, 40, 17))
    mean = np.linspace(-1, 1, 13)
    scale = np.linspace(0.5, 3, 13)
    np.testing.assert_allclose(py.sumsq_block(4, 0, 0, 500, mean, scale), cy.sumsq_block(4, 0, 0, 500, mean, scale), rtol=1e-13)
    p = np.concatenate(([0.0], np.cumsum(np.arange(1.0, 60.0) ** 2)))
    p4 = np.concatenate(([0.0], np.cumsum(np.arange(1.0, 60.0) ** 4)))
    np.testing.assert_allclose(py.sparse_rate_scan(p, p4, 50), cy.sparse_rate_scan(p, p4, 50), rtol=1e-13)


def test_backend_selected():
    assert BACKEND in ("cython", "python")


def test_uniforms_open_interval_and_moments():
    u = rng.uniforms(3, 0, 0, 20000, 5)
    assert u.min() > 0 and u.max() < 1
    assert abs(u.mean() - 0.5) < 4 * np.sqrt(1 / 12 / u.size)


def test_normals_moments():
    z = rng.normals(1, 0, 0, 100000, 2)
    assert abs(z.mean()) < 4 / np.sqrt(z.size)
    assert abs(z.var() - 1) < 0.02


def test_streams_are_distinct():
    assert not np.array_equal(rng.normals(1, 0, 0, 3, 3), rng.normals(1, 1, 0, 3, 3))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**64 - 1), st.integers(0, 10**6), st.integers(1, 50), st.integers(1, 6))
def test_draws_do_not_depend_on_blocking(seed, rep0, nrep, ncol):
    whole = rng.normals(seed, 0, rep0, nrep, ncol)
    rows = np.vstack([rng.normals(seed, 0, rep0 + i, 1, ncol) for i in range(nrep)])
    np.testing.assert_array_equal(whole, rows)
    # a longer row starts with the shorter row's draws
    np.testing.assert_array_equal(rng.normals(seed, 0, rep0, nrep, ncol + 3)[:, :ncol], whole)


@pytest.mark.parametrize("workers", [1, 2, 8])
def test_replicate_map_ignores_worker_count(workers):
    f = lambda r0, m: rng.sumsq(5, 0, r0, m, np.zeros(4), np.ones(4))  # noqa: E731
    base = rng.replicate_map(f, 20000, workers=1, chunk=1000)
    np.testing.assert_array_equal(rng.replicate_map(f, 20000, workers=workers, chunk=1000), base)


def test_seed_range_checked():
    with pytest.raises((ValueError, OverflowError)):
        rng.normals(-1, 0, 0, 1, 1)
