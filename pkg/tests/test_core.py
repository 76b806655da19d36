import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from embcompress.core import (
    Container,
    FeatureSpace,
    HashFamily,
    MERSENNE_61,
    baseline_bytes,
    compression_ratio,
    coo_bytes,
    csr_bytes,
    dense_bytes,
    max_sparse_nnz,
    sparse_bytes,
)
from embcompress.core import checkpoint
from embcompress.core.checkpoint import CheckpointError
from embcompress.core.errors import IdOutOfRange, ParseError, check_ids
from embcompress.core.sparse import SparseRows


# -- feature space ---------------------------------------------------------------


def test_feature_space_offsets():
    space = FeatureSpace((3, 5, 2))
    assert space.k == 3 and space.n == 10
    assert space.offsets.tolist() == [0, 3, 8, 10]
    assert space.field_of([0, 2, 3, 7, 8, 9]).tolist() == [0, 0, 1, 1, 2, 2]
    assert space.to_global(1, [0, 4]).tolist() == [3, 7]


@given(st.lists(st.integers(1, 50), min_size=1, max_size=8))
def test_every_global_id_maps_to_one_field(cards):
    space = FeatureSpace(tuple(cards))
    ids = np.arange(space.n)
    fields = space.field_of(ids)
    assert np.array_equal(np.bincount(fields, minlength=space.k), cards)
    for f in range(space.k):
        assert np.array_equal(space.to_global(f, np.arange(cards[f])), ids[fields == f])


def test_feature_space_rejects_bad_input():
    with pytest.raises(ValueError):
        FeatureSpace(())
    with pytest.raises(ValueError):
        FeatureSpace((3, 0))
    with pytest.raises(ValueError):
        FeatureSpace((3,)).to_global(0, [3])
    with pytest.raises(IdOutOfRange):
        FeatureSpace((3, 4)).check_ids([0, 7])


def test_check_ids_reports_position():
    with pytest.raises(IdOutOfRange) as err:
        check_ids([1, 2, -1], 5)
    assert "-1" in str(err.value)


# -- hashing ---------------------------------------------------------------------


def _bigint_hash(seed, which, x, m, count=4):
    rng = np.random.Generator(np.random.PCG64(seed))
    a = [int(v) for v in rng.integers(1, MERSENNE_61, size=count, dtype=np.uint64)]
    b = [int(v) for v in rng.integers(0, MERSENNE_61, size=count, dtype=np.uint64)]
    return ((a[which] * (x % (1 << 64)) + b[which]) % MERSENNE_61) % m


@settings(max_examples=200)
@given(st.integers(-(1 << 63), (1 << 63) - 1), st.integers(0, 3), st.integers(1, 1 << 40), st.integers(0, 1 << 32))
def test_hash_matches_bigint_arithmetic(x, which, m, seed):
    assert HashFamily(seed)(np.array([x]), which, m)[0] == _bigint_hash(seed, which, x, m)


def test_hash_frozen_vectors():
    h = HashFamily(0, 2)
    assert h(np.arange(5), 0, 1000).tolist() == [502, 785, 117, 400, 732]
    assert h(np.array([1 << 62, -1]), 1, 97).tolist() == [22, 38]


def test_hash_single_bucket_and_determinism():
    x = np.arange(1000)
    assert np.all(HashFamily(5)(x, 2, 1) == 0)
    assert np.array_equal(HashFamily(5)(x, 1, 77), HashFamily(5)(x, 1, 77))
    assert not np.array_equal(HashFamily(5)(x, 1, 77), HashFamily(6)(x, 1, 77))


def test_hash_errors():
    with pytest.raises(ValueError):
        HashFamily(0)(np.arange(3), 0, 0)
    with pytest.raises(ValueError):
        HashFamily(0, 2)(np.arange(3), 2, 10)


def test_hash_uniformity_chi_square():
    x = np.random.default_rng(11).integers(0, 1 << 40, size=100_000)
    counts = np.bincount(HashFamily(0)(x, 0, 64), minlength=64)
    assert stats.chisquare(counts).pvalue > 0.001


# -- memory model ----------------------------------------------------------------


def test_compression_ratio_examples():
    assert compression_ratio(1000, 250) == 4.0
    assert compression_ratio(dense_bytes(10, 16, 4), dense_bytes(10, 16, 1)) == 4.0
    assert compression_ratio(777, 777) == 1.0
    with pytest.raises(ValueError):
        compression_ratio(10, 0)


def test_sparse_bytes_examples():
    assert sparse_bytes(3, 4, 5) == ("csr", 56)
    assert coo_bytes(5) == 60
    assert sparse_bytes(1000, 16, 10) == ("coo", 120)
    fmt, nbytes = sparse_bytes(10, 16, 160)
    assert nbytes > dense_bytes(10, 16)


def test_sparse_bytes_is_min_by_brute_force():
    for rows in range(1, 9):
        for cols in range(1, 6):
            for nnz in range(rows * cols + 1):
                csr = nnz * 8 + (rows + 1) * 4
                coo = nnz * 12
                fmt, got = sparse_bytes(rows, cols, nnz)
                assert got == min(csr, coo)
                assert fmt == ("csr" if csr <= coo else "coo")


@given(st.integers(1, 200), st.integers(1, 32), st.integers(0, 40_000))
def test_max_sparse_nnz_is_largest_fit(rows, cols, budget):
    fmt, nnz = max_sparse_nnz(rows, cols, budget)
    if nnz < 0:
        assert coo_bytes(1) > budget
        return
    assert sparse_bytes(rows, cols, nnz)[1] <= budget
    if nnz < rows * cols:
        assert sparse_bytes(rows, cols, nnz + 1)[1] > budget


def test_baseline_bytes():
    assert baseline_bytes(FeatureSpace((10, 20)), 16) == 30 * 16 * 4
    assert csr_bytes(2, 3) == 3 * 8 + 12


# -- sparse rows -----------------------------------------------------------------


@pytest.mark.parametrize("fmt", ["csr", "coo"])
def test_sparse_rows_round_trip(fmt):
    rng = np.random.default_rng(0)
    dense = rng.standard_normal((7, 5)).astype(np.float32)
    dense[rng.random(dense.shape) < 0.6] = 0
    sp = SparseRows.from_dense(dense, fmt=fmt)
    assert sp.fmt == fmt and sp.nnz == np.count_nonzero(dense)
    assert np.array_equal(sp.to_dense(), dense)
    ids = np.array([6, 0, 3, 3])
    assert np.array_equal(sp.gather(ids), dense[ids])
    assert sp.nbytes() == sum(a.nbytes for a in sp.arrays().values())
    assert sp.nbytes() == (csr_bytes(7, sp.nnz) if fmt == "csr" else coo_bytes(sp.nnz))


# -- checkpoint container ------------------------------------------------------


def test_container_round_trip_and_payload():
    arrays = {"w": np.arange(12, dtype=np.float32).reshape(3, 4), "c": np.arange(5, dtype=np.uint8)}
    c = Container("full", {"n": 3, "d": 4}, arrays)
    back = checkpoint.loads(checkpoint.dumps(c))
    assert back.kind == "full" and back.meta == {"n": 3, "d": 4}
    for k, v in arrays.items():
        assert back.arrays[k].dtype == v.dtype and np.array_equal(back.arrays[k], v)
    assert c.payload_bytes == 48 + 5
    raw = checkpoint.dumps(c)
    assert raw[:4] == b"EMSQ"
    assert int.from_bytes(raw[4:8], "little") == checkpoint.VERSION


def test_container_rejects_garbage():
    with pytest.raises(CheckpointError):
        checkpoint.load(io.BytesIO(b"NOPE" + bytes(20)))
    good = checkpoint.dumps(Container("full", {}, {"w": np.zeros(4, np.float32)}))
    with pytest.raises(CheckpointError):
        checkpoint.loads(good[:-3])


def test_matrix_files(tmp_path):
    m = np.random.default_rng(0).standard_normal((6, 3)).astype(np.float32)
    assert np.array_equal(checkpoint.load_matrix(checkpoint.save_matrix(m, tmp_path / "m.emsq")), m)
    raw = tmp_path / "m.f32"
    m.tofile(raw)
    (tmp_path / "m.f32.shape").write_text("6 3\n")
    assert np.array_equal(checkpoint.load_matrix(raw), m)


def test_parse_error_carries_line():
    err = ParseError("bad label", 7)
    assert err.line == 7 and "line 7" in str(err)
