import numpy as np
import pytest
from hypothesis import given, strategies as st

from cale.embeddings import (
    EmbeddingMatrix,
    cosine_distance,
    cosine_similarity,
    mean_vector,
    read_embeddings,
    unit_rows,
    write_embeddings,
)
from cale.errors import FormatError

vectors = st.lists(
    st.floats(min_value=-1e3, max_value=1e3, allow_nan=False), min_size=2, max_size=8
).filter(lambda v: any(abs(x) > 1e-6 for x in v))


def test_cosine_identity():
    assert cosine_similarity(np.array([1.0, 0.0]), np.array([1.0, 0.0])) == 1.0


def test_cosine_orthogonal():
    assert cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0


def test_cosine_derived_value():
    # 4 / (sqrt(5) * sqrt(5))
    assert cosine_similarity(np.array([1.0, 2.0]), np.array([2.0, 1.0])) == pytest.approx(0.8, rel=1e-12)


def test_cosine_zero_vector_rejected():
    with pytest.raises(ValueError, match="zero vector"):
        cosine_similarity(np.zeros(3), np.ones(3))


def test_cosine_shape_mismatch():
    with pytest.raises(ValueError):
        cosine_similarity(np.ones(3), np.ones(4))


def test_cosine_distance_self_is_zero_exactly():
    v = np.array([0.3, -1.7, 2.2])
    assert cosine_distance(v, v) == 0.0


@given(u=vectors, alpha=st.floats(min_value=1e-3, max_value=1e3), beta=st.floats(min_value=1e-3, max_value=1e3))
def test_cosine_scale_invariance(u, alpha, beta):
    u = np.array(u)
    v = u[::-1].copy() + 1.0
    if not np.any(v):
        return
    base = cosine_similarity(u, v)
    scaled = cosine_similarity(alpha * u, beta * v)
    assert scaled == pytest.approx(base, abs=1e-9)


@given(u=vectors)
def test_cosine_symmetry(u):
    u = np.array(u)
    v = np.roll(u, 1) + 0.5
    if not np.any(v):
        return
    assert cosine_similarity(u, v) == cosine_similarity(v, u)


def test_mean_vector_examples():
    m = EmbeddingMatrix(ids=["a", "b", "c"], rows=np.array([[1, 2], [3, 4], [5, 0]], dtype=np.float32))
    np.testing.assert_allclose(mean_vector(["a"], m), [1, 2])
    np.testing.assert_allclose(mean_vector(["a", "b", "c"], m), [3, 2])
    two = EmbeddingMatrix(ids=["a", "b"], rows=np.array([[1, 0], [0, 1]], dtype=np.float32))
    np.testing.assert_allclose(mean_vector(["a", "b"], two), [0.5, 0.5])


def test_mean_vector_empty_set():
    m = EmbeddingMatrix(ids=["a"], rows=np.ones((1, 2), dtype=np.float32))
    with pytest.raises(ValueError):
        mean_vector([], m)


def test_matrix_validation():
    with pytest.raises(ValueError, match="duplicate"):
        EmbeddingMatrix(ids=["a", "a"], rows=np.ones((2, 2), dtype=np.float32))
    with pytest.raises(ValueError, match="all-zero"):
        EmbeddingMatrix(ids=["a", "b"], rows=np.array([[1, 1], [0, 0]], dtype=np.float32))
    with pytest.raises(ValueError):
        EmbeddingMatrix(ids=["a"], rows=np.ones((2, 2), dtype=np.float32))


def test_round_trip_2x3(tmp_path):
    m = EmbeddingMatrix(ids=["x", "y"], rows=np.array([[1, 2, 3], [4, 5, 6]], dtype=np.float32))
    path = tmp_path / "m.emb"
    write_embeddings(m, path)
    back = read_embeddings(path)
    assert back.ids == ["x", "y"]
    assert np.array_equal(back.rows, m.rows)


def test_round_trip_bit_identical(tmp_path, rng):
    for k in range(5):
        n, d = int(rng.integers(1, 40)), int(rng.integers(1, 12))
        rows = rng.normal(size=(n, d)).astype(np.float32)
        rows[np.all(rows == 0, axis=1)] = 1.0
        m = EmbeddingMatrix(ids=[f"id{i}" for i in range(n)], rows=rows)
        path = tmp_path / f"m{k}.emb"
        write_embeddings(m, path)
        back = read_embeddings(path)
        assert back.rows.tobytes() == m.rows.tobytes()
        assert back.ids == m.ids


def test_truncated_payload(tmp_path):
    m = EmbeddingMatrix(ids=[f"i{k}" for k in range(4)], rows=np.ones((4, 3), dtype=np.float32))
    path = tmp_path / "m.emb"
    write_embeddings(m, path)
    data = bytearray(path.read_bytes())
    data[8:12] = (5).to_bytes(4, "little")  # header claims n=5, payload holds 4 rows
    path.write_bytes(bytes(data))
    with pytest.raises(FormatError, match="truncated"):
        read_embeddings(path)


def test_bad_magic(tmp_path):
    path = tmp_path / "m.emb"
    path.write_bytes(b"NOTEMBED" + b"\x00" * 32)
    with pytest.raises(FormatError, match="magic"):
        read_embeddings(path)


def test_id_count_disagreement(tmp_path):
    m = EmbeddingMatrix(ids=["a", "b"], rows=np.ones((2, 2), dtype=np.float32))
    path = tmp_path / "m.emb"
    write_embeddings(m, path)
    data = path.read_bytes()
    # drop the trailing id ("b\n") and shrink the declared id-block length
    trimmed = data[: -2]
    trimmed = trimmed[: 8 + 8 + 16] + (2).to_bytes(4, "little") + b"a\n"
    path.write_bytes(trimmed)
    with pytest.raises(FormatError, match="disagrees"):
        read_embeddings(path)


def test_unit_rows_rejects_zero():
    with pytest.raises(ValueError):
        unit_rows(np.array([[1.0, 0.0], [0.0, 0.0]]))
