import csv
import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from retrievalnet.data_model import EmbeddingRecord
from retrievalnet.errors import KTooLarge, TooFewRows, WidthMismatch, ZeroVector
from retrievalnet.preprocess import (
    ScalerParams,
    cosine_similarity,
    extract_feature_matrix,
    extract_retrieval_features,
    fit_scaler,
    fit_transform,
    inverse_transform,
    transform,
    write_feature_csv,
)
from retrievalnet.vector_index import build_index

from oracles import brute_force_knn


def test_fit_scaler_hand_example():
    params = fit_scaler([[0.0], [2.0]])
    assert_array_equal(params.mean, [1.0])
    assert_array_equal(params.std, [1.0])


def test_constant_column_uses_epsilon():
    params = fit_scaler([[5.0], [5.0], [5.0]])
    assert_array_equal(params.std, [0.0])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        out = transform(params, [[5.0], [6.0]])
    assert_array_equal(out, [[0.0], [1.0 / params.epsilon]])


def test_too_few_rows():
    with pytest.raises(TooFewRows):
        fit_scaler([[1.0, 2.0]])


def test_transform_hand_example():
    params = ScalerParams(np.array([1.0]), np.array([1.0]))
    assert_array_equal(transform(params, [[0.0], [2.0]]), [[-1.0], [1.0]])


def test_transform_width_mismatch():
    params = fit_scaler([[0.0, 1.0], [2.0, 3.0]])
    with pytest.raises(WidthMismatch):
        transform(params, [[1.0, 2.0, 3.0]])


def test_standardized_training_statistics():
    rng = np.random.default_rng(0)
    rows = rng.standard_normal((100, 8)) * rng.uniform(0.1, 10, 8) + rng.uniform(-5, 5, 8)
    _, out = fit_transform(rows)
    assert np.all(np.abs(out.mean(axis=0)) < 1e-9)
    assert np.all(np.abs(out.std(axis=0) - 1.0) < 1e-9)


def test_inverse_transform_round_trip():
    rng = np.random.default_rng(1)
    rows = rng.standard_normal((20, 3)) * 4 + 1
    params = fit_scaler(rows)
    assert_allclose(inverse_transform(params, transform(params, rows)), rows, rtol=1e-12)


def test_scaler_json_round_trip():
    params = fit_scaler(np.random.default_rng(2).standard_normal((10, 4)))
    again = ScalerParams.from_json(params.to_json())
    assert again.mean.tobytes() == params.mean.tobytes()
    assert again.std.tobytes() == params.std.tobytes()


# -- cosine ------------------------------------------------------------------

def test_cosine_cases():
    assert cosine_similarity([1, 0], [0, 1]) == 0.0
    v = np.random.default_rng(3).standard_normal(17)
    assert cosine_similarity(v, v) == pytest.approx(1.0, abs=1e-15)
    assert cosine_similarity(v, -v) == pytest.approx(-1.0, abs=1e-15)
    assert -1.0 <= cosine_similarity(v * 1e150, v * 1e150) <= 1.0


def test_cosine_zero_vector():
    with pytest.raises(ZeroVector):
        cosine_similarity([0, 0], [1, 0])


# -- retrieval features ------------------------------------------------------

@pytest.fixture
def real_index():
    return build_index([("r1", [0, 0]), ("r2", [1, 0])], dim=2)


def test_fake_record_distances(real_index):
    rec = EmbeddingRecord("f1", 0, "bert", [0.0, 1.0])
    feats = extract_retrieval_features(real_index, rec, k=2)
    assert_array_equal(feats.distances, [1.0, 2.0])
    assert feats.neighbor_ids == ("r1", "r2")


def test_indexed_record_never_sees_itself(real_index):
    rec = EmbeddingRecord("r1", 1, "bert", [0.0, 0.0])
    feats = extract_retrieval_features(real_index, rec, k=1)
    assert feats.neighbor_ids == ("r2",)
    assert_array_equal(feats.distances, [1.0])


def test_k_too_large_propagates(real_index):
    rec = EmbeddingRecord("r1", 1, "bert", [0.0, 0.0])
    with pytest.raises(KTooLarge):
        extract_retrieval_features(real_index, rec, k=2)


def test_cosines_follow_neighbor_order(real_index):
    rec = EmbeddingRecord("f1", 0, "bert", [1.0, 1.0])
    feats = extract_retrieval_features(real_index, rec, k=1, include_cosines=True)
    assert feats.neighbor_ids == ("r2",)
    assert feats.cosines[0] == pytest.approx(np.sqrt(0.5))
    assert feats.as_row().shape == (2,)


def test_feature_matrix_matches_brute_force():
    rng = np.random.default_rng(4)
    bank = rng.standard_normal((80, 6))
    ids = [f"r{i}" for i in range(80)]
    index = build_index(zip(ids, bank), 6)
    records = [EmbeddingRecord(ids[i], 1, "bert", bank[i]) for i in range(25)]
    records += [EmbeddingRecord(f"f{i}", 0, "bert", v) for i, v in enumerate(rng.standard_normal((25, 6)))]

    matrix = extract_feature_matrix(index, records, k=5)
    for row, rec in zip(matrix, records):
        want = brute_force_knn(ids, bank, rec.vector, 5, exclude_id=rec.article_id)
        assert_allclose(row, [d for _, d in want], rtol=1e-12)
        single = extract_retrieval_features(index, rec, 5)
        assert row.tobytes() == single.distances.tobytes()


def test_features_invariant_to_index_order():
    rng = np.random.default_rng(5)
    bank = rng.standard_normal((40, 4))
    ids = [f"r{i}" for i in range(40)]
    perm = rng.permutation(40)
    a = build_index(zip(ids, bank), 4)
    b = build_index(((ids[i], bank[i]) for i in perm), 4)
    records = [EmbeddingRecord(f"q{i}", 0, "bert", v) for i, v in enumerate(rng.standard_normal((10, 4)))]
    assert_array_equal(extract_feature_matrix(a, records, 3), extract_feature_matrix(b, records, 3))


def test_feature_csv(tmp_path):
    path = tmp_path / "f.csv"
    write_feature_csv(path, np.array([[1.0, 2.0, 0.5, 0.25]]), [1], k=2, include_cosines=True)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["d1", "d2", "c1", "c2", "label"]
    assert rows[1] == ["1.0", "2.0", "0.5", "0.25", "1"]
    with pytest.raises(WidthMismatch):
        write_feature_csv(path, np.zeros((1, 3)), [1], k=2)
