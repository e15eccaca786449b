import numpy as np
import requests


def embed(url, texts):
    resp = requests.post(f"{url}/embed", json={"texts": texts}, timeout=30)
    return resp


def test_health_advertises_model_and_dimension(service_url, test_encoder):
    payload = requests.get(f"{service_url}/health", timeout=10).json()
    assert payload["model_id"] == test_encoder.model_id
    assert payload["dimension"] == test_encoder.dimension > 0


def test_duplicate_texts_in_one_batch_are_identical(service_url):
    resp = embed(service_url, ["a", "a"])
    assert resp.status_code == 200
    vectors = np.asarray(resp.json()["vectors"])
    assert vectors.shape[0] == 2
    assert np.array_equal(vectors[0], vectors[1])


def test_vectors_are_unit_normalized(service_url):
    resp = embed(service_url, ["the pump failed", "die batterie wurde ersetzt", "x"])
    vectors = np.asarray(resp.json()["vectors"])
    assert np.all(np.abs(np.linalg.norm(vectors, axis=1) - 1.0) <= 1e-6)


def test_batch_over_limit_rejected_without_partial_results(service_url):
    resp = embed(service_url, [f"text {i}" for i in range(9)])  # limit is 8
    assert resp.status_code == 413
    payload = resp.json()
    assert payload["error"]["code"] == "batch_too_large"
    assert "vectors" not in payload


def test_malformed_body_rejected(service_url):
    resp = requests.post(f"{service_url}/embed", json={"nope": 1}, timeout=10)
    assert resp.status_code == 422


def test_deterministic_within_process_for_same_batch(service_url):
    first = np.asarray(embed(service_url, ["alpha", "beta"]).json()["vectors"])
    second = np.asarray(embed(service_url, ["alpha", "beta"]).json()["vectors"])
    assert np.array_equal(first, second)


def test_response_dimension_matches_health(service_url):
    health = requests.get(f"{service_url}/health", timeout=10).json()
    payload = embed(service_url, ["one", "two"]).json()
    assert payload["dimension"] == health["dimension"]
    assert all(len(row) == health["dimension"] for row in payload["vectors"])
