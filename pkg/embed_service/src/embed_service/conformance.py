"""Protocol conformance checking for embedding-service endpoints.

Validates the handshake, dimension consistency, unit norms, in-batch
determinism for duplicate texts, and order preservation across a reversed
marker batch. Any violation fails with the violated clause named.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import requests

MARKER_TEXTS = [
    "conformance marker alpha",
    "conformance marker bravo",
    "conformance marker charlie",
]

NORM_TOLERANCE = 1e-6
ORDER_TOLERANCE = 1e-6


@dataclass
class ConformanceResult:
    passed: bool
    failures: list[str] = field(default_factory=list)
    model_id: str = ""
    dimension: int = 0

    def summary(self) -> str:
        if self.passed:
            return f"PASS: {self.model_id} (dimension {self.dimension})"
        return "FAIL: " + "; ".join(self.failures)


def _embed(endpoint: str, texts: list[str], timeout: float) -> np.ndarray:
    resp = requests.post(
        f"{endpoint.rstrip('/')}/embed", json={"texts": texts}, timeout=timeout
    )
    resp.raise_for_status()
    payload = resp.json()
    return np.asarray(payload["vectors"], dtype=np.float64), payload


def conformance_check(endpoint: str, timeout: float = 30.0) -> ConformanceResult:
    failures: list[str] = []
    try:
        resp = requests.get(f"{endpoint.rstrip('/')}/health", timeout=timeout)
        resp.raise_for_status()
        health = resp.json()
        model_id = str(health["model_id"])
        dimension = int(health["dimension"])
        if dimension <= 0:
            raise ValueError("non-positive dimension")
    except Exception as exc:
        return ConformanceResult(
            passed=False, failures=[f"handshake: {exc}"]
        )

    try:
        batch = MARKER_TEXTS + [MARKER_TEXTS[0]]
        vectors, payload = _embed(endpoint, batch, timeout)
        if payload.get("model_id") != model_id or int(payload.get("dimension", -1)) != dimension:
            failures.append("dimension: embed response disagrees with handshake")
        if vectors.shape != (len(batch), dimension):
            failures.append(
                f"dimension: expected {len(batch)}x{dimension} vectors, "
                f"got {vectors.shape}"
            )
        else:
            norms = np.linalg.norm(vectors, axis=1)
            if np.any(np.abs(norms - 1.0) > NORM_TOLERANCE):
                failures.append("norm: vectors are not unit-normalized")
            if not np.allclose(vectors[0], vectors[-1], atol=ORDER_TOLERANCE):
                failures.append("determinism: duplicate texts produced different vectors")
            if np.allclose(vectors[0], vectors[1], atol=ORDER_TOLERANCE):
                failures.append("order: distinct texts produced identical vectors")

        reversed_vectors, _ = _embed(endpoint, list(reversed(MARKER_TEXTS)), timeout)
        if reversed_vectors.shape == (len(MARKER_TEXTS), dimension):
            for i in range(len(MARKER_TEXTS)):
                forward = vectors[i]
                backward = reversed_vectors[len(MARKER_TEXTS) - 1 - i]
                if not np.allclose(forward, backward, atol=ORDER_TOLERANCE):
                    failures.append("order: batch order is not preserved")
                    break
        else:
            failures.append("dimension: reversed batch has wrong shape")
    except Exception as exc:
        failures.append(f"embed: {exc}")

    return ConformanceResult(
        passed=not failures, failures=failures, model_id=model_id, dimension=dimension
    )
