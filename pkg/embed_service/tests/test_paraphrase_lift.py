import numpy as np
import requests

from embed_service.encoder import bundled_paraphrases


def test_paraphrase_pairs_exceed_random_pairs(service_url):
    """Directional check: mean cosine over paraphrase pairs must exceed the
    mean cosine over mismatched cross pairs. No fixed threshold."""
    pairs = bundled_paraphrases()
    a_texts = [p["a"] for p in pairs]
    b_texts = [p["b"] for p in pairs]

    def embed(texts):
        rows = []
        for start in range(0, len(texts), 8):  # service batch limit is 8
            resp = requests.post(
                f"{service_url}/embed", json={"texts": texts[start : start + 8]}, timeout=60
            )
            resp.raise_for_status()
            rows.extend(resp.json()["vectors"])
        return np.asarray(rows)

    va, vb = embed(a_texts), embed(b_texts)
    paraphrase_cos = float(np.mean(np.sum(va * vb, axis=1)))
    random_cos = float(
        np.mean([va[i] @ vb[j] for i in range(len(pairs)) for j in range(len(pairs)) if i != j])
    )
    print(
        f"\nparaphrase lift: mean cos(paraphrase)={paraphrase_cos:.4f} "
        f"mean cos(random)={random_cos:.4f}"
    )
    assert paraphrase_cos > random_cos
