import numpy as np
import pytest

from memesearch.corpus import FeatureVector, LabeledDataset


@pytest.fixture
def blobs_dataset():
    """Three well-separated Gaussian blobs, one per class."""
    return make_blobs(n_per_class=40, dim=6, spread=0.3, seed=11)


def make_blobs(n_per_class, dim, spread, seed, counts=None):
    gen = np.random.default_rng(seed)
    centers = {
        "meme": np.full(dim, 5.0),
        "sticker": np.full(dim, -5.0),
        "no_meme": np.concatenate([np.full(dim // 2, 5.0), np.full(dim - dim // 2, -5.0)]),
    }
    samples = []
    for label, center in centers.items():
        n = counts[label] if counts else n_per_class
        for i in range(n):
            values = center + spread * gen.normal(size=dim)
            samples.append((FeatureVector(id=f"{label}-{i}", values=values), label))
    return LabeledDataset.from_samples(samples)


def make_retrieval_fixture(n_pairs=500, latent_dim=32, visual_dim=64, text_dim=48,
                           noise=0.1, scale=3.0, seed=7):
    """Noisy linear views of shared latent factors, as (pairs, table)."""
    from memesearch.embedding import WordVectorTable

    gen = np.random.default_rng(seed)
    A = gen.normal(size=(visual_dim, latent_dim)) / np.sqrt(latent_dim)
    B = gen.normal(size=(text_dim, latent_dim)) / np.sqrt(latent_dim)
    Z = gen.normal(size=(n_pairs, latent_dim))
    Xv = scale * (Z @ A.T) + noise * gen.normal(size=(n_pairs, visual_dim))
    Xt = scale * (Z @ B.T) + noise * gen.normal(size=(n_pairs, text_dim))
    table = WordVectorTable(
        dimension=text_dim,
        vectors={f"tok{i}": Xt[i] for i in range(n_pairs)},
    )
    pairs = [
        (f"p{i:03d}", f"tok{i}", FeatureVector(id=f"p{i:03d}", values=Xv[i]))
        for i in range(n_pairs)
    ]
    return pairs, table
