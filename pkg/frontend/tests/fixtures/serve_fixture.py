"""Build a tiny corpus, train a small model, and serve it for browser tests.

Prints "READY <port>" once the artifacts exist, then runs the HTTP service
until killed.  Everything lives in a throwaway temp directory.
"""

import socket
import tempfile
from pathlib import Path

import numpy as np
import uvicorn
from fastapi.middleware.cors import CORSMiddleware

from memesearch import corpus
from memesearch.corpus import FeatureVector, ManifestEntry
from memesearch.embedding import TrainConfig, WordVectorTable, train_embedding
from memesearch.service import build_app


def main() -> None:
    tmp = Path(tempfile.mkdtemp(prefix="console-fixture-"))
    gen = np.random.default_rng(0)
    n, dv, dt = 20, 5, 3
    entries, feats, vocab = [], [], []
    for i in range(n):
        item = f"it{i:02d}"
        entries.append(ManifestEntry(id=item, caption=f"tok{i}", label="meme"))
        feats.append(FeatureVector(id=item, values=gen.normal(size=dv)))
        vocab.append(FeatureVector(id=f"tok{i}", values=gen.normal(size=dt)))

    manifest = tmp / "manifest.jsonl"
    feat_file = tmp / "features.txt"
    vec_file = tmp / "vectors.txt"
    corpus.save_manifest(entries, manifest)
    corpus.save_feature_file(feats, feat_file)
    corpus.save_feature_file(vocab, vec_file)

    table = WordVectorTable.from_feature_map(corpus.load_feature_file(vec_file))
    pairs = [(e.id, e.caption, fv) for e, fv in zip(entries, feats)]
    model, _ = train_embedding(
        pairs[:16], pairs[16:], table, TrainConfig(shared_dim=4, epochs=2, seed=1, batch_size=8)
    )
    model_file = tmp / "model.json"
    model_file.write_text(model.to_json(), encoding="utf-8")

    app = build_app(
        model_path=model_file,
        manifest_path=manifest,
        features_path=feat_file,
        word_vectors_path=vec_file,
        annotations_path=tmp / "annotations.jsonl",
    )
    # the browser test harness runs on a different origin than the service
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    print(f"READY {port}", flush=True)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")


if __name__ == "__main__":
    main()
