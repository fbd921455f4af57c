"""Self-contained toy dataset for smoke tests and memorization runs.

Eight short review sentences with gold triplets, handcrafted POS/head
annotations, and small deterministic embedding files. Everything is written
to a directory so the CLI path can be exercised end to end without any
external resources.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .config import ModelConfig
from .corpus import parse_aste_file, write_sidecar

_TOY = [
    # (line, raw POS tags, heads)
    (
        "The wine list is very good .####[([0, 1, 2], [4, 5], 'POS')]",
        ["DET", "NOUN", "NOUN", "AUX", "ADV", "ADJ", "PUNCT"],
        [2, 2, 5, 5, 5, -1, 5],
    ),
    (
        "The keyboard is comfortable .####[([1], [3], 'POS')]",
        ["DET", "NOUN", "AUX", "ADJ", "PUNCT"],
        [1, 3, 3, -1, 3],
    ),
    (
        "The camera is blurry .####[([1], [3], 'NEG')]",
        ["DET", "NOUN", "AUX", "ADJ", "PUNCT"],
        [1, 3, 3, -1, 3],
    ),
    (
        "Service was ok .####[([0], [2], 'NEU')]",
        ["NOUN", "AUX", "ADJ", "PUNCT"],
        [2, 2, -1, 2],
    ),
    (
        "Great battery life .####[([1, 2], [0], 'POS')]",
        ["ADJ", "NOUN", "NOUN", "PUNCT"],
        [2, 2, -1, 2],
    ),
    (
        "The screen looks dull .####[([1], [3], 'NEG')]",
        ["DET", "NOUN", "VERB", "ADJ", "PUNCT"],
        [1, 2, -1, 2, 2],
    ),
    (
        "I love the pasta .####[([3], [1], 'POS')]",
        ["PRON", "VERB", "DET", "NOUN", "PUNCT"],
        [1, -1, 3, 1, 1],
    ),
    (
        "ok .####[]",
        ["ADJ", "PUNCT"],
        [-1, 0],
    ),
]


def toy_vocab() -> list[str]:
    words = set()
    for line, _, _ in _TOY:
        words.update(w.lower() for w in line.split("####")[0].split())
    return sorted(words)


def _write_embeddings(path: Path, vocab, dim: int, seed: int) -> None:
    rng = np.random.RandomState(seed)
    with open(path, "w", encoding="utf-8") as fh:
        for token in vocab:
            vec = rng.randn(dim) * 0.5
            fh.write(token + " " + " ".join(f"{x:.6f}" for x in vec) + "\n")


def write_toy_dataset(directory) -> dict[str, Path]:
    """Write corpus, sidecar, and embedding files; returns their paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    corpus_path = directory / "toy_train.txt"
    corpus_path.write_text("\n".join(line for line, _, _ in _TOY) + "\n", encoding="utf-8")

    sentences = parse_aste_file(corpus_path.read_text(), id_prefix=corpus_path.stem)
    records = [
        {"id": sent.id, "tokens": list(sent.tokens), "pos": pos, "heads": heads}
        for sent, (_, pos, heads) in zip(sentences, _TOY)
    ]
    sidecar_path = directory / "toy_annotations.jsonl"
    write_sidecar(sidecar_path, records)

    vocab = toy_vocab()
    glove_path = directory / "toy_glove.txt"
    domain_path = directory / "toy_domain.txt"
    _write_embeddings(glove_path, vocab, dim=16, seed=11)
    _write_embeddings(domain_path, vocab, dim=12, seed=23)
    return {
        "corpus": corpus_path,
        "sidecar": sidecar_path,
        "glove": glove_path,
        "domain": domain_path,
    }


def toy_config(**overrides) -> ModelConfig:
    """Small-width config that can memorize the toy corpus quickly on CPU."""
    params = dict(
        encoder_name="tiny:32",
        d_g=16,
        d_s=12,
        d_p=8,
        d_l=32,
        d_relation=32,
        gcn_layers=2,
        interaction_layers=2,
        cnn_layers=2,
        dropout=0.1,
        epochs=50,
        batch_size=1,
        lr=1e-2,
        lr_decay_epoch=30,
        lr_decay_factor=0.3,
        boundary_pos_weight=3.0,
        max_negatives=25,
        seed=7,
    )
    params.update(overrides)
    cfg = ModelConfig(**params)
    cfg.validate()
    return cfg
