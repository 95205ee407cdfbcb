"""Synthetic hypernym datasets for smoke tests and sanity checks.

``toy_taxonomy``: single-word terms scattered around cluster centroids; each
centroid is also a hypernym word.  ``head_word_phrases``: two-word phrases
"modifier head" whose hypernym is decided by the head alone while the
modifier sits near a different cluster, which defeats plain averaging.

Run ``python -m hyperdisc.toy OUTDIR`` to write a toy taxonomy as files the
CLI understands.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embed import EmbeddingTable, write_embeddings
from .nn import make_rng
from .ranker import TrainingPair


@dataclass
class ToyData:
    table: EmbeddingTable
    pairs: list[TrainingPair]
    vocab: list[str]
    test_pairs: list[TrainingPair] | None = None


def _centroids(rng, n, dim):
    c = rng.normal(size=(n, dim))
    return c / np.linalg.norm(c, axis=1, keepdims=True)


def toy_taxonomy(seed: int = 0, n_clusters: int = 6, per_cluster: int = 10, dim: int = 10,
                 noise: float = 0.1, n_decoys: int = 14) -> ToyData:
    rng = make_rng((seed, 101))
    cents = _centroids(rng, n_clusters, dim)
    entries = {}
    pairs = []
    hyps = [f"hyp{k}" for k in range(n_clusters)]
    for k, h in enumerate(hyps):
        entries[h] = cents[k]
        for i in range(per_cluster):
            term = f"c{k}term{i}"
            entries[term] = cents[k] + rng.normal(scale=noise, size=dim)
            pairs.append(TrainingPair(term, frozenset([h])))
    decoys = [f"decoy{j}" for j in range(n_decoys)]
    for d in decoys:
        entries[d] = _centroids(rng, 1, dim)[0]
    return ToyData(EmbeddingTable(dim, entries), pairs, hyps + decoys)


def head_word_phrases(seed: int = 0, n_clusters: int = 6, heads_per_cluster: int = 8,
                      mods_per_cluster: int = 4, dim: int = 10, noise: float = 0.1,
                      mod_scale: float = 1.5, n_train: int = 120, n_test: int = 60) -> ToyData:
    """Phrases "m h" labelled by the head h; modifiers point at another cluster."""
    rng = make_rng((seed, 202))
    cents = _centroids(rng, n_clusters, dim)
    entries = {}
    hyps = [f"hyp{k}" for k in range(n_clusters)]
    heads, mods = [], []
    for k in range(n_clusters):
        entries[hyps[k]] = cents[k]
        for i in range(heads_per_cluster):
            w = f"h{k}x{i}"
            entries[w] = cents[k] + rng.normal(scale=noise, size=dim)
            heads.append((w, k))
        for j in range(mods_per_cluster):
            w = f"m{k}x{j}"
            entries[w] = mod_scale * cents[k] + rng.normal(scale=noise, size=dim)
            mods.append((w, k))
    phrases = {}
    while len(phrases) < n_train + n_test:
        head, hk = heads[int(rng.integers(len(heads)))]
        mod, mk = mods[int(rng.integers(len(mods)))]
        if mk != hk:
            phrases.setdefault(f"{mod} {head}", hyps[hk])
    pairs = [TrainingPair(t, frozenset([g])) for t, g in phrases.items()]
    return ToyData(EmbeddingTable(dim, entries), pairs[:n_train], hyps, pairs[n_train:])


def write_toy(outdir, seed: int = 0) -> dict[str, Path]:
    """Write embeddings.txt, train.tsv, vocab.txt, terms.txt and gold.tsv."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    data = toy_taxonomy(seed)
    paths = {name: out / name for name in ("embeddings.txt", "train.tsv", "vocab.txt", "terms.txt", "gold.tsv")}
    with open(paths["embeddings.txt"], "w", encoding="utf-8") as fh:
        write_embeddings(data.table, fh)
    with open(paths["train.tsv"], "w", encoding="utf-8") as fh, \
            open(paths["gold.tsv"], "w", encoding="utf-8") as gh, \
            open(paths["terms.txt"], "w", encoding="utf-8") as th:
        for p in data.pairs:
            line = "\t".join([p.term, *sorted(p.gold_hypernyms)]) + "\n"
            fh.write(line)
            gh.write(line)
            th.write(p.term + "\n")
    paths["vocab.txt"].write_text("".join(v + "\n" for v in data.vocab), encoding="utf-8")
    return paths


if __name__ == "__main__":
    if len(sys.argv) != 2:
        sys.exit("usage: python -m hyperdisc.toy OUTDIR")
    for name, path in write_toy(sys.argv[1]).items():
        print(path)
