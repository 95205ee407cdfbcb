"""Siamese cosine scoring, max-margin training and top-k candidate ranking."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import encoders
from .embed import EmbeddingTable, TermSequence, UnrepresentableTermError, lookup_term, tokenize
from .encoders import EncoderConfig
from .metrics import CUTOFF, evaluate
from .nn import NumericError, OptimizerConfig, adagrad_step, dropout, make_rng


class ZeroNormError(ValueError):
    pass


@dataclass(frozen=True)
class TrainingPair:
    term: str
    gold_hypernyms: frozenset

    def __post_init__(self):
        golds = frozenset(self.gold_hypernyms)
        if not golds:
            raise ValueError(f"training pair {self.term!r} has no gold hypernyms")
        if self.term in golds:
            raise ValueError(f"term {self.term!r} listed as its own hypernym")
        object.__setattr__(self, "gold_hypernyms", golds)


@dataclass(frozen=True)
class TrainerConfig:
    margin: float = 0.1
    negatives_per_positive: int = 10
    epochs: int = 50
    batch_size: int = 20
    learning_rate: float = 1e-2
    dropout_p: float = 0.1
    seed: int = 0
    epsilon: float = 1e-6

    def __post_init__(self):
        if self.margin < 0:
            raise ValueError("margin must be non-negative")
        if self.negatives_per_positive < 1 or self.batch_size < 1 or self.epochs < 0:
            raise ValueError("negatives_per_positive and batch_size must be >= 1, epochs >= 0")
        if not 0 <= self.dropout_p < 1:
            raise ValueError("dropout_p must be in [0, 1)")

    @property
    def optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(self.learning_rate, self.epsilon)


@dataclass(frozen=True)
class RankedList:
    query: str
    items: tuple[tuple[str, float], ...]

    @property
    def candidates(self) -> list[str]:
        return [c for c, _ in self.items]


@dataclass
class Model:
    config: EncoderConfig
    params: object
    table: EmbeddingTable
    epochs_trained: int = 0

    @classmethod
    def create(cls, config: EncoderConfig, table: EmbeddingTable, seed: int = 0) -> "Model":
        if config.input_dim != table.dim:
            raise encoders.EncoderMismatchError(
                f"encoder input_dim {config.input_dim} != embedding dim {table.dim}"
            )
        return cls(config, encoders.init_encoder(config, seed), table)

    def sequence(self, term: str) -> TermSequence:
        return lookup_term(self.table, term)

    def encode(self, term: str) -> np.ndarray:
        return encoders.encode(self.config, self.params, self.sequence(term))

    def tensors(self):
        return self.params.tensors()


def cosine(x, y) -> float:
    """Dot product over the product of the two L2 norms."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    nx = np.linalg.norm(x)
    ny = np.linalg.norm(y)
    if nx == 0 or ny == 0:
        raise ZeroNormError("cosine of a zero-norm vector")
    return float(np.clip(np.dot(x, y) / (nx * ny), -1.0, 1.0))


def cosine_grad(x, y) -> tuple[float, np.ndarray, np.ndarray]:
    """cos(x, y) and its gradients with respect to x and y (unclipped)."""
    nx = np.linalg.norm(x)
    ny = np.linalg.norm(y)
    if nx == 0 or ny == 0:
        raise ZeroNormError("cosine of a zero-norm vector")
    c = float(np.dot(x, y) / (nx * ny))
    dx = y / (nx * ny) - c * x / (nx * nx)
    dy = x / (nx * ny) - c * y / (ny * ny)
    return c, dx, dy


def score(model: Model, term: str, candidate: str) -> float:
    return cosine(model.encode(term), model.encode(candidate))


def margin_for(positive: str, negative: str, delta: float) -> float:
    return 0.0 if positive == negative else delta


def hinge_loss(s_pos: float, s_neg: float, delta: float) -> float:
    """max(0, delta + s_neg - s_pos)."""
    if delta < 0:
        raise ValueError("margin must be non-negative")
    return max(0.0, delta + s_neg - s_pos)


def sample_negatives(rng: np.random.Generator, vocab: Sequence[str], gold, k: int, query: str | None = None) -> list[str]:
    """k uniform draws with replacement from vocab minus (gold and the query).

    Rejection sampling over ``vocab``; pass a de-duplicated vocabulary for
    uniformity over distinct candidates.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    excluded = set(gold)
    if query is not None:
        excluded.add(query)
    if not any(c not in excluded for c in vocab):
        raise ValueError("no feasible negative candidates")
    n = len(vocab)
    out: list[str] = []
    while len(out) < k:
        c = vocab[int(rng.integers(n))]
        if c not in excluded:
            out.append(c)
    return out


def _normalized(term: str) -> str:
    return " ".join(tokenize(term))


def representable(table: EmbeddingTable, terms: Iterable[str]) -> tuple[list[str], list[str]]:
    """Split ``terms`` (de-duplicated, order kept) into (representable, skipped)."""
    ok, skipped = [], []
    for t in dict.fromkeys(terms):
        try:
            lookup_term(table, t)
        except (UnrepresentableTermError, ValueError):
            skipped.append(t)
        else:
            ok.append(t)
    return ok, skipped


@dataclass
class EpochStats:
    epoch: int
    mean_loss: float
    violations: int
    triples: int
    pairs_used: int
    pairs_dropped: int


def _encode_train(model, seq, cfg, rng):
    if cfg.dropout_p > 0:
        seq = dataclasses.replace(seq, vectors=dropout(seq.vectors, cfg.dropout_p, rng, training=True))
    return encoders.forward(model.config, model.params, seq)


def _pair_backward(model, pair_seqs, golds, negatives_by_gold, cfg, rng):
    """Forward/backward for one pair; returns (loss_sum, triples, violations)."""
    q_seq, cand_seqs = pair_seqs
    u, q_cache = _encode_train(model, q_seq, cfg, rng)
    enc = {}
    for cand in dict.fromkeys([*golds, *(a for negs in negatives_by_gold for a in negs)]):
        enc[cand] = _encode_train(model, cand_seqs[cand], cfg, rng)
    du = np.zeros_like(u)
    dv = {c: np.zeros_like(v) for c, (v, _) in enc.items()}
    loss_sum, triples, violations = 0.0, 0, 0
    for gold, negs in zip(golds, negatives_by_gold):
        s_pos, du_pos, dv_pos = cosine_grad(u, enc[gold][0])
        for a in negs:
            s_neg, du_neg, dv_neg = cosine_grad(u, enc[a][0])
            loss = hinge_loss(s_pos, s_neg, margin_for(gold, a, cfg.margin))
            triples += 1
            if loss > 0:
                loss_sum += loss
                violations += 1
                du += du_neg - du_pos
                dv[a] += dv_neg
                dv[gold] -= dv_pos
    if violations:
        encoders.encoder_backward(model.config, model.params, q_cache, du)
        for c, (_, cache) in enc.items():
            if np.any(dv[c]):
                encoders.encoder_backward(model.config, model.params, cache, dv[c])
    return loss_sum, triples, violations


def _apply_batch(model, cfg, triples):
    tensors = model.tensors()
    if not tensors or triples == 0:
        for p in tensors:
            p.zero_grad()
        return
    opt = cfg.optimizer
    for p in tensors:
        p.grad /= triples
        adagrad_step(p, opt)


def train_epoch(model: Model, data: Sequence[TrainingPair], vocab: Sequence[str], cfg: TrainerConfig) -> EpochStats:
    """One pass of max-margin training over ``data``.

    Pairs are shuffled with a (seed, epoch) stream.  For every gold hypernym
    ``cfg.negatives_per_positive`` negatives are drawn from ``vocab``; the
    gradient of the mean hinge loss over a batch of ``cfg.batch_size`` pairs
    is applied with AdaGrad.  Dropout hits encoder input vectors only.
    Pairs whose term or golds cannot be embedded are dropped and counted.
    """
    if not data:
        raise ValueError("no training data")
    epoch = model.epochs_trained
    rng = make_rng((cfg.seed, epoch, 1))
    pool, _ = representable(model.table, vocab)
    seq_cache: dict[str, TermSequence] = {}

    def seq(t):
        s = seq_cache.get(t)
        if s is None:
            s = seq_cache[t] = model.sequence(t)
        return s

    for p in model.tensors():
        p.zero_grad()
    order = rng.permutation(len(data))
    total_loss, total_triples, total_viol = 0.0, 0, 0
    used = dropped = 0
    batch_pairs = batch_triples = 0
    for idx in order:
        pair = data[int(idx)]
        try:
            q_seq = seq(pair.term)
        except (UnrepresentableTermError, ValueError):
            dropped += 1
            continue
        golds = []
        for g in sorted(pair.gold_hypernyms):
            try:
                seq(g)
            except (UnrepresentableTermError, ValueError):
                continue
            golds.append(g)
        if not golds:
            dropped += 1
            continue
        negs = [
            sample_negatives(rng, pool, pair.gold_hypernyms, cfg.negatives_per_positive, pair.term)
            for _ in golds
        ]
        cand_seqs = {c: seq(c) for c in [*golds, *(a for n in negs for a in n)]}
        loss, triples, viol = _pair_backward(model, (q_seq, cand_seqs), golds, negs, cfg, rng)
        total_loss += loss
        total_triples += triples
        total_viol += viol
        used += 1
        batch_pairs += 1
        batch_triples += triples
        if batch_pairs == cfg.batch_size:
            _apply_batch(model, cfg, batch_triples)
            batch_pairs = batch_triples = 0
    if batch_pairs:
        _apply_batch(model, cfg, batch_triples)
    model.epochs_trained += 1
    if not math.isfinite(total_loss):
        raise NumericError(f"non-finite loss in epoch {epoch}")
    mean = total_loss / total_triples if total_triples else 0.0
    return EpochStats(epoch, mean, total_viol, total_triples, used, dropped)


class CandidateIndex:
    """Unit-normalised encodings of every representable candidate, computed once.

    Valid only while the model parameters stay unchanged.
    """

    def __init__(self, model: Model, vocab: Iterable[str]):
        self.model = model
        names, vecs, skipped = [], [], []
        for cand in dict.fromkeys(vocab):
            try:
                v = model.encode(cand)
            except (UnrepresentableTermError, ValueError):
                skipped.append(cand)
                continue
            norm = np.linalg.norm(v)
            if norm == 0:
                skipped.append(cand)
                continue
            names.append(cand)
            vecs.append(v / norm)
        self.names = names
        self.normalized_names = [_normalized(c) for c in names]
        self.matrix = np.array(vecs) if vecs else np.zeros((0, model.config.output_dim))
        self.skipped = skipped

    def rank(self, term: str, topk: int = CUTOFF) -> RankedList:
        if topk < 1:
            raise ValueError("topk must be >= 1")
        u = self.model.encode(term)
        nu = np.linalg.norm(u)
        if nu == 0:
            raise ZeroNormError(f"term {term!r} encodes to the zero vector")
        scores = np.clip(self.matrix @ (u / nu), -1.0, 1.0)
        q = _normalized(term)
        items = [
            (name, float(s))
            for name, norm_name, s in zip(self.names, self.normalized_names, scores)
            if norm_name != q
        ]
        items.sort(key=lambda it: (-it[1], it[0]))
        return RankedList(term, tuple(items[:topk]))


def rank_candidates(model: Model, term: str, vocab: Iterable[str], topk: int = CUTOFF,
                    index: CandidateIndex | None = None) -> RankedList:
    """Top-k candidates by cosine, ties broken by candidate string; the query itself is dropped."""
    if index is None:
        index = CandidateIndex(model, vocab)
    return index.rank(term, topk)


def predict(model: Model, terms: Sequence[str], vocab: Iterable[str], topk: int = CUTOFF):
    """Rank every term; unrepresentable terms yield ``None``."""
    index = CandidateIndex(model, vocab)
    out: list[RankedList | None] = []
    for t in terms:
        try:
            out.append(index.rank(t, topk))
        except (UnrepresentableTermError, ZeroNormError, ValueError):
            out.append(None)
    return out


def write_predictions(results: Sequence[RankedList | None], stream) -> None:
    for r in results:
        stream.write("\t".join(r.candidates) if r is not None else "")
        stream.write("\n")


def validation_mrr(model: Model, pairs: Sequence[TrainingPair], vocab: Sequence[str]) -> float:
    """MRR (0..1) of ``model`` over ``pairs``."""
    if not pairs:
        return float("nan")
    results = predict(model, [p.term for p in pairs], vocab)
    preds = {p.term: r.candidates for p, r in zip(pairs, results) if r is not None}
    gold = {p.term: p.gold_hypernyms for p in pairs}
    return evaluate(preds, gold).mrr / 100.0


@dataclass
class FitResult:
    best_mrr: float
    best_epoch: int
    history: list = field(default_factory=list)


def fit(model: Model, train: Sequence[TrainingPair], val: Sequence[TrainingPair], vocab: Sequence[str],
        cfg: TrainerConfig, log: Callable[[str], None] | None = None) -> FitResult:
    """Train for ``cfg.epochs`` epochs and restore the parameters with the best validation MRR.

    Epoch 0 (the untrained model) competes too; later epochs must be
    strictly better to replace it.  When ``val`` is empty the training pairs
    stand in for it.
    """
    val = val or train
    best = validation_mrr(model, val, vocab)
    best_epoch = 0
    snapshot = [p.values.copy() for p in model.tensors()]
    history = [(0, float("nan"), best)]
    if log:
        log(f"epoch 0 loss nan val_mrr {100 * best:.2f}")
    for _ in range(cfg.epochs):
        stats = train_epoch(model, train, vocab, cfg)
        mrr = validation_mrr(model, val, vocab)
        history.append((model.epochs_trained, stats.mean_loss, mrr))
        if log:
            log(f"epoch {model.epochs_trained} loss {stats.mean_loss:.6f} val_mrr {100 * mrr:.2f}")
        if mrr > best:
            best, best_epoch = mrr, model.epochs_trained
            snapshot = [p.values.copy() for p in model.tensors()]
    for p, v in zip(model.tensors(), snapshot):
        p.values[...] = v
    return FitResult(best, best_epoch, history)


def split_pairs(pairs: Sequence[TrainingPair], seed: int, val_fraction: float = 0.1):
    """Seeded shuffle, then (train, validation); validation gets at least one pair when n >= 2."""
    n = len(pairs)
    order = make_rng((seed, 2)).permutation(n)
    n_val = max(1, int(round(n * val_fraction))) if n >= 2 and val_fraction > 0 else 0
    val = [pairs[int(i)] for i in order[:n_val]]
    train = [pairs[int(i)] for i in order[n_val:]]
    return train, val
