"""Command-line interface: ``hyperdisc {train,rank,evaluate,gradcheck}``.

Settings come from built-in defaults, then an optional ``--config`` file of
``key = value`` lines, then command-line flags.  Exit codes: 0 success,
1 usage or parse error, 2 numeric failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import itertools
import sys
from dataclasses import dataclass, fields
from typing import Sequence

from . import kernels
from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .checks import TOLERANCE, gradcheck_suite
from .embed import EmbeddingParseError, load_sense_embeddings, load_word_embeddings
from .encoders import KINDS, EncoderConfig
from .metrics import GoldParseError, align_predictions, evaluate, read_gold, read_predictions
from .ranker import Model, TrainerConfig, TrainingPair, fit, predict, split_pairs, write_predictions

LEARNING_RATES = (1e-3, 1e-2)
DROPOUTS = (0.1, 0.2)
CNN_WIDTHS = ((2,), (3,), (4,))


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    embeddings: str = ""
    embedding_kind: str = "word"
    data: str = ""
    gold: str = ""
    vocab: str = ""
    terms: str = ""
    checkpoint: str = ""
    predictions: str = ""
    out: str = ""
    encoder: str = "gru"
    hidden_dim: int = 200
    cnn_filter_widths: tuple = (2,)
    rcnn_order: int = 2
    margin: float = 0.1
    negatives: int = 10
    epochs: int = 50
    batch_size: int = 20
    learning_rate: float = 1e-2
    dropout: float = 0.1
    epsilon: float = 1e-6
    val_fraction: float = 0.1
    topk: int = 15
    seed: int = 0

    def __post_init__(self):
        if self.embedding_kind not in ("word", "sense"):
            raise UsageError(f"embedding_kind must be word or sense, got {self.embedding_kind!r}")
        if self.encoder.upper() not in KINDS:
            raise UsageError(f"unknown encoder {self.encoder!r}")
        if self.hidden_dim < 1 or self.rcnn_order < 1 or self.topk < 1:
            raise UsageError("hidden_dim, rcnn_order and topk must be positive")

    def encoder_config(self, input_dim: int) -> EncoderConfig:
        return EncoderConfig(self.encoder.upper(), input_dim, self.hidden_dim,
                             tuple(self.cnn_filter_widths), self.rcnn_order)

    def trainer_config(self) -> TrainerConfig:
        return TrainerConfig(self.margin, self.negatives, self.epochs, self.batch_size,
                             self.learning_rate, self.dropout, self.seed, self.epsilon)

    def snapshot(self) -> dict:
        d = dataclasses.asdict(self)
        d["cnn_filter_widths"] = list(self.cnn_filter_widths)
        return d


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _convert(key: str, raw):
    default = _FIELDS[key].default
    if isinstance(raw, str):
        raw = raw.strip()
    try:
        if isinstance(default, tuple):
            if isinstance(raw, str):
                return tuple(int(x) for x in raw.replace(",", " ").split())
            return tuple(int(x) for x in raw)
        if isinstance(default, bool):
            return str(raw).lower() in ("1", "true", "yes")
        return type(default)(raw)
    except ValueError:
        raise UsageError(f"bad value for {key}: {raw!r}") from None


def read_config_file(path: str) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment; unknown keys are errors."""
    out = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    with fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _FIELDS:
                raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
            out[key] = _convert(key, value)
    return out


def build_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for key in _FIELDS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = _convert(key, v)
    return RunConfig(**values)


def _open_text(path: str, what: str):
    if not path:
        raise UsageError(f"missing {what} path")
    try:
        return open(path, encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {what} {path}: {exc}") from None


def load_table(path: str, kind: str):
    with _open_text(path, "embeddings") as fh:
        if kind == "sense":
            return load_sense_embeddings(fh)
        return load_word_embeddings(fh)


def read_lines(path: str, what: str) -> list[str]:
    with _open_text(path, what) as fh:
        return [line.strip() for line in fh.read().splitlines()]


def read_pairs(path: str) -> list[TrainingPair]:
    with _open_text(path, "training data") as fh:
        gold = read_gold(fh)
    try:
        return [TrainingPair(q, frozenset(h)) for q, h in gold.items()]
    except ValueError as exc:
        raise GoldParseError(str(exc)) from None


def _grid(cfg: RunConfig, use_grid: bool) -> list[RunConfig]:
    if not use_grid:
        return [cfg]
    widths = CNN_WIDTHS if cfg.encoder.upper() == "CNN" else (cfg.cnn_filter_widths,)
    return [
        dataclasses.replace(cfg, learning_rate=lr, dropout=p, cnn_filter_widths=w)
        for lr, p, w in itertools.product(LEARNING_RATES, DROPOUTS, widths)
    ]


def cmd_train(cfg: RunConfig, grid: bool = False, out=None) -> Checkpoint:
    out = out or sys.stdout
    if not cfg.out:
        raise UsageError("train needs --out for the checkpoint")
    table = load_table(cfg.embeddings, cfg.embedding_kind)
    pairs = read_pairs(cfg.data)
    if not pairs:
        raise UsageError("training data is empty")
    vocab = [v for v in read_lines(cfg.vocab, "vocabulary") if v]
    train, val = split_pairs(pairs, cfg.seed, cfg.val_fraction)
    best = None
    for run in _grid(cfg, grid):
        tag = ""
        if grid:
            widths = ",".join(map(str, run.cnn_filter_widths))
            tag = f"[lr={run.learning_rate:g} dropout={run.dropout:g} widths={widths}] "
        model = Model.create(run.encoder_config(table.dim), table, run.seed)
        result = fit(model, train, val, vocab, run.trainer_config(), log=lambda s: print(tag + s, file=out))
        print(f"{tag}best val_mrr {100 * result.best_mrr:.2f} at epoch {result.best_epoch}", file=out)
        if best is None or result.best_mrr > best[1].best_mrr:
            best = (run, result, model)
    run, result, model = best
    ckpt = Checkpoint(model.config, model.params, run.seed, run.snapshot(), result.best_mrr,
                      result.best_epoch, model.epochs_trained)
    save_checkpoint(cfg.out, ckpt)
    return ckpt


def cmd_rank(cfg: RunConfig, out=None, err=None) -> int:
    """Write one tab-separated line per query; returns the number of unrepresentable queries."""
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        ckpt = load_checkpoint(cfg.checkpoint)
    except OSError as exc:
        raise UsageError(f"cannot read checkpoint {cfg.checkpoint}: {exc}") from None
    snap = ckpt.run_config
    emb_path = cfg.embeddings or snap.get("embeddings", "")
    emb_kind = cfg.embedding_kind if cfg.embeddings else snap.get("embedding_kind", "word")
    table = load_table(emb_path, emb_kind)
    if table.dim != ckpt.encoder.input_dim:
        raise UsageError(f"embedding dim {table.dim} does not match checkpoint input_dim {ckpt.encoder.input_dim}")
    vocab = [v for v in read_lines(cfg.vocab or snap.get("vocab", ""), "vocabulary") if v]
    terms = read_lines(cfg.terms, "terms")
    model = Model(ckpt.encoder, ckpt.params, table, ckpt.epochs_trained)
    results = predict(model, terms, vocab, cfg.topk)
    missing = sum(r is None for r in results)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
            write_predictions(results, fh)
    else:
        write_predictions(results, out)
    if missing:
        print(f"warning: {missing} unrepresentable queries (empty lines written)", file=err)
    return missing


def cmd_evaluate(cfg: RunConfig, out=None):
    out = out or sys.stdout
    with _open_text(cfg.gold, "gold") as fh:
        gold = read_gold(fh)
    with _open_text(cfg.predictions, "predictions") as fh:
        lines = read_predictions(fh)
    report = evaluate(align_predictions(lines, gold), gold)
    print(report.format(), file=out)
    return report


def cmd_gradcheck(seeds: int = 20, corrupt: bool = False, out=None) -> bool:
    out = out or sys.stdout
    results = gradcheck_suite(seeds, corrupt=corrupt)
    ok = True
    for kind, err in results.items():
        passed = err < TOLERANCE
        ok &= passed
        note = " (inputs only)" if kind == "TEA" else ""
        print(f"{kind:<5} max_rel_err {err:.3e} {'PASS' if passed else 'FAIL'}{note}", file=out)
    return ok


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key = value settings file")
    p.add_argument("--seed", type=int)


def _add_embeddings(p):
    p.add_argument("--embeddings", help="embedding text file")
    p.add_argument("--embedding-kind", dest="embedding_kind", choices=("word", "sense"))


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hyperdisc", description="Neural hypernym discovery")
    parser.add_argument("--backend", choices=("numba", "numpy"), help="kernel backend override")
    sub = parser.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train", help="train an encoder and save the best checkpoint")
    _add_common(tr)
    _add_embeddings(tr)
    tr.add_argument("--encoder", type=str.lower, choices=[k.lower() for k in KINDS])
    tr.add_argument("--data", help="training pairs: query<TAB>hypernym...")
    tr.add_argument("--vocab", help="candidate hypernyms, one per line")
    tr.add_argument("--out", help="checkpoint path")
    tr.add_argument("--grid", action="store_true", help="search lr x dropout (x CNN width)")
    tr.add_argument("--epochs", type=int)
    tr.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    tr.add_argument("--cnn-widths", dest="cnn_filter_widths")
    tr.add_argument("--rcnn-order", dest="rcnn_order", type=int)
    tr.add_argument("--learning-rate", dest="learning_rate", type=float)
    tr.add_argument("--dropout", type=float)
    tr.add_argument("--margin", type=float)
    tr.add_argument("--negatives", type=int)
    tr.add_argument("--batch-size", dest="batch_size", type=int)
    tr.add_argument("--val-fraction", dest="val_fraction", type=float)

    rk = sub.add_parser("rank", help="write top-k hypernyms for each query")
    _add_common(rk)
    _add_embeddings(rk)
    rk.add_argument("--checkpoint")
    rk.add_argument("--terms", help="queries, one per line")
    rk.add_argument("--vocab")
    rk.add_argument("--out", help="prediction file (default stdout)")
    rk.add_argument("--topk", type=int)

    ev = sub.add_parser("evaluate", help="score a prediction file against gold")
    _add_common(ev)
    ev.add_argument("predictions_file", nargs="?")
    ev.add_argument("gold_file", nargs="?")
    ev.add_argument("--predictions")
    ev.add_argument("--gold")

    gc = sub.add_parser("gradcheck", help="finite-difference check of every encoder")
    _add_common(gc)
    gc.add_argument("--seeds", type=int, default=20)
    gc.add_argument("--corrupt-backward", action="store_true", help=argparse.SUPPRESS)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    if args.backend:
        kernels.active = kernels.get_kernels(args.backend)
    try:
        if args.command == "evaluate":
            args.predictions = args.predictions or args.predictions_file
            args.gold = args.gold or args.gold_file
        if args.command == "gradcheck":
            return 0 if cmd_gradcheck(args.seeds, args.corrupt_backward) else 2
        cfg = build_config(args)
        if args.command == "train":
            cmd_train(cfg, grid=args.grid)
        elif args.command == "rank":
            cmd_rank(cfg)
        else:
            cmd_evaluate(cfg)
    except (UsageError, EmbeddingParseError, GoldParseError, CheckpointError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FloatingPointError as exc:  # includes NumericError
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
