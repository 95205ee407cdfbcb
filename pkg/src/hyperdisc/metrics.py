"""Gold-standard ranking metrics: AP, RR and P@k, averaged into a percent-scale report.

Per-query metrics take a ranked candidate list (best first) and the set of
gold hypernyms.  Everything is cut at 15, the task's prediction cap.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import IO, Iterable, Mapping, Sequence

CUTOFF = 15
REPORT_COLUMNS = ("MAP", "MRR", "P@1", "P@3", "P@5", "P@15")


class GoldParseError(ValueError):
    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


def _check_gold(gold):
    if not gold:
        raise ValueError("gold set is empty")


def average_precision(ranked: Sequence[str], gold, cutoff: int = CUTOFF) -> float:
    """AP@cutoff normalised by min(|gold|, cutoff).

    >>> round(average_precision(["a", "c", "b"], {"a", "b"}), 6)
    0.833333
    """
    _check_gold(gold)
    # rational accumulation keeps the result the correctly rounded exact value
    hits = 0
    total = Fraction(0)
    for r, cand in enumerate(ranked[:cutoff], 1):
        if cand in gold:
            hits += 1
            total += Fraction(hits, r)
    return float(total / min(len(gold), cutoff))


def reciprocal_rank(ranked: Sequence[str], gold, cutoff: int = CUTOFF) -> float:
    _check_gold(gold)
    for r, cand in enumerate(ranked[:cutoff], 1):
        if cand in gold:
            return 1.0 / r
    return 0.0


def precision_at_k(ranked: Sequence[str], gold, k: int) -> float:
    """Hits in the first k positions over k; a short list counts missing slots as misses."""
    _check_gold(gold)
    if k < 1:
        raise ValueError("k must be >= 1")
    return sum(1 for cand in ranked[:k] if cand in gold) / k


@dataclass(frozen=True)
class EvalReport:
    map: float
    mrr: float
    p1: float
    p3: float
    p5: float
    p15: float
    queries_evaluated: int
    queries_skipped: int

    def values(self) -> tuple[float, ...]:
        return (self.map, self.mrr, self.p1, self.p3, self.p5, self.p15)

    def format(self) -> str:
        header = "".join(f"{c:>8}" for c in REPORT_COLUMNS)
        row = "".join(f"{v:>8.2f}" for v in self.values())
        return (
            f"{header}\n{row}\n"
            f"queries evaluated: {self.queries_evaluated}  skipped: {self.queries_skipped}"
        )


def evaluate(predictions: Mapping[str, Sequence[str]], gold: Mapping[str, Iterable[str]]) -> EvalReport:
    """Average per-query metrics over every gold query, scaled to percent.

    Gold queries with no prediction (or an empty list) score zero and are
    counted in ``queries_skipped``.
    """
    sums = [0.0] * 6
    skipped = 0
    for query, golds in gold.items():
        golds = set(golds)
        _check_gold(golds)
        ranked = list(predictions.get(query) or ())
        if not ranked:
            skipped += 1
            continue
        sums[0] += average_precision(ranked, golds)
        sums[1] += reciprocal_rank(ranked, golds)
        for j, k in enumerate((1, 3, 5, 15), 2):
            sums[j] += precision_at_k(ranked, golds, k)
    n = len(gold)
    vals = [100.0 * s / n if n else 0.0 for s in sums]
    return EvalReport(*vals, queries_evaluated=n - skipped, queries_skipped=skipped)


def read_gold(stream: IO[str]) -> dict[str, list[str]]:
    """Parse ``query<TAB>hyp1<TAB>hyp2...`` lines, keeping file order."""
    gold: dict[str, list[str]] = {}
    for lineno, line in enumerate(stream, 1):
        line = line.rstrip("\n").rstrip("\r")
        if not line.strip():
            continue
        fields = line.split("\t")
        query = fields[0].strip()
        hyps = [h.strip() for h in fields[1:] if h.strip()]
        if not query:
            raise GoldParseError("empty query", lineno)
        if not hyps:
            raise GoldParseError(f"query {query!r} has no gold hypernyms", lineno)
        if query in gold:
            raise GoldParseError(f"duplicate query {query!r}", lineno)
        gold[query] = list(dict.fromkeys(hyps))
    return gold


def read_predictions(stream: IO[str]) -> list[list[str]]:
    """One ranked list per line (tab-separated); blank lines are empty lists."""
    out = []
    for lineno, line in enumerate(stream, 1):
        line = line.rstrip("\n").rstrip("\r")
        ranked = [c.strip() for c in line.split("\t") if c.strip()] if line else []
        if len(set(ranked)) != len(ranked):
            raise GoldParseError("duplicate candidate in prediction line", lineno)
        out.append(ranked)
    return out


def align_predictions(lines: Sequence[Sequence[str]], gold: Mapping[str, Sequence[str]]) -> dict[str, list[str]]:
    """Pair prediction line i with the i-th gold query; extra lines are an error."""
    queries = list(gold)
    if len(lines) > len(queries):
        raise GoldParseError(f"{len(lines)} prediction lines for {len(queries)} gold queries")
    return {q: list(r) for q, r in zip(queries, lines)}
