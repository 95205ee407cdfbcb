"""Pre-trained word / sense vector ingestion and term lookup.

Files use the plain GloVe text layout: one token per line followed by its
whitespace-separated float components.  Sense files name tokens
``word#id``; all senses of a word are averaged into a single vector.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import IO, Iterable, Mapping

import numpy as np

_SPLIT = re.compile(r"[\s_]+")


class EmbeddingParseError(ValueError):
    """Malformed embedding file."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class UnrepresentableTermError(KeyError):
    """Every token of a term is out of vocabulary."""

    def __str__(self):
        return f"unrepresentable term: {self.args[0]!r}"


@dataclass(frozen=True)
class EmbeddingTable:
    """Immutable token -> vector map of a fixed dimension."""

    dim: int
    entries: Mapping[str, np.ndarray]

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        frozen = {}
        for tok, vec in self.entries.items():
            if not tok:
                raise ValueError("empty token")
            vec = np.array(vec, dtype=np.float64)
            if vec.shape != (self.dim,):
                raise ValueError(f"vector for {tok!r} has shape {vec.shape}, expected ({self.dim},)")
            vec.flags.writeable = False
            frozen[tok] = vec
        object.__setattr__(self, "entries", MappingProxyType(frozen))

    def __len__(self):
        return len(self.entries)

    def __contains__(self, token):
        return token in self.entries

    def __getitem__(self, token) -> np.ndarray:
        return self.entries[token]


@dataclass(frozen=True)
class TermSequence:
    """Vector sequence for one term; OOV rows are zero and flagged in ``oov_mask``."""

    tokens: tuple[str, ...]
    vectors: np.ndarray  # (l, dim)
    oov_mask: np.ndarray = field(repr=False)  # (l,) bool

    def __len__(self):
        return len(self.tokens)

    @property
    def known(self) -> int:
        return int(np.count_nonzero(~self.oov_mask))


def _lines(source: IO[str] | str | Iterable[str]) -> Iterable[str]:
    if isinstance(source, str):
        return source.splitlines()
    return source


def _parse(source, expected_dim=None):
    """Yield (lineno, token, vector) with width checks."""
    dim = expected_dim
    for lineno, line in enumerate(_lines(source), 1):
        parts = line.split()
        if not parts:
            continue
        token, fields = parts[0], parts[1:]
        if not fields:
            raise EmbeddingParseError(f"token {token!r} has no vector components", lineno)
        if dim is None:
            dim = len(fields)
        elif len(fields) != dim:
            raise EmbeddingParseError(f"expected {dim} floats, found {len(fields)}", lineno)
        try:
            vec = np.array([float(x) for x in fields], dtype=np.float64)
        except ValueError as exc:
            raise EmbeddingParseError(f"non-numeric field ({exc})", lineno) from None
        yield lineno, token, vec


def load_word_embeddings(source, expected_dim: int | None = None) -> EmbeddingTable:
    """Read a word-vector text stream. Later duplicates overwrite earlier ones.

    ``source`` may be an open text file, any iterable of lines, or the file
    contents as a single string.
    """
    if expected_dim is not None and expected_dim < 1:
        raise ValueError("expected_dim must be positive")
    entries: dict[str, np.ndarray] = {}
    for _, token, vec in _parse(source, expected_dim):
        entries[token] = vec
    if not entries:
        raise EmbeddingParseError("no embeddings")
    dim = len(next(iter(entries.values())))
    return EmbeddingTable(dim, entries)


def load_sense_embeddings(source, expected_dim: int | None = None) -> EmbeddingTable:
    """Read ``word#id`` sense vectors and average them per base word."""
    sums: dict[str, np.ndarray] = {}
    counts: dict[str, int] = {}
    for lineno, token, vec in _parse(source, expected_dim):
        base = token.split("#", 1)[0] if "#" in token else token
        if not base:
            raise EmbeddingParseError(f"empty base word in {token!r}", lineno)
        if base in sums:
            sums[base] += vec
            counts[base] += 1
        else:
            sums[base] = vec.copy()
            counts[base] = 1
    if not sums:
        raise EmbeddingParseError("no embeddings")
    dim = len(next(iter(sums.values())))
    return EmbeddingTable(dim, {w: s / counts[w] for w, s in sums.items()})


def write_embeddings(table: EmbeddingTable, stream: IO[str]) -> None:
    """Write ``table`` in the text format using shortest round-trip float reprs."""
    for token, vec in table.entries.items():
        stream.write(token + " " + " ".join(repr(float(x)) for x in vec) + "\n")


def tokenize(term: str) -> list[str]:
    return [t for t in _SPLIT.split(term.strip().lower()) if t]


def lookup_term(table: EmbeddingTable, term: str) -> TermSequence:
    """Map a raw term string to its vector sequence.

    Raises ValueError for blank input and UnrepresentableTermError when no
    token is in the table.
    """
    tokens = tokenize(term)
    if not tokens:
        raise ValueError("empty term")
    vectors = np.zeros((len(tokens), table.dim))
    oov = np.ones(len(tokens), dtype=bool)
    for i, tok in enumerate(tokens):
        vec = table.entries.get(tok)
        if vec is not None:
            vectors[i] = vec
            oov[i] = False
    if oov.all():
        raise UnrepresentableTermError(term)
    vectors.flags.writeable = False
    oov.flags.writeable = False
    return TermSequence(tuple(tokens), vectors, oov)
