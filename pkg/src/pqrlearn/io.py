"""Reading, streaming, and splitting sparse labeled datasets in LIBSVM text format.

The wire format is one instance per line: ``<label> <idx>:<val> <idx>:<val> ...``
with 1-based, strictly increasing feature indices. Explicit zero values are
dropped on input; the models downstream are defined on nonzero support only.
"""

from __future__ import annotations

import math
import os
import random
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .exceptions import ParseError


@dataclass(slots=True)
class LabeledInstance:
    """One sparse labeled example.

    ``features`` is a list of ``(index, value)`` pairs with strictly
    increasing 1-based indices and finite nonzero values.
    """

    label: float
    features: list[tuple[int, float]] = field(default_factory=list)

    def nnz(self) -> int:
        return len(self.features)

    def max_index(self) -> int:
        return self.features[-1][0] if self.features else 0


@dataclass(frozen=True)
class DatasetSplit:
    """Train/validation/test fractions plus the routing seed."""

    train: float = 0.8
    validation: float = 0.1
    test: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for name, frac in (("train", self.train), ("validation", self.validation), ("test", self.test)):
            if not 0.0 <= frac <= 1.0:
                raise ValueError(f"{name} fraction {frac} outside [0, 1]")
        total = self.train + self.validation + self.test
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"fractions sum to {total!r}, expected 1")


def parse_line(line: str) -> LabeledInstance:
    """Parse one LIBSVM text line into a :class:`LabeledInstance`.

    Raises :class:`ParseError` on malformed tokens, non-finite numbers,
    indices below 1, or indices that do not strictly increase (the latter
    signals corrupt or duplicate-keyed input).
    """
    tokens = line.split()
    if not tokens:
        raise ParseError("empty line")
    try:
        label = float(tokens[0])
    except ValueError:
        raise ParseError(f"bad label token {tokens[0]!r}") from None
    if not math.isfinite(label):
        raise ParseError(f"non-finite label {tokens[0]!r}")

    features: list[tuple[int, float]] = []
    prev_index = 0
    for token in tokens[1:]:
        idx_text, sep, val_text = token.partition(":")
        if not sep:
            raise ParseError(f"bad feature token {token!r}")
        try:
            index = int(idx_text)
            value = float(val_text)
        except ValueError:
            raise ParseError(f"bad feature token {token!r}") from None
        if index < 1:
            raise ParseError(f"feature index {index} below 1 (indices are 1-based)")
        if index <= prev_index:
            raise ParseError(f"feature index {index} not strictly increasing after {prev_index}")
        prev_index = index
        if not math.isfinite(value):
            raise ParseError(f"non-finite value in token {token!r}")
        if value != 0.0:
            features.append((index, value))
    return LabeledInstance(label, features)


def format_line(instance: LabeledInstance) -> str:
    """Serialize an instance back to LIBSVM text (no trailing newline).

    Round-trips exactly: ``parse_line(format_line(x)) == x``.
    """
    parts = [repr(instance.label)]
    parts.extend(f"{idx}:{value!r}" for idx, value in instance.features)
    return " ".join(parts)


def stream(path: str | os.PathLike) -> Iterator[LabeledInstance]:
    """Yield instances from ``path`` in file order, one pass, constant memory.

    Parse failures raise :class:`ParseError` carrying the 1-based line number
    of the first bad line. Accepts LF or CRLF endings; UTF-8.
    """
    with open(path, "r", encoding="utf-8", newline=None) as handle:
        for line_no, line in enumerate(handle, start=1):
            try:
                yield parse_line(line)
            except ParseError as exc:
                raise ParseError(str(exc), line_no=line_no, path=os.fspath(path)) from None


def write_instances(path: str | os.PathLike, instances: Iterable[LabeledInstance]) -> int:
    """Write instances as LIBSVM lines; returns the number written."""
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for instance in instances:
            handle.write(format_line(instance))
            handle.write("\n")
            count += 1
    return count


def split(
    path: str | os.PathLike,
    plan: DatasetSplit,
    train_path: str | os.PathLike,
    validation_path: str | os.PathLike,
    test_path: str | os.PathLike,
) -> tuple[int, int, int]:
    """Route every line of ``path`` to exactly one of three output files.

    Each line draws once from a generator seeded with ``plan.seed``, so an
    identical seed reproduces the routing byte for byte. Lines are copied
    verbatim (modulo newline normalization to LF); no parsing happens here.
    Returns the (train, validation, test) line counts.
    """
    rng = random.Random(plan.seed)
    cut_train = plan.train
    cut_validation = plan.train + plan.validation
    counts = [0, 0, 0]
    with open(path, "r", encoding="utf-8", newline=None) as src, \
            open(train_path, "w", encoding="utf-8", newline="\n") as out_train, \
            open(validation_path, "w", encoding="utf-8", newline="\n") as out_validation, \
            open(test_path, "w", encoding="utf-8", newline="\n") as out_test:
        outs = (out_train, out_validation, out_test)
        for line in src:
            line = line.rstrip("\n")
            draw = rng.random()
            if draw < cut_train:
                bucket = 0
            elif draw < cut_validation:
                bucket = 1
            else:
                bucket = 2
            outs[bucket].write(line)
            outs[bucket].write("\n")
            counts[bucket] += 1
    return counts[0], counts[1], counts[2]
