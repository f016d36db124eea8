"""File formats: numeric CSV matrices, label columns, sparsity-pattern JSON,
and versioned JSON reports.

Matrices are written with 17 significant digits and LF line endings so a
write/read round trip reproduces every double bit-exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .sqa import SparsityPattern

SCHEMA_VERSION = 1


class ParseError(ValueError):
    """Malformed input file; message carries path and line number."""


def read_matrix_csv(path) -> np.ndarray:
    """Read a numeric CSV (rows = observations or matrix rows).

    An optional single header line is skipped.  Raises ``ParseError`` with
    the offending line number on malformed input.
    """
    path = Path(path)
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            cells = [c.strip() for c in line.split(",")]
            try:
                row = [float(c) for c in cells]
            except ValueError:
                if lineno == 1:
                    continue  # header line
                raise ParseError(f"{path}:{lineno}: expected comma-separated numbers, got {line!r}") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ParseError(f"{path}:{lineno}: expected {width} columns, got {len(row)}")
            rows.append(row)
    if not rows:
        raise ParseError(f"{path}: no numeric rows found")
    return np.asarray(rows, dtype=np.float64)


def write_matrix_csv(path, matrix) -> None:
    M = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in M:
            fh.write(",".join(format(v, ".17g") for v in row))
            fh.write("\n")


def read_labels_csv(path) -> np.ndarray:
    """Read a single-column label file (integers if possible, else strings)."""
    path = Path(path)
    labels = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            if "," in line:
                raise ParseError(f"{path}:{lineno}: labels must be a single column")
            labels.append(line)
    if not labels:
        raise ParseError(f"{path}: no labels found")
    try:
        return np.asarray([int(v) for v in labels])
    except ValueError:
        return np.asarray(labels)


def read_pattern_json(path) -> SparsityPattern:
    """Load a sparsity pattern ``{"p": int, "zeros": [[i, j], ...]}``.

    Indices are 1-based in the file; symmetric closure is applied on load.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict) or "p" not in doc or "zeros" not in doc:
        raise ParseError(f'{path}: expected an object with "p" and "zeros"')
    try:
        return SparsityPattern(int(doc["p"]), [(int(i), int(j)) for i, j in doc["zeros"]], one_based=True)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{path}: {exc}") from None


def write_pattern_json(path, pattern: SparsityPattern) -> None:
    zeros = sorted([i + 1, j + 1] for i, j in pattern.pairs if i < j)
    write_json(path, {"p": pattern.dim, "zeros": zeros})


def write_json(path, payload: dict) -> None:
    doc = {"schema": SCHEMA_VERSION}
    doc.update(payload)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
