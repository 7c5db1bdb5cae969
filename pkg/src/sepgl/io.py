"""Text formats: group files, GMT gene-set collections, numeric CSV.

Group file::

    # comment
    p=3
    A<TAB>1<TAB>1,2
    B<TAB>1<TAB>1,2,3

One group per line as ``name<TAB>weight<TAB>indices`` with 1-based, strictly
increasing indices. Parsers reject malformed input instead of guessing.
"""
from __future__ import annotations

import csv
import io
import warnings
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import EmptyAfterFilter, GroupStructureError, NonNumericCell, ParseError, RaggedRows
from .groups import GroupStructure
from .simgen import group_weights

__all__ = [
    "parse_group_file",
    "format_group_file",
    "import_gmt",
    "load_matrix_csv",
    "format_matrix_csv",
    "load_vector",
    "format_vector",
]


def _lines(text):
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        yield lineno, line


def parse_group_file(text: str) -> GroupStructure:
    """Parse a group file into a validated :class:`GroupStructure` (0-based)."""
    lines = list(_lines(text))
    if not lines or not lines[0][1].strip().startswith("p="):
        raise ParseError(lines[0][0] if lines else 1, "expected p=")
    lineno, header = lines[0]
    try:
        p = int(header.strip()[2:])
    except ValueError:
        raise ParseError(lineno, f"bad variable count {header.strip()[2:]!r}") from None
    if p < 1:
        raise ParseError(lineno, "p must be positive")
    names, weights, groups = [], [], []
    for lineno, line in lines[1:]:
        fields = line.split("\t")
        if len(fields) != 3:
            raise ParseError(lineno, f"expected 3 tab-separated fields, got {len(fields)}")
        name, w, idx = fields
        try:
            weight = float(w)
        except ValueError:
            raise ParseError(lineno, f"bad weight {w!r}") from None
        try:
            members = [int(tok) for tok in idx.split(",")]
        except ValueError:
            raise ParseError(lineno, f"bad index list {idx!r}") from None
        if any(b <= a for a, b in zip(members, members[1:])):
            raise ParseError(lineno, "indices must be strictly increasing")
        names.append(name)
        weights.append(weight)
        groups.append([k - 1 for k in members])
    return GroupStructure(p, groups, weights, names)


def format_group_file(gs: GroupStructure) -> str:
    out = [f"p={gs.p}"]
    for name, w, G in zip(gs.names, gs.weights, gs.groups):
        out.append(f"{name}\t{float(w)!r}\t{','.join(str(j + 1) for j in G)}")
    return "\n".join(out) + "\n"


def import_gmt(gmt_text: str, symbol_header: Sequence[str], weight_rule="sqrt") -> Tuple[GroupStructure, np.ndarray]:
    """Map GMT gene sets onto design-matrix columns.

    Symbols absent from ``symbol_header`` are dropped, sets left empty are
    dropped with a warning, and columns in no set are excluded. Returns the
    group structure over the retained columns and ``retained``, the original
    column index of each retained column. Weights use the post-filter sizes.
    """
    header = list(symbol_header)
    position = {}
    for k, sym in enumerate(header):
        if sym in position:
            raise ParseError(1, f"duplicate symbol {sym!r} in the matrix header")
        position[sym] = k
    names, sets = [], []
    for lineno, line in _lines(gmt_text):
        fields = line.split("\t")
        if len(fields) < 2:
            raise ParseError(lineno, "a gene set needs a name and a description")
        cols = sorted({position[s.strip()] for s in fields[2:] if s.strip() in position})
        if not cols:
            warnings.warn(f"gene set {fields[0]!r} has no symbol in the header; dropped", stacklevel=2)
            continue
        names.append(fields[0])
        sets.append(cols)
    if not sets:
        raise EmptyAfterFilter("no gene set overlaps the matrix header")
    retained = np.array(sorted(set().union(*sets)), dtype=np.int64)
    new_index = {c: k for k, c in enumerate(retained.tolist())}
    groups = [[new_index[c] for c in cols] for cols in sets]
    weights = group_weights([len(G) for G in groups], weight_rule)
    return GroupStructure(len(retained), groups, weights, names), retained


def _to_float(cell, row, col):
    try:
        value = float(cell)
    except ValueError:
        raise NonNumericCell(row, f"column {col}: {cell!r} is not a number") from None
    if not np.isfinite(value):
        raise NonNumericCell(row, f"column {col}: {cell!r} is not finite")
    return value


def _is_number(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_matrix_csv(text: str, header: Optional[bool] = None) -> Tuple[np.ndarray, Optional[List[str]]]:
    """Read a rectangular CSV of finite reals.

    ``header=None`` treats the first row as symbols when none of its cells
    parse as numbers. Row numbers in errors are 1-based file lines.
    """
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if not rows:
        raise ParseError(1, "empty matrix")
    names = None
    if header is None:
        header = not any(_is_number(c) for c in rows[0])
    first = 0
    if header:
        names = [c.strip() for c in rows[0]]
        first = 1
    width = len(rows[first]) if len(rows) > first else len(rows[0])
    data = []
    for i, r in enumerate(rows[first:], start=first + 1):
        if len(r) != width:
            raise RaggedRows(i)
        data.append([_to_float(c, i, j + 1) for j, c in enumerate(r)])
    if names is not None and len(names) != width:
        raise RaggedRows(1)
    return np.array(data, dtype=np.float64).reshape(len(data), width), names


def format_matrix_csv(M, header: Optional[Sequence[str]] = None) -> str:
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    if header is not None:
        writer.writerow(header)
    for row in M:
        writer.writerow([repr(float(x)) for x in row])
    return out.getvalue()


def load_vector(text: str) -> np.ndarray:
    """A vector written one value per line or as a single CSV row/column."""
    M, _ = load_matrix_csv(text, header=False)
    if M.ndim == 2 and 1 not in M.shape:
        raise ParseError(1, f"expected a vector, got a {M.shape[0]}x{M.shape[1]} matrix")
    return M.ravel()


def format_vector(v) -> str:
    return "".join(f"{float(x)!r}\n" for x in np.ravel(v))
