"""Matrix Market reading and writing.

Supports the ``matrix`` object in ``coordinate`` and ``array`` formats with
``real``, ``integer`` and ``pattern`` fields and ``general``, ``symmetric``
and ``skew-symmetric`` storage. Complex and Hermitian data are refused.
"""

import io
import os

import numpy as np
import scipy.sparse as sp

from .exceptions import InvalidInputError

__all__ = ["MatrixMarketError", "read_matrix_market", "write_matrix_market"]

_FORMATS = ("coordinate", "array")
_FIELDS = ("real", "double", "integer", "pattern")
_SYMMETRIES = ("general", "symmetric", "skew-symmetric")


class MatrixMarketError(InvalidInputError):
    """Malformed or unsupported Matrix Market input.

    Attributes
    ----------
    line : int or None
        1-based line number of the offending line.
    """

    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


def _open(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="ascii", errors="replace")
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="ascii", errors="replace")


def _parse_header(line, lineno):
    tokens = line.split()
    if not tokens or tokens[0].lower() != "%%matrixmarket":
        raise MatrixMarketError("missing %%MatrixMarket banner", lineno)
    if len(tokens) != 5:
        raise MatrixMarketError(f"banner needs 5 fields, found {len(tokens)}", lineno)
    obj, fmt, field, sym = (t.lower() for t in tokens[1:])
    if obj != "matrix":
        raise MatrixMarketError(f"unsupported object {obj!r}", lineno)
    if fmt not in _FORMATS:
        raise MatrixMarketError(f"unknown format {fmt!r}", lineno)
    if field == "complex" or sym == "hermitian":
        raise MatrixMarketError("complex matrices are not supported", lineno)
    if field not in _FIELDS:
        raise MatrixMarketError(f"unknown field {field!r}", lineno)
    if sym not in _SYMMETRIES:
        raise MatrixMarketError(f"unknown symmetry {sym!r}", lineno)
    if fmt == "array" and field == "pattern":
        raise MatrixMarketError("pattern field is invalid for array format", lineno)
    if sym == "skew-symmetric" and field == "pattern":
        raise MatrixMarketError("pattern field cannot be skew-symmetric", lineno)
    return fmt, field, sym


def _data_lines(f, start):
    """Yield ``(lineno, tokens)`` for non-comment, non-blank lines."""
    for lineno, line in enumerate(f, start=start):
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        yield lineno, s.split()


def _ints(tokens, count, lineno, what):
    if len(tokens) != count:
        raise MatrixMarketError(f"{what} needs {count} integers, found {len(tokens)}", lineno)
    try:
        vals = [int(t) for t in tokens]
    except ValueError as exc:
        raise MatrixMarketError(f"bad integer in {what}: {exc}", lineno) from None
    if any(v < 0 for v in vals):
        raise MatrixMarketError(f"negative value in {what}", lineno)
    return vals


def _value(tok, field, lineno):
    try:
        return float(int(tok)) if field == "integer" else float(tok)
    except ValueError:
        raise MatrixMarketError(f"bad {field} value {tok!r}", lineno) from None


def read_matrix_market(source):
    """Read a Matrix Market file into a CSR matrix.

    Symmetric storage is mirrored (skew-symmetric with a sign change),
    pattern entries become 1 and repeated coordinates are summed.

    Parameters
    ----------
    source : path or file object

    Returns
    -------
    scipy.sparse.csr_matrix

    Raises
    ------
    MatrixMarketError
        With the 1-based line number of the first problem.
    """
    f = _open(source)
    try:
        first = f.readline()
        fmt, field, sym = _parse_header(first, 1)
        lines = _data_lines(f, 2)
        try:
            lineno, tokens = next(lines)
        except StopIteration:
            raise MatrixMarketError("missing size line", 2) from None
        if fmt == "coordinate":
            nrows, ncols, nnz = _ints(tokens, 3, lineno, "size line")
            rows = np.empty(nnz, dtype=np.int64)
            cols = np.empty(nnz, dtype=np.int64)
            vals = np.ones(nnz)
            width = 2 if field == "pattern" else 3
            k = 0
            for lineno, tokens in lines:
                if k == nnz:
                    raise MatrixMarketError(f"more than {nnz} entries", lineno)
                if len(tokens) != width:
                    raise MatrixMarketError(
                        f"entry needs {width} fields, found {len(tokens)}", lineno
                    )
                i, j = _ints(tokens[:2], 2, lineno, "entry index")
                if not (1 <= i <= nrows and 1 <= j <= ncols):
                    raise MatrixMarketError(f"index ({i}, {j}) out of range", lineno)
                rows[k], cols[k] = i - 1, j - 1
                if width == 3:
                    vals[k] = _value(tokens[2], field, lineno)
                k += 1
            if k != nnz:
                raise MatrixMarketError(
                    f"unexpected end of file: expected {nnz} entries, found {k}", lineno + 1
                )
        else:
            nrows, ncols = _ints(tokens, 2, lineno, "size line")
            if sym != "general" and nrows != ncols:
                raise MatrixMarketError("symmetric storage needs a square matrix", lineno)
            if sym == "general":
                pos = [(i, j) for j in range(ncols) for i in range(nrows)]
            elif sym == "symmetric":
                pos = [(i, j) for j in range(ncols) for i in range(j, nrows)]
            else:
                pos = [(i, j) for j in range(ncols) for i in range(j + 1, nrows)]
            values = []
            for lineno, tokens in lines:
                if len(tokens) != 1:
                    raise MatrixMarketError("array entries hold one value per line", lineno)
                if len(values) == len(pos):
                    raise MatrixMarketError(f"more than {len(pos)} entries", lineno)
                values.append(_value(tokens[0], field, lineno))
            if len(values) != len(pos):
                raise MatrixMarketError(
                    f"unexpected end of file: expected {len(pos)} entries, found {len(values)}",
                    lineno + 1,
                )
            idx = np.array(pos, dtype=np.int64).reshape(-1, 2)
            rows, cols, vals = idx[:, 0], idx[:, 1], np.array(values)
    finally:
        if isinstance(source, (str, os.PathLike)):
            f.close()

    if sym != "general":
        if nrows != ncols:
            raise MatrixMarketError("symmetric storage needs a square matrix")
        off = rows != cols
        sign = -1.0 if sym == "skew-symmetric" else 1.0
        rows, cols, vals = (
            np.concatenate([rows, cols[off]]),
            np.concatenate([cols, rows[off]]),
            np.concatenate([vals, sign * vals[off]]),
        )
    a = sp.csr_matrix((vals, (rows, cols)), shape=(nrows, ncols))
    a.sum_duplicates()
    if fmt == "array":
        a.eliminate_zeros()
    return a


def write_matrix_market(target, a, field="real", symmetry="general", comment=None):
    """Write a matrix in coordinate format with 17 significant digits.

    Parameters
    ----------
    target : path or text file object
    a : sparse matrix or array_like
    field : {"real", "integer", "pattern"}
    symmetry : {"general", "symmetric"}
        ``"symmetric"`` stores the lower triangle and requires ``a == a.T``.
    comment : str, optional
        Written as ``%`` lines after the banner.
    """
    if field not in ("real", "integer", "pattern"):
        raise InvalidInputError(f"unsupported field {field!r}")
    if symmetry not in ("general", "symmetric"):
        raise InvalidInputError(f"unsupported symmetry {symmetry!r}")
    m = sp.coo_matrix(a)
    m.sum_duplicates()
    if symmetry == "symmetric":
        if m.shape[0] != m.shape[1] or (m != m.T).nnz:
            raise InvalidInputError("matrix is not symmetric")
        keep = m.row >= m.col
        m = sp.coo_matrix((m.data[keep], (m.row[keep], m.col[keep])), shape=m.shape)
    order = np.lexsort((m.row, m.col))
    rows, cols, vals = m.row[order] + 1, m.col[order] + 1, m.data[order]
    out = io.StringIO()
    out.write(f"%%MatrixMarket matrix coordinate {field} {symmetry}\n")
    for line in (comment or "").splitlines():
        out.write(f"% {line}\n")
    out.write(f"{m.shape[0]} {m.shape[1]} {rows.size}\n")
    if field == "pattern":
        for i, j in zip(rows, cols):
            out.write(f"{i} {j}\n")
    elif field == "integer":
        for i, j, v in zip(rows, cols, vals):
            out.write(f"{i} {j} {int(v)}\n")
    else:
        for i, j, v in zip(rows, cols, vals):
            out.write(f"{i} {j} {v:.17g}\n")
    text = out.getvalue()
    if isinstance(target, (str, os.PathLike)):
        with open(target, "w", encoding="ascii") as f:
            f.write(text)
    else:
        target.write(text)
