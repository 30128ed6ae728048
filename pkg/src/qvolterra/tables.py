"""Deterministic CSV output shared by the response, oracle and CLI layers."""

from __future__ import annotations

import io
from typing import Mapping, Sequence

import numpy as np


def fmt(x) -> str:
    """Lossless decimal for a double (17 significant digits)."""
    return format(float(x), ".17g")


def write_csv(stream, columns: Sequence[str], data: Sequence, header: Mapping | None = None,
              comments: Sequence[str] = ()):
    """Write ``#``-prefixed ``key = value`` header lines then a CSV table.

    ``data`` is a sequence of equal-length real columns.
    """
    for key, value in (header or {}).items():
        stream.write(f"# {key} = {value}\n")
    for line in comments:
        stream.write(f"# {line}\n")
    stream.write(",".join(columns) + "\n")
    cols = [np.asarray(c, dtype=float).reshape(-1) for c in data]
    n = len(cols[0]) if cols else 0
    if any(len(c) != n for c in cols):
        raise ValueError("columns differ in length")
    for i in range(n):
        stream.write(",".join(fmt(c[i]) for c in cols) + "\n")


def csv_string(columns, data, header=None, comments=()) -> str:
    buf = io.StringIO()
    write_csv(buf, columns, data, header, comments)
    return buf.getvalue()


def read_csv(text: str):
    """Parse output of :func:`write_csv`; returns ``(header, columns, array)``."""
    header, rows, columns = {}, [], None
    for line in text.splitlines():
        if line.startswith("#"):
            body = line[1:].strip()
            if " = " in body:
                k, v = body.split(" = ", 1)
                header[k] = v
        elif columns is None:
            columns = line.split(",")
        elif line.strip():
            rows.append([float(v) for v in line.split(",")])
    columns = columns or []
    return header, columns, np.array(rows, dtype=float).reshape(len(rows), len(columns))
