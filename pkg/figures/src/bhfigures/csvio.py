"""Typed readers for the simulation CSV schemas.

Columns are looked up by name from the header line; a missing column
raises SchemaError naming it.  Values arrive as floats except the phase
and branch-label columns, which stay strings.
"""

from __future__ import annotations

import csv

import numpy as np

__all__ = ["SchemaError", "Table", "read_table"]


class SchemaError(KeyError):
    """CSV does not carry a required column."""


class Table:
    def __init__(self, header: list[str], rows: list[list[str]], path: str):
        self.header = header
        self.rows = rows
        self.path = path

    def __len__(self):
        return len(self.rows)

    def _index(self, column: str) -> int:
        try:
            return self.header.index(column)
        except ValueError:
            raise SchemaError(
                f"{self.path}: column {column!r} not in header {self.header}") from None

    def column(self, name: str) -> np.ndarray:
        i = self._index(name)
        return np.array([float(r[i]) for r in self.rows])

    def strings(self, name: str) -> list[str]:
        i = self._index(name)
        return [r[i] for r in self.rows]

    def require(self, *names: str):
        for name in names:
            self._index(name)


def read_table(path) -> Table:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        rows = [row for row in reader if row]
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return Table(header, rows, str(path))
