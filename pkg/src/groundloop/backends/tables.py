"""Table fixtures with header, column, and row lookups."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from ..interfaces import InterfaceResult


@dataclass(frozen=True)
class TableFixture:
    table_id: str
    headers: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]

    def __post_init__(self) -> None:
        for i, row in enumerate(self.rows):
            if len(row) != len(self.headers):
                raise ValueError(
                    f"table '{self.table_id}': row {i} has {len(row)} cells, "
                    f"expected {len(self.headers)}"
                )


def load_tables(paths: Iterable[str | Path]) -> "TableStore":
    tables = []
    for path in paths:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        tables.append(
            TableFixture(
                table_id=raw["table_id"],
                headers=tuple(raw["headers"]),
                rows=tuple(tuple(str(c) for c in row) for row in raw["rows"]),
            )
        )
    return TableStore(tables)


class TableStore:
    def __init__(self, tables: Iterable[TableFixture]) -> None:
        self._tables: dict[str, TableFixture] = {}
        for t in tables:
            if t.table_id in self._tables:
                raise ValueError(f"duplicate table id '{t.table_id}'")
            self._tables[t.table_id] = t

    def get(self, table_id: str) -> TableFixture | None:
        return self._tables.get(table_id)

    def headers(self, table_id: str) -> list[str]:
        return list(self._require(table_id).headers)

    def column(self, table_id: str, header: str) -> list[str]:
        table = self._require(table_id)
        try:
            idx = table.headers.index(header)
        except ValueError:
            raise KeyError(f"Unknown header '{header}' for table '{table_id}'.") from None
        return [row[idx] for row in table.rows]

    def row(self, table_id: str, index: int) -> list[str]:
        table = self._require(table_id)
        if not 0 <= index < len(table.rows):
            raise KeyError(
                f"Row index {index} out of range for table '{table_id}' "
                f"({len(table.rows)} rows, indices start at 0)."
            )
        return list(table.rows[index])

    def _require(self, table_id: str) -> TableFixture:
        table = self._tables.get(table_id)
        if table is None:
            raise KeyError(f"Unknown table id '{table_id}'.")
        return table


def _split_query(query: str) -> tuple[str, str]:
    """Split "table id, rest" on the first comma; table ids contain none."""
    table_id, sep, rest = query.partition(",")
    if not sep:
        raise KeyError("Missing comma separator; expected 'table id, ...'.")
    return table_id.strip(), rest.strip()


class HeaderBackend:
    def __init__(self, store: TableStore) -> None:
        self.store = store

    def __call__(self, query: str) -> InterfaceResult:
        try:
            return InterfaceResult(body=repr(self.store.headers(query.strip())))
        except KeyError as exc:
            return InterfaceResult(body=str(exc.args[0]), is_error=True)


class ColumnBackend:
    def __init__(self, store: TableStore) -> None:
        self.store = store

    def __call__(self, query: str) -> InterfaceResult:
        try:
            table_id, header = _split_query(query)
            return InterfaceResult(body=repr(self.store.column(table_id, header)))
        except KeyError as exc:
            return InterfaceResult(body=str(exc.args[0]), is_error=True)


class RowBackend:
    def __init__(self, store: TableStore) -> None:
        self.store = store

    def __call__(self, query: str) -> InterfaceResult:
        try:
            table_id, index_text = _split_query(query)
            try:
                index = int(index_text)
            except ValueError:
                return InterfaceResult(
                    body=f"Row index must be an integer, got '{index_text}'.", is_error=True
                )
            return InterfaceResult(body=repr(self.store.row(table_id, index)))
        except KeyError as exc:
            return InterfaceResult(body=str(exc.args[0]), is_error=True)
