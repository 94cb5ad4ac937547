"""Table schemas: typed columns, optional excluded target, JSON round trip."""

from __future__ import annotations

from dataclasses import dataclass

import pandas as pd

from .errors import ConfigError

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class Column:
    """One table column: continuous, or categorical with cardinality >= 2."""

    name: str
    kind: str
    cardinality: int | None = None

    def __post_init__(self):
        if self.kind not in (CONTINUOUS, CATEGORICAL):
            raise ConfigError(
                f"column {self.name!r}: kind must be '{CONTINUOUS}' or "
                f"'{CATEGORICAL}', got {self.kind!r}")
        if self.kind == CATEGORICAL:
            if self.cardinality is not None and self.cardinality < 2:
                raise ConfigError(
                    f"column {self.name!r}: categorical cardinality must be "
                    f">= 2, got {self.cardinality}")
        elif self.cardinality is not None:
            raise ConfigError(
                f"column {self.name!r}: continuous columns take no "
                f"cardinality")


@dataclass(frozen=True)
class TabularSchema:
    """Ordered column list plus an optional target column left unmodeled."""

    columns: tuple[Column, ...]
    target_column: str | None = None

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate column names in schema: {names}")
        if not self.modeled_columns:
            raise ConfigError("schema has no modeled columns")

    @property
    def modeled_columns(self) -> tuple[Column, ...]:
        return tuple(c for c in self.columns if c.name != self.target_column)

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise ConfigError(f"no column named {name!r} in schema")

    def to_json_dict(self) -> dict:
        cols = []
        for c in self.columns:
            entry: dict = {"name": c.name, "kind": c.kind}
            if c.cardinality is not None:
                entry["cardinality"] = c.cardinality
            cols.append(entry)
        out: dict = {"columns": cols}
        if self.target_column is not None:
            out["target_column"] = self.target_column
        return out

    @classmethod
    def from_json_dict(cls, doc: dict) -> "TabularSchema":
        try:
            cols = tuple(
                Column(name=c["name"], kind=c["kind"],
                       cardinality=c.get("cardinality"))
                for c in doc["columns"])
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed schema document: {exc}") from exc
        return cls(columns=cols, target_column=doc.get("target_column"))


def infer_schema(frame: pd.DataFrame,
                 target_column: str | None = None) -> TabularSchema:
    """Numeric-parseable columns become continuous, everything else
    categorical with the observed cardinality."""
    if target_column is not None and target_column not in frame.columns:
        raise ConfigError(
            f"target column {target_column!r} not present in the table")
    cols = []
    for name in frame.columns:
        series = frame[name].dropna()
        as_num = pd.to_numeric(series, errors="coerce")
        if len(series) > 0 and not as_num.isna().any():
            cols.append(Column(name=str(name), kind=CONTINUOUS))
        else:
            cols.append(Column(name=str(name), kind=CATEGORICAL,
                               cardinality=max(int(series.nunique()), 2)))
    return TabularSchema(columns=tuple(cols), target_column=target_column)
