"""Constraint scenarios for evaluation: tail ranges, minority categories,
and their boolean combinations, each with exact train-set coverage."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .constraints import ConstraintSpec, spec_from_json
from .errors import TaskError
from .schema import CATEGORICAL, CONTINUOUS, TabularSchema

SCENARIO_KINDS = ("range", "category", "and", "or")
DEFAULT_QUANTILE = 0.8


@dataclass(frozen=True)
class ConstraintScenario:
    """A checkable constraint plus the loss spec used to steer toward it."""

    kind: str
    seed: int
    coverage: float
    spec_doc: dict = field(repr=False)
    column: str | None = None
    threshold: float | None = None
    category: object = None
    quantile: float | None = None
    children: tuple["ConstraintScenario", ...] = ()

    def satisfied(self, frame: pd.DataFrame) -> np.ndarray:
        """Hard per-row check of the constraint on decoded rows."""
        if self.kind == "range":
            vals = pd.to_numeric(frame[self.column], errors="coerce")
            return (vals >= self.threshold).to_numpy()
        if self.kind == "category":
            return (frame[self.column] == self.category).to_numpy()
        checks = [child.satisfied(frame) for child in self.children]
        if self.kind == "and":
            return np.logical_and.reduce(checks)
        return np.logical_or.reduce(checks)

    def to_spec(self, encoder) -> ConstraintSpec:
        """Resolve the stored column-level document against an encoder."""
        return spec_from_json(self.spec_doc, encoder)

    def to_json_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "seed": self.seed,
            "coverage": self.coverage,
            "spec": self.spec_doc,
        }
        if self.column is not None:
            out["column"] = self.column
        if self.threshold is not None:
            out["threshold"] = self.threshold
        if self.category is not None:
            out["category"] = self.category
        if self.quantile is not None:
            out["quantile"] = self.quantile
        if self.children:
            out["children"] = [c.to_json_dict() for c in self.children]
        return out

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ConstraintScenario":
        return cls(
            kind=doc["kind"], seed=int(doc["seed"]),
            coverage=float(doc["coverage"]), spec_doc=doc["spec"],
            column=doc.get("column"), threshold=doc.get("threshold"),
            category=doc.get("category"), quantile=doc.get("quantile"),
            children=tuple(cls.from_json_dict(c)
                           for c in doc.get("children", ())))


def _continuous_names(schema: TabularSchema) -> list[str]:
    return [c.name for c in schema.modeled_columns if c.kind == CONTINUOUS]


def _categorical_names(schema: TabularSchema) -> list[str]:
    return [c.name for c in schema.modeled_columns if c.kind == CATEGORICAL]


def _gen_range(train: pd.DataFrame, schema: TabularSchema, rng, seed: int,
               quantile: float) -> ConstraintScenario:
    names = _continuous_names(schema)
    if not names:
        raise TaskError("range scenario needs a continuous column")
    column = names[int(rng.integers(len(names)))]
    values = pd.to_numeric(train[column], errors="coerce").dropna()
    threshold = float(np.quantile(values.to_numpy(), quantile))
    coverage = float((values >= threshold).mean())
    doc = {"type": "inequality", "column": column, "lower": threshold}
    return ConstraintScenario(kind="range", seed=seed, coverage=coverage,
                              spec_doc=doc, column=column,
                              threshold=threshold, quantile=quantile)


def _gen_category(train: pd.DataFrame, schema: TabularSchema, rng,
                  seed: int) -> ConstraintScenario:
    names = _categorical_names(schema)
    if not names:
        raise TaskError("category scenario needs a categorical column")
    # prefer a column where a non-majority class exists
    rng_order = list(rng.permutation(len(names)))
    for idx in rng_order:
        column = names[idx]
        counts = train[column].value_counts()
        if len(counts) >= 2:
            observed = counts.index.tolist()  # python-native values
            majority = observed[0]
            minority = sorted((v for v in observed if v != majority), key=str)
            category = minority[int(rng.integers(len(minority)))]
            coverage = float((train[column] == category).mean())
            doc = {"type": "equality", "column": column, "category": category}
            return ConstraintScenario(kind="category", seed=seed,
                                      coverage=coverage, spec_doc=doc,
                                      column=column, category=category)
    raise TaskError("no categorical column with >= 2 observed classes")


def gen_constraint_scenario(kind: str, train_data: pd.DataFrame,
                            schema: TabularSchema, seed: int = 0,
                            quantile: float = DEFAULT_QUANTILE
                            ) -> ConstraintScenario:
    """Draw a scenario of the requested kind from the training table.

    Range thresholds sit at the ``quantile`` tail of a random continuous
    column; category targets avoid the majority class. "and"/"or" compose
    one range with one category scenario and report exact coverage.
    """
    if kind not in SCENARIO_KINDS:
        raise TaskError(f"kind must be one of {SCENARIO_KINDS}, got {kind!r}")
    if not 0.0 < quantile < 1.0:
        raise TaskError(f"quantile must lie in (0, 1), got {quantile}")
    rng = np.random.default_rng(seed)

    if kind == "range":
        return _gen_range(train_data, schema, rng, seed, quantile)
    if kind == "category":
        return _gen_category(train_data, schema, rng, seed)

    range_child = _gen_range(train_data, schema, rng, seed, quantile)
    cat_child = _gen_category(train_data, schema, rng, seed)
    children = (range_child, cat_child)
    both = np.stack([c.satisfied(train_data) for c in children])
    if kind == "and":
        coverage = float(np.logical_and.reduce(both).mean())
        doc = {"type": "and",
               "children": [c.spec_doc for c in children]}
    else:
        coverage = float(np.logical_or.reduce(both).mean())
        doc = {"type": "or",
               "children": [c.spec_doc for c in children]}
    return ConstraintScenario(kind=kind, seed=seed, coverage=coverage,
                              spec_doc=doc, children=children,
                              quantile=quantile)
