"""Imputation and constraint-satisfaction metrics, plus the report object.

Continuous error is scored in standardized space so results are comparable
across columns; categorical cells are scored by exact match. Metrics over an
empty cell set return ``None`` rather than a misleading zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from . import autodiff as ad
from .constraints import (CategoricalCE, Conjunction, Disjunction,
                          Imputation, loss_rows)
from .encoding import TabularEncoder
from .errors import ConfigError, NotApplicableError, ShapeError, UsageError
from .scenarios import ConstraintScenario
from .schema import CATEGORICAL, CONTINUOUS

_VIOLATION_TOL = 1e-9


def _check_mask(mask, n_rows: int, n_cols: int) -> np.ndarray:
    arr = np.asarray(mask)
    if arr.shape != (n_rows, n_cols):
        raise ShapeError(
            f"mask: expected shape ({n_rows}, {n_cols}), got {arr.shape}")
    if not np.isin(arr, (0, 1)).all():
        raise ConfigError("mask entries must be 0 or 1")
    return arr.astype(np.int64)


def _column_errors(imputed: pd.DataFrame, truth: pd.DataFrame,
                   mask: np.ndarray, encoder: TabularEncoder):
    """Yield (column, kind, per-cell scores) over masked cells."""
    names = encoder.column_names()
    mask = _check_mask(mask, len(truth), len(names))
    for j, name in enumerate(names):
        if name not in imputed.columns or name not in truth.columns:
            raise ConfigError(f"column {name!r} missing from frames")
        cells = mask[:, j] == 1
        if not cells.any():
            yield name, encoder.column_kind(name), None
            continue
        if encoder.column_kind(name) == CONTINUOUS:
            std = encoder.stds_[name]
            imp = pd.to_numeric(imputed[name], errors="coerce").to_numpy()
            tru = pd.to_numeric(truth[name], errors="coerce").to_numpy()
            diff = (imp[cells] - tru[cells]) / std
            if not np.isfinite(diff).all():
                raise ConfigError(
                    f"column {name!r}: non-numeric value in a masked cell")
            yield name, CONTINUOUS, diff ** 2
        else:
            same = (imputed[name].to_numpy()[cells]
                    == truth[name].to_numpy()[cells])
            yield name, CATEGORICAL, same.astype(np.float64)


def imputation_mse(imputed: pd.DataFrame, truth: pd.DataFrame, mask,
                   encoder: TabularEncoder) -> float | None:
    """Mean squared error over masked continuous cells, standardized units.

    Returns None when the mask selects no continuous cells, so an absent
    measurement cannot be mistaken for a perfect one.
    """
    scores = [s for _, kind, s in _column_errors(imputed, truth, mask,
                                                 encoder)
              if kind == CONTINUOUS and s is not None]
    if not scores:
        return None
    return float(np.concatenate(scores).mean())


def imputation_accuracy(imputed: pd.DataFrame, truth: pd.DataFrame, mask,
                        encoder: TabularEncoder) -> float | None:
    """Percent of masked categorical cells whose value matches the truth.

    Returns None when the mask selects no categorical cells.
    """
    scores = [s for _, kind, s in _column_errors(imputed, truth, mask,
                                                 encoder)
              if kind == CATEGORICAL and s is not None]
    if not scores:
        return None
    return float(np.concatenate(scores).mean() * 100.0)


def _contains_anchoring(spec) -> bool:
    if isinstance(spec, (Imputation, CategoricalCE)):
        return True
    if isinstance(spec, (Conjunction, Disjunction)):
        return any(_contains_anchoring(c) for c in spec.children)
    return False


def violation_rate(samples: pd.DataFrame, spec,
                   encoder: TabularEncoder | None = None) -> float:
    """Percent of rows that fail the constraint's hard check.

    Scenarios are checked directly on decoded rows. Penalty specs are
    encoded and checked by whether their per-row loss is zero; value-match
    losses (imputation, cross-entropy) have no pass/fail reading and raise.
    """
    if isinstance(spec, ConstraintScenario):
        return float((~spec.satisfied(samples)).mean() * 100.0)
    if _contains_anchoring(spec):
        raise NotApplicableError(
            "value-match losses have no hard satisfaction check; use a "
            "range/category scenario")
    if encoder is None:
        raise UsageError("checking a penalty spec needs the encoder")
    encoded = encoder.transform(samples)
    tape = ad.Tape()
    losses = loss_rows(spec, tape.constant(encoded, name="rows")).value
    return float((losses[:, 0] > _VIOLATION_TOL).mean() * 100.0)


def _check_percent(value: float | None, name: str) -> None:
    if value is not None and not 0.0 <= value <= 100.0:
        raise ConfigError(f"{name} must lie in [0, 100], got {value}")


@dataclass
class EvalReport:
    """Metric bundle written next to every imputation/constraint artifact."""

    task: str
    seed: int
    sample_count: int
    continuous_mse: float | None = None
    categorical_accuracy: float | None = None
    violation_percent: float | None = None
    masked_continuous_cells: int = 0
    masked_categorical_cells: int = 0
    per_column: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.sample_count < 0:
            raise ConfigError(
                f"sample_count must be >= 0, got {self.sample_count}")
        if self.continuous_mse is not None and self.continuous_mse < 0:
            raise ConfigError(
                f"continuous_mse must be >= 0, got {self.continuous_mse}")
        _check_percent(self.categorical_accuracy, "categorical_accuracy")
        _check_percent(self.violation_percent, "violation_percent")

    def to_json_dict(self) -> dict:
        return {
            "task": self.task,
            "seed": self.seed,
            "sample_count": self.sample_count,
            "continuous_mse": self.continuous_mse,
            "categorical_accuracy": self.categorical_accuracy,
            "violation_percent": self.violation_percent,
            "masked_continuous_cells": self.masked_continuous_cells,
            "masked_categorical_cells": self.masked_categorical_cells,
            "per_column": self.per_column,
            "extra": self.extra,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "EvalReport":
        return cls(
            task=doc["task"], seed=int(doc["seed"]),
            sample_count=int(doc["sample_count"]),
            continuous_mse=doc.get("continuous_mse"),
            categorical_accuracy=doc.get("categorical_accuracy"),
            violation_percent=doc.get("violation_percent"),
            masked_continuous_cells=int(
                doc.get("masked_continuous_cells", 0)),
            masked_categorical_cells=int(
                doc.get("masked_categorical_cells", 0)),
            per_column=doc.get("per_column", {}),
            extra=doc.get("extra", {}))


def impute_report(imputed: pd.DataFrame, truth: pd.DataFrame, mask,
                  encoder: TabularEncoder, seed: int,
                  extra: dict | None = None) -> EvalReport:
    """Score an imputation run overall and per column."""
    names = encoder.column_names()
    mask = _check_mask(mask, len(truth), len(names))
    per_column: dict = {}
    cont_cells = 0
    cat_cells = 0
    for name, kind, scores in _column_errors(imputed, truth, mask, encoder):
        count = 0 if scores is None else int(scores.size)
        entry: dict = {"kind": kind, "masked_cells": count}
        if kind == CONTINUOUS:
            cont_cells += count
            entry["mse"] = None if scores is None else float(scores.mean())
        else:
            cat_cells += count
            entry["accuracy_percent"] = (
                None if scores is None else float(scores.mean() * 100.0))
        per_column[name] = entry
    return EvalReport(
        task="impute", seed=seed, sample_count=len(truth),
        continuous_mse=imputation_mse(imputed, truth, mask, encoder),
        categorical_accuracy=imputation_accuracy(imputed, truth, mask,
                                                 encoder),
        masked_continuous_cells=cont_cells,
        masked_categorical_cells=cat_cells,
        per_column=per_column, extra=dict(extra or {}))


def constrain_report(samples: pd.DataFrame, scenario: ConstraintScenario,
                     seed: int, extra: dict | None = None) -> EvalReport:
    """Score generated rows against a scenario, with per-child splits."""
    merged = dict(extra or {})
    if scenario.children:
        merged["children"] = [
            {"kind": child.kind, "column": child.column,
             "violation_percent": violation_rate(samples, child)}
            for child in scenario.children]
    return EvalReport(
        task="constrain", seed=seed, sample_count=len(samples),
        violation_percent=violation_rate(samples, scenario),
        extra=merged)
