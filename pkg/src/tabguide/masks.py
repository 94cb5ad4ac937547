"""Synthetic missingness masks: MCAR, MAR, MNAR.

Mask bit 1 = missing. MAR holds a random column subset fully observed and
masks the rest with per-row logistic probabilities driven by the observed
values; MNAR splits the columns in two groups, masks the second by a
logistic on the first group's values and the first completely at random.
Both tune a shared bias by bisection so the expected missing fraction over
the maskable cells hits the requested ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .autodiff import stable_sigmoid
from .errors import TaskError
from .schema import CONTINUOUS, TabularSchema

BIAS_BRACKET = 20.0
BIAS_ITERATIONS = 60


@dataclass(frozen=True)
class MaskTask:
    """A realized missingness pattern over a table."""

    mechanism: str
    ratio: float
    seed: int
    mask: np.ndarray                      # (n, c) uint8, 1 = missing
    columns: tuple[str, ...] | None = None
    maskable: np.ndarray | None = None    # (c,) bool; None = every column
    observed_columns: tuple[str, ...] = ()
    groups: tuple[tuple[str, ...], tuple[str, ...]] | None = None

    @property
    def realized_fraction(self) -> float:
        """Missing fraction over the cells the mechanism may mask."""
        if self.maskable is None:
            return float(self.mask.mean())
        return float(self.mask[:, self.maskable].mean())


def _check_ratio(ratio: float) -> float:
    if not 0.0 < ratio < 1.0:
        raise TaskError(f"ratio must lie in (0, 1), got {ratio}")
    return float(ratio)


def gen_mcar(rows: int, cols: int, ratio: float, seed: int) -> MaskTask:
    """Mask each cell independently with probability ``ratio``."""
    ratio = _check_ratio(ratio)
    if rows < 1 or cols < 1:
        raise TaskError(f"need positive grid, got {rows} x {cols}")
    rng = np.random.default_rng(seed)
    mask = (rng.random((rows, cols)) < ratio).astype(np.uint8)
    return MaskTask(mechanism="mcar", ratio=ratio, seed=int(seed), mask=mask)


def _numeric_view(frame: pd.DataFrame, columns: list[str],
                  schema: TabularSchema) -> np.ndarray:
    """Z-scored numeric stand-in for the named columns (codes for
    categoricals), used as the logistic driver."""
    out = np.zeros((len(frame), len(columns)))
    for j, name in enumerate(columns):
        col = schema.column(name)
        if col.kind == CONTINUOUS:
            vals = pd.to_numeric(frame[name], errors="coerce")
            if vals.isna().any():
                raise TaskError(
                    f"column {name!r}: non-numeric or missing value in "
                    f"mask-driver data")
            arr = vals.to_numpy(dtype=np.float64)
        else:
            cats = sorted(set(frame[name].tolist()), key=str)
            codes = {v: i for i, v in enumerate(cats)}
            arr = np.array([codes[v] for v in frame[name]], dtype=np.float64)
        std = arr.std(ddof=0)
        out[:, j] = (arr - arr.mean()) / (std if std > 0 else 1.0)
    return out


def _tune_bias(scores: np.ndarray, ratio: float) -> float:
    """Bisect the logistic bias so the mean probability hits ``ratio``."""

    def frac(b: float) -> float:
        return float(stable_sigmoid(scores + b).mean())

    lo, hi = -BIAS_BRACKET, BIAS_BRACKET
    if frac(lo) > ratio or frac(hi) < ratio:
        raise TaskError(
            f"bias search cannot reach ratio {ratio} within "
            f"[-{BIAS_BRACKET}, {BIAS_BRACKET}]")
    for _ in range(BIAS_ITERATIONS):
        mid = (lo + hi) / 2.0
        if frac(mid) < ratio:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0


def _modeled_names(schema: TabularSchema) -> list[str]:
    return [c.name for c in schema.modeled_columns]


def gen_mar(rows: pd.DataFrame, schema: TabularSchema, ratio: float,
            n_observed_cols: int | None = None, seed: int = 0) -> MaskTask:
    """Hold a random column subset observed; mask the rest at logistic
    per-row probabilities driven by the observed values."""
    ratio = _check_ratio(ratio)
    names = _modeled_names(schema)
    c = len(names)
    if n_observed_cols is None:
        n_observed_cols = math.ceil(0.3 * c)
    if not 1 <= n_observed_cols < c:
        raise TaskError(
            f"n_observed_cols must lie in [1, {c - 1}], got {n_observed_cols}")

    rng = np.random.default_rng(seed)
    obs_idx = np.sort(rng.choice(c, size=n_observed_cols, replace=False))
    observed = [names[i] for i in obs_idx]
    maskable_names = [n for n in names if n not in observed]

    weights = rng.standard_normal(len(observed))
    scores = _numeric_view(rows, observed, schema) @ weights
    bias = _tune_bias(scores, ratio)
    p_row = stable_sigmoid(scores + bias)

    mask = np.zeros((len(rows), c), dtype=np.uint8)
    draws = rng.random((len(rows), len(maskable_names)))
    cells = (draws < p_row[:, None]).astype(np.uint8)
    maskable = np.array([n in maskable_names for n in names])
    mask[:, maskable] = cells
    return MaskTask(mechanism="mar", ratio=ratio, seed=int(seed), mask=mask,
                    columns=tuple(names), maskable=maskable,
                    observed_columns=tuple(observed))


def gen_mnar(rows: pd.DataFrame, schema: TabularSchema, ratio: float,
             seed: int = 0) -> MaskTask:
    """Two-group self/peer-dependent masking.

    The second column group is masked by a logistic on the first group's
    values; the first group is masked completely at random at the same rate.
    """
    ratio = _check_ratio(ratio)
    names = _modeled_names(schema)
    c = len(names)
    if c < 2:
        raise TaskError(f"mnar needs >= 2 columns, got {c}")

    rng = np.random.default_rng(seed)
    perm = rng.permutation(c)
    group1 = [names[i] for i in sorted(perm[:c // 2])]
    group2 = [names[i] for i in sorted(perm[c // 2:])]

    weights = rng.standard_normal(len(group1))
    scores = _numeric_view(rows, group1, schema) @ weights
    bias = _tune_bias(scores, ratio)
    p_row = stable_sigmoid(scores + bias)

    n = len(rows)
    mask = np.zeros((n, c), dtype=np.uint8)
    g2_cells = (rng.random((n, len(group2))) < p_row[:, None]).astype(np.uint8)
    g1_cells = (rng.random((n, len(group1))) < ratio).astype(np.uint8)
    in_g1 = np.array([name in group1 for name in names])
    mask[:, in_g1] = g1_cells
    mask[:, ~in_g1] = g2_cells
    return MaskTask(mechanism="mnar", ratio=ratio, seed=int(seed), mask=mask,
                    columns=tuple(names), groups=(tuple(group1),
                                                  tuple(group2)))


# -- CSV round trip -----------------------------------------------------------

def save_mask_csv(task: MaskTask, path, columns: list[str] | None = None,
                  provenance: str | None = None) -> None:
    """Write the mask as 0/1 bits aligned with the data columns."""
    names = columns or (list(task.columns) if task.columns else
                        [f"c{i}" for i in range(task.mask.shape[1])])
    frame = pd.DataFrame(task.mask.astype(int), columns=names)
    with open(path, "w", encoding="utf-8") as fh:
        if provenance:
            fh.write(f"# {provenance}\n")
        frame.to_csv(fh, index=False)


def load_mask_csv(path) -> tuple[np.ndarray, list[str]]:
    frame = pd.read_csv(path, comment="#")
    mask = frame.to_numpy()
    if not np.isin(mask, (0, 1)).all():
        raise TaskError(f"mask file {path} contains non-bit entries")
    return mask.astype(np.uint8), [str(c) for c in frame.columns]
