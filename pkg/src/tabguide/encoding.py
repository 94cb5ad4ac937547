"""Bidirectional map between raw table rows and ambient vectors.

Continuous columns are standardized with training-split statistics
(population std); categorical columns become exact one-hot blocks. Decoding
de-standardizes and takes the argmax per block, ties to the lowest index.
"""

from __future__ import annotations

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import DecodeError, EncodeError, FitError
from .schema import CATEGORICAL, CONTINUOUS, TabularSchema, infer_schema


class TabularEncoder(TransformerMixin, BaseEstimator):
    """Fit on a clean training split, then encode/decode arbitrary rows.

    Immutable after ``fit``; safe to share across threads. Rows containing
    missing values in modeled columns are dropped before fitting.
    """

    def __init__(self, schema: TabularSchema | None = None):
        self.schema = schema

    # -- fitting -------------------------------------------------------------

    def fit(self, X: pd.DataFrame, y=None) -> "TabularEncoder":
        frame = pd.DataFrame(X)
        schema = self.schema if self.schema is not None else infer_schema(frame)
        modeled = schema.modeled_columns
        missing_cols = [c.name for c in modeled if c.name not in frame.columns]
        if missing_cols:
            raise FitError(f"table lacks schema columns: {missing_cols}")

        frame = frame[[c.name for c in modeled]].dropna(axis=0, how="any")
        if len(frame) < 2:
            raise FitError(
                f"need at least 2 complete rows to fit, got {len(frame)}")

        means: dict[str, float] = {}
        stds: dict[str, float] = {}
        categories: dict[str, tuple] = {}
        layout: list[tuple[str, str, int, int]] = []
        pos = 0
        for col in modeled:
            values = frame[col.name]
            if col.kind == CONTINUOUS:
                numeric = pd.to_numeric(values, errors="coerce")
                if numeric.isna().any():
                    bad = values[numeric.isna()].iloc[0]
                    raise FitError(
                        f"column {col.name!r}: non-numeric value {bad!r} in a "
                        f"continuous column")
                arr = numeric.to_numpy(dtype=np.float64)
                mean = float(arr.mean())
                std = float(arr.std(ddof=0))
                if std == 0.0:
                    raise FitError(
                        f"column {col.name!r}: constant continuous column "
                        f"(std = 0) cannot be standardized")
                means[col.name] = mean
                stds[col.name] = std
                layout.append((col.name, CONTINUOUS, pos, pos + 1))
                pos += 1
            else:
                observed = sorted(set(values.tolist()), key=str)
                width = col.cardinality if col.cardinality is not None else \
                    len(observed)
                if len(observed) > width:
                    raise FitError(
                        f"column {col.name!r}: {len(observed)} observed "
                        f"categories exceed declared cardinality {width}")
                if width < 2:
                    raise FitError(
                        f"column {col.name!r}: needs >= 2 categories, "
                        f"observed {observed}")
                categories[col.name] = tuple(observed)
                layout.append((col.name, CATEGORICAL, pos, pos + width))
                pos += width

        self.schema_ = schema
        self.means_ = means
        self.stds_ = stds
        self.categories_ = categories
        self.layout_ = tuple(layout)
        self.dim_ = pos
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "layout_"):
            raise EncodeError("encoder is not fitted")

    # -- encoding ------------------------------------------------------------

    def transform(self, X: pd.DataFrame) -> np.ndarray:
        """Encode complete rows into an (n, d) float64 matrix."""
        self._check_fitted()
        frame = pd.DataFrame(X)
        out = np.zeros((len(frame), self.dim_))
        for name, kind, start, stop in self.layout_:
            if name not in frame.columns:
                raise EncodeError(f"column {name!r} missing from input rows")
            values = frame[name]
            if values.isna().any():
                raise EncodeError(
                    f"column {name!r}: missing value in rows to encode")
            if kind == CONTINUOUS:
                numeric = pd.to_numeric(values, errors="coerce")
                if numeric.isna().any():
                    bad = values[numeric.isna()].iloc[0]
                    raise EncodeError(
                        f"column {name!r}: non-numeric value {bad!r}")
                out[:, start] = (numeric.to_numpy(dtype=np.float64) -
                                 self.means_[name]) / self.stds_[name]
            else:
                index = {v: i for i, v in enumerate(self.categories_[name])}
                for row_i, v in enumerate(values.tolist()):
                    j = index.get(v)
                    if j is None:
                        raise EncodeError(
                            f"column {name!r}: unseen category {v!r}")
                    out[row_i, start + j] = 1.0
        return out

    # -- decoding ------------------------------------------------------------

    def inverse_transform(self, Z: np.ndarray) -> pd.DataFrame:
        """Decode an (n, d) matrix back to a table of modeled columns."""
        self._check_fitted()
        Z = np.asarray(Z, dtype=np.float64)
        if Z.ndim == 1:
            Z = Z.reshape(1, -1)
        if Z.ndim != 2 or Z.shape[1] != self.dim_:
            raise DecodeError(
                f"expected an (n, {self.dim_}) matrix, got shape {Z.shape}")
        if not np.isfinite(Z).all():
            raise DecodeError("non-finite entries cannot be decoded")
        data = {}
        for name, kind, start, stop in self.layout_:
            if kind == CONTINUOUS:
                data[name] = Z[:, start] * self.stds_[name] + self.means_[name]
            else:
                block = Z[:, start:stop]
                idx = np.argmax(block, axis=1)  # ties -> lowest index
                cats = self.categories_[name]
                if idx.max(initial=0) >= len(cats):
                    # argmax landed on a padding slot beyond the observed
                    # categories (declared cardinality > observed): clamp
                    idx = np.minimum(idx, len(cats) - 1)
                data[name] = [cats[i] for i in idx]
        return pd.DataFrame(data)

    # -- masks and layout helpers ---------------------------------------------

    def mask_to_ambient(self, column_mask) -> np.ndarray:
        """Expand per-column bits to ambient bits (blocks mask whole)."""
        self._check_fitted()
        mask = np.asarray(column_mask)
        if mask.ndim == 1:
            mask = mask.reshape(1, -1)
        n_cols = len(self.layout_)
        if mask.shape[1] != n_cols:
            raise EncodeError(
                f"column mask width {mask.shape[1]} != {n_cols} modeled "
                f"columns")
        out = np.zeros((mask.shape[0], self.dim_))
        for j, (_, _, start, stop) in enumerate(self.layout_):
            out[:, start:stop] = mask[:, j:j + 1]
        return out

    def block_slice(self, name: str) -> slice:
        self._check_fitted()
        for col, _, start, stop in self.layout_:
            if col == name:
                return slice(start, stop)
        raise EncodeError(f"no modeled column named {name!r}")

    def column_kind(self, name: str) -> str:
        self._check_fitted()
        for col, kind, _, _ in self.layout_:
            if col == name:
                return kind
        raise EncodeError(f"no modeled column named {name!r}")

    def continuous_ambient_mask(self) -> np.ndarray:
        """Boolean (d,) mask selecting the continuous ambient dimensions."""
        self._check_fitted()
        out = np.zeros(self.dim_, dtype=bool)
        for _, kind, start, stop in self.layout_:
            if kind == CONTINUOUS:
                out[start:stop] = True
        return out

    def column_names(self) -> list[str]:
        self._check_fitted()
        return [name for name, _, _, _ in self.layout_]

    # -- persistence ----------------------------------------------------------

    def to_json_dict(self) -> dict:
        self._check_fitted()
        return {
            "schema": self.schema_.to_json_dict(),
            "means": self.means_,
            "stds": self.stds_,
            "categories": {k: list(v) for k, v in self.categories_.items()},
            "layout": [list(entry) for entry in self.layout_],
            "dim": self.dim_,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "TabularEncoder":
        schema = TabularSchema.from_json_dict(doc["schema"])
        enc = cls(schema=schema)
        enc.schema_ = schema
        enc.means_ = {k: float(v) for k, v in doc["means"].items()}
        enc.stds_ = {k: float(v) for k, v in doc["stds"].items()}
        enc.categories_ = {k: tuple(v) for k, v in doc["categories"].items()}
        enc.layout_ = tuple(
            (str(n), str(k), int(a), int(b)) for n, k, a, b in doc["layout"])
        enc.dim_ = int(doc["dim"])
        return enc
