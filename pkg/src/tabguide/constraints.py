"""Differentiable constraint losses over clean-data estimates.

Specs form a small tagged union: anchoring losses (Imputation,
CategoricalCE), soft range/equality penalties over affine selectors, and
boolean composition (Conjunction sums child losses, Disjunction multiplies
them row-wise). All losses are >= 0 and vanish exactly on satisfying points.

Mask polarity, fixed package-wide: a mask bit of 1 marks a MISSING cell.
Anchoring losses therefore score the complement — the observed cells.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from . import autodiff as ad
from .errors import SpecError
from .schema import CATEGORICAL, CONTINUOUS

NORMS = ("l1", "l2", "linf")
IMPUTATION_NORMS = ("mae", "mse")


def _as_2d(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise SpecError(f"{name}: expected a row or matrix, got ndim "
                        f"{arr.ndim}")
    return arr


@dataclass(frozen=True, eq=False)
class Imputation:
    """Anchor observed cells to known values: ||(1-m) * (x - x0)||.

    ``norm`` "mae" sums absolute deviations, "mse" sums squared ones.
    ``mask``/``target`` are (1, d) for a shared anchor or (n, d) per-row.
    """

    mask: np.ndarray
    target: np.ndarray
    norm: str = "mae"

    def __post_init__(self):
        mask = _as_2d(self.mask, "mask")
        target = _as_2d(self.target, "target")
        if mask.shape != target.shape:
            raise SpecError(
                f"imputation: mask shape {mask.shape} != target shape "
                f"{target.shape}")
        if not np.isin(mask, (0.0, 1.0)).all():
            raise SpecError("imputation: mask entries must be 0 or 1")
        if (1.0 - mask).sum() == 0:
            raise SpecError("imputation: no observed cells to anchor")
        if self.norm not in IMPUTATION_NORMS:
            raise SpecError(
                f"imputation: norm must be one of {IMPUTATION_NORMS}, got "
                f"{self.norm!r}")
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "target", target)


@dataclass(frozen=True, eq=False)
class CategoricalCE:
    """Softmax cross-entropy anchoring observed one-hot blocks.

    ``blocks`` lists the (start, stop) ambient ranges of the categorical
    columns; a block contributes for a row only when the row's mask marks
    the whole block observed. Targets are the one-hot truth rows.
    """

    mask: np.ndarray
    target: np.ndarray
    blocks: tuple[tuple[int, int], ...]

    def __post_init__(self):
        mask = _as_2d(self.mask, "mask")
        target = _as_2d(self.target, "target")
        if mask.shape != target.shape:
            raise SpecError(
                f"ce: mask shape {mask.shape} != target shape {target.shape}")
        blocks = tuple((int(a), int(b)) for a, b in self.blocks)
        if not blocks:
            raise SpecError("ce: needs at least one categorical block")
        for a, b in blocks:
            if not (0 <= a < b <= mask.shape[1]):
                raise SpecError(
                    f"ce: block [{a}, {b}) outside ambient width "
                    f"{mask.shape[1]}")
        observed_any = any(
            (mask[:, a:b] == 0).all(axis=1).any() for a, b in blocks)
        if not observed_any:
            raise SpecError("ce: no fully-observed categorical block")
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "blocks", blocks)


def _as_bound(value, k: int, name: str) -> np.ndarray | None:
    if value is None:
        return None
    arr = np.asarray(value, dtype=np.float64).reshape(-1)
    if arr.size == 1:
        arr = np.full(k, float(arr[0]))
    if arr.shape != (k,):
        raise SpecError(f"{name}: expected scalar or ({k},), got "
                        f"{np.asarray(value).shape}")
    return arr


@dataclass(frozen=True, eq=False)
class Inequality:
    """Soft two-sided range penalty on an affine selector.

    loss = weight * (||relu(lower - g(x))||_i + ||relu(g(x) - upper)||_j)
    with g(x) = x @ coeffs.T + offset. Either bound may be None.
    """

    coeffs: np.ndarray
    offset: np.ndarray = None
    lower: np.ndarray | float | None = None
    upper: np.ndarray | float | None = None
    weight: float = 1.0
    norm_lower: str = "l2"
    norm_upper: str = "l2"

    def __post_init__(self):
        coeffs = _as_2d(self.coeffs, "coeffs")
        k = coeffs.shape[0]
        offset = (np.zeros(k) if self.offset is None
                  else np.asarray(self.offset, dtype=np.float64).reshape(-1))
        if offset.shape != (k,):
            raise SpecError(
                f"inequality: offset shape {offset.shape} != ({k},)")
        lower = _as_bound(self.lower, k, "inequality lower")
        upper = _as_bound(self.upper, k, "inequality upper")
        if lower is None and upper is None:
            raise SpecError("inequality: needs at least one bound")
        if self.weight <= 0:
            raise SpecError(
                f"inequality: weight must be > 0, got {self.weight}")
        for norm in (self.norm_lower, self.norm_upper):
            if norm not in NORMS:
                raise SpecError(
                    f"inequality: norm must be one of {NORMS}, got {norm!r}")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "offset", offset)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "weight", float(self.weight))


@dataclass(frozen=True, eq=False)
class Equality:
    """Soft equality penalty: weight * ||h(x) - value||_k."""

    coeffs: np.ndarray
    offset: np.ndarray = None
    value: np.ndarray | float = 0.0
    weight: float = 1.0
    norm: str = "l1"

    def __post_init__(self):
        coeffs = _as_2d(self.coeffs, "coeffs")
        k = coeffs.shape[0]
        offset = (np.zeros(k) if self.offset is None
                  else np.asarray(self.offset, dtype=np.float64).reshape(-1))
        if offset.shape != (k,):
            raise SpecError(f"equality: offset shape {offset.shape} != ({k},)")
        value = _as_bound(self.value, k, "equality value")
        if self.weight <= 0:
            raise SpecError(f"equality: weight must be > 0, got {self.weight}")
        if self.norm not in NORMS:
            raise SpecError(
                f"equality: norm must be one of {NORMS}, got {self.norm!r}")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "offset", offset)
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "weight", float(self.weight))


@dataclass(frozen=True, eq=False)
class Conjunction:
    """All children must hold; losses are summed."""

    children: tuple

    def __post_init__(self):
        children = tuple(self.children)
        if not children:
            raise SpecError("conjunction: needs at least one child")
        object.__setattr__(self, "children", children)


@dataclass(frozen=True, eq=False)
class Disjunction:
    """At least one child must hold; row losses are multiplied."""

    children: tuple

    def __post_init__(self):
        children = tuple(self.children)
        if len(children) < 2:
            raise SpecError("disjunction: needs at least two children")
        object.__setattr__(self, "children", children)


ConstraintSpec = Union[Imputation, CategoricalCE, Inequality, Equality,
                       Conjunction, Disjunction]


def check_spec(spec: ConstraintSpec, dim: int) -> None:
    """Validate every ambient index in the tree against width ``dim``."""
    if isinstance(spec, (Imputation, CategoricalCE)):
        if spec.mask.shape[1] != dim:
            raise SpecError(
                f"spec width {spec.mask.shape[1]} != ambient dim {dim}")
    elif isinstance(spec, (Inequality, Equality)):
        if spec.coeffs.shape[1] != dim:
            raise SpecError(
                f"selector width {spec.coeffs.shape[1]} != ambient dim {dim}")
    elif isinstance(spec, (Conjunction, Disjunction)):
        for child in spec.children:
            check_spec(child, dim)
    else:
        raise SpecError(f"unknown spec node {type(spec).__name__}")


# -- loss evaluation ---------------------------------------------------------

def _tile_rows(arr: np.ndarray, n: int, name: str) -> np.ndarray:
    if arr.shape[0] == n:
        return arr
    if arr.shape[0] == 1:
        return np.repeat(arr, n, axis=0)
    raise SpecError(
        f"{name}: has {arr.shape[0]} rows, batch has {n}")


def _norm_rows(node: ad.Node, kind: str) -> ad.Node:
    if kind == "l1":
        return ad.row_sum(ad.absolute(node))
    if kind == "l2":
        return ad.sqrt(ad.row_sum(ad.mul(node, node)))
    return ad.row_max(ad.absolute(node))


def loss_rows(spec: ConstraintSpec, x: ad.Node) -> ad.Node:
    """Per-row loss column (n, 1) of ``spec`` at the clean estimates ``x``."""
    tape = x.tape
    n, d = x.shape
    check_spec(spec, d)

    if isinstance(spec, Imputation):
        keep = tape.constant(_tile_rows(1.0 - spec.mask, n, "imputation mask"))
        target = tape.constant(_tile_rows(spec.target, n, "imputation target"))
        masked = ad.mul(ad.sub(x, target), keep)
        if spec.norm == "mae":
            return ad.row_sum(ad.absolute(masked))
        return ad.row_sum(ad.mul(masked, masked))

    if isinstance(spec, CategoricalCE):
        mask = _tile_rows(spec.mask, n, "ce mask")
        target = _tile_rows(spec.target, n, "ce target")
        total = None
        for start, stop in spec.blocks:
            observed = (mask[:, start:stop] == 0).all(axis=1)
            if not observed.any():
                continue
            ce = ad.cross_entropy_logits(ad.slice_cols(x, start, stop),
                                         target[:, start:stop])
            term = ad.mul(ce, tape.constant(
                observed.astype(np.float64).reshape(-1, 1)))
            total = term if total is None else ad.add(total, term)
        if total is None:
            return tape.constant(np.zeros((n, 1)))
        return total

    if isinstance(spec, Inequality):
        sel = ad.matmul(x, tape.constant(spec.coeffs.T))
        sel = ad.add(sel, tape.constant(spec.offset.reshape(1, -1)))
        total = None
        if spec.lower is not None:
            viol = ad.relu(ad.scale(
                ad.sub(sel, tape.constant(spec.lower.reshape(1, -1))), -1.0))
            total = _norm_rows(viol, spec.norm_lower)
        if spec.upper is not None:
            viol = ad.relu(
                ad.sub(sel, tape.constant(spec.upper.reshape(1, -1))))
            side = _norm_rows(viol, spec.norm_upper)
            total = side if total is None else ad.add(total, side)
        return ad.scale(total, spec.weight)

    if isinstance(spec, Equality):
        sel = ad.matmul(x, tape.constant(spec.coeffs.T))
        sel = ad.add(sel, tape.constant(spec.offset.reshape(1, -1)))
        resid = ad.sub(sel, tape.constant(spec.value.reshape(1, -1)))
        return ad.scale(_norm_rows(resid, spec.norm), spec.weight)

    if isinstance(spec, Conjunction):
        total = loss_rows(spec.children[0], x)
        for child in spec.children[1:]:
            total = ad.add(total, loss_rows(child, x))
        return total

    if isinstance(spec, Disjunction):
        total = loss_rows(spec.children[0], x)
        for child in spec.children[1:]:
            total = ad.mul(total, loss_rows(child, x))
        return total

    raise SpecError(f"unknown spec node {type(spec).__name__}")


def eval_loss(spec: ConstraintSpec, x0_hat) -> float:
    """Total loss of ``spec`` over the rows of ``x0_hat`` (always >= 0)."""
    tape = ad.Tape()
    node = tape.constant(ad.as_matrix(x0_hat, "x0_hat"))
    return float(ad.sum_all(loss_rows(spec, node)).value[0, 0])


# -- defaults ----------------------------------------------------------------

def default_loss_for(task: str) -> dict:
    """The settings used when a loss is not specified explicitly."""
    if task == "imputation":
        return {"norm": "mae"}
    if task == "inequality":
        return {"norm_lower": "l2", "norm_upper": "l2",
                "norm_equality": "l1", "weight": 1.0}
    if task == "mixed":
        return {"continuous_norm": "mae", "categorical_loss": "ce"}
    raise SpecError(
        f"task must be 'imputation', 'inequality' or 'mixed', got {task!r}")


# -- factories ---------------------------------------------------------------

IMPUTATION_LOSSES = ("mae", "mse", "mae_ce", "mse_ce", "ce")


def imputation_spec(encoder, ambient_mask, target_encoded,
                    loss: str = "mae") -> ConstraintSpec:
    """Anchoring spec for imputation over an encoded batch.

    ``loss`` picks the treatment of observed cells: "mae"/"mse" anchor every
    observed ambient cell; "mae_ce"/"mse_ce" anchor continuous cells with the
    named norm and observed categorical blocks with cross-entropy; "ce"
    anchors categorical blocks only.
    """
    if loss not in IMPUTATION_LOSSES:
        raise SpecError(
            f"loss must be one of {IMPUTATION_LOSSES}, got {loss!r}")
    mask = _as_2d(ambient_mask, "ambient_mask")
    target = _as_2d(target_encoded, "target")
    children: list[ConstraintSpec] = []

    cat_blocks = [(s.start, s.stop)
                  for name in encoder.column_names()
                  if encoder.column_kind(name) == CATEGORICAL
                  for s in [encoder.block_slice(name)]]

    if loss in ("mae", "mse"):
        norm = loss
        if (1.0 - mask).sum() > 0:
            children.append(Imputation(mask=mask, target=target, norm=norm))
    else:
        if loss in ("mae_ce", "mse_ce"):
            cont = encoder.continuous_ambient_mask().astype(np.float64)
            cont_mask = np.maximum(mask, 1.0 - cont[None, :])
            if (1.0 - cont_mask).sum() > 0:
                children.append(Imputation(mask=cont_mask, target=target,
                                           norm=loss.split("_")[0]))
        if cat_blocks:
            observed_any = any(
                (mask[:, a:b] == 0).all(axis=1).any() for a, b in cat_blocks)
            if observed_any:
                children.append(CategoricalCE(mask=mask, target=target,
                                              blocks=tuple(cat_blocks)))
    if not children:
        raise SpecError(
            f"imputation spec {loss!r}: no observed cells to anchor")
    if len(children) == 1:
        return children[0]
    return Conjunction(tuple(children))


# -- JSON resolution -----------------------------------------------------------

def _ambient_affine(encoder, terms: dict[str, float]):
    """Affine selector over ambient dims equivalent to raw-unit terms."""
    d = encoder.dim_
    coeffs = np.zeros((1, d))
    offset = 0.0
    for name, c in terms.items():
        if encoder.column_kind(name) != CONTINUOUS:
            raise SpecError(
                f"selector term {name!r}: only continuous columns may "
                f"appear in affine selectors")
        j = encoder.block_slice(name).start
        coeffs[0, j] = float(c) * encoder.stds_[name]
        offset += float(c) * encoder.means_[name]
    return coeffs, np.array([offset])


def spec_from_json(doc: dict, encoder) -> ConstraintSpec:
    """Resolve a column-level JSON constraint document to ambient form."""
    from .errors import EncodeError
    try:
        return _spec_from_json(doc, encoder)
    except (EncodeError, KeyError) as exc:
        raise SpecError(f"malformed constraint document: {exc}") from exc


def _spec_from_json(doc: dict, encoder) -> ConstraintSpec:
    if not isinstance(doc, dict) or "type" not in doc:
        raise SpecError("constraint document must be an object with 'type'")
    kind = doc["type"]

    if kind in ("and", "or"):
        children = tuple(_spec_from_json(c, encoder)
                         for c in doc.get("children", []))
        return (Conjunction(children) if kind == "and"
                else Disjunction(children))

    if kind == "inequality":
        terms = doc.get("terms")
        if terms is None:
            terms = {doc["column"]: 1.0}
        coeffs, offset = _ambient_affine(encoder, terms)
        defaults = default_loss_for("inequality")
        return Inequality(
            coeffs=coeffs, offset=offset,
            lower=doc.get("lower"), upper=doc.get("upper"),
            weight=doc.get("weight", defaults["weight"]),
            norm_lower=doc.get("norm_lower", defaults["norm_lower"]),
            norm_upper=doc.get("norm_upper", defaults["norm_upper"]))

    if kind == "equality":
        if "category" in doc:
            name = doc["column"]
            if encoder.column_kind(name) != CATEGORICAL:
                raise SpecError(
                    f"equality on {name!r}: 'category' needs a categorical "
                    f"column")
            block = encoder.block_slice(name)
            cats = encoder.categories_[name]
            if doc["category"] not in cats:
                raise SpecError(
                    f"column {name!r}: unknown category {doc['category']!r}")
            j = block.start + cats.index(doc["category"])
            coeffs = np.zeros((1, encoder.dim_))
            coeffs[0, j] = 1.0
            return Equality(coeffs=coeffs, value=1.0,
                            weight=doc.get("weight", 1.0),
                            norm=doc.get("norm", "l1"))
        terms = doc.get("terms", {doc["column"]: 1.0})
        coeffs, offset = _ambient_affine(encoder, terms)
        return Equality(coeffs=coeffs, offset=offset,
                        value=doc["value"], weight=doc.get("weight", 1.0),
                        norm=doc.get("norm",
                                     default_loss_for("inequality")
                                     ["norm_equality"]))

    if kind == "ce":
        name = doc["column"]
        if encoder.column_kind(name) != CATEGORICAL:
            raise SpecError(f"ce on {name!r}: needs a categorical column")
        block = encoder.block_slice(name)
        cats = encoder.categories_[name]
        if doc["category"] not in cats:
            raise SpecError(
                f"column {name!r}: unknown category {doc['category']!r}")
        target = np.zeros((1, encoder.dim_))
        target[0, block.start + cats.index(doc["category"])] = 1.0
        mask = np.zeros((1, encoder.dim_))
        return CategoricalCE(mask=mask, target=target,
                             blocks=((block.start, block.stop),))

    if kind == "imputation":
        values = doc.get("values")
        if not values:
            raise SpecError("imputation document needs a 'values' object")
        mask = np.ones((1, encoder.dim_))
        target = np.zeros((1, encoder.dim_))
        for name, value in values.items():
            block = encoder.block_slice(name)
            mask[0, block] = 0.0
            if encoder.column_kind(name) == CONTINUOUS:
                target[0, block.start] = ((float(value) -
                                           encoder.means_[name]) /
                                          encoder.stds_[name])
            else:
                cats = encoder.categories_[name]
                if value not in cats:
                    raise SpecError(
                        f"column {name!r}: unknown category {value!r}")
                target[0, block.start + cats.index(value)] = 1.0
        return Imputation(mask=mask, target=target,
                          norm=doc.get("norm", "mae"))

    raise SpecError(f"unknown constraint type {kind!r}")
