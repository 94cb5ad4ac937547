"""Top-level model: fit a denoiser on a table, then sample or impute.

Follows the scikit-learn estimator protocol: constructor stores
hyperparameters untouched, ``fit`` learns state into trailing-underscore
attributes, and the object is cloneable via ``get_params``.

Imputation note: generated rows are decoded only after every observed cell
has been overwritten with its known value. Guidance pulls observed
coordinates close to their anchors but not exactly onto them, and
imputation metrics score only the missing cells, so the final write keeps
observed data bit-exact.
"""

from __future__ import annotations

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .constraints import IMPUTATION_LOSSES, imputation_spec
from .encoding import TabularEncoder
from .errors import ConfigError, UsageError
from .guidance import GuidanceConfig, guided_sample
from .network import DenoiserNet
from .schedule import (DEFAULT_ALPHA_FIRST, DEFAULT_ALPHA_LAST,
                       DEFAULT_STEPS, build_schedule)
from .schema import CONTINUOUS, TabularSchema
from .training import TrainConfig, train


class TabularDiffusionModel(BaseEstimator):
    """Denoising generative model over mixed continuous/categorical tables.

    Training is unconditional; imputation and constraint satisfaction are
    inference-time behaviors driven by loss specs, so one fitted model
    serves every downstream task.
    """

    def __init__(self, schema: TabularSchema | None = None,
                 steps: int = DEFAULT_STEPS,
                 alpha_first: float = DEFAULT_ALPHA_FIRST,
                 alpha_last: float = DEFAULT_ALPHA_LAST,
                 hidden_width=1024, time_embed_dim: int = 128,
                 time_mlp_width: int = 1024, epochs: int = 1000,
                 batch_size: int = 1024, learning_rate: float = 1e-4,
                 optimizer: str = "sgd", seed: int = 0):
        self.schema = schema
        self.steps = steps
        self.alpha_first = alpha_first
        self.alpha_last = alpha_last
        self.hidden_width = hidden_width
        self.time_embed_dim = time_embed_dim
        self.time_mlp_width = time_mlp_width
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.optimizer = optimizer
        self.seed = seed

    # -- fitting ---------------------------------------------------------

    def fit(self, X: pd.DataFrame, y=None) -> "TabularDiffusionModel":
        """Standardize/one-hot the table and train the denoiser on it.

        Rows with any missing modeled value are dropped before training.
        """
        frame = pd.DataFrame(X)
        self.encoder_ = TabularEncoder(schema=self.schema).fit(frame)
        names = self.encoder_.column_names()
        complete = frame[names].dropna(axis=0, how="any")
        data = self.encoder_.transform(complete)
        self.sched_ = build_schedule(self.steps, self.alpha_first,
                                     self.alpha_last)
        self.net_ = DenoiserNet(
            data_dim=self.encoder_.dim_, hidden_width=self.hidden_width,
            time_embed_dim=self.time_embed_dim,
            time_mlp_width=self.time_mlp_width, seed=self.seed)
        cfg = TrainConfig(epochs=self.epochs, batch_size=self.batch_size,
                          learning_rate=self.learning_rate, seed=self.seed,
                          optimizer=self.optimizer)
        self.loss_trace_ = train(self.net_, self.sched_, data, cfg)
        self.train_rows_ = data.shape[0]
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "net_"):
            raise UsageError("model is not fitted; call fit() or load()")

    # -- generation ------------------------------------------------------

    def sample(self, n: int, seed: int = 0, spec=None,
               guidance: GuidanceConfig | None = None,
               decode: bool = True):
        """Draw n rows by reverse diffusion, optionally steered by a loss
        spec; returns a decoded table (or the raw encoded matrix)."""
        self._check_fitted()
        gcfg = guidance if guidance is not None else GuidanceConfig()
        encoded = guided_sample(self.net_, self.sched_, spec, gcfg, n,
                                 seed)
        if not decode:
            return encoded
        return self.encoder_.inverse_transform(encoded)

    def impute(self, X: pd.DataFrame, column_mask, loss: str = "mae_ce",
               guidance: GuidanceConfig | None = None, seed: int = 0
               ) -> pd.DataFrame:
        """Fill the cells marked 1 in ``column_mask`` (rows x columns).

        Observed cells steer generation through an anchoring loss and are
        finally written back verbatim; only masked cells carry model
        output.
        """
        self._check_fitted()
        if loss not in IMPUTATION_LOSSES:
            raise ConfigError(
                f"loss must be one of {IMPUTATION_LOSSES}, got {loss!r}")
        frame = pd.DataFrame(X)
        names = self.encoder_.column_names()
        missing = [c for c in names if c not in frame.columns]
        if missing:
            raise ConfigError(f"table lacks model columns: {missing}")
        column_mask = np.asarray(column_mask)
        if column_mask.shape != (len(frame), len(names)):
            raise ConfigError(
                f"column_mask must have shape ({len(frame)}, {len(names)}),"
                f" got {column_mask.shape}")
        # Masked cells may be genuinely absent; fill them with neutral
        # placeholders so the rest of the row encodes. They never reach the
        # loss or the final write-back.
        filled = frame[names].copy()
        for j, name in enumerate(names):
            cells = column_mask[:, j] == 1
            if not cells.any():
                continue
            if self.encoder_.column_kind(name) == CONTINUOUS:
                filled.loc[cells, name] = self.encoder_.means_[name]
            else:
                filled.loc[cells, name] = self.encoder_.categories_[name][0]
        truth = self.encoder_.transform(filled)
        ambient_mask = self.encoder_.mask_to_ambient(column_mask)
        # The model must not see masked cells: anchor targets carry
        # observed values only.
        target = truth * (1.0 - ambient_mask)
        spec = imputation_spec(self.encoder_, ambient_mask, target, loss)
        gcfg = guidance if guidance is not None else GuidanceConfig()
        encoded = guided_sample(self.net_, self.sched_, spec, gcfg,
                                 len(frame), seed)
        observed = ambient_mask == 0.0
        encoded[observed] = truth[observed]
        decoded = self.encoder_.inverse_transform(encoded)
        # Observed cells come straight from the input so that no
        # standardize/destandardize round trip can disturb them.
        for j, name in enumerate(names):
            keep = column_mask[:, j] == 0
            if keep.any():
                decoded.loc[keep, name] = frame[name].to_numpy()[keep]
        return decoded

    # -- persistence -----------------------------------------------------

    def train_meta(self) -> dict:
        self._check_fitted()
        return {
            "seed": self.seed,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "optimizer": self.optimizer,
            "train_rows": self.train_rows_,
            "final_loss": self.loss_trace_[-1] if self.loss_trace_ else None,
        }

    def save(self, path) -> None:
        """Write the fitted model as a versioned JSON checkpoint."""
        self._check_fitted()
        save_checkpoint(path, self.net_, self.sched_, self.encoder_,
                        self.train_meta())

    @classmethod
    def load(cls, path) -> "TabularDiffusionModel":
        """Rebuild a fitted model from a checkpoint file."""
        return cls.from_checkpoint(load_checkpoint(path))

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint) -> "TabularDiffusionModel":
        meta = ckpt.train_meta
        net_cfg = ckpt.net.config()
        model = cls(
            schema=ckpt.encoder.schema_,
            steps=ckpt.sched.steps,
            alpha_first=float(ckpt.sched.alpha[1]),
            alpha_last=float(ckpt.sched.alpha[ckpt.sched.steps]),
            hidden_width=net_cfg["hidden_width"],
            time_embed_dim=net_cfg["time_embed_dim"],
            time_mlp_width=net_cfg["time_mlp_width"],
            epochs=int(meta.get("epochs", 1)),
            batch_size=int(meta.get("batch_size", 1)),
            learning_rate=float(meta.get("learning_rate", 1e-4)),
            optimizer=meta.get("optimizer", "sgd"),
            seed=int(meta.get("seed", 0)))
        model.net_ = ckpt.net
        model.sched_ = ckpt.sched
        model.encoder_ = ckpt.encoder
        model.loss_trace_ = []
        model.train_rows_ = int(meta.get("train_rows", 0))
        return model
