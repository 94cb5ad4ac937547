"""Command-line entry points: train, impute, constrain, diag, synth, eval.

Option values resolve as CLI flag > config-file entry > built-in default.
Every artifact embeds a provenance triple (seed, config hash, checkpoint
hash): CSVs as a leading ``# provenance:`` comment, JSON documents under a
``provenance`` key. Reruns with an identical triple are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import pathlib
import sys

import numpy as np
import pandas as pd

from . import __version__
from .checkpoint import (canonical_json, load_checkpoint, read_json,
                         sha256_of_file, sha256_of_text, write_json)
from .constraints import CategoricalCE, Imputation, Inequality
from .diagnostics import (angle_profile, projection_error_profile,
                          shell_distance_check, write_diagnostic_csv)
from .errors import ConfigError, TabguideError
from .estimator import TabularDiffusionModel
from .guidance import GuidanceConfig
from .manifolds import (AffineSubspace, Circle, Sphere, default_mixture,
                        default_radius)
from .masks import gen_mar, gen_mcar, gen_mnar, load_mask_csv, save_mask_csv
from .metrics import EvalReport, constrain_report, impute_report
from .network import DenoiserNet
from .scenarios import ConstraintScenario, gen_constraint_scenario
from .schedule import build_schedule
from .schema import CATEGORICAL, TabularSchema
from .training import TrainConfig, train

DEFAULTS = {
    "seed": 0,
    "trials": 1,
    "steps": 200,
    "alpha_first": 0.9999,
    "alpha_last": 0.98,
    "eta": 0.2,
    "guidance_schedule": "constant",
    "epochs": 1000,
    "batch_size": 1024,
    "learning_rate": 1e-4,
    "optimizer": "sgd",
    "hidden_width": 1024,
    "time_embed_dim": 128,
    "time_mlp_width": 1024,
    "loss": "mae_ce",
    "mechanism": "mcar",
    "ratio": 0.5,
    "kind": "range",
    "quantile": 0.8,
    "n": 1000,
    "ambient_dim": 2,
    "intrinsic_dim": 1,
    "n_samples": 200,
    "diag_epochs": 400,
    "infer": False,
    "ablate": False,
}

DIAGNOSTICS = ("angles", "projection", "shell")
DIAG_LOSSES = ("mae", "mse", "ce", "inequality")
ABLATION_LOSSES = ("mae", "mse", "mae_ce", "mse_ce")
ABLATION_SCHEDULES = ("constant", "linear")


# -- configuration plumbing -------------------------------------------------

def _resolve(ns: argparse.Namespace) -> dict:
    """Merge CLI values over config-file entries over built-in defaults."""
    cfg = dict(vars(ns))
    file_values = {}
    if cfg.get("config"):
        doc = read_json(cfg["config"])
        if not isinstance(doc, dict):
            raise ConfigError(f"config file {cfg['config']} must hold a "
                              f"JSON object")
        file_values = doc
    for key, value in cfg.items():
        if value is None:
            if key in file_values:
                cfg[key] = file_values[key]
            elif key in DEFAULTS:
                cfg[key] = DEFAULTS[key]
    return cfg


def _require(cfg: dict, key: str) -> object:
    if cfg.get(key) is None:
        flag = "--" + key.replace("_", "-")
        raise ConfigError(f"{cfg['command']}: {flag} is required")
    return cfg[key]


def _ensure_outdir(path) -> None:
    pathlib.Path(path).mkdir(parents=True, exist_ok=True)


def _config_hash(cfg: dict) -> str:
    doc = {k: v for k, v in sorted(cfg.items()) if k != "func"}
    return sha256_of_text(canonical_json(doc))


def _provenance(seed: int, config_hash: str, checkpoint_hash: str) -> str:
    return f"seed={seed} config={config_hash} checkpoint={checkpoint_hash}"


def _provenance_dict(seed: int, config_hash: str,
                     checkpoint_hash: str) -> dict:
    return {"seed": seed, "config_sha256": config_hash,
            "checkpoint_sha256": checkpoint_hash}


# -- artifact I/O -----------------------------------------------------------

def read_table_csv(path) -> pd.DataFrame:
    """Read a header CSV, skipping any leading ``#`` comment lines."""
    skip = 0
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.startswith("#"):
                    skip += 1
                else:
                    break
    except OSError as exc:
        raise ConfigError(f"cannot read table {path}: {exc}")
    return pd.read_csv(path, skiprows=skip)


def _write_frame_csv(path, frame: pd.DataFrame, provenance: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# provenance: {provenance}\n")
        frame.to_csv(fh, index=False, lineterminator="\n")


def _load_schema(cfg: dict) -> TabularSchema | None:
    if cfg.get("schema"):
        return TabularSchema.from_json_dict(read_json(cfg["schema"]))
    if cfg.get("infer"):
        return None
    raise ConfigError(
        f"{cfg['command']}: provide --schema <path> or pass --infer to "
        f"derive one from the data")


def _check_columns(encoder, frame: pd.DataFrame) -> None:
    missing = [n for n in encoder.column_names() if n not in frame.columns]
    if missing:
        raise ConfigError(
            f"data does not match the checkpoint schema; missing columns: "
            f"{missing}")


def _trial_seeds(seed: int, trials: int) -> list[int]:
    return [int(s.generate_state(1)[0])
            for s in np.random.SeedSequence(seed).spawn(trials)]


# -- train -------------------------------------------------------------------

def cmd_train(cfg: dict) -> int:
    data_path = _require(cfg, "data")
    out_path = _require(cfg, "out")
    schema = _load_schema(cfg)
    frame = read_table_csv(data_path)
    model = TabularDiffusionModel(
        schema=schema, steps=int(cfg["steps"]),
        alpha_first=float(cfg["alpha_first"]),
        alpha_last=float(cfg["alpha_last"]),
        hidden_width=cfg["hidden_width"],
        time_embed_dim=int(cfg["time_embed_dim"]),
        time_mlp_width=int(cfg["time_mlp_width"]),
        epochs=int(cfg["epochs"]), batch_size=int(cfg["batch_size"]),
        learning_rate=float(cfg["learning_rate"]),
        optimizer=cfg["optimizer"], seed=int(cfg["seed"]))
    model.fit(frame)
    model.save(out_path)
    ckpt_hash = sha256_of_file(out_path)
    prov = _provenance(int(cfg["seed"]), _config_hash(cfg), ckpt_hash)
    trace_path = cfg.get("trace") or f"{out_path}.trace.csv"
    with open(trace_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# provenance: {prov}\n")
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss"])
        for epoch, loss in enumerate(model.loss_trace_, start=1):
            writer.writerow([epoch, repr(loss)])
    print(f"wrote {out_path}")
    print(f"wrote {trace_path}")
    return 0


# -- impute -------------------------------------------------------------------

def _gen_mask(mechanism: str, frame: pd.DataFrame, encoder, ratio: float,
              seed: int):
    names = encoder.column_names()
    if mechanism == "mcar":
        task = gen_mcar(len(frame), len(names), ratio, seed)
    elif mechanism == "mar":
        task = gen_mar(frame, encoder.schema_, ratio, seed=seed)
    elif mechanism == "mnar":
        task = gen_mnar(frame, encoder.schema_, ratio, seed=seed)
    else:
        raise ConfigError(f"unknown mechanism {mechanism!r}; choose from "
                          f"mcar, mar, mnar")
    return task


def _aggregate(values: list[float | None]) -> dict:
    present = [v for v in values if v is not None]
    if not present:
        return {"mean": None, "std": None, "n": 0}
    arr = np.asarray(present, dtype=np.float64)
    return {"mean": float(arr.mean()), "std": float(arr.std(ddof=0)),
            "n": len(present)}


def cmd_impute(cfg: dict) -> int:
    ckpt_path = _require(cfg, "checkpoint")
    data_path = _require(cfg, "data")
    outdir = _require(cfg, "outdir")
    _ensure_outdir(outdir)
    ratio = float(cfg["ratio"])
    if not 0.0 < ratio < 1.0:
        raise ConfigError(
            f"ratio must lie strictly inside (0, 1), got {ratio}")
    model = TabularDiffusionModel.load(ckpt_path)
    frame = read_table_csv(data_path)
    _check_columns(model.encoder_, frame)
    names = model.encoder_.column_names()
    seed = int(cfg["seed"])
    ckpt_hash = sha256_of_file(ckpt_path)
    prov = _provenance(seed, _config_hash(cfg), ckpt_hash)
    gcfg = GuidanceConfig(eta=float(cfg["eta"]),
                          schedule=cfg["guidance_schedule"])

    if cfg.get("ablate"):
        return _run_ablation(cfg, model, frame, ratio, seed, prov, outdir)

    trials = int(cfg["trials"])
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    seeds = _trial_seeds(seed, trials)
    reports = []
    for k, trial_seed in enumerate(seeds, start=1):
        task = _gen_mask(cfg["mechanism"], frame, model.encoder_, ratio,
                         trial_seed)
        imputed = model.impute(frame, task.mask, loss=cfg["loss"],
                               guidance=gcfg, seed=trial_seed)
        tag = "" if trials == 1 else f"_t{k}"
        save_mask_csv(task, f"{outdir}/mask{tag}.csv", columns=names,
                      provenance=f"provenance: {prov}")
        _write_frame_csv(f"{outdir}/imputed{tag}.csv", imputed, prov)
        report = impute_report(imputed, frame, task.mask, model.encoder_,
                               seed=trial_seed,
                               extra={"mechanism": cfg["mechanism"],
                                      "ratio": ratio, "loss": cfg["loss"],
                                      "eta": gcfg.eta,
                                      "guidance_schedule": gcfg.schedule})
        reports.append(report.to_json_dict())
    doc = {
        "provenance": _provenance_dict(seed, _config_hash(cfg), ckpt_hash),
        "trials": reports,
        "aggregate": {
            "continuous_mse": _aggregate(
                [r["continuous_mse"] for r in reports]),
            "categorical_accuracy": _aggregate(
                [r["categorical_accuracy"] for r in reports]),
        },
    }
    write_json(f"{outdir}/report.json", doc)
    print(f"wrote {outdir}/report.json")
    return 0


def _run_ablation(cfg: dict, model: TabularDiffusionModel,
                  frame: pd.DataFrame, ratio: float, seed: int, prov: str,
                  outdir) -> int:
    """One checkpoint, one mask: sweep anchoring losses x guidance ramps."""
    names = model.encoder_.column_names()
    task = _gen_mask(cfg["mechanism"], frame, model.encoder_, ratio, seed)
    save_mask_csv(task, f"{outdir}/mask.csv", columns=names,
                  provenance=f"provenance: {prov}")
    rows = []
    for loss in ABLATION_LOSSES:
        for schedule in ABLATION_SCHEDULES:
            gcfg = GuidanceConfig(eta=float(cfg["eta"]), schedule=schedule)
            imputed = model.impute(frame, task.mask, loss=loss,
                                   guidance=gcfg, seed=seed)
            report = impute_report(imputed, frame, task.mask,
                                   model.encoder_, seed=seed)
            rows.append((loss, schedule, report))
    path = f"{outdir}/ablation.csv"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# provenance: {prov}\n")
        writer = csv.writer(fh)
        writer.writerow(["loss", "guidance_schedule", "eta",
                         "continuous_mse", "categorical_accuracy",
                         "masked_continuous_cells",
                         "masked_categorical_cells"])
        for loss, schedule, report in rows:
            writer.writerow([
                loss, schedule, repr(float(cfg["eta"])),
                "" if report.continuous_mse is None
                else repr(report.continuous_mse),
                "" if report.categorical_accuracy is None
                else repr(report.categorical_accuracy),
                report.masked_continuous_cells,
                report.masked_categorical_cells])
    print(f"wrote {path}")
    return 0


# -- constrain -----------------------------------------------------------------

def cmd_constrain(cfg: dict) -> int:
    ckpt_path = _require(cfg, "checkpoint")
    train_path = _require(cfg, "train_data")
    outdir = _require(cfg, "outdir")
    _ensure_outdir(outdir)
    model = TabularDiffusionModel.load(ckpt_path)
    frame = read_table_csv(train_path)
    _check_columns(model.encoder_, frame)
    seed = int(cfg["seed"])
    n = int(cfg["n"])
    scenario = gen_constraint_scenario(
        cfg["kind"], frame, model.encoder_.schema_, seed=seed,
        quantile=float(cfg["quantile"]))
    spec = scenario.to_spec(model.encoder_)
    gcfg = GuidanceConfig(eta=float(cfg["eta"]),
                          schedule=cfg["guidance_schedule"])
    samples = model.sample(n, seed=seed, spec=spec, guidance=gcfg)
    ckpt_hash = sha256_of_file(ckpt_path)
    config_hash = _config_hash(cfg)
    prov = _provenance(seed, config_hash, ckpt_hash)
    _write_frame_csv(f"{outdir}/samples.csv", samples, prov)
    write_json(f"{outdir}/scenario.json", {
        "provenance": _provenance_dict(seed, config_hash, ckpt_hash),
        "scenario": scenario.to_json_dict(),
    })
    report = constrain_report(
        samples, scenario, seed=seed,
        extra={"eta": gcfg.eta, "guidance_schedule": gcfg.schedule,
               "kind": scenario.kind, "train_coverage": scenario.coverage,
               "provenance": _provenance_dict(seed, config_hash,
                                              ckpt_hash)})
    write_json(f"{outdir}/report.json", report.to_json_dict())
    print(f"wrote {outdir}/report.json "
          f"(violation {report.violation_percent:.2f}%)")
    return 0


# -- diag ----------------------------------------------------------------------

def _diag_spec(loss: str, dim: int, encoder=None):
    """Constraint losses used only to probe gradient geometry."""
    if loss in ("mae", "mse"):
        mask = np.ones((1, dim))
        mask[0, 0] = 0.0
        return Imputation(mask=mask, target=np.zeros((1, dim)), norm=loss)
    if loss == "inequality":
        coeffs = np.zeros((1, dim))
        coeffs[0, 0] = 1.0
        return Inequality(coeffs=coeffs, lower=np.array([0.0]))
    if encoder is not None:
        blocks = [(s.start, s.stop) for name in encoder.column_names()
                  if encoder.column_kind(name) == CATEGORICAL
                  for s in [encoder.block_slice(name)]]
        if not blocks:
            raise ConfigError("loss 'ce' needs a categorical column")
        start, _ = blocks[0]
    else:
        if dim < 2:
            raise ConfigError("loss 'ce' needs at least two dimensions")
        blocks, start = [(0, 2)], 0
    target = np.zeros((1, dim))
    target[0, start] = 1.0
    return CategoricalCE(mask=np.zeros((1, dim)), target=target,
                         blocks=(blocks[0],))


def _fit_circle_net(dim: int, radius: float, steps: int, seed: int,
                    epochs: int) -> tuple[DenoiserNet, object, Circle]:
    """Small self-contained model of a circle, trained on the spot."""
    sched = build_schedule(steps)
    circle = Circle(radius, ambient_dim=dim)
    data = circle.sample(5000, np.random.default_rng(seed))
    net = DenoiserNet(data_dim=dim, hidden_width=(64, 64, 64, 64),
                      time_embed_dim=16, time_mlp_width=64, seed=seed)
    train(net, sched, data, TrainConfig(
        epochs=int(epochs), batch_size=256, learning_rate=1e-3,
        seed=seed, optimizer="adam"))
    return net, sched, circle


def _parse_t_grid(cfg: dict, steps: int) -> list[int]:
    if cfg.get("t_grid"):
        try:
            grid = [int(v) for v in str(cfg["t_grid"]).split(",")]
        except ValueError:
            raise ConfigError(
                f"--t-grid must be comma-separated integers, got "
                f"{cfg['t_grid']!r}")
    else:
        grid = sorted({int(v) for v in np.linspace(1, steps, 8).round()})
    return grid


def cmd_diag(cfg: dict) -> int:
    out_path = _require(cfg, "out")
    diag = cfg["diag"]
    seed = int(cfg["seed"])
    n_samples = int(cfg["n_samples"])
    synthetic = cfg.get("synthetic")
    ckpt_hash = "none"

    if synthetic:
        dim = int(cfg["ambient_dim"])
        if diag == "shell" and dim - 1 < 30:
            dim = 100
        radius = (float(cfg["radius"]) if cfg.get("radius") is not None
                  else (default_radius(dim) if diag == "shell" else 1.0))
        if diag == "shell":
            sched = build_schedule(int(cfg["steps"]))
            circle = Circle(radius, ambient_dim=dim)
            grid = _parse_t_grid(cfg, sched.steps)
            rows = []
            for t in grid:
                rows.extend(shell_distance_check(
                    circle, sched, max(n_samples, 10_000), t,
                    seed=seed).rows())
        else:
            net, sched, circle = _fit_circle_net(
                dim, radius, int(cfg["steps"]), seed,
                int(cfg["diag_epochs"]))
            grid = _parse_t_grid(cfg, sched.steps)
            if diag == "projection":
                rows = projection_error_profile(net, sched, circle,
                                                n_samples, grid, seed=seed)
            else:
                spec = _diag_spec(cfg["loss"], dim)
                rows = angle_profile(net, sched, spec, circle, n_samples,
                                     grid, seed=seed)
    else:
        ckpt_path = _require(cfg, "checkpoint")
        if diag != "angles":
            raise ConfigError(
                f"diagnostic {diag!r} needs analytic geometry; run it with "
                f"--synthetic circle")
        data_path = _require(cfg, "data")
        ckpt = load_checkpoint(ckpt_path)
        ckpt_hash = sha256_of_file(ckpt_path)
        frame = read_table_csv(data_path)
        _check_columns(ckpt.encoder, frame)
        names = ckpt.encoder.column_names()
        data = ckpt.encoder.transform(frame[names].dropna(axis=0,
                                                          how="any"))
        spec = _diag_spec(cfg["loss"], ckpt.encoder.dim_, ckpt.encoder)
        grid = _parse_t_grid(cfg, ckpt.sched.steps)
        rows = angle_profile(ckpt.net, ckpt.sched, spec, None, n_samples,
                             grid, seed=seed, data=data)

    prov = _provenance(seed, _config_hash(cfg), ckpt_hash)
    write_diagnostic_csv(out_path, rows, provenance=prov)
    print(f"wrote {out_path}")
    return 0


# -- synth ---------------------------------------------------------------------

def cmd_synth(cfg: dict) -> int:
    outdir = _require(cfg, "outdir")
    _ensure_outdir(outdir)
    kind = cfg["kind"]
    seed = int(cfg["seed"])
    n = int(cfg["n"])
    dim = int(cfg["ambient_dim"])
    intrinsic = int(cfg["intrinsic_dim"])
    radius = (float(cfg["radius"]) if cfg.get("radius") is not None
              else 1.0)
    rng = np.random.default_rng(seed)
    if kind == "circle":
        manifold = Circle(radius, ambient_dim=dim)
    elif kind == "sphere":
        manifold = Sphere(radius, ambient_dim=max(dim, intrinsic + 1),
                          sphere_dim=intrinsic)
    elif kind == "subspace":
        basis = rng.standard_normal((intrinsic, dim))
        offset = rng.standard_normal(dim)
        manifold = AffineSubspace(basis, offset)
    elif kind == "mixture":
        manifold = default_mixture()
    else:
        raise ConfigError(f"unknown synth kind {kind!r}; choose from "
                          f"circle, sphere, subspace, mixture")
    sampled = manifold.sample(n, rng)
    if isinstance(sampled, pd.DataFrame):
        frame = sampled
    else:
        frame = pd.DataFrame(
            sampled, columns=[f"x{i}" for i in range(sampled.shape[1])])
    config_hash = _config_hash(cfg)
    prov = _provenance(seed, config_hash, "none")
    _write_frame_csv(f"{outdir}/data.csv", frame, prov)
    write_json(f"{outdir}/manifold.json", {
        "provenance": _provenance_dict(seed, config_hash, "none"),
        "n": n,
        "manifold": manifold.to_json_dict(),
    })
    if kind == "mixture":
        write_json(f"{outdir}/schema.json", manifold.schema().to_json_dict())
        print(f"wrote {outdir}/schema.json")
    print(f"wrote {outdir}/data.csv")
    return 0


# -- eval ----------------------------------------------------------------------

def cmd_eval(cfg: dict) -> int:
    out_path = _require(cfg, "out")
    seed = int(cfg["seed"])
    impute_mode = cfg.get("imputed") is not None
    scenario_mode = cfg.get("samples") is not None
    if impute_mode == scenario_mode:
        raise ConfigError(
            "eval: pass either --imputed/--truth/--mask/--checkpoint or "
            "--samples/--scenario")
    if impute_mode:
        ckpt_path = _require(cfg, "checkpoint")
        truth_path = _require(cfg, "truth")
        mask_path = _require(cfg, "mask")
        ckpt = load_checkpoint(ckpt_path)
        ckpt_hash = sha256_of_file(ckpt_path)
        truth = read_table_csv(truth_path)
        imputed = read_table_csv(cfg["imputed"])
        mask, _ = load_mask_csv(mask_path)
        report = impute_report(imputed, truth, mask, ckpt.encoder,
                               seed=seed)
    else:
        scenario_doc = read_json(_require(cfg, "scenario"))
        if "scenario" in scenario_doc:
            scenario_doc = scenario_doc["scenario"]
        scenario = ConstraintScenario.from_json_dict(scenario_doc)
        samples = read_table_csv(cfg["samples"])
        report = constrain_report(samples, scenario, seed=seed)
        ckpt_hash = "none"
    report.extra["provenance"] = _provenance_dict(
        seed, _config_hash(cfg), ckpt_hash)
    write_json(out_path, report.to_json_dict())
    print(f"wrote {out_path}")
    return 0


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tabguide",
        description="Diffusion models over tables with inference-time "
                    "constraint guidance.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="base random seed")
    common.add_argument("--config", help="JSON file with option defaults")
    common.add_argument("--trials", type=int,
                        help="independent repetitions with derived seeds")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common],
                       help="fit a model and write a checkpoint")
    p.add_argument("--data", help="training table CSV")
    p.add_argument("--schema", help="schema JSON path")
    p.add_argument("--infer", action="store_true", default=None,
                   help="infer the schema from the data")
    p.add_argument("--out", help="checkpoint path to write")
    p.add_argument("--trace", help="loss-trace CSV path")
    p.add_argument("--steps", type=int)
    p.add_argument("--alpha-first", type=float)
    p.add_argument("--alpha-last", type=float)
    p.add_argument("--hidden-width", type=int)
    p.add_argument("--time-embed-dim", type=int)
    p.add_argument("--time-mlp-width", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--optimizer", choices=("sgd", "adam"))
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("impute", parents=[common],
                       help="mask cells, fill them, and score the result")
    p.add_argument("--checkpoint", help="model checkpoint JSON")
    p.add_argument("--data", help="ground-truth table CSV")
    p.add_argument("--outdir", help="directory for artifacts")
    p.add_argument("--mechanism", choices=("mcar", "mar", "mnar"))
    p.add_argument("--ratio", type=float,
                   help="missing fraction in (0, 1)")
    p.add_argument("--loss",
                   choices=("mae", "mse", "mae_ce", "mse_ce", "ce"))
    p.add_argument("--eta", type=float, help="guidance strength (0 = off)")
    p.add_argument("--guidance-schedule", choices=("constant", "linear"))
    p.add_argument("--ablate", action="store_true", default=None,
                   help="sweep anchoring losses and guidance schedules "
                        "from this one checkpoint")
    p.set_defaults(func=cmd_impute)

    p = sub.add_parser("constrain", parents=[common],
                       help="sample under a constraint scenario")
    p.add_argument("--checkpoint", help="model checkpoint JSON")
    p.add_argument("--train-data", help="table the scenario is drawn from")
    p.add_argument("--outdir", help="directory for artifacts")
    p.add_argument("--kind", choices=("range", "category", "and", "or"))
    p.add_argument("--n", type=int, help="number of rows to sample")
    p.add_argument("--eta", type=float, help="guidance strength (0 = off)")
    p.add_argument("--guidance-schedule", choices=("constant", "linear"))
    p.add_argument("--quantile", type=float,
                   help="tail quantile for range scenarios")
    p.set_defaults(func=cmd_constrain)

    p = sub.add_parser("diag", parents=[common],
                       help="geometric diagnostics over a step grid")
    p.add_argument("--diag", required=True, choices=DIAGNOSTICS)
    p.add_argument("--out", help="diagnostic CSV path")
    p.add_argument("--loss", choices=DIAG_LOSSES, default="mae",
                   help="constraint loss probed by the angle diagnostic")
    p.add_argument("--checkpoint", help="model checkpoint JSON")
    p.add_argument("--data", help="table CSV (checkpoint mode)")
    p.add_argument("--synthetic", choices=("circle",),
                   help="self-contained mode: train a small circle model "
                        "in-run (no checkpoint)")
    p.add_argument("--ambient-dim", type=int)
    p.add_argument("--radius", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--n-samples", type=int)
    p.add_argument("--t-grid", help="comma-separated step values")
    p.add_argument("--diag-epochs", type=int,
                   help="training epochs for the synthetic mode")
    p.set_defaults(func=cmd_diag)

    p = sub.add_parser("synth", parents=[common],
                       help="emit a synthetic dataset with ground truth")
    p.add_argument("--kind", required=True,
                   choices=("circle", "sphere", "subspace", "mixture"))
    p.add_argument("--outdir", help="directory for artifacts")
    p.add_argument("--n", type=int, help="number of rows")
    p.add_argument("--ambient-dim", type=int)
    p.add_argument("--intrinsic-dim", type=int)
    p.add_argument("--radius", type=float)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", parents=[common],
                       help="recompute metrics from saved artifacts")
    p.add_argument("--out", help="report JSON path")
    p.add_argument("--checkpoint", help="model checkpoint JSON")
    p.add_argument("--truth", help="ground-truth table CSV")
    p.add_argument("--imputed", help="imputed table CSV")
    p.add_argument("--mask", help="mask CSV")
    p.add_argument("--samples", help="generated table CSV")
    p.add_argument("--scenario", help="scenario JSON")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = _resolve(ns)
        return ns.func(cfg)
    except (TabguideError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
