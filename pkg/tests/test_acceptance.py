"""Acceptance suite: ten end-to-end checks with explicit tolerances.

Each test prints a single ``[acceptance] ... PASS/FAIL`` line. The trained
fixtures are desk-scale models (small widths, Adam) so the whole module
stays within the stated runtime budgets on a laptop CPU.
"""

import hashlib
import pathlib
import time

import numpy as np
import pandas as pd
import pytest

from tabguide.cli import main
from tabguide.constraints import (CategoricalCE, Conjunction, Disjunction,
                                  Equality, Imputation, Inequality,
                                  eval_loss)
from tabguide.diagnostics import (AffineProjectorDenoiser, angle_profile,
                                  shell_distance_check)
from tabguide.diffusion import (denoise_step_from_eps, dirty_estimate,
                                dirty_estimate_from_eps)
from tabguide.estimator import TabularDiffusionModel
from tabguide.guidance import GuidanceConfig, guidance_gradient
from tabguide.manifolds import (AffineSubspace, Circle, default_mixture,
                                default_radius)
from tabguide.metrics import (constrain_report, imputation_mse,
                              violation_rate)
from tabguide.network import DenoiserNet
from tabguide.scenarios import gen_constraint_scenario
from tabguide.schedule import build_schedule
from tabguide.training import TrainConfig, train


@pytest.fixture
def verdict(capsys):
    def emit(label: str, passed: bool) -> None:
        with capsys.disabled():
            print(f"[acceptance] {label}: {'PASS' if passed else 'FAIL'}")
    return emit


# -- shared desk-scale models -------------------------------------------------

@pytest.fixture(scope="session")
def circle_setup():
    """A model of the unit circle in the plane, trained on 5,000 points."""
    t0 = time.monotonic()
    sched = build_schedule(200)
    circle = Circle(1.0, ambient_dim=2)
    data = circle.sample(5000, np.random.default_rng(0))
    net = DenoiserNet(data_dim=2, hidden_width=(64, 64, 64, 64),
                      time_embed_dim=16, time_mlp_width=64, seed=0)
    train(net, sched, data, TrainConfig(epochs=400, batch_size=256,
                                        learning_rate=1e-3, seed=0,
                                        optimizer="adam"))
    return {"net": net, "sched": sched, "circle": circle,
            "train_seconds": time.monotonic() - t0}


@pytest.fixture(scope="session")
def gaussian_setup():
    """A model of a correlated 2D Gaussian plus a one-hidden-cell-per-row
    mask: every row keeps one observed coordinate."""
    t0 = time.monotonic()
    rng = np.random.default_rng(0)
    chol = np.linalg.cholesky(np.array([[1.0, 0.8], [0.8, 1.0]]))
    frame = pd.DataFrame(rng.standard_normal((4000, 2)) @ chol.T,
                         columns=["a", "b"])
    model = TabularDiffusionModel(
        steps=200, hidden_width=(64, 64, 64, 64), time_embed_dim=16,
        time_mlp_width=64, epochs=300, batch_size=256, learning_rate=1e-3,
        optimizer="adam", seed=0)
    model.fit(frame)
    hidden = np.random.default_rng(7).integers(0, 2, size=len(frame))
    mask = np.zeros((len(frame), 2), dtype=np.uint8)
    mask[np.arange(len(frame)), hidden] = 1
    return {"model": model, "frame": frame, "mask": mask,
            "train_seconds": time.monotonic() - t0}


@pytest.fixture(scope="session")
def mixture_setup():
    """A model of the mixed-type mixture table for constraint guidance."""
    mix = default_mixture()
    frame = mix.sample(4000, np.random.default_rng(0))
    model = TabularDiffusionModel(
        schema=mix.schema(), steps=200, hidden_width=(64, 64, 64, 64),
        time_embed_dim=16, time_mlp_width=64, epochs=300, batch_size=256,
        learning_rate=1e-3, optimizer="adam", seed=0)
    model.fit(frame)
    return {"model": model, "frame": frame, "schema": mix.schema()}


@pytest.fixture(scope="session")
def cli_workspace(tmp_path_factory):
    """Synthetic data plus a tiny CLI-trained checkpoint for 8 and 9."""
    root = tmp_path_factory.mktemp("acceptance_cli")
    synth = root / "synth"
    synth.mkdir()
    assert main(["synth", "--kind", "mixture", "--n", "120",
                 "--outdir", str(synth), "--seed", "7"]) == 0
    ckpt = root / "model.json"
    assert main(["train", "--data", str(synth / "data.csv"),
                 "--schema", str(synth / "schema.json"),
                 "--out", str(ckpt), "--steps", "8",
                 "--hidden-width", "16", "--time-embed-dim", "4",
                 "--time-mlp-width", "8", "--epochs", "2",
                 "--batch-size", "32", "--seed", "3"]) == 0
    return {"root": root, "data": synth / "data.csv",
            "schema": synth / "schema.json", "ckpt": ckpt}


def _random_spec(rng, d, kind):
    if kind in (0, 1):
        mask = (rng.random((1, d)) < 0.4).astype(float)
        mask[0, rng.integers(d)] = 0.0
        return Imputation(mask=mask, target=rng.standard_normal((1, d)),
                          norm="mae" if kind == 0 else "mse")
    if kind == 2:
        target = np.zeros((1, d))
        target[0, rng.integers(2)] = 1.0
        return CategoricalCE(mask=np.zeros((1, d)), target=target,
                             blocks=((0, 2),))
    if kind == 3:
        m = int(rng.integers(1, 3))
        norms = ("l1", "l2", "linf")
        return Inequality(coeffs=rng.standard_normal((m, d)),
                          lower=rng.standard_normal(m) - 1.0,
                          upper=rng.standard_normal(m) + 1.0,
                          norm_lower=norms[rng.integers(3)],
                          norm_upper=norms[rng.integers(3)])
    if kind == 4:
        m = int(rng.integers(1, 3))
        return Equality(coeffs=rng.standard_normal((m, d)),
                        value=rng.standard_normal(m),
                        norm="l1" if rng.random() < 0.5 else "l2")
    if kind == 5:
        return Conjunction((_random_spec(rng, d, 0),
                            _random_spec(rng, d, 3)))
    if kind == 6:
        return Disjunction((
            Inequality(coeffs=rng.standard_normal((1, d)),
                       lower=rng.standard_normal(1) + 0.5),
            Inequality(coeffs=rng.standard_normal((1, d)),
                       upper=rng.standard_normal(1) - 0.5)))
    return _random_spec(rng, d, 1)


def test_01_gradient_engine_matches_finite_differences(verdict):
    """100 random (net, input, loss) triples; rel err <= 1e-4; < 30 s."""
    passed = False
    try:
        t0 = time.monotonic()
        sched = build_schedule(200)
        rng = np.random.default_rng(2024)
        worst = 0.0
        step = 1e-5
        for k in range(100):
            d = int(rng.integers(2, 7))
            net = DenoiserNet(data_dim=d,
                              hidden_width=int(rng.integers(8, 17)),
                              time_embed_dim=8, time_mlp_width=12, seed=k)
            t = int(rng.integers(1, 201))
            x_t = rng.standard_normal((1, d))
            spec = _random_spec(rng, d, k % 8)
            analytic = guidance_gradient(net, sched, spec, x_t, t)
            fd = np.zeros_like(x_t)
            for i in range(d):
                up, dn = x_t.copy(), x_t.copy()
                up[0, i] += step
                dn[0, i] -= step
                fd[0, i] = (
                    eval_loss(spec, dirty_estimate(net, sched, up, t))
                    - eval_loss(spec, dirty_estimate(net, sched, dn, t))
                ) / (2 * step)
            rel = np.abs(analytic - fd) / np.maximum(
                1.0, np.maximum(np.abs(analytic), np.abs(fd)))
            worst = max(worst, float(rel.max()))
        elapsed = time.monotonic() - t0
        assert worst <= 1e-4, f"worst relative error {worst:.3e}"
        assert elapsed < 30.0, f"took {elapsed:.1f}s"
        passed = True
    finally:
        verdict("criterion 1 (gradient engine vs central differences)",
                passed)


def test_02_noising_inversion_and_deterministic_round_trip(verdict):
    """Known-noise inversion <= 1e-10; noise-free round trip <= 1e-8."""
    passed = False
    try:
        sched = build_schedule(200)
        rng = np.random.default_rng(5)
        x0 = rng.standard_normal((5, 3))
        worst = 0.0
        for t in range(1, 201):
            eps = rng.standard_normal(x0.shape)
            ab = sched.alpha_bar[t]
            x_t = np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps
            recovered = dirty_estimate_from_eps(sched, x_t, t, eps)
            worst = max(worst, float(np.abs(recovered - x0).max()))
        assert worst <= 1e-10, f"inversion error {worst:.3e}"
        ab_last = sched.alpha_bar[200]
        x = (np.sqrt(ab_last) * x0
             + np.sqrt(1.0 - ab_last) * rng.standard_normal(x0.shape))
        zeros = np.zeros_like(x)
        for t in range(200, 0, -1):
            ab = sched.alpha_bar[t]
            eps_true = (x - np.sqrt(ab) * x0) / np.sqrt(1.0 - ab)
            x = denoise_step_from_eps(sched, x, t, eps_true, zeros)
        err = float(np.abs(x - x0).max())
        assert err <= 1e-8, f"round-trip error {err:.3e}"
        passed = True
    finally:
        verdict("criterion 2 (algebraic inversion and round trip)", passed)


def _mean_projection_error(net, sched, circle, t_values, n, seed):
    rng = np.random.default_rng(seed)
    errors = []
    for t in t_values:
        x0 = circle.sample(n, rng)
        eps = rng.standard_normal(x0.shape)
        ab = sched.alpha_bar[t]
        x_t = np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps
        x0_hat = dirty_estimate(net, sched, x_t, t)
        errors.append(float(np.linalg.norm(
            x0_hat - circle.project(x_t), axis=1).mean()))
    return float(np.mean(errors))


def test_03_dirty_estimates_approach_the_projection(circle_setup, verdict):
    """Low-noise mean ||x0_hat - proj|| <= 0.1 and below the high-noise
    value; whole run within five CPU minutes."""
    passed = False
    try:
        t0 = time.monotonic()
        net, sched = circle_setup["net"], circle_setup["sched"]
        circle = circle_setup["circle"]
        low_noise = [t for t in range(1, 201)
                     if sched.alpha_bar[t] >= 0.99]
        high_noise = [t for t in range(1, 201)
                      if sched.alpha_bar[t] <= 0.5]
        assert low_noise and high_noise
        err_low = _mean_projection_error(net, sched, circle, low_noise,
                                         400, seed=1)
        err_high = _mean_projection_error(net, sched, circle, high_noise,
                                          400, seed=2)
        elapsed = circle_setup["train_seconds"] + time.monotonic() - t0
        assert err_low <= 0.1, f"low-noise error {err_low:.4f}"
        assert err_low < err_high, (
            f"expected {err_low:.4f} < {err_high:.4f}")
        assert elapsed <= 300.0, f"took {elapsed:.1f}s"
        passed = True
    finally:
        verdict("criterion 3 (dirty estimates approach the projection)",
                passed)


def _angle_probe_specs(dim):
    anchor_mask = np.ones((1, dim))
    anchor_mask[0, 0] = 0.0
    ce_target = np.zeros((1, dim))
    ce_target[0, 0] = 1.0
    first = np.zeros((1, dim))
    first[0, 0] = 1.0
    return {
        "mae": Imputation(mask=anchor_mask, target=np.zeros((1, dim)),
                          norm="mae"),
        "mse": Imputation(mask=anchor_mask, target=np.zeros((1, dim)),
                          norm="mse"),
        "ce": CategoricalCE(mask=np.zeros((1, dim)), target=ce_target,
                            blocks=((0, 2),)),
        "inequality": Inequality(coeffs=first, lower=np.array([0.0])),
    }


def test_04_guidance_gradients_are_tangential(circle_setup, verdict):
    """Idealized flat case: 90 degrees to 1e-6. Trained circle: mean angle
    in [80, 100] for MAE/MSE/CE/inequality at t <= 0.5 T."""
    passed = False
    try:
        flat = AffineSubspace(np.array([[1.0, 0.0, 0.0],
                                        [0.0, 1.0, 0.0]]),
                              np.array([0.0, 0.0, 1.0]))
        sched = circle_setup["sched"]
        projector = AffineProjectorDenoiser(flat, sched)
        spec = Imputation(mask=np.array([[0.0, 1.0, 1.0]]),
                          target=np.zeros((1, 3)), norm="mae")
        rows = angle_profile(projector, sched, spec, flat, 50,
                             [10, 60, 120, 180], seed=0)
        for row in rows:
            if row.metric != "angle_deg":
                continue
            assert row.n > 0
            assert abs(row.mean - 90.0) <= 1e-6, f"mean {row.mean!r}"
            assert row.std <= 1e-6, f"std {row.std!r}"

        net, circle = circle_setup["net"], circle_setup["circle"]
        grid = [10, 30, 50, 70, 90, 100]  # all at or below half the steps
        for name, probe in _angle_probe_specs(2).items():
            rows = angle_profile(net, sched, probe, circle, 100, grid,
                                 seed=3)
            kept = [r for r in rows if r.metric == "angle_deg" and r.n > 0]
            weights = np.array([r.n for r in kept], dtype=np.float64)
            means = np.array([r.mean for r in kept])
            overall = float((weights * means).sum() / weights.sum())
            assert 80.0 <= overall <= 100.0, (
                f"{name}: mean angle {overall:.2f}")
        passed = True
    finally:
        verdict("criterion 4 (guidance gradients are tangential)", passed)


def test_05_shell_distance_matches_the_prediction(verdict):
    """d=100, intrinsic dim 1: measured shell radius within 10% of
    sqrt((1 - alpha_bar) * (d - n)) at alpha_bar 0.9 / 0.5 / 0.1."""
    passed = False
    try:
        t0 = time.monotonic()
        sched = build_schedule(200)
        circle = Circle(default_radius(100), ambient_dim=100)
        for target in (0.9, 0.5, 0.1):
            t = int(np.argmin(np.abs(sched.alpha_bar[1:] - target))) + 1
            check = shell_distance_check(circle, sched, 10_000, t, seed=0)
            ratio = check.measured_mean / check.predicted
            assert abs(ratio - 1.0) <= 0.1, (
                f"alpha_bar {check.alpha_bar:.3f}: measured "
                f"{check.measured_mean:.3f} vs {check.predicted:.3f}")
        elapsed = time.monotonic() - t0
        assert elapsed < 60.0, f"took {elapsed:.1f}s"
        passed = True
    finally:
        verdict("criterion 5 (noisy-shell distance prediction)", passed)


def test_06_guided_imputation_beats_the_mean_imputer(gaussian_setup,
                                                     verdict):
    """Correlated Gaussian, half the cells hidden: guided MSE < 0.7x the
    column-mean imputer, within five minutes."""
    passed = False
    try:
        t0 = time.monotonic()
        model = gaussian_setup["model"]
        frame = gaussian_setup["frame"]
        mask = gaussian_setup["mask"]
        mean_filled = frame.copy()
        for j, name in enumerate(frame.columns):
            hidden = mask[:, j] == 1
            mean_filled.loc[hidden, name] = frame[name].mean()
        baseline = imputation_mse(mean_filled, frame, mask, model.encoder_)
        imputed = model.impute(frame, mask, loss="mae",
                               guidance=GuidanceConfig(eta=0.2), seed=11)
        guided = imputation_mse(imputed, frame, mask, model.encoder_)
        elapsed = gaussian_setup["train_seconds"] + time.monotonic() - t0
        assert guided < 0.7 * baseline, (
            f"guided {guided:.4f} vs 0.7 * {baseline:.4f}")
        assert elapsed <= 300.0, f"took {elapsed:.1f}s"
        passed = True
    finally:
        verdict("criterion 6 (guided imputation beats the mean imputer)",
                passed)


def test_07_constraint_guidance_cuts_violations(mixture_setup, verdict):
    """Upper-quintile range constraint: guided violation <= half the
    unguided rate over 1,000 samples; composite rates obey set logic."""
    passed = False
    try:
        model = mixture_setup["model"]
        frame = mixture_setup["frame"]
        schema = mixture_setup["schema"]
        scenario = gen_constraint_scenario("range", frame, schema, seed=5,
                                           quantile=0.8)
        spec = scenario.to_spec(model.encoder_)
        unguided = model.sample(1000, seed=9)
        v_unguided = violation_rate(unguided, scenario)
        guided = model.sample(1000, seed=9, spec=spec,
                              guidance=GuidanceConfig(eta=0.2))
        v_guided = violation_rate(guided, scenario)
        assert v_unguided > 0.0
        assert v_guided <= 0.5 * v_unguided, (
            f"guided {v_guided:.2f}% vs unguided {v_unguided:.2f}%")
        for kind, relate in (("and", max), ("or", min)):
            composite = gen_constraint_scenario(kind, frame, schema,
                                                seed=5, quantile=0.8)
            samples = model.sample(1000, seed=9,
                                   spec=composite.to_spec(model.encoder_),
                                   guidance=GuidanceConfig(eta=0.2))
            report = constrain_report(samples, composite, seed=9)
            child_rates = [c["violation_percent"]
                           for c in report.extra["children"]]
            bound = relate(child_rates)
            if kind == "and":
                assert report.violation_percent >= bound - 1e-9
            else:
                assert report.violation_percent <= bound + 1e-9
        passed = True
    finally:
        verdict("criterion 7 (constraint guidance cuts violations)",
                passed)


def test_08_ablation_sweep_reuses_one_checkpoint(cli_workspace, tmp_path,
                                                 verdict):
    """All four anchoring losses x both guidance ramps from a single
    checkpoint, no retraining, one comparison table."""
    passed = False
    try:
        ckpt = cli_workspace["ckpt"]
        before = hashlib.sha256(ckpt.read_bytes()).hexdigest()
        outdir = tmp_path / "ablate"
        outdir.mkdir()
        assert main(["impute", "--checkpoint", str(ckpt),
                     "--data", str(cli_workspace["data"]),
                     "--outdir", str(outdir), "--ratio", "0.5",
                     "--seed", "11", "--ablate"]) == 0
        assert hashlib.sha256(ckpt.read_bytes()).hexdigest() == before
        table = pd.read_csv(outdir / "ablation.csv", comment="#")
        combos = set(zip(table["loss"], table["guidance_schedule"]))
        assert combos == {
            (loss, ramp) for loss in ("mae", "mse", "mae_ce", "mse_ce")
            for ramp in ("constant", "linear")}
        assert len(table) == 8
        assert table["continuous_mse"].notna().all()
        passed = True
    finally:
        verdict("criterion 8 (ablation sweep reuses one checkpoint)",
                passed)


def _directory_hashes(directory):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(pathlib.Path(directory).iterdir())}


def test_09_reruns_are_byte_identical(cli_workspace, tmp_path, verdict):
    """Training, imputing, sampling diagnostics, and synthesis all produce
    byte-identical artifacts when rerun with the same arguments."""
    passed = False
    try:
        data, schema = cli_workspace["data"], cli_workspace["schema"]
        train_args = ["train", "--data", str(data), "--schema", str(schema),
                      "--steps", "8", "--hidden-width", "16",
                      "--time-embed-dim", "4", "--time-mlp-width", "8",
                      "--epochs", "2", "--batch-size", "32", "--seed", "5"]
        first_ckpt = tmp_path / "first.json"
        second_ckpt = tmp_path / "second.json"
        assert main(train_args + ["--out", str(first_ckpt)]) == 0
        assert main(train_args + ["--out", str(second_ckpt)]) == 0
        assert first_ckpt.read_bytes() == second_ckpt.read_bytes()

        outdir = tmp_path / "imp"
        outdir.mkdir()
        impute_args = ["impute", "--checkpoint", str(cli_workspace["ckpt"]),
                       "--data", str(data), "--outdir", str(outdir),
                       "--ratio", "0.5", "--seed", "11"]
        assert main(impute_args) == 0
        snapshot = _directory_hashes(outdir)
        assert main(impute_args) == 0
        assert _directory_hashes(outdir) == snapshot

        shell_args = ["diag", "--diag", "shell", "--synthetic", "circle",
                      "--out", str(tmp_path / "shell.csv"),
                      "--t-grid", "50,150", "--seed", "2"]
        assert main(shell_args) == 0
        shell_first = (tmp_path / "shell.csv").read_bytes()
        assert main(shell_args) == 0
        assert (tmp_path / "shell.csv").read_bytes() == shell_first

        synth_dir = tmp_path / "synth"
        synth_dir.mkdir()
        synth_args = ["synth", "--kind", "mixture", "--n", "50",
                      "--outdir", str(synth_dir), "--seed", "7"]
        assert main(synth_args) == 0
        synth_snapshot = _directory_hashes(synth_dir)
        assert main(synth_args) == 0
        assert _directory_hashes(synth_dir) == synth_snapshot
        passed = True
    finally:
        verdict("criterion 9 (byte-identical reruns)", passed)


def test_10_constraint_loss_examples(verdict):
    """The worked loss examples hold exactly: interior zero, one-sided
    overshoot magnitude, disjunction product, satisfied anchor."""
    passed = False
    try:
        one = np.array([[1.0]])
        interior = Inequality(coeffs=one, lower=0.0, upper=1.0)
        assert eval_loss(interior, np.array([[0.5]])) == 0.0

        one_sided = Inequality(coeffs=one, upper=1.0, weight=1.0,
                               norm_upper="l1")
        assert eval_loss(one_sided, np.array([[1.3]])) == pytest.approx(
            0.3, abs=1e-12)

        either = Disjunction((
            Inequality(coeffs=one, lower=2.0, norm_lower="l1"),
            Inequality(coeffs=one, upper=1.0, norm_upper="l1")))
        assert eval_loss(either, np.array([[1.5]])) == 0.25
        assert eval_loss(either, np.array([[0.5]])) == 0.0

        anchored = Imputation(mask=np.array([[0.0]]),
                              target=np.array([[2.0]]), norm="mae")
        assert eval_loss(anchored, np.array([[2.0]])) == 0.0
        passed = True
    finally:
        verdict("criterion 10 (constraint-loss examples)", passed)
