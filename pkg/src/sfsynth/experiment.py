"""Experiment pipeline: dataset generation, training, metric sweeps and
field rendering, with a content-hashed artifact manifest."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fileio
from .acoustics import Source, green_matrix
from .compensator import pack_driving, train_compensator, unpack_driving
from .config import ExperimentConfig
from .datasets import Dataset, build_dataset
from .evaluation import (
    NRE_FLOOR_DB,
    SweepContext,
    metric_samples,
    sweep,
)
from .network import ModelParams, cnn_forward, forward
from .renderers import pm_operator


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[stage:{stage}] {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class ArtifactManifest:
    config_hash: str
    files: list                      # {"path", "role", "sha256", "stale"}

    def to_json(self) -> str:
        payload = {"config_hash": self.config_hash,
                   "files": sorted(self.files, key=lambda f: f["path"])}
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ArtifactManifest":
        d = json.loads(text)
        return cls(config_hash=d["config_hash"], files=d["files"])

    def verify(self, out_dir: Path) -> bool:
        for f in self.files:
            p = out_dir / f["path"]
            if f.get("stale") or not p.exists() or fileio.sha256_file(p) != f["sha256"]:
                return False
        return True

    def paths_for(self, role: str) -> list:
        return [f["path"] for f in self.files if f["role"] == role]


def _record(manifest: ArtifactManifest, out_dir: Path, rel: str, role: str) -> None:
    manifest.files = [f for f in manifest.files if f["path"] != rel]
    manifest.files.append({"path": rel, "role": role,
                           "sha256": fileio.sha256_file(out_dir / rel),
                           "stale": False})


def _stage_fresh(prev: ArtifactManifest | None, out_dir: Path, role: str) -> bool:
    """True when every artifact of the role exists with matching hash."""
    if prev is None:
        return False
    entries = [f for f in prev.files if f["role"] == role]
    if not entries:
        return False
    for f in entries:
        p = out_dir / f["path"]
        if f.get("stale") or not p.exists() or fileio.sha256_file(p) != f["sha256"]:
            return False
    return True


def _write_manifest(manifest: ArtifactManifest, out_dir: Path) -> None:
    (out_dir / "manifest.json").write_text(manifest.to_json())


def _mark_stale(manifest: ArtifactManifest, role: str) -> None:
    for f in manifest.files:
        if f["role"] == role:
            f["stale"] = True


def _test_driving(cfg: ExperimentConfig, dataset: Dataset, array,
                  cp, params: ModelParams | None) -> dict:
    """Per-method (S, L_active, K) driving arrays for the test sources."""
    freq = dataset.freq_grid
    recs = dataset.test
    s = len(recs)
    out = {}
    if "mr" in cfg.methods:
        out["mr"] = np.stack([unpack_driving(r.tensor) for r in recs])
    if "pm" in cfg.methods:
        d = np.empty((s, array.active_count, freq.k), dtype=np.complex128)
        for ki, omega in enumerate(freq.angular):
            op = pm_operator(array, cp, omega, cfg.lam, freq.c)
            for si, rec in enumerate(recs):
                d[si, :, ki] = op.c_cp @ rec.pressures[:, ki]
        out["pm"] = d
    if "cnn" in cfg.methods:
        if params is None:
            raise ValueError("cnn requested but no trained model is available")
        x = np.stack([r.tensor for r in recs], axis=-1)[None, ...]
        y, _ = forward(params, x)
        half = params.rows // 2
        out["cnn"] = np.transpose(y[0, :half] + 1j * y[0, half:], (2, 0, 1))
    return out


def _pointwise_nre_db(p_hat: np.ndarray, p: np.ndarray) -> np.ndarray:
    num = np.abs(p_hat - p) ** 2
    den = np.abs(p) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        r = 10.0 * np.log10(num / den)
    r = np.where(num == 0, NRE_FLOOR_DB, r)
    r = np.where((den == 0) & (num > 0), -NRE_FLOOR_DB, r)
    return np.clip(r, NRE_FLOOR_DB, -NRE_FLOOR_DB)


def render_field(cfg: ExperimentConfig, out_dir, method: str,
                 source_pos, frequency: float,
                 params: ModelParams | None = None) -> list:
    """Write ground-truth and method fields (real part, and the pointwise
    error map for the method) as CSV plus graymaps.  Returns the relative
    paths written."""
    out_dir = Path(out_dir)
    area = cfg.listening_area()
    pos = np.asarray(source_pos, dtype=np.float64).reshape(2)
    if bool(area.contains(pos[None, :], strict=False)[0]):
        raise ValueError("source position lies inside the listening area")
    if method not in cfg.methods:
        raise ValueError(f"method {method!r} not enabled in this config")
    freq = cfg.freq_grid()
    ki = freq.nearest_index(frequency)
    omega = freq.angular[ki]
    f_hz = freq.frequencies[ki]
    array = cfg.array()
    cp = cfg.control_points()
    grid = cfg.listening_grid()
    src = Source(position=pos)

    p_true = green_matrix(grid.points, pos[None, :], omega, freq.c)[:, 0]
    if method == "mr":
        from .datasets import mr_driving_matrix
        d = mr_driving_matrix(array, src, freq, cp, cfg.lam,
                              cfg.mr_listening_radius())[:, ki]
    elif method == "pm":
        op = pm_operator(array, cp, omega, cfg.lam, freq.c)
        p_cp = green_matrix(cp.points, pos[None, :], omega, freq.c)[:, 0]
        d = op.c_cp @ p_cp
    else:
        if params is None:
            ckpt = out_dir / "checkpoint.sfsm"
            if not ckpt.exists():
                raise FileNotFoundError(
                    f"no checkpoint at {ckpt}; train the model first "
                    f"(sfsynth train) or pass --method mr/pm")
            params = fileio.load_checkpoint(ckpt)
        from .datasets import mr_driving_matrix
        d_mr = mr_driving_matrix(array, src, freq, cp, cfg.lam,
                                 cfg.mr_listening_radius())
        d = unpack_driving(cnn_forward(pack_driving(d_mr), params))[:, ki]
    g_grid = green_matrix(grid.points, array.active_positions, omega, freq.c)
    p_hat = g_grid @ d

    fields_dir = out_dir / "fields"
    fields_dir.mkdir(parents=True, exist_ok=True)
    tag = f"f{f_hz:.0f}"
    written = []

    def emit(name, values):
        csv_rel = f"fields/{name}_{tag}.csv"
        pgm_rel = f"fields/{name}_{tag}.pgm"
        fileio.write_field_csv(out_dir / csv_rel, grid.points, values)
        fileio.write_pgm(out_dir / pgm_rel, np.real(values), grid.grid_shape,
                         grid.grid_index)
        written.extend([csv_rel, pgm_rel])

    emit("gt_real", p_true)
    emit(f"{method}_real", p_hat)
    err = _pointwise_nre_db(p_hat, p_true).astype(np.complex128)
    emit(f"{method}_nre", err)
    return written


ALL_STAGES = ("dataset", "train", "sweep", "render")


def run_experiment(cfg: ExperimentConfig, out_dir,
                   stages: tuple = ALL_STAGES) -> ArtifactManifest:
    """Execute dataset -> train -> sweep -> render; idempotent for a
    fixed config (stages whose artifacts exist with matching hashes are
    loaded instead of recomputed).  `stages` restricts the pipeline to a
    prefix of the chain; later stages always include their prerequisites.
    """
    unknown = set(stages) - set(ALL_STAGES)
    if unknown:
        raise ValueError(f"unknown stages {sorted(unknown)}")
    cfg.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    chash = cfg.config_hash()

    prev = None
    man_path = out_dir / "manifest.json"
    if man_path.exists():
        try:
            candidate = ArtifactManifest.from_json(man_path.read_text())
            if candidate.config_hash == chash:
                prev = candidate
        except (json.JSONDecodeError, KeyError):
            prev = None
    manifest = ArtifactManifest(config_hash=chash, files=[])

    (out_dir / "config.json").write_text(cfg.to_json())
    _record(manifest, out_dir, "config.json", "config")

    # -- stage: dataset -------------------------------------------------------
    try:
        array = cfg.array()
        cp = cfg.control_points()
        freq = cfg.freq_grid()
        ds_rel = "dataset.sfsx"
        if _stage_fresh(prev, out_dir, "dataset"):
            dataset, _ = fileio.load_dataset(out_dir / ds_rel)
        else:
            split = cfg.source_split()
            dataset = build_dataset(array, split, cp, freq, cfg.lam,
                                    cfg.mr_listening_radius())
            fileio.save_dataset(out_dir / ds_rel, dataset,
                                header_extra={"config_hash": chash})
        _record(manifest, out_dir, ds_rel, "dataset")
    except Exception as exc:
        _mark_stale(manifest, "dataset")
        _write_manifest(manifest, out_dir)
        raise StageError("dataset", exc) from exc

    # -- stage: train ----------------------------------------------------------
    params = None
    try:
        if "cnn" in cfg.methods and {"train", "sweep", "render"} & set(stages):
            ck_rel = "checkpoint.sfsm"
            if _stage_fresh(prev, out_dir, "checkpoint"):
                params = fileio.load_checkpoint(out_dir / ck_rel)
            else:
                g_stack = np.stack([
                    green_matrix(cp.points, array.active_positions, omega, freq.c)
                    for omega in freq.angular])
                result = train_compensator(dataset.train, dataset.val,
                                           cfg.train_config(), g_stack,
                                           cfg.loss_weights())
                params = result.params
                fileio.save_checkpoint(out_dir / ck_rel, params)
            _record(manifest, out_dir, ck_rel, "checkpoint")
            _record(manifest, out_dir, ck_rel + ".json", "checkpoint")
    except Exception as exc:
        _mark_stale(manifest, "checkpoint")
        _write_manifest(manifest, out_dir)
        raise StageError("train", exc) from exc

    # -- stage: sweep ----------------------------------------------------------
    if "sweep" in stages:
        try:
            axes = ["frequency_hz"]
            if cfg.family == "circular":
                axes.append("radius_m")
            expected = [f"metrics_{m}_{ax.split('_')[0]}.csv"
                        for ax in axes for m in ("nre", "ssim")]
            if _stage_fresh(prev, out_dir, "metrics") and \
                    set(prev.paths_for("metrics")) == set(expected):
                for rel in expected:
                    _record(manifest, out_dir, rel, "metrics")
            else:
                driving = _test_driving(cfg, dataset, array, cp, params)
                ctx = SweepContext(array=array, points=cfg.listening_grid(),
                                   freq_grid=freq,
                                   sources=[r.source for r in dataset.test],
                                   driving=driving)
                methods = list(driving)
                samples = metric_samples(ctx, methods)
                fig_ki = freq.nearest_index(cfg.fig_frequency)
                for ax in axes:
                    for metric in ("nre", "ssim"):
                        series = sweep(ctx, methods, ax, metric,
                                       fixed_frequency_index=fig_ki,
                                       n_radius_bins=cfg.n_radius_bins,
                                       samples=samples)
                        rel = f"metrics_{metric}_{ax.split('_')[0]}.csv"
                        fileio.write_metric_csv(out_dir / rel, series)
                        _record(manifest, out_dir, rel, "metrics")
        except Exception as exc:
            _mark_stale(manifest, "metrics")
            _write_manifest(manifest, out_dir)
            raise StageError("sweep", exc) from exc

    # -- stage: render ---------------------------------------------------------
    if "render" in stages:
        try:
            if _stage_fresh(prev, out_dir, "field"):
                for rel in prev.paths_for("field"):
                    _record(manifest, out_dir, rel, "field")
            else:
                for method in cfg.methods:
                    for rel in render_field(cfg, out_dir, method,
                                            cfg.fig_source,
                                            cfg.fig_frequency, params=params):
                        _record(manifest, out_dir, rel, "field")
        except Exception as exc:
            _mark_stale(manifest, "field")
            _write_manifest(manifest, out_dir)
            raise StageError("render", exc) from exc

    _write_manifest(manifest, out_dir)
    return manifest
