"""Binary artifact formats (driving signals, model checkpoints, datasets)
and the CSV / graymap exporters.

All binary layouts are little-endian.  Floats are written as IEEE 754
float64; complex matrices go row-major with interleaved (re, im).
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .acoustics import FrequencyGrid, Source
from .datasets import Dataset, DatasetRecord
from .network import LayerSpec, ModelParams
from .renderers import DrivingSignals

MAGIC_DRIVING = b"SFSD"
MAGIC_MODEL = b"SFSM"
MAGIC_DATASET = b"SFSX"
FORMAT_VERSION = 1

_KINDS = ("conv", "tconv")
_ACTS = ("prelu", "linear")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _interleave(z: np.ndarray) -> np.ndarray:
    out = np.empty(z.shape + (2,), dtype="<f8")
    out[..., 0] = z.real
    out[..., 1] = z.imag
    return out


def _deinterleave(raw: np.ndarray) -> np.ndarray:
    return raw[..., 0] + 1j * raw[..., 1]


# -- driving signals ---------------------------------------------------------

def save_driving(path, d: DrivingSignals) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC_DRIVING)
        fh.write(struct.pack("<III", FORMAT_VERSION, d.l_active, d.k))
        fh.write(_interleave(d.values).tobytes())


def load_driving(path, provenance: str) -> DrivingSignals:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC_DRIVING:
            raise ValueError(f"{path}: not a driving-signal file")
        version, l, k = struct.unpack("<III", fh.read(12))
        if version != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        raw = np.frombuffer(fh.read(16 * l * k), dtype="<f8").reshape(l, k, 2)
    return DrivingSignals(values=_deinterleave(raw), provenance=provenance)


# -- model checkpoints -------------------------------------------------------

def _layer_entry(sp: LayerSpec) -> dict:
    return {"kind": sp.kind, "act": sp.act, "in_ch": sp.in_ch,
            "out_ch": sp.out_ch, "kh": sp.kh, "kw": sp.kw, "sh": sp.sh,
            "sw": sp.sw, "ph": sp.ph, "pw": sp.pw, "oph": sp.oph,
            "opw": sp.opw}


def save_checkpoint(path, params: ModelParams) -> None:
    """Binary checkpoint plus a JSON sidecar mirroring the layer table."""
    path = Path(path)
    l_active, k = params.rows // 2, params.cols
    with open(path, "wb") as fh:
        fh.write(MAGIC_MODEL)
        fh.write(struct.pack("<III", FORMAT_VERSION, l_active, k))
        fh.write(struct.pack("<ii",
                             -1 if params.skip_src is None else params.skip_src,
                             -1 if params.skip_dst is None else params.skip_dst))
        fh.write(struct.pack("<I", len(params.layers)))
        for sp in params.layers:
            fh.write(struct.pack(
                "<BBIIIIIIIIII", _KINDS.index(sp.kind), _ACTS.index(sp.act),
                sp.in_ch, sp.out_ch, sp.kh, sp.kw, sp.sh, sp.sw,
                sp.ph, sp.pw, sp.oph, sp.opw))
        for i in range(len(params.layers)):
            fh.write(params.kernels[i].astype("<f8").tobytes())
            fh.write(params.biases[i].astype("<f8").tobytes())
            if params.slopes[i] is not None:
                fh.write(params.slopes[i].astype("<f8").tobytes())
    sidecar = {
        "format": "sfs-model", "version": FORMAT_VERSION,
        "l_active": l_active, "k": k,
        "skip_src": params.skip_src, "skip_dst": params.skip_dst,
        "param_count": params.param_count(),
        "layers": [_layer_entry(sp) for sp in params.layers],
    }
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def load_checkpoint(path) -> ModelParams:
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC_MODEL:
            raise ValueError(f"{path}: not a model checkpoint")
        version, l_active, k = struct.unpack("<III", fh.read(12))
        if version != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        skip_src, skip_dst = struct.unpack("<ii", fh.read(8))
        (n_layers,) = struct.unpack("<I", fh.read(4))
        specs = []
        for _ in range(n_layers):
            vals = struct.unpack("<BBIIIIIIIIII", fh.read(42))
            specs.append(LayerSpec(
                kind=_KINDS[vals[0]], act=_ACTS[vals[1]], in_ch=vals[2],
                out_ch=vals[3], kh=vals[4], kw=vals[5], sh=vals[6],
                sw=vals[7], ph=vals[8], pw=vals[9], oph=vals[10],
                opw=vals[11]))
        kernels, biases, slopes = [], [], []
        for sp in specs:
            shape = sp.kernel_shape()
            count = int(np.prod(shape))
            kernels.append(np.frombuffer(fh.read(8 * count),
                                         dtype="<f8").reshape(shape).copy())
            biases.append(np.frombuffer(fh.read(8 * sp.out_ch),
                                        dtype="<f8").copy())
            if sp.act == "prelu":
                slopes.append(np.frombuffer(fh.read(8 * sp.out_ch),
                                            dtype="<f8").copy())
            else:
                slopes.append(None)
    return ModelParams(rows=2 * l_active, cols=k, layers=specs,
                       kernels=kernels, biases=biases, slopes=slopes,
                       skip_src=None if skip_src < 0 else skip_src,
                       skip_dst=None if skip_dst < 0 else skip_dst)


# -- datasets ----------------------------------------------------------------

def save_dataset(path, ds: Dataset, header_extra: dict | None = None) -> None:
    """Length-prefixed JSON header followed by fixed-size records in
    split order (train, val, test; source id ascending)."""
    recs = ds.all_records
    i_cp = ds.n_control
    header = {
        "format": "sfs-dataset", "version": FORMAT_VERSION,
        "l_active": ds.l_active, "k": ds.freq_grid.k, "i_cp": i_cp,
        "n_train": len(ds.train), "n_val": len(ds.val), "n_test": len(ds.test),
        "frequencies": [repr(float(f)) for f in ds.freq_grid.frequencies],
        "c": repr(float(ds.freq_grid.c)),
        "source_seed": ds.source_seed,
    }
    if header_extra:
        header.update(header_extra)
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC_DATASET)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(blob)))
        fh.write(blob)
        for rec in recs:
            fh.write(struct.pack("<I", rec.source_id))
            fh.write(struct.pack("<dd", float(rec.source.position[0]),
                                 float(rec.source.position[1])))
            fh.write(rec.tensor.astype("<f8").tobytes())
            fh.write(_interleave(rec.pressures).tobytes())


def load_dataset(path) -> tuple:
    """Returns (Dataset, header dict)."""
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC_DATASET:
            raise ValueError(f"{path}: not a dataset file")
        version, hlen = struct.unpack("<II", fh.read(8))
        if version != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        header = json.loads(fh.read(hlen).decode())
        l = header["l_active"]
        k = header["k"]
        i_cp = header["i_cp"]
        freq = FrequencyGrid(
            frequencies=np.array([float(f) for f in header["frequencies"]]),
            c=float(header["c"]))
        counts = (header["n_train"], header["n_val"], header["n_test"])
        groups = []
        for count in counts:
            recs = []
            for _ in range(count):
                (sid,) = struct.unpack("<I", fh.read(4))
                x, y = struct.unpack("<dd", fh.read(16))
                tensor = np.frombuffer(fh.read(8 * 2 * l * k),
                                       dtype="<f8").reshape(2 * l, k).copy()
                raw = np.frombuffer(fh.read(16 * i_cp * k),
                                    dtype="<f8").reshape(i_cp, k, 2)
                recs.append(DatasetRecord(
                    source_id=sid, source=Source(position=np.array([x, y])),
                    tensor=tensor, pressures=_deinterleave(raw)))
            groups.append(recs)
    ds = Dataset(train=groups[0], val=groups[1], test=groups[2],
                 freq_grid=freq, l_active=l, n_control=i_cp,
                 source_seed=header.get("source_seed", 0))
    return ds, header


# -- text / image exports ----------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_points_csv(path, points: np.ndarray) -> None:
    lines = ["x,y"]
    for p in np.atleast_2d(points):
        lines.append(f"{_fmt(p[0])},{_fmt(p[1])}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_driving_csv(path, d: DrivingSignals) -> None:
    """Long-format inspection dump: one row per (loudspeaker, frequency)."""
    lines = ["loudspeaker,freq_index,re,im"]
    for l in range(d.l_active):
        for k in range(d.k):
            v = d.values[l, k]
            lines.append(f"{l},{k},{_fmt(v.real)},{_fmt(v.imag)}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_field_csv(path, points: np.ndarray, values: np.ndarray) -> None:
    values = np.asarray(values, dtype=np.complex128).reshape(-1)
    lines = ["x,y,re,im"]
    for p, v in zip(np.atleast_2d(points), values):
        lines.append(f"{_fmt(p[0])},{_fmt(p[1])},{_fmt(v.real)},{_fmt(v.imag)}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_metric_csv(path, series) -> None:
    lines = ["axis_value,mr,pm,cnn,count"]
    for i, ax in enumerate(series.axis_values):
        cells = [_fmt(ax)]
        for m in ("mr", "pm", "cnn"):
            if m in series.values:
                v = series.values[m][i]
                cells.append("nan" if np.isnan(v) else _fmt(v))
            else:
                cells.append("")
        cells.append(str(int(series.counts[i])))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def write_pgm(path, values: np.ndarray, grid_shape: tuple,
              grid_index: np.ndarray) -> None:
    """8-bit binary graymap; per-image min/max normalisation.  Raster
    cells not covered by the point set stay black."""
    vals = np.asarray(values, dtype=np.float64).reshape(-1)
    ny, nx = grid_shape
    img = np.zeros((ny, nx), dtype=np.uint8)
    lo, hi = float(vals.min()), float(vals.max())
    if hi > lo:
        scaled = np.round(255 * (vals - lo) / (hi - lo)).astype(np.uint8)
    else:
        scaled = np.zeros(len(vals), dtype=np.uint8)
    img[grid_index[:, 0], grid_index[:, 1]] = scaled
    with open(path, "wb") as fh:
        fh.write(f"P5\n{nx} {ny}\n255\n".encode())
        fh.write(img.tobytes())
