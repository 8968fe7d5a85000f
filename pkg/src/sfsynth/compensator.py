"""Driving-signal compensation: real-valued packing, the magnitude/phase
loss evaluated through the fixed acoustic propagation layer, and the
training loop."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import network
from .network import Adam, ModelParams, forward, backward
from .renderers import DrivingSignals


@dataclass(frozen=True)
class LossWeights:
    lambda_abs: float = 25.0
    lambda_phase: float = 1.0

    def __post_init__(self):
        if self.lambda_abs < 0 or self.lambda_phase < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    max_epochs: int = 5000
    patience: int = 100
    batch_size: int = 32
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.patience > self.max_epochs:
            raise ValueError("patience must not exceed max_epochs")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch size and max_epochs must be >= 1")


@dataclass
class TrainResult:
    params: ModelParams
    best_val_loss: float
    best_epoch: int
    epochs_run: int
    history: list                    # (train_loss, val_loss) per epoch


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, what: str):
        super().__init__(f"training diverged at epoch {epoch}: {what}")
        self.epoch = epoch


def pack_driving(d: np.ndarray) -> np.ndarray:
    """Stack Re over Im along the loudspeaker axis: (L, K) -> (2L, K)."""
    d = np.asarray(d, dtype=np.complex128)
    if d.ndim != 2:
        raise ValueError("driving matrix must be (L, K)")
    if not (np.all(np.isfinite(d.real)) and np.all(np.isfinite(d.imag))):
        raise ValueError("driving matrix must be finite")
    return np.concatenate([d.real, d.imag], axis=0)


def unpack_driving(t: np.ndarray) -> np.ndarray:
    """Inverse of pack_driving: rows l and L+l recombine as re + j im."""
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 2 or t.shape[0] % 2 != 0:
        raise ValueError("packed tensor must have an even row count")
    half = t.shape[0] // 2
    return t[:half] + 1j * t[half:]


def predict_control_pressure(d_cnn: np.ndarray, g_stack: np.ndarray) -> np.ndarray:
    """Per-frequency propagation p(:, k) = G_k @ d(:, k).

    g_stack has shape (K, I, L); this fixed linear layer is the bridge
    the loss gradients flow through.
    """
    d = np.asarray(d_cnn, dtype=np.complex128)
    g = np.asarray(g_stack, dtype=np.complex128)
    if g.ndim != 3 or d.ndim != 2 or g.shape[0] != d.shape[1] or g.shape[2] != d.shape[0]:
        raise ValueError("shapes do not chain: need (K, I, L) x (L, K)")
    return np.einsum("kil,lk->ik", g, d)


def _wrap_phase(delta: np.ndarray) -> np.ndarray:
    return np.mod(delta + np.pi, 2 * np.pi) - np.pi


def loss(p_pred: np.ndarray, p_gt: np.ndarray, w: LossWeights) -> float:
    """Mean over entries of lam_abs*| |p_gt|-|p_pred| | plus
    lam_phase*|wrapped phase difference|."""
    p_pred = np.asarray(p_pred)
    p_gt = np.asarray(p_gt)
    if p_pred.shape != p_gt.shape:
        raise ValueError("shape mismatch between prediction and target")
    mag_err = np.abs(np.abs(p_gt) - np.abs(p_pred))
    ph_err = np.abs(_wrap_phase(np.angle(p_gt) - np.angle(p_pred)))
    return float((w.lambda_abs * mag_err + w.lambda_phase * ph_err).mean())


def loss_gradient(p_pred: np.ndarray, p_gt: np.ndarray,
                  w: LossWeights) -> np.ndarray:
    """Gradient of loss() with respect to p_pred, carried as the complex
    array dL/dRe + j dL/dIm.  Subgradient 0 at the |.| kinks."""
    if p_pred.shape != p_gt.shape:
        raise ValueError("shape mismatch between prediction and target")
    mag = np.abs(p_pred)
    safe = np.where(mag == 0, 1.0, mag)
    su = np.sign(np.abs(p_gt) - mag)
    sv = np.sign(_wrap_phase(np.angle(p_gt) - np.angle(p_pred)))
    n = p_pred.size
    gre = (-w.lambda_abs * su * p_pred.real / safe
           + w.lambda_phase * sv * p_pred.imag / safe ** 2) / n
    gim = (-w.lambda_abs * su * p_pred.imag / safe
           - w.lambda_phase * sv * p_pred.real / safe ** 2) / n
    zero = mag == 0
    if np.any(zero):
        gre = np.where(zero, 0.0, gre)
        gim = np.where(zero, 0.0, gim)
    return gre + 1j * gim


def _stack_batch(records, idxs) -> np.ndarray:
    # (1, rows, cols, batch) in the network layout
    t = np.stack([np.asarray(records[i].tensor, dtype=np.float64) for i in idxs],
                 axis=-1)
    return t[None, ...]


def _batch_loss_and_grads(params: ModelParams, records, idxs,
                          g_stack: np.ndarray, w: LossWeights,
                          want_grads: bool):
    x = _stack_batch(records, idxs)
    y, cache = forward(params, x)
    half = params.rows // 2
    d = y[0, :half, :, :] + 1j * y[0, half:, :, :]          # (L, K, B)
    p = np.einsum("kil,lkb->ikb", g_stack, d)
    p_gt = np.stack([records[i].pressures for i in idxs], axis=-1)
    total = loss(p, p_gt, w)
    if not want_grads:
        return total, None
    gp = loss_gradient(p, p_gt, w)
    gd = np.einsum("kil,ikb->lkb", g_stack.conj(), gp)
    gt = np.concatenate([gd.real, gd.imag], axis=0)          # (2L, K, B)
    grads = backward(params, gt[None, ...], cache)
    return total, grads


def evaluate_loss(params: ModelParams, records, g_stack: np.ndarray,
                  w: LossWeights, batch_size: int = 32) -> float:
    """Mean loss over records, weighted by record count."""
    total = 0.0
    for lo in range(0, len(records), batch_size):
        idxs = range(lo, min(lo + batch_size, len(records)))
        val, _ = _batch_loss_and_grads(params, records, list(idxs), g_stack,
                                       w, want_grads=False)
        total += val * len(idxs)
    return total / len(records)


def train_compensator(train_records, val_records, cfg: TrainConfig,
                      g_stack: np.ndarray,
                      weights: LossWeights | None = None,
                      layers: list | None = None,
                      skip: tuple | None = (network.SKIP_SRC, network.SKIP_DST),
                      log_every: int = 0) -> TrainResult:
    """Adam training with early stopping on the validation loss.

    Deterministic for a fixed cfg.seed: the initialization and the
    per-epoch shuffles come from independent child streams of the seed.
    Returns the parameters of the best validation epoch.
    """
    if len(train_records) == 0 or len(val_records) == 0:
        raise ValueError("need non-empty train and validation splits")
    g_stack = np.asarray(g_stack, dtype=np.complex128)
    w = weights or LossWeights()
    rows, cols = np.asarray(train_records[0].tensor).shape
    seq = np.random.SeedSequence(cfg.seed)
    s_init, s_shuffle = seq.spawn(2)
    params = network.init_params(rows, cols, seed=s_init, layers=layers,
                                 skip=skip)
    flat = params.flat()
    opt = Adam(flat, lr=cfg.learning_rate, beta1=cfg.beta1, beta2=cfg.beta2,
               eps=cfg.eps)
    shuffler = np.random.default_rng(s_shuffle)

    best_val = np.inf
    best_epoch = -1
    best_params = params.copy()
    since_improve = 0
    history = []
    n = len(train_records)
    for epoch in range(1, cfg.max_epochs + 1):
        order = shuffler.permutation(n)
        train_loss = 0.0
        for lo in range(0, n, cfg.batch_size):
            idxs = order[lo:lo + cfg.batch_size].tolist()
            batch_loss, grads = _batch_loss_and_grads(
                params, train_records, idxs, g_stack, w, want_grads=True)
            if not np.isfinite(batch_loss):
                raise TrainingDivergedError(epoch, "training loss is not finite")
            opt.step(flat, grads)
            train_loss += batch_loss * len(idxs)
        train_loss /= n
        val_loss = evaluate_loss(params, val_records, g_stack, w,
                                 cfg.batch_size)
        if not np.isfinite(val_loss):
            raise TrainingDivergedError(epoch, "validation loss is not finite")
        history.append((train_loss, val_loss))
        if log_every and epoch % log_every == 0:
            print(f"epoch {epoch:5d}  train {train_loss:.6f}  val {val_loss:.6f}")
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_params = params.copy()
            since_improve = 0
        else:
            since_improve += 1
            if since_improve > cfg.patience:
                break
    return TrainResult(params=best_params, best_val_loss=float(best_val),
                       best_epoch=best_epoch, epochs_run=len(history),
                       history=history)


def compensate(d_mr: DrivingSignals, params: ModelParams) -> DrivingSignals:
    """Apply the trained network to model-based driving signals."""
    expected = (params.rows // 2, params.cols)
    if (d_mr.l_active, d_mr.k) != expected:
        raise ValueError(
            f"driving matrix {(d_mr.l_active, d_mr.k)} does not match the "
            f"trained geometry {expected}")
    out = network.cnn_forward(pack_driving(d_mr.values), params)
    return DrivingSignals(values=unpack_driving(out), provenance="cnn")
