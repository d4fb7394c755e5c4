"""Gradient training of the GRU-DPD through the differentiable PA.

Direct learning: the DPD output drives the behavioral PA and the loss is the
complex MSE between the PA output and the linear reference g*x (g = PA
small-signal gain).  Backpropagation-through-time is manual (see the kernel
backends); QAT inserts fake quantization in-forward with straight-through
gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .gru import (
    DpdModel,
    FcWeights,
    GruWeights,
    HIDDEN_UNITS,
    INPUT_FEATURES,
    OUTPUT_DIM,
    _kernel_args,
)
from .nonlin import build_lut
from .pa import Dataset, PaModel, pa_apply, pa_vjp
from .quant import QuantConfig, fake_quantize, fake_quantize_model
from .signals import Waveform

__all__ = [
    "TrainConfig",
    "TrainingDivergedError",
    "FrameBatch",
    "GradientSet",
    "init_model",
    "frame_dataset",
    "forward_loss",
    "backward",
    "Adam",
    "PlateauScheduler",
    "train",
]

_PARAM_NAMES = ("w_ir", "w_iz", "w_in", "w_hr", "w_hz", "w_hn",
                "b_ir", "b_iz", "b_in", "b_hr", "b_hz", "b_hn",
                "w_fc", "b_fc")


class TrainingDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    batch_size: int = 64
    frame_length: int = 50
    stride: int = 1
    initial_lr: float = 1e-3
    plateau_patience: int = 10
    plateau_factor: float = 0.5
    min_lr: float = 1e-6
    seed: int = 0
    qat: QuantConfig | None = None
    loss: str = "mse"

    def __post_init__(self) -> None:
        if min(self.epochs, 0) < 0 or min(self.batch_size, self.frame_length,
                                          self.stride) < 1:
            raise ValueError("invalid training dimensions")
        if self.initial_lr <= 0 or self.plateau_patience < 1:
            raise ValueError("invalid optimizer settings")
        if not 0.0 < self.plateau_factor < 1.0:
            raise ValueError("plateau_factor must be in (0, 1)")
        if self.loss != "mse":
            raise ValueError(f"unknown loss {self.loss!r}")


def init_model(
    seed: int = 0,
    hidden: int = HIDDEN_UNITS,
    input_dim: int = INPUT_FEATURES,
    gate_activation: str = "hard",
    cand_activation: str = "hard",
    lut_entries: int = 256,
) -> DpdModel:
    """Uniform U(-1/sqrt(h), 1/sqrt(h)) initialization, deterministic per seed."""
    rng = np.random.default_rng(seed)
    s = 1.0 / np.sqrt(hidden)

    def u(*shape):
        return rng.uniform(-s, s, size=shape)

    gru = GruWeights(
        u(hidden, input_dim), u(hidden, input_dim), u(hidden, input_dim),
        u(hidden, hidden), u(hidden, hidden), u(hidden, hidden),
        u(hidden), u(hidden), u(hidden), u(hidden), u(hidden), u(hidden))
    fc = FcWeights(u(OUTPUT_DIM, hidden), u(OUTPUT_DIM))
    gate_lut = build_lut("sigmoid", lut_entries) if gate_activation == "lut" else None
    cand_lut = build_lut("tanh", lut_entries) if cand_activation == "lut" else None
    return DpdModel(gru, fc, gate_activation, cand_activation,
                    gate_lut=gate_lut, cand_lut=cand_lut)


@dataclass
class FrameBatch:
    """Aligned training frames: model input x[B,T,2] and target[B,T] complex."""

    x: np.ndarray
    target: np.ndarray

    def __len__(self) -> int:
        return int(self.x.shape[0])

    def take(self, idx: np.ndarray) -> "FrameBatch":
        return FrameBatch(self.x[idx], self.target[idx])


def frame_dataset(
    wave_in: Waveform,
    wave_target: Waveform,
    frame_length: int,
    stride: int,
) -> FrameBatch:
    """Sliding windows; hidden state restarts from zero in every frame."""
    si = np.asarray(wave_in.samples)
    st = np.asarray(wave_target.samples)
    if si.size != st.size:
        raise ValueError("input and target lengths differ")
    if si.size < frame_length:
        raise ValueError(
            f"waveform ({si.size}) shorter than frame_length ({frame_length})")
    n = (si.size - frame_length) // stride + 1
    starts = np.arange(n) * stride
    idx = starts[:, None] + np.arange(frame_length)[None, :]
    xin = si[idx]
    x = np.stack([xin.real, xin.imag], axis=2)
    return FrameBatch(np.ascontiguousarray(x), st[idx].copy())


def _run_forward(model: DpdModel, x: np.ndarray, qat: QuantConfig | None):
    """Kernel forward over a batch; returns (caches tuple, fq'd model used)."""
    if qat is not None:
        fqm = fake_quantize_model(model, qat)
        afmt = qat.activation_fmt
        a_scale = float(afmt.scale)
        a_qmin, a_qmax = afmt.raw_min, afmt.raw_max
        x = fake_quantize(x, afmt)
    else:
        fqm = model
        a_scale, a_qmin, a_qmax = 0.0, 0, 0
    gate_kind, cand_kind, gate_tab, cand_tab, tab_lo, tab_hi = _kernel_args(fqm)
    wi, wh, bi, bh = fqm.gru.stacked()
    h0 = np.zeros((x.shape[0], model.hidden), dtype=np.float64)
    out = kernels.forward_train(
        x, h0, wi, wh, bi, bh, fqm.fc.w_fc, fqm.fc.b_fc,
        gate_kind, cand_kind, gate_tab, cand_tab, tab_lo, tab_hi,
        a_scale, a_qmin, a_qmax)
    return out, fqm, (gate_kind, cand_kind, a_scale, a_qmin, a_qmax)


def _loss_and_grad_y(y: np.ndarray, target: np.ndarray, pa: PaModel,
                     want_grad: bool):
    u = y[..., 0] + 1j * y[..., 1]
    yp = pa_apply(u, pa)
    e = yp - pa.small_signal_gain * target
    n_samples = e.size
    loss = float(np.mean(np.abs(e) ** 2))
    if not np.isfinite(loss):
        raise TrainingDivergedError("non-finite loss in forward pass")
    if not want_grad:
        return loss, None
    g = 2.0 * e / n_samples
    gu = pa_vjp(u, g, pa)
    gy = np.stack([gu.real, gu.imag], axis=-1)
    return loss, gy


def forward_loss(
    model: DpdModel,
    frames: FrameBatch,
    pa: PaModel,
    loss: str = "mse",
    qat: QuantConfig | None = None,
) -> float:
    """Mean squared complex error of PA(DPD(x)) against g*x over the batch."""
    if loss != "mse":
        raise ValueError(f"unknown loss {loss!r}")
    out, _, _ = _run_forward(model, frames.x, qat)
    value, _ = _loss_and_grad_y(out[0], frames.target, pa, want_grad=False)
    return value


@dataclass
class GradientSet:
    """dLoss/dtheta for every model parameter, shaped like the model."""

    grads: dict[str, np.ndarray]

    def flat(self) -> np.ndarray:
        return np.concatenate([self.grads[n].ravel() for n in _PARAM_NAMES])

    def __getitem__(self, name: str) -> np.ndarray:
        return self.grads[name]


def _stacked_to_named(dwi, dbi, dwh, dbh, dwfc, dbfc) -> dict[str, np.ndarray]:
    return {
        "w_ir": dwi[0], "w_iz": dwi[1], "w_in": dwi[2],
        "w_hr": dwh[0], "w_hz": dwh[1], "w_hn": dwh[2],
        "b_ir": dbi[0], "b_iz": dbi[1], "b_in": dbi[2],
        "b_hr": dbh[0], "b_hz": dbh[1], "b_hn": dbh[2],
        "w_fc": dwfc, "b_fc": dbfc,
    }


def backward(
    model: DpdModel,
    frames: FrameBatch,
    pa: PaModel,
    loss: str = "mse",
    qat: QuantConfig | None = None,
) -> tuple[float, GradientSet]:
    """Analytic gradients via BPTT through the GRU, the PA and the loss.

    With QAT, gradients are straight-through estimates w.r.t. the master
    float weights (zeroed where a weight itself saturates).
    """
    if loss != "mse":
        raise ValueError(f"unknown loss {loss!r}")
    if model.flavor != "float":
        raise ValueError("training requires a float-flavor model")
    out, fqm, (gate_kind, cand_kind, a_scale, a_qmin, a_qmax) = _run_forward(
        model, frames.x, qat)
    y, feats, ixs, hhs, rs, zs, hns, ns, hs = out
    value, gy = _loss_and_grad_y(y, frames.target, pa, want_grad=True)
    wi, wh, _, _ = fqm.gru.stacked()
    dwi, dbi, dwh, dbh, dwfc, dbfc = kernels.backward_train(
        gy, feats, ixs, hhs, rs, zs, hns, ns, hs, y,
        wi, wh, fqm.fc.w_fc, gate_kind, cand_kind, a_scale, a_qmin, a_qmax)
    grads = _stacked_to_named(dwi, dbi, dwh, dbh, dwfc, dbfc)
    if qat is not None:
        # STE through weight fake-quantization: zero where the master saturates
        wf = qat.weight_fmt
        for name, arr in model.param_arrays().items():
            grads[name] = grads[name] * ((arr >= wf.min_value) & (arr <= wf.max_value))
    bad = [n for n, g in grads.items() if not np.all(np.isfinite(g))]
    if bad:
        raise TrainingDivergedError(f"non-finite gradient in {bad[0]}")
    return value, GradientSet(grads)


class Adam:
    """Standard Adam; update order is fixed by the parameter name list."""

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
             lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for name in _PARAM_NAMES:
            g = grads[name]
            m = self.m.setdefault(name, np.zeros_like(g))
            v = self.v.setdefault(name, np.zeros_like(g))
            m += (1.0 - b1) * (g - m)
            v += (1.0 - b2) * (g * g - v)
            params[name] -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class PlateauScheduler:
    """Multiply lr by ``factor`` after ``patience`` epochs without significant
    improvement (relative threshold, as in the usual reduce-on-plateau)."""

    def __init__(self, initial_lr: float, patience: int, factor: float,
                 min_lr: float, threshold: float = 1e-4):
        self.lr = initial_lr
        self.patience = patience
        self.factor = factor
        self.min_lr = min_lr
        self.threshold = threshold
        self.best = np.inf
        self.stale = 0

    def step(self, val_loss: float) -> float:
        if val_loss < self.best * (1.0 - self.threshold):
            self.best = val_loss
            self.stale = 0
        else:
            self.stale += 1
            if self.stale >= self.patience:
                self.lr = max(self.lr * self.factor, self.min_lr)
                self.stale = 0
        return self.lr


def train(
    model: DpdModel,
    dataset: Dataset,
    pa: PaModel,
    cfg: TrainConfig,
    val_dataset: Dataset | None = None,
) -> tuple[DpdModel, list[dict]]:
    """Adam over shuffled minibatches of frames; returns the best-on-validation
    model and the per-epoch history (epoch, train_loss, val_loss, lr).

    ``dataset`` provides the training split; ``val_dataset`` the validation
    split (defaults to the training split when omitted).
    """
    if model.flavor != "float":
        raise ValueError("training requires a float-flavor model")
    rng = np.random.default_rng(cfg.seed)
    train_frames = frame_dataset(dataset.input, dataset.input,
                                 cfg.frame_length, cfg.stride)
    val_src = val_dataset if val_dataset is not None else dataset
    val_frames = frame_dataset(val_src.input, val_src.input,
                               cfg.frame_length, cfg.stride)

    current = model.copy()
    params = current.param_arrays()
    opt = Adam()
    sched = PlateauScheduler(cfg.initial_lr, cfg.plateau_patience,
                             cfg.plateau_factor, cfg.min_lr)
    history: list[dict] = []
    best_val = np.inf
    best = current.copy()

    n = len(train_frames)
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        total = 0.0
        seen = 0
        lr = sched.lr
        for start in range(0, n, cfg.batch_size):
            batch = train_frames.take(perm[start:start + cfg.batch_size])
            try:
                value, grads = backward(current, batch, pa, cfg.loss, cfg.qat)
            except TrainingDivergedError as e:
                raise TrainingDivergedError(f"epoch {epoch}: {e}") from e
            opt.step(params, grads.grads, lr)
            total += value * len(batch)
            seen += len(batch)
        train_loss = total / seen

        val_total = 0.0
        for start in range(0, len(val_frames), cfg.batch_size):
            vb = val_frames.take(np.arange(start, min(start + cfg.batch_size,
                                                      len(val_frames))))
            val_total += forward_loss(current, vb, pa, cfg.loss, cfg.qat) * len(vb)
        val_loss = val_total / len(val_frames)
        if not (np.isfinite(train_loss) and np.isfinite(val_loss)):
            raise TrainingDivergedError(f"epoch {epoch}: loss diverged")

        if val_loss < best_val:
            best_val = val_loss
            best = current.copy()
        sched.step(val_loss)
        history.append({"epoch": epoch, "train_loss": train_loss,
                        "val_loss": val_loss, "lr": lr})
    return best, history
