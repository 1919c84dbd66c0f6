"""The modal fusion projector: a 3-layer parametric map trained with a
Pearson metric loss plus a cross-modal ordinal penalty.

The loss contract lives in plain numpy (`pearson_loss`, `ordinal_loss`,
`total_loss`); training mirrors the same math in torch for autograd and
adaptive-moment updates. Weight initialization and pair sampling draw from
seeded numpy generators, so runs are deterministic end to end.
"""
from __future__ import annotations

import json
import struct
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import torch

from .errors import (
    DegenerateVarianceWarning,
    DimensionMismatch,
    MfwbError,
    NonFiniteLoss,
    TrainingCancelled,
    ZeroProjectedNorm,
)
from .fusion import MergedDistanceMatrix, build_merged_matrix
from .layout import ProjectionLayout
from .store import MAGIC, BINARY_VERSION, EmbeddingDataset

FULL_ENUM_LIMIT = 50   # below this many images the ordinal term enumerates all pairs
_SQRT_EPS = 1e-12      # keeps distance gradients finite at coincident points


@dataclass
class MfmConfig:
    w1: float = 10.0
    w2: float = 2.0
    alpha: float = 0.05
    epochs: int = 1000
    learning_rate: float = 1e-3
    ordinal_pair_budget: int = 64
    seed: int = 0
    hidden1: int = 128
    hidden2: int = 32
    activation: str = "tanh"

    def __post_init__(self):
        # zero weights are allowed for tracing/ablation of single terms
        if self.w1 < 0 or self.w2 < 0 or self.alpha < 0:
            raise MfwbError("loss weights w1, w2, alpha must be non-negative")
        if self.activation not in ("tanh", "identity"):
            raise MfwbError(f"unknown activation {self.activation!r}")


@dataclass(eq=False)
class ProjectionModel:
    """Three affine maps d -> h1 -> h2 -> 2 with an element-wise
    nonlinearity after the first two; shared by both modalities."""
    dimension: int
    hidden1: int
    hidden2: int
    activation: str
    weights: list[np.ndarray]  # [w1, b1, w2, b2, w3, b3]
    seed: int = 0
    train_config: dict = field(default_factory=dict)

    def apply(self, x: np.ndarray) -> np.ndarray:
        if x.shape[1] != self.dimension:
            raise DimensionMismatch(
                f"model expects dimension {self.dimension}, got {x.shape[1]}")
        act = np.tanh if self.activation == "tanh" else (lambda v: v)
        w1, b1, w2, b2, w3, b3 = self.weights
        h = act(x @ w1.T + b1)
        h = act(h @ w2.T + b2)
        return h @ w3.T + b3


def init_model(dimension: int, config: MfmConfig) -> ProjectionModel:
    """Uniform fan-in initialization from the config seed."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(config.seed)))
    shapes = [(config.hidden1, dimension), (config.hidden1,),
              (config.hidden2, config.hidden1), (config.hidden2,),
              (2, config.hidden2), (2,)]
    fan_ins = [dimension, dimension, config.hidden1, config.hidden1,
               config.hidden2, config.hidden2]
    weights = [rng.uniform(-1.0, 1.0, size=s) / np.sqrt(f)
               for s, f in zip(shapes, fan_ins)]
    return ProjectionModel(dimension, config.hidden1, config.hidden2,
                           config.activation, weights, seed=config.seed,
                           train_config=asdict(config))


def forward(model: ProjectionModel, dataset: EmbeddingDataset) -> ProjectionLayout:
    """Deterministic application of the network to every vector."""
    coords = model.apply(dataset.matrix())
    return ProjectionLayout.from_coords(dataset.ids(), coords)


# -- loss contract (numpy) ----------------------------------------------------


def offdiag_mask(n: int) -> np.ndarray:
    return ~np.eye(n, dtype=bool)


def cross_mask(n_total: int, n_image: int) -> np.ndarray:
    """IT block of an image-then-text merged matrix."""
    mask = np.zeros((n_total, n_total), dtype=bool)
    mask[:n_image, n_image:] = True
    return mask


def pearson_loss(m: np.ndarray, p: np.ndarray, mask: np.ndarray) -> float:
    """Negative Pearson correlation over the masked entries.

    Zero variance on either side defines the loss as 0 and emits a
    `DegenerateVarianceWarning` (a constant projected-distance matrix early
    in training must not produce NaN).
    """
    mv = np.asarray(m, dtype=np.float64)[mask]
    pv = np.asarray(p, dtype=np.float64)[mask]
    if mv.size < 2:
        raise MfwbError("pearson mask must select at least 2 entries")
    mc = mv - mv.mean()
    pc = pv - pv.mean()
    var_m = float(mc @ mc)
    var_p = float(pc @ pc)
    if var_m <= 0.0 or var_p <= 0.0:
        warnings.warn("zero variance under pearson mask; loss defined as 0",
                      DegenerateVarianceWarning)
        return 0.0
    return -float(mc @ pc) / np.sqrt(var_m * var_p)


def ordinal_loss(ti: np.ndarray, pti: np.ndarray) -> float:
    """Cross-modal order penalty.

    For each text row and image pair j<k, penalize sign disagreement
    between the high-dimensional difference and the projected one;
    normalize by the Frobenius norm of the projected cross block. Zero
    exactly when every row's distance order is preserved.
    """
    ti = np.asarray(ti, dtype=np.float64)
    pti = np.asarray(pti, dtype=np.float64)
    if ti.shape != pti.shape:
        raise MfwbError("cross blocks must have the same shape")
    norm = float(np.linalg.norm(pti))
    if norm == 0.0:
        raise ZeroProjectedNorm("projected cross block has zero norm")
    n_img = ti.shape[1]
    if n_img < 2:
        return 0.0
    jj, kk = np.triu_indices(n_img, 1)
    prod = (ti[:, jj] - ti[:, kk]) * (pti[:, jj] - pti[:, kk])
    return float(np.where(prod < 0.0, -prod, 0.0).sum() / norm)


def total_loss(m: np.ndarray, p: np.ndarray, n_image: int,
               config: MfmConfig) -> tuple[float, dict[str, float]]:
    """w1*L_M + w2*L_IT + alpha*L2 over an image-then-text merged matrix."""
    n = m.shape[0]
    l_m = pearson_loss(m, p, offdiag_mask(n))
    l_it = pearson_loss(m, p, cross_mask(n, n_image))
    ti = m[n_image:, :n_image]
    pti = p[n_image:, :n_image]
    l2 = ordinal_loss(ti, pti)
    total = config.w1 * l_m + config.w2 * l_it + config.alpha * l2
    return total, {"L_M": l_m, "L_IT": l_it, "L2": l2}


# -- torch mirror used by training --------------------------------------------


def _act(name: str):
    return torch.tanh if name == "tanh" else (lambda v: v)


def _torch_params(model: ProjectionModel, requires_grad: bool = True) -> list[torch.Tensor]:
    return [torch.tensor(w, dtype=torch.float64, requires_grad=requires_grad)
            for w in model.weights]


def _torch_apply(params: list[torch.Tensor], x: torch.Tensor, activation: str) -> torch.Tensor:
    act = _act(activation)
    w1, b1, w2, b2, w3, b3 = params
    h = act(x @ w1.T + b1)
    h = act(h @ w2.T + b2)
    return h @ w3.T + b3


def _pair_distances(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    sq = ((a[:, None, :] - b[None, :, :]) ** 2).sum(-1)
    return torch.sqrt(sq + _SQRT_EPS)


def _torch_pearson(mv: torch.Tensor, pv: torch.Tensor) -> torch.Tensor:
    mc = mv - mv.mean()
    pc = pv - pv.mean()
    var_m = (mc * mc).sum()
    var_p = (pc * pc).sum()
    if float(var_m.detach()) <= 0.0 or float(var_p.detach()) <= 0.0:
        warnings.warn("zero variance under pearson mask; loss defined as 0",
                      DegenerateVarianceWarning)
        return pv.sum() * 0.0
    return -(mc * pc).sum() / torch.sqrt(var_m * var_p)


class _TorchLoss:
    """Total loss over network outputs, with an optional per-epoch sampled
    ordinal pair set (full enumeration when pairs is None)."""

    def __init__(self, merged: MergedDistanceMatrix, config: MfmConfig):
        self.config = config
        self.n_image = merged.n_image
        m = merged.full()
        n = m.shape[0]
        iu = np.triu_indices(n, 1)
        self.iu = iu
        self.m_pairs = torch.tensor(m[iu], dtype=torch.float64)
        self.m_cross = torch.tensor(merged.it, dtype=torch.float64)  # (n_img, n_txt)
        self.ti = merged.ti  # numpy (n_txt, n_img)
        n_img = merged.n_image
        self.all_pairs = np.triu_indices(n_img, 1)
        self.n_all_pairs = len(self.all_pairs[0])

    def __call__(self, y: torch.Tensor,
                 pairs: Optional[tuple[np.ndarray, np.ndarray]] = None,
                 ) -> tuple[torch.Tensor, dict[str, float]]:
        n_img = self.n_image
        y_img, y_txt = y[:n_img], y[n_img:]
        diff = y[self.iu[0]] - y[self.iu[1]]
        p_pairs = torch.sqrt((diff ** 2).sum(-1) + _SQRT_EPS)
        l_m = _torch_pearson(self.m_pairs, p_pairs)

        p_cross = _pair_distances(y_img, y_txt)          # (n_img, n_txt)
        l_it = _torch_pearson(self.m_cross.reshape(-1), p_cross.reshape(-1))

        pti = p_cross.T                                   # (n_txt, n_img)
        if pairs is None:
            jj, kk = self.all_pairs
            d_ti = torch.tensor(self.ti[:, jj] - self.ti[:, kk], dtype=torch.float64)
            d_p = pti[:, jj] - pti[:, kk]
            rescale = 1.0
        else:
            jj, kk = pairs                                # (n_txt, budget) each
            d_ti = torch.tensor(
                np.take_along_axis(self.ti, jj, 1) - np.take_along_axis(self.ti, kk, 1),
                dtype=torch.float64)
            d_p = pti.gather(1, torch.tensor(jj)) - pti.gather(1, torch.tensor(kk))
            rescale = self.n_all_pairs / jj.shape[1]
        penalty = torch.relu(-(d_ti * d_p)).sum() * rescale
        l2 = penalty / torch.linalg.norm(pti)

        cfg = self.config
        total = cfg.w1 * l_m + cfg.w2 * l_it + cfg.alpha * l2
        parts = {"L_M": float(l_m.detach()), "L_IT": float(l_it.detach()),
                 "L2": float(l2.detach())}
        return total, parts


def _sample_pairs(rng: np.random.Generator, n_pairs_total: int, budget: int,
                  all_pairs: tuple[np.ndarray, np.ndarray], n_text: int,
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Each text row draws its own pair budget uniformly."""
    take = rng.integers(0, n_pairs_total, size=(n_text, budget))
    return all_pairs[0][take], all_pairs[1][take]


def train_mfm(dataset: EmbeddingDataset, config: MfmConfig,
              cancel: Optional[Callable[[], bool]] = None,
              progress: Optional[Callable[[int, dict], None]] = None,
              ) -> tuple[ProjectionModel, ProjectionLayout, list[dict]]:
    """Full-batch adaptive-moment training of the fusion projector.

    The metric terms always see every entry; the ordinal term enumerates
    all image pairs for small instances and otherwise samples
    `ordinal_pair_budget` pairs per text row per step (rescaled to the full
    sum). Raises `NonFiniteLoss` with the trace so far if the loss leaves
    the finite range, and `TrainingCancelled` when the cancel hook fires.
    """
    merged = build_merged_matrix(dataset)
    loss_fn = _TorchLoss(merged, config)
    model = init_model(dataset.dimension, config)
    params = _torch_params(model)
    x = torch.tensor(dataset.matrix(merged.order), dtype=torch.float64)
    opt = torch.optim.Adam(params, lr=config.learning_rate)

    full_enum = (merged.n_image <= FULL_ENUM_LIMIT
                 or config.ordinal_pair_budget >= loss_fn.n_all_pairs)
    pair_rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([config.seed, 0x0ffb])))

    trace: list[dict] = []
    for epoch in range(config.epochs):
        if cancel is not None and cancel():
            raise TrainingCancelled(f"cancelled at epoch {epoch}")
        pairs = None
        if not full_enum:
            pairs = _sample_pairs(pair_rng, loss_fn.n_all_pairs,
                                  config.ordinal_pair_budget, loss_fn.all_pairs,
                                  merged.n_text)
        opt.zero_grad()
        y = _torch_apply(params, x, config.activation)
        loss, parts = loss_fn(y, pairs)
        entry = {"epoch": epoch, "L": float(loss.detach()), **parts}
        if not np.isfinite(entry["L"]):
            raise NonFiniteLoss(f"non-finite loss at epoch {epoch}", trace)
        trace.append(entry)
        loss.backward()
        opt.step()
        if progress is not None:
            progress(epoch, entry)

    model.weights = [p.detach().numpy().copy() for p in params]
    layout = forward(model, dataset)
    return model, layout, trace


def gradient_check(model: ProjectionModel, dataset: EmbeddingDataset,
                   config: MfmConfig, probe_count: int,
                   seed: int = 0, step: float = 1e-4) -> float:
    """Max relative error between autograd and central finite differences
    of the total loss at `probe_count` randomly chosen parameters. The
    ordinal term is fully enumerated so both evaluations see one function.
    """
    merged = build_merged_matrix(dataset)
    loss_fn = _TorchLoss(merged, config)
    x = torch.tensor(dataset.matrix(merged.order), dtype=torch.float64)

    params = _torch_params(model)
    loss, _ = loss_fn(_torch_apply(params, x, config.activation))
    loss.backward()
    grads = [p.grad.detach().numpy().copy() for p in params]

    flat = [p.detach().numpy().copy() for p in params]
    sizes = [w.size for w in flat]
    rng = np.random.Generator(np.random.PCG64(seed))

    def eval_at(tensor_i: int, flat_i: int, delta: float) -> float:
        probe = [w.copy() for w in flat]
        probe[tensor_i].flat[flat_i] += delta
        with torch.no_grad():
            tp = [torch.tensor(w, dtype=torch.float64) for w in probe]
            val, _ = loss_fn(_torch_apply(tp, x, config.activation))
        return float(val)

    worst = 0.0
    for _ in range(max(1, probe_count)):
        tensor_i = int(rng.integers(0, len(flat)))
        flat_i = int(rng.integers(0, sizes[tensor_i]))
        fd = (eval_at(tensor_i, flat_i, step) - eval_at(tensor_i, flat_i, -step)) / (2 * step)
        an = float(grads[tensor_i].flat[flat_i])
        denom = max(abs(fd), abs(an), 1e-8)
        worst = max(worst, abs(fd - an) / denom)
    return worst


# -- serialization -------------------------------------------------------------


def _weights_blob(weights: list[np.ndarray]) -> bytes:
    flat = np.concatenate([w.reshape(-1) for w in weights]).astype("<f4")
    return (MAGIC + struct.pack("<III", BINARY_VERSION, 1, flat.size)
            + flat.tobytes())


def _blob_weights(blob: bytes, shapes: list[list[int]]) -> list[np.ndarray]:
    if blob[:4] != MAGIC:
        raise MfwbError("weight blob missing magic bytes")
    version, count, dim = struct.unpack_from("<III", blob, 4)
    if version != BINARY_VERSION or count != 1:
        raise MfwbError("unsupported weight blob layout")
    flat = np.frombuffer(blob, dtype="<f4", offset=16).astype(np.float64)
    if flat.size != dim or dim != sum(int(np.prod(s)) for s in shapes):
        raise MfwbError("weight blob size does not match shapes")
    weights = []
    at = 0
    for s in shapes:
        size = int(np.prod(s))
        weights.append(flat[at:at + size].reshape(s).copy())
        at += size
    return weights


def save_model(model: ProjectionModel, path: str | Path) -> None:
    """One file: a JSON header line, then the float32 weight blob."""
    header = {
        "kind": "projection-model",
        "dimension": model.dimension,
        "hidden1": model.hidden1,
        "hidden2": model.hidden2,
        "activation": model.activation,
        "seed": model.seed,
        "config": model.train_config,
        "shapes": [list(w.shape) for w in model.weights],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(_weights_blob(model.weights))


def load_model(path: str | Path) -> ProjectionModel:
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    header = json.loads(raw[:nl])
    if header.get("kind") != "projection-model":
        raise MfwbError(f"{path}: not a projection model file")
    weights = _blob_weights(raw[nl + 1:], header["shapes"])
    return ProjectionModel(
        dimension=header["dimension"], hidden1=header["hidden1"],
        hidden2=header["hidden2"], activation=header["activation"],
        weights=weights, seed=header["seed"], train_config=header["config"])
