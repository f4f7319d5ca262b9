"""Desk-scale learned feature maps.

A linear encoder ``h = x W + b`` over one-hot categorical features feeds a
softmax task head. The censored variant adds a softmax adversary head on a
sensitive column and trains the encoder on ``task CE - lambda * adversary
CE`` (gradient reversal), with all three parts updated simultaneously on
each mini-batch. Gradients are written out by hand.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from ._util import substream
from .empirical import Dataset, DatasetSplit
from .errors import DivergenceError, LeakageError


@dataclass(frozen=True)
class OneHot:
    columns: tuple[str, ...]
    symbols: tuple[tuple[str, ...], ...]

    @classmethod
    def fit(cls, ds: Dataset, columns: Sequence[str]) -> "OneHot":
        return cls(tuple(columns), tuple(ds.column(c).symbols for c in columns))

    @property
    def offsets(self) -> np.ndarray:
        sizes = [len(s) for s in self.symbols]
        return np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)

    @property
    def width(self) -> int:
        return sum(len(s) for s in self.symbols)

    def indices(self, ds: Dataset, rows=None) -> np.ndarray:
        """Active one-hot positions, shape (n_rows, n_columns)."""
        out = []
        for name, syms, off in zip(self.columns, self.symbols, self.offsets):
            col = ds.column(name)
            if col.symbols == syms:
                codes = col.codes
            else:
                lookup = {s: i for i, s in enumerate(syms)}
                try:
                    codes = np.array([lookup[s] for s in col.symbols])[col.codes]
                except KeyError as exc:
                    raise LeakageError(f"unknown category {exc} in column {name!r}") from None
            out.append((codes if rows is None else codes[rows]) + off)
        return np.stack(out, axis=1)

    def dense(self, ds: Dataset, rows=None) -> np.ndarray:
        idx = self.indices(ds, rows)
        x = np.zeros((idx.shape[0], self.width))
        np.put_along_axis(x, idx, 1.0, axis=1)
        return x


@dataclass
class EncoderParams:
    weights: np.ndarray
    bias: np.ndarray

    @property
    def k(self) -> int:
        return self.bias.size

    def encode_indices(self, idx: np.ndarray) -> np.ndarray:
        # summing selected rows is exact and row-order independent,
        # unlike a BLAS product whose blocking depends on the batch shape
        return self.bias + self.weights[idx].sum(axis=1)


@dataclass
class Head:
    weights: np.ndarray
    bias: np.ndarray
    target: str
    symbols: tuple[str, ...]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.5
    epochs: int = 10
    batch_size: int = 128
    censor_lambda: float = 0.0
    censor_target: str | None = None
    seed: int = 0
    width: int | None = None
    init_scale: float = 0.5
    clip_norm: float | None = 1.0
    adversary_rate: float = 1.0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise LeakageError("learning_rate must be positive")
        if self.epochs < 0 or self.batch_size < 1:
            raise LeakageError("epochs must be >= 0 and batch_size >= 1")
        if self.censor_lambda < 0:
            raise LeakageError("censor_lambda must be non-negative")
        if self.adversary_rate <= 0:
            raise LeakageError("adversary_rate must be positive")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise LeakageError("clip_norm must be positive")
        if self.censor_lambda > 0 and self.censor_target is None:
            raise LeakageError("censoring needs a censor_target")


@dataclass
class TrainedModel:
    onehot: OneHot
    encoder: EncoderParams
    task_head: Head
    adversary_head: Head | None
    losses: list[float] = field(default_factory=list)
    config: TrainConfig = field(default_factory=TrainConfig)

    def represent(self, ds: Dataset, rows=None) -> np.ndarray:
        return self.encoder.encode_indices(self.onehot.indices(ds, rows))

    def to_dict(self, quant: "QuantizerSpec | None" = None) -> dict:
        def head(h):
            return None if h is None else {
                "target": h.target, "symbols": list(h.symbols),
                "weights": h.weights.tolist(), "bias": h.bias.tolist(),
            }
        doc = {
            "features": {"columns": list(self.onehot.columns),
                         "symbols": [list(s) for s in self.onehot.symbols]},
            "encoder": {"weights": self.encoder.weights.tolist(), "bias": self.encoder.bias.tolist()},
            "task_head": head(self.task_head),
            "adversary_head": head(self.adversary_head),
            "config": {k: v for k, v in vars(self.config).items()},
            "losses": list(self.losses),
        }
        if quant is not None:
            doc["quantizer"] = {"bins_per_dim": quant.bins_per_dim,
                                "edges": [e.tolist() for e in quant.edges]}
        return doc

    def to_json(self, quant=None) -> str:
        return json.dumps(self.to_dict(quant), indent=2) + "\n"


# losses and gradients ----------------------------------------------------------

def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def head_loss_grads(x: np.ndarray, labels: np.ndarray, W, b, V, c):
    """Mean cross-entropy of softmax((xW + b)V + c) and its gradients.

    Returns ``(loss, {"W", "b", "V", "c"})``.
    """
    n = x.shape[0]
    h = x @ W + b
    logp = _log_softmax(h @ V + c)
    loss = -float(logp[np.arange(n), labels].mean())
    d = np.exp(logp)
    d[np.arange(n), labels] -= 1.0
    d /= n
    dh = d @ V.T
    return loss, {"W": x.T @ dh, "b": dh.sum(axis=0), "V": h.T @ d, "c": d.sum(axis=0)}


def _init(rng, shape, scale):
    return rng.normal(0.0, scale, size=shape)


def _labels(ds: Dataset, name: str, rows) -> np.ndarray:
    return ds.column(name).codes[rows]


def _train(ds: Dataset, split: DatasetSplit, task: str, features: Sequence[str],
           cfg: TrainConfig) -> TrainedModel:
    onehot = OneHot.fit(ds, features)
    d_in = onehot.width
    k = cfg.width or d_in
    y_col = ds.column(task)
    r_enc = substream(cfg.seed, "init", "encoder")
    W = _init(r_enc, (d_in, k), cfg.init_scale)
    b = np.zeros(k)
    V = _init(r_enc, (k, y_col.size), cfg.init_scale)
    c = np.zeros(y_col.size)

    censor = cfg.censor_target is not None
    if censor:
        s_col = ds.column(cfg.censor_target)
        r_adv = substream(cfg.seed, "init", "adversary")
        A = _init(r_adv, (k, s_col.size), cfg.init_scale)
        a = np.zeros(s_col.size)

    rows = np.asarray(split.train_idx)
    x_all = onehot.dense(ds, rows)
    y_all = _labels(ds, task, rows)
    s_all = _labels(ds, cfg.censor_target, rows) if censor else None

    def full_loss():
        loss, _ = head_loss_grads(x_all, y_all, W, b, V, c)
        if not np.isfinite(loss):
            raise DivergenceError("task loss became non-finite")
        return loss

    losses = [full_loss()]
    lr, lam = cfg.learning_rate, cfg.censor_lambda
    r_batch = substream(cfg.seed, "batches")
    for _ in range(cfg.epochs):
        order = r_batch.permutation(rows.size)
        for start in range(0, rows.size, cfg.batch_size):
            bi = order[start : start + cfg.batch_size]
            xb = x_all[bi]
            _, gt = head_loss_grads(xb, y_all[bi], W, b, V, c)
            gW, gb = gt["W"], gt["b"]
            if censor:
                _, ga = head_loss_grads(xb, s_all[bi], W, b, A, a)
                A -= lr * cfg.adversary_rate * ga["V"]
                a -= lr * cfg.adversary_rate * ga["c"]
                if lam:
                    gW = gW - lam * ga["W"]
                    gb = gb - lam * ga["b"]
            # the reversed term grows with the adversary's confidence; capping
            # the encoder step keeps large lambda from overflowing
            if cfg.clip_norm is not None:
                norm = np.sqrt(np.sum(gW * gW) + np.sum(gb * gb))
                if norm > cfg.clip_norm:
                    gW = gW * (cfg.clip_norm / norm)
                    gb = gb * (cfg.clip_norm / norm)
            V -= lr * gt["V"]
            c -= lr * gt["c"]
            W -= lr * gW
            b -= lr * gb
        losses.append(full_loss())

    task_head = Head(V, c, task, y_col.symbols)
    adv_head = Head(A, a, cfg.censor_target, s_col.symbols) if censor else None
    return TrainedModel(onehot, EncoderParams(W, b), task_head, adv_head, losses, cfg)


def train_encoder_erm(ds: Dataset, split: DatasetSplit, task: str, features: Sequence[str],
                      cfg: TrainConfig | None = None) -> TrainedModel:
    """Plain empirical risk minimization on the training rows."""
    cfg = cfg or TrainConfig()
    if cfg.censor_lambda:
        raise LeakageError("ERM training takes censor_lambda = 0")
    return _train(ds, split, task, features, cfg)


def train_encoder_censored(ds: Dataset, split: DatasetSplit, task: str, features: Sequence[str],
                           cfg: TrainConfig) -> TrainedModel:
    """Gradient-reversal censoring of ``cfg.censor_target``."""
    if cfg.censor_target is None:
        raise LeakageError("censored training needs a censor_target")
    return _train(ds, split, task, features, cfg)


def eval_accuracy(model: TrainedModel, ds: Dataset, rows) -> float:
    h = model.represent(ds, rows)
    pred = np.argmax(h @ model.task_head.weights + model.task_head.bias, axis=1)
    return float(np.mean(pred == _labels(ds, model.task_head.target, rows)))


# quantization ------------------------------------------------------------------

@dataclass(frozen=True)
class QuantizerSpec:
    bins_per_dim: int
    edges: tuple[np.ndarray, ...]

    def codes(self, h: np.ndarray) -> np.ndarray:
        return np.stack([np.searchsorted(e, h[:, d], side="right") for d, e in enumerate(self.edges)], axis=1)


def fit_quantizer(model: TrainedModel, ds: Dataset, rows, bins_per_dim: int = 4) -> QuantizerSpec:
    """Equal-frequency bin edges per representation dimension.

    Edges that coincide (representations of categorical inputs take few
    distinct values) are merged, so a dimension may get fewer bins.
    """
    if bins_per_dim < 2:
        raise LeakageError("bins_per_dim must be at least 2")
    h = model.represent(ds, rows)
    qs = np.arange(1, bins_per_dim) / bins_per_dim
    edges = tuple(np.unique(np.quantile(h[:, d], qs)) for d in range(h.shape[1]))
    return QuantizerSpec(bins_per_dim, edges)


def export_representations(model: TrainedModel, ds: Dataset, quant: QuantizerSpec,
                           prefix: str = "z_") -> tuple[Dataset, list[str]]:
    """Add quantized representation columns ``z_0 .. z_{k-1}`` for every row."""
    codes = quant.codes(model.represent(ds))
    names = [f"{prefix}{d}" for d in range(codes.shape[1])]
    return ds.with_columns({n: codes[:, d].astype(str) for d, n in enumerate(names)}), names


def with_config(cfg: TrainConfig, **changes) -> TrainConfig:
    return replace(cfg, **changes)


def representation_provider(ds: Dataset, features: Sequence[str], cfg: TrainConfig | None = None,
                            censor: Mapping[str, str] | None = None, bins_per_dim: int = 4):
    """Callable ``(task, split) -> (dataset, z columns)`` for the auditor.

    Trains one encoder per task and split (ERM, or GRAD against
    ``censor[task]`` when the task has an entry) and appends its quantized
    codes. A task listed in ``features`` is dropped from that task's inputs.
    """
    cfg = cfg or TrainConfig()
    censor = dict(censor or {})

    def provide(task: str, split: DatasetSplit):
        feats = [f for f in features if f != task]
        if task in censor:
            lam = cfg.censor_lambda or 4.0
            model = train_encoder_censored(ds, split, task, feats,
                                           replace(cfg, censor_lambda=lam, censor_target=censor[task]))
        else:
            model = train_encoder_erm(ds, split, task, feats,
                                      replace(cfg, censor_lambda=0.0, censor_target=None))
        quant = fit_quantizer(model, ds, split.train_idx, bins_per_dim)
        return export_representations(model, ds, quant)

    return provide


# synthetic battery ---------------------------------------------------------------

BATTERY_TASKS = ("T1", "T2")
BATTERY_SENSITIVE = ("A1", "A2", "A3")
BATTERY_FEATURES = ("g1", "g2", "f1", "f2", "f3")


def _flip(rng, bits, p):
    return np.where(rng.random(bits.size) < p, 1 - bits, bits)


def correlated_battery(seed: int, n: int = 20000) -> Dataset:
    """Synthetic table with two binary tasks and three correlated attributes.

    A hidden fair bit ``u`` drives everything. Task sources ``g1, g2`` are
    ``u`` flipped with probability 0.2 and 0.3, and ``T1, T2`` flip those
    again with probability 0.1. Each four-valued feature ``f_i`` has ``u``
    (flipped with probability 0.15) as its high bit and a fresh fair low
    bit; attribute ``A_i`` copies ``f_i`` with probability 0.85 and is
    uniform otherwise. The attributes are correlated with each other and
    with the tasks only through ``u``.
    """
    rng = substream(seed, "battery")
    u = rng.integers(0, 2, n)
    cols = {}
    for j, p in ((1, 0.2), (2, 0.3)):
        g = _flip(rng, u, p)
        cols[f"g{j}"] = g
        cols[f"T{j}"] = _flip(rng, g, 0.1)
    for i in (1, 2, 3):
        f = 2 * _flip(rng, u, 0.15) + rng.integers(0, 2, n)
        cols[f"f{i}"] = f
        cols[f"A{i}"] = np.where(rng.random(n) < 0.85, f, rng.integers(0, 4, n))
    return Dataset(cols)
