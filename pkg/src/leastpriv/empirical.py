"""Sample-based audit: splits, plug-in Bayes adversaries, gain estimates.

All columns are categorical strings. Column values are coded by their
sorted unique labels over the whole dataset, so "lowest symbol index"
in tie-breaking means lexicographically smallest label.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from ._util import fmt12, round12, substream
from .dist import JointPmf
from .errors import LeakageError, NotBinary, TooLarge, TooSmall

MAX_CELLS = 10**7


@dataclass(frozen=True, eq=False)
class Column:
    name: str
    symbols: tuple[str, ...]
    codes: np.ndarray

    @property
    def size(self) -> int:
        return len(self.symbols)


class Dataset:
    """Named categorical columns of equal length."""

    def __init__(self, columns: Mapping[str, Sequence]):
        if not columns:
            raise LeakageError("a dataset needs at least one column")
        self._cols: dict[str, Column] = {}
        n = None
        for name, values in columns.items():
            values = np.asarray(values).astype(str)
            if n is None:
                n = values.size
            elif values.size != n:
                raise LeakageError(f"column {name!r} has {values.size} rows, expected {n}")
            symbols, codes = np.unique(values, return_inverse=True)
            codes = codes.astype(np.int64)
            codes.setflags(write=False)
            self._cols[name] = Column(name, tuple(str(s) for s in symbols), codes)
        if n < 1:
            raise LeakageError("a dataset needs at least one row")
        self.n = int(n)

    @property
    def names(self) -> list[str]:
        return list(self._cols)

    def __len__(self):
        return self.n

    def __contains__(self, name):
        return name in self._cols

    def column(self, name: str) -> Column:
        try:
            return self._cols[name]
        except KeyError:
            raise LeakageError(f"no column named {name!r}") from None

    def values(self, name: str) -> np.ndarray:
        col = self.column(name)
        return np.asarray(col.symbols, dtype=object)[col.codes]

    def with_columns(self, extra: Mapping[str, Sequence]) -> "Dataset":
        cols = {n: self.values(n) for n in self.names}
        cols.update(extra)
        return Dataset(cols)

    @classmethod
    def from_csv(cls, path_or_text, is_text: bool = False) -> "Dataset":
        if is_text:
            reader = csv.reader(io.StringIO(path_or_text))
            rows = list(reader)
        else:
            with open(path_or_text, newline="", encoding="utf-8") as fh:
                rows = list(csv.reader(fh))
        if not rows:
            raise LeakageError("empty CSV")
        header, body = rows[0], rows[1:]
        if any(len(r) != len(header) for r in body):
            raise LeakageError("ragged CSV rows")
        return cls({h: [r[i] for r in body] for i, h in enumerate(header)})

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.names)
        cols = [self.values(n) for n in self.names]
        for i in range(self.n):
            w.writerow([c[i] for c in cols])
        return buf.getvalue()


@dataclass(frozen=True, eq=False)
class DatasetSplit:
    adv_idx: np.ndarray
    train_idx: np.ndarray
    eval_idx: np.ndarray
    seed: int


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_sizes(n: int) -> tuple[int, int, int]:
    n_adv = _round_half_up(0.2 * n)
    rest = n - n_adv
    n_train = _round_half_up(0.8 * rest)
    return n_adv, n_train, rest - n_train


def split_dataset(ds: Dataset, seed: int) -> DatasetSplit:
    """Shuffle rows by ``seed`` and slice 20% adversary, then 80/20 of the
    remainder into train and evaluation."""
    if ds.n < 10:
        raise TooSmall(f"need at least 10 rows to split, got {ds.n}")
    order = np.random.default_rng(seed).permutation(ds.n)
    n_adv, n_train, _ = split_sizes(ds.n)
    parts = order[:n_adv], order[n_adv : n_adv + n_train], order[n_adv + n_train :]
    for p in parts:
        p.setflags(write=False)
    return DatasetSplit(*parts, seed=seed)


@dataclass(frozen=True, eq=False)
class PluginTable:
    """Counts of the target over the conditioning cells seen when fitting.

    Only occupied cells are stored, so wide conditioning sets (many
    representation columns) cost memory proportional to the fitted rows.
    """

    target: str
    given: tuple[str, ...]
    target_symbols: tuple[str, ...]
    given_symbols: tuple[tuple[str, ...], ...]
    cells: np.ndarray  # (n_cells, len(given)) code combinations
    counts: np.ndarray  # (n_cells, n_target)
    smoothing: float

    @property
    def given_sizes(self) -> tuple[int, ...]:
        return tuple(len(s) for s in self.given_symbols)

    @property
    def marginal(self) -> np.ndarray:
        m = self.counts.sum(axis=0)
        return m / m.sum()

    def _lookup(self, given_codes: np.ndarray) -> np.ndarray:
        """Cell id per row, -1 where the combination was never fitted."""
        n = given_codes.shape[0]
        if not self.given:
            return np.zeros(n, dtype=np.int64)
        index = {row.tobytes(): i for i, row in enumerate(self.cells)}
        q = np.ascontiguousarray(given_codes, dtype=np.int64)
        return np.array([index.get(row.tobytes(), -1) for row in q], dtype=np.int64)

    def conditional(self, given_codes: np.ndarray) -> np.ndarray:
        """Estimated P(target | given) for each row of ``given_codes``."""
        given_codes = np.asarray(given_codes, dtype=np.int64)
        if given_codes.ndim == 1:
            given_codes = given_codes.reshape(1, -1)
        ids = self._lookup(given_codes)
        k = len(self.target_symbols)
        est = np.tile(self.marginal, (ids.size, 1))
        seen = ids >= 0
        c = self.counts[ids[seen]]
        est[seen] = (c + self.smoothing) / (c.sum(axis=1, keepdims=True) + self.smoothing * k)
        return est

    def predict_codes(self, given_codes: np.ndarray) -> np.ndarray:
        # argmax returns the first maximum: lowest symbol index wins ties
        return np.argmax(self.conditional(given_codes), axis=1)


def _codes(ds: Dataset, names: Sequence[str], rows) -> np.ndarray:
    if not names:
        return np.zeros((len(rows), 0), dtype=np.int64)
    return np.stack([ds.column(n).codes[rows] for n in names], axis=1).astype(np.int64)


def fit_plugin(ds: Dataset, rows, target: str, given: Sequence[str] = (), smoothing: float = 0.0) -> PluginTable:
    """Relative-frequency estimate of P(target | given) over ``rows``."""
    rows = np.asarray(rows, dtype=np.int64)
    if rows.size == 0:
        raise LeakageError("cannot fit a plug-in table on zero rows")
    if smoothing < 0:
        raise LeakageError("smoothing must be non-negative")
    given = tuple(given)
    t = ds.column(target)
    given_symbols = tuple(ds.column(g).symbols for g in given)
    g = _codes(ds, given, rows)
    if given:
        cells, inv = np.unique(g, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
    else:
        cells, inv = np.zeros((1, 0), dtype=np.int64), np.zeros(rows.size, dtype=np.int64)
    if cells.shape[0] * t.size > MAX_CELLS:
        raise TooLarge(f"plug-in table would need {cells.shape[0] * t.size} cells")
    counts = np.zeros((cells.shape[0], t.size), dtype=np.int64)
    np.add.at(counts, (inv, t.codes[rows]), 1)
    cells.setflags(write=False)
    counts.setflags(write=False)
    return PluginTable(target, given, t.symbols, given_symbols, cells, counts, float(smoothing))


def predict_map(table: PluginTable, given_values: Sequence[str]) -> str:
    """MAP guess of the target for one row of conditioning labels.

    A label never seen when fitting makes the cell unseen, so the guess
    falls back to the target marginal.
    """
    if len(given_values) != len(table.given):
        raise LeakageError("wrong number of conditioning values")
    codes = []
    for syms, value in zip(table.given_symbols, given_values):
        if str(value) not in syms:
            return table.target_symbols[int(np.argmax(table.marginal))]
        codes.append(syms.index(str(value)))
    k = int(table.predict_codes(np.array([codes], dtype=np.int64).reshape(1, -1))[0])
    return table.target_symbols[k]


def _accuracy(ds: Dataset, table: PluginTable, rows) -> float:
    pred = table.predict_codes(_codes(ds, table.given, rows))
    return float(np.mean(pred == ds.column(table.target).codes[rows]))


def _log_ratio(a: float, b: float) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        return float(np.log2(np.float64(a) / np.float64(b)))


@dataclass(frozen=True)
class AuditCell:
    task: str
    sensitive: str
    fundamental: float
    adv_gain: float
    utility: float
    delta_adv: float
    diagonal: bool = False
    noisy: bool = False

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "sensitive": self.sensitive,
            "fundamental": round12(self.fundamental),
            "adv_gain": round12(self.adv_gain),
            "utility": round12(self.utility),
            "delta_adv": round12(self.delta_adv),
            "diagonal": self.diagonal,
            "noisy": self.noisy,
        }


def make_cell(task, sensitive, fundamental, adv_gain, utility) -> AuditCell:
    return AuditCell(
        task, sensitive, fundamental, adv_gain, utility,
        delta_adv=adv_gain - utility,
        diagonal=task == sensitive,
        noisy=min(fundamental, adv_gain, utility) < 0,
    )


def estimate_gains(ds: Dataset, split: DatasetSplit, task: str, sensitive: str,
                   z_cols: Sequence[str], label_smoothing: float = 0.0,
                   feature_smoothing: float = 1.0) -> AuditCell:
    """Plug-in estimates of fundamental leakage, adversary gain and utility.

    Tables are fitted on the adversary rows and scored on the evaluation
    rows. Negative estimates are sampling noise and are kept as-is.
    """
    adv, ev = split.adv_idx, split.eval_idx
    z_cols = list(z_cols)
    s_base = fit_plugin(ds, adv, sensitive, (), label_smoothing)
    s_y = fit_plugin(ds, adv, sensitive, (task,), label_smoothing)
    s_zy = fit_plugin(ds, adv, sensitive, z_cols + [task], feature_smoothing)
    y_base = fit_plugin(ds, adv, task, (), label_smoothing)
    y_z = fit_plugin(ds, adv, task, z_cols, feature_smoothing)

    acc_s, acc_sy = _accuracy(ds, s_base, ev), _accuracy(ds, s_y, ev)
    acc_szy = _accuracy(ds, s_zy, ev)
    acc_y, acc_yz = _accuracy(ds, y_base, ev), _accuracy(ds, y_z, ev)
    return make_cell(
        task, sensitive,
        fundamental=_log_ratio(acc_sy, acc_s),
        adv_gain=_log_ratio(acc_szy, acc_sy),
        utility=_log_ratio(acc_yz, acc_y),
    )


@dataclass(frozen=True)
class AuditMatrix:
    tasks: tuple[str, ...]
    sensitives: tuple[str, ...]
    cells: tuple[tuple[AuditCell, ...], ...]
    meta: dict = field(default_factory=dict)

    def cell(self, task: str, sensitive: str) -> AuditCell:
        return self.cells[self.tasks.index(task)][self.sensitives.index(sensitive)]

    def values(self, attr: str = "delta_adv") -> np.ndarray:
        return np.array([[getattr(c, attr) for c in row] for row in self.cells])

    def top_attribute(self, task: str, exclude_diagonal: bool = True) -> str:
        """Sensitive attribute with the largest delta_adv for ``task``."""
        row = self.cells[self.tasks.index(task)]
        pool = [c for c in row if not (exclude_diagonal and c.diagonal)] or list(row)
        return max(pool, key=lambda c: c.delta_adv).sensitive

    def to_dict(self) -> dict:
        return {
            "tasks": list(self.tasks),
            "sensitives": list(self.sensitives),
            "meta": self.meta,
            "cells": [c.to_dict() for row in self.cells for c in row],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["task", "sensitive", "fundamental", "adv_gain", "utility", "delta_adv"])
        for row in self.cells:
            for c in row:
                w.writerow([c.task, c.sensitive, fmt12(c.fundamental), fmt12(c.adv_gain),
                            fmt12(c.utility), fmt12(c.delta_adv)])
        return buf.getvalue()

    @classmethod
    def from_dict(cls, doc: dict) -> "AuditMatrix":
        tasks, sens = tuple(doc["tasks"]), tuple(doc["sensitives"])
        flat = [
            AuditCell(c["task"], c["sensitive"], float(c["fundamental"]), float(c["adv_gain"]),
                      float(c["utility"]), float(c["delta_adv"]), bool(c.get("diagonal", False)),
                      bool(c.get("noisy", False)))
            for c in doc["cells"]
        ]
        grid = tuple(tuple(flat[i * len(sens) : (i + 1) * len(sens)]) for i in range(len(tasks)))
        return cls(tasks, sens, grid, dict(doc.get("meta", {})))


ZProvider = Callable[[str, DatasetSplit], "tuple[Dataset, Sequence[str]]"]


def _resolve_z(ds: Dataset, z_provider, task: str, split: DatasetSplit) -> tuple[Dataset, list[str]]:
    if callable(z_provider):
        out_ds, cols = z_provider(task, split)
        return out_ds, list(cols)
    if isinstance(z_provider, Mapping):
        return ds, list(z_provider[task])
    return ds, list(z_provider)


def audit_matrix(ds: Dataset, split: DatasetSplit, tasks: Sequence[str],
                 sensitives: Sequence[str], z_provider, **kwargs) -> AuditMatrix:
    """Grid of :class:`AuditCell`, one per (task, sensitive) pair.

    ``z_provider`` is a list of representation columns shared by all
    tasks, a mapping task -> columns, or a callable task -> (dataset,
    columns) for representations computed per task.
    """
    grid = []
    for task in tasks:
        tds, z_cols = _resolve_z(ds, z_provider, task, split)
        grid.append(tuple(estimate_gains(tds, split, task, s, z_cols, **kwargs) for s in sensitives))
    return AuditMatrix(tuple(tasks), tuple(sensitives), tuple(grid))


def repeat_splits(ds: Dataset, repeats: int, seed: int) -> list[DatasetSplit]:
    """Independent splits for repeated audits, one substream per repeat."""
    return [
        split_dataset(ds, int(substream(seed, "split", r).integers(2**63)))
        for r in range(repeats)
    ]


def audit_repeated(ds: Dataset, tasks: Sequence[str], sensitives: Sequence[str],
                   z_provider, repeats: int = 5, seed: int = 0, jobs: int = 1, **kwargs) -> AuditMatrix:
    """Audit averaged over ``repeats`` independent splits.

    With ``jobs > 1`` the repeats run on a thread pool; results are
    collected in repeat order so the average does not depend on ``jobs``.
    """
    if repeats < 1:
        raise LeakageError("repeats must be at least 1")
    splits = repeat_splits(ds, repeats, seed)

    def one(sp):
        return audit_matrix(ds, sp, tasks, sensitives, z_provider, **kwargs)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            mats = list(pool.map(one, splits))
    else:
        mats = [one(sp) for sp in splits]
    out = average_matrices(mats)
    return AuditMatrix(out.tasks, out.sensitives, out.cells, {"repeats": repeats, "seed": seed})


def average_matrices(mats: Sequence[AuditMatrix]) -> AuditMatrix:
    """Cell-wise mean over repeated audits of the same grid."""
    first = mats[0]
    grid = []
    for i, t in enumerate(first.tasks):
        row = []
        for k, s in enumerate(first.sensitives):
            cs = [m.cells[i][k] for m in mats]
            row.append(make_cell(t, s, *(float(np.mean([getattr(c, a) for c in cs]))
                                         for a in ("fundamental", "adv_gain", "utility"))))
        grid.append(tuple(row))
    return AuditMatrix(first.tasks, first.sensitives, tuple(grid), dict(first.meta))


def pearson_matrix(ds: Dataset, columns: Sequence[str]) -> np.ndarray:
    """Absolute Pearson correlation between binary columns.

    Constant columns have no defined correlation; their off-diagonal
    entries are reported as 0 with a warning.
    """
    encoded = []
    for name in columns:
        col = ds.column(name)
        if col.size > 2:
            raise NotBinary(f"column {name!r} has {col.size} categories")
        encoded.append(col.codes.astype(float))
    k = len(encoded)
    out = np.eye(k)
    sd = [float(np.std(v)) for v in encoded]
    for name, s in zip(columns, sd):
        if s == 0:
            warnings.warn(f"column {name!r} is constant; its correlations are undefined", stacklevel=2)
    for a in range(k):
        for b in range(a + 1, k):
            if sd[a] == 0 or sd[b] == 0:
                r = 0.0
            else:
                r = abs(float(np.corrcoef(encoded[a], encoded[b])[0, 1]))
            out[a, b] = out[b, a] = min(r, 1.0)
    return out


def sample_dataset(joint: JointPmf, n: int, seed: int) -> Dataset:
    """Draw ``n`` iid rows from a joint; columns named after its axes."""
    rng = np.random.default_rng(seed)
    flat = rng.choice(joint.probs.size, size=n, p=joint.probs.ravel() / joint.probs.sum())
    idx = np.unravel_index(flat, joint.probs.shape)
    return Dataset({
        a.name: np.asarray(a.symbols, dtype=object)[i] for a, i in zip(joint.axes, idx)
    })
