"""Tracing the utility-vs-leakage feasible region over channels P(Z|X).

Two sources of points: exhaustive enumeration of deterministic maps
X -> Z, and a seeded hill-climbing search over stochastic channels.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._util import fmt12, substream
from .dist import JointPmf, PosteriorReport
from .errors import EmptyInput, LeakageError, TooLarge
from .measures import AlphaOrder, cond_max_leakage_arr, i_inf_arr, max_leakage_arr, mi_arr

FEAS_TOL = 1e-9
ENUM_LIMIT = 10**6
CSV_HEADER = ("gamma_lpp", "gamma_ulpp", "utility_i1", "utility_iinf", "provenance", "channel_digest")


class Provenance(enum.Enum):
    ENUMERATED = "enumerated"
    SEARCHED = "searched"


@dataclass(frozen=True)
class FrontierPoint:
    gamma_lpp: float
    gamma_ulpp: float
    utility_i1: float
    utility_iinf: float
    channel_digest: str
    provenance: Provenance

    def utility(self, key: AlphaOrder) -> float:
        return self.utility_i1 if key is AlphaOrder.ONE else self.utility_iinf


@dataclass(frozen=True)
class SearchConfig:
    z_size: int = 2
    restarts: int = 32
    steps_per_restart: int = 500
    step_scale: float = 0.1
    step_decay: float = 0.995
    leakage_budget: float | None = None
    penalty_weight: float = 10.0
    seed: int = 0
    record_all: bool = False
    jobs: int = 1

    def __post_init__(self):
        if self.z_size < 1:
            raise LeakageError("z_size must be at least 1")
        if self.restarts < 1:
            raise LeakageError("restarts must be at least 1")
        if self.steps_per_restart < 0:
            raise LeakageError("steps_per_restart must be non-negative")
        if self.step_scale <= 0:
            raise LeakageError("step_scale must be positive")


@dataclass(frozen=True)
class Feasibility:
    passed: bool
    worst_residual: float
    applicable: bool

    @property
    def note(self) -> str:
        return "" if self.applicable else "assumption not met"


def channel_digest(rows: np.ndarray) -> str:
    """SHA-256 of the rows rounded to 12 decimals (shape included)."""
    canon = np.round(np.asarray(rows, dtype=float), 12) + 0.0  # folds -0.0 into 0.0
    h = hashlib.sha256()
    h.update(repr(canon.shape).encode())
    h.update(canon.astype("<f8").tobytes())
    return h.hexdigest()[:16]


def _clamp0(v: float) -> float:
    return v if v > 0 else 0.0


def evaluate_channel(pxy: np.ndarray, rows: np.ndarray, provenance: Provenance) -> FrontierPoint:
    """All frontier coordinates of one channel; ``pxy`` has axes (X, Y)."""
    pyz = pxy.T @ rows
    return FrontierPoint(
        gamma_lpp=_clamp0(cond_max_leakage_arr(pxy, rows)),
        gamma_ulpp=_clamp0(max_leakage_arr(pxy.sum(axis=1), rows)),
        utility_i1=_clamp0(mi_arr(pyz)),
        utility_iinf=_clamp0(i_inf_arr(pyz)),
        channel_digest=channel_digest(rows),
        provenance=provenance,
    )


def _xy(jxy: JointPmf) -> np.ndarray:
    if len(jxy.axes) != 2:
        raise LeakageError("frontier instances are joints over (X, Y)")
    return jxy.probs


def enumerate_deterministic(jxy: JointPmf, z_size: int) -> list[FrontierPoint]:
    """One point per deterministic map X -> Z, in lexicographic map order."""
    pxy = _xy(jxy)
    n_x = pxy.shape[0]
    if z_size < 1:
        raise LeakageError("z_size must be at least 1")
    if z_size**n_x > ENUM_LIMIT:
        raise TooLarge(f"{z_size}^{n_x} maps exceed the enumeration limit {ENUM_LIMIT}")
    eye = np.eye(z_size)
    return [
        evaluate_channel(pxy, eye[list(f)], Provenance.ENUMERATED)
        for f in itertools.product(range(z_size), repeat=n_x)
    ]


def _project(rows: np.ndarray) -> np.ndarray:
    rows = np.clip(rows, 0.0, None)
    totals = rows.sum(axis=1, keepdims=True)
    dead = totals[:, 0] <= 0
    rows[dead] = 1.0
    totals[dead] = rows.shape[1]
    return rows / totals


def _objective(p: FrontierPoint, cfg: SearchConfig) -> float:
    if cfg.leakage_budget is None:
        return p.utility_iinf
    return p.utility_iinf - cfg.penalty_weight * max(0.0, p.gamma_lpp - cfg.leakage_budget)


def _one_restart(pxy: np.ndarray, cfg: SearchConfig, r: int) -> list[FrontierPoint]:
    rng = substream(cfg.seed, "search", r)
    n_x = pxy.shape[0]
    rows = rng.dirichlet(np.ones(cfg.z_size), size=n_x)
    point = evaluate_channel(pxy, rows, Provenance.SEARCHED)
    best = _objective(point, cfg)
    trace = [point]
    scale = cfg.step_scale
    for _ in range(cfg.steps_per_restart):
        step = rng.normal(0.0, scale, size=rows.shape)
        step -= step.mean(axis=1, keepdims=True)
        cand = _project(rows + step)
        cand_point = evaluate_channel(pxy, cand, Provenance.SEARCHED)
        value = _objective(cand_point, cfg)
        if value > best:
            rows, best = cand, value
            trace.append(cand_point)
        elif cfg.record_all:
            trace.append(cand_point)
        scale *= cfg.step_decay
    return trace


def search_channels(jxy: JointPmf, cfg: SearchConfig) -> list[FrontierPoint]:
    """Seeded hill climbing over stochastic channels.

    Each restart starts from flat-Dirichlet rows and accepts zero-mean
    perturbations (clamped and renormalized onto the simplex) that
    strictly improve ``utility_iinf - penalty * max(0, gamma_lpp - budget)``.
    Returns the accepted trace of every restart in restart order; with
    ``record_all`` rejected candidates are kept too.
    """
    pxy = _xy(jxy)
    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            traces = list(pool.map(lambda r: _one_restart(pxy, cfg, r), range(cfg.restarts)))
    else:
        traces = [_one_restart(pxy, cfg, r) for r in range(cfg.restarts)]
    return [p for t in traces for p in t]


def pareto_filter(points, utility_key: AlphaOrder = AlphaOrder.INFINITY) -> list[FrontierPoint]:
    """Points not dominated under (lower gamma_lpp, higher utility)."""
    points = list(points)
    if not points:
        raise EmptyInput("pareto_filter needs at least one point")
    u = lambda p: p.utility(utility_key)  # noqa: E731
    ordered = sorted(points, key=lambda p: (p.gamma_lpp, -u(p), p.channel_digest))
    kept = []
    best_before = -np.inf
    for _, group in itertools.groupby(ordered, key=lambda p: p.gamma_lpp):
        group = list(group)
        top = u(group[0])
        if top > best_before:
            kept.extend(p for p in group if u(p) == top)
            best_before = top
    return kept


def feasibility_check(points, posterior: PosteriorReport, tol: float = FEAS_TOL) -> Feasibility:
    """Every point must sit on or below the diagonal when the posterior is
    strictly positive; otherwise the check is vacuous."""
    worst = 0.0
    for p in points:
        worst = max(worst, p.utility_i1 - p.gamma_lpp, p.utility_iinf - p.gamma_lpp)
    if not posterior.strictly_positive:
        return Feasibility(True, worst, False)
    return Feasibility(worst <= tol, worst, True)


def frontier_csv(points) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for p in points:
        w.writerow([fmt12(p.gamma_lpp), fmt12(p.gamma_ulpp), fmt12(p.utility_i1),
                    fmt12(p.utility_iinf), p.provenance.value, p.channel_digest])
    return buf.getvalue()


def read_frontier_csv(text: str) -> list[FrontierPoint]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [
        FrontierPoint(float(r["gamma_lpp"]), float(r["gamma_ulpp"]), float(r["utility_i1"]),
                      float(r["utility_iinf"]), r["channel_digest"], Provenance(r["provenance"]))
        for r in rows
    ]
