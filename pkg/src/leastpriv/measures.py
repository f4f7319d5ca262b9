"""Exact information and leakage measures, all in bits.

The array kernels (``*_arr``) operate on plain numpy tensors and are what
the frontier search calls in its inner loop; the public functions wrap
them with axis selection and validation.
"""

from __future__ import annotations

import enum

import numpy as np

from .dist import Channel, JointPmf, Pmf
from .errors import AxisMismatch, EmptySupport


class AlphaOrder(enum.Enum):
    ONE = "1"
    INFINITY = "inf"


class MeasureKind(enum.Enum):
    SHANNON_MI = "ShannonMI"
    COND_MI = "CondMI"
    I_INF = "IInf"
    I_INF_COND = "IInfCond"
    MAX_LEAKAGE = "MaxLeakage"
    COND_MAX_LEAKAGE = "CondMaxLeakage"


class MeasureValue(float):
    """A float in bits that remembers which measure produced it."""

    kind: MeasureKind

    def __new__(cls, bits: float, kind: MeasureKind):
        obj = super().__new__(cls, max(float(bits), 0.0))
        obj.kind = kind
        return obj

    @property
    def bits(self) -> float:
        return float(self)

    def __repr__(self):
        return f"MeasureValue({float(self)!r}, {self.kind.value})"


# array kernels ---------------------------------------------------------------

def _xlogy_ratio(p: np.ndarray, num: np.ndarray, den: np.ndarray) -> float:
    mask = p > 0
    return float(np.sum(p[mask] * np.log2(num[mask] / den[mask])))


def mi_arr(pab: np.ndarray) -> float:
    pa = pab.sum(axis=1, keepdims=True)
    pb = pab.sum(axis=0, keepdims=True)
    # scaling by the total keeps a single-column (or single-row) table at
    # exactly zero when the entries sum to 1 only up to round-off
    return _xlogy_ratio(pab, pab * pab.sum(), pa * pb)


def cmi_arr(pabc: np.ndarray) -> float:
    pc = pabc.sum(axis=(0, 1), keepdims=True)
    pac = pabc.sum(axis=1, keepdims=True)
    pbc = pabc.sum(axis=0, keepdims=True)
    return _xlogy_ratio(pabc, pabc * pc, pac * pbc)


def bayes_accuracy_arr(psw: np.ndarray) -> float:
    """Sum over observations of the largest joint mass; axis 0 is the target."""
    return float(psw.max(axis=0).sum())


def i_inf_arr(psw: np.ndarray) -> float:
    return float(np.log2(bayes_accuracy_arr(psw) / psw.sum(axis=1).max()))


def i_inf_cond_arr(pswv: np.ndarray) -> float:
    """Gain of guessing from (W, W') over guessing from W'. Axes (S, W, W')."""
    num = pswv.max(axis=0).sum()
    den = pswv.sum(axis=1).max(axis=0).sum()
    return float(np.log2(num / den))


def max_leakage_arr(px: np.ndarray, rows: np.ndarray) -> float:
    supp = px > 0
    if not supp.any():
        raise EmptySupport("input distribution has empty support")
    return float(np.log2(rows[supp].max(axis=0).sum()))


def cond_max_leakage_arr(pxy: np.ndarray, rows: np.ndarray) -> float:
    """Closed form of conditional maximal leakage.

    ``rows`` is either ``(|X|, |Z|)`` (channel ignores Y) or
    ``(|X|, |Y|, |Z|)``. Labels with zero mass are skipped.
    """
    best = None
    for y in np.flatnonzero(pxy.sum(axis=0) > 0):
        supp = pxy[:, y] > 0
        block = rows[supp] if rows.ndim == 2 else rows[supp, y]
        total = block.max(axis=0).sum()
        if best is None or total > best:
            best = total
    if best is None:
        raise EmptySupport("joint has no label with positive mass")
    return float(np.log2(best))


# public API --------------------------------------------------------------------

def _pick(j: JointPmf, *axes) -> np.ndarray:
    if len(set(j.axis_index(a) for a in axes)) != len(axes):
        raise AxisMismatch("measure axes must be distinct")
    return j.marginal(*axes).probs


def shannon_mi(j: JointPmf, a=0, b=1) -> MeasureValue:
    """Shannon mutual information I(A;B) in bits."""
    return MeasureValue(mi_arr(_pick(j, a, b)), MeasureKind.SHANNON_MI)


def conditional_mi(j: JointPmf, a=0, b=1, c=2) -> MeasureValue:
    """I(A;B|C) = sum_c P(c) I(A;B|C=c)."""
    return MeasureValue(cmi_arr(_pick(j, a, b, c)), MeasureKind.COND_MI)


def bayes_accuracy(j, target=0, observed=None) -> float:
    """Accuracy of the Bayes-optimal guess of ``target``.

    A :class:`Pmf` (no observation) gives the majority-class baseline
    ``max_s P(s)``. For a joint, every non-target axis is observed unless
    ``observed`` names a subset.
    """
    if isinstance(j, Pmf):
        return float(j.probs.max())
    t = j.axis_index(target)
    if observed is None:
        observed = [i for i in range(len(j.axes)) if i != t]
    elif not isinstance(observed, (list, tuple)):
        observed = [observed]
    if not observed:
        return float(j.marginal(t).probs.max())
    arr = _pick(j, t, *observed).reshape(j.axes[t].size, -1)
    return bayes_accuracy_arr(arr)


def i_inf(j: JointPmf, s=0, w=1) -> MeasureValue:
    """Arimoto information of order infinity: log2 of the Bayes accuracy
    gain from observing W over the majority-class guess of S."""
    return MeasureValue(i_inf_arr(_pick(j, s, w)), MeasureKind.I_INF)


def i_inf_cond(j: JointPmf, s=0, w=1, w2=2) -> MeasureValue:
    """Gain of guessing S from (W, W') relative to guessing from W' alone."""
    return MeasureValue(i_inf_cond_arr(_pick(j, s, w, w2)), MeasureKind.I_INF_COND)


def arimoto(j: JointPmf, order: AlphaOrder, a=0, b=1) -> MeasureValue:
    if order is AlphaOrder.ONE:
        return shannon_mi(j, a, b)
    return i_inf(j, a, b)


def _check_input(axis_owner, ch: Channel):
    if ch.input_axes[0] != axis_owner:
        raise AxisMismatch(
            f"channel input {ch.input_axes[0].name!r} does not match {axis_owner.name!r}"
        )


def max_leakage(px: Pmf, ch: Channel) -> MeasureValue:
    """Maximal leakage log2 sum_z max_{x in supp} P(z|x)."""
    _check_input(px.alphabet, ch)
    if len(ch.input_axes) != 1:
        raise AxisMismatch("maximal leakage needs a single-input channel")
    return MeasureValue(max_leakage_arr(px.probs, ch.rows), MeasureKind.MAX_LEAKAGE)


def cond_max_leakage(jxy: JointPmf, ch: Channel) -> MeasureValue:
    """Conditional maximal leakage of X through ``ch`` given the label Y.

    ``jxy`` must have exactly the two axes (X, Y), in either order; X is
    the channel's first input axis. A second channel input, if present,
    must be Y.
    """
    x = ch.input_axes[0]
    xi = jxy.axis_index(x.name)
    if jxy.axes[xi] != x or len(jxy.axes) != 2:
        raise AxisMismatch("expected a joint over the channel input and one label axis")
    yi = 1 - xi
    pxy = jxy.marginal(xi, yi).probs
    rows = ch.rows
    if len(ch.input_axes) == 2:
        if ch.input_axes[1] != jxy.axes[yi]:
            raise AxisMismatch("second channel input must be the label axis")
        rows = ch.tensor
    return MeasureValue(cond_max_leakage_arr(pxy, rows), MeasureKind.COND_MAX_LEAKAGE)
