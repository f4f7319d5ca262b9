"""The maximally revealing ("shattering") attribute and attribute gains.

For a prior P_X with smallest mass p_min, the shattering attribute splits
each x into ceil(P(x)/p_min) sub-symbols of mass p_min each (the last one
taking the remainder). Its Bayes gain through any feature channel equals
the channel's maximal leakage, which is what makes the closed form an
achievable supremum rather than just an upper bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dist import Alphabet, Channel, JointPmf, Pmf, push_forward
from .errors import AxisMismatch, LeakageError, ZeroMass
from .measures import MeasureKind, MeasureValue, i_inf_arr, i_inf_cond_arr

SNAP = 1e-12


@dataclass(frozen=True)
class ShatteringSpec:
    p_min: float
    ratios: tuple[float, ...]
    ceilings: tuple[int, ...]
    s_alphabet: Alphabet


@dataclass(frozen=True)
class AttributeMechanism:
    channel: Channel
    label: str = ""

    def __post_init__(self):
        if self.channel.role != "attribute":
            object.__setattr__(
                self,
                "channel",
                Channel(self.channel.input_axes, self.channel.output_axis,
                        self.channel.rows, "attribute"),
            )


def _snapped_ceil(r: float) -> int:
    nearest = round(r)
    if abs(r - nearest) <= SNAP:
        return int(nearest)
    return math.ceil(r)


def shattering_attribute(px: Pmf, name: str = "S") -> tuple[ShatteringSpec, AttributeMechanism]:
    probs = px.probs
    if np.any(probs <= 0):
        raise ZeroMass("restrict the prior to its support before shattering")
    p_min = float(probs.min())
    ratios = tuple(float(p / p_min) for p in probs)
    ceilings = tuple(_snapped_ceil(r) for r in ratios)

    symbols, rows = [], []
    offset = 0
    width = sum(ceilings)
    for i, (x, p, c) in enumerate(zip(px.alphabet.symbols, probs, ceilings)):
        row = np.zeros(width)
        share = p_min / p
        row[offset : offset + c - 1] = share
        row[offset + c - 1] = 1.0 - (c - 1) * share
        rows.append(row)
        symbols.extend(f"({x},{k})" for k in range(1, c + 1))
        offset += c

    s_alphabet = Alphabet(name, tuple(symbols))
    ch = Channel((px.alphabet,), s_alphabet, np.array(rows), "attribute")
    if px.alphabet.size > 1 and not np.any(ch.rows == 0):
        raise LeakageError("shattering mechanism unexpectedly has full support")
    spec = ShatteringSpec(p_min, ratios, ceilings, s_alphabet)
    return spec, AttributeMechanism(ch, "shattering")


def _attr_feature_joint(px: np.ndarray, attr_rows: np.ndarray, feat_rows: np.ndarray) -> np.ndarray:
    """P(s, z) = sum_x P(x) P(s|x) P(z|x)."""
    return np.einsum("x,xs,xz->sz", px, attr_rows, feat_rows)


def attribute_gain(px: Pmf, attr: AttributeMechanism, feat: Channel) -> MeasureValue:
    """I_inf(S; Z) for the chain S - X - Z."""
    x = px.alphabet
    if attr.channel.input_axes != (x,) or feat.input_axes != (x,):
        raise AxisMismatch("attribute and feature channels must both read X alone")
    psz = _attr_feature_joint(px.probs, attr.channel.rows, feat.rows)
    return MeasureValue(i_inf_arr(psz), MeasureKind.I_INF)


def attribute_gain_cond(jxy: JointPmf, attr: AttributeMechanism, feat: Channel) -> MeasureValue:
    """I_inf(S; Z | Y) for the chain S - (X, Y) - Z.

    ``attr`` may read X alone or (X, Y); ``feat`` reads X alone.
    """
    if len(feat.input_axes) != 1:
        raise AxisMismatch("feature channel must read X alone")
    x = feat.input_axes[0]
    xi = jxy.axis_index(x.name)
    if jxy.axes[xi] != x or len(jxy.axes) != 2:
        raise AxisMismatch("expected a joint over (X, Y)")
    y = jxy.axes[1 - xi]
    pxy = jxy.marginal(xi, 1 - xi).probs
    a_in = attr.channel.input_axes
    if a_in == (x,):
        ps_xy = np.broadcast_to(attr.channel.rows[:, None, :], (x.size, y.size, attr.channel.output_axis.size))
    elif a_in == (x, y):
        ps_xy = attr.channel.tensor
    else:
        raise AxisMismatch("attribute must read X or (X, Y), X first")
    pszy = np.einsum("xy,xys,xz->szy", pxy, ps_xy, feat.rows)
    return MeasureValue(i_inf_cond_arr(pszy), MeasureKind.I_INF_COND)


def sample_random_attribute(
    x_alphabet: Alphabet,
    s_size: int,
    seed,
    y_alphabet: Alphabet | None = None,
    name: str = "S",
) -> AttributeMechanism:
    """Attribute whose rows are drawn uniformly from the simplex."""
    if s_size < 1:
        raise LeakageError("s_size must be at least 1")
    rng = np.random.default_rng(seed)
    inputs = (x_alphabet,) if y_alphabet is None else (x_alphabet, y_alphabet)
    n_rows = x_alphabet.size * (1 if y_alphabet is None else y_alphabet.size)
    rows = rng.dirichlet(np.ones(s_size), size=n_rows)
    ch = Channel(inputs, Alphabet.range(name, s_size), rows, "attribute")
    return AttributeMechanism(ch, f"random(seed={seed})")


def attribute_joint(px: Pmf, attr: AttributeMechanism) -> JointPmf:
    """Joint P(x, s) induced by an attribute mechanism."""
    return push_forward(px, attr.channel)
