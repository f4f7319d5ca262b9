"""Finite-alphabet distributions, joints and channels.

Everything here is immutable after construction: arrays are copied and
flagged read-only, so objects can be shared freely between threads.
Support is always "strictly positive after clamping"; there is no
thresholding at the tolerance level.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass, field
from math import prod
from typing import Sequence

import numpy as np

from .errors import (
    AxisMismatch,
    LeakageError,
    NegativeMass,
    NotNormalized,
    UndefinedPosterior,
    ZeroEvent,
)

TOL = 1e-9


@dataclass(frozen=True)
class Alphabet:
    name: str
    symbols: tuple[str, ...]

    def __post_init__(self):
        symbols = tuple(str(s) for s in self.symbols)
        if not symbols:
            raise LeakageError(f"alphabet {self.name!r} has no symbols")
        if len(set(symbols)) != len(symbols):
            raise LeakageError(f"alphabet {self.name!r} has duplicate symbols")
        object.__setattr__(self, "symbols", symbols)

    @classmethod
    def range(cls, name: str, n: int) -> "Alphabet":
        return cls(name, tuple(str(i) for i in range(n)))

    @property
    def size(self) -> int:
        return len(self.symbols)

    def index(self, symbol) -> int:
        try:
            return self.symbols.index(str(symbol))
        except ValueError:
            raise LeakageError(f"{symbol!r} is not a symbol of {self.name!r}") from None

    def __len__(self):
        return len(self.symbols)


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.setflags(write=False)
    return out


def _clamped(arr: np.ndarray, tol: float = TOL) -> np.ndarray:
    """Reject real negative mass, clamp round-off negatives to exactly 0."""
    arr = np.array(arr, dtype=float, copy=True)
    if not np.all(np.isfinite(arr)):
        raise LeakageError("probabilities must be finite")
    if np.any(arr < -tol):
        raise NegativeMass(f"entry {arr.min()!r} is below -{tol}")
    arr[arr < 0] = 0.0
    return arr


def _check_total(total: float, tol: float = TOL, what: str = "probabilities"):
    if abs(total - 1.0) > tol:
        raise NotNormalized(f"{what} sum to {total!r}, not 1")


@dataclass(frozen=True, eq=False)
class Pmf:
    alphabet: Alphabet
    probs: np.ndarray

    def __post_init__(self):
        probs = _clamped(self.probs)
        if probs.ndim != 1 or probs.size == 0:
            raise LeakageError("a pmf needs a non-empty 1-d probability vector")
        if probs.size != self.alphabet.size:
            raise AxisMismatch(
                f"{probs.size} probabilities for {self.alphabet.size} symbols"
            )
        _check_total(float(probs.sum()))
        object.__setattr__(self, "probs", _frozen(probs))

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.probs > 0))

    def __getitem__(self, symbol) -> float:
        return float(self.probs[self.alphabet.index(symbol)])


@dataclass(frozen=True, eq=False)
class JointPmf:
    axes: tuple[Alphabet, ...]
    probs: np.ndarray

    def __post_init__(self):
        axes = tuple(self.axes)
        if len(axes) < 2:
            raise LeakageError("a joint needs at least two axes")
        names = [a.name for a in axes]
        if len(set(names)) != len(names):
            raise AxisMismatch(f"duplicate axis names {names}")
        probs = _clamped(self.probs)
        if probs.shape != tuple(a.size for a in axes):
            raise AxisMismatch(
                f"probability shape {probs.shape} does not match axes "
                f"{tuple(a.size for a in axes)}"
            )
        _check_total(float(probs.sum()))
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "probs", _frozen(probs))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.axes)

    @property
    def full_support(self) -> bool:
        return bool(np.all(self.probs > 0))

    def axis_index(self, axis) -> int:
        if isinstance(axis, Alphabet):
            axis = axis.name
        if isinstance(axis, (int, np.integer)):
            if not 0 <= axis < len(self.axes):
                raise AxisMismatch(f"axis {axis} out of range")
            return int(axis)
        try:
            return self.names.index(axis)
        except ValueError:
            raise AxisMismatch(f"no axis named {axis!r}") from None

    def marginal(self, *axes):
        """Marginal over the given axes, in the given order."""
        idx = [self.axis_index(a) for a in axes]
        drop = tuple(i for i in range(len(self.axes)) if i not in idx)
        kept = sorted(idx)
        arr = self.probs.sum(axis=drop) if drop else self.probs
        arr = np.transpose(arr, [kept.index(i) for i in idx])
        if len(idx) == 1:
            return Pmf(self.axes[idx[0]], arr)
        return JointPmf(tuple(self.axes[i] for i in idx), arr)

    def transpose(self, *axes) -> "JointPmf":
        idx = [self.axis_index(a) for a in axes]
        if sorted(idx) != list(range(len(self.axes))):
            raise AxisMismatch("transpose needs every axis exactly once")
        return JointPmf(tuple(self.axes[i] for i in idx), np.transpose(self.probs, idx))


@dataclass(frozen=True, eq=False)
class Channel:
    """Row-stochastic matrix P(out | in).

    Rows are ordered C-style over ``input_axes`` (first input axis
    slowest), i.e. X-major for two-input mechanisms.
    """

    input_axes: tuple[Alphabet, ...]
    output_axis: Alphabet
    rows: np.ndarray
    role: str = field(default="feature")

    def __post_init__(self):
        axes = self.input_axes
        if isinstance(axes, Alphabet):
            axes = (axes,)
        axes = tuple(axes)
        if not 1 <= len(axes) <= 2:
            raise LeakageError("a channel takes one or two input axes")
        rows = _clamped(self.rows)
        n_in = prod(a.size for a in axes)
        if rows.shape != (n_in, self.output_axis.size):
            raise AxisMismatch(
                f"rows shape {rows.shape} does not match ({n_in}, {self.output_axis.size})"
            )
        totals = rows.sum(axis=1)
        bad = np.flatnonzero(np.abs(totals - 1.0) > TOL)
        if bad.size:
            raise NotNormalized(f"channel row {int(bad[0])} sums to {totals[bad[0]]!r}")
        object.__setattr__(self, "input_axes", axes)
        object.__setattr__(self, "rows", _frozen(rows))

    @property
    def tensor(self) -> np.ndarray:
        """Rows reshaped to ``(*input sizes, output size)``."""
        return self.rows.reshape(*(a.size for a in self.input_axes), self.output_axis.size)

    @classmethod
    def from_rows(cls, inp: Alphabet, out: Alphabet, rows, role: str = "feature"):
        return cls((inp,), out, rows, role)

    @classmethod
    def identity(cls, inp: Alphabet, out_name: str = "Z") -> "Channel":
        return cls((inp,), Alphabet(out_name, inp.symbols), np.eye(inp.size))

    @classmethod
    def constant(cls, inp: Alphabet, out: Alphabet | None = None, symbol: int = 0) -> "Channel":
        out = out or Alphabet.range("Z", 1)
        rows = np.zeros((inp.size, out.size))
        rows[:, symbol] = 1.0
        return cls((inp,), out, rows)

    @classmethod
    def bsc(cls, p: float, inp: Alphabet | None = None, out_name: str = "Z") -> "Channel":
        """Binary symmetric channel flipping its input with probability ``p``."""
        if not 0.0 <= p <= 1.0:
            raise LeakageError("crossover probability must lie in [0, 1]")
        inp = inp or Alphabet.range("X", 2)
        if inp.size != 2:
            raise AxisMismatch("a BSC needs a binary input alphabet")
        rows = np.array([[1 - p, p], [p, 1 - p]])
        return cls((inp,), Alphabet(out_name, inp.symbols), rows)

    @classmethod
    def from_function(cls, inp: Alphabet, out: Alphabet, mapping: Sequence[int]) -> "Channel":
        """Deterministic channel sending input index i to output index mapping[i]."""
        rows = np.zeros((inp.size, out.size))
        rows[np.arange(inp.size), np.asarray(mapping, dtype=int)] = 1.0
        return cls((inp,), out, rows)


@dataclass(frozen=True)
class PosteriorReport:
    min_posterior: float
    strictly_positive: bool
    witnesses: tuple[tuple[str, str], ...]


def validate_pmf(probs, alphabet: Alphabet | None = None) -> Pmf:
    """Validate a probability vector and wrap it as a :class:`Pmf`.

    Entries in ``(-1e-9, 0)`` are clamped to zero; anything more negative
    raises :class:`NegativeMass`, and a total off by more than ``1e-9``
    raises :class:`NotNormalized`.
    """
    arr = np.asarray(probs, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise LeakageError("expected a non-empty probability vector")
    if alphabet is None:
        alphabet = Alphabet.range("A", arr.size)
    return Pmf(alphabet, arr)


def condition_joint(j: JointPmf, axis, value):
    """Distribution of the remaining axes given ``axis == value``.

    Returns a :class:`Pmf` for a two-axis joint and a :class:`JointPmf`
    otherwise.
    """
    i = j.axis_index(axis)
    k = j.axes[i].index(value)
    slab = np.take(j.probs, k, axis=i)
    mass = float(slab.sum())
    if mass <= 0.0:
        raise ZeroEvent(f"P({j.axes[i].name}={value}) = 0")
    cond = slab / mass
    rest = tuple(a for n, a in enumerate(j.axes) if n != i)
    if len(rest) == 1:
        # renormalized slab may be off by a few ulps; Pmf validation absorbs it
        return Pmf(rest[0], cond)
    return JointPmf(rest, cond)


def _as_joint_arrays(source) -> tuple[tuple[Alphabet, ...], np.ndarray]:
    if isinstance(source, Pmf):
        return (source.alphabet,), source.probs
    if isinstance(source, JointPmf):
        return source.axes, source.probs
    raise LeakageError(f"cannot push forward a {type(source).__name__}")


def push_forward(source, mech: Channel, keep_source: bool = True):
    """Compose a source distribution with a channel.

    The channel's input axes must appear (by name and symbols) among the
    source's axes. With ``keep_source`` the full joint over source axes
    plus the channel output is returned; otherwise only the output
    marginal, as a :class:`Pmf`.
    """
    axes, probs = _as_joint_arrays(source)
    names = [a.name for a in axes]
    if mech.output_axis.name in names:
        raise AxisMismatch(f"output axis {mech.output_axis.name!r} already in source")
    letters = string.ascii_letters
    src_sub = letters[: len(axes)]
    ch_sub = ""
    for inp in mech.input_axes:
        if inp.name not in names or axes[names.index(inp.name)] != inp:
            raise AxisMismatch(f"channel input {inp.name!r} does not match the source axes")
        ch_sub += src_sub[names.index(inp.name)]
    out_letter = letters[len(axes)]
    expr = f"{src_sub},{ch_sub}{out_letter}->{src_sub}{out_letter}"
    out = np.einsum(expr, probs, mech.tensor)
    if not keep_source:
        return Pmf(mech.output_axis, out.reshape(-1, mech.output_axis.size).sum(axis=0))
    return JointPmf(tuple(axes) + (mech.output_axis,), out)


def posterior_positivity(j: JointPmf, x_axis=0, y_axis=1) -> PosteriorReport:
    """Minimum of P(y|x) over all (x, y), with the cells attaining it."""
    xi, yi = j.axis_index(x_axis), j.axis_index(y_axis)
    pxy = j.marginal(xi, yi).probs
    px = pxy.sum(axis=1)
    if np.any(px <= 0):
        bad = j.axes[xi].symbols[int(np.flatnonzero(px <= 0)[0])]
        raise UndefinedPosterior(f"P({j.axes[xi].name}={bad}) = 0")
    post = pxy / px[:, None]
    lo = float(post.min())
    xs, ys = np.nonzero(post == lo)
    witnesses = tuple(
        (j.axes[xi].symbols[a], j.axes[yi].symbols[b]) for a, b in zip(xs, ys)
    )
    return PosteriorReport(lo, lo > 0, witnesses)


# JSON documents ------------------------------------------------------------

def _alphabet_doc(a: Alphabet) -> dict:
    return {"name": a.name, "symbols": list(a.symbols)}


def _alphabet_from(doc) -> Alphabet:
    if not isinstance(doc, dict) or "name" not in doc or "symbols" not in doc:
        raise LeakageError("an axis needs 'name' and 'symbols'")
    return Alphabet(str(doc["name"]), tuple(doc["symbols"]))


def joint_to_dict(j: JointPmf) -> dict:
    return {"axes": [_alphabet_doc(a) for a in j.axes], "probs": j.probs.tolist()}


def joint_from_dict(doc: dict) -> JointPmf:
    try:
        axes = tuple(_alphabet_from(a) for a in doc["axes"])
        probs = np.asarray(doc["probs"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise LeakageError(f"malformed joint document: {exc}") from None
    return JointPmf(axes, probs)


def channel_to_dict(ch: Channel) -> dict:
    doc = {
        "input_axes": [_alphabet_doc(a) for a in ch.input_axes],
        "output_axis": _alphabet_doc(ch.output_axis),
        "rows": ch.rows.tolist(),
    }
    if ch.role != "feature":
        doc["role"] = ch.role
    return doc


def channel_from_dict(doc: dict) -> Channel:
    try:
        inputs = tuple(_alphabet_from(a) for a in doc["input_axes"])
        out = _alphabet_from(doc["output_axis"])
        rows = np.asarray(doc["rows"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise LeakageError(f"malformed channel document: {exc}") from None
    return Channel(inputs, out, rows, str(doc.get("role", "feature")))


def load_joint(path) -> JointPmf:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise LeakageError(f"{path}: {exc}") from None
    return joint_from_dict(doc)


def load_channel(path) -> Channel:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise LeakageError(f"{path}: {exc}") from None
    return channel_from_dict(doc)


def dump_json(doc, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def product_joint(*pmfs: Pmf) -> JointPmf:
    """Joint of independent marginals."""
    arr = pmfs[0].probs
    for p in pmfs[1:]:
        arr = np.multiply.outer(arr, p.probs)
    return JointPmf(tuple(p.alphabet for p in pmfs), arr)


def joint_from_posterior(px: Pmf, posterior, y: Alphabet | None = None) -> JointPmf:
    """P(x, y) = P(x) P(y|x) from a prior and a row-stochastic posterior."""
    post = np.asarray(posterior, dtype=float)
    y = y or Alphabet.range("Y", post.shape[1])
    ch = Channel((px.alphabet,), y, post)
    return push_forward(px, ch)

