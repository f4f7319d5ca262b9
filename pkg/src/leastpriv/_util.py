"""Small shared helpers: seeded substreams and fixed-precision formatting."""

from __future__ import annotations

import math
import zlib

import numpy as np


def substream(seed: int, *names: str | int) -> np.random.Generator:
    """Independent generator derived from ``seed`` and a path of names.

    Names are hashed with CRC32 so the mapping is stable across processes
    and Python versions (unlike ``hash``).
    """
    key = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for name in names:
        if isinstance(name, str):
            key.append(zlib.crc32(name.encode("utf-8")))
        else:
            key.append(int(name))
    return np.random.default_rng(key)


def fmt12(value: float) -> str:
    """Format a float to 12 significant digits; infinities as ``inf``."""
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if math.isnan(value):
        return "nan"
    out = f"{value:.12g}"
    return "0" if out == "-0" else out


def round12(value: float):
    """JSON-ready number rounded to 12 significant digits.

    Infinite values become the string ``"inf"`` since JSON has no infinity.
    """
    if math.isinf(value) or math.isnan(value):
        return fmt12(value)
    return float(fmt12(value))
