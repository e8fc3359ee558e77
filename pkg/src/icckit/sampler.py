"""Randomized quasi-Monte Carlo point generation.

Sobol' points are built from a shipped direction-number table
(``data/joe_kuo_d6_128.txt``, the first 128 dimensions of the standard
Joe & Kuo D(6) table) via the usual Gray-code construction at 32 bits of
precision. Two randomizations are available: Owen-style nested scrambling
(default elsewhere in the package) and a per-dimension digital random
shift. Both are measure preserving, so every coordinate stays marginally
uniform on [0, 1).

Table file format, one row per dimension d >= 2 (the first coordinate is
the base-2 van der Corput sequence and needs no row)::

    d  s  a  m_1 ... m_s

where s is the degree of the primitive polynomial, a encodes its interior
coefficients, and m_i are the initial direction integers.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from .errors import DimensionTooLarge

BITS = 32
_SCALE = float(2**BITS)
_TABLE_FILE = "joe_kuo_d6_128.txt"

SCRAMBLE_KINDS = ("none", "nested", "shift")


@dataclass(frozen=True)
class QmcConfig:
    """Configuration for one deterministic stream of Sobol' points."""

    dimension: int
    scramble: str = "nested"
    seed: int = 0
    skip: int = 0

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.scramble not in SCRAMBLE_KINDS:
            raise ValueError(f"scramble must be one of {SCRAMBLE_KINDS}")
        if self.skip < 0:
            raise ValueError("skip must be >= 0")


@lru_cache(maxsize=1)
def _load_table() -> list[tuple[int, int, list[int]]]:
    """Parse (s, a, m-list) rows for dimensions 2, 3, ... from the data file."""
    text = resources.files("icckit.data").joinpath(_TABLE_FILE).read_text()
    rows = []
    for line in text.strip().splitlines()[1:]:  # header line first
        parts = line.split()
        s, a = int(parts[1]), int(parts[2])
        m = [int(v) for v in parts[3 : 3 + s]]
        rows.append((s, a, m))
    return rows


def max_dimension() -> int:
    return len(_load_table()) + 1


@lru_cache(maxsize=8)
def _direction_integers(dimension: int) -> np.ndarray:
    """(dimension, BITS) array of direction integers scaled to bit positions."""
    table = _load_table()
    if dimension > len(table) + 1:
        raise DimensionTooLarge(
            f"dimension {dimension} exceeds table maximum {len(table) + 1}"
        )
    V = np.zeros((dimension, BITS), dtype=np.uint64)
    V[0] = np.uint64(1) << np.arange(BITS - 1, -1, -1, dtype=np.uint64)
    for j in range(1, dimension):
        s, a, m_init = table[j - 1]
        m = list(m_init)
        while len(m) < BITS:
            k = len(m)
            new = m[k - s] ^ (m[k - s] << s)
            for i in range(1, s):
                if (a >> (s - 1 - i)) & 1:
                    new ^= m[k - i] << i
            m.append(new)
        V[j] = np.array(m[:BITS], dtype=np.uint64) << np.arange(
            BITS - 1, -1, -1, dtype=np.uint64
        )
    return V


def _sobol_integers(dimension: int, n: int) -> np.ndarray:
    """First n points of the Sobol' sequence as (n, dimension) uint64 integers."""
    V = _direction_integers(dimension)
    out = np.zeros((n, dimension), dtype=np.uint64)
    x = np.zeros(dimension, dtype=np.uint64)
    for i in range(1, n):
        c = (i & -i).bit_length() - 1  # Gray-code: lowest set bit of i
        x = x ^ V[:, c]
        out[i] = x
    return out


def _owen_scramble(ints: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Nested uniform scrambling, applied independently per dimension.

    At depth L every distinct L-bit prefix gets an independent fair flip of
    the next bit; prefixes are keyed through np.unique so the assignment is
    deterministic given the generator state.
    """
    n, d = ints.shape
    out = np.empty_like(ints)
    for j in range(d):
        x = ints[:, j]
        flips = np.zeros(n, dtype=np.uint64)
        for level in range(BITS):
            if level == 0:
                prefix = np.zeros(n, dtype=np.uint64)
            else:
                prefix = x >> np.uint64(BITS - level)
            uniq, inverse = np.unique(prefix, return_inverse=True)
            bits = rng.integers(0, 2, size=uniq.size, dtype=np.uint64)
            flips |= bits[inverse] << np.uint64(BITS - level - 1)
        out[:, j] = x ^ flips
    return out


def sobol_points(cfg: QmcConfig, n: int) -> np.ndarray:
    """(n, dimension) matrix of points in [0, 1), deterministic given cfg.

    ``cfg.skip`` initial points of the underlying sequence are dropped,
    which is also how disjoint blocks for parallel workers are obtained.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    ints = _sobol_integers(cfg.dimension, cfg.skip + n)[cfg.skip :]
    if cfg.scramble == "nested":
        ints = _owen_scramble(ints, np.random.default_rng(cfg.seed))
    elif cfg.scramble == "shift":
        shift = np.random.default_rng(cfg.seed).integers(
            0, 2**BITS, size=cfg.dimension, dtype=np.uint64
        )
        ints = ints ^ shift[None, :]
    return ints.astype(np.float64) / _SCALE


def pseudo_points(dimension: int, n: int, seed: int = 0) -> np.ndarray:
    """Plain pseudorandom uniforms with the same shape contract as sobol_points."""
    return np.random.default_rng(seed).random((n, dimension))


def unit_points(dimension: int, n: int, *, engine: str = "sobol",
                scramble: str = "nested", seed: int = 0, skip: int = 0) -> np.ndarray:
    """Dispatch between the low-discrepancy and pseudorandom sources."""
    if engine == "sobol":
        return sobol_points(QmcConfig(dimension, scramble, seed, skip), n)
    if engine == "pseudo":
        return pseudo_points(dimension, n, seed)
    raise ValueError(f"unknown engine {engine!r}")


def to_noise(points: np.ndarray, noise) -> np.ndarray:
    """Map unit-cube points column-wise through each node's inverse CDF.

    ``noise`` is a sequence of per-node distribution specs exposing
    ``quantile``. Columns are nudged off the exact endpoints so unbounded
    quantile functions stay finite.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != len(noise):
        raise ValueError(
            f"points have {points.shape[1] if points.ndim == 2 else '?'} columns, "
            f"expected {len(noise)}"
        )
    tiny = 2.0**-53
    q = np.clip(points, tiny, 1.0 - tiny)
    out = np.empty_like(q)
    for j, spec in enumerate(noise):
        out[:, j] = spec.quantile(q[:, j])
    return out
