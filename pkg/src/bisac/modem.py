"""Gray-mapped constellations, exact soft demodulation, and RE grid (de)mapping.

Fixed labelings (unit average power by construction):

* QPSK: points (+/-1 +/- 1j)/sqrt(2); bit 0 sets the real sign, bit 1 the
  imaginary sign, with 0 -> + and 1 -> -.
* 16-QAM: per-axis amplitudes from two bits via the Gray table
  {00: +1, 01: +3, 11: -3, 10: -1}, scaled by 1/sqrt(10); bits (b0, b1)
  drive the I axis and (b2, b3) the Q axis.

LLR sign convention: positive means bit 0 is more likely,
LLR = log P(bit=0 | y) / P(bit=1 | y).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from .planner import REMap

# Maximal-confidence LLR for bits known a priori (shortened positions).
LLR_KNOWN_BIT = 300.0

_AXIS_GRAY_4 = {(0, 0): 1.0, (0, 1): 3.0, (1, 1): -3.0, (1, 0): -1.0}


@dataclass(frozen=True)
class Constellation:
    """2^q Gray-labeled points with unit average power."""

    q: int
    points: np.ndarray  # (2**q,) complex128
    bit_table: np.ndarray  # (2**q, q) uint8; row i labels points[i]

    def index_of_bits(self, bits: np.ndarray) -> np.ndarray:
        """Symbol indices for bit groups of shape (..., q)."""
        weights = 1 << np.arange(self.q - 1, -1, -1)
        return bits.astype(np.int64) @ weights


@lru_cache(maxsize=None)
def constellation(q: int) -> Constellation:
    """The fixed constellation for modulation order q (2: QPSK, 4: 16-QAM)."""
    if q == 2:
        scale = 1.0 / np.sqrt(2.0)
        n_pts = 4
        bits = np.array([[(i >> 1) & 1, i & 1] for i in range(n_pts)], dtype=np.uint8)
        re = np.where(bits[:, 0] == 0, 1.0, -1.0)
        im = np.where(bits[:, 1] == 0, 1.0, -1.0)
        pts = (re + 1j * im) * scale
    elif q == 4:
        scale = 1.0 / np.sqrt(10.0)
        n_pts = 16
        bits = np.array(
            [[(i >> 3) & 1, (i >> 2) & 1, (i >> 1) & 1, i & 1] for i in range(n_pts)],
            dtype=np.uint8,
        )
        re = np.array([_AXIS_GRAY_4[(b[0], b[1])] for b in bits])
        im = np.array([_AXIS_GRAY_4[(b[2], b[3])] for b in bits])
        pts = (re + 1j * im) * scale
    else:
        raise ValueError(f"unsupported modulation order {q}")
    return Constellation(q=q, points=pts.astype(np.complex128), bit_table=bits)


def modulate(bits: np.ndarray, q: int) -> np.ndarray:
    """Map a bit sequence (length divisible by q) to constellation symbols."""
    bits = np.asarray(bits)
    if bits.size % q:
        raise ValueError(f"bit count {bits.size} not divisible by order {q}")
    const = constellation(q)
    idx = const.index_of_bits(bits.reshape(-1, q))
    return const.points[idx]


def demodulate_llr(
    symbols: np.ndarray,
    q: int,
    noise_variance: float,
    method: str = "exact",
) -> np.ndarray:
    """Per-bit LLRs under circular complex Gaussian noise of the given variance.

    ``exact`` computes the full log-sum-exp over constellation subsets;
    ``maxlog`` substitutes the max. Returns a flat array of q LLRs per
    symbol in modulation bit order.
    """
    if noise_variance <= 0:
        raise ValueError("noise variance must be positive")
    if method not in ("exact", "maxlog"):
        raise ValueError(f"unknown demodulation method {method!r}")
    const = constellation(q)
    y = np.asarray(symbols, dtype=np.complex128).reshape(-1, 1)
    metric = -np.abs(y - const.points[None, :]) ** 2 / noise_variance
    llrs = np.empty((y.shape[0], q))
    for bit in range(q):
        zero_set = const.bit_table[:, bit] == 0
        if method == "exact":
            llrs[:, bit] = logsumexp(metric[:, zero_set], axis=1) - logsumexp(
                metric[:, ~zero_set], axis=1
            )
        else:
            llrs[:, bit] = metric[:, zero_set].max(axis=1) - metric[:, ~zero_set].max(
                axis=1
            )
    return llrs.reshape(-1)


def hard_decide(symbols: np.ndarray, q: int) -> np.ndarray:
    """Nearest-point hard decisions, returned as a flat bit sequence."""
    const = constellation(q)
    y = np.asarray(symbols, dtype=np.complex128).reshape(-1, 1)
    idx = np.argmin(np.abs(y - const.points[None, :]) ** 2, axis=1)
    return const.bit_table[idx].reshape(-1)


def filler_symbol(q: int) -> complex:
    """The fixed known symbol carried on filler REs (all-zero bit label)."""
    return complex(constellation(q).points[0])


def map_to_grid(
    sensing_symbols: np.ndarray,
    regular_symbols: np.ndarray,
    re_map: REMap,
) -> np.ndarray:
    """Place per-class symbol streams onto the frame grid in scan order.

    Filler REs receive the fixed known filler symbol of their class's order.
    """
    if sensing_symbols is None:
        sensing_symbols = np.empty(0, dtype=np.complex128)
    if regular_symbols is None:
        regular_symbols = np.empty(0, dtype=np.complex128)
    if sensing_symbols.size != re_map.n_sensing:
        raise ValueError(
            f"expected {re_map.n_sensing} sensing symbols, got {sensing_symbols.size}"
        )
    if regular_symbols.size != re_map.n_regular:
        raise ValueError(
            f"expected {re_map.n_regular} regular symbols, got {regular_symbols.size}"
        )
    frame = np.zeros(re_map.shape, dtype=np.complex128)
    frame[re_map.sensing_idx] = sensing_symbols
    frame[re_map.regular_idx] = regular_symbols
    frame[re_map.filler_sensing_idx] = filler_symbol(re_map.q_s)
    frame[re_map.filler_regular_idx] = filler_symbol(re_map.q_r)
    return frame


def demap_from_grid(frame: np.ndarray, re_map: REMap) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of map_to_grid: per-class symbol streams in scan order."""
    if frame.shape != re_map.shape:
        raise ValueError(f"frame shape {frame.shape} != map shape {re_map.shape}")
    return frame[re_map.sensing_idx], frame[re_map.regular_idx]
