"""Rate-1/2 quasi-cyclic LDPC encoding and belief-propagation decoding.

The shipped code is a QC construction with an 8x16 base matrix lifted by
Z=64 (n=1024, k=512): information block-columns of weight 3, a
dual-diagonal parity part for systematic encoding, and circulant shifts
searched so the lifted Tanner graph has no 4- or 6-cycles. The matrix is
stored in plain-text alist format under ``bisac/data`` and loaded at run
time; any alist matrix whose parity positions form an invertible square
part can be substituted.

Decoding is flooding-schedule belief propagation over the edge list,
vectorized across both edges and a batch of codewords. Sum-product
(tanh rule) is the default; normalized min-sum is selectable. Bits known
a priori (shortening) enter as LLRs of magnitude ``LLR_KNOWN_BIT``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from .modem import LLR_KNOWN_BIT

DEFAULT_ALIST = "qc_1024_r05.alist"
DEFAULT_MAX_ITER = 20
MIN_SUM_SCALE = 0.8

_TANH_MIN = 1e-30
_TANH_MAX = 1.0 - 1e-12


@dataclass
class DecodeResult:
    """Hard decision for one codeword; converged implies a zero syndrome."""

    bits: np.ndarray
    converged: bool
    iterations_used: int


@dataclass
class BatchDecodeResult:
    bits: np.ndarray  # (n, batch) uint8
    converged: np.ndarray  # (batch,) bool
    iterations_used: np.ndarray  # (batch,) int


class LdpcCode:
    """Binary LDPC code defined by a full-rank (n-k) x n parity-check matrix."""

    def __init__(self, h: np.ndarray):
        h = np.asarray(h, dtype=np.uint8)
        if h.ndim != 2 or not np.isin(h, (0, 1)).all():
            raise ValueError("parity-check matrix must be a binary 2-D array")
        self.h = h
        self.n_checks, self.n = h.shape
        self.k = self.n - self.n_checks

        # edge list in check-major order (np.nonzero is row-major)
        self.edge_chk, self.edge_var = np.nonzero(h)
        if (np.bincount(self.edge_chk, minlength=self.n_checks) == 0).any():
            raise ValueError("every check must involve at least one variable")
        if (np.bincount(self.edge_var, minlength=self.n) == 0).any():
            raise ValueError("every variable must appear in at least one check")
        self._chk_starts = np.flatnonzero(np.r_[True, np.diff(self.edge_chk) != 0])
        self._var_perm = np.argsort(self.edge_var, kind="stable")
        var_sorted = self.edge_var[self._var_perm]
        self._var_starts = np.flatnonzero(np.r_[True, np.diff(var_sorted) != 0])

        self.info_positions, self._piv_cols, self._parity_gen = self._build_encoder(h)
        self.parity_positions = self._piv_cols

    @staticmethod
    def _build_encoder(h: np.ndarray):
        """GF(2) elimination preferring rightmost pivot columns.

        Returns (info_positions ascending, parity_positions, parity generator
        PT with parity = info @ PT mod 2, columns aligned with
        parity_positions).
        """
        m, n = h.shape
        work = h.copy()
        used = np.zeros(m, dtype=bool)
        piv_rows, piv_cols = [], []
        for col in range(n - 1, -1, -1):
            cand = np.flatnonzero(work[:, col] & ~used)
            if cand.size == 0:
                continue
            pivot = cand[0]
            used[pivot] = True
            others = np.flatnonzero(work[:, col])
            others = others[others != pivot]
            if others.size:
                work[others] ^= work[pivot]
            piv_rows.append(pivot)
            piv_cols.append(col)
            if len(piv_cols) == m:
                break
        if len(piv_cols) != m:
            raise ValueError("parity-check matrix is rank deficient over GF(2)")
        order = np.argsort(piv_cols)
        piv_rows = np.asarray(piv_rows)[order]
        piv_cols = np.asarray(piv_cols)[order]
        info_positions = np.setdiff1d(np.arange(n), piv_cols)
        # row i of the reduced system reads c[piv_col_i] = sum_j work[i, info_j] c[info_j]
        parity_gen = work[np.ix_(piv_rows, info_positions)].T.astype(np.float64)
        return info_positions, piv_cols, parity_gen

    @property
    def systematic_contiguous(self) -> bool:
        """True when info bits occupy positions 0..k-1 and parity k..n-1."""
        return bool(
            (self.info_positions == np.arange(self.k)).all()
            and (np.sort(self.parity_positions) == np.arange(self.k, self.n)).all()
        )

    def row_weights(self) -> np.ndarray:
        return self.h.sum(axis=1)

    def col_weights(self) -> np.ndarray:
        return self.h.sum(axis=0)


def encode(info_bits: np.ndarray, code: LdpcCode) -> np.ndarray:
    """Systematic encoding; accepts (k,) or (batch, k), returns matching shape."""
    info = np.atleast_2d(np.asarray(info_bits, dtype=np.uint8))
    if info.shape[1] != code.k:
        raise ValueError(f"expected {code.k} info bits, got {info.shape[1]}")
    parity = (info.astype(np.float64) @ code._parity_gen) % 2
    cw = np.zeros((info.shape[0], code.n), dtype=np.uint8)
    cw[:, code.info_positions] = info
    cw[:, code.parity_positions] = parity.astype(np.uint8)
    return cw[0] if np.asarray(info_bits).ndim == 1 else cw


def syndrome(bits: np.ndarray, code: LdpcCode) -> int:
    """Hamming weight of H @ bits over GF(2); zero iff a valid codeword."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.shape[-1] != code.n:
        raise ValueError(f"expected length {code.n}, got {bits.shape[-1]}")
    return int(((code.h.astype(np.int64) @ bits.astype(np.int64)) % 2).sum())


def _syndrome_weights(code: LdpcCode, bits: np.ndarray) -> np.ndarray:
    """Per-column syndrome weights for a (n, batch) bit matrix."""
    parity = np.add.reduceat(
        bits[code.edge_var].astype(np.int32), code._chk_starts, axis=0
    )
    return (parity & 1).sum(axis=0)


def _var_sums(code: LdpcCode, edge_vals: np.ndarray) -> np.ndarray:
    """Per-variable sums of edge values, shape (n, batch)."""
    return np.add.reduceat(edge_vals[code._var_perm], code._var_starts, axis=0)


def _check_update_sumprod(code: LdpcCode, m_vc: np.ndarray) -> np.ndarray:
    t = np.tanh(0.5 * m_vc)
    sign = np.where(t < 0, -1.0, 1.0)
    t = sign * np.clip(np.abs(t), _TANH_MIN, _TANH_MAX)
    prod = np.multiply.reduceat(t, code._chk_starts, axis=0)
    ext = prod[code.edge_chk] / t
    np.clip(ext, -_TANH_MAX, _TANH_MAX, out=ext)
    return 2.0 * np.arctanh(ext)


def _check_update_minsum(code: LdpcCode, m_vc: np.ndarray) -> np.ndarray:
    mag = np.abs(m_vc)
    starts = code._chk_starts
    min1 = np.minimum.reduceat(mag, starts, axis=0)
    is_min = mag == min1[code.edge_chk]
    min2 = np.minimum.reduceat(np.where(is_min, np.inf, mag), starts, axis=0)
    # two edges sharing the minimum: each sees the other's copy
    dup = np.add.reduceat(is_min.astype(np.int32), starts, axis=0) >= 2
    min2 = np.where(dup, min1, min2)
    ext_mag = np.where(is_min, min2[code.edge_chk], min1[code.edge_chk])
    neg = np.add.reduceat((m_vc < 0).astype(np.int32), starts, axis=0)
    total_sign = 1.0 - 2.0 * (neg & 1)
    edge_sign = np.where(m_vc < 0, -1.0, 1.0)
    return MIN_SUM_SCALE * total_sign[code.edge_chk] * edge_sign * ext_mag


def decode_bp_batch(
    llrs: np.ndarray,
    code: LdpcCode,
    max_iter: int = DEFAULT_MAX_ITER,
    method: str = "sumprod",
) -> BatchDecodeResult:
    """Flooding BP over a batch of codewords with per-codeword early stopping.

    ``llrs`` has shape (n, batch); positive values favor bit 0. Stops a
    codeword as soon as its hard decision satisfies all checks (checked on
    the channel LLRs before the first iteration, then after every
    iteration) and reports the iteration count at which that happened.
    """
    if method == "sumprod":
        check_update = _check_update_sumprod
    elif method == "minsum":
        check_update = _check_update_minsum
    else:
        raise ValueError(f"unknown BP method {method!r}")
    llrs = np.asarray(llrs, dtype=np.float64)
    if llrs.ndim != 2 or llrs.shape[0] != code.n:
        raise ValueError(f"LLR matrix must be ({code.n}, batch)")
    batch = llrs.shape[1]

    out_bits = (llrs < 0).astype(np.uint8)
    converged = np.zeros(batch, dtype=bool)
    iterations = np.zeros(batch, dtype=np.int64)

    ok = _syndrome_weights(code, out_bits.astype(bool)) == 0
    converged[ok] = True
    active = np.flatnonzero(~ok)
    if active.size == 0 or max_iter == 0:
        iterations[~converged] = 0
        return BatchDecodeResult(out_bits, converged, iterations)

    llr_act = llrs[:, active]
    m_cv = np.zeros((code.edge_var.size, active.size))
    bits_act = None
    for it in range(1, max_iter + 1):
        tot = llr_act + _var_sums(code, m_cv)
        m_vc = tot[code.edge_var] - m_cv
        m_cv = check_update(code, m_vc)
        post = llr_act + _var_sums(code, m_cv)
        bits_act = post < 0
        ok = _syndrome_weights(code, bits_act) == 0
        if ok.any():
            done_cols = np.flatnonzero(ok)
            done_ids = active[done_cols]
            out_bits[:, done_ids] = bits_act[:, done_cols]
            converged[done_ids] = True
            iterations[done_ids] = it
            keep = ~ok
            active = active[keep]
            if active.size == 0:
                break
            llr_act = llr_act[:, keep]
            m_cv = m_cv[:, keep]
            bits_act = bits_act[:, keep]
    if active.size:
        out_bits[:, active] = bits_act
        iterations[active] = max_iter
    return BatchDecodeResult(out_bits, converged, iterations)


def decode_bp(
    llrs: np.ndarray,
    code: LdpcCode,
    max_iter: int = DEFAULT_MAX_ITER,
    method: str = "sumprod",
) -> DecodeResult:
    """Decode a single codeword; see decode_bp_batch."""
    res = decode_bp_batch(np.asarray(llrs, dtype=np.float64)[:, None], code, max_iter, method)
    return DecodeResult(
        bits=res.bits[:, 0],
        converged=bool(res.converged[0]),
        iterations_used=int(res.iterations_used[0]),
    )


def shorten(info_bits: np.ndarray, code: LdpcCode) -> tuple[np.ndarray, np.ndarray]:
    """Pad short info to length k with known zeros; mask marks the known tail.

    At decode time the masked positions carry LLR_KNOWN_BIT.
    """
    info_bits = np.asarray(info_bits, dtype=np.uint8)
    if info_bits.size > code.k:
        raise ValueError(f"info length {info_bits.size} exceeds k={code.k}")
    padded = np.zeros(code.k, dtype=np.uint8)
    padded[: info_bits.size] = info_bits
    known = np.zeros(code.k, dtype=bool)
    known[info_bits.size :] = True
    return padded, known


def known_bit_llr(bit_value: int = 0) -> float:
    return LLR_KNOWN_BIT if bit_value == 0 else -LLR_KNOWN_BIT


# ---------------------------------------------------------------------------
# alist serialization (MacKay plain-text sparse format)
# ---------------------------------------------------------------------------

def save_alist(path, h: np.ndarray) -> None:
    """Write a binary matrix in alist format (1-based indices, zero padding)."""
    h = np.asarray(h, dtype=np.uint8)
    m, n = h.shape
    col_idx = [np.flatnonzero(h[:, j]) + 1 for j in range(n)]
    row_idx = [np.flatnonzero(h[i, :]) + 1 for i in range(m)]
    max_col = max(len(c) for c in col_idx)
    max_row = max(len(r) for r in row_idx)
    lines = [
        f"{n} {m}",
        f"{max_col} {max_row}",
        " ".join(str(len(c)) for c in col_idx),
        " ".join(str(len(r)) for r in row_idx),
    ]
    for c in col_idx:
        padded = list(c) + [0] * (max_col - len(c))
        lines.append(" ".join(map(str, padded)))
    for r in row_idx:
        padded = list(r) + [0] * (max_row - len(r))
        lines.append(" ".join(map(str, padded)))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_alist(source) -> np.ndarray:
    """Parse an alist file (path or text) into a dense binary matrix."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        try:
            with open(source) as fh:
                text = fh.read()
        except (OSError, ValueError):
            text = source
    tokens = text.split()
    if len(tokens) < 4:
        raise ValueError("truncated alist data")
    n, m = int(tokens[0]), int(tokens[1])
    max_col, max_row = int(tokens[2]), int(tokens[3])
    pos = 4
    col_w = [int(t) for t in tokens[pos : pos + n]]
    pos += n
    row_w = [int(t) for t in tokens[pos : pos + m]]
    pos += m
    h = np.zeros((m, n), dtype=np.uint8)
    for j in range(n):
        entries = tokens[pos : pos + max_col]
        pos += max_col
        rows = [int(t) for t in entries if int(t) > 0]
        if len(rows) != col_w[j]:
            raise ValueError(f"column {j} weight mismatch in alist data")
        h[np.asarray(rows) - 1, j] = 1
    # the per-row section is redundant; validate when present
    if pos + m * max_row <= len(tokens):
        for i in range(m):
            entries = tokens[pos : pos + max_row]
            pos += max_row
            cols = sorted(int(t) for t in entries if int(t) > 0)
            if cols != list(np.flatnonzero(h[i, :]) + 1):
                raise ValueError(f"row {i} inconsistent with column lists")
    if not all(int(w) == cw for w, cw in zip(row_w, h.sum(axis=1))):
        raise ValueError("row weights inconsistent with column lists")
    return h


@lru_cache(maxsize=None)
def default_code() -> LdpcCode:
    """The shipped n=1024, rate-1/2 quasi-cyclic code."""
    data = resources.files("bisac.data").joinpath(DEFAULT_ALIST).read_text()
    return LdpcCode(load_alist(data))


# ---------------------------------------------------------------------------
# Quasi-cyclic construction (used by scripts/generate_ldpc.py and tests)
# ---------------------------------------------------------------------------

def qc_base_skeleton(n_block_rows: int = 8, n_block_cols: int = 16):
    """Row pattern and fixed shifts of the base matrix.

    Information block-columns j < n_info get weight 3 with rows spread as
    {j, j+3, j+6} mod n_block_rows (shifts to be searched, marked None).
    The parity part is dual-diagonal: one weight-3 column with equal top
    and bottom shifts (so the block-row sum telescopes to a single
    identity), then a zero-shift staircase.
    """
    n_info = n_block_cols - n_block_rows
    entries: dict[tuple[int, int], int | None] = {}
    for j in range(n_info):
        for step in (0, 3, 6):
            entries[((j + step) % n_block_rows, j)] = None
    special = n_info
    entries[(0, special)] = 1
    entries[(n_block_rows // 2 - 1, special)] = 0
    entries[(n_block_rows - 1, special)] = 1
    for j in range(1, n_block_rows):
        entries[(j - 1, special + j)] = 0
        entries[(j, special + j)] = 0
    return entries


def _base_cycle_exists(entries: dict, z: int, max_cycle: int = 6) -> bool:
    """True when the lifted graph would contain a cycle of length <= max_cycle.

    A base-graph cycle lifts to cycles of the same length iff its
    alternating shift sum vanishes mod z.
    """
    cols: dict[int, dict[int, int]] = {}
    for (r, c), s in entries.items():
        cols.setdefault(c, {})[r] = s
    col_ids = sorted(cols)
    for c1, c2 in itertools.combinations(col_ids, 2):
        shared = sorted(set(cols[c1]) & set(cols[c2]))
        for r1, r2 in itertools.combinations(shared, 2):
            delta = cols[c1][r1] - cols[c1][r2] + cols[c2][r2] - cols[c2][r1]
            if delta % z == 0:
                return True
    if max_cycle < 6:
        return False
    for c1, c2, c3 in itertools.permutations(col_ids, 3):
        if c1 > c3:  # each 6-cycle is found once per rotation; halve the work
            continue
        for r1 in set(cols[c1]) & set(cols[c3]):
            for r2 in set(cols[c1]) & set(cols[c2]):
                if r2 == r1:
                    continue
                for r3 in set(cols[c2]) & set(cols[c3]):
                    if r3 in (r1, r2):
                        continue
                    delta = (
                        cols[c1][r1]
                        - cols[c1][r2]
                        + cols[c2][r2]
                        - cols[c2][r3]
                        + cols[c3][r3]
                        - cols[c3][r1]
                    )
                    if delta % z == 0:
                        return True
    return False


def build_qc_matrix(
    z: int = 64,
    n_block_rows: int = 8,
    n_block_cols: int = 16,
    seed: int = 20240901,
    max_tries_per_col: int = 4000,
) -> np.ndarray:
    """Search circulant shifts column by column until the lifted girth is >= 8."""
    rng = np.random.default_rng(seed)
    skeleton = qc_base_skeleton(n_block_rows, n_block_cols)
    fixed = {k: v for k, v in skeleton.items() if v is not None}
    free_cols = sorted({c for (r, c), v in skeleton.items() if v is None})

    entries = dict(fixed)
    for col in free_cols:
        col_rows = sorted(r for (r, c) in skeleton if c == col)
        for attempt in range(max_tries_per_col):
            trial = dict(entries)
            for r in col_rows:
                trial[(r, col)] = int(rng.integers(0, z))
            if not _base_cycle_exists(trial, z):
                entries = trial
                break
        else:
            raise RuntimeError(f"no girth-8 shift assignment found for column {col}")

    h = np.zeros((n_block_rows * z, n_block_cols * z), dtype=np.uint8)
    eye_rows = np.arange(z)
    for (r, c), s in entries.items():
        h[r * z + eye_rows, c * z + (eye_rows + s) % z] = 1
    return h
