"""End-to-end frame processing: encode, modulate, channel, equalize, decode,
remodulate, sensing equalization.

Two independent codeword streams are used: one for the sensing-grid REs
(order Q_s) and one for the regular REs (order Q_r). Keeping the streams
separate preserves the distinct decoding waterfalls of the two orders. Each
stream is segmented into fixed-length codewords; the final partial codeword
is shortened (trailing info bits fixed to zero). When the leftover bit
budget is too small to carry any information (at most the parity length),
the tail degenerates to known bits and its REs are the frame's filler REs.

The sensing receiver remodulates the decoded codeword bits as-is (it does
not re-encode the info bits), so a failed codeword still contributes its
correctly decoded symbols.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import fec
from .channel import (
    NoiseConfig,
    Scenario,
    apply_channel_and_noise,
    build_cfr,
    noise_for_snr,
    path_cfr,
)
from .modem import (
    LLR_KNOWN_BIT,
    demap_from_grid,
    demodulate_llr,
    map_to_grid,
    modulate,
)
from .planner import FramePlan, REMap, build_re_map

PILOT_SEED = 0x5EED
# noise-variance floor keeping LLRs finite on noiseless frames
_MIN_NOISE_VAR = 1e-12


@dataclass
class StreamTx:
    """Transmit-side record of one codeword stream."""

    q: int
    n_re: int
    n_full: int
    k_prime: int  # info bits in the shortened codeword, 0 if none
    n_degenerate: int  # 1 when the tail degenerated to known filler bits
    codewords: np.ndarray  # (n_decodable, n) uint8, shortened word last
    symbols: np.ndarray  # (n_re,) complex

    @property
    def n_decodable(self) -> int:
        return self.codewords.shape[0]

    @property
    def n_codewords(self) -> int:
        return self.n_full + (1 if self.k_prime > 0 else 0) + self.n_degenerate


@dataclass
class TxRecord:
    mode: str
    re_map: REMap
    x: np.ndarray
    streams: dict[str, StreamTx]
    pilots: np.ndarray | None = None  # pilots_only: known sensing-grid symbols


@dataclass
class StreamStats:
    n_codewords: int
    n_decodable: int
    n_block_errors: int
    n_converged: int
    mean_iterations: float


@dataclass
class FrameResult:
    h_hat: np.ndarray
    ser: float  # nan when the mode decodes no data
    stream_stats: dict[str, StreamStats]
    delta_f_eff: float
    t0_eff: float
    n_data_re: int
    x: np.ndarray | None = None
    x_hat: np.ndarray | None = None


def _pilot_symbols(count: int) -> np.ndarray:
    """Fixed pseudo-random QPSK pilot sequence, identical at TX and RX."""
    rng = np.random.default_rng(PILOT_SEED)
    bits = rng.integers(0, 2, size=2 * count, dtype=np.uint8)
    return modulate(bits, 2)


def _shortened_positions(code: fec.LdpcCode, k_prime: int) -> np.ndarray:
    """Codeword positions transmitted for a shortened word (ascending)."""
    known = code.info_positions[k_prime:]
    return np.setdiff1d(np.arange(code.n), known)


def _build_stream(n_re: int, q: int, code: fec.LdpcCode, rng) -> StreamTx:
    """Draw info bits, encode, and modulate one stream of n_re REs."""
    capacity = n_re * q
    n, k, m = code.n, code.k, code.n_checks
    n_full, rem = divmod(capacity, n)
    if 0 < rem <= m:
        raise ValueError(
            "stream capacity leaves a degenerate tail; the RE map should have "
            "assigned filler REs"
        )
    k_prime = rem - m if rem else 0
    n_dec = n_full + (1 if rem else 0)
    info = np.zeros((n_dec, k), dtype=np.uint8)
    n_info = n_full * k + k_prime
    flat = rng.integers(0, 2, size=n_info, dtype=np.uint8)
    info[:n_full] = flat[: n_full * k].reshape(n_full, k)
    if rem:
        info[-1, :k_prime] = flat[n_full * k :]
    codewords = fec.encode(info, code) if n_dec else np.zeros((0, n), dtype=np.uint8)
    tx_bits = codewords[:n_full].reshape(-1)
    if rem:
        tx_bits = np.concatenate([tx_bits, codewords[-1, _shortened_positions(code, k_prime)]])
    symbols = modulate(tx_bits, q) if tx_bits.size else np.empty(0, dtype=np.complex128)
    return StreamTx(
        q=q,
        n_re=n_re,
        n_full=n_full,
        k_prime=k_prime,
        n_degenerate=0,
        codewords=codewords,
        symbols=symbols,
    )


def build_tx_frame(
    plan: FramePlan,
    re_map: REMap,
    rng: np.random.Generator,
    code: fec.LdpcCode | None = None,
) -> tuple[np.ndarray, TxRecord]:
    """Generate, encode, modulate, and grid-map the frame for plan.mode.

    genie_aided builds the identical frame as hybrid; pilots_only replaces
    the sensing-grid stream with known QPSK pilots.
    """
    code = code or fec.default_code()
    if not code.systematic_contiguous:
        raise ValueError("stream segmentation expects info bits at positions 0..k-1")
    streams: dict[str, StreamTx] = {}
    pilots = None

    if re_map.mode in ("hybrid", "genie_aided"):
        s_stream = _build_stream(re_map.n_sensing, re_map.q_s, code, rng)
        s_stream.n_degenerate = 1 if re_map.filler_sensing_idx[0].size else 0
        streams["sensing"] = s_stream
        sensing_symbols = s_stream.symbols
    elif re_map.mode == "pilots_only":
        pilots = _pilot_symbols(re_map.n_sensing)
        sensing_symbols = pilots
    else:  # comm_centric: no sensing grid
        sensing_symbols = np.empty(0, dtype=np.complex128)

    r_stream = _build_stream(re_map.n_regular, re_map.q_r, code, rng)
    r_stream.n_degenerate = 1 if re_map.filler_regular_idx[0].size else 0
    streams["regular"] = r_stream

    x = map_to_grid(sensing_symbols, r_stream.symbols, re_map)
    return x, TxRecord(mode=re_map.mode, re_map=re_map, x=x, streams=streams, pilots=pilots)


def comm_equalize(y: np.ndarray, h0: np.ndarray) -> np.ndarray:
    """Zero-forcing by the exactly known dominant-path channel."""
    if y.shape != h0.shape:
        raise ValueError(f"frame shape {y.shape} != channel shape {h0.shape}")
    if (h0 == 0).any():
        raise ValueError("dominant-path channel contains zero entries")
    return y / h0


def _decode_stream(
    symbols: np.ndarray,
    stream: StreamTx,
    code: fec.LdpcCode,
    noise_var: float,
    max_iter: int,
    bp_method: str,
) -> tuple[np.ndarray, StreamStats]:
    """LLR demodulation, batch BP decoding, and remodulation of one stream."""
    n, k = code.n, code.k
    llr = demodulate_llr(symbols, stream.q, noise_var)
    n_dec = stream.n_decodable
    if n_dec == 0:
        stats = StreamStats(stream.n_codewords, 0, 0, 0, 0.0)
        return np.empty(0, dtype=np.complex128), stats
    llr_mat = np.empty((n, n_dec))
    llr_mat[:, : stream.n_full] = llr[: stream.n_full * n].reshape(stream.n_full, n).T
    if stream.k_prime:
        pos = _shortened_positions(code, stream.k_prime)
        col = np.full(n, LLR_KNOWN_BIT)
        col[pos] = llr[stream.n_full * n :]
        llr_mat[:, -1] = col
    res = fec.decode_bp_batch(llr_mat, code, max_iter=max_iter, method=bp_method)
    bits_hat = res.bits
    tx_bits_hat = bits_hat[:, : stream.n_full].T.reshape(-1)
    if stream.k_prime:
        pos = _shortened_positions(code, stream.k_prime)
        tx_bits_hat = np.concatenate([tx_bits_hat, bits_hat[pos, -1]])
    symbols_hat = (
        modulate(tx_bits_hat, stream.q)
        if tx_bits_hat.size
        else np.empty(0, dtype=np.complex128)
    )
    n_err = int((bits_hat.T != stream.codewords).any(axis=1).sum())
    stats = StreamStats(
        n_codewords=stream.n_codewords,
        n_decodable=n_dec,
        n_block_errors=n_err,
        n_converged=int(res.converged.sum()),
        mean_iterations=float(res.iterations_used.mean()),
    )
    return symbols_hat, stats


def detect_frame(
    y_hat: np.ndarray,
    re_map: REMap,
    code: fec.LdpcCode,
    mode: str,
    tx_record: TxRecord,
    noise_var: float,
    max_iter: int = fec.DEFAULT_MAX_ITER,
    bp_method: str = "sumprod",
) -> tuple[np.ndarray, dict[str, StreamStats]]:
    """Estimate the transmit frame from the equalized receive frame.

    hybrid/comm_centric decode their streams and remodulate the decoded
    codeword bits; genie_aided returns the true frame; pilots_only places
    the known pilots and leaves data REs unused. Filler REs always carry
    their known symbols.
    """
    noise_var = max(noise_var, _MIN_NOISE_VAR)
    stats: dict[str, StreamStats] = {}
    if mode == "genie_aided":
        return tx_record.x.copy(), stats
    if mode == "pilots_only":
        x_hat = np.zeros(re_map.shape, dtype=np.complex128)
        x_hat[re_map.sensing_idx] = tx_record.pilots
        return x_hat, stats

    sensing_rx, regular_rx = demap_from_grid(y_hat, re_map)
    sensing_hat = np.empty(0, dtype=np.complex128)
    if mode == "hybrid":
        sensing_hat, stats["sensing"] = _decode_stream(
            sensing_rx, tx_record.streams["sensing"], code, noise_var, max_iter, bp_method
        )
    regular_hat, stats["regular"] = _decode_stream(
        regular_rx, tx_record.streams["regular"], code, noise_var, max_iter, bp_method
    )
    x_hat = map_to_grid(sensing_hat, regular_hat, re_map)
    return x_hat, stats


def sensing_equalize(
    y_hat: np.ndarray,
    x_hat: np.ndarray,
    re_map: REMap,
    mode: str,
) -> np.ndarray:
    """Zero-forcing CSI estimate from the (estimated) transmit symbols.

    Full-grid division for decoded and genie modes; pilots_only equalizes
    only the sensing-grid REs into a decimated matrix.
    """
    if mode == "pilots_only":
        y_dec = y_hat[:: re_map.k_f, :: re_map.k_t]
        x_dec = x_hat[:: re_map.k_f, :: re_map.k_t]
        if (x_dec == 0).any():
            raise ValueError("zero pilot symbol")
        return y_dec / x_dec
    if (x_hat == 0).any():
        raise ValueError("zero symbol estimate on the frame grid")
    return y_hat / x_hat


def _data_indices(re_map: REMap, mode: str):
    """Index arrays of the REs whose symbols the receiver actually estimates."""
    if mode in ("hybrid", "genie_aided"):
        rows = np.concatenate([re_map.sensing_idx[0], re_map.regular_idx[0]])
        cols = np.concatenate([re_map.sensing_idx[1], re_map.regular_idx[1]])
        return rows, cols
    if mode == "comm_centric":
        return re_map.regular_idx
    return None


def run_frame(
    scenario: Scenario,
    plan: FramePlan,
    mode: str,
    snr_db: float,
    rng: np.random.Generator,
    code: fec.LdpcCode | None = None,
    max_iter: int = fec.DEFAULT_MAX_ITER,
    bp_method: str = "sumprod",
    keep_frames: bool = False,
) -> FrameResult:
    """One full TX -> channel -> RX pass at the given receive SNR.

    The generator is split into independent bit and noise substreams, so
    callers reusing an identically seeded generator across modes get the
    same noise realization for each (hybrid and genie_aided additionally
    share the exact transmit frame).
    """
    code = code or fec.default_code()
    if plan.mode != mode:
        plan = dataclasses.replace(plan, mode=mode)
    re_map = build_re_map(plan, codeword_len=code.n, n_parity=code.n_checks)
    bits_rng, noise_rng = rng.spawn(2)

    x, tx_record = build_tx_frame(plan, re_map, bits_rng, code)
    num = plan.numerology
    h = build_cfr(scenario, num)
    h0 = path_cfr(scenario.reference, num)
    noise = noise_for_snr(snr_db, scenario.reference.alpha)
    y = apply_channel_and_noise(x, h, noise, noise_rng)

    y_hat = comm_equalize(y, h0)
    noise_var_eq = noise.sigma2 / abs(scenario.reference.alpha) ** 2
    x_hat, stats = detect_frame(
        y_hat, re_map, code, mode, tx_record, noise_var_eq, max_iter, bp_method
    )
    h_hat = sensing_equalize(y_hat, x_hat, re_map, mode)

    idx = _data_indices(re_map, mode)
    if idx is None:
        ser = float("nan")
        n_data = 0
    else:
        n_data = idx[0].size
        ser = float(np.mean(x_hat[idx] != x[idx])) if n_data else float("nan")

    delta_f_eff = num.delta_f * (re_map.k_f if mode == "pilots_only" else 1)
    t0_eff = num.t0 * (re_map.k_t if mode == "pilots_only" else 1)
    return FrameResult(
        h_hat=h_hat,
        ser=ser,
        stream_stats=stats,
        delta_f_eff=delta_f_eff,
        t0_eff=t0_eff,
        n_data_re=n_data,
        x=x if keep_frames else None,
        x_hat=x_hat if keep_frames else None,
    )
