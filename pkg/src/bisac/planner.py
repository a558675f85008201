"""Resource-grid planning: spacing derivation, RE classification, efficiency accounting.

The hybrid allocation places low modulation-order symbols on a regular
(K_F, K_T) sensing grid anchored at RE (0, 0); all remaining REs carry the
regular (higher) modulation order. Four allocation modes are supported:

* ``hybrid``       -- low-order coded data on the sensing grid, high-order elsewhere
* ``comm_centric`` -- high-order coded data everywhere, no sensing grid
* ``pilots_only``  -- known pilots on the sensing grid, high-order data elsewhere
* ``genie_aided``  -- same transmit frame as ``hybrid``; receiver knows it perfectly
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .constants import SPEED_OF_LIGHT

log = logging.getLogger(__name__)

MODES = ("hybrid", "comm_centric", "pilots_only", "genie_aided")

# REMap classification codes
RE_REGULAR = 0
RE_SENSING = 1
RE_FILLER = 2


class PlannerError(ValueError):
    """Raised when sensing requirements cannot be met at a given numerology."""


@dataclass(frozen=True)
class Numerology:
    """OFDM frame geometry: N subcarriers x M symbols at spacing delta_f."""

    n_subcarriers: int
    n_symbols: int
    delta_f: float
    f_c: float
    t0: float | None = None  # symbol duration; defaults to 1/delta_f (no CP)
    cp_fraction: float = 0.0

    def __post_init__(self):
        if self.n_subcarriers < 1 or self.n_symbols < 1:
            raise ValueError("grid dimensions must be positive")
        if self.delta_f <= 0 or self.f_c <= 0:
            raise ValueError("delta_f and f_c must be positive")
        if self.t0 is None:
            object.__setattr__(self, "t0", (1.0 + self.cp_fraction) / self.delta_f)
        if self.t0 * self.delta_f < 1.0 - 1e-12:
            raise ValueError("symbol duration shorter than 1/delta_f")

    @property
    def frame_bandwidth(self) -> float:
        return self.n_subcarriers * self.delta_f

    @property
    def frame_duration(self) -> float:
        return self.n_symbols * self.t0


@dataclass(frozen=True)
class SensingRequirements:
    """Sensing KPIs the allocation must support (all strictly positive)."""

    r_max_req: float  # unambiguous bistatic range, m
    f_d_max_req: float  # unambiguous Doppler shift, Hz
    delta_r_req: float  # range resolution, m
    delta_fd_req: float  # Doppler resolution, Hz

    def __post_init__(self):
        for name in ("r_max_req", "f_d_max_req", "delta_r_req", "delta_fd_req"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class FramePlan:
    """Numerology plus the hybrid-allocation parameters for one frame."""

    numerology: Numerology
    k_f: int
    k_t: int
    q_s: int = 2
    q_r: int = 4
    code_rate: float = 0.5
    mode: str = "hybrid"

    def __post_init__(self):
        n, m = self.numerology.n_subcarriers, self.numerology.n_symbols
        if not (1 <= self.k_f <= n and 1 <= self.k_t <= m):
            raise ValueError("spacings must lie within the grid dimensions")
        if self.q_s not in (2, 4) or self.q_r not in (2, 4):
            raise ValueError("modulation orders must be 2 (QPSK) or 4 (16-QAM)")
        if self.q_s > self.q_r:
            raise ValueError("sensing-grid order must not exceed the regular order")
        if not 0.0 < self.code_rate <= 1.0:
            raise ValueError("code rate must be in (0, 1]")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")

    @property
    def n_sensing_geometric(self) -> int:
        """Sensing-grid RE count before any filler assignment (ceiling formula)."""
        n, m = self.numerology.n_subcarriers, self.numerology.n_symbols
        return math.ceil(n / self.k_f) * math.ceil(m / self.k_t)


@dataclass
class REMap:
    """Per-RE classification of one frame plus scan-order index arrays.

    Scan order is frequency-major: all subcarriers of symbol 0, then
    symbol 1, and so on. Index arrays are (row, col) = (subcarrier, symbol)
    pairs in that order. Filler REs are trailing REs of a class whose bit
    budget cannot host a decodable shortened codeword; they carry known
    symbols and are excluded from the data-bearing RE set.
    """

    classification: np.ndarray  # (N, M) int8 of RE_* codes
    k_f: int
    k_t: int
    q_s: int
    q_r: int
    mode: str
    sensing_idx: tuple[np.ndarray, np.ndarray]
    regular_idx: tuple[np.ndarray, np.ndarray]
    filler_sensing_idx: tuple[np.ndarray, np.ndarray]
    filler_regular_idx: tuple[np.ndarray, np.ndarray]
    scan_order: str = field(default="frequency-major")

    @property
    def n_sensing(self) -> int:
        return self.sensing_idx[0].size

    @property
    def n_regular(self) -> int:
        return self.regular_idx[0].size

    @property
    def n_filler(self) -> int:
        return self.filler_sensing_idx[0].size + self.filler_regular_idx[0].size

    @property
    def shape(self) -> tuple[int, int]:
        return self.classification.shape


def compute_spacings(numerology: Numerology, req: SensingRequirements) -> tuple[int, int]:
    """Grid spacings (K_F, K_T) supporting the required unambiguous range/Doppler.

    Raises PlannerError when the requirement is infeasible even at spacing 1,
    i.e. the unclamped spacing exceeds the grid dimension.
    """
    n, m = numerology.n_subcarriers, numerology.n_symbols
    k_f_raw = SPEED_OF_LIGHT / (2.0 * numerology.delta_f * req.r_max_req)
    k_t_raw = 1.0 / (2.0 * numerology.t0 * req.f_d_max_req)
    k_f = math.ceil(k_f_raw)
    k_t = math.ceil(k_t_raw)
    if k_f < 1:
        log.warning("range requirement looser than a single-RE grid; clamping K_F to 1")
        k_f = 1
    if k_t < 1:
        log.warning("Doppler requirement looser than a single-RE grid; clamping K_T to 1")
        k_t = 1
    if k_f > n or k_t > m:
        raise PlannerError(
            f"requirement infeasible at this numerology: K_F={k_f} (max {n}), "
            f"K_T={k_t} (max {m})"
        )
    return k_f, k_t


def compute_burst(req: SensingRequirements) -> tuple[float, float]:
    """Bandwidth B and duration T_B of the burst meeting the resolution KPIs."""
    bandwidth = SPEED_OF_LIGHT / (2.0 * req.delta_r_req)
    duration = 1.0 / req.delta_fd_req
    return bandwidth, duration


def check_burst_fits(numerology: Numerology, req: SensingRequirements) -> None:
    """Raise PlannerError when the required burst exceeds the configured frame."""
    bandwidth, duration = compute_burst(req)
    if bandwidth > numerology.frame_bandwidth * (1 + 1e-9):
        raise PlannerError(
            f"required bandwidth {bandwidth:.4g} Hz exceeds frame bandwidth "
            f"{numerology.frame_bandwidth:.4g} Hz"
        )
    if duration > numerology.frame_duration * (1 + 1e-9):
        raise PlannerError(
            f"required burst duration {duration:.4g} s exceeds frame duration "
            f"{numerology.frame_duration:.4g} s"
        )


def spectral_efficiency(plan: FramePlan) -> float:
    """Information bits per resource element for the plan's allocation mode.

    ``comm_centric`` treats the sensing-grid count as zero; ``pilots_only``
    drops the sensing-grid information term (pilots carry no data);
    ``genie_aided`` transmits the same frame as ``hybrid``.
    """
    n, m = plan.numerology.n_subcarriers, plan.numerology.n_symbols
    n_total = n * m
    n_s = plan.n_sensing_geometric
    if plan.mode == "comm_centric":
        return plan.code_rate * plan.q_r
    if plan.mode == "pilots_only":
        return plan.code_rate * (n_total - n_s) * plan.q_r / n_total
    return plan.code_rate * (n_s * plan.q_s + (n_total - n_s) * plan.q_r) / n_total


def _scan_sorted(mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Indices of set entries in frequency-major scan order (symbol outer)."""
    rows, cols = np.nonzero(mask)
    order = np.lexsort((rows, cols))
    return rows[order], cols[order]


def build_re_map(
    plan: FramePlan,
    codeword_len: int | None = None,
    n_parity: int | None = None,
) -> REMap:
    """Classify every RE of the frame as sensing-grid, regular, or filler.

    The sensing grid comprises REs with (subcarrier % K_F == 0 and
    symbol % K_T == 0); ``comm_centric`` has no sensing grid. When
    ``codeword_len``/``n_parity`` are given, the trailing REs of each coded
    class whose leftover bit budget is at most ``n_parity`` bits (too small
    to host any information in a shortened codeword) are reclassified as
    filler. Without code parameters the classification is purely geometric.
    """
    n, m = plan.numerology.n_subcarriers, plan.numerology.n_symbols
    cls = np.full((n, m), RE_REGULAR, dtype=np.int8)
    if plan.mode != "comm_centric":
        sensing_mask = np.zeros((n, m), dtype=bool)
        sensing_mask[:: plan.k_f, :: plan.k_t] = True
        cls[sensing_mask] = RE_SENSING

    empty = (np.empty(0, dtype=np.intp), np.empty(0, dtype=np.intp))
    filler_s, filler_r = empty, empty

    def split_filler(idx, q):
        """Move the class tail to filler when its leftover bits are all known."""
        capacity = idx[0].size * q
        rem = capacity % codeword_len
        if 0 < rem <= n_parity:
            n_filler_re = rem // q
            keep = idx[0].size - n_filler_re
            return (idx[0][:keep], idx[1][:keep]), (idx[0][keep:], idx[1][keep:])
        return idx, empty

    sensing_idx = _scan_sorted(cls == RE_SENSING)
    regular_idx = _scan_sorted(cls == RE_REGULAR)

    if codeword_len is not None:
        if n_parity is None:
            raise ValueError("n_parity required alongside codeword_len")
        # pilots carry no coded bits, so the sensing class is never shortened
        if plan.mode in ("hybrid", "genie_aided"):
            sensing_idx, filler_s = split_filler(sensing_idx, plan.q_s)
        regular_idx, filler_r = split_filler(regular_idx, plan.q_r)
        cls[filler_s] = RE_FILLER
        cls[filler_r] = RE_FILLER

    return REMap(
        classification=cls,
        k_f=plan.k_f,
        k_t=plan.k_t,
        q_s=plan.q_s,
        q_r=plan.q_r,
        mode=plan.mode,
        sensing_idx=sensing_idx,
        regular_idx=regular_idx,
        filler_sensing_idx=filler_s,
        filler_regular_idx=filler_r,
    )


def processing_gain_db(plan: FramePlan) -> float:
    """Coherent integration gain over the REs usable for sensing in this mode."""
    n_total = plan.numerology.n_subcarriers * plan.numerology.n_symbols
    usable = plan.n_sensing_geometric if plan.mode == "pilots_only" else n_total
    return 10.0 * math.log10(usable)


def plan_summary(
    plan: FramePlan,
    req: SensingRequirements | None = None,
) -> str:
    """Human-readable allocation summary: spacings, RE counts, efficiency per mode."""
    num = plan.numerology
    lines = [
        "frame plan",
        f"  grid: {num.n_subcarriers} subcarriers x {num.n_symbols} symbols, "
        f"delta_f {num.delta_f / 1e3:.6g} kHz, T0 {num.t0 * 1e6:.6g} us, "
        f"f_c {num.f_c / 1e9:.6g} GHz",
        f"  spacings: K_F {plan.k_f}, K_T {plan.k_t}; orders Q_s {plan.q_s}, "
        f"Q_r {plan.q_r}; rate {plan.code_rate}",
        f"  sensing-grid REs: {plan.n_sensing_geometric} of "
        f"{num.n_subcarriers * num.n_symbols}",
    ]
    r_amb_plan = SPEED_OF_LIGHT / (2.0 * plan.k_f * num.delta_f)
    r_amb_wrap = SPEED_OF_LIGHT / (plan.k_f * num.delta_f)
    fd_amb_plan = 1.0 / (2.0 * plan.k_t * num.t0)
    fd_amb_wrap = 1.0 / (plan.k_t * num.t0)
    lines.append(
        f"  unambiguous range: {r_amb_plan:.6g} m by the planning convention "
        f"(factor 2); grid wrap occurs at {r_amb_wrap:.6g} m"
    )
    lines.append(
        f"  unambiguous Doppler: +/-{fd_amb_plan:.6g} Hz by the planning "
        f"convention; grid wrap spans {fd_amb_wrap:.6g} Hz"
    )
    if req is not None:
        bandwidth, duration = compute_burst(req)
        lines.append(
            f"  burst for resolution KPIs: {bandwidth / 1e6:.6g} MHz, "
            f"{duration * 1e3:.6g} ms (frame offers {num.frame_bandwidth / 1e6:.6g} MHz, "
            f"{num.frame_duration * 1e3:.6g} ms)"
        )
    for mode in MODES:
        mode_plan = FramePlan(
            numerology=num,
            k_f=plan.k_f,
            k_t=plan.k_t,
            q_s=plan.q_s,
            q_r=plan.q_r,
            code_rate=plan.code_rate,
            mode=mode,
        )
        eta = spectral_efficiency(mode_plan)
        gain = processing_gain_db(mode_plan)
        lines.append(f"  {mode:>12}: eta {eta:.6g} bit/RE, processing gain {gain:.4g} dB")
    return "\n".join(lines)


def derive_plan(
    numerology: Numerology,
    req: SensingRequirements,
    q_s: int = 2,
    q_r: int = 4,
    code_rate: float = 0.5,
    mode: str = "hybrid",
) -> FramePlan:
    """Build a FramePlan from sensing requirements, enforcing feasibility."""
    check_burst_fits(numerology, req)
    k_f, k_t = compute_spacings(numerology, req)
    return FramePlan(
        numerology=numerology,
        k_f=k_f,
        k_t=k_t,
        q_s=q_s,
        q_r=q_r,
        code_rate=code_rate,
        mode=mode,
    )
