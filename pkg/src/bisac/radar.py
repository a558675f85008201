"""Range-Doppler periodogram, CA-CFAR detection, and sensing metrics.

The periodogram applies an inverse DFT along subcarriers and a forward DFT
along symbols of the zero-padded sensing CSI matrix, so a path at excess
range dr and differential Doppler df peaks near bin
(N' * delta_f * dr / c mod N', M' * t0 * df mod M'). Both axes are cyclic
by construction, so CFAR training windows and bin distances wrap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import SPEED_OF_LIGHT


@dataclass(frozen=True)
class CfarConfig:
    """2D cell-averaging CFAR parameters (per-side cell counts)."""

    guard_cells: int = 2
    training_cells: int = 8
    p_fa: float = 1e-4
    dc_exclusion_bins: int = 8  # Chebyshev radius around bin (0, 0)

    def __post_init__(self):
        if self.training_cells < 1:
            raise ValueError("need at least one training cell per side")
        if self.guard_cells < 0:
            raise ValueError("guard cells must be nonnegative")
        if not 0.0 < self.p_fa < 1.0:
            raise ValueError("false-alarm probability must lie in (0, 1)")

    @property
    def n_training(self) -> int:
        outer = 2 * (self.guard_cells + self.training_cells) + 1
        inner = 2 * self.guard_cells + 1
        return outer * outer - inner * inner

    @property
    def threshold_factor(self) -> float:
        n = self.n_training
        return n * (self.p_fa ** (-1.0 / n) - 1.0)


@dataclass(frozen=True)
class Detection:
    range_bin: int
    doppler_bin: int
    power: float
    excess_range_m: float
    diff_doppler_hz: float


@dataclass
class Periodogram:
    """Nonnegative range-Doppler power image with bin-to-physical axes."""

    p: np.ndarray  # (N', M') float64
    delta_f: float  # subcarrier spacing of the CSI matrix the image came from
    t0: float  # symbol spacing of that CSI matrix
    z_f: int
    z_t: int
    n_native: int  # CSI rows before padding
    m_native: int  # CSI cols before padding

    @property
    def shape(self) -> tuple[int, int]:
        return self.p.shape

    @property
    def range_bin_m(self) -> float:
        """Excess range per bin."""
        return SPEED_OF_LIGHT / (self.p.shape[0] * self.delta_f)

    @property
    def doppler_bin_hz(self) -> float:
        """Differential Doppler per bin."""
        return 1.0 / (self.p.shape[1] * self.t0)

    def bin_of(self, excess_range_m: float, diff_doppler_hz: float) -> tuple[int, int]:
        """Nearest image bin for a ground-truth (excess range, diff Doppler)."""
        n_bins, m_bins = self.p.shape
        kr = int(round(excess_range_m / self.range_bin_m)) % n_bins
        kd = int(round(diff_doppler_hz / self.doppler_bin_hz)) % m_bins
        return kr, kd

    def physical_of(self, range_bin: int, doppler_bin: int) -> tuple[float, float]:
        """Physical coordinates of a bin, Doppler mapped to the signed half-range."""
        n_bins, m_bins = self.p.shape
        kr = range_bin % n_bins
        kd = doppler_bin % m_bins
        if kd > m_bins // 2:
            kd -= m_bins
        return kr * self.range_bin_m, kd * self.doppler_bin_hz


def periodogram(
    h_hat: np.ndarray,
    z_f: int = 2,
    z_t: int = 2,
    delta_f: float = 1.0,
    t0: float = 1.0,
) -> Periodogram:
    """Zero-padded 2D power spectrum of the sensing CSI matrix.

    Power is |IDFT over rows of DFT over columns|^2 / (N' M'), which keeps
    the total image power equal to the CSI energy (Parseval).
    """
    h_hat = np.asarray(h_hat, dtype=np.complex128)
    if h_hat.size == 0:
        raise ValueError("empty CSI matrix")
    if z_f < 1 or z_t < 1:
        raise ValueError("zero-pad factors must be >= 1")
    n, m = h_hat.shape
    n_pad, m_pad = z_f * n, z_t * m
    padded = np.zeros((n_pad, m_pad), dtype=np.complex128)
    padded[:n, :m] = h_hat
    spec = np.fft.ifft(np.fft.fft(padded, axis=1), axis=0) * n_pad
    p = np.abs(spec) ** 2 / (n_pad * m_pad)
    return Periodogram(
        p=p, delta_f=delta_f, t0=t0, z_f=z_f, z_t=z_t, n_native=n, m_native=m
    )


def periodogram_oracle(h_hat: np.ndarray, z_f: int = 2, z_t: int = 2) -> np.ndarray:
    """Direct double-sum evaluation of the power spectrum (small grids only)."""
    h_hat = np.asarray(h_hat, dtype=np.complex128)
    n, m = h_hat.shape
    n_pad, m_pad = z_f * n, z_t * m
    k = np.arange(n)
    ell = np.arange(m)
    p = np.empty((n_pad, m_pad))
    for i in range(n_pad):
        wr = np.exp(2j * np.pi * k * i / n_pad)
        for j in range(m_pad):
            wd = np.exp(-2j * np.pi * ell * j / m_pad)
            p[i, j] = abs(wr @ h_hat @ wd) ** 2
    return p / (n_pad * m_pad)


def _cyclic_mean_filter(p: np.ndarray, cfg: CfarConfig) -> np.ndarray:
    """Mean over the CFAR training annulus at every bin, cyclic boundaries."""
    n, m = p.shape
    half_out = cfg.guard_cells + cfg.training_cells
    half_in = cfg.guard_cells
    if 2 * half_out + 1 > min(n, m):
        raise ValueError("CFAR window larger than the image")
    kernel = np.zeros((n, m))

    def box(half, value):
        idx = np.arange(-half, half + 1)
        kernel[np.ix_(idx % n, idx % m)] += value

    box(half_out, 1.0)
    box(half_in, -1.0)
    est = np.fft.ifft2(np.fft.fft2(p) * np.fft.fft2(kernel)).real
    return np.maximum(est, 0.0) / cfg.n_training


def cfar_exceedance(p: np.ndarray, cfg: CfarConfig) -> np.ndarray:
    """Boolean map of bins exceeding the CA-CFAR threshold (no peak pruning)."""
    noise = _cyclic_mean_filter(p, cfg)
    return p > cfg.threshold_factor * noise


def _cyclic_local_maxima(p: np.ndarray, half: int) -> np.ndarray:
    """Bins that are maximal over a (2*half+1)^2 cyclic neighborhood."""
    if half < 1:
        return np.ones_like(p, dtype=bool)
    best = p.copy()
    for di in range(-half, half + 1):
        rolled_i = np.roll(p, di, axis=0)
        for dj in range(-half, half + 1):
            np.maximum(best, np.roll(rolled_i, dj, axis=1), out=best)
    return p >= best


def ca_cfar(pgram: Periodogram, cfg: CfarConfig) -> list[Detection]:
    """CA-CFAR detections reduced to local maxima, DC neighborhood excluded.

    A bin is reported when it exceeds threshold_factor times the mean of its
    cyclic training annulus, is the maximum of its guard neighborhood, and
    lies outside the Chebyshev DC-exclusion radius around bin (0, 0).
    """
    p = pgram.p
    exceed = cfar_exceedance(p, cfg)
    exceed &= _cyclic_local_maxima(p, max(cfg.guard_cells, 1))
    if cfg.dc_exclusion_bins > 0:
        n, m = p.shape
        di = np.minimum(np.arange(n), n - np.arange(n))
        dj = np.minimum(np.arange(m), m - np.arange(m))
        exceed &= np.maximum(di[:, None], dj[None, :]) > cfg.dc_exclusion_bins
    dets = []
    for i, j in zip(*np.nonzero(exceed)):
        rng_m, dop_hz = pgram.physical_of(int(i), int(j))
        dets.append(
            Detection(
                range_bin=int(i),
                doppler_bin=int(j),
                power=float(p[i, j]),
                excess_range_m=rng_m,
                diff_doppler_hz=dop_hz,
            )
        )
    dets.sort(key=lambda d: d.power, reverse=True)
    return dets


def _truth_bins(pgram: Periodogram, excess_ranges, diff_dopplers):
    return [
        pgram.bin_of(float(dr), float(df))
        for dr, df in zip(np.atleast_1d(excess_ranges), np.atleast_1d(diff_dopplers))
    ]


def _window_max(p: np.ndarray, center: tuple[int, int], half_r: int, half_d: int) -> float:
    n, m = p.shape
    rows = (center[0] + np.arange(-half_r, half_r + 1)) % n
    cols = (center[1] + np.arange(-half_d, half_d + 1)) % m
    return float(p[np.ix_(rows, cols)].max())


def target_snr(
    pgram: Periodogram,
    excess_ranges,
    diff_dopplers,
    mainlobe_native_bins: int = 2,
) -> float:
    """Linear ratio of mean per-target peak power to the residual floor.

    Each target's peak is the maximum within one native-resolution bin of
    its ground-truth location. The floor averages all bins outside
    mainlobe exclusion zones of +/- mainlobe_native_bins native bins around
    every path, including the reference at DC.
    """
    p = pgram.p
    n, m = p.shape
    bins = _truth_bins(pgram, excess_ranges, diff_dopplers)
    peaks = [_window_max(p, b, pgram.z_f, pgram.z_t) for b in bins]

    excl_r = mainlobe_native_bins * pgram.z_f
    excl_d = mainlobe_native_bins * pgram.z_t
    mask = np.ones((n, m), dtype=bool)
    for center in bins + [(0, 0)]:
        rows = (center[0] + np.arange(-excl_r, excl_r + 1)) % n
        cols = (center[1] + np.arange(-excl_d, excl_d + 1)) % m
        mask[np.ix_(rows, cols)] = False
    if not mask.any():
        raise ValueError("mainlobe exclusion zones cover the whole image")
    residual = float(p[mask].mean())
    if residual <= 0:
        return math.inf
    return float(np.mean(peaks)) / residual


def match_detections(
    detections: list[Detection],
    pgram: Periodogram,
    excess_ranges,
    diff_dopplers,
    tolerance_native_bins: int = 1,
) -> tuple[int, int]:
    """Greedy one-to-one matching of detections (strongest first) to targets.

    A target counts as detected when an unmatched detection lies within the
    tolerance (in native bins, cyclic distance) on both axes. Returns
    (n_detected, n_missed).
    """
    bins = _truth_bins(pgram, excess_ranges, diff_dopplers)
    n, m = pgram.p.shape
    tol_r = tolerance_native_bins * pgram.z_f
    tol_d = tolerance_native_bins * pgram.z_t
    matched = [False] * len(bins)
    for det in sorted(detections, key=lambda d: d.power, reverse=True):
        for t, (kr, kd) in enumerate(bins):
            if matched[t]:
                continue
            dr = abs(det.range_bin - kr)
            dd = abs(det.doppler_bin - kd)
            if min(dr, n - dr) <= tol_r and min(dd, m - dd) <= tol_d:
                matched[t] = True
                break
    n_detected = sum(matched)
    return n_detected, len(bins) - n_detected


def export_periodogram(path, pgram: Periodogram) -> None:
    """Dense export: .npy power matrix plus a .json axes sidecar."""
    path = str(path)
    np.save(path + ".npy", pgram.p)
    meta = {
        "range_bin_m": pgram.range_bin_m,
        "doppler_bin_hz": pgram.doppler_bin_hz,
        "z_f": pgram.z_f,
        "z_t": pgram.z_t,
        "n_native": pgram.n_native,
        "m_native": pgram.m_native,
    }
    import json

    with open(path + ".json", "w") as fh:
        json.dump(meta, fh, indent=2)
