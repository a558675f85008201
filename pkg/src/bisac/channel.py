"""Bistatic multipath frequency-domain channel synthesis and scenario sampling.

Each propagation path contributes a rank-1 outer product of a range
steering vector over subcarriers and a Doppler steering vector over
symbols; the received frame is the element-wise product of the transmit
frame with the channel matrix plus circular complex AWGN.

The receive SNR is defined per RE through the dominant (reference) path:
SNR = |alpha_0|^2 / sigma_n^2 for unit-power constellations.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .constants import SPEED_OF_LIGHT
from .planner import Numerology


@dataclass(frozen=True)
class PathParams:
    """One propagation path: complex gain, bistatic range, bistatic Doppler."""

    alpha: complex
    r: float  # m
    f_d: float  # Hz
    is_reference: bool = False

    def __post_init__(self):
        if abs(self.alpha) <= 0:
            raise ValueError("path gain must be nonzero")


@dataclass(frozen=True)
class Scenario:
    """Reference path plus target paths with ground truth relative to it."""

    reference: PathParams
    targets: tuple[PathParams, ...]

    def __post_init__(self):
        if not self.reference.is_reference:
            raise ValueError("reference path must be flagged is_reference")
        if any(t.is_reference for t in self.targets):
            raise ValueError("targets must not be flagged is_reference")

    @property
    def excess_ranges(self) -> np.ndarray:
        return np.array([t.r - self.reference.r for t in self.targets])

    @property
    def diff_dopplers(self) -> np.ndarray:
        return np.array([t.f_d - self.reference.f_d for t in self.targets])

    @property
    def all_paths(self) -> tuple[PathParams, ...]:
        return (self.reference,) + self.targets


@dataclass(frozen=True)
class NoiseConfig:
    """Per-RE complex noise variance (linear)."""

    sigma2: float

    def __post_init__(self):
        if self.sigma2 < 0:
            raise ValueError("noise variance must be nonnegative")


def noise_for_snr(snr_db: float, reference_gain: complex) -> NoiseConfig:
    """Noise variance realizing the configured receive SNR for this scenario."""
    return NoiseConfig(sigma2=abs(reference_gain) ** 2 / 10 ** (snr_db / 10))


@dataclass(frozen=True)
class ScenarioConfig:
    """Sampling ranges for randomized scenarios (bounds inclusive)."""

    n_targets: int = 5
    r0_m: tuple[float, float] = (200.0, 300.0)
    excess_range_m: tuple[float, float] = (30.0, 90.0)
    extra_loss_db: tuple[float, float] = (47.0, 53.0)
    doppler_hz: tuple[float, float] = (-1800.0, 1800.0)
    # testing knob: when set, target Doppler = reference Doppler + random sign
    # times a magnitude drawn from this band (keeps targets off the DC ridge
    # on small grids)
    target_doppler_offset_band_hz: tuple[float, float] | None = None

    def __post_init__(self):
        if self.n_targets < 1:
            raise ValueError("need at least one target")
        for name in ("r0_m", "excess_range_m", "extra_loss_db", "doppler_hz"):
            lo, hi = getattr(self, name)
            if hi < lo:
                raise ValueError(f"{name} bounds out of order")


def steering_range(r: float, n: int, delta_f: float) -> np.ndarray:
    """Unit-magnitude subcarrier phase ramp for a path at bistatic range r."""
    if n < 1:
        raise ValueError("need at least one subcarrier")
    return np.exp(-2j * np.pi * np.arange(n) * delta_f * r / SPEED_OF_LIGHT)


def steering_doppler(f_d: float, m: int, t0: float) -> np.ndarray:
    """Unit-magnitude symbol phase ramp; note the sign opposes the range ramp."""
    if m < 1:
        raise ValueError("need at least one symbol")
    return np.exp(+2j * np.pi * np.arange(m) * t0 * f_d)


def path_cfr(path: PathParams, numerology: Numerology) -> np.ndarray:
    """Rank-1 channel contribution of a single path."""
    a = steering_range(path.r, numerology.n_subcarriers, numerology.delta_f)
    b = steering_doppler(path.f_d, numerology.n_symbols, numerology.t0)
    return path.alpha * np.outer(a, b)


def build_cfr(scenario: Scenario, numerology: Numerology) -> np.ndarray:
    """Superposition of the reference and all target path contributions."""
    h = path_cfr(scenario.reference, numerology)
    for target in scenario.targets:
        h += path_cfr(target, numerology)
    return h


def apply_channel_and_noise(
    x: np.ndarray,
    h: np.ndarray,
    noise: NoiseConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Y = X * H (element-wise) + circular complex AWGN of variance sigma2."""
    if x.shape != h.shape:
        raise ValueError(f"frame shape {x.shape} != channel shape {h.shape}")
    y = x * h
    if noise.sigma2 > 0:
        scale = math.sqrt(noise.sigma2 / 2.0)
        y = y + scale * (
            rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape)
        )
    return y


def free_space_gain(r: float, f_c: float) -> float:
    """Free-space amplitude gain lambda / (4 pi r)."""
    return (SPEED_OF_LIGHT / f_c) / (4.0 * np.pi * r)


def sample_scenario(
    rng: np.random.Generator,
    cfg: ScenarioConfig,
    f_c: float,
) -> Scenario:
    """Draw a random scenario: reference path plus cfg.n_targets point targets.

    The reference gain magnitude follows free-space path loss at (r0, f_c);
    target gains sit extra_loss_db below it. All phases are uniform.
    """
    r0 = rng.uniform(*cfg.r0_m)
    f_d0 = rng.uniform(*cfg.doppler_hz)
    phase0 = rng.uniform(0.0, 2.0 * np.pi)
    a0 = free_space_gain(r0, f_c) * np.exp(1j * phase0)
    reference = PathParams(alpha=complex(a0), r=r0, f_d=f_d0, is_reference=True)

    targets = []
    for _ in range(cfg.n_targets):
        excess = rng.uniform(*cfg.excess_range_m)
        if cfg.target_doppler_offset_band_hz is not None:
            mag = rng.uniform(*cfg.target_doppler_offset_band_hz)
            sign = 1.0 if rng.uniform() < 0.5 else -1.0
            f_d = f_d0 + sign * mag
        else:
            f_d = rng.uniform(*cfg.doppler_hz)
        loss_db = rng.uniform(*cfg.extra_loss_db)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        gain = abs(a0) * 10 ** (-loss_db / 20.0) * np.exp(1j * phase)
        targets.append(PathParams(alpha=complex(gain), r=r0 + excess, f_d=f_d))
    return Scenario(reference=reference, targets=tuple(targets))


# ---------------------------------------------------------------------------
# Scenario override files (pin exact path parameters for regression tests)
# ---------------------------------------------------------------------------

def _path_to_dict(p: PathParams) -> dict:
    return {
        "alpha_re": p.alpha.real,
        "alpha_im": p.alpha.imag,
        "r_m": p.r,
        "f_d_hz": p.f_d,
        "is_reference": p.is_reference,
    }


def _path_from_dict(d: dict) -> PathParams:
    return PathParams(
        alpha=complex(d["alpha_re"], d["alpha_im"]),
        r=float(d["r_m"]),
        f_d=float(d["f_d_hz"]),
        is_reference=bool(d.get("is_reference", False)),
    )


def save_scenario(path, scenario: Scenario) -> None:
    payload = {
        "reference": _path_to_dict(scenario.reference),
        "targets": [_path_to_dict(t) for t in scenario.targets],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        payload = json.load(fh)
    return Scenario(
        reference=_path_from_dict(payload["reference"]),
        targets=tuple(_path_from_dict(t) for t in payload["targets"]),
    )
