"""Seeded channel impairments: AWGN, carrier frequency offset and tapped-delay Rician fading.

Every function takes an explicit ``numpy.random.Generator``; nothing here
touches global random state.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

N_OSCILLATORS = 16


@dataclass(frozen=True)
class ChannelProfile:
    """Power-delay profile plus Rician/Doppler/CFO parameters.

    Defaults reproduce the three-path training channel: delays 0, 9 and 17 us,
    relative powers 0, -2 and -10 dB, K = 4 on the first tap, 4 Hz maximum
    Doppler and 2 ppm oscillator offset at 2.412 GHz.
    """

    tap_delays: tuple[float, ...] = (0.0, 9e-6, 1.7e-5)
    tap_powers_db: tuple[float, ...] = (0.0, -2.0, -10.0)
    k_factor: float = 4.0
    max_doppler: float = 4.0
    cfo_ppm: float = 2.0
    carrier_freq: float = 2.412e9
    sample_rate: float = 20e6

    def __post_init__(self):
        if len(self.tap_delays) != len(self.tap_powers_db):
            raise ValueError("tap_delays and tap_powers_db differ in length")
        if not self.tap_delays or self.tap_delays[0] != 0:
            raise ValueError("first tap delay must be 0")
        if self.k_factor < 0:
            raise ValueError("k_factor must be non-negative")
        object.__setattr__(self, "tap_delays", tuple(float(d) for d in self.tap_delays))
        object.__setattr__(self, "tap_powers_db", tuple(float(p) for p in self.tap_powers_db))

    @property
    def tap_gains(self) -> np.ndarray:
        """Linear tap powers normalized to unit sum."""
        p = 10 ** (np.asarray(self.tap_powers_db) / 10)
        return p / p.sum()

    @property
    def tap_offsets(self) -> np.ndarray:
        """Tap delays rounded to whole samples."""
        return np.rint(np.asarray(self.tap_delays) * self.sample_rate).astype(int)

    @property
    def cfo_hz(self) -> float:
        return cfo_from_ppm(self.cfo_ppm, self.carrier_freq)

    def to_flat(self, prefix: str = "channel.") -> dict[str, str]:
        out = {}
        for k, v in asdict(self).items():
            out[prefix + k] = ",".join(repr(x) for x in v) if isinstance(v, tuple) else repr(v)
        return out

    @classmethod
    def from_flat(cls, kv: dict[str, str], prefix: str = "channel.") -> "ChannelProfile":
        kw = {}
        for k, v in kv.items():
            if not k.startswith(prefix):
                continue
            name = k[len(prefix):]
            if name in ("tap_delays", "tap_powers_db"):
                kw[name] = tuple(float(x) for x in v.split(","))
            else:
                kw[name] = float(v)
        return cls(**kw)


@dataclass
class FadingState:
    """Sum-of-sinusoids oscillator parameters for every tap of one channel realization."""

    angles: np.ndarray  # (taps, oscillators) arrival angles
    phases: np.ndarray  # (taps, oscillators)
    los_angle: float
    los_phase: float
    profile: ChannelProfile = field(repr=False)

    @classmethod
    def draw(cls, profile: ChannelProfile, rng: np.random.Generator) -> "FadingState":
        n = len(profile.tap_delays)
        return cls(
            angles=rng.uniform(0, 2 * np.pi, (n, N_OSCILLATORS)),
            phases=rng.uniform(0, 2 * np.pi, (n, N_OSCILLATORS)),
            los_angle=float(rng.uniform(0, 2 * np.pi)),
            los_phase=float(rng.uniform(0, 2 * np.pi)),
            profile=profile,
        )

    def gains(self, t) -> np.ndarray:
        """Complex tap gains at time(s) ``t`` seconds; shape ``t.shape + (taps,)``."""
        t = np.asarray(t, dtype=float)
        p = self.profile
        wd = 2 * np.pi * p.max_doppler
        arg = wd * t[..., None, None] * np.cos(self.angles) + self.phases
        diffuse = np.exp(1j * arg).sum(axis=-1) / np.sqrt(N_OSCILLATORS)
        k = p.k_factor
        if math.isinf(k):
            los_w, nlos_w = 1.0, 0.0
        else:
            los_w, nlos_w = np.sqrt(k / (k + 1)), np.sqrt(1 / (k + 1))
        los = np.exp(1j * (wd * t * np.cos(self.los_angle) + self.los_phase))
        g = diffuse.copy()
        g[..., 0] = los_w * los + nlos_w * diffuse[..., 0]
        return g * np.sqrt(p.tap_gains)


def cfo_from_ppm(ppm: float, carrier_freq: float) -> float:
    return ppm * 1e-6 * carrier_freq


def awgn(x, es_n0_db: float, rng: np.random.Generator) -> np.ndarray:
    """Add circular complex Gaussian noise at ``Es/N0`` relative to the block's mean sample energy.

    ``es_n0_db = inf`` returns an unmodified copy.
    """
    x = np.asarray(x, dtype=complex)
    if x.size == 0:
        raise ValueError("awgn needs a non-empty input")
    if math.isinf(es_n0_db) and es_n0_db > 0:
        return x.copy()
    es = np.mean(np.abs(x) ** 2)
    sigma2 = es / 10 ** (es_n0_db / 10)
    z = rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape)
    return x + np.sqrt(sigma2 / 2) * z


def apply_cfo(x, cfo_hz: float, sample_rate: float, start: int = 0) -> np.ndarray:
    if sample_rate <= 0:
        raise ValueError("sample_rate must be positive")
    x = np.asarray(x, dtype=complex)
    k = np.arange(start, start + x.shape[-1])
    # reduce the cycle count modulo 1 before scaling by 2 pi
    cycles = np.mod(cfo_hz * k / sample_rate, 1.0)
    return x * np.exp(2j * np.pi * cycles)


def fade(x, profile: ChannelProfile, rng: np.random.Generator, t: float | None = None,
         state: FadingState | None = None) -> np.ndarray:
    """Tapped-delay-line channel with gains frozen over the block.

    The block is evaluated at time ``t`` of a sum-of-sinusoids process; when
    ``t`` is omitted a random time in ``[0, 1)`` s is drawn so that successive
    calls see independent realizations. Pass ``state`` (and increasing ``t``)
    to follow one realization across consecutive symbols.
    """
    x = np.asarray(x, dtype=complex)
    offsets = profile.tap_offsets
    if offsets.max() >= x.shape[-1]:
        raise ValueError(
            f"input of {x.shape[-1]} samples is shorter than the channel span of {offsets.max() + 1}"
        )
    if state is None:
        state = FadingState.draw(profile, rng)
    if t is None:
        t = float(rng.uniform(0.0, 1.0))
    h = state.gains(t)
    y = np.zeros_like(x)
    n = x.shape[-1]
    for g, d in zip(h, offsets):
        y[..., d:] += g * x[..., : n - d]
    return y


def impair(x, profile: ChannelProfile | None, es_n0_db: float, rng: np.random.Generator) -> np.ndarray:
    """Fading, then CFO, then AWGN. ``profile=None`` skips fading and CFO."""
    y = np.asarray(x, dtype=complex)
    if profile is not None:
        y = fade(y, profile, rng)
        y = apply_cfo(y, profile.cfo_hz, profile.sample_rate)
    return awgn(y, es_n0_db, rng)
