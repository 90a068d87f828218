"""Shot-noise synthesis through the circuit transfer paths.

Each of the three current sources contributes a white Gaussian stream
whose per-sample variance is ``2 q I / T_s``; filtered one-sided PSDs
then come out as ``4 q I |H|^2``, matching the analytic evaluators.
The photodiode stream runs through Zm and the photoreceptor-bias stream
through Zout (their sum is the noise at Vpr); the source-follower
stream runs through ZoutSf and adds to the Asf-filtered Vpr noise at
Vsf.

Streams are counter-based (Philox) keyed per (pixel, source) so array
runs are reproducible regardless of scheduling order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import welch as _scipy_welch

from .circuit import BiasPoint, OperatingPoint, PixelParams, Q_E, tf_coefficients
from .errors import ParameterError
from .filters import FilterState

SOURCE_IDS = {"i_pd": 0, "i_pr": 1, "i_sf": 2}


def noise_stream_rng(seed: int, pixel: int, source: str) -> np.random.Generator:
    """Independent counter-based stream for one (pixel, source) pair."""
    key = np.array([np.uint64(seed), np.uint64(pixel * 8 + SOURCE_IDS[source])],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass
class NoiseStreamState:
    """One white-current source and its transfer path."""

    source: str
    rng: np.random.Generator
    filter: FilterState
    scale: float  # white-noise std per sample (A), sqrt(2 q I / T_s)

    def draw(self, n: int) -> np.ndarray:
        return self.filter.run(self.rng.standard_normal(n) * self.scale)


class NoiseSynth:
    """Per-pixel noise generator over the three shot-noise sources.

    The filters are discretized at the supplied operating point; call
    :meth:`relinearize` on the same cadence as the signal filters when
    the photocurrent moves (noise bandwidth tracks the operating point).
    """

    def __init__(self, op: OperatingPoint, bias: BiasPoint, t_s: float,
                 seed: int = 0, pixel: int = 0,
                 q_e: float = Q_E):
        if t_s <= 0.0:
            raise ParameterError("T_s must be > 0")
        self.t_s = t_s
        self.q_e = q_e
        self.streams = {
            name: NoiseStreamState(
                source=name,
                rng=noise_stream_rng(seed, pixel, name),
                filter=FilterState.from_continuous(*tf_coefficients(op, path), t_s),
                scale=self._scale(getattr(bias, name)),
            )
            for name, path in (("i_pd", "zm"), ("i_pr", "zout"),
                               ("i_sf", "zout_sf"))
        }
        # Separate Asf stage for the Vpr-referred noise so the signal
        # path's buffer filter is untouched by noise injection.
        self._asf = FilterState.from_continuous(*tf_coefficients(op, "asf"), t_s)

    def _scale(self, current: float) -> float:
        return math.sqrt(2.0 * self.q_e * current / self.t_s)

    def relinearize(self, op: OperatingPoint, bias: BiasPoint) -> None:
        """Refresh filter coefficients and amplitudes at a new operating point."""
        for name, path in (("i_pd", "zm"), ("i_pr", "zout"), ("i_sf", "zout_sf")):
            st = self.streams[name]
            st.filter.refresh_coefficients(*tf_coefficients(op, path))
            st.scale = self._scale(getattr(bias, name))
        self._asf.refresh_coefficients(*tf_coefficients(op, "asf"))

    def sample_block(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """(n_pr, n_sf) noise voltages for the next n samples."""
        n_pr = self.streams["i_pd"].draw(n) + self.streams["i_pr"].draw(n)
        n_sf = self._asf.run(n_pr) + self.streams["i_sf"].draw(n)
        return n_pr, n_sf

    def sample(self) -> tuple[float, float]:
        """Single-sample convenience wrapper around :meth:`sample_block`."""
        n_pr, n_sf = self.sample_block(1)
        return float(n_pr[0]), float(n_sf[0])


def synth_noise_sample(synth: NoiseSynth) -> tuple[float, float]:
    """Advance all streams one timestep; returns (n_pr, n_sf) in volts."""
    return synth.sample()


def make_noise_synth(params: PixelParams, op: OperatingPoint, bias: BiasPoint,
                     t_s: float, seed: int = 0, pixel: int = 0) -> NoiseSynth:
    return NoiseSynth(op, bias, t_s, seed=seed, pixel=pixel, q_e=params.q_e)


def welch_psd(samples, t_s: float, segment_len: int,
              overlap: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    """Hann-windowed averaged periodogram, one-sided, V^2/Hz.

    ``overlap`` is the segment overlap fraction in [0, 1). Returns
    (f_hz, psd). Scaling is Parseval-consistent: integrating the PSD
    over frequency recovers the signal variance.
    """
    samples = np.asarray(samples, dtype=float)
    if not 0.0 <= overlap < 1.0:
        raise ParameterError("overlap must be in [0, 1)")
    if segment_len > samples.size:
        raise ParameterError("segment_len exceeds the number of samples")
    f, pxx = _scipy_welch(samples, fs=1.0 / t_s, window="hann",
                          nperseg=segment_len,
                          noverlap=int(overlap * segment_len),
                          detrend="constant", scaling="density")
    return f, pxx
