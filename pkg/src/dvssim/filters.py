"""Bilinear discretization of the continuous transfer functions.

Each continuous H(s) of order <= 2 is mapped to a difference equation
with ``s <- (2/T_s)(z-1)/(z+1)``; DC gain is preserved exactly and
stable s-plane poles land strictly inside the unit circle.

FilterState keeps the last two input/output samples as its delay line.
Replacing the coefficients while keeping that history is how the
per-timestep relinearization carries state across a coefficient
refresh: the canonical internal state is re-derived from the retained
history under the new coefficients, so at constant input (and unchanged
DC gain) the output continues without a jump.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import bilinear as _scipy_bilinear
from scipy.signal import lfilter, lfiltic

from .errors import ParameterError


def bilinear_coeffs(num_s, den_s, t_s: float) -> tuple[np.ndarray, np.ndarray]:
    """z-domain (b, a) for a continuous TF with ascending s coefficients.

    Raises ParameterError for T_s <= 0 or a continuous TF with poles not
    strictly in the left half-plane.
    """
    if t_s <= 0.0:
        raise ParameterError("T_s must be > 0")
    num_s = np.atleast_1d(np.asarray(num_s, dtype=float))
    den_s = np.atleast_1d(np.asarray(den_s, dtype=float))
    if den_s.size > 1:
        poles = np.roots(den_s[::-1])
        if np.any(poles.real >= 0.0):
            raise ParameterError("continuous transfer function is unstable")
    # scipy wants descending powers of s and returns lfilter-ready (b, a).
    b, a = _scipy_bilinear(num_s[::-1], den_s[::-1], fs=1.0 / t_s)
    b = np.atleast_1d(b) / a[0]
    a = np.atleast_1d(a) / a[0]
    # Pad to order 2 so every FilterState has a uniform delay line.
    b = np.pad(b, (0, 3 - b.size))
    a = np.pad(a, (0, 3 - a.size))
    return b, a


@dataclass
class FilterState:
    """Difference-equation state for one discretized transfer function."""

    b: np.ndarray          # z-domain numerator, b[0] + b[1] z^-1 + b[2] z^-2
    a: np.ndarray          # z-domain denominator, a[0] = 1
    t_s: float
    order: int
    x1: float = 0.0        # input delay line
    x2: float = 0.0
    y1: float = 0.0        # output delay line
    y2: float = 0.0

    @classmethod
    def from_continuous(cls, num_s, den_s, t_s: float) -> "FilterState":
        b, a = bilinear_coeffs(num_s, den_s, t_s)
        return cls(b=b, a=a, t_s=t_s, order=len(np.atleast_1d(den_s)) - 1)

    @property
    def dc_gain(self) -> float:
        return float(np.sum(self.b) / np.sum(self.a))

    def settle(self, x: float) -> None:
        """Seed the delay line at the steady state for constant input x."""
        y = self.dc_gain * x
        self.x1 = self.x2 = x
        self.y1 = self.y2 = y

    def refresh_coefficients(self, num_s, den_s) -> None:
        """Swap in newly linearized coefficients, keeping the delay line."""
        self.b, self.a = bilinear_coeffs(num_s, den_s, self.t_s)

    def step(self, x: float) -> float:
        """Advance one sample (direct form I)."""
        b, a = self.b, self.a
        y = (b[0] * x + b[1] * self.x1 + b[2] * self.x2
             - a[1] * self.y1 - a[2] * self.y2)
        self.x2, self.x1 = self.x1, x
        self.y2, self.y1 = self.y1, y
        return y

    def run(self, x: np.ndarray) -> np.ndarray:
        """Filter a block of samples, carrying state across calls."""
        x = np.asarray(x, dtype=float)
        if x.size == 0:
            return x.copy()
        zi = lfiltic(self.b, self.a, [self.y1, self.y2], [self.x1, self.x2])
        y, _ = lfilter(self.b, self.a, x, zi=zi)
        if x.size >= 2:
            self.x1, self.x2 = x[-1], x[-2]
            self.y1, self.y2 = y[-1], y[-2]
        else:
            self.x2, self.x1 = self.x1, x[-1]
            self.y2, self.y1 = self.y1, y[-1]
        return y

    def zpoles(self) -> np.ndarray:
        return np.roots(self.a[: self.order + 1]) if self.order else np.array([])


def freq_response_z(b: np.ndarray, a: np.ndarray, f, t_s: float):
    """H_z(e^{j 2 pi f T_s}) for lfilter-convention coefficients."""
    f = np.asarray(f, dtype=float)
    zinv = np.exp(-1j * 2.0 * np.pi * f * t_s)
    num = b[0] + b[1] * zinv + b[2] * zinv**2
    den = a[0] + a[1] * zinv + a[2] * zinv**2
    return num / den
