"""Small-signal model of the DVS photoreceptor and source-follower buffer.

The front end is described by four transfer functions:

* ``Zm(s)   = Vpr / Ipd``   (transimpedance of the feedback loop, biquad)
* ``Zout(s) = Vpr / Ipr``   (amplifier output impedance path, biquad)
* ``Asf(s)  = Vsf / Vpr``   (source-follower gain, first order)
* ``ZoutSf(s) = Vsf / Isf`` (source-follower output impedance, first order)

with the two biquads sharing the denominator ``s^2/w0^2 + 2 zeta/w0 s + 1``.
All transistors are assumed in weak inversion (gm = kappa*I/U_T,
gs = I/U_T); the amplifier output resistance comes from the Early
voltages of the two amplifier transistors.

Shot noise enters as white current noise at the photodiode, the
photoreceptor bias and the source-follower bias; at Vsf the one-sided
power spectral density is::

    S(f) = 4 q Ipd |Zm Asf|^2  +  4 q Ipr |Zout Asf|^2  +  4 q Isf |ZoutSf|^2

For event generation the summed PSD is reduced to an Ornstein-Uhlenbeck
description (stationary sigma, cutoff f_c at the dominant pole).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ParameterError

# Electron charge (C) and thermal voltage at ~300 K (V).
Q_E = 1.602176634e-19
U_T_300K = 0.02585

# Photocurrents below the dark-current scale make 1/gm_fb blow up and the
# weak-inversion model is unphysical there anyway.
I_PD_FLOOR = 1e-16

TF_NAMES = ("zm", "zout", "asf", "zout_sf")


@dataclass(frozen=True)
class PixelParams:
    """Static physical parameters of one pixel."""

    c_pd: float   # photodiode capacitance (F)
    c_fb: float   # feedback capacitance (F)
    c_pr: float   # photoreceptor output capacitance (F)
    c_sf: float   # source-follower output capacitance (F)
    kappa_fb: float
    kappa_amp_n: float
    kappa_sf: float
    v_a_amp_n: float  # Early voltage, n amplifier transistor (V)
    v_a_amp_p: float  # Early voltage, p amplifier transistor (V)
    u_t: float = U_T_300K
    q_e: float = Q_E

    def __post_init__(self):
        for name in ("c_pd", "c_fb", "c_pr", "c_sf"):
            if getattr(self, name) <= 0.0:
                raise ParameterError(f"{name} must be > 0")
        for name in ("kappa_fb", "kappa_amp_n", "kappa_sf"):
            k = getattr(self, name)
            if not 0.0 < k <= 1.0:
                raise ParameterError(f"{name} must be in (0, 1]")
        for name in ("v_a_amp_n", "v_a_amp_p", "u_t", "q_e"):
            if getattr(self, name) <= 0.0:
                raise ParameterError(f"{name} must be > 0")


@dataclass(frozen=True)
class BiasPoint:
    """Instantaneous photocurrent and the two bias currents (A)."""

    i_pd: float
    i_pr: float
    i_sf: float

    def __post_init__(self):
        for name in ("i_pd", "i_pr", "i_sf"):
            if getattr(self, name) <= 0.0:
                raise ParameterError(f"{name} must be > 0")


@dataclass(frozen=True)
class OperatingPoint:
    """Small-signal quantities and transfer-function coefficients.

    Conductances in S, resistances in ohm, corner frequencies in rad/s,
    time constants in s. ``w_z_zm``/``w_z_zout`` are negative (right
    half-plane zeros in the ``1 + s/w_z`` numerator convention).
    """

    gm_fb: float
    gs_fb: float
    gm_amp_n: float
    gs_sf: float
    r_out: float
    a_loop: float
    zm_dc: float
    zout_dc: float
    w_z_zm: float
    w_z_zout: float
    w0: float
    zeta: float
    tau_pd: float
    tau_pr: float
    tau_sf: float
    kappa_sf: float
    u_t: float


def compute_operating_point(params: PixelParams, bias: BiasPoint) -> OperatingPoint:
    """Evaluate all small-signal quantities at the given bias.

    The feedback transistor carries the photocurrent at DC, so gm_fb and
    gs_fb follow ``i_pd`` (floored at ``I_PD_FLOOR``).
    """
    i_pd = max(bias.i_pd, I_PD_FLOOR)
    u_t = params.u_t

    gm_fb = params.kappa_fb * i_pd / u_t
    gs_fb = i_pd / u_t
    gm_amp_n = params.kappa_amp_n * bias.i_pr / u_t
    gs_sf = bias.i_sf / u_t

    r_out = (params.v_a_amp_n * params.v_a_amp_p
             / (bias.i_pr * (params.v_a_amp_n + params.v_a_amp_p)))
    a_loop = gm_amp_n * r_out * gm_fb / gs_fb

    zm_dc = (1.0 / gm_fb) * a_loop / (a_loop + 1.0)
    zout_dc = r_out / (a_loop + 1.0)
    w_z_zm = -gm_amp_n / params.c_fb
    w_z_zout = -gs_fb / (params.c_pd + params.c_fb)

    tau_pd = (params.c_pd + (1.0 + gm_amp_n * r_out) * params.c_fb) / gs_fb
    tau_pr = r_out * (params.c_pr + (1.0 - params.kappa_fb) * params.c_fb)
    tau_sf = params.c_sf / gs_sf

    cc_sum = (params.c_pd * params.c_fb + params.c_pr * params.c_fb
              + params.c_pr * params.c_pd)
    w0 = math.sqrt((a_loop + 1.0) * gs_fb / (r_out * cc_sum))
    zeta = 0.5 * w0 * (tau_pd + tau_pr) / (a_loop + 1.0)

    return OperatingPoint(
        gm_fb=gm_fb, gs_fb=gs_fb, gm_amp_n=gm_amp_n, gs_sf=gs_sf,
        r_out=r_out, a_loop=a_loop, zm_dc=zm_dc, zout_dc=zout_dc,
        w_z_zm=w_z_zm, w_z_zout=w_z_zout, w0=w0, zeta=zeta,
        tau_pd=tau_pd, tau_pr=tau_pr, tau_sf=tau_sf,
        kappa_sf=params.kappa_sf, u_t=u_t,
    )


def tf_coefficients(op: OperatingPoint, which: str) -> tuple[list[float], list[float]]:
    """s-domain numerator/denominator of one transfer function.

    Coefficients are in ascending powers of s: ``H(s) = (b0 + b1 s + ...)
    / (a0 + a1 s + ...)``.
    """
    if which == "zm":
        num = [op.zm_dc, op.zm_dc / op.w_z_zm]
        den = [1.0, 2.0 * op.zeta / op.w0, 1.0 / op.w0**2]
    elif which == "zout":
        num = [op.zout_dc, op.zout_dc / op.w_z_zout]
        den = [1.0, 2.0 * op.zeta / op.w0, 1.0 / op.w0**2]
    elif which == "asf":
        num = [op.kappa_sf]
        den = [1.0, op.tau_sf]
    elif which == "zout_sf":
        num = [1.0 / op.gs_sf]
        den = [1.0, op.tau_sf]
    else:
        raise ParameterError(f"unknown transfer function {which!r}; "
                             f"expected one of {TF_NAMES}")
    return num, den


def eval_tf(op: OperatingPoint, which: str, f):
    """Complex gain H(j 2 pi f) of the selected transfer function.

    ``f`` may be a scalar or an array of frequencies in Hz (>= 0).
    """
    f = np.asarray(f, dtype=float)
    if np.any(f < 0.0):
        raise ParameterError("frequency must be >= 0")
    num, den = tf_coefficients(op, which)
    s = 1j * 2.0 * np.pi * f
    h = np.polyval(num[::-1], s) / np.polyval(den[::-1], s)
    return h if h.shape else complex(h)


@dataclass(frozen=True)
class PsdBreakdown:
    """One-sided PSD at Vsf (V^2/Hz): total and per-source terms."""

    total: np.ndarray
    i_pd_term: np.ndarray
    i_pr_term: np.ndarray
    i_sf_term: np.ndarray
    flicker_term: np.ndarray | None = None


def eval_noise_psd(op: OperatingPoint, bias: BiasPoint, f,
                   flicker_coeff: float | None = None,
                   q_e: float = Q_E) -> PsdBreakdown:
    """Shot-noise PSD at Vsf and its per-source breakdown.

    An optional flicker term ``flicker_coeff / f`` is added to the total
    when configured (off by default; its practical impact is small).
    """
    f = np.asarray(f, dtype=float)
    asf2 = np.abs(eval_tf(op, "asf", f)) ** 2
    t_pd = 4.0 * q_e * bias.i_pd * np.abs(eval_tf(op, "zm", f)) ** 2 * asf2
    t_pr = 4.0 * q_e * bias.i_pr * np.abs(eval_tf(op, "zout", f)) ** 2 * asf2
    t_sf = 4.0 * q_e * bias.i_sf * np.abs(eval_tf(op, "zout_sf", f)) ** 2
    total = t_pd + t_pr + t_sf
    flick = None
    if flicker_coeff is not None:
        with np.errstate(divide="ignore"):
            flick = flicker_coeff / f
        total = total + flick
    return PsdBreakdown(total=total, i_pd_term=t_pd, i_pr_term=t_pr,
                        i_sf_term=t_sf, flicker_term=flick)


# --- Ornstein-Uhlenbeck reduction -------------------------------------------

# Integration grid: log-spaced trapezoid, 64 points per decade, from
# F_INT_LO up to 1000x the highest pole frequency.
F_INT_LO = 1e-2
F_INT_DECADE_POINTS = 64
F_INT_HI_FACTOR = 1e3

# Dominant-pole separation below this ratio degrades the OU approximation.
OU_POLE_RATIO_MIN = 3.0


@dataclass(frozen=True)
class OuReduction:
    """OU summary of the total noise at Vsf."""

    sigma: float        # stationary RMS (V)
    f_c: float          # cutoff frequency (Hz)
    ou_valid: bool      # dominant-pole separation >= OU_POLE_RATIO_MIN
    pole_ratio: float


def highest_pole_hz(op: OperatingPoint) -> float:
    """Fastest pole of the full Vsf path, in Hz (integration truncation)."""
    z = op.zeta
    w_fast = op.w0 * (z + math.sqrt(max(z * z - 1.0, 0.0)))
    return max(w_fast, 1.0 / op.tau_sf) / (2.0 * math.pi)


def integrate_psd(psd: Callable[[np.ndarray], np.ndarray], f_hi: float,
                  points_per_decade: int = F_INT_DECADE_POINTS) -> float:
    """Trapezoid integral of a one-sided PSD on a log-spaced grid."""
    lo, hi = F_INT_LO, F_INT_HI_FACTOR * f_hi
    n = max(int(math.log10(hi / lo) * points_per_decade), 8)
    f = np.logspace(math.log10(lo), math.log10(hi), n)
    return float(np.trapezoid(np.asarray(psd(f), dtype=float), f))


def reduce_to_ou(psd: Callable[[np.ndarray], np.ndarray],
                 op: OperatingPoint,
                 points_per_decade: int = F_INT_DECADE_POINTS) -> OuReduction:
    """Collapse the summed noise PSD to an OU (sigma, f_c) pair.

    sigma^2 is the numerical integral of ``psd`` over the truncated log
    grid; f_c sits at the dominant (lowest-frequency) pole, i.e. the
    larger of tau_pd and tau_sf. When that pole is separated from the
    next time constant by less than OU_POLE_RATIO_MIN the result is
    flagged (simulation proceeds, accuracy degraded).
    """
    var = integrate_psd(psd, highest_pole_hz(op), points_per_decade)
    taus = sorted((op.tau_pd, op.tau_pr, op.tau_sf), reverse=True)
    tau_dom = max(op.tau_pd, op.tau_sf)
    others = list(taus)
    others.remove(tau_dom)
    ratio = tau_dom / others[0] if others[0] > 0.0 else math.inf
    return OuReduction(
        sigma=math.sqrt(max(var, 0.0)),
        f_c=1.0 / (2.0 * math.pi * tau_dom),
        ou_valid=ratio >= OU_POLE_RATIO_MIN,
        pole_ratio=ratio,
    )


@dataclass(frozen=True)
class NoiseModel:
    """Analytic per-source PSD evaluators plus their OU reduction."""

    op: OperatingPoint
    bias: BiasPoint
    sigma: float
    f_c: float
    ou_valid: bool
    pole_ratio: float
    flicker_coeff: float | None = None
    q_e: float = field(default=Q_E, repr=False)

    def psd(self, f) -> PsdBreakdown:
        return eval_noise_psd(self.op, self.bias, f,
                              flicker_coeff=self.flicker_coeff, q_e=self.q_e)

    def psd_total(self, f) -> np.ndarray:
        return self.psd(f).total


def build_noise_model(op: OperatingPoint, bias: BiasPoint,
                      flicker_coeff: float | None = None,
                      q_e: float = Q_E) -> NoiseModel:
    """Assemble the NoiseModel for one operating point."""
    red = reduce_to_ou(
        lambda f: eval_noise_psd(op, bias, f, flicker_coeff=flicker_coeff,
                                 q_e=q_e).total,
        op,
    )
    return NoiseModel(op=op, bias=bias, sigma=red.sigma, f_c=red.f_c,
                      ou_valid=red.ou_valid, pole_ratio=red.pole_ratio,
                      flicker_coeff=flicker_coeff, q_e=q_e)
