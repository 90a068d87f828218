"""Comparator stage: ON/OFF event generation from the buffer voltage.

The change amplifier is modeled as ideal with gain ``a_diff``; the
comparator fires when ``a_diff * (v_sf - v_ref)`` exceeds ``theta_on``
(ON) or drops below ``-theta_off`` (OFF), after which ``v_ref`` resets.

Two generation modes:

* ``naive``  - threshold test at timestep boundaries only, on the
  supplied (typically noisy) trace. Overshoot by several thresholds in
  one step emits ``floor(overshoot / theta)`` events at the step end.
* ``fpt``    - the trace carries the noise-free signal; noise is an OU
  process (sigma, f_c from the circuit reduction) sampled exactly at
  the step ends, and two Bernoulli bridge trials per step decide
  whether either threshold was touched in between. The signal drift
  across the step is absorbed by linear de-trending, so the bridge sees
  a constant barrier. Crossing times come from the conditional
  first-passage-time distribution; the remainder of the step restarts
  from the barrier and is processed recursively (depth-capped).

On reset the stored reference is the *signal* value at the event time
and the OU state restarts at zero there (v_diff = 0 right after the
event). With ``reset_includes_noise`` the sampled noise is folded into
the reference instead and the OU process continues from the barrier.
Either way the remainder of the interval is resampled, so events stay
strictly ordered in time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .fpt import (
    BridgeQuery,
    OuParams,
    crossing_probability,
    ou_step_coeffs,
    sample_crossing_time,
)

ON = 1
OFF = -1

DEFAULT_A_DIFF = 20.0
MAX_RECURSION_DEPTH = 16


@dataclass(frozen=True)
class EventRecord:
    t: float          # seconds
    polarity: int     # ON (+1) or OFF (-1)


@dataclass
class ComparatorState:
    """Per-pixel comparator bookkeeping."""

    theta_on: float                 # threshold magnitudes, volts at v_diff
    theta_off: float
    a_diff: float = DEFAULT_A_DIFF
    refractory: float = 0.0         # seconds
    mode: str = "fpt"               # "naive" or "fpt"
    reset_includes_noise: bool = False
    v_ref: float = 0.0              # v_sf value stored at the last reset
    noise_state: float = 0.0        # current OU noise sample (fpt mode)
    last_event_t: float = -math.inf
    saturated: bool = False         # recursion depth cap was hit

    def __post_init__(self):
        if self.theta_on <= 0.0 or self.theta_off <= 0.0:
            raise ParameterError("thresholds must be > 0")
        if self.a_diff <= 0.0:
            raise ParameterError("a_diff must be > 0")
        if self.refractory < 0.0:
            raise ParameterError("refractory must be >= 0")
        if self.mode not in ("naive", "fpt"):
            raise ParameterError("mode must be 'naive' or 'fpt'")

    @property
    def b_on(self) -> float:
        """ON threshold referred to v_sf (volts)."""
        return self.theta_on / self.a_diff

    @property
    def b_off(self) -> float:
        return self.theta_off / self.a_diff


def efold_to_threshold(contrast_efolds: float, a_diff: float, kappa_sf: float,
                       u_t: float, kappa_fb: float) -> float:
    """Convert a log-intensity (e-fold) contrast to volts at v_diff."""
    return contrast_efolds * a_diff * kappa_sf * u_t / kappa_fb


def check_naive(state: ComparatorState, v_sf_prev: float, v_sf_now: float,
                t_prev: float, t_now: float) -> list[EventRecord]:
    """Endpoint threshold test; events are stamped at the step end."""
    if t_now <= t_prev:
        raise ParameterError("t_now must be > t_prev")
    if t_now < state.last_event_t + state.refractory:
        return []
    events: list[EventRecord] = []
    v_diff = state.a_diff * (v_sf_now - state.v_ref)
    if v_diff >= state.theta_on:
        events = [EventRecord(t=t_now, polarity=ON)] * int(v_diff / state.theta_on)
    elif v_diff <= -state.theta_off:
        events = [EventRecord(t=t_now, polarity=OFF)] * int(-v_diff / state.theta_off)
    if events:
        state.v_ref = v_sf_now
        state.last_event_t = t_now
    return events


def check_fpt(state: ComparatorState, v_sf_mean_prev: float,
              v_sf_mean_now: float, noise: OuParams, t_prev: float,
              t_now: float, rng: np.random.Generator) -> list[EventRecord]:
    """Bridge-trial event generation over one interval.

    ``v_sf_mean_*`` are the noise-free signal values at the interval
    ends. With sigma == 0 this degenerates to the naive endpoint rule
    on the same trace (identical events and timestamps).
    """
    if t_now <= t_prev:
        raise ParameterError("t_now must be > t_prev")
    if noise.sigma == 0.0:
        return check_naive(state, v_sf_mean_prev, v_sf_mean_now, t_prev, t_now)

    # Refractory: bridge trials are suppressed up to last_event_t +
    # refractory; the noise keeps evolving underneath.
    t_free = state.last_event_t + state.refractory
    if t_free >= t_now:
        state.noise_state = _propagate(state.noise_state, noise,
                                       t_now - t_prev, rng)
        return []
    if t_free > t_prev:
        state.noise_state = _propagate(state.noise_state, noise,
                                       t_free - t_prev, rng)
        frac = (t_free - t_prev) / (t_now - t_prev)
        v_sf_mean_prev = v_sf_mean_prev + frac * (v_sf_mean_now - v_sf_mean_prev)
        t_prev = t_free

    events: list[EventRecord] = []
    _fpt_interval(state, v_sf_mean_prev, v_sf_mean_now, noise, t_prev, t_now,
                  rng, events, depth=0, n0=state.noise_state)
    return events


def _propagate(n0: float, noise: OuParams, dt: float,
               rng: np.random.Generator) -> float:
    """Exact OU transition over dt."""
    if dt <= 0.0:
        return n0
    rho, s = ou_step_coeffs(noise, dt)
    return rho * n0 + s * rng.standard_normal()


def _fpt_interval(state: ComparatorState, mean0: float, mean1: float,
                  noise: OuParams, t0: float, t1: float,
                  rng: np.random.Generator, events: list[EventRecord],
                  depth: int, n0: float) -> None:
    """Run both Bernoulli trials on (t0, t1] starting from noise value n0."""
    dt = t1 - t0
    if dt <= 0.0:
        state.noise_state = n0
        return
    n1 = _propagate(n0, noise, dt, rng)
    if depth >= MAX_RECURSION_DEPTH:
        state.saturated = True
        state.noise_state = n1
        return

    p0 = mean0 + n0
    p1 = mean1 + n1
    lvl_on = state.v_ref + state.b_on
    lvl_off = state.v_ref - state.b_off

    hits: list[tuple[float, int]] = []
    # Upcrossing of the ON level; barrier distances d = level - process.
    q_on = BridgeQuery(x0=p0 - lvl_on, x1=p1 - lvl_on, dt=dt, barrier=0.0)
    p_cross = crossing_probability(q_on, noise)
    if p_cross > 0.0 and rng.random() < p_cross:
        hits.append((sample_crossing_time(q_on, noise, _unit_open(rng)), ON))
    # Downcrossing of the OFF level == upcrossing of -process over -level.
    q_off = BridgeQuery(x0=lvl_off - p0, x1=lvl_off - p1, dt=dt, barrier=0.0)
    p_cross = crossing_probability(q_off, noise)
    if p_cross > 0.0 and rng.random() < p_cross:
        hits.append((sample_crossing_time(q_off, noise, _unit_open(rng)), OFF))

    if not hits:
        state.noise_state = n1
        return

    # Earlier crossing wins; the other polarity's trial is discarded for
    # this sub-interval and gets a fresh chance in the remainder.
    t_rel, pol = min(hits)
    t_star = t0 + t_rel
    mean_star = mean0 + (t_rel / dt) * (mean1 - mean0)
    events.append(EventRecord(t=t_star, polarity=pol))
    state.last_event_t = t_star

    if state.reset_includes_noise:
        # Reference absorbs the sampled noise: v_sf at the event sits on
        # the barrier, and the OU process continues from there.
        level = lvl_on if pol == ON else lvl_off
        state.v_ref = level
        n_restart = level - mean_star
    else:
        state.v_ref = mean_star
        n_restart = 0.0

    t_resume = t_star + state.refractory
    if t_resume >= t1:
        state.noise_state = _propagate(n_restart, noise, t1 - t_star, rng)
        return
    if t_resume > t_star:
        n_restart = _propagate(n_restart, noise, state.refractory, rng)
        mean_resume = mean0 + ((t_resume - t0) / dt) * (mean1 - mean0)
    else:
        mean_resume = mean_star
    _fpt_interval(state, mean_resume, mean1, noise, t_resume, t1, rng, events,
                  depth + 1, n0=n_restart)


def _unit_open(rng: np.random.Generator) -> float:
    """Uniform draw strictly inside (0, 1)."""
    u = rng.random()
    while u <= 0.0:
        u = rng.random()
    return u
