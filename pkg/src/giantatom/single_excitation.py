"""Single-excitation dynamics of a giant atom with two coupling points.

The atom (frequency omega0) couples to the waveguide at two points separated
by the propagation delay T; each point decays at rate gamma. In the frame
rotating at omega0 the excitation amplitude obeys

    d e/dt = -gamma [e(t) + exp(i omega0 T) e(t - T)],   e(t < 0) = 0,

which is solved here by three independent routes: the finite series over
delay intervals, the Lambert-W mode sum and direct integration.
"""
from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy import optimize
from scipy.special import gammaln

from .errors import ConfigurationError, DomainError, RangeError
from .numerics import DelayHistory, choose_step, integrate_delay_ode, lambert_w

__all__ = [
    "SystemParams",
    "P_B",
    "P_C",
    "P_D",
    "ComplexMode",
    "ModeSum",
    "AmplitudeTrace",
    "EnergyLedger",
    "DarkSingularity",
    "effective_gamma",
    "spontaneous_series",
    "spontaneous_trace",
    "mode_frequencies",
    "default_mode_range",
    "mode_sum_amplitude",
    "atom_power_spectrum",
    "output_power_spectrum",
    "output_field",
    "driven_amplitude",
    "stored_energies",
    "reflectance_transmittance",
    "total_reflection_frequencies",
    "dark_state_amplitude",
]

_SNAP = 1e-12
_EPS = float(np.finfo(float).eps)


def _wrap_phase(x_pi: float) -> float:
    """Reduce a phase given in units of pi to [0, 2), snapping round-off."""
    d = math.fmod(x_pi, 2.0)
    if d < 0:
        d += 2.0
    r = round(d)
    if abs(d - r) <= _SNAP * max(1.0, abs(x_pi)):
        d = float(r)
    if d >= 2.0:
        d = 0.0
    return d


def _unit_phase(d_pi: float) -> complex:
    """exp(i pi d) with exact values on multiples of pi/2."""
    exact = {0.0: 1 + 0j, 0.5: 1j, 1.0: -1 + 0j, 1.5: -1j}
    if d_pi in exact:
        return exact[d_pi]
    return cmath.exp(1j * math.pi * d_pi)


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters of one giant atom.

    ``gamma`` is the decay rate of each coupling point, ``omega0`` the atomic
    frequency and ``delay_T`` the travel time between the two points.
    ``phase_pi`` optionally gives omega0*T/pi exactly, which avoids round-off
    in the loop phase for large omega0*T.
    """

    gamma: float
    omega0: float
    delay_T: float = 1.0
    phase_pi: Optional[float] = None
    residual_phase: float = field(init=False)
    loop_factor: complex = field(init=False, repr=False)

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma >= 0):
            raise ConfigurationError("gamma must be finite and non-negative")
        if not (math.isfinite(self.delay_T) and self.delay_T > 0):
            raise ConfigurationError("delay_T must be positive")
        if not math.isfinite(self.omega0):
            raise ConfigurationError("omega0 must be finite")
        x_pi = self.phase_pi if self.phase_pi is not None else self.omega0 * self.delay_T / math.pi
        d = _wrap_phase(x_pi)
        object.__setattr__(self, "residual_phase", d)
        object.__setattr__(self, "loop_factor", _unit_phase(d))
        if self.gamma > abs(self.omega0) / 10:
            warnings.warn("gamma > omega0/10: the rotating-wave approximation is questionable",
                          stacklevel=2)

    @classmethod
    def from_dimensionless(cls, gammaT: float, omega0T: float, delay_T: float = 1.0):
        return cls(gammaT / delay_T, omega0T / delay_T, delay_T)

    @classmethod
    def with_phase(cls, gammaT: float, omega0T_over_pi: float, delay_T: float = 1.0):
        """Parameters with omega0*T given in units of pi (exact loop phase)."""
        return cls(gammaT / delay_T, math.pi * omega0T_over_pi / delay_T, delay_T,
                   phase_pi=float(omega0T_over_pi))

    @property
    def gammaT(self) -> float:
        return self.gamma * self.delay_T

    @property
    def omega0T(self) -> float:
        return self.omega0 * self.delay_T

    @property
    def omega0T_over_pi(self) -> float:
        return self.phase_pi if self.phase_pi is not None else self.omega0T / math.pi

    def phase_at(self, omega):
        """exp(i omega T), computed from the detuning to keep precision."""
        x = (np.asarray(omega, dtype=float) - self.omega0) * self.delay_T
        return self.loop_factor * np.exp(1j * x)


with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    P_B = SystemParams.with_phase(0.045, 2.4)
    P_C = SystemParams.with_phase(1.0, 20.0)
    P_D = SystemParams.with_phase(37.5, 2000.0)


def effective_gamma(gamma0: float, N: int, phase: float) -> float:
    """Relaxation rate of N finger pairs with single-pair rate gamma0.

    gamma = gamma0 (1 - cos N phi)/(1 - cos phi), with the limit N^2 gamma0 at
    phi = 2 pi n.
    """
    if int(N) != N or N <= 0:
        raise DomainError("number of finger pairs must be a positive integer")
    s = math.sin(phase / 2.0)
    if abs(s) < 1e-8:
        return float(N * N * gamma0)
    return float(gamma0 * math.sin(N * phase / 2.0) ** 2 / (s * s))


# ---------------------------------------------------------------------------
# series route
# ---------------------------------------------------------------------------

def _series_rotating(params: SystemParams, t: np.ndarray) -> np.ndarray:
    T = params.delay_T
    g = params.gamma
    d = params.residual_phase
    out = np.zeros(t.shape, dtype=complex)
    if t.size == 0:
        return out
    n_max = int(math.floor(np.max(t) / T + 1e-12))
    for n in range(n_max + 1):
        x = t - n * T
        if n == 0:
            mask = x >= 0
            out[mask] += np.exp(-g * x[mask])
            continue
        mask = x > 0
        if g == 0 or not np.any(mask):
            continue
        xm = x[mask]
        logmag = n * np.log(g * xm) - gammaln(n + 1) - g * xm
        sign = -1.0 if n % 2 else 1.0
        out[mask] += sign * np.exp(logmag) * _unit_phase(_wrap_phase(n * d))
    return out


def spontaneous_series(params: SystemParams, t, e0: complex = 1.0, frame: str = "lab"):
    """Spontaneous-emission amplitude from the finite sum over delay intervals.

    Each term [-gamma(t-nT)]^n/n! exp(-gamma(t-nT)) is evaluated through its
    logarithm, so large n neither overflows nor underflows.

    Parameters
    ----------
    params : SystemParams
    t : float or array_like
        Times >= 0.
    e0 : complex
        Initial amplitude.
    frame : {"lab", "rotating"}
        "rotating" removes the factor exp(-i omega0 t).
    """
    tt = np.asarray(t, dtype=float)
    if np.any(tt < 0):
        raise DomainError("series solution requires t >= 0")
    flat = np.atleast_1d(tt).ravel()
    val = e0 * _series_rotating(params, flat)
    if frame == "lab":
        val = val * np.exp(-1j * params.omega0 * flat)
    elif frame != "rotating":
        raise ConfigurationError(f"unknown frame {frame!r}")
    val = val.reshape(tt.shape)
    return complex(val) if val.ndim == 0 else val


# ---------------------------------------------------------------------------
# amplitude traces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AmplitudeTrace:
    """Complex amplitude sampled on ``t = n * step``.

    ``values`` are stored in the frame rotating at ``frame_omega``
    (``frame_omega == 0`` is the lab frame). For driven traces ``loop_phase``
    is exp(i frame_omega T) and ``drive_amplitude`` is the incident field.
    """

    params: SystemParams
    step: float
    values: np.ndarray
    frame_omega: float
    loop_phase: complex
    deriv_right: Optional[np.ndarray] = field(default=None, repr=False)
    deriv_left: Optional[np.ndarray] = field(default=None, repr=False)
    drive_amplitude: complex = 0j

    @property
    def frame(self) -> str:
        return "lab" if self.frame_omega == 0 else "rotating"

    @property
    def times(self) -> np.ndarray:
        return self.step * np.arange(len(self.values))

    @property
    def horizon(self) -> float:
        return self.step * (len(self.values) - 1)

    @property
    def steps_per_delay(self) -> int:
        return int(round(self.params.delay_T / self.step))

    def lab(self) -> np.ndarray:
        return self.values * np.exp(-1j * self.frame_omega * self.times)

    def history(self) -> DelayHistory:
        return DelayHistory(self.step, self.values, self.params.delay_T,
                            self.deriv_right, self.deriv_left)

    def value_at(self, t):
        """Amplitude in the stored frame at arbitrary times (zero for t < 0)."""
        tt = np.asarray(t, dtype=float)
        if np.any(tt > self.horizon * (1 + 1e-12)):
            raise RangeError("time beyond the end of the trace")
        x = tt / self.step
        idx = np.rint(x).astype(int)
        on_grid = (np.abs(x - idx) < 1e-9) & (idx >= 0)
        out = np.asarray(self.history().value_at(tt), dtype=complex)
        if out.ndim == 0:
            return complex(self.values[idx]) if on_grid else complex(out)
        out[on_grid] = self.values[idx[on_grid]]
        return out


def _spontaneous_derivatives(params, values, n_lag):
    lag = np.zeros_like(values)
    if n_lag < len(values):
        lag[n_lag:] = values[: len(values) - n_lag]
    dr = -params.gamma * (values + params.loop_factor * lag)
    lag_left = lag.copy()
    if n_lag < len(values):
        lag_left[n_lag] = 0.0
    dl = -params.gamma * (values + params.loop_factor * lag_left)
    return dr, dl


def spontaneous_trace(params: SystemParams, horizon: float, step: Optional[float] = None,
                      e0: complex = 1.0, method: str = "series") -> AmplitudeTrace:
    """Spontaneous decay sampled on a grid, in the frame rotating at omega0.

    ``method`` is "series" (closed form) or "ode" (delay integrator).
    """
    T = params.delay_T
    if step is None:
        step = choose_step(T, params.gamma)
    n_lag = int(round(T / step))
    if abs(T / step - n_lag) > 1e-9 * n_lag:
        raise ConfigurationError("step must divide the delay")
    step = T / n_lag
    n = int(math.ceil(horizon / step - 1e-9))
    if method == "series":
        values = e0 * _series_rotating(params, step * np.arange(n + 1))
        dr, dl = _spontaneous_derivatives(params, values, n_lag)
    elif method == "ode":
        g, L = params.gamma, params.loop_factor
        hist = integrate_delay_ode(lambda t, y, yl, d, dl_: -g * (y + L * yl), T, step, n * step, e0)
        values, dr, dl = hist.samples, hist.deriv_right, hist.deriv_left
    else:
        raise ConfigurationError(f"unknown method {method!r}")
    return AmplitudeTrace(params, step, values, params.omega0, params.loop_factor, dr, dl)


# ---------------------------------------------------------------------------
# modes
# ---------------------------------------------------------------------------

class ComplexMode(NamedTuple):
    """One root of omega - omega0 + i gamma + i gamma exp(i omega T) = 0.

    ``index`` is the Lambert-W branch k in
    omega_k = omega0 - i gamma + (i/T) W_k(-gamma T exp(gamma T + i omega0 T)),
    with the argument of W taken in (-pi, pi]. ``detuning`` is
    omega_k - omega0 and ``branch`` repeats the index for clarity.
    """

    index: int
    omega_k: complex
    residue_weight: complex
    branch: int
    detuning: complex


class ModeSum(NamedTuple):
    value: complex
    n_modes: int


def default_mode_range(params: SystemParams):
    kk = int(math.ceil(5 * params.gammaT / math.pi)) + 5
    return -kk, kk


def _pole_residual(params, nu):
    return nu + 1j * params.gamma + 1j * params.gamma * params.loop_factor * cmath.exp(1j * nu * params.delay_T)


def mode_frequencies(params: SystemParams, k_min: int, k_max: int):
    """Complex mode frequencies for mode labels k_min..k_max.

    Each root comes from the Lambert-W solution and is polished by Newton
    iterations on the pole equation.
    """
    if k_min > k_max:
        raise ConfigurationError("k_min must not exceed k_max")
    g, T = params.gamma, params.delay_T
    gT = params.gammaT
    d = params.residual_phase
    if gT == 0:
        raise DomainError("modes need gamma > 0")
    r = gT * math.exp(gT)
    # -r exp(i pi d) = r exp(i pi (d - 1)), argument mapped into (-pi, pi]
    if d == 0.0:
        z = complex(-r, 0.0)
    elif d == 1.0:
        z = complex(r, 0.0)
    else:
        z = cmath.rect(r, (d - 1.0) * math.pi)
    L = params.loop_factor
    scale = g + 1.0 / T
    modes = []
    for k in range(k_min, k_max + 1):
        w = lambert_w(k, z)
        nu = -1j * g + 1j * w / T
        for _ in range(20):
            f = _pole_residual(params, nu)
            fp = 1.0 - gT * L * cmath.exp(1j * nu * T)
            dnu = f / fp
            nu -= dnu
            if abs(dnu) <= 1e-15 * (abs(nu) + scale):
                break
        if nu.imag > 0:
            nu = complex(nu.real, 0.0)
        res = abs(_pole_residual(params, nu)) / (abs(nu) + scale)
        # exp(i nu T) is only known to eps*|nu T| for very high modes
        if res > max(1e-12, 16 * _EPS * abs(nu) * T):
            raise DomainError(f"mode {k} failed to polish (residual {res:.2e})")
        weight = 1.0 / (1.0 - gT * L * cmath.exp(1j * nu * T))
        modes.append(ComplexMode(k, params.omega0 + nu, weight, k, nu))
    return modes


def mode_sum_amplitude(modes: Sequence[ComplexMode], t, e0: complex = 1.0,
                       frame: str = "lab") -> ModeSum:
    """Amplitude as the residue sum over the supplied modes.

    Truncation is the caller's choice; ``n_modes`` records it.
    """
    if not modes:
        raise ConfigurationError("mode list is empty")
    tt = np.asarray(t, dtype=float)
    key = "omega_k" if frame == "lab" else "detuning"
    if frame not in ("lab", "rotating"):
        raise ConfigurationError(f"unknown frame {frame!r}")
    acc = np.zeros(tt.shape, dtype=complex)
    for m in modes:
        acc = acc + m.residue_weight * np.exp(-1j * getattr(m, key) * tt)
    acc = e0 * acc
    return ModeSum(complex(acc) if acc.ndim == 0 else acc, len(modes))


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------

class DarkSingularity(NamedTuple):
    """Marker returned where the spectrum has the non-decaying dark pole."""

    omega: float
    residue_weight: complex


def _denominator(params, omega):
    omega = np.asarray(omega, dtype=float)
    return (omega - params.omega0) + 1j * params.gamma * (1.0 + params.phase_at(omega))


def _dark_weight(params):
    return 1.0 / (1.0 + params.gammaT)


def atom_power_spectrum(params: SystemParams, omega):
    """Atomic power spectrum omega0/|omega - omega0 + i gamma (1 + e^{i omega T})|^2.

    At the dark pole a DarkSingularity is returned for scalar input; array
    input gives a masked array with those points masked.
    """
    den = _denominator(params, omega)
    a = np.abs(den)
    sing = a <= 1e-14 * (params.gamma + 1.0 / params.delay_T)
    safe = np.where(sing, 1.0, a)
    val = params.omega0 / safe ** 2
    if np.ndim(val) == 0:
        if sing:
            return DarkSingularity(float(omega), _dark_weight(params))
        return float(val)
    if np.any(sing):
        return np.ma.masked_array(val, mask=sing)
    return val


def output_power_spectrum(params: SystemParams, omega):
    """Fluorescence spectrum gamma (1 + cos omega T)/|...|^2.

    Numerator and denominator vanish together at the dark pole; the finite
    limit gamma T^2 / (2 (1 + gamma T)^2) is returned there.
    """
    omega_arr = np.asarray(omega, dtype=float)
    den = _denominator(params, omega_arr)
    a = np.abs(den)
    num = params.gamma * (1.0 + params.phase_at(omega_arr).real)
    sing = a <= 1e-14 * (params.gamma + 1.0 / params.delay_T)
    limit = params.gamma * params.delay_T ** 2 / (2.0 * (1.0 + params.gammaT) ** 2)
    val = np.where(sing, limit, num / np.where(sing, 1.0, a) ** 2)
    return float(val) if val.ndim == 0 else val


def output_field(trace: AmplitudeTrace, t):
    """Field emitted into each leg, -i sqrt(gamma/2) [e(t) + e(t - T)].

    Returned in the frame of the trace; the lagged amplitude carries the loop
    phase of that frame. For a driven trace this is the scattered part only.
    """
    T = trace.params.delay_T
    tt = np.asarray(t, dtype=float)
    if np.any(tt > trace.horizon * (1 + 1e-12)) or np.any(tt < 0):
        raise RangeError("output field requested outside the trace")
    v = math.sqrt(trace.params.gamma / 2.0)
    e_now = trace.value_at(tt)
    e_lag = trace.value_at(tt - T)
    return -1j * v * (e_now + trace.loop_phase * e_lag)


# ---------------------------------------------------------------------------
# driven dynamics
# ---------------------------------------------------------------------------

def driven_amplitude(params: SystemParams, drive_amplitude: complex = 0.0,
                     omega_d: Optional[float] = None, horizon: float = 10.0,
                     rabi: float = 0.0, step: Optional[float] = None,
                     e0: complex = 0.0) -> AmplitudeTrace:
    """Amplitude under a coherent drive, in the frame rotating at omega_d.

    ``drive_amplitude`` is the field A of a wave A exp(-i omega_d t)
    incident on leg A; it reaches the atom through both coupling points.
    ``rabi`` adds a direct (gate) drive (rabi/2)(sigma_+ + sigma_-), treated
    in the linear single-excitation limit.
    """
    if horizon <= 0:
        raise ConfigurationError("horizon must be positive")
    if omega_d is None:
        omega_d = params.omega0
    T = params.delay_T
    g = params.gamma
    delta = omega_d - params.omega0
    eiphi = complex(params.phase_at(omega_d))
    v = math.sqrt(g / 2.0)
    gate = -0.5j * rabi
    if step is None:
        step = choose_step(T, max(g, abs(delta)))

    def rhs(t, y, y_lag, d, d_lag):
        return 1j * delta * y - g * (y + eiphi * y_lag) - 1j * v * (d + eiphi * d_lag) + gate

    A = complex(drive_amplitude)
    hist = integrate_delay_ode(rhs, T, step, horizon, e0, drive=lambda t: A)
    return AmplitudeTrace(params, hist.grid_step, hist.samples, float(omega_d), eiphi,
                          hist.deriv_right, hist.deriv_left, A)


# ---------------------------------------------------------------------------
# energies
# ---------------------------------------------------------------------------

class EnergyLedger(NamedTuple):
    """Energies in units of hbar*omega0.

    ``E_P`` phonon energy between the legs, ``E_T = E_P + |e|^2`` on the
    trace grid ``times``; ``pulse_energies[m]`` is the energy leaving through
    one leg during [mT, (m+1)T).
    """

    times: np.ndarray
    E_P: np.ndarray
    E_T: np.ndarray
    pulse_energies: np.ndarray


_GL_X, _GL_W = np.polynomial.legendre.leggauss(5)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def _hermite_nodes(values, dr, dl, h):
    """Cubic Hermite interpolant of every grid step at the Gauss nodes."""
    s = _GL_X[None, :]
    y0, y1 = values[:-1, None], values[1:, None]
    d0, d1 = h * dr[:-1, None], h * dl[1:, None]
    s2, s3 = s * s, s * s * s
    return ((2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * d0
            + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * d1)


def _overlap_EP(trace, n_lag):
    # coherent sum of the two counter-propagating packets (lab-frame phases)
    p = trace.params
    T, h = p.delay_T, trace.step
    n_sub = max(1, int(math.ceil(abs(p.omega0) * h / (math.pi / 8))))
    out = np.zeros(len(trace.values))
    for n in range(len(trace.values)):
        t = n * h
        if t <= 0:
            continue
        # tau runs over the whole segment; a packet is absent where its source time is negative
        edges = np.linspace(0.0, T, n_sub * n_lag + 1)
        tau = (edges[:-1, None] + (edges[1:] - edges[:-1])[:, None] * _GL_X[None, :]).ravel()
        wts = ((edges[1:] - edges[:-1])[:, None] * _GL_W[None, :]).ravel()
        s1 = t - tau
        s2 = t - T + tau
        e1 = trace.value_at(np.maximum(s1, 0.0)) * np.exp(-1j * p.omega0 * s1)
        e1 = np.where(s1 >= 0, e1, 0.0)
        e2 = trace.value_at(np.maximum(s2, 0.0)) * np.exp(-1j * p.omega0 * s2)
        e2 = np.where(s2 >= 0, e2, 0.0)
        out[n] = 0.5 * p.gamma * np.sum(wts * np.abs(e1 + e2) ** 2)
    return out


def stored_energies(trace: AmplitudeTrace, overlap: bool = False) -> EnergyLedger:
    """Phonon, total and pulse energies of a spontaneous-decay trace.

    By default the phonon energy is gamma * integral_0^T |e(t - tau)|^2 dtau,
    the two counter-propagating packets counted separately; with this choice
    E_T decreases exactly as gamma |e(t) + e(t - T)|^2. ``overlap=True``
    adds the interference between the two packets with full lab-frame
    phases.
    """
    if trace.drive_amplitude != 0:
        raise DomainError("energy bookkeeping is defined for undriven traces")
    p = trace.params
    n_lag = trace.steps_per_delay
    if len(trace.values) - 1 < n_lag:
        raise RangeError("trace is shorter than one delay")
    h = trace.step
    vals = trace.values
    dr, dl = trace.deriv_right, trace.deriv_left
    if dr is None:
        dr, dl = _spontaneous_derivatives(p, vals, n_lag)
    nodes = _hermite_nodes(vals, dr, dl, h)
    q = h * np.sum(_GL_W[None, :] * np.abs(nodes) ** 2, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(q)])
    idx = np.arange(len(vals))
    if overlap:
        EP = _overlap_EP(trace, n_lag)
    else:
        EP = p.gamma * (cum[idx] - cum[np.maximum(idx - n_lag, 0)])
    ET = EP + np.abs(vals) ** 2

    # emitted field per step: e(t) + L e(t - T), both Hermite on their steps
    lag_nodes = np.zeros_like(nodes)
    lag_nodes[n_lag:] = nodes[: len(nodes) - n_lag]
    field_sq = np.abs(nodes + trace.loop_phase * lag_nodes) ** 2
    qo = 0.5 * p.gamma * h * np.sum(_GL_W[None, :] * field_sq, axis=1)
    n_win = len(qo) // n_lag
    pulses = qo[: n_win * n_lag].reshape(n_win, n_lag).sum(axis=1)
    return EnergyLedger(trace.times, EP, ET, pulses)


# ---------------------------------------------------------------------------
# reflection
# ---------------------------------------------------------------------------

def reflectance_transmittance(params: SystemParams, omega_d):
    """Long-time reflectance and transmittance of a weak coherent drive."""
    omega_d = np.asarray(omega_d, dtype=float)
    ph = params.phase_at(omega_d)
    c, s = ph.real, ph.imag
    g = params.gamma
    num = (g * (1.0 + c)) ** 2
    den = (omega_d - params.omega0 - g * s) ** 2 + num
    zero = den <= 0
    R = np.where(zero, 0.0, num / np.where(zero, 1.0, den))
    Tt = 1.0 - R
    if R.ndim == 0:
        return float(R), float(Tt)
    return R, Tt


def total_reflection_frequencies(params: SystemParams, bracket=None):
    """All solutions of omega_d = omega0 + gamma sin(omega_d T) in ``bracket``.

    Sign changes are located on a grid of spacing 2 pi/(50 T) anchored at
    omega0 and refined with Brent's method.
    """
    g, T, w0 = params.gamma, params.delay_T, params.omega0
    if bracket is None:
        pad = 1.5 * g + 2 * math.pi / T
        bracket = (w0 - pad, w0 + pad)
    lo, hi = float(bracket[0]) - w0, float(bracket[1]) - w0
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
        raise ConfigurationError("bracket must be a finite interval")
    L = params.loop_factor

    def f(x):
        return x - g * (L * cmath.exp(1j * x * T)).imag

    dx = 2 * math.pi / (50 * T)
    j0, j1 = math.ceil(lo / dx), math.floor(hi / dx)
    grid = sorted(set([lo, hi] + [j * dx for j in range(j0, j1 + 1)]))
    xtol = max(1e-12 * abs(w0), 1e-15)
    roots = []
    fv = [f(x) for x in grid]
    for i, (a, b) in enumerate(zip(grid[:-1], grid[1:])):
        fa, fb = fv[i], fv[i + 1]
        if fa == 0.0:
            roots.append(a)
        elif fa * fb < 0:
            roots.append(optimize.brentq(f, a, b, xtol=xtol, rtol=1e-15))
    if fv[-1] == 0.0:
        roots.append(grid[-1])
    return [w0 + x for x in roots]


def dark_state_amplitude(params: SystemParams) -> float:
    """Magnitude of the trapped amplitude, 1/(1 + gamma T), for a dark atom."""
    x = params.omega0T_over_pi
    n = round(x)
    if n % 2 != 1 or abs(x - n) > 1e-9 * max(1.0, abs(x)):
        raise DomainError("no dark mode: omega0 T is not an odd multiple of pi")
    return 1.0 / (1.0 + params.gammaT)
