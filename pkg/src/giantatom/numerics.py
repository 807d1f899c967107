"""Numerical kernels shared by the physics modules.

* ``lambert_w``: all branches of the Lambert W function (Halley iteration).
* ``integrate_delay_ode``: fixed-step RK4 for a complex delay equation with a
  single constant delay, solved one delay interval at a time.
* ``segmented_quad``: adaptive quadrature split at known peak positions.
"""
from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .errors import ConfigurationError, DomainError, IntegrationError, IterationError

__all__ = [
    "lambert_w",
    "DelayHistory",
    "integrate_delay_ode",
    "choose_step",
    "segmented_quad",
    "expm1_ratio",
    "sinc",
]

_EXPN1 = math.exp(-1.0)
_EPS = float(np.finfo(float).eps)
_TWO_PI_I = 2j * math.pi


# ---------------------------------------------------------------------------
# Lambert W
# ---------------------------------------------------------------------------

def _seed_branch_point(z, sign=1.0):
    # expansion of W around z = -1/e, p -> sign * p picks the neighbouring sheet
    p = sign * cmath.sqrt(2.0 * (math.e * z + 1.0))
    return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3 - 43.0 / 540.0 * p ** 4


def _seed_pade0(z):
    num = 12.85106382978723404255 * z * z + 12.34042553191489361902 * z + 1.0
    den = 32.53191489361702127660 * z * z + 14.34042553191489361702 * z + 1.0
    return z * num / den


def _seed_asymptotic(z, k):
    a = cmath.log(z) + _TWO_PI_I * k
    b = cmath.log(a)
    return a - b + b / a


def _seed(k, z):
    near_bp = abs(z + _EXPN1) < 0.3
    if k == 0:
        if near_bp:
            return _seed_branch_point(z)
        if -1.0 < z.real < 1.5 and abs(z.imag) < 1.0 and -2.5 * abs(z.imag) - 0.2 < z.real:
            return _seed_pade0(z)
        return _seed_asymptotic(z, k)
    # the -1 sheet meets the principal one at -1/e from the upper side of the
    # cut (real axis included), the +1 sheet from the lower side
    if near_bp and ((k == -1 and z.imag >= 0.0) or (k == 1 and z.imag < 0.0)):
        return _seed_branch_point(z, -1.0)
    if k == -1 and z.imag == 0.0 and -_EXPN1 <= z.real < 0.0:
        return cmath.log(-z.real)
    return _seed_asymptotic(z, k)


def _lambert_w_scalar(k: int, z: complex, tol: float, max_iter: int) -> complex:
    if z == 0:
        if k == 0:
            return 0j
        raise DomainError(f"W_{k}(0) is not finite")
    if z == -_EXPN1 and k in (0, -1):
        return complex(-1.0, 0.0)
    if z.imag == 0.0:
        # normalise -0.0 so points on the cut belong to the upper side
        z = complex(z.real, 0.0)

    w = _seed(k, z)
    scale = max(abs(z), 1.0)
    best, best_res = w, math.inf
    for _ in range(max_iter):
        ew = cmath.exp(w)
        res = abs(w * ew - z) / scale
        if res < best_res:
            best, best_res = w, res
        if res <= 4e-16:
            break
        # Halley step on f(w) = w - z exp(-w), i.e. (w e^w - z) e^{-w}
        f = w - z / ew
        wp1 = w + 1.0
        if wp1 == 0:
            w = w + 1e-8
            continue
        dw = f / (wp1 - (w + 2.0) * f / (2.0 * wp1))
        w = w - dw
        if not (math.isfinite(w.real) and math.isfinite(w.imag)):
            raise IterationError(f"Lambert W iteration diverged (branch {k}, z={z})", last=w)
        if abs(dw) <= tol * (1.0 + abs(w)):
            res = abs(w * cmath.exp(w) - z) / scale
            if res < best_res:
                best, best_res = w, res
            break
    w = best
    # w itself carries a rounding error of about eps*|w|, which bounds the
    # attainable residual once |w| is in the hundreds (very high branches)
    if best_res > max(1e-12, 16 * _EPS * abs(w)):
        raise IterationError(
            f"Lambert W did not converge (branch {k}, z={z}, residual {best_res:.3e})", last=w
        )
    return w


def lambert_w(branch: int, z, tol: float = 1e-15, max_iter: int = 100):
    """Branch ``branch`` of the Lambert W function.

    Standard branch convention: branch 0 is principal, the cut of every
    branch lies along the negative real axis and points on the cut belong to
    the upper side (counter-clockwise continuity). ``W_k(conj z) =
    conj W_{-k}(z)`` off the cut.

    Parameters
    ----------
    branch : int
    z : complex or array_like
    tol : float
        Relative size of the final Halley correction.

    Returns
    -------
    complex or ndarray of complex
        ``w`` with ``w*exp(w) == z`` to relative residual below 1e-12.
    """
    k = int(branch)
    if np.ndim(z) == 0:
        return _lambert_w_scalar(k, complex(z), tol, max_iter)
    zz = np.asarray(z, dtype=complex)
    out = np.empty(zz.shape, dtype=complex)
    for idx, val in np.ndenumerate(zz):
        out[idx] = _lambert_w_scalar(k, complex(val), tol, max_iter)
    return out


# ---------------------------------------------------------------------------
# Delay ODE
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DelayHistory:
    """Trajectory of a delay equation on the grid ``t = n * grid_step``.

    Values at negative times are zero. ``deriv_right[n]`` and
    ``deriv_left[n]`` are the one-sided derivatives at grid point n; they only
    differ where the delayed argument crosses a discontinuity.
    """

    grid_step: float
    samples: np.ndarray
    delay: float
    deriv_right: Optional[np.ndarray] = field(default=None, repr=False)
    deriv_left: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def steps_per_delay(self) -> int:
        return int(round(self.delay / self.grid_step))

    @property
    def times(self) -> np.ndarray:
        return self.grid_step * np.arange(len(self.samples))

    @property
    def horizon(self) -> float:
        return self.grid_step * (len(self.samples) - 1)

    def value_at(self, t):
        """Cubic Hermite interpolation of the trajectory (zero for t < 0)."""
        t = np.asarray(t, dtype=float)
        h = self.grid_step
        y = self.samples
        n_max = len(y) - 1
        if np.any(t > self.horizon * (1 + 1e-12) + 1e-300):
            raise IndexError("time beyond the stored history")
        x = t / h
        j = np.clip(np.floor(x).astype(int), 0, max(n_max - 1, 0))
        s = x - j
        out = np.zeros(t.shape, dtype=complex)
        ok = t >= 0
        if n_max == 0:
            out[ok] = y[0]
            return out if out.ndim else complex(out)
        if self.deriv_right is None:
            y0, y1 = y[j], y[j + 1]
            val = (1 - s) * y0 + s * y1
        else:
            y0, y1 = y[j], y[j + 1]
            d0, d1 = h * self.deriv_right[j], h * self.deriv_left[j + 1]
            s2, s3 = s * s, s * s * s
            val = ((2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * d0
                   + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * d1)
        out[ok] = val[ok] if np.ndim(val) else val
        return out if out.ndim else complex(out)


def choose_step(delay: float, rate: float, base: int = 1024, max_rate_step: float = 0.02) -> float:
    """Grid step ``delay/N`` with N = base * 2**j and ``step * rate <= max_rate_step``."""
    if delay <= 0:
        raise ConfigurationError("delay must be positive")
    n = int(base)
    while rate > 0 and delay / n * rate > max_rate_step:
        n *= 2
    return delay / n


def integrate_delay_ode(
    rhs: Callable[[float, complex, complex, complex, complex], complex],
    delay: float,
    step: float,
    horizon: float,
    initial: complex,
    drive: Optional[Callable[[float], complex]] = None,
) -> DelayHistory:
    """Integrate ``y'(t) = rhs(t, y(t), y(t-T), d(t), d(t-T))`` with ``y(t<0)=0``.

    Classical RK4 with a fixed step that divides the delay. The delayed value
    needed at a half step is the cubic Hermite interpolant on the matching
    interval of the already completed segment, so the scheme stays fourth
    order. Discontinuities of y' at multiples of the delay fall on grid
    points.

    Parameters
    ----------
    rhs : callable
    delay : float
    step : float
        Must divide ``delay`` exactly.
    horizon : float
        Final time; rounded up to the grid.
    initial : complex
        ``y(0)``.
    drive : callable, optional
        External signal ``d(t)``; defined for all real t.

    Returns
    -------
    DelayHistory
    """
    if step <= 0 or delay <= 0:
        raise ConfigurationError("step and delay must be positive")
    if horizon < 0:
        raise ConfigurationError("horizon must be non-negative")
    ratio = delay / step
    n_lag = int(round(ratio))
    if n_lag < 1 or abs(ratio - n_lag) > 1e-9 * ratio:
        raise ConfigurationError(f"step {step!r} does not divide the delay {delay!r}")
    h = delay / n_lag
    n_steps = int(math.ceil(horizon / h - 1e-9))

    if drive is None:
        def drive(_t):
            return 0j

    y = np.zeros(n_steps + 1, dtype=complex)
    dr = np.zeros(n_steps + 1, dtype=complex)
    dl = np.zeros(n_steps + 1, dtype=complex)
    y[0] = initial

    def lagged(m, c):
        # value on interval m of the past segment at fraction c in [0, 1]
        if m < 0:
            return 0j
        if c == 0.0:
            return complex(y[m])
        if c == 1.0:
            return complex(y[m + 1])
        y0, y1 = y[m], y[m + 1]
        return complex(0.5 * (y0 + y1) + 0.125 * h * (dr[m] - dl[m + 1]))

    yn = complex(initial)
    for n in range(n_steps):
        t = n * h
        m = n - n_lag
        th = t + 0.5 * h
        t1 = t + h
        lag0, lagh, lag1 = lagged(m, 0.0), lagged(m, 0.5), lagged(m, 1.0)
        d0, dh, d1 = drive(t), drive(th), drive(t1)
        d0l, dhl, d1l = drive(t - delay), drive(th - delay), drive(t1 - delay)
        k1 = rhs(t, yn, lag0, d0, d0l)
        k2 = rhs(th, yn + 0.5 * h * k1, lagh, dh, dhl)
        k3 = rhs(th, yn + 0.5 * h * k2, lagh, dh, dhl)
        k4 = rhs(t1, yn + h * k3, lag1, d1, d1l)
        dr[n] = k1
        yn = yn + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        y[n + 1] = yn
        dl[n + 1] = rhs(t1, yn, lag1, d1, d1l)
    if n_steps >= 0:
        t = n_steps * h
        m = n_steps - n_lag
        dr[n_steps] = rhs(t, yn, lagged(m, 0.0), drive(t), drive(t - delay))
    dl[0] = dr[0]
    return DelayHistory(grid_step=h, samples=y, delay=delay, deriv_right=dr, deriv_left=dl)


# ---------------------------------------------------------------------------
# Small analytic helpers
# ---------------------------------------------------------------------------

def expm1_ratio(z):
    """(exp(z) - 1)/z with the removable point handled by its Taylor series."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-7
    safe = np.where(small, 1.0, z)
    out = np.where(small, 1.0 + z / 2.0 + z * z / 6.0, np.expm1(safe) / safe)
    return out if out.ndim else complex(out)


def sinc(z):
    """sin(z)/z for complex z (unnormalised)."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-4
    safe = np.where(small, 1.0, z)
    z2 = z * z
    out = np.where(small, 1.0 - z2 / 6.0 + z2 * z2 / 120.0, np.sin(safe) / safe)
    return out if out.ndim else complex(out)


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

def segmented_quad(
    f: Callable[[float], float],
    edges: Sequence[float],
    epsabs: float = 1e-12,
    epsrel: float = 1e-10,
    limit: int = 200,
    strict: bool = True,
):
    """Sum of adaptive Gauss-Kronrod integrals over consecutive ``edges``.

    Returns ``(value, error_estimate)``. With ``strict`` an error estimate
    above ``max(epsabs, epsrel*|value|)`` times 100 raises IntegrationError.
    """
    edges = np.unique(np.asarray(edges, dtype=float))
    total = 0.0
    err = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        with warnings.catch_warnings():
            # the error estimate is checked below
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, e = integrate.quad(f, a, b, epsabs=epsabs / max(len(edges) - 1, 1),
                                    epsrel=epsrel, limit=limit)
        total += val
        err += e
    if strict and err > 100 * max(epsabs, epsrel * abs(total)):
        raise IntegrationError(f"quadrature error estimate {err:.3e} exceeds tolerance")
    return total, err
