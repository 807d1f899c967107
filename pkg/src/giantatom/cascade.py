"""Arbitrary-drive dynamics through the fictitious-cascade mapping.

To reach physical time t in ((k-1)T, kT] the atom is replaced by k copies
evolving in an auxiliary time s in [0, T]; copy l stands for the physical
interval [(l-1)T, lT) and feeds its output into copy l+1. The last copy is
switched off at s = t - (k-1)T. The true atomic state is recovered by the
generalized partial trace, which splices the final state of copy l onto the
initial state of copy l+1.

Density matrices are vectorized row-major, so vec(A rho B) = (A kron B^T)
vec(rho). Copy 1 is the most significant tensor factor and the single-copy
basis is (|g>, |e>).
"""
from __future__ import annotations

import cmath
import math
import string
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import expm_multiply

from .errors import (CapacityError, ConfigurationError, ConsistencyError, DomainError,
                     IntegrationError)
from .single_excitation import SystemParams, _unit_phase, _wrap_phase

__all__ = [
    "ChainSpec",
    "SuperPropagator",
    "ReducedState",
    "OutputObservables",
    "build_chain",
    "propagate",
    "reduced_state",
    "output_observables",
    "delayed_g2",
    "markov_benchmark",
    "population_trace",
    "GROUND",
    "EXCITED",
    "DEFAULT_MAX_K",
]

DEFAULT_MAX_K = 6

GROUND = np.array([[1, 0], [0, 0]], dtype=complex)
EXCITED = np.array([[0, 0], [0, 1]], dtype=complex)

_SM = sparse.csr_matrix(np.array([[0, 1], [0, 0]], dtype=complex))   # |g><e|
_PE = sparse.csr_matrix(np.array([[0, 0], [0, 1]], dtype=complex))
_SX = sparse.csr_matrix(np.array([[0, 1], [1, 0]], dtype=complex))


def _on_copy(op, l: int, k: int):
    """Embed a single-copy operator on copy l (1-based) of k."""
    left = sparse.identity(2 ** (l - 1), dtype=complex, format="csr")
    right = sparse.identity(2 ** (k - l), dtype=complex, format="csr")
    return sparse.kron(sparse.kron(left, op), right, format="csr")


@dataclass(frozen=True)
class ChainSpec:
    """k-copy cascade for reaching physical time ``t``.

    ``switch_off[l-1]`` is the auxiliary time after which copy l is frozen;
    it is T for every copy except those reaching past ``t``. ``H_links`` and
    ``L_links`` hold H_{l,l+1} and L_{l,l+1} for l = 0..k with all copies
    switched on.
    """

    k: int
    gamma: float
    delay_T: float
    delta: float
    Omega: float
    phi_pi: float
    t: float
    switch_off: Tuple[float, ...]
    H_links: Tuple = field(repr=False, compare=False)
    L_links: Tuple = field(repr=False, compare=False)

    @property
    def phi(self) -> float:
        return math.pi * self.phi_pi

    @property
    def dim(self) -> int:
        return 4 ** self.k

    def active_at(self, s: float) -> Tuple[bool, ...]:
        """Copies switched on at auxiliary time s (Theta(0) = 1)."""
        return tuple(s <= so for so in self.switch_off)

    def link_operators(self, active: Sequence[bool]):
        """(H_links, L_links) with the operators of inactive copies set to zero."""
        return _links(self.k, self.gamma, self.delta, self.Omega, self.phi_pi, tuple(active))


def _links(k, gamma, delta, Omega, phi_pi, active):
    n = 2 ** k
    zero = sparse.csr_matrix((n, n), dtype=complex)
    e_m = _unit_phase(2.0 - phi_pi if phi_pi else 0.0)     # exp(-i phi)
    sg = math.sqrt(gamma)
    sm = [None] + [(_on_copy(_SM, l, k) if active[l - 1] else zero) for l in range(1, k + 1)]
    # rotating frame at omega_d: the atom sits at -delta
    HS = [None] + [(-delta * _on_copy(_PE, l, k) + 0.5 * Omega * _on_copy(_SX, l, k))
                   if active[l - 1] else zero for l in range(1, k + 1)]
    H = [HS[1]]
    L = [sg * e_m * sm[1]]
    for l in range(1, k):
        hop = 1j * gamma * (e_m * sm[l].getH() @ sm[l + 1] - e_m.conjugate() * sm[l + 1].getH() @ sm[l])
        H.append(HS[l] + HS[l + 1] + hop)
        L.append(sg * (sm[l] + e_m * sm[l + 1]))
    H.append(HS[k])
    L.append(sg * sm[k])
    return tuple(H), tuple(L)


def build_chain(params: SystemParams, delta: float, Omega: float, phi: Optional[float],
                t: float, k: Optional[int] = None, max_k: int = DEFAULT_MAX_K,
                phi_pi: Optional[float] = None) -> ChainSpec:
    """Cascade with k = ceil(t/T) copies (at least 1).

    The feedback phase is ``phi`` in radians, or ``phi_pi`` = phi/pi for an
    exact value; with both None it is omega_d*T from ``params``. A larger
    ``k`` may be requested: copies beyond t are then switched off throughout.
    """
    if not (math.isfinite(t) and t >= 0):
        raise ConfigurationError("t must be finite and non-negative")
    if not (math.isfinite(Omega) and Omega >= 0):
        raise ConfigurationError("Omega must be finite and non-negative")
    if params.gamma <= 0:
        raise ConfigurationError("the cascade needs gamma > 0")
    T = params.delay_T
    need = max(1, math.ceil(t / T - 1e-12))
    if k is None:
        k = need
    if k < need:
        raise ConfigurationError(f"k = {k} copies cannot reach t = {t} (need {need})")
    if k > max_k:
        raise CapacityError(f"k = {k} copies exceeds the configured maximum {max_k} "
                            f"(dimension 4^{k} = {4 ** k})")
    if phi_pi is None:
        if phi is None:
            phi_pi = _wrap_phase(params.residual_phase + delta * T / math.pi)
        else:
            phi_pi = _wrap_phase(phi / math.pi)
    else:
        phi_pi = _wrap_phase(phi_pi)
    switch = tuple(float(min(T, max(0.0, t - (l - 1) * T))) for l in range(1, k + 1))
    H, L = _links(k, params.gamma, float(delta), float(Omega), phi_pi, (True,) * k)
    return ChainSpec(k, params.gamma, T, float(delta), float(Omega), phi_pi, float(t),
                     switch, H, L)


# ---------------------------------------------------------------------------
# Generators and propagation
# ---------------------------------------------------------------------------

def _liouvillian(H_links, L_links):
    n = H_links[0].shape[0]
    eye = sparse.identity(n, dtype=complex, format="csr")
    # each H_S appears in two links, hence the factor 1/2
    H = 0.5 * sum(H_links[1:], H_links[0])
    G = -1j * (sparse.kron(H, eye) - sparse.kron(eye, H.T))
    for L in L_links:
        LdL = (L.getH() @ L)
        G = G + sparse.kron(L, L.conj()) - 0.5 * sparse.kron(LdL, eye) - 0.5 * sparse.kron(eye, LdL.T)
    return G.tocsr()


class _Insertion(NamedTuple):
    s: float
    t: float
    left: object        # operator multiplying from the left, or None
    right: object       # operator multiplying from the right (already daggered), or None


@dataclass
class SuperPropagator:
    """E_T(t) of a chain, applied lazily to blocks of vectorized states.

    ``method`` is 'expm' (Krylov-free truncated Taylor action of the exact
    exponential, per piecewise-constant segment) or 'rk4' with fixed step.
    """

    chain: ChainSpec
    method: str = "expm"
    step: Optional[float] = None
    s_end: float = None
    _cache: Dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.method not in ("expm", "rk4"):
            raise ConfigurationError(f"unknown propagation method {self.method!r}")
        if self.s_end is None:
            self.s_end = self.chain.delay_T
        if self.step is None:
            self.step = self.chain.delay_T / 2000.0

    @property
    def dimension(self) -> int:
        return self.chain.dim

    def generator(self, active: Tuple[bool, ...]):
        if active not in self._cache:
            H, L = self.chain.link_operators(active)
            self._cache[active] = _liouvillian(H, L)
        return self._cache[active]

    def _advance(self, G, X, ds):
        if ds <= 0:
            return X
        if self.method == "expm":
            out = expm_multiply(G * ds, X)
        else:
            n = max(1, int(math.ceil(ds / self.step - 1e-9)))
            h = ds / n
            out = X
            for _ in range(n):
                k1 = G @ out
                k2 = G @ (out + 0.5 * h * k1)
                k3 = G @ (out + 0.5 * h * k2)
                k4 = G @ (out + h * k3)
                out = out + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(out)):
            raise IntegrationError("non-finite values during cascade propagation")
        return out

    def apply(self, X: np.ndarray, insertions: Sequence[_Insertion] = ()) -> np.ndarray:
        """E_T(s_end) X with optional jump insertions, ordered by (s, t)."""
        chain = self.chain
        ins = sorted(insertions, key=lambda r: (r.s, r.t))
        marks = sorted({0.0, self.s_end, *[so for so in chain.switch_off if 0 < so < self.s_end],
                        *[r.s for r in ins]})
        n = 2 ** chain.k
        Y = np.array(X, dtype=complex, copy=True)
        m = Y.shape[1]
        pos = 0
        for a, b in zip(marks[:-1], marks[1:]):
            while pos < len(ins) and ins[pos].s <= a:
                Y = _insert(Y, ins[pos], n, m)
                pos += 1
            active = tuple(b <= so for so in chain.switch_off)
            Y = self._advance(self.generator(active), Y, b - a)
        while pos < len(ins):
            if ins[pos].s > self.s_end:
                raise ConsistencyError("insertion beyond the propagated auxiliary time")
            Y = _insert(Y, ins[pos], n, m)
            pos += 1
        return Y

    def matrix(self) -> np.ndarray:
        """Dense 4^k x 4^k matrix (small k only)."""
        if self.chain.k > 4:
            raise CapacityError("dense superoperator only built for k <= 4")
        return self.apply(np.eye(self.chain.dim, dtype=complex))


def _insert(Y, ins: _Insertion, n: int, m: int):
    R = Y.reshape(n, n, m)
    if ins.left is not None:
        R = np.einsum("ab,bcm->acm", ins.left.toarray(), R, optimize=True)
    if ins.right is not None:
        R = np.einsum("abm,bc->acm", R, ins.right.toarray(), optimize=True)
    return R.reshape(n * n, m)


def propagate(chain: ChainSpec, method: str = "expm", step: Optional[float] = None) -> SuperPropagator:
    """Propagator E_T(t) of the cascade, from s = 0 to s = T."""
    return SuperPropagator(chain, method, step)


# ---------------------------------------------------------------------------
# Generalized trace
# ---------------------------------------------------------------------------

def _input_block(initial: np.ndarray, k: int) -> np.ndarray:
    """Columns vec(rho0 kron |i><j|) over the basis of copies 2..k."""
    m = 2 ** (k - 1)
    eye = np.eye(m, dtype=complex)
    X = np.einsum("ab,ik,jl->aibjkl", initial, eye, eye)
    return X.reshape(4 ** k, m * m)


def _generalized_trace(Y: np.ndarray, k: int) -> np.ndarray:
    """Splice output of copy l onto input of copy l+1, innermost pair first."""
    if k == 1:
        return Y.reshape(2, 2)
    letters = string.ascii_letters
    A = letters[:k]
    B = letters[k:2 * k]
    spec = A + B + A[:-1] + B[:-1] + "->" + A[-1] + B[-1]
    R = Y.reshape((2,) * (4 * k - 2))
    return np.einsum(spec, R)


def _check_initial(initial) -> np.ndarray:
    rho = np.asarray(initial, dtype=complex)
    if rho.shape != (2, 2):
        raise ConfigurationError("initial state must be a 2x2 density matrix")
    if abs(np.trace(rho) - 1) > 1e-12 or np.max(np.abs(rho - rho.conj().T)) > 1e-12:
        raise ConfigurationError("initial state must be Hermitian with unit trace")
    return rho


@dataclass(frozen=True)
class ReducedState:
    """Atomic density matrix at physical time ``t`` (basis |g>, |e>)."""

    t: float
    rho: np.ndarray

    @property
    def excited_population(self) -> float:
        return float(self.rho[1, 1].real)

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.rho))

    @property
    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.rho - self.rho.conj().T)))

    @property
    def min_eigenvalue(self) -> float:
        h = 0.5 * (self.rho + self.rho.conj().T)
        return float(np.linalg.eigvalsh(h).min())


def reduced_state(prop: SuperPropagator, initial=GROUND, tol: float = 1e-6) -> ReducedState:
    """rho_S(t) from the cascade propagator and the initial atomic state."""
    rho0 = _check_initial(initial)
    k = prop.chain.k
    Y = prop.apply(_input_block(rho0, k))
    rho = _generalized_trace(Y, k)
    tr = np.trace(rho)
    if abs(tr - 1) > tol:
        raise ConsistencyError(f"reduced state trace {tr:.3e} deviates from 1")
    return ReducedState(prop.chain.t, rho)


# ---------------------------------------------------------------------------
# Output field
# ---------------------------------------------------------------------------

def _locate(chain: ChainSpec, t: float) -> Tuple[int, float]:
    """(copy c, auxiliary time s*) representing physical time t."""
    T = chain.delay_T
    c = int(math.floor(t / T + 1e-12)) + 1
    s = max(0.0, t - (c - 1) * T)
    if c > chain.k:
        if c == chain.k + 1 and s <= 1e-12 * T:
            c, s = chain.k, T
        else:
            raise DomainError(f"time {t} lies beyond the chain (t = {chain.t})")
    if s > chain.switch_off[c - 1] + 1e-12 * T:
        raise DomainError(f"time {t} lies beyond the chain (t = {chain.t})")
    return c, min(s, chain.switch_off[c - 1])


def _jump_at(chain: ChainSpec, t: float):
    """Output jump operator L_{c-1,c} for physical time t, with its s*."""
    c, s = _locate(chain, t)
    H, L = chain.link_operators(chain.active_at(s))
    return L[c - 1], s


class OutputObservables(NamedTuple):
    """Leg-A output at time ``t``.

    ``n_A_out`` is the phonon flux and ``a_A_mean`` the coherent amplitude
    (phase relative to the chain's jump operators); ``excited_population``
    is |e(t)|^2.
    """

    t: float
    n_A_out: float
    a_A_mean: complex
    excited_population: float


def _expect(chain: ChainSpec, rho0, insertions, s_end=None) -> complex:
    prop = SuperPropagator(chain)
    Y = prop.apply(_input_block(rho0, chain.k), insertions)
    return complex(np.trace(_generalized_trace(Y, chain.k)))


def output_observables(chain: ChainSpec, initial=GROUND, t: Optional[float] = None) -> OutputObservables:
    """n_A^out(t) = <b_out^dag b_out>/2 from the chain, plus |e(t)|^2."""
    rho0 = _check_initial(initial)
    if t is None:
        t = chain.t
    if t < 0:
        raise DomainError("t must be non-negative")
    L, s = _jump_at(chain, t)
    Ld = L.getH()
    flux = _expect(chain, rho0, [_Insertion(s, t, L, Ld)]).real
    mean = _expect(chain, rho0, [_Insertion(s, t, L, None)])
    c, _ = _locate(chain, t)
    pe_op = _on_copy(_PE, c, chain.k)
    pop = _expect(chain, rho0, [_Insertion(s, t, pe_op, None)]).real
    # a_A = b/sqrt(2) and b = -i L up to the chain's phase convention
    return OutputObservables(float(t), 0.5 * flux, -1j * mean / math.sqrt(2.0), pop)


def delayed_g2(chain: ChainSpec, initial, t0: float, tau: float) -> float:
    """G22(t0, tau) = <a^dag(t0) a^dag(t0+tau) a(t0+tau) a(t0)> for leg A.

    Uses the delayed regression formula: each time is mapped to its
    auxiliary time and the jump insertions are applied in auxiliary-time
    order (equal auxiliary times: earlier physical time first).
    """
    rho0 = _check_initial(initial)
    t1, t2 = float(t0), float(t0 + tau)
    if t1 < 0 or t2 < 0:
        raise DomainError("t0 and t0 + tau must be non-negative")
    ins = []
    for tt in (t1, t2):
        L, s = _jump_at(chain, tt)
        ins.append(_Insertion(s, tt, L, L.getH()))
    for a, b in zip(sorted(ins, key=lambda r: (r.s, r.t))[:-1],
                    sorted(ins, key=lambda r: (r.s, r.t))[1:]):
        if b.s - a.s < 0:
            raise ConsistencyError("negative auxiliary interval between insertions")
    val = _expect(chain, rho0, ins)
    return 0.25 * val.real


# ---------------------------------------------------------------------------
# Markovian benchmark and convenience
# ---------------------------------------------------------------------------

def markov_benchmark(params: SystemParams, Omega: float, t) -> np.ndarray:
    """Excited population of the resonantly driven atom before feedback (t < T).

    Resonance fluorescence with total decay 2 gamma:
    P = Omega^2/(4 gamma^2 + 2 Omega^2) [1 - e^{-3 gamma t/2}(cosh z t + (3 gamma/2z) sinh z t)],
    z = sqrt((gamma/2)^2 - Omega^2).
    """
    tt = np.asarray(t, dtype=float)
    if np.any(tt >= params.delay_T) or np.any(tt < 0):
        raise DomainError("the Markovian transient only holds for 0 <= t < T")
    g = params.gamma
    z = cmath.sqrt((g / 2) ** 2 - Omega ** 2)
    zt = z * tt
    ch = np.cosh(zt)
    # sinh(z t)/z, finite at z = 0
    small = np.abs(zt) < 1e-8
    sh = np.where(small, tt + 0j, np.sinh(zt) / (z if z != 0 else 1.0))
    amp = Omega ** 2 / (4 * g * g + 2 * Omega ** 2)
    out = amp * (1 - np.exp(-1.5 * g * tt) * (ch + 1.5 * g * sh)).real
    return out if out.ndim else float(out)


def population_trace(params: SystemParams, delta: float, Omega: float, times,
                     phi: Optional[float] = None, initial=GROUND, max_k: int = DEFAULT_MAX_K,
                     phi_pi: Optional[float] = None) -> np.ndarray:
    """|e(t)|^2 on a grid of times, one cascade per time."""
    rho0 = _check_initial(initial)
    out = []
    for t in np.asarray(times, dtype=float):
        ch = build_chain(params, delta, Omega, phi, float(t), max_k=max_k, phi_pi=phi_pi)
        out.append(reduced_state(propagate(ch), rho0).excited_population)
    return np.array(out)
