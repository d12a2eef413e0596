"""
Pseudomode Lindblad equation for real exponential modes, and its map onto
the reduced density tensor.

For real ``eta_k``, ``gamma_k`` every mode can be represented by a damped
auxiliary oscillator ``a_k`` coupled to the system through ``Q``:

    d/dt rho_p = -i[H_S, rho_p] - i sum_k zeta_k [(a_k + a_k^+) Q, rho_p]
                 + sum_k gamma_k (2 a_k rho_p a_k^+ - {a_k^+ a_k, rho_p})

with ``zeta_k = sqrt(eta_k)``. The dissipaton component with occupations
``n`` is recovered by a normal-ordered moment of the oscillators,

    rho_n = (prod n_k!)^(-1/2) tr_D( N[prod (a_k^+ + a_k)^(n_k)] rho_p ).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import algebra as alg
from .errors import ComplexModeRejected, DimensionMismatch, NonFinite
from .generator import BosonicLayout, SystemSpec, _flatten
from .modes import BOSONIC, dissipaton_coefficients
from .propagate import RdtState, rk4_step

REAL_TOL = 1e-12


@dataclass
class PseudomodeState:
    """Density operator over system x pseudomodes, system index most significant."""

    rho: np.ndarray
    system_dim: int
    caps: tuple

    @property
    def D(self) -> int:
        return int(np.prod([c + 1 for c in self.caps]))

    @property
    def dim(self) -> int:
        """Number of complex entries, ``(d D)^2``."""
        return (self.system_dim * self.D) ** 2

    def trace(self) -> complex:
        return complex(np.trace(self.rho))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.rho - self.rho.conj().T)))

    def min_eigenvalue(self) -> float:
        h = 0.5 * (self.rho + self.rho.conj().T)
        return float(np.linalg.eigvalsh(h)[0])

    def reduced(self) -> np.ndarray:
        d = self.system_dim
        return np.trace(self.rho.reshape(d, self.D, d, self.D), axis1=1, axis2=3)


class PseudomodeGenerator:
    """Lindblad superoperator ``L`` (row-major vectorization) with ``d vec/dt = L vec``."""

    def __init__(self, matrix, system_dim: int, caps: tuple, labels: list):
        self.matrix = matrix
        self.system_dim = system_dim
        self.caps = tuple(caps)
        self.labels = labels

    @property
    def D(self) -> int:
        return int(np.prod([c + 1 for c in self.caps]))

    def product_state(self, rho_s) -> PseudomodeState:
        """``rho_s`` times the pseudomode vacuum."""
        rho_s = np.asarray(rho_s, dtype=complex)
        d = self.system_dim
        if rho_s.shape != (d, d):
            raise DimensionMismatch(f"rho_S shape {rho_s.shape}, system dimension {d}")
        vac = np.zeros((self.D, self.D), dtype=complex)
        vac[0, 0] = 1.0
        return PseudomodeState(np.kron(rho_s, vac), d, self.caps)


def _check_real(ms, label, tol):
    for k, m in enumerate(ms.modes):
        if abs(m.eta.imag) > tol * max(1.0, abs(m.eta)) or abs(m.gamma.imag) > tol * max(1.0, abs(m.gamma)):
            raise ComplexModeRejected(
                f"mode {k} of {label!r} is complex (eta={m.eta}, gamma={m.gamma}); "
                "the pseudomode equation needs real modes")


def build_pseudomode_generator(sys: SystemSpec, modesets, n_max=None, dqme_cap: int = 3,
                               tol: float = REAL_TOL) -> PseudomodeGenerator:
    """Lindblad superoperator of the pseudomode equation.

    Parameters
    ----------
    sys : SystemSpec
        Bosonic system.
    modesets : mapping label -> ModeSet, or a single ModeSet for a one-label system
    n_max : int or tuple, optional
        Pseudomode level caps; default ``dqme_cap + 1`` for every mode.

    Raises
    ------
    ComplexModeRejected
        Any ``eta`` or ``gamma`` with a non-negligible imaginary part.
    """
    if sys.statistics != BOSONIC:
        raise ValueError("pseudomodes are implemented for bosonic environments")
    if not isinstance(modesets, dict):
        if len(sys.couplings) != 1:
            raise ValueError("pass a label -> ModeSet mapping for several couplings")
        modesets = {next(iter(sys.couplings)): modesets}
    flat = []
    for label, ms in _flatten(sys, modesets):
        _check_real(ms, label, tol)
        zeta = dissipaton_coefficients(ms).zeta
        for k, m in enumerate(ms.modes):
            flat.append((label, m.gamma.real, zeta[k]))
    K = len(flat)
    if n_max is None:
        n_max = dqme_cap + 1
    caps = tuple(n_max) if isinstance(n_max, (tuple, list)) else (int(n_max),) * K
    if len(caps) != K:
        raise DimensionMismatch(f"{len(caps)} pseudomode caps for {K} modes")
    fock = alg.FockLayout(caps)
    D = fock.dim
    d = sys.dim
    n = d * D
    eye = alg.identity(n)

    def lr(A, B):
        return alg.kron(A, alg.csr(B.T))

    I_D = alg.identity(D)
    H = alg.kron(sys.H, I_D)
    L = -1j * (lr(H, eye) - lr(eye, H))
    for j, (label, gamma, zeta) in enumerate(flat):
        a, ad = alg.mode_ladders(fock)[j]
        Q = sys.couplings[label]
        X = alg.kron(Q, a + ad)
        A = alg.kron(alg.identity(d), a)
        Ad = alg.kron(alg.identity(d), ad)
        N = Ad @ A
        L = L - 1j * zeta * (lr(X, eye) - lr(eye, X))
        L = L + gamma * (2 * lr(A, Ad) - lr(N, eye) - lr(eye, N))
    return PseudomodeGenerator(alg.csr(L), d, caps, [f[0] for f in flat])


def propagate_pseudomode(gen: PseudomodeGenerator, state: PseudomodeState, dt: float,
                         t_final: float, stride: int = 1, record=None):
    """RK4 trajectory; returns ``(times, records)`` with ``record(state)`` (default: copy)."""
    if record is None:
        def record(s):
            return PseudomodeState(s.rho.copy(), s.system_dim, s.caps)
    n = gen.system_dim * gen.D
    v = state.rho.reshape(-1).astype(complex)
    A = gen.matrix
    n_steps = int(round(t_final / dt))
    times, out = [0.0], [record(state)]
    for i in range(1, n_steps + 1):
        v = rk4_step(A, v, dt)
        if not np.isfinite(v).all():
            raise NonFinite(f"pseudomode propagation diverged at step {i}")
        if i % stride == 0 or i == n_steps:
            times.append(i * dt)
            out.append(record(PseudomodeState(v.reshape(n, n), gen.system_dim, gen.caps)))
    return np.array(times), out


def normal_ordered_moment(n: int, cap: int) -> sp.csr_matrix:
    """``N[(a^+ + a)^n] = sum_j C(n, j) a^+^j a^(n-j)`` on levels 0..cap."""
    a, ad = alg.boson_ladder(cap)
    out = sp.csr_matrix((cap + 1, cap + 1), dtype=complex)
    for j in range(n + 1):
        term = alg.identity(cap + 1)
        for _ in range(j):
            term = term @ ad
        for _ in range(n - j):
            term = term @ a
        out = out + math.comb(n, j) * term
    return alg.csr(out)


def extract_rdt(state: PseudomodeState, layout: BosonicLayout) -> RdtState:
    """Map a pseudomode density onto the reduced density tensor of ``layout``.

    Components whose occupations exceed the pseudomode caps are left at zero.
    """
    d = state.system_dim
    if layout.system_dim != d:
        raise DimensionMismatch("system dimensions differ")
    if layout.fock.K != len(state.caps):
        raise DimensionMismatch(f"{len(state.caps)} pseudomodes, layout has {layout.fock.K} modes")
    D = state.D
    rho = state.rho.reshape(d, D, d, D)
    out = np.zeros((d, d, layout.D), dtype=complex)
    cache = {}
    for pos, config in enumerate(layout.fock.configs):
        if any(nk > ck for nk, ck in zip(config, state.caps)):
            continue
        mats = []
        for k, nk in enumerate(config):
            key = (nk, state.caps[k])
            if key not in cache:
                cache[key] = normal_ordered_moment(nk, state.caps[k]).toarray()
            mats.append(cache[key])
        O = mats[0]
        for m in mats[1:]:
            O = np.kron(O, m)
        # tr_D (O rho): sum_{a,b} O[b, a] rho[i, a, j, b]
        blk = np.einsum("ba,iajb->ij", O, rho)
        out[:, :, pos] = blk / math.sqrt(math.prod(math.factorial(nk) for nk in config))
    return RdtState(out.reshape(-1), layout)
