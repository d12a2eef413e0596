"""
Assembly of the non-Hermitian generator ``Lambda`` of the dissipaton-embedded
master equation, ``d/dt rho_tilde = -i Lambda rho_tilde``.

Bosonic state layout: ``(system ket, system bra, dissipaton configuration)``,
flattened row-major. Fermionic state layout: the reduced density tensor is an
operator on the joint Fock space of system orbitals and dissipaton modes,
``rho_tilde = sum rho_nm |m><n|``; the ket register holds the system ket plus
the ``sigma=-`` occupations ``m`` and the bra register the system bra plus the
``sigma=+`` occupations ``n``. Each register uses its own Jordan-Wigner code,
ket register first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, NamedTuple

import numpy as np
import scipy.sparse as sp

from . import algebra as alg
from .errors import DimensionMismatch, MissingModeSet, UnpairedSigma
from .modes import BOSONIC, FERMIONIC, ModeSet, dissipaton_coefficients


@dataclass(frozen=True)
class SystemSpec:
    """System Hamiltonian plus one coupling operator per environment label.

    For bosonic environments the coupling operators are the Hermitian ``Q_u``;
    for fermionic environments they are annihilation operators ``c_u`` of the
    system orbitals (Jordan-Wigner matrices over ``n_orbitals`` orbitals).
    Several labels may share one operator (one orbital, several reservoirs).
    """

    H: Any
    couplings: Mapping
    statistics: str = BOSONIC
    n_orbitals: int | None = None

    def __post_init__(self):
        H = alg.csr(self.H)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "couplings", {k: alg.csr(v) for k, v in dict(self.couplings).items()})
        if H.shape[0] != H.shape[1]:
            raise DimensionMismatch("H_S must be square")
        if not alg.is_hermitian(H):
            raise ValueError("H_S is not Hermitian")
        for label, op in self.couplings.items():
            if op.shape != H.shape:
                raise DimensionMismatch(f"coupling {label!r} has shape {op.shape}, H_S {H.shape}")
            if self.statistics == BOSONIC and not alg.is_hermitian(op):
                raise ValueError(f"bosonic coupling {label!r} is not Hermitian")
        if self.statistics == FERMIONIC:
            if self.n_orbitals is None or 2 ** self.n_orbitals != H.shape[0]:
                raise DimensionMismatch("fermionic system needs n_orbitals with d = 2**n_orbitals")

    @property
    def dim(self) -> int:
        return self.H.shape[0]


@dataclass(frozen=True)
class FlatMode:
    """One dissipaton mode after flattening all environment labels.

    Bosonic modes carry (eta, gamma, zeta, xi); fermionic modes carry the
    sigma=+ and sigma=- values of one pair as 2-tuples ``(plus, minus)``.
    """

    label: Any
    index: int
    eta: Any
    gamma: Any
    zeta: Any
    xi: Any


class BosonicLayout:
    """Index bookkeeping of a bosonic reduced density tensor."""

    statistics = BOSONIC

    def __init__(self, system_dim: int, fock: alg.FockLayout):
        self.system_dim = system_dim
        self.fock = fock

    @property
    def D(self) -> int:
        return self.fock.dim

    @property
    def dim(self) -> int:
        return self.system_dim ** 2 * self.D

    def product_state(self, rho_s) -> np.ndarray:
        d = self.system_dim
        v = np.zeros((d, d, self.D), dtype=complex)
        v[:, :, 0] = np.asarray(rho_s, dtype=complex)
        return v.reshape(-1)

    def vacuum_block(self, vec) -> np.ndarray:
        d = self.system_dim
        return np.asarray(vec).reshape(d, d, self.D)[:, :, 0].copy()

    def config_block(self, vec, config) -> np.ndarray:
        d = self.system_dim
        return np.asarray(vec).reshape(d, d, self.D)[:, :, self.fock.index[tuple(config)]].copy()

    def describe(self) -> dict:
        return {"statistics": BOSONIC, "system_dim": self.system_dim,
                "caps": list(self.fock.caps), "tier_cap": self.fock.tier_cap,
                "dissipaton_dim": self.D, "rdt_dim": self.dim}


class FermionicLayout:
    """Index bookkeeping of a fermionic reduced density tensor.

    Each register is a Jordan-Wigner chain of ``n_orbitals + K`` modes.
    ``ordering='system_first'`` puts the system orbitals before the dissipaton
    modes inside each register; ``'dissipatons_first'`` reverses that.
    """

    statistics = FERMIONIC

    def __init__(self, n_orbitals: int, K: int, ordering: str = "system_first"):
        if ordering not in ("system_first", "dissipatons_first"):
            raise ValueError(f"unknown register ordering {ordering!r}")
        self.n_orbitals = n_orbitals
        self.K = K
        self.ordering = ordering

    @property
    def system_dim(self) -> int:
        return 2 ** self.n_orbitals

    @property
    def n_side(self) -> int:
        return self.n_orbitals + self.K

    @property
    def side_dim(self) -> int:
        return 2 ** self.n_side

    @property
    def dim(self) -> int:
        return self.side_dim ** 2

    def orbital_site(self, u: int) -> int:
        return u if self.ordering == "system_first" else self.K + u

    def mode_site(self, k: int) -> int:
        return self.n_orbitals + k if self.ordering == "system_first" else k

    def side_index(self, sys_state: int, occ) -> int:
        """Register basis index of system basis state ``sys_state`` with mode occupations ``occ``."""
        m = 0
        for bit in occ:
            m = 2 * m + int(bit)
        if self.ordering == "system_first":
            return sys_state * 2 ** self.K + m
        return m * self.system_dim + sys_state

    def _side_indices(self, occ) -> np.ndarray:
        return np.array([self.side_index(s, occ) for s in range(self.system_dim)])

    def embed_system(self, op, odd: bool = False) -> sp.csr_matrix:
        """System operator on one register. Odd operators pick up the parity of
        the dissipaton modes that precede them in the ordering."""
        op = alg.csr(op)
        modes_eye = alg.identity(2 ** self.K)
        if self.ordering == "system_first":
            return alg.kron(op, modes_eye)
        prefix = alg.parity_operator(self.K) if odd else modes_eye
        return alg.kron(prefix, op)

    def product_state(self, rho_s) -> np.ndarray:
        rho_s = np.asarray(rho_s, dtype=complex)
        vac = np.zeros((2 ** self.K, 2 ** self.K), dtype=complex)
        vac[0, 0] = 1.0
        if self.ordering == "system_first":
            return np.kron(rho_s, vac).reshape(-1)
        return np.kron(vac, rho_s).reshape(-1)

    def block(self, vec, ket_occ, bra_occ) -> np.ndarray:
        """System matrix ``[mu, nu] = rho_tilde[(mu, ket_occ), (nu, bra_occ)]``."""
        mat = np.asarray(vec).reshape(self.side_dim, self.side_dim)
        return mat[np.ix_(self._side_indices(ket_occ), self._side_indices(bra_occ))].copy()

    def vacuum_block(self, vec) -> np.ndarray:
        zero = (0,) * self.K
        return self.block(vec, zero, zero)

    def describe(self) -> dict:
        return {"statistics": FERMIONIC, "system_dim": self.system_dim,
                "n_orbitals": self.n_orbitals, "modes_per_side": self.K,
                "ordering": self.ordering, "rdt_dim": self.dim}


class GeneratorTerm(NamedTuple):
    name: str
    label: Any  # environment label, None for the bare system part
    matrix: sp.csr_matrix


@dataclass
class Generator:
    """The assembled ``Lambda`` plus the bookkeeping needed to read states.

    ``terms`` splits ``Lambda`` into named pieces (the bare system part and one
    piece per dissipaton mode, tagged with its environment label) whose sum is
    ``matrix``; product-formula propagators exponentiate them one at a time.
    """

    matrix: sp.csr_matrix
    layout: Any
    modes: list
    terms: list = field(default_factory=list)
    system: SystemSpec | None = None

    @property
    def statistics(self) -> str:
        return self.layout.statistics

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def rhs(self, vec):
        return -1j * (self.matrix @ vec)


def _flatten(sys: SystemSpec, modesets: Mapping) -> list[tuple[Any, ModeSet]]:
    out = []
    for label in sys.couplings:
        if label not in modesets:
            raise MissingModeSet(f"no mode set for coupling {label!r}")
        out.append((label, modesets[label]))
    extra = set(modesets) - set(sys.couplings)
    if extra:
        raise MissingModeSet(f"mode sets without a coupling operator: {sorted(map(str, extra))}")
    return out


def build_lambda_bosonic(sys: SystemSpec, modesets: Mapping, layout: alg.FockLayout | None = None,
                         n_max: int | tuple = 3, tier_cap: int | None = None) -> Generator:
    """Generator of the bosonic equation over all labels ``(alpha, u)``.

    ``Lambda = (H x I - I x H^T) x I_D - i I x I x sum gamma_k N_k
             + sum (Q x I - I x Q^T) x zeta_k (b_k + b_k^+)
             + i sum (Q x I + I x Q^T) x xi_k b_k^+``

    The dissipaton space is ``layout`` when given; otherwise it is built from
    ``n_max`` (int, or one cap per flattened mode) and the optional total
    occupation bound ``tier_cap``.
    """
    if sys.statistics != BOSONIC:
        raise ValueError("build_lambda_bosonic needs a bosonic SystemSpec")
    d = sys.dim
    flat = []
    for label, ms in _flatten(sys, modesets):
        if ms.statistics != BOSONIC:
            raise ValueError(f"mode set {label!r} is not bosonic")
        co = dissipaton_coefficients(ms)
        for k, m in enumerate(ms.modes):
            flat.append(FlatMode(label, k, m.eta, m.gamma, co.zeta[k], co.xi[k]))
    K = len(flat)
    if layout is None:
        caps = tuple(n_max) if isinstance(n_max, (tuple, list)) else (int(n_max),) * K
        layout = alg.FockLayout(caps, tier_cap)
    fock = layout
    if fock.K != K:
        raise DimensionMismatch(f"layout has {fock.K} modes, environments supply {K}")
    rdt_layout = BosonicLayout(d, fock)
    ladders = alg.mode_ladders(fock)
    I_D = alg.identity(fock.dim)

    L_H = alg.lift_system_superop(sys.H, "left", d)
    R_H = alg.lift_system_superop(sys.H, "right", d)
    terms = [GeneratorTerm("system", None, alg.kron(L_H - R_H, I_D))]
    lifts = {}
    for label, Q in sys.couplings.items():
        L = alg.lift_system_superop(Q, "left", d)
        R = alg.lift_system_superop(Q, "right", d)
        lifts[label] = (L - R, L + R)
    I_S2 = alg.identity(d * d)
    for j, fm in enumerate(flat):
        b, bd = ladders[j]
        comm, anti = lifts[fm.label]
        term = -1j * fm.gamma * alg.kron(I_S2, bd @ b)
        term = term + alg.kron(comm, fm.zeta * (b + bd))
        term = term + 1j * alg.kron(anti, fm.xi * bd)
        terms.append(GeneratorTerm(f"mode[{fm.label}][{fm.index}]", fm.label, alg.csr(term)))
    matrix = alg.csr(sum((t.matrix for t in terms[1:]), terms[0].matrix))
    return Generator(matrix, rdt_layout, flat, terms, sys)


def build_lambda_fermionic(sys: SystemSpec, modesets: Mapping,
                           ordering: str = "system_first") -> Generator:
    """Generator of the fermionic equation over all labels ``(alpha, u)``.

    Realizes, term by term,

        d/dt rho = -i[H, rho] - sum (g-_k N_k rho + g+_k rho N_k)
                   -i sum [ z-_k (c+ b-_k rho - b-_k rho c+)
                          + z+_k (c- rho b+_k - rho b+_k c-)
                          + x+_k c+ rho b-_k - conj(x+_k) b+_k rho c-
                          - x-_k c- b+_k rho + conj(x-_k) rho b-_k c+ ]

    with every operator a Jordan-Wigner matrix on the joint register and
    ``vec(A rho B) = (A x B^T) vec(rho)``.
    """
    if sys.statistics != FERMIONIC:
        raise ValueError("build_lambda_fermionic needs a fermionic SystemSpec")
    flat = []
    for label, ms in _flatten(sys, modesets):
        if ms.statistics != FERMIONIC:
            raise ValueError(f"mode set {label!r} is not fermionic")
        try:
            pairs = ms.fermionic_pairs()
        except (ValueError, IndexError) as exc:
            raise UnpairedSigma(str(exc)) from exc
        if any(ms.modes[q].sigma != -1 for _, q in pairs) or 2 * len(pairs) != len(ms):
            raise UnpairedSigma(f"mode set {label!r} does not consist of (+, -) pairs")
        co = dissipaton_coefficients(ms)
        for k, (p, q) in enumerate(pairs):
            flat.append(FlatMode(label, k,
                                 (ms.modes[p].eta, ms.modes[q].eta),
                                 (ms.modes[p].gamma, ms.modes[q].gamma),
                                 (co.zeta[p], co.zeta[q]),
                                 (co.xi[p], co.xi[q])))
    n_orb = sys.n_orbitals
    layout = FermionicLayout(n_orb, len(flat), ordering)
    n = layout.n_side
    eye = alg.identity(layout.side_dim)

    def lr(A, B):
        # vec(A rho B)
        return alg.kron(A, alg.csr(B.T))

    H = layout.embed_system(sys.H)
    terms = [GeneratorTerm("system", None, lr(H, eye) - lr(eye, H))]
    c_joint = {label: layout.embed_system(op, odd=True) for label, op in sys.couplings.items()}
    for j, fm in enumerate(flat):
        bm, bp = alg.jw_ladder(n, layout.mode_site(j))
        cm = c_joint[fm.label]
        cp = alg.csr(cm.getH())
        N = bp @ bm
        (gp, gm), (zp, zm), (xp, xm) = fm.gamma, fm.zeta, fm.xi
        term = -1j * (gm * lr(N, eye) + gp * lr(eye, N))
        term = term + zm * (lr(cp @ bm, eye) - lr(bm, cp))
        term = term + zp * (lr(cm, bp) - lr(eye, bp @ cm))
        term = term + xp * lr(cp, bm) - np.conj(xp) * lr(bp, cm)
        term = term - xm * lr(cm @ bp, eye) + np.conj(xm) * lr(eye, bm @ cp)
        terms.append(GeneratorTerm(f"mode[{fm.label}][{fm.index}]", fm.label, alg.csr(term)))
    matrix = alg.csr(sum((t.matrix for t in terms[1:]), terms[0].matrix))
    return Generator(matrix, layout, flat, terms, sys)


def label_part(gen: Generator, label) -> sp.csr_matrix:
    """Sum of the generator terms of one environment label."""
    parts = [t.matrix for t in gen.terms if t.label == label]
    if not parts:
        raise MissingModeSet(f"no generator terms carry label {label!r}")
    return alg.csr(sum(parts[1:], parts[0]))


def build_lambda(sys: SystemSpec, modesets: Mapping, **kw) -> Generator:
    if sys.statistics == BOSONIC:
        return build_lambda_bosonic(sys, modesets, **kw)
    return build_lambda_fermionic(sys, modesets, **kw)


def system_trace_functional(gen: Generator) -> np.ndarray:
    """Row vector ``w`` with ``w @ vec = tr(vacuum block of vec)``."""
    w = np.zeros(gen.dim, dtype=complex)
    # read positions back through the layout so both statistics share one path
    idx = gen.layout.vacuum_block(np.arange(gen.dim)).real.astype(np.int64)
    w[np.diag(idx)] = 1.0
    return w
