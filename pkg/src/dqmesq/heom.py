"""
Brute-force hierarchical equations of motion, used as the reference against
which the dissipaton generator is checked.

Auxiliary density operators are dense ``d x d`` blocks keyed by occupation
multi-indices. Bosonic keys are tuples ``n``; fermionic keys are pairs
``(n, m)`` of 0/1 tuples (``n`` for sigma=+, ``m`` for sigma=-). The equations
are enumerated once as a list of elementary moves

    d/dt rho[target] += coef * op @ rho[source]        (side 'L')
    d/dt rho[target] += coef * rho[source] @ op        (side 'R')

which feeds both the transparent block-by-block right-hand side and an
assembled sparse matrix used for long propagations.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
import scipy.sparse as sp

from . import algebra as alg
from .errors import DegenerateZeta, DimensionMismatch, IndexOutOfRange, NonFinite
from .generator import Generator, SystemSpec, _flatten
from .modes import BOSONIC, FERMIONIC, dissipaton_coefficients


@dataclass
class Hierarchy:
    """Auxiliary density operators of one hierarchy state.

    ``blocks`` maps every index of the hierarchy to a ``d x d`` array;
    ``scaled`` marks blocks already divided by the dissipaton normalization.
    """

    statistics: str
    blocks: dict
    scaled: bool = False

    @property
    def zero(self):
        return next(iter(self.blocks))

    @property
    def rho_s(self) -> np.ndarray:
        return self.blocks[self.zero]

    def copy(self) -> "Hierarchy":
        return Hierarchy(self.statistics, {k: v.copy() for k, v in self.blocks.items()}, self.scaled)


@dataclass(frozen=True)
class SignLedger:
    """Partial occupation sums of a fermionic index ``(n, m)``."""

    theta_plus: tuple
    theta_minus: tuple

    @classmethod
    def of(cls, n, m) -> "SignLedger":
        return cls(tuple(itertools.accumulate(n)), tuple(itertools.accumulate(m)))

    @property
    def N(self) -> int:
        return self.theta_plus[-1] if self.theta_plus else 0

    @property
    def M(self) -> int:
        return self.theta_minus[-1] if self.theta_minus else 0


def _sgn(e: int) -> int:
    return -1 if e % 2 else 1


@dataclass
class _Mode:
    label: Any
    eta: Any
    eta_bar_conj: Any = None  # bosonic: conj(eta of the conjugate partner)
    gamma: Any = None
    zeta: Any = None
    xi: Any = None


class HeomOracle:
    """Hierarchy of one system coupled to one or more Gaussian environments.

    Parameters
    ----------
    sys : SystemSpec
    modesets : mapping label -> ModeSet
        One entry per coupling label of ``sys``.
    n_max, tier_cap : int, optional
        Bosonic truncation (per-mode cap, total occupation cap). Fermionic
        hierarchies are complete (occupations 0/1).
    scaled : bool
        Bosonic only: propagate the dimensionless blocks
        ``rho_n / prod(zeta_k**n_k sqrt(n_k!))`` instead of ``rho_n``.
    """

    def __init__(self, sys: SystemSpec, modesets: Mapping, n_max: int | tuple = 3,
                 tier_cap: int | None = None, scaled: bool = False):
        self.sys = sys
        self.statistics = sys.statistics
        self.scaled = bool(scaled)
        if scaled and self.statistics == FERMIONIC:
            raise ValueError("the scaled form is implemented for bosonic hierarchies only")
        self.d = sys.dim
        self.ops = {"I": np.eye(self.d, dtype=complex), "H": sys.H.toarray()}
        self.modes: list[_Mode] = []
        for label, ms in _flatten(sys, modesets):
            op = sys.couplings[label].toarray()
            if ms.statistics != self.statistics:
                raise ValueError(f"mode set {label!r} has the wrong statistics")
            co = dissipaton_coefficients(ms)
            if self.statistics == BOSONIC:
                self.ops[("Q", label)] = op
                for k, m in enumerate(ms.modes):
                    kb = ms.pairing[k]
                    self.modes.append(_Mode(label, m.eta, np.conj(ms.modes[kb].eta), m.gamma,
                                            co.zeta[k], co.xi[k]))
            else:
                self.ops[("c", label)] = op
                self.ops[("cd", label)] = op.conj().T
                for p, q in ms.fermionic_pairs():
                    self.modes.append(_Mode(label, (ms.modes[p].eta, ms.modes[q].eta),
                                            gamma=(ms.modes[p].gamma, ms.modes[q].gamma),
                                            zeta=(co.zeta[p], co.zeta[q])))
        K = len(self.modes)
        if self.statistics == BOSONIC:
            caps = tuple(n_max) if isinstance(n_max, (tuple, list)) else (int(n_max),) * K
            if len(caps) != K:
                raise DimensionMismatch(f"{len(caps)} occupation caps for {K} modes")
            self.fock = alg.FockLayout(caps, tier_cap)
            self.indices = list(self.fock.configs)
        else:
            bits = list(itertools.product((0, 1), repeat=K))
            self.fock = None
            self.indices = [(n, m) for n in bits for m in bits]
        self.position = {idx: i for i, idx in enumerate(self.indices)}
        self._moves = None
        self._matrix = None

    # -- bookkeeping -------------------------------------------------------
    @property
    def K(self) -> int:
        return len(self.modes)

    @property
    def n_blocks(self) -> int:
        return len(self.indices)

    @property
    def dim(self) -> int:
        return self.n_blocks * self.d * self.d

    def zero_index(self):
        return self.indices[0]

    def initial(self, rho_s) -> Hierarchy:
        rho_s = np.asarray(rho_s, dtype=complex)
        if rho_s.shape != (self.d, self.d):
            raise DimensionMismatch(f"rho_S shape {rho_s.shape}, system dimension {self.d}")
        blocks = {idx: np.zeros((self.d, self.d), dtype=complex) for idx in self.indices}
        blocks[self.zero_index()] = rho_s.copy()
        return Hierarchy(self.statistics, blocks, self.scaled)

    def to_vector(self, h: Hierarchy) -> np.ndarray:
        return np.concatenate([h.blocks[idx].reshape(-1) for idx in self.indices])

    def from_vector(self, vec) -> Hierarchy:
        d2 = self.d * self.d
        vec = np.asarray(vec)
        blocks = {idx: vec[i * d2:(i + 1) * d2].reshape(self.d, self.d).copy()
                  for i, idx in enumerate(self.indices)}
        return Hierarchy(self.statistics, blocks, self.scaled)

    # -- equations ---------------------------------------------------------
    def moves(self) -> list:
        """All elementary moves ``(target, source, side, op_key, coef)``."""
        if self._moves is None:
            self._moves = self._bosonic_moves() if self.statistics == BOSONIC else self._fermionic_moves()
        return self._moves

    def _diag(self, idx, rate):
        out = [(idx, idx, "L", "H", -1j), (idx, idx, "R", "H", 1j)]
        if rate != 0:
            out.append((idx, idx, "L", "I", -rate))
        return out

    def _bosonic_moves(self) -> list:
        out = []
        for n in self.indices:
            out += self._diag(n, sum(nk * md.gamma for nk, md in zip(n, self.modes)))
            for k, md in enumerate(self.modes):
                Q = ("Q", md.label)
                up = n[:k] + (n[k] + 1,) + n[k + 1:]
                if up in self.position:
                    a = md.zeta * math.sqrt(n[k] + 1) if self.scaled else 1.0
                    out += [(n, up, "L", Q, -1j * a), (n, up, "R", Q, 1j * a)]
                if n[k] > 0:
                    dn = n[:k] + (n[k] - 1,) + n[k + 1:]
                    if self.scaled:
                        r = math.sqrt(n[k])
                        left = -1j * md.zeta * r + md.xi * r
                        right = 1j * md.zeta * r + md.xi * r
                    else:
                        left = -1j * n[k] * md.eta
                        right = 1j * n[k] * md.eta_bar_conj
                    out += [(n, dn, "L", Q, left), (n, dn, "R", Q, right)]
        return out

    def _fermionic_moves(self) -> list:
        out = []
        for n, m in self.indices:
            led = SignLedger.of(n, m)
            N, M = led.N, led.M
            rate = sum(nk * md.gamma[0] + mk * md.gamma[1] for nk, mk, md in zip(n, m, self.modes))
            out += self._diag((n, m), rate)
            for k, md in enumerate(self.modes):
                c, cd = ("c", md.label), ("cd", md.label)
                tp, tm = led.theta_plus[k], led.theta_minus[k]
                eta_p, eta_m = md.eta
                flip_n = (n[:k] + (1 - n[k],) + n[k + 1:], m)
                flip_m = (n, m[:k] + (1 - m[k],) + m[k + 1:])
                tgt = (n, m)
                if n[k] == 0:
                    out += [(tgt, flip_n, "L", c, -1j * _sgn(M + N - tp)),
                            (tgt, flip_n, "R", c, 1j * _sgn(tp))]
                else:
                    out += [(tgt, flip_n, "L", cd, -1j * _sgn(M + N - tp) * eta_p),
                            (tgt, flip_n, "R", cd, 1j * _sgn(tp - 1) * np.conj(eta_m))]
                if m[k] == 0:
                    out += [(tgt, flip_m, "L", cd, -1j * _sgn(M - tm)),
                            (tgt, flip_m, "R", cd, 1j * _sgn(N + tm))]
                else:
                    out += [(tgt, flip_m, "L", c, -1j * _sgn(M - tm) * eta_m),
                            (tgt, flip_m, "R", c, 1j * _sgn(N - 1 + tm) * np.conj(eta_p))]
        return out

    def rhs(self, h: Hierarchy) -> Hierarchy:
        """Time derivative evaluated block by block from the move list."""
        if set(h.blocks) != set(self.position):
            raise IndexOutOfRange("hierarchy index set does not match the oracle's truncation")
        out = {idx: np.zeros((self.d, self.d), dtype=complex) for idx in self.indices}
        for tgt, src, side, key, coef in self.moves():
            op = self.ops[key]
            blk = h.blocks[src]
            out[tgt] += coef * (op @ blk if side == "L" else blk @ op)
        return Hierarchy(self.statistics, out, h.scaled)

    @property
    def matrix(self) -> sp.csr_matrix:
        """Sparse ``A`` with ``d/dt vec(h) = A @ vec(h)``."""
        if self._matrix is None:
            groups: dict = {}
            for tgt, src, side, key, coef in self.moves():
                rows, cols, vals = groups.setdefault((side, key), ([], [], []))
                rows.append(self.position[tgt])
                cols.append(self.position[src])
                vals.append(coef)
            nb = self.n_blocks
            total = sp.csr_matrix((self.dim, self.dim), dtype=complex)
            for (side, key), (rows, cols, vals) in groups.items():
                P = sp.csr_matrix((np.asarray(vals, dtype=complex), (rows, cols)), shape=(nb, nb))
                op = alg.csr(self.ops[key])
                local = alg.lift_system_superop(op, "left" if side == "L" else "right", self.d)
                total = total + sp.kron(P, local, format="csr")
            self._matrix = alg.csr(total)
        return self._matrix

    def propagate(self, h0: Hierarchy, dt: float, t_final: float, stride: int = 1):
        """Classical RK4 on the assembled matrix; returns ``(times, [Hierarchy])``."""
        A = self.matrix
        v = self.to_vector(h0)
        n_steps = int(round(t_final / dt))
        times, states = [0.0], [h0.copy()]
        for step in range(1, n_steps + 1):
            k1 = A @ v
            k2 = A @ (v + 0.5 * dt * k1)
            k3 = A @ (v + 0.5 * dt * k2)
            k4 = A @ (v + dt * k3)
            v = v + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.isfinite(v)):
                raise NonFinite(f"HEOM propagation diverged at step {step}")
            if step % stride == 0 or step == n_steps:
                times.append(step * dt)
                states.append(self.from_vector(v))
        return np.array(times), states

    def propagate_rho_s(self, rho_s, dt: float, t_final: float, stride: int = 1):
        """RK4 trajectory of the physical block only; cheaper than keeping hierarchies."""
        A = self.matrix
        v = self.to_vector(self.initial(rho_s))
        d2 = self.d * self.d
        n_steps = int(round(t_final / dt))
        times, out = [0.0], [v[:d2].reshape(self.d, self.d).copy()]
        for step in range(1, n_steps + 1):
            k1 = A @ v
            k2 = A @ (v + 0.5 * dt * k1)
            k3 = A @ (v + 0.5 * dt * k2)
            k4 = A @ (v + dt * k3)
            v = v + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.isfinite(v)):
                raise NonFinite(f"HEOM propagation diverged at step {step}")
            if step % stride == 0 or step == n_steps:
                times.append(step * dt)
                out.append(v[:d2].reshape(self.d, self.d).copy())
        return np.array(times), np.array(out)


def heom_rhs(h: Hierarchy, sys: SystemSpec, modesets: Mapping, **kw) -> Hierarchy:
    """One-shot right-hand side; truncation is inferred from the hierarchy keys unless given."""
    if sys.statistics == BOSONIC and "n_max" not in kw:
        keys = list(h.blocks)
        kw["n_max"] = tuple(max(k[i] for k in keys) for i in range(len(keys[0])))
        kw.setdefault("tier_cap", max(sum(k) for k in keys))
        if kw["tier_cap"] >= sum(kw["n_max"]):
            kw["tier_cap"] = None
    return HeomOracle(sys, modesets, scaled=h.scaled, **kw).rhs(h)


# -- maps to the dissipaton representation ---------------------------------

def _bosonic_norm(n, zetas) -> complex:
    out = 1.0 + 0j
    for nk, z in zip(n, zetas):
        if nk:
            out *= z ** nk * math.sqrt(math.factorial(nk))
    return out


def hierarchy_to_rdt(h: Hierarchy, oracle: HeomOracle, gen: Generator) -> np.ndarray:
    """Map a hierarchy onto the reduced density tensor vector of ``gen``.

    Bosonic: the component at configuration ``n`` is
    ``rho_n / prod(zeta_k**n_k sqrt(n_k!))``. Fermionic: the joint-space
    operator ``sum_nm rho_bar_nm |m><n|`` with ``rho_bar_nm = rho_nm /
    prod(zeta-**m zeta+**n)``, ``|m> = (b1+)^m1 ... (bK+)^mK |0>`` and
    ``|n> = (bK+)^nK ... (b1+)^n1 |0>``, all operators in the generator's
    Jordan-Wigner representation. Before embedding, each block is conjugated
    by the system parity ``P**M rho_bar P**M`` (``M = sum m``); this is the
    convention under which the literal occupation-number HEOM maps onto the
    generator move for move, found by exhaustive search and kept under test.
    """
    if h.statistics != gen.statistics:
        raise ValueError("hierarchy and generator statistics differ")
    if h.statistics == BOSONIC:
        return _bosonic_to_rdt(h, oracle, gen)
    return _fermionic_to_rdt(h, oracle, gen)


def _bosonic_to_rdt(h, oracle, gen):
    lay = gen.layout
    d, D = lay.system_dim, lay.D
    zetas = [md.zeta for md in oracle.modes]
    out = np.zeros((d, d, D), dtype=complex)
    for n, blk in h.blocks.items():
        if n not in lay.fock.index:
            raise IndexOutOfRange(f"hierarchy index {n} not in the dissipaton layout")
        if h.scaled:
            out[:, :, lay.fock.index[n]] = blk
            continue
        norm = _bosonic_norm(n, zetas)
        if norm == 0:
            if np.any(blk != 0):
                raise DegenerateZeta(f"zeta = 0 with occupied index {n}")
            continue
        out[:, :, lay.fock.index[n]] = blk / norm
    return out.reshape(-1)


def rdt_to_hierarchy(vec, oracle: HeomOracle, gen: Generator) -> Hierarchy:
    """Inverse of the bosonic map (unscaled blocks unless the oracle is scaled)."""
    if gen.statistics != BOSONIC:
        raise NotImplementedError("inverse map is provided for bosonic hierarchies")
    lay = gen.layout
    arr = np.asarray(vec).reshape(lay.system_dim, lay.system_dim, lay.D)
    zetas = [md.zeta for md in oracle.modes]
    blocks = {}
    for n in oracle.indices:
        blk = arr[:, :, lay.fock.index[n]]
        blocks[n] = blk.copy() if oracle.scaled else blk * _bosonic_norm(n, zetas)
    return Hierarchy(BOSONIC, blocks, oracle.scaled)


def _embed_system_block(lay, blk) -> sp.csr_matrix:
    """Joint-register embedding of a system operator of mixed parity."""
    P = alg.parity_operator(lay.n_orbitals).toarray()
    even = 0.5 * (blk + P @ blk @ P)
    odd = blk - even
    return lay.embed_system(even) + lay.embed_system(odd, odd=True)


def _fermionic_to_rdt(h, oracle, gen):
    lay = gen.layout
    n_side = lay.n_side
    K = lay.K
    if K != oracle.K:
        raise DimensionMismatch("oracle and generator disagree on the number of modes")
    raises = [alg.jw_ladder(n_side, lay.mode_site(k))[1] for k in range(K)]
    vac = np.zeros(2 ** K)
    vac[0] = 1.0
    vac_d = alg.csr(sp.diags(vac)) if lay.ordering == "dissipatons_first" else None
    eye_s = alg.identity(lay.system_dim)
    if lay.ordering == "system_first":
        proj = alg.kron(eye_s, alg.csr(sp.diags(vac)))
    else:
        proj = alg.kron(vac_d, eye_s)
    P = alg.parity_operator(lay.n_orbitals).toarray()
    total = sp.csr_matrix((lay.side_dim, lay.side_dim), dtype=complex)
    for (n, m), blk in h.blocks.items():
        if not np.any(blk):
            continue
        scale = 1.0 + 0j
        for k, md in enumerate(oracle.modes):
            zp, zm = md.zeta
            if n[k]:
                scale *= zp
            if m[k]:
                scale *= zm
        if scale == 0:
            raise DegenerateZeta(f"zeta = 0 with occupied index {(n, m)}")
        ket = alg.identity(lay.side_dim)
        for k in range(K):
            if m[k]:
                ket = ket @ raises[k]
        bra = alg.identity(lay.side_dim)
        for k in reversed(range(K)):
            if n[k]:
                bra = bra @ raises[k]
        if sum(m) % 2:
            blk = P @ blk @ P
        op = _embed_system_block(lay, blk / scale) @ ket @ proj @ bra.getH()
        total = total + op
    return total.toarray().reshape(-1)
