"""
Statevector simulation of the LCU propagation circuit.

The reduced density tensor is loaded as a normalized qubit state (its norm
kept aside in a scalar ledger ``Z``). One step of the circuit is

    ancilla: |0> -H- o----------- * -RY(-pi/2)- <0|
                      |           |
    data   :  ---U0---U+(eps)---U-(eps)---------

with ``U0 = exp(-i Lambda0 dt)``, ``U+-(eps) = +-i exp(-+i eps (I - i Lambda1 dt))``,
``Lambda0`` / ``Lambda1`` the Hermitian / anti-Hermitian parts of ``Lambda``.
The U+ gate fires on ancilla |0>, U- on |1>. Projecting the ancilla onto |0>
leaves ``sin(eps A) U0 psi ~ eps exp(-i Lambda dt) psi`` with
``A = I - i Lambda1 dt``; the norm of that vector divided by ``sin(eps)`` goes into
``Z``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import algebra as alg
from .errors import DimensionMismatch, VanishingProjection, ZeroState
from .generator import Generator
from .modes import BOSONIC
from .propagate import RdtState, Trajectory

DENSE_LIMIT = 4096
PROJECTION_FLOOR = 1e-12


def _qubits_for(n: int) -> int:
    return max(0, int(math.ceil(math.log2(n)))) if n > 1 else 0


@dataclass(frozen=True)
class RegisterLayout:
    """Qubit registers holding a reduced density tensor, plus one ancilla.

    ``registers`` lists ``(name, n_qubits)`` from the most significant data
    qubit down; the ancilla is qubit 0 and the data qubits are 1..n_data in
    that order. ``positions[i]`` is the data-basis index of RDT component i;
    every other data amplitude is padding and stays zero.
    """

    statistics: str
    registers: tuple
    positions: np.ndarray = field(repr=False)

    @classmethod
    def from_generator(cls, gen: Generator) -> "RegisterLayout":
        lay = gen.layout
        if gen.statistics == BOSONIC:
            d = lay.system_dim
            qs = _qubits_for(d)
            qm = [_qubits_for(c + 1) for c in lay.fock.caps]
            regs = [("sys_ket", qs), ("sys_bra", qs)] + [(f"mode{k}", q) for k, q in enumerate(qm)]
            dpad = [2 ** q for q in qm]
            strides = np.cumprod([1] + dpad[::-1])[:-1][::-1]
            cfg_pos = np.array([int(np.dot(c, strides)) for c in lay.fock.configs], dtype=np.int64)
            Dpad = int(np.prod(dpad)) if dpad else 1
            sys_pos = (np.arange(d)[:, None] * 2 ** qs + np.arange(d)[None, :]).reshape(-1)
            pos = (sys_pos[:, None] * Dpad + cfg_pos[None, :]).reshape(-1)
        else:
            no, K = lay.n_orbitals, lay.K
            if lay.ordering == "system_first":
                side = [("sys", no), ("modes", K)]
            else:
                side = [("modes", K), ("sys", no)]
            regs = [(f"ket_{n}", q) for n, q in side] + [(f"bra_{n}", q) for n, q in side]
            pos = np.arange(lay.dim, dtype=np.int64)
        return cls(gen.statistics, tuple(regs), pos)

    @property
    def n_data(self) -> int:
        return sum(q for _, q in self.registers)

    @property
    def n_qubits(self) -> int:
        return self.n_data + 1

    @property
    def data_dim(self) -> int:
        return 2 ** self.n_data

    @property
    def dim(self) -> int:
        return 2 ** self.n_qubits

    @property
    def is_dense(self) -> bool:
        return self.positions.size == self.data_dim and bool(np.all(self.positions == np.arange(self.data_dim)))

    def qubit_map(self) -> dict:
        """Register name -> list of qubit indices (ancilla is qubit 0)."""
        out, q = {"ancilla": [0]}, 1
        for name, n in self.registers:
            out[name] = list(range(q, q + n))
            q += n
        return out

    def lift(self, op) -> sp.csr_matrix:
        """Operator on RDT components -> operator on the data register (zero on padding)."""
        op = alg.csr(op)
        if self.is_dense:
            return op
        S = sp.csr_matrix((np.ones(self.positions.size), (self.positions, np.arange(self.positions.size))),
                          shape=(self.data_dim, self.positions.size), dtype=complex)
        return alg.csr(S @ op @ S.T)


@dataclass
class QubitState:
    """Unit-norm amplitudes over ancilla (most significant) + data, and the norm ledger."""

    amplitudes: np.ndarray
    Z: float
    layout: RegisterLayout
    shots: int = 0

    def data(self, ancilla: int = 0) -> np.ndarray:
        return self.amplitudes.reshape(2, -1)[ancilla]


@dataclass(frozen=True)
class LcuConfig:
    eps: float = 0.05
    dt: float = 0.01
    backend: str = "exact"
    sampled: bool = False
    seed: int | None = None

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.backend not in ("exact", "trotter"):
            raise ValueError(f"unknown backend {self.backend!r}")


def encode_rdt(state, layout: RegisterLayout) -> QubitState:
    vec = state.vec if isinstance(state, RdtState) else np.asarray(state, dtype=complex)
    if vec.shape != layout.positions.shape:
        raise DimensionMismatch(f"RDT of length {vec.size}, layout holds {layout.positions.size}")
    norm = float(np.linalg.norm(vec))
    if norm == 0.0 or not np.isfinite(norm):
        raise ZeroState("cannot encode a zero (or non-finite) reduced density tensor")
    amps = np.zeros(layout.dim, dtype=complex)
    amps[layout.positions] = vec / norm
    return QubitState(amps, norm, layout)


def decode_rdt(qs: QubitState) -> np.ndarray:
    """RDT vector ``Z * psi`` read from the ancilla-|0> data amplitudes."""
    return qs.Z * qs.data(0)[qs.layout.positions]


def split_generator(gen_or_matrix):
    """Hermitian and anti-Hermitian parts ``(Lambda0, Lambda1)``."""
    L = gen_or_matrix.matrix if isinstance(gen_or_matrix, Generator) else alg.csr(gen_or_matrix)
    if L.shape[0] != L.shape[1]:
        raise DimensionMismatch("generator must be square")
    Lh = L.getH()
    return alg.csr(0.5 * (L + Lh)), alg.csr(0.5 * (L - Lh))


class ExpAction:
    """``v -> exp(t M) v`` for a fixed sparse ``M`` and scalar ``t``.

    Small problems use a dense matrix exponential (scaling and squaring).
    Larger ones use a truncated Taylor series over ``s`` sub-steps, with ``s``
    fixed once from the exact 1-norm of ``t M`` so each application costs only
    matrix-vector products.
    """

    def __init__(self, M, t, dense_limit: int = DENSE_LIMIT, tol: float = 2.0 ** -53):
        M = alg.csr(M)
        self.dim = M.shape[0]
        self.tol = tol
        if self.dim <= dense_limit:
            self.U = sla.expm(t * M.toarray())
            self.M = None
            return
        self.U = None
        self.M = alg.csr(t * M)
        norm1 = float(abs(self.M).sum(axis=0).max()) if self.M.nnz else 0.0
        self.s = max(1, int(math.ceil(norm1 / 0.5)))
        self.M = alg.csr(self.M / self.s)

    def __call__(self, v):
        if self.U is not None:
            return self.U @ v
        if self.M.nnz == 0:
            return v.copy()
        y = v.copy()
        for _ in range(self.s):
            term = y
            acc = y.copy()
            for k in range(1, 60):
                term = (self.M @ term) / k
                acc += term
                if np.linalg.norm(term) <= self.tol * np.linalg.norm(acc):
                    break
            y = acc
        return y


class LcuPropagator:
    """Gates of one LCU step for a given generator and configuration."""

    def __init__(self, gen: Generator, cfg: LcuConfig, layout: RegisterLayout | None = None):
        self.gen = gen
        self.cfg = cfg
        self.layout = layout or RegisterLayout.from_generator(gen)
        dt, eps = cfg.dt, cfg.eps
        if cfg.backend == "exact":
            L0, L1 = split_generator(gen)
            self.u0 = [ExpAction(self.layout.lift(-1j * L0), dt)]
            self.up = [ExpAction(self.layout.lift(L1), -eps * dt)]
            self.um = [ExpAction(self.layout.lift(L1), eps * dt)]
        else:
            # first-order product over the generator's own terms
            self.u0, self.up, self.um = [], [], []
            for term in gen.terms:
                T0, T1 = split_generator(term.matrix)
                if T0.nnz:
                    self.u0.append(ExpAction(self.layout.lift(-1j * T0), dt))
                if T1.nnz:
                    self.up.append(ExpAction(self.layout.lift(T1), -eps * dt))
                    self.um.append(ExpAction(self.layout.lift(T1), eps * dt))
        # exp(-+i eps (I - i Lambda1 dt)) = exp(-+i eps) exp(-+eps dt Lambda1)
        self.phase_p = 1j * np.exp(-1j * eps)
        self.phase_m = -1j * np.exp(1j * eps)

    @staticmethod
    def _product(actions):
        out = None
        for a in actions:
            out = a.U if out is None else a.U @ out
        return out

    @property
    def fused(self):
        """Ancilla-|0> block of one whole step as a single dense matrix.

        Only available when every factor is held densely; it is the same linear
        map the gate sequence applies (H, U0, controlled U+/U-, RY, projection),
        multiplied out once so that each step costs one matrix-vector product.
        """
        if not hasattr(self, "_fused"):
            acts = self.u0 + self.up + self.um
            if acts and all(a.U is not None for a in acts):
                eye = np.eye(self.layout.data_dim, dtype=complex)
                U0 = self._product(self.u0) if self.u0 else eye
                Up = self._product(self.up) if self.up else eye
                Um = self._product(self.um) if self.um else eye
                self._fused = _C * (_C * self.phase_p * Up + _S * self.phase_m * Um) @ U0
            else:
                self._fused = None
        return self._fused

    @staticmethod
    def _apply(actions, v):
        for a in actions:
            v = a(v)
        return v

    def U0(self, v):
        return self._apply(self.u0, v)

    def Uplus(self, v):
        return self.phase_p * self._apply(self.up, v)

    def Uminus(self, v):
        return self.phase_m * self._apply(self.um, v)


_C = _S = 1.0 / math.sqrt(2.0)


def lcu_step(qs: QubitState, prop: LcuPropagator, rng: np.random.Generator | None = None) -> QubitState:
    """Apply one circuit step and project the ancilla onto |0>.

    With ``rng`` given (sampled mode) the number of repetitions until the
    ancilla reads 0 is drawn from the geometric distribution of the success
    probability and added to ``shots``; the kept state is the same.
    """
    amps = qs.amplitudes.reshape(2, -1)
    if np.linalg.norm(amps[1]) > 1e-12:
        raise ValueError("lcu_step expects the ancilla in |0>")
    if prop.fused is not None:
        v = prop.fused @ amps[0]
    else:
        # H on the ancilla gives two equal branches; U0 is uncontrolled, so apply it once
        branch = prop.U0(amps[0] * _C)
        r0 = prop.Uplus(branch)       # controlled on ancilla |0>
        r1 = prop.Uminus(branch)      # controlled on ancilla |1>
        # RY(-pi/2), then keep the ancilla-|0> row
        v = _C * r0 + _S * r1
    p = float(np.linalg.norm(v))
    if not p >= PROJECTION_FLOOR:
        raise VanishingProjection(f"ancilla-0 probability {p * p:.3e} below floor")
    shots = qs.shots
    if rng is not None:
        shots += int(rng.geometric(min(1.0, p * p)))
    out = np.zeros_like(qs.amplitudes)
    out[: v.size] = v / p
    # sin(eps) is the branch weight of the identity part; dividing by it keeps Z the RDT norm
    return QubitState(out, qs.Z * p / math.sin(prop.cfg.eps), qs.layout, shots)


def run_lcu(gen: Generator, rho0, cfg: LcuConfig, t_final: float, stride: int = 10,
            record: Callable | None = None, prop: LcuPropagator | None = None) -> Trajectory:
    """Repeated LCU steps; ``record`` receives the decoded RDT vector at each readout.

    By default the decoded reduced density (renormalized by its trace) is kept.
    """
    state = rho0 if isinstance(rho0, RdtState) else RdtState.product(gen, rho0)
    prop = prop or LcuPropagator(gen, cfg)
    if record is None:
        def record(vec):
            blk = gen.layout.vacuum_block(vec)
            return blk / np.trace(blk)
    qs = encode_rdt(state, prop.layout)
    rng = np.random.default_rng(cfg.seed) if cfg.sampled else None
    n = int(round(t_final / cfg.dt))
    times, records = [0.0], [record(state.vec.copy())]
    for i in range(1, n + 1):
        qs = lcu_step(qs, prop, rng)
        if i % stride == 0 or i == n:
            times.append(i * cfg.dt)
            records.append(record(decode_rdt(qs)))
    traj = Trajectory(np.array(times), records)
    traj.shots = qs.shots
    return traj


def _factor_counts(gen: Generator, cfg: LcuConfig):
    if cfg.backend == "exact":
        return 1, 1, 1
    n0 = n1 = 0
    for term in gen.terms:
        T0, T1 = split_generator(term.matrix)
        n0 += bool(T0.nnz)
        n1 += bool(T1.nnz)
    return n0, n1, n1


def circuit_gates(gen: Generator, cfg: LcuConfig, layout: RegisterLayout | None = None) -> list:
    """Human-readable gate list of one step (qubit 0 is the ancilla).

    Only the structure is reported, so no exponentials are built.
    """
    lay = layout or RegisterLayout.from_generator(gen)
    data = list(range(1, lay.n_qubits))
    n0, n_up, n_um = _factor_counts(gen, cfg)
    gates = [{"gate": "H", "targets": [0]}]
    for j in range(n0):
        gates.append({"gate": "U0" if n0 == 1 else f"U0[{j}]", "targets": data,
                      "matrix": "exp(-i Lambda0 dt)", "dt": cfg.dt})
    gates.append({"gate": "U+eps", "controls": [0], "control_state": 0, "targets": data,
                  "matrix": "i exp(-i eps (I - i Lambda1 dt))", "eps": cfg.eps, "dt": cfg.dt,
                  "factors": n_up})
    gates.append({"gate": "U-eps", "controls": [0], "control_state": 1, "targets": data,
                  "matrix": "-i exp(+i eps (I - i Lambda1 dt))", "eps": cfg.eps, "dt": cfg.dt,
                  "factors": n_um})
    gates.append({"gate": "RY", "targets": [0], "angle": -math.pi / 2})
    gates.append({"gate": "PROJECT", "targets": [0], "outcome": 0})
    return gates
