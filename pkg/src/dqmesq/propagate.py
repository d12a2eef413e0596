"""
Classical time stepping of the reduced density tensor and observable readout.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
import scipy.linalg as sla

from . import algebra as alg
from .errors import DimensionMismatch, NonFinite, UnknownObservable, ZeroTrace
from .generator import Generator, label_part
from .modes import FERMIONIC

DENSE_LIMIT = 4096
TRACE_FLOOR = 1e-14


@dataclass
class RdtState:
    """Flat reduced density tensor together with the layout that reads it."""

    vec: np.ndarray
    layout: object

    @classmethod
    def product(cls, gen: Generator, rho_s) -> "RdtState":
        rho_s = np.asarray(rho_s, dtype=complex)
        d = gen.layout.system_dim
        if rho_s.shape != (d, d):
            raise DimensionMismatch(f"rho_S shape {rho_s.shape}, system dimension {d}")
        return cls(gen.layout.product_state(rho_s), gen.layout)

    def copy(self) -> "RdtState":
        return RdtState(self.vec.copy(), self.layout)

    @property
    def vacuum_block(self) -> np.ndarray:
        return self.layout.vacuum_block(self.vec)


@dataclass(frozen=True)
class PropagationConfig:
    dt: float = 0.01
    t_final: float = 10.0
    method: str = "rk4"
    stride: int = 10

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_final < self.dt:
            raise ValueError("t_final must be at least one step")
        if self.method not in ("rk4", "dense-exponential"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))


@dataclass
class Trajectory:
    times: np.ndarray
    records: list


def rk4_step(A, v, dt):
    """One classical RK4 step of ``dv/dt = A v``."""
    k1 = A @ v
    k2 = A @ (v + (0.5 * dt) * k1)
    k3 = A @ (v + (0.5 * dt) * k2)
    k4 = A @ (v + dt * k3)
    return v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def propagate(gen: Generator, state: RdtState, cfg: PropagationConfig,
              record: Callable | None = None) -> Trajectory:
    """Integrate ``d/dt rho = -i Lambda rho`` and record every ``cfg.stride`` steps.

    ``record(vec)`` maps the flat state to whatever should be kept; by default
    a copy of the full state is stored as an ``RdtState``.
    """
    if state.vec.shape != (gen.dim,):
        raise DimensionMismatch(f"state of length {state.vec.size}, generator dimension {gen.dim}")
    if record is None:
        def record(v):
            return RdtState(v.copy(), gen.layout)
    A = (-1j) * gen.matrix
    if cfg.method == "dense-exponential":
        if gen.dim > DENSE_LIMIT:
            raise ValueError(f"dense exponential limited to dimension {DENSE_LIMIT}, got {gen.dim}")
        U = sla.expm(A.toarray() * cfg.dt)

        def step(v):
            return U @ v
    else:
        def step(v):
            return rk4_step(A, v, cfg.dt)
    v = np.asarray(state.vec, dtype=complex).copy()
    times, records = [0.0], [record(v)]
    n = cfg.n_steps
    for i in range(1, n + 1):
        v = step(v)
        if not np.isfinite(v).all():
            raise NonFinite(f"non-finite state at step {i} (t = {i * cfg.dt:g}); "
                            "reduce dt or enlarge the truncation")
        if i % cfg.stride == 0 or i == n:
            times.append(i * cfg.dt)
            records.append(record(v))
    return Trajectory(np.array(times), records)


def raw_trace(state: RdtState) -> complex:
    """Trace of the vacuum block before any renormalization."""
    return complex(np.trace(state.vacuum_block))


def reduced_density(state: RdtState) -> np.ndarray:
    """Vacuum block renormalized by its trace; the state itself is untouched."""
    blk = state.vacuum_block
    tr = np.trace(blk)
    if abs(tr) < TRACE_FLOOR:
        raise ZeroTrace("vacuum block has vanishing trace")
    return blk / tr


# -- observables -----------------------------------------------------------

def number_operator(n_orbitals: int, orbitals=None) -> np.ndarray:
    """Total occupation of the listed orbitals (all by default)."""
    out = np.zeros((2 ** n_orbitals,) * 2, dtype=complex)
    for u in (range(n_orbitals) if orbitals is None else orbitals):
        c, cd = alg.jw_ladder(n_orbitals, u)
        out += (cd @ c).toarray()
    return out


def current_functional(gen: Generator, label) -> np.ndarray:
    """Row vector ``w`` with ``w @ vec`` = current out of reservoir ``label`` into the system.

    The current is the rate of change of the system occupation caused by the
    terms of that reservoir alone, ``tr[N_S <0|(-i Lambda_label) rho|0>]``, so
    only first-occupied blocks contribute. With the default register ordering
    this equals

        I = i sum_k [ zeta+_k tr(c B_k P) - zeta-_k tr(c^+ P K_k) ]

    where ``B_k`` (``K_k``) is the block with mode k occupied on the bra (ket)
    register and ``P`` the system parity; the parity factors are the
    Jordan-Wigner strings the dissipaton operators carry over the system.
    """
    if gen.statistics != FERMIONIC:
        raise UnknownObservable("currents are defined for fermionic environments")
    lay = gen.layout
    N = number_operator(lay.n_orbitals)
    idx = lay.vacuum_block(np.arange(gen.dim)).real.astype(np.int64)
    u = np.zeros(gen.dim, dtype=complex)
    u[idx.reshape(-1)] = N.T.reshape(-1)
    part = label_part(gen, label)
    return (-1j) * (part.T @ u)


@dataclass
class ObservableSpec:
    """Named readouts.

    ``operators``: name -> system operator ``O`` read as ``tr(O rho_S)``.
    Hermitian operators give real values, others complex (CSV emits ``_re`` /
    ``_im`` columns). ``currents``: name -> list of reservoir labels whose
    currents are summed.
    """

    operators: Mapping = field(default_factory=dict)
    currents: Mapping = field(default_factory=dict)

    @property
    def names(self) -> list:
        return list(self.operators) + list(self.currents)


_POP = re.compile(r"^P(\d+)$")
_CUR = re.compile(r"^current\[(.+)\]$")


def standard_observables(names, gen: Generator, extra: Mapping | None = None) -> ObservableSpec:
    """Build an ObservableSpec from names.

    Recognized: ``P<i>`` (population of basis state i), ``P1_minus_P0``,
    ``trace`` (pre-normalization trace, as a diagnostic), ``N`` (fermionic
    total occupation), ``current`` (sum over all reservoirs) and
    ``current[<label>]``; ``extra`` supplies model-specific operators.
    """
    d = gen.layout.system_dim
    extra = dict(extra or {})
    ops, cur = {}, {}
    labels = {str(lbl): lbl for lbl in (gen.system.couplings if gen.system else [])}
    for name in names:
        if name in extra:
            ops[name] = np.asarray(extra[name], dtype=complex)
        elif name == "P1_minus_P0":
            if d < 2:
                raise UnknownObservable("P1_minus_P0 needs at least two levels")
            o = np.zeros((d, d), dtype=complex)
            o[1, 1], o[0, 0] = 1, -1
            ops[name] = o
        elif name == "trace":
            ops[name] = None
        elif _POP.match(name):
            i = int(_POP.match(name).group(1))
            if i >= d:
                raise UnknownObservable(f"{name}: basis index out of range")
            o = np.zeros((d, d), dtype=complex)
            o[i, i] = 1
            ops[name] = o
        elif name == "N":
            if gen.statistics != FERMIONIC:
                raise UnknownObservable("N is defined for fermionic systems")
            ops[name] = number_operator(gen.layout.n_orbitals)
        elif name == "current":
            if gen.statistics != FERMIONIC:
                raise UnknownObservable("current is defined for fermionic environments")
            cur[name] = list(labels.values())
        elif _CUR.match(name):
            key = _CUR.match(name).group(1)
            if gen.statistics != FERMIONIC or key not in labels:
                raise UnknownObservable(f"{name}: no fermionic reservoir {key!r}")
            cur[name] = [labels[key]]
        else:
            raise UnknownObservable(f"unknown observable {name!r}")
    return ObservableSpec(ops, cur)


class ObservableReader:
    """Precomputed readout of an ObservableSpec for one generator."""

    def __init__(self, gen: Generator, spec: ObservableSpec):
        self.gen = gen
        self.spec = spec
        self._cur = {}
        for name, labels in spec.currents.items():
            w = sum(current_functional(gen, lbl) for lbl in labels)
            self._cur[name] = w

    def __call__(self, vec) -> dict:
        lay = self.gen.layout
        blk = lay.vacuum_block(vec)
        tr = np.trace(blk)
        if abs(tr) < TRACE_FLOOR:
            raise ZeroTrace("vacuum block has vanishing trace")
        rho = blk / tr
        out = {}
        for name, op in self.spec.operators.items():
            if op is None:
                out[name] = tr.real if abs(tr.imag) < 1e-12 else tr
                continue
            val = np.trace(op @ rho)
            out[name] = val.real if alg.is_hermitian(op) else val
        for name, w in self._cur.items():
            out[name] = (w @ vec / tr).real
        return out


def observables(state: RdtState, spec: ObservableSpec, gen: Generator) -> dict:
    return ObservableReader(gen, spec)(state.vec)


def spectral_abscissa(gen: Generator, dense_limit: int = DENSE_LIMIT) -> float | None:
    """Largest real part of the spectrum of ``-i Lambda``; None above ``dense_limit``.

    A positive value means the truncated equation has growing solutions, so
    trajectories eventually diverge no matter how accurately they are stepped.
    """
    if gen.dim > dense_limit:
        return None
    ev = np.linalg.eigvals((-1j * gen.matrix).toarray())
    return float(np.max(ev.real))
