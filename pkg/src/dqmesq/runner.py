"""
Method dispatch shared by the command line and the acceptance suite:
trajectories from any of the four propagation routes, method comparison and
parameter scaling studies.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ComplexModeRejected, ConfigError, IncompatibleMethods
from .heom import HeomOracle, hierarchy_to_rdt
from .models import ModelJob
from .modes import BOSONIC
from .propagate import DENSE_LIMIT, ObservableReader, PropagationConfig, propagate
from .pseudomode import build_pseudomode_generator, extract_rdt, propagate_pseudomode
from .qsim import LcuConfig, LcuPropagator, RegisterLayout, run_lcu

METHODS = ("classical", "heom", "qsim", "pseudomode")


@dataclass
class MethodResult:
    """Observable time series produced by one method."""

    method: str
    times: np.ndarray
    values: dict
    wall_time_s: float
    info: dict = field(default_factory=dict)


def _interval(job: ModelJob) -> float:
    return job.prop.dt * job.prop.stride


def _stride_for(dt: float, interval: float) -> int:
    s = int(round(interval / dt))
    if s < 1 or abs(s * dt - interval) > 1e-9 * max(1.0, interval):
        raise ConfigError(f"step {dt} does not divide the record interval {interval}",
                          field="propagation.stride")
    return s


def _collect(records, names):
    return {n: np.array([r[n] for r in records]) for n in names}


def run_method(job: ModelJob, method: str, seed: int | None = None,
               lcu: LcuConfig | None = None) -> MethodResult:
    """Propagate ``job`` with one method; values are read at the job's record interval."""
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; choose from {', '.join(METHODS)}",
                          field="method")
    gen = job.generator
    spec = job.observable_spec()
    reader = ObservableReader(gen, spec)
    interval = _interval(job)
    info = {}
    t0 = time.perf_counter()
    if method == "classical":
        traj = propagate(gen, job.initial_state(), job.prop, record=reader)
        times, records = traj.times, traj.records
    elif method == "heom":
        oracle = HeomOracle(job.system, job.modesets, **job.heom_kwargs())
        if spec.currents:
            times, hs = oracle.propagate(oracle.initial(job.rho0), job.prop.dt,
                                         job.prop.t_final, stride=job.prop.stride)
            records = [reader(hierarchy_to_rdt(h, oracle, gen)) for h in hs]
        else:
            times, rhos = oracle.propagate_rho_s(job.rho0, job.prop.dt, job.prop.t_final,
                                                 stride=job.prop.stride)
            records = []
            for rho in rhos:
                tr = np.trace(rho)
                rho = rho / tr
                rec = {}
                for name, op in spec.operators.items():
                    if op is None:
                        rec[name] = tr.real
                        continue
                    val = np.trace(op @ rho)
                    rec[name] = val.real if np.allclose(op, op.conj().T) else val
                records.append(rec)
        info["heom_dim"] = oracle.dim
    elif method == "qsim":
        cfg = lcu or job.lcu
        if seed is not None and cfg.sampled:
            cfg = replace(cfg, seed=seed)
        prop = LcuPropagator(gen, cfg)
        traj = run_lcu(gen, job.initial_state(), cfg, job.prop.t_final,
                       stride=_stride_for(cfg.dt, interval), record=reader, prop=prop)
        times, records = traj.times, traj.records
        info.update(qubits=prop.layout.n_qubits, eps=cfg.eps, lcu_dt=cfg.dt,
                    backend=cfg.backend, shots=traj.shots)
    else:
        if gen.statistics != BOSONIC:
            raise IncompatibleMethods("the pseudomode route exists for bosonic environments only")
        try:
            pg = build_pseudomode_generator(job.system, job.modesets,
                                            n_max=tuple(c + 1 for c in job.fock.caps))
        except ComplexModeRejected as exc:
            raise IncompatibleMethods(f"pseudomode method needs real modes: {exc}") from exc
        times, records = propagate_pseudomode(
            pg, pg.product_state(job.rho0), job.prop.dt, job.prop.t_final,
            stride=job.prop.stride, record=lambda s: reader(extract_rdt(s, gen.layout).vec))
        info["pseudomode_dim"] = (pg.system_dim * pg.D) ** 2
    wall = time.perf_counter() - t0
    return MethodResult(method, np.asarray(times), _collect(records, spec.names), wall, info)


def _common(a: MethodResult, b: MethodResult):
    ka = np.round(a.times / 1e-9).astype(np.int64)
    kb = np.round(b.times / 1e-9).astype(np.int64)
    common, ia, ib = np.intersect1d(ka, kb, return_indices=True)
    if common.size == 0:
        raise IncompatibleMethods("methods share no record times")
    return ia, ib


def compare_results(results: list, gate: float | None = None) -> dict:
    """Pairwise max-abs and RMS differences of every observable against the first method."""
    if len(results) < 2:
        raise ConfigError("compare needs at least two methods", field="methods")
    base = results[0]
    rows, worst = [], 0.0
    for other in results[1:]:
        ia, ib = _common(base, other)
        for name in base.values:
            d = np.abs(base.values[name][ia] - other.values[name][ib])
            mx = float(np.max(d))
            worst = max(worst, mx)
            rows.append({"reference": base.method, "method": other.method, "observable": name,
                         "max_abs": mx, "rms": float(np.sqrt(np.mean(d ** 2))),
                         "n_points": int(ia.size)})
    report = {"methods": [r.method for r in results], "differences": rows, "max_abs": worst,
              "wall_time_s": {r.method: r.wall_time_s for r in results}}
    if gate is not None:
        report["gate"] = gate
        report["passed"] = bool(worst <= gate)
    return report


def compare_methods(job: ModelJob, methods, gate: float | None = None, seed=None):
    """Run ``methods`` on ``job``; returns ``(report, results)``."""
    methods = list(methods)
    if len(methods) < 2:
        raise ConfigError("compare needs at least two methods", field="methods")
    if "pseudomode" in methods:
        bad = [m for ms in job.modesets.values() for m in ms.modes
               if abs(m.eta.imag) > 1e-12 or abs(m.gamma.imag) > 1e-12]
        if bad or job.statistics != BOSONIC:
            raise IncompatibleMethods("pseudomode comparison requires a bosonic job with real modes")
    results = [run_method(job, m, seed=seed) for m in methods]
    return compare_results(results, gate), results


# -- scaling ---------------------------------------------------------------

def _check_sweep(values):
    values = [float(v) for v in values]
    if len(values) < 3:
        raise ConfigError("a scaling sweep needs at least three points", field="sweep.values")
    if any(v <= 0 for v in values):
        raise ConfigError("sweep values must be positive", field="sweep.values")
    r = [values[i] / values[i + 1] for i in range(len(values) - 1)]
    if any(abs(x - r[0]) > 1e-6 * abs(r[0]) for x in r) or abs(r[0] - 1) < 1e-12:
        raise ConfigError("sweep values must be geometrically spaced", field="sweep.values")
    return values


def reference_trajectory(job: ModelJob, t_final: float | None = None) -> MethodResult:
    """Classical trajectory at the job's record interval, exact in time when affordable.

    Small generators are stepped with the dense exponential over one record
    interval (no time-step error at all); larger ones fall back to RK4 with the
    job's step.
    """
    t_final = job.prop.t_final if t_final is None else t_final
    interval = _interval(job)
    if job.generator.dim <= DENSE_LIMIT:
        cfg = PropagationConfig(dt=interval, t_final=t_final, method="dense-exponential", stride=1)
    else:
        cfg = PropagationConfig(dt=job.prop.dt, t_final=t_final, stride=job.prop.stride)
    j = replace(job, prop=cfg)
    j.__dict__["generator"] = job.generator
    res = run_method(j, "classical")
    return res


def scaling_study(job: ModelJob, parameter: str, values, backend: str | None = None) -> dict:
    """Max-abs LCU error against the classical oracle for a geometric sweep.

    ``parameter`` is ``"eps"`` (``dt`` fixed at the job's LCU step) or
    ``"dt"`` (``eps`` fixed). The fitted slope is that of log(error) against
    log(parameter) by least squares.
    """
    if parameter not in ("eps", "dt"):
        raise ConfigError(f"sweep parameter must be 'eps' or 'dt', got {parameter!r}",
                          field="sweep.parameter")
    values = _check_sweep(values)
    ref = reference_trajectory(job)
    base = replace(job.lcu, backend=backend or job.lcu.backend)
    errors, walls = [], []
    for v in values:
        cfg = replace(base, **{parameter: v})
        res = run_method(job, "qsim", lcu=cfg)
        ia, ib = _common(ref, res)
        err = max(float(np.max(np.abs(ref.values[n][ia] - res.values[n][ib]))) for n in ref.values)
        errors.append(err)
        walls.append(res.wall_time_s)
    logs = np.log(np.array(values)), np.log(np.array(errors))
    slope = float(np.polyfit(logs[0], logs[1], 1)[0]) if all(e > 0 for e in errors) else math.nan
    ratios = [errors[i] / errors[i + 1] for i in range(len(errors) - 1)]
    return {"parameter": parameter, "values": values, "errors": errors, "slope": slope,
            "ratios": ratios, "fixed": {"eps": base.eps, "dt": base.dt, "backend": base.backend},
            "reference": "classical", "wall_time_s": walls}


def qubit_count(job: ModelJob) -> int:
    return RegisterLayout.from_generator(job.generator).n_qubits
