"""
Built-in benchmark models with ready-to-run defaults.

Four models are provided: ``spin_boson``, ``siam`` (single-impurity Anderson),
``excitonic_dimer`` and ``diam`` (double-impurity Anderson). Energies are in
the model's reference unit (Omega, U, V and Delta respectively) and times in
its inverse.

Override rules
--------------
* A coupling-strength override (``lam`` for spin_boson, ``Gamma`` for siam)
  rescales a tabulated decomposition linearly.
* Overrides of environment shape or temperature (``T``, ``omega0``, ``zeta``,
  ``W``, ``mu``, ``K``, ``leads``, ``bias``) replace the table by a generated
  decomposition (flagged ``generated``).
* Hamiltonian parameters only touch ``H_S``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np

from . import algebra as alg
from .errors import NoTableAvailable, UnknownModel, UnknownParameter
from .generator import Generator, SystemSpec, build_lambda
from .modes import (
    BOSONIC,
    FERMIONIC,
    ExpMode,
    ModeSet,
    SpectralDensity,
    decompose_spectral_density,
    fermionic_modeset,
    pair_conjugates,
)
from .propagate import ObservableSpec, PropagationConfig, RdtState, standard_observables
from .qsim import LcuConfig

MODELS = ("spin_boson", "siam", "excitonic_dimer", "diam")
REGIMES = ("low", "high")

# (eta, gamma) in units of Omega^2, Omega
_SB_TABLES = {
    "low": [(0.497 + 0.082j, 0.500 + 0.866j),
            (0.035 - 0.082j, 0.500 - 0.866j),
            (-0.032, 3.873)],
    "high": [(2.231 + 1.155j, 0.500 + 0.866j),
             (1.769 - 1.155j, 0.500 - 0.866j)],
}
# sigma = +/- share the table; units U^2, U
_SIAM_TABLES = {
    "low": [(0.062 - 0.038j, 1.0), (-0.037j, 0.393), (0.075j, 1.630)],
    "high": [(0.062 + 0.138j, 1.0), (-0.164j, 0.786), (0.026j, 3.261)],
}

_DEFAULTS = {
    "spin_boson": {
        "Omega": 1.0, "V": 1.0, "lam": 0.4, "omega0": 1.0, "zeta": 1.0,
        "T": None, "K": None, "N_max": 3, "tier_cap": None,
        "dt": 0.01, "eps": 0.05, "t_final": 10.0, "stride": 10, "initial": 1,
    },
    "siam": {
        "U": 1.0, "E0": None, "W": 1.0, "Gamma": 0.125, "beta_U": None, "mu": 0.0,
        "K": 3, "leads": 1, "bias": 0.0,
        "dt": 0.01, "eps": 0.005, "t_final": 10.0, "stride": 10, "initial": 3,
    },
    "excitonic_dimer": {
        "V": 1.0, "eps1": 1.0, "eps2": 1.0, "lam": 0.5, "gamma": 5.0, "T": 1.0,
        "K": 2, "N_max": 3, "tier_cap": None,
        "dt": 0.01, "eps": 0.05, "t_final": 10.0, "stride": 10, "initial": 1,
    },
    "diam": {
        "Delta": 1.0, "W": 50.0, "U": 12.0, "UC": 12.0, "t": 10.0, "T": 5.0,
        "eps_u": None, "K": 1,
        "dt": 0.002, "eps": 0.005, "t_final": 2.0, "stride": 10, "initial": 12,
    },
}

_REGIME_T = {"spin_boson": {"low": 0.5, "high": 5.0}, "siam": {"low": 8.0, "high": 4.0}}

# parameters whose override forces a generated decomposition
_SHAPE_KEYS = {
    "spin_boson": {"T", "omega0", "zeta", "K"},
    "siam": {"beta_U", "W", "mu", "K", "leads", "bias"},
}


@dataclass
class ModelJob:
    """Everything needed to propagate one model instance.

    Attributes
    ----------
    name, regime : str
    parameters : dict
        Fully resolved parameter values (defaults plus overrides).
    system : SystemSpec
    modesets : dict
        Environment label -> ModeSet.
    fock : FockLayout or None
        Bosonic truncation; None for fermionic models (complete hierarchy).
    rho0 : ndarray
        Initial reduced density, unit trace.
    observables : tuple of str
    extra_observables : dict
        Model-specific operators referenced by name in ``observables``.
    """

    name: str
    regime: str | None
    parameters: dict
    system: SystemSpec
    modesets: dict
    fock: alg.FockLayout | None
    rho0: np.ndarray
    observables: tuple
    extra_observables: dict = field(default_factory=dict)
    prop: PropagationConfig = field(default_factory=PropagationConfig)
    lcu: LcuConfig = field(default_factory=LcuConfig)

    def __post_init__(self):
        d = self.system.dim
        if self.rho0.shape != (d, d):
            raise ValueError(f"initial state shape {self.rho0.shape}, system dimension {d}")
        if abs(np.trace(self.rho0) - 1) > 1e-12:
            raise ValueError("initial reduced density must have unit trace")
        if self.fock is not None:
            n_modes = sum(len(ms) for ms in self.modesets.values())
            if self.fock.K != n_modes:
                raise ValueError(f"layout has {self.fock.K} modes, environments supply {n_modes}")

    @property
    def statistics(self) -> str:
        return self.system.statistics

    @property
    def generated(self) -> bool:
        return any(ms.generated for ms in self.modesets.values())

    @cached_property
    def generator(self) -> Generator:
        if self.statistics == BOSONIC:
            return build_lambda(self.system, self.modesets, layout=self.fock)
        return build_lambda(self.system, self.modesets)

    def initial_state(self) -> RdtState:
        return RdtState.product(self.generator, self.rho0)

    def observable_spec(self, names=None) -> ObservableSpec:
        return standard_observables(names or self.observables, self.generator,
                                    self.extra_observables)

    def heom_kwargs(self) -> dict:
        if self.statistics == BOSONIC:
            return {"n_max": self.fock.caps, "tier_cap": self.fock.tier_cap}
        return {}


# -- mode tables -----------------------------------------------------------

def paper_mode_table(name: str, regime: str | None = None) -> ModeSet:
    """Tabulated decomposition of a built-in model's environment.

    ``spin_boson`` and ``siam`` return the literal tables for ``regime`` in
    {"low", "high"}. ``excitonic_dimer`` and ``diam`` have no table; their
    default generated decomposition is returned instead (``generated=True``).
    """
    if name == "spin_boson":
        if regime not in _SB_TABLES:
            raise NoTableAvailable(f"spin_boson has tables for regimes {REGIMES}, got {regime!r}")
        return pair_conjugates([ExpMode(e, g) for e, g in _SB_TABLES[regime]])
    if name == "siam":
        if regime not in _SIAM_TABLES:
            raise NoTableAvailable(f"siam has tables for regimes {REGIMES}, got {regime!r}")
        etas, gams = zip(*_SIAM_TABLES[regime])
        return fermionic_modeset(etas, gams)
    if name == "excitonic_dimer":
        p = _DEFAULTS[name]
        J = SpectralDensity("drude", {"lam": p["lam"], "gamma": p["gamma"]}, p["T"])
        return decompose_spectral_density(J, p["K"])
    if name == "diam":
        p = _DEFAULTS[name]
        J = SpectralDensity("lorentzian", {"Gamma": p["Delta"], "W": p["W"]}, p["T"])
        return decompose_spectral_density(J, p["K"])
    raise NoTableAvailable(f"no mode table for {name!r}")


# -- helpers ---------------------------------------------------------------

def _resolve(name, regime, overrides):
    if name not in _DEFAULTS:
        raise UnknownModel(f"unknown model {name!r}; choose from {', '.join(MODELS)}")
    params = dict(_DEFAULTS[name])
    unknown = set(overrides or {}) - set(params)
    if unknown:
        raise UnknownParameter(
            f"{name}: unknown parameter(s) {sorted(unknown)}; known: {sorted(params)}")
    if name in _REGIME_T:
        regime = regime or "low"
        if regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}, got {regime!r}")
    else:
        regime = None
    params.update(overrides or {})
    return params, regime


def _pure(d, i):
    if not 0 <= int(i) < d:
        raise ValueError(f"initial basis state {i} outside 0..{d - 1}")
    rho = np.zeros((d, d), dtype=complex)
    rho[int(i), int(i)] = 1.0
    return rho


def _initial(d, spec):
    """An int selects a basis state; a (d, d) array is taken as the density itself."""
    if isinstance(spec, (int, np.integer)):
        return _pure(d, spec)
    rho = np.asarray(spec, dtype=complex)
    if rho.shape != (d, d):
        raise ValueError(f"initial density of shape {rho.shape}, system dimension {d}")
    return rho


def _configs(params):
    prop = PropagationConfig(dt=params["dt"], t_final=params["t_final"], stride=params["stride"])
    lcu = LcuConfig(eps=params["eps"], dt=params["dt"])
    return prop, lcu


def _fermion_ops(n_orb):
    c = [alg.jw_ladder(n_orb, u)[0].toarray() for u in range(n_orb)]
    n = [cu.conj().T @ cu for cu in c]
    return c, n


# -- model builders --------------------------------------------------------

def _spin_boson(params, regime, overrides):
    if params["T"] is None:
        params["T"] = _REGIME_T["spin_boson"][regime]
    # basis (|0>, |1>) = (down, up)
    sz = np.diag([-1.0, 1.0]).astype(complex)
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    H = params["Omega"] * sz + params["V"] * sx
    sys = SystemSpec(H, {"bath": sz})
    if _SHAPE_KEYS["spin_boson"] & set(overrides):
        if params["K"] is None:
            params["K"] = len(_SB_TABLES[regime])
        ms = None
        if params["lam"] > 0:
            J = SpectralDensity("brownian", {"lam": params["lam"], "omega0": params["omega0"],
                                             "zeta": params["zeta"]}, params["T"])
            ms = decompose_spectral_density(J, params["K"])
    else:
        ms = paper_mode_table("spin_boson", regime)
        params["K"] = len(ms)
        ms = ms.scaled(params["lam"] / _DEFAULTS["spin_boson"]["lam"])
    if ms is None:
        # decoupled: keep one silent mode so the layout stays well defined
        ms = pair_conjugates([ExpMode(0.0, 1.0)], generated=True)
        params["K"] = 1
    fock = alg.FockLayout.uniform(len(ms), params["N_max"], params["tier_cap"])
    prop, lcu = _configs(params)
    return ModelJob("spin_boson", regime, params, sys, {"bath": ms}, fock,
                    _initial(2, params["initial"]), ("P1_minus_P0",), {}, prop, lcu)


def _siam(params, regime, overrides):
    if params["beta_U"] is None:
        params["beta_U"] = _REGIME_T["siam"][regime]
    U = params["U"]
    if params["E0"] is None:
        params["E0"] = -U / 2
    (c_up, c_dn), (n_up, n_dn) = _fermion_ops(2)
    H = params["E0"] * (n_up + n_dn) + U * n_up @ n_dn
    leads = int(params["leads"])
    if leads not in (1, 2):
        raise ValueError("siam supports one lead or a symmetric pair of leads")
    if _SHAPE_KEYS["siam"] & set(overrides):
        T = 1.0 / params["beta_U"]  # beta_U is beta in units of 1/U_ref
        mus = [params["mu"]] if leads == 1 else [params["mu"] + params["bias"] / 2,
                                                 params["mu"] - params["bias"] / 2]
        per_lead = params["Gamma"] / leads
        sets = []
        for mu in mus:
            J = SpectralDensity("lorentzian", {"Gamma": per_lead, "W": params["W"], "mu": mu}, T)
            sets.append(decompose_spectral_density(J, params["K"]))
    else:
        ms = paper_mode_table("siam", regime)
        sets = [ms.scaled(params["Gamma"] / _DEFAULTS["siam"]["Gamma"])]
    names = ["L", "R"] if leads == 2 else [None]
    couplings, modesets = {}, {}
    for spin, c in (("up", c_up), ("down", c_dn)):
        for lead, ms in zip(names, sets):
            label = spin if lead is None else f"{lead}_{spin}"
            couplings[label] = c
            modesets[label] = ms
    sys = SystemSpec(H, couplings, FERMIONIC, 2)
    extra = {"P_double": _pure(4, 3)}
    prop, lcu = _configs(params)
    return ModelJob("siam", regime, params, sys, modesets, None,
                    _initial(4, params["initial"]), ("P0", "P_double"), extra, prop, lcu)


def _dimer(params, regime, overrides):
    V = params["V"]
    H = np.zeros((3, 3), dtype=complex)
    H[1, 1], H[2, 2] = params["eps1"], params["eps2"]
    H[1, 2] = H[2, 1] = V
    couplings = {f"exciton{u}": _pure(3, u) for u in (1, 2)}
    J = SpectralDensity("drude", {"lam": params["lam"], "gamma": params["gamma"]}, params["T"])
    ms = decompose_spectral_density(J, params["K"])
    modesets = {label: ms for label in couplings}
    sys = SystemSpec(H, couplings)
    fock = alg.FockLayout.uniform(2 * len(ms), params["N_max"], params["tier_cap"])
    prop, lcu = _configs(params)
    return ModelJob("excitonic_dimer", None, params, sys, modesets, fock,
                    _initial(3, params["initial"]), ("P1", "P2"), {}, prop, lcu)


def _diam(params, regime, overrides):
    # spin orbitals (1 up, 1 down, 2 up, 2 down); orbital 0 is the most significant bit
    c, n = _fermion_ops(4)
    U, UC, t = params["U"], params["UC"], params["t"]
    if params["eps_u"] is None:
        params["eps_u"] = -(U + 2 * UC) / 2
    n1, n2 = n[0] + n[1], n[2] + n[3]
    H = params["eps_u"] * (n1 + n2) + U * (n[0] @ n[1] + n[2] @ n[3]) + UC * n1 @ n2
    for s in (0, 1):
        hop = c[s].conj().T @ c[2 + s]
        H = H + t * (hop + hop.conj().T)
    names = ["1up", "1down", "2up", "2down"]
    couplings = dict(zip(names, c))
    J = SpectralDensity("lorentzian", {"Gamma": params["Delta"], "W": params["W"]}, params["T"])
    ms = decompose_spectral_density(J, params["K"])
    sys = SystemSpec(H, couplings, FERMIONIC, 4)
    extra = {"P1": _pure(16, 0b1100), "P_double": _pure(16, 0b1111)}
    prop, lcu = _configs(params)
    return ModelJob("diam", None, params, sys, {k: ms for k in names}, None,
                    _initial(16, params["initial"]), ("P1", "P_double"), extra, prop, lcu)


_BUILDERS = {"spin_boson": _spin_boson, "siam": _siam,
             "excitonic_dimer": _dimer, "diam": _diam}


def instantiate_model(name: str, overrides: dict | None = None,
                      regime: str | None = None) -> ModelJob:
    """Build a ModelJob for one of the built-in models.

    Parameters
    ----------
    name : {"spin_boson", "siam", "excitonic_dimer", "diam"}
    overrides : dict, optional
        Parameter name -> value. Unknown keys raise UnknownParameter.
    regime : {"low", "high"}, optional
        Temperature regime selecting the tabulated decomposition of
        spin_boson and siam (default "low"); ignored by the other models.

    Notes
    -----
    ``initial`` is either a basis index or a full density matrix. The
    excitonic_dimer and diam initial states (exciton 1; both electrons on
    impurity 1) are assumptions, not tabulated values.
    """
    overrides = dict(overrides or {})
    params, regime = _resolve(name, regime, overrides)
    return _BUILDERS[name](params, regime, overrides)


def model_parameters(name: str) -> dict:
    """Default parameter map of a model (None marks regime-dependent or derived values)."""
    if name not in _DEFAULTS:
        raise UnknownModel(f"unknown model {name!r}")
    return dict(_DEFAULTS[name])


def describe_parameters(params: dict) -> dict[str, Any]:
    """JSON-friendly copy of a parameter map (arrays become nested lists of [re, im])."""
    out = {}
    for k, v in params.items():
        if isinstance(v, np.ndarray):
            out[k] = [[[float(z.real), float(z.imag)] for z in row] for row in v]
        elif isinstance(v, (np.integer, np.floating)):
            out[k] = v.item()
        else:
            out[k] = v
    return out
