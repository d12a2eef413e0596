"""
Exponential decompositions of environment correlation functions.

A Gaussian environment enters the dynamics only through its hybridization
correlation function, written as a finite sum of decaying exponentials

    C(t) = sum_k eta_k exp(-gamma_k t).

Bosonic sets pair every mode ``k`` with the mode ``kbar`` whose rate is the
complex conjugate of ``gamma_k``. Fermionic sets carry a sign label
``sigma = +1/-1`` and pair the ``+`` and ``-`` modes of the same index.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate

from .errors import (
    AmbiguousPairing,
    DegenerateZeta,
    ResonantMatsubara,
    UnpairableMode,
)

BOSONIC = "bosonic"
FERMIONIC = "fermionic"

DEFAULT_PAIR_TOL = 1e-10
DEFAULT_ZETA_FLOOR = 1e-12


@dataclass(frozen=True)
class ExpMode:
    """One term ``eta * exp(-gamma t)`` of a correlation function.

    ``sigma`` is 0 for bosonic modes and +1/-1 for fermionic modes.
    """

    eta: complex
    gamma: complex
    sigma: int = 0

    def __post_init__(self):
        object.__setattr__(self, "eta", complex(self.eta))
        object.__setattr__(self, "gamma", complex(self.gamma))
        if self.sigma not in (0, 1, -1):
            raise ValueError(f"sigma must be 0, +1 or -1, got {self.sigma!r}")
        if not self.gamma.real > 0:
            raise ValueError(f"mode rate must decay (Re gamma > 0), got {self.gamma}")

    @property
    def statistics(self) -> str:
        return BOSONIC if self.sigma == 0 else FERMIONIC


@dataclass(frozen=True)
class ModeSet:
    """Modes plus their conjugate pairing.

    Attributes
    ----------
    modes : tuple of ExpMode
    pairing : tuple of int
        ``pairing[k]`` is the partner index ``kbar``. For bosonic sets the
        partner has the conjugate rate; for fermionic sets it is the mode of
        opposite sign sharing the same index.
    tol : float
        Relative tolerance used when the pairing was established.
    generated : bool
        True when the modes came out of :func:`decompose_spectral_density`
        rather than a tabulated decomposition.
    """

    modes: tuple
    pairing: tuple
    tol: float = DEFAULT_PAIR_TOL
    generated: bool = False

    @property
    def statistics(self) -> str:
        return self.modes[0].statistics

    def __len__(self):
        return len(self.modes)

    @property
    def etas(self) -> np.ndarray:
        return np.array([m.eta for m in self.modes], dtype=complex)

    @property
    def gammas(self) -> np.ndarray:
        return np.array([m.gamma for m in self.modes], dtype=complex)

    def fermionic_pairs(self) -> list[tuple[int, int]]:
        """(plus index, minus index) for every fermionic mode pair, in table order."""
        if self.statistics != FERMIONIC:
            raise ValueError("fermionic_pairs() requires a fermionic mode set")
        return [(k, self.pairing[k]) for k, m in enumerate(self.modes) if m.sigma == 1]

    def scaled(self, factor: float) -> "ModeSet":
        """Same rates, amplitudes multiplied by ``factor`` (coupling-strength rescaling)."""
        modes = tuple(ExpMode(m.eta * factor, m.gamma, m.sigma) for m in self.modes)
        return ModeSet(modes, self.pairing, self.tol, self.generated)


@dataclass(frozen=True)
class DissipatonCoefficients:
    """``zeta`` and ``xi`` aligned with the modes of the set they were built from."""

    statistics: str
    zeta: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        self.zeta.setflags(write=False)
        self.xi.setflags(write=False)


def _scale(z: complex) -> float:
    return max(1.0, abs(z))


def pair_conjugates(modes: Sequence[ExpMode], tol: float = DEFAULT_PAIR_TOL,
                    generated: bool = False) -> ModeSet:
    """Establish the conjugate pairing of a mode list.

    Bosonic: real-rate modes pair with themselves, complex-rate modes with the
    nearest mode whose rate matches the conjugate within ``tol`` (relative).
    Fermionic: each ``sigma=+1`` mode pairs with the nearest ``sigma=-1`` mode
    whose rate is the conjugate of its own.

    Raises
    ------
    UnpairableMode
        No partner within tolerance.
    AmbiguousPairing
        Two candidates are exactly equally close.
    """
    modes = tuple(modes)
    if not modes:
        raise ValueError("mode list is empty")
    stats = {m.statistics for m in modes}
    if len(stats) != 1:
        raise ValueError("cannot mix bosonic and fermionic modes in one set")
    pairing = [-1] * len(modes)

    if modes[0].sigma == 0:
        for k, m in enumerate(modes):
            if pairing[k] >= 0:
                continue
            if abs(m.gamma.imag) <= tol * _scale(m.gamma):
                pairing[k] = k
                continue
            target = m.gamma.conjugate()
            cands = [
                (abs(modes[j].gamma - target), j)
                for j in range(len(modes))
                if j != k and pairing[j] < 0
                and abs(modes[j].gamma - target) <= tol * _scale(target)
            ]
            if not cands:
                raise UnpairableMode(f"mode {k} (gamma={m.gamma}) has no conjugate partner")
            cands.sort()
            if len(cands) > 1 and cands[0][0] == cands[1][0]:
                raise AmbiguousPairing(
                    f"mode {k}: modes {cands[0][1]} and {cands[1][1]} tie as conjugate partners")
            j = cands[0][1]
            pairing[k], pairing[j] = j, k
    else:
        plus = [k for k, m in enumerate(modes) if m.sigma == 1]
        minus = [k for k, m in enumerate(modes) if m.sigma == -1]
        if len(plus) != len(minus):
            raise UnpairableMode(
                f"fermionic set has {len(plus)} sigma=+ and {len(minus)} sigma=- modes")
        free = set(minus)
        for k in plus:
            target = modes[k].gamma.conjugate()
            cands = sorted(
                (abs(modes[j].gamma - target), j) for j in free
                if abs(modes[j].gamma - target) <= tol * _scale(target))
            if not cands:
                raise UnpairableMode(f"fermionic mode {k} has no sigma=- partner")
            if len(cands) > 1 and cands[0][0] == cands[1][0]:
                # equal rates within one sign: fall back to table order
                tied = [j for d, j in cands if d == cands[0][0]]
                j = min(tied)
            else:
                j = cands[0][1]
            free.discard(j)
            pairing[k], pairing[j] = j, k
    return ModeSet(modes, tuple(pairing), tol, generated)


def fermionic_modeset(eta_plus, gamma_plus, eta_minus=None, gamma_minus=None,
                      tol: float = DEFAULT_PAIR_TOL, generated: bool = False) -> ModeSet:
    """Build a fermionic set from per-sign tables; the ``-`` table defaults to the ``+`` one
    with conjugated rates."""
    eta_plus = list(eta_plus)
    gamma_plus = list(gamma_plus)
    if eta_minus is None:
        eta_minus = eta_plus
    if gamma_minus is None:
        gamma_minus = [complex(g).conjugate() for g in gamma_plus]
    if len(eta_minus) != len(eta_plus) or len(gamma_minus) != len(gamma_plus):
        raise ValueError("sigma=+ and sigma=- tables must have equal length")
    # Interleave so that every (+, -) pair is adjacent in table order.
    modes = []
    for ep, gp, em, gm in zip(eta_plus, gamma_plus, eta_minus, gamma_minus):
        modes.append(ExpMode(ep, gp, 1))
        modes.append(ExpMode(em, gm, -1))
    pairing = []
    for k in range(len(modes)):
        pairing.append(k + 1 if k % 2 == 0 else k - 1)
    ms = ModeSet(tuple(modes), tuple(pairing), tol, generated)
    for k in range(0, len(modes), 2):
        if abs(modes[k + 1].gamma - modes[k].gamma.conjugate()) > tol * _scale(modes[k].gamma):
            raise UnpairableMode(f"fermionic pair {k // 2}: rates are not conjugate")
    return ms


def dissipaton_coefficients(modeset: ModeSet, floor: float = DEFAULT_ZETA_FLOOR
                            ) -> DissipatonCoefficients:
    """Second-quantization coefficients ``zeta`` and ``xi`` of every mode.

    Bosonic:   zeta_k = sqrt((eta_k + conj eta_kbar)/2),
               xi_k = (eta_k - conj eta_kbar) / (2i zeta_k).
    Fermionic: zeta_k = (eta_k conj eta_kbar)^(1/4),  xi_k = eta_k / zeta_k.

    Principal branches throughout. A mode whose amplitudes all vanish gets
    ``zeta = xi = 0`` (it is simply decoupled). ``floor`` is relative to the
    largest ``|eta|`` of the set.
    """
    etas = modeset.etas
    pairing = modeset.pairing
    scale = float(np.max(np.abs(etas))) if len(etas) else 0.0
    zeta = np.zeros(len(etas), dtype=complex)
    xi = np.zeros(len(etas), dtype=complex)
    for k, eta in enumerate(etas):
        partner = etas[pairing[k]]
        if modeset.statistics == BOSONIC:
            s = eta + partner.conjugate()
            d = eta - partner.conjugate()
            if s == 0 and d == 0:
                continue
            if abs(s) <= floor * scale:
                raise DegenerateZeta(
                    f"mode {k}: |eta_k + conj(eta_kbar)| = {abs(s):.3e} below floor")
            zeta[k] = cmath.sqrt(s / 2)
            xi[k] = d / (2j * zeta[k])
        else:
            p = eta * partner.conjugate()
            if eta == 0:
                continue
            if abs(p) <= (floor * scale) ** 2:
                raise DegenerateZeta(f"fermionic mode {k}: eta * conj(eta_partner) vanishes")
            zeta[k] = cmath.exp(cmath.log(p) / 4)
            xi[k] = eta / zeta[k]
    return DissipatonCoefficients(modeset.statistics, zeta, xi)


def eval_correlation(modeset: ModeSet, t, sigma: int | None = None):
    """``sum_k eta_k exp(-gamma_k t)``; fermionic sets need ``sigma``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("correlation functions are evaluated for t >= 0")
    sel = [m for m in modeset.modes if (sigma is None or m.sigma == sigma)]
    if modeset.statistics == FERMIONIC and sigma is None:
        raise ValueError("fermionic correlation needs sigma=+1 or -1")
    out = np.zeros(t.shape, dtype=complex)
    for m in sel:
        out = out + m.eta * np.exp(-m.gamma * t)
    return out if out.ndim else complex(out)


# ---------------------------------------------------------------- spectral densities

_REQUIRED = {
    "drude": ("lam", "gamma"),
    "brownian": ("lam", "omega0", "zeta"),
    "lorentzian": ("Gamma", "W"),
}


@dataclass(frozen=True)
class SpectralDensity:
    """Spectral density of a standard form at temperature ``temperature`` (k_B = 1).

    kinds and parameters::

        drude       J = 2 lam gamma w / (w^2 + gamma^2)
        brownian    J = 2 lam omega0^2 zeta w / ((w^2 - omega0^2)^2 + w^2 zeta^2)
        lorentzian  J = Gamma W^2 / ((w - mu)^2 + W^2)      (fermionic; mu optional)
    """

    kind: str
    params: dict = field(default_factory=dict)
    temperature: float = 1.0

    def __post_init__(self):
        if self.kind not in _REQUIRED:
            raise ValueError(f"unknown spectral density kind {self.kind!r}")
        for name in _REQUIRED[self.kind]:
            if name not in self.params:
                raise ValueError(f"{self.kind} spectral density needs parameter {name!r}")
            if not self.params[name] > 0:
                raise ValueError(f"parameter {name} must be positive")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")

    @property
    def beta(self) -> float:
        return 1.0 / self.temperature

    @property
    def mu(self) -> float:
        return float(self.params.get("mu", 0.0))

    def _polys(self):
        p = self.params
        if self.kind == "drude":
            return np.poly1d([2 * p["lam"] * p["gamma"], 0.0]), np.poly1d([1.0, 0.0, p["gamma"] ** 2])
        if self.kind == "brownian":
            w0, z = p["omega0"], p["zeta"]
            return (np.poly1d([2 * p["lam"] * w0 ** 2 * z, 0.0]),
                    np.poly1d([1.0, 0.0, z ** 2 - 2 * w0 ** 2, 0.0, w0 ** 4]))
        # lorentzian, in the shifted variable x = w - mu
        return np.poly1d([p["Gamma"] * p["W"] ** 2]), np.poly1d([1.0, 0.0, p["W"] ** 2])

    def __call__(self, w):
        num, den = self._polys()
        x = np.asarray(w) - (self.mu if self.kind == "lorentzian" else 0.0)
        return num(x) / den(x)


def _bose(z, beta):
    return 1.0 / (1.0 - np.exp(-beta * z))


def _fermi(z, beta):
    return 1.0 / (1.0 + np.exp(beta * z))


def decompose_spectral_density(J: SpectralDensity, K: int, statistics: str | None = None,
                               tol: float = 1e-8) -> ModeSet:
    """Pole-plus-Matsubara exponential decomposition of ``J`` at its temperature.

    Bosonic (drude, brownian): ``K`` is the total mode count, i.e. the poles of
    ``J`` in the lower half plane plus ``K - npoles`` Matsubara modes at
    ``nu_j = 2 pi j / beta``.

    Fermionic (lorentzian): ``K`` modes per sign, one pole mode at
    ``W -/+ i mu`` plus ``K - 1`` Matsubara modes at ``(2j - 1) pi / beta``.

    Raises
    ------
    ResonantMatsubara
        A Matsubara frequency coincides with a pole rate of ``J``.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if statistics is None:
        statistics = FERMIONIC if J.kind == "lorentzian" else BOSONIC
    if (statistics == FERMIONIC) != (J.kind == "lorentzian"):
        raise ValueError(f"{J.kind} density does not describe a {statistics} environment")
    beta = J.beta
    num, den = J._polys()
    dden = den.deriv()
    roots = np.roots(den.coeffs)

    if statistics == BOSONIC:
        # C(t) = (1/pi) int dw e^{-iwt} J(w) n_B(w); close in the lower half plane.
        lower = sorted((r for r in roots if r.imag < 0), key=lambda r: (r.real, r.imag))
        if K < len(lower):
            raise ValueError(f"{J.kind} density has {len(lower)} poles; K must be >= that")
        modes = []
        for p in lower:
            res = num(p) / dden(p)
            eta = -2j * res * _bose(p, beta)
            modes.append(ExpMode(eta, 1j * p))
        rates = [1j * p for p in lower]
        for j in range(1, K - len(lower) + 1):
            nu = 2 * math.pi * j / beta
            _check_resonance(nu, rates, tol)
            eta = (-2j / beta) * (num(-1j * nu) / den(-1j * nu))
            modes.append(ExpMode(eta, nu))
        return pair_conjugates(modes, generated=True)

    mu = J.mu
    W = J.params["W"]
    nus = [(2 * j - 1) * math.pi / beta for j in range(1, K)]
    for nu in nus:
        _check_resonance(nu, [complex(W)], tol)
    eta_p, gam_p, eta_m, gam_m = [], [], [], []
    # sigma=+ : (1/pi) int e^{iwt} J f(w-mu); upper half plane, pole at x = iW.
    p = 1j * W
    eta_pole = 2j * (num(p) / dden(p)) * _fermi(p, beta)
    eta_p.append(eta_pole)
    gam_p.append(W - 1j * mu)
    eta_m.append(eta_pole)
    gam_m.append(W + 1j * mu)
    for nu in nus:
        eta = (-2j / beta) * (num(1j * nu) / den(1j * nu))
        eta_p.append(eta)
        gam_p.append(nu - 1j * mu)
        eta_m.append(eta)
        gam_m.append(nu + 1j * mu)
    return fermionic_modeset(eta_p, gam_p, eta_m, gam_m, generated=True)


def _check_resonance(nu, rates, tol):
    for g in rates:
        if abs(nu - g) <= tol * _scale(g):
            raise ResonantMatsubara(f"Matsubara frequency {nu} coincides with pole rate {g}")


def quadrature_correlation(J: SpectralDensity, t, sigma: int | None = None,
                           limit: int = 400) -> np.ndarray:
    """Correlation function by direct numerical integration over frequency.

    Bosonic: C(t) = (1/pi) int_0^inf J(w) [coth(beta w/2) cos(wt) - i sin(wt)] dw.
    Fermionic: C^sigma(t) = (1/pi) int e^{i sigma w t} J(w) n^sigma(w) dw with
    ``n^+ = f(w - mu)`` and ``n^- = 1 - f(w - mu)``.

    Serves as the independent check of :func:`decompose_spectral_density`.
    Divergent integrals (a Drude density at t = 0) return ``inf``.
    """
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    beta = J.beta
    out = np.empty(ts.shape, dtype=complex)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        for i, tt in enumerate(ts):
            try:
                out[i] = _quad_one(J, tt, beta, sigma, limit)
            except integrate.IntegrationWarning:
                out[i] = complex(math.inf, 0.0)
    return out if np.ndim(t) else out[0]


def _quad_one(J, t, beta, sigma, limit):
    if J.kind != "lorentzian":
        def re_f(w):
            if w < 1e-12:
                # J(w) coth(beta w / 2) -> 2 J'(0) / beta
                h = 1e-8
                return float(J(h).real) * 2.0 / (beta * h)
            return float(J(w).real) / math.tanh(beta * w / 2)

        def im_f(w):
            return float(J(w).real)

        if _tail_is_log_divergent(J) and t == 0:
            return complex(math.inf, 0.0)
        if t == 0:
            re = integrate.quad(re_f, 0, np.inf, limit=limit)[0]
            return complex(re / math.pi, 0.0)
        re = _fourier(re_f, t, "cos", limit)
        im = _fourier(im_f, t, "sin", limit)
        return complex(re, -im) / math.pi

    if sigma not in (1, -1):
        raise ValueError("fermionic quadrature needs sigma=+1 or -1")
    W, G = J.params["W"], J.params["Gamma"]

    def occ(x):
        f = 0.5 * (1 - math.tanh(beta * x / 2))
        return f if sigma == 1 else 1 - f

    def g(x):
        return G * W ** 2 / (x * x + W * W) * occ(x)

    def even(x):
        return g(x) + g(-x)

    def odd(x):
        return g(x) - g(-x)

    if t == 0:
        re = integrate.quad(even, 0, np.inf, limit=limit)[0]
        val = complex(re, 0.0)
    else:
        re = _fourier(even, t, "cos", limit)
        im = _fourier(odd, t, "sin", limit)
        val = complex(re, sigma * im)
    return val * cmath.exp(1j * sigma * J.mu * t) / math.pi


def _fourier(f, t, kind, limit):
    # QAWO on [0, 1], QAWF on the oscillatory tail [1, inf)
    head = integrate.quad(f, 0, 1.0, weight=kind, wvar=t, limit=limit)[0]
    tail = integrate.quad(f, 1.0, np.inf, weight=kind, wvar=t, limlst=200, limit=limit)[0]
    return head + tail


def _tail_is_log_divergent(J) -> bool:
    num, den = J._polys()
    # J ~ w^(deg num - deg den); a 1/w tail makes int J coth diverge at t = 0
    return den.order - num.order <= 1
