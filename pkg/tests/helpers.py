"""Small random instances shared by several test modules."""

import numpy as np

from dqmesq import algebra as alg
from dqmesq.generator import SystemSpec
from dqmesq.modes import FERMIONIC, ExpMode, fermionic_modeset, pair_conjugates

from oracles import random_hermitian


def random_bosonic_instance(rng, d=2, n_pairs=1, n_real=0, labels=("b",)):
    H = random_hermitian(rng, d)
    couplings, modesets = {}, {}
    for lbl in labels:
        couplings[lbl] = random_hermitian(rng, d, 0.5)
        modes = []
        for _ in range(n_pairs):
            g = complex(rng.uniform(0.5, 2), rng.uniform(0.3, 2))
            modes.append(ExpMode(complex(*rng.normal(size=2)) * 0.5, g))
            modes.append(ExpMode(complex(*rng.normal(size=2)) * 0.5, g.conjugate()))
        for _ in range(n_real):
            modes.append(ExpMode(complex(*rng.normal(size=2)) * 0.5, rng.uniform(0.5, 3)))
        modesets[lbl] = pair_conjugates(modes)
    return SystemSpec(H, couplings), modesets


def random_fermionic_instance(rng, n_orb=1, K=1, labels_per_orbital=1, interaction=0.5):
    d = 2 ** n_orb
    cs = [alg.jw_ladder(n_orb, u)[0].toarray() for u in range(n_orb)]
    H = np.zeros((d, d), dtype=complex)
    for c in cs:
        H += rng.normal() * (c.conj().T @ c)
    if n_orb == 2:
        H += interaction * (cs[0].conj().T @ cs[0] @ cs[1].conj().T @ cs[1])
        t = complex(*rng.normal(size=2)) * 0.3
        H += t * cs[0].conj().T @ cs[1] + np.conj(t) * cs[1].conj().T @ cs[0]
    couplings, modesets = {}, {}
    for u, c in enumerate(cs):
        for a in range(labels_per_orbital):
            lbl = f"o{u}r{a}"
            couplings[lbl] = c
            eta = [complex(rng.uniform(0.05, 0.2), rng.uniform(-0.1, 0.1)) for _ in range(K)]
            etm = [complex(rng.uniform(0.05, 0.2), rng.uniform(-0.1, 0.1)) for _ in range(K)]
            gam = [complex(rng.uniform(0.5, 2), rng.uniform(-1, 1)) for _ in range(K)]
            modesets[lbl] = fermionic_modeset(eta, gam, etm)
    return SystemSpec(H, couplings, FERMIONIC, n_orb), modesets


def silent_modeset():
    """One decoupled mode (eta = 0): zeta = xi = 0."""
    return pair_conjugates([ExpMode(0.0, 1.0)])


# filled by the acceptance tests, echoed in the pytest terminal summary
ACCEPTANCE_LINES = []
