"""
Independent reference implementations used by the tests.

Nothing here imports the package's numerical kernels; each oracle is written
from the defining formula with dense numpy arithmetic so that agreement is a
real cross-check rather than a restatement.
"""

import math

import numpy as np
import scipy.linalg as sla


def random_hermitian(rng, d, scale=1.0):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * 0.5 * (a + a.conj().T)


def random_density(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def commutator(A, B):
    return A @ B - B @ A


def anticommutator(A, B):
    return A @ B + B @ A


# -- fermions by bit manipulation -------------------------------------------

def fermion_annihilator(n_modes, site):
    """c_site on the occupation basis; basis index bits, site 0 most significant, bit 1 = occupied.

    Sign = (-1)^(number of occupied modes before ``site``).
    """
    dim = 2 ** n_modes
    out = np.zeros((dim, dim))
    for state in range(dim):
        bits = [(state >> (n_modes - 1 - j)) & 1 for j in range(n_modes)]
        if not bits[site]:
            continue
        sign = (-1) ** sum(bits[:site])
        new = state ^ (1 << (n_modes - 1 - site))
        out[new, state] = sign
    return out


# -- bosonic hierarchy, written out by hand ---------------------------------

def three_tier_heom_rhs(H, Q, eta, eta_bar_conj, gamma, rho):
    """d/dt of (rho0, rho1, rho2) for one mode truncated at n = 2."""
    r0, r1, r2 = rho
    d0 = -1j * commutator(H, r0) - 1j * commutator(Q, r1)
    d1 = (-1j * commutator(H, r1) - gamma * r1 - 1j * commutator(Q, r2)
          - 1j * (eta * Q @ r0 - eta_bar_conj * r0 @ Q))
    d2 = -1j * commutator(H, r2) - 2 * gamma * r2 - 2j * (eta * Q @ r1 - eta_bar_conj * r1 @ Q)
    return d0, d1, d2


# -- Drude decomposition in closed form --------------------------------------

def drude_modes(lam, gamma, beta, K):
    """Pole mode plus K-1 Matsubara modes of the Drude density, textbook formulas."""
    out = [(lam * gamma * (1.0 / math.tan(beta * gamma / 2) - 1j), gamma)]
    for j in range(1, K):
        nu = 2 * math.pi * j / beta
        out.append((4 * lam * gamma * nu / (beta * (nu ** 2 - gamma ** 2)), nu))
    return out


# -- dense propagation --------------------------------------------------------

def dense_expm_trajectory(A, v0, times):
    """exp(A t) v0 at each time, one dense exponential per time point."""
    A = np.asarray(A.toarray() if hasattr(A, "toarray") else A)
    return [sla.expm(A * t) @ v0 for t in times]


# -- the LCU circuit as explicit matrices ------------------------------------

def lcu_circuit_step(psi_data, U0, Uplus, Uminus):
    """One step of the ancilla circuit built from full 2 x n matrices.

    Ancilla is the most significant qubit. Returns the normalized data state
    after projecting the ancilla onto |0>, and the projection amplitude.
    """
    n = psi_data.size
    I2 = np.eye(2)
    Hd = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    c = s = 1 / math.sqrt(2)
    RY = np.array([[c, s], [-s, c]])   # RY(-pi/2)
    P0 = np.diag([1.0, 0.0])
    P1 = np.diag([0.0, 1.0])
    state = np.kron(np.array([1.0, 0.0]), psi_data)
    state = np.kron(Hd, np.eye(n)) @ state
    state = np.kron(I2, U0) @ state
    state = (np.kron(P0, Uplus) + np.kron(P1, np.eye(n))) @ state
    state = (np.kron(P0, np.eye(n)) + np.kron(P1, Uminus)) @ state
    state = np.kron(RY, np.eye(n)) @ state
    v = state[:n]
    p = np.linalg.norm(v)
    return v / p, p
