"""
Sparse operator algebra: truncated bosonic ladders, Jordan-Wigner fermions,
tensor embeddings and left/right superoperator lifts.

All operators are ``scipy.sparse.csr_matrix`` in canonical form (sorted
indices, no duplicates). Vectorization is row-major, ``vec(rho)[i*d + j] =
rho[i, j]``, so that ``vec(A rho B) = kron(A, B.T) @ vec(rho)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, IndexOutOfRange


def csr(a) -> sp.csr_matrix:
    """Canonical complex CSR copy of a dense or sparse operator."""
    m = sp.csr_matrix(a, dtype=complex)
    m.sum_duplicates()
    m.sort_indices()
    m.eliminate_zeros()
    return m


def identity(n: int) -> sp.csr_matrix:
    return sp.identity(n, dtype=complex, format="csr")


def kron(*ops) -> sp.csr_matrix:
    out = ops[0]
    for op in ops[1:]:
        out = sp.kron(out, op, format="csr")
    return csr(out)


SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1| : empty <- occupied
PARITY = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class FockLayout:
    """Occupation-number basis of a set of modes.

    ``caps[k]`` is the largest occupation of mode ``k`` (1 for fermions).
    ``tier_cap`` optionally bounds the total occupation; configurations above
    it are removed from the basis. Configurations are ordered lexicographically
    with mode 0 most significant (the ``kron`` order).
    """

    caps: tuple
    tier_cap: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "caps", tuple(int(c) for c in self.caps))
        if any(c < 1 for c in self.caps):
            raise ValueError("occupation caps must be >= 1")
        if self.tier_cap is not None and not 0 <= self.tier_cap <= sum(self.caps):
            raise ValueError("tier cap must lie in [0, sum(caps)]")

    @classmethod
    def uniform(cls, K: int, n_max: int, tier_cap: int | None = None) -> "FockLayout":
        return cls((n_max,) * K, tier_cap)

    @property
    def K(self) -> int:
        return len(self.caps)

    @property
    def local_dims(self) -> tuple:
        return tuple(c + 1 for c in self.caps)

    @property
    def full_dim(self) -> int:
        return int(np.prod(self.local_dims)) if self.caps else 1

    @cached_property
    def configs(self) -> tuple:
        full = itertools.product(*(range(c + 1) for c in self.caps))
        if self.tier_cap is None:
            return tuple(full)
        return tuple(n for n in full if sum(n) <= self.tier_cap)

    @cached_property
    def index(self) -> dict:
        return {n: i for i, n in enumerate(self.configs)}

    @property
    def dim(self) -> int:
        return len(self.configs)

    @cached_property
    def kept(self) -> np.ndarray:
        """Positions of the retained configurations inside the full product basis."""
        strides = np.cumprod((1,) + self.local_dims[::-1])[:-1][::-1]
        return np.array([int(np.dot(n, strides)) for n in self.configs], dtype=np.int64)

    def restrict(self, op: sp.spmatrix) -> sp.csr_matrix:
        """Project a full-product-space operator onto the retained configurations."""
        if self.tier_cap is None:
            return csr(op)
        k = self.kept
        return csr(sp.csr_matrix(op)[k][:, k])


def boson_ladder(n_max: int):
    """Truncated bosonic (lower, raise) on occupations 0..n_max.

    ``raise`` annihilates the top level, matching a hierarchy cut at n_max.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    n = np.arange(1, n_max + 1)
    lower = sp.diags(np.sqrt(n).astype(complex), 1, shape=(n_max + 1, n_max + 1))
    return csr(lower), csr(lower.T)


def jw_ladder(n_modes: int, site: int):
    """Jordan-Wigner (lower, raise) for ``site`` among ``n_modes`` fermionic modes.

    The parity string covers every mode preceding ``site`` in the ordering.
    """
    if not 0 <= site < n_modes:
        raise IndexOutOfRange(f"site {site} outside 0..{n_modes - 1}")
    factors = [PARITY] * site + [SIGMA_MINUS] + [np.eye(2)] * (n_modes - site - 1)
    lower = kron(*[sp.csr_matrix(f) for f in factors])
    return lower, csr(lower.T)


def parity_operator(n_modes: int) -> sp.csr_matrix:
    """(-1)^N on ``n_modes`` fermionic modes."""
    if n_modes == 0:
        return identity(1)
    return kron(*[sp.csr_matrix(PARITY)] * n_modes)


def embed_operator(op, site: int, layout: FockLayout) -> sp.csr_matrix:
    """``I x ... x op x ... x I`` over the layout, restricted to its retained configurations."""
    if not 0 <= site < layout.K:
        raise IndexOutOfRange(f"site {site} outside 0..{layout.K - 1}")
    op = csr(op)
    dims = layout.local_dims
    if op.shape != (dims[site], dims[site]):
        raise DimensionMismatch(
            f"operator of shape {op.shape} does not fit site {site} of dimension {dims[site]}")
    left = int(np.prod(dims[:site])) if site else 1
    right = int(np.prod(dims[site + 1:])) if site + 1 < len(dims) else 1
    full = kron(identity(left), op, identity(right))
    return layout.restrict(full)


def mode_ladders(layout: FockLayout):
    """(lower, raise) of every mode of a bosonic layout, as full-layout operators."""
    out = []
    for k, cap in enumerate(layout.caps):
        b, bd = boson_ladder(cap)
        out.append((embed_operator(b, k, layout), embed_operator(bd, k, layout)))
    return out


def lift_system_superop(op, side: str, system_dim: int) -> sp.csr_matrix:
    """Left (``op x I``) or right (``I x op^T``) action on row-major vectorized operators."""
    op = csr(op)
    if op.shape != (system_dim, system_dim):
        raise DimensionMismatch(f"operator shape {op.shape} vs system dimension {system_dim}")
    eye = identity(system_dim)
    if side == "left":
        return kron(op, eye)
    if side == "right":
        return kron(eye, csr(op.T))
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def is_hermitian(op, tol: float = 1e-12) -> bool:
    d = csr(op) - csr(op).getH()
    return d.nnz == 0 or float(np.max(np.abs(d.data))) <= tol
