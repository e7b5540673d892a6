"""Hermitian bases of ``M_n(C)`` used as search spaces for the distance.

Two bases are offered: ordered monomials in the su(2) generators (the
natural "polynomial" basis of the fuzzy sphere) and the standard matrix
units.  Both are returned orthonormal for ``<A, B> = Re tr(A^dagger B)``.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .triple import Su2Generators, su2_generators

log = logging.getLogger(__name__)

BASIS_KINDS = ("pbw", "matrix_units")


@dataclass(frozen=True)
class HermitianBasis:
    kind: str
    n: int
    elements: np.ndarray  # (k, n, n), orthonormal hermitian
    labels: tuple

    def __len__(self) -> int:
        return len(self.elements)

    def gram(self) -> np.ndarray:
        flat = self.elements.reshape(len(self), -1)
        return np.real(flat.conj() @ flat.T)

    def combine(self, coeffs) -> np.ndarray:
        return np.tensordot(np.asarray(coeffs, dtype=float), self.elements, 1)

    @property
    def spans_algebra(self) -> bool:
        return len(self) == self.n**2


def _orthonormalize(candidates, labels, tol: float, keep: Optional[list] = None):
    """Modified Gram-Schmidt (two passes) in the real inner product.

    A candidate is dropped when its residual norm falls below ``tol`` times
    its own norm.  Real combinations of hermitian matrices stay hermitian.
    """
    basis = [] if keep is None else list(keep)
    kept_labels = []
    for M, lab in zip(candidates, labels):
        norm0 = np.linalg.norm(M)
        if norm0 == 0:
            continue
        v = M / norm0
        for _ in range(2):
            for b in basis:
                v = v - np.real(np.vdot(b, v)) * b
        r = np.linalg.norm(v)
        if r > tol:
            basis.append(v / r)
            kept_labels.append(lab)
    start = 0 if keep is None else len(keep)
    return basis[start:], kept_labels


def _monomial_powers(max_degree: int):
    for deg in range(max_degree + 1):
        for a in range(deg, -1, -1):
            for b in range(deg - a, -1, -1):
                yield a, b, deg - a - b


def pbw_basis(L: Su2Generators, max_degree: Optional[int] = None,
              gram_tolerance: float = 1e-10) -> HermitianBasis:
    """Hermitianized ordered monomials ``L1^a L2^b L3^c`` with ``a+b+c <= max_degree``.

    Each monomial ``M`` contributes ``(M + M^dagger)/2`` and
    ``i (M - M^dagger)/2``; linearly dependent candidates are filtered out.
    ``max_degree`` defaults to ``n - 1``, enough to span all of ``M_n``.
    """
    n = L.n
    max_degree = n - 1 if max_degree is None else max_degree
    if max_degree < 0:
        raise ValueError("max_degree must be >= 0")
    cands, labels = [], []
    cache = {i: [np.eye(n, dtype=complex)] for i in range(3)}
    for i in range(3):
        for _ in range(max_degree):
            cache[i].append(cache[i][-1] @ L.L[i])
    for a, b, c in _monomial_powers(max_degree):
        M = cache[0][a] @ cache[1][b] @ cache[2][c]
        scale = np.linalg.norm(M)
        for lab, part in (("re", (M + M.conj().T) / 2), ("im", 1j * (M - M.conj().T) / 2)):
            # odd/even monomials are (anti)hermitian; drop the rounding-noise half
            if np.linalg.norm(part) > gram_tolerance * scale:
                cands.append(part)
                labels.append((lab, a, b, c))
    elems, labs = _orthonormalize(cands, labels, gram_tolerance)
    if max_degree >= n - 1 and len(elems) < n * n:
        log.warning("pbw basis has rank %d < %d at degree %d; the distance is only a lower bound",
                    len(elems), n * n, max_degree)
    return HermitianBasis("pbw", n, np.array(elems).reshape(-1, n, n), tuple(labs))


def matrix_unit_basis(n: int) -> HermitianBasis:
    """``E_jj``, ``(E_jk + E_kj)/sqrt2`` and ``i (E_jk - E_kj)/sqrt2`` for ``j < k``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    elems, labels = [], []
    for j in range(n):
        E = np.zeros((n, n), dtype=complex)
        E[j, j] = 1
        elems.append(E)
        labels.append(("diag", j, j))
    for j, k in itertools.combinations(range(n), 2):
        S = np.zeros((n, n), dtype=complex)
        S[j, k] = S[k, j] = 1 / np.sqrt(2)
        A = np.zeros((n, n), dtype=complex)
        A[j, k], A[k, j] = 1j / np.sqrt(2), -1j / np.sqrt(2)
        elems += [S, A]
        labels += [("sym", j, k), ("asym", j, k)]
    return HermitianBasis("matrix_units", n, np.array(elems), tuple(labels))


def make_basis(kind: str, n: int, max_degree: Optional[int] = None,
               gram_tolerance: float = 1e-10) -> HermitianBasis:
    if kind == "pbw":
        return pbw_basis(su2_generators(n), max_degree, gram_tolerance)
    if kind == "matrix_units":
        return matrix_unit_basis(n)
    raise ValueError(f"unknown basis kind {kind!r}; expected one of {BASIS_KINDS}")


def traceless_reduction(basis: HermitianBasis, gram_tolerance: float = 1e-10) -> HermitianBasis:
    """Orthonormal basis of the traceless part of ``span(basis)``.

    The seminorm ``||[D, a]||`` and the difference of two states both vanish
    on the identity, so only traceless directions matter.
    """
    n = basis.n
    ident = np.eye(n) / np.sqrt(n)
    proj = [E - np.real(np.trace(E)) / n * np.eye(n) for E in basis.elements]
    elems, labs = _orthonormalize(proj, basis.labels, gram_tolerance, keep=[ident.astype(complex)])
    return HermitianBasis(basis.kind + "/traceless", n, np.array(elems).reshape(-1, n, n), tuple(labs))
