"""Finite spectral triples on ``V (x) M_n(C)``.

Clifford modules, su(2) generators and Dirac operators are built here as
explicit dense matrices.  Two conventions are fixed once and used by every
other module:

* ``M_n(C)`` is flattened column-major, so left multiplication by ``a`` is
  ``kron(I, a)`` and right multiplication by ``b`` is ``kron(b.T, I)``.
  The full Hilbert space index is ``kron(V, vec(M_n))``.
* The anti-hermitian su(2) generators are ``L_i = i J_i`` with ``J_i`` the
  usual hermitian spin matrices, so ``[L_i, L_j] = -eps_ijk L_k``, and
  ``L_{jk} = L_i`` for cyclic ``(i, j, k)``.  With this orientation the
  assembled deformed Dirac operator reproduces the closed-form spectrum in
  :mod:`fuzzyspace.spectrum` exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, reduce
from typing import Optional, Sequence

import numpy as np

CONVENTION_TAG = "chiral13-L=iJ-colmajor-v1"

_SIGMA = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
_PAIRS = ((1, 2), (1, 3), (2, 3))


@dataclass(frozen=True)
class CliffordModule:
    """Irreducible ``(p, q)`` Clifford module.

    The first ``p`` gammas square to ``+1`` (hermitian), the remaining ``q``
    square to ``-1`` (anti-hermitian).  ``chirality`` is ``None`` when
    ``p + q`` is odd, since no grading anticommuting with every generator
    exists there.
    """

    p: int
    q: int
    gammas: tuple
    chirality: Optional[np.ndarray]

    @property
    def ko_dimension(self) -> int:
        return (self.q - self.p) % 8

    @property
    def dim(self) -> int:
        return self.gammas[0].shape[0]

    @property
    def metric(self) -> np.ndarray:
        return np.array([1.0] * self.p + [-1.0] * self.q)

    def product(self, *indices: int) -> np.ndarray:
        """Ordered product ``gamma_i gamma_j ...`` (identity for no indices)."""
        eye = np.eye(self.dim, dtype=complex)
        return reduce(np.matmul, (self.gammas[i] for i in indices), eye)


def _euclidean_gammas(r: int) -> list:
    # Jordan-Wigner construction of r mutually anticommuting hermitian
    # involutions of size 2**(r // 2).
    m = r // 2
    eye2 = np.eye(2, dtype=complex)
    out = []
    for k in range(m):
        for s in (_SIGMA[0], _SIGMA[1]):
            factors = [_SIGMA[2]] * k + [s] + [eye2] * (m - k - 1)
            out.append(reduce(np.kron, factors, np.eye(1, dtype=complex)))
    if r % 2:
        out.append(reduce(np.kron, [_SIGMA[2]] * m, np.eye(1, dtype=complex)))
    return out


def clifford_generators(p: int, q: int) -> CliffordModule:
    """Deterministic irreducible ``(p, q)`` Clifford module for ``1 <= p+q <= 6``.

    ``(1, 3)`` uses the chiral representation ``gamma^0 = [[0, I], [I, 0]]``,
    ``gamma^j = [[0, sigma_j], [-sigma_j, 0]]``; ``(0, 3)`` uses ``i sigma_j``.
    """
    if p < 0 or q < 0 or not 1 <= p + q <= 6:
        raise NotImplementedError(f"Clifford module ({p}, {q}) is not implemented; need 1 <= p+q <= 6")
    if (p, q) == (1, 3):
        zero, eye = np.zeros((2, 2), complex), np.eye(2, dtype=complex)
        gammas = [np.block([[zero, eye], [eye, zero]])]
        gammas += [np.block([[zero, s], [-s, zero]]) for s in _SIGMA]
    elif (p, q) == (0, 3):
        gammas = [1j * s for s in _SIGMA]
    else:
        base = _euclidean_gammas(p + q)
        gammas = base[:p] + [1j * g for g in base[p:]]
    gammas = tuple(np.array(g, dtype=complex) for g in gammas)
    for g in gammas:
        g.setflags(write=False)

    chirality = None
    if (p + q) % 2 == 0:
        prod = reduce(np.matmul, gammas)
        sq = prod @ prod
        chirality = prod if np.allclose(sq, np.eye(len(sq))) else 1j * prod
        chirality.setflags(write=False)
    return CliffordModule(p, q, gammas, chirality)


@dataclass(frozen=True)
class Su2Generators:
    """Anti-hermitian generators of the spin ``(n-1)/2`` irrep."""

    n: int
    L: tuple

    @property
    def spin(self) -> float:
        return (self.n - 1) / 2

    @property
    def hermitian(self) -> tuple:
        """Hermitian spin matrices ``J_i = -i L_i`` (basis ``m = l, l-1, ...``)."""
        return tuple(-1j * x for x in self.L)

    def pair(self, j: int, k: int) -> np.ndarray:
        """``L_{jk}`` for ``1 <= j < k <= 3``."""
        return {(1, 2): self.L[2], (1, 3): -self.L[1], (2, 3): self.L[0]}[(j, k)]


def su2_generators(n: int) -> Su2Generators:
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"matrix size must be a positive integer, got {n!r}")
    n = int(n)
    l = (n - 1) / 2
    m = l - np.arange(n)
    jplus = np.zeros((n, n))
    for i in range(1, n):
        jplus[i - 1, i] = math.sqrt(l * (l + 1) - m[i] * (m[i] + 1))
    jx = (jplus + jplus.T) / 2
    jy = (jplus - jplus.T) / 2j
    jz = np.diag(m)
    L = tuple(np.asarray(1j * J, dtype=complex) for J in (jx, jy, jz))
    for x in L:
        x.setflags(write=False)
    return Su2Generators(n, L)


@dataclass(frozen=True)
class DeformationParams:
    c0: float = 1.0
    c12: float = 1.0
    c13: float = 1.0
    c23: float = 1.0

    def __post_init__(self):
        vals = (self.c0, self.c12, self.c13, self.c23)
        if not all(math.isfinite(float(v)) for v in vals):
            raise ValueError(f"deformation parameters must be finite: {vals}")
        if self.c0 == 0:
            raise ValueError("c0 must be nonzero")

    @classmethod
    def restricted(cls, a: float = 1.0, c: float = 1.0) -> "DeformationParams":
        """Two-parameter family: ``c0 = a``, ``c12 = c``, ``c13 = c23 = 1``."""
        return cls(c0=a, c12=c, c13=1.0, c23=1.0)

    def coefficient(self, j: int, k: int) -> float:
        return {(1, 2): self.c12, (1, 3): self.c13, (2, 3): self.c23}[(j, k)]

    def scaled(self, beta: float) -> "DeformationParams":
        return DeformationParams(beta * self.c0, beta * self.c12, beta * self.c13, beta * self.c23)

    @property
    def is_restricted(self) -> bool:
        return self.c13 == 1.0 and self.c23 == 1.0

    def as_dict(self) -> dict:
        return {"c0": self.c0, "c12": self.c12, "c13": self.c13, "c23": self.c23}


@dataclass(frozen=True)
class DiracTerm:
    """One summand ``omega (x) (K m + eps m K^dagger)``."""

    omega: np.ndarray
    K: np.ndarray
    eps: int = 1


def left_action(a: np.ndarray) -> np.ndarray:
    """Matrix of ``m -> a m`` on column-major ``vec(m)``."""
    n = a.shape[0]
    return np.kron(np.eye(n), a)


def right_action(b: np.ndarray) -> np.ndarray:
    """Matrix of ``m -> m b`` on column-major ``vec(m)``."""
    n = b.shape[0]
    return np.kron(b.T, np.eye(n))


def adjoint_action(L: np.ndarray) -> np.ndarray:
    """Matrix of ``m -> L m - m L``."""
    return left_action(L) - right_action(L)


def _term_operator(term: DiracTerm) -> np.ndarray:
    K = term.K
    inner = left_action(K) + term.eps * right_action(K.conj().T)
    return np.kron(term.omega, inner)


@dataclass(frozen=True)
class FiniteSpectralTriple:
    clifford: CliffordModule
    n: int
    terms: tuple
    deformation: Optional[DeformationParams] = None

    @cached_property
    def dirac(self) -> np.ndarray:
        size = self.clifford.dim * self.n**2
        D = np.zeros((size, size), dtype=complex)
        for term in self.terms:
            D += _term_operator(term)
        D.setflags(write=False)
        return D

    @property
    def hilbert_dim(self) -> int:
        return self.clifford.dim * self.n**2

    def rho(self, a: np.ndarray) -> np.ndarray:
        """Left representation ``I_V (x) (m -> a m)``."""
        return np.kron(np.eye(self.clifford.dim), left_action(a))

    def rho_right(self, a: np.ndarray) -> np.ndarray:
        return np.kron(np.eye(self.clifford.dim), right_action(a))

    def reduced_commutator(self, a: np.ndarray) -> np.ndarray:
        """``sum_i omega_i (x) [K_i, a]`` on ``V (x) C^n``.

        ``[D, rho(a)]`` is unitarily equivalent to this matrix tensored with
        ``I_n`` (right multiplications commute with ``rho(a)``), so both have
        the same operator norm.
        """
        out = np.zeros((self.clifford.dim * self.n,) * 2, dtype=complex)
        for term in self.terms:
            out += np.kron(term.omega, term.K @ a - a @ term.K)
        return out

    def to_json(self) -> dict:
        if self.deformation is None:
            raise ValueError("only deformed-sphere triples are serializable")
        return {
            "p": self.clifford.p,
            "q": self.clifford.q,
            "n": self.n,
            **self.deformation.as_dict(),
            "convention_tag": CONVENTION_TAG,
        }

    @classmethod
    def from_json(cls, data: dict) -> "FiniteSpectralTriple":
        if (data.get("p"), data.get("q")) != (1, 3):
            raise ValueError("serialized triples must use the (1, 3) module")
        if data.get("convention_tag", CONVENTION_TAG) != CONVENTION_TAG:
            raise ValueError(f"unknown convention tag {data['convention_tag']!r}")
        params = DeformationParams(*(float(data[k]) for k in ("c0", "c12", "c13", "c23")))
        return build_deformed_dirac(int(data["n"]), params)


def _has_hermiticity(M: np.ndarray, kind: int, tol: float = 1e-12) -> bool:
    scale = max(1.0, float(np.abs(M).max()))
    return bool(np.abs(M - kind * M.conj().T).max() <= tol * scale)


def build_general_dirac(clifford: CliffordModule, k_terms: Sequence, n: int) -> FiniteSpectralTriple:
    """Dirac operator ``sum_i omega_i v (x) (K_i m + eps_i m K_i^dagger)``.

    ``k_terms`` holds ``(omega, K, eps)`` triples or :class:`DiracTerm`.
    A term is self-adjoint only if ``omega`` and ``K`` are both hermitian or
    both anti-hermitian; anything else raises ``ValueError``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    terms = []
    for idx, raw in enumerate(k_terms):
        term = raw if isinstance(raw, DiracTerm) else DiracTerm(*raw)
        omega = np.asarray(term.omega, dtype=complex)
        K = np.asarray(term.K, dtype=complex)
        if omega.shape != (clifford.dim, clifford.dim):
            raise ValueError(f"term {idx}: omega has shape {omega.shape}, expected {(clifford.dim,) * 2}")
        if K.shape != (n, n):
            raise ValueError(f"term {idx}: K has shape {K.shape}, expected {(n, n)}")
        if term.eps not in (1, -1):
            raise ValueError(f"term {idx}: eps must be +1 or -1, got {term.eps}")
        # a zero omega or K is both hermitian and anti-hermitian
        w_kinds = [k for k in (1, -1) if _has_hermiticity(omega, k)]
        if not w_kinds:
            raise ValueError(f"term {idx}: omega is neither hermitian nor anti-hermitian")
        w_kind = w_kinds[0]
        if not any(_has_hermiticity(K, k) for k in w_kinds):
            raise ValueError(
                f"term {idx}: K must be {'hermitian' if w_kind == 1 else 'anti-hermitian'} "
                f"to match omega, so that the term is self-adjoint"
            )
        terms.append(DiracTerm(omega, K, int(term.eps)))
    return FiniteSpectralTriple(clifford, n, tuple(terms))


def deformed_terms(n: int, params: DeformationParams, L: Optional[Su2Generators] = None) -> list:
    """Term list of the deformed fuzzy-sphere Dirac operator."""
    cl = clifford_generators(1, 3)
    L = L or su2_generators(n)
    g0 = cl.gammas[0]
    terms = [DiracTerm(params.c0 * g0, 0.5 * np.eye(n, dtype=complex), 1)]
    for j, k in _PAIRS:
        terms.append(DiracTerm(params.coefficient(j, k) * cl.product(0, j, k), L.pair(j, k), 1))
    return terms


def build_deformed_dirac(n: int, params: Optional[DeformationParams] = None) -> FiniteSpectralTriple:
    """``c0 g0 (x) m + sum_{j<k} c_jk g0 gj gk (x) [L_jk, m]`` on ``C^4 (x) M_n``."""
    params = params or DeformationParams()
    t = build_general_dirac(clifford_generators(1, 3), deformed_terms(n, params), n)
    return FiniteSpectralTriple(t.clifford, n, t.terms, params)


def build_two_spinor_dirac(n: int) -> FiniteSpectralTriple:
    """``v (x) m + sum_{j<k} g^j g^k v (x) [L_jk, m]`` on the two-component ``(0, 3)`` module.

    Its spectrum is ``{1..n}`` together with ``{-1..-(n-1)}``; the round
    ``(1, 3)`` operator has this spectrum and its negative.
    """
    cl = clifford_generators(0, 3)
    L = su2_generators(n)
    terms = [DiracTerm(np.eye(2, dtype=complex), 0.5 * np.eye(n, dtype=complex), 1)]
    terms += [DiracTerm(cl.product(j - 1, k - 1), L.pair(j, k), 1) for j, k in _PAIRS]
    return build_general_dirac(cl, terms, n)


@dataclass(frozen=True)
class ValidationReport:
    hermiticity_defect: float
    first_order_defect: float
    symmetry_defect: float
    symmetry_required: bool
    tol: float
    trials: int

    @property
    def passed(self) -> bool:
        ok = self.hermiticity_defect < self.tol and self.first_order_defect < self.tol
        if self.symmetry_required:
            ok = ok and self.symmetry_defect < self.tol
        return ok

    @property
    def failures(self) -> list:
        out = []
        if self.hermiticity_defect >= self.tol:
            out.append("hermiticity")
        if self.first_order_defect >= self.tol:
            out.append("first-order")
        if self.symmetry_required and self.symmetry_defect >= self.tol:
            out.append("spectral-symmetry")
        return out


def validate_triple(t: FiniteSpectralTriple, trials: int = 20, tol: float = 1e-10,
                    seed: int = 0, dirac: Optional[np.ndarray] = None) -> ValidationReport:
    """Check self-adjointness, the first-order condition and spectral symmetry.

    ``dirac`` overrides the triple's assembled matrix (used to inspect a
    perturbed operator).  Symmetry of the spectrum only gates ``passed`` for
    deformed-sphere triples.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    D = t.dirac if dirac is None else np.asarray(dirac)
    herm = float(np.abs(D - D.conj().T).max())

    rng = np.random.default_rng(seed)
    n = t.n
    first_order = 0.0
    for _ in range(trials):
        a, b = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)) for _ in range(2))
        Ra, Lb = t.rho_right(a), t.rho(b)
        inner = D @ Ra - Ra @ D
        first_order = max(first_order, float(np.abs(inner @ Lb - Lb @ inner).max()))

    ev = np.linalg.eigvalsh((D + D.conj().T) / 2)
    sym = float(np.abs(np.sort(ev) - np.sort(-ev)).max())
    return ValidationReport(herm, first_order, sym, t.deformation is not None, tol, trials)
