"""Eigenvalue tables: closed-form deformed-sphere spectra and numeric ones."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NumericalError, StructuralMismatchError
from .triple import FiniteSpectralTriple

POSITIVE = "positive-root"
NEGATIVE = "negative-root"
NUMERIC = "numeric"

CSV_HEADER = ("value", "multiplicity", "branch", "two_j", "two_k")


@dataclass(frozen=True)
class EigenvalueTable:
    """Multiset of eigenvalues with provenance.

    ``two_j``/``two_k`` store twice the half-integer labels; ``-1`` marks an
    absent label (numeric entries).
    """

    values: np.ndarray
    multiplicities: np.ndarray
    branches: tuple
    two_j: np.ndarray
    two_k: np.ndarray
    n: int

    def __len__(self) -> int:
        return len(self.values)

    @property
    def total(self) -> int:
        return int(self.multiplicities.sum())

    @property
    def is_complete(self) -> bool:
        return self.total == 4 * self.n**2

    @property
    def lambda_max(self) -> float:
        return float(np.abs(self.values).max()) if len(self) else 0.0

    def expanded(self) -> np.ndarray:
        """Sorted eigenvalues with each value repeated by its multiplicity."""
        return np.sort(np.repeat(self.values, self.multiplicities))

    def weights(self):
        """``(values, multiplicities)`` as float arrays, for moment sums."""
        return self.values.astype(float), self.multiplicities.astype(float)

    @classmethod
    def from_values(cls, values, n: int, branch: str = NUMERIC) -> "EigenvalueTable":
        values = np.sort(np.asarray(values, dtype=float))
        k = len(values)
        return cls(values, np.ones(k, dtype=int), (branch,) * k,
                   -np.ones(k, dtype=int), -np.ones(k, dtype=int), n)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for v, m, b, tj, tk in zip(self.values, self.multiplicities, self.branches,
                                       self.two_j, self.two_k):
                w.writerow([f"{v:.17g}", int(m), b, "" if tj < 0 else int(tj), "" if tk < 0 else int(tk)])

    @classmethod
    def from_csv(cls, path, n: int | None = None) -> "EigenvalueTable":
        rows = list(csv.DictReader(open(Path(path), newline="")))
        if not rows or tuple(rows[0].keys()) != CSV_HEADER:
            raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)}")
        vals = np.array([float(r["value"]) for r in rows])
        mult = np.array([int(r["multiplicity"]) for r in rows])
        tj = np.array([int(r["two_j"]) if r["two_j"] else -1 for r in rows])
        tk = np.array([int(r["two_k"]) if r["two_k"] else -1 for r in rows])
        if n is None:
            n = int(round(math.sqrt(mult.sum() / 4)))
        return cls(vals, mult, tuple(r["branch"] for r in rows), tj, tk, n)


def analytic_spectrum(n: int, a: float = 1.0, c: float = 1.0) -> EigenvalueTable:
    """Closed-form spectrum of the two-parameter deformed Dirac operator.

    Positive-root branch ``+-(a - c/2 + sqrt(j^2 + (c^2-1) k^2))`` over
    ``j = 1/2 .. n-1/2``; negative-root branch
    ``+-(a - c/2 - sqrt((j+1)^2 + (c^2-1) k^2))`` over ``j = 1/2 .. n-3/2``;
    ``k = 1/2 .. j`` in both.  Every signed value has multiplicity 2.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (math.isfinite(a) and math.isfinite(c)):
        raise ValueError("a and c must be finite")
    vals, branches, tjs, tks = [], [], [], []
    for branch, top, shift, sign in ((POSITIVE, 2 * n - 1, 0, 1.0), (NEGATIVE, 2 * n - 3, 2, -1.0)):
        for tj in range(1, top + 1, 2):
            for tk in range(1, tj + 1, 2):
                root = math.sqrt(((tj + shift) / 2) ** 2 + (c * c - 1) * (tk / 2) ** 2)
                lam = a - c / 2 + sign * root
                for s in (1.0, -1.0):
                    vals.append(s * lam)
                    branches.append(branch)
                    tjs.append(tj)
                    tks.append(tk)
    k = len(vals)
    return EigenvalueTable(np.array(vals), np.full(k, 2), tuple(branches),
                           np.array(tjs, dtype=int), np.array(tks, dtype=int), n)


def numeric_spectrum(t: FiniteSpectralTriple) -> EigenvalueTable:
    """Dense hermitian diagonalization of the assembled Dirac operator."""
    D = t.dirac
    try:
        ev = np.linalg.eigvalsh(D)
    except np.linalg.LinAlgError as exc:
        finite = bool(np.isfinite(D).all())
        cond = np.linalg.cond(D) if finite else float("inf")
        raise NumericalError(
            f"eigensolver failed for {D.shape} Dirac (finite={finite}, cond={cond:.3g}): {exc}"
        ) from exc
    return EigenvalueTable.from_values(ev, t.n)


@dataclass(frozen=True)
class SpectrumDiff:
    max_deviation: float
    count: int
    tol: float

    @property
    def matches(self) -> bool:
        return self.max_deviation < self.tol


def compare_spectra(x: EigenvalueTable, y: EigenvalueTable, tol: float = 1e-9) -> SpectrumDiff:
    """Positional comparison of the sorted expanded multisets."""
    ex, ey = x.expanded(), y.expanded()
    if len(ex) != len(ey):
        raise StructuralMismatchError(f"multiplicity totals differ: {len(ex)} vs {len(ey)}")
    dev = float(np.abs(ex - ey).max()) if len(ex) else 0.0
    return SpectrumDiff(dev, len(ex), tol)
