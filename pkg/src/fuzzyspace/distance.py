"""Connes spectral distance between pure states of ``M_n(C)``.

``d(s1, s2) = sup { s1(a) - s2(a) : a = a^dagger, ||[D, rho(a)]|| <= 1 }``.

Writing ``a = sum_k x_k B_k`` over an orthonormal traceless hermitian basis
turns this into a linear objective ``f . x`` under the convex constraint
``||sum_k x_k H_k|| <= 1`` with ``H_k = i [D, rho(B_k)]`` (hermitian).  The
default solver is a log-barrier interior-point method on the equivalent
problem ``min ||H(x)||`` subject to ``f . x = 1``; it certifies the result
with an explicit witness and an upper bound.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .algebra import HermitianBasis, make_basis, traceless_reduction
from .errors import NumericalError
from .states import LocalizedState, StateEnsemble
from .triple import FiniteSpectralTriple

log = logging.getLogger(__name__)

METHODS = ("barrier", "subgradient")


def lipschitz_seminorm(t: FiniteSpectralTriple, a: np.ndarray, method: str = "reduced") -> float:
    """Operator norm ``||[D, rho(a)]||``.

    ``"reduced"`` works on the ``dim(V) n``-sized factor that carries the
    whole commutator; ``"full"`` forms the full matrix and takes its largest
    singular value.
    """
    a = np.asarray(a, dtype=complex)
    if a.shape != (t.n, t.n):
        raise ValueError(f"element has shape {a.shape}, expected {(t.n, t.n)}")
    try:
        if method == "reduced":
            return float(np.linalg.norm(t.reduced_commutator(a), 2))
        if method == "full":
            R = t.rho(a)
            return float(np.linalg.norm(t.dirac @ R - R @ t.dirac, 2))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular value computation failed: {exc}") from exc
    raise ValueError(f"unknown method {method!r}")


@dataclass
class DistanceResult:
    value: float
    witness: np.ndarray  # coefficients over the traceless basis
    lipschitz_norm: float
    iterations: int
    converged: bool
    upper_bound: float

    def element(self, basis: HermitianBasis) -> np.ndarray:
        return basis.combine(self.witness)


class DistanceProblem:
    """Commutator data for one triple and one search basis, shared by all pairs."""

    def __init__(self, t: FiniteSpectralTriple, basis: HermitianBasis | str = "pbw",
                 max_degree: Optional[int] = None):
        if isinstance(basis, str):
            basis = make_basis(basis, t.n, max_degree)
        if basis.n != t.n:
            raise ValueError("basis and triple have different n")
        self.triple = t
        self.basis_kind = basis.kind
        self.basis = traceless_reduction(basis)
        self.H = np.array([1j * t.reduced_commutator(B) for B in self.basis.elements])
        if len(self.H):
            self.H = 0.5 * (self.H + self.H.conj().transpose(0, 2, 1))

    @property
    def key(self) -> str:
        t = self.triple
        payload = {"n": t.n, "basis": self.basis_kind, "dim": len(self.basis),
                   "dirac": hashlib.sha256(np.ascontiguousarray(t.dirac).tobytes()).hexdigest()}
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]

    def state_gap(self, s1: LocalizedState, s2: LocalizedState) -> np.ndarray:
        """``f_k = s1(B_k) - s2(B_k)``."""
        return np.array([s1.expectation(B) - s2.expectation(B) for B in self.basis.elements])

    def norm(self, x: np.ndarray) -> float:
        return float(np.abs(np.linalg.eigvalsh(np.tensordot(x, self.H, 1))).max())

    def solve(self, s1: LocalizedState, s2: LocalizedState, method: str = "barrier",
              rtol: float = 1e-9, max_iter: Optional[int] = None) -> DistanceResult:
        f = self.state_gap(s1, s2)
        if not len(f) or np.linalg.norm(f) < 1e-14:
            return DistanceResult(0.0, np.zeros(len(f)), 0.0, 0, True, 0.0)
        if method == "barrier":
            x, upper, its, ok = _barrier(self.H, f, rtol, max_iter or 3000)
        elif method == "subgradient":
            x, upper, its, ok = _subgradient(self, f, rtol, max_iter or 5000)
        else:
            raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
        nrm = self.norm(x)
        if not np.isfinite(nrm) or nrm <= 0:
            raise NumericalError("witness has a degenerate commutator norm")
        x = x / nrm
        value = float(f @ x)
        if value < 0:
            x, value = -x, -value
        return DistanceResult(value, x, self.norm(x), its, ok, max(float(upper), value))


def connes_distance(t: FiniteSpectralTriple, s1: LocalizedState, s2: LocalizedState,
                    basis: HermitianBasis | str = "pbw", method: str = "barrier",
                    rtol: float = 1e-9) -> DistanceResult:
    return DistanceProblem(t, basis).solve(s1, s2, method, rtol)


def _barrier(H: np.ndarray, f: np.ndarray, rtol: float, max_iter: int,
             mu: float = 30.0, center_tol: float = 1e-4):
    """Minimize ``t`` over ``-tI <= H(x) <= tI`` with ``f . x = 1``.

    Parametrizes the affine plane as ``x = x0 + P y`` and follows the central
    path of ``tau t - logdet(tI - H) - logdet(tI + H)`` with damped Newton
    steps.  Returns the witness, an upper bound ``1/(t - nu/tau)`` on the
    distance, the Newton iteration count and a convergence flag.
    """
    m, k, _ = H.shape
    x0 = f / (f @ f)
    if m == 1:
        return x0, 1.0 / np.abs(np.linalg.eigvalsh(x0[0] * H[0])).max(), 0, True
    Q, _ = np.linalg.qr(np.column_stack([f, np.eye(m)]))
    P = Q[:, 1:m]
    Hy = np.tensordot(P.T, H, 1)
    H0 = np.tensordot(x0, H, 1)
    nu = 2 * k
    y = np.zeros(m - 1)
    t = 1.5 * np.abs(np.linalg.eigvalsh(H0)).max()
    tau = nu / t
    its = 0

    def potential(y, t):
        lam = np.linalg.eigvalsh(H0 + np.tensordot(y, Hy, 1))
        if t - lam.max() <= 0 or t + lam.min() <= 0:
            return math.inf
        return tau * t - np.sum(np.log(t - lam)) - np.sum(np.log(t + lam))

    while True:
        for _ in range(60):
            lam, V = np.linalg.eigh(H0 + np.tensordot(y, Hy, 1))
            d1, d2 = 1 / (t - lam), 1 / (t + lam)
            Ht = V.conj().T[None] @ Hy @ V[None]
            diag = np.real(np.einsum("kii->ki", Ht))
            grad = np.append(diag @ (d1 - d2), tau - d1.sum() - d2.sum())
            W = (np.outer(d1, d1) + np.outer(d2, d2)).reshape(-1)
            G = Ht.reshape(m - 1, -1)
            hess = np.empty((m, m))
            hess[:-1, :-1] = np.real((G * W) @ G.conj().T)
            hess[:-1, -1] = hess[-1, :-1] = diag @ (d2**2 - d1**2)
            hess[-1, -1] = np.sum(d1**2 + d2**2)
            try:
                dz = -np.linalg.solve(hess, grad)
            except np.linalg.LinAlgError:
                dz = -np.linalg.lstsq(hess, grad, rcond=None)[0]
            dec = -grad @ dz
            its += 1
            if dec / 2 < center_tol:
                break
            s, p0 = 1.0, potential(y, t)
            while potential(y + s * dz[:-1], t + s * dz[-1]) > p0 - 0.25 * s * dec:
                s *= 0.5
                if s < 1e-10:
                    break
            if s < 1e-10:
                break
            y, t = y + s * dz[:-1], t + s * dz[-1]
        if nu / tau < rtol * t:
            return x0 + P @ y, 1.0 / (t - nu / tau), its, True
        if its >= max_iter:
            gap = t - nu / tau
            return x0 + P @ y, (1.0 / gap if gap > 0 else math.inf), its, False
        tau *= mu


def _subgradient(problem: DistanceProblem, f: np.ndarray, rtol: float, max_iter: int,
                 stall: int = 50, restarts: int = 4, seed: int = 0):
    """Normalized ascent on ``r(x) = f . x / ||H(x)||``, best of several starts.

    The norm subgradient is averaged over the (near-)degenerate top
    eigenspace of ``H(x)``.  Steps grow on success and halve on failure;
    a run stops once the best value improves by less than ``rtol`` over
    ``stall`` iterations.  No upper bound is certified, so ``inf`` is
    reported for it.
    """
    H = problem.H
    rng = np.random.default_rng(seed)

    def ratio(x):
        lam, V = np.linalg.eigh(np.tensordot(x, H, 1))
        top = np.abs(lam).max()
        sel = np.abs(lam) >= top * (1 - 1e-9)
        W = V[:, sel] * np.sign(lam[sel])[None, :]
        dn = np.real(np.einsum("ia,kij,ja->k", V[:, sel].conj(), H, W)) / sel.sum()
        return (f @ x) / top, top, dn

    best_x, best_r, its, all_ok = None, -math.inf, 0, True
    for r_i in range(restarts):
        x = f / np.linalg.norm(f)
        if r_i:
            x = x + 0.5 * rng.standard_normal(len(f)) / math.sqrt(len(f))
            x /= np.linalg.norm(x)
        r, top, dn = ratio(x)
        step, mark, since, ok = 0.1, r, 0, False
        for _ in range(max_iter):
            its += 1
            g = f / top - (f @ x) * dn / top**2
            g -= (g @ x) * x
            gn = np.linalg.norm(g)
            if gn == 0:
                ok = True
                break
            trial = x + step * g / gn
            trial /= np.linalg.norm(trial)
            r_new, top_new, dn_new = ratio(trial)
            if r_new > r:
                x, r, top, dn = trial, r_new, top_new, dn_new
                step *= 1.2
            else:
                step *= 0.5
            since += 1
            if r > mark * (1 + rtol) + 1e-300:
                mark, since = r, 0
            elif since >= stall or step < 1e-14:
                ok = True
                break
        all_ok &= ok
        if r > best_r:
            best_x, best_r = x, r
    return best_x, math.inf, its, all_ok


@dataclass
class DistanceMatrix:
    values: np.ndarray
    upper: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    meta: dict

    @property
    def size(self) -> int:
        return len(self.values)

    @property
    def all_converged(self) -> bool:
        return bool(self.converged.all())

    def pairs(self):
        return [(i, j) for i in range(self.size) for j in range(i + 1, self.size)]

    def write(self, csv_path, json_path) -> None:
        """Dense CSV (header = state indices) plus a JSON sidecar with flags."""
        N = self.size
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(range(N))
            for row in self.values:
                w.writerow([f"{v:.17g}" for v in row])
        side = {**self.meta, "size": N, "all_converged": self.all_converged,
                "converged": self.converged.astype(int).tolist(),
                "upper_bound": [[float(v) if math.isfinite(v) else None for v in row] for row in self.upper],
                "iterations": self.iterations.tolist()}
        with open(json_path, "w") as fh:
            json.dump(side, fh, indent=1, sort_keys=True)

    @classmethod
    def read(cls, csv_path, json_path=None) -> "DistanceMatrix":
        rows = list(csv.reader(open(csv_path, newline="")))
        values = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(len(rows) - 1, -1)
        N = len(values)
        if values.shape != (N, N):
            raise ValueError(f"{csv_path}: distance matrix is not square")
        meta = json.load(open(json_path)) if json_path is not None and Path(json_path).exists() else {}
        conv = np.array(meta.pop("converged", np.ones((N, N))), dtype=bool).reshape(N, N)
        upper = np.array([[math.inf if v is None else v for v in r]
                          for r in meta.pop("upper_bound", values.tolist())], dtype=float).reshape(N, N)
        its = np.array(meta.pop("iterations", np.zeros((N, N))), dtype=int).reshape(N, N)
        for k in ("size", "all_converged"):
            meta.pop(k, None)
        return cls(values, upper, its, conv, meta)


_WORKER: dict = {}


def _init_worker(problem, states, method, rtol):
    _WORKER.update(problem=problem, states=states, method=method, rtol=rtol)


def _solve_pair(pair):
    i, j = pair
    w = _WORKER
    res = w["problem"].solve(w["states"][i], w["states"][j], w["method"], w["rtol"])
    return i, j, res


def _cache_file(cache_dir: Path, problem: DistanceProblem, s1, s2, method: str, rtol: float) -> Path:
    h = hashlib.sha256()
    h.update(problem.key.encode())
    h.update(f"{method}:{rtol!r}".encode())
    for s in (s1, s2):
        h.update(np.ascontiguousarray(s.vector).tobytes())
    return cache_dir / f"{h.hexdigest()[:24]}.json"


def distance_matrix(problem: DistanceProblem, ensemble: StateEnsemble | list, method: str = "barrier",
                    rtol: float = 1e-9, workers: int = 1, cache_dir=None) -> DistanceMatrix:
    """All pairwise distances; pairs found in ``cache_dir`` are not recomputed."""
    states = list(ensemble.states if isinstance(ensemble, StateEnsemble) else ensemble)
    N = len(states)
    D = DistanceMatrix(np.zeros((N, N)), np.zeros((N, N)), np.zeros((N, N), dtype=int),
                       np.ones((N, N), dtype=bool),
                       {"triple_key": problem.key, "basis": problem.basis_kind,
                        "basis_dim": len(problem.basis), "method": method, "rtol": rtol})
    cache = Path(cache_dir) if cache_dir is not None else None
    if cache is not None:
        cache.mkdir(parents=True, exist_ok=True)
    todo = []
    for i in range(N):
        for j in range(i + 1, N):
            hit = cache and _cache_file(cache, problem, states[i], states[j], method, rtol)
            if hit and hit.exists():
                rec = json.load(open(hit))
                _store(D, i, j, rec["value"], rec["upper_bound"], rec["iterations"], rec["converged"])
            else:
                todo.append((i, j))

    def record(i, j, res: DistanceResult):
        _store(D, i, j, res.value, res.upper_bound, res.iterations, res.converged)
        if cache is not None:
            path = _cache_file(cache, problem, states[i], states[j], method, rtol)
            tmp = path.with_suffix(".tmp")
            with open(tmp, "w") as fh:
                json.dump({"value": res.value, "upper_bound": res.upper_bound,
                           "iterations": res.iterations, "converged": res.converged}, fh)
            os.replace(tmp, path)

    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(workers, initializer=_init_worker,
                                 initargs=(problem, states, method, rtol)) as pool:
            for i, j, res in pool.map(_solve_pair, todo, chunksize=max(1, len(todo) // (8 * workers))):
                record(i, j, res)
    else:
        for i, j in todo:
            record(i, j, problem.solve(states[i], states[j], method, rtol))
    n_bad = int((~D.converged).sum() // 2)
    if n_bad:
        log.warning("%d distance pairs did not converge", n_bad)
    return D


def _store(D: DistanceMatrix, i, j, value, upper, its, ok):
    D.values[i, j] = D.values[j, i] = value
    D.upper[i, j] = D.upper[j, i] = upper
    D.iterations[i, j] = D.iterations[j, i] = its
    D.converged[i, j] = D.converged[j, i] = bool(ok)
