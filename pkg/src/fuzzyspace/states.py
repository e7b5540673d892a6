"""Localized states of ``M_n(C)`` from the su(2) coordinate proxies.

A pure state is a unit vector ``psi`` in ``C^n``.  Its proxy coordinates are
the expectations ``<psi|J_i|psi>`` of the hermitian spin matrices
``J_i = -i L_i`` and its dispersion proxy is the summed variance
``sum_i <J_i^2> - <J_i>^2``.  Because ``sum_i J_i^2 = l(l+1)`` this equals
``l(l+1) - |x|^2``, minimized (value ``l``) by spin-coherent states.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize

from .triple import DeformationParams, Su2Generators, su2_generators

log = logging.getLogger(__name__)

COORDINATE_CONVENTION = "x_i = <psi| -i L_i |psi> (hermitian spin matrices J_i)"


@dataclass(frozen=True)
class LocalizedState:
    vector: np.ndarray
    dispersion: float
    coordinates: np.ndarray
    seed_index: int

    def expectation(self, a: np.ndarray) -> float:
        """``s(a) = <psi|a|psi>`` (real part; exact for hermitian ``a``)."""
        return float(np.real(np.vdot(self.vector, a @ self.vector)))


def _check_unit(psi: np.ndarray, n: int) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if psi.size != n:
        raise ValueError(f"state has size {psi.size}, expected {n}")
    if abs(np.linalg.norm(psi) - 1.0) > 1e-10:
        raise ValueError(f"state is not normalized (norm {np.linalg.norm(psi):.12g})")
    return psi


def coordinates(psi: np.ndarray, L: Su2Generators) -> np.ndarray:
    psi = _check_unit(psi, L.n)
    return np.array([np.real(np.vdot(psi, J @ psi)) for J in L.hermitian])


def dispersion_proxy(psi: np.ndarray, L: Su2Generators) -> float:
    """``sum_i <J_i^2> - <J_i>^2`` for a unit vector ``psi``."""
    psi = _check_unit(psi, L.n)
    total = 0.0
    for J in L.hermitian:
        Jpsi = J @ psi
        mean = np.real(np.vdot(psi, Jpsi))
        total += np.real(np.vdot(Jpsi, Jpsi)) - mean * mean
    return max(float(total), 0.0)


def distance_proxy(s1: LocalizedState, s2: LocalizedState) -> float:
    return float(np.linalg.norm(np.asarray(s1.coordinates) - np.asarray(s2.coordinates)))


def make_state(psi: np.ndarray, L: Su2Generators, seed_index: int = 0) -> LocalizedState:
    psi = _check_unit(psi, L.n)
    return LocalizedState(psi, dispersion_proxy(psi, L), coordinates(psi, L), seed_index)


def normalized_dispersion(dispersion: float, n: int) -> float:
    """Dispersion in units where the coordinate sphere has radius 1.

    Rescaling the coordinates by ``1/sqrt(l(l+1))`` makes ``sum_i X_i^2 = 1``;
    variances scale by ``1/(l(l+1))``.
    """
    l = (n - 1) / 2
    if l == 0:
        return 0.0
    return dispersion / (l * (l + 1))


def state_size(mean_dispersion: float, n: int) -> float:
    """Length scale of a state on the unit fuzzy sphere (std of ``X``)."""
    return math.sqrt(normalized_dispersion(mean_dispersion, n))


def default_coupling(n: int) -> float:
    return 0.05 * (n - 1) / 2


@dataclass
class StateEnsemble:
    states: list
    coulomb_g: float
    generator_n: int
    rng_seed: int
    deformation: Optional[DeformationParams] = None
    skipped: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.states)

    @property
    def mean_dispersion(self) -> float:
        return float(np.mean([s.dispersion for s in self.states]))

    @property
    def coordinate_array(self) -> np.ndarray:
        return np.array([s.coordinates for s in self.states]).reshape(-1, 3)

    def to_json(self) -> dict:
        return {
            "n": self.generator_n,
            "g": self.coulomb_g,
            "seed": self.rng_seed,
            "deformation": None if self.deformation is None else self.deformation.as_dict(),
            "coordinate_convention": COORDINATE_CONVENTION,
            "skipped": list(self.skipped),
            "states": [
                {
                    "index": s.seed_index,
                    "re": [float(x) for x in s.vector.real],
                    "im": [float(x) for x in s.vector.imag],
                    "dispersion": s.dispersion,
                    "coordinates": [float(x) for x in s.coordinates],
                }
                for s in self.states
            ],
        }

    def write(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)

    @classmethod
    def from_json(cls, data: dict) -> "StateEnsemble":
        n = int(data["n"])
        L = su2_generators(n)
        states = []
        for rec in data["states"]:
            psi = np.array(rec["re"]) + 1j * np.array(rec["im"])
            states.append(make_state(psi / np.linalg.norm(psi), L, int(rec["index"])))
        dfm = data.get("deformation")
        return cls(states, float(data["g"]), n, int(data["seed"]),
                   None if dfm is None else DeformationParams(**dfm), list(data.get("skipped", [])))

    @classmethod
    def read(cls, path) -> "StateEnsemble":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


class _Energy:
    """``E(psi) = l(l+1) - |x|^2 + g sum_i 1/|x - x_i|`` and its gradient."""

    def __init__(self, L: Su2Generators, fixed: np.ndarray, g: float):
        self.J = np.array(L.hermitian)
        self.casimir = L.spin * (L.spin + 1)
        self.fixed = fixed.reshape(-1, 3)
        self.g = g

    def __call__(self, psi):
        Jpsi = self.J @ psi
        x = np.real(Jpsi @ psi.conj())
        e = self.casimir - x @ x
        dEdx = -2.0 * x
        if len(self.fixed):
            diff = x - self.fixed
            r = np.sqrt(np.einsum("ij,ij->i", diff, diff))
            if np.any(r == 0):
                return math.inf, None
            e += self.g * np.sum(1.0 / r)
            dEdx -= self.g * np.sum(diff / r[:, None] ** 3, axis=0)
        grad = 2.0 * np.tensordot(dEdx, Jpsi, 1)
        return float(e), grad


def _descend(energy: _Energy, psi: np.ndarray, max_iter: int, tol: float):
    """Minimize ``E(psi/|psi|)`` with L-BFGS; the radial gradient part is projected out."""
    n = psi.size

    def fun(z):
        v = z[:n] + 1j * z[n:]
        r = np.linalg.norm(v)
        u = v / r
        e, g = energy(u)
        if g is None:
            return 1e300, np.zeros(2 * n)
        g = (g - np.real(np.vdot(u, g)) * u) / r
        return e, np.concatenate([g.real, g.imag])

    e0, _ = energy(psi)
    if not math.isfinite(e0):
        return psi, e0, False
    res = optimize.minimize(fun, np.concatenate([psi.real, psi.imag]), jac=True, method="L-BFGS-B",
                            options={"maxiter": max_iter, "ftol": tol, "gtol": 1e-10})
    v = res.x[:n] + 1j * res.x[n:]
    v /= np.linalg.norm(v)
    e, _ = energy(v)
    return v, e, bool(math.isfinite(e) and e <= e0)


def _random_unit(rng: np.random.Generator, n: int) -> np.ndarray:
    psi = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return psi / np.linalg.norm(psi)


def extend_states(ensemble: StateEnsemble, target_count: int, L: Optional[Su2Generators] = None,
                  restarts: int = 8, max_iter: int = 5000, tol: float = 1e-9,
                  max_attempts: Optional[int] = None) -> StateEnsemble:
    """Append states to ``ensemble`` until it holds ``target_count`` of them.

    State ``k`` always draws from the ``k``-th child of the ensemble seed, so
    extending a run gives the same states as generating the larger count in
    one go.
    """
    L = L or su2_generators(ensemble.generator_n)
    if L.n != ensemble.generator_n:
        raise ValueError("generator size does not match the ensemble")
    n = L.n
    index = (ensemble.states[-1].seed_index + 1) if ensemble.states else 0
    index = max([index] + [i + 1 for i in ensemble.skipped])
    max_attempts = max_attempts if max_attempts is not None else 2 * target_count + 10
    while len(ensemble.states) < target_count and index < max_attempts:
        children = np.random.SeedSequence([ensemble.rng_seed, index]).spawn(restarts)
        fixed = ensemble.coordinate_array
        energy = _Energy(L, fixed, ensemble.coulomb_g)
        best = None
        for child in children:
            psi0 = _random_unit(np.random.default_rng(child), n)
            psi, e, ok = _descend(energy, psi0, max_iter, tol)
            if ok and math.isfinite(e) and (best is None or e < best[0]):
                best = (e, psi)
        if best is None:
            log.warning("state %d: no descent after %d restarts, skipped", index, restarts)
            ensemble.skipped.append(index)
        else:
            state = make_state(best[1] / np.linalg.norm(best[1]), L, index)
            if len(fixed) and np.min(np.linalg.norm(fixed - state.coordinates, axis=1)) == 0:
                log.warning("state %d coincides with an earlier state, skipped", index)
                ensemble.skipped.append(index)
            else:
                ensemble.states.append(state)
        index += 1
    if len(ensemble.states) < target_count:
        log.warning("generated %d of %d requested states", len(ensemble.states), target_count)
    return ensemble


def generate_states(L: Su2Generators, target_count: int, g: Optional[float] = None, seed: int = 0,
                    restarts: int = 8, max_iter: int = 5000, tol: float = 1e-9,
                    deformation: Optional[DeformationParams] = None) -> StateEnsemble:
    """Sequentially minimize dispersion plus Coulomb repulsion to earlier states."""
    if target_count < 1:
        raise ValueError("target_count must be >= 1")
    g = default_coupling(L.n) if g is None else g
    if g <= 0 and target_count > 1:
        raise ValueError("Coulomb coupling g must be positive")
    ens = StateEnsemble([], float(g), L.n, int(seed), deformation)
    return extend_states(ens, target_count, L, restarts, max_iter, tol)
