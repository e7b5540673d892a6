"""Euclidean embeddings of distance matrices and ellipsoid fits to them."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize
from scipy.spatial.distance import pdist, squareform
from scipy.spatial.transform import Rotation

from .errors import DegenerateInputError


@dataclass
class EmbeddingResult:
    coords: np.ndarray
    stress: float
    stress_history: list
    correlations: np.ndarray
    constant_rows: np.ndarray
    dim: int
    seed: int = 0

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index"] + [f"x{k}" for k in range(self.dim)] + ["correlation"])
            for i, (row, c) in enumerate(zip(self.coords, self.correlations)):
                w.writerow([i] + [f"{v:.17g}" for v in row] + [f"{c:.17g}"])

    @staticmethod
    def read_coords(path) -> np.ndarray:
        rows = list(csv.reader(open(path, newline="")))
        return np.array([[float(v) for v in r[1:-1]] for r in rows[1:]])


def _stress(X, delta, W):
    E = squareform(pdist(X))
    return float(np.sum(np.triu(W * (E - delta) ** 2, 1)))


def _smacof_run(delta, W, Vplus, X, max_iter, eps):
    N = len(delta)
    s = _stress(X, delta, W)
    hist = [s]
    for _ in range(max_iter):
        E = squareform(pdist(X))
        with np.errstate(divide="ignore", invalid="ignore"):
            B = np.where(E > 0, -W * delta / E, 0.0)
        np.fill_diagonal(B, 0.0)
        np.fill_diagonal(B, -B.sum(axis=1))
        X = (B @ X) / N if Vplus is None else Vplus @ (B @ X)
        s_new = _stress(X, delta, W)
        hist.append(s_new)
        done = s - s_new < eps * max(s, 1e-300)
        s = s_new
        if done or s == 0:
            break
    return X, s, hist


def smacof_embed(dm, d: int = 3, weights: Optional[np.ndarray] = None, seed: int = 0,
                 max_iter: int = 3000, eps: float = 1e-10, restarts: int = 1) -> EmbeddingResult:
    """Stress majorization (Guttman transform) from seeded random starts.

    ``dm`` is a symmetric matrix or anything with a ``values`` attribute.
    Stress is ``sum_{i<j} w_ij (|x_i - x_j| - delta_ij)^2``; the run with the
    lowest final stress is kept, ties going to the lower restart index.
    """
    delta = np.asarray(getattr(dm, "values", dm), dtype=float)
    N = len(delta)
    if d < 1:
        raise ValueError("d must be >= 1")
    if delta.shape != (N, N) or not np.allclose(delta, delta.T):
        raise ValueError("distance matrix must be square and symmetric")
    if N < 2 or not np.any(delta > 0):
        raise DegenerateInputError("distance matrix is all zero")
    if weights is None:
        W, Vplus = np.ones((N, N)), None
    else:
        W = np.asarray(weights, dtype=float)
        if W.shape != (N, N) or np.any(W < 0):
            raise ValueError("weights must be a nonnegative N x N matrix")
        W = 0.5 * (W + W.T)
        V = -W.copy()
        np.fill_diagonal(V, 0.0)
        np.fill_diagonal(V, -V.sum(axis=1))
        Vplus = np.linalg.pinv(V)
    scale = float(np.mean(delta[np.triu_indices(N, 1)]))
    best = None
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        X0 = rng.standard_normal((N, d)) * scale
        X, s, hist = _smacof_run(delta, W, Vplus, X0, max_iter, eps)
        if best is None or s < best[1]:
            best = (X, s, hist)
    X, s, hist = best
    X = X - X.mean(axis=0)
    corr, flags = correlation_coefficients(delta, X)
    return EmbeddingResult(X, s, hist, corr, flags, d, seed)


def correlation_coefficients(dm, coords: np.ndarray):
    """Row-wise Pearson correlation of target and embedded distances.

    Returns ``(coefficients, constant_row_flags)``; a row with zero variance
    on either side gets coefficient 0 and its flag set.
    """
    delta = np.asarray(getattr(dm, "values", dm), dtype=float)
    X = np.asarray(coords, dtype=float)
    N = len(delta)
    if len(X) != N:
        raise ValueError("distance matrix and coordinates have different sizes")
    E = squareform(pdist(X)) if N > 1 else np.zeros((1, 1))
    out = np.zeros(N)
    flags = np.zeros(N, dtype=bool)
    mask = ~np.eye(N, dtype=bool)
    for i in range(N):
        a, b = delta[i][mask[i]], E[i][mask[i]]
        if a.size < 2 or np.ptp(a) == 0 or np.ptp(b) == 0:
            flags[i] = True
            continue
        out[i] = float(np.clip(np.corrcoef(a, b)[0, 1], -1.0, 1.0))
    return out, flags


def expected_axes(c12: float, c13: float, c23: float):
    """``(1/(c12 c13), 1/(c12 c23), 1/(c13 c23))``."""
    if min(c12, c13, c23) <= 0:
        raise ValueError("deformation parameters must be positive")
    return (1.0 / (c12 * c13), 1.0 / (c12 * c23), 1.0 / (c13 * c23))


@dataclass
class EllipsoidFit:
    axes: tuple
    angles: tuple  # polar and azimuthal angle of the longest axis
    center: np.ndarray
    residual_per_dof: float
    ok: bool = True
    frame: np.ndarray = field(default=None, repr=False)
    residual_kind: str = "algebraic"

    def to_json(self) -> dict:
        return {"axes": list(self.axes), "angles": list(self.angles),
                "center": [float(v) for v in self.center],
                "residual_per_dof": self.residual_per_dof, "ok": self.ok,
                "residual_kind": self.residual_kind}


def _frame(angles):
    return Rotation.from_euler("zyz", angles).as_matrix()


def _fit_residual(p, Y):
    U = _frame(p[:3])
    a2 = p[3:] ** 2
    return float(np.sum((np.sum((Y @ U) ** 2 / a2, axis=1) - 1.0) ** 2))


def fit_ellipsoid(coords: np.ndarray, seed: int = 0, starts: int = 16,
                  min_axis: float = 1e-6) -> EllipsoidFit:
    """Least-squares ellipsoid centred at the centroid.

    Minimizes ``sum_i (sum_k (y_i . u_k)^2 / a_k^2 - 1)^2`` over a rotated
    frame and three semi-axes with multi-start Nelder-Mead; the rotation
    about the main axis is a nuisance parameter.  The residual is divided
    by ``N - 5``.
    """
    X = np.asarray(coords, dtype=float)
    if X.ndim != 2 or X.shape[1] != 3:
        raise ValueError("coordinates must be N x 3")
    N = len(X)
    if N < 6:
        raise DegenerateInputError(f"ellipsoid fit needs at least 6 points, got {N}")
    center = X.mean(axis=0)
    Y = X - center
    r0 = float(np.sqrt((Y**2).sum(axis=1)).mean())
    rng = np.random.default_rng(seed)
    opts = dict(maxiter=40000, maxfev=40000, xatol=1e-11, fatol=1e-15)
    best = None
    for _ in range(starts):
        p0 = np.concatenate([rng.uniform(0, 2 * np.pi, 3), r0 * rng.uniform(0.7, 1.3, 3)])
        res = optimize.minimize(_fit_residual, p0, args=(Y,), method="Nelder-Mead", options=opts)
        # a restart from the optimum shakes Nelder-Mead out of a collapsed simplex
        res = optimize.minimize(_fit_residual, res.x, args=(Y,), method="Nelder-Mead", options=opts)
        if best is None or res.fun < best.fun:
            best = res
    axes = np.abs(best.x[3:])
    U = _frame(best.x[:3])
    order = np.argsort(axes)
    axes, U = axes[order], U[:, order]
    main = U[:, 2] * (1 if U[2, 2] >= 0 else -1)
    theta = float(np.arccos(np.clip(main[2], -1, 1)))
    phi = float(np.arctan2(main[1], main[0]) % (2 * np.pi))
    ok = bool(axes.min() >= min_axis and np.isfinite(best.fun))
    return EllipsoidFit(tuple(float(a) for a in axes), (theta, phi), center,
                        float(best.fun) / (N - 5), ok, U)


def _project_to_ellipsoid(X, axes):
    rho = np.sqrt(np.sum((X / axes) ** 2, axis=1))
    return X / rho[:, None]


def _coulomb(X):
    diff = X[:, None, :] - X[None, :, :]
    r = np.sqrt(np.sum(diff**2, axis=2))
    np.fill_diagonal(r, np.inf)
    energy = 0.5 * np.sum(1.0 / r)
    grad = -np.sum(diff / r[:, :, None] ** 3, axis=1)
    return float(energy), grad


def sample_ellipsoid(axes, N: int, seed: int = 0, max_iter: int = 20000, tol: float = 1e-14) -> np.ndarray:
    """``N`` points on the ellipsoid surface spread by Coulomb repulsion.

    Projected gradient descent: step against the energy gradient, then
    rescale each point radially back onto the surface.
    """
    axes = np.asarray(axes, dtype=float)
    if axes.shape != (3,) or np.any(axes <= 0):
        raise ValueError("axes must be three positive numbers")
    if N < 1:
        raise ValueError("N must be >= 1")
    rng = np.random.default_rng(seed)
    X = _project_to_ellipsoid(rng.standard_normal((N, 3)), axes)
    if N == 1:
        return X
    e, g = _coulomb(X)
    step = 0.1 * axes.min() / N
    for _ in range(max_iter):
        trial = _project_to_ellipsoid(X - step * g, axes)
        e_new, g_new = _coulomb(trial)
        if e_new < e:
            done = (e - e_new) < tol * e
            X, e, g = trial, e_new, g_new
            step *= 1.2
            if done:
                break
        else:
            step *= 0.5
            if step < 1e-16:
                break
    return X


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    density: np.ndarray

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["left", "right", "count", "density"])
            for lo, hi, c, d in zip(self.edges[:-1], self.edges[1:], self.counts, self.density):
                w.writerow([f"{lo:.17g}", f"{hi:.17g}", int(c), f"{d:.17g}"])


def freedman_diaconis_bins(values: np.ndarray) -> int:
    v = np.asarray(values, dtype=float)
    q75, q25 = np.percentile(v, [75, 25])
    h = 2 * (q75 - q25) * len(v) ** (-1 / 3)
    if h <= 0 or v.max() <= 0:
        return 1
    return max(1, int(math.ceil(v.max() / h)))


def distance_histogram(values, bins: Optional[int] = None) -> Histogram:
    """Equal-width bins over ``[0, max]`` with counts and normalized density."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("no values to histogram")
    bins = freedman_diaconis_bins(v) if bins is None else int(bins)
    if bins < 1:
        raise ValueError("bins must be >= 1")
    top = float(v.max()) if v.max() > 0 else 1.0
    counts, edges = np.histogram(v, bins=bins, range=(0.0, top))
    width = edges[1] - edges[0]
    return Histogram(edges, counts, counts / (counts.sum() * width))


def upper_triangle(dm) -> np.ndarray:
    D = np.asarray(getattr(dm, "values", dm), dtype=float)
    return D[np.triu_indices(len(D), 1)]


# Plot styling: fixed figure size, default font, no timestamps in the SVG.
_SVG_META = {"Date": None, "Creator": None}


def plot_embedding(coords: np.ndarray, correlations: np.ndarray, path, title: str = "") -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "fuzzyspace"
    fig = plt.figure(figsize=(5, 5))
    X = np.asarray(coords)
    if X.shape[1] >= 3:
        ax = fig.add_subplot(projection="3d")
        sc = ax.scatter(X[:, 0], X[:, 1], X[:, 2], c=correlations, cmap="viridis", vmin=0, vmax=1)
    else:
        ax = fig.add_subplot()
        sc = ax.scatter(X[:, 0], X[:, 1 % X.shape[1]], c=correlations, cmap="viridis", vmin=0, vmax=1)
        ax.set_aspect("equal")
    fig.colorbar(sc, ax=ax, shrink=0.7, label="correlation")
    ax.set_title(title)
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)


def plot_histogram(hist: Histogram, path, title: str = "", overlays: Optional[dict] = None) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "fuzzyspace"
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.stairs(hist.density, hist.edges, fill=True, alpha=0.5, label="distances")
    for name, h in (overlays or {}).items():
        ax.stairs(h.density, h.edges, label=name)
    ax.set_xlabel("distance")
    ax.set_ylabel("density")
    ax.set_title(title)
    ax.legend()
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)


def write_fit_json(fit: EllipsoidFit, path, expected=None, deformation: Optional[dict] = None,
                   extra: Optional[dict] = None) -> None:
    out = fit.to_json()
    out["expected_axes"] = None if expected is None else sorted(float(a) for a in expected)
    out["deformation"] = deformation
    out.update(extra or {})
    with open(path, "w") as fh:
        json.dump(out, fh, indent=2, sort_keys=True)
