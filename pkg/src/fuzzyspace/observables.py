"""Spectral observables computed from an eigenvalue table.

Heat-kernel moments give the spectral dimension and spectral variance; a
zeta-type sum over rescaled eigenvalues of ``D^2`` gives a volume estimate,
and together with a state size these fix how many localized states fit on
the geometry.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special

from .errors import DegenerateInputError
from .spectrum import EigenvalueTable

#: Matrix sizes below this are flagged as too coarse for a dimension estimate.
LOW_RESOLUTION_N = 6

#: Reference geometry used for the one-off volume calibration.
CALIBRATION_POINT = {"n": 20, "c": 1.0}


def _moments(spec: EigenvalueTable, t: float, powers=(2,)):
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    lam, mult = spec.weights()
    if lam.size == 0:
        raise ValueError("empty eigenvalue table")
    sq = lam * lam
    # Shift by the smallest exponent so the largest weight is exactly 1.
    w = mult * np.exp(-t * (sq - sq.min()))
    z = w.sum()
    return [float(np.dot(w, sq ** (p // 2)) / z) for p in powers]


def spectral_dimension(spec: EigenvalueTable, t: float) -> float:
    """``d_s(t) = 2 t <lambda^2>_t`` with heat-kernel weights ``exp(-t lambda^2)``."""
    (m2,) = _moments(spec, t, (2,))
    return 2.0 * t * m2


def spectral_variance(spec: EigenvalueTable, t: float) -> float:
    """``v_s(t) = 2 t^2 (<lambda^4>_t - <lambda^2>_t^2)``."""
    m2, m4 = _moments(spec, t, (2, 4))
    return 2.0 * t * t * max(m4 - m2 * m2, 0.0)


def _log_scale(lam_max: float) -> float:
    if lam_max <= 0:
        raise DegenerateInputError("spectrum has no nonzero eigenvalue")
    return math.log(lam_max + 1.0) ** 2 / lam_max


def probe_scale(spec: EigenvalueTable) -> float:
    """``t_d = (log(Lambda + 1))^2 / Lambda`` with ``Lambda = max |lambda|``."""
    return _log_scale(spec.lambda_max)


def round_half_away(x: float) -> int:
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


def dimension_estimate(spec: EigenvalueTable) -> int:
    return round_half_away(spectral_dimension(spec, probe_scale(spec)))


def is_low_resolution(spec: EigenvalueTable) -> bool:
    return spec.n < LOW_RESOLUTION_N


def upper_incomplete_gamma(s: float, x: float) -> float:
    """Non-regularized ``Gamma(s, x)`` for any real ``s`` and ``x > 0``.

    Positive ``s`` goes through the regularized scipy function; otherwise
    ``Gamma(s, x) = (Gamma(s+1, x) - x^s e^-x) / s`` is applied downward from
    ``Gamma(0, x) = E_1(x)`` or from ``s + m`` in ``(0, 1)``.
    """
    if x <= 0:
        raise ValueError("x must be positive")
    if s > 0:
        return float(special.gammaincc(s, x) * special.gamma(s))
    steps = int(math.floor(-s)) + (0 if s == math.floor(s) else 1)
    top = s + steps
    val = float(special.exp1(x)) if top == 0 else float(special.gammaincc(top, x) * special.gamma(top))
    for k in range(steps):
        cur = top - 1 - k
        val = (val - x**cur * math.exp(-x)) / cur
    return val


def zeta_volume_sum(spec: EigenvalueTable, d: int) -> float:
    """Uncalibrated volume (the calibration divisor set to 1).

    Eigenvalues are rescaled as ``lambda' = s lambda^2`` with
    ``s = (log(Lambda + 1))^2 / Lambda`` and ``Lambda = max lambda^2``, i.e.
    the probe scale of the ``D^2`` spectrum.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    lam, mult = spec.weights()
    sq = lam * lam
    scale = _log_scale(float(sq.max()))
    rescaled = scale * sq
    total = float(np.dot(mult, np.exp(-rescaled - 1.0) / (rescaled + 1.0)))
    return (4 * math.pi) ** (d / 2) * scale ** (d / 2) * total * upper_incomplete_gamma(1 - d / 2, 1.0)


def volume(spec: EigenvalueTable, d: int, calibration: float) -> float:
    if calibration <= 0:
        raise ValueError("calibration must be positive")
    return zeta_volume_sum(spec, d) / calibration


def reference_volume(d: int = 2) -> float:
    """Volume of two unit ``d``-spheres (eigenvalue doubling counts it twice)."""
    return 2 * 2 * math.pi ** ((d + 1) / 2) / special.gamma((d + 1) / 2)


def calibrate_volume(d: int = 2) -> float:
    """Calibration divisor making the round ``n = 20`` sphere's volume ratio 1."""
    from .spectrum import analytic_spectrum

    ref = analytic_spectrum(CALIBRATION_POINT["n"], 1.0, CALIBRATION_POINT["c"])
    return zeta_volume_sum(ref, d) / reference_volume(d)


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / special.gamma(d / 2 + 1)


def max_states(v_geom: float, delta: float, d: int) -> int:
    """``floor(V / (delta^d B_d))``, at least 1."""
    if v_geom <= 0 or delta <= 0 or d < 1:
        raise ValueError("need v_geom > 0, delta > 0, d >= 1")
    return max(1, int(math.floor(v_geom / (delta**d * unit_ball_volume(d)) + 1e-12)))


def t_grid(t_d: float, points: int = 200) -> np.ndarray:
    return np.logspace(math.log10(t_d / 100), math.log10(100 * t_d), points)


@dataclass
class ObservableReport:
    dimension_estimate: int
    t_d: float
    volume: float
    volume_ratio: float
    calibration: float
    lambda_max: float
    low_resolution: bool
    volume_dimension: int = 2
    max_states: int | None = None
    t: np.ndarray = field(default=None, repr=False)
    d_s: np.ndarray = field(default=None, repr=False)
    v_s: np.ndarray = field(default=None, repr=False)

    def to_json(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k not in ("t", "d_s", "v_s")}
        out["calibration_note"] = (
            "volume divisor fitted so that the round n=20 sphere has volume_ratio 1; "
            "not a physical constant"
        )
        return out

    def write(self, json_path, csv_path=None) -> None:
        with open(json_path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
        if csv_path is not None:
            with open(csv_path, "w") as fh:
                fh.write("t,d_s,v_s\n")
                for row in zip(self.t, self.d_s, self.v_s):
                    fh.write(",".join(f"{x:.17g}" for x in row) + "\n")


def observable_report(spec: EigenvalueTable, calibration: float | None = None,
                      points: int = 200, volume_dimension: int = 2) -> ObservableReport:
    """Dimension, volume and sampled ``d_s``/``v_s`` curves for one spectrum.

    The volume is evaluated in a fixed dimension (2 by default) rather than in
    the estimated one, so that volume ratios stay comparable across
    deformations even where the estimate drops.
    """
    d = dimension_estimate(spec)
    t_d = probe_scale(spec)
    cal = calibrate_volume(volume_dimension) if calibration is None else calibration
    v = volume(spec, volume_dimension, cal)
    ts = t_grid(t_d, points)
    return ObservableReport(
        dimension_estimate=d,
        t_d=t_d,
        volume=v,
        volume_ratio=v / reference_volume(volume_dimension),
        calibration=cal,
        lambda_max=spec.lambda_max,
        low_resolution=is_low_resolution(spec),
        volume_dimension=volume_dimension,
        t=ts,
        d_s=np.array([spectral_dimension(spec, t) for t in ts]),
        v_s=np.array([spectral_variance(spec, t) for t in ts]),
    )
