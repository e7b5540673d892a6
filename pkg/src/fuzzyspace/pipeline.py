"""Pipeline stages: each reads its inputs from the run directory and writes artifacts.

Stage order is spectrum, observables, states, distances, embed, fit, report.
Every artifact is plain CSV/JSON (SVG for plots) and is written
deterministically, so reruns with the same config reproduce it byte for byte.
"""
from __future__ import annotations

import hashlib
import json
import logging
import platform
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .algebra import make_basis
from .config import AUTO, RunConfig
from .distance import DistanceMatrix, DistanceProblem, distance_matrix
from .embed import (
    EmbeddingResult,
    distance_histogram,
    expected_axes,
    fit_ellipsoid,
    plot_embedding,
    plot_histogram,
    sample_ellipsoid,
    smacof_embed,
    upper_triangle,
    write_fit_json,
)
from .errors import NonConvergenceError
from .observables import calibrate_volume, max_states, observable_report, volume
from .spectrum import EigenvalueTable, analytic_spectrum, compare_spectra, numeric_spectrum
from .states import StateEnsemble, default_coupling, extend_states, state_size
from .triple import CONVENTION_TAG, DeformationParams, build_deformed_dirac, su2_generators

log = logging.getLogger(__name__)

STAGES = ("spectrum", "observables", "states", "distances", "embed", "fit", "report")

FILES = {
    "spectrum": ("spectrum.csv",),
    "observables": ("observables.json", "curves.csv"),
    "states": ("states.json",),
    "distances": ("distances.csv", "distances.json"),
    "embed": ("embedding.csv", "embedding.json"),
    "fit": ("fit.json",),
    "report": ("report.json", "histogram.csv"),
}


def _dump(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def analytic_parameter(cfg: RunConfig) -> Optional[float]:
    """Return ``c`` when at most one ``c_ij`` differs from 1, else ``None``.

    The closed form is stated for ``c12 = c``; relabelling the axes moves the
    odd coefficient to any other pair without changing the spectrum.
    """
    cs = [cfg["c12"], cfg["c13"], cfg["c23"]]
    odd = [c for c in cs if c != 1.0]
    if len(odd) > 1:
        return None
    return odd[0] if odd else 1.0


class Run:
    """One run directory plus its config; stages share state through files."""

    def __init__(self, cfg: RunConfig, outdir=None, workers: Optional[int] = None, resume: bool = False):
        self.cfg = cfg
        self.outdir = Path(outdir or cfg["output_dir"])
        self.outdir.mkdir(parents=True, exist_ok=True)
        self.workers = workers or cfg["workers"]
        self.resume = resume
        self.timings: dict = {}
        self.warnings: list = []
        self.nonconverged = False
        self._triple = None
        self._calibration = None

    # shared objects -----------------------------------------------------
    @property
    def params(self) -> DeformationParams:
        return DeformationParams(**self.cfg.deformation)

    @property
    def triple(self):
        if self._triple is None:
            self._triple = build_deformed_dirac(self.cfg["n"], self.params)
        return self._triple

    @property
    def calibration(self) -> float:
        if self._calibration is None:
            cal = self.cfg["volume_calibration"]
            self._calibration = calibrate_volume(2) if cal == AUTO else float(cal)
        return self._calibration

    def path(self, name: str) -> Path:
        return self.outdir / name

    def done(self, stage: str) -> bool:
        return self.resume and all(self.path(f).exists() for f in FILES[stage])

    def run_stage(self, stage: str) -> None:
        if self.done(stage):
            log.info("stage %s: reusing existing artifacts", stage)
            return
        t0 = time.perf_counter()
        getattr(self, f"stage_{stage}")()
        self.timings[stage] = round(time.perf_counter() - t0, 3)
        log.info("stage %s finished in %.1fs", stage, self.timings[stage])

    # stages -------------------------------------------------------------
    def spectrum(self) -> EigenvalueTable:
        p = self.path("spectrum.csv")
        if p.exists():
            return EigenvalueTable.from_csv(p, self.cfg["n"])
        self.stage_spectrum()
        return EigenvalueTable.from_csv(p, self.cfg["n"])

    def stage_spectrum(self) -> None:
        n = self.cfg["n"]
        c = analytic_parameter(self.cfg)
        analytic = analytic_spectrum(n, self.cfg["c0"], c) if c is not None else None
        numeric = numeric_spectrum(self.triple) if n <= self.cfg["spectrum_numeric_max_n"] else None
        if analytic is None and numeric is None:
            numeric = numeric_spectrum(self.triple)
        main = analytic if analytic is not None else numeric
        main.to_csv(self.path("spectrum.csv"))
        if analytic is not None and numeric is not None:
            numeric.to_csv(self.path("spectrum_numeric.csv"))
            diff = compare_spectra(analytic, numeric)
            _dump({"max_deviation": diff.max_deviation, "count": diff.count, "tol": diff.tol,
                   "matches": diff.matches}, self.path("spectrum_diff.json"))
            if not diff.matches:
                self.warnings.append(f"analytic and numeric spectra differ by {diff.max_deviation:.3g}")

    def stage_observables(self, spectrum_path=None) -> None:
        spec = EigenvalueTable.from_csv(spectrum_path) if spectrum_path else self.spectrum()
        rep = observable_report(spec, self.calibration)
        rep.write(self.path("observables.json"), self.path("curves.csv"))

    def observables(self) -> dict:
        if not self.path("observables.json").exists():
            self.stage_observables()
        return json.load(open(self.path("observables.json")))

    def stage_states(self) -> None:
        cfg, st = self.cfg, self.cfg.section("states")
        n = cfg["n"]
        L = su2_generators(n)
        g = default_coupling(n) if cfg["coulomb_g"] == AUTO else cfg["coulomb_g"]
        ens = StateEnsemble([], float(g), n, cfg["seed"], self.params)
        meta = {}
        if cfg["target_states"] == AUTO:
            obs = self.observables()
            d = int(obs.get("volume_dimension", 2))
            extend_states(ens, cfg["initial_batch"], L, st["restarts"], st["max_iter"], st["tol"])
            delta = state_size(ens.mean_dispersion, n)
            if delta <= 0:
                target = len(ens)
                self.warnings.append("state size is zero (n = 1); keeping the initial batch")
            else:
                target = max(2, max_states(obs["volume"], delta, d))
            meta = {"mode": "auto", "initial_batch": cfg["initial_batch"], "state_size": delta,
                    "dimension": d, "volume": obs["volume"], "max_states": target}
        else:
            target = cfg["target_states"]
            meta = {"mode": "explicit", "max_states": target}
        if len(ens) > target:
            ens.states = ens.states[:target]
        extend_states(ens, target, L, st["restarts"], st["max_iter"], st["tol"])
        if len(ens) < target:
            self.warnings.append(f"generated {len(ens)} of {target} states")
        data = ens.to_json()
        data["target"] = meta
        _dump(data, self.path("states.json"))

    def states(self) -> StateEnsemble:
        if not self.path("states.json").exists():
            self.stage_states()
        return StateEnsemble.read(self.path("states.json"))

    def stage_distances(self) -> None:
        cfg, sol = self.cfg, self.cfg.section("solver")
        ens = self.states()
        degree = None if cfg["pbw_degree"] == AUTO else cfg["pbw_degree"]
        problem = DistanceProblem(self.triple, make_basis(cfg["basis"], cfg["n"], degree))
        dm = distance_matrix(problem, ens, sol["method"], sol["rtol"], self.workers,
                             cache_dir=self.path("cache") / "pairs")
        dm.meta.update({"solver": dict(sol), "states": len(ens), "convention": CONVENTION_TAG})
        dm.write(self.path("distances.csv"), self.path("distances.json"))
        if not dm.all_converged:
            self.nonconverged = True
            self.warnings.append("some distance pairs did not converge")

    def distances(self) -> DistanceMatrix:
        if not self.path("distances.csv").exists():
            self.stage_distances()
        return DistanceMatrix.read(self.path("distances.csv"), self.path("distances.json"))

    def stage_embed(self) -> None:
        cfg, sm = self.cfg, self.cfg.section("smacof")
        dm = self.distances()
        emb = smacof_embed(dm, cfg["embed_dim"], None, cfg["seed"], sm["max_iter"], sm["eps"], sm["restarts"])
        emb.write_csv(self.path("embedding.csv"))
        _dump({"dim": emb.dim, "stress": emb.stress, "iterations": len(emb.stress_history) - 1,
               "stress_history": emb.stress_history, "weights": "uniform",
               "constant_rows": np.flatnonzero(emb.constant_rows).tolist(),
               "mean_correlation": float(np.mean(emb.correlations)),
               "min_correlation": float(np.min(emb.correlations)),
               "correlation_definition": "row-wise Pearson, diagonal excluded"},
              self.path("embedding.json"))
        plot_embedding(emb.coords, emb.correlations, self.path("embedding.svg"),
                       f"n={cfg['n']} N={len(emb.coords)}")

    def stage_fit(self) -> None:
        if not self.path("embedding.csv").exists():
            self.stage_embed()
        coords = EmbeddingResult.read_coords(self.path("embedding.csv"))
        p = self.params
        exp = expected_axes(p.c12, p.c13, p.c23) if min(p.c12, p.c13, p.c23) > 0 else None
        if coords.shape[1] != 3:
            _dump({"skipped": f"embedding has dimension {coords.shape[1]}, fit needs 3",
                   "deformation": p.as_dict()}, self.path("fit.json"))
            return
        fit = fit_ellipsoid(coords, self.cfg["seed"], self.cfg.section("fit")["starts"])
        if not fit.ok:
            self.warnings.append("ellipsoid fit collapsed (an axis below 1e-6)")
        write_fit_json(fit, self.path("fit.json"), exp, p.as_dict())

    def stage_report(self) -> None:
        dm = self.distances()
        fit = json.load(open(self.path("fit.json")))
        emb = json.load(open(self.path("embedding.json")))
        states = json.load(open(self.path("states.json")))
        values = upper_triangle(dm)
        bins = None if self.cfg["histogram_bins"] == AUTO else self.cfg["histogram_bins"]
        hist = distance_histogram(values, bins)
        hist.write_csv(self.path("histogram.csv"))
        report = {
            "n": self.cfg["n"],
            "deformation": self.params.as_dict(),
            "states": len(states["states"]),
            "state_target": states.get("target"),
            "mean_dispersion": float(np.mean([s["dispersion"] for s in states["states"]])),
            "mean_distance": float(values.mean()),
            "stress": emb["stress"],
            "mean_correlation": emb["mean_correlation"],
            "min_correlation": emb["min_correlation"],
            "distances_converged": bool(dm.all_converged),
        }
        overlays = {}
        if "axes" in fit:
            axes = np.array(fit["axes"])
            radius = float(axes.mean())
            N = dm.size
            report.update({"fitted_axes": fit["axes"], "expected_axes": fit["expected_axes"],
                           "residual_per_dof": fit["residual_per_dof"], "fitted_radius": radius,
                           "mean_distance_over_radius": float(values.mean() / radius)})
            if N >= 2:
                pts = sample_ellipsoid(axes / radius, N, self.cfg["seed"])
                chord = upper_triangle(np.linalg.norm(pts[:, None] - pts[None], axis=2))
                unit = pts / np.linalg.norm(pts, axis=1)[:, None]
                arc = upper_triangle(np.arccos(np.clip(unit @ unit.T, -1, 1)))
                report.update({"matched_chord_mean": float(chord.mean()),
                               "matched_arc_mean": float(arc.mean())})
                edges = hist.edges / radius
                overlays = {"chord sample": distance_histogram(chord, len(edges) - 1),
                            "arc sample": distance_histogram(arc, len(edges) - 1)}
        _dump(report, self.path("report.json"))
        scaled = distance_histogram(values / report.get("fitted_radius", 1.0), bins)
        plot_histogram(scaled, self.path("histogram.svg"), "pairwise distances / fitted radius", overlays)

    # manifest -----------------------------------------------------------
    def write_manifest(self, status: str, failed_stage: Optional[str] = None, error: str = "") -> dict:
        artifacts = {}
        for p in sorted(self.outdir.iterdir()):
            if p.is_file() and p.name != "manifest.json":
                artifacts[p.name] = hashlib.sha256(p.read_bytes()).hexdigest()
        import scipy

        man = {
            "status": status,
            "failed_stage": failed_stage,
            "error": error,
            "config": self.cfg.to_json(),
            "seeds": {"states": self.cfg["seed"], "smacof": self.cfg["seed"], "fit": self.cfg["seed"]},
            "calibration": self._calibration,
            "convention": CONVENTION_TAG,
            "versions": {"package": __version__, "python": platform.python_version(),
                         "numpy": np.__version__, "scipy": scipy.__version__},
            "timings": self.timings,
            "warnings": self.warnings,
            "artifacts": artifacts,
        }
        _dump(man, self.path("manifest.json"))
        return man


def run_pipeline(cfg: RunConfig, outdir=None, workers=None, resume=False, stages=STAGES) -> Run:
    """Run ``stages`` in order; on failure the stage name is attached to the error."""
    run = Run(cfg, outdir, workers, resume)
    for stage in stages:
        try:
            run.run_stage(stage)
        except Exception as exc:
            exc.stage = stage
            run.write_manifest("failed", stage, f"{type(exc).__name__}: {exc}")
            raise
    run.write_manifest("nonconverged" if run.nonconverged else "ok")
    if run.nonconverged:
        raise NonConvergenceError("distance solver did not converge on every pair; partial output kept")
    return run


def volume_for(cfg: RunConfig) -> float:
    """Calibrated volume of the configured geometry (convenience for scripts)."""
    spec = analytic_spectrum(cfg["n"], cfg["c0"], analytic_parameter(cfg) or 1.0)
    return volume(spec, 2, calibrate_volume(2))

