"""Squash the fuzzy sphere and watch the embedding turn into an ellipsoid.

Runs the full pipeline for a few values of c12 and prints fitted against
expected axes.  ``python3 demos/deformation_sweep.py [n]``; n = 6 takes a
couple of minutes, n = 8 about ten.
"""
import json
import sys
import tempfile
from pathlib import Path

from fuzzyspace.config import RunConfig
from fuzzyspace.pipeline import run_pipeline

n = int(sys.argv[1]) if len(sys.argv) > 1 else 6
root = Path(tempfile.mkdtemp(prefix="sweep-"))

print(f"{'c':>5} {'N':>4}  {'fitted axes':<24} {'expected axes':<24} corr")
for c in (1.0, 1.5, 2.0, 5.0):
    run = run_pipeline(RunConfig.from_dict({"n": n, "c12": c}), outdir=root / f"c{c}")
    rep = json.load(open(run.path("report.json")))
    fitted = ", ".join(f"{a:.3f}" for a in rep["fitted_axes"])
    expected = ", ".join(f"{a:.3f}" for a in sorted(rep["expected_axes"]))
    print(f"{c:5.2f} {rep['states']:4d}  ({fitted})  ({expected})  {rep['mean_correlation']:.4f}")
print(f"run directories under {root}")
