import json

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=25,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


class PipelineCache:
    """Full n=8 runs shared across test modules (each takes about two minutes)."""

    def __init__(self, root):
        self.root = root
        self.runs = {}

    def get(self, c12=1.0, c13=1.0, c23=1.0, seed=0, **extra):
        from fuzzyspace.config import RunConfig
        from fuzzyspace.pipeline import run_pipeline

        key = (c12, c13, c23, seed, tuple(sorted(extra.items())))
        if key not in self.runs:
            cfg = RunConfig.from_dict({"n": 8, "c12": c12, "c13": c13, "c23": c23, "seed": seed, **extra})
            outdir = self.root / ("run_" + "_".join(str(k) for k in key[:4]) + "".join(f"_{k}{v}" for k, v in key[4]))
            run = run_pipeline(cfg, outdir=outdir)
            self.runs[key] = run
        return self.runs[key]

    def report(self, *args, **kw) -> dict:
        run = self.get(*args, **kw)
        return json.load(open(run.path("report.json")))


@pytest.fixture(scope="session")
def pipelines(tmp_path_factory):
    return PipelineCache(tmp_path_factory.mktemp("pipelines"))


ACCEPTANCE_RESULTS: dict = {}


class AcceptanceRecorder:
    """Collects one PASS/FAIL line per acceptance criterion."""

    def record(self, number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_RESULTS[number] = line
        print(line)
        return passed


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceRecorder()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_RESULTS):
            terminalreporter.write_line(ACCEPTANCE_RESULTS[k])
