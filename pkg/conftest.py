"""Shared fixtures: one CLI run per shipped scenario, reused by the
acceptance suite and the figure-rendering tests."""

import pathlib
import time

import pytest

from tieredbath.cli import main

ROOT = pathlib.Path(__file__).parent
SCENARIOS = ROOT / "scenarios"


@pytest.fixture(scope="session")
def figure_outputs(tmp_path_factory):
    """Run every shipped scenario once; returns paths and wall times."""
    out_dir = tmp_path_factory.mktemp("figure_outputs")
    info = {"dir": out_dir, "paths": {}, "seconds": {}}
    jobs = [
        ("fig3", "run", "fig3_rabi.toml"),
        ("fig4", "run", "fig4_spinboson.toml"),
        ("fig5", "run", "fig5_combined.toml"),
        ("fig6", "run", "fig6_revivals.toml"),
        ("fig2", "sweep", "fig2_sweep.toml"),
    ]
    for key, command, name in jobs:
        base = str(out_dir / pathlib.Path(name).stem)
        start = time.perf_counter()
        code = main([command, str(SCENARIOS / name), "--out", base])
        info["seconds"][key] = time.perf_counter() - start
        assert code == 0, f"scenario {name} failed with exit code {code}"
        info["paths"][key] = base
    return info
