"""Figure rendering: schema handling, error paths, pixel stability."""

import hashlib
import json
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).parent))
from render import main, render  # noqa: E402

SPECS = pathlib.Path(__file__).parent / "specs"


def sha(path):
    return hashlib.sha256(open(path, "rb").read()).hexdigest()


def write_csv(path, text):
    path.write_text(text)
    return path


TRAJ_CSV = """method,t,sx,sy,sz
one,0,0,0,1
one,0.5,0.1,0,0.9
one,1,0.2,0,0.7
two,0,0,0,1
two,0.5,0.05,0,0.95
two,1,0.15,0,0.8
"""

PLAIN_CSV = """t,theta_relax,envelope
0,0,1
0.5,-0.2,0.9
1,-0.5,0.8
"""


def make_spec(tmp_path, spec):
    p = tmp_path / "spec.json"
    p.write_text(json.dumps(spec))
    return str(p)


def test_trajectory_with_method_blocks_and_plain_csv(tmp_path):
    write_csv(tmp_path / "traj.csv", TRAJ_CSV)
    write_csv(tmp_path / "env.csv", PLAIN_CSV)
    spec = {
        "kind": "trajectory",
        "series": [
            {"path": "traj.csv", "method": "one", "column": "sz", "label": "a"},
            {"path": "traj.csv", "method": "two", "column": "sz", "label": "b", "style": "dotted"},
            {"path": "env.csv", "column": "envelope", "label": "env", "style": "dashed"},
        ],
        "output": "out.png",
    }
    assert main([make_spec(tmp_path, spec)]) == 0
    assert (tmp_path / "out.png").exists()


def test_population_transform(tmp_path):
    write_csv(tmp_path / "traj.csv", TRAJ_CSV)
    spec = {
        "kind": "trajectory",
        "series": [
            {"path": "traj.csv", "method": "one", "column": "sx", "transform": "population"}
        ],
        "output": "pop.png",
    }
    assert main([make_spec(tmp_path, spec)]) == 0


def test_missing_column_is_explicit_error(tmp_path, capsys):
    write_csv(tmp_path / "traj.csv", TRAJ_CSV)
    spec = {
        "kind": "trajectory",
        "series": [{"path": "traj.csv", "method": "one", "column": "nope"}],
        "output": "x.png",
    }
    assert main([make_spec(tmp_path, spec)]) == 1
    assert "no column 'nope'" in capsys.readouterr().err


def test_method_required_for_multiblock_files(tmp_path, capsys):
    write_csv(tmp_path / "traj.csv", TRAJ_CSV)
    spec = {
        "kind": "trajectory",
        "series": [{"path": "traj.csv", "column": "sz"}],
        "output": "x.png",
    }
    assert main([make_spec(tmp_path, spec)]) == 1
    assert "needs a 'method' key" in capsys.readouterr().err


def test_single_series_spec(tmp_path):
    """A one-block file needs no method key; a single curve plots fine."""
    single = "\n".join(ln for ln in TRAJ_CSV.splitlines() if not ln.startswith("two")) + "\n"
    write_csv(tmp_path / "traj.csv", single)
    spec = {
        "kind": "trajectory",
        "series": [{"path": "traj.csv", "column": "sy"}],
        "output": "single.png",
    }
    assert main([make_spec(tmp_path, spec)]) == 0


def test_sweep_single_point(tmp_path):
    write_csv(tmp_path / "sw.csv", "omega,t_eff,scaled\n1.0,2.0,3.0\n")
    spec = {
        "kind": "sweep",
        "path": "sw.csv",
        "x": "omega",
        "left": {"columns": ["t_eff"]},
        "output": "sw.png",
    }
    assert main([make_spec(tmp_path, spec)]) == 0


def test_sweep_with_summary_annotation(tmp_path):
    write_csv(tmp_path / "sw.csv", "omega,t_eff\n0.5,1.7\n1.0,1.0\n2.0,1.4\n")
    (tmp_path / "sw.json").write_text(json.dumps({"scenario": {"bath": {"beta": 1.0}}}))
    spec = {
        "kind": "sweep",
        "path": "sw.csv",
        "x": "omega",
        "left": {"columns": ["t_eff"]},
        "annotations": [
            {"path": "sw.json", "field": "scenario.bath.beta", "op": "reciprocal", "label": "bath"}
        ],
        "output": "ann.png",
    }
    assert main([make_spec(tmp_path, spec)]) == 0
    bad = dict(spec, annotations=[{"path": "sw.json", "field": "scenario.nope"}], output="b.png")
    assert main([make_spec(tmp_path, bad)]) == 1


def test_renders_are_pixel_stable(tmp_path):
    write_csv(tmp_path / "traj.csv", TRAJ_CSV)
    spec = {
        "kind": "trajectory",
        "series": [{"path": "traj.csv", "method": "one", "column": "sz"}],
        "output": "stable.png",
    }
    spec_path = make_spec(tmp_path, spec)
    render(spec_path)
    first = sha(tmp_path / "stable.png")
    render(spec_path)
    assert sha(tmp_path / "stable.png") == first


def test_all_shipped_figures_render(figure_outputs):
    """Figs. 2-6 analogues from the shipped scenario outputs, twice each."""
    data_dir = str(figure_outputs["dir"])
    for name in ("fig2", "fig3", "fig4", "fig5", "fig6"):
        spec = str(SPECS / f"{name}.json")
        target = render(spec, data_dir=data_dir, out_dir=data_dir)
        first = sha(target)
        render(spec, data_dir=data_dir, out_dir=data_dir)
        assert sha(target) == first, f"{name} render is not pixel-stable"
