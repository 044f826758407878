#!/usr/bin/env python3
"""Render figures from trajectory/sweep CSV files produced by the CLI.

Usage:
    python plots/render.py SPEC.json [--data-dir DIR] [--out-dir DIR]

This script is a pure consumer of the documented file formats: it never
recomputes physics, and byte-identical inputs give pixel-identical images
for a fixed matplotlib version.  Relative input paths resolve against
--data-dir (default: the spec file's directory); the output path resolves
against --out-dir (default: same as --data-dir).

Figure-spec schema (JSON):

  trajectory figures --
    {
      "kind": "trajectory",
      "series": [
        {"path": "fig3_rabi.csv", "method": "influence", "column": "sz",
         "label": "influence", "style": "solid", "transform": "none"},
        {"path": "fig6_revivals_envelope.csv", "column": "envelope",
         "label": "envelope", "style": "dashed"}
      ],
      "xlabel": "t (ps)", "ylabel": "<sigma_z>", "title": "...",
      "output": "fig3.png"
    }
    Series files are either method-block CSVs (header method,t,...; the
    "method" key selects the block) or plain CSVs whose first column is
    the x axis.  transform "population" maps an expectation value x to
    (1 + x)/2; default is "none".

  sweep figures --
    {
      "kind": "sweep",
      "path": "fig2_sweep.csv", "x": "omega_over_Omega",
      "left":  {"columns": ["t_eff"], "ylabel": "k_B T_eff (1/ps)"},
      "right": {"columns": ["scaled_gamma_relax"],
                "ylabel": "Omega Gamma_relax / g^2"},
      "xlabel": "omega / Omega", "title": "...", "output": "fig2.png"
    }
    "right" is optional and adds a twin y axis.
"""

import argparse
import csv
import json
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_STYLES = {"solid": "-", "dashed": "--", "dotted": ":", "dashdot": "-."}
_SAVEFIG = dict(dpi=150, metadata={"Software": "tieredbath-plots"})


class SpecError(Exception):
    pass


def _read_rows(path):
    if not os.path.exists(path):
        raise SpecError(f"input file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SpecError(f"{path} is empty")
        rows = [row for row in reader if row]
    return header, rows


def _series_from_csv(path, method, column):
    """(x, y) arrays for one series; understands both CSV layouts."""
    header, rows = _read_rows(path)
    if header[:2] == ["method", "t"]:
        if method is None:
            methods = sorted({r[0] for r in rows})
            if len(methods) != 1:
                raise SpecError(
                    f"{path} holds methods {methods}; the series needs a 'method' key"
                )
            method = methods[0]
        rows = [r for r in rows if r[0] == method]
        if not rows:
            raise SpecError(f"{path} has no block for method {method!r}")
        header = header[1:]
        rows = [r[1:] for r in rows]
    if column not in header:
        raise SpecError(f"{path} has no column {column!r} (columns: {header})")
    xi, yi = 0, header.index(column)
    x = [float(r[xi]) for r in rows]
    y = [float(r[yi]) for r in rows]
    return x, y


def _apply_transform(y, transform):
    if transform in (None, "none"):
        return y
    if transform == "population":
        return [(1.0 + v) / 2.0 for v in y]
    raise SpecError(f"unknown transform {transform!r}")


def plot_trajectory(spec, data_dir, out_dir):
    series = spec.get("series")
    if not series:
        raise SpecError("trajectory spec needs a non-empty 'series' list")
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for entry in series:
        path = os.path.join(data_dir, entry["path"])
        x, y = _series_from_csv(path, entry.get("method"), entry["column"])
        y = _apply_transform(y, entry.get("transform"))
        ax.plot(
            x,
            y,
            _STYLES.get(entry.get("style", "solid"), "-"),
            label=entry.get("label", entry.get("method", entry["column"])),
            linewidth=entry.get("linewidth", 1.5),
        )
    _finish(fig, ax, spec, legend=len(series) > 1)
    return _save(fig, spec, out_dir)


def plot_sweep(spec, data_dir, out_dir):
    path = os.path.join(data_dir, spec["path"])
    x_col = spec.get("x")
    left = spec.get("left")
    if x_col is None or not left:
        raise SpecError("sweep spec needs 'x' and a 'left' axis block")
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    _, xref = _series_from_csv(path, None, x_col)
    for col in left["columns"]:
        _, y = _series_from_csv(path, None, col)
        ax.plot(xref, y, "-", label=col, linewidth=1.5)
    ax.set_ylabel(left.get("ylabel", ""))
    handles, labels = ax.get_legend_handles_labels()
    if spec.get("right"):
        ax2 = ax.twinx()
        for col in spec["right"]["columns"]:
            _, y = _series_from_csv(path, None, col)
            ax2.plot(xref, y, "--", color="C3", label=col, linewidth=1.5)
        ax2.set_ylabel(spec["right"].get("ylabel", ""))
        h2, l2 = ax2.get_legend_handles_labels()
        handles += h2
        labels += l2
    for note in spec.get("annotations", []):
        value, label = _annotation_value(note, data_dir)
        ax.axhline(value, color="0.4", linewidth=0.8)
        handles.append(ax.lines[-1])
        labels.append(label)
    ax.legend(handles, labels, frameon=False)
    _finish(fig, ax, spec, legend=False)
    return _save(fig, spec, out_dir)


def _annotation_value(note, data_dir):
    """Horizontal reference line whose value comes from a JSON summary,
    e.g. {"path": "run.json", "field": "scenario.bath.beta",
          "op": "reciprocal", "label": "bath k_B T"}."""
    path = os.path.join(data_dir, note["path"])
    if not os.path.exists(path):
        raise SpecError(f"annotation file not found: {path}")
    with open(path) as fh:
        doc = json.load(fh)
    value = doc
    for key in note["field"].split("."):
        try:
            value = value[key]
        except (KeyError, TypeError):
            raise SpecError(f"{path} has no field {note['field']!r}") from None
    value = float(value)
    op = note.get("op", "none")
    if op == "reciprocal":
        value = 1.0 / value
    elif op != "none":
        raise SpecError(f"unknown annotation op {op!r}")
    return value, note.get("label", note["field"])


def _finish(fig, ax, spec, legend):
    ax.set_xlabel(spec.get("xlabel", "t (ps)"))
    if "ylabel" in spec:
        ax.set_ylabel(spec["ylabel"])
    if "title" in spec:
        ax.set_title(spec["title"])
    if legend:
        ax.legend(frameon=False)
    fig.tight_layout()


def _save(fig, spec, out_dir):
    output = spec.get("output")
    if not output:
        raise SpecError("spec needs an 'output' image path")
    target = os.path.join(out_dir, output)
    os.makedirs(os.path.dirname(os.path.abspath(target)), exist_ok=True)
    fig.savefig(target, **_SAVEFIG)
    plt.close(fig)
    return target


def render(spec_path, data_dir=None, out_dir=None):
    with open(spec_path) as fh:
        spec = json.load(fh)
    base = os.path.dirname(os.path.abspath(spec_path))
    data_dir = data_dir if data_dir is not None else base
    out_dir = out_dir if out_dir is not None else data_dir
    kind = spec.get("kind")
    if kind == "trajectory":
        return plot_trajectory(spec, data_dir, out_dir)
    if kind == "sweep":
        return plot_sweep(spec, data_dir, out_dir)
    raise SpecError(f"unknown figure kind {kind!r}")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("spec", help="figure-spec JSON file")
    parser.add_argument("--data-dir", default=None, help="directory for relative input paths")
    parser.add_argument("--out-dir", default=None, help="directory for the output image")
    args = parser.parse_args(argv)
    try:
        target = render(args.spec, args.data_dir, args.out_dir)
    except (SpecError, json.JSONDecodeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {target}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
