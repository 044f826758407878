"""Command-line interface.

Subcommands
-----------
run SCENARIO        trajectories for every enabled method -> CSV + JSON summary
rates SCENARIO      closed-form rates / reorganization times / steady state -> JSON
oracle SCENARIO     exact Lindblad benchmark only, same CSV schema as run
compare A.csv B.csv per-column max/RMS deviations between two trajectory files
sweep SCENARIO      1-d parameter sweep of the closed-form rates -> CSV

CSV schema: one header ``method,t,<labels>`` where the labels are sx,sy,sz
for two-level systems (values are expectation values <nu_i> = 2 P_i), one
block of rows per method, 17 significant digits, LF line endings.  Identical
scenarios produce byte-identical files.

Exit codes: 0 ok, 1 validation/configuration error, 2 numerical failure,
3 comparison threshold exceeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import warnings

import numpy as np
import scipy

from . import __version__
from .bath import DampedMode, kernel
from .errors import (
    ConfigurationError,
    DegenerateKernelError,
    NumericalError,
    TieredBathError,
    UnsupportedConfigurationError,
    ValidationError,
)
from .higher_orders import theta_series
from .influence import (
    InfluenceMatrix,
    evolve,
    reorg_times,
    steady_state_spinboson,
    theta_quadrature,
    theta_spinboson,
)
from .oracle import FockConfig, auto_n_fock, lindblad_evolve, tcl2_reference
from .rates import generator_trajectory, multimode_rates, rabi_rates, wcme_generator, wcme_rates
from .scenario import Scenario, load_scenario
from .su_basis import build_basis

_BLOCK_ORDER = ("influence", "influence_modes", "influence_smooth", "higher_order", "wcme", "tcl2", "oracle")


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_csv(path: str, labels, blocks: dict) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "t"] + list(labels))
        for method in _BLOCK_ORDER:
            if method not in blocks:
                continue
            t, data = blocks[method]
            for i in range(len(t)):
                writer.writerow([method, _fmt(t[i])] + [_fmt(v) for v in data[i]])


def _read_csv(path: str):
    """-> (labels, {method: (t array, data array)}) preserving block order."""
    try:
        fh = open(path, newline="")
    except FileNotFoundError:
        raise ValidationError(f"csv file not found: {path}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["method", "t"]:
            raise ValidationError(f"{path}: not a trajectory csv (header must start method,t)")
        labels = header[2:]
        rows: dict = {}
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise ValidationError(f"{path}: ragged csv row: {row[:3]}...")
            rows.setdefault(row[0], []).append([float(v) for v in row[1:]])
    out = {}
    for method, rlist in rows.items():
        arr = np.array(rlist)
        out[method] = (arr[:, 0], arr[:, 1:])
    return labels, out


def _model_eps_delta(sc: Scenario):
    """(eps, Delta) when the scenario is a static sigma_z-coupled qubit."""
    model = sc.model
    if model.n != 2 or not model.static:
        return None
    h = model.h_segments[0]
    if abs(h[1]) > 1e-12:
        return None
    if np.abs(model.v_coeffs - np.array([0.0, 0.0, 1.0, 0.0])).max() > 1e-12:
        return None
    return 2.0 * h[2], 2.0 * h[0]


def _spinboson_applicable(sc: Scenario) -> bool:
    pair = _model_eps_delta(sc)
    return pair is not None and abs(pair[0]) < 1e-12 and pair[1] != 0.0


def _combined_kernel(sc: Scenario, t_grid):
    parts = []
    if sc.discrete is not None:
        parts.append(kernel(sc.discrete, sc.thermal, t_grid))
    if sc.continuum is not None:
        parts.append(kernel(sc.continuum, sc.thermal, t_grid))
    kern = parts[0]
    for p in parts[1:]:
        kern = kern + p
    return kern


def _fock_config(sc: Scenario) -> FockConfig:
    if sc.discrete is None:
        raise UnsupportedConfigurationError(
            "the oracle integrates discrete damped modes only; this scenario has "
            "a continuous bath (use influence/wcme/tcl2 for it)"
        )
    if sc.continuum is not None:
        raise UnsupportedConfigurationError(
            "the oracle cannot include the continuous bath; split the scenario"
        )
    settings = sc.oracle_settings or {"n_fock": "auto", "rtol": 1e-8, "atol": 1e-10, "method": "adaptive"}
    n_fock = settings["n_fock"]
    if n_fock == "auto":
        n_fock = max(auto_n_fock(m.omega, sc.thermal) for m in sc.discrete.modes)
    return FockConfig(
        modes=sc.discrete.modes,
        n_fock=n_fock,
        rtol=settings["rtol"],
        atol=settings["atol"],
        method=settings["method"],
    )


def run_methods(sc: Scenario, methods=None, order=None, split_env: bool = False):
    """Compute trajectory blocks and the JSON summary for a scenario."""
    basis = build_basis(sc.model.n)
    t = sc.t_grid
    methods = tuple(methods if methods is not None else sc.methods)
    order = order if order is not None else sc.higher_order_order
    blocks: dict = {}
    monitors: dict = {}

    kern = None
    if {"influence", "higher_order"} & set(methods) or sc.output_envelope:
        kern = _combined_kernel(sc, t)

    if "influence" in methods:
        # one truncation policy per run, from the combined kernel, so the
        # per-tier exponents add up to the combined one exactly
        tau_cut = kern.memory_time()
        theta = theta_quadrature(sc.model, basis, kern, t, tau_cut=tau_cut)
        traj = evolve(sc.model, basis, theta, sc.rho0)
        blocks["influence"] = (t, traj.expectations())
        monitors["influence"] = {
            "herm_residual": traj.herm_residual,
            "min_eigenvalue": traj.min_eigenvalue(basis),
        }
        if split_env:
            if sc.discrete is None or sc.continuum is None:
                raise UnsupportedConfigurationError(
                    "environment split needs both discrete modes and a continuum"
                )
            k_modes = kernel(sc.discrete, sc.thermal, t)
            k_smooth = kernel(sc.continuum, sc.thermal, t)
            th_modes = theta_quadrature(sc.model, basis, k_modes, t, tau_cut=tau_cut)
            th_smooth = theta_quadrature(sc.model, basis, k_smooth, t, tau_cut=tau_cut)
            residual = float(
                np.abs(th_modes.theta + th_smooth.theta - theta.theta).max()
            )
            if residual > 1e-10:
                raise NumericalError(
                    f"environment additivity violated: residual {residual:.2e}"
                )
            monitors["influence"]["theta_additivity_residual"] = residual
            blocks["influence_modes"] = (
                t,
                evolve(sc.model, basis, th_modes, sc.rho0).expectations(),
            )
            blocks["influence_smooth"] = (
                t,
                evolve(sc.model, basis, th_smooth, sc.rho0).expectations(),
            )

    if "higher_order" in methods:
        if sc.discrete is None or sc.continuum is not None:
            raise UnsupportedConfigurationError(
                "higher-order terms are implemented for discrete-mode environments only"
            )
        series = theta_series(sc.discrete.modes, sc.model, basis, sc.thermal, t, max_order=order)
        theta_total = series[2] + (series[4] if order == 4 else 0.0)
        traj = evolve(sc.model, basis, InfluenceMatrix(t=t, theta=theta_total), sc.rho0)
        blocks["higher_order"] = (t, traj.expectations())
        monitors["higher_order"] = {
            "order": order,
            "herm_residual": traj.herm_residual,
            "min_eigenvalue": traj.min_eigenvalue(basis),
        }

    if "wcme" in methods:
        pair = _model_eps_delta(sc)
        if pair is None:
            raise UnsupportedConfigurationError(
                "the WCME baseline needs a static sigma_z-coupled two-level system"
            )
        if sc.continuum is None:
            raise UnsupportedConfigurationError(
                "the WCME baseline needs a smooth spectral density (J(Omega) undefined "
                "for discrete modes); use rates/oracle for discrete scenarios"
            )
        gen = wcme_generator(pair[0], pair[1], sc.continuum, sc.thermal, basis)
        p = generator_trajectory(gen, sc.rho0.coeffs.astype(complex), t)
        blocks["wcme"] = (t, 2.0 * p.real[:, :-1])
        monitors["wcme"] = {"herm_residual": float(np.abs(p.imag).max())}

    if "tcl2" in methods:
        specs = [s for s in (sc.discrete, sc.continuum) if s is not None]
        traj = tcl2_reference(sc.model, basis, specs, sc.thermal, sc.rho0, t)
        blocks["tcl2"] = (t, traj.expectations())
        monitors["tcl2"] = {"herm_residual": traj.herm_residual}

    if "oracle" in methods:
        fock = _fock_config(sc)
        traj = lindblad_evolve(sc.model, basis, fock, sc.thermal, sc.rho0, t)
        coeffs = traj.pvector_coeffs(basis)
        blocks["oracle"] = (t, 2.0 * coeffs[:, :-1])
        monitors["oracle"] = {
            "n_fock": fock.n_fock,
            "method": fock.method,
            "trace_dev": traj.trace_dev,
            "herm_dev": traj.herm_dev,
            "min_eigenvalue": traj.min_eigenvalue(),
        }

    summary = _summarize(sc, basis, monitors)
    return basis, blocks, summary


def _summarize(sc: Scenario, basis, monitors) -> dict:
    summary = {
        "scenario": sc.raw,
        "versions": {
            "tieredbath": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "monitors": monitors,
    }
    pair = _model_eps_delta(sc)
    rates_out: dict = {}
    if pair is not None:
        eps, delta = pair
        if sc.discrete is not None:
            try:
                if len(sc.discrete.modes) == 1:
                    rates_out["mode"] = rabi_rates(eps, delta, sc.discrete.modes[0], sc.thermal).as_dict()
                else:
                    rates_out["mode"] = multimode_rates(eps, delta, sc.discrete, sc.thermal).as_dict()
                gr = rates_out["mode"]["gamma_relax"]
                gd = rates_out["mode"]["gamma_dephase"]
                rates_out["mode"]["gamma_relax_inverse_ps"] = (1.0 / gr) if gr > 0 else None
                rates_out["mode"]["gamma_dephase_inverse_ps"] = (1.0 / gd) if gd > 0 else None
            except TieredBathError as exc:
                rates_out["mode"] = {"skipped": str(exc)}
        if sc.continuum is not None:
            try:
                rates_out["wcme"] = wcme_rates(eps, delta, sc.continuum, sc.thermal).as_dict()
            except TieredBathError as exc:
                rates_out["wcme"] = {"skipped": str(exc)}
    summary["rates"] = rates_out or None

    if _spinboson_applicable(sc):
        delta = _model_eps_delta(sc)[1]
        kern = _combined_kernel(sc, sc.t_grid)
        try:
            rt = reorg_times(kern, delta)
            summary["reorg_times"] = {
                "relax": rt.relax,
                "lamb_shift": rt.lamb_shift,
                "thermal": rt.thermal,
            }
        except DegenerateKernelError as exc:
            summary["reorg_times"] = {"skipped": str(exc)}
        try:
            ss = steady_state_spinboson(kern, delta)
            summary["steady_state"] = {"pvector": [float(v) for v in ss.coeffs]}
        except DegenerateKernelError as exc:
            summary["steady_state"] = {"skipped": str(exc)}
    else:
        summary["reorg_times"] = None
        summary["steady_state"] = None
    return summary


def _write_summary(path: str, summary: dict) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_envelope(sc: Scenario, basis, out_base: str) -> None:
    kern = _combined_kernel(sc, sc.t_grid)
    sb = theta_spinboson(sc.model, basis, kern, sc.t_grid)
    path = out_base + "_envelope.csv"
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "theta_relax", "envelope"])
        for ti, th, env in zip(sb.t, sb.relaxation_exponent, sb.envelope):
            writer.writerow([_fmt(ti), _fmt(th), _fmt(env)])


def _cmd_run(args, forced_methods=None) -> int:
    sc = load_scenario(args.scenario)
    out_base = args.out if args.out else sc.output_path
    basis, blocks, summary = run_methods(
        sc,
        methods=forced_methods,
        order=args.order,
        split_env=_wants_split(sc, forced_methods),
    )
    _write_csv(out_base + ".csv", basis.labels(), blocks)
    if sc.output_envelope:
        _write_envelope(sc, basis, out_base)
    _write_summary(out_base + ".json", summary)
    print(f"wrote {out_base}.csv and {out_base}.json")
    return 0


def _wants_split(sc: Scenario, forced_methods) -> bool:
    methods = forced_methods if forced_methods is not None else sc.methods
    return (
        "influence" in methods
        and sc.discrete is not None
        and sc.continuum is not None
    )


def _cmd_rates(args) -> int:
    sc = load_scenario(args.scenario)
    basis = build_basis(sc.model.n)
    summary = _summarize(sc, basis, monitors={})
    payload = {
        "rates": summary["rates"],
        "reorg_times": summary["reorg_times"],
        "steady_state": summary["steady_state"],
        "versions": summary["versions"],
        "scenario": summary["scenario"],
    }
    if args.out:
        _write_summary(args.out, payload)
        print(f"wrote {args.out}")
    else:
        json.dump(payload, sys.stdout, indent=2, sort_keys=True)
        print()
    return 0


def _cmd_compare(args) -> int:
    labels_a, blocks_a = _read_csv(args.csv_a)
    labels_b, blocks_b = _read_csv(args.csv_b)
    if labels_a != labels_b:
        raise ValidationError(f"column sets differ: {labels_a} vs {labels_b}")

    def pick(blocks, wanted, which):
        if wanted:
            if wanted not in blocks:
                raise ValidationError(f"{which}: no block for method {wanted!r}")
            return wanted, blocks[wanted]
        if len(blocks) != 1:
            raise ValidationError(
                f"{which} holds methods {sorted(blocks)}; select one with --method-a/--method-b"
            )
        ((name, data),) = blocks.items()
        return name, data

    name_a, (t_a, data_a) = pick(blocks_a, args.method_a, args.csv_a)
    name_b, (t_b, data_b) = pick(blocks_b, args.method_b, args.csv_b)
    if t_a.shape != t_b.shape or np.any(t_a != t_b):
        raise ValidationError("time grids do not match exactly; no resampling is done")

    report = {
        "a": {"path": args.csv_a, "method": name_a},
        "b": {"path": args.csv_b, "method": name_b},
        "columns": {},
    }
    worst = 0.0
    for j, label in enumerate(labels_a):
        diff = data_a[:, j] - data_b[:, j]
        mx = float(np.abs(diff).max())
        rms = float(np.sqrt(np.mean(diff**2)))
        report["columns"][label] = {"max": mx, "rms": rms}
        worst = max(worst, mx)
    report["max_deviation"] = worst
    if args.threshold is not None:
        report["threshold"] = args.threshold
        report["within_threshold"] = bool(worst <= args.threshold)
    if args.out:
        _write_summary(args.out, report)
    json.dump(report, sys.stdout, indent=2, sort_keys=True)
    print()
    if args.threshold is not None and worst > args.threshold:
        return 3
    return 0


def _cmd_sweep(args) -> int:
    sc = load_scenario(args.scenario)
    if sc.sweep is None:
        raise ValidationError("scenario has no [sweep] table")
    pair = _model_eps_delta(sc)
    if pair is None:
        raise UnsupportedConfigurationError(
            "sweep needs a static sigma_z-coupled two-level system"
        )
    eps, delta = pair
    omega_r = float(np.hypot(eps, delta))
    base = sc.discrete.modes[0]
    sw = sc.sweep
    values = np.linspace(sw["start"], sw["stop"], sw["num"])
    out_base = args.out if args.out else sc.output_path
    os.makedirs(os.path.dirname(os.path.abspath(out_base + ".csv")), exist_ok=True)
    with open(out_base + ".csv", "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            [
                "omega",
                "omega_over_Omega",
                "gamma_relax",
                "gamma_dephase",
                "lamb_shift",
                "t_eff",
                "steady_sigma_z_tilde",
                "scaled_gamma_relax",
            ]
        )
        for omega in values:
            gamma = sw["gamma_over_omega"] * omega if sw["gamma_over_omega"] else base.gamma
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")  # sweep may cross gamma > 0.2 omega
                mode = DampedMode(omega=float(omega), g=base.g, gamma=float(gamma))
            rep = rabi_rates(eps, delta, mode, sc.thermal)
            writer.writerow(
                [
                    _fmt(omega),
                    _fmt(omega / omega_r),
                    _fmt(rep.gamma_relax),
                    _fmt(rep.gamma_dephase),
                    _fmt(rep.lamb_shift),
                    _fmt(rep.t_eff),
                    _fmt(rep.steady_sigma_z_tilde),
                    _fmt(omega_r * rep.gamma_relax / base.g**2),
                ]
            )
    basis = build_basis(sc.model.n)
    _write_summary(out_base + ".json", _summarize(sc, basis, monitors={}))
    print(f"wrote {out_base}.csv and {out_base}.json")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tieredbath", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run every method enabled in the scenario")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", help="output base path (overrides scenario output.path)")
    p_run.add_argument("--order", type=int, choices=(2, 4), default=None,
                       help="override the higher-order series order")
    p_run.set_defaults(func=_cmd_run)

    p_oracle = sub.add_parser("oracle", help="run only the exact Lindblad benchmark")
    p_oracle.add_argument("scenario")
    p_oracle.add_argument("--out")
    p_oracle.add_argument("--order", type=int, choices=(2, 4), default=None)
    p_oracle.set_defaults(func=lambda a: _cmd_run(a, forced_methods=("oracle",)))

    p_rates = sub.add_parser("rates", help="closed-form rates and steady-state summary")
    p_rates.add_argument("scenario")
    p_rates.add_argument("--out")
    p_rates.set_defaults(func=_cmd_rates)

    p_cmp = sub.add_parser("compare", help="per-column deviations between two csv files")
    p_cmp.add_argument("csv_a")
    p_cmp.add_argument("csv_b")
    p_cmp.add_argument("--method-a", default=None)
    p_cmp.add_argument("--method-b", default=None)
    p_cmp.add_argument("--threshold", type=float, default=None,
                       help="exit 3 when any column max deviation exceeds this")
    p_cmp.add_argument("--out")
    p_cmp.set_defaults(func=_cmd_compare)

    p_sweep = sub.add_parser("sweep", help="1-d parameter sweep of the closed-form rates")
    p_sweep.add_argument("scenario")
    p_sweep.add_argument("--out")
    p_sweep.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, ConfigurationError, UnsupportedConfigurationError, DegenerateKernelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
