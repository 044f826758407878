"""Scenario files: the TOML grammar driving every CLI computation.

A scenario is a TOML document with the tables below; unknown keys are
rejected everywhere, and exactly one of ``bath.beta`` / ``bath.kT`` must
be given.  All frequencies are 1/ps, times ps (hbar = k_B = 1).

    [system]
    n = 2
    h = [0.3, 0.0, 0.65]          # Gell-Mann coefficients of H_S; or
    # h_segments = [[...], [...]] and breakpoints = [1.0] for schedules
    v = [0.0, 0.0, 1.0, 0.0]      # coupling operator, incl. identity comp.
    rho0 = "up_z"                 # named state or explicit P vector

    [bath]
    beta = 1.0                    # or kT = 1.0
    [[bath.modes]]                # zero or more discrete damped modes
    omega = 0.2
    g = 0.03
    gamma = 0.8
    [bath.continuum]              # optional smooth part
    family = "ohmic"              # or "tabulated" with omega/j/gamma arrays
    alpha = 0.00675
    s = 3.0
    omega_c = 2.2
    cutoff = "gaussian"           # or "exponential"
    gamma = 0.0                   # constant damping profile for the continuum
    omega_max = 11.0              # optional (default 5 omega_c)
    nodes = 200                   # optional quadrature nodes

    [grid]
    t_max = 100.0
    dt = 0.05

    [methods]                     # any subset, at least one true
    influence = true
    oracle = true
    wcme = false
    tcl2 = false
    higher_order = false

    [oracle]                      # required when methods.oracle
    n_fock = 40                   # or "auto" (thermal-tail criterion)
    rtol = 1e-8
    atol = 1e-10
    method = "adaptive"           # or "krylov"

    [higher_order]                # optional; order of the exponent series
    order = 4                     # 2 or 4

    [output]
    path = "out/fig3"             # writes <path>.csv and <path>.json
    format = "csv"
    envelope = false              # also write <path>_envelope.csv

    [sweep]                       # used by the `sweep` subcommand only
    parameter = "mode_omega"
    start = 0.5
    stop = 2.0
    num = 61
    gamma_over_omega = 0.1        # optional: tie gamma to the swept omega

Named initial states (n = 2): up_z, down_z, plus_x, minus_x, plus_y,
minus_y, mixed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import tomli

from .bath import DampedMode, DiscreteSet, OhmicFamily, Tabulated, ThermalParams
from .errors import ValidationError
from .influence import SystemModel
from .su_basis import PVector

__all__ = ["Scenario", "load_scenario", "parse_scenario", "named_state"]

_NAMED_STATES = {
    "up_z": (0.0, 0.0, 0.5, 0.5),
    "down_z": (0.0, 0.0, -0.5, 0.5),
    "plus_x": (0.5, 0.0, 0.0, 0.5),
    "minus_x": (-0.5, 0.0, 0.0, 0.5),
    "plus_y": (0.0, 0.5, 0.0, 0.5),
    "minus_y": (0.0, -0.5, 0.0, 0.5),
    "mixed": (0.0, 0.0, 0.0, 0.5),
}

_METHODS = ("influence", "higher_order", "wcme", "tcl2", "oracle")


def named_state(name: str, n: int) -> PVector:
    if n != 2:
        raise ValidationError("named initial states are defined for n = 2 only")
    try:
        return PVector(coeffs=np.array(_NAMED_STATES[name]))
    except KeyError:
        raise ValidationError(
            f"unknown named state {name!r}; choose from {sorted(_NAMED_STATES)}"
        ) from None


@dataclass(frozen=True)
class Scenario:
    """Validated scenario, with constructors for the physics objects."""

    model: SystemModel
    thermal: ThermalParams
    discrete: Optional[DiscreteSet]
    continuum: Optional[OhmicFamily | Tabulated]
    rho0: PVector
    t_max: float
    dt: float
    methods: tuple
    oracle_settings: dict
    higher_order_order: int
    output_path: str
    output_format: str
    output_envelope: bool
    sweep: Optional[dict]
    raw: dict = field(repr=False)

    @property
    def t_grid(self) -> np.ndarray:
        n_steps = int(round(self.t_max / self.dt))
        return self.dt * np.arange(n_steps + 1)


def _reject_unknown(table: dict, allowed: set, path: str):
    extra = set(table) - allowed
    if extra:
        raise ValidationError(f"unknown key(s) {sorted(extra)} in [{path}]")


def _need(table: dict, key: str, path: str):
    if key not in table:
        raise ValidationError(f"missing required key {key!r} in [{path}]")
    return table[key]


def _float(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{path} must be a number, got {value!r}")
    return float(value)


def _float_list(value, path: str) -> list:
    if not isinstance(value, list) or not value:
        raise ValidationError(f"{path} must be a non-empty array of numbers")
    return [_float(v, path) for v in value]


def parse_scenario(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ValidationError("scenario root must be a table")
    _reject_unknown(
        doc,
        {"system", "bath", "grid", "methods", "oracle", "higher_order", "output", "sweep"},
        "scenario",
    )

    sys_t = _need(doc, "system", "scenario")
    _reject_unknown(sys_t, {"n", "h", "h_segments", "breakpoints", "v", "rho0"}, "system")
    n = sys_t.get("n", 2)
    if not isinstance(n, int) or n < 2:
        raise ValidationError("system.n must be an integer >= 2")
    m = n * n - 1
    if "h" in sys_t and "h_segments" in sys_t:
        raise ValidationError("give system.h or system.h_segments, not both")
    if "h" in sys_t:
        segments = [_float_list(sys_t["h"], "system.h")]
        breakpoints = []
        if "breakpoints" in sys_t:
            raise ValidationError("system.breakpoints requires system.h_segments")
    elif "h_segments" in sys_t:
        raw_segs = sys_t["h_segments"]
        if not isinstance(raw_segs, list) or not raw_segs:
            raise ValidationError("system.h_segments must be a non-empty array of arrays")
        segments = [_float_list(s, "system.h_segments[]") for s in raw_segs]
        breakpoints = _float_list(_need(sys_t, "breakpoints", "system"), "system.breakpoints")
    else:
        raise ValidationError("system needs h or h_segments")
    for s in segments:
        if len(s) != m:
            raise ValidationError(f"each H coefficient vector must have length {m}")
    v = _float_list(_need(sys_t, "v", "system"), "system.v")
    if len(v) != n * n:
        raise ValidationError(f"system.v must have length {n * n}")
    model = SystemModel(n=n, h_segments=tuple(np.array(s) for s in segments),
                        breakpoints=tuple(breakpoints), v_coeffs=np.array(v))

    rho0_raw = _need(sys_t, "rho0", "system")
    if isinstance(rho0_raw, str):
        rho0 = named_state(rho0_raw, n)
    else:
        coeffs = np.array(_float_list(rho0_raw, "system.rho0"))
        if len(coeffs) != n * n:
            raise ValidationError(f"system.rho0 must have length {n * n}")
        if abs(coeffs[-1] - 1.0 / n) > 1e-10:
            raise ValidationError(f"system.rho0 trace component must equal 1/n = {1.0 / n}")
        rho0 = PVector(coeffs=coeffs)

    bath_t = _need(doc, "bath", "scenario")
    _reject_unknown(bath_t, {"beta", "kT", "modes", "continuum"}, "bath")
    has_beta = "beta" in bath_t
    has_kt = "kT" in bath_t
    if has_beta == has_kt:
        raise ValidationError("give exactly one of bath.beta or bath.kT")
    thermal = (
        ThermalParams(beta=_float(bath_t["beta"], "bath.beta"))
        if has_beta
        else ThermalParams.from_kt(_float(bath_t["kT"], "bath.kT"))
    )

    discrete = None
    if "modes" in bath_t:
        modes = []
        if not isinstance(bath_t["modes"], list):
            raise ValidationError("bath.modes must be an array of tables")
        for i, mt in enumerate(bath_t["modes"]):
            _reject_unknown(mt, {"omega", "g", "gamma"}, f"bath.modes[{i}]")
            modes.append(
                DampedMode(
                    omega=_float(_need(mt, "omega", f"bath.modes[{i}]"), "omega"),
                    g=_float(_need(mt, "g", f"bath.modes[{i}]"), "g"),
                    gamma=_float(mt.get("gamma", 0.0), "gamma"),
                )
            )
        if modes:
            discrete = DiscreteSet(modes=tuple(modes))

    continuum = None
    if "continuum" in bath_t:
        ct = bath_t["continuum"]
        family = _need(ct, "family", "bath.continuum")
        if family == "ohmic":
            _reject_unknown(
                ct,
                {"family", "alpha", "s", "omega_c", "cutoff", "gamma", "omega_max", "nodes"},
                "bath.continuum",
            )
            continuum = OhmicFamily(
                alpha=_float(_need(ct, "alpha", "bath.continuum"), "alpha"),
                s=_float(_need(ct, "s", "bath.continuum"), "s"),
                omega_c=_float(_need(ct, "omega_c", "bath.continuum"), "omega_c"),
                cutoff_form=ct.get("cutoff", "gaussian"),
                gamma_profile=_float(ct["gamma"], "gamma") if ct.get("gamma") else None,
                omega_max=_float(ct["omega_max"], "omega_max") if "omega_max" in ct else None,
                n_nodes=int(ct.get("nodes", 200)),
            )
        elif family == "tabulated":
            _reject_unknown(ct, {"family", "omega", "j", "gamma"}, "bath.continuum")
            continuum = Tabulated(
                omega=np.array(_float_list(_need(ct, "omega", "bath.continuum"), "omega")),
                j=np.array(_float_list(_need(ct, "j", "bath.continuum"), "j")),
                gamma=np.array(_float_list(ct["gamma"], "gamma")) if "gamma" in ct else None,
            )
        else:
            raise ValidationError(f"unknown continuum family {family!r}")
    if discrete is None and continuum is None:
        raise ValidationError("bath needs at least one of modes / continuum")

    grid_t = _need(doc, "grid", "scenario")
    _reject_unknown(grid_t, {"t_max", "dt"}, "grid")
    t_max = _float(_need(grid_t, "t_max", "grid"), "grid.t_max")
    dt = _float(_need(grid_t, "dt", "grid"), "grid.dt")
    if t_max <= 0 or dt <= 0 or dt > t_max:
        raise ValidationError("grid needs 0 < dt <= t_max")

    methods_t = _need(doc, "methods", "scenario")
    _reject_unknown(methods_t, set(_METHODS), "methods")
    methods = tuple(mname for mname in _METHODS if methods_t.get(mname, False))
    for mname, val in methods_t.items():
        if not isinstance(val, bool):
            raise ValidationError(f"methods.{mname} must be a boolean")
    if not methods:
        raise ValidationError("enable at least one method")

    oracle_settings = {}
    if "oracle" in doc:
        ot = doc["oracle"]
        _reject_unknown(ot, {"n_fock", "rtol", "atol", "method"}, "oracle")
        n_fock = ot.get("n_fock", "auto")
        if n_fock != "auto" and (not isinstance(n_fock, int) or n_fock < 2):
            raise ValidationError("oracle.n_fock must be an integer >= 2 or 'auto'")
        oracle_settings = {
            "n_fock": n_fock,
            "rtol": _float(ot.get("rtol", 1e-8), "oracle.rtol"),
            "atol": _float(ot.get("atol", 1e-10), "oracle.atol"),
            "method": ot.get("method", "adaptive"),
        }
        if oracle_settings["method"] not in ("adaptive", "krylov"):
            raise ValidationError("oracle.method must be 'adaptive' or 'krylov'")
    elif "oracle" in methods:
        oracle_settings = {"n_fock": "auto", "rtol": 1e-8, "atol": 1e-10, "method": "adaptive"}

    ho_order = 4
    if "higher_order" in doc:
        ht = doc["higher_order"]
        _reject_unknown(ht, {"order"}, "higher_order")
        ho_order = ht.get("order", 4)
        if ho_order not in (2, 4):
            raise ValidationError("higher_order.order must be 2 or 4")

    out_t = _need(doc, "output", "scenario")
    _reject_unknown(out_t, {"path", "format", "envelope"}, "output")
    out_path = _need(out_t, "path", "output")
    if not isinstance(out_path, str) or not out_path:
        raise ValidationError("output.path must be a non-empty string")
    out_format = out_t.get("format", "csv")
    if out_format != "csv":
        raise ValidationError("output.format must be 'csv' (the only supported format)")
    envelope = out_t.get("envelope", False)
    if not isinstance(envelope, bool):
        raise ValidationError("output.envelope must be a boolean")

    sweep = None
    if "sweep" in doc:
        st = doc["sweep"]
        _reject_unknown(st, {"parameter", "start", "stop", "num", "gamma_over_omega"}, "sweep")
        parameter = _need(st, "parameter", "sweep")
        if parameter != "mode_omega":
            raise ValidationError("sweep.parameter supports 'mode_omega' only")
        num = st.get("num", 51)
        if not isinstance(num, int) or num < 1:
            raise ValidationError("sweep.num must be a positive integer")
        sweep = {
            "parameter": parameter,
            "start": _float(_need(st, "start", "sweep"), "sweep.start"),
            "stop": _float(_need(st, "stop", "sweep"), "sweep.stop"),
            "num": num,
            "gamma_over_omega": _float(st["gamma_over_omega"], "sweep.gamma_over_omega")
            if "gamma_over_omega" in st
            else None,
        }
        if discrete is None or len(discrete.modes) != 1:
            raise ValidationError("sweep.parameter = 'mode_omega' needs exactly one bath mode")

    return Scenario(
        model=model,
        thermal=thermal,
        discrete=discrete,
        continuum=continuum,
        rho0=rho0,
        t_max=t_max,
        dt=dt,
        methods=methods,
        oracle_settings=oracle_settings,
        higher_order_order=ho_order,
        output_path=out_path,
        output_format=out_format,
        output_envelope=envelope,
        sweep=sweep,
        raw=doc,
    )


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, "rb") as fh:
            doc = tomli.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"scenario file not found: {path}") from None
    except tomli.TOMLDecodeError as exc:
        raise ValidationError(f"scenario parse error in {path}: {exc}") from None
    try:
        return parse_scenario(doc)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None
