"""Scenario runner.

Scenarios are flat INI documents (parsed with :mod:`configparser`) that name a
system from a fixed catalog of force/momentum/torque laws, a time window or
grid, a variation generator, and a list of diagnostics.  ``run`` executes the
diagnostics, writes CSV artifacts, and prints a pass/fail summary; ``refine``
reruns a scenario with the step or spacing halved per level and reports
residual ratios; ``catalog`` prints the law catalog.  Exit codes: 0 all
diagnostics pass, 1 any fail, 2 validation error.

Grammar (sections and keys; values use ``name(key=value, ...)`` for catalog
calls and colon-separated lists for vectors)::

    [scenario]   kind = point_mass | rigid_body | general_jet | strain
    [system]     kind-specific keys, see README
    [time]       start, stop, step            (point_mass, rigid_body)
    [grid]       bounds = lo:hi, lo:hi ...    (general_jet, strain)
                 samples = n, n ...
    [variation]  generator = time_translation | space_translation(axis=..)
                 | rotation(axis=..) | constant(da=.., dx=..)
    [diagnostics] run = balance, conservation, lagrangian_current,
                 exactness, bracket, homogeneity, noether_map, strain
    [output]     prefix = file name prefix for CSV artifacts

Outputs are deterministic: float formatting uses shortest round-trip repr and
nothing time- or platform-dependent is written.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import math
import re
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .continuum import DisplacementField, green_strain
from .dynamics import (
    FundamentalOneForm,
    euler_homogeneity_check,
    kinetic_exactness_check,
    lagrange_bracket,
)
from .jet import ParameterGrid, SampledSection, Variation
from .noether import (
    GroupActionLinearization,
    balance_check,
    induced_variation,
    lagrangian_current,
    noether_current,
    noether_map_matrix,
)
from .numeric import central_step, grid_divergence, maxnorm, skew, so3_exp
from .pointmech import (
    PointMassSystem,
    fundamental_form,
    integrate_newton,
    kinetic_energy as point_kinetic_energy,
    power_balance_report,
    time_translation_variation,
    trajectory_section,
)
from .rigidbody import (
    Iso3Element,
    RigidBodyParams,
    RigidBodyState,
    integrate_rigid_body,
    kinetic_energy as rigid_kinetic_energy,
    rigid_power_balance,
)

KINDS = ("point_mass", "rigid_body", "general_jet", "strain")

# Pass/fail thresholds.  Balance-type residuals scale with the square of the
# step/spacing (the differencing order); conservation drift scales with the
# fourth power (the integrator order).  Point-identity checks are pinned at
# fixed absolute levels for O(1)-normalized scenario data.
BALANCE_TOL_FACTOR = 10.0
RIGID_BALANCE_TOL_FACTOR = 100.0
ENERGY_DRIFT_TOL_FACTOR = 1e3
CONSERVATION_REL_TOL = 1e-8
EXACTNESS_TOL = 1e-8
HOMOGENEITY_TOL = 1e-9
NOETHER_MAP_TOL = 1e-12
STRAIN_LINEAR_TOL = 1e-12
STRAIN_RIGID_TOL = 1e-10
RESIDUAL_FLOOR = 1e-13


class ScenarioError(ValueError):
    """Scenario validation failed; carries every error found."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


@dataclass(frozen=True)
class LawSpec:
    """A catalog call: law name plus numeric parameters."""

    name: str
    params: dict


# ---------------------------------------------------------------------------
# Catalog
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CatalogEntry:
    params: dict  # name -> "scalar" | "vector"
    roles: tuple
    doc: str


CATALOG: dict[str, CatalogEntry] = {
    "constant_force": CatalogEntry(
        {"f": "vector"}, ("point_force", "rigid_force", "jet_force"),
        "constant force covector f"),
    "linear_spring": CatalogEntry(
        {"k": "scalar"}, ("point_force", "jet_force"),
        "restoring force -k x"),
    "linear_drag": CatalogEntry(
        {"c": "scalar"}, ("point_force", "jet_force"),
        "dissipative force -c v"),
    "driven": CatalogEntry(
        {"k": "scalar", "amplitude": "scalar", "frequency": "scalar"},
        ("point_force", "jet_force"),
        "-k x + amplitude sin(frequency t) on the first axis"),
    "gravity": CatalogEntry(
        {"g": "vector"}, ("point_force", "rigid_force"),
        "uniform gravity; force is mass * g"),
    "viscous_torque": CatalogEntry(
        {"c": "scalar"}, ("rigid_torque",),
        "body-axis damping torque -c omega"),
    "constant_torque": CatalogEntry(
        {"tau": "vector"}, ("rigid_torque",),
        "constant body-axis torque"),
    "mass_momentum": CatalogEntry(
        {"m": "scalar"}, ("jet_momentum",),
        "momentum m xdot with kinetic energy m |xdot|^2 / 2"),
    "inertia_momentum": CatalogEntry(
        {"i": "vector"}, ("jet_momentum",),
        "momentum I xdot (I = diag of i, or 9 row-major values); p = 1"),
}

SECTIONS: dict[str, CatalogEntry] = {
    "cosine": CatalogEntry(
        {"omega": "scalar", "amplitude": "scalar"}, ("section",),
        "x(a) = amplitude cos(omega a); p = 1, m = 1"),
    "line": CatalogEntry(
        {"slope": "vector", "intercept": "vector"}, ("section",),
        "x(a) = intercept + slope a; p = 1"),
    "product": CatalogEntry(
        {}, ("section",),
        "x(a) = a1 a2; p = 2, m = 1"),
}

GENERATORS: dict[str, CatalogEntry] = {
    "time_translation": CatalogEntry(
        {"scale": "scalar"}, ("generator",),
        "da = scale, dx = xdot scale (p = 1)"),
    "space_translation": CatalogEntry(
        {"axis": "scalar"}, ("generator",),
        "dx = unit vector along axis, da = 0"),
    "rotation": CatalogEntry(
        {"axis": "scalar"}, ("generator",),
        "dx = generator of rotations about axis applied to x, da = 0"),
    "constant": CatalogEntry(
        {"da": "vector", "dx": "vector"}, ("generator",),
        "explicit constant fields"),
}

DEFORMATIONS: dict[str, CatalogEntry] = {
    "linear": CatalogEntry(
        {"a": "vector"}, ("deformation",),
        "y = A x with A given row-major"),
    "rigid_rotation": CatalogEntry(
        {"axis": "scalar", "angle": "scalar", "shift": "vector"},
        ("deformation",),
        "y = R x + shift (strain-free)"),
}

#: (kind, diagnostic) pairs supported by ``run``; each maps to one operation.
DIAGNOSTICS: dict[str, tuple[str, ...]] = {
    "point_mass": (
        "balance", "conservation", "lagrangian_current",
        "exactness", "homogeneity", "noether_map",
    ),
    "rigid_body": ("balance", "conservation"),
    "general_jet": (
        "balance", "bracket", "exactness", "homogeneity", "noether_map",
    ),
    "strain": ("strain",),
}


def catalog_text() -> str:
    lines = ["law catalog:"]
    for name, entry in CATALOG.items():
        params = ", ".join(f"{k}:{v}" for k, v in entry.params.items()) or "-"
        lines.append(f"  {name}({params})  [{'/'.join(entry.roles)}]  {entry.doc}")
    lines.append("sections (general_jet):")
    for name, entry in SECTIONS.items():
        params = ", ".join(f"{k}:{v}" for k, v in entry.params.items()) or "-"
        lines.append(f"  {name}({params})  {entry.doc}")
    lines.append("variation generators:")
    for name, entry in GENERATORS.items():
        params = ", ".join(f"{k}:{v}" for k, v in entry.params.items()) or "-"
        lines.append(f"  {name}({params})  {entry.doc}")
    lines.append("deformations (strain):")
    for name, entry in DEFORMATIONS.items():
        params = ", ".join(f"{k}:{v}" for k, v in entry.params.items()) or "-"
        lines.append(f"  {name}({params})  {entry.doc}")
    lines.append("diagnostics per kind:")
    for kind, names in DIAGNOSTICS.items():
        lines.append(f"  {kind}: {', '.join(names)}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_CALL_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\((.*)\))?\s*$")


def _parse_number_list(text: str) -> tuple:
    return tuple(float(part) for part in text.split(":"))


def _parse_call(
    text: str, table: dict[str, CatalogEntry], where: str, errors: list
) -> LawSpec | None:
    match = _CALL_RE.match(text)
    if not match:
        errors.append(f"{where}: cannot parse {text!r}")
        return None
    name, arglist = match.group(1), match.group(2)
    if name not in table:
        errors.append(
            f"{where}: unknown name {name!r}; known: {', '.join(sorted(table))}"
        )
        return None
    entry = table[name]
    params: dict = {}
    if arglist and arglist.strip():
        for piece in arglist.split(","):
            if "=" not in piece:
                errors.append(f"{where}: expected key=value, got {piece.strip()!r}")
                continue
            key, _, raw = piece.partition("=")
            key = key.strip()
            if key not in entry.params:
                errors.append(
                    f"{where}: {name} takes "
                    f"({', '.join(entry.params) or 'no parameters'}), not {key!r}"
                )
                continue
            try:
                value = _parse_number_list(raw.strip())
            except ValueError:
                errors.append(f"{where}: non-numeric value for {key}: {raw.strip()!r}")
                continue
            if any(not math.isfinite(v) for v in value):
                errors.append(f"{where}: non-finite value for {key}")
                continue
            params[key] = value[0] if (
                entry.params[key] == "scalar" and len(value) == 1
            ) else value
            if entry.params[key] == "scalar" and len(value) != 1:
                errors.append(f"{where}: {key} must be a single number")
    return LawSpec(name=name, params=params)


def _get_float(section, key, errors, where, default=None):
    if key not in section:
        if default is not None:
            return default
        errors.append(f"{where}: missing required key {key!r}")
        return None
    try:
        value = float(section[key])
    except ValueError:
        errors.append(f"{where}: {key} is not a number: {section[key]!r}")
        return None
    if not math.isfinite(value):
        errors.append(f"{where}: {key} must be finite")
        return None
    return value


def _get_vector(section, key, errors, where, default=None):
    if key not in section:
        if default is not None:
            return default
        errors.append(f"{where}: missing required key {key!r}")
        return None
    try:
        value = _parse_number_list(section[key])
    except ValueError:
        errors.append(f"{where}: {key} is not a colon-separated number list")
        return None
    if any(not math.isfinite(v) for v in value):
        errors.append(f"{where}: {key} must be finite")
        return None
    return value


@dataclass(frozen=True)
class Scenario:
    """Validated scenario: everything ``run`` needs, still declarative."""

    kind: str
    prefix: str
    system: dict
    time: dict | None
    grid_bounds: tuple | None
    grid_samples: tuple | None
    variation: LawSpec | None
    diagnostics: tuple


def parse_scenario(text: str) -> Scenario:
    """Validate a scenario document; raises ScenarioError listing every problem."""
    errors: list = []
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError([f"syntax: {exc}"]) from exc

    if not parser.has_section("scenario"):
        raise ScenarioError(["missing [scenario] section"])
    kind = parser["scenario"].get("kind", "").strip()
    if kind not in KINDS:
        raise ScenarioError(
            [f"[scenario]: kind must be one of {', '.join(KINDS)}; got {kind!r}"]
        )

    system: dict = {}
    sys_section = parser["system"] if parser.has_section("system") else {}
    where = "[system]"

    if kind == "point_mass":
        system["mass"] = _get_float(sys_section, "mass", errors, where)
        if system["mass"] is not None and system["mass"] <= 0.0:
            errors.append(f"{where}: mass must be positive")
        dim = _get_float(sys_section, "dim", errors, where, default=1.0)
        system["dim"] = int(dim) if dim and dim >= 1 else 1
        if dim is not None and dim < 1:
            errors.append(f"{where}: dim must be at least 1")
        if "force" in sys_section:
            spec = _parse_call(sys_section["force"], CATALOG, where, errors)
            if spec and "point_force" not in CATALOG[spec.name].roles:
                errors.append(f"{where}: {spec.name} is not a point force law")
            system["force"] = spec
        else:
            errors.append(f"{where}: missing required key 'force'")
        metric_text = sys_section.get("metric", "identity").strip()
        if metric_text == "identity":
            system["metric"] = None
        else:
            spec = _parse_call(
                metric_text,
                {"diag": CatalogEntry({"d": "vector"}, (), "")},
                where,
                errors,
            )
            if spec:
                system["metric"] = spec.params.get("d")
        system["x0"] = _get_vector(
            sys_section, "x0", errors, where, default=(0.0,) * system["dim"]
        )
        system["v0"] = _get_vector(
            sys_section, "v0", errors, where, default=(0.0,) * system["dim"]
        )
    elif kind == "rigid_body":
        system["mass"] = _get_float(sys_section, "mass", errors, where)
        if system["mass"] is not None and system["mass"] <= 0.0:
            errors.append(f"{where}: mass must be positive")
        inertia = _get_vector(sys_section, "inertia", errors, where)
        if inertia is not None:
            if len(inertia) == 3:
                system["inertia"] = np.diag(inertia)
            elif len(inertia) == 9:
                mat = np.array(inertia).reshape(3, 3)
                if not np.allclose(mat, mat.T, atol=1e-12):
                    errors.append(f"{where}: inertia matrix must be symmetric")
                system["inertia"] = mat
            else:
                errors.append(f"{where}: inertia needs 3 (diag) or 9 values")
            if "inertia" in system and np.any(
                np.linalg.eigvalsh(0.5 * (system["inertia"] + system["inertia"].T))
                <= 0.0
            ):
                errors.append(f"{where}: inertia must be positive-definite")
        for key, role in (("force", "rigid_force"), ("torque", "rigid_torque")):
            if key in sys_section and sys_section[key].strip() != "none":
                spec = _parse_call(sys_section[key], CATALOG, where, errors)
                if spec and role not in CATALOG[spec.name].roles:
                    errors.append(f"{where}: {spec.name} is not a {role} law")
                system[key] = spec
            else:
                system[key] = None
        system["v0"] = _get_vector(sys_section, "v0", errors, where, (0.0, 0.0, 0.0))
        system["omega0"] = _get_vector(
            sys_section, "omega0", errors, where, (0.0, 0.0, 0.0)
        )
    elif kind == "general_jet":
        for key, role, table in (
            ("force", "jet_force", CATALOG),
            ("momentum", "jet_momentum", CATALOG),
            ("section", "section", SECTIONS),
        ):
            if key in sys_section:
                spec = _parse_call(sys_section[key], table, where, errors)
                if spec and table is CATALOG and role not in CATALOG[spec.name].roles:
                    errors.append(f"{where}: {spec.name} is not a {role} law")
                system[key] = spec
            else:
                errors.append(f"{where}: missing required key {key!r}")
    elif kind == "strain":
        dim = _get_float(sys_section, "dim", errors, where, default=2.0)
        system["dim"] = int(dim) if dim else 2
        if "deformation" in sys_section:
            system["deformation"] = _parse_call(
                sys_section["deformation"], DEFORMATIONS, where, errors
            )
        else:
            errors.append(f"{where}: missing required key 'deformation'")

    time_spec = None
    if kind in ("point_mass", "rigid_body"):
        if parser.has_section("time"):
            tsec = parser["time"]
            start = _get_float(tsec, "start", errors, "[time]", default=0.0)
            stop = _get_float(tsec, "stop", errors, "[time]")
            step = _get_float(tsec, "step", errors, "[time]")
            if None not in (start, stop, step):
                if not stop > start:
                    errors.append("[time]: stop must exceed start")
                if step <= 0:
                    errors.append("[time]: step must be positive")
                time_spec = {"start": start, "stop": stop, "step": step}
        else:
            errors.append(f"{kind} scenarios need a [time] section")

    grid_bounds = grid_samples = None
    if kind in ("general_jet", "strain"):
        if parser.has_section("grid"):
            gsec = parser["grid"]
            bounds_raw = gsec.get("bounds", "")
            samples_raw = gsec.get("samples", "")
            try:
                grid_bounds = tuple(
                    tuple(float(v) for v in part.split(":"))
                    for part in bounds_raw.split(",")
                )
                grid_samples = tuple(int(part) for part in samples_raw.split(","))
            except ValueError:
                errors.append("[grid]: bounds must be lo:hi pairs, samples integers")
            if grid_bounds and any(len(b) != 2 or b[1] <= b[0] for b in grid_bounds):
                errors.append("[grid]: each bounds entry must be an increasing lo:hi")
                grid_bounds = None
            if grid_samples and any(n < 3 for n in grid_samples):
                errors.append("[grid]: need at least 3 samples per axis")
            if (
                grid_bounds
                and grid_samples
                and len(grid_bounds) != len(grid_samples)
            ):
                errors.append("[grid]: bounds and samples disagree on axis count")
        else:
            errors.append(f"{kind} scenarios need a [grid] section")

    variation = None
    if parser.has_section("variation"):
        variation = _parse_call(
            parser["variation"].get("generator", ""), GENERATORS, "[variation]", errors
        )
    elif kind == "general_jet":
        variation = LawSpec(name="time_translation", params={})

    diag_raw = ""
    if parser.has_section("diagnostics"):
        diag_raw = parser["diagnostics"].get("run", "")
    diagnostics = tuple(
        name.strip() for name in diag_raw.split(",") if name.strip()
    )
    if not diagnostics:
        errors.append("[diagnostics]: need run = <comma-separated names>")
    for name in diagnostics:
        if name not in DIAGNOSTICS.get(kind, ()):
            errors.append(
                f"[diagnostics]: {name!r} is not available for {kind} "
                f"(choose from {', '.join(DIAGNOSTICS.get(kind, ()))})"
            )

    prefix = "scenario"
    if parser.has_section("output"):
        prefix = parser["output"].get("prefix", prefix).strip() or prefix
    if not re.fullmatch(r"[A-Za-z0-9_\-]+", prefix):
        errors.append("[output]: prefix may contain only letters, digits, _ and -")

    if errors:
        raise ScenarioError(errors)
    return Scenario(
        kind=kind,
        prefix=prefix,
        system=system,
        time=time_spec,
        grid_bounds=grid_bounds,
        grid_samples=grid_samples,
        variation=variation,
        diagnostics=diagnostics,
    )


def load_scenario(path: str | Path) -> Scenario:
    return parse_scenario(Path(path).read_text())


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def _as_vector(value, dim: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.size == 1 and dim > 1:
        raise ScenarioError([f"{name} needs {dim} components"])
    if arr.size != dim:
        raise ScenarioError([f"{name} has {arr.size} components, expected {dim}"])
    return arr


def _point_force(spec: LawSpec, mass: float, dim: int):
    name, p = spec.name, spec.params
    if name == "constant_force":
        f = _as_vector(p.get("f", (0.0,) * dim), dim, "constant_force.f")
        return lambda t, x, v: f
    if name == "linear_spring":
        k = float(p.get("k", 1.0))
        return lambda t, x, v: -k * x
    if name == "linear_drag":
        c = float(p.get("c", 1.0))
        return lambda t, x, v: -c * v
    if name == "driven":
        k = float(p.get("k", 1.0))
        amp = float(p.get("amplitude", 1.0))
        freq = float(p.get("frequency", 1.0))

        def law(t, x, v):
            out = -k * x
            out = np.asarray(out, dtype=float).copy()
            out[0] += amp * math.sin(freq * t)
            return out

        return law
    if name == "gravity":
        g = _as_vector(p.get("g", (0.0,) * dim), dim, "gravity.g")
        return lambda t, x, v: mass * g
    raise ScenarioError([f"{name} cannot be used as a point force"])


def _point_potential(spec: LawSpec, mass: float, dim: int):
    """Potential of a conservative catalog force, or None."""
    name, p = spec.name, spec.params
    if name == "linear_spring":
        k = float(p.get("k", 1.0))
        return lambda x: 0.5 * k * float(x @ x)
    if name == "constant_force":
        f = _as_vector(p.get("f", (0.0,) * dim), dim, "constant_force.f")
        return lambda x: -float(f @ x)
    if name == "gravity":
        g = _as_vector(p.get("g", (0.0,) * dim), dim, "gravity.g")
        return lambda x: -mass * float(g @ x)
    return None


def _rigid_laws(scenario: Scenario):
    mass = scenario.system["mass"]
    force_spec = scenario.system.get("force")
    torque_spec = scenario.system.get("torque")
    force_law = None
    torque_law = None
    if force_spec is not None:
        if force_spec.name == "constant_force":
            f = _as_vector(force_spec.params.get("f", (0, 0, 0)), 3, "f")
            force_law = lambda t, state: f
        elif force_spec.name == "gravity":
            g = _as_vector(force_spec.params.get("g", (0, 0, 0)), 3, "g")
            force_law = lambda t, state: mass * g
    if torque_spec is not None:
        if torque_spec.name == "viscous_torque":
            c = float(torque_spec.params.get("c", 1.0))
            torque_law = lambda t, state: -c * state.body_angular_velocity
        elif torque_spec.name == "constant_torque":
            tau = _as_vector(torque_spec.params.get("tau", (0, 0, 0)), 3, "tau")
            torque_law = lambda t, state: tau
    return force_law, torque_law


def _jet_section(spec: LawSpec, grid: ParameterGrid) -> SampledSection:
    """Closed-form sections with exact contact components."""
    name, p = spec.name, spec.params
    if name == "cosine":
        if grid.p != 1:
            raise ScenarioError(["cosine section needs a one-axis grid"])
        omega = float(p.get("omega", 1.0))
        amp = float(p.get("amplitude", 1.0))
        a = grid.axis_coords(0)
        x = (amp * np.cos(omega * a))[:, None]
        xd = (-amp * omega * np.sin(omega * a))[:, None, None]
        return SampledSection(grid=grid, x_field=x, xdot_field=xd)
    if name == "line":
        if grid.p != 1:
            raise ScenarioError(["line section needs a one-axis grid"])
        slope = np.asarray(p.get("slope", (1.0,)), dtype=float).reshape(-1)
        intercept = np.asarray(
            p.get("intercept", (0.0,) * slope.size), dtype=float
        ).reshape(-1)
        if intercept.size != slope.size:
            raise ScenarioError(["line: slope and intercept sizes differ"])
        a = grid.axis_coords(0)
        x = intercept[None, :] + a[:, None] * slope[None, :]
        xd = np.broadcast_to(
            slope[None, :, None], (grid.shape[0], slope.size, 1)
        ).copy()
        return SampledSection(grid=grid, x_field=x, xdot_field=xd)
    if name == "product":
        if grid.p != 2:
            raise ScenarioError(["product section needs a two-axis grid"])
        coords = grid.node_coords()
        a1, a2 = coords[..., 0], coords[..., 1]
        x = (a1 * a2)[..., None]
        xd = np.stack([a2, a1], axis=-1)[..., None, :]
        return SampledSection(grid=grid, x_field=x, xdot_field=xd)
    raise ScenarioError([f"unknown section {name!r}"])


def _jet_phi(scenario: Scenario, m: int, p: int) -> FundamentalOneForm:
    mom = scenario.system["momentum"]
    if mom.name == "mass_momentum":
        mass = float(mom.params.get("m", 1.0))
        momentum = lambda j: mass * j.xdot
        kinetic = lambda j: 0.5 * mass * float(np.sum(j.xdot**2))
    elif mom.name == "inertia_momentum":
        if p != 1:
            raise ScenarioError(["inertia_momentum requires a one-axis grid"])
        ivals = np.asarray(mom.params.get("i", (1.0,) * m), dtype=float).reshape(-1)
        inertia = np.diag(ivals) if ivals.size == m else ivals.reshape(m, m)
        if not np.allclose(inertia, inertia.T, atol=1e-12):
            raise ScenarioError(["inertia_momentum matrix must be symmetric"])
        momentum = lambda j: (inertia @ j.xdot[:, 0])[:, None]
        kinetic = lambda j: 0.5 * float(j.xdot[:, 0] @ inertia @ j.xdot[:, 0])
    else:
        raise ScenarioError([f"{mom.name} cannot be used as a jet momentum"])

    fspec = scenario.system["force"]
    name, params = fspec.name, fspec.params
    potential = None
    if name == "linear_spring":
        k = float(params.get("k", 1.0))
        force = lambda j: -k * j.x
        potential = lambda j: 0.5 * k * float(j.x @ j.x)
    elif name == "linear_drag":
        if p != 1:
            raise ScenarioError(["linear_drag needs a one-axis grid"])
        c = float(params.get("c", 1.0))
        force = lambda j: -c * j.xdot[:, 0]
    elif name == "constant_force":
        f = _as_vector(params.get("f", (0.0,) * m), m, "constant_force.f")
        force = lambda j: f
        potential = lambda j: -float(f @ j.x)
    elif name == "driven":
        if p != 1 or m != 1:
            raise ScenarioError(["driven needs p = m = 1"])
        k = float(params.get("k", 1.0))
        amp = float(params.get("amplitude", 1.0))
        freq = float(params.get("frequency", 1.0))
        force = lambda j: -k * j.x + amp * math.sin(freq * float(j.a[0]))
    else:
        raise ScenarioError([f"{name} cannot be used as a jet force"])

    lagrangian = None
    if potential is not None:
        lagrangian = lambda j: kinetic(j) - potential(j)
    return FundamentalOneForm(
        force=force, momentum=momentum, kinetic=kinetic, lagrangian=lagrangian
    )


def _jet_variation(spec: LawSpec, s: SampledSection) -> Variation:
    name, p = spec.name, spec.params
    grid = s.grid
    shape = grid.shape
    if name == "time_translation":
        if grid.p != 1:
            raise ScenarioError(["time_translation requires a one-axis grid"])
        scale = float(p.get("scale", 1.0))
        return Variation(
            grid=grid,
            da_field=np.full(shape + (1,), scale),
            dx_field=s.xdot_field[..., 0] * scale,
        )
    if name == "space_translation":
        axis = int(p.get("axis", 0))
        if not 0 <= axis < s.m:
            raise ScenarioError([f"space_translation axis {axis} out of range"])
        dx = np.zeros(shape + (s.m,))
        dx[..., axis] = 1.0
        return Variation(grid=grid, da_field=np.zeros(shape + (grid.p,)), dx_field=dx)
    if name == "rotation":
        axis = int(p.get("axis", 2))
        if s.m == 2:
            gen = np.array([[0.0, -1.0], [1.0, 0.0]])
        elif s.m == 3:
            gen = skew(np.eye(3)[axis])
        else:
            raise ScenarioError(["rotation variation needs m = 2 or 3"])
        dx = np.einsum("mk,...k->...m", gen, s.x_field)
        return Variation(grid=grid, da_field=np.zeros(shape + (grid.p,)), dx_field=dx)
    if name == "constant":
        da = _as_vector(p.get("da", (0.0,) * grid.p), grid.p, "constant.da")
        dx = _as_vector(p.get("dx", (0.0,) * s.m), s.m, "constant.dx")
        return Variation(
            grid=grid,
            da_field=np.broadcast_to(da, shape + (grid.p,)).copy(),
            dx_field=np.broadcast_to(dx, shape + (s.m,)).copy(),
        )
    raise ScenarioError([f"unknown variation generator {name!r}"])


def _jet_action(spec: LawSpec, s: SampledSection) -> GroupActionLinearization:
    """Linearized one-generator action matching :func:`_jet_variation`."""
    grid, m = s.grid, s.m
    name, p = spec.name, spec.params
    if name == "time_translation":
        scale = float(p.get("scale", 1.0))
        return GroupActionLinearization(
            d_param=np.full((grid.p, 1), scale), d_config=np.zeros((m, 1))
        )
    if name == "space_translation":
        axis = int(p.get("axis", 0))
        d_config = np.zeros((m, 1))
        d_config[axis, 0] = 1.0
        return GroupActionLinearization(
            d_param=np.zeros((grid.p, 1)), d_config=d_config
        )
    if name == "rotation":
        axis = int(p.get("axis", 2))
        gen = (
            np.array([[0.0, -1.0], [1.0, 0.0]])
            if m == 2
            else skew(np.eye(3)[axis])
        )
        field = np.einsum("mk,...k->...m", gen, s.x_field)[..., None]
        return GroupActionLinearization(
            d_param=np.zeros((grid.p, 1)), d_config=field
        )
    if name == "constant":
        da = _as_vector(p.get("da", (0.0,) * grid.p), grid.p, "constant.da")
        dx = _as_vector(p.get("dx", (0.0,) * m), m, "constant.dx")
        lifted = np.einsum("...mi,i->...m", s.xdot_field, da)
        d_config = (np.broadcast_to(dx, grid.shape + (m,)) - lifted)[..., None]
        return GroupActionLinearization(
            d_param=np.broadcast_to(da[:, None], (grid.p, 1)).copy(),
            d_config=d_config,
        )
    raise ScenarioError([f"unknown variation generator {name!r}"])


# ---------------------------------------------------------------------------
# Reports and CSV
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiagnosticResult:
    name: str
    residual: float
    tolerance: float
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class RunReport:
    prefix: str
    kind: str
    results: tuple

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def format(self) -> str:
        lines = [f"scenario {self.prefix} ({self.kind})"]
        for r in self.results:
            status = "PASS" if r.passed else "FAIL"
            line = (
                f"  [{status}] {r.name}: residual {_fmt(r.residual)}"
                f" (tolerance {_fmt(r.tolerance)})"
            )
            if r.detail:
                line += f"  {r.detail}"
            lines.append(line)
        lines.append(f"result: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(
            ",".join(_fmt(v) if isinstance(v, (float, np.floating)) else str(v) for v in row)
        )
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Runners
# ---------------------------------------------------------------------------

def _run_point_mass(scenario: Scenario, out_dir: Path) -> list:
    sysdict = scenario.system
    mass, dim = sysdict["mass"], sysdict["dim"]
    metric = None
    if sysdict.get("metric") is not None:
        metric = np.diag(_as_vector(sysdict["metric"], dim, "metric"))
    force_spec = sysdict["force"]
    system = PointMassSystem(
        mass=mass,
        dim=dim,
        force_law=_point_force(force_spec, mass, dim),
        metric=metric,
    )
    t = scenario.time
    traj = integrate_newton(
        system,
        _as_vector(sysdict["x0"], dim, "x0"),
        _as_vector(sysdict["v0"], dim, "v0"),
        t["start"],
        t["stop"],
        t["step"],
    )
    step = traj.step
    potential = _point_potential(force_spec, mass, dim)

    report = power_balance_report(system, traj)
    results = []
    for name in scenario.diagnostics:
        if name == "balance":
            tol = BALANCE_TOL_FACTOR * step**2
            results.append(DiagnosticResult(
                name, report.residual_maxnorm, tol,
                report.residual_maxnorm <= tol))
        elif name == "conservation":
            if potential is None:
                results.append(DiagnosticResult(
                    name, math.inf, 0.0, False,
                    "force law is not conservative"))
                continue
            energy = np.array([
                point_kinetic_energy(system, v) + potential(x)
                for x, v in zip(traj.positions, traj.velocities)
            ])
            drift = maxnorm(energy - energy[0])
            tol = max(ENERGY_DRIFT_TOL_FACTOR * step**4, 1e-12)
            results.append(DiagnosticResult(name, drift, tol, drift <= tol))
        elif name == "lagrangian_current":
            if potential is None:
                results.append(DiagnosticResult(
                    name, math.inf, 0.0, False,
                    "force law is not conservative"))
                continue
            phi = fundamental_form(system)
            phi = dataclasses.replace(
                phi,
                lagrangian=lambda j: (
                    0.5 * mass * float(j.xdot[:, 0] @ system.metric @ j.xdot[:, 0])
                    - potential(j.x)
                ),
            )
            section = trajectory_section(traj)
            var = time_translation_variation(section)
            current = lagrangian_current(phi, section, var)
            div = grid_divergence(current, section.grid.spacing)
            residual = maxnorm(div[1:-1])
            tol = BALANCE_TOL_FACTOR * step**2
            results.append(DiagnosticResult(name, residual, tol, residual <= tol))
        elif name == "exactness":
            phi = fundamental_form(system)
            section = trajectory_section(traj)
            mid = (traj.n // 2,)
            rep = kinetic_exactness_check(
                phi, section.jet_at(mid), central_step(1.0)
            )
            residual = max(
                rep.momentum_param_gradient_max,
                rep.momentum_config_gradient_max,
                rep.gamma_symmetry_residual,
                rep.kinetic_gradient_residual or 0.0,
            )
            results.append(DiagnosticResult(
                name, residual, EXACTNESS_TOL, residual <= EXACTNESS_TOL))
        elif name == "homogeneity":
            phi = fundamental_form(system)
            section = trajectory_section(traj)
            rep = euler_homogeneity_check(
                phi, section.jet_at((traj.n // 2,)), (0.5, 2.0, 3.0)
            )
            residual = max(
                rep.degree1_residual,
                rep.kinetic_pairing_residual or 0.0,
                rep.degree2_residual or 0.0,
            )
            results.append(DiagnosticResult(
                name, residual, HOMOGENEITY_TOL, residual <= HOMOGENEITY_TOL,
                f"euler identity {_fmt(rep.euler_identity_residual)}"))
        elif name == "noether_map":
            phi = fundamental_form(system)
            section = trajectory_section(traj)
            act = GroupActionLinearization(
                d_param=np.ones((1, 1)), d_config=np.zeros((dim, 1))
            )
            matrix = noether_map_matrix(phi, section, act)
            var = induced_variation(section, act, np.array([1.0]))
            direct = noether_current(phi, section, var)
            residual = maxnorm(matrix[..., 0] - direct)
            results.append(DiagnosticResult(
                name, residual, NOETHER_MAP_TOL, residual <= NOETHER_MAP_TOL))

    residual_col = np.abs(report.divergence_field - report.source_field)
    T = np.array([point_kinetic_energy(system, v) for v in traj.velocities])
    _write_csv(
        out_dir / f"{scenario.prefix}_trajectory.csv",
        ["t"]
        + [f"x{i}" for i in range(dim)]
        + [f"v{i}" for i in range(dim)]
        + ["T", "power", "residual"],
        (
            [traj.times[n]]
            + list(traj.positions[n])
            + list(traj.velocities[n])
            + [T[n], report.source_field[n], residual_col[n]]
            for n in range(traj.n)
        ),
    )
    return results


def _run_rigid_body(scenario: Scenario, out_dir: Path) -> list:
    sysdict = scenario.system
    force_law, torque_law = _rigid_laws(scenario)
    params = RigidBodyParams(
        mass=sysdict["mass"],
        inertia=sysdict["inertia"],
        force_law=force_law,
        torque_law=torque_law,
    )
    t = scenario.time
    s0 = RigidBodyState(
        pose=Iso3Element.identity(),
        velocity=_as_vector(sysdict["v0"], 3, "v0"),
        body_angular_velocity=_as_vector(sysdict["omega0"], 3, "omega0"),
    )
    states = integrate_rigid_body(params, s0, t["start"], t["stop"], t["step"])
    step = t["step"]
    report = rigid_power_balance(params, states, step, t0=t["start"])

    results = []
    for name in scenario.diagnostics:
        if name == "balance":
            tol = RIGID_BALANCE_TOL_FACTOR * step**2
            results.append(DiagnosticResult(
                name, report.residual_maxnorm, tol,
                report.residual_maxnorm <= tol))
        elif name == "conservation":
            if force_law is not None or torque_law is not None:
                results.append(DiagnosticResult(
                    name, math.inf, 0.0, False,
                    "conservation diagnostic requires a free body"))
                continue
            T = np.array([rigid_kinetic_energy(params, s) for s in states])
            L = np.array([
                np.linalg.norm(params.inertia @ s.body_angular_velocity)
                for s in states
            ])
            scale_T = max(abs(T[0]), 1e-30)
            scale_L = max(L[0], 1e-30)
            drift = max(
                maxnorm(T - T[0]) / scale_T, maxnorm(L - L[0]) / scale_L
            )
            results.append(DiagnosticResult(
                name, drift, CONSERVATION_REL_TOL,
                drift <= CONSERVATION_REL_TOL))

    residual_col = np.abs(report.divergence_field - report.source_field)
    T = np.array([rigid_kinetic_energy(params, s) for s in states])
    rows = []
    for n, s in enumerate(states):
        R = s.pose.rotation
        rows.append(
            [t["start"] + n * step]
            + list(s.pose.translation)
            + list(R.reshape(-1))
            + list(s.velocity)
            + list(s.body_angular_velocity)
            + [T[n], report.source_field[n], residual_col[n]]
        )
    _write_csv(
        out_dir / f"{scenario.prefix}_states.csv",
        ["t", "ux", "uy", "uz"]
        + [f"r{i}{j}" for i in range(3) for j in range(3)]
        + ["vx", "vy", "vz", "wx", "wy", "wz", "T", "P", "residual"],
        rows,
    )
    return results


def _run_general_jet(scenario: Scenario, out_dir: Path) -> list:
    grid = ParameterGrid(bounds=scenario.grid_bounds, samples=scenario.grid_samples)
    section = _jet_section(scenario.system["section"], grid)
    phi = _jet_phi(scenario, section.m, grid.p)
    var = _jet_variation(scenario.variation, section)
    h2 = max(grid.spacing) ** 2

    results = []
    for name in scenario.diagnostics:
        if name == "balance":
            report = balance_check(phi, section, var)
            tol = BALANCE_TOL_FACTOR * h2
            results.append(DiagnosticResult(
                name, report.residual_maxnorm, tol,
                report.residual_maxnorm <= tol,
                f"extremality {_fmt(report.extremality_maxnorm)}"))
            coords = grid.node_coords().reshape(-1, grid.p)
            div = report.divergence_field.reshape(-1)
            src = report.source_field.reshape(-1)
            _write_csv(
                out_dir / f"{scenario.prefix}_balance.csv",
                [f"a{i}" for i in range(grid.p)]
                + ["divergence", "source", "residual"],
                (
                    list(coords[n]) + [div[n], src[n], abs(div[n] - src[n])]
                    for n in range(coords.shape[0])
                ),
            )
        elif name == "bracket":
            bracket = lagrange_bracket(phi, section)
            residual = maxnorm(bracket[grid.interior])
            tol = BALANCE_TOL_FACTOR * h2
            results.append(DiagnosticResult(
                name, residual, tol, residual <= tol))
        elif name == "exactness":
            mid = tuple(n // 2 for n in grid.shape)
            rep = kinetic_exactness_check(
                phi, section.jet_at(mid), central_step(1.0), section=section
            )
            residual = max(
                rep.momentum_param_gradient_max,
                rep.momentum_config_gradient_max,
                rep.gamma_symmetry_residual,
                rep.kinetic_gradient_residual or 0.0,
            )
            detail = ""
            if rep.momentum_velocity_exchange_max is not None:
                detail = f"exchange {_fmt(rep.momentum_velocity_exchange_max)}"
            results.append(DiagnosticResult(
                name, residual, EXACTNESS_TOL, residual <= EXACTNESS_TOL, detail))
        elif name == "homogeneity":
            mid = tuple(n // 2 for n in grid.shape)
            rep = euler_homogeneity_check(
                phi, section.jet_at(mid), (0.5, 2.0, 3.0)
            )
            residual = max(
                rep.degree1_residual,
                rep.kinetic_pairing_residual or 0.0,
                rep.degree2_residual or 0.0,
            )
            results.append(DiagnosticResult(
                name, residual, HOMOGENEITY_TOL, residual <= HOMOGENEITY_TOL,
                f"euler identity {_fmt(rep.euler_identity_residual)}"))
        elif name == "noether_map":
            act = _jet_action(scenario.variation, section)
            matrix = noether_map_matrix(phi, section, act)
            var_induced = induced_variation(section, act, np.array([1.0]))
            direct = noether_current(phi, section, var_induced)
            residual = maxnorm(matrix[..., 0] - direct)
            results.append(DiagnosticResult(
                name, residual, NOETHER_MAP_TOL, residual <= NOETHER_MAP_TOL))
    return results


def _run_strain(scenario: Scenario, out_dir: Path) -> list:
    grid = ParameterGrid(bounds=scenario.grid_bounds, samples=scenario.grid_samples)
    dim = grid.p
    spec = scenario.system["deformation"]
    coords = grid.node_coords()
    if spec.name == "linear":
        a_vals = np.asarray(spec.params.get("a", ()), dtype=float)
        if a_vals.size != dim * dim:
            raise ScenarioError([f"linear deformation needs {dim * dim} matrix values"])
        A = a_vals.reshape(dim, dim)
        u_field = np.einsum("mk,...k->...m", A - np.eye(dim), coords)
        oracle = A.T @ A - np.eye(dim)
        tol = STRAIN_LINEAR_TOL
    else:  # rigid_rotation
        axis = int(spec.params.get("axis", 2))
        angle = float(spec.params.get("angle", 0.5))
        shift = np.asarray(spec.params.get("shift", (0.0,) * dim), float).reshape(-1)
        if dim == 2:
            c, s = math.cos(angle), math.sin(angle)
            R = np.array([[c, -s], [s, c]])
        else:
            R = so3_exp(angle * np.eye(3)[axis])
        u_field = np.einsum("mk,...k->...m", R - np.eye(dim), coords) + shift
        oracle = np.zeros((dim, dim))
        tol = STRAIN_RIGID_TOL

    strain = green_strain(DisplacementField(grid=grid, u_field=u_field), np.eye(dim))
    residual = maxnorm(strain - oracle)
    flat_coords = coords.reshape(-1, dim)
    flat_strain = strain.reshape(-1, dim * dim)
    _write_csv(
        out_dir / f"{scenario.prefix}_strain.csv",
        [f"x{i}" for i in range(dim)]
        + [f"e{i}{j}" for i in range(dim) for j in range(dim)],
        (
            list(flat_coords[n]) + list(flat_strain[n])
            for n in range(flat_coords.shape[0])
        ),
    )
    return [
        DiagnosticResult("strain", residual, tol, residual <= tol, spec.name)
    ]


_RUNNERS = {
    "point_mass": _run_point_mass,
    "rigid_body": _run_rigid_body,
    "general_jet": _run_general_jet,
    "strain": _run_strain,
}


def run(scenario: Scenario, out_dir: str | Path = ".") -> RunReport:
    """Execute a scenario's diagnostics and write its CSV artifacts."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = _RUNNERS[scenario.kind](scenario, out)
    return RunReport(
        prefix=scenario.prefix, kind=scenario.kind, results=tuple(results)
    )


def _refined(scenario: Scenario, level: int) -> Scenario:
    factor = 2**level
    if scenario.time is not None:
        time = dict(scenario.time)
        time["step"] = time["step"] / factor
        return dataclasses.replace(scenario, time=time)
    samples = tuple((n - 1) * factor + 1 for n in scenario.grid_samples)
    return dataclasses.replace(scenario, grid_samples=samples)


@dataclass(frozen=True)
class RefinementTable:
    """Residuals per refinement level and the ratios between levels."""

    prefix: str
    diagnostics: tuple
    resolutions: tuple
    residuals: tuple  # tuple per level, aligned with diagnostics
    ratios: tuple     # tuple per transition; entries are float or "at floor"

    def format(self) -> str:
        lines = [f"refinement study for {self.prefix}"]
        header = ["resolution"] + list(self.diagnostics)
        lines.append("  " + " | ".join(header))
        for res, row in zip(self.resolutions, self.residuals):
            lines.append(
                "  " + " | ".join([_fmt(res)] + [_fmt(v) for v in row])
            )
        for k, row in enumerate(self.ratios):
            cells = [
                v if isinstance(v, str) else f"{v:.2f}" for v in row
            ]
            lines.append(
                f"  ratio level {k}->{k + 1}: " + " | ".join(cells)
            )
        return "\n".join(lines)


def refine(
    scenario: Scenario, levels: int, out_dir: str | Path = "."
) -> RefinementTable:
    """Re-run a scenario with the step/spacing halved per level."""
    if levels < 2:
        raise ValueError("refinement needs at least 2 levels")
    residuals = []
    resolutions = []
    for level in range(levels):
        refined = _refined(scenario, level)
        report = run(
            dataclasses.replace(refined, prefix=f"{scenario.prefix}_l{level}"),
            out_dir,
        )
        by_name = {r.name: r.residual for r in report.results}
        residuals.append(tuple(by_name[d] for d in scenario.diagnostics))
        if refined.time is not None:
            resolutions.append(refined.time["step"])
        else:
            resolutions.append(max(ParameterGrid(
                bounds=refined.grid_bounds, samples=refined.grid_samples
            ).spacing))
    ratios = []
    for k in range(levels - 1):
        row = []
        for coarse, fine in zip(residuals[k], residuals[k + 1]):
            if coarse < RESIDUAL_FLOOR or fine < RESIDUAL_FLOOR:
                row.append("at floor")
            else:
                row.append(coarse / fine)
        ratios.append(tuple(row))
    return RefinementTable(
        prefix=scenario.prefix,
        diagnostics=scenario.diagnostics,
        resolutions=tuple(resolutions),
        residuals=tuple(residuals),
        ratios=tuple(ratios),
    )


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="jetbalance",
        description="Run balance-law scenarios and diagnostics.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="run a scenario file")
    p_run.add_argument("scenario", type=Path)
    p_run.add_argument("--out", type=Path, default=Path("."))

    p_refine = sub.add_parser("refine", help="refinement study of a scenario")
    p_refine.add_argument("scenario", type=Path)
    p_refine.add_argument("--levels", type=int, default=3)
    p_refine.add_argument("--out", type=Path, default=Path("."))

    sub.add_parser("catalog", help="print the law catalog")

    args = parser.parse_args(argv)
    if args.verb == "catalog":
        print(catalog_text())
        return 0

    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        print("scenario validation failed:", file=sys.stderr)
        for err in exc.errors:
            print(f"  {err}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read scenario: {exc}", file=sys.stderr)
        return 2

    try:
        if args.verb == "run":
            report = run(scenario, args.out)
            print(report.format())
            return 0 if report.passed else 1
        table = refine(scenario, args.levels, args.out)
        print(table.format())
        return 0
    except ScenarioError as exc:
        print("scenario validation failed:", file=sys.stderr)
        for err in exc.errors:
            print(f"  {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
