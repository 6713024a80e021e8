"""Scenario files: TOML documents turned into :class:`~chemolab.scenario.Scenario`.

Layout (all numbers are plain TOML decimals)::

    name = "thm1-decay"

    [model]
    variant = "parabolic-parabolic"     # or "parabolic-hyperbolic" / "pp" / "ph"
    gamma = 1.0
    domain = [0.0, 1.0]                 # optional

    [boundary.alpha1]                   # also alpha2, beta1, beta2
    family = "one-plus-exp-decay"       # see SIGNAL_FAMILIES
    c = 0.5
    rate = 1.0

    [initial.u]                         # also initial.v
    family = "profile-plus-sine"        # see INITIAL_FAMILIES
    amplitude = 0.05

    [numerics]
    dt = 1e-3
    t_end = 30.0
    n = 201

    [diagnostics]                       # optional
    cadence = 100

    [source]                            # optional
    family = "manufactured"

    [output]                            # optional
    dir = "runs/thm1-decay"

Tables named ``table`` take a ``csv`` key, resolved relative to the file.
"""
from __future__ import annotations

import copy
import os
from pathlib import Path

import tomli

from ..errors import ChemolabError, ConfigError
from ..model import ModelParams
from ..profiles import (
    BoundaryData,
    Constant,
    DampedOscillation,
    ExpDecay,
    OnePlusAlgebraicDecay,
    OnePlusExpDecay,
    Tabulated,
)
from ..scenario import (
    AffineInitial,
    ConstantInitial,
    DiagnosticsSettings,
    ManufacturedInitial,
    ManufacturedSource,
    NumericsConfig,
    ProfilePlusSine,
    Scenario,
    TabulatedInitial,
)

SCENARIO_DIR = Path(__file__).parent / "scenarios"
OUTPUT_ROOT_ENV = "CHEMOLAB_OUTPUT_ROOT"

SIGNAL_FAMILIES = {
    "constant": (Constant, {"c"}, set()),
    "one-plus-exp-decay": (OnePlusExpDecay, {"c"}, {"rate"}),
    "exp-decay": (ExpDecay, {"c"}, {"rate"}),
    "damped-oscillation": (DampedOscillation, {"c"}, {"rate", "omega", "offset"}),
    "one-plus-algebraic-decay": (OnePlusAlgebraicDecay, {"c"}, {"power"}),
}

INITIAL_FAMILIES = {
    "constant": (ConstantInitial, {"value"}, set()),
    "affine": (AffineInitial, {"left", "right"}, set()),
    "profile-plus-sine": (ProfilePlusSine, {"amplitude"}, {"mode", "offset"}),
}

NUMERICS_KEYS = {"dt", "t_end", "n", "cfl_safety", "scheme", "positivity_floor",
                 "hyperbolic_flux", "v_damping"}
DIAGNOSTICS_KEYS = {"cadence", "threshold_fraction", "compat_tol", "bound_oversampling"}


def bundled(name):
    """Path of a bundled scenario file, by scenario name."""
    path = SCENARIO_DIR / f"{name}.toml"
    if not path.exists():
        known = ", ".join(sorted(p.stem for p in SCENARIO_DIR.glob("*.toml")))
        raise ConfigError(f"no bundled scenario '{name}' (known: {known})")
    return path


def bundled_names():
    return sorted(p.stem for p in SCENARIO_DIR.glob("*.toml"))


def resolve(ref):
    """Accept a file path or the name of a bundled scenario."""
    p = Path(ref)
    if p.exists():
        return p
    return bundled(str(ref))


def read_document(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path=path) from exc
    try:
        return tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(f"syntax error: {exc}", path=path, line=line) from exc


def _table(doc, key, where, path, required=True):
    if key not in doc:
        if required:
            raise ConfigError("missing required table", field=f"{where}{key}", path=path)
        return None
    val = doc[key]
    if not isinstance(val, dict):
        raise ConfigError("expected a table", field=f"{where}{key}", path=path)
    return val


def _number(tab, key, field, path, required=True, default=None):
    if key not in tab:
        if required:
            raise ConfigError("missing required field", field=field, path=path)
        return default
    val = tab[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"expected a number, got {val!r}", field=field, path=path)
    return float(val)


def _check_keys(tab, allowed, where, path):
    extra = sorted(set(tab) - set(allowed))
    if extra:
        raise ConfigError(f"unknown key(s) {extra}", field=f"{where}{extra[0]}", path=path)


def _csv_path(tab, field, base):
    if "csv" not in tab:
        raise ConfigError("table family needs a 'csv' key", field=field, path=base)
    p = Path(tab["csv"])
    return p if p.is_absolute() else Path(base).parent / p


def _family(tab, families, field, path, extra_builders):
    if "family" not in tab:
        raise ConfigError("missing required field", field=f"{field}.family", path=path)
    fam = str(tab["family"])
    if fam in extra_builders:
        return extra_builders[fam](tab)
    if fam not in families:
        raise ConfigError(f"unknown family '{fam}' (known: {sorted(families) + sorted(extra_builders)})",
                          field=f"{field}.family", path=path)
    cls, required, optional = families[fam]
    _check_keys(tab, {"family"} | required | optional, f"{field}.", path)
    kwargs = {}
    for key in sorted(required | optional):
        val = _number(tab, key, f"{field}.{key}", path, required=key in required)
        if val is not None:
            kwargs[key] = int(val) if key == "mode" else val
    return cls(**kwargs)


def _signal(tab, field, path):
    def table(t):
        try:
            return Tabulated.from_csv(_csv_path(t, field, path))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load table: {exc}", field=f"{field}.csv", path=path) from exc
    return _family(tab, SIGNAL_FAMILIES, field, path, {"table": table})


def _initial(tab, field, component, path):
    def table(t):
        try:
            return TabulatedInitial.from_csv(_csv_path(t, field, path))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load table: {exc}", field=f"{field}.csv", path=path) from exc
    extra = {"table": table, "manufactured": lambda t: ManufacturedInitial(component)}
    return _family(tab, INITIAL_FAMILIES, field, path, extra)


def scenario_from_dict(doc, path="<memory>"):
    """Build a Scenario from a parsed document; errors name the offending field."""
    _check_keys(doc, {"name", "model", "boundary", "initial", "numerics", "diagnostics",
                      "source", "output"}, "", path)
    name = str(doc.get("name", Path(str(path)).stem))

    model_tab = _table(doc, "model", "", path)
    _check_keys(model_tab, {"variant", "gamma", "domain"}, "model.", path)
    if "variant" not in model_tab:
        raise ConfigError("missing required field", field="model.variant", path=path)
    gamma = _number(model_tab, "gamma", "model.gamma", path)
    domain = model_tab.get("domain", [0.0, 1.0])
    if not (isinstance(domain, list) and len(domain) == 2):
        raise ConfigError("domain must be a two-element array", field="model.domain", path=path)
    try:
        model = ModelParams(str(model_tab["variant"]), gamma, tuple(float(x) for x in domain))
    except (ChemolabError, ValueError) as exc:
        raise ConfigError(str(exc), field="model", path=path) from exc

    bd_tab = _table(doc, "boundary", "", path)
    _check_keys(bd_tab, {"alpha1", "alpha2", "beta1", "beta2"}, "boundary.", path)
    signals = {}
    for key in ("alpha1", "alpha2", "beta1", "beta2"):
        tab = _table(bd_tab, key, "boundary.", path, required=key.startswith("alpha"))
        if tab is not None:
            signals[key] = _signal(tab, f"boundary.{key}", path)
    if ("beta1" in signals) != ("beta2" in signals):
        missing = "beta2" if "beta1" in signals else "beta1"
        raise ConfigError("beta signals must come in pairs", field=f"boundary.{missing}", path=path)
    if not model.hyperbolic and "beta1" not in signals:
        raise ConfigError("the parabolic-parabolic system needs beta1 and beta2",
                          field="boundary.beta1", path=path)
    boundary = BoundaryData(**signals)

    init_tab = _table(doc, "initial", "", path)
    _check_keys(init_tab, {"u", "v"}, "initial.", path)
    initial_u = _initial(_table(init_tab, "u", "initial.", path), "initial.u", "u", path)
    initial_v = _initial(_table(init_tab, "v", "initial.", path), "initial.v", "v", path)

    num_tab = _table(doc, "numerics", "", path)
    _check_keys(num_tab, NUMERICS_KEYS, "numerics.", path)
    kw = {}
    for key in ("dt", "t_end"):
        kw[key] = _number(num_tab, key, f"numerics.{key}", path)
    for key in ("n", "cfl_safety", "positivity_floor", "v_damping"):
        val = _number(num_tab, key, f"numerics.{key}", path, required=False)
        if val is not None:
            kw[key] = int(val) if key == "n" else val
    for key in ("scheme", "hyperbolic_flux"):
        if key in num_tab:
            kw[key] = str(num_tab[key])
    try:
        numerics = NumericsConfig(**kw)
    except (ChemolabError, ValueError) as exc:
        raise ConfigError(str(exc), field="numerics", path=path) from exc

    diag_tab = _table(doc, "diagnostics", "", path, required=False) or {}
    _check_keys(diag_tab, DIAGNOSTICS_KEYS, "diagnostics.", path)
    dkw = {}
    for key in sorted(DIAGNOSTICS_KEYS):
        val = _number(diag_tab, key, f"diagnostics.{key}", path, required=False)
        if val is not None:
            dkw[key] = int(val) if key in ("cadence", "bound_oversampling") else val
    try:
        diag = DiagnosticsSettings(**dkw)
    except (ChemolabError, ValueError) as exc:
        raise ConfigError(str(exc), field="diagnostics", path=path) from exc

    source = None
    src_tab = _table(doc, "source", "", path, required=False)
    if src_tab is not None:
        _check_keys(src_tab, {"family"}, "source.", path)
        if src_tab.get("family") != "manufactured":
            raise ConfigError("only the 'manufactured' source family exists",
                              field="source.family", path=path)
        source = ManufacturedSource(model.variant, model.gamma)

    out_tab = _table(doc, "output", "", path, required=False) or {}
    _check_keys(out_tab, {"dir"}, "output.", path)
    output_dir = out_tab.get("dir")

    return Scenario(name=name, model=model, boundary=boundary, initial_u=initial_u,
                    initial_v=initial_v, numerics=numerics, diagnostics=diag,
                    source=source, output_dir=output_dir)


def load_scenario(ref):
    """Load a scenario from a file path or a bundled scenario name."""
    path = resolve(ref)
    return scenario_from_dict(read_document(path), path)


def set_path(doc, dotted, value):
    """Copy of ``doc`` with the numeric field at ``dotted`` replaced."""
    out = copy.deepcopy(doc)
    node = out
    keys = dotted.split(".")
    for key in keys[:-1]:
        if not isinstance(node.get(key), dict):
            raise ConfigError("sweep path does not address a table", field=dotted)
        node = node[key]
    old = node.get(keys[-1])
    if isinstance(old, bool) or not isinstance(old, (int, float)):
        raise ConfigError("sweep path must address an existing numeric field", field=dotted)
    node[keys[-1]] = int(value) if isinstance(old, int) and float(value).is_integer() else float(value)
    return out


def output_root(default="runs"):
    return Path(os.environ.get(OUTPUT_ROOT_ENV, default))


def output_dir_for(scenario, root=None):
    """Directory for a run's artifacts under the output root."""
    root = output_root() if root is None else Path(root)
    sub = scenario.output_dir or scenario.name
    sub = Path(sub)
    return sub if sub.is_absolute() else root / sub
