"""INI configuration: schema, parsing, canonical form and shipped presets.

Every key a file may contain is listed in ``SCHEMA``; anything else is a
hard error so that a misspelt rule name or key never falls back silently to
a default.  ``docs/config-schema.ini`` is the human-readable copy of the
schema and is kept in sync by a test.
"""
from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass
from importlib import resources
from typing import Optional

from .errors import ConfigError
from .models import parse_model
from .regularization import (IndexFunction, RULES, SourceCondition, general, log_source,
                             logarithmic, poly, polynomial, sqrt_log_exp)
from .risk import ExperimentConfig

QUANTITIES = ("hs_risk", "mise_y", "m_frontier")


def _float(text):
    try:
        v = float(text)
    except ValueError:
        raise ConfigError(f"not a real number: {text!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"not a finite number: {text!r}")
    return v


def _int(text):
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"not an integer: {text!r}") from None


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _list(conv):
    def parse(text):
        items = [p.strip() for p in text.split(",") if p.strip()]
        if not items:
            raise ConfigError("empty list")
        return tuple(conv(p) for p in items)
    return parse


def _m_schedule(text):
    if text.strip() == "known":
        return None
    return _list(_int)(text)


def _choice(*options):
    def parse(text):
        t = text.strip()
        if t not in options:
            raise ConfigError(f"{t!r} is not one of {', '.join(options)}")
        return t
    return parse


def _model(text):
    try:
        parse_model(text)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return text.strip()


_KAPPA = {"polynomial": polynomial, "logarithmic": logarithmic, "sqrt_log_exp": sqrt_log_exp}


def parse_kappa(text: str) -> IndexFunction:
    """``polynomial:beta=1`` and friends."""
    name, _, rest = text.strip().partition(":")
    if name not in _KAPPA:
        raise ConfigError(f"unknown index function {name!r}; known: {', '.join(_KAPPA)}")
    key, _, val = rest.partition("=")
    if key.strip() != "beta":
        raise ConfigError(f"index function {name!r} takes exactly one parameter, beta")
    try:
        return _KAPPA[name](_float(val))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _kappa(text):
    parse_kappa(text)
    return text.strip()


# section -> key -> (parser, default, description); default None means optional
SCHEMA = {
    "experiment": {
        "x": (_model, None, "signal density, catalog spec such as sym_chi2:k=3"),
        "eps": (_model, None, "error density, catalog spec such as laplace:b=1"),
        "quantity": (_choice(*QUANTITIES), "hs_risk", "hs_risk | mise_y | m_frontier"),
        "kernel": (_choice("sinc", "gaussian", "quartic"), "sinc", "kernel of the density estimate of Y"),
        "kernel_order": (_float, "2", "order r in the bandwidth rule h = c n^(-1/(2r+1))"),
        "bandwidth_c": (_float, "1", "constant c of the bandwidth rule"),
        "s": (_float, "0", "Sobolev index of the risk"),
        "n_schedule": (_list(_int), None, "comma-separated increasing sample sizes"),
        "m_schedule": (_m_schedule, "known", "'known' or comma-separated increasing error-sample sizes"),
        "replicates": (_int, "200", "Monte Carlo replicates per cell"),
        "seed": (_int, "0", "64-bit seed; overridden by --seed"),
        "delta_mode": (_choice("mc", "theory"), "mc", "MISE_Y proxy: Monte Carlo pilot or n^(-2r/(2r+1))"),
        "pilot_replicates": (_int, "100", "replicates of the Monte Carlo MISE_Y pilot"),
        "oracle_y": (_bool, "false", "use the exact spectrum of f_Y (removes the n-term)"),
        "fit_model": (_choice("power", "log_power"), "power", "rate model for the fit"),
        "fit_axis": (_choice("n", "m"), "n", "schedule the rate is fitted against"),
    },
    "rule": {
        "id": (_choice(*RULES), None, "threshold rule id"),
        "c": (_float, "1", "rule constant"),
        "beta": (_float, None, "source-condition exponent"),
        "p": (_float, None, "Sobolev smoothness of f_X"),
        "a": (_float, None, "degree of ill-posedness of f_eps"),
        "kappa": (_kappa, None, "index function, e.g. logarithmic:beta=1"),
    },
    "grid": {
        "t_max": (_float, "64", "half-width T of the frequency grid"),
        "n_points": (_int, "8193", "odd node count"),
    },
    "audit": {
        "source": (_choice("poly", "log", "general"), "poly", "source-condition kind of the bias audit"),
        "alpha_min": (_float, "1e-4", "smallest alpha of the bias sweep"),
        "alpha_max": (_float, "1e-1", "largest alpha of the bias sweep"),
        "alpha_points": (_int, "12", "log-spaced alpha count"),
        "moment_m": (_list(_int), "100, 1000, 10000", "error-sample sizes of the moment audit"),
        "moment_gammas": (_list(_float), "0.5, 1, 2", "moment orders gamma"),
        "moment_replicates": (_int, "1000", "replicates of the moment audit"),
        "diag_kappa": (_kappa, "polynomial:beta=1", "index function of the lower-bound diagnostic"),
        "diag_m": (_list(_int), "100, 10000", "m values of the lower-bound diagnostic"),
    },
    "estimate": {
        "x_min": (_float, "-5", "left end of the reconstruction grid"),
        "x_max": (_float, "5", "right end of the reconstruction grid"),
        "x_points": (_int, "201", "reconstruction grid size"),
    },
}


@dataclass
class Config:
    values: dict          # section -> key -> parsed value
    raw: dict             # section -> key -> canonical text

    def get(self, section, key):
        return self.values[section][key]

    def with_seed(self, seed: int) -> "Config":
        raw = {s: dict(kv) for s, kv in self.raw.items()}
        raw["experiment"]["seed"] = str(int(seed))
        return _build(raw)

    def canonical_text(self) -> str:
        lines = []
        for section in SCHEMA:
            lines.append(f"[{section}]")
            for key in SCHEMA[section]:
                if key in self.raw[section]:
                    lines.append(f"{key} = {self.raw[section][key]}")
        return "\n".join(lines) + "\n"

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()[:16]

    def kappa(self) -> Optional[IndexFunction]:
        k = self.values["rule"]["kappa"]
        return None if k is None else parse_kappa(k)

    def experiment(self) -> ExperimentConfig:
        e, r, g = self.values["experiment"], self.values["rule"], self.values["grid"]
        for key in ("x", "eps", "n_schedule"):
            if e[key] is None:
                raise ConfigError(f"[experiment] {key} is required")
        if r["id"] is None:
            raise ConfigError("[rule] id is required")
        return ExperimentConfig(
            x=e["x"], eps=e["eps"], kernel=e["kernel"], kernel_order=e["kernel_order"],
            bandwidth_c=e["bandwidth_c"], s=e["s"], rule=r["id"], c=r["c"], beta=r["beta"],
            p=r["p"], a=r["a"], kappa=self.kappa(), n_schedule=e["n_schedule"],
            m_schedule=e["m_schedule"], replicates=e["replicates"], seed=e["seed"],
            t_max=g["t_max"], n_points=g["n_points"], delta_mode=e["delta_mode"],
            pilot_replicates=e["pilot_replicates"], oracle_y=e["oracle_y"],
            fit_model=e["fit_model"], fit_axis=e["fit_axis"])

    def source_condition(self) -> SourceCondition:
        kind = self.values["audit"]["source"]
        beta = self.values["rule"]["beta"]
        if kind == "general":
            k = self.kappa()
            if k is None:
                raise ConfigError("general source audit needs [rule] kappa")
            return general(k)
        if beta is None:
            raise ConfigError(f"{kind} source audit needs [rule] beta")
        return poly(beta) if kind == "poly" else log_source(beta)


def _canon(parser, text):
    v = parser(text)
    if isinstance(v, tuple):
        return ", ".join(repr(x) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return "known"
    return str(v)


def _build(raw: dict) -> Config:
    values, canon = {}, {}
    for section, keys in SCHEMA.items():
        values[section], canon[section] = {}, {}
        given = raw.get(section, {})
        for key, (parser, default, _) in keys.items():
            text = given.get(key, default)
            if text is None:
                values[section][key] = None
                continue
            try:
                values[section][key] = parser(text)
                canon[section][key] = _canon(parser, text)
            except ConfigError as exc:
                raise ConfigError(f"[{section}] {key}: {exc}") from None
    return Config(values, canon)


def parse_config(text: str, source: str = "<config>") -> Config:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    raw = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key, val in cp.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"{source}: unknown key {key!r} in [{section}]")
        raw[section] = dict(cp.items(section))
    return _build(raw)


def load_config(path) -> Config:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def preset_names() -> list:
    root = resources.files("specdeconv") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def load_preset(name: str) -> Config:
    root = resources.files("specdeconv") / "presets"
    res = root / f"{name}.ini"
    if not res.is_file():
        raise ConfigError(f"unknown preset {name!r}; known: {', '.join(preset_names())}")
    return parse_config(res.read_text(encoding="utf-8"), f"preset {name}")


def schema_text() -> str:
    """The documented schema, every key commented with its default."""
    lines = ["# specdeconv configuration schema. Unknown sections and keys are errors.", ""]
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]")
        for key, (_, default, doc) in keys.items():
            lines.append(f"# {doc}")
            lines.append(f"{key} = {default}" if default is not None else f"# {key} =  (no default)")
        lines.append("")
    return "\n".join(lines)
