"""Validated experiment configs and their translation into library objects."""

import json
from importlib import resources

import jsonschema

from .errors import ConfigError
from .groups import (
    CyclicGenerator,
    CyclicGroup,
    DirectProduct,
    FiniteIndexCosetTable,
    FreeAbelianGroup,
    FreeGroup,
    GroupHomomorphism,
    KernelOfHom,
    Trivial,
    Whole,
)
from .walks import StepDistribution, make_lazy

COMMANDS = ("walk-radius", "spectral-radius", "finrel", "percolate", "smallpieces", "mean-ergodic", "verify")


def load_schema(command):
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    text = resources.files("cospectral.schemas").joinpath(f"{command}.schema.json").read_text()
    return json.loads(text)


def validate(command, config):
    validator = jsonschema.Draft202012Validator(load_schema(command))
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {e.message}")
    return config


def load_config(command, path):
    try:
        with open(path) as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return validate(command, config)


def build_group(spec):
    family = spec["family"]
    if family == "free":
        return FreeGroup(spec["rank"])
    if family == "free_abelian":
        return FreeAbelianGroup(spec["dim"])
    if family == "cyclic":
        return CyclicGroup(spec["order"])
    return DirectProduct([build_group(f) for f in spec["factors"]])


def build_subgroup(group, spec):
    kind = (spec or {"kind": "trivial"})["kind"]
    if kind == "trivial":
        return Trivial(group)
    if kind == "whole":
        return Whole(group)
    if kind == "cyclic":
        return CyclicGenerator(group, spec["generator"])
    if kind == "kernel":
        target = build_group(spec["target"])
        return KernelOfHom(GroupHomomorphism(group, target, tuple(tuple(w) for w in spec["images"])))
    return FiniteIndexCosetTable(group, spec["table"])


def build_nu(group, spec, lazy=False):
    """Step distribution from config; symmetry is required before any walk runs."""
    if spec is None or spec["kind"] == "uniform":
        nu = StepDistribution.uniform(group)
    else:
        nu = StepDistribution(group, [(tuple(a["word"]), a["prob"]) for a in spec["atoms"]])
    nu.require_symmetric()
    return make_lazy(nu) if lazy else nu
