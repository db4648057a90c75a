"""Read model settings from the flat key/value parameter files.

A parameter file is TOML. Keys mirror the columns of the published
optimal-settings table::

    regularization_weight = 5e-4
    dropout = 0.5
    activation = "relu"          # H2GCN only
    discount_coefficient = 0.5   # MSI models only, together with the keys below
    t = 1000
    c_x = 0
    c_a1 = 1
    c_a2 = 1
    n = 1
    layers = 8                   # GCNII (also hidden, alpha, beta)

Keys may sit at top level (one file per model) or under a ``[model-name]``
table (one file per dataset, the layout of the bundled ``settings/`` files).
"""

from __future__ import annotations

import sys
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .models import ModelConfig, parse_model_name
from .structure import MsiConfig

DATASETS = ("texas", "wisconsin", "actor", "squirrel", "chameleon",
            "cornell", "cora", "citeseer", "pubmed")
CITATION = ("cora", "citeseer", "pubmed")
MSI_KEYS = ("discount_coefficient", "t", "c_x")


def bundled_params_path(dataset: str) -> Path:
    """Path of the shipped parameter file for ``dataset``."""
    ref = resources.files("msignn") / "settings" / f"{dataset.lower()}.toml"
    return Path(str(ref))


def resolve_params_path(path) -> Path:
    """Accept a real path, or ``settings/<dataset>.toml`` for a bundled file."""
    p = Path(path)
    if p.is_file():
        return p
    if p.parent.name == "settings":
        bundled = bundled_params_path(p.stem)
        if bundled.is_file():
            return bundled
    raise FileNotFoundError(f"parameter file not found: {path}")


def read_params(path, model: str) -> dict:
    with open(resolve_params_path(path), "rb") as fh:
        data = tomllib.load(fh)
    if model.lower() in data and isinstance(data[model.lower()], dict):
        return dict(data[model.lower()])
    sections = [k for k, v in data.items() if isinstance(v, dict)]
    if sections:
        raise KeyError(f"{path} has no section for {model!r} (has {sections})")
    return data


def config_from_params(model: str, params: dict, max_hop: int = 2) -> ModelConfig:
    """Turn one parameter table into a :class:`ModelConfig` for ``model``."""
    kind, layers, msi = parse_model_name(model)
    kw = {"kind": kind,
          "dropout": float(params.get("dropout", 0.5)),
          "weight_decay": float(params.get("regularization_weight", 5e-4)),
          "hidden": int(params.get("hidden", 64)),
          "activation": str(params.get("activation", "relu")).lower()}
    if kind == "h2gcn":
        kw["layers"] = layers
    elif kind == "gcnii":
        kw["layers"] = int(params.get("layers", 2))
        kw["alpha"] = float(params.get("alpha", 0.1))
        kw["beta"] = float(params.get("beta", 0.5))
    if msi:
        missing = [k for k in MSI_KEYS if k not in params]
        if missing:
            raise KeyError(f"MSI model {model!r} needs keys {missing}")
        kw["msi"] = MsiConfig(
            t=int(params["t"]), n=int(params.get("n", 1)),
            lam=float(params["discount_coefficient"]), c_x=int(params["c_x"]),
            c_a=tuple(int(params.get(f"c_a{i}", 0)) for i in range(1, max_hop + 1)))
    return ModelConfig(**kw)


def load_model_config(path, model: str) -> ModelConfig:
    return config_from_params(model, read_params(path, model))


def published_config(dataset: str, model: str) -> ModelConfig:
    return load_model_config(bundled_params_path(dataset), model)


def reported_accuracy(dataset: str, model: str) -> float:
    return float(read_params(bundled_params_path(dataset), model)["reported_accuracy"])
