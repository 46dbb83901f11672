"""Shared helpers for the experiment scripts."""

from pathlib import Path

from parfit.config import build_model, load_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def model(name: str, **values):
    """Build a config's model, overriding initial parameter values."""
    m = build_model(load_config(CONFIGS / f"{name}.yaml"))
    for k, v in values.items():
        m.parameters[k].value = v
    return m
