"""Shipped fixture specs: the COVID quantity-extraction pipeline plus the
appendix use cases (DROP, MATRES, TORQUE, VQA-E, acceptability) and two
adversarial-but-valid documents used to stress the parser."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

TASK_SET_FIXTURES = (
    "covid_taskset",
    "drop_taskset",
    "matres_taskset",
    "torque_taskset",
    "vqae_taskset",
    "acceptability_taskset",
    "adversarial_unknown_fields",
    "adversarial_deep_conditions",
)


def fixture_path(name: str) -> Path:
    """Filesystem path of a fixture (names may omit the extension)."""
    if "." not in name:
        name += ".json"
    path = Path(str(resources.files(__package__) / name))
    if not path.exists():
        raise FileNotFoundError(f"no fixture named {name!r}")
    return path


def load_text(name: str) -> str:
    return fixture_path(name).read_text(encoding="utf-8")


def load_json(name: str) -> dict:
    return json.loads(load_text(name))
