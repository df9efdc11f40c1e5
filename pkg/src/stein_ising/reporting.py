"""Shared verdict records, deterministic CSV output, and run manifests."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

__all__ = ["CheckRecord", "write_csv", "file_digest", "RunManifest"]


@dataclass
class CheckRecord:
    """One verified inequality or estimate: the unit of every report.

    ``margin`` is ``rhs - lhs`` (how much room the check passed with);
    ``passed`` is the verdict at the tolerance the caller applied.
    """

    check_name: str
    n: int
    beta: float
    lhs: float
    rhs: float
    passed: bool
    extra: dict = field(default_factory=dict)

    @property
    def margin(self):
        return self.rhs - self.lhs

    def to_dict(self):
        out = {
            "check_name": self.check_name,
            "n": self.n,
            "beta": self.beta,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "margin": self.margin,
            "pass": self.passed,
        }
        out.update(self.extra)
        return _json_safe(out)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _json_safe(value):
    """Recursively coerce numpy scalars/arrays so json.dumps accepts them."""
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, bool):
        return value
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        try:
            return _json_safe(value.item())
        except (AttributeError, ValueError):
            pass
    if hasattr(value, "tolist"):
        return _json_safe(value.tolist())
    return value


def _fmt(value):
    """Deterministic text form: shortest round-trip float representation."""
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, fieldnames, rows):
    """Write rows (dicts) with stable formatting so reruns are byte-identical."""
    with open(path, "w") as fh:
        fh.write(",".join(fieldnames) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row.get(name, "")) for name in fieldnames) + "\n")


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class RunManifest:
    """Provenance for one CLI run: inputs, master seed, output digests."""

    command: str
    master_seed: int | None
    config: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)  # path -> sha256
    started_at: str = ""
    finished_at: str = ""

    def record_output(self, path):
        self.outputs[os.path.basename(path)] = file_digest(path)

    def write(self, out_dir):
        self.finished_at = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        path = os.path.join(out_dir, "manifest.json")
        payload = dataclasses.asdict(self)
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path
