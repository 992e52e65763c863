"""Flat key/value experiment configuration: one experiment per file, dotted
section keys, '#' comments.  Values are parsed as bool/int/float/str, comma
lists, or ``linspace:a:b:n`` grids.

Example::

    experiment.kind = green_retarded_scan
    model.J = 1.0
    model.Omega = 1.0
    model.Gamma = 0.0625
    model.beta = 100.0
    model.k = -0.5
    grid.t_prime = 0.0
    grid.t = linspace:0.5:19.5:39
    protocol.exact = true
    protocol.shots = 10000
    protocol.seed = 7
    protocol.trotter_dt = 0.0
    output.path = out/fig4
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

EXPERIMENT_KINDS = (
    "green_retarded_scan",
    "two_point",
    "three_point",
    "hadamard_compare",
    "keldysh_table",
    "convergence_study",
)


def _parse_value(raw: str):
    raw = raw.strip()
    if raw.lower() in ("true", "false"):
        return raw.lower() == "true"
    if raw.startswith("linspace:"):
        parts = raw.split(":")
        if len(parts) != 4:
            raise ValueError(f"bad linspace spec {raw!r}")
        a, b, n = float(parts[1]), float(parts[2]), int(parts[3])
        return [float(x) for x in np.linspace(a, b, n)]
    if "," in raw:
        return [_parse_value(tok) for tok in raw.split(",")]
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            pass
    return raw


def parse_config_text(text: str) -> dict:
    out: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, raw = line.split("=", 1)
        out[key.strip()] = _parse_value(raw)
    return out


def config_echo(cfg: dict) -> dict:
    """Canonical, JSON-round-trippable echo of a parsed config."""
    return {k: cfg[k] for k in sorted(cfg)}


def config_hash(cfg: dict) -> str:
    blob = json.dumps(config_echo(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


@dataclass
class ExperimentConfig:
    """Validated view over the flat key/value map."""

    raw: dict

    @property
    def kind(self) -> str:
        return self.raw.get("experiment.kind", "")

    def get(self, key: str, default=None):
        return self.raw.get(key, default)

    def times(self) -> list:
        t = self.raw.get("grid.t", [])
        if isinstance(t, (int, float)):
            t = [float(t)]
        return [float(x) for x in t]

    def echo(self) -> dict:
        return config_echo(self.raw)

    def hash(self) -> str:
        return config_hash(self.raw)


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return ExperimentConfig(parse_config_text(fh.read()))


def validate(cfg: ExperimentConfig) -> list:
    """All violations found in the config; empty list means valid."""
    diags = []
    kind = cfg.kind
    if kind not in EXPERIMENT_KINDS:
        diags.append(f"experiment.kind: {kind!r} not one of {EXPERIMENT_KINDS}")
        return diags

    if kind == "keldysh_table":
        n = cfg.get("keldysh.n", 3)
        if not isinstance(n, int) or n < 2:
            diags.append("keldysh.n: must be an integer >= 2")
        return diags

    for key, cond, msg in (
        ("model.J", lambda v: v > 0, "must be > 0"),
        ("model.Gamma", lambda v: v >= 0, "must be >= 0"),
        ("model.beta", lambda v: v > 0, "must be > 0"),
    ):
        v = cfg.get(key)
        if v is not None and not cond(float(v)):
            diags.append(f"{key}: {msg} (got {v})")

    exact = bool(cfg.get("protocol.exact", True))
    shots = cfg.get("protocol.shots", 0)
    if not exact:
        if not isinstance(shots, int) or shots < 1:
            diags.append("protocol.shots: must be >= 1 when protocol.exact is false")
        if cfg.get("protocol.seed") is None:
            diags.append("protocol.seed: required when sampling")

    if kind in ("green_retarded_scan", "hadamard_compare"):
        ts = cfg.times()
        if not ts:
            diags.append("grid.t: required")
        elif any(b <= a for a, b in zip(ts, ts[1:])):
            diags.append("grid.t: must be strictly increasing")
        tp = cfg.get("grid.t_prime", 0.0)
        if ts and ts[0] <= float(tp):
            diags.append("grid.t: first entry must exceed grid.t_prime")

    if kind == "two_point":
        if cfg.get("times.t2", 0.0) <= cfg.get("times.t1", 0.0):
            diags.append("times.t2: must exceed times.t1")
    if kind == "three_point":
        t1, t2, t3 = (cfg.get(f"times.t{i}", 0.0) for i in (1, 2, 3))
        if not (t1 < t2 < t3):
            diags.append("times.t1..t3: must be strictly increasing")

    if kind == "convergence_study":
        dts = cfg.get("trotter.dts", [])
        if isinstance(dts, (int, float)):
            dts = [dts]
        if not dts or any(float(d) <= 0 for d in dts):
            diags.append("trotter.dts: need a list of positive step sizes")

    return diags
