"""Plot-job descriptions and result-file loading.

A job file uses the same flat key/value syntax as the simulator configs::

    job.kind = green_panels          # green_panels | scaling | convergence
    job.inputs = out/fig4.csv        # comma-separated CSV paths
    job.output = out/fig4_panels     # writes .png and .svg
    style.title = retarded Green's function
    style.timestamp_footer = false

Every input CSV must sit next to its JSON sidecar; inputs combined into one
figure must agree on their header convention flags.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

KINDS = ("green_panels", "scaling", "convergence")

NUMERIC = ("t", "t_prime", "estimate_re", "estimate_im", "stderr_re",
           "stderr_im", "analytic_re", "analytic_im", "shots")


@dataclass(frozen=True)
class PlotJob:
    kind: str
    inputs: tuple
    output: str
    style: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"job.kind must be one of {KINDS}, got {self.kind!r}")
        if not self.inputs:
            raise ValueError("job.inputs must list at least one CSV file")


def _parse_value(raw: str):
    raw = raw.strip()
    if raw.lower() in ("true", "false"):
        return raw.lower() == "true"
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            pass
    return raw


def load_job(path: str) -> PlotJob:
    keys: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = line.split("=", 1)
            keys[key.strip()] = raw.strip()
    inputs = tuple(tok.strip() for tok in keys.get("job.inputs", "").split(",")
                   if tok.strip())
    style = {k.split(".", 1)[1]: _parse_value(v)
             for k, v in keys.items() if k.startswith("style.")}
    return PlotJob(kind=keys.get("job.kind", ""), inputs=inputs,
                   output=keys.get("job.output", "figure"), style=style)


def _to_float(raw: str) -> float:
    raw = (raw or "").strip()
    return float(raw) if raw else math.nan


def read_result(csv_path: str):
    """Rows (numeric fields parsed, blanks -> NaN) and the JSON header."""
    rows = []
    with open(csv_path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            row = {k: _to_float(v) if k in NUMERIC else v for k, v in rec.items()}
            rows.append(row)
    header_path = os.path.splitext(csv_path)[0] + ".json"
    with open(header_path, "r", encoding="utf-8") as fh:
        header = json.load(fh)
    return rows, header


def load_inputs(job: PlotJob):
    """All rows across inputs; refuses mixed convention flags."""
    all_rows = []
    headers = []
    for path in job.inputs:
        rows, header = read_result(path)
        all_rows.extend(rows)
        headers.append((path, header))
    ref_path, ref = headers[0]
    ref_flags = (ref.get("convention_flags"), ref.get("coefficient_resolution"))
    for path, header in headers[1:]:
        flags = (header.get("convention_flags"), header.get("coefficient_resolution"))
        if flags != ref_flags:
            raise ValueError(
                f"convention flags of {path} disagree with {ref_path}; "
                "refusing to combine into one figure")
    return all_rows, ref
