"""Experiment runner: parses a config file, dispatches the protocol and
oracle computations, and writes one CSV of rows plus one JSON header sidecar.

The CSV is RFC-4180 (CRLF, '.' decimals, minimal quoting) with the fixed
column set

    t, t_prime, estimate_re, estimate_im, stderr_re, stderr_im,
    analytic_re, analytic_im, shots, method, config_hash

and the sidecar carries the full config echo, software version, convention
flags, and the (single) timestamp, so re-running the same config and seed
reproduces the CSV byte-identically.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import itertools
import json
import os
import sys

import numpy as np

from . import CONVENTION_FLAGS, __version__
from .config import ExperimentConfig, load_config, validate
from .estimators import (
    estimate_signed,
    estimate_three_point,
    estimate_two_point,
    three_point_aux_exact,
    three_point_aux_sampled,
    two_point_aux_exact,
    two_point_aux_sampled,
)
from .fermion import (
    ModelParams,
    green_retarded,
    green_retarded_via_protocol,
    initial_state,
    integrated_channel_factory,
    integrated_kraus,
    trotter_channel_factory,
)
from .keldysh import accessible_permutations, expand, missing_permutations, NestedBracket
from .protocol import (
    AncillaNoise,
    ProtocolSpec,
    hadamard_corr,
    run_robust_exact,
    run_robust_sampled,
)
from .qmat import pauli_operator

COLUMNS = ("t", "t_prime", "estimate_re", "estimate_im", "stderr_re", "stderr_im",
           "analytic_re", "analytic_im", "shots", "method", "config_hash")

OUTPUT_ENV = "RESETCORR_OUT"


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def _model(cfg: ExperimentConfig) -> ModelParams:
    return ModelParams(
        J=float(cfg.get("model.J", 1.0)),
        Omega=float(cfg.get("model.Omega", 1.0)),
        Gamma=float(cfg.get("model.Gamma", 1.0 / 16.0)),
        beta=float(cfg.get("model.beta", 100.0)),
        k=float(cfg.get("model.k", -0.5)),
    )


def _row(t, t_prime, est, analytic, shots, method, h):
    return {
        "t": t, "t_prime": t_prime,
        "estimate_re": float(np.real(est)), "estimate_im": float(np.imag(est)),
        "stderr_re": 0.0, "stderr_im": 0.0,
        "analytic_re": float(np.real(analytic)),
        "analytic_im": float(np.imag(analytic)),
        "shots": shots, "method": method, "config_hash": h,
    }


def _row_from_estimate(t, t_prime, est, analytic, h):
    row = _row(t, t_prime, est.value, analytic, est.shots_used, est.method, h)
    row["stderr_re"] = est.stderr_re
    row["stderr_im"] = est.stderr_im
    return row


def _spec_for_pair(cfg, model, names, times, alpha):
    exact = bool(cfg.get("protocol.exact", True))
    trotter_dt = float(cfg.get("protocol.trotter_dt", 0.0))
    if trotter_dt > 0:
        factory = trotter_channel_factory(model, trotter_dt)
    else:
        factory = integrated_channel_factory(model)
    n_cfg = cfg.get("state.n")
    rho0 = initial_state(model, None if n_cfg is None else float(n_cfg), times[0])
    return ProtocolSpec(times=tuple(times),
                        ops=tuple(pauli_operator(nm) for nm in names),
                        alpha=tuple(alpha), channel_factory=factory,
                        initial_state=rho0), exact


def _direct_two_point(spec: ProtocolSpec, alpha: int) -> complex:
    """Direct-trace reference: i^a * (i^a Tr[O2 V(O1 rho)] + h.c.)."""
    ch = spec.channel_factory(*spec.times)
    o1, o2 = (op.mat for op in spec.ops)
    t = complex(np.trace(o2 @ ch.apply_mat(o1 @ spec.initial_state.mat)))
    c = (1j**alpha) * t + np.conj((1j**alpha) * t)
    return (1j**alpha) * c


def _direct_three_point(spec: ProtocolSpec, alpha) -> complex:
    a1, a2 = alpha
    v21 = spec.channel_factory(spec.times[0], spec.times[1])
    v32 = spec.channel_factory(spec.times[1], spec.times[2])
    o1, o2, o3 = (op.mat for op in spec.ops)
    rho = spec.initial_state.mat
    t_a = complex(np.trace(o3 @ v32.apply_mat(o2 @ v21.apply_mat(o1 @ rho))))
    t_b = complex(np.trace(o3 @ v32.apply_mat(o2 @ v21.apply_mat(rho @ o1))))
    c = (1j**(a2 + a1)) * t_a + (1j**(a2 - a1)) * t_b
    c = c + np.conj(c)
    return (1j**(a1 + a2)) * c


def run_green_scan(cfg: ExperimentConfig) -> list:
    model = _model(cfg)
    h = cfg.hash()
    t_prime = float(cfg.get("grid.t_prime", 0.0))
    exact = bool(cfg.get("protocol.exact", True))
    shots = None if exact else int(cfg.get("protocol.shots", 10000))
    seed = int(cfg.get("protocol.seed", 0))
    trotter_dt = float(cfg.get("protocol.trotter_dt", 0.0))
    channel = "trotter" if trotter_dt > 0 else "integrated"
    n_cfg = cfg.get("state.n")
    n_ref = None if n_cfg is None else float(n_cfg)
    rows = []
    for i, t in enumerate(cfg.times()):
        est = green_retarded_via_protocol(
            model, t, t_prime, n_ref=n_ref, channel=channel, dt=trotter_dt or 0.05,
            shots=shots, seed=seed + 10 * i)
        analytic = green_retarded(model, t, t_prime)
        rows.append(_row_from_estimate(t, t_prime, est, analytic, h))
    return rows


def run_two_point(cfg: ExperimentConfig) -> list:
    model = _model(cfg)
    h = cfg.hash()
    t1, t2 = float(cfg.get("times.t1", 0.0)), float(cfg.get("times.t2", 1.0))
    alpha = int(cfg.get("protocol.alpha", 0))
    names = (str(cfg.get("ops.o1", "X")), str(cfg.get("ops.o2", "X")))
    spec, exact = _spec_for_pair(cfg, model, names, (t1, t2), (alpha,))
    analytic = _direct_two_point(spec, alpha)
    if exact:
        est = estimate_two_point(run_robust_exact(spec), two_point_aux_exact(spec), alpha)
    else:
        shots = int(cfg.get("protocol.shots", 10000))
        seed = int(cfg.get("protocol.seed", 0))
        records = run_robust_sampled(spec, shots, seed)
        if str(cfg.get("protocol.method", "conditional")) == "signed":
            est = estimate_signed(records, (alpha,))
        else:
            aux = two_point_aux_sampled(spec, shots, seed)
            est = estimate_two_point(records, aux, alpha)
    return [_row_from_estimate(t2, t1, est, analytic, h)]


def run_three_point(cfg: ExperimentConfig) -> list:
    model = _model(cfg)
    h = cfg.hash()
    times = tuple(float(cfg.get(f"times.t{i}", float(i))) for i in (1, 2, 3))
    alpha = cfg.get("protocol.alpha", [0, 0])
    alpha = tuple(int(a) for a in (alpha if isinstance(alpha, list) else [alpha, 0]))
    names = tuple(str(cfg.get(f"ops.o{i}", "X")) for i in (1, 2, 3))
    spec, exact = _spec_for_pair(cfg, model, names, times, alpha)
    analytic = _direct_three_point(spec, alpha)
    if exact:
        est = estimate_three_point(run_robust_exact(spec),
                                   three_point_aux_exact(spec), alpha)
    else:
        shots = int(cfg.get("protocol.shots", 10000))
        seed = int(cfg.get("protocol.seed", 0))
        records = run_robust_sampled(spec, shots, seed)
        if str(cfg.get("protocol.method", "conditional")) == "signed":
            est = estimate_signed(records, alpha)
        else:
            aux = three_point_aux_sampled(spec, shots, seed)
            est = estimate_three_point(records, aux, alpha)
    return [_row_from_estimate(times[2], times[0], est, analytic, h)]


def run_hadamard_compare(cfg: ExperimentConfig) -> list:
    model = _model(cfg)
    h = cfg.hash()
    t_prime = float(cfg.get("grid.t_prime", 0.0))
    gamma_a = float(cfg.get("noise.gamma_a", 0.0))
    names = (str(cfg.get("ops.o1", "X")), str(cfg.get("ops.o2", "X")))
    noise = AncillaNoise(gamma_a)
    rows = []
    for t in cfg.times():
        spec, _ = _spec_for_pair(cfg, model, names, (t_prime, t), (0,))
        true_c = complex(np.trace(
            spec.ops[1].mat @ spec.channel_factory(t_prime, t).apply_mat(
                spec.ops[0].mat @ spec.initial_state.mat)))
        had = hadamard_corr(spec, noise)
        rows.append(_row(t, t_prime, had, true_c, 0, "hadamard", h))
        # reset protocol: complex C from the two bracket settings
        anti = estimate_signed(run_robust_exact(spec, noise), (0,)).value
        spec1 = ProtocolSpec(times=spec.times, ops=spec.ops, alpha=(1,),
                             channel_factory=spec.channel_factory,
                             initial_state=spec.initial_state)
        comm = estimate_signed(run_robust_exact(spec1, noise), (1,)).value
        robust_c = (anti - comm) / 2.0
        rows.append(_row(t, t_prime, robust_c, true_c, 0, "robust", h))
    return rows


def run_convergence(cfg: ExperimentConfig) -> list:
    model = _model(cfg)
    h = cfg.hash()
    t_prime = float(cfg.get("grid.t_prime", 0.0))
    ts = cfg.times() or [float(x) for x in np.linspace(t_prime + 0.5, t_prime + 10.0, 20)]
    dts = cfg.get("trotter.dts", [0.1, 0.05, 0.025])
    if isinstance(dts, (int, float)):
        dts = [dts]
    rows = []
    for dt in dts:
        errs = []
        for t in ts:
            est = green_retarded_via_protocol(model, t, t_prime, channel="trotter",
                                              dt=float(dt))
            errs.append(abs(est.value - green_retarded(model, t, t_prime)))
        rows.append(_row(float(dt), t_prime, max(errs), 0.0, 0, "trotter_error", h))
    return rows


def run_keldysh_table(cfg: ExperimentConfig):
    n = int(cfg.get("keldysh.n", 3))
    acc = sorted(accessible_permutations(n))
    miss = sorted(missing_permutations(n))
    lines = [f"n = {n}: {len(acc)} accessible orderings, {len(miss)} missing"]
    lines.append("accessible:")
    lines += [f"  < {' '.join('O%d' % i for i in p)} >" for p in acc]
    lines.append("missing (multi-branch contour):")
    lines += [f"  < {' '.join('O%d' % i for i in p)} >" for p in miss]
    expansions = {}
    for alpha in itertools.product((0, 1), repeat=n - 1):
        words = expand(NestedBracket(alpha))
        expansions["".join(map(str, alpha))] = [
            {"perm": list(w.perm), "coeff_re": w.coeff.real, "coeff_im": w.coeff.imag}
            for w in words]
    table = {
        "n": n,
        "accessible": [list(p) for p in acc],
        "missing": [list(p) for p in miss],
        "expansions": expansions,
    }
    return lines, table


def write_outputs(base: str, rows: list, cfg: ExperimentConfig, extra: dict | None = None):
    os.makedirs(os.path.dirname(base) or ".", exist_ok=True)
    csv_path = base + ".csv"
    json_path = base + ".json"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)  # csv module default \r\n terminator (RFC 4180)
        writer.writerow(COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in COLUMNS])
    header = {
        "config_echo": cfg.echo(),
        "config_hash": cfg.hash(),
        "version": __version__,
        "convention_flags": dict(CONVENTION_FLAGS),
        "coefficient_resolution": _coefficient_resolution(cfg),
        "evolution_channel": _evolution_payload(cfg),
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "rows_file": os.path.basename(csv_path),
    }
    if extra:
        header.update(extra)
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, json_path


def _coefficient_resolution(cfg: ExperimentConfig) -> str:
    try:
        ch = integrated_kraus(_model(cfg), 0.0, 1.0)
        return str(ch.meta.get("coefficient_resolution", "derived"))
    except Exception:
        return "unavailable"


def channel_payload(ch) -> dict:
    """JSON form of a channel; complex entries become [re, im] double pairs."""
    return {
        "interval": [float(ch.interval[0]), float(ch.interval[1])],
        "provenance": ch.provenance,
        "meta": {k: v for k, v in ch.meta.items() if isinstance(v, (str, int, float, bool))},
        "kraus": [[[[float(z.real), float(z.imag)] for z in row] for row in k]
                  for k in ch.kraus],
    }


def _evolution_payload(cfg: ExperimentConfig) -> dict:
    """Representative evolution channel over the experiment's first interval."""
    kind = cfg.kind
    model = _model(cfg)
    if kind in ("green_retarded_scan", "hadamard_compare", "convergence_study"):
        t0 = float(cfg.get("grid.t_prime", 0.0))
        ts = cfg.times()
        t1 = ts[0] if ts else t0 + 1.0
    elif kind == "two_point":
        t0, t1 = float(cfg.get("times.t1", 0.0)), float(cfg.get("times.t2", 1.0))
    elif kind == "three_point":
        t0, t1 = float(cfg.get("times.t1", 0.0)), float(cfg.get("times.t2", 1.0))
    else:
        return {}
    trotter_dt = float(cfg.get("protocol.trotter_dt", 0.0))
    if trotter_dt > 0:
        ch = trotter_channel_factory(model, trotter_dt)(t0, t1)
    else:
        ch = integrated_kraus(model, t0, t1)
    return channel_payload(ch)


RUNNERS = {
    "green_retarded_scan": run_green_scan,
    "two_point": run_two_point,
    "three_point": run_three_point,
    "hadamard_compare": run_hadamard_compare,
    "convergence_study": run_convergence,
}


def run(cfg: ExperimentConfig, out_dir: str | None = None):
    diags = validate(cfg)
    if diags:
        raise ValueError("invalid config: " + "; ".join(diags))
    base = str(cfg.get("output.path", cfg.kind))
    root = out_dir or os.environ.get(OUTPUT_ENV, ".")
    base = base if os.path.isabs(base) else os.path.join(root, base)
    if cfg.kind == "keldysh_table":
        lines, table = run_keldysh_table(cfg)
        csv_path, json_path = write_outputs(base, [], cfg, extra={"keldysh": table})
        return lines, csv_path, json_path
    rows = RUNNERS[cfg.kind](cfg)
    csv_path, json_path = write_outputs(base, rows, cfg)
    lines = [f"{cfg.kind}: wrote {len(rows)} rows"]
    return lines, csv_path, json_path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="resetcorr",
                                     description="correlation-protocol experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, default=None, help="override protocol.seed")
    p_run.add_argument("--out", default=None, help="override output directory")
    p_run.add_argument("--exact", action="store_true", help="force exact mode")
    p_val = sub.add_parser("validate", help="validate a config file")
    p_val.add_argument("config")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.command == "validate":
        diags = validate(cfg)
        for d in diags:
            print(d)
        print("ok" if not diags else f"{len(diags)} problem(s)")
        return 0 if not diags else 1

    if args.seed is not None:
        cfg.raw["protocol.seed"] = args.seed
    if args.exact:
        cfg.raw["protocol.exact"] = True
    try:
        lines, csv_path, json_path = run(cfg, out_dir=args.out)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for line in lines:
        print(line)
    print(f"wrote {csv_path} and {json_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
