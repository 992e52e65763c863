"""Classical post-processing: turning branch tables or shot records (plus
auxiliary-circuit measurements) into correlator estimates with error bars.

Calibration of the phase choices against the simulated gate sequence fixes

    alpha_j = 0  ->  anticommutator at bracket j,
    alpha_j = 1  ->  commutator at bracket j,

and the recovered bracket value is

    <[O_1, [O_2, ..., O_n]_s ...]_s> = i^{sum alpha} * C_alpha,
    C_alpha = 2^(n-1) * E[ (-1)^{m_1+...+m_{n-1}} * final_value ].

The conditional-subtraction route instead normalizes each outcome branch and
removes the lower-order (remainder) terms measured by auxiliary circuits;
both routes agree identically in exact mode, which the test suite asserts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .protocol import (
    BranchTable,
    CircuitProgram,
    CircuitStep,
    ProtocolSpec,
    ShotRecord,
    run_program_exact,
    sample_from_table,
)

ALPHA_ANTICOMMUTATOR = 0
ALPHA_COMMUTATOR = 1


def _kappa(alpha: int) -> float:
    """i^alpha + i^-alpha for alpha in {0, 1}."""
    return 2.0 if alpha == 0 else 0.0


def _bracket_phase(alpha: Sequence[int]) -> complex:
    return 1j ** sum(alpha)


@dataclass(frozen=True)
class ScalarEstimate:
    """A real scalar with (optionally zero) sampling variance."""

    value: float
    var: float = 0.0
    shots: int = 0

    @staticmethod
    def coerce(x) -> "ScalarEstimate":
        if isinstance(x, ScalarEstimate):
            return x
        return ScalarEstimate(float(x))


@dataclass(frozen=True)
class CorrelatorEstimate:
    value: complex
    stderr_re: float
    stderr_im: float
    shots_used: int
    method: str
    notes: tuple = ()

    @property
    def std_error(self) -> float:
        return max(self.stderr_re, self.stderr_im)


@dataclass(frozen=True)
class AuxEntry:
    """One required measurement circuit, tagged with the trace expression it
    estimates and how many remainder terms it covers."""

    name: str
    expression: str
    role: str              # "main" | "normalization" | "remainder"
    covers_terms: int = 0


@dataclass(frozen=True)
class AuxiliaryPlan:
    entries: tuple

    @property
    def remainder_terms(self) -> int:
        return sum(e.covers_terms for e in self.entries if e.role == "remainder")

    def names(self):
        return [e.name for e in self.entries]


def two_point_plan(alpha: int) -> AuxiliaryPlan:
    """The four measurements of the n = 2 extraction."""
    return AuxiliaryPlan((
        AuxEntry("main", f"conditional Tr[O2 rho_2|m1] (alpha={alpha})", "main"),
        AuxEntry("o1", "Tr[O1 rho(t1)]", "normalization"),
        AuxEntry("o2", "Tr[O2 V21 rho]", "remainder", 1),
        AuxEntry("o2_c1", "Tr[O2 V21(O1 rho O1)]", "remainder", 1),
    ))


def three_point_plan(alpha: Sequence[int]) -> AuxiliaryPlan:
    """Main circuit plus the normalization inputs and the circuits covering
    all 12 remainder terms of the n = 3 extraction."""
    a1, a2 = alpha
    return AuxiliaryPlan((
        AuxEntry("main", "conditional Tr[O3 rho_3|m1 m2]", "main"),
        AuxEntry("o1", "Tr[O1 rho(t1)]", "normalization"),
        AuxEntry("o2", "Tr[O2 V21 rho]", "normalization"),
        AuxEntry("o2_c1", "Tr[O2 V21(O1 rho O1)]", "normalization"),
        AuxEntry("x2", f"i^a1 Tr[O2 V21(O1 rho)] + h.c. (a1={a1})", "normalization"),
        AuxEntry("o3", "Tr[O3 V32 V21 rho]", "remainder", 1),
        AuxEntry("o3_c1", "Tr[O3 V32 V21(O1 rho O1)]", "remainder", 1),
        AuxEntry("x3", f"i^a1 Tr[O3 V32 V21(O1 rho)] + h.c. (a1={a1})", "remainder", 2),
        AuxEntry("o3_c2", "Tr[O3 V32(O2 V21(rho) O2)]", "remainder", 1),
        AuxEntry("o3_c21", "Tr[O3 V32(O2 V21(O1 rho O1) O2)]", "remainder", 1),
        AuxEntry("w4", f"i^a1 Tr[O3 V32(O2 V21(O1 rho) O2)] + h.c. (a1={a1})",
                 "remainder", 2),
        AuxEntry("y", f"i^a2 Tr[O3 V32(O2 V21 rho)] + h.c. (a2={a2})", "remainder", 2),
        AuxEntry("w5", f"i^a2 Tr[O3 V32(O2 V21(O1 rho O1))] + h.c. (a2={a2})",
                 "remainder", 2),
    ))


@dataclass(frozen=True)
class TwoPointAux:
    o1: ScalarEstimate
    o2: ScalarEstimate
    o2_cond: ScalarEstimate


@dataclass(frozen=True)
class ThreePointAux:
    o1: ScalarEstimate
    o2: ScalarEstimate
    o2_c1: ScalarEstimate
    x2: ScalarEstimate
    o3: ScalarEstimate
    o3_c1: ScalarEstimate
    x3: ScalarEstimate
    o3_c2: ScalarEstimate
    o3_c21: ScalarEstimate
    w4: ScalarEstimate
    y: ScalarEstimate
    w5: ScalarEstimate


# ---------------------------------------------------------------------------
# main-circuit data, shared between exact tables and sampled records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _MainData:
    weights: np.ndarray      # per row (branch or shot)
    bits: np.ndarray         # (rows, n_steps)
    values: np.ndarray       # final measurement per row
    sampled: bool
    shots: int

    def mean(self, f: np.ndarray) -> float:
        return float(np.sum(self.weights * f))

    def sign(self, which: Sequence[int]) -> np.ndarray:
        """(-1)^(sum of the selected outcome bits) per row."""
        tot = self.bits[:, list(which)].sum(axis=1)
        return (-1.0) ** tot


def _main_data(main) -> _MainData:
    if isinstance(main, BranchTable):
        bits = np.array(main.outcomes, dtype=int).reshape(len(main.outcomes), -1)
        return _MainData(weights=np.asarray(main.probs, dtype=float), bits=bits,
                         values=np.asarray(main.cond_expect, dtype=float),
                         sampled=False, shots=0)
    records = list(main)
    if not records:
        raise ValueError("no shot records supplied")
    bits = np.array([r.outcomes for r in records], dtype=int)
    vals = np.array([r.final_value for r in records], dtype=float)
    n = len(records)
    return _MainData(weights=np.full(n, 1.0 / n), bits=bits, values=vals,
                     sampled=True, shots=n)


def _spread(data: _MainData, per_row: np.ndarray) -> float:
    """Standard error of the mean of a per-row statistic (sampled mode)."""
    if not data.sampled or data.shots < 2:
        return 0.0
    return float(np.std(per_row, ddof=1) / math.sqrt(data.shots))


def _component_errors(phase: complex, sigma: float):
    if abs(phase.imag) < 1e-15:
        return sigma, 0.0
    return 0.0, sigma


def _missing_branches(data: _MainData) -> tuple:
    if not data.sampled:
        return ()
    n_steps = data.bits.shape[1]
    seen = {tuple(row) for row in data.bits}
    missing = []
    for i in range(2**n_steps):
        m = tuple((i >> (n_steps - 1 - j)) & 1 for j in range(n_steps))
        if m not in seen:
            missing.append(m)
    return tuple(("empty_branch", m) for m in missing)


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

def estimate_signed(main, alpha: Sequence[int]) -> CorrelatorEstimate:
    """Signed-parity estimator: i^{sum alpha} 2^(n-1) E[(-1)^{|m|} final].

    Needs no auxiliary circuits; the branch-normalization terms cancel under
    the signed average.
    """
    alpha = tuple(alpha)
    data = _main_data(main)
    n_steps = data.bits.shape[1]
    if len(alpha) != n_steps:
        raise ValueError("alpha length does not match the recorded steps")
    signs = data.sign(range(n_steps))
    scale = 2.0 ** n_steps
    raw = scale * data.mean(signs * data.values)
    sigma = scale * _spread(data, signs * data.values)
    phase = _bracket_phase(alpha)
    err_re, err_im = _component_errors(phase, sigma)
    return CorrelatorEstimate(value=phase * raw, stderr_re=err_re, stderr_im=err_im,
                              shots_used=data.shots,
                              method="signed_weight" if data.sampled else "exact",
                              notes=_missing_branches(data))


def estimate_two_point_signed(main, alpha: int) -> CorrelatorEstimate:
    return estimate_signed(main, (alpha,))


def estimate_two_point(main, aux: TwoPointAux, alpha: int) -> CorrelatorEstimate:
    """Bracket <[O1(t1), O2(t2)]_s> via per-branch normalization and
    subtraction of the one-time averages (s = '+' for alpha = 0, '-' for 1).

    Each branch m contributes (-1)^m [ e(m)/N(m) - <O2> - <O2>_{O1} ] with
    1/N(m) = 2 + (-1)^m (i^a + i^-a) <O1>; branches are combined with their
    (empirical or exact) probabilities.  Errors: first-order propagation with
    the four circuits independent.
    """
    data = _main_data(main)
    if data.bits.shape[1] != 1:
        raise ValueError("two-point estimator expects single-step data")
    o1 = ScalarEstimate.coerce(aux.o1)
    o2 = ScalarEstimate.coerce(aux.o2)
    o2c = ScalarEstimate.coerce(aux.o2_cond)
    kap = _kappa(alpha)
    signs = data.sign((0,))
    sub = o2.value + o2c.value
    per_row = (2.0 * signs * data.values + kap * o1.value * data.values
               - sub * signs)
    c_val = data.mean(per_row)
    var_main = _spread(data, per_row) ** 2
    mean_v = data.mean(data.values)
    mean_sign = data.mean(signs)
    var_aux = ((kap * mean_v) ** 2 * o1.var
               + mean_sign**2 * (o2.var + o2c.var))
    sigma = math.sqrt(var_main + var_aux)
    phase = _bracket_phase((alpha,))
    err_re, err_im = _component_errors(phase, sigma)
    shots = data.shots + o1.shots + o2.shots + o2c.shots
    return CorrelatorEstimate(
        value=phase * c_val, stderr_re=err_re, stderr_im=err_im,
        shots_used=shots,
        method="conditional_subtraction" if data.sampled else "exact",
        notes=_missing_branches(data))


def estimate_three_point(main, aux: ThreePointAux,
                         alpha: Sequence[int]) -> CorrelatorEstimate:
    """Bracket <[O1, [O2, O3]_s2]_s1> with the full 12-term remainder
    subtraction; raises if an auxiliary entry is missing.

    Per branch m = (m1, m2):
        C = (-1)^{m1+m2} [ e(m) / (N2(m1) N3(m)) - T(m) ],
    with the inverse normalization
        1/(N2 N3) = 2 (2 + (-1)^{m1} k1 <O1>)
                    + (-1)^{m2} k2 (<O2> + <O2>_{O1} + (-1)^{m1} X2)
    and the remainder
        T(m) = <O3> + <O3>_{O1} + (-1)^{m1} X3
             + <O3>_{O2} + <O3>_{O2 O1} + (-1)^{m1} W4
             + (-1)^{m2} (Y + W5).
    """
    a1, a2 = (int(a) for a in alpha)
    data = _main_data(main)
    if data.bits.shape[1] != 2:
        raise ValueError("three-point estimator expects two-step data")
    for name in ("o1", "o2", "o2_c1", "x2", "o3", "o3_c1", "x3", "o3_c2",
                 "o3_c21", "w4", "y", "w5"):
        if getattr(aux, name, None) is None:
            raise ValueError(f"auxiliary plan entry {name!r} is missing")
    g = {name: ScalarEstimate.coerce(getattr(aux, name))
         for name in ("o1", "o2", "o2_c1", "x2", "o3", "o3_c1", "x3",
                      "o3_c2", "o3_c21", "w4", "y", "w5")}
    k1, k2 = _kappa(a1), _kappa(a2)
    s1 = data.sign((0,))
    s2 = data.sign((1,))
    s12 = s1 * s2
    inv_norm = (2.0 * (2.0 + s1 * k1 * g["o1"].value)
                + s2 * k2 * (g["o2"].value + g["o2_c1"].value + s1 * g["x2"].value))
    remainder = (g["o3"].value + g["o3_c1"].value + s1 * g["x3"].value
                 + g["o3_c2"].value + g["o3_c21"].value + s1 * g["w4"].value
                 + s2 * (g["y"].value + g["w5"].value))
    per_row = s12 * (data.values * inv_norm - remainder)
    c_val = data.mean(per_row)
    var_main = _spread(data, per_row) ** 2

    e_s1v = data.mean(s1 * data.values)
    e_s2v = data.mean(s2 * data.values)
    e_v = data.mean(data.values)
    e_s12 = data.mean(s12)
    e_s1 = data.mean(s1)
    e_s2 = data.mean(s2)
    grads = {
        "o1": 2.0 * k1 * e_s2v,
        "o2": k2 * e_s1v,
        "o2_c1": k2 * e_s1v,
        "x2": k2 * e_v,
        "o3": -e_s12,
        "o3_c1": -e_s12,
        "x3": -e_s2,
        "o3_c2": -e_s12,
        "o3_c21": -e_s12,
        "w4": -e_s2,
        "y": -e_s1,
        "w5": -e_s1,
    }
    var_aux = sum(grads[k] ** 2 * g[k].var for k in grads)
    sigma = math.sqrt(var_main + var_aux)
    phase = _bracket_phase((a1, a2))
    err_re, err_im = _component_errors(phase, sigma)
    shots = data.shots + sum(v.shots for v in g.values())
    return CorrelatorEstimate(
        value=phase * c_val, stderr_re=err_re, stderr_im=err_im,
        shots_used=shots,
        method="conditional_subtraction" if data.sampled else "exact",
        notes=_missing_branches(data))


def shots_for_precision(epsilon: float, confidence: float) -> int:
    """Hoeffding count for a +/-1 bounded estimator:
    ceil( ln(2/(1-confidence)) / (2 epsilon^2) )."""
    if not (0.0 < epsilon <= 1.0):
        raise ValueError("epsilon must be in (0, 1]")
    if not (0.0 < confidence < 1.0):
        raise ValueError("confidence must be in (0, 1)")
    return math.ceil(math.log(2.0 / (1.0 - confidence)) / (2.0 * epsilon**2))


# ---------------------------------------------------------------------------
# auxiliary-circuit providers (exact evaluation or per-circuit sampling)
# ---------------------------------------------------------------------------

def _two_point_programs(spec: ProtocolSpec) -> dict:
    t1, t2 = spec.times
    o1, o2 = (op.mat for op in spec.ops)
    rho = spec.initial_state
    fac = spec.channel_factory
    return {
        "o1": CircuitProgram(rho, t1, (), t1, o1, fac),
        "o2": CircuitProgram(rho, t1, (), t2, o2, fac),
        "o2_cond": CircuitProgram(
            rho, t1, (CircuitStep(t1, o1, "unitary"),), t2, o2, fac),
    }


def _three_point_programs(spec: ProtocolSpec) -> dict:
    t1, t2, t3 = spec.times
    o1, o2, o3 = (op.mat for op in spec.ops)
    a1, a2 = spec.alpha
    rho = spec.initial_state
    fac = spec.channel_factory
    u1 = CircuitStep(t1, o1, "unitary")
    u2 = CircuitStep(t2, o2, "unitary")
    e1 = CircuitStep(t1, o1, "entangle", a1)
    e2 = CircuitStep(t2, o2, "entangle", a2)
    wait2 = CircuitStep(t2, np.eye(o1.shape[0], dtype=complex), "unitary")
    # evolution always passes through t2 so the trace expressions match
    # V32(V21(.)) exactly, channel family composition aside
    return {
        "o1": (CircuitProgram(rho, t1, (), t1, o1, fac), "plain"),
        "o2": (CircuitProgram(rho, t1, (), t2, o2, fac), "plain"),
        "o2_c1": (CircuitProgram(rho, t1, (u1,), t2, o2, fac), "plain"),
        "x2": (CircuitProgram(rho, t1, (e1,), t2, o2, fac), "signed"),
        "o3": (CircuitProgram(rho, t1, (wait2,), t3, o3, fac), "plain"),
        "o3_c1": (CircuitProgram(rho, t1, (u1, wait2), t3, o3, fac), "plain"),
        "x3": (CircuitProgram(rho, t1, (e1, wait2), t3, o3, fac), "signed"),
        "o3_c2": (CircuitProgram(rho, t1, (u2,), t3, o3, fac), "plain"),
        "o3_c21": (CircuitProgram(rho, t1, (u1, u2), t3, o3, fac), "plain"),
        "w4": (CircuitProgram(rho, t1, (e1, u2), t3, o3, fac), "signed"),
        "y": (CircuitProgram(rho, t1, (e2,), t3, o3, fac), "signed"),
        "w5": (CircuitProgram(rho, t1, (u1, e2), t3, o3, fac), "signed"),
    }


def _exact_scalar(table: BranchTable, kind: str) -> ScalarEstimate:
    if kind == "plain":
        return ScalarEstimate(table.mean_final())
    return ScalarEstimate(2.0 * table.signed_sum())


def _sampled_scalar(table: BranchTable, kind: str, shots: int,
                    seed: int) -> ScalarEstimate:
    v, finals, _ = sample_from_table(table, shots, seed)
    if kind == "plain":
        stat = finals
    else:
        n_steps = table.n_steps
        bits = (v[:, None] >> np.arange(n_steps - 1, -1, -1)) & 1
        stat = 2.0 * ((-1.0) ** bits.sum(axis=1)) * finals
    mean = float(stat.mean())
    var = float(stat.var(ddof=1) / shots) if shots > 1 else 0.0
    return ScalarEstimate(mean, var, shots)


def two_point_aux_exact(spec: ProtocolSpec) -> TwoPointAux:
    progs = _two_point_programs(spec)
    vals = {k: _exact_scalar(run_program_exact(p), "plain") for k, p in progs.items()}
    return TwoPointAux(o1=vals["o1"], o2=vals["o2"], o2_cond=vals["o2_cond"])


def two_point_aux_sampled(spec: ProtocolSpec, shots: int, seed: int) -> TwoPointAux:
    progs = _two_point_programs(spec)
    out = {}
    for i, (k, p) in enumerate(sorted(progs.items())):
        out[k] = _sampled_scalar(run_program_exact(p), "plain", shots, seed + 1000 + i)
    return TwoPointAux(o1=out["o1"], o2=out["o2"], o2_cond=out["o2_cond"])


def three_point_aux_exact(spec: ProtocolSpec) -> ThreePointAux:
    progs = _three_point_programs(spec)
    vals = {k: _exact_scalar(run_program_exact(p), kind)
            for k, (p, kind) in progs.items()}
    return ThreePointAux(**vals)


def three_point_aux_sampled(spec: ProtocolSpec, shots: int,
                            seed: int) -> ThreePointAux:
    progs = _three_point_programs(spec)
    vals = {}
    for i, (k, (p, kind)) in enumerate(sorted(progs.items())):
        vals[k] = _sampled_scalar(run_program_exact(p), kind, shots, seed + 2000 + i)
    return ThreePointAux(**vals)
