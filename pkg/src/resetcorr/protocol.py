"""Executors for the measure-and-reset correlation protocol and the
Hadamard-test baseline, on exact branch enumeration or sampled shots.

Gate conventions (ground truth for all sign bookkeeping downstream):
the ancilla is prepared in |+>, a controlled-O acts on the system, then
S^alpha with S = diag(1, i), then H, then a projective ancilla measurement.
Carried out on matrices this gives, per outcome m, the unnormalized branch

    B_m = (1/4) [ rho + O rho O + (-1)^m (i^alpha O rho + i^-alpha rho O) ],

with p(m) = Tr B_m.  The alpha = 0 setting therefore addresses the
anticommutator and alpha = 1 the commutator; see the estimators module for
the exact weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .qmat import DensityMatrix, Operator, PAULI_MATS
from .channels import QuantumChannel, apply_channel_on_subsystem, dephasing_channel

HERMITIAN_UNITARY_TOL = 1e-10

# S = diag(1, i); alpha = 1 applies it, alpha = 0 does not
S_GATE = np.diag([1.0, 1.0j])
H_GATE = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / np.sqrt(2.0)
PLUS = 0.5 * np.array([[1.0, 1.0], [1.0, 1.0]], dtype=complex)


@dataclass(frozen=True)
class AncillaNoise:
    """Continuous dephasing of the interferometry ancilla at rate gamma.

    Acts while the ancilla idles coherently during system evolution; the
    reset protocol's ancilla never does, so it is immune by construction.
    """

    dephasing_rate: float = 0.0

    def __post_init__(self):
        if self.dephasing_rate < 0:
            raise ValueError("dephasing rate must be >= 0")

    def coherence_factor(self, duration: float) -> float:
        return math.exp(-self.dephasing_rate * duration)


@dataclass(frozen=True)
class ProtocolSpec:
    """Configuration of one n-point run: ordered times, the Hermitian unitary
    probe operators, the phase-choice vector alpha, the evolution-channel
    factory, and the system state at times[0]."""

    times: tuple
    ops: tuple
    alpha: tuple
    channel_factory: Callable[[float, float], QuantumChannel]
    initial_state: DensityMatrix

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        alpha = tuple(int(a) for a in self.alpha)
        ops = tuple(self.ops)
        if len(ops) != len(times):
            raise ValueError("need one operator per time")
        if len(alpha) != len(times) - 1:
            raise ValueError("alpha must have length n - 1")
        if any(t1 >= t2 for t1, t2 in zip(times, times[1:])):
            raise ValueError("times must be strictly increasing")
        if any(a not in (0, 1) for a in alpha):
            raise ValueError("alpha entries must be 0 or 1")
        for op in ops:
            if op.dim != self.initial_state.dim:
                raise ValueError("operator dimension does not match the state")
            if not op.is_hermitian(HERMITIAN_UNITARY_TOL):
                raise ValueError(f"operator {op.label or op.mat} is not Hermitian")
            if not op.is_unitary(HERMITIAN_UNITARY_TOL):
                raise ValueError(f"operator {op.label or op.mat} is not unitary")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "ops", ops)

    @property
    def n(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class ShotRecord:
    """One sampled run: ancilla outcomes and the final +/-1 measurement."""

    outcomes: tuple
    final_value: float
    seed_index: int


def records_to_jsonable(records) -> list:
    """ShotRecords as plain dicts for the CLI's JSON result files."""
    return [{"outcomes": list(r.outcomes), "final_value": r.final_value,
             "seed_index": r.seed_index} for r in records]


def records_from_jsonable(payload) -> list:
    return [ShotRecord(outcomes=tuple(int(b) for b in d["outcomes"]),
                       final_value=float(d["final_value"]),
                       seed_index=int(d["seed_index"])) for d in payload]


@dataclass(frozen=True)
class BranchTable:
    """Exact per-outcome probabilities and conditional final expectations."""

    outcomes: tuple
    probs: np.ndarray
    cond_expect: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        cond = np.array(self.cond_expect, dtype=float)
        probs.setflags(write=False)
        cond.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "cond_expect", cond)

    @property
    def n_steps(self) -> int:
        return len(self.outcomes[0]) if self.outcomes else 0

    def prob_defect(self) -> float:
        return abs(self.probs.sum() - 1.0)

    def signed_sum(self) -> float:
        """sum_m p(m) (-1)^{sum_j m_j} e(m)."""
        signs = np.array([(-1) ** sum(m) for m in self.outcomes])
        return float(np.sum(self.probs * signs * self.cond_expect))

    def mean_final(self) -> float:
        return float(np.sum(self.probs * self.cond_expect))


def _branch_pair(rho_mat: np.ndarray, op_mat: np.ndarray, alpha: int):
    """Unnormalized post-measurement branches of one entangling step."""
    oro = op_mat @ rho_mat @ op_mat
    cross = (1j**alpha) * (op_mat @ rho_mat) + (1j**-alpha) * (rho_mat @ op_mat)
    base = rho_mat + oro
    b0 = 0.25 * (base + cross)
    b1 = 0.25 * (base - cross)
    return b0, b1


def step_update(rho: DensityMatrix, op: Operator, alpha: int,
                rng: np.random.Generator | None = None):
    """One entangle-rotate-measure step on a normalized state.

    With ``rng`` omitted, returns [(p0, B0), (p1, B1)] with unnormalized
    branch matrices B_m and p_m = Tr B_m.  With ``rng`` given, draws the
    outcome and returns (m, normalized DensityMatrix).
    """
    if op.dim != rho.dim:
        raise ValueError("operator/state dimension mismatch")
    if not (op.is_hermitian(HERMITIAN_UNITARY_TOL)
            and op.is_unitary(HERMITIAN_UNITARY_TOL)):
        raise ValueError("step operator must be Hermitian and unitary")
    if alpha not in (0, 1):
        raise ValueError("alpha must be 0 or 1")
    b0, b1 = _branch_pair(rho.mat, op.mat, alpha)
    p0 = float(np.trace(b0).real)
    p1 = float(np.trace(b1).real)
    if min(p0, p1) < -1e-10:
        raise ValueError(f"negative branch probability {min(p0, p1):.3e}")
    p0, p1 = max(p0, 0.0), max(p1, 0.0)
    if rng is None:
        return [(p0, b0), (p1, b1)]
    m = 0 if rng.random() < p0 / (p0 + p1) else 1
    branch = b0 if m == 0 else b1
    return m, DensityMatrix(branch / np.trace(branch))


@dataclass(frozen=True)
class CircuitStep:
    """One event in a program: an entangling ancilla step or a bare unitary."""

    time: float
    op: np.ndarray
    kind: str = "entangle"   # "entangle" | "unitary"
    alpha: int = 0


@dataclass(frozen=True)
class CircuitProgram:
    """Initial state at start_time, a sequence of timed events, evolution via
    channel_factory between consecutive event times, and a final projective
    measurement of final_op at final_time.  This generalizes the main
    protocol circuit to the auxiliary (remainder) circuits, which interleave
    bare unitaries with at most one entangling step."""

    initial: DensityMatrix
    start_time: float
    steps: tuple
    final_time: float
    final_op: np.ndarray
    channel_factory: Callable[[float, float], QuantumChannel]


def program_for_spec(spec: ProtocolSpec) -> CircuitProgram:
    steps = tuple(
        CircuitStep(time=spec.times[j], op=spec.ops[j].mat, kind="entangle",
                    alpha=spec.alpha[j])
        for j in range(spec.n - 1))
    return CircuitProgram(initial=spec.initial_state, start_time=spec.times[0],
                          steps=steps, final_time=spec.times[-1],
                          final_op=spec.ops[-1].mat,
                          channel_factory=spec.channel_factory)


def run_program_exact(prog: CircuitProgram) -> BranchTable:
    """Enumerate every ancilla outcome string exactly."""
    branches = {(): np.asarray(prog.initial.mat, dtype=complex)}
    now = prog.start_time
    for step in prog.steps:
        if step.time > now:
            ch = prog.channel_factory(now, step.time)
            branches = {m: ch.apply_mat(b) for m, b in branches.items()}
            now = step.time
        if step.kind == "unitary":
            u = step.op
            branches = {m: u @ b @ u.conj().T for m, b in branches.items()}
        elif step.kind == "entangle":
            new = {}
            for m, b in branches.items():
                b0, b1 = _branch_pair(b, step.op, step.alpha)
                new[m + (0,)] = b0
                new[m + (1,)] = b1
            branches = new
        else:
            raise ValueError(f"unknown step kind {step.kind!r}")
    if prog.final_time > now:
        ch = prog.channel_factory(now, prog.final_time)
        branches = {m: ch.apply_mat(b) for m, b in branches.items()}
    outcomes = tuple(sorted(branches))
    probs = np.empty(len(outcomes))
    cond = np.empty(len(outcomes))
    for i, m in enumerate(outcomes):
        b = branches[m]
        pm = float(np.trace(b).real)
        if pm < -1e-10:
            raise ValueError(f"negative branch probability {pm:.3e} at {m}")
        probs[i] = max(pm, 0.0)
        cond[i] = float(np.trace(prog.final_op @ b).real) / pm if pm > 0 else 0.0
    return BranchTable(outcomes=outcomes, probs=probs, cond_expect=cond)


def run_robust_exact(spec: ProtocolSpec,
                     noise: AncillaNoise | None = None) -> BranchTable:
    """Exact branch table of the reset protocol.

    The ancilla is entangled and measured at the same instant, so ancilla
    dephasing (``noise``) has zero live window and the table is independent
    of it; the parameter exists to make that contrast testable.
    """
    del noise  # zero-duration coherent window: e^{-gamma * 0} = 1
    return run_program_exact(program_for_spec(spec))


def _shot_uniforms(seed: int, shots: int, per_shot: int) -> np.ndarray:
    """Counter-based uniforms: shot i consumes row i regardless of how many
    shots are drawn, so partial runs and parallel merges reproduce exactly."""
    gen = np.random.Generator(np.random.Philox(key=int(seed)))
    return gen.random((shots, per_shot))


def sample_from_table(table: BranchTable, shots: int, seed: int,
                      per_shot_extra: int = 0):
    """Sequential per-step sampling of outcome strings and the final +/-1.

    Equivalent to stepping each shot through step_update with the chain-rule
    conditionals, vectorized over shots.  Returns (outcome index array,
    final values array, leftover uniform columns).
    """
    n_steps = table.n_steps
    u = _shot_uniforms(seed, shots, n_steps + 1 + per_shot_extra)
    leaves = table.probs
    # node sums per depth: node_p[j][v] = P(first j outcomes encode v)
    node_p = [leaves]
    while len(node_p[-1]) > 1:
        node_p.append(node_p[-1].reshape(-1, 2).sum(axis=1))
    node_p = node_p[::-1]  # node_p[j] has 2^j entries
    v = np.zeros(shots, dtype=np.int64)
    for j in range(n_steps):
        parent = node_p[j][v]
        child0 = node_p[j + 1][2 * v]
        with np.errstate(divide="ignore", invalid="ignore"):
            cond0 = np.where(parent > 0, child0 / np.where(parent > 0, parent, 1.0), 1.0)
        v = 2 * v + (u[:, j] >= cond0)
    e = table.cond_expect[v]
    finals = np.where(u[:, n_steps] < (1.0 + e) / 2.0, 1.0, -1.0)
    return v, finals, u[:, n_steps + 1:]


def run_robust_sampled(spec: ProtocolSpec, shots: int, seed: int,
                       noise: AncillaNoise | None = None) -> list:
    """Independent sampled shots of the reset protocol.

    Each shot draws its ancilla outcomes step by step and then measures the
    final operator projectively in its +/-1 eigenbasis.  Shot i's randomness
    sits at fixed offsets of a Philox stream keyed by ``seed``, so runs are
    reproducible and mergeable by shot index.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    del noise  # as in run_robust_exact: no coherent ancilla idle window
    table = run_robust_exact(spec)
    n_steps = table.n_steps
    v, finals, _ = sample_from_table(table, shots, seed)
    records = []
    for i in range(shots):
        bits = tuple((int(v[i]) >> (n_steps - 1 - j)) & 1 for j in range(n_steps))
        records.append(ShotRecord(outcomes=bits, final_value=float(finals[i]),
                                  seed_index=i))
    return records


# ---------------------------------------------------------------------------
# Hadamard-test baseline (ancilla must stay coherent across the evolution)
# ---------------------------------------------------------------------------

def _embed_ancilla(gate: np.ndarray, n_sys: int) -> np.ndarray:
    return np.kron(gate, np.eye(2**n_sys, dtype=complex))


def _controlled(op_mat: np.ndarray) -> np.ndarray:
    """Controlled-O with the ancilla as qubit 0 (most significant)."""
    d = op_mat.shape[0]
    p0 = np.zeros((2, 2), dtype=complex)
    p0[0, 0] = 1.0
    p1 = np.zeros((2, 2), dtype=complex)
    p1[1, 1] = 1.0
    return np.kron(p0, np.eye(d, dtype=complex)) + np.kron(p1, op_mat)


def hadamard_final_state(spec: ProtocolSpec,
                         noise: AncillaNoise | None = None) -> DensityMatrix:
    """Joint ancilla+system state of the interferometric circuit just before
    the ancilla measurement (ancilla is register qubit 0)."""
    if spec.n != 2:
        raise ValueError("the interferometric baseline is implemented for n = 2")
    n_sys = spec.initial_state.n_qubits
    sys_targets = list(range(1, n_sys + 1))
    joint = np.kron(PLUS, spec.initial_state.mat)
    co1 = _controlled(spec.ops[0].mat)
    joint = co1 @ joint @ co1.conj().T
    state = DensityMatrix(joint)
    ch = spec.channel_factory(spec.times[0], spec.times[1])
    state = apply_channel_on_subsystem(ch, state, sys_targets)
    if noise is not None and noise.dephasing_rate > 0:
        deph = dephasing_channel(noise.dephasing_rate * (spec.times[1] - spec.times[0]))
        state = apply_channel_on_subsystem(deph, state, [0])
    joint = state.mat
    co2 = _controlled(spec.ops[1].mat)
    joint = co2 @ joint @ co2.conj().T
    rot = H_GATE @ np.linalg.matrix_power(S_GATE, spec.alpha[0])
    rot_full = _embed_ancilla(rot, n_sys)
    joint = rot_full @ joint @ rot_full.conj().T
    return DensityMatrix(joint)


def run_hadamard_test(spec: ProtocolSpec, basis: str = "Z",
                      noise: AncillaNoise | None = None,
                      shots: int | None = None, seed: int = 0):
    """Ancilla expectation of the Hadamard-test circuit.

    ``basis`` is "Z" or "Y".  With ``shots=None`` the exact expectation is
    returned; otherwise an array of +/-1 samples.
    """
    if basis not in ("Z", "Y"):
        raise ValueError("basis must be 'Z' or 'Y'")
    state = hadamard_final_state(spec, noise)
    n_sys = spec.initial_state.n_qubits
    obs = _embed_ancilla(PAULI_MATS[basis], n_sys)
    mean = float(np.trace(obs @ state.mat).real)
    if shots is None:
        return mean
    u = _shot_uniforms(seed, shots, 1)[:, 0]
    return np.where(u < (1.0 + mean) / 2.0, 1.0, -1.0)


def hadamard_corr(spec: ProtocolSpec, noise: AncillaNoise | None = None) -> complex:
    """Complex two-point function read off the final ancilla state.

    For alpha = 0: C = <Z> - i <Y>;  for alpha = 1: C = -<Y> - i <Z>.
    With ancilla dephasing at rate gamma the result is e^{-gamma (t2-t1)} C.
    """
    state = hadamard_final_state(spec, noise)
    n_sys = spec.initial_state.n_qubits
    z = float(np.trace(_embed_ancilla(PAULI_MATS["Z"], n_sys) @ state.mat).real)
    y = float(np.trace(_embed_ancilla(PAULI_MATS["Y"], n_sys) @ state.mat).real)
    if spec.alpha[0] == 0:
        return complex(z, -y)
    return complex(-y, -z)
