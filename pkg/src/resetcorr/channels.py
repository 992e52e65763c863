"""Quantum channels in Kraus form, Lindblad generators, and the
transfer-matrix / process-matrix pipeline used to integrate single-qubit
dissipative dynamics.

Single-qubit channels are represented on the orthonormal operator basis
sigma_a = {I, X, Y, Z}/sqrt(2) (Tr sigma_a sigma_b = delta_ab).  A channel V
has transfer matrix F_rs = Tr[sigma_r V(sigma_s)] and process matrix S with
V(rho) = sum_ab S_ab sigma_a rho sigma_b; S is Hermitian and PSD iff V is
completely positive, and its spectral decomposition yields Kraus operators
K_i = sqrt(lambda_i) sum_a X(i)_a sigma_a.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .qmat import I2, X, Y, Z, embed_mat

SIGMA = np.stack([I2, X, Y, Z]) / np.sqrt(2.0)

# quartic trace kernel T[r,a,s,b] = Tr[sigma_r sigma_a sigma_s sigma_b]
_KERNEL = np.einsum("rij,ajk,skl,bli->rasb", SIGMA, SIGMA, SIGMA, SIGMA)

COMPLETENESS_TOL = 1e-10
CHOI_EIG_FLOOR = -1e-8


class ChannelError(ValueError):
    """Raised for ill-formed channels (completeness or positivity violations)."""


@dataclass(frozen=True)
class QuantumChannel:
    """Completely positive trace-preserving map in Kraus form.

    ``provenance`` records how the channel was built: one of
    {"analytic", "from_choi", "composed", "trotterized"}.
    ``meta`` carries audit information (e.g. coefficient-convention flags).
    """

    kraus: tuple
    interval: tuple = (0.0, 0.0)
    provenance: str = "analytic"
    meta: dict = field(default_factory=dict)
    completeness_tol: float = COMPLETENESS_TOL

    def __post_init__(self):
        ops = tuple(np.array(k, dtype=complex) for k in self.kraus)
        if not ops:
            raise ChannelError("channel needs at least one Kraus operator")
        d = ops[0].shape[0]
        for k in ops:
            if k.shape != (d, d):
                raise ChannelError("Kraus operators must share one square shape")
            k.setflags(write=False)
        defect = _completeness_defect(ops)
        if defect > self.completeness_tol:
            raise ChannelError(f"sum K†K deviates from identity by {defect:.3e}")
        object.__setattr__(self, "kraus", ops)

    @property
    def dim(self) -> int:
        return self.kraus[0].shape[0]

    def completeness_defect(self) -> float:
        return _completeness_defect(self.kraus)

    def apply_mat(self, mat: np.ndarray) -> np.ndarray:
        """Kraus action sum_i K_i M K_i† on an arbitrary matrix."""
        mat = np.asarray(mat, dtype=complex)
        if mat.shape != (self.dim, self.dim):
            raise ChannelError(f"matrix shape {mat.shape} does not match dim {self.dim}")
        out = np.zeros_like(mat)
        for k in self.kraus:
            out += k @ mat @ k.conj().T
        return out


def _completeness_defect(ops: Sequence[np.ndarray]) -> float:
    d = ops[0].shape[0]
    acc = np.zeros((d, d), dtype=complex)
    for k in ops:
        acc += k.conj().T @ k
    return float(np.abs(acc - np.eye(d)).max())


def identity_channel(dim: int = 2, interval=(0.0, 0.0)) -> QuantumChannel:
    return QuantumChannel((np.eye(dim, dtype=complex),), interval=interval)


def dephasing_channel(strength: float, interval=(0.0, 0.0)) -> QuantumChannel:
    """Single-qubit dephasing that scales off-diagonals by exp(-strength)."""
    lam = np.exp(-strength)
    k0 = np.sqrt((1.0 + lam) / 2.0) * I2
    k1 = np.sqrt((1.0 - lam) / 2.0) * Z
    return QuantumChannel((k0, k1), interval=interval, provenance="analytic")


def apply_channel(ch: QuantumChannel, rho):
    """rho -> sum K rho K†, trace preserved within the channel tolerance."""
    from .qmat import DensityMatrix

    if ch.dim != rho.dim:
        raise ChannelError(f"dim mismatch: channel {ch.dim} vs state {rho.dim}")
    return DensityMatrix(ch.apply_mat(rho.mat))


def apply_channel_on_subsystem(ch: QuantumChannel, rho, targets: Sequence[int]):
    """Apply a channel to a subset of register qubits (identity elsewhere)."""
    from .qmat import DensityMatrix

    n = rho.n_qubits
    if ch.dim != 2 ** len(targets):
        raise ChannelError(
            f"channel dim {ch.dim} does not match {len(targets)} target qubits")
    out = np.zeros_like(rho.mat)
    for k in ch.kraus:
        kk = embed_mat(k, n, targets)
        out += kk @ rho.mat @ kk.conj().T
    return DensityMatrix(out)


@dataclass(frozen=True)
class LindbladGenerator:
    """Time-dependent GKSL generator.

    ``hamiltonian`` and each entry of ``jump_ops`` are callables t -> matrix.
    The generated map is

        Lambda_t(rho) = -i[H(t), rho] + sum_l ( L_l rho L_l† - {L_l† L_l, rho}/2 ),

    which is Hermitian and traceless on Hermitian input.
    """

    hamiltonian: Callable[[float], np.ndarray]
    jump_ops: tuple = ()

    def rhs_mat(self, rho_mat: np.ndarray, t: float) -> np.ndarray:
        h = np.asarray(self.hamiltonian(t), dtype=complex)
        out = -1j * (h @ rho_mat - rho_mat @ h)
        for jump in self.jump_ops:
            l = np.asarray(jump(t), dtype=complex)
            ldl = l.conj().T @ l
            out += l @ rho_mat @ l.conj().T - 0.5 * (ldl @ rho_mat + rho_mat @ ldl)
        return out


def lindblad_rhs(gen: LindbladGenerator, rho, t: float) -> np.ndarray:
    """Generator applied to a state; result is Hermitian and traceless."""
    mat = rho.mat if hasattr(rho, "mat") else np.asarray(rho, dtype=complex)
    h = np.asarray(gen.hamiltonian(t))
    if h.shape != mat.shape:
        raise ChannelError(f"dim mismatch: H {h.shape} vs rho {mat.shape}")
    return gen.rhs_mat(mat, t)


def generator_transfer(gen: LindbladGenerator, t: float) -> np.ndarray:
    """L(t) with L_rs = Tr[sigma_r Lambda_t(sigma_s)] (real 4x4)."""
    cols = [gen.rhs_mat(SIGMA[s], t) for s in range(4)]
    l = np.einsum("rij,sji->rs", SIGMA, np.stack(cols))
    return l.real


def choi_from_transfer(f: np.ndarray) -> np.ndarray:
    """Process matrix S_ab = sum_rs F_sr Tr[sigma_r sigma_a sigma_s sigma_b]."""
    return np.einsum("sr,rasb->ab", np.asarray(f, dtype=complex), _KERNEL)


def transfer_from_kraus(kraus: Sequence[np.ndarray]) -> np.ndarray:
    """F_rs = Tr[sigma_r sum_i K_i sigma_s K_i†] for a single-qubit Kraus set."""
    f = np.zeros((4, 4), dtype=complex)
    for s in range(4):
        img = np.zeros((2, 2), dtype=complex)
        for k in kraus:
            img += k @ SIGMA[s] @ k.conj().T
        for r in range(4):
            f[r, s] = np.trace(SIGMA[r] @ img)
    return f.real


@dataclass(frozen=True)
class ChoiData:
    """Transfer matrix F and process matrix S on the sigma basis."""

    f: np.ndarray
    s: np.ndarray
    interval: tuple = (0.0, 0.0)

    HERM_TOL = 1e-9
    EIG_FLOOR = CHOI_EIG_FLOOR

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float).copy()
        s = np.asarray(self.s, dtype=complex).copy()
        if f.shape != (4, 4) or s.shape != (4, 4):
            raise ChannelError("single-qubit ChoiData requires 4x4 matrices")
        if np.abs(s - s.conj().T).max() > self.HERM_TOL:
            raise ChannelError("process matrix is not Hermitian within tolerance")
        f.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "s", s)

    @property
    def basis(self) -> np.ndarray:
        return SIGMA

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.s).min())


def integrate_transfer_matrix(gen: LindbladGenerator, t_from: float, t_to: float,
                              steps: int | None = None) -> ChoiData:
    """Solve Fdot = L(t) F with F(t_from) = I by fixed-step classical RK4.

    ``steps`` defaults to 1000 per unit time.  Raises if the resulting
    process matrix has an eigenvalue below -1e-6, which signals too-coarse
    stepping.
    """
    if t_to < t_from:
        raise ChannelError("t_to must be >= t_from")
    if steps is None:
        steps = max(1, round(1000 * (t_to - t_from)))
    if steps < 1:
        raise ChannelError("steps must be >= 1")
    h = (t_to - t_from) / steps
    f = np.eye(4)
    for j in range(steps):
        t = t_from + j * h
        k1 = generator_transfer(gen, t) @ f
        k2 = generator_transfer(gen, t + h / 2) @ (f + h / 2 * k1)
        k3 = generator_transfer(gen, t + h / 2) @ (f + h / 2 * k2)
        k4 = generator_transfer(gen, t + h) @ (f + h * k3)
        f = f + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    s = choi_from_transfer(f)
    cd = ChoiData(f, s, interval=(t_from, t_to))
    if cd.min_eigenvalue() < -1e-6:
        raise ChannelError(
            f"process matrix eigenvalue {cd.min_eigenvalue():.3e} < -1e-6; "
            "increase the step count")
    return cd


def _eig_sorted(s: np.ndarray):
    """Eigenpairs of a Hermitian 4x4, descending eigenvalue, deterministic vectors.

    Ties are broken by lexicographic order of the (phase-fixed) eigenvector
    coefficients so snapshot tests are stable.
    """
    evals, evecs = np.linalg.eigh(s)
    pairs = []
    for i in range(len(evals)):
        v = evecs[:, i].copy()
        # fix the arbitrary eigenvector phase: first significant entry real > 0
        for c in v:
            if abs(c) > 1e-12:
                v = v * (c.conjugate() / abs(c))
                break
        pairs.append((float(evals[i]), v))
    pairs.sort(key=lambda p: (-p[0], tuple(np.round(p[1].view(float), 12))))
    return pairs


def kraus_from_choi(cd: ChoiData, tol: float = 1e-12) -> QuantumChannel:
    """Kraus set from the spectral decomposition of the process matrix.

    Eigenvalues in [CHOI_EIG_FLOOR, 0) are clipped to zero; completeness is
    then restored exactly by a right polar correction K_i -> K_i M^(-1/2)
    with M = sum K†K.
    """
    lam_min = cd.min_eigenvalue()
    if lam_min < CHOI_EIG_FLOOR:
        raise ChannelError(
            f"complete-positivity violation: min process eigenvalue {lam_min:.3e}")
    ops = []
    for lam, vec in _eig_sorted(cd.s):
        if lam <= tol:
            continue
        k = np.tensordot(vec, SIGMA, axes=(0, 0)) * np.sqrt(lam)
        ops.append(k)
    if not ops:
        raise ChannelError("process matrix has no positive weight")
    m = np.zeros((2, 2), dtype=complex)
    for k in ops:
        m += k.conj().T @ k
    evals, evecs = np.linalg.eigh(m)
    inv_sqrt = evecs @ np.diag(evals**-0.5) @ evecs.conj().T
    ops = [k @ inv_sqrt for k in ops]
    return QuantumChannel(tuple(ops), interval=cd.interval, provenance="from_choi",
                          completeness_tol=1e-8)


def compose(later: QuantumChannel, earlier: QuantumChannel,
            interval_tol: float = 1e-9) -> QuantumChannel:
    """Sequential composition; Kraus set is the full product set {K_later K_earlier}."""
    if later.dim != earlier.dim:
        raise ChannelError("cannot compose channels of different dimension")
    if abs(later.interval[0] - earlier.interval[1]) > interval_tol:
        raise ChannelError(
            f"interval mismatch: later starts at {later.interval[0]}, "
            f"earlier ends at {earlier.interval[1]}")
    ops = tuple(kl @ ke for kl in later.kraus for ke in earlier.kraus)
    return QuantumChannel(ops, interval=(earlier.interval[0], later.interval[1]),
                          provenance="composed", completeness_tol=1e-9)


def channel_from_transfer(f: np.ndarray, interval=(0.0, 0.0),
                          provenance: str = "from_choi", meta: dict | None = None) -> QuantumChannel:
    """Build the canonical Kraus channel realizing a given transfer matrix."""
    cd = ChoiData(f, choi_from_transfer(f), interval=interval)
    ch = kraus_from_choi(cd)
    if provenance != "from_choi" or meta:
        ch = QuantumChannel(ch.kraus, interval=interval, provenance=provenance,
                            meta=dict(meta or {}), completeness_tol=1e-8)
    return ch
