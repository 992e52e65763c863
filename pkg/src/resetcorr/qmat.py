"""Dense complex operator and density-matrix algebra on small qubit registers.

Index convention used throughout the package: the first-listed qubit is the
most significant bit of the computational-basis index, so
``tensor(A, B)`` puts ``A`` on the high-order block (plain Kronecker order).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

MAX_QUBITS = 8  # dense-storage cap; raise deliberately if you really need more

I2 = np.eye(2, dtype=complex)
X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
PAULI_MATS = {"I": I2, "X": X, "Y": Y, "Z": Z}

# single-qubit projectors and ladder operators (qubit basis |0> empty, |1> occupied)
P0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
P1 = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
LOWER = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)   # d = |0><1|
RAISE = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)   # d† = |1><0|

# P_a P_b = phase * P_c for the unnormalized Paulis, keyed by letters
_PAULI_PROD = {
    ("I", "I"): (1, "I"), ("I", "X"): (1, "X"), ("I", "Y"): (1, "Y"), ("I", "Z"): (1, "Z"),
    ("X", "I"): (1, "X"), ("X", "X"): (1, "I"), ("X", "Y"): (1j, "Z"), ("X", "Z"): (-1j, "Y"),
    ("Y", "I"): (1, "Y"), ("Y", "X"): (-1j, "Z"), ("Y", "Y"): (1, "I"), ("Y", "Z"): (1j, "X"),
    ("Z", "I"): (1, "Z"), ("Z", "X"): (1j, "Y"), ("Z", "Y"): (-1j, "X"), ("Z", "Z"): (1, "I"),
}


def _as_square(mat: np.ndarray) -> np.ndarray:
    arr = np.asarray(mat, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {arr.shape}")
    return arr


def num_qubits(dim: int) -> int:
    """Number of qubits for a register dimension; raises if not a power of two."""
    q = int(dim).bit_length() - 1
    if dim <= 0 or 2**q != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    if q > MAX_QUBITS:
        raise ValueError(f"register of {q} qubits exceeds the configured cap {MAX_QUBITS}")
    return q


@dataclass(frozen=True)
class Operator:
    """Dense operator on a qubit register."""

    mat: np.ndarray
    label: str = ""

    def __post_init__(self):
        arr = _as_square(self.mat)
        num_qubits(arr.shape[0])
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "mat", arr)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @property
    def n_qubits(self) -> int:
        return num_qubits(self.dim)

    def dagger(self) -> "Operator":
        return Operator(self.mat.conj().T, label=self.label + "†" if self.label else "")

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        return bool(np.abs(self.mat - self.mat.conj().T).max() <= tol)

    def is_unitary(self, tol: float = 1e-10) -> bool:
        d = self.dim
        return bool(np.abs(self.mat @ self.mat.conj().T - np.eye(d)).max() <= tol)

    def __matmul__(self, other: "Operator") -> "Operator":
        if self.dim != other.dim:
            raise ValueError(f"dim mismatch: {self.dim} vs {other.dim}")
        return Operator(self.mat @ other.mat)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite register state.

    Validation tolerances: trace within 1e-10 (relative), Hermiticity within
    1e-10, smallest eigenvalue >= -1e-9 (roundoff margin for states built by
    repeated channel application).
    """

    mat: np.ndarray

    TRACE_TOL = 1e-10
    HERM_TOL = 1e-10
    EIG_FLOOR = -1e-9

    def __post_init__(self):
        arr = _as_square(self.mat)
        num_qubits(arr.shape[0])
        tr = np.trace(arr)
        if abs(tr - 1.0) > self.TRACE_TOL * max(1.0, abs(tr)):
            raise ValueError(f"trace {tr} is not 1 within tolerance")
        if np.abs(arr - arr.conj().T).max() > self.HERM_TOL:
            raise ValueError("density matrix is not Hermitian within tolerance")
        evals = np.linalg.eigvalsh(arr)
        if evals.min() < self.EIG_FLOOR:
            raise ValueError(f"smallest eigenvalue {evals.min():.3e} below floor")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "mat", arr)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @property
    def n_qubits(self) -> int:
        return num_qubits(self.dim)


@dataclass(frozen=True)
class PauliString:
    """Signed multi-qubit Pauli word, e.g. ``PauliString("XZ", -1j)``.

    The phase is restricted to {1, -1, 1j, -1j} so products close exactly.
    """

    letters: str
    phase: complex = 1.0

    def __post_init__(self):
        if not self.letters or any(c not in "IXYZ" for c in self.letters):
            raise ValueError(f"invalid Pauli letters {self.letters!r}")
        if self.phase not in (1, -1, 1j, -1j):
            raise ValueError(f"phase {self.phase} not in {{±1, ±i}}")
        object.__setattr__(self, "phase", complex(self.phase))

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    def __mul__(self, other: "PauliString") -> "PauliString":
        if len(self.letters) != len(other.letters):
            raise ValueError("Pauli strings act on different register sizes")
        phase = self.phase * other.phase
        out = []
        for a, b in zip(self.letters, other.letters):
            ph, c = _PAULI_PROD[(a, b)]
            phase *= ph
            out.append(c)
        return PauliString("".join(out), phase)

    def to_operator(self) -> Operator:
        mat = np.array([[self.phase]], dtype=complex)
        for c in self.letters:
            mat = np.kron(mat, PAULI_MATS[c])
        return Operator(mat, label=self._label())

    def _label(self) -> str:
        pre = {1 + 0j: "", -1 + 0j: "-", 1j: "i", -1j: "-i"}[self.phase]
        return pre + self.letters


def pauli_operator(letters: str, phase: complex = 1.0) -> Operator:
    """Shorthand for ``PauliString(letters, phase).to_operator()``."""
    return PauliString(letters, phase).to_operator()


def tensor(a: Operator, b: Operator) -> Operator:
    """Kronecker product with the first factor on the high-order qubits."""
    return Operator(np.kron(a.mat, b.mat))


def tensor_mats(*mats: np.ndarray) -> np.ndarray:
    out = np.array([[1.0 + 0.0j]])
    for m in mats:
        out = np.kron(out, m)
    return out


def partial_trace_mat(mat: np.ndarray, n: int, keep: Sequence[int]) -> np.ndarray:
    """Partial trace of a 2^n x 2^n matrix, keeping the listed qubits in order."""
    keep = list(keep)
    if any(q < 0 or q >= n for q in keep):
        raise IndexError(f"keep indices {keep} out of range for {n} qubits")
    if len(set(keep)) != len(keep):
        raise ValueError("duplicate qubit indices in keep")
    traced = [q for q in range(n) if q not in keep]
    t = np.asarray(mat, dtype=complex).reshape((2,) * (2 * n))
    # contract row/column axes of each traced qubit
    for q in sorted(traced, reverse=True):
        t = np.trace(t, axis1=q, axis2=q + (t.ndim // 2))
    d = 2 ** len(keep)
    return t.reshape(d, d)


def partial_trace(rho: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    """Reduced state on the kept qubits (trace preserved)."""
    red = partial_trace_mat(rho.mat, rho.n_qubits, keep)
    return DensityMatrix(red)


def expect(op: Operator, rho: DensityMatrix) -> complex:
    """Tr(O rho); real within roundoff when O is Hermitian."""
    if op.dim != rho.dim:
        raise ValueError(f"dim mismatch: operator {op.dim} vs state {rho.dim}")
    return complex(np.trace(op.mat @ rho.mat))


def embed_mat(op: np.ndarray, n: int, targets: Sequence[int]) -> np.ndarray:
    """Embed an operator acting on ``targets`` (in order) into an n-qubit register."""
    targets = list(targets)
    k = len(targets)
    op = np.asarray(op, dtype=complex)
    if op.shape != (2**k, 2**k):
        raise ValueError(f"operator shape {op.shape} does not match {k} target qubits")
    if any(q < 0 or q >= n for q in targets):
        raise IndexError(f"target indices {targets} out of range for {n} qubits")
    if len(set(targets)) != k:
        raise ValueError("duplicate target qubits")
    rest = [q for q in range(n) if q not in targets]
    full = np.kron(op, np.eye(2 ** len(rest), dtype=complex))
    # kron order is [targets..., rest...]; permute qubit axes back to 0..n-1
    order = targets + rest
    perm = [order.index(q) for q in range(n)]
    t = full.reshape((2,) * (2 * n))
    t = t.transpose(perm + [n + p for p in perm])
    return t.reshape(2**n, 2**n)


def basis_state(n: int, index: int) -> DensityMatrix:
    """Computational basis state |index><index| on n qubits."""
    d = 2**n
    mat = np.zeros((d, d), dtype=complex)
    mat[index, index] = 1.0
    return DensityMatrix(mat)


def random_density_mat(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Random full-rank state (Ginibre construction)."""
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m = g @ g.conj().T
    return m / np.trace(m)


def random_reflection_mat(rng: np.random.Generator) -> np.ndarray:
    """Random single-qubit operator that is both Hermitian and unitary (n̂·σ)."""
    v = rng.normal(size=3)
    v /= np.linalg.norm(v)
    return v[0] * X + v[1] * Y + v[2] * Z
