"""Dense qubit linear algebra: Pauli constants, directions, density matrices.

Party indices are 1-based in every public function, and party 1 is the most
significant qubit of the computational basis ordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

MAX_PARTIES = 12
HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
UNIT_TOL = 1e-9

IDENTITY2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = np.stack([PAULI_X, PAULI_Y, PAULI_Z])

for _m in (IDENTITY2, PAULI_X, PAULI_Y, PAULI_Z, PAULIS):
    _m.setflags(write=False)


class PreconditionError(ValueError):
    """An argument violates the documented precondition of an operation."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


def is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and bool(np.all(np.abs(m - m.conj().T) <= tol))


@dataclass(frozen=True)
class Direction:
    """Unit vector on the Bloch sphere."""

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        norm = math.sqrt(self.x**2 + self.y**2 + self.z**2)
        if abs(norm - 1.0) > UNIT_TOL:
            raise PreconditionError(f"direction must be unit length, got norm {norm!r}")

    @classmethod
    def from_angles(cls, theta: float, phi: float) -> Direction:
        st = math.sin(theta)
        return cls(st * math.cos(phi), st * math.sin(phi), math.cos(theta))

    @classmethod
    def normalized(cls, v: Sequence[float]) -> Direction:
        """Rescale an arbitrary nonzero 3-vector to unit length."""
        arr = np.asarray(v, dtype=float)
        if arr.shape != (3,):
            raise PreconditionError(f"expected a 3-vector, got shape {arr.shape}")
        norm = float(np.linalg.norm(arr))
        if norm == 0.0 or not math.isfinite(norm):
            raise PreconditionError("cannot normalize a zero-length or non-finite vector")
        arr = arr / norm
        return cls(float(arr[0]), float(arr[1]), float(arr[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def dot(self, other: Direction) -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def __neg__(self) -> Direction:
        return Direction(-self.x, -self.y, -self.z)


X_AXIS = Direction(1.0, 0.0, 0.0)
Y_AXIS = Direction(0.0, 1.0, 0.0)
Z_AXIS = Direction(0.0, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Unit-trace PSD Hermitian operator on ``n_parties`` qubits."""

    n_parties: int
    matrix: np.ndarray

    def __post_init__(self) -> None:
        n = self.n_parties
        if not 1 <= n <= MAX_PARTIES:
            raise PreconditionError(f"party count must be in [1, {MAX_PARTIES}], got {n}")
        m = _frozen(self.matrix)
        dim = 2**n
        if m.shape != (dim, dim):
            raise PreconditionError(f"expected {dim}x{dim} matrix for {n} parties, got {m.shape}")
        if not is_hermitian(m):
            raise PreconditionError("density matrix is not Hermitian")
        tr = np.trace(m)
        if abs(tr - 1.0) > HERMITIAN_TOL * dim:
            raise PreconditionError(f"density matrix trace is {tr}, expected 1")
        lam = float(np.linalg.eigvalsh(m)[0])
        if lam < -PSD_TOL:
            raise PreconditionError(f"density matrix has negative eigenvalue {lam}")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return 2**self.n_parties

    @classmethod
    def from_pure(cls, psi: Sequence[complex]) -> DensityMatrix:
        psi = np.asarray(psi, dtype=complex)
        n = int(round(math.log2(psi.size)))
        if 2**n != psi.size:
            raise PreconditionError(f"state vector length {psi.size} is not a power of two")
        psi = psi / np.linalg.norm(psi)
        return cls(n, np.outer(psi, psi.conj()))

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def kron_all(mats: Iterable[np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = kron(out, m)
    return out


def bloch_operator(d: Direction) -> np.ndarray:
    """Return ``d . sigma``."""
    if not isinstance(d, Direction):
        raise PreconditionError("bloch_operator expects a Direction")
    return np.tensordot(d.as_array(), PAULIS, axes=1)


def bloch_operator_vec(v: np.ndarray) -> np.ndarray:
    """``v . sigma`` for an arbitrary real 3-vector (no unit check)."""
    return np.tensordot(np.asarray(v, dtype=float), PAULIS, axes=1)


def make_ghz(n: int, phase_sign: int = 1) -> DensityMatrix:
    if n < 2:
        raise PreconditionError(f"GHZ state needs n >= 2, got {n}")
    if phase_sign not in (1, -1):
        raise PreconditionError(f"phase_sign must be +1 or -1, got {phase_sign}")
    dim = 2**n
    psi = np.zeros(dim, dtype=complex)
    psi[0] = 1.0
    psi[-1] = phase_sign
    psi /= math.sqrt(2.0)
    return DensityMatrix(n, np.outer(psi, psi.conj()))


def maximally_mixed(n: int) -> DensityMatrix:
    dim = 2**n
    return DensityMatrix(n, np.eye(dim, dtype=complex) / dim)


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Reduced state on the parties in ``keep`` (1-based)."""
    n = rho.n_parties
    keep = sorted(set(keep))
    if not keep:
        raise PreconditionError("keep set must be nonempty")
    if keep[0] < 1 or keep[-1] > n:
        raise PreconditionError(f"keep indices must lie in 1..{n}, got {keep}")
    t = rho.matrix.reshape((2,) * (2 * n))
    row = list(range(n))
    col = list(range(n, 2 * n))
    for p in range(1, n + 1):
        if p not in keep:
            col[p - 1] = row[p - 1]
    out_idx = [row[p - 1] for p in keep] + [col[p - 1] for p in keep]
    reduced = np.einsum(t, row + col, out_idx)
    k = len(keep)
    return DensityMatrix(k, reduced.reshape(2**k, 2**k))


def expectation(rho: DensityMatrix, obs: np.ndarray) -> float:
    """``Re tr(rho obs)`` for a Hermitian observable."""
    obs = np.asarray(obs, dtype=complex)
    if obs.shape != rho.matrix.shape:
        raise PreconditionError(f"observable shape {obs.shape} does not match state {rho.matrix.shape}")
    if not is_hermitian(obs):
        raise PreconditionError("observable is not Hermitian")
    # tr(AB) without forming the product
    val = np.sum(rho.matrix * obs.T)
    assert abs(val.imag) <= HERMITIAN_TOL * max(1.0, float(np.abs(obs).max()) * rho.dim), val
    return float(val.real)


def local_expectations(rho: DensityMatrix, local_ops: Sequence[np.ndarray]) -> np.ndarray:
    """Expectations of every tensor product of local operators.

    ``local_ops[i]`` is a stack of shape ``(m_i, 2, 2)`` for party ``i+1``; the
    result has shape ``(m_1, ..., m_N)`` with entry ``tr[rho (op_1 x ... x op_N)]``.
    Parties are contracted one at a time from the most significant qubit, so the
    ``2**N``-dimensional product operators are never formed.
    """
    n = rho.n_parties
    if len(local_ops) != n:
        raise PreconditionError(f"need {n} local operator stacks, got {len(local_ops)}")
    t = rho.matrix.reshape(1, rho.dim, rho.dim)
    shape = []
    for ops in local_ops:
        ops = np.asarray(ops, dtype=complex)
        if ops.ndim != 3 or ops.shape[1:] != (2, 2):
            raise PreconditionError(f"local operator stack must have shape (m, 2, 2), got {ops.shape}")
        m, rows, _ = t.shape
        d = rows // 2
        t = t.reshape(m, 2, d, 2, d)
        # sum over (row, col) of this party: ops[s, col, row] * t[m, row, ., col, .]
        u = np.tensordot(t, ops, axes=([1, 3], [2, 1]))
        t = np.moveaxis(u, 3, 1).reshape(m * ops.shape[0], d, d)
        shape.append(ops.shape[0])
    return t.reshape(shape)


def random_state(n: int, purity: str = "pure", seed: int = 0) -> DensityMatrix:
    """Random ``n``-qubit state, deterministic in ``seed``.

    Pure states are Haar-random vectors; mixed states are Dirichlet(1,...,1)
    mixtures of ``2**n`` Haar-random pure states.
    """
    if n < 1:
        raise PreconditionError(f"n must be >= 1, got {n}")
    if purity not in ("pure", "mixed"):
        raise PreconditionError(f"purity must be 'pure' or 'mixed', got {purity!r}")
    rng = np.random.default_rng(seed)
    dim = 2**n

    def haar() -> np.ndarray:
        v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        return v / np.linalg.norm(v)

    if purity == "pure":
        psi = haar()
        return DensityMatrix(n, np.outer(psi, psi.conj()))
    weights = rng.dirichlet(np.ones(dim))
    m = np.zeros((dim, dim), dtype=complex)
    for w in weights:
        psi = haar()
        m += w * np.outer(psi, psi.conj())
    m = 0.5 * (m + m.conj().T)
    m /= np.trace(m).real
    return DensityMatrix(n, m)


def random_direction(rng: np.random.Generator) -> Direction:
    v = rng.normal(size=3)
    while np.linalg.norm(v) < 1e-8:
        v = rng.normal(size=3)
    return Direction.normalized(v)


def min_eigenvalue_hermitian(m: np.ndarray) -> float:
    m = np.asarray(m, dtype=complex)
    if not is_hermitian(m):
        raise PreconditionError("min_eigenvalue_hermitian needs a Hermitian matrix")
    if m.shape == (2, 2):
        half_tr = 0.5 * (m[0, 0].real + m[1, 1].real)
        # (tr/2)^2 - det written as a sum of squares to avoid cancellation
        disc = (0.5 * (m[0, 0].real - m[1, 1].real)) ** 2 + abs(m[0, 1]) ** 2
        return half_tr - math.sqrt(disc)
    return float(np.linalg.eigvalsh(m)[0])
