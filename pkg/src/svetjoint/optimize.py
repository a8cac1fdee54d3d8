"""Maximize the Svetlichny value over measurement angles.

The search space holds a polar/azimuthal pair for each setting of each party.
Each restart runs an adaptive Nelder-Mead simplex from a uniformly random
start; the best restart wins, with ties going to the lower restart index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .measure import Setting
from .qcore import DensityMatrix, Direction, PreconditionError, local_expectations
from .svetlichny import SettingsGrid, bounds, correlator_table, svetlichny_value

TWO_PI = 2.0 * math.pi
DENSE_PRODUCT_MAX = 8


@dataclass(frozen=True, eq=False)
class AngleVector:
    """Angles of shape ``(N, 2, 2)``: ``[party, setting, (theta, phi)]``."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float, copy=True)
        if v.ndim != 3 or v.shape[1:] != (2, 2):
            raise PreconditionError(f"angle array must have shape (N, 2, 2), got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_flat(cls, flat: np.ndarray, n: int) -> AngleVector:
        return cls(np.asarray(flat, dtype=float).reshape(n, 2, 2))

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1).copy()

    def wrapped(self) -> AngleVector:
        """Same directions with theta in [0, pi] and phi in [0, 2pi)."""
        v = self.values.copy()
        theta = np.mod(v[..., 0], TWO_PI)
        flip = theta > math.pi
        theta[flip] = TWO_PI - theta[flip]
        phi = v[..., 1] + np.where(flip, math.pi, 0.0)
        v[..., 0] = theta
        phi = np.mod(phi, TWO_PI)
        # mod of a tiny negative rounds up to exactly 2pi
        phi[phi >= TWO_PI] = 0.0
        v[..., 1] = phi
        return AngleVector(v)

    def unit_vectors(self) -> np.ndarray:
        th, ph = self.values[..., 0], self.values[..., 1]
        return np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1)

    def to_grid(self) -> SettingsGrid:
        return SettingsGrid(
            tuple(
                (Setting(Direction.from_angles(*p[0])), Setting(Direction.from_angles(*p[1])))
                for p in self.values.tolist()
            )
        )


@dataclass
class RestartTrace:
    index: int
    value: float
    evaluations: int
    converged: bool


@dataclass
class OptimizeOutcome:
    best_value: float
    best_angles: AngleVector
    restarts_used: int
    evaluations: int
    converged: bool
    trace: list[RestartTrace] = field(default_factory=list)


def objective(rho: DensityMatrix, angles: AngleVector) -> float:
    """Svetlichny value of the sharp grid described by ``angles``."""
    if angles.n != rho.n_parties:
        raise PreconditionError(f"angles describe {angles.n} parties but the state has {rho.n_parties}")
    return svetlichny_value(correlator_table(rho, angles.to_grid())).value


def search_objective(rho: DensityMatrix) -> Callable[[np.ndarray], float]:
    """Fast Svetlichny value for the simplex search.

    Uses ``v(x) = sqrt(2) Re[exp(-i pi/4) i**k]``, which folds the signed sum
    over all ``2**N`` tuples into one product operator
    ``(x)_j (O_j0 + i O_j1)``, so each call is a single contraction.
    """
    n = rho.n_parties
    phase = math.sqrt(2.0) * complex(math.cos(math.pi / 4), -math.sin(math.pi / 4))
    # below this size forming the product operator beats per-party contraction
    dense = n <= DENSE_PRODUCT_MAX
    rho_t = np.ascontiguousarray(rho.matrix.T).reshape(-1)

    def f(x: np.ndarray) -> float:
        a = x.reshape(n, 2, 2)
        st = np.sin(a[..., 0])
        vx, vy, vz = st * np.cos(a[..., 1]), st * np.sin(a[..., 1]), np.cos(a[..., 0])
        # entries of d.sigma are [[z, x - iy], [x + iy, -z]]; combine setting0 + i setting1
        ops = np.empty((n, 1, 2, 2), dtype=complex)
        ops[:, 0, 0, 0] = vz[:, 0] + 1j * vz[:, 1]
        ops[:, 0, 1, 1] = -ops[:, 0, 0, 0]
        ops[:, 0, 0, 1] = (vx[:, 0] - 1j * vy[:, 0]) + 1j * (vx[:, 1] - 1j * vy[:, 1])
        ops[:, 0, 1, 0] = (vx[:, 0] + 1j * vy[:, 0]) + 1j * (vx[:, 1] + 1j * vy[:, 1])
        if dense:
            big = ops[0, 0]
            for k in range(1, n):
                big = (big[:, None, :, None] * ops[k, 0][None, :, None, :]).reshape(2 * big.shape[0], -1)
            val = rho_t @ big.reshape(-1)
        else:
            val = local_expectations(rho, ops).reshape(())
        return abs((phase * val).real)

    return f


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    evaluations: int
    converged: bool
    diameter: float


def nelder_mead(
    f: Callable[[np.ndarray], float],
    x0: np.ndarray,
    step: float = 0.5,
    tol: float = 1e-9,
    max_evals: int = 200_000,
) -> SimplexResult:
    """Minimize ``f`` with the Nelder-Mead simplex.

    Uses the dimension-dependent coefficients of Gao and Han (2012). Stops when
    the simplex diameter (largest vertex distance from the best vertex) drops
    below ``tol`` or after ``max_evals`` function evaluations.
    """
    x0 = np.asarray(x0, dtype=float)
    dim = x0.size
    alpha = 1.0
    beta = 1.0 + 2.0 / dim
    gamma = 0.75 - 1.0 / (2.0 * dim)
    delta = 1.0 - 1.0 / dim

    simplex = np.empty((dim + 1, dim))
    simplex[0] = x0
    for i in range(dim):
        simplex[i + 1] = x0
        simplex[i + 1, i] += step
    fvals = np.array([f(v) for v in simplex])
    evals = dim + 1

    def diameter() -> float:
        return float(np.max(np.linalg.norm(simplex[1:] - simplex[0], axis=1)))

    while True:
        order = np.argsort(fvals, kind="stable")
        simplex, fvals = simplex[order], fvals[order]
        diam = diameter()
        if diam < tol:
            return SimplexResult(simplex[0].copy(), float(fvals[0]), evals, True, diam)
        if evals >= max_evals:
            return SimplexResult(simplex[0].copy(), float(fvals[0]), evals, False, diam)

        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + alpha * (centroid - worst)
        fr = f(xr)
        evals += 1
        if fr < fvals[0]:
            xe = centroid + beta * (xr - centroid)
            fe = f(xe)
            evals += 1
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-1]:
            xc = centroid + gamma * (xr - centroid)
            fc = f(xc)
            evals += 1
            if fc <= fr:
                simplex[-1], fvals[-1] = xc, fc
                continue
        else:
            xc = centroid - gamma * (centroid - worst)
            fc = f(xc)
            evals += 1
            if fc < fvals[-1]:
                simplex[-1], fvals[-1] = xc, fc
                continue
        # shrink towards the best vertex
        simplex[1:] = simplex[0] + delta * (simplex[1:] - simplex[0])
        for i in range(1, dim + 1):
            fvals[i] = f(simplex[i])
        evals += dim


def random_angles(n: int, rng: np.random.Generator) -> AngleVector:
    theta = rng.uniform(0.0, math.pi, size=(n, 2))
    phi = rng.uniform(0.0, TWO_PI, size=(n, 2))
    return AngleVector(np.stack([theta, phi], axis=-1))


def maximize(
    rho: DensityMatrix,
    restarts: int | None = None,
    seed: int = 0,
    tol: float = 1e-9,
    max_evals: int = 200_000,
    polish: int = 0,
) -> OptimizeOutcome:
    """Best Svetlichny value over ``restarts`` simplex searches.

    Restart ``r`` draws its start from ``SeedSequence([seed, r])`` so a prefix of
    restarts is reproduced exactly when ``restarts`` grows.  With ``polish > 0``
    a converged search is restarted from its best vertex with a small simplex
    while that keeps improving.  The reported value is recomputed from the
    correlator table of the winning angles.
    """
    n = rho.n_parties
    if restarts is None:
        restarts = 8 * n
    if restarts < 1:
        raise PreconditionError(f"restarts must be >= 1, got {restarts}")
    f = search_objective(rho)

    def neg(x: np.ndarray) -> float:
        return -f(x)

    best: tuple[float, np.ndarray] | None = None
    trace = []
    total_evals = 0
    best_converged = False
    for r in range(restarts):
        rng = np.random.default_rng(np.random.SeedSequence([seed, r]))
        x0 = random_angles(n, rng).flat()
        res = nelder_mead(neg, x0, step=0.5, tol=tol, max_evals=max_evals)
        evals = res.evaluations
        for _ in range(polish):
            again = nelder_mead(neg, res.x, step=0.05, tol=tol, max_evals=max_evals)
            evals += again.evaluations
            if again.fun >= res.fun:
                break
            res = again
        value = -res.fun
        total_evals += evals
        trace.append(RestartTrace(r, value, evals, res.converged))
        if best is None or value > best[0]:
            best = (value, res.x)
            best_converged = res.converged
    assert best is not None
    angles = AngleVector.from_flat(best[1], n).wrapped()
    return OptimizeOutcome(
        best_value=objective(rho, angles),
        best_angles=angles,
        restarts_used=restarts,
        evaluations=total_evals,
        converged=best_converged,
        trace=trace,
    )


def central_slopes(rho: DensityMatrix, angles: AngleVector, h: float) -> np.ndarray:
    if h <= 0:
        raise PreconditionError(f"step h must be positive, got {h}")
    f = search_objective(rho)
    x = angles.flat()
    out = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return out


def finite_diff_check(rho: DensityMatrix, angles: AngleVector, h: float) -> float:
    """``max_i |D_h - D_{h/2}|`` over central-difference slopes.

    For a smooth objective this residual is ``3/4 c h**2`` to leading order, so
    it falls about a hundredfold when ``h`` drops tenfold.
    """
    return float(np.max(np.abs(central_slopes(rho, angles, h) - central_slopes(rho, angles, h / 2.0))))


def quantum_bound(n: int) -> float:
    return bounds(n)[1]
