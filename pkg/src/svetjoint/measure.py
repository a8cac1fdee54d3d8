"""Projective, unsharp and joint qubit measurements.

Joint measurability of two unsharp binary observables is decided by the
Busch condition ``|e1 a + e2 a'| + |e1 a - e2 a'| <= 2``.  When it holds,
:func:`joint_povm` builds the four-outcome observable

    G(mu, nu) = 1/4 [ (1 + mu nu e1 e2 a.a') I + (mu e1 a + nu e2 a').sigma ]

whose two binary marginals are the requested unsharp observables.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .qcore import (
    HERMITIAN_TOL,
    IDENTITY2,
    DensityMatrix,
    Direction,
    PreconditionError,
    bloch_operator,
    bloch_operator_vec,
    expectation,
    min_eigenvalue_hermitian,
)

ADMISSIBILITY_SLACK = 1e-12
OUTCOMES = (1, -1)
JOINT_OUTCOMES = ((1, 1), (1, -1), (-1, 1), (-1, -1))


class AdmissibilityError(ValueError):
    """The requested pair of unsharp observables is not jointly measurable."""

    def __init__(self, margin: float, message: str | None = None) -> None:
        self.margin = margin
        super().__init__(message or f"settings are not jointly measurable (Busch margin {margin:.6g} < 0)")


@dataclass(frozen=True)
class Setting:
    """Measurement direction plus sharpness ``eta`` in [0, 1]."""

    direction: Direction
    sharpness: float = 1.0

    def __post_init__(self) -> None:
        if not isinstance(self.direction, Direction):
            raise PreconditionError("Setting.direction must be a Direction")
        if not (0.0 <= self.sharpness <= 1.0):
            raise PreconditionError(f"sharpness must be in [0, 1], got {self.sharpness!r}")

    @property
    def is_nondegenerate(self) -> bool:
        """False for the degenerate ``eta == 0`` observable."""
        return self.sharpness > 0.0

    def vector(self) -> np.ndarray:
        return self.sharpness * self.direction.as_array()

    def observable(self) -> np.ndarray:
        """``eta d.sigma``, the plus-minus difference of the two effects."""
        return self.sharpness * bloch_operator(self.direction)


def _check_effect(m: np.ndarray, label: str) -> np.ndarray:
    m = np.array(m, dtype=complex, copy=True)
    if m.shape != (2, 2):
        raise PreconditionError(f"{label}: effect must be 2x2, got {m.shape}")
    lam = min_eigenvalue_hermitian(m)
    if lam < -HERMITIAN_TOL:
        raise PreconditionError(f"{label}: effect is not PSD (min eigenvalue {lam:.3g})")
    m.setflags(write=False)
    return m


@dataclass(frozen=True, eq=False)
class BinaryPovm:
    plus: np.ndarray
    minus: np.ndarray

    def __post_init__(self) -> None:
        plus = _check_effect(self.plus, "plus")
        minus = _check_effect(self.minus, "minus")
        if np.abs(plus + minus - IDENTITY2).max() > HERMITIAN_TOL:
            raise PreconditionError("binary POVM effects do not sum to identity")
        object.__setattr__(self, "plus", plus)
        object.__setattr__(self, "minus", minus)

    @property
    def labels(self) -> tuple[int, int]:
        return OUTCOMES

    def effect(self, outcome: int) -> np.ndarray:
        if outcome == 1:
            return self.plus
        if outcome == -1:
            return self.minus
        raise KeyError(outcome)

    def stack(self) -> np.ndarray:
        """Effects in label order, shape ``(2, 2, 2)``."""
        return np.stack([self.plus, self.minus])


@dataclass(frozen=True, eq=False)
class JointPovm:
    effects: dict[tuple[int, int], np.ndarray]
    settings: tuple[Setting, Setting]

    def __post_init__(self) -> None:
        if set(self.effects) != set(JOINT_OUTCOMES):
            raise PreconditionError(f"joint POVM needs effects for {JOINT_OUTCOMES}")
        effects = {k: _check_effect(self.effects[k], f"G{k}") for k in JOINT_OUTCOMES}
        total = sum(effects.values())
        if np.abs(total - IDENTITY2).max() > HERMITIAN_TOL:
            raise PreconditionError("joint POVM effects do not sum to identity")
        object.__setattr__(self, "effects", effects)
        s1, s2 = self.settings
        for sign in OUTCOMES:
            want1 = 0.5 * (IDENTITY2 + sign * s1.observable())
            want2 = 0.5 * (IDENTITY2 + sign * s2.observable())
            if np.abs(self.first_marginal(sign) - want1).max() > HERMITIAN_TOL:
                raise PreconditionError("first marginal does not reproduce the unsharp observable")
            if np.abs(self.second_marginal(sign) - want2).max() > HERMITIAN_TOL:
                raise PreconditionError("second marginal does not reproduce the unsharp observable")

    @property
    def labels(self) -> tuple[tuple[int, int], ...]:
        return JOINT_OUTCOMES

    def __iter__(self) -> Iterator[tuple[tuple[int, int], np.ndarray]]:
        return ((k, self.effects[k]) for k in JOINT_OUTCOMES)

    def first_marginal(self, mu: int) -> np.ndarray:
        return self.effects[(mu, 1)] + self.effects[(mu, -1)]

    def second_marginal(self, nu: int) -> np.ndarray:
        return self.effects[(1, nu)] + self.effects[(-1, nu)]

    def stack(self) -> np.ndarray:
        return np.stack([self.effects[k] for k in JOINT_OUTCOMES])

    def min_eigenvalue(self) -> float:
        return min(min_eigenvalue_hermitian(g) for g in self.effects.values())


def projective_povm(d: Direction) -> BinaryPovm:
    op = bloch_operator(d)
    return BinaryPovm(0.5 * (IDENTITY2 + op), 0.5 * (IDENTITY2 - op))


def unsharp_povm(s: Setting) -> BinaryPovm:
    op = s.observable()
    return BinaryPovm(0.5 * (IDENTITY2 + op), 0.5 * (IDENTITY2 - op))


def busch_margin(s1: Setting, s2: Setting) -> float:
    """``2 - (|e1 a + e2 a'| + |e1 a - e2 a'|)``; jointly measurable iff >= 0."""
    u, w = s1.vector(), s2.vector()
    return 2.0 - (float(np.linalg.norm(u + w)) + float(np.linalg.norm(u - w)))


def equal_sharpness_max(a: Direction, a2: Direction) -> float:
    """Largest common sharpness at which ``a`` and ``a2`` stay jointly measurable."""
    u, w = a.as_array(), a2.as_array()
    return 2.0 / (float(np.linalg.norm(u + w)) + float(np.linalg.norm(u - w)))


def joint_effect_matrices(s1: Setting, s2: Setting) -> dict[tuple[int, int], np.ndarray]:
    """The four candidate effects, with no positivity check."""
    u, w = s1.vector(), s2.vector()
    gamma = float(u @ w)
    return {
        (mu, nu): 0.25 * ((1.0 + mu * nu * gamma) * IDENTITY2 + bloch_operator_vec(mu * u + nu * w))
        for mu, nu in JOINT_OUTCOMES
    }


def joint_min_eigenvalue(s1: Setting, s2: Setting) -> float:
    """Closed form ``min 1/4 [(1 + mu nu gamma) - |mu e1 a + nu e2 a'|]``."""
    u, w = s1.vector(), s2.vector()
    gamma = float(u @ w)
    return min(
        0.25 * ((1.0 + mu * nu * gamma) - float(np.linalg.norm(mu * u + nu * w)))
        for mu, nu in JOINT_OUTCOMES
    )


def joint_povm(s1: Setting, s2: Setting) -> JointPovm:
    margin = busch_margin(s1, s2)
    if margin < -ADMISSIBILITY_SLACK:
        raise AdmissibilityError(margin)
    return JointPovm(joint_effect_matrices(s1, s2), (s1, s2))


def verify_proportionality(rho: DensityMatrix, s: Setting) -> float:
    """Residual of ``tr[rho E(+)] - tr[rho E(-)] = eta tr[rho d.sigma]``."""
    if rho.n_parties != 1:
        raise PreconditionError(f"proportionality check needs a single-qubit state, got {rho.n_parties} parties")
    povm = unsharp_povm(s)
    lhs = expectation(rho, povm.plus) - expectation(rho, povm.minus)
    rhs = s.sharpness * expectation(rho, bloch_operator(s.direction))
    return abs(lhs - rhs)


def joint_from_directions(a: Direction, a2: Direction, eta1: float, eta2: float | None = None) -> JointPovm:
    """Convenience wrapper: joint observable of ``eta1 a`` and ``eta2 a2``."""
    if eta2 is None:
        eta2 = eta1
    return joint_povm(Setting(a, eta1), Setting(a2, eta2))
