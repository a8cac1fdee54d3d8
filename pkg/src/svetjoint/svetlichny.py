"""N-party Svetlichny functional, its joint-measurement variant and bounds."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .measure import AdmissibilityError, JointPovm, Setting, busch_margin
from .qcore import DensityMatrix, Direction, PreconditionError, local_expectations

VIOLATION_SLACK = 1e-9
TABLE_TOL = 1e-12

PartySettings = tuple[Setting, Setting]


def setting_tuples(n: int) -> list[tuple[int, ...]]:
    """All ``n``-bit setting tuples in lexicographic order."""
    return list(itertools.product((0, 1), repeat=n))


def sign_v(x: Sequence[int]) -> int:
    """``(-1)**(k(k-1)/2)`` with ``k`` the number of ones in ``x``."""
    k = sum(1 for xi in x if xi)
    return -1 if (k * (k - 1) // 2) % 2 else 1


def bounds(n: int) -> tuple[float, float]:
    """(hybrid, quantum) bounds ``2**(n-1)`` and ``2**(n-1) * sqrt(2)``."""
    if n < 2:
        raise PreconditionError(f"Svetlichny bounds need n >= 2, got {n}")
    hybrid = float(2 ** (n - 1))
    return hybrid, hybrid * math.sqrt(2.0)


def parity_counts(n: int) -> tuple[int, int]:
    """Numbers of co-party tuples ``(x_2..x_n)`` with an even / odd count of ones."""
    if n < 2:
        raise PreconditionError(f"parity_counts needs n >= 2, got {n}")
    even = odd = 0
    for x in itertools.product((0, 1), repeat=n - 1):
        if sum(x) % 2:
            odd += 1
        else:
            even += 1
    return even, odd


@dataclass(frozen=True)
class SettingsGrid:
    """Two settings per party; ``parties[i][x]`` is party ``i+1``'s setting for ``x``."""

    parties: tuple[PartySettings, ...]

    def __post_init__(self) -> None:
        parties = tuple((p[0], p[1]) for p in self.parties)
        if len(parties) < 2:
            raise PreconditionError(f"a settings grid needs at least 2 parties, got {len(parties)}")
        for i, pair in enumerate(parties, start=1):
            for s in pair:
                if not isinstance(s, Setting):
                    raise PreconditionError(f"party {i}: expected Setting values, got {type(s).__name__}")
        object.__setattr__(self, "parties", parties)

    @property
    def n(self) -> int:
        return len(self.parties)

    @classmethod
    def projective(cls, directions: Sequence[tuple[Direction, Direction]]) -> SettingsGrid:
        return cls(tuple((Setting(a, 1.0), Setting(b, 1.0)) for a, b in directions))

    def with_sharpness(self, party: int, eta0: float, eta1: float | None = None) -> SettingsGrid:
        """Copy with party ``party`` (1-based) given new sharpness values."""
        eta1 = eta0 if eta1 is None else eta1
        parties = list(self.parties)
        s0, s1 = parties[party - 1]
        parties[party - 1] = (Setting(s0.direction, eta0), Setting(s1.direction, eta1))
        return SettingsGrid(tuple(parties))

    def sharp(self) -> SettingsGrid:
        return SettingsGrid(tuple((Setting(a.direction, 1.0), Setting(b.direction, 1.0)) for a, b in self.parties))

    def observable_stacks(self) -> list[np.ndarray]:
        """Per party, ``eta d.sigma`` for both settings, shape ``(2, 2, 2)``."""
        return [np.stack([s0.observable(), s1.observable()]) for s0, s1 in self.parties]


@dataclass(frozen=True)
class CorrelatorTable:
    n: int
    values: dict[tuple[int, ...], float]

    def __post_init__(self) -> None:
        if len(self.values) != 2**self.n or set(self.values) != set(setting_tuples(self.n)):
            raise PreconditionError(f"correlator table for {self.n} parties needs all {2**self.n} tuples")
        for x, e in self.values.items():
            if not (-1.0 - TABLE_TOL <= e <= 1.0 + TABLE_TOL):
                raise PreconditionError(f"correlator {x} = {e} lies outside [-1, 1]")

    @classmethod
    def from_array(cls, arr: np.ndarray) -> CorrelatorTable:
        arr = np.asarray(arr, dtype=float)
        n = arr.ndim
        return cls(n, {x: float(arr[x]) for x in setting_tuples(n)})

    def as_array(self) -> np.ndarray:
        arr = np.empty((2,) * self.n)
        for x, e in self.values.items():
            arr[x] = e
        return arr

    def __getitem__(self, x: tuple[int, ...]) -> float:
        return self.values[tuple(x)]


@dataclass(frozen=True)
class SvetlichnyResult:
    value: float
    hybrid_bound: float
    quantum_bound: float
    violates_hybrid: bool
    table: CorrelatorTable = field(repr=False)


def _sign_array(n: int) -> np.ndarray:
    arr = np.empty((2,) * n)
    for x in setting_tuples(n):
        arr[x] = sign_v(x)
    return arr


def _check_dims(rho: DensityMatrix, n: int) -> None:
    if rho.n_parties != n:
        raise PreconditionError(f"state has {rho.n_parties} parties but settings describe {n}")


def correlator(rho: DensityMatrix, grid: SettingsGrid, x: Sequence[int]) -> float:
    """``tr[rho (x)_i eta_i d_i.sigma]`` for the settings selected by ``x``."""
    _check_dims(rho, grid.n)
    x = tuple(x)
    if len(x) != grid.n or any(xi not in (0, 1) for xi in x):
        raise PreconditionError(f"setting tuple {x} does not match {grid.n} binary settings")
    ops = [grid.parties[i][xi].observable()[None] for i, xi in enumerate(x)]
    return float(local_expectations(rho, ops).real.reshape(()))


def correlator_table(rho: DensityMatrix, grid: SettingsGrid) -> CorrelatorTable:
    _check_dims(rho, grid.n)
    arr = local_expectations(rho, grid.observable_stacks())
    return CorrelatorTable.from_array(arr.real)


def svetlichny_sum(table: CorrelatorTable) -> float:
    """Signed sum before the absolute value."""
    return float(np.sum(_sign_array(table.n) * table.as_array()))


def svetlichny_value(table: CorrelatorTable) -> SvetlichnyResult:
    value = abs(svetlichny_sum(table))
    hybrid, quantum = bounds(table.n)
    return SvetlichnyResult(
        value=value,
        hybrid_bound=hybrid,
        quantum_bound=quantum,
        violates_hybrid=value > hybrid + VIOLATION_SLACK,
        table=table,
    )


def evaluate(rho: DensityMatrix, grid: SettingsGrid) -> SvetlichnyResult:
    return svetlichny_value(correlator_table(rho, grid))


def joint_correlators(
    rho: DensityMatrix,
    joint: JointPovm,
    grid_rest: Sequence[PartySettings],
    joint_party: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Correlators of the two joint outcomes with the co-parties' products.

    Returns arrays indexed by the co-party tuple ``(x_2..x_N)`` holding
    ``E(A_J A_2..A_N)`` and ``E(A_J' A_2..A_N)``; both are computed from the
    single four-outcome observable.
    """
    n = rho.n_parties
    rest = [(p[0], p[1]) for p in grid_rest]
    if len(rest) != n - 1:
        raise PreconditionError(f"need settings for {n - 1} co-parties, got {len(rest)}")
    if not 1 <= joint_party <= n:
        raise PreconditionError(f"joint_party must lie in 1..{n}")
    margin = busch_margin(*joint.settings)
    if margin < -1e-12:
        raise AdmissibilityError(margin)
    first = sum(mu * g for (mu, _), g in joint)
    second = sum(nu * g for (_, nu), g in joint)
    stacks = [np.stack([s0.observable(), s1.observable()]) for s0, s1 in rest]
    stacks.insert(joint_party - 1, np.stack([first, second]))
    arr = local_expectations(rho, stacks).real
    arr = np.moveaxis(arr, joint_party - 1, 0)
    return arr[0], arr[1]


def svetlichny_joint_value(
    rho: DensityMatrix,
    joint: JointPovm,
    grid_rest: Sequence[PartySettings],
    joint_party: int = 1,
) -> float:
    """Svetlichny value when one party measures both of its settings jointly.

    For each co-party tuple ``x'`` with ``k'`` ones the contribution is
    ``v(0, x') [E(A_J ...|x') + (-1)**k' E(A_J' ...|x')]``; the absolute value
    is taken after the full sum.
    """
    e_first, e_second = joint_correlators(rho, joint, grid_rest, joint_party)
    total = 0.0
    for xr in setting_tuples(rho.n_parties - 1):
        k = sum(xr)
        total += sign_v((0,) + xr) * (e_first[xr] + (-1) ** k * e_second[xr])
    return abs(total)
