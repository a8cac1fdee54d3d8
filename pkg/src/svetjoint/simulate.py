"""Outcome statistics, Monte Carlo sampling and numerical audits.

Exact outcome distributions come straight from the Born rule on product
measurements.  The audits replay the joint-measurement derivation of the
Svetlichny bound step by step on those exact distributions: every identity,
every inequality, the no-signaling equalities and the final counting.

Random draws use numpy's PCG64 generator seeded through
``SeedSequence([seed, stream])`` and inverse-CDF lookup over the fixed label
order, so a given seed reproduces the same shots on every platform.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence, TextIO, Union

import numpy as np

from .measure import BinaryPovm, JointPovm, unsharp_povm
from .qcore import DensityMatrix, PreconditionError, local_expectations
from .svetlichny import (
    CorrelatorTable,
    PartySettings,
    SettingsGrid,
    bounds,
    parity_counts,
    setting_tuples,
    sign_v,
    svetlichny_joint_value,
)

EXACT_TOL = 1e-12
CLAMP_TOL = 1e-14
SIGMA_LEVEL = 5.0

Povm = Union[BinaryPovm, JointPovm]
Label = tuple


@dataclass(frozen=True, eq=False)
class OutcomePmf:
    """Probabilities over outcome tuples in lexicographic label order.

    Single outcomes are ordered ``(+1, -1)``; a jointly measured party
    contributes a ``(mu, nu)`` pair ordered ``++, +-, -+, --``.
    """

    labels: tuple[Label, ...]
    probs: np.ndarray

    def __post_init__(self) -> None:
        p = np.array(self.probs, dtype=float, copy=True).reshape(-1)
        if p.size != len(self.labels):
            raise PreconditionError("pmf needs one probability per label")
        if np.any(p < -CLAMP_TOL):
            raise PreconditionError(f"negative probability {p.min():.3g}")
        p[p < 0.0] = 0.0
        if abs(p.sum() - 1.0) > EXACT_TOL:
            raise PreconditionError(f"probabilities sum to {p.sum()!r}")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    def __iter__(self):
        return zip(self.labels, self.probs)

    def prob(self, label: Label) -> float:
        return float(self.probs[self.labels.index(label)])

    def marginal(self, keep: Sequence[int]) -> dict[Label, float]:
        """Distribution of the outcomes of parties ``keep`` (1-based)."""
        out: dict[Label, float] = {}
        for label, p in self:
            key = tuple(label[i - 1] for i in keep)
            out[key] = out.get(key, 0.0) + float(p)
        return out


@dataclass(frozen=True)
class ShotRecord:
    settings_tuple: tuple[int, ...]
    outcomes: tuple
    seed_info: str


@dataclass(frozen=True)
class AuditCheck:
    name: str
    lhs: float
    rhs: float
    slack: float
    passed: bool
    relation: str = "<="


@dataclass
class AuditReport:
    checks: list[AuditCheck] = field(default_factory=list)

    @property
    def overall(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[AuditCheck]:
        return [c for c in self.checks if not c.passed]

    def le(self, name: str, lhs: float, rhs: float, slack: float = EXACT_TOL) -> None:
        self.checks.append(AuditCheck(name, float(lhs), float(rhs), slack, lhs - rhs <= slack, "<="))

    def eq(self, name: str, lhs: float, rhs: float, slack: float = EXACT_TOL) -> None:
        self.checks.append(AuditCheck(name, float(lhs), float(rhs), slack, abs(lhs - rhs) <= slack, "=="))

    def extend(self, other: AuditReport) -> None:
        self.checks.extend(other.checks)

    def as_dict(self) -> dict:
        return {
            "overall": self.overall,
            "checks": [
                {
                    "name": c.name,
                    "lhs": c.lhs,
                    "rhs": c.rhs,
                    "relation": c.relation,
                    "slack": c.slack,
                    "passed": c.passed,
                }
                for c in self.checks
            ],
        }


def outcome_distribution(rho: DensityMatrix, povms: Sequence[Povm]) -> OutcomePmf:
    """Exact ``P(o) = tr[rho (x)_i F_i(o_i)]`` for every outcome tuple."""
    if len(povms) != rho.n_parties:
        raise PreconditionError(f"state has {rho.n_parties} parties but {len(povms)} POVMs were given")
    for p in povms:
        if not isinstance(p, (BinaryPovm, JointPovm)):
            raise PreconditionError(f"unsupported POVM type {type(p).__name__}")
    arr = local_expectations(rho, [p.stack() for p in povms]).real
    labels = tuple(itertools.product(*(p.labels for p in povms)))
    return OutcomePmf(labels, arr.reshape(-1))


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, stream])))


def draw_indices(pmf: OutcomePmf, shots: int, seed: int, stream: int = 0) -> np.ndarray:
    """Inverse-CDF draws of label indices."""
    if shots < 1:
        raise PreconditionError(f"shots must be >= 1, got {shots}")
    cdf = np.cumsum(pmf.probs)
    u = _rng(seed, stream).random(shots)
    idx = np.searchsorted(cdf, u, side="right")
    # u can land above a cdf that sums to 1 - ulp; assign to the last nonzero label
    last = int(np.flatnonzero(pmf.probs)[-1])
    return np.minimum(idx, last)


def sample_outcomes(
    pmf: OutcomePmf,
    shots: int,
    seed: int,
    settings_tuple: tuple[int, ...] = (),
    tasks: int = 1,
    stream: int = 0,
) -> list[ShotRecord]:
    """I.i.d. shots from ``pmf``.

    With ``tasks > 1`` the shots are split into contiguous blocks and block ``t``
    uses stream ``stream * tasks + t``; blocks are concatenated in task order.
    """
    if tasks < 1:
        raise PreconditionError("tasks must be >= 1")
    sizes = [shots // tasks + (1 if t < shots % tasks else 0) for t in range(tasks)]
    records: list[ShotRecord] = []
    for t, size in enumerate(sizes):
        if size == 0:
            continue
        sub = stream * tasks + t
        info = f"pcg64:{seed}:{sub}"
        for i in draw_indices(pmf, size, seed, sub):
            records.append(ShotRecord(tuple(settings_tuple), pmf.labels[i], info))
    return records


def _product(outcomes: Iterable[int]) -> int:
    out = 1
    for o in outcomes:
        out *= o
    return out


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    n = values.size
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, se


@dataclass
class EmpiricalTable:
    table: CorrelatorTable
    stderr: dict[tuple[int, ...], float]
    shots: dict[tuple[int, ...], int]

    def svetlichny_estimate(self) -> tuple[float, float]:
        """``|sum v(x) E(x)|`` and its standard error (tuples sampled independently)."""
        total = sum(sign_v(x) * e for x, e in self.table.values.items())
        se = math.sqrt(sum(s * s for s in self.stderr.values()))
        return abs(total), se


def empirical_correlators(samples: Mapping[tuple[int, ...], Sequence[ShotRecord]]) -> EmpiricalTable:
    """Sample means of outcome products for each setting tuple."""
    if not samples:
        raise PreconditionError("no samples given")
    n = len(next(iter(samples)))
    missing = [x for x in setting_tuples(n) if not samples.get(x)]
    if missing:
        raise PreconditionError(f"no shots for setting tuples {missing}")
    values, stderr, shots = {}, {}, {}
    for x in setting_tuples(n):
        prods = np.array([_product(r.outcomes) for r in samples[x]], dtype=float)
        values[x], stderr[x] = _mean_se(prods)
        shots[x] = prods.size
    return EmpiricalTable(CorrelatorTable(n, values), stderr, shots)


def _flatten_joint(outcomes: tuple, joint_party: int) -> tuple[int, int, int]:
    """(mu, nu, product of co-party outcomes)."""
    mu, nu = outcomes[joint_party - 1]
    rest = [o for i, o in enumerate(outcomes) if i != joint_party - 1]
    return mu, nu, _product(rest)


@dataclass
class EmpiricalJoint:
    first: dict[tuple[int, ...], float]
    second: dict[tuple[int, ...], float]
    first_se: dict[tuple[int, ...], float]
    second_se: dict[tuple[int, ...], float]
    combined_se: dict[tuple[int, ...], float]

    def svetlichny_estimate(self) -> tuple[float, float]:
        total = 0.0
        for xr in self.first:
            k = sum(xr)
            total += sign_v((0,) + xr) * (self.first[xr] + (-1) ** k * self.second[xr])
        se = math.sqrt(sum(s * s for s in self.combined_se.values()))
        return abs(total), se


def empirical_joint_correlators(
    samples: Mapping[tuple[int, ...], Sequence[ShotRecord]], joint_party: int = 1
) -> EmpiricalJoint:
    """Both joint-outcome correlators per co-party tuple, from the same shots."""
    if not samples:
        raise PreconditionError("no samples given")
    m = len(next(iter(samples)))
    missing = [x for x in setting_tuples(m) if not samples.get(x)]
    if missing:
        raise PreconditionError(f"no shots for co-party tuples {missing}")
    first, second, first_se, second_se, comb_se = {}, {}, {}, {}, {}
    for xr in setting_tuples(m):
        arr = np.array([_flatten_joint(r.outcomes, joint_party) for r in samples[xr]], dtype=float)
        e1 = arr[:, 0] * arr[:, 2]
        e2 = arr[:, 1] * arr[:, 2]
        first[xr], first_se[xr] = _mean_se(e1)
        second[xr], second_se[xr] = _mean_se(e2)
        _, comb_se[xr] = _mean_se(e1 + (-1) ** sum(xr) * e2)
    return EmpiricalJoint(first, second, first_se, second_se, comb_se)


def _co_povms(grid_rest: Sequence[PartySettings], xr: tuple[int, ...]) -> list[BinaryPovm]:
    return [unsharp_povm(pair[xi]) for pair, xi in zip(grid_rest, xr)]


def joint_pmf(
    rho: DensityMatrix,
    joint: JointPovm,
    co_povms: Sequence[BinaryPovm],
    joint_party: int = 1,
) -> OutcomePmf:
    povms: list[Povm] = list(co_povms)
    povms.insert(joint_party - 1, joint)
    return outcome_distribution(rho, povms)


def agreement_probability(
    rho: DensityMatrix,
    joint: JointPovm,
    co_povms: Sequence[BinaryPovm],
    joint_party: int = 1,
) -> tuple[float, float]:
    """``(P(A_J = A_J'), P(A_J = -A_J'))`` for the jointly measured party."""
    pmf = joint_pmf(rho, joint, co_povms, joint_party)
    p_equal = sum(float(p) for label, p in pmf if label[joint_party - 1][0] == label[joint_party - 1][1])
    return p_equal, 1.0 - p_equal


def _joint_gamma(joint: JointPovm) -> float:
    s1, s2 = joint.settings
    return float(s1.vector() @ s2.vector())


def audit_no_signaling(
    rho: DensityMatrix,
    joint: JointPovm,
    grid_rest: Sequence[PartySettings],
    shots: int | None = None,
    seed: int = 0,
    joint_party: int = 1,
) -> AuditReport:
    """Agreement probability of the joint party under every co-party choice.

    Exact values must coincide across all co-party tuples (and with the
    state-independent value ``(1 + e1 e2 a.a') / 2``); with ``shots`` each
    tuple is also sampled and checked against the exact value at 5 sigma.
    """
    grid_rest = [(p[0], p[1]) for p in grid_rest]
    report = AuditReport()
    tuples = setting_tuples(rho.n_parties - 1)
    exact = {}
    pmfs = {}
    for xr in tuples:
        pmfs[xr] = joint_pmf(rho, joint, _co_povms(grid_rest, xr), joint_party)
        p_eq = sum(float(p) for label, p in pmfs[xr] if label[joint_party - 1][0] == label[joint_party - 1][1])
        exact[xr] = p_eq
    ref = tuples[0]
    closed = 0.5 * (1.0 + _joint_gamma(joint))
    for xr in tuples:
        tag = "".join(map(str, xr))
        report.eq(f"no_signaling_exact[{tag}]", exact[xr], exact[ref])
        report.eq(f"agreement_closed_form[{tag}]", exact[xr], closed)
    if shots is not None:
        for stream, xr in enumerate(tuples):
            tag = "".join(map(str, xr))
            idx = draw_indices(pmfs[xr], shots, seed, stream)
            labels = pmfs[xr].labels
            equal_mask = np.array([lab[joint_party - 1][0] == lab[joint_party - 1][1] for lab in labels])
            p_hat = float(equal_mask[idx].mean())
            p = exact[xr]
            sigma = math.sqrt(max(p * (1.0 - p), 0.0) / shots)
            report.le(f"no_signaling_sampled[{tag}]", abs(p_hat - p), SIGMA_LEVEL * sigma, EXACT_TOL)
    return report


@dataclass(frozen=True)
class _JointStats:
    """Exact statistics of one co-party tuple in a joint-measurement run."""

    e_first: float
    e_second: float
    # P(mu = s nu = C) and P(mu = s nu = -C) for s = +1 (equal) and s = -1 (unequal)
    eq_plus: float
    eq_minus: float
    neq_plus: float
    neq_minus: float

    @property
    def p_equal(self) -> float:
        return self.eq_plus + self.eq_minus

    @property
    def p_unequal(self) -> float:
        return self.neq_plus + self.neq_minus


def _joint_stats(pmf: OutcomePmf) -> _JointStats:
    e1 = e2 = 0.0
    eq_p = eq_m = ne_p = ne_m = 0.0
    for label, p in pmf:
        mu, nu, c = _flatten_joint(label, 1)
        p = float(p)
        e1 += mu * c * p
        e2 += nu * c * p
        if mu == nu:
            if mu == c:
                eq_p += p
            else:
                eq_m += p
        else:
            if mu == c:
                ne_p += p
            else:
                ne_m += p
    return _JointStats(e1, e2, eq_p, eq_m, ne_p, ne_m)


def _co_parties(grid: SettingsGrid, rho: DensityMatrix) -> list[PartySettings]:
    if grid.n != rho.n_parties:
        raise PreconditionError(f"grid has {grid.n} parties but the state has {rho.n_parties}")
    return list(grid.parties[1:])


def _stats_by_tuple(rho: DensityMatrix, grid: SettingsGrid, joint: JointPovm) -> dict[tuple[int, ...], _JointStats]:
    rest = _co_parties(grid, rho)
    return {
        xr: _joint_stats(joint_pmf(rho, joint, _co_povms(rest, xr)))
        for xr in setting_tuples(rho.n_parties - 1)
    }


def audit_chain_three(rho: DensityMatrix, grid: SettingsGrid, joint: JointPovm) -> AuditReport:
    """Replay the three-party derivation on exact joint statistics.

    Party 1 measures ``joint``; its entry in ``grid`` is not used.  Co-party
    tuples are named ``bc``, ``bc'``, ``b'c``, ``b'c'``.
    """
    if rho.n_parties != 3:
        raise PreconditionError(f"three-party audit needs 3 parties, got {rho.n_parties}")
    stats = _stats_by_tuple(rho, grid, joint)
    names = {(0, 0): "bc", (0, 1): "bc'", (1, 0): "b'c", (1, 1): "b'c'"}
    # which combination E1 +/- E2 appears, and the matching agreement event
    combos = {(0, 0): 1, (0, 1): -1, (1, 0): -1, (1, 1): 1}
    report = AuditReport()
    bound_terms = 0.0
    signed_sum = 0.0
    for xr, s in combos.items():
        st, tag = stats[xr], names[xr]
        x = st.e_first + s * st.e_second
        if s == 1:
            split, prob = 2.0 * (st.eq_plus - st.eq_minus), st.p_equal
        else:
            split, prob = 2.0 * (st.neq_plus - st.neq_minus), st.p_unequal
        report.eq(f"pair_identity[{tag}]", x, split)
        report.le(f"pair_bound[{tag}]", x, 2.0 * prob)
        report.le(f"pair_abs_bound[{tag}]", abs(x), 2.0 * prob)
        bound_terms += 2.0 * prob
        signed_sum += sign_v((0,) + xr) * x
    s3j = abs(signed_sum)
    report.le("aggregate_bound", s3j, bound_terms)
    report.eq("no_signaling[equal: bc = b'c']", stats[(0, 0)].p_equal, stats[(1, 1)].p_equal)
    report.eq("no_signaling[unequal: bc' = b'c]", stats[(0, 1)].p_unequal, stats[(1, 0)].p_unequal)
    report.eq("aggregate_after_no_signaling", bound_terms, 4.0)
    report.eq(
        "joint_value_consistency",
        s3j,
        svetlichny_joint_value(rho, joint, _co_parties(grid, rho)),
    )
    report.le("hybrid_bound", s3j, 4.0)
    return report


def audit_chain_n(rho: DensityMatrix, grid: SettingsGrid, joint: JointPovm) -> AuditReport:
    """Replay the N-party derivation on exact joint statistics.

    For a co-party tuple with ``k'`` ones let ``X = E(A_J..) + (-1)**k' E(A_J'..)``.
    Checked per tuple: ``X = 2[P(mu = s nu = C) - P(mu = s nu = -C)]`` with
    ``s = (-1)**k'``, then ``v(0, x') X <= |X| <= 2 P(mu = s nu)``.  The signed
    step is bounded through ``|X|``; bounding it by ``X`` alone fails whenever
    ``v = -1`` and ``X < 0``.
    """
    n = rho.n_parties
    if n < 3:
        raise PreconditionError(f"N-party audit needs N >= 3, got {n}")
    stats = _stats_by_tuple(rho, grid, joint)
    hybrid, _ = bounds(n)
    report = AuditReport()
    n_even = n_odd = 0
    bound_terms = 0.0
    signed_sum = 0.0
    for xr, st in stats.items():
        tag = "".join(map(str, xr))
        k = sum(xr)
        if k % 2 == 0:
            n_even += 1
            x = st.e_first + st.e_second
            split, prob, kind = 2.0 * (st.eq_plus - st.eq_minus), st.p_equal, "even"
        else:
            n_odd += 1
            x = st.e_first - st.e_second
            split, prob, kind = 2.0 * (st.neq_plus - st.neq_minus), st.p_unequal, "odd"
        term = sign_v((0,) + xr) * x
        report.eq(f"{kind}_identity[{tag}]", x, split)
        report.le(f"{kind}_signed_step[{tag}]", term, abs(x))
        report.le(f"{kind}_bound[{tag}]", abs(x), 2.0 * prob)
        bound_terms += 2.0 * prob
        signed_sum += term
    ref = stats[setting_tuples(n - 1)[0]]
    for xr, st in stats.items():
        tag = "".join(map(str, xr))
        report.eq(f"no_signaling_equal[{tag}]", st.p_equal, ref.p_equal)
    even, odd = parity_counts(n)
    report.eq("even_count", n_even, even, 0.0)
    report.eq("odd_count", n_odd, odd, 0.0)
    report.eq("even_count_closed_form", even, 2 ** (n - 2), 0.0)
    snj = abs(signed_sum)
    report.le("aggregate_bound", snj, bound_terms)
    report.eq("aggregate_after_no_signaling", bound_terms, hybrid)
    report.eq("joint_value_consistency", snj, svetlichny_joint_value(rho, joint, _co_parties(grid, rho)))
    report.le("hybrid_bound", snj, hybrid)
    return report


def write_shots_csv(records: Sequence[ShotRecord], out: Union[str, Path, TextIO], joint_party: int | None = None) -> None:
    """Write shots as CSV.

    Columns are ``party_settings,outcomes,weight``; with a jointly measured
    party its pair goes to ``aJ,aJp`` ahead of ``outcomes``.  Setting tuples
    are bit strings, outcomes space-separated ``+1/-1`` integers.
    """
    own = isinstance(out, (str, Path))
    fh: TextIO = open(out, "w", newline="") if own else out  # type: ignore[arg-type]
    try:
        w = csv.writer(fh, lineterminator="\n")
        if joint_party is None:
            w.writerow(["party_settings", "outcomes", "weight"])
        else:
            w.writerow(["party_settings", "aJ", "aJp", "outcomes", "weight"])
        for r in records:
            bits = "".join(map(str, r.settings_tuple))
            if joint_party is None:
                w.writerow([bits, " ".join(str(int(o)) for o in r.outcomes), 1])
            else:
                mu, nu = r.outcomes[joint_party - 1]
                rest = [o for i, o in enumerate(r.outcomes) if i != joint_party - 1]
                w.writerow([bits, int(mu), int(nu), " ".join(str(int(o)) for o in rest), 1])
    finally:
        if own:
            fh.close()


def read_shots_csv(src: Union[str, Path, TextIO]) -> list[dict]:
    """Parse a shots CSV back into plain rows (for inspection and tests)."""
    text = Path(src).read_text() if isinstance(src, (str, Path)) else src.read()
    rows = []
    for row in csv.DictReader(io.StringIO(text)):
        parsed = {
            "party_settings": tuple(int(c) for c in row["party_settings"]),
            "outcomes": tuple(int(o) for o in row["outcomes"].split()),
            "weight": float(row["weight"]),
        }
        if "aJ" in row:
            parsed["aJ"] = int(row["aJ"])
            parsed["aJp"] = int(row["aJp"])
        rows.append(parsed)
    return rows


def exact_settings_pmf(rho: DensityMatrix, grid: SettingsGrid, x: tuple[int, ...]) -> OutcomePmf:
    return outcome_distribution(rho, [unsharp_povm(pair[xi]) for pair, xi in zip(grid.parties, x)])


def enumerated_correlator(rho: DensityMatrix, grid: SettingsGrid, x: tuple[int, ...]) -> float:
    """Correlator as ``sum over outcome strings of product * probability``."""
    return float(sum(_product(label) * p for label, p in exact_settings_pmf(rho, grid, x)))


def sample_grid(
    rho: DensityMatrix, grid: SettingsGrid, shots: int, seed: int
) -> dict[tuple[int, ...], list[ShotRecord]]:
    """``shots`` draws for every setting tuple; tuple ``i`` uses stream ``i``."""
    return {
        x: sample_outcomes(exact_settings_pmf(rho, grid, x), shots, seed, settings_tuple=x, stream=i)
        for i, x in enumerate(setting_tuples(grid.n))
    }


def sample_joint(
    rho: DensityMatrix,
    joint: JointPovm,
    grid_rest: Sequence[PartySettings],
    shots: int,
    seed: int,
    joint_party: int = 1,
) -> dict[tuple[int, ...], list[ShotRecord]]:
    grid_rest = [(p[0], p[1]) for p in grid_rest]
    return {
        xr: sample_outcomes(
            joint_pmf(rho, joint, _co_povms(grid_rest, xr), joint_party),
            shots,
            seed,
            settings_tuple=xr,
            stream=i,
        )
        for i, xr in enumerate(setting_tuples(rho.n_parties - 1))
    }
