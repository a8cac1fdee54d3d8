import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from svetjoint.measure import AdmissibilityError, Setting, equal_sharpness_max, joint_effect_matrices, joint_povm
from svetjoint.measure import JointPovm
from svetjoint.qcore import PreconditionError, Direction, make_ghz, maximally_mixed, random_state
from svetjoint.simulate import enumerated_correlator
from svetjoint.svetlichny import (
    CorrelatorTable,
    SettingsGrid,
    bounds,
    correlator,
    correlator_table,
    parity_counts,
    setting_tuples,
    sign_v,
    svetlichny_joint_value,
    svetlichny_value,
)

from conftest import all_tuples, brute_expectation, random_dir

seeds = st.integers(0, 2**31 - 1)


def random_grid(rng, n, sharp=True):
    parties = []
    for _ in range(n):
        e = (1.0, 1.0) if sharp else tuple(rng.uniform(0, 1, size=2))
        parties.append((Setting(random_dir(rng), e[0]), Setting(random_dir(rng), e[1])))
    return SettingsGrid(tuple(parties))


def equatorial_grid(phis):
    return SettingsGrid.projective(
        [(Direction.from_angles(math.pi / 2, p0), Direction.from_angles(math.pi / 2, p1)) for p0, p1 in phis]
    )


def test_sign_v_values():
    assert [sign_v([1] * k) for k in range(5)] == [1, 1, -1, -1, 1]


def test_sign_v_three_party_pattern():
    # primed observable <-> setting 1; order: ABC ABC' AB'C A'BC AB'C' A'BC' A'B'C A'B'C'
    order = [(0, 0, 0), (0, 0, 1), (0, 1, 0), (1, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0), (1, 1, 1)]
    assert [sign_v(x) for x in order] == [1, 1, 1, 1, -1, -1, -1, -1]


@given(st.lists(st.integers(0, 1), min_size=1, max_size=16))
def test_sign_v_depends_on_popcount_period_four(x):
    k = sum(x)
    assert sign_v(x) == sign_v([1] * k) == sign_v([1] * (k + 4) + [0])


@pytest.mark.parametrize("n", [2, 3, 4])
def test_ghz_equatorial_correlator(n):
    rng = np.random.default_rng(n)
    phis = rng.uniform(0, 2 * math.pi, size=(n, 2))
    grid = equatorial_grid(phis)
    rho = make_ghz(n)
    for x in all_tuples(n):
        total = sum(phis[i, xi] for i, xi in enumerate(x))
        ops = [grid.parties[i][xi].observable() for i, xi in enumerate(x)]
        brute = brute_expectation(rho, ops).real
        assert abs(brute - math.cos(total)) < 1e-12
        assert abs(correlator(rho, grid, x) - brute) < 1e-12


@given(seeds, st.integers(2, 4))
def test_maximally_mixed_gives_zero(seed, n):
    rng = np.random.default_rng(seed)
    grid = random_grid(rng, n, sharp=False)
    table = correlator_table(maximally_mixed(n), grid)
    assert all(abs(v) < 1e-15 for v in table.values.values())


@given(seeds, st.integers(2, 4))
def test_zero_sharpness_gives_zero(seed, n):
    rng = np.random.default_rng(seed)
    grid = random_grid(rng, n).with_sharpness(2, 0.0)
    rho = random_state(n, "mixed", seed)
    assert all(abs(v) < 1e-15 for v in correlator_table(rho, grid).values.values())


def test_correlator_precondition():
    grid = random_grid(np.random.default_rng(0), 3)
    with pytest.raises(PreconditionError):
        correlator(make_ghz(2), grid, (0, 0, 0))
    with pytest.raises(PreconditionError):
        correlator_table(make_ghz(4), grid)


def test_ghz_table_bounded():
    table = correlator_table(make_ghz(3), random_grid(np.random.default_rng(3), 3))
    assert len(table.values) == 8
    assert all(-1 <= v <= 1 for v in table.values.values())


@given(seeds, st.floats(0, 1))
def test_table_linear_in_first_party_sharpness(seed, t):
    rng = np.random.default_rng(seed)
    grid = random_grid(rng, 3)
    rho = random_state(3, "mixed", seed)
    base = correlator_table(rho, grid)
    scaled = correlator_table(rho, grid.with_sharpness(1, t))
    for x in setting_tuples(3):
        assert abs(scaled[x] - t * base[x]) < 1e-12


def test_two_party_table_brute_force():
    rng = np.random.default_rng(9)
    grid = random_grid(rng, 2, sharp=False)
    rho = random_state(2, "mixed", 9)
    table = correlator_table(rho, grid)
    for x in all_tuples(2):
        ops = [grid.parties[i][xi].observable() for i, xi in enumerate(x)]
        assert abs(table[x] - brute_expectation(rho, ops).real) < 1e-12


@pytest.mark.parametrize("n", [2, 3])
def test_trace_and_enumeration_routes_agree(n):
    rng = np.random.default_rng(100 + n)
    for trial in range(20):
        grid = random_grid(rng, n, sharp=bool(trial % 2))
        rho = random_state(n, "mixed" if trial % 3 else "pure", trial)
        for x in all_tuples(n):
            assert abs(correlator(rho, grid, x) - enumerated_correlator(rho, grid, x)) < 1e-12


def test_svetlichny_value_zero_table():
    res = svetlichny_value(CorrelatorTable(3, {x: 0.0 for x in setting_tuples(3)}))
    assert res.value == 0.0 and not res.violates_hybrid
    assert res.hybrid_bound == 4.0 and res.quantum_bound == 4 * math.sqrt(2)


def test_table_validation():
    with pytest.raises(PreconditionError):
        CorrelatorTable(2, {(0, 0): 0.0})
    with pytest.raises(PreconditionError):
        CorrelatorTable(1 + 1, {x: 1.5 for x in setting_tuples(2)})


@given(st.integers(2, 6), seeds)
def test_value_below_triangle_bound(n, seed):
    rng = np.random.default_rng(seed)
    table = CorrelatorTable(n, {x: float(rng.uniform(-1, 1)) for x in setting_tuples(n)})
    assert svetlichny_value(table).value <= 2**n


@given(seeds, st.integers(2, 5), st.sampled_from(["pure", "mixed"]))
def test_quantum_bound_holds(seed, n, purity):
    rng = np.random.default_rng(seed)
    res = svetlichny_value(correlator_table(random_state(n, purity, seed), random_grid(rng, n)))
    assert res.value <= bounds(n)[1] + 1e-6


def test_bounds_examples():
    assert bounds(3) == (4.0, 4 * math.sqrt(2))
    assert abs(bounds(3)[1] - 5.65685) < 1e-5
    assert bounds(2) == (2.0, 2 * math.sqrt(2))
    assert bounds(5) == (16.0, 16 * math.sqrt(2))
    with pytest.raises(PreconditionError):
        bounds(1)


def test_parity_counts_examples():
    assert parity_counts(3) == (2, 2)
    assert parity_counts(4) == (4, 4)
    for n in range(2, 12):
        even, odd = parity_counts(n)
        assert even + odd == 2 ** (n - 1)
        assert even == sum(math.comb(n - 1, j) for j in range(0, n, 2))
    with pytest.raises(PreconditionError):
        parity_counts(1)


def _joint_setup(rng, n, eta=None, state_seed=0):
    grid = random_grid(rng, n)
    a, a2 = grid.parties[0][0].direction, grid.parties[0][1].direction
    if eta is None:
        eta = rng.uniform(0, 1) * equal_sharpness_max(a, a2)
    joint = joint_povm(Setting(a, eta), Setting(a2, eta))
    rho = random_state(n, "mixed" if state_seed % 2 else "pure", state_seed)
    return rho, grid, joint, eta


@given(seeds, st.integers(2, 5))
def test_eta_scaling_law(seed, n):
    rng = np.random.default_rng(seed)
    rho, grid, joint, eta = _joint_setup(rng, n, state_seed=seed)
    sj = svetlichny_joint_value(rho, joint, grid.parties[1:])
    s = svetlichny_value(correlator_table(rho, grid)).value
    assert abs(sj - eta * s) < 1e-10
    assert sj <= bounds(n)[0] + 1e-9


@given(seeds, st.integers(2, 4))
def test_unsharp_coparty_product_law(seed, n):
    rng = np.random.default_rng(seed)
    rho, grid, joint, eta = _joint_setup(rng, n, state_seed=seed)
    etas = rng.uniform(0, 1, size=n - 1)
    rest = [(Setting(p[0].direction, e), Setting(p[1].direction, e)) for p, e in zip(grid.parties[1:], etas)]
    sj = svetlichny_joint_value(rho, joint, rest)
    s = svetlichny_value(correlator_table(rho, grid)).value
    assert abs(sj - eta * float(np.prod(etas)) * s) < 1e-10


def test_joint_value_mixed_state_zero():
    rng = np.random.default_rng(1)
    _, grid, joint, _ = _joint_setup(rng, 3)
    assert svetlichny_joint_value(maximally_mixed(3), joint, grid.parties[1:]) < 1e-15


def test_joint_value_rejects_bad_inputs():
    rng = np.random.default_rng(2)
    rho, grid, joint, _ = _joint_setup(rng, 3)
    with pytest.raises(PreconditionError):
        svetlichny_joint_value(rho, joint, grid.parties[1:2])
    s1, s2 = Setting(Direction(1, 0, 0), 1.0), Setting(Direction(0, 1, 0), 1.0)
    # bypass the constructor's margin check to hand over an inadmissible observable
    bad = object.__new__(JointPovm)
    object.__setattr__(bad, "effects", joint_effect_matrices(s1, s2))
    object.__setattr__(bad, "settings", (s1, s2))
    with pytest.raises(AdmissibilityError):
        svetlichny_joint_value(rho, bad, grid.parties[1:])


@pytest.mark.parametrize("party", [1, 2, 3])
def test_joint_party_permutation(party):
    """Moving the joint measurement to another party equals permuting the state."""
    rng = np.random.default_rng(party)
    rho, grid, joint, eta = _joint_setup(rng, 3, state_seed=7)
    rest = list(grid.parties[1:])
    perm = list(range(3))
    perm.remove(party - 1)
    perm.insert(0, party - 1)
    # reorder tensor factors so that party `party` of the new state is party 1 of the old
    t = rho.matrix.reshape((2,) * 6)
    inv = np.argsort(perm)
    axes = list(inv) + [3 + i for i in inv]
    moved = t.transpose(axes).reshape(8, 8)
    from svetjoint.qcore import DensityMatrix

    permuted = DensityMatrix(3, moved)
    a = svetlichny_joint_value(rho, joint, rest)
    b = svetlichny_joint_value(permuted, joint, rest, joint_party=party)
    assert abs(a - b) < 1e-12


@pytest.mark.parametrize("n", [3, 5])
def test_relabeling_covariance_odd(n):
    """Swapping both settings on every party complements the tuples; |S| is unchanged for odd N."""
    rng = np.random.default_rng(n)
    for trial in range(10):
        grid = random_grid(rng, n)
        swapped = SettingsGrid(tuple((b, a) for a, b in grid.parties))
        rho = random_state(n, "mixed", trial)
        t, ts = correlator_table(rho, grid), correlator_table(rho, swapped)
        for x in setting_tuples(n):
            assert abs(ts[x] - t[tuple(1 - xi for xi in x)]) < 1e-12
        assert abs(svetlichny_value(t).value - svetlichny_value(ts).value) < 1e-12


def test_relabeling_changes_value_for_even_n():
    # for even N the complemented sign pattern is a different functional
    rng = np.random.default_rng(4)
    diffs = []
    for trial in range(10):
        grid = random_grid(rng, 4)
        swapped = SettingsGrid(tuple((b, a) for a, b in grid.parties))
        rho = random_state(4, "pure", trial)
        diffs.append(
            abs(svetlichny_value(correlator_table(rho, grid)).value - svetlichny_value(correlator_table(rho, swapped)).value)
        )
    assert max(diffs) > 1e-3


def test_settings_grid_validation():
    with pytest.raises(PreconditionError):
        SettingsGrid(((Setting(Direction(0, 0, 1)), Setting(Direction(0, 0, 1))),))
