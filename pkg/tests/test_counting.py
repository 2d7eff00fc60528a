import itertools

import numpy as np
import pytest

import regulus.counting
import regulus.discrepancy
import regulus.errors
import regulus.growth
import regulus.measure
import regulus.regularity
import regulus.system


def _random_algebra(system, e, rng, generators=1):
    sets = [
        regulus.measure.CylinderSet(e, rng.random(system.cardinality(e)) < 0.5)
        for _ in range(generators)
    ]
    return regulus.measure.generate(system, e, sets)


def _setup_manual_decomposition(system, top, lower, thresholds, growth="exp:2"):
    """A decomposition assembled by hand with fine equal to coarse."""

    return regulus.regularity.RegularityDecomposition(
        system=system,
        thresholds=thresholds,
        top=top,
        coarse=lower,
        fine=dict(lower),
        growth=regulus.growth.parse_growth(growth),
        oracle="exact",
    )


def _setup_product_instance():
    """Two vertex classes of size 4 with E_1 = {0, 1, 2} and E_2 = {1, 2, 3}."""

    system = regulus.system.make_system([1, 2], [4, 4], 1, [(1,), (2,)])
    top = {
        (1,): regulus.measure.generate(
            system, (1,), [regulus.measure.CylinderSet.from_points(system, (1,), [(0,), (1,), (2,)])]
        ),
        (2,): regulus.measure.generate(
            system, (2,), [regulus.measure.CylinderSet.from_points(system, (2,), [(1,), (2,), (3,)])]
        ),
    }
    lower = {(): regulus.measure.FactorAlgebra.trivial(system, ())}
    return system, _setup_manual_decomposition(system, top, lower, (2.0, 1.0))


@pytest.fixture(scope="module")
def triangle_decomposition():
    system = regulus.system.make_system([1, 2, 3], [4, 4, 4], 2, [(1, 2), (2, 3), (1, 3)])
    top = {}
    for i, e in enumerate(system.top_layer):
        top[e] = _random_algebra(system, e, np.random.default_rng([0, i]))
    return regulus.regularity.full_regularity(
        system, top, regulus.growth.exponential(2.0), regulus.discrepancy.ExactOracle()
    )


def test_census_partitions_the_space(triangle_decomposition) -> None:
    """Every good atom tuple is nonempty, and the tuples cover V_J."""

    result = regulus.counting.census(triangle_decomposition)

    assert result.total_density == pytest.approx(1.0, abs=1e-9)
    assert 0.0 <= result.good_fraction <= 1.0
    for profile in result.profiles:
        if profile.good:
            assert profile.joint_density > 0


def test_census_vacuous_atoms_are_good(triangle_decomposition) -> None:
    result = regulus.counting.census(triangle_decomposition)

    for profile in result.profiles:
        for e in profile.vacuous:
            assert profile.p[e] == 1.0
            assert profile.flags[(e, regulus.counting.LARGENESS)]


def test_bad_mass_within_bound(triangle_decomposition) -> None:
    evaluator = regulus.counting.AtomEvaluator(triangle_decomposition)
    system = triangle_decomposition.system

    for j in (1, 2):
        for e in system.layer(j):
            bound = regulus.counting.bad_mass_bound(triangle_decomposition, e)
            for atom in range(triangle_decomposition.algebra(e).atom_count):
                bad = regulus.counting.bad_set(triangle_decomposition, e, atom, evaluator)
                assert regulus.counting.bad_mass(triangle_decomposition, bad) <= bound + 1e-12


def test_bad_set_on_the_lowest_layer_is_empty(triangle_decomposition) -> None:
    bad = regulus.counting.bad_set(triangle_decomposition, (1,), 0)

    assert bad.region.popcount() == 0
    assert bad.failing == ()
    assert not bad.contains(
        triangle_decomposition.system, regulus.system.Point((1, 2), (0, 0))
    )


def test_product_instance_counting() -> None:
    """For a product of sets the joint density is exactly the product of densities."""

    _, decomposition = _setup_product_instance()
    profile = regulus.counting.classify_atom(decomposition, {(1,): 0, (2,): 1})

    assert profile.good
    assert profile.p[(1,)] == 0.75
    assert profile.p[(2,)] == 0.75
    assert profile.p[()] == 1.0

    check = regulus.counting.counting_check(decomposition, profile)
    assert check.lhs == pytest.approx(9 / 16)
    assert check.rhs == pytest.approx(9 / 16)
    assert check.ratio == pytest.approx(1.0)
    assert check.additive_slack == pytest.approx(0.0, abs=1e-12)


def test_classify_atom_missing_edge_raise() -> None:
    _, decomposition = _setup_product_instance()

    with pytest.raises(regulus.errors.PreconditionError) as ex:
        regulus.counting.classify_atom(decomposition, {(1,): 0})

    assert "has no atom for the edges" in ex.value.args[0]


def test_classify_atom_unknown_label_raise() -> None:
    _, decomposition = _setup_product_instance()

    with pytest.raises(regulus.errors.PreconditionError):
        regulus.counting.classify_atom(decomposition, {(1,): 0, (2,): 5})


def test_counting_check_bad_profile_raise() -> None:
    _, decomposition = _setup_product_instance()
    profile = regulus.counting.AtomProfile(
        atoms={(): 0, (1,): 1, (2,): 0},
        p={(): 1.0, (1,): 0.25, (2,): 0.25},
        flags={((1,), regulus.counting.LARGENESS): False},
        joint_density=1 / 16,
    )

    with pytest.raises(regulus.errors.PreconditionError) as ex:
        regulus.counting.counting_check(decomposition, profile)

    assert "needs a good atom tuple" in ex.value.args[0]


def test_small_growth_raise() -> None:
    """F(1) = 2 for affine:1,1, which leaves no room for the largeness threshold."""

    system, product = _setup_product_instance()
    decomposition = _setup_manual_decomposition(
        system, product.top, product.coarse, (1.0, 1.0), growth="affine:1,1"
    )

    with pytest.raises(regulus.errors.ConfigurationError) as ex:
        regulus.counting.classify_atom(decomposition, {(1,): 0, (2,): 1})

    assert "does not exceed e" in ex.value.args[0]


def test_decompose_atom_identity(triangle_decomposition) -> None:
    """p + b + c reproduces the indicator on the boundary atom intersection."""

    system = triangle_decomposition.system
    e = (1, 2)
    counts = [triangle_decomposition.algebra(f).atom_count for f in [(1,), (2,)]]
    for a, b in itertools.product(*(range(n) for n in counts)):
        for atom in range(triangle_decomposition.algebra(e).atom_count):
            split = regulus.counting.decompose_atom(
                triangle_decomposition, e, {(1,): a, (2,): b}, atom
            )
            assert split.edge == e
            assert split.region.shape == (system.cardinality(e),)
            assert split.residual <= 1e-12
            assert 0.0 <= split.p <= 1.0


@pytest.mark.parametrize("seed", range(20))
def test_doubling_identity(seed) -> None:
    """Squaring the inner average around {1, 2} gives the average over the
    doubled bundle."""

    rng = np.random.default_rng(seed)
    system = regulus.system.make_system([1, 2, 3], [3, 3, 3], 2, [(1, 2), (2, 3), (1, 3)])
    top = {e: _random_algebra(system, e, rng) for e in system.top_layer}
    lower = {f: _random_algebra(system, f, rng) for f in system.layer(1)}
    lower[()] = regulus.measure.FactorAlgebra.trivial(system, ())
    decomposition = _setup_manual_decomposition(system, top, lower, (7.0, 2.0, 1.0))
    bundle = regulus.system.Bundle.from_system(system)

    result = regulus.counting.generalized_counting_check(
        decomposition, bundle, {e: 0 for e in system.all_edges if e}, g0=(1, 2)
    )

    assert result.bracketed is not None
    assert result.doubling_gap <= 1e-12


@pytest.mark.parametrize("seed", range(3))
def test_trivial_bundle_matches_joint_density(seed) -> None:
    rng = np.random.default_rng(100 + seed)
    system = regulus.system.make_system([1, 2, 3], [3, 3, 3], 2, [(1, 2), (2, 3), (1, 3)])
    top = {e: _random_algebra(system, e, rng) for e in system.top_layer}
    lower = {f: _random_algebra(system, f, rng) for f in system.layer(1)}
    lower[()] = regulus.measure.FactorAlgebra.trivial(system, ())
    decomposition = _setup_manual_decomposition(system, top, lower, (7.0, 2.0, 1.0))
    atoms = {e: 0 for e in system.all_edges}

    result = regulus.counting.generalized_counting_check(
        decomposition, regulus.system.Bundle.from_system(system), atoms
    )
    profile = regulus.counting.classify_atom(decomposition, atoms)

    assert result.lhs == pytest.approx(profile.joint_density, abs=1e-12)
    assert result.rhs == pytest.approx(np.prod(list(profile.p.values())), abs=1e-12)


def test_order_zero_bundle() -> None:
    _, decomposition = _setup_product_instance()
    bundle = regulus.system.Bundle(ground=(), projection={}, edges=((),))

    result = regulus.counting.generalized_counting_check(
        decomposition, bundle, {(1,): 0, (2,): 0}
    )

    assert result.lhs == 1.0
    assert result.rhs == 1.0
    assert result.doubling_gap is None


def test_he_small_bound(triangle_decomposition) -> None:
    oracle = regulus.discrepancy.ExactOracle()

    for e in triangle_decomposition.system.top_layer:
        for atom in range(triangle_decomposition.algebra(e).atom_count):
            value, bound = regulus.counting.he_small_bound(
                triangle_decomposition, e, atom, oracle
            )
            assert value <= bound + 1e-9
