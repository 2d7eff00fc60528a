import fractions

import numpy as np
import pytest

import regulus.errors
import regulus.measure
import regulus.system


def _setup_system(sizes=(2, 2)):
    labels = list(range(1, len(sizes) + 1))
    return regulus.system.make_system(labels, list(sizes), len(sizes), [labels])


def _random_set(system, base, rng, density=0.5):
    return regulus.measure.CylinderSet(
        base, rng.random(system.cardinality(base)) < density
    )


def test_canonical_labels() -> None:
    labels = regulus.measure.canonical_labels(np.array([5, 5, 2, 7, 2]))

    assert labels.tolist() == [0, 0, 1, 2, 1]


def test_cylinder_set_from_points() -> None:
    system = _setup_system()
    E = regulus.measure.CylinderSet.from_points(system, (1, 2), [(0, 0), (1, 1)])

    assert E.membership.tolist() == [True, False, False, True]
    assert E.popcount() == 2
    assert E.points(system) == [(0, 0), (1, 1)]
    assert E.complement().points(system) == [(0, 1), (1, 0)]


def test_cylinder_set_point_out_of_range_raise() -> None:
    system = _setup_system()

    with pytest.raises(regulus.errors.SystemValidationError) as ex:
        regulus.measure.CylinderSet.from_points(system, (1, 2), [(0, 2)])

    assert "does not lie in" in ex.value.args[0]


def test_cylinder_set_different_bases_raise() -> None:
    system = _setup_system()
    E = regulus.measure.CylinderSet.full(system, (1,))
    F = regulus.measure.CylinderSet.full(system, (2,))

    with pytest.raises(regulus.errors.SystemValidationError):
        E.intersection(F)


def test_cylinder_set_lift() -> None:
    system = _setup_system((2, 3))
    E = regulus.measure.CylinderSet.from_points(system, (1,), [(1,)])

    assert E.lift(system, (1, 2)).tolist() == [False] * 3 + [True] * 3


def test_generate_and_refine() -> None:
    system = _setup_system()
    E = regulus.measure.CylinderSet.from_points(system, (1, 2), [(0, 1), (1, 0)])
    B = regulus.measure.generate(system, (1, 2), [E])

    assert B.labels.tolist() == [0, 1, 1, 0]
    assert B.complexity_bound == 1
    assert B.atom_count == 2
    assert B.measures(E)
    # refining by a measurable set changes nothing
    assert B.refine(E.complement()) is B

    finer = B.refine(regulus.measure.CylinderSet.from_points(system, (1, 2), [(0, 0)]))
    assert finer.atom_count == 3
    assert finer.complexity_bound == 2
    assert finer.is_refinement_of(B)
    assert not B.is_refinement_of(finer)


def test_factor_algebra_complexity_raise() -> None:
    """Three atoms cannot come from a single generator."""

    with pytest.raises(regulus.errors.SystemValidationError):
        regulus.measure.FactorAlgebra((1,), np.array([0, 1, 2]), 1)


def test_atom_out_of_range_raise() -> None:
    system = _setup_system()
    B = regulus.measure.FactorAlgebra.trivial(system, (1,))

    with pytest.raises(regulus.errors.PreconditionError):
        B.atom(1)


def test_join_labels() -> None:
    system = _setup_system((2, 3))
    B_1 = regulus.measure.generate(
        system, (1,), [regulus.measure.CylinderSet.from_points(system, (1,), [(0,)])]
    )
    B_2 = regulus.measure.generate(
        system, (2,), [regulus.measure.CylinderSet.from_points(system, (2,), [(2,)])]
    )
    joined = regulus.measure.join([B_1, B_2])

    assert joined.base == (1, 2)
    assert joined.complexity_bound == 2
    assert joined.atom_count(system) == 4
    assert joined.labels_on(system).tolist() == [0, 0, 1, 2, 2, 3]


def test_density_and_cond_expect() -> None:
    system = _setup_system()
    E = regulus.measure.CylinderSet.from_points(system, (1, 2), [(0, 0), (0, 1), (1, 1)])
    B = regulus.measure.generate(
        system, (1,), [regulus.measure.CylinderSet.from_points(system, (1,), [(0,)])]
    )

    assert regulus.measure.density(E, system) == 0.75
    assert regulus.measure.density(E, system, exact=True) == fractions.Fraction(3, 4)

    ce = regulus.measure.cond_expect(E, B, system)
    assert ce.base == (1, 2)
    assert ce.values.tolist() == [1.0, 0.5]
    assert ce.exact_values() == [fractions.Fraction(1), fractions.Fraction(1, 2)]
    assert ce.pointwise().tolist() == [1.0, 1.0, 0.5, 0.5]


def test_cond_expect_on() -> None:
    values = np.array([1.0, 0.0, 0.5, 0.5])

    assert regulus.measure.cond_expect_on(values, np.array([True, True, False, False])) == 0.5

    with pytest.raises(regulus.errors.PreconditionError):
        regulus.measure.cond_expect_on(values, np.zeros(4, dtype=bool))


def test_energy_bounds() -> None:
    """The energy of the trivial algebra is the squared density, that of the
    discrete algebra is the density."""

    system = _setup_system((3, 3))
    E = regulus.measure.CylinderSet.from_points(system, (1, 2), [(0, 0), (1, 2), (2, 2)])
    trivial = regulus.measure.FactorAlgebra.trivial(system, (1, 2))
    discrete = regulus.measure.FactorAlgebra.discrete(system, (1, 2))

    assert regulus.measure.energy(E, trivial, system, exact=True) == fractions.Fraction(1, 9)
    assert regulus.measure.energy(E, discrete, system, exact=True) == fractions.Fraction(1, 3)
    assert regulus.measure.energy(E, trivial, system) == pytest.approx(1 / 9)


@pytest.mark.parametrize("seed", range(200))
def test_pythagoras_identity(seed) -> None:
    """energy(E, B') - energy(E, B) equals the L2 distance of the conditional
    expectations whenever B' refines B."""

    rng = np.random.default_rng(seed)
    system = regulus.system.make_system([1, 2, 3], [3, 3, 2], 3, [(1, 2, 3)])
    E = _random_set(system, (1, 2, 3), rng)

    coarse = regulus.measure.join(
        [regulus.measure.generate(system, (1, 2), [_random_set(system, (1, 2), rng)])]
    )
    fine = regulus.measure.join(
        [
            coarse,
            regulus.measure.generate(system, (2, 3), [_random_set(system, (2, 3), rng)]),
            regulus.measure.generate(system, (1,), [_random_set(system, (1,), rng)]),
        ]
    )

    gap = regulus.measure.l2_gap(E, coarse, fine, system)
    difference = regulus.measure.energy(E, fine, system) - regulus.measure.energy(
        E, coarse, system
    )
    assert abs(difference - gap) <= 1e-9
    assert difference >= -1e-12

    exact_gap = regulus.measure.l2_gap(E, coarse, fine, system, exact=True)
    exact_difference = regulus.measure.energy(
        E, fine, system, exact=True
    ) - regulus.measure.energy(E, coarse, system, exact=True)
    assert exact_difference - exact_gap == 0


def test_rational_cap_raise() -> None:
    system = _setup_system((3, 3))
    E = regulus.measure.CylinderSet.full(system, (1, 2))
    B = regulus.measure.FactorAlgebra.trivial(system, (1, 2))

    with pytest.raises(regulus.errors.GuardrailError):
        regulus.measure.energy(E, B, system, exact=True, rational_cap=8)


def test_is_measurable() -> None:
    system = _setup_system()
    E = regulus.measure.CylinderSet.from_points(system, (1,), [(1,)])
    B = regulus.measure.generate(system, (1,), [E])
    product = regulus.measure.CylinderSet(
        (1, 2), E.lift(system, (1, 2))
    )
    diagonal = regulus.measure.CylinderSet.from_points(system, (1, 2), [(0, 0), (1, 1)])

    assert regulus.measure.is_measurable(product, B, system)
    assert not regulus.measure.is_measurable(diagonal, B, system)
