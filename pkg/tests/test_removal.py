import unittest.mock

import numpy as np
import pytest

import regulus.discrepancy
import regulus.errors
import regulus.growth
import regulus.measure
import regulus.regularity
import regulus.removal
import regulus.system


def _setup_triangle(sizes=(2, 2, 2)):
    return regulus.system.make_system([1, 2, 3], list(sizes), 2, [(1, 2), (2, 3), (1, 3)])


def _random_sets(system, seed, density):
    sets = {}
    for i, e in enumerate(system.top_layer):
        rng = np.random.default_rng([seed, i])
        sets[e] = regulus.measure.CylinderSet(
            e, rng.random(system.cardinality(e)) < density
        )
    return sets


def _remove(system, sets, subgraph=False):
    return regulus.removal.remove(
        system,
        sets,
        regulus.growth.exponential(2.0),
        regulus.discrepancy.ExactOracle(),
        subgraph=subgraph,
    )


def test_count_copies() -> None:
    system = _setup_triangle()
    sets = {e: regulus.measure.CylinderSet.full(system, e) for e in system.top_layer}

    assert regulus.removal.count_copies(system, sets) == 8


def test_count_copies_outside_support() -> None:
    """Vertex classes outside every top edge multiply the count."""

    system = regulus.system.make_system([1, 2, 3], [2, 2, 5], 2, [(1, 2)])
    sets = {(1, 2): regulus.measure.CylinderSet.from_points(system, (1, 2), [(0, 1)])}

    assert regulus.removal.count_copies(system, sets) == 5


def test_count_copies_wrong_sets_raise() -> None:
    system = _setup_triangle()
    sets = {(1, 2): regulus.measure.CylinderSet.full(system, (1, 2))}

    with pytest.raises(regulus.errors.SystemValidationError) as ex:
        regulus.removal.count_copies(system, sets)

    assert "but the top layer is" in ex.value.args[0]


def test_remove_triangle_free_short_circuit() -> None:
    system = _setup_triangle()
    sets = {
        (1, 2): regulus.measure.CylinderSet.from_points(system, (1, 2), [(0, 0)]),
        (2, 3): regulus.measure.CylinderSet.from_points(system, (2, 3), [(1, 1)]),
        (1, 3): regulus.measure.CylinderSet.from_points(system, (1, 3), [(0, 0)]),
    }

    modified, report = _remove(system, sets)

    assert report.short_circuit
    assert report.copies_before == 0
    assert report.decomposition is None
    assert all(mass == 0.0 for mass in report.removed_mass.values())
    assert modified == sets


def test_remove_empty_top_layer() -> None:
    system = regulus.system.make_system([1, 2], [3, 3], 2, [])

    modified, report = _remove(system, {})

    assert modified == {}
    assert report.short_circuit
    assert report.inputs_density == 1.0


def test_remove_complete_tripartite() -> None:
    """K_{2,2,2}: everything is regular, so one lower atom has to go in cleanup."""

    system = _setup_triangle()
    sets = {e: regulus.measure.CylinderSet.full(system, e) for e in system.top_layer}

    modified, report = _remove(system, sets)

    assert report.copies_before == 8
    assert report.copies_after == 0
    assert regulus.removal.count_copies(system, modified) == 0
    assert report.cleanup_atoms_removed == 1
    assert report.removed_mass[(1, 2)] == 1.0
    assert report.removed_mass[(2, 3)] == 0.0
    assert report.measurable
    assert report.to_record()["removed_mass"]["1,2"] == 1.0


@pytest.mark.parametrize("density", [1 / 8, 1 / 4, 1 / 2])
@pytest.mark.parametrize("seed", range(17))
def test_remove_random_triangles(seed, density) -> None:
    """Whatever leaves an edge set is accounted for by the excluded bad region or
    by the cleanup deletions on that edge."""

    system = _setup_triangle((8, 8, 8))
    sets = _random_sets(system, seed, density)

    modified, report = _remove(system, sets)

    assert report.copies_after == 0
    assert regulus.removal.count_copies(system, modified) == 0
    assert report.measurable
    for e in system.top_layer:
        assert 0.0 <= report.removed_mass[e] <= 1.0
        assert report.excluded_mass[e] >= report.bad_mass[e]
        assert (
            report.removed_mass[e]
            <= report.excluded_mass[e] + report.cleanup_by_edge[e] + 1e-12
        )
    assert sum(report.cleanup_by_edge.values()) == pytest.approx(report.cleanup_mass)


@pytest.mark.parametrize("seed", range(3))
def test_cleanup_weighs_atoms_inside_the_set() -> None:
    """The survivor at (0, 0, 0) sits in a lower atom of mass 1/2 on (1, 2) and
    (1, 3), and in the whole of V_23 on (2, 3), where E_23 holds a single point. The
    deletion goes where the set loses least, which is E_23."""

    system = _setup_triangle()
    trivial = {
        f: regulus.measure.FactorAlgebra.trivial(system, f) for f in [(), (2,), (3,)]
    }
    coarse = {
        **trivial,
        (1,): regulus.measure.generate(
            system, (1,), [regulus.measure.CylinderSet((1,), np.array([True, False]))]
        ),
    }
    decomposition = regulus.regularity.RegularityDecomposition(
        system=system,
        thresholds=(float("inf"), 2.0, 1.0),
        top={},
        coarse=coarse,
        fine=coarse,
        growth=regulus.growth.exponential(2.0),
        oracle="exact",
    )
    sets = {
        (1, 2): regulus.measure.CylinderSet.full(system, (1, 2)),
        (2, 3): regulus.measure.CylinderSet.from_points(system, (2, 3), [(0, 0)]),
        (1, 3): regulus.measure.CylinderSet.full(system, (1, 3)),
    }
    assert regulus.removal.count_copies(system, sets) == 2

    cleaned, deletions, mass = regulus.removal.cleanup(system, decomposition, sets)

    assert deletions == 1
    assert mass == {(1, 2): 0.0, (2, 3): 0.25, (1, 3): 0.0}
    assert cleaned[(2, 3)].popcount() == 0
    assert cleaned[(1, 2)] == sets[(1, 2)]
    assert cleaned[(1, 3)] == sets[(1, 3)]
    assert regulus.removal.count_copies(system, cleaned) == 0


def test_remove_subgraph(seed) -> None:
    system = _setup_triangle((4, 4, 4))
    sets = _random_sets(system, seed, 0.6)

    modified, report = _remove(system, sets, subgraph=True)

    assert report.subgraph
    assert regulus.removal.count_copies(system, modified) == 0
    for e, E_e in modified.items():
        assert not np.any(E_e.membership & ~sets[e].membership)


def test_partite_remove_edge_order() -> None:
    """A set on (3, 1) is read as (z, x) pairs."""

    modified, report = regulus.removal.partite_remove(
        [1, 2, 3],
        [2, 2, 2],
        2,
        {(1, 2): [(0, 0)], (2, 3): [(0, 1)], (3, 1): [(1, 0)]},
        regulus.growth.exponential(2.0),
        regulus.discrepancy.ExactOracle(),
    )

    assert report.copies_before == 1
    assert report.copies_after == 0
    assert set(modified) == {(1, 2), (2, 3), (1, 3)}


def test_triangle_remove_keeps_orientation() -> None:
    E12 = {(0, 0), (0, 1), (1, 1)}
    E23 = {(0, 1), (1, 1), (1, 0)}
    E31 = {(1, 0), (0, 1), (1, 1)}

    new12, new23, new31, report = regulus.removal.triangle_remove(
        [2, 2, 2],
        E12,
        E23,
        E31,
        regulus.growth.exponential(2.0),
        regulus.discrepancy.ExactOracle(),
        subgraph=True,
    )

    assert report.copies_before > 0
    assert new12 <= E12
    assert new23 <= E23
    assert new31 <= E31
    survivors = [
        (x, y, z)
        for x, y in new12
        for z in range(2)
        if (y, z) in new23 and (z, x) in new31
    ]
    assert survivors == []


def test_triangle_remove_builds_one_system() -> None:
    with unittest.mock.patch(
        "regulus.system.make_system", wraps=regulus.system.make_system
    ) as mock_make_system:
        regulus.removal.triangle_remove(
            [2, 2, 2],
            [(0, 0)],
            [(0, 0)],
            [(0, 0)],
            regulus.growth.exponential(2.0),
            regulus.discrepancy.ExactOracle(),
        )

    mock_make_system.assert_called_once()


def test_report_with_copies_left_raise() -> None:
    with pytest.raises(regulus.errors.InternalError):
        regulus.removal.RemovalReport(
            inputs_density=0.5, copies_before=3, copies_after=1, removed_mass={}
        )
