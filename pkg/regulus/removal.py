import dataclasses
import logging
import math
import typing

import numpy as np

import regulus.counting
import regulus.discrepancy
import regulus.errors
import regulus.growth
import regulus.measure
import regulus.regularity
import regulus.system


EdgeSets = typing.Dict[regulus.system.Edge, regulus.measure.CylinderSet]


@dataclasses.dataclass(frozen=True)
class RemovalReport:
    inputs_density: float
    copies_before: int
    copies_after: int
    removed_mass: typing.Dict[regulus.system.Edge, float]
    bad_mass: typing.Dict[regulus.system.Edge, float] = dataclasses.field(
        default_factory=dict
    )
    excluded_mass: typing.Dict[regulus.system.Edge, float] = dataclasses.field(
        default_factory=dict
    )
    cleanup_atoms_removed: int = 0
    cleanup_mass: float = 0.0
    cleanup_by_edge: typing.Dict[regulus.system.Edge, float] = dataclasses.field(
        default_factory=dict
    )
    short_circuit: bool = False
    subgraph: bool = False
    thresholds: typing.Tuple[float, ...] = ()
    oracle: str = ""
    growth: str = ""
    measurable: bool = True
    decomposition: regulus.regularity.RegularityDecomposition | None = dataclasses.field(
        default=None, compare=False, repr=False
    )

    def __post_init__(self) -> None:
        if self.copies_after != 0:
            raise regulus.errors.InternalError(
                f"The removal left {self.copies_after} copies of the top layer."
            )

    def to_record(self) -> typing.Dict[str, typing.Any]:
        return {
            "inputs_density": self.inputs_density,
            "copies_before": self.copies_before,
            "copies_after": self.copies_after,
            "removed_mass": {_key(e): m for e, m in self.removed_mass.items()},
            "bad_mass": {_key(e): m for e, m in self.bad_mass.items()},
            "excluded_mass": {_key(e): m for e, m in self.excluded_mass.items()},
            "cleanup_atoms_removed": self.cleanup_atoms_removed,
            "cleanup_mass": self.cleanup_mass,
            "cleanup_by_edge": {_key(e): m for e, m in self.cleanup_by_edge.items()},
            "short_circuit": self.short_circuit,
            "subgraph": self.subgraph,
            "thresholds": [m if math.isfinite(m) else "inf" for m in self.thresholds],
            "oracle": self.oracle,
            "growth": self.growth,
            "measurable": self.measurable,
        }


def _key(e: regulus.system.Edge) -> str:
    return ",".join(map(str, e))


def _check_sets(system: regulus.system.HypergraphSystem, sets: typing.Mapping[typing.Any, regulus.measure.CylinderSet]) -> EdgeSets:
    checked: EdgeSets = {}
    for e, E_e in sets.items():
        edge = regulus.system.canonical_edge(e)
        if edge != E_e.base:
            raise regulus.errors.SystemValidationError(
                f"The set given for edge {edge} lives on base {E_e.base}."
            )
        E_e.check(system)
        checked[edge] = E_e

    if set(checked) != set(system.top_layer):
        raise regulus.errors.SystemValidationError(
            f"Sets are given for {sorted(checked)}, but the top layer is "
            f"{list(system.top_layer)}."
        )
    return checked


def _copies_mask(system: regulus.system.HypergraphSystem, sets: EdgeSets) -> np.ndarray:
    support = system.support()
    system.check_enumerable(system.cardinality(support), "the copies of the top layer")
    product = np.ones(system.cardinality(support), dtype=bool)
    for E_e in sets.values():
        product &= E_e.lift(system, support)
    return product


def count_copies(
    system: regulus.system.HypergraphSystem,
    sets: typing.Mapping[typing.Any, regulus.measure.CylinderSet],
) -> int:
    """The number of points of V_J lying in every E_e."""

    checked = _check_sets(system, sets)
    outside = math.prod(
        system.size(j) for j in system.vertex_labels if j not in system.support()
    )
    return int(_copies_mask(system, checked).sum()) * outside


def _density(system: regulus.system.HypergraphSystem, sets: EdgeSets) -> float:
    if not sets:
        return 1.0
    return float(_copies_mask(system, sets).mean())


def _removed(before: regulus.measure.CylinderSet, after: regulus.measure.CylinderSet) -> float:
    return float((before.membership & ~after.membership).mean())


def _atom_of(
    algebra: regulus.measure.FactorAlgebra,
    E_e: regulus.measure.CylinderSet,
) -> int:
    return int(algebra.labels[np.flatnonzero(E_e.membership)[0]])


def _lower_join(
    decomposition: regulus.regularity.RegularityDecomposition, e: regulus.system.Edge
) -> np.ndarray:
    """Atom labels of the join of B_f, f a proper subset of e, over V_e."""
    return regulus.measure.join(
        decomposition.coarse[f] for f in regulus.system.proper_subsets(e)
    ).labels_on(decomposition.system, e)


def cleanup(
    system: regulus.system.HypergraphSystem,
    decomposition: regulus.regularity.RegularityDecomposition,
    sets: EdgeSets,
) -> typing.Tuple[EdgeSets, int, typing.Dict[regulus.system.Edge, float]]:
    """Delete surviving lower atoms one at a time, each from the edge set where its
    intersection with that set weighs least, until no copy survives. Returns the
    sets, the number of deletions and the mass deleted from each edge set."""

    support = system.support()
    lower = {e: _lower_join(decomposition, e) for e in sets}
    removed = 0
    mass = {e: 0.0 for e in sets}

    while True:
        survivors = np.flatnonzero(_copies_mask(system, sets))
        if survivors.size == 0:
            return sets, removed, mass

        point = survivors[0]
        choices = []
        for e in sorted(sets):
            label = lower[e][regulus.system.projection(system, support, e)[point]]
            part = lower[e] == label
            choices.append((float((sets[e].membership & part).mean()), e, part))

        weight, e, part = min(choices, key=lambda choice: (choice[0], choice[1]))
        sets = {**sets, e: regulus.measure.CylinderSet(e, sets[e].membership & ~part)}
        removed += 1
        mass[e] += weight
        logging.info(f"Cleanup deleted a lower atom of mass {weight:.4g} from edge {e}.")


def remove(
    system: regulus.system.HypergraphSystem,
    sets: typing.Mapping[typing.Any, regulus.measure.CylinderSet],
    F: regulus.growth.GrowthFunction,
    oracle: regulus.discrepancy.Oracle,
    M_d: float = 1,
    subgraph: bool = False,
) -> typing.Tuple[EdgeSets, RemovalReport]:
    """Modify every E_e on a bounded-complexity set so that no copy of the top layer
    survives, returning the modified sets with a report of what was removed."""

    sets = _check_sets(system, sets)
    copies = count_copies(system, sets) if sets else 0
    density = _density(system, sets)

    if copies == 0:
        logging.info("No copies of the top layer, returning the sets unchanged.")
        return dict(sets), RemovalReport(
            inputs_density=density,
            copies_before=0,
            copies_after=0,
            removed_mass={e: 0.0 for e in sets},
            short_circuit=True,
            subgraph=subgraph,
            oracle=oracle.name,
            growth=F.descriptor,
        )

    top = {e: regulus.measure.generate(system, e, [E_e]) for e, E_e in sets.items()}
    decomposition = regulus.regularity.full_regularity(system, top, F, oracle, M_d)
    evaluator = regulus.counting.AtomEvaluator(decomposition)

    bad: typing.Dict[typing.Tuple[regulus.system.Edge, int], regulus.counting.BadSet] = {}

    def bad_region(f: regulus.system.Edge, label: int) -> np.ndarray:
        if (f, label) not in bad:
            bad[(f, label)] = regulus.counting.bad_set(decomposition, f, label, evaluator)
        return bad[(f, label)].region.membership

    modified: EdgeSets = {}
    bad_mass: typing.Dict[regulus.system.Edge, float] = {}
    excluded_mass: typing.Dict[regulus.system.Edge, float] = {}
    for e, E_e in sets.items():
        own = _atom_of(top[e], E_e)
        excluded = bad_region(e, own).copy()
        bad_mass[e] = float((E_e.membership & excluded).mean())
        for f in regulus.system.proper_subsets(e):
            for label in range(decomposition.coarse[f].atom_count):
                atom = decomposition.coarse[f].atom(label).membership
                excluded |= (atom & bad_region(f, label))[
                    regulus.system.projection(system, e, f)
                ]
        excluded_mass[e] = float((E_e.membership & excluded).mean())
        modified[e] = regulus.measure.CylinderSet(e, ~excluded)

    measurable = all(
        regulus.measure.is_measurable(
            E_e,
            regulus.measure.join(
                decomposition.coarse[f] for f in regulus.system.proper_subsets(e)
            ),
            system,
        )
        for e, E_e in modified.items()
    )
    if not measurable:
        raise regulus.errors.InternalError(
            "A modified edge set is not measurable in the join of its lower algebras."
        )

    modified, cleaned, cleanup_by_edge = cleanup(system, decomposition, modified)
    if subgraph:
        modified = {e: modified[e].intersection(sets[e]) for e in modified}

    report = RemovalReport(
        inputs_density=density,
        copies_before=copies,
        copies_after=count_copies(system, modified),
        removed_mass={e: _removed(sets[e], modified[e]) for e in sets},
        bad_mass=bad_mass,
        excluded_mass=excluded_mass,
        cleanup_atoms_removed=cleaned,
        cleanup_mass=sum(cleanup_by_edge.values()),
        cleanup_by_edge=cleanup_by_edge,
        subgraph=subgraph,
        thresholds=decomposition.thresholds,
        oracle=oracle.name,
        growth=F.descriptor,
        measurable=measurable,
        decomposition=decomposition,
    )
    return modified, report


def partite_remove(
    labels: typing.Sequence[regulus.system.Label],
    sizes: typing.Sequence[int],
    d: int,
    edge_sets: typing.Mapping[typing.Any, typing.Iterable[typing.Sequence[int]]],
    F: regulus.growth.GrowthFunction,
    oracle: regulus.discrepancy.Oracle,
    M_d: float = 1,
    subgraph: bool = False,
    cap: int = regulus.system.DEFAULT_CAP,
) -> typing.Tuple[EdgeSets, RemovalReport]:
    """Removal on partite edge sets given as point lists on each V_e."""

    system = regulus.system.make_system(labels, sizes, d, edge_sets.keys(), cap)
    return remove(system, _partite_sets(system, edge_sets), F, oracle, M_d, subgraph)


def _partite_sets(
    system: regulus.system.HypergraphSystem,
    edge_sets: typing.Mapping[typing.Any, typing.Iterable[typing.Sequence[int]]],
) -> EdgeSets:
    return {
        regulus.system.canonical_edge(e): regulus.measure.CylinderSet.from_points(
            system, e, _reorder(e, points)
        )
        for e, points in edge_sets.items()
    }


def _reorder(
    e: typing.Sequence[typing.Any], points: typing.Iterable[typing.Sequence[int]]
) -> typing.List[typing.Tuple[int, ...]]:
    """Points are given in the order of the edge as written; bases are sorted."""

    order = sorted(range(len(e)), key=lambda i: list(e)[i])
    return [tuple(point[i] for i in order) for point in points]


def triangle_remove(
    sizes: typing.Sequence[int],
    E12: typing.Iterable[typing.Sequence[int]],
    E23: typing.Iterable[typing.Sequence[int]],
    E31: typing.Iterable[typing.Sequence[int]],
    F: regulus.growth.GrowthFunction,
    oracle: regulus.discrepancy.Oracle,
    M_d: float = 1,
    subgraph: bool = False,
    cap: int = regulus.system.DEFAULT_CAP,
) -> typing.Tuple[
    typing.Set[typing.Tuple[int, int]],
    typing.Set[typing.Tuple[int, int]],
    typing.Set[typing.Tuple[int, int]],
    RemovalReport,
]:
    """Make the tripartite graph on V1, V2, V3 triangle free. E31 holds pairs (z, x)
    with z in V3 and x in V1."""

    system = regulus.system.make_system(
        [1, 2, 3], sizes, 2, [(1, 2), (2, 3), (1, 3)], cap
    )
    sets = _partite_sets(system, {(1, 2): E12, (2, 3): E23, (3, 1): E31})
    modified, report = remove(system, sets, F, oracle, M_d, subgraph)

    def pairs(e: regulus.system.Edge) -> typing.Set[typing.Tuple[int, int]]:
        return {(a, b) for a, b in modified[e].points(system)}

    return pairs((1, 2)), pairs((2, 3)), {(z, x) for x, z in pairs((1, 3))}, report
