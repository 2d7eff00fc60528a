import dataclasses
import itertools
import logging
import math
import typing

import numpy as np

import regulus.discrepancy
import regulus.errors
import regulus.measure
import regulus.regularity
import regulus.system


TOLERANCE = 1e-12
LARGENESS = "largeness"
REGULARITY = "regularity"

AtomTuple = typing.Mapping[regulus.system.Edge, int]


@dataclasses.dataclass(frozen=True)
class AtomProfile:
    atoms: typing.Dict[regulus.system.Edge, int]
    p: typing.Dict[regulus.system.Edge, float]
    flags: typing.Dict[typing.Tuple[regulus.system.Edge, str], bool]
    joint_density: float
    vacuous: typing.Tuple[regulus.system.Edge, ...] = ()

    @property
    def good(self) -> bool:
        return all(self.flags.values())

    def to_record(self) -> typing.Dict[str, typing.Any]:
        return {
            "labels": {_key(e): label for e, label in self.atoms.items()},
            "joint_density": self.joint_density,
            "p_values": {_key(e): p for e, p in self.p.items()},
            "flags": {f"{_key(e)}:{name}": flag for (e, name), flag in self.flags.items()},
            "good": self.good,
        }


@dataclasses.dataclass(frozen=True)
class BadSet:
    edge: regulus.system.Edge
    atom: int
    region: regulus.measure.CylinderSet
    failing: typing.Tuple[typing.Dict[regulus.system.Edge, int], ...] = ()

    def contains(
        self, system: regulus.system.HypergraphSystem, point: regulus.system.Point
    ) -> bool:
        """Membership of a point of V_e, or of any larger base, in the region."""
        index = regulus.system.point_index(system, point.restrict(self.edge))
        return bool(self.region.membership[index])


@dataclasses.dataclass(frozen=True)
class AtomDecomposition:
    edge: regulus.system.Edge
    p: float
    region: np.ndarray
    b: np.ndarray
    c: np.ndarray
    residual: float


@dataclasses.dataclass(frozen=True)
class CountingCheck:
    lhs: float
    rhs: float
    ratio: float | None
    additive_slack: float

    def to_record(self) -> typing.Dict[str, typing.Any]:
        return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True)
class GeneralizedCount:
    lhs: float
    rhs: float
    ratio: float | None
    bracketed: float | None = None
    doubled_lhs: float | None = None

    @property
    def doubling_gap(self) -> float | None:
        if self.bracketed is None or self.doubled_lhs is None:
            return None
        return abs(self.bracketed - self.doubled_lhs)


@dataclasses.dataclass(frozen=True)
class Census:
    profiles: typing.Tuple[AtomProfile, ...]
    total_density: float

    @property
    def good_fraction(self) -> float:
        if not self.profiles:
            return 0.0
        return sum(profile.good for profile in self.profiles) / len(self.profiles)

    @property
    def good_density(self) -> float:
        return sum(p.joint_density for p in self.profiles if p.good)


def _key(e: regulus.system.Edge) -> str:
    return ",".join(map(str, e))


def _ratio(lhs: float, rhs: float) -> float | None:
    return lhs / rhs if rhs > 0 else None


class AtomEvaluator:
    """Per-decomposition cache of atom masks and conditional expectation gaps."""

    def __init__(self, decomposition: regulus.regularity.RegularityDecomposition):
        self.decomposition = decomposition
        self.system = decomposition.system
        self.thresholds = {}
        for j, M_j in enumerate(decomposition.thresholds):
            value = decomposition.growth(M_j)
            if value <= math.e:
                raise regulus.errors.ConfigurationError(
                    f"F(M_{j}) = {value:g} does not exceed e, so the largeness "
                    f"threshold 1/log F(M_{j}) is undefined. Use a faster growth "
                    "function or a larger M_d."
                )
            self.thresholds[j] = value

        self.masks: typing.Dict[typing.Tuple[regulus.system.Edge, int], np.ndarray] = {}
        self.gaps: typing.Dict[typing.Tuple[regulus.system.Edge, int], np.ndarray] = {}

    def largeness_floor(self, j: int) -> float:
        return 1.0 / math.log(self.thresholds[j])

    def regularity_ceiling(self, j: int) -> float:
        return 1.0 / self.thresholds[j]

    def mask(self, e: regulus.system.Edge, label: int) -> np.ndarray:
        if (e, label) not in self.masks:
            self.masks[(e, label)] = self.decomposition.algebra(e).atom(label).membership
        return self.masks[(e, label)]

    def lifted(
        self, e: regulus.system.Edge, label: int, target: regulus.system.Edge
    ) -> np.ndarray:
        return self.mask(e, label)[regulus.system.projection(self.system, target, e)]

    def gap_squared(self, e: regulus.system.Edge, label: int) -> np.ndarray:
        """|E(1_A|fine join) - E(1_A|coarse join)|^2 over V_e."""

        if (e, label) not in self.gaps:
            atom = self.decomposition.algebra(e).atom(label)
            fine = regulus.measure.cond_expect(
                atom, self.decomposition.fine_join(e), self.system
            )
            coarse = regulus.measure.cond_expect(
                atom, self.decomposition.coarse_join(e), self.system
            )
            self.gaps[(e, label)] = (fine.pointwise() - coarse.pointwise()) ** 2
        return self.gaps[(e, label)]

    def intersection(
        self, edges: typing.Iterable[regulus.system.Edge], atoms: AtomTuple, target: regulus.system.Edge
    ) -> np.ndarray:
        result = np.ones(self.system.cardinality(target), dtype=bool)
        for f in edges:
            result &= self.lifted(f, atoms[f], target)
        return result

    def conditions(
        self, e: regulus.system.Edge, atoms: AtomTuple
    ) -> typing.Tuple[bool, bool, float, bool]:
        """(largeness, regularity, p_e, vacuous) for the atom of e within the tuple."""

        j = len(e)
        boundary = self.intersection(regulus.system.skeleton(e), atoms, e)
        below = self.intersection(regulus.system.proper_subsets(e), atoms, e)
        A_e = self.mask(e, atoms[e])

        boundary_mass = boundary.mean()
        joint = (A_e & boundary).mean()
        vacuous = not boundary.any()
        p = 1.0 if vacuous else float(joint / boundary_mass)
        large = bool(joint >= self.largeness_floor(j) * boundary_mass - TOLERANCE)

        spread = float((self.gap_squared(e, atoms[e]) * below).mean())
        regular = spread <= self.regularity_ceiling(j) * below.mean() + TOLERANCE
        return large, bool(regular), p, vacuous

    def joint_density(self, atoms: AtomTuple) -> float:
        support = self.system.support()
        return float(self.intersection(self.system.all_edges, atoms, support).mean())


def _complete(
    decomposition: regulus.regularity.RegularityDecomposition, atoms: AtomTuple
) -> typing.Dict[regulus.system.Edge, int]:
    complete = {regulus.system.canonical_edge(e): int(label) for e, label in atoms.items()}
    complete.setdefault((), 0)
    missing = [e for e in decomposition.system.all_edges if e not in complete]
    if missing:
        raise regulus.errors.PreconditionError(
            f"The atom tuple has no atom for the edges {missing}."
        )
    for e in decomposition.system.all_edges:
        decomposition.algebra(e).atom(complete[e])
    return complete


def _classify(evaluator: AtomEvaluator, atoms: typing.Dict[regulus.system.Edge, int]) -> AtomProfile:
    p: typing.Dict[regulus.system.Edge, float] = {}
    flags: typing.Dict[typing.Tuple[regulus.system.Edge, str], bool] = {}
    vacuous: typing.List[regulus.system.Edge] = []
    for e in evaluator.system.all_edges:
        large, regular, p[e], empty = evaluator.conditions(e, atoms)
        flags[(e, LARGENESS)] = large
        flags[(e, REGULARITY)] = regular
        if empty:
            vacuous.append(e)

    return AtomProfile(
        atoms=dict(atoms),
        p=p,
        flags=flags,
        joint_density=evaluator.joint_density(atoms),
        vacuous=tuple(vacuous),
    )


def classify_atom(
    decomposition: regulus.regularity.RegularityDecomposition, atoms: AtomTuple
) -> AtomProfile:
    """Check the largeness and regularity estimates for every edge of the tuple."""
    return _classify(AtomEvaluator(decomposition), _complete(decomposition, atoms))


def _lower_atoms(
    decomposition: regulus.regularity.RegularityDecomposition, e: regulus.system.Edge
) -> typing.Iterator[typing.Tuple[typing.Dict[regulus.system.Edge, int], np.ndarray]]:
    """Yield the nonempty intersections of atoms of B_f, f a proper subset of e, as
    (labels, mask over V_e) in canonical order."""

    system = decomposition.system
    below = regulus.system.proper_subsets(e)
    labels = regulus.measure.join(decomposition.algebra(f) for f in below).labels_on(system, e)
    _, first = np.unique(labels, return_index=True)
    for label, point in enumerate(first):
        tuple_labels = {
            f: int(decomposition.algebra(f).labels[regulus.system.projection(system, e, f)[point]])
            for f in below
        }
        yield tuple_labels, labels == label


def bad_set(
    decomposition: regulus.regularity.RegularityDecomposition,
    e: typing.Iterable[typing.Any],
    atom: int,
    evaluator: AtomEvaluator | None = None,
) -> BadSet:
    """The union of the lower atom intersections on which the atom of e fails the
    largeness or the regularity estimate. Pass an evaluator to share its caches
    across calls on the same decomposition."""

    edge = regulus.system.canonical_edge(e)
    decomposition.algebra(edge).atom(atom)
    if evaluator is None:
        evaluator = AtomEvaluator(decomposition)

    region = np.zeros(decomposition.system.cardinality(edge), dtype=bool)
    failing: typing.List[typing.Dict[regulus.system.Edge, int]] = []
    for lower, mask in _lower_atoms(decomposition, edge):
        large, regular, _, _ = evaluator.conditions(edge, {**lower, edge: atom})
        if not (large and regular):
            region |= mask
            failing.append(lower)

    return BadSet(edge, atom, regulus.measure.CylinderSet(edge, region), tuple(failing))


def bad_mass(
    decomposition: regulus.regularity.RegularityDecomposition, bad: BadSet
) -> float:
    """E(1_{A_e} 1_{B_{e,A_e}})."""
    A_e = decomposition.algebra(bad.edge).atom(bad.atom).membership
    return float((A_e & bad.region.membership).mean())


def bad_mass_bound(
    decomposition: regulus.regularity.RegularityDecomposition, e: regulus.system.Edge
) -> float:
    return 2.0 / math.log(decomposition.growth(decomposition.thresholds[len(e)]))


def decompose_atom(
    decomposition: regulus.regularity.RegularityDecomposition,
    e: typing.Iterable[typing.Any],
    lower: AtomTuple,
    atom: int,
) -> AtomDecomposition:
    """Split 1_{A_e} = p_e + b_e + c_e on the intersection of the boundary atoms."""

    system = decomposition.system
    edge = regulus.system.canonical_edge(e)
    A_e = decomposition.algebra(edge).atom(atom)

    region = np.ones(system.cardinality(edge), dtype=bool)
    for f in regulus.system.skeleton(edge):
        region &= decomposition.algebra(f).atom(lower[f]).lift(system, edge)

    fine = regulus.measure.cond_expect(A_e, decomposition.fine_join(edge), system).pointwise()
    coarse = regulus.measure.cond_expect(A_e, decomposition.coarse_join(edge), system).pointwise()
    indicator = A_e.membership.astype(float)

    p = float(indicator[region].mean()) if region.any() else 1.0
    b = fine - coarse
    c = indicator - fine
    residual = float(np.abs(indicator - p - b - c)[region].max()) if region.any() else 0.0
    return AtomDecomposition(edge, p, region, b, c, residual)


def counting_check(
    decomposition: regulus.regularity.RegularityDecomposition, profile: AtomProfile
) -> CountingCheck:
    """Compare the joint density of a good atom tuple, enumerated over V_J, with the
    product of its conditional densities."""

    if not profile.good:
        raise regulus.errors.PreconditionError(
            f"The counting check needs a good atom tuple, but {profile.atoms} is bad."
        )

    system = decomposition.system
    everything = system.vertex_labels
    system.check_enumerable(system.cardinality(everything), "the product space V_J")
    product = np.ones(system.cardinality(everything), dtype=bool)
    for e, label in profile.atoms.items():
        product &= decomposition.algebra(e).atom(label).lift(system, everything)

    lhs = float(product.mean())
    rhs = math.prod(profile.p.values())
    return CountingCheck(lhs, rhs, _ratio(lhs, rhs), abs(lhs - rhs))


def _bundle_indicator(
    decomposition: regulus.regularity.RegularityDecomposition,
    bundle: regulus.system.Bundle,
    atoms: AtomTuple,
    edges: typing.Iterable[typing.Tuple[typing.Any, ...]],
) -> typing.Tuple[typing.Tuple[int, ...], np.ndarray]:
    """prod over the given bundle edges of 1_{A_pi(g)}, tabulated over V_K."""

    system = decomposition.system
    shape = tuple(system.size(bundle.projection[k]) for k in bundle.ground)
    cells = math.prod(shape)
    system.check_enumerable(cells, "the bundle product space V_K")
    grid = np.indices(shape).reshape(len(shape), -1) if shape else np.zeros((0, 1), dtype=np.int64)

    product = np.ones(cells, dtype=bool)
    for g in edges:
        image = bundle.project(g)
        mask = decomposition.algebra(image).atom(atoms[image]).membership
        if not g:
            product &= mask[0]
            continue
        ordered = sorted(g, key=lambda k: bundle.projection[k])
        index = np.ravel_multi_index(
            tuple(grid[bundle.ground.index(k)] for k in ordered), system.shape(image)
        )
        product &= mask[index]

    return shape, product


def generalized_counting_check(
    decomposition: regulus.regularity.RegularityDecomposition,
    bundle: regulus.system.Bundle,
    atoms: AtomTuple,
    g0: typing.Iterable[typing.Any] | None = None,
) -> GeneralizedCount:
    """The counting check over a bundle: the average over V_K of prod_g 1_{A_pi(g)}
    against prod_g p_pi(g). For a bundle of positive order the squared inner average
    around a top edge g0 is also compared with the plain average over the doubled
    bundle."""

    system = decomposition.system
    bundle.validate(system)
    atoms = _complete(decomposition, atoms)
    evaluator = AtomEvaluator(decomposition)

    _, product = _bundle_indicator(decomposition, bundle, atoms, bundle.edges)
    lhs = float(product.mean())
    rhs = math.prod(evaluator.conditions(bundle.project(g), atoms)[2] for g in bundle.edges)
    if bundle.order == 0:
        return GeneralizedCount(lhs, rhs, _ratio(lhs, rhs))

    top = regulus.system.canonical_edge(g0) if g0 is not None else bundle.top_edges()[0]
    inside = [g for g in bundle.edges if set(g) < set(top)]
    outside = [
        g for g in bundle.edges if g not in inside and len(g) <= bundle.order - 1
    ]

    shape, inner = _bundle_indicator(decomposition, bundle, atoms, outside)
    _, base = _bundle_indicator(decomposition, bundle, atoms, inside)
    free = tuple(i for i, k in enumerate(bundle.ground) if k not in top)
    averaged = inner.reshape(shape).astype(float).mean(axis=free, keepdims=True)
    restricted = base.reshape(shape).astype(float).mean(axis=free, keepdims=True)
    bracketed = float((restricted * averaged**2).mean())

    doubled = regulus.system.double_bundle(bundle, top)
    _, doubled_product = _bundle_indicator(decomposition, doubled, atoms, doubled.edges)
    doubled_lhs = float(doubled_product.mean())

    logging.debug(
        f"Doubling around {top}: bracketed {bracketed:.6g}, doubled bundle {doubled_lhs:.6g}."
    )
    return GeneralizedCount(lhs, rhs, _ratio(lhs, rhs), bracketed, doubled_lhs)


def census(
    decomposition: regulus.regularity.RegularityDecomposition,
) -> Census:
    """Classify every atom tuple, empty ones included."""

    system = decomposition.system
    edges = list(system.all_edges)
    counts = [decomposition.algebra(e).atom_count for e in edges]
    system.check_enumerable(math.prod(counts), "the atom tuples")

    evaluator = AtomEvaluator(decomposition)
    profiles = [
        _classify(evaluator, dict(zip(edges, labels)))
        for labels in itertools.product(*(range(n) for n in counts))
    ]
    total = sum(profile.joint_density for profile in profiles)
    return Census(tuple(profiles), total)


def he_small_bound(
    decomposition: regulus.regularity.RegularityDecomposition,
    e: typing.Iterable[typing.Any],
    atom: int,
    oracle: regulus.discrepancy.Oracle | None = None,
) -> typing.Tuple[float, float]:
    """(sup |E(c_e prod 1_{E_f})|, 1/F(M_0)); the supremum is the discrepancy of the
    atom against the fine join, as measured by the oracle."""

    edge = regulus.system.canonical_edge(e)
    if oracle is None:
        oracle = regulus.discrepancy.parse_oracle(decomposition.oracle)
    A_e = decomposition.algebra(edge).atom(atom)
    value = oracle(A_e, decomposition.fine_join(edge), decomposition.system).value
    return value, decomposition.growth.reciprocal(decomposition.thresholds[0])
