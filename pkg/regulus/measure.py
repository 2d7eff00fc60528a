import dataclasses
import fractions
import functools
import math
import typing

import numpy as np

import regulus.errors
import regulus.system


RATIONAL_CAP = 10**6

Number = typing.Union[float, fractions.Fraction]


def canonical_labels(raw: np.ndarray) -> np.ndarray:
    """Renumber labels 0, 1, 2, ... in order of first appearance."""

    raw = np.asarray(raw)
    if raw.size == 0:
        return raw.astype(np.int64)

    _, first, inverse = np.unique(raw, return_index=True, return_inverse=True)
    rank = np.empty(first.size, dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(first.size, dtype=np.int64)
    return rank[inverse.reshape(-1)]


def _readonly(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


@dataclasses.dataclass(frozen=True, eq=False)
class CylinderSet:
    """A subset E of V_e, standing for the cylinder pi_e^{-1}(E) in V_J."""

    base: regulus.system.Edge
    membership: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "base", regulus.system.canonical_edge(self.base))
        object.__setattr__(
            self, "membership", _readonly(np.array(self.membership, dtype=bool))
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CylinderSet):
            return NotImplemented
        return self.base == other.base and np.array_equal(
            self.membership, other.membership
        )

    __hash__ = object.__hash__

    @classmethod
    def from_points(
        cls,
        system: regulus.system.HypergraphSystem,
        base: typing.Iterable[typing.Any],
        points: typing.Iterable[typing.Sequence[int]],
    ) -> "CylinderSet":
        edge = system.check_edge(base)
        shape = system.shape(edge)
        membership = np.zeros(system.cardinality(edge), dtype=bool)
        for coordinates in points:
            coordinates = tuple(int(c) for c in coordinates)
            if len(coordinates) != len(edge) or any(
                not 0 <= c < n for c, n in zip(coordinates, shape)
            ):
                raise regulus.errors.SystemValidationError(
                    f"Point {list(coordinates)} does not lie in V_{list(edge)} with "
                    f"shape {list(shape)}."
                )
            membership[
                regulus.system.point_index(
                    system, regulus.system.Point(edge, coordinates)
                )
            ] = True

        return cls(edge, membership)

    @classmethod
    def full(
        cls, system: regulus.system.HypergraphSystem, base: typing.Iterable[typing.Any]
    ) -> "CylinderSet":
        edge = system.check_edge(base)
        return cls(edge, np.ones(system.cardinality(edge), dtype=bool))

    @classmethod
    def empty(
        cls, system: regulus.system.HypergraphSystem, base: typing.Iterable[typing.Any]
    ) -> "CylinderSet":
        edge = system.check_edge(base)
        return cls(edge, np.zeros(system.cardinality(edge), dtype=bool))

    def check(self, system: regulus.system.HypergraphSystem) -> None:
        system.check_edge(self.base)
        if self.membership.size != system.cardinality(self.base):
            raise regulus.errors.SystemValidationError(
                f"Cylinder set on base {self.base} has {self.membership.size} "
                f"membership bits, expected {system.cardinality(self.base)}."
            )

    def popcount(self) -> int:
        return int(self.membership.sum())

    def lift(
        self, system: regulus.system.HypergraphSystem, target: regulus.system.Edge
    ) -> np.ndarray:
        """Membership over V_target for a target base containing this base."""
        return self.membership[regulus.system.projection(system, target, self.base)]

    def complement(self) -> "CylinderSet":
        return CylinderSet(self.base, ~self.membership)

    def intersection(self, other: "CylinderSet") -> "CylinderSet":
        self._same_base(other)
        return CylinderSet(self.base, self.membership & other.membership)

    def difference(self, other: "CylinderSet") -> "CylinderSet":
        self._same_base(other)
        return CylinderSet(self.base, self.membership & ~other.membership)

    def _same_base(self, other: "CylinderSet") -> None:
        if self.base != other.base:
            raise regulus.errors.SystemValidationError(
                f"Cannot combine cylinder sets on bases {self.base} and {other.base}."
            )

    def points(
        self, system: regulus.system.HypergraphSystem
    ) -> typing.List[typing.Tuple[int, ...]]:
        indices = np.flatnonzero(self.membership)
        if not self.base:
            return [()] * len(indices)

        coordinates = np.unravel_index(indices, system.shape(self.base))
        return [tuple(int(c[i]) for c in coordinates) for i in range(len(indices))]

    def to_record(
        self, system: regulus.system.HypergraphSystem
    ) -> typing.Dict[str, typing.Any]:
        return {
            "base": list(self.base),
            "points": [list(p) for p in self.points(system)],
        }


@dataclasses.dataclass(frozen=True, eq=False)
class FactorAlgebra:
    """A sigma-algebra B inside A_e, stored as a partition of V_e together with the
    number of generators used to build it (an upper bound on its complexity)."""

    base: regulus.system.Edge
    labels: np.ndarray
    complexity_bound: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "base", regulus.system.canonical_edge(self.base))
        object.__setattr__(self, "labels", _readonly(canonical_labels(self.labels)))

        if self.complexity_bound < 0:
            raise regulus.errors.SystemValidationError(
                f"Complexity bound must be nonnegative, got {self.complexity_bound}."
            )
        if self.atom_count > 2**self.complexity_bound:
            raise regulus.errors.SystemValidationError(
                f"An algebra with {self.atom_count} atoms cannot be generated by "
                f"{self.complexity_bound} sets."
            )

    @property
    def atom_count(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    @property
    def is_trivial(self) -> bool:
        return self.atom_count <= 1

    def atom(self, label: int) -> CylinderSet:
        if not 0 <= label < self.atom_count:
            raise regulus.errors.PreconditionError(
                f"Atom {label} does not exist, the algebra on {self.base} has "
                f"{self.atom_count} atoms."
            )
        return CylinderSet(self.base, self.labels == label)

    def atoms(self) -> typing.List[CylinderSet]:
        return [self.atom(label) for label in range(self.atom_count)]

    def measures(self, E: CylinderSet) -> bool:
        """True when E (on the same base) is a union of atoms."""

        if E.base != self.base:
            raise regulus.errors.SystemValidationError(
                f"Set on base {E.base} cannot be tested against an algebra on {self.base}."
            )
        hits = np.bincount(self.labels, weights=E.membership.astype(float), minlength=self.atom_count)
        sizes = np.bincount(self.labels, minlength=self.atom_count)
        return bool(np.all((hits == 0) | (hits == sizes)))

    def refine(self, E: CylinderSet) -> "FactorAlgebra":
        """B v B(E). A generator that is already measurable adds nothing."""

        if self.measures(E):
            return self

        return FactorAlgebra(
            self.base,
            self.labels * 2 + E.membership.astype(np.int64),
            self.complexity_bound + 1,
        )

    def is_refinement_of(self, other: "FactorAlgebra") -> bool:
        if self.base != other.base:
            return False
        pairs = np.unique(np.stack([self.labels, other.labels]), axis=1)
        return pairs.shape[1] == self.atom_count

    def to_record(self) -> typing.Dict[str, typing.Any]:
        return {
            "base": list(self.base),
            "atoms": self.atom_count,
            "complexity_bound": self.complexity_bound,
            "labels": self.labels.tolist(),
        }

    @classmethod
    def trivial(
        cls, system: regulus.system.HypergraphSystem, base: typing.Iterable[typing.Any]
    ) -> "FactorAlgebra":
        edge = system.check_edge(base)
        return cls(edge, np.zeros(system.cardinality(edge), dtype=np.int64), 0)

    @classmethod
    def discrete(
        cls, system: regulus.system.HypergraphSystem, base: typing.Iterable[typing.Any]
    ) -> "FactorAlgebra":
        edge = system.check_edge(base)
        cells = system.cardinality(edge)
        return cls(
            edge, np.arange(cells, dtype=np.int64), math.ceil(math.log2(max(cells, 1)))
        )


def generate(
    system: regulus.system.HypergraphSystem,
    base: typing.Iterable[typing.Any],
    generators: typing.Sequence[CylinderSet],
) -> FactorAlgebra:
    """The algebra generated by the given sets: atoms are the distinct membership
    signatures, complexity bound is the number of generators."""

    edge = system.check_edge(base)
    labels = np.zeros(system.cardinality(edge), dtype=np.int64)
    for E in generators:
        if E.base != edge:
            raise regulus.errors.SystemValidationError(
                f"Generator on base {E.base} does not match the algebra base {edge}."
            )
        E.check(system)
        labels = canonical_labels(labels * 2 + E.membership.astype(np.int64))

    return FactorAlgebra(edge, labels, len(generators))


@dataclasses.dataclass(frozen=True)
class JoinAlgebra:
    """The common refinement of factor algebras living on (possibly different) bases."""

    factors: typing.Tuple[FactorAlgebra, ...] = ()

    @property
    def base(self) -> regulus.system.Edge:
        return regulus.system.union(f.base for f in self.factors)

    @property
    def complexity_bound(self) -> int:
        return sum(f.complexity_bound for f in self.factors)

    def labels_on(
        self,
        system: regulus.system.HypergraphSystem,
        target: regulus.system.Edge | None = None,
    ) -> np.ndarray:
        """Canonical atom labels over V_target (default: the union of the bases)."""
        return _join_labels(system, self, self.base if target is None else target)

    def atom_count(self, system: regulus.system.HypergraphSystem) -> int:
        labels = self.labels_on(system)
        return int(labels.max()) + 1 if labels.size else 0


@functools.lru_cache(maxsize=2048)
def _join_labels(
    system: regulus.system.HypergraphSystem,
    algebra: JoinAlgebra,
    target: regulus.system.Edge,
) -> np.ndarray:
    labels = np.zeros(system.cardinality(target), dtype=np.int64)
    for factor in algebra.factors:
        lifted = factor.labels[regulus.system.projection(system, target, factor.base)]
        labels = canonical_labels(labels * max(factor.atom_count, 1) + lifted)

    return _readonly(labels)


def join(algebras: typing.Iterable[FactorAlgebra | JoinAlgebra]) -> JoinAlgebra:
    factors: typing.List[FactorAlgebra] = []
    for algebra in algebras:
        if isinstance(algebra, JoinAlgebra):
            factors.extend(algebra.factors)
        else:
            factors.append(algebra)

    return JoinAlgebra(tuple(factors))


@dataclasses.dataclass(frozen=True)
class AtomValues:
    """E(1_E | B) stored per atom of B on a common base: counts are |atom| and hits
    are |atom & E|, both counted in V_base."""

    base: regulus.system.Edge
    labels: np.ndarray
    counts: np.ndarray
    hits: np.ndarray

    @property
    def values(self) -> np.ndarray:
        return self.hits / self.counts

    @property
    def weights(self) -> np.ndarray:
        return self.counts / self.counts.sum()

    def exact_values(self) -> typing.List[fractions.Fraction]:
        return [fractions.Fraction(int(h), int(c)) for h, c in zip(self.hits, self.counts)]

    def pointwise(self) -> np.ndarray:
        return self.values[self.labels]


def _check_rational(
    system: regulus.system.HypergraphSystem, base: regulus.system.Edge, cap: int
) -> None:
    if system.cardinality(base) > cap:
        raise regulus.errors.GuardrailError(
            f"Exact rational arithmetic on V_{list(base)} ({system.cardinality(base)} "
            f"cells) exceeds the limit of {cap} cells."
        )


def density(
    E: CylinderSet,
    system: regulus.system.HypergraphSystem,
    exact: bool = False,
    rational_cap: int = RATIONAL_CAP,
) -> Number:
    """E(1_E); the cylinder lift preserves density so it is counted on V_base."""

    E.check(system)
    if exact:
        _check_rational(system, E.base, rational_cap)
        return fractions.Fraction(E.popcount(), E.membership.size)
    return E.popcount() / E.membership.size


def cond_expect(
    E: CylinderSet,
    B: JoinAlgebra | FactorAlgebra,
    system: regulus.system.HypergraphSystem,
) -> AtomValues:
    algebra = join([B])
    base = regulus.system.union([E.base, algebra.base])
    labels = algebra.labels_on(system, base)
    counts = np.bincount(labels)
    hits = np.bincount(labels, weights=E.lift(system, base).astype(float), minlength=counts.size)
    return AtomValues(base, labels, counts, hits.astype(np.int64))


def cond_expect_on(values: np.ndarray, event: np.ndarray) -> float:
    """E(f | A) for a nonempty event A given as a boolean mask over the same base."""

    if not event.any():
        raise regulus.errors.PreconditionError(
            "Conditional expectation on an empty event is undefined."
        )
    return float(values[event].mean())


def energy(
    E: CylinderSet,
    B: JoinAlgebra | FactorAlgebra,
    system: regulus.system.HypergraphSystem,
    exact: bool = False,
    rational_cap: int = RATIONAL_CAP,
) -> Number:
    """The E-energy E(|E(1_E|B)|^2) of B."""

    ce = cond_expect(E, B, system)
    if exact:
        _check_rational(system, ce.base, rational_cap)
        total = sum(
            (fractions.Fraction(int(h) * int(h), int(c)) for h, c in zip(ce.hits, ce.counts)),
            fractions.Fraction(0),
        )
        return total / int(ce.counts.sum())
    return float((ce.hits.astype(float) ** 2 / ce.counts).sum() / ce.counts.sum())


def l2_gap(
    E: CylinderSet,
    coarse: JoinAlgebra | FactorAlgebra,
    fine: JoinAlgebra | FactorAlgebra,
    system: regulus.system.HypergraphSystem,
    exact: bool = False,
    rational_cap: int = RATIONAL_CAP,
) -> Number:
    """E(|E(1_E|B') - E(1_E|B)|^2)."""

    base = regulus.system.union([E.base, join([coarse]).base, join([fine]).base])
    lifted = CylinderSet(base, E.lift(system, base))
    low = cond_expect(lifted, coarse, system)
    high = cond_expect(lifted, fine, system)

    if not exact:
        diff = high.pointwise() - low.pointwise()
        return float(np.mean(diff**2))

    _check_rational(system, base, rational_cap)
    common = join([coarse, fine]).labels_on(system, base)
    _, first = np.unique(common, return_index=True)
    counts = np.bincount(common)
    low_values = low.exact_values()
    high_values = high.exact_values()
    total = fractions.Fraction(0)
    for atom, point in enumerate(first):
        gap = high_values[high.labels[point]] - low_values[low.labels[point]]
        total += int(counts[atom]) * gap * gap
    return total / int(counts.sum())


def is_measurable(
    E: CylinderSet,
    B: JoinAlgebra | FactorAlgebra,
    system: regulus.system.HypergraphSystem,
) -> bool:
    """True when every atom of B lies entirely inside or entirely outside E."""

    ce = cond_expect(E, B, system)
    return bool(np.all((ce.hits == 0) | (ce.hits == ce.counts)))
