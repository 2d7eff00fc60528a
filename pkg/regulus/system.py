import dataclasses
import functools
import itertools
import logging
import math
import typing

import numpy as np

import regulus.errors


DEFAULT_CAP = 10**8

Label = typing.Hashable
Edge = typing.Tuple[typing.Any, ...]


def canonical_edge(e: typing.Iterable[typing.Any]) -> Edge:
    return tuple(sorted(e))


def skeleton(e: typing.Iterable[typing.Any]) -> typing.List[Edge]:
    """The (|e|-1)-subsets of e in canonical order. The skeleton of the empty edge is
    empty, since there are no subsets of size -1."""

    edge = canonical_edge(e)
    if not edge:
        return []

    return sorted(itertools.combinations(edge, len(edge) - 1))


def proper_subsets(e: typing.Iterable[typing.Any]) -> typing.List[Edge]:
    edge = canonical_edge(e)
    subsets: typing.List[Edge] = []
    for size in range(len(edge)):
        subsets.extend(itertools.combinations(edge, size))

    return sorted(subsets)


def down_closure(
    top_layer: typing.Iterable[typing.Iterable[typing.Any]], order: int
) -> typing.Dict[int, typing.List[Edge]]:
    """Compute H_j := union of the skeleta of H_{j+1}, backwards from j = order."""

    layers: typing.Dict[int, typing.List[Edge]] = {
        order: sorted({canonical_edge(e) for e in top_layer})
    }
    for j in range(order - 1, -1, -1):
        layer: typing.Set[Edge] = set()
        for e in layers[j + 1]:
            layer.update(skeleton(e))
        layers[j] = sorted(layer)

    return layers


@dataclasses.dataclass(frozen=True)
class Point:
    base: Edge
    coordinates: typing.Tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.base) != len(self.coordinates):
            raise regulus.errors.SystemValidationError(
                f"Point on base {self.base} has {len(self.coordinates)} coordinates, "
                f"expected {len(self.base)}."
            )

    def restrict(self, f: typing.Iterable[typing.Any]) -> "Point":
        """Coordinate restriction, i.e. the canonical projection pi_f."""

        sub = canonical_edge(f)
        lookup = dict(zip(self.base, self.coordinates))
        return Point(sub, tuple(lookup[j] for j in sub))


@dataclasses.dataclass(frozen=True)
class HypergraphSystem:
    vertex_labels: typing.Tuple[Label, ...]
    factor_sizes: typing.Tuple[int, ...]
    order: int
    top_layer: typing.Tuple[Edge, ...]
    cap: int = DEFAULT_CAP

    layers: typing.Tuple[typing.Tuple[Edge, ...], ...] = dataclasses.field(
        init=False, compare=False
    )
    all_edges: typing.Tuple[Edge, ...] = dataclasses.field(init=False, compare=False)

    def __post_init__(self) -> None:
        layers = down_closure(self.top_layer, self.order)
        object.__setattr__(
            self, "layers", tuple(tuple(layers[j]) for j in range(self.order + 1))
        )
        edges: typing.Set[Edge] = set()
        for layer in self.layers:
            edges.update(layer)
        object.__setattr__(self, "all_edges", tuple(sorted(edges)))

    def size(self, j: Label) -> int:
        return self.factor_sizes[self.vertex_labels.index(j)]

    def shape(self, e: typing.Iterable[typing.Any]) -> typing.Tuple[int, ...]:
        return tuple(self.size(j) for j in canonical_edge(e))

    def cardinality(self, e: typing.Iterable[typing.Any]) -> int:
        """|V_e|, the number of points of the product space over e."""
        return math.prod(self.shape(e))

    @property
    def volume(self) -> int:
        return math.prod(self.factor_sizes)

    def layer(self, j: int) -> typing.Tuple[Edge, ...]:
        return self.layers[j]

    def layer_of(self, e: Edge) -> int:
        return len(e)

    def boundary(self) -> typing.List[Edge]:
        """The skeleton of the top layer, i.e. H_{d-1}."""
        return list(self.layers[self.order - 1])

    def support(self) -> Edge:
        """The smallest base carrying every edge of H."""
        labels: typing.Set[typing.Any] = set()
        for e in self.top_layer:
            labels.update(e)
        return canonical_edge(labels)

    def check_enumerable(self, cells: int, what: str) -> None:
        if cells > self.cap:
            raise regulus.errors.GuardrailError(
                f"Enumerating {what} needs {cells} cells, which exceeds the "
                f"enumeration cap of {self.cap}. Raise the cap with --cap or "
                "REGULUS_CAP if this is intended."
            )

    def check_edge(self, e: typing.Iterable[typing.Any]) -> Edge:
        edge = canonical_edge(e)
        unknown = [j for j in edge if j not in self.vertex_labels]
        if unknown:
            raise regulus.errors.SystemValidationError(
                f"Edge {edge} uses labels {unknown} that are not part of the system."
            )
        return edge


def make_system(
    labels: typing.Sequence[Label],
    sizes: typing.Sequence[int],
    d: int,
    top_layer: typing.Iterable[typing.Iterable[Label]],
    cap: int = DEFAULT_CAP,
) -> HypergraphSystem:
    """Validate the quadruple (J, (V_j), d, H_d) and build the hypergraph system."""

    if len(set(labels)) != len(labels):
        duplicate = max(labels, key=list(labels).count)
        raise regulus.errors.SystemValidationError(
            f"The label '{duplicate}' has been defined for 2 or more vertex classes!"
        )

    if len(labels) != len(sizes):
        raise regulus.errors.SystemValidationError(
            f"Got {len(labels)} labels but {len(sizes)} vertex class sizes."
        )

    if d < 1:
        raise regulus.errors.SystemValidationError(
            f"The order d must be a positive integer, got {d}."
        )

    for label, size in zip(labels, sizes):
        if int(size) != size or size < 1:
            raise regulus.errors.SystemValidationError(
                f"Vertex class '{label}' has size {size}, must be a positive integer."
            )

    try:
        order = sorted(range(len(labels)), key=lambda i: labels[i])
    except TypeError as ex:
        raise regulus.errors.SystemValidationError(
            "Vertex labels must be mutually comparable (all integers or all strings)."
        ) from ex

    sorted_labels = tuple(labels[i] for i in order)
    sorted_sizes = tuple(int(sizes[i]) for i in order)

    edges: typing.Set[Edge] = set()
    for raw in top_layer:
        e = canonical_edge(raw)
        if len(set(e)) != len(e) or len(e) != d:
            raise regulus.errors.SystemValidationError(
                f"The top layer must be {d}-uniform, but contains the edge {e}."
            )
        unknown = [j for j in e if j not in sorted_labels]
        if unknown:
            raise regulus.errors.SystemValidationError(
                f"Edge {e} uses labels {unknown} that are not part of the system."
            )
        edges.add(e)

    system = HypergraphSystem(
        vertex_labels=sorted_labels,
        factor_sizes=sorted_sizes,
        order=d,
        top_layer=tuple(sorted(edges)),
        cap=cap,
    )
    system.check_enumerable(system.volume, "the product space V_J")

    logging.debug(
        f"System with labels {sorted_labels}, sizes {sorted_sizes}, d={d} and "
        f"{len(edges)} top edges constructed."
    )

    return system


def enumerate_points(
    system: HypergraphSystem, e: typing.Iterable[typing.Any]
) -> typing.Iterator[Point]:
    """Yield the points of V_e in canonical (sorted label, row-major) order."""

    edge = system.check_edge(e)
    for coordinates in itertools.product(*(range(n) for n in system.shape(edge))):
        yield Point(edge, tuple(coordinates))


def point_index(system: HypergraphSystem, point: Point) -> int:
    if not point.base:
        return 0

    return int(np.ravel_multi_index(point.coordinates, system.shape(point.base)))


@functools.lru_cache(maxsize=4096)
def projection(system: HypergraphSystem, e: Edge, f: Edge) -> np.ndarray:
    """Index map V_e -> V_f for f a subset of e: entry i is the canonical index of
    the restriction of the i-th point of V_e."""

    if not set(f) <= set(e):
        raise regulus.errors.SystemValidationError(
            f"Cannot project from base {e} to {f}, which is not a subset of it."
        )

    cells = system.cardinality(e)
    if not f:
        index = np.zeros(cells, dtype=np.int64)
    elif f == e:
        index = np.arange(cells, dtype=np.int64)
    else:
        grid = np.indices(system.shape(e)).reshape(len(e), -1)
        index = np.ravel_multi_index(
            tuple(grid[e.index(j)] for j in f), system.shape(f)
        ).astype(np.int64)

    index.flags.writeable = False
    return index


def union(edges: typing.Iterable[Edge]) -> Edge:
    labels: typing.Set[typing.Any] = set()
    for e in edges:
        labels.update(e)
    return canonical_edge(labels)


@dataclasses.dataclass(frozen=True)
class Bundle:
    """A hypergraph over a ground set K with a projection pi: K -> J that is a
    homomorphism onto H."""

    ground: typing.Tuple[typing.Any, ...]
    projection: typing.Mapping[typing.Any, Label]
    edges: typing.Tuple[typing.Tuple[typing.Any, ...], ...]

    @property
    def order(self) -> int:
        """d' = the largest edge size (0 for a bundle whose only edge is empty)."""
        return max((len(g) for g in self.edges), default=0)

    def project(self, g: typing.Iterable[typing.Any]) -> Edge:
        return canonical_edge(self.projection[k] for k in g)

    def top_edges(self) -> typing.List[typing.Tuple[typing.Any, ...]]:
        return [g for g in self.edges if len(g) == self.order]

    def validate(self, system: HypergraphSystem) -> None:
        ground = set(self.ground)
        edges = set(self.edges)
        for g in self.edges:
            if not set(g) <= ground:
                raise regulus.errors.SystemValidationError(
                    f"Bundle edge {g} is not contained in the ground set."
                )
            image = [self.projection[k] for k in g]
            if len(set(image)) != len(image):
                raise regulus.errors.SystemValidationError(
                    f"The projection is not injective on the bundle edge {g}."
                )
            if canonical_edge(image) not in system.all_edges:
                raise regulus.errors.SystemValidationError(
                    f"Bundle edge {g} projects to {canonical_edge(image)}, "
                    "which is not an edge of H."
                )
            for sub in proper_subsets(g):
                if sub not in edges:
                    raise regulus.errors.SystemValidationError(
                        f"The bundle is not closed under set inclusion: {sub} is "
                        f"contained in {g} but missing."
                    )

    @classmethod
    def from_system(cls, system: HypergraphSystem) -> "Bundle":
        """The trivial bundle K = J, G = H with pi the identity."""

        return cls(
            ground=system.vertex_labels,
            projection={j: j for j in system.vertex_labels},
            edges=system.all_edges,
        )


def double_bundle(bundle: Bundle, g0: typing.Iterable[typing.Any]) -> Bundle:
    """Build K (+)_{g0} K: two copies of K glued along g0. Edges strictly inside g0
    are kept once, other edges of size below the order are doubled, and edges of top
    order are dropped."""

    top = canonical_edge(g0)
    if top not in bundle.edges:
        raise regulus.errors.SystemValidationError(
            f"The doubling edge {top} is not an edge of the bundle."
        )
    if len(top) != bundle.order:
        raise regulus.errors.SystemValidationError(
            f"The doubling edge {top} has size {len(top)}, but the bundle has order "
            f"{bundle.order}; only edges of maximal size can be doubled."
        )

    glued = set(top)

    def lift(k: typing.Any, copy: int) -> typing.Tuple[typing.Any, int]:
        return (k, 0) if k in glued else (k, copy)

    ground = sorted({lift(k, copy) for k in bundle.ground for copy in (0, 1)})
    projection = {lift(k, copy): bundle.projection[k] for k in bundle.ground for copy in (0, 1)}

    inside = [g for g in bundle.edges if set(g) < glued]
    outside = [
        g for g in bundle.edges if g not in inside and len(g) <= bundle.order - 1
    ]

    edges: typing.Set[typing.Tuple[typing.Any, ...]] = set()
    for g in inside + outside:
        for copy in (0, 1):
            edges.add(canonical_edge(lift(k, copy) for k in g))

    return Bundle(
        ground=tuple(ground), projection=projection, edges=tuple(sorted(edges))
    )
