import dataclasses
import itertools
import typing

import numpy as np

import regulus.errors
import regulus.measure
import regulus.removal
import regulus.system


@dataclasses.dataclass(frozen=True)
class RothInstance:
    """The tripartite graph on three copies of Z_N whose triangles are the solutions
    of a + b = 2c in S, one per choice of offset."""

    modulus: int
    difference_set: typing.Tuple[int, ...]
    E12: typing.FrozenSet[typing.Tuple[int, int]]
    E23: typing.FrozenSet[typing.Tuple[int, int]]
    E31: typing.FrozenSet[typing.Tuple[int, int]]

    @property
    def sizes(self) -> typing.Tuple[int, int, int]:
        return (self.modulus, self.modulus, self.modulus)


def _check_modulus(N: int) -> None:
    if N < 1 or N % 2 == 0:
        raise regulus.errors.ConfigurationError(
            f"The modulus N must be a positive odd integer so that 2 is invertible, "
            f"got {N}."
        )


def half(N: int) -> int:
    """2^-1 mod N."""
    _check_modulus(N)
    return pow(2, -1, N) if N > 1 else 0


def build_instance(N: int, S: typing.Iterable[int]) -> RothInstance:
    """E12 = {(x, y): y - x in S}, E23 = {(y, z): z - y in S} and
    E13 = {(x, z): (z - x)/2 in S}, with E31 stored as pairs (z, x)."""

    _check_modulus(N)
    members = tuple(sorted({int(s) % N for s in S}))
    inverse = half(N)
    residues = set(members)

    E12 = {(x, y) for x in range(N) for y in range(N) if (y - x) % N in residues}
    E23 = {(y, z) for y in range(N) for z in range(N) if (z - y) % N in residues}
    E31 = {
        (z, x)
        for x in range(N)
        for z in range(N)
        if ((z - x) * inverse) % N in residues
    }
    return RothInstance(N, members, frozenset(E12), frozenset(E23), frozenset(E31))


def progression_count(N: int, S: typing.Iterable[int]) -> int:
    """N * |{(a, b, c) in S^3: a + b = 2c mod N}|."""

    _check_modulus(N)
    members = sorted({int(s) % N for s in S})
    solutions = sum(
        1 for a, b, c in itertools.product(members, repeat=3) if (a + b - 2 * c) % N == 0
    )
    return N * solutions


def random_difference_set(N: int, density: float, seed: int) -> typing.Tuple[int, ...]:
    _check_modulus(N)
    if not 0 <= density <= 1:
        raise regulus.errors.ConfigurationError(
            f"The density must lie in [0, 1], got {density}."
        )
    rng = np.random.default_rng(seed)
    return tuple(int(s) for s in np.flatnonzero(rng.random(N) < density))


def triangle_sets(
    instance: RothInstance, cap: int = regulus.system.DEFAULT_CAP
) -> typing.Tuple[regulus.system.HypergraphSystem, regulus.removal.EdgeSets]:
    system = regulus.system.make_system(
        [1, 2, 3], instance.sizes, 2, [(1, 2), (2, 3), (1, 3)], cap
    )
    sets = {
        (1, 2): regulus.measure.CylinderSet.from_points(system, (1, 2), instance.E12),
        (2, 3): regulus.measure.CylinderSet.from_points(system, (2, 3), instance.E23),
        (1, 3): regulus.measure.CylinderSet.from_points(
            system, (1, 3), [(x, z) for z, x in instance.E31]
        ),
    }
    return system, sets


def count_triangles(instance: RothInstance, cap: int = regulus.system.DEFAULT_CAP) -> int:
    """Triangles counted by enumeration of V1 x V2 x V3."""
    system, sets = triangle_sets(instance, cap)
    return regulus.removal.count_copies(system, sets)
