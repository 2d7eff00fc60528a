import dataclasses
import json
import logging
import math
import typing

import numpy as np

import regulus.discrepancy
import regulus.errors
import regulus.growth
import regulus.measure
import regulus.system


VIOLATION_TOLERANCE = 1e-9
ENERGY_TOLERANCE = 1e-12
FAST_RETRIES = 8

Algebras = typing.Dict[regulus.system.Edge, regulus.measure.FactorAlgebra]


@dataclasses.dataclass(frozen=True)
class AuditRecord:
    layer: int
    e: regulus.system.Edge | None
    atom: int | None
    oracle: str
    value: float | None
    action: str

    def to_record(self) -> typing.Dict[str, typing.Any]:
        return {
            "layer": self.layer,
            "e": None if self.e is None else list(self.e),
            "atom": self.atom,
            "oracle": self.oracle,
            "value": self.value,
            "action": self.action,
        }


def _log_record(records: typing.List[AuditRecord], record: AuditRecord) -> None:
    records.append(record)
    logging.debug(json.dumps(record.to_record(), sort_keys=True))


@dataclasses.dataclass(frozen=True)
class Randomness:
    fine: Algebras
    iterations: int


@dataclasses.dataclass(frozen=True)
class Structure:
    fine: Algebras
    iterations: int


def face_join(
    algebras: typing.Mapping[regulus.system.Edge, regulus.measure.FactorAlgebra],
    e: regulus.system.Edge,
) -> regulus.measure.JoinAlgebra:
    """The join of the algebras sitting on the skeleton of e."""
    return regulus.measure.join(algebras[f] for f in regulus.system.skeleton(e))


def energy_increment(
    system: regulus.system.HypergraphSystem,
    E_e: regulus.measure.CylinderSet,
    coarse: typing.Mapping[regulus.system.Edge, regulus.measure.FactorAlgebra],
    witnesses: typing.Mapping[regulus.system.Edge, regulus.measure.CylinderSet],
    eps: float,
) -> Algebras:
    """Refine every B_f, f in the skeleton of E_e's base, by its witness E_f.

    The witnesses must correlate with 1_E - E(1_E | v B_f) by at least eps; the
    energy of E_e then rises by at least eps^2, which is asserted."""

    if eps <= 0:
        raise regulus.errors.PreconditionError(
            f"The energy increment needs a positive epsilon, got {eps}."
        )

    e = E_e.base
    faces = regulus.system.skeleton(e)
    before = regulus.measure.join(coarse[f] for f in faces)
    base, g = regulus.discrepancy.residual(E_e, before, system)
    witnessed = {f: witnesses[f] for f in faces}
    value = abs(regulus.discrepancy.correlation(system, base, g, witnessed))
    if value < eps - ENERGY_TOLERANCE:
        raise regulus.errors.PreconditionError(
            f"The witnesses for edge {e} correlate only {value:.6g} with the residual, "
            f"below epsilon {eps:.6g}. They are stale for the current algebras."
        )

    refined = {f: coarse[f].refine(witnessed[f]) for f in faces}
    after = regulus.measure.join(refined[f] for f in faces)
    gain = regulus.measure.energy(E_e, after, system) - regulus.measure.energy(
        E_e, before, system
    )
    if gain < eps**2 - ENERGY_TOLERANCE:
        raise regulus.errors.InternalError(
            f"Refining by the witnesses of edge {e} raised the energy by only "
            f"{gain:.6g}, expected at least {eps**2:.6g}."
        )

    return refined


def _energy_cap(edges: int, m: float, eps: float, delta: float | None = None) -> float:
    """|H_d| 2^(2^m) eps^-2 (delta^-2), or inf once the float range is left."""

    try:
        cap = edges * 2.0 ** (2.0**m) / eps**2
        if delta is not None:
            cap /= delta**2
    except (OverflowError, ZeroDivisionError):
        return math.inf
    return cap


def _structural_cap(
    system: regulus.system.HypergraphSystem, algebras: typing.Mapping[typing.Any, regulus.measure.FactorAlgebra]
) -> int:
    """Every accepted increment splits at least one atom, so this bounds the loop."""
    return 1 + sum(
        system.cardinality(f) - algebra.atom_count for f, algebra in algebras.items()
    )


def _atom_energies(
    system: regulus.system.HypergraphSystem,
    top: typing.Mapping[regulus.system.Edge, regulus.measure.FactorAlgebra],
    algebras: typing.Mapping[regulus.system.Edge, regulus.measure.FactorAlgebra],
) -> typing.Dict[typing.Tuple[regulus.system.Edge, int], float]:
    energies = {}
    for e, B_e in top.items():
        B = face_join(algebras, e)
        for label, atom in enumerate(B_e.atoms()):
            energies[(e, label)] = float(regulus.measure.energy(atom, B, system))
    return energies


def dichotomy(
    system: regulus.system.HypergraphSystem,
    top: typing.Mapping[regulus.system.Edge, regulus.measure.FactorAlgebra],
    lower: typing.Mapping[regulus.system.Edge, regulus.measure.FactorAlgebra],
    eps: float,
    delta: float,
    oracle: regulus.discrepancy.Oracle,
    audit: typing.List[AuditRecord] | None = None,
    layer: int | None = None,
) -> Randomness | Structure:
    """Refine the lower algebras until every top atom has discrepancy at most delta
    (randomness), or until some atom gained eps^2 of energy (structure).

    Violators are taken in canonical edge order, then in atom label order."""

    records = audit if audit is not None else []
    layer = layer if layer is not None else max((len(e) for e in top), default=0)
    fine: Algebras = dict(lower)
    if not top:
        return Randomness(fine, 0)

    m = max(B_e.complexity_bound for B_e in top.values())
    cap = min(_energy_cap(len(top), m, eps, delta), _structural_cap(system, lower))
    baseline = _atom_energies(system, top, lower)
    settled: typing.Dict[typing.Tuple[regulus.system.Edge, int], float] = {}
    atoms = {e: top[e].atoms() for e in sorted(top)}

    iterations = 0
    while True:
        violator = None
        for e, members in atoms.items():
            B = face_join(fine, e)
            for label, E_e in enumerate(members):
                if (e, label) in settled:
                    continue
                result = oracle(E_e, B, system)
                if result.value > delta + VIOLATION_TOLERANCE:
                    violator = (e, label, E_e, result)
                    break
                settled[(e, label)] = result.value
            if violator is not None:
                break

        if violator is None:
            _log_record(records, AuditRecord(layer, None, None, oracle.name, None, "randomness"))
            return Randomness(fine, iterations)

        iterations += 1
        if iterations > cap:
            raise regulus.errors.InternalError(
                f"The dichotomy loop exceeded its cap of {cap} iterations. The "
                f"oracle '{oracle.name}' may be reporting inconsistent witnesses."
            )

        e, label, E_e, result = violator
        _log_record(
            records, AuditRecord(layer, e, label, oracle.name, result.value, "refine")
        )
        refined = energy_increment(system, E_e, fine, result.witnesses, result.value)
        changed = {f for f, algebra in refined.items() if algebra is not fine[f]}
        fine.update(refined)
        settled = {
            key: value
            for key, value in settled.items()
            if not changed & set(regulus.system.skeleton(key[0]))
        }

        energies = _atom_energies(system, top, fine)
        for key in sorted(energies):
            if energies[key] >= baseline[key] + eps**2 - ENERGY_TOLERANCE:
                _log_record(
                    records,
                    AuditRecord(
                        layer, key[0], key[1], oracle.name,
                        energies[key] - baseline[key], "structure",
                    ),
                )
                return Structure(fine, iterations)


def preliminary_regularity(
    system: regulus.system.HypergraphSystem,
    top: typing.Mapping[regulus.system.Edge, regulus.measure.FactorAlgebra],
    eps: float,
    F: regulus.growth.GrowthFunction,
    oracle: regulus.discrepancy.Oracle,
    m: float | None = None,
    audit: typing.List[AuditRecord] | None = None,
) -> typing.Tuple[float, Algebras, Algebras]:
    """Return (M, coarse, fine) on the skeleton of the top layer: coarse has
    complexity at most M, fine is within eps^2 of coarse in energy for every top atom,
    and every top atom has discrepancy at most 1/F(M) against fine."""

    records = audit if audit is not None else []
    if m is None:
        m = max((B_e.complexity_bound for B_e in top.values()), default=0)

    lower_edges: typing.Set[regulus.system.Edge] = set()
    for e in top:
        lower_edges.update(regulus.system.skeleton(e))
    layer = max((len(e) for e in top), default=0)

    coarse: Algebras = {
        f: regulus.measure.FactorAlgebra.trivial(system, f) for f in sorted(lower_edges)
    }
    fine: Algebras = dict(coarse)
    if not top:
        return F(m), coarse, fine

    cap = min(_energy_cap(len(top), m, eps), _structural_cap(system, coarse))
    rounds = 0
    while True:
        M = max(F(m), max(B.complexity_bound for B in coarse.values()))
        delta = F.reciprocal(M)
        logging.info(
            f"Layer {layer}: round {rounds} with M={M:g} and delta={delta:.3g}."
        )
        outcome = dichotomy(system, top, coarse, eps, delta, oracle, records, layer)
        match outcome:
            case Randomness(fine=fine):
                logging.info(f"Layer {layer}: randomness after {rounds} rounds.")
                return M, coarse, fine
            case Structure(fine=fine):
                rounds += 1
                if rounds > cap:
                    raise regulus.errors.InternalError(
                        f"Preliminary regularity on layer {layer} exceeded its cap of "
                        f"{cap} rounds."
                    )
                coarse = dict(fine)


@dataclasses.dataclass(frozen=True)
class RegularityDecomposition:
    system: regulus.system.HypergraphSystem
    thresholds: typing.Tuple[float, ...]
    top: Algebras
    coarse: Algebras
    fine: Algebras
    growth: regulus.growth.GrowthFunction
    oracle: str
    audit: typing.Tuple[AuditRecord, ...] = ()

    def threshold(self, j: int) -> float:
        return self.thresholds[j]

    def algebra(self, e: regulus.system.Edge) -> regulus.measure.FactorAlgebra:
        """B_e: the supplied top algebra on H_d and the coarse algebra below it."""
        return self.top[e] if e in self.top else self.coarse[e]

    def coarse_join(self, e: regulus.system.Edge) -> regulus.measure.JoinAlgebra:
        return face_join(self.coarse, e)

    def fine_join(self, e: regulus.system.Edge) -> regulus.measure.JoinAlgebra:
        return face_join(self.fine, e)

    def to_record(self) -> typing.Dict[str, typing.Any]:
        return {
            "thresholds": [_json_float(M) for M in self.thresholds],
            "growth": self.growth.descriptor,
            "oracle": self.oracle,
            "coarse": {_edge_key(f): B.to_record() for f, B in self.coarse.items()},
            "fine": {_edge_key(f): B.to_record() for f, B in self.fine.items()},
            "audit": [record.to_record() for record in self.audit],
        }


def _edge_key(e: regulus.system.Edge) -> str:
    return ",".join(map(str, e))


def _json_float(value: float) -> float | str:
    return value if math.isfinite(value) else "inf"


def _regularize(
    system: regulus.system.HypergraphSystem,
    j: int,
    top: Algebras,
    M_j: float,
    F: regulus.growth.GrowthFunction,
    oracle: regulus.discrepancy.Oracle,
) -> typing.Tuple[typing.Dict[int, float], Algebras, Algebras, typing.List[AuditRecord]]:
    if j == 0:
        return {0: M_j}, {}, {}, []

    if not top:
        thresholds = {j: M_j}
        for i in range(j - 1, -1, -1):
            thresholds[i] = F(thresholds[i + 1])
        return thresholds, {}, {}, []

    eps = F.reciprocal(M_j)
    fast = F
    for attempt in range(FAST_RETRIES):
        records: typing.List[AuditRecord] = []
        M, coarse, fine = preliminary_regularity(
            system, top, eps, fast, oracle, M_j, records
        )
        thresholds, inner_coarse, inner_fine, inner_records = _regularize(
            system, j - 1, coarse, M, F, oracle
        )
        target = F(thresholds[0])
        if fast(M) >= target:
            thresholds[j] = M_j
            return (
                thresholds,
                {**coarse, **inner_coarse},
                {**fine, **inner_fine},
                inner_records + records,
            )

        logging.info(
            f"Layer {j}: fast growth gives {fast(M):g} < F(M_0) = {target:g}, "
            f"restarting with F composed once more (attempt {attempt + 1})."
        )
        fast = regulus.growth.compose(F, fast)

    raise regulus.errors.InternalError(
        f"The fast growth function for layer {j} did not stabilise within "
        f"{FAST_RETRIES} attempts."
    )


def full_regularity(
    system: regulus.system.HypergraphSystem,
    top: typing.Mapping[regulus.system.Edge, regulus.measure.FactorAlgebra],
    F: regulus.growth.GrowthFunction,
    oracle: regulus.discrepancy.Oracle,
    M_d: float = 1,
) -> RegularityDecomposition:
    """Regularize every layer below the top, each layer's coarse algebras serving as
    the top algebras of the next one down."""

    top = {regulus.system.canonical_edge(e): B for e, B in top.items()}
    if set(top) != set(system.top_layer):
        raise regulus.errors.SystemValidationError(
            f"Top algebras are given for {sorted(top)}, but the top layer is "
            f"{list(system.top_layer)}."
        )
    for e, B_e in top.items():
        if B_e.base != e:
            raise regulus.errors.SystemValidationError(
                f"The top algebra for edge {e} lives on base {B_e.base}."
            )
        if B_e.complexity_bound > M_d:
            raise regulus.errors.PreconditionError(
                f"The top algebra for edge {e} has complexity bound "
                f"{B_e.complexity_bound}, above M_d = {M_d}."
            )

    thresholds, coarse, fine, records = _regularize(
        system, system.order, dict(top), float(M_d), F, oracle
    )
    return RegularityDecomposition(
        system=system,
        thresholds=tuple(thresholds[j] for j in range(system.order + 1)),
        top=dict(top),
        coarse=coarse,
        fine=fine,
        growth=F,
        oracle=oracle.name,
        audit=tuple(records),
    )


@dataclasses.dataclass(frozen=True)
class AuditCheck:
    estimate: str
    layer: int
    edge: regulus.system.Edge | None
    atom: int | None
    value: float
    bound: float
    passed: bool

    def to_record(self) -> typing.Dict[str, typing.Any]:
        return {
            "estimate": self.estimate,
            "layer": self.layer,
            "edge": None if self.edge is None else list(self.edge),
            "atom": self.atom,
            "value": _json_float(self.value),
            "bound": _json_float(self.bound),
            "passed": self.passed,
        }


def audit_decomposition(
    decomposition: RegularityDecomposition,
    oracle: regulus.discrepancy.Oracle | None = None,
) -> typing.List[AuditCheck]:
    """Recheck the threshold chain, the coarse complexities, the coarse/fine energy
    gaps and the fine discrepancies from scratch."""

    system = decomposition.system
    F = decomposition.growth
    M = decomposition.thresholds
    d = system.order
    checks: typing.List[AuditCheck] = []

    chain: typing.List[float] = []
    for j in range(d, -1, -1):
        chain.extend([M[j], F(M[j])])
    for value, bound in zip(chain, chain[1:]):
        checks.append(AuditCheck("threshold-chain", d, None, None, value, bound, value <= bound))

    for f, B in sorted(decomposition.coarse.items()):
        j = len(f)
        checks.append(
            AuditCheck(
                "coarse-complexity", j, f, None, B.complexity_bound, M[j],
                B.complexity_bound <= M[j],
            )
        )
        refines = decomposition.fine[f].is_refinement_of(B)
        checks.append(AuditCheck("refinement", j, f, None, float(refines), 1.0, refines))

    if oracle is None:
        oracle = regulus.discrepancy.parse_oracle(decomposition.oracle)
    accuracy = F.reciprocal(M[0])
    for j in range(1, d + 1):
        gap_bound = F.reciprocal(M[j]) ** 2
        for e in system.layer(j):
            coarse = decomposition.coarse_join(e)
            fine = decomposition.fine_join(e)
            for label, E_e in enumerate(decomposition.algebra(e).atoms()):
                gap = float(regulus.measure.energy(E_e, fine, system)) - float(
                    regulus.measure.energy(E_e, coarse, system)
                )
                checks.append(
                    AuditCheck(
                        "coarse-fine-gap", j, e, label, gap, gap_bound,
                        gap <= gap_bound + ENERGY_TOLERANCE,
                    )
                )
                value = oracle(E_e, fine, system).value
                checks.append(
                    AuditCheck(
                        "fine-discrepancy", j, e, label, value, accuracy,
                        value <= accuracy + VIOLATION_TOLERANCE,
                    )
                )

    return checks


def regular_small_split(
    system: regulus.system.HypergraphSystem,
    E_e: regulus.measure.CylinderSet,
    coarse: regulus.measure.JoinAlgebra | regulus.measure.FactorAlgebra,
    fine: regulus.measure.JoinAlgebra | regulus.measure.FactorAlgebra,
) -> typing.Tuple[regulus.system.Edge, np.ndarray, np.ndarray]:
    """Split 1_E = regular + small on a common base, where small is the fine minus
    the coarse conditional expectation."""

    base = regulus.system.union(
        [E_e.base, regulus.measure.join([coarse]).base, regulus.measure.join([fine]).base]
    )
    lifted = regulus.measure.CylinderSet(base, E_e.lift(system, base))
    low = regulus.measure.cond_expect(lifted, coarse, system).pointwise()
    high = regulus.measure.cond_expect(lifted, fine, system).pointwise()
    indicator = lifted.membership.astype(float)
    return base, low + (indicator - high), high - low
