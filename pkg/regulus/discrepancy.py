import dataclasses
import itertools
import logging
import typing

import numpy as np

import regulus.errors
import regulus.measure
import regulus.system


DEFAULT_EXACT_CAP = 2**24
DEFAULT_RESTARTS = 8
IMPROVEMENT = 1e-12


@dataclasses.dataclass(frozen=True)
class DiscrepancyResult:
    value: float
    witnesses: typing.Dict[regulus.system.Edge, regulus.measure.CylinderSet]
    exact: bool
    signed: float = 0.0

    def to_record(
        self, system: regulus.system.HypergraphSystem
    ) -> typing.Dict[str, typing.Any]:
        return {
            "value": self.value,
            "signed": self.signed,
            "exact": self.exact,
            "witnesses": {
                ",".join(map(str, f)): w.to_record(system)
                for f, w in self.witnesses.items()
            },
        }


def residual(
    E_e: regulus.measure.CylinderSet,
    B: regulus.measure.JoinAlgebra | regulus.measure.FactorAlgebra,
    system: regulus.system.HypergraphSystem,
) -> typing.Tuple[regulus.system.Edge, np.ndarray]:
    """g = 1_E - E(1_E|B), tabulated on the union of the bases of E and B."""

    ce = regulus.measure.cond_expect(E_e, B, system)
    g = E_e.lift(system, ce.base).astype(float) - ce.pointwise()
    return ce.base, g


def correlation(
    system: regulus.system.HypergraphSystem,
    base: regulus.system.Edge,
    g: np.ndarray,
    witnesses: typing.Mapping[regulus.system.Edge, regulus.measure.CylinderSet],
) -> float:
    """E(g * prod_f 1_{E_f}) for g tabulated on V_base."""

    product = np.ones(g.size, dtype=bool)
    for witness in witnesses.values():
        product &= witness.lift(system, base)
    return float(np.dot(g, product) / g.size)


def _face_weights(
    system: regulus.system.HypergraphSystem,
    base: regulus.system.Edge,
    g: np.ndarray,
    witnesses: typing.Mapping[regulus.system.Edge, regulus.measure.CylinderSet],
    free: regulus.system.Edge,
) -> np.ndarray:
    """The correlation is linear in 1_{E_free}; these are its coefficients on V_free."""

    product = np.ones(g.size, dtype=bool)
    for f, witness in witnesses.items():
        if f != free:
            product &= witness.lift(system, base)
    return np.bincount(
        regulus.system.projection(system, base, free),
        weights=g * product,
        minlength=system.cardinality(free),
    ) / g.size


def _subset_masks(cells: int) -> np.ndarray:
    """Row i is the subset whose bit j is (i >> j) & 1."""
    return ((np.arange(2**cells)[:, None] >> np.arange(cells)[None, :]) & 1).astype(bool)


def candidate_count(
    system: regulus.system.HypergraphSystem, e: regulus.system.Edge
) -> int:
    return 2 ** sum(system.cardinality(f) for f in regulus.system.skeleton(e))


def discrepancy_exact(
    E_e: regulus.measure.CylinderSet,
    B: regulus.measure.JoinAlgebra | regulus.measure.FactorAlgebra,
    system: regulus.system.HypergraphSystem,
    cap: int = DEFAULT_EXACT_CAP,
) -> DiscrepancyResult:
    """The e-discrepancy as a true supremum. All witness tuples but the last face are
    enumerated; the last face is then optimal at the positive or negative part of its
    induced weights, so the search is exhaustive."""

    E_e.check(system)
    e = E_e.base
    faces = regulus.system.skeleton(e)
    candidates = candidate_count(system, e)
    if candidates > cap:
        raise regulus.errors.InfeasibleError(
            f"Exact discrepancy for edge {e} needs {candidates} witness candidates, "
            f"which exceeds the cap of {cap}. Use the heuristic oracle instead."
        )

    base, g = residual(E_e, B, system)
    if not faces:
        signed = float(g.mean())
        return DiscrepancyResult(abs(signed), {}, True, signed)

    last = faces[-1]
    others = faces[:-1]
    cells = g.size
    onehot = np.zeros((cells, system.cardinality(last)))
    onehot[np.arange(cells), regulus.system.projection(system, base, last)] = 1.0

    masks = {f: _subset_masks(system.cardinality(f)) for f in others}
    lifted = [masks[f][:, regulus.system.projection(system, base, f)] for f in others]

    best_value = -1.0
    best: typing.Dict[regulus.system.Edge, regulus.measure.CylinderSet] = {}
    best_signed = 0.0

    head = lifted[0] if lifted else np.ones((1, cells), dtype=bool)
    tail = lifted[1:]
    for combo in itertools.product(*(range(len(m)) for m in tail)):
        rest = np.ones(cells, dtype=bool)
        for rows, choice in zip(tail, combo):
            rest &= rows[choice]

        weights = ((head & rest) * g) @ onehot / cells
        positive = np.where(weights > 0, weights, 0.0).sum(axis=1)
        negative = -np.where(weights < 0, weights, 0.0).sum(axis=1)
        values = np.maximum(positive, negative)
        row = int(np.argmax(values))
        if values[row] > best_value:
            best_value = float(values[row])
            witnesses: typing.Dict[regulus.system.Edge, regulus.measure.CylinderSet] = {}
            choices = ((row,) if lifted else ()) + combo
            for f, choice in zip(others, choices):
                witnesses[f] = regulus.measure.CylinderSet(f, masks[f][choice])
            if positive[row] >= negative[row]:
                witnesses[last] = regulus.measure.CylinderSet(last, weights[row] > 0)
                best_signed = float(positive[row])
            else:
                witnesses[last] = regulus.measure.CylinderSet(last, weights[row] < 0)
                best_signed = -float(negative[row])
            best = {f: witnesses[f] for f in faces}

    return DiscrepancyResult(best_value, best, True, best_signed)


def discrepancy_heuristic(
    E_e: regulus.measure.CylinderSet,
    B: regulus.measure.JoinAlgebra | regulus.measure.FactorAlgebra,
    system: regulus.system.HypergraphSystem,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
) -> DiscrepancyResult:
    """Alternating maximization: with every other witness fixed the correlation is
    linear in 1_{E_f}, so the best E_f is a threshold set of the induced weights."""

    E_e.check(system)
    faces = regulus.system.skeleton(E_e.base)
    base, g = residual(E_e, B, system)
    if not faces:
        signed = float(g.mean())
        return DiscrepancyResult(abs(signed), {}, False, signed)

    best_value = -1.0
    best: typing.Dict[regulus.system.Edge, regulus.measure.CylinderSet] = {}
    best_signed = 0.0

    for restart, stream in enumerate(np.random.SeedSequence(seed).spawn(restarts)):
        rng = np.random.default_rng(stream)
        current = {
            f: regulus.measure.CylinderSet(f, rng.random(system.cardinality(f)) < 0.5)
            for f in faces
        }
        signed = correlation(system, base, g, current)
        sweeps = 0

        improved = True
        while improved:
            improved = False
            sweeps += 1
            for f in faces:
                weights = _face_weights(system, base, g, current, f)
                for mask in (weights > 0, weights >= 0, weights < 0, weights <= 0):
                    trial = dict(current)
                    trial[f] = regulus.measure.CylinderSet(f, mask)
                    trial_signed = correlation(system, base, g, trial)
                    if abs(trial_signed) > abs(signed) + IMPROVEMENT:
                        current, signed, improved = trial, trial_signed, True

        logging.debug(
            f"Restart {restart} for edge {E_e.base} settled at {abs(signed):.6g} "
            f"after {sweeps} sweeps."
        )
        if abs(signed) > best_value:
            best_value, best, best_signed = abs(signed), current, signed

    return DiscrepancyResult(best_value, best, False, best_signed)


def rectangle_deviation(
    system: regulus.system.HypergraphSystem,
    E: regulus.measure.CylinderSet,
    E_1: regulus.measure.CylinderSet,
    E_2: regulus.measure.CylinderSet,
) -> float:
    """| |E & (E_1 x E_2)| - sigma |E_1||E_2| | / (|V_1||V_2|) for a bipartite E, the
    classical epsilon-regularity reading of the discrepancy against the trivial
    algebra."""

    if len(E.base) != 2 or {E_1.base, E_2.base} != set(regulus.system.skeleton(E.base)):
        raise regulus.errors.PreconditionError(
            f"Rectangle deviation needs a bipartite set and one witness per side, got "
            f"bases {E.base}, {E_1.base}, {E_2.base}."
        )

    sigma = E.popcount() / E.membership.size
    rectangle = E_1.lift(system, E.base) & E_2.lift(system, E.base)
    inside = int((E.membership & rectangle).sum())
    return abs(inside - sigma * E_1.popcount() * E_2.popcount()) / E.membership.size


@dataclasses.dataclass(frozen=True)
class ExactOracle:
    cap: int = DEFAULT_EXACT_CAP

    @property
    def name(self) -> str:
        return "exact"

    def __call__(
        self,
        E_e: regulus.measure.CylinderSet,
        B: regulus.measure.JoinAlgebra | regulus.measure.FactorAlgebra,
        system: regulus.system.HypergraphSystem,
    ) -> DiscrepancyResult:
        return discrepancy_exact(E_e, B, system, self.cap)


@dataclasses.dataclass(frozen=True)
class HeuristicOracle:
    restarts: int = DEFAULT_RESTARTS
    seed: int = 0

    @property
    def name(self) -> str:
        return f"heuristic:{self.restarts}"

    def __call__(
        self,
        E_e: regulus.measure.CylinderSet,
        B: regulus.measure.JoinAlgebra | regulus.measure.FactorAlgebra,
        system: regulus.system.HypergraphSystem,
    ) -> DiscrepancyResult:
        return discrepancy_heuristic(E_e, B, system, self.restarts, self.seed)


Oracle = ExactOracle | HeuristicOracle


def parse_oracle(
    descriptor: str, seed: int = 0, cap: int = DEFAULT_EXACT_CAP
) -> Oracle:
    """'exact', 'heuristic' or 'heuristic:R' with R restarts."""

    name, _, argument = descriptor.partition(":")
    match name:
        case "exact":
            return ExactOracle(cap)
        case "heuristic":
            try:
                restarts = int(argument) if argument else DEFAULT_RESTARTS
            except ValueError:
                restarts = 0
            if restarts < 1:
                raise regulus.errors.ConfigurationError(
                    f"Invalid restart count '{argument}' in oracle '{descriptor}'."
                )
            return HeuristicOracle(restarts, seed)
        case _:
            raise regulus.errors.ConfigurationError(
                f"Unknown oracle '{descriptor}'! Use 'exact' or 'heuristic[:R]'."
            )
