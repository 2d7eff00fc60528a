import dataclasses
import typing

import regulus.discrepancy
import regulus.errors
import regulus.growth
import regulus.measure
import regulus.system


@dataclasses.dataclass
class SystemDescription:
    labels: typing.List[typing.Any]
    sizes: typing.List[int]
    d: int
    H_d: typing.List[typing.List[typing.Any]]

    def build(
        self, cap: int = regulus.system.DEFAULT_CAP
    ) -> regulus.system.HypergraphSystem:
        return regulus.system.make_system(
            self.labels, self.sizes, self.d, self.H_d, cap
        )

    def to_record(self) -> typing.Dict[str, typing.Any]:
        return {
            "labels": list(self.labels),
            "sizes": [int(n) for n in self.sizes],
            "d": self.d,
            "H_d": [list(e) for e in self.H_d],
        }


@dataclasses.dataclass
class SetRecord:
    base: typing.List[typing.Any]
    points: typing.List[typing.List[int]] = dataclasses.field(default_factory=list)

    def to_cylinder(
        self, system: regulus.system.HypergraphSystem
    ) -> regulus.measure.CylinderSet:
        return regulus.measure.CylinderSet.from_points(system, self.base, self.points)


@dataclasses.dataclass(kw_only=True)
class InstanceFile:
    api_version: int
    kind: str

    # initvars
    system: dataclasses.InitVar[typing.Dict[str, typing.Any]]
    sets: dataclasses.InitVar[typing.List[typing.Dict[str, typing.Any]] | None] = None

    description: SystemDescription = dataclasses.field(init=False)
    edge_sets: typing.List[SetRecord] = dataclasses.field(default_factory=list)

    seed: int | None = None
    density: float | None = None
    metadata: typing.Dict[str, typing.Any] | None = None

    def __post_init__(self, system, sets) -> None:
        if not isinstance(system, dict):
            raise regulus.errors.SystemValidationError(
                f"The 'system' section is a '{type(system).__name__}', must be a mapping."
            )
        self.description = SystemDescription(**system)

        match self.kind:
            case "hypergraph-system":
                if sets:
                    raise regulus.errors.SystemValidationError(
                        "A 'hypergraph-system' file cannot carry edge sets, use the kind "
                        "'hypergraph-instance' instead."
                    )
            case "hypergraph-instance":
                if not isinstance(sets, list):
                    raise regulus.errors.SystemValidationError(
                        f"The 'sets' section is a '{type(sets).__name__}', must be a list."
                    )
                for record in sets:
                    self.edge_sets.append(SetRecord(**record))
            case _:
                raise regulus.errors.SystemValidationError(
                    f"Unknown kind '{self.kind}'! Use 'hypergraph-system' or "
                    "'hypergraph-instance'."
                )

        bases = [tuple(sorted(record.base)) for record in self.edge_sets]
        if len(bases) != len(set(bases)):
            duplicate = max(bases, key=bases.count)
            raise regulus.errors.SystemValidationError(
                f"The set on base {list(duplicate)} has been defined 2 or more times!"
            )

    @classmethod
    def from_record(cls, record: typing.Dict[str, typing.Any]) -> "InstanceFile":
        """A file with a 'kind' is a wrapped system or instance. Without one it is a
        bare system description {labels, sizes, d, H_d}."""

        if "kind" not in record:
            return cls(api_version=1, kind="hypergraph-system", system=record)
        return cls(**record)

    def build(
        self, cap: int = regulus.system.DEFAULT_CAP
    ) -> typing.Tuple[
        regulus.system.HypergraphSystem,
        typing.Dict[regulus.system.Edge, regulus.measure.CylinderSet],
    ]:
        system = self.description.build(cap)
        sets = {}
        for record in self.edge_sets:
            E_e = record.to_cylinder(system)
            sets[E_e.base] = E_e

        if self.kind == "hypergraph-instance" and set(sets) != set(system.top_layer):
            raise regulus.errors.SystemValidationError(
                f"The instance gives sets on {sorted(sets)}, but the top layer is "
                f"{list(system.top_layer)}."
            )
        return system, sets

    def to_record(self) -> typing.Dict[str, typing.Any]:
        record: typing.Dict[str, typing.Any] = {
            "api_version": self.api_version,
            "kind": self.kind,
            "system": self.description.to_record(),
            "sets": [dataclasses.asdict(s) for s in self.edge_sets],
        }
        if self.seed is not None:
            record["seed"] = self.seed
        if self.density is not None:
            record["density"] = self.density
        if self.metadata:
            record["metadata"] = self.metadata
        return record


@dataclasses.dataclass(kw_only=True)
class RunConfig:
    command: str
    inputs: typing.List[str] = dataclasses.field(default_factory=list)
    seed: int | None = None
    growth: str = "exp:2"
    oracle: str = "exact"
    restarts: int = regulus.discrepancy.DEFAULT_RESTARTS
    cap: int = regulus.system.DEFAULT_CAP
    exact_cap: int = regulus.discrepancy.DEFAULT_EXACT_CAP
    rational_cap: int = regulus.measure.RATIONAL_CAP
    output: str | None = None
    csv: str | None = None
    exact_rational: bool = False
    randomized: bool = False

    growth_function: regulus.growth.GrowthFunction = dataclasses.field(init=False)

    def __post_init__(self) -> None:
        self.growth_function = regulus.growth.parse_growth(self.growth)

        if self.seed is not None and not 0 <= self.seed < 2**64:
            raise regulus.errors.ConfigurationError(
                f"The seed must be a 64-bit unsigned integer, got {self.seed}."
            )
        if self.oracle.startswith("heuristic"):
            self.randomized = True
        if self.randomized and self.seed is None:
            raise regulus.errors.ConfigurationError(
                f"The command '{self.command}' uses randomness and needs a seed. Pass "
                "--seed or set 'seed' in regulus.config.toml."
            )
        for name in ("cap", "exact_cap", "rational_cap", "restarts"):
            if getattr(self, name) < 1:
                raise regulus.errors.ConfigurationError(
                    f"The setting '{name}' must be a positive integer, got "
                    f"{getattr(self, name)}."
                )

    def make_oracle(self) -> regulus.discrepancy.Oracle:
        descriptor = self.oracle
        if descriptor == "heuristic":
            descriptor = f"heuristic:{self.restarts}"
        return regulus.discrepancy.parse_oracle(
            descriptor, seed=self.seed or 0, cap=self.exact_cap
        )
