import logging
import math
import typing

import tabulate
import yaml

import regulus.counting
import regulus.errors
import regulus.measure
import regulus.models
import regulus.regularity
import regulus.removal
import regulus.roth
import regulus.system
import regulus.utils


def _key(e: regulus.system.Edge) -> str:
    return ",".join(map(str, e)) or "()"


def load_instance(
    path: str, cap: int = regulus.system.DEFAULT_CAP
) -> typing.Tuple[
    regulus.models.InstanceFile,
    regulus.system.HypergraphSystem,
    regulus.removal.EdgeSets,
]:
    try:
        data = regulus.utils.load_and_parse_yaml_file(path)
    except yaml.YAMLError as ex:
        raise regulus.errors.SystemValidationError(
            f"The file {path} is not valid YAML: {ex}"
        ) from ex

    if not isinstance(data, dict):
        raise regulus.errors.SystemValidationError(
            f"The file {path} does not hold a mapping, but a '{type(data).__name__}'."
        )

    try:
        instance = regulus.models.InstanceFile.from_record(data)
    except TypeError as ex:
        # unknown or missing keys surface as TypeError from the dataclasses
        raise regulus.errors.SystemValidationError(
            f"The file {path} is not a valid system or instance file: {ex}"
        ) from ex

    system, sets = instance.build(cap)
    logging.info(f"File {path} loaded...")
    return instance, system, sets


def top_algebras(
    system: regulus.system.HypergraphSystem, sets: regulus.removal.EdgeSets
) -> typing.Dict[regulus.system.Edge, regulus.measure.FactorAlgebra]:
    """B_e generated by E_e where a set is given, the trivial algebra otherwise."""

    return {
        e: (
            regulus.measure.generate(system, e, [sets[e]])
            if e in sets
            else regulus.measure.FactorAlgebra.trivial(system, e)
        )
        for e in system.top_layer
    }


def regularize_instance(
    config: regulus.models.RunConfig,
    system: regulus.system.HypergraphSystem,
    sets: regulus.removal.EdgeSets,
) -> regulus.regularity.RegularityDecomposition:
    top = top_algebras(system, sets)
    M_d = max([1] + [B.complexity_bound for B in top.values()])
    logging.info(f"Regularizing {len(top)} top edges with F = {config.growth}, M_d = {M_d}.")
    return regulus.regularity.full_regularity(
        system, top, config.growth_function, config.make_oracle(), M_d
    )


def _emit(
    config: regulus.models.RunConfig,
    report: typing.Dict[str, typing.Any],
    headers: typing.Sequence[str],
    rows: typing.List[typing.List[typing.Any]],
) -> None:
    """The JSON report goes to --out, or to stdout without it. The table is printed
    only when stdout is free, and written to --csv when asked."""

    regulus.utils.write_json(report, config.output)
    if config.output:
        print(tabulate.tabulate(rows, headers))
    if config.csv:
        regulus.utils.write_csv(config.csv, headers, rows)


def _number(value: typing.Any) -> typing.Any:
    if isinstance(value, float) and not math.isfinite(value):
        return "inf"
    return value


def cmd_gen_random(
    description: regulus.models.SystemDescription,
    density: float,
    seed: int,
    output: str | None = None,
    cap: int = regulus.system.DEFAULT_CAP,
) -> int:
    """Sample every E_e point by point with the given density, one seeded stream per
    edge."""

    if not 0 <= density <= 1:
        raise regulus.errors.ConfigurationError(
            f"The density must lie in [0, 1], got {density}."
        )

    system = description.build(cap)
    records = []
    for e in system.top_layer:
        rng = regulus.utils.edge_stream(seed, e)
        E_e = regulus.measure.CylinderSet(e, rng.random(system.cardinality(e)) < density)
        records.append(E_e.to_record(system))
        logging.info(f"Edge {e}: sampled {E_e.popcount()} of {system.cardinality(e)} points.")

    instance = regulus.models.InstanceFile(
        api_version=1,
        kind="hypergraph-instance",
        system=description.to_record(),
        sets=records,
        seed=seed,
        density=density,
    )
    regulus.utils.write_yaml(instance.to_record(), output)
    return 0


def cmd_validate(path: str, cap: int = regulus.system.DEFAULT_CAP) -> int:
    load_instance(path, cap)
    return 0


def cmd_regularize(config: regulus.models.RunConfig) -> int:
    path = config.inputs[0]
    _, system, sets = load_instance(path, config.cap)
    decomposition = regularize_instance(config, system, sets)

    checks = regulus.regularity.audit_decomposition(decomposition, config.make_oracle())
    passed = all(check.passed for check in checks)
    for check in checks:
        if not check.passed:
            logging.warning(f"Audit check failed: {check.to_record()}")

    energies = []
    for e, E_e in sorted(sets.items()):
        coarse = decomposition.coarse_join(e)
        fine = decomposition.fine_join(e)
        arguments = {"exact": config.exact_rational, "rational_cap": config.rational_cap}
        energies.append(
            {
                "edge": list(e),
                "coarse_energy": regulus.measure.energy(E_e, coarse, system, **arguments),
                "fine_energy": regulus.measure.energy(E_e, fine, system, **arguments),
                "gap": regulus.measure.l2_gap(E_e, coarse, fine, system, **arguments),
            }
        )

    report = {
        "command": "regularize",
        "input": path,
        "seed": config.seed,
        "decomposition": decomposition.to_record(),
        "checks": [check.to_record() for check in checks],
        "energies": energies,
        "passed": passed,
    }

    rows = []
    for j in range(system.order, -1, -1):
        layer = system.layer(j)
        coarse = [
            decomposition.algebra(f)
            for f in layer
            if f in decomposition.coarse or f in decomposition.top
        ]
        fine = [decomposition.fine[f] for f in layer if f in decomposition.fine]
        rows.append(
            [
                j,
                _number(decomposition.threshold(j)),
                len(layer),
                sum(B.atom_count for B in coarse),
                sum(B.atom_count for B in fine) if fine else "-",
            ]
        )
    _emit(config, report, ["Layer", "M_j", "Edges", "Coarse atoms", "Fine atoms"], rows)

    return 0 if passed else 2


def cmd_count_check(config: regulus.models.RunConfig) -> int:
    path = config.inputs[0]
    _, system, sets = load_instance(path, config.cap)
    decomposition = regularize_instance(config, system, sets)

    census = regulus.counting.census(decomposition)
    evaluator = regulus.counting.AtomEvaluator(decomposition)

    failures: typing.List[str] = []
    tuples = []
    rows = []
    for profile in census.profiles:
        record = profile.to_record()
        rhs = math.prod(profile.p.values())
        ratio = None
        if profile.good:
            check = regulus.counting.counting_check(decomposition, profile)
            record["check"] = check.to_record()
            ratio = check.ratio
            if profile.joint_density <= 0:
                failures.append(f"good atom tuple {record['labels']} is empty")
        tuples.append(record)
        rows.append(
            [
                " ".join(f"{_key(e)}:{label}" for e, label in sorted(profile.atoms.items())),
                profile.joint_density,
                rhs,
                ratio,
                profile.good,
            ]
        )

    bad_sets = []
    for e in system.all_edges:
        if not e:
            continue
        bound = regulus.counting.bad_mass_bound(decomposition, e)
        for label in range(decomposition.algebra(e).atom_count):
            bad = regulus.counting.bad_set(decomposition, e, label, evaluator)
            mass = regulus.counting.bad_mass(decomposition, bad)
            if mass > bound + regulus.counting.TOLERANCE:
                failures.append(f"bad set of atom {label} on {e} has mass {mass:g}")
            bad_sets.append(
                {"edge": list(e), "atom": label, "mass": mass, "bound": bound}
            )

    if abs(census.total_density - 1.0) > 1e-9:
        failures.append(f"joint densities sum to {census.total_density!r}")

    for failure in failures:
        logging.warning(f"Counting check failed: {failure}.")

    report = {
        "command": "count-check",
        "input": path,
        "seed": config.seed,
        "thresholds": [_number(M) for M in decomposition.thresholds],
        "tuples": tuples,
        "good_fraction": census.good_fraction,
        "good_density": census.good_density,
        "bad_sets": bad_sets,
        "failures": failures,
        "passed": not failures,
    }
    _emit(config, report, ["Atoms", "Joint density", "Product of p", "Ratio", "Good"], rows)

    return 0 if not failures else 2


def cmd_remove(config: regulus.models.RunConfig, subgraph: bool = False) -> int:
    path = config.inputs[0]
    instance, system, sets = load_instance(path, config.cap)
    if instance.kind != "hypergraph-instance":
        raise regulus.errors.SystemValidationError(
            f"The remove command needs a 'hypergraph-instance' file, {path} is a "
            f"'{instance.kind}'."
        )

    modified, report = regulus.removal.remove(
        system, sets, config.growth_function, config.make_oracle(), 1, subgraph
    )
    recounted = regulus.removal.count_copies(system, modified)
    if recounted:
        logging.error(f"{recounted} copies survive the removal.")

    arguments = {"exact": config.exact_rational, "rational_cap": config.rational_cap}
    rows = []
    for e in sorted(sets):
        rows.append(
            [
                _key(e),
                regulus.measure.density(sets[e], system, **arguments),
                regulus.measure.density(modified[e], system, **arguments),
                report.removed_mass[e],
                report.bad_mass.get(e, 0.0),
            ]
        )

    record = {
        "command": "remove",
        "input": path,
        "seed": config.seed,
        "report": report.to_record(),
        "sets": [modified[e].to_record(system) for e in sorted(modified)],
    }
    _emit(config, record, ["Edge", "Density", "Density after", "Removed mass", "Bad mass"], rows)

    return 0 if recounted == 0 else 2


def _triangle_pairs(
    system: regulus.system.HypergraphSystem, sets: regulus.removal.EdgeSets
) -> typing.Tuple[typing.List, typing.List, typing.List]:
    labels = system.vertex_labels
    expected = {(labels[0], labels[1]), (labels[1], labels[2]), (labels[0], labels[2])}
    if len(labels) != 3 or system.order != 2 or set(system.top_layer) != expected:
        raise regulus.errors.SystemValidationError(
            "The triangles command needs three vertex classes and the three pairs "
            f"between them, got labels {list(labels)} and edges {list(system.top_layer)}."
        )

    a, b, c = labels
    E12 = sets[(a, b)].points(system)
    E23 = sets[(b, c)].points(system)
    E31 = [(z, x) for x, z in sets[(a, c)].points(system)]
    return E12, E23, E31


def cmd_triangles(config: regulus.models.RunConfig, subgraph: bool = False) -> int:
    """Triangle removal on a tripartite graph instance."""

    path = config.inputs[0]
    _, system, sets = load_instance(path, config.cap)
    E12, E23, E31 = _triangle_pairs(system, sets)

    after12, after23, after31, report = regulus.removal.triangle_remove(
        system.factor_sizes,
        E12,
        E23,
        E31,
        config.growth_function,
        config.make_oracle(),
        subgraph=subgraph,
        cap=config.cap,
    )

    a, b, c = system.vertex_labels
    recounted = sum(
        1
        for x, y in after12
        for z in range(system.size(c))
        if (y, z) in after23 and (z, x) in after31
    )
    if recounted:
        logging.error(f"{recounted} triangles survive the removal.")

    rows = [
        [f"{a},{b}", len(E12), len(after12)],
        [f"{b},{c}", len(E23), len(after23)],
        [f"{c},{a}", len(E31), len(after31)],
    ]
    record = {
        "command": "triangles",
        "input": path,
        "seed": config.seed,
        "triangles_before": report.copies_before,
        "triangles_after": recounted,
        "report": report.to_record(),
        "edges": {
            f"{a},{b}": sorted(after12),
            f"{b},{c}": sorted(after23),
            f"{c},{a}": sorted(after31),
        },
    }
    _emit(config, record, ["Edge", "Pairs before", "Pairs after"], rows)
    return 0 if recounted == 0 else 2


def cmd_demo_roth(
    config: regulus.models.RunConfig,
    modulus: int,
    difference_set: typing.Sequence[int] | None = None,
    density: float = 0.5,
    subgraph: bool = False,
) -> int:
    """Count the triangles of the progression graph two ways, then remove them."""

    if difference_set is None:
        difference_set = regulus.roth.random_difference_set(
            modulus, density, typing.cast(int, config.seed)
        )
    instance = regulus.roth.build_instance(modulus, difference_set)

    formula = regulus.roth.progression_count(modulus, instance.difference_set)
    enumerated = regulus.roth.count_triangles(instance, config.cap)
    consistent = formula == enumerated
    if not consistent:
        logging.error(
            f"The progression count {formula} disagrees with the enumerated "
            f"triangle count {enumerated}."
        )

    after12, after23, after31, report = regulus.removal.triangle_remove(
        instance.sizes,
        instance.E12,
        instance.E23,
        instance.E31,
        config.growth_function,
        config.make_oracle(),
        subgraph=subgraph,
        cap=config.cap,
    )

    record = {
        "command": "demo-roth",
        "modulus": modulus,
        "difference_set": list(instance.difference_set),
        "seed": config.seed,
        "triangles_formula": formula,
        "triangles_enumerated": enumerated,
        "consistent": consistent,
        "triangles_after": report.copies_after,
        "report": report.to_record(),
        "edges_after": {
            "1,2": sorted(after12),
            "2,3": sorted(after23),
            "3,1": sorted(after31),
        },
    }
    rows = [
        ["Difference set", list(instance.difference_set)],
        ["Triangles (progressions)", formula],
        ["Triangles (enumerated)", enumerated],
        ["Triangles after removal", report.copies_after],
    ]
    rows.extend(
        [f"Removed mass {_key(e)}", mass] for e, mass in sorted(report.removed_mass.items())
    )
    _emit(config, record, ["Quantity", "Value"], rows)

    return 0 if consistent else 2
