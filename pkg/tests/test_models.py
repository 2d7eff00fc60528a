import pytest

import regulus.errors
import regulus.models


def _instance_yaml(**overrides):
    instance_yaml = {
        "api_version": 1,
        "kind": "hypergraph-instance",
        "system": {
            "labels": [1, 2, 3],
            "sizes": [2, 2, 2],
            "d": 2,
            "H_d": [[1, 2], [2, 3], [3, 1]],
        },
        "sets": [
            {"base": [1, 2], "points": [[0, 0], [1, 1]]},
            {"base": [2, 3], "points": [[0, 0]]},
            {"base": [1, 3], "points": []},
        ],
        "metadata": {"name": "test"},
    }
    instance_yaml.update(overrides)
    return instance_yaml


def test_instance_file_post_init() -> None:
    """The system and set sections are turned into their dataclasses."""

    instance = regulus.models.InstanceFile(**_instance_yaml())

    assert type(instance.description) is regulus.models.SystemDescription
    assert len(instance.edge_sets) == 3
    for record in instance.edge_sets:
        assert type(record) is regulus.models.SetRecord


def test_instance_file_build() -> None:
    system, sets = regulus.models.InstanceFile(**_instance_yaml()).build()

    assert system.top_layer == ((1, 2), (1, 3), (2, 3))
    assert set(sets) == {(1, 2), (1, 3), (2, 3)}
    assert sets[(1, 2)].points(system) == [(0, 0), (1, 1)]
    assert sets[(1, 3)].popcount() == 0


def test_system_file_has_no_sets() -> None:
    system_yaml = _instance_yaml(kind="hypergraph-system")
    del system_yaml["sets"]

    system, sets = regulus.models.InstanceFile(**system_yaml).build()

    assert sets == {}
    assert system.order == 2


def test_system_file_with_sets_raise() -> None:
    with pytest.raises(regulus.errors.SystemValidationError) as ex:
        regulus.models.InstanceFile(**_instance_yaml(kind="hypergraph-system"))

    assert "cannot carry edge sets" in ex.value.args[0]


def test_sets_must_be_list() -> None:
    """Raise if the sets section is something else than a list."""

    with pytest.raises(regulus.errors.SystemValidationError) as ex:
        regulus.models.InstanceFile(**_instance_yaml(sets={"base": [1, 2]}))

    assert "must be a list" in ex.value.args[0].lower()
    assert "'dict'" in ex.value.args[0].lower()


def test_system_must_be_mapping() -> None:
    with pytest.raises(regulus.errors.SystemValidationError) as ex:
        regulus.models.InstanceFile(**_instance_yaml(system=[1, 2, 3]))

    assert "must be a mapping" in ex.value.args[0]


def test_invalid_kind_raise() -> None:
    bad_kind = "hypergraph-template"

    with pytest.raises(regulus.errors.SystemValidationError) as ex:
        regulus.models.InstanceFile(**_instance_yaml(kind=bad_kind))

    assert f"Unknown kind '{bad_kind}'!" in ex.value.args[0]


def test_duplicate_base_raise() -> None:
    """[3, 1] and [1, 3] are the same edge."""

    sets = [
        {"base": [1, 2], "points": []},
        {"base": [1, 3], "points": []},
        {"base": [3, 1], "points": [[0, 0]]},
    ]

    with pytest.raises(regulus.errors.SystemValidationError) as ex:
        regulus.models.InstanceFile(**_instance_yaml(sets=sets))

    assert "The set on base [1, 3] has been defined 2 or more times!" in ex.value.args[0]


def test_missing_set_raise() -> None:
    sets = [{"base": [1, 2], "points": []}]

    with pytest.raises(regulus.errors.SystemValidationError) as ex:
        regulus.models.InstanceFile(**_instance_yaml(sets=sets)).build()

    assert "but the top layer is" in ex.value.args[0]


def test_unknown_field_raise() -> None:
    with pytest.raises(TypeError):
        regulus.models.InstanceFile(**_instance_yaml(weights=[1]))


def test_instance_file_to_record() -> None:
    record = regulus.models.InstanceFile(**_instance_yaml(seed=5)).to_record()

    assert record["kind"] == "hypergraph-instance"
    assert record["system"]["H_d"] == [[1, 2], [2, 3], [3, 1]]
    assert record["sets"][0] == {"base": [1, 2], "points": [[0, 0], [1, 1]]}
    assert record["seed"] == 5
    assert "density" not in record


def test_run_config_defaults() -> None:
    config = regulus.models.RunConfig(command="regularize")

    assert config.growth_function.descriptor == "exp:2"
    assert config.make_oracle().name == "exact"
    assert not config.randomized


def test_run_config_heuristic_needs_seed() -> None:
    with pytest.raises(regulus.errors.ConfigurationError) as ex:
        regulus.models.RunConfig(command="regularize", oracle="heuristic")

    assert "needs a seed" in ex.value.args[0]


def test_run_config_heuristic_oracle() -> None:
    config = regulus.models.RunConfig(
        command="regularize", oracle="heuristic", seed=3, restarts=5
    )

    assert config.randomized
    assert config.make_oracle().name == "heuristic:5"


@pytest.mark.parametrize(
    "settings",
    [
        {"seed": -1},
        {"seed": 2**64},
        {"cap": 0},
        {"restarts": 0},
        {"growth": "exp:0.5"},
    ],
)
def test_run_config_invalid_raise(settings) -> None:
    with pytest.raises(regulus.errors.ConfigurationError):
        regulus.models.RunConfig(command="regularize", **settings)


def test_bare_system_description() -> None:
    """A file without a kind is the system description itself."""

    instance = regulus.models.InstanceFile.from_record(
        {"labels": [1, 2, 3], "sizes": [2, 2, 2], "d": 2, "H_d": [[1, 2]]}
    )
    system, sets = instance.build()

    assert instance.kind == "hypergraph-system"
    assert system.order == 2
    assert system.top_layer == ((1, 2),)
    assert sets == {}


def test_bare_system_description_unknown_field_raise() -> None:
    with pytest.raises(TypeError):
        regulus.models.InstanceFile.from_record(
            {"labels": [1, 2], "sizes": [2, 2], "order": 2, "H_d": [[1, 2]]}
        )
