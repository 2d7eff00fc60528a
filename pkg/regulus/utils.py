import csv
import fractions
import json
import os
import pathlib
import textwrap
import tomllib
import sys
import typing
import zlib

import numpy as np
import platformdirs
import yaml

import regulus.discrepancy
import regulus.errors
import regulus.measure
import regulus.system


CONFIG_FILE_NAME = "regulus.config.toml"

DEFAULTS: typing.Dict[str, typing.Any] = {
    "cap": regulus.system.DEFAULT_CAP,
    "exact_cap": regulus.discrepancy.DEFAULT_EXACT_CAP,
    "rational_cap": regulus.measure.RATIONAL_CAP,
    "restarts": regulus.discrepancy.DEFAULT_RESTARTS,
    "growth": "exp:2",
    "oracle": "exact",
    "seed": None,
}

CONFIG_SCHEMA: typing.Dict[str, type] = {
    "cap": int,
    "exact_cap": int,
    "rational_cap": int,
    "restarts": int,
    "growth": str,
    "oracle": str,
    "seed": int,
}

CONFIG_EXAMPLE = """\
[regulus]
cap = 100000000
exact_cap = 16777216
growth = "exp:2"
oracle = "exact"
seed = 7"""


def load_and_parse_yaml_file(path: str) -> typing.Dict[str, typing.Any]:
    """Instance and system files are YAML; JSON files load the same way."""
    with open(path) as fp:
        yaml_obj = yaml.safe_load(fp)

    return yaml_obj


def read_and_validate_config(path: str | pathlib.Path) -> typing.Dict[str, typing.Any]:
    """Read the config file and return its [regulus] table. Raise if a key is unknown
    or has the wrong type."""
    with open(path, "rb") as fp:
        config = tomllib.load(fp)

    section = config.get("regulus", {})
    if not isinstance(section, dict):
        raise TypeError("'regulus' must be a table")

    for key, value in section.items():
        expected = CONFIG_SCHEMA[key]
        # toml booleans are ints for isinstance
        if isinstance(value, bool) or not isinstance(value, expected):
            raise TypeError(f"'{key}' must be of type {expected.__name__}")

    return section


def load_toml_app_config() -> typing.Dict[str, typing.Any]:
    possible_paths = []

    possible_paths.append(str(pathlib.Path.cwd()))
    possible_paths.append(platformdirs.user_config_dir())
    possible_paths.extend(platformdirs.site_config_dir(multipath=True).split(":"))
    possible_paths.append("/etc")

    for path in possible_paths:
        config_file_path = pathlib.Path(path) / CONFIG_FILE_NAME
        if config_file_path.is_file():
            try:
                config = read_and_validate_config(config_file_path)
            except Exception as e:
                err_msg = textwrap.dedent(f"""\
                    [ERROR] Configuration file {config_file_path} is invalid:

                    {type(e).__name__} - {str(e)}

                    Every key of the configuration file is optional, for example:

                    {{example}}

                    and it is looked up in the following directories:
                    {', '.join(possible_paths)}\
                """).replace("{example}", CONFIG_EXAMPLE)
                print(err_msg)
                sys.exit(1)
            else:
                return config

    # no config file means built-in defaults
    return {}


def resolve_settings(
    config: typing.Mapping[str, typing.Any], **flags: typing.Any
) -> typing.Dict[str, typing.Any]:
    """Merge the settings: command line flag, then REGULUS_CAP for the enumeration
    cap, then the config file, then the defaults."""

    settings = dict(DEFAULTS)
    settings.update(config)

    env_cap = os.getenv("REGULUS_CAP")
    if env_cap:
        try:
            settings["cap"] = int(env_cap)
        except ValueError:
            raise regulus.errors.ConfigurationError(
                f"REGULUS_CAP must be an integer, got '{env_cap}'."
            )

    settings.update({k: v for k, v in flags.items() if v is not None})
    return settings


def edge_stream(seed: int, e: typing.Iterable[typing.Any]) -> np.random.Generator:
    """An independent generator for edge e: the substream is keyed by a checksum of
    the edge, so adding edges leaves the samples of the others unchanged."""

    key = zlib.crc32(",".join(map(str, regulus.system.canonical_edge(e))).encode())
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key,)))


def _to_builtin(value: typing.Any) -> typing.Any:
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, fractions.Fraction):
        return str(value)
    if isinstance(value, (tuple, frozenset, set)):
        return list(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def dump_json(record: typing.Any) -> str:
    return json.dumps(record, indent=2, sort_keys=True, default=_to_builtin)


def write_json(record: typing.Any, path: str | None) -> None:
    """Write the record to path, or print it when no path is given."""

    text = dump_json(record)
    if path is None:
        print(text)
        return

    with open(path, "w") as fp:
        fp.write(text + "\n")


def write_csv(
    path: str, headers: typing.Sequence[str], rows: typing.Iterable[typing.Sequence[typing.Any]]
) -> None:
    with open(path, "w", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(headers)
        writer.writerows(rows)


def write_yaml(record: typing.Any, path: str | None) -> None:
    text = yaml.safe_dump(record, sort_keys=False, default_flow_style=None)
    if path is None:
        print(text, end="")
        return

    with open(path, "w") as fp:
        fp.write(text)
