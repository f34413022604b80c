"""Shared config loading for the experiment scripts."""

from __future__ import annotations

import argparse
import dataclasses
import json
import typing


def load_config(cls, argv=None):
    """Build a ``cls`` dataclass from defaults, an optional ``--config`` JSON
    file, then ``--field value`` overrides on the command line."""
    parser = argparse.ArgumentParser(description=cls.__doc__)
    parser.add_argument("--config", help="JSON file with field values")
    hints = typing.get_type_hints(cls)
    for f in dataclasses.fields(cls):
        parser.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, type=json.loads,
                            help=f"{hints[f.name]} (JSON literal, default {f.default!r})")
    args = parser.parse_args(argv)
    values = {}
    if args.config:
        with open(args.config) as fh:
            values.update(json.load(fh))
    values.update({k: v for k, v in vars(args).items() if k != "config" and v is not None})
    unknown = set(values) - {f.name for f in dataclasses.fields(cls)}
    if unknown:
        parser.error(f"unknown config fields: {', '.join(sorted(unknown))}")
    return cls(**values)
