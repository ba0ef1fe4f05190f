"""Bundled test grids.

Three grids ship with the package, shaped like the standard distribution
test feeders by bus/substation/tie-switch counts (13/3/3 plus 10 extra open
lines, 29/1/1 plus 20, 83/11/13 plus 30).  The true feeders' line data is
not redistributable, so these carry documented synthetic impedances drawn
by ``scripts/make_fixtures.py`` with pinned seeds; user-supplied grid files
follow the same JSON schema and can be used everywhere a fixture name is
accepted.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from ..errors import DomainError

FIXTURE_NAMES = ("bus_13_3", "bus_29_1", "bus_83_11")

__all__ = ["FIXTURE_NAMES", "fixture_path", "load_fixture"]


def fixture_path(name: str) -> Path:
    if name not in FIXTURE_NAMES:
        raise DomainError(f"unknown fixture {name!r}; bundled: {', '.join(FIXTURE_NAMES)}")
    return Path(str(resources.files(__package__).joinpath(f"{name}.json")))


def load_fixture(name: str):
    from ..harness.gridfile import parse_grid

    return parse_grid(fixture_path(name))
