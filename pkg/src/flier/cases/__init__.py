"""Bundled test networks and the synthetic large-grid generator."""

import os

from .. import netmodel
from .synthetic import synthetic_case

_HERE = os.path.dirname(__file__)

BUNDLED = ("case57", "case118")


def case_path(name):
    """Filesystem path of a bundled MATPOWER case."""
    if name not in BUNDLED:
        raise KeyError("unknown bundled case %r (have %s)" % (name, ", ".join(BUNDLED)))
    return os.path.join(_HERE, name + ".m")


def load_bundled(name):
    """Parse a bundled case into a RawCase."""
    return netmodel.load_case(case_path(name))
