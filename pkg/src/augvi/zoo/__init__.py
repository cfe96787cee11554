"""Test problems: the PDE experiments and small hand-checkable instances.

:data:`REGISTRY` maps the command-line names to constructors and their
parameter schemas.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from ..errors import InvalidParameterError
from .base import ZooInstance
from .control import nash_control, nash_player_problem, poisson_control, split_box_control
from .grids import Grid1D, Grid2D
from .param_est import param_estimation
from .toys import box_qp, box_qp_solution, l2_counterexample, l2_family, scalar_qp


@dataclass(frozen=True)
class ZooEntry:
    """``params`` maps keyword -> (type, default); ``cli`` maps keyword -> CLI option."""

    name: str
    build: Callable
    params: dict = field(default_factory=dict)
    cli: dict = field(default_factory=dict)
    description: str = ""

    def make(self, **kwargs):
        unknown = set(kwargs) - set(self.params)
        if unknown:
            raise InvalidParameterError(f"{self.name} does not take {sorted(unknown)}")
        args = {k: typ(kwargs.get(k, default)) for k, (typ, default) in self.params.items()}
        return self.build(**args)

    @property
    def schema(self):
        return ", ".join(f"{self.cli.get(k, k)} ({t.__name__}, default {d})" for k, (t, d) in self.params.items())


REGISTRY = {
    e.name: e
    for e in [
        ZooEntry(
            "poisson-control",
            poisson_control,
            {"n": (int, 64)},
            {"n": "--n"},
            "box-constrained Poisson control on the unit square",
        ),
        ZooEntry(
            "nash-control",
            nash_control,
            {"n": (int, 64)},
            {"n": "--n"},
            "two-player Nash game with a shared Poisson state",
        ),
        ZooEntry(
            "param-estimation",
            param_estimation,
            {"n": (int, 256), "beta": (float, 1.0)},
            {"n": "--n", "beta": "--beta"},
            "1-D diffusion coefficient estimation, bound kept explicit",
        ),
        ZooEntry(
            "box-qp",
            box_qp,
            {"dim": (int, 10), "seed": (int, 0)},
            {"dim": "--dim", "seed": "--seed"},
            "random strongly convex QP over [-1, 1]^dim",
        ),
        ZooEntry(
            "l2-counterexample",
            l2_counterexample,
            {"m": (int, 20)},
            {"m": "--dim"},
            "finite truncation of the sequence-space example without error bound",
        ),
        ZooEntry("scalar-qp", scalar_qp, {}, {}, "F(x) = x - 1 over (-inf, 0]"),
    ]
}


def make(name, **kwargs):
    try:
        entry = REGISTRY[name]
    except KeyError:
        raise InvalidParameterError(f"unknown problem {name!r}; choose from {sorted(REGISTRY)}") from None
    return entry.make(**kwargs)


__all__ = [
    "REGISTRY",
    "Grid1D",
    "Grid2D",
    "ZooEntry",
    "ZooInstance",
    "box_qp",
    "box_qp_solution",
    "l2_counterexample",
    "l2_family",
    "make",
    "nash_control",
    "nash_player_problem",
    "param_estimation",
    "poisson_control",
    "scalar_qp",
    "split_box_control",
]
