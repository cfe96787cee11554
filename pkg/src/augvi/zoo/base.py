from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..vi_core import KKTPair, VariationalProblem


@dataclass
class ZooInstance:
    """A constructed test problem plus its metadata.

    ``config`` holds :class:`~augvi.alm.SolverConfig` overrides the
    experiment was run with (e.g. a looser outer tolerance); ``table`` names
    the reference table the instance reproduces, if any.
    """

    problem: VariationalProblem
    name: str
    params: dict = field(default_factory=dict)
    table: Optional[str] = None
    config: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict, repr=False)

    @property
    def exact_solution(self) -> Optional[KKTPair]:
        return self.problem.exact_solution

    @property
    def header(self):
        parts = [self.name] + [f"{k}={v}" for k, v in self.params.items()]
        return " ".join(parts)
