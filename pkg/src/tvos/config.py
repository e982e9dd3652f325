"""Run configuration shared by the library entry points and the CLI.

The defaults are the standard tracking setup: the sparse-dense schedule
(4 recent frames plus 5 sparse ones from a 40-frame window) with the
two-scale motion prior, sigma 8 and 21 on the stride-8 grid.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

from .propagation import PropagationConfig
from .sampling import SamplingStrategy, parse_strategy
from .similarity import SpatialParams

__all__ = ["RunConfig"]

_VARIANT_NAMES = {"prev1": "previous", "consec": "consecutive", "uniform": "uniform",
                  "sparse-dense": "sparse_dense"}


@dataclass(frozen=True)
class RunConfig:
    """Every tracking tunable in one place.

    ``strategy`` is the schedule name (``prev1``, ``consec``, ``uniform`` or
    ``sparse-dense``); ``count`` applies to ``consec``/``uniform`` and the
    dense/sparse counts to ``sparse-dense``.
    """

    strategy: str = "sparse-dense"
    count: int = 9
    window: int = 40
    dense_count: int = 4
    sparse_count: int = 5
    motion_prior: bool = True
    include_first_frame: bool = False
    sigma_local: float = 8.0
    sigma_distant: float = 21.0
    sigma_units: str = "cells"
    temperature: float = 0.1
    stride: int = 8
    window_radius: int | None = None
    harden_history: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in _VARIANT_NAMES:
            raise ValueError(f"unknown strategy {self.strategy!r}; choose from {sorted(_VARIANT_NAMES)}")
        # build once so invalid combinations fail at construction
        self.sampling()
        self.spatial()

    @classmethod
    def from_strategy_string(cls, text: str, **kw) -> "RunConfig":
        """Fill the schedule fields from the compact form, e.g. ``uniform:9:40+motion``."""
        s = parse_strategy(text)
        name = {v: k for k, v in _VARIANT_NAMES.items()}[s.variant]
        return cls(strategy=name, count=s.count, window=s.window, dense_count=s.dense_count,
                   sparse_count=s.sparse_count, motion_prior=s.motion_prior,
                   include_first_frame=s.include_first_frame, **kw)

    def sampling(self) -> SamplingStrategy:
        return SamplingStrategy(_VARIANT_NAMES[self.strategy], count=self.count,
                                window=self.window, dense_count=self.dense_count,
                                sparse_count=self.sparse_count,
                                include_first_frame=self.include_first_frame,
                                motion_prior=self.motion_prior)

    def spatial(self) -> SpatialParams:
        return SpatialParams(self.sigma_local, self.sigma_distant, self.temperature,
                             self.window_radius, self.sigma_units)

    def propagation(self) -> PropagationConfig:
        return PropagationConfig(self.sampling(), self.spatial(), self.stride, self.harden_history)

    def to_dict(self) -> dict:
        return asdict(self)
