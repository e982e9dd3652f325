"""Reference-frame schedules for online propagation.

The default schedule looks at the 4 frames right before the target (local,
tight spatial prior) plus 5 frames spread over the rest of a 40-frame window
(distant, loose prior). The other variants reproduce the ablation columns:
previous frame only, N consecutive frames, and uniform sampling.

Strategies also parse from compact strings::

    prev1 | consec:N | uniform:N:W | sparse-dense[:D:S:W]   [+motion] [+first]
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction

from .similarity import DISTANT, LOCAL

__all__ = [
    "SamplingStrategy",
    "ReferenceSet",
    "evenly_spaced_offsets",
    "select_references",
    "parse_strategy",
    "ablation_grid",
    "ABLATION_COLUMNS",
    "TRAIN_STRATEGIES",
]

_VARIANTS = ("previous", "consecutive", "uniform", "sparse_dense")


def evenly_spaced_offsets(lo: int, hi: int, count: int) -> list[int]:
    """``count`` offsets evenly spaced over ``[lo, hi]``, endpoints included,
    rounded half-up. Exact rational arithmetic, so no float rounding drift."""
    if count == 1:
        return [lo]
    out = []
    for k in range(count):
        v = Fraction(lo) + Fraction(hi - lo) * k / (count - 1)
        out.append(int((Decimal(v.numerator) / Decimal(v.denominator))
                       .quantize(Decimal(1), rounding=ROUND_HALF_UP)))
    return out


@dataclass(frozen=True)
class SamplingStrategy:
    """Which earlier frames a target frame consults.

    ``variant`` is one of ``previous``, ``consecutive`` (``count`` frames),
    ``uniform`` (``count`` frames evenly over ``window``) or ``sparse_dense``
    (``dense_count`` recent frames plus ``sparse_count`` over ``window``).
    With ``motion_prior``, references beyond the dense span get the distant
    sigma class.
    """

    variant: str = "sparse_dense"
    count: int = 9
    window: int = 40
    dense_count: int = 4
    sparse_count: int = 5
    include_first_frame: bool = False
    motion_prior: bool = True

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ValueError(f"unknown sampling variant {self.variant!r}")
        if self.variant == "previous" and self.count != 1:
            object.__setattr__(self, "count", 1)
        if self.count < 1 or self.dense_count < 1 or self.sparse_count < 1:
            raise ValueError("frame counts must be >= 1")
        if self.variant == "sparse_dense" and self.window < self.dense_count + self.sparse_count:
            raise ValueError(f"window {self.window} shorter than dense+sparse "
                             f"{self.dense_count + self.sparse_count}")
        if self.variant == "uniform" and self.window < self.count:
            raise ValueError(f"window {self.window} shorter than count {self.count}")

    @classmethod
    def previous(cls, **kw):
        return cls("previous", count=1, motion_prior=kw.pop("motion_prior", False), **kw)

    @classmethod
    def consecutive(cls, n: int, **kw):
        return cls("consecutive", count=n, motion_prior=kw.pop("motion_prior", False), **kw)

    @classmethod
    def uniform(cls, count: int = 9, window: int = 40, **kw):
        return cls("uniform", count=count, window=window,
                   motion_prior=kw.pop("motion_prior", False), **kw)

    @classmethod
    def sparse_dense(cls, dense_count: int = 4, sparse_count: int = 5, window: int = 40, **kw):
        return cls("sparse_dense", dense_count=dense_count, sparse_count=sparse_count,
                   window=window, **kw)

    def offsets(self) -> list[int]:
        """Backward offsets (``t - index``) before clipping, most recent first."""
        if self.variant in ("previous", "consecutive"):
            return list(range(1, self.count + 1))
        if self.variant == "uniform":
            lo = self.dense_count + 1
            return evenly_spaced_offsets(lo, self.window, self.count)
        dense = list(range(1, self.dense_count + 1))
        sparse = evenly_spaced_offsets(self.dense_count + 1, self.window, self.sparse_count)
        return dense + sparse

    @property
    def max_offset(self) -> int:
        return max(self.offsets())

    @property
    def max_entries(self) -> int:
        base = (self.dense_count + self.sparse_count if self.variant == "sparse_dense"
                else self.count)
        return base + int(self.include_first_frame)

    def sigma_class(self, offset: int) -> str:
        if not self.motion_prior:
            return LOCAL
        return LOCAL if offset <= self.dense_count else DISTANT

    def to_string(self) -> str:
        if self.variant == "previous":
            s = "prev1"
        elif self.variant == "consecutive":
            s = f"consec:{self.count}"
        elif self.variant == "uniform":
            s = f"uniform:{self.count}:{self.window}"
        else:
            s = f"sparse-dense:{self.dense_count}:{self.sparse_count}:{self.window}"
        if self.motion_prior:
            s += "+motion"
        if self.include_first_frame:
            s += "+first"
        return s


@dataclass(frozen=True)
class ReferenceSet:
    """Ordered ``(frame_index, sigma_class)`` pairs, most recent first."""

    entries: tuple[tuple[int, str], ...]

    @property
    def indices(self) -> list[int]:
        return [i for i, _ in self.entries]

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def select_references(t: int, strategy: SamplingStrategy) -> ReferenceSet:
    """Reference frames for target frame ``t`` (deterministic).

    Offsets reaching before frame 0 clip to frame 0; repeats keep the first
    (most recent) occurrence and its sigma class.
    """
    if t < 1:
        raise ValueError(f"target frame must be >= 1 (frame 0 is the annotation), got {t}")
    seen = set()
    entries = []
    for off in strategy.offsets():
        idx = max(t - off, 0)
        if idx in seen:
            continue
        seen.add(idx)
        entries.append((idx, strategy.sigma_class(off)))
    if strategy.include_first_frame and 0 not in seen:
        entries.append((0, DISTANT if strategy.motion_prior else LOCAL))
    return ReferenceSet(tuple(entries))


def parse_strategy(text: str) -> SamplingStrategy:
    """Parse the compact CLI form, e.g. ``sparse-dense:4:5:40+motion+first``."""
    parts = text.strip().split("+")
    head, flags = parts[0], parts[1:]
    unknown = set(flags) - {"motion", "first"}
    if unknown:
        raise ValueError(f"unknown strategy suffix(es) {sorted(unknown)} in {text!r}")
    kw = {"motion_prior": "motion" in flags, "include_first_frame": "first" in flags}
    name, *args = head.split(":")
    try:
        nums = [int(a) for a in args]
    except ValueError:
        raise ValueError(f"non-integer strategy argument in {text!r}") from None
    if name == "prev1" and not nums:
        return SamplingStrategy.previous(**kw)
    if name == "consec" and len(nums) == 1:
        return SamplingStrategy.consecutive(nums[0], **kw)
    if name == "uniform" and len(nums) == 2:
        return SamplingStrategy.uniform(nums[0], nums[1], **kw)
    if name == "sparse-dense" and len(nums) in (0, 3):
        return SamplingStrategy.sparse_dense(*nums, **kw)
    raise ValueError(f"cannot parse sampling strategy {text!r}")


ABLATION_COLUMNS = ("1 frame", "3 frames", "9 frames", "uniform sample",
                    "sparse sample", "sparse + motion")

# training-side reference schedules (the ablation table's rows)
TRAIN_STRATEGIES = {
    "1 frame": SamplingStrategy.previous(),
    "3 frames": SamplingStrategy.consecutive(3),
    "9 frames": SamplingStrategy.consecutive(9),
    "uniform sample": SamplingStrategy.uniform(9, 40),
    "sparse sample": SamplingStrategy.sparse_dense(motion_prior=False),
}


def ablation_grid() -> list[tuple[str, SamplingStrategy]]:
    """The six tracking-side strategies, in table column order."""
    return [
        ("1 frame", SamplingStrategy.previous()),
        ("3 frames", SamplingStrategy.consecutive(3)),
        ("9 frames", SamplingStrategy.consecutive(9)),
        ("uniform sample", SamplingStrategy.uniform(9, 40)),
        ("sparse sample", SamplingStrategy.sparse_dense(motion_prior=False)),
        ("sparse + motion", SamplingStrategy.sparse_dense(motion_prior=True)),
    ]
