"""Computable stand-ins for the halting function and the objects built on it.

``h_T(x)`` is 1 iff program ``x`` halts on input ``x`` within ``T`` steps.
It under-approximates the true halting function: a 1 is backed by a
halting trace, a 0 only means "not yet".
"""

from __future__ import annotations

import json
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping

from .machine import Exhausted, Halted, Machine, RunOutcome, decode_program, run_bounded

__all__ = [
    "HaltingSurrogate",
    "DyadicRational",
    "RankTable",
    "PrefixError",
    "h_T",
    "outcome_T",
    "build_surrogate",
    "dovetail",
    "dovetail_usage",
    "omega_T",
    "omega_from_bits",
    "g_T",
    "g_inverse_T",
]


class PrefixError(LookupError):
    """A query fell outside the finite prefix a table was built from."""


@lru_cache(maxsize=1 << 16)
def outcome_T(x: int, T: int) -> RunOutcome:
    """``run_bounded(x, x, T)``, memoized."""
    return run_bounded(x, x, T)


def h_T(x: int, T: int) -> int:
    return int(outcome_T(x, T).halted)


@dataclass(frozen=True)
class HaltingSurrogate:
    """Step-bounded halting records for programs ``0..x_max``.

    ``records[x]`` is exactly ``run_bounded(x, x, bound)``. An empty surrogate
    has ``x_max == -1``.
    """

    bound: int
    x_max: int
    records: Mapping[int, RunOutcome] = field(default_factory=dict)

    @classmethod
    def empty(cls) -> "HaltingSurrogate":
        return cls(bound=0, x_max=-1, records={})

    def h(self, x: int) -> int:
        """h_T(x); indices past ``x_max`` are evaluated directly at ``bound``."""
        rec = self.records.get(x)
        if rec is None:
            rec = outcome_T(x, self.bound)
        return int(rec.halted)

    def bits(self) -> list[int]:
        return [self.h(x) for x in range(self.x_max + 1)]

    def halted_indices(self) -> list[int]:
        return [x for x, r in sorted(self.records.items()) if r.halted]

    def refine(self, bound: int) -> "HaltingSurrogate":
        """Same prefix at a larger bound; halted records carry over unchanged."""
        if bound < self.bound:
            raise ValueError("refinement cannot lower the bound")
        records = {
            x: rec if rec.halted else outcome_T(x, bound)
            for x, rec in self.records.items()
        }
        return HaltingSurrogate(bound=bound, x_max=self.x_max, records=records)

    # -- JSON document: {T, x_max, records: [{x, halted, steps}]} ----------

    def to_dict(self) -> dict:
        return {
            "T": self.bound,
            "x_max": self.x_max,
            "records": [
                {"x": x, "halted": rec.halted, "steps": rec.steps}
                for x, rec in sorted(self.records.items())
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, doc: dict) -> "HaltingSurrogate":
        T = int(doc["T"])
        records: dict[int, RunOutcome] = {}
        for item in doc["records"]:
            x, steps = int(item["x"]), int(item["steps"])
            if item["halted"]:
                if steps > T:
                    raise ValueError(f"record {x}: halted at {steps} > T={T}")
                records[x] = Halted(steps)
            else:
                if steps != T:
                    raise ValueError(f"record {x}: exhausted at {steps} != T={T}")
                records[x] = Exhausted(T)
        return cls(bound=T, x_max=int(doc["x_max"]), records=records)

    @classmethod
    def from_json(cls, text: str) -> "HaltingSurrogate":
        return cls.from_dict(json.loads(text))


def build_surrogate(x_max: int, T: int) -> HaltingSurrogate:
    """Direct (non-dovetailed) surrogate: each program run to ``T`` in turn."""
    if T < 0:
        raise ValueError("T must be non-negative")
    return HaltingSurrogate(
        bound=T, x_max=x_max, records={x: outcome_T(x, T) for x in range(x_max + 1)}
    )


def dovetail(x_max: int, budget: int, prior: HaltingSurrogate | None = None) -> HaltingSurrogate:
    """Round-robin execution of programs ``0..x_max``; see :func:`dovetail_usage`."""
    return dovetail_usage(x_max, budget, prior)[0]


def dovetail_usage(
    x_max: int, budget: int, prior: HaltingSurrogate | None = None
) -> tuple[HaltingSurrogate, int]:
    """Round-robin execution of programs ``0..x_max``, each on its own index.

    Schedule, which fixes the result as a function of the arguments alone:

    1. Indices beyond ``prior.x_max`` are admitted in increasing order, each
       run up to ``prior.bound`` steps, while the budget allows; the first
       index that does not fit stops admission.
    2. Sweeps: each sweep gives one step to every unresolved admitted
       program. A sweep runs only if all its steps fit in what is left of
       the budget, so the result always has a uniform bound.

    Steps already accounted for by ``prior`` are replayed, not charged.
    Returns the new surrogate and the number of budget steps consumed.
    """
    if budget < 0:
        raise ValueError("budget must be non-negative")
    prior = prior if prior is not None else HaltingSurrogate.empty()
    if x_max < prior.x_max:
        raise ValueError("dovetail cannot shrink the prior's prefix")
    bound = prior.bound
    machines: dict[int, Machine] = {}
    records: dict[int, RunOutcome] = dict(prior.records)
    for x, rec in prior.records.items():
        if not rec.halted:
            m = Machine(decode_program(x), x)
            m.run(bound)
            machines[x] = m

    left = budget
    top = prior.x_max
    for x in range(prior.x_max + 1, x_max + 1):
        m = Machine(decode_program(x), x)
        out = m.run(min(bound, left))
        if not out.halted and m.steps < bound:
            break
        left -= m.steps
        top = x
        if out.halted:
            records[x] = out
        else:
            machines[x] = m

    while machines and len(machines) <= left:
        left -= len(machines)
        bound += 1
        for x in list(machines):
            m = machines[x]
            m.step()
            if m.halted:
                records[x] = Halted(m.steps)
                del machines[x]
    for x in machines:
        records[x] = Exhausted(bound)
    return HaltingSurrogate(bound=bound, x_max=top, records=records), budget - left


# -- Omega -------------------------------------------------------------------

@dataclass(frozen=True)
class DyadicRational:
    """Exact ``numerator / 2**width`` with ``0 <= value < 1``."""

    numerator: int
    width: int

    def __post_init__(self):
        if self.width < 0 or not 0 <= self.numerator < (1 << self.width) or (
            self.width == 0 and self.numerator != 0
        ):
            raise ValueError(f"{self.numerator}/2^{self.width} is not in [0, 1)")

    @property
    def value(self) -> Fraction:
        return Fraction(self.numerator, 1 << self.width)

    def __float__(self) -> float:
        return self.numerator / (1 << self.width)

    def bit(self, i: int) -> int:
        """Binary digit ``i`` after the point; digit 0 is worth 1/2."""
        if i < 0:
            raise IndexError(i)
        if i >= self.width:
            return 0
        return (self.numerator >> (self.width - 1 - i)) & 1

    def bits(self, n: int | None = None) -> list[int]:
        return [self.bit(i) for i in range(self.width if n is None else n)]

    def __str__(self) -> str:
        return "0." + "".join(map(str, self.bits())) if self.width else "0"


def omega_from_bits(bits: Iterable[int]) -> DyadicRational:
    """Dyadic number whose binary digits after the point are ``bits``."""
    num = width = 0
    for b in bits:
        num = (num << 1) | (1 if b else 0)
        width += 1
    return DyadicRational(num, width)


def omega_T(x_max: int, T: int | None = None, surrogate: HaltingSurrogate | None = None) -> DyadicRational:
    """Sum of ``2**-(x+1)`` over ``x <= x_max`` with ``h_T(x) = 1``.

    Digit ``x`` of the result is ``h_T(x)``. Pass either ``T`` or a surrogate
    covering the prefix.
    """
    if surrogate is None:
        if T is None:
            raise TypeError("omega_T needs T or a surrogate")
        return omega_from_bits(h_T(x, T) for x in range(x_max + 1))
    return omega_from_bits(surrogate.h(x) for x in range(x_max + 1))


# -- rank function g and its inverse ---------------------------------------

class RankTable:
    """Positions of zeros and ones in an ``h_T`` prefix."""

    def __init__(self, bits: Iterable[int]):
        self.bits = tuple(1 if b else 0 for b in bits)
        self.zeros: list[int] = []
        self.ones: list[int] = []
        self._rank: list[int] = []
        for x, b in enumerate(self.bits):
            side = self.ones if b else self.zeros
            side.append(x)
            self._rank.append(len(side))

    @classmethod
    def from_surrogate(cls, surrogate: HaltingSurrogate) -> "RankTable":
        return cls(surrogate.bits())

    def __len__(self) -> int:
        return len(self.bits)

    def counts(self, x: int) -> tuple[int, int]:
        """``(m0, m1)``: zeros and ones among indices ``<= x``."""
        self._need(x)
        m1 = bisect_right(self.ones, x)
        return x + 1 - m1, m1

    def rank(self, x: int) -> int:
        self._need(x)
        return self._rank[x]

    def _need(self, x: int) -> None:
        if not 0 <= x < len(self.bits):
            raise PrefixError(f"index {x} outside table prefix 0..{len(self.bits) - 1}")


def g_T(x: int, table: RankTable) -> int:
    """``2m-2`` for the m-th zero, ``2m-1`` for the m-th one."""
    m = table.rank(x)
    return 2 * m - 1 if table.bits[x] else 2 * m - 2


def g_inverse_T(y: int, table: RankTable) -> int:
    if y < 0:
        raise ValueError("y must be non-negative")
    side, m = (table.ones, (y + 1) // 2) if y % 2 else (table.zeros, y // 2 + 1)
    if m > len(side):
        kind = "ones" if y % 2 else "zeros"
        raise PrefixError(f"preimage of {y} needs {m} {kind}; prefix has {len(side)}")
    return side[m - 1]
