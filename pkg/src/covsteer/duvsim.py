"""Transaction-level model of the MiniSRI pipelined crossbar.

Each slave accepts at most ``D`` overlapping transactions; requests queue
FIFO per slave. Different slaves run in parallel. The schedule feeds three
coverage groups: PIPELINE (request history per slave), PARALLELISM (in-flight
population at every start) and PACING (per-beat wait pattern of a burst).
"""

from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .params import DuvParams
from .stimgen import WRAP_LENGTHS, BurstKind, Test, TType, validate_txn

__all__ = [
    "DuvParams",
    "ScheduleTrace",
    "CoverageEvent",
    "simulate",
    "coverage_events",
    "enumerate_products",
    "simulate_events",
    "PARALLELISM_CLAMP",
    "PARTITIONS",
    "GROUPS",
]

PIPELINE = "PIPELINE"
PARALLELISM = "PARALLELISM"
PACING = "PACING"
GROUPS = (PIPELINE, PARALLELISM, PACING)

PARALLELISM_CLAMP = 8
PARTITIONS = ("AAA", "AAB", "ABA", "ABB", "ABC")


class CoverageEvent(NamedTuple):
    group: str
    key: tuple

    def to_json(self):
        return {"group": self.group, "key": list(self.key)}

    @classmethod
    def from_json(cls, d):
        return cls(d["group"], tuple(d["key"]))


@dataclass(frozen=True)
class ScheduleTrace:
    request: tuple
    start: tuple
    end: tuple
    in_flight: tuple  # per transaction k: sorted indices j in flight at start_k (k included)

    def __len__(self):
        return len(self.start)


def txn_duration(txn) -> int:
    waits = txn.waits
    return sum(1 + waits[i % 4] for i in range(txn.burst_len))


def simulate(test: Test, params: DuvParams = DuvParams()) -> ScheduleTrace:
    """Schedule every transaction of ``test`` on the crossbar."""
    for i, txn in enumerate(test.txns):
        validate_txn(txn, params, index=i)

    n = len(test.txns)
    request = np.empty(n, dtype=np.int64)
    start = np.empty(n, dtype=np.int64)
    end = np.empty(n, dtype=np.int64)
    # per slave: start of the latest admitted txn, sorted end times of admitted txns
    last_start = [0] * params.S
    ends = [[] for _ in range(params.S)]
    t = 0
    for k, txn in enumerate(test.txns):
        t = txn.gap if k == 0 else t + txn.gap
        request[k] = t
        s = txn.slave
        begin = max(t, last_start[s])
        slot_ends = ends[s]
        if len(slot_ends) >= params.D:
            # wait until fewer than D admitted txns are still running
            begin = max(begin, slot_ends[-params.D])
        start[k] = begin
        end[k] = begin + txn_duration(txn)
        last_start[s] = begin
        bisect.insort(slot_ends, int(end[k]))

    live = (start[None, :] <= start[:, None]) & (start[:, None] < end[None, :])
    in_flight = tuple(tuple(int(j) for j in np.flatnonzero(row)) for row in live)
    return ScheduleTrace(
        request=tuple(int(v) for v in request),
        start=tuple(int(v) for v in start),
        end=tuple(int(v) for v in end),
        in_flight=in_flight,
    )


def master_partition(masters) -> str:
    """Equality pattern of three masters, e.g. (2, 0, 2) -> 'ABA'."""
    labels = {}
    out = []
    for m in masters:
        if m not in labels:
            labels[m] = "ABC"[len(labels)]
        out.append(labels[m])
    return "".join(out)


def _type_letter(ttype):
    return "R" if ttype is TType.READ else "W"


def pacing_key(txn) -> tuple:
    waits = txn.waits
    v = tuple(waits[i] if i < txn.burst_len else -1 for i in range(4))
    return (txn.burst_kind.value, min(txn.burst_len, 4)) + v


def coverage_events(trace: ScheduleTrace, test: Test, params: DuvParams = DuvParams()) -> list:
    """Coverage events of one simulated test, in transaction order per group."""
    txns = test.txns
    events = []

    history = [[] for _ in range(params.S)]
    for txn in txns:
        h = history[txn.slave]
        h.append(txn)
        if len(h) >= 3:
            last = h[-3:]
            pattern = "".join(_type_letter(t.ttype) for t in last)
            events.append(CoverageEvent(PIPELINE, (txn.slave, pattern, master_partition([t.master for t in last]))))

    for live in trace.in_flight:
        masters = {txns[j].master for j in live}
        slaves = {txns[j].slave for j in live}
        events.append(CoverageEvent(PARALLELISM, (min(len(live), PARALLELISM_CLAMP), len(masters), len(slaves))))

    for txn in txns:
        events.append(CoverageEvent(PACING, pacing_key(txn)))
    return events


def simulate_events(test: Test, params: DuvParams = DuvParams()) -> list:
    return coverage_events(simulate(test, params), test, params)


def enumerate_products(params: DuvParams = DuvParams()) -> frozenset:
    """The universe of coverage keys reachable under ``params``."""
    M, S, D, W, B = params.M, params.S, params.D, params.W, params.B
    products = set()

    partitions = [p for p in PARTITIONS if len(set(p)) <= M]
    for s in range(S):
        for types in itertools.product("RW", repeat=3):
            for part in partitions:
                products.add(CoverageEvent(PIPELINE, (s, "".join(types), part)))

    # n live txns spread over s slaves needs n <= s*D; masters are unconstrained
    for n in range(1, S * D + 1):
        for s in range(math.ceil(n / D), min(n, S) + 1):
            for m in range(1, min(n, M) + 1):
                products.add(CoverageEvent(PARALLELISM, (min(n, PARALLELISM_CLAMP), m, s)))

    lengths = {BurstKind.SINGLE: [1], BurstKind.INCR: range(1, B + 1),
               BurstKind.WRAP: [l for l in WRAP_LENGTHS if l <= B]}
    for kind, lens in lengths.items():
        for bucket in sorted({min(l, 4) for l in lens}):
            for waits in itertools.product(range(W + 1), repeat=bucket):
                products.add(CoverageEvent(PACING, (kind.value, bucket) + waits + (-1,) * (4 - bucket)))
    return frozenset(products)
