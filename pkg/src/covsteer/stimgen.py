"""Transaction schema and reproducible stimulus corpora.

A corpus mixes a dominant ``UNIFORM`` profile with biased profiles
(``BURSTY``, ``SPARSE_PACING``) whose traffic reaches coverage products that
uniform traffic almost never produces.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ConfigError, CorpusParseError, ValidationError
from .params import DuvParams


class TType(str, Enum):
    READ = "READ"
    WRITE = "WRITE"


class BurstKind(str, Enum):
    SINGLE = "SINGLE"
    INCR = "INCR"
    WRAP = "WRAP"


class Priority(str, Enum):
    LOW = "LOW"
    HIGH = "HIGH"


WRAP_LENGTHS = (2, 4, 8)
WIDTHS = (1, 2, 4, 8)
ADDR_MAX = 65535
GAP_MAX = 7
DATA_MAX = 255
TAG_MAX = 15

CATEGORICAL_FIELDS = ("ttype", "master", "slave", "burst_kind", "priority")
NUMERIC_FIELDS = ("burst_len", "addr", "gap", "w1", "w2", "w3", "w4", "data", "tag", "width")
TXN_FIELDS = CATEGORICAL_FIELDS + NUMERIC_FIELDS


@dataclass(frozen=True)
class Transaction:
    ttype: TType
    master: int
    slave: int
    burst_kind: BurstKind
    priority: Priority
    burst_len: int
    addr: int
    gap: int
    w1: int
    w2: int
    w3: int
    w4: int
    data: int
    tag: int
    width: int

    @property
    def waits(self):
        return (self.w1, self.w2, self.w3, self.w4)

    def to_dict(self):
        d = asdict(self)
        for name in ("ttype", "burst_kind", "priority"):
            d[name] = d[name].value
        return d

    @classmethod
    def from_dict(cls, d):
        if set(d) != set(TXN_FIELDS):
            missing = sorted(set(TXN_FIELDS) - set(d))
            extra = sorted(set(d) - set(TXN_FIELDS))
            raise ValueError(f"bad transaction fields (missing={missing}, extra={extra})")
        kw = dict(d)
        kw["ttype"] = TType(kw["ttype"])
        kw["burst_kind"] = BurstKind(kw["burst_kind"])
        kw["priority"] = Priority(kw["priority"])
        for name in ("master", "slave") + NUMERIC_FIELDS:
            if not isinstance(kw[name], int) or isinstance(kw[name], bool):
                raise ValueError(f"field {name!r} must be an integer")
        return cls(**kw)


def validate_txn(txn: Transaction, params: DuvParams, index=None):
    """Raise ValidationError if ``txn`` violates the schema for ``params``."""
    where = "transaction" if index is None else f"transaction {index}"

    def bad(msg):
        raise ValidationError(f"{where}: {msg}")

    if not 0 <= txn.master < params.M:
        bad(f"master {txn.master} outside [0, {params.M})")
    if not 0 <= txn.slave < params.S:
        bad(f"slave {txn.slave} outside [0, {params.S})")
    if not 1 <= txn.burst_len <= params.B:
        bad(f"burst_len {txn.burst_len} outside [1, {params.B}]")
    if txn.burst_kind is BurstKind.SINGLE and txn.burst_len != 1:
        bad("SINGLE burst must have burst_len 1")
    if txn.burst_kind is BurstKind.WRAP and txn.burst_len not in WRAP_LENGTHS:
        bad(f"WRAP burst_len {txn.burst_len} not in {WRAP_LENGTHS}")
    if not 0 <= txn.addr <= ADDR_MAX:
        bad(f"addr {txn.addr} outside [0, {ADDR_MAX}]")
    if not 0 <= txn.gap <= GAP_MAX:
        bad(f"gap {txn.gap} outside [0, {GAP_MAX}]")
    for i, w in enumerate(txn.waits, 1):
        if not 0 <= w <= params.W:
            bad(f"w{i} {w} outside [0, {params.W}]")
    if not 0 <= txn.data <= DATA_MAX:
        bad(f"data {txn.data} outside [0, {DATA_MAX}]")
    if not 0 <= txn.tag <= TAG_MAX:
        bad(f"tag {txn.tag} outside [0, {TAG_MAX}]")
    if txn.width not in WIDTHS:
        bad(f"width {txn.width} not in {WIDTHS}")


@dataclass(frozen=True)
class Test:
    test_id: int
    txns: tuple

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if len(self.txns) == 0:
            raise ConfigError(f"test {self.test_id} has no transactions")
        if not isinstance(self.txns, tuple):
            object.__setattr__(self, "txns", tuple(self.txns))

    def __len__(self):
        return len(self.txns)

    def to_dict(self):
        return {"test_id": self.test_id, "txns": [t.to_dict() for t in self.txns]}


# ---------------------------------------------------------------------------
# Generation profiles


class ProfileName(str, Enum):
    UNIFORM = "UNIFORM"
    BURSTY = "BURSTY"
    SPARSE_PACING = "SPARSE_PACING"


_PROFILE_ALIASES = {
    "uniform": ProfileName.UNIFORM,
    "bursty": ProfileName.BURSTY,
    "sparse": ProfileName.SPARSE_PACING,
    "sparse_pacing": ProfileName.SPARSE_PACING,
}


def parse_profile_name(name) -> ProfileName:
    if isinstance(name, ProfileName):
        return name
    key = str(name).strip()
    if key.lower() in _PROFILE_ALIASES:
        return _PROFILE_ALIASES[key.lower()]
    try:
        return ProfileName(key.upper())
    except ValueError:
        raise ConfigError(f"unknown profile {name!r}") from None


def _norm(p):
    p = np.asarray(p, dtype=float)
    return p / p.sum()


@dataclass(frozen=True)
class GenProfile:
    """Per-attribute sampling distributions for one stimulus profile.

    ``weights`` maps an attribute name to a probability vector over that
    attribute's support (``ttype``, ``master``, ``slave``, ``burst_kind``,
    ``priority``, ``incr_len`` over 1..B, ``wrap_len`` over WRAP_LENGTHS,
    ``gap`` over 0..7, ``wait`` over 0..W, ``width`` over WIDTHS).
    """

    name: ProfileName
    weights: dict = field(hash=False)
    params: DuvParams = DuvParams()

    def __post_init__(self):
        p = self.params
        sizes = {
            "ttype": 2,
            "master": p.M,
            "slave": p.S,
            "burst_kind": 3,
            "priority": 2,
            "incr_len": p.B,
            "wrap_len": len(WRAP_LENGTHS),
            "gap": GAP_MAX + 1,
            "wait": p.W + 1,
            "width": len(WIDTHS),
        }
        for attr, n in sizes.items():
            w = np.asarray(self.weights.get(attr, ()), dtype=float)
            if w.shape != (n,):
                raise ConfigError(f"profile {self.name.value}: weights[{attr!r}] must have {n} entries")
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
                raise ConfigError(f"profile {self.name.value}: weights[{attr!r}] must sum to 1")


def make_profile(name, params: DuvParams = DuvParams()) -> GenProfile:
    """Build one of the stock profiles for the given DUV sizes."""
    name = parse_profile_name(name)
    M, S, W, B = params.M, params.S, params.W, params.B
    wrap_ok = np.array([l <= B for l in WRAP_LENGTHS], dtype=float)
    safe_wrap = wrap_ok if wrap_ok.any() else np.ones(len(WRAP_LENGTHS))
    if name is ProfileName.UNIFORM:
        # Uniform over the categorical fields; short-tailed pacing so that
        # long stalls and dense back-to-back traffic stay rare.
        tail = 0.2 ** np.arange(max(W - 1, 0))
        wait = _norm(([0.8, 0.17] + list(0.03 * tail / tail.sum()))[: W + 1])
        w = dict(
            ttype=_norm([1, 1]),
            master=_norm(np.ones(M)),
            slave=_norm(np.ones(S)),
            burst_kind=_norm([0.45, 0.4, 0.15]),
            priority=_norm([0.8, 0.2]),
            incr_len=_norm([1.0 / (1 + k) for k in range(B)]),
            wrap_len=_norm(safe_wrap * np.array([4, 2, 1])),
            gap=_norm([1, 2, 4, 6, 6, 4, 2, 1]),
            wait=wait,
            width=_norm([1, 1, 2, 4]),
        )
    elif name is ProfileName.BURSTY:
        # Back-to-back request trains with heavy stalls, concentrated on one master.
        master = _norm([0.55] + [0.45 / max(M - 1, 1)] * (M - 1)) if M > 1 else _norm([1])
        w = dict(
            ttype=_norm([1, 1]),
            master=master,
            slave=_norm(np.ones(S)),
            burst_kind=_norm([0.7, 0.2, 0.1]),
            priority=_norm([0.3, 0.7]),
            incr_len=_norm([1.0 + k for k in range(B)]),
            wrap_len=_norm(safe_wrap * np.array([1, 2, 4])),
            gap=_norm([10, 3, 1, 0.5, 0.25, 0.1, 0.1, 0.05]),
            wait=_norm([0.4] + [0.6 / W] * W),
            width=_norm([1, 1, 1, 1]),
        )
    else:
        # Sparse pacing: long bursts that are mostly zero-wait with an
        # occasional maximal stall; requests well spaced.
        wait = np.zeros(W + 1)
        wait[0] = 0.92
        wait[-1] += 0.06
        wait[1:] += 0.02 / W
        w = dict(
            ttype=_norm([1, 1]),
            master=_norm(np.ones(M)),
            slave=_norm(np.ones(S)),
            burst_kind=_norm([0.4, 0.35, 0.25]),
            priority=_norm([0.5, 0.5]),
            incr_len=_norm([1.0 + k for k in range(B)]),
            wrap_len=_norm(safe_wrap * np.array([1, 2, 4])),
            gap=_norm([0.2, 0.3, 0.5, 1, 2, 3, 4, 4]),
            wait=_norm(wait),
            width=_norm([4, 2, 1, 1]),
        )
    if not wrap_ok.any():
        # no legal WRAP length for this B
        kinds = np.array(w["burst_kind"])
        kinds[2] = 0.0
        w["burst_kind"] = _norm(kinds)
        w["wrap_len"] = np.array([1.0, 0.0, 0.0])
    return GenProfile(name=name, weights=w, params=params)


def _check_len_range(len_range):
    try:
        lo, hi = (int(v) for v in len_range)
    except (TypeError, ValueError):
        raise ConfigError(f"len_range must be a pair of integers, got {len_range!r}") from None
    if not 1 <= lo <= hi:
        raise ConfigError(f"len_range must satisfy 1 <= lo <= hi, got {len_range!r}")
    return lo, hi


def gen_test(seed: int, profile: GenProfile, len_range=(60, 100), test_id: int = 0) -> Test:
    """Generate one test deterministically from ``(seed, profile, len_range)``."""
    lo, hi = _check_len_range(len_range)
    if not isinstance(profile, GenProfile):
        profile = make_profile(profile)
    p = profile.params
    w = profile.weights
    rng = np.random.default_rng(seed)
    n = int(rng.integers(lo, hi + 1))

    ttype = rng.choice(2, size=n, p=w["ttype"])
    master = rng.choice(p.M, size=n, p=w["master"])
    slave = rng.choice(p.S, size=n, p=w["slave"])
    kind = rng.choice(3, size=n, p=w["burst_kind"])
    prio = rng.choice(2, size=n, p=w["priority"])
    incr_len = rng.choice(p.B, size=n, p=w["incr_len"]) + 1
    wrap_len = np.asarray(WRAP_LENGTHS)[rng.choice(len(WRAP_LENGTHS), size=n, p=w["wrap_len"])]
    gap = rng.choice(GAP_MAX + 1, size=n, p=w["gap"])
    waits = rng.choice(p.W + 1, size=(n, 4), p=w["wait"])
    addr = rng.integers(0, ADDR_MAX + 1, size=n)
    data = rng.integers(0, DATA_MAX + 1, size=n)
    tag = rng.integers(0, TAG_MAX + 1, size=n)
    width = np.asarray(WIDTHS)[rng.choice(len(WIDTHS), size=n, p=w["width"])]

    burst_len = np.where(kind == 0, 1, np.where(kind == 1, incr_len, wrap_len))
    # waits of beats that do not exist are recorded as 0
    waits = np.where(np.arange(1, 5)[None, :] <= burst_len[:, None], waits, 0)

    ttypes = (TType.READ, TType.WRITE)
    kinds = (BurstKind.SINGLE, BurstKind.INCR, BurstKind.WRAP)
    prios = (Priority.LOW, Priority.HIGH)
    txns = tuple(
        Transaction(
            ttype=ttypes[ttype[i]],
            master=int(master[i]),
            slave=int(slave[i]),
            burst_kind=kinds[kind[i]],
            priority=prios[prio[i]],
            burst_len=int(burst_len[i]),
            addr=int(addr[i]),
            gap=int(gap[i]),
            w1=int(waits[i, 0]),
            w2=int(waits[i, 1]),
            w3=int(waits[i, 2]),
            w4=int(waits[i, 3]),
            data=int(data[i]),
            tag=int(tag[i]),
            width=int(width[i]),
        )
        for i in range(n)
    )
    return Test(test_id=test_id, txns=txns)


def split_counts(n: int, mix: dict) -> dict:
    """Largest-remainder apportionment of ``n`` items over ``mix`` fractions."""
    names = list(mix)
    quotas = [mix[k] * n for k in names]
    counts = [math.floor(q) for q in quotas]
    short = n - sum(counts)
    # ties in the remainder go to the profile listed first
    order = sorted(range(len(names)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[:short]:
        counts[i] += 1
    return dict(zip(names, counts))


def parse_mix(mix) -> dict:
    """Normalise a mix given as a dict or ``"uniform=0.78,bursty=0.11"``."""
    if isinstance(mix, str):
        items = {}
        for part in mix.split(","):
            if not part.strip():
                continue
            if "=" not in part:
                raise ConfigError(f"bad mix entry {part!r}; expected name=fraction")
            k, v = part.split("=", 1)
            try:
                items[k] = float(v)
            except ValueError:
                raise ConfigError(f"bad fraction in mix entry {part!r}") from None
        mix = items
    out = {}
    for k, v in mix.items():
        name = parse_profile_name(k)
        if name in out:
            raise ConfigError(f"profile {name.value} listed twice in mix")
        if v < 0:
            raise ConfigError(f"negative fraction for {name.value}")
        out[name] = float(v)
    if not out or abs(sum(out.values()) - 1.0) > 1e-9:
        raise ConfigError(f"mix fractions must sum to 1, got {sum(out.values())!r}")
    return out


DEFAULT_MIX = {ProfileName.UNIFORM: 0.78, ProfileName.BURSTY: 0.11, ProfileName.SPARSE_PACING: 0.11}


def corpus_profiles(seed: int, n_tests: int, mix) -> list:
    """Profile assigned to each test id of a corpus (shuffled, seeded)."""
    mix = parse_mix(mix)
    if n_tests < 1:
        raise ConfigError("n_tests must be >= 1")
    counts = split_counts(n_tests, mix)
    labels = [name for name, c in counts.items() for _ in range(c)]
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xC0DE]))
    order = rng.permutation(n_tests)
    return [labels[i] for i in order]


def gen_corpus(seed: int, n_tests: int, mix=DEFAULT_MIX, len_range=(60, 100),
               params: DuvParams = DuvParams()) -> list:
    """Generate ``n_tests`` tests with ids 0..n_tests-1 from a profile mix."""
    labels = corpus_profiles(seed, n_tests, mix)
    _check_len_range(len_range)
    profiles = {name: make_profile(name, params) for name in set(labels)}
    children = np.random.SeedSequence(seed).spawn(n_tests)
    return [
        gen_test(int(children[i].generate_state(1, dtype=np.uint64)[0]), profiles[label], len_range, test_id=i)
        for i, label in enumerate(labels)
    ]


# ---------------------------------------------------------------------------
# Corpus files: one JSON object per line


def save_corpus(corpus, path):
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for test in corpus:
            fh.write(json.dumps(test.to_dict(), separators=(",", ":")))
            fh.write("\n")


def load_corpus(path) -> list:
    path = Path(path)
    tests = []
    seen = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                if not isinstance(rec, dict) or set(rec) != {"test_id", "txns"}:
                    raise ValueError("record must have exactly the keys test_id and txns")
                tid = rec["test_id"]
                if not isinstance(tid, int) or isinstance(tid, bool):
                    raise ValueError("test_id must be an integer")
                if not isinstance(rec["txns"], list) or not rec["txns"]:
                    raise ValueError("txns must be a non-empty list")
                txns = tuple(Transaction.from_dict(t) for t in rec["txns"])
            except (ValueError, TypeError, KeyError) as exc:
                raise CorpusParseError(str(exc), line=lineno) from None
            if tid in seen:
                raise CorpusParseError(f"duplicate test_id {tid}", line=lineno)
            seen.add(tid)
            tests.append(Test(test_id=tid, txns=txns))
    if not tests:
        raise CorpusParseError(f"empty corpus: {path}")
    return tests
