"""Tags, phases, records and quorum arithmetic shared by the other modules."""

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import NamedTuple, Optional, Tuple, Union


class Bottom:
    """The bottom tag ``t0``: smaller than every real tag.

    Kept as its own type (not ``(0, 0)``) so a corrupted tag can never be
    mistaken for it.
    """

    _instance = None
    z = 0
    owner = 0

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "t0"

    def __reduce__(self):
        return (Bottom, ())

    def __hash__(self):
        return hash("t0")

    def __eq__(self, other):
        return other is self

    def __ne__(self, other):
        return other is not self

    def __lt__(self, other):
        return isinstance(other, Tag)

    def __le__(self, other):
        return other is self or isinstance(other, Tag)

    def __gt__(self, other):
        return False

    def __ge__(self, other):
        return other is self


T0 = Bottom()


class Tag(NamedTuple):
    """A write version ``(z, owner)`` ordered by counter, then by owner id."""

    z: int
    owner: int

    def __repr__(self):
        return f"{self.z}.{self.owner}"

    def __lt__(self, other):
        if other is T0:
            return False
        return tuple.__lt__(self, other)

    def __le__(self, other):
        if other is T0:
            return False
        return tuple.__le__(self, other)

    def __gt__(self, other):
        if other is T0:
            return True
        return tuple.__gt__(self, other)

    def __ge__(self, other):
        if other is T0:
            return True
        return tuple.__ge__(self, other)


AnyTag = Union[Tag, Bottom]


def tag_less(a, b):
    return a < b


def tag_successor(t, writer):
    """Tag the writer uses after observing ``t`` as the maximum."""
    return Tag(t.z + 1, writer)


def format_tag(t):
    if t is None:
        return "-"
    return repr(t)


def parse_tag(text):
    text = text.strip()
    if text == "t0":
        return T0
    if text == "-":
        return None
    z, owner = text.split(".")
    return Tag(int(z), int(owner))


class Phase(IntEnum):
    """Record phases in ladder order; QRY only appears on the wire."""

    PRE = 0
    FIN = 1  # "fin": finalized
    FINALIZED = 2  # "FIN": known finalized at a quorum
    QRY = 3

    @property
    def label(self):
        return _PHASE_LABELS[self]

    @classmethod
    def from_label(cls, text):
        for phase, name in _PHASE_LABELS.items():
            if name == text:
                return phase
        raise ValueError(f"unknown phase {text!r}")

    def __repr__(self):
        return self.label


_PHASE_LABELS = {
    Phase.PRE: "pre",
    Phase.FIN: "fin",
    Phase.FINALIZED: "FIN",
    Phase.QRY: "qry",
}

STORED_PHASES = frozenset({Phase.PRE, Phase.FIN, Phase.FINALIZED})
FINALIZED_PHASES = frozenset({Phase.FIN, Phase.FINALIZED})


class Record(NamedTuple):
    tag: AnyTag
    element: Optional[int]
    phase: Phase


class TagTriple(NamedTuple):
    """Gossiped maxima: over all phases, over fin/FIN, and over FIN only."""

    pre: AnyTag
    fin: AnyTag
    FIN: AnyTag


BOTTOM_TRIPLE = TagTriple(T0, T0, T0)


class Request(NamedTuple):
    """Client request as carried by the ping token.

    ``word`` is either a single element, ``None``, or a tuple of N elements
    (one per server, see ``load``). ``rid`` numbers the client's requests so
    a reply to an older request with identical content is never reused.
    """

    tag: Optional[AnyTag]
    word: Union[None, int, Tuple[Optional[int], ...]]
    phase: Phase
    kind: str  # "reader" or "writer"
    rid: int = 0


class Reply(NamedTuple):
    tag: Optional[AnyTag]
    word: Optional[int]
    phase: Phase


@dataclass(frozen=True)
class QuorumConfig:
    n: int
    f: int
    e: int
    k: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one server")
        if self.f < 0 or self.e < 0:
            raise ValueError("fault counts must be non-negative")
        if not 1 <= self.k <= self.n - 2 * (self.f + self.e):
            raise ValueError(
                f"k={self.k} outside 1..N-2(f+e)={self.n - 2 * (self.f + self.e)}"
            )

    @property
    def quorum(self):
        return quorum_size(self)


def quorum_size(cfg):
    return math.ceil((cfg.n + cfg.k + 2 * cfg.e) / 2)


def is_quorum(nodes, cfg):
    return len(set(nodes)) >= quorum_size(cfg)


def k_threshold(cfg):
    """Element-bearing replies a reader needs before decoding."""
    return cfg.k + 2 * cfg.e


def top_tag(maxint, n):
    """Largest tag that can be formed with counter ``maxint``."""
    return Tag(maxint, n)
