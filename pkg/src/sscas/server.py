"""Server state machine: record storage, request handlers, gossip merging,
relevance-based garbage collection and overflow detection."""

import hashlib

from .core import (
    BOTTOM_TRIPLE,
    FINALIZED_PHASES,
    STORED_PHASES,
    T0,
    Phase,
    Record,
    Reply,
    TagTriple,
    Tag,
    quorum_size,
    top_tag,
)

ALL_PHASES = STORED_PHASES
FIN_ONLY = frozenset({Phase.FINALIZED})


def upgrade_phase(old, new):
    """Phases only climb the ladder pre -> fin -> FIN."""
    return max(old, new)


class ServerState:
    """One server. Handlers mutate ``storage`` and return the reply to send,
    or None when the request must stay unanswered."""

    def __init__(self, sid, cfg, default_element=0, bounded=False, delta=0, maxint=None):
        self.id = sid
        self.cfg = cfg
        self.default_element = default_element
        self.bounded = bounded
        self.delta = delta
        self.maxint = maxint
        self.storage = {}
        self.gossip = {k: BOTTOM_TRIPLE for k in range(1, cfg.n + 1)}
        self.enabled = True

    @property
    def storage(self):
        return self._storage

    @storage.setter
    def storage(self, records):
        self._storage = records
        self._max_cache = {}
        self._merged = None

    @property
    def t_top(self):
        if self.maxint is None:
            return None
        return top_tag(self.maxint, self.cfg.n)

    @property
    def storage_bound(self):
        return self.cfg.n + self.delta + 3

    # local functions

    def max_phase(self, phases=ALL_PHASES):
        best = self._max_cache.get(phases)
        if best is None:
            best = max((r.tag for r in self._storage.values() if r.phase in phases), default=T0)
            self._max_cache[phases] = best
        return best

    def tag_tuple(self):
        return TagTriple(
            self.max_phase(ALL_PHASES),
            self.max_phase(FINALIZED_PHASES),
            self.max_phase(FIN_ONLY),
        )

    def update_phase(self, t, w, u):
        if t is None or t is T0:
            return
        rec = self._storage.get(t)
        if rec is None:
            new = Record(t, w, u)
        else:
            element = rec.element if w is None else w
            new = Record(t, element, upgrade_phase(rec.phase, u))
            if new == rec:
                return
        self._storage[t] = new
        self._max_cache = {}
        self._merged = None

    # request handlers

    def handle(self, req):
        """Dispatch a client request; returns a Reply or None."""
        if not self.enabled or req is None:
            return None
        if req.phase == Phase.QRY:
            reply = self.on_query(req.kind)
        elif req.tag is None:
            reply = None
        elif req.phase == Phase.PRE:
            word = req.word if isinstance(req.word, int) else None
            reply = self.on_prewrite(req.tag, word)
        else:
            reply = self.on_finalize(req.tag, req.phase, req.kind)
        if self.bounded:
            self.gc()
        return reply

    def on_query(self, kind):
        if kind == "reader":
            return Reply(self.max_phase(FINALIZED_PHASES), None, Phase.QRY)
        top = self.max_phase(ALL_PHASES)
        if self.bounded and self.maxint is not None and top >= self.t_top:
            return None  # writes are suspended until a global reset
        return Reply(top, None, Phase.QRY)

    def on_prewrite(self, t, w):
        self.update_phase(t, w, Phase.PRE)
        return Reply(t, None, Phase.PRE)

    def on_finalize(self, t, d, kind):
        self.update_phase(t, None, d)
        if kind != "reader":
            return Reply(t, None, d)
        if t is T0:
            return Reply(t, self.default_element, d)
        rec = self.storage.get(t)
        return Reply(t, rec.element if rec else None, d)

    def on_gossip(self, incoming):
        """Merge the latest triple received from every peer.

        Returns ``(triple_to_gossip, reset_tag)``; ``reset_tag`` is not None
        when the overflow condition asks for a global reset.
        """
        if not self.enabled:
            return None, None
        i = self.id
        g = self.gossip
        fresh = False
        for k, triple in incoming.items():
            if k != i and triple is not None and g[k] != triple:
                g[k] = triple
                fresh = True
        if not fresh and self._merged is not None and g is self._merged[0]:
            # nothing new since the last merge: same outcome
            return self._merged[1]
        slots = list(g.values())

        pre = max([c for s in slots for c in s] + [self.max_phase(ALL_PHASES)])
        g[i] = TagTriple(pre, g[i].fin, g[i].FIN)
        self.update_phase(pre, None, Phase.PRE)

        slots = list(g.values())
        fin = max([c for s in slots for c in (s.fin, s.FIN)] + [self.max_phase(FINALIZED_PHASES)])
        g[i] = TagTriple(g[i].pre, fin, g[i].FIN)
        self.update_phase(fin, None, Phase.FIN)

        slots = list(g.values())
        candidates = [s.FIN for s in slots] + [self.max_phase(FIN_ONLY)]
        q = quorum_size(self.cfg)
        counts = {}
        for s in slots:
            counts[s.fin] = counts.get(s.fin, 0) + 1
        candidates += [t for t, c in counts.items() if c >= q]
        fin_max = max(candidates)
        g[i] = TagTriple(g[i].pre, g[i].fin, fin_max)
        self.update_phase(fin_max, None, Phase.FINALIZED)

        out = self.tag_tuple()
        g[i] = out
        reset_tag = None
        if self.bounded:
            reset_tag = self.overflow_check()
            if reset_tag is None:
                self.gc()
        self._merged = (g, (out, reset_tag))
        return out, reset_tag

    # bounded extension

    def relevant(self):
        """Records a bounded server must keep (at most N + delta + 3)."""
        if not self.storage:
            return {}
        tags = sorted(self.storage, reverse=True)
        keep = {tags[0]}
        fins = [t for t in tags if self.storage[t].phase in FINALIZED_PHASES]
        if fins:
            keep.add(fins[0])
        explicit = [t for t in tags if self.storage[t].phase == Phase.FINALIZED]
        if explicit:
            keep.add(explicit[0])
        top_by_owner = {}
        for t in tags:
            top_by_owner.setdefault(t.owner, t)
        finalized = [
            t for t in tags
            if self.storage[t].phase == Phase.FINALIZED or top_by_owner[t.owner] != t
        ]
        keep.update(finalized[: self.delta + 1])
        fin_set = set(finalized)
        keep.update(t for t in top_by_owner.values() if t not in fin_set)
        return {t: self.storage[t] for t in keep}

    def gc(self):
        kept = self.relevant()
        if len(kept) != len(self._storage):
            self.storage = kept

    def overflow_check(self):
        """Tag to reset to when every view agrees past the counter limit."""
        if self.maxint is None:
            return None
        mine = self.tag_tuple()
        if mine.pre < self.t_top:
            return None
        if any(view != mine for view in self.gossip.values()):
            return None
        if mine.fin != mine.FIN or mine.pre < mine.fin:
            return None
        return self.max_phase(FINALIZED_PHASES)

    def local_reset(self, t):
        rec = self.storage.get(t) if t is not None and t is not T0 else None
        if rec is None:
            self.storage = {}
        else:
            renamed = Tag(1, t.owner)
            self.storage = {renamed: Record(renamed, rec.element, Phase.FINALIZED)}
        self.gossip = {k: BOTTOM_TRIPLE for k in self.gossip}

    def crash_restart(self):
        """Resume after a crash: all stored records are gone."""
        self.storage = {}
        self.gossip = {k: BOTTOM_TRIPLE for k in self.gossip}
        self.enabled = True

    def digest(self):
        text = repr(sorted((repr(r.tag), r.element, int(r.phase)) for r in self.storage.values()))
        return hashlib.sha1(text.encode()).hexdigest()[:12]
