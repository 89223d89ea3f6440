import random

from hypothesis import given, settings
from hypothesis import strategies as st

from sscas.core import (
    BOTTOM_TRIPLE,
    FINALIZED_PHASES,
    STORED_PHASES,
    T0,
    Phase,
    QuorumConfig,
    Record,
    Request,
    Tag,
    TagTriple,
)
from sscas.server import ServerState, upgrade_phase

CFG = QuorumConfig(5, 1, 1, 1)
PRE, FIN, FINAL, QRY = Phase.PRE, Phase.FIN, Phase.FINALIZED, Phase.QRY


def server(records=(), **kw):
    srv = ServerState(1, CFG, default_element=0, **kw)
    srv.storage = {r.tag: r for r in records}
    return srv


def test_max_phase():
    assert server().max_phase(FINALIZED_PHASES) == T0
    srv = server([Record(Tag(2, 1), 5, PRE)])
    assert srv.max_phase(FINALIZED_PHASES) == T0
    srv = server([Record(Tag(2, 1), 5, PRE), Record(Tag(1, 3), None, FINAL)])
    assert srv.max_phase(STORED_PHASES) == Tag(2, 1)
    assert srv.max_phase(FINALIZED_PHASES) == Tag(1, 3)


def test_upgrade_phase():
    assert upgrade_phase(PRE, FIN) == FIN
    assert upgrade_phase(FINAL, PRE) == FINAL
    assert upgrade_phase(FIN, FINAL) == FINAL


def test_update_phase():
    t = Tag(2, 1)
    srv = server([Record(t, 7, PRE)])
    srv.update_phase(t, None, FIN)
    assert srv.storage == {t: Record(t, 7, FIN)}
    srv = server()
    srv.update_phase(t, None, FIN)
    assert srv.storage == {t: Record(t, None, FIN)}
    srv = server([Record(t, 7, FINAL)])
    srv.update_phase(t, None, PRE)
    assert srv.storage == {t: Record(t, 7, FINAL)}


@given(st.lists(st.tuples(st.integers(1, 4), st.one_of(st.none(), st.integers(0, 9)),
                          st.sampled_from([PRE, FIN, FINAL]))))
def test_update_phase_never_downgrades(updates):
    srv = server()
    for z, w, u in updates:
        t = Tag(z, 1)
        before = srv.storage.get(t)
        srv.update_phase(t, w, u)
        after = srv.storage[t]
        if before is not None:
            assert after.phase >= before.phase
            if before.element is not None and w is None:
                assert after.element == before.element


def test_query():
    t = Tag(2, 1)
    srv = server([Record(t, 3, PRE)])
    assert srv.on_query("reader") == (T0, None, QRY)
    assert srv.on_query("writer") == (t, None, QRY)


def test_writer_query_suspended_at_top():
    srv = server([Record(Tag(4, 5), 3, FIN)], bounded=True, maxint=4)
    assert srv.on_query("writer") is None
    assert srv.on_query("reader") is not None


def test_prewrite():
    t = Tag(1, 2)
    srv = server()
    assert srv.on_prewrite(t, 6) == (t, None, PRE)
    assert srv.storage[t] == Record(t, 6, PRE)
    srv.on_prewrite(t, 6)
    assert srv.storage == {t: Record(t, 6, PRE)}


def test_prewrite_after_fin_adopts_element():
    t = Tag(1, 2)
    srv = server([Record(t, None, FIN)])
    srv.on_prewrite(t, 6)
    assert srv.storage[t] == Record(t, 6, FIN)


def test_finalize():
    t = Tag(2, 1)
    srv = server([Record(t, 7, PRE)])
    assert srv.on_finalize(t, FIN, "reader") == (t, 7, FIN)
    assert srv.storage[t].phase == FIN
    srv = server()
    assert srv.on_finalize(t, FIN, "reader") == (t, None, FIN)
    assert srv.storage[t] == Record(t, None, FIN)
    srv = server([Record(t, 7, FIN)])
    srv.on_finalize(t, FINAL, "writer")
    assert srv.storage[t].phase == FINAL


def test_finalize_t0_returns_default():
    srv = ServerState(1, CFG, default_element=42)
    assert srv.on_finalize(T0, FIN, "reader") == (T0, 42, FIN)
    assert srv.storage == {}


def test_handle_dispatch():
    srv = server()
    t = Tag(1, 1)
    assert srv.handle(Request(None, None, QRY, "writer")) == (T0, None, QRY)
    assert srv.handle(Request(t, 9, PRE, "writer")) == (t, None, PRE)
    srv.enabled = False
    assert srv.handle(Request(None, None, QRY, "writer")) is None


def test_gossip_safe_start():
    srv = server()
    out, reset = srv.on_gossip({k: BOTTOM_TRIPLE for k in range(1, 6)})
    assert out == BOTTOM_TRIPLE and reset is None and srv.storage == {}


def test_gossip_quorum_finalizes():
    t = Tag(3, 2)
    srv = server()
    incoming = {k: TagTriple(t, t, T0) for k in (2, 3, 4, 5)}
    out, _ = srv.on_gossip(incoming)
    assert out.FIN == t
    assert srv.storage[t].phase == FINAL


def test_gossip_absorbs_max_pre():
    srv = server()
    out, _ = srv.on_gossip({2: TagTriple(Tag(9, 1), T0, T0)})
    assert out.pre == Tag(9, 1)
    assert srv.storage[Tag(9, 1)] == Record(Tag(9, 1), None, PRE)


def test_gossip_below_quorum_does_not_finalize():
    t = Tag(3, 2)
    srv = server()
    out, _ = srv.on_gossip({k: TagTriple(t, t, T0) for k in (2, 3)})
    assert out.fin == t and out.FIN == T0


def test_relevant_single_record():
    r = Record(Tag(1, 1), 3, PRE)
    assert server([r]).relevant() == {r.tag: r}


def test_relevant_distinct_owners_kept():
    records = [Record(Tag(4, j), j, FIN) for j in range(1, 6)]
    assert len(server(records, delta=0).relevant()) == 5


def test_relevant_per_owner_chain():
    records = [Record(Tag(z, 1), z, PRE) for z in range(1, 8)]
    kept = server(records, delta=2).relevant()
    # the top tag stays as not yet finalized, and the 3 best implicitly
    # finalized ones survive
    assert sorted(t.z for t in kept) == [4, 5, 6, 7]


def stale_storage(rng, size=100, ceiling=50):
    records = {}
    for _ in range(size):
        t = Tag(rng.randrange(1, ceiling), rng.randrange(1, 6))
        records[t] = Record(t, rng.randrange(257), rng.choice([PRE, FIN, FINAL]))
    return records


@settings(max_examples=50)
@given(st.integers(0, 10**6), st.sampled_from([0, 2]))
def test_gc_bound_and_idempotence(seed, delta):
    srv = ServerState(1, CFG, delta=delta, bounded=True)
    srv.storage = stale_storage(random.Random(seed))
    srv.gc()
    assert len(srv.storage) <= CFG.n + delta + 3
    once = dict(srv.storage)
    srv.gc()
    assert srv.storage == once
    # the maxima survive
    assert srv.max_phase() == max(once)


def test_gc_keeps_small_relevant_storage():
    records = [Record(Tag(1, 1), 3, FINAL), Record(Tag(2, 2), 4, PRE)]
    srv = server(records, bounded=True, delta=2)
    srv.gc()
    assert set(srv.storage) == {Tag(1, 1), Tag(2, 2)}


def test_overflow_check():
    srv = server([Record(Tag(2, 1), 1, FINAL)], bounded=True, maxint=4)
    assert srv.overflow_check() is None
    t1, t2 = Tag(4, 5), Tag(3, 2)
    srv = server([Record(t1, None, PRE), Record(t2, 8, FINAL)], bounded=True, maxint=4)
    mine = srv.tag_tuple()
    assert mine == TagTriple(t1, t2, t2)
    srv.gossip = {k: mine for k in range(1, 6)}
    assert srv.overflow_check() == t2
    srv.gossip[3] = TagTriple(Tag(99, 1), t2, t2)
    assert srv.overflow_check() is None


def test_local_reset():
    t = Tag(7, 3)
    srv = server([Record(t, 9, FIN), Record(Tag(8, 1), 2, PRE), Record(Tag(2, 2), 1, FINAL)])
    srv.local_reset(t)
    assert srv.storage == {Tag(1, 3): Record(Tag(1, 3), 9, FINAL)}
    srv.local_reset(Tag(1, 3))
    assert srv.storage == {Tag(1, 3): Record(Tag(1, 3), 9, FINAL)}
    srv.local_reset(T0)
    assert srv.storage == {}
