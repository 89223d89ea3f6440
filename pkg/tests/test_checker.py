import random

from hypothesis import given, settings
from hypothesis import strategies as st

from sscas.checker import (
    Op,
    Verdict,
    build_history,
    check_atomicity,
    check_comm,
    check_gossip_monotone,
    check_linearizable,
    check_liveness,
    check_storage_bound,
    linearizable,
    measure_recovery,
    run_checks,
)
from sscas.core import T0, Tag
from sscas.sim import Event, Simulator, workload


def w(op_id, value, tag, start, end, node=1):
    return Op(op_id, node, "write", value, start, end, tag=tag, status="complete", order=(0, tag))


def r(op_id, value, tag, start, end, node=4):
    return Op(op_id, node, "read", value, start, end, tag=tag, status="complete", order=(0, tag))


def test_sequential_write_read_passes():
    h = [w(0, 5, Tag(1, 1), 0, 10), r(1, 5, Tag(1, 1), 11, 20)]
    assert check_atomicity(h).ok
    assert linearizable(h)


def test_stale_read_after_overwrite_fails():
    h = [w(0, 5, Tag(1, 1), 0, 10), w(1, 6, Tag(2, 1), 11, 20), r(2, 5, Tag(1, 1), 21, 30)]
    verdict = check_atomicity(h)
    assert not verdict.ok and "precedes" in verdict.detail
    assert not linearizable(h)


def test_read_of_unknown_tag_fails():
    h = [w(0, 5, Tag(1, 1), 0, 10), r(1, 5, Tag(3, 3), 11, 20)]
    assert not check_atomicity(h).ok


def test_read_value_mismatch_fails():
    h = [w(0, 5, Tag(1, 1), 0, 10), r(1, 6, Tag(1, 1), 11, 20)]
    assert not check_atomicity(h).ok
    assert not linearizable(h)


def test_none_reads_are_ignored():
    h = [w(0, 5, Tag(1, 1), 0, 10), r(1, None, Tag(1, 1), 5, 20)]
    assert check_atomicity(h).ok and linearizable(h)


def test_concurrent_overlap_either_order():
    h = [w(0, 5, Tag(1, 1), 0, 10), r(1, 0, T0, 2, 8)]
    assert check_atomicity(h).ok
    assert linearizable(h)


def test_incomplete_write_may_take_effect():
    pending = Op(0, 1, "write", 7, 0, tag=Tag(1, 1), status="failed", order=(0, Tag(1, 1)))
    h = [pending, r(1, 7, Tag(1, 1), 5, 9)]
    assert check_atomicity(h).ok and linearizable(h)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6))
def test_brute_force_agrees_on_small_runs(seed):
    sc = workload(seed, ops=2, max_delay=300)
    trace = Simulator(sc).run()
    history = build_history(trace)
    assert check_atomicity(history).ok
    assert check_linearizable(history).ok


def ev(step, node, event, **data):
    return Event(step, 0, node, event, data)


INIT = ev(0, 0, "init", n=5, k=1, e=1, f=1, delta=0, channels=[])


def test_storage_bound():
    ok = [INIT, ev(0, 1, "store", size=100), ev(3, 1, "store", size=8)]
    assert check_storage_bound(ok).ok
    bad = ok + [ev(4, 2, "store", size=9)]
    assert not check_storage_bound(bad).ok
    assert check_storage_bound(bad, delta=2).ok


def test_gossip_monotone():
    up = [ev(1, 1, "gossip_send", to=2, triple=["1.1", "t0", "t0"]),
          ev(2, 1, "gossip_send", to=3, triple=["2.1", "1.1", "t0"])]
    assert check_gossip_monotone(up).ok
    down = up + [ev(3, 1, "gossip_send", to=2, triple=["1.1", "1.1", "t0"])]
    assert not check_gossip_monotone(down).ok
    assert check_gossip_monotone(down, since=3).ok


def test_comm_rejects_forged_gossip():
    trace = [INIT, ev(5, 2, "gossip_recv", frm=1, triple=["9.9", "t0", "t0"])]
    assert not check_comm(trace).ok
    assert check_comm(trace, since=6).ok


def test_comm_and_liveness_on_real_run():
    trace = Simulator(workload(2, ops=3)).run()
    assert check_comm(trace).ok
    assert check_liveness(trace).ok


def test_liveness_flags_stuck_ops():
    trace = [INIT, ev(1, 1, "invoke", op=0, kind="write", value=1, init_max="t0"),
             ev(9, 0, "end", complete=False)]
    verdict = check_liveness(trace)
    assert not verdict.ok and "budget" in verdict.detail


def test_recovery_on_safe_start_is_first_write():
    sim = Simulator(workload(4, ops=2, crash=False, malicious=False))
    trace = sim.run()
    cycles, step, op = measure_recovery(trace)
    first = min((o for o in build_history(trace) if o.kind == "write" and o.complete), key=lambda o: o.response)
    assert op.op_id == first.op_id and cycles == first.response_cycle + 1


def test_run_checks_lines():
    trace = Simulator(workload(1, ops=2)).run()
    verdicts = run_checks(trace, ["atomicity", "liveness", "storage"])
    assert [v.line() for v in verdicts] == [
        "CHECK atomicity PASS", "CHECK liveness PASS", "CHECK storage PASS"]
    assert Verdict("x", False).line() == "CHECK x FAIL"


def test_liveness_flags_reads_without_elements():
    call = ev(2, 4, "qrm_call", rid=2, req=["1.1", None, "fin", "reader", 2])
    ret = ev(3, 4, "qrm_return", op=0, replies={str(j): ["1.1", None, "fin"] for j in (1, 2, 3, 4)})
    trace = [INIT, call, ret, ev(4, 0, "end", complete=True)]
    assert not check_liveness(trace).ok


def test_trace_payloads_use_phase_labels():
    trace = Simulator(workload(1, ops=1)).run()
    calls = [e.data["req"][2] for e in trace if e.kind == "qrm_call"]
    assert set(calls) <= {"qry", "pre", "fin", "FIN"} and "fin" in calls
