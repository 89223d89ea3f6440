"""Offline checks over simulator traces."""

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

from .core import T0, Tag, parse_tag
from .sim import CycleCounter, parse_key

INF = float("inf")


class Verdict(NamedTuple):
    name: str
    ok: bool
    detail: str = ""

    def line(self):
        return f"CHECK {self.name} {'PASS' if self.ok else 'FAIL'}"


@dataclass
class Op:
    op_id: object
    node: int
    kind: str
    value: Optional[int] = None
    invoke: float = -1
    response: float = INF
    invoke_cycle: int = 0
    response_cycle: Optional[int] = None
    tag: object = None
    status: str = "incomplete"  # complete, failed, incomplete, phantom
    init_max: object = T0
    epoch: int = 0
    order: object = None  # (epoch, tag) with tags renamed by resets mapped back

    @property
    def complete(self):
        return self.status == "complete"

    def __repr__(self):
        return (f"Op({self.op_id} n{self.node} {self.kind} v={self.value} tag={self.tag} "
                f"[{self.invoke},{self.response}] {self.status})")


def reset_tags(trace):
    """Tag each global reset wave kept, in order (None for an empty reset)."""
    waves = []
    open_wave = False
    for ev in trace:
        if ev.kind == "reset_freeze" and not open_wave:
            open_wave = True
            waves.append(None)
        elif ev.kind == "reset_resume" and open_wave:
            t = parse_tag(ev.data.get("tag", "-"))
            if t is not None and t is not T0 and (waves[-1] is None or t > waves[-1]):
                waves[-1] = t
        elif ev.kind == "reset_done":
            open_wave = False
    return waves


def canonical(epoch, tag, waves):
    """Order key of ``tag`` seen in ``epoch``: a record renamed to ``(1, o)``
    by a reset stands for the tag it was renamed from."""
    while epoch > 0 and tag is not None:
        src = waves[epoch - 1]
        if src is None or tag != Tag(1, src.owner):
            break
        epoch, tag = epoch - 1, src
    if tag is T0:
        epoch = 0
    return (epoch, tag)


def build_history(trace):
    """Operations keyed by id, in invocation order."""
    ops = {}
    epoch = 0
    open_wave = False
    for ev in trace:
        d = ev.data
        if ev.kind == "reset_freeze" and not open_wave:
            open_wave = True
            epoch += 1
        elif ev.kind == "reset_done":
            open_wave = False
        elif ev.kind == "invoke":
            ops[d["op"]] = Op(d["op"], ev.node, d["kind"], d.get("value"), ev.step,
                              invoke_cycle=ev.cycle, init_max=parse_tag(d.get("init_max", "t0")),
                              epoch=epoch)
        elif ev.kind == "phantom":
            op = Op(d["op"], ev.node, d["kind"], d.get("value"), status="phantom")
            op.tag = parse_tag(d["tag"])
            ops[d["op"]] = op
        elif ev.kind == "op_tag" and d["op"] in ops:
            ops[d["op"]].tag = parse_tag(d["tag"])
            ops[d["op"]].value = d.get("value")
        elif ev.kind == "respond" and d["op"] in ops:
            op = ops[d["op"]]
            if op.status == "phantom":
                continue
            op.response = ev.step
            op.response_cycle = ev.cycle
            op.status = "complete"
            op.tag = parse_tag(d["tag"])
            if op.kind == "read":
                op.value = d["result"]
        elif ev.kind == "fail" and d["op"] in ops:
            if ops[d["op"]].status != "phantom":
                ops[d["op"]].status = "failed"
    waves = reset_tags(trace)
    for op in ops.values():
        if op.tag is not None:
            op.order = canonical(op.epoch, op.tag, waves)
    return list(ops.values())


def _write_values(history, v0):
    values = {(0, T0): v0}
    for op in history:
        if op.kind == "write" and op.order is not None and op.value is not None:
            values.setdefault(op.order, op.value)
    return values


def check_atomicity(history, v0=0, since=None):
    """Tag-based atomicity check.

    Operations are ordered by ``Op.order``, their tag qualified by the reset
    epoch. Reads returning None (the reader's "no value") are left out.
    ``since`` restricts the real-time checks to operations invoked at or
    after that step, while every write still provides its tag/value pair.
    """
    writes_by_tag = {}
    for op in history:
        if op.kind == "write" and op.order is not None and op.status != "phantom":
            other = writes_by_tag.get(op.order)
            if other is not None and other.op_id != op.op_id:
                return Verdict("atomicity", False, f"tag {op.tag} used by {other} and {op}")
            writes_by_tag[op.order] = op
    values = _write_values(history, v0)
    ops = [
        op for op in history
        if op.status != "phantom"
        and (since is None or op.invoke >= since)
        and not (op.kind == "read" and (not op.complete or op.value is None))
        and not (op.kind == "write" and op.order is None)
    ]
    for op in ops:
        if op.kind == "read":
            if op.order not in values:
                return Verdict("atomicity", False, f"{op} returns a tag no write produced")
            if values[op.order] != op.value:
                return Verdict("atomicity", False, f"{op} returns {op.value}, write of {op.tag} had {values[op.order]}")
    done = sorted((op for op in ops if op.complete), key=lambda o: o.response)
    for a in done:
        for b in ops:
            if b is a or a.response >= b.invoke:
                continue
            if b.order < a.order or (b.kind == "write" and b.order == a.order):
                return Verdict("atomicity", False, f"{a} precedes {b} but is not ordered before it")
    return Verdict("atomicity", True, f"{len(ops)} operations")


def linearizable(history, v0=0):
    """Brute-force linearizability search for a read/write register.

    Complete writes and value-returning reads must be placed; failed or
    incomplete writes may take effect once or never. Exponential in the
    worst case, memoized on (placed set, current value).
    """
    ops = [
        op for op in history
        if op.status != "phantom"
        and (op.complete or op.kind == "write")
        and not (op.kind == "read" and op.value is None)
    ]
    ops.sort(key=lambda o: o.invoke)
    required = 0
    for idx, op in enumerate(ops):
        if op.complete:
            required |= 1 << idx
    n = len(ops)
    seen = set()

    def search(placed, value):
        if placed & required == required:
            return True
        key = (placed, value)
        if key in seen:
            return False
        seen.add(key)
        horizon = min(ops[i].response for i in range(n) if not placed >> i & 1 and ops[i].complete)
        for i in range(n):
            if placed >> i & 1:
                continue
            op = ops[i]
            if op.invoke > horizon:
                break
            if op.kind == "read":
                if op.value == value and search(placed | 1 << i, value):
                    return True
            elif search(placed | 1 << i, op.value):
                return True
        return False

    return search(0, v0)


def check_linearizable(history, v0=0):
    ok = linearizable(history, v0)
    return Verdict("linearizable", ok, "" if ok else "no linearization found")


def check_liveness(trace, k=None):
    """Every invoked operation of a client that did not crash completes, and
    reads collected at least ``k`` element-bearing replies."""
    history = build_history(trace)
    crashed = {ev.node for ev in trace if ev.kind == "crash"}
    ended = any(ev.kind == "end" and ev.data.get("complete") for ev in trace)
    stuck = [op for op in history if op.status == "incomplete" and op.node not in crashed]
    if stuck:
        return Verdict("liveness", False, f"stuck: {stuck[:3]}" + ("" if ended else " (budget exhausted)"))
    if k is None:
        k = _init(trace).get("k", 1)
    last = {}
    short = []
    for ev in trace:
        if ev.kind == "qrm_call":
            last[ev.node] = ev.data["req"]
        elif ev.kind == "qrm_return":
            req = last.get(ev.node)
            if req and req[2] == "fin" and req[3] == "reader":
                count = sum(1 for r in ev.data["replies"].values() if r and r[1] is not None)
                if count < k:
                    short.append((ev.step, ev.node, count))
    if short:
        return Verdict("liveness", False, f"reads with fewer than {k} elements: {short[:3]}")
    return Verdict("liveness", True, f"{len(history)} operations")


def _init(trace):
    for ev in trace:
        if ev.kind == "init":
            return ev.data
    return {}


def check_storage_bound(trace, delta=None, n=None, since=None):
    """Every storage snapshot after a server's first handler respects
    ``N + delta + 3``."""
    info = _init(trace)
    delta = info.get("delta", 2) if delta is None else delta
    n = info.get("n") if n is None else n
    bound = n + delta + 3
    worst = 0
    for ev in trace:
        if ev.kind != "store" or ev.step == 0:
            continue
        if since is not None and ev.step < since:
            continue
        worst = max(worst, ev.data["size"])
        if ev.data["size"] > bound:
            return Verdict("storage", False, f"server {ev.node} holds {ev.data['size']} > {bound} records at step {ev.step}")
    return Verdict("storage", True, f"max {worst} <= {bound}")


def count_cycles(trace, since=None):
    """Replay the trace through the cycle counter; returns the step at which
    each asynchronous cycle ends. With ``since``, counting restarts at the
    first event of that step."""
    info = _init(trace)
    keys = [parse_key(k) for k in info.get("channels", [])]
    nodes = range(1, info.get("n", 0) + 1)
    counter = CycleCounter(keys, nodes)
    restarted = since is None
    for ev in trace:
        if not restarted and ev.step >= since:
            restarted = True
            counter._start()
            counter.boundaries = []
        kind = ev.kind
        if kind == "deliver":
            counter.deliver(parse_key(ev.data["ch"]), ev.step)
        elif kind == "invoke":
            counter.op_started(ev.node)
            counter.client_round(ev.node, ev.step)
        elif kind == "phantom":
            counter.op_started(ev.node)
        elif kind == "qrm_return":
            counter.client_round(ev.node, ev.step)
        elif kind in ("respond", "fail"):
            counter.op_ended(ev.node, ev.step)
        elif kind == "crash":
            counter.crash(ev.node, ev.step)
        elif kind == "resume":
            counter.resume(ev.node)
    return counter.boundaries


def measure_resets(trace):
    """For every global reset: ``(freeze_step, done_step, cycles)``, where
    ``cycles`` counts asynchronous cycles from the first freeze, the last
    one partial. ``done_step`` is None for a reset still running."""
    out = []
    start = None
    for ev in trace:
        if ev.kind == "reset_freeze" and start is None:
            start = ev.step
        elif ev.kind == "reset_done" and start is not None:
            bounds = count_cycles(trace, since=start)
            out.append((start, ev.step, 1 + sum(b < ev.step for b in bounds)))
            start = None
    if start is not None:
        out.append((start, None, INF))
    return out


def measure_recovery(trace):
    """Cycles until the first complete write whose tag beats every tag left
    over from the initial state. Returns ``(cycles, step, op)`` or None."""
    for op in sorted(build_history(trace), key=lambda o: o.response):
        if op.kind != "write" or not op.complete:
            continue
        if op.tag is not None and op.tag > op.init_max:
            return op.response_cycle + 1, op.response, op
    return None


def check_recovery(trace, max_cycles, v0=0):
    rec = measure_recovery(trace)
    if rec is None:
        return Verdict("recovery", False, "no valid write completed")
    cycles, step, op = rec
    if cycles > max_cycles:
        return Verdict("recovery", False, f"legal after {cycles} cycles > {max_cycles}")
    verdict = check_atomicity(build_history(trace), v0, since=step)
    if not verdict.ok:
        return Verdict("recovery", False, "suffix: " + verdict.detail)
    return Verdict("recovery", True, f"legal after {cycles} cycles")


def check_gossip_monotone(trace, since=0):
    """Per server, each component of the gossiped triples never decreases."""
    last = {}
    for ev in trace:
        if ev.kind != "gossip_send" or ev.step < since:
            continue
        triple = [parse_tag(x) for x in ev.data["triple"]]
        prev = last.get(ev.node)
        if prev is not None and any(a < b for a, b in zip(triple, prev)):
            return Verdict("gossip", False, f"server {ev.node} went from {prev} to {triple} at step {ev.step}")
        last[ev.node] = triple
    return Verdict("gossip", True)


def check_comm(trace, since=0, quorum=None):
    """Quorum calls issued at or after ``since`` return only replies their
    servers really sent for that request, from a quorum; gossip received at
    or after ``since`` was really sent by the claimed peer."""
    info = _init(trace)
    if quorum is None:
        quorum = math.ceil((info["n"] + info["k"] + 2 * info["e"]) / 2)
    calls = {}
    sent_replies = {}
    sent_gossip = set()
    for ev in trace:
        d = ev.data
        if ev.kind == "qrm_call":
            calls[ev.node] = (ev.step, d["rid"], d["req"])
        elif ev.kind == "reply":
            sent_replies.setdefault((d["client"], d["rid"]), []).append((ev.step, ev.node, d["req"], d["reply"]))
        elif ev.kind == "qrm_return":
            call = calls.get(ev.node)
            if call is None or call[0] < since:
                continue
            step, rid, req = call
            replies = d["replies"]
            if len(replies) < quorum:
                return Verdict("comm", False, f"client {ev.node} returned {len(replies)} replies at step {ev.step}")
            genuine = {
                (node, _norm(reply))
                for s, node, r, reply in sent_replies.get((ev.node, rid), [])
                if s >= step and r[0] == req[0] and r[2:] == req[2:]
            }
            for j, reply in replies.items():
                if (int(j), _norm(reply)) not in genuine:
                    return Verdict("comm", False, f"client {ev.node} got {reply} from {j} at step {ev.step} that was never sent")
        elif ev.kind == "gossip_send":
            sent_gossip.add((ev.node, d["to"], tuple(d["triple"])))
        elif ev.kind == "gossip_recv" and ev.step >= since:
            if (d["frm"], ev.node, tuple(d["triple"])) not in sent_gossip:
                return Verdict("comm", False, f"server {ev.node} got {d['triple']} from {d['frm']} at step {ev.step} that was never sent")
    return Verdict("comm", True)


def _norm(reply):
    return tuple(reply) if isinstance(reply, list) else reply


CHECKS = ("atomicity", "liveness", "storage", "recovery", "gossip", "comm", "linearizable")


def run_checks(trace, names, v0=None, max_cycles=8):
    """Run the named checks over a trace; returns a list of verdicts."""
    info = _init(trace)
    v0 = info.get("v0", 0) if v0 is None else v0
    out = []
    for name in names:
        if name == "atomicity":
            out.append(check_atomicity(build_history(trace), v0))
        elif name == "linearizable":
            out.append(check_linearizable(build_history(trace), v0))
        elif name == "liveness":
            out.append(check_liveness(trace))
        elif name == "storage":
            out.append(check_storage_bound(trace))
        elif name == "recovery":
            out.append(check_recovery(trace, max_cycles, v0))
        elif name == "gossip":
            out.append(check_gossip_monotone(trace))
        elif name == "comm":
            out.append(check_comm(trace))
        else:
            raise ValueError(f"unknown check {name!r}")
    return out
