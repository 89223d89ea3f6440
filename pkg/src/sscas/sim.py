"""Seeded discrete-event simulator.

Nodes ``1..N`` each host a server, a client and a reset agent. A step either
delivers the token of one channel or lets an idle client invoke its next
scripted operation. Same scenario and seed give the same trace.
"""

import json
import random
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional

from .client import Client, Operation
from .coding import share_secret
from .comm import Channel, Comm
from .core import (
    BOTTOM_TRIPLE,
    FINALIZED_PHASES,
    T0,
    Phase,
    QuorumConfig,
    Record,
    Reply,
    Request,
    Tag,
    TagTriple,
    format_tag,
    top_tag,
)
from .reset import IDLE, MODES, ResetAgent
from .server import ServerState

DEFAULT_BUDGET = 10**6
SCHEDULERS = ("fair", "unfair", "seldom-fair")


class Event(NamedTuple):
    step: int
    cycle: int
    node: int
    kind: str
    data: dict


@dataclass
class Fault:
    kind: str  # crash, resume, malicious, starve, corrupt, reset
    node: int = 0
    at: int = 0
    arg: Optional[object] = None


@dataclass
class Scenario:
    n: int = 5
    f: int = 1
    e: int = 1
    k: int = 1
    p: int = 257
    maxint: Optional[int] = None
    delta: int = 2
    bounded: bool = False
    seed: int = 0
    sched: str = "fair"
    v0: int = 0
    budget: int = DEFAULT_BUDGET
    scripts: Dict[int, list] = field(default_factory=dict)
    faults: List[Fault] = field(default_factory=list)
    fair_window: int = 40

    @property
    def cfg(self):
        return QuorumConfig(self.n, self.f, self.e, self.k)

    def validate(self):
        cfg = self.cfg
        if self.n >= self.p:
            raise ValueError("field too small for N")
        if self.sched not in SCHEDULERS:
            raise ValueError(f"unknown scheduler {self.sched!r}")
        if self.n - self.f < cfg.quorum:
            raise ValueError("not enough servers survive f crashes")
        malicious = {x.node for x in self.faults if x.kind == "malicious"}
        if len(malicious) > self.e:
            raise ValueError("more malicious servers than e")
        down = set()
        for x in sorted(self.faults, key=lambda x: x.at):
            if x.kind == "crash":
                down.add(x.node)
                if len(down) > self.f:
                    raise ValueError("more concurrent crashes than f")
            elif x.kind == "resume":
                down.discard(x.node)
        for node in list(self.scripts) + [x.node for x in self.faults if x.node]:
            if not 1 <= node <= self.n:
                raise ValueError(f"node {node} outside 1..{self.n}")
        return self


class CycleCounter:
    """Asynchronous cycle boundaries.

    A cycle ends once every channel whose endpoints are alive made a round
    trip (two deliveries) and every live client with an operation finished a
    round: a quorum call returned, the operation ended, or each of its ping
    tokens made two round trips without an answer (the client is blocked).
    The same calls are replayed from a trace by ``checker.count_cycles``.
    """

    def __init__(self, channels, live_nodes):
        self.channels = list(channels)
        self.live_nodes = set(live_nodes)
        self.dead_clients = set()
        self.busy = set()
        self.cycle = 0
        self.boundaries = []
        self._start()

    def _channel_live(self, key):
        for role, node in key[1:]:
            if node not in self.live_nodes:
                return False
            if role == "c" and node in self.dead_clients:
                return False
        return True

    def _start(self):
        self.counts = {}
        self.pending = {k for k in self.channels if self._channel_live(k)}
        self.client_pending = {c for c in self.busy if c in self.live_nodes and c not in self.dead_clients}
        self.ping_counts = dict.fromkeys(self.client_pending, 0)

    def deliver(self, key, step):
        if key in self.pending:
            c = self.counts.get(key, 0) + 1
            self.counts[key] = c
            if c >= 2:
                self.pending.discard(key)
        if key[0] == "ping":
            client = key[1][1]
            if client in self.client_pending:
                self.ping_counts[client] += 1
                if self.ping_counts[client] >= 4 * len(self.live_nodes):
                    self.client_pending.discard(client)
        return self._check(step)

    def client_round(self, client, step):
        self.client_pending.discard(client)
        return self._check(step)

    def op_started(self, client):
        self.busy.add(client)

    def op_ended(self, client, step):
        self.busy.discard(client)
        return self.client_round(client, step)

    def crash(self, node, step):
        self.live_nodes.discard(node)
        self.dead_clients.add(node)
        self.busy.discard(node)
        self.pending = {k for k in self.pending if self._channel_live(k)}
        self.client_pending.discard(node)
        return self._check(step)

    def resume(self, node):
        self.live_nodes.add(node)

    def _check(self, step):
        if self.pending or self.client_pending:
            return False
        self.cycle += 1
        self.boundaries.append(step)
        self._start()
        return True


def _corrupt_tag(rng, ceiling, n):
    if rng.random() < 0.1:
        return T0
    return Tag(rng.randint(1, ceiling), rng.randint(1, n))


def _corrupt_element(rng, p):
    return None if rng.random() < 0.3 else rng.randrange(p)


def _corrupt_triple(rng, ceiling, n):
    return TagTriple(*(_corrupt_tag(rng, ceiling, n) for _ in range(3)))


def _corrupt_request(rng, ceiling, n, p):
    phase = rng.choice(list(Phase))
    if phase == Phase.PRE and rng.random() < 0.5:
        word = tuple(rng.randrange(p) for _ in range(n))
    else:
        word = _corrupt_element(rng, p)
    tag = None if phase == Phase.QRY else _corrupt_tag(rng, ceiling, n)
    return Request(tag, word, phase, rng.choice(("reader", "writer")), rng.randint(0, 5))


def _corrupt_reply(rng, ceiling, n, p):
    return Reply(_corrupt_tag(rng, ceiling, n), _corrupt_element(rng, p), rng.choice(list(Phase)))


def malicious_reply_filter(reply, p, rng):
    """Replace the element of an element-bearing reply by a different one;
    tag and phase stay untouched."""
    if reply is None or reply.word is None:
        return reply
    return reply._replace(word=(reply.word + 1 + rng.randrange(p - 1)) % p)


def _maybe(rng, make, p_none=0.3):
    return None if rng.random() < p_none else make()


class Simulator:
    def __init__(self, scenario, record_deliveries=True):
        self.sc = scenario.validate()
        sc = self.sc
        self.cfg = sc.cfg
        self.rng = random.Random(sc.seed)
        n = sc.n
        self.nodes = list(range(1, n + 1))
        _, v0_shares = share_secret(sc.v0, sc.k, n, sc.p, _ZeroRng())
        bounded = sc.bounded or sc.maxint is not None
        self.bounded = bounded
        self.servers = {
            j: ServerState(j, self.cfg, v0_shares[j - 1], bounded=bounded,
                           delta=sc.delta, maxint=sc.maxint)
            for j in self.nodes
        }
        self.clients = {i: Client(i, self.cfg, sc.p, random.Random(self.rng.random())) for i in self.nodes}
        self.comms = {i: Comm(i, self.cfg) for i in self.nodes}
        self.agents = {i: ResetAgent(i, self.nodes) for i in self.nodes}
        self.channels = []
        for i in self.nodes:
            for j in self.nodes:
                self.channels.append(Channel("ping", ("c", i), ("s", j)))
        for a in self.nodes:
            for b in self.nodes:
                if a < b:
                    self.channels.append(Channel("gossip", ("s", a), ("s", b)))
        self.by_node = {i: [ch for ch in self.channels if ch.a[1] == i or ch.b[1] == i] for i in self.nodes}
        self.scripts = {i: list(sc.scripts.get(i, [])) for i in self.nodes}
        self.ready_at = {i: 0 for i in self.nodes}
        self.faults = sorted(sc.faults, key=lambda x: x.at)
        self.crashed = set()
        self.dead_clients = set()
        self.malicious = {x.node for x in self.faults if x.kind == "malicious"}
        self.starved = {x.node for x in self.faults if x.kind == "starve"}
        self.weights = {i: self.rng.uniform(0.2, 1.0) for i in self.nodes}
        self.step_no = 0
        self.trace = []
        self.record_deliveries = record_deliveries
        self.next_op = 0
        self.phantom = 0
        self.results = {}
        self.fair_until = -1
        self.reset_active = False
        self.resets_done = 0
        self.suspensions = 0
        self.initial_tags = set()
        self.cycles = CycleCounter([ch.key for ch in self.channels], self.nodes)
        self.log(0, "init", channels=[_key_text(ch.key) for ch in self.channels],
                 n=n, f=sc.f, e=sc.e, k=sc.k, p=sc.p, delta=sc.delta, bounded=bounded,
                 maxint=sc.maxint, v0=sc.v0)
        for x in [x for x in self.faults if x.kind == "corrupt" and x.at == 0]:
            self.corrupt(ceiling=x.arg or 16)
        self.faults = [x for x in self.faults if not (x.kind == "corrupt" and x.at == 0)]
        self.initial_tags = self.present_tags()
        self.log(0, "initial_tags", tags=sorted(format_tag(t) for t in self.initial_tags))
        for j in self.nodes:
            self.log_store(j)

    # logging

    def log(self, node, event, **data):
        self.trace.append(Event(self.step_no, self.cycles.cycle, node, event, data))

    def log_store(self, j):
        srv = self.servers[j]
        self.log(j, "store", size=len(srv.storage))

    def note_cycle(self, ended):
        if ended:
            self.log(0, "cycle", cycle=self.cycles.cycle)

    # liveness helpers

    def live(self, end):
        role, node = end
        if node in self.crashed:
            return False
        return role != "c" or node not in self.dead_clients

    def live_nodes(self):
        return {i for i in self.nodes if i not in self.crashed}

    # transient faults

    def corrupt(self, ceiling=16, reset_scope=False, clients=True, rng=None):
        """Replace node, buffer and token contents with arbitrary well-typed
        values whose tags have counters at most ``ceiling``."""
        rng = rng or self.rng
        n, p = self.sc.n, self.sc.p
        tag = lambda: _corrupt_tag(rng, ceiling, n)
        for j, srv in self.servers.items():
            records = {}
            for _ in range(rng.randint(0, 6)):
                t = tag()
                if t is not T0:
                    records[t] = Record(t, _corrupt_element(rng, p), rng.choice((Phase.PRE, Phase.FIN, Phase.FINALIZED)))
            srv.storage = records
            srv.gossip = {k: _corrupt_triple(rng, ceiling, n) for k in srv.gossip}
        for i, comm in self.comms.items():
            comm.rid = rng.randint(0, 5)
            comm.ping_tx = _maybe(rng, lambda: _corrupt_request(rng, ceiling, n, p))
            for j in comm.pong_rx:
                comm.pong_rx[j] = _maybe(rng, lambda: _corrupt_reply(rng, ceiling, n, p))
                comm.ping_rx[j] = _maybe(rng, lambda: _corrupt_request(rng, ceiling, n, p))
                comm.pong_tx[j] = _maybe(rng, lambda: _corrupt_reply(rng, ceiling, n, p))
                comm.gossip_rx[j] = _maybe(rng, lambda: _corrupt_triple(rng, ceiling, n))
            comm.gossip_tx = _corrupt_triple(rng, ceiling, n)
            if clients:
                self.clients[i].op = None
                if rng.random() < 0.5:
                    op = self._phantom_op(rng, ceiling)
                    self.clients[i].op = op
                    req = self.clients[i].request()
                    comm.ping_tx = req._replace(rid=comm.rid)
                    self.cycles.op_started(i)
                    self.log(i, "phantom", op=op.op_id, kind=op.kind, cursor=op.cursor,
                             tag=format_tag(op.tag), value=op.value)
        for ch in self.channels:
            ch.at = rng.choice((ch.a, ch.b))
            if ch.kind == "ping":
                if ch.at[0] == "s":
                    ch.payload = _maybe(rng, lambda: _corrupt_request(rng, ceiling, n, p))
                else:
                    ch.payload = (
                        _maybe(rng, lambda: _corrupt_request(rng, ceiling, n, p)),
                        _maybe(rng, lambda: _corrupt_reply(rng, ceiling, n, p)),
                    )
            else:
                ch.payload = _maybe(rng, lambda: _corrupt_triple(rng, ceiling, n))
            if reset_scope and ch.a[1] != ch.b[1]:
                ch.reset_payload = _maybe(rng, lambda: (rng.choice(MODES), tag(), rng.randrange(3)))
        if reset_scope:
            for agent in self.agents.values():
                agent.mode = rng.choice(MODES)
                agent.tag = tag()
                agent.wave = rng.randrange(3)
                agent.seen = {q: rng.choice(MODES) for q in agent.peers if rng.random() < 0.5}
                self.servers[agent.node].enabled = agent.mode == IDLE
        self.log(0, "corrupt", ceiling=ceiling)

    inject_transient = corrupt

    def _phantom_op(self, rng, ceiling):
        self.phantom += 1
        n, p = self.sc.n, self.sc.p
        kind = rng.choice(("write", "read"))
        op = Operation(kind, rng.randrange(p), op_id=f"x{self.phantom}")
        cursors = ("query", "pre", "fin", "FIN") if kind == "write" else ("query", "fin")
        op.cursor = rng.choice(cursors)
        if op.cursor != "query":
            op.tag = _corrupt_tag(rng, ceiling, n)
            op.shares = [rng.randrange(p) for _ in range(n)]
            op.value = None
        return op

    def present_tags(self):
        """Every tag currently held anywhere in the system."""
        found = set()

        def add(obj):
            if obj is None:
                return
            if isinstance(obj, Tag) or obj is T0:
                found.add(obj)
            elif isinstance(obj, (TagTriple, Request, Reply, tuple, list)):
                for x in obj:
                    add(x)

        for srv in self.servers.values():
            found.update(srv.storage)
            for v in srv.gossip.values():
                add(v)
        for comm in self.comms.values():
            add(comm.ping_tx)
            add(comm.gossip_tx)
            for d in (comm.pong_rx, comm.ping_rx, comm.pong_tx, comm.gossip_rx):
                for v in d.values():
                    add(v)
        for cl in self.clients.values():
            if cl.op is not None and not cl.op.done:
                add(cl.op.tag)
        for ch in self.channels:
            add(ch.payload)
        return found

    # steps

    def enabled_steps(self):
        steps = [("deliver", ch) for ch in self.channels if self.live(ch.a) and self.live(ch.b)]
        for i in self.nodes:
            if self.can_invoke(i):
                steps.append(("invoke", i))
        return steps

    def can_invoke(self, i):
        if i in self.crashed or i in self.dead_clients:
            return False
        cl = self.clients[i]
        if cl.op is not None and not cl.op.done:
            return False
        if not self.scripts[i]:
            return False
        if self.agents[i].mode != IDLE or not self.servers[i].enabled:
            return False
        op = self.scripts[i][0]
        return op.get("at", 0) <= self.step_no and self.ready_at[i] <= self.step_no

    def execute(self, step):
        kind, arg = step
        self.step_no += 1
        if kind == "deliver":
            self.deliver(arg)
        else:
            self.invoke(arg)

    def invoke(self, i):
        item = self.scripts[i].pop(0)
        if self.scripts[i]:
            self.ready_at[i] = self.step_no + self.scripts[i][0].get("delay", 0)
        op_id = self.next_op
        self.next_op += 1
        op = Operation(item["op"], item.get("value"), op_id=op_id)
        live_init = [t for t in self.present_tags() if t in self.initial_tags]
        self.log(i, "invoke", op=op_id, kind=op.kind, value=op.value,
                 init_max=format_tag(max(live_init, default=T0)))
        req = self.clients[i].start(op)
        sent = self.comms[i].phase_init(req)
        self.log(i, "qrm_call", rid=sent.rid, req=_jsonable(sent))
        self.cycles.op_started(i)
        self.note_cycle(self.cycles.client_round(i, self.step_no))

    def deliver(self, ch):
        recv = ch.at
        send = ch.other(recv)
        role, node = recv
        peer = send[1]
        if ch.reset_payload is not None and node != peer:
            # reset state rides along on every token between two nodes
            self.reset_message(node, peer, ch.reset_payload)
        payload = ch.payload
        if ch.kind == "ping":
            if role == "s":
                self.server_ping(node, peer, payload)
                ch.payload = self.comms[node].server_departure(peer)
            else:
                self.client_pong(node, peer, payload)
                ch.payload = self.comms[node].client_departure(peer)
        else:
            self.server_gossip(node, peer, payload)
            srv = self.servers[node]
            out = self.comms[node].gossip_tx if srv.enabled else None
            ch.payload = out
            if out is not None:
                self.log(node, "gossip_send", to=peer, triple=[format_tag(t) for t in out])
        if node != peer:
            ch.reset_payload = self.agents[node].message()
        ch.at = send
        ch.deliveries += 1
        if self.record_deliveries:
            self.log(node, "deliver", ch=_key_text(ch.key))
        self.note_cycle(self.cycles.deliver(ch.key, self.step_no))

    def server_ping(self, j, i, payload):
        comm = self.comms[j]
        req = payload if isinstance(payload, Request) else None
        comm.server_arrival(i, req)
        srv = self.servers[j]
        if req is None or not srv.enabled:
            return
        before = len(srv.storage)
        reply = srv.handle(req)
        if reply is None and req.phase == Phase.QRY:
            self.suspensions += 1
            self.log(j, "suspend", client=i)
        comm.reply(i, reply)
        pong = comm.pong_tx[i]
        if pong is not None and j in self.malicious:
            pong = malicious_reply_filter(pong, self.sc.p, self.rng)
            comm.pong_tx[i] = pong
        if pong is not None:
            self.log(j, "reply", client=i, rid=req.rid, req=_jsonable(req), reply=_jsonable(pong))
        if self.bounded or len(srv.storage) != before:
            self.log_store(j)

    def client_pong(self, i, j, payload):
        comm = self.comms[i]
        cl = self.clients[i]
        agg = comm.client_arrival(j, payload)
        if agg is None:
            return
        op = cl.op
        if op is None:
            return
        self.log(i, "qrm_return", op=op.op_id, replies={str(k): _jsonable(r) for k, r in agg.items()})
        self.note_cycle(self.cycles.client_round(i, self.step_no))
        had_tag = op.tag
        nxt = cl.on_quorum(agg)
        if op.kind == "write" and had_tag is None and op.tag is not None:
            self.log(i, "op_tag", op=op.op_id, tag=format_tag(op.tag), value=op.value)
        if nxt is not None:
            sent = comm.phase_init(nxt)
            self.log(i, "qrm_call", rid=sent.rid, req=_jsonable(sent))
            return
        self.results[op.op_id] = op.result
        self.log(i, "respond", op=op.op_id, kind=op.kind, result=op.result, tag=format_tag(op.tag))
        cl.op = None
        if self.scripts[i]:
            self.ready_at[i] = self.step_no + self.scripts[i][0].get("delay", 0)
        self.note_cycle(self.cycles.op_ended(i, self.step_no))

    def server_gossip(self, j, i, payload):
        srv = self.servers[j]
        if not srv.enabled or not isinstance(payload, TagTriple):
            return
        self.log(j, "gossip_recv", frm=i, triple=[format_tag(t) for t in payload])
        view = self.comms[j].gossip_arrival(i, payload)
        before = len(srv.storage)
        out, reset_tag = srv.on_gossip(view)
        self.comms[j].gossip(out)
        if self.bounded or len(srv.storage) != before:
            self.log_store(j)
        if reset_tag is not None:
            self.log(j, "reset_trigger", tag=format_tag(reset_tag))
            self.run_actions(j, self.agents[j].initiate(reset_tag))

    # reset

    def global_reset(self, j, t):
        self.log(j, "reset_trigger", tag=format_tag(t))
        self.run_actions(j, self.agents[j].initiate(t))

    def reset_message(self, j, i, payload):
        agent = self.agents[j]
        if (agent.mode == IDLE and not self.reset_active and isinstance(payload, tuple)
                and len(payload) == 3 and payload[0] == IDLE and payload[2] == agent.wave):
            return  # nothing to learn from an idle peer of the same wave
        actions = self.agents[j].on_message(i, payload, self.live_nodes())
        self.run_actions(j, actions)
        self.check_reset_done()

    def run_actions(self, j, actions):
        for action, t in actions:
            if action == "freeze":
                self.freeze(j, t)
            else:
                self.servers[j].enabled = True
                self.log(j, "reset_resume", tag=format_tag(t))

    def freeze(self, j, t):
        self.reset_active = True
        srv = self.servers[j]
        srv.enabled = False
        srv.local_reset(t)
        self.log(j, "reset_freeze", tag=format_tag(t))
        self.log_store(j)
        self.abort_client(j, "reset")
        comm = self.comms[j]
        comm.clear_client()
        comm.clear_server()
        comm.clear_gossip()
        for ch in self.by_node[j]:
            ch.payload = None

    def abort_client(self, i, why):
        op = self.clients[i].abort()
        if op is not None and not op.done:
            self.log(i, "fail", op=op.op_id, why=why)
            self.note_cycle(self.cycles.op_ended(i, self.step_no))

    def reset_free(self):
        if any(a.mode != IDLE for a in self.agents.values() if a.node not in self.crashed):
            return False
        for ch in self.channels:
            msg = ch.reset_payload
            if isinstance(msg, tuple) and msg and msg[0] != IDLE:
                return False
        return True

    def check_reset_done(self):
        if self.reset_active and self.reset_free():
            self.reset_active = False
            self.resets_done += 1
            self.log(0, "reset_done")

    # crashes

    def crash(self, j):
        if j in self.crashed:
            return
        self.crashed.add(j)
        self.dead_clients.add(j)
        self.log(j, "crash")
        self.note_cycle(self.cycles.crash(j, self.step_no))
        self.abort_client(j, "crash")

    def resume(self, j):
        if j not in self.crashed:
            return
        self.crashed.discard(j)
        self.servers[j].crash_restart()
        comm = self.comms[j]
        comm.clear_server()
        comm.clear_gossip()
        comm.clear_client()
        agent = self.agents[j]
        agent.mode, agent.tag, agent.seen = IDLE, None, {}
        self.cycles.resume(j)
        self.log(j, "resume")
        self.log_store(j)

    def apply_faults(self):
        while self.faults and self.faults[0].at <= self.step_no:
            x = self.faults.pop(0)
            if x.kind == "crash":
                self.crash(x.node)
            elif x.kind == "resume":
                self.resume(x.node)
            elif x.kind == "corrupt":
                self.corrupt(ceiling=x.arg or 16)
            elif x.kind == "reset":
                self.global_reset(x.node, x.arg)

    # scheduling

    def finished(self):
        for i in self.nodes:
            if i in self.dead_clients:
                continue
            if self.scripts[i]:
                return False
            op = self.clients[i].op
            if op is not None and not op.done:
                return False
        return not self.faults and not self.reset_active

    def wants_fairness(self):
        if self.sc.sched == "fair":
            return True
        if self.sc.sched == "unfair":
            return False
        if self.reset_active or not self.reset_free():
            self.fair_until = self.step_no + self.sc.fair_window * len(self.channels)
            return True
        if self.sc.maxint is not None:
            top = top_tag(self.sc.maxint, self.sc.n)
            if any(s.max_phase() >= top for s in self.servers.values()):
                self.fair_until = self.step_no + self.sc.fair_window * len(self.channels)
                return True
        return self.step_no < self.fair_until

    def sweep(self):
        steps = self.enabled_steps()
        self.rng.shuffle(steps)
        for step in steps:
            if step[0] == "deliver":
                ch = step[1]
                if not (self.live(ch.a) and self.live(ch.b)):
                    continue
            elif not self.can_invoke(step[1]):
                continue
            self.execute(step)
            self.apply_faults()

    def weight(self, step):
        kind, arg = step
        if kind == "invoke":
            return self.weights[arg]
        node = arg.at[1]
        if node in self.starved:
            return 0.0
        return self.weights[node]

    def unfair_step(self):
        steps = self.enabled_steps()
        weights = [self.weight(s) for s in steps]
        if not steps:
            self.step_no += 1
            return
        if sum(weights) <= 0:
            weights = None
        self.execute(self.rng.choices(steps, weights=weights)[0])
        self.apply_faults()

    def run(self, budget=None, until=None):
        """Run until every script finished (or ``until()`` holds) or the step
        budget is spent. Returns the trace."""
        budget = self.sc.budget if budget is None else budget
        limit = self.step_no + budget
        self.apply_faults()
        while self.step_no < limit:
            if until is not None:
                if until():
                    break
            elif self.finished():
                break
            if self.wants_fairness():
                self.sweep()
            else:
                self.unfair_step()
        complete = until() if until is not None else self.finished()
        self.log(0, "end", complete=bool(complete))
        return self.trace


class _ZeroRng:
    """Randomness source that always yields 0 (for the default value)."""

    def randrange(self, *args):
        return 0


def _key_text(key):
    kind, a, b = key
    return f"{kind}:{a[0]}{a[1]}-{b[0]}{b[1]}"


def parse_key(text):
    kind, rest = text.split(":")
    a, b = rest.split("-")
    return (kind, (a[0], int(a[1:])), (b[0], int(b[1:])))


def _jsonable(obj):
    if isinstance(obj, Phase):  # before int: Phase is an IntEnum
        return obj.label
    if obj is None or isinstance(obj, (bool, int, str, float)):
        return obj
    if isinstance(obj, Tag) or obj is T0:
        return format_tag(obj)
    if isinstance(obj, (list, tuple)):
        return [_jsonable(x) for x in obj]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    return repr(obj)


def workload(seed, n=5, f=1, e=1, k=1, p=257, writers=(1, 2, 3), readers=(4, 5),
             ops=10, crash=True, malicious=True, max_delay=1500, **extra):
    """Random scenario: each writer/reader runs ``ops`` operations separated by
    random pauses, with optionally one crash/resume and one malicious server."""
    rng = random.Random(seed)
    sc = Scenario(n=n, f=f, e=e, k=k, p=p, seed=seed, **extra)
    for i in writers:
        sc.scripts[i] = [{"op": "write", "value": rng.randrange(p), "delay": rng.randrange(max_delay + 1)}
                         for _ in range(ops)]
    for i in readers:
        sc.scripts[i] = [{"op": "read", "delay": rng.randrange(max_delay + 1)} for _ in range(ops)]
    if malicious and e:
        sc.faults.append(Fault("malicious", rng.randint(1, n)))
    if crash and f:
        victim = rng.randint(1, n)
        at = rng.randint(50, 1500)
        sc.faults.append(Fault("crash", victim, at))
        sc.faults.append(Fault("resume", victim, at + rng.randint(100, 1500)))
    return sc


def stuff_storage(sim, count=100, ceiling=50, rng=None):
    """Fill every server with ``count`` arbitrary records (a transient fault)."""
    rng = rng or sim.rng
    n, p = sim.sc.n, sim.sc.p
    for srv in sim.servers.values():
        records = {}
        while len(records) < count:
            t = Tag(rng.randint(1, ceiling), rng.randint(1, n))
            phase = rng.choice((Phase.PRE, Phase.FIN, Phase.FINALIZED))
            records[t] = Record(t, _corrupt_element(rng, p), phase)
        srv.storage = records
        sim.log_store(srv.id)
    sim.initial_tags |= sim.present_tags()


def run(scenario, **kwargs):
    sim = Simulator(scenario, **kwargs)
    return sim.run()


# scenario and trace files


class ScenarioError(ValueError):
    def __init__(self, line, msg):
        super().__init__(f"line {line}: {msg}")
        self.line = line


HEADER_KEYS = {
    "n": int, "f": int, "e": int, "k": int, "p": int, "maxint": int, "delta": int,
    "seed": int, "sched": str, "v0": int, "budget": int, "bounded": int, "window": int,
}


def parse_scenario(text):
    """Parse the line-oriented scenario format.

    First non-blank line: ``key=value`` pairs. Then one instruction per line:
    ``client I write V [at S]``, ``client I read [at S]``,
    ``fault crash|resume I at S``, ``fault malicious I``, ``fault starve I``,
    ``fault corrupt [ceiling C] [at S]``. ``#`` starts a comment.
    """
    sc = Scenario()
    header_seen = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        if not header_seen:
            header_seen = True
            for word in words:
                if "=" not in word:
                    raise ScenarioError(lineno, f"expected key=value, got {word!r}")
                key, value = word.split("=", 1)
                if key not in HEADER_KEYS:
                    raise ScenarioError(lineno, f"unknown key {key!r}")
                try:
                    value = HEADER_KEYS[key](value)
                except ValueError:
                    raise ScenarioError(lineno, f"bad value for {key}: {value!r}") from None
                if key == "bounded":
                    sc.bounded = bool(value)
                elif key == "window":
                    sc.fair_window = value
                else:
                    setattr(sc, key, value)
            continue
        try:
            _parse_instruction(sc, words)
        except (ValueError, IndexError) as exc:
            raise ScenarioError(lineno, str(exc) or "malformed line") from None
    if not header_seen:
        raise ScenarioError(1, "missing header")
    try:
        sc.validate()
    except ValueError as exc:
        raise ScenarioError(1, str(exc)) from None
    return sc


def _take_at(words):
    if "at" in words:
        idx = words.index("at")
        at = int(words[idx + 1])
        return words[:idx] + words[idx + 2:], at
    return words, 0


def _parse_instruction(sc, words):
    words, at = _take_at(words)
    if words[0] == "client":
        node = int(words[1])
        if words[2] == "write":
            if len(words) != 4:
                raise ValueError("usage: client I write V")
            value = int(words[3])
            if not 0 <= value < sc.p:
                raise ValueError(f"value {value} outside the field")
            op = {"op": "write", "value": value}
        elif words[2] == "read" and len(words) == 3:
            op = {"op": "read"}
        else:
            raise ValueError(f"unknown client instruction {' '.join(words)!r}")
        if at:
            op["at"] = at
        sc.scripts.setdefault(node, []).append(op)
    elif words[0] == "fault":
        kind = words[1]
        if kind in ("crash", "resume", "malicious", "starve"):
            sc.faults.append(Fault(kind, int(words[2]), at))
        elif kind == "corrupt":
            ceiling = int(words[3]) if len(words) > 3 and words[2] == "ceiling" else 16
            sc.faults.append(Fault("corrupt", 0, at, ceiling))
        else:
            raise ValueError(f"unknown fault {kind!r}")
    else:
        raise ValueError(f"unknown instruction {words[0]!r}")


def write_trace(trace, path):
    with open(path, "w") as fh:
        for ev in trace:
            fh.write(f"{ev.step}\t{ev.cycle}\t{ev.node}\t{ev.kind}\t{json.dumps(ev.data, sort_keys=True)}\n")


def read_trace(path):
    events = []
    with open(path) as fh:
        for line in fh:
            step, cycle, node, kind, payload = line.rstrip("\n").split("\t", 4)
            events.append(Event(int(step), int(cycle), int(node), kind, json.loads(payload)))
    return events


def trace_text(trace):
    return "".join(
        f"{ev.step}\t{ev.cycle}\t{ev.node}\t{ev.kind}\t{json.dumps(ev.data, sort_keys=True)}\n"
        for ev in trace
    )
