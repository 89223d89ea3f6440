"""Gossip and quorum-based request/reply over circulating tokens.

Every channel carries exactly one token that bounces between its two
endpoints forever. A delivery runs the receiver's arrival handler and then
its departure handler, whose output becomes the token's next payload.
"""

from .core import BOTTOM_TRIPLE, Phase, Reply, quorum_size


def load(j, msg):
    """The part of ``msg`` addressed to server ``j``.

    A prewrite carries one element per server; every server only gets its own.
    """
    if msg is None:
        return None
    if isinstance(msg.word, tuple):
        word = msg.word[j - 1] if 0 < j <= len(msg.word) else None
        return msg._replace(word=word)
    return msg


def matches(expected, ping, pong):
    """Whether a returning ``(ping, pong)`` answers the outstanding request."""
    if expected is None or expected != ping:
        return False
    if pong is None or pong.tag is None:
        return True
    return ping.phase == Phase.QRY or ping.tag == pong.tag


class Channel:
    """A single-token channel between two endpoints.

    ``at`` is the endpoint the token travels to; ``payload`` is what it
    carries and ``reset_payload`` the sender's reset state riding along.
    Endpoints are ``(role, node)`` pairs with role ``"s"`` (server) or
    ``"c"`` (client).
    """

    __slots__ = ("kind", "a", "b", "at", "payload", "reset_payload", "deliveries")

    def __init__(self, kind, a, b, at=None, payload=None):
        self.kind = kind
        self.a = a
        self.b = b
        self.at = a if at is None else at
        self.payload = payload
        self.reset_payload = None
        self.deliveries = 0

    @property
    def key(self):
        return (self.kind, self.a, self.b)

    def other(self, end):
        return self.b if end == self.a else self.a

    def __repr__(self):
        return f"Channel({self.kind}, {self.a}->{self.b}, at={self.at}, payload={self.payload!r})"


class Comm:
    """Communication buffers of one node (client side and server side)."""

    def __init__(self, node, cfg):
        self.node = node
        self.cfg = cfg
        n = cfg.n
        # client side
        self.ping_tx = None
        self.pong_rx = {j: None for j in range(1, n + 1)}
        self.rid = 0
        # server side
        self.ping_rx = {i: None for i in range(1, n + 1)}
        self.pong_tx = {i: None for i in range(1, n + 1)}
        # gossip
        self.gossip_tx = BOTTOM_TRIPLE
        self.gossip_rx = {j: None for j in range(1, n + 1)}

    # quorum-based request/reply, client side

    def phase_init(self, req):
        self.rid += 1
        self.ping_tx = req._replace(rid=self.rid)
        for j in self.pong_rx:
            self.pong_rx[j] = None
        return self.ping_tx

    def client_departure(self, j):
        return load(j, self.ping_tx)

    def client_arrival(self, j, payload):
        """Store a matching pong; returns the aggregated replies once a quorum
        of servers has answered, else None."""
        if self.ping_tx is None or not isinstance(payload, tuple) or len(payload) != 2:
            return None
        ping, pong = payload
        if not matches(load(j, self.ping_tx), ping, pong):
            return None
        if pong is not None:
            self.pong_rx[j] = pong
        answered = {k: r for k, r in self.pong_rx.items() if r is not None}
        if len(answered) < quorum_size(self.cfg):
            return None
        self.clear_client()
        return answered

    def clear_client(self):
        self.ping_tx = None
        for j in self.pong_rx:
            self.pong_rx[j] = None

    # server side

    def server_arrival(self, i, ping):
        self.ping_rx[i] = ping
        self.pong_tx[i] = None

    def reply(self, i, m):
        req = self.ping_rx[i]
        if req is None or m is None:
            return
        if req.phase == Phase.QRY:
            self.pong_tx[i] = Reply(m.tag, None, Phase.QRY)
        else:
            self.pong_tx[i] = Reply(req.tag, m.word, req.phase)

    def server_departure(self, i):
        if self.ping_rx[i] is None:
            return (None, None)
        return (self.ping_rx[i], self.pong_tx[i])

    def clear_server(self):
        for i in self.ping_rx:
            self.ping_rx[i] = None
            self.pong_tx[i] = None

    # gossip

    def gossip(self, msg):
        self.gossip_tx = msg

    def gossip_arrival(self, j, msg):
        self.gossip_rx[j] = msg
        return {k: v for k, v in self.gossip_rx.items() if v is not None}

    def clear_gossip(self):
        self.gossip_tx = BOTTOM_TRIPLE
        for j in self.gossip_rx:
            self.gossip_rx[j] = None
