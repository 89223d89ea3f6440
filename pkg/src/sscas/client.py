"""Writer and reader operations as step-wise state machines.

An operation emits one request per phase; the communication layer answers
each with the replies of a quorum, keyed by server id.
"""

from .coding import decode_secret, share_secret
from .core import T0, Phase, Request, k_threshold, tag_successor

WRITE_PHASES = ("query", "pre", "fin", "FIN")
READ_PHASES = ("query", "fin")


def max_reply_tag(replies):
    tags = [r.tag for r in replies.values() if r is not None and r.tag is not None]
    return max(tags, default=T0)


class Operation:
    def __init__(self, kind, value=None, op_id=None):
        self.kind = kind  # "write" or "read"
        self.value = value
        self.op_id = op_id
        self.cursor = "query"
        self.tag = None
        self.shares = None
        self.result = None
        self.done = False

    @property
    def role(self):
        return "writer" if self.kind == "write" else "reader"

    def __repr__(self):
        return f"Operation({self.kind}, value={self.value}, cursor={self.cursor}, tag={self.tag})"


class Client:
    """Client half of a node. Holds at most one operation at a time."""

    def __init__(self, cid, cfg, p, rng):
        self.id = cid
        self.cfg = cfg
        self.p = p
        self.rng = rng
        self.op = None

    def request(self):
        """Request for the current phase of the current operation."""
        op = self.op
        if op is None or op.done:
            return None
        if op.cursor == "query":
            return Request(None, None, Phase.QRY, op.role)
        if op.cursor == "pre":
            return Request(op.tag, tuple(op.shares), Phase.PRE, op.role)
        if op.cursor == "fin":
            return Request(op.tag, None, Phase.FIN, op.role)
        return Request(op.tag, None, Phase.FINALIZED, op.role)

    def start(self, op):
        if self.op is not None and not self.op.done:
            raise RuntimeError("client already runs an operation")
        self.op = op
        return self.request()

    def on_quorum(self, replies):
        """Advance the current operation; returns the next request or None
        once the operation is complete (see ``op.result``)."""
        op = self.op
        if op.kind == "write":
            if op.cursor == "query":
                op.tag = tag_successor(max_reply_tag(replies), self.id)
                _, op.shares = share_secret(op.value, self.cfg.k, self.cfg.n, self.p, self.rng)
                op.cursor = "pre"
            elif op.cursor == "pre":
                op.cursor = "fin"
            elif op.cursor == "fin":
                op.cursor = "FIN"
            else:
                op.cursor = "done"
                op.done = True
                op.result = op.value
                return None
            return self.request()
        if op.cursor == "query":
            op.tag = max_reply_tag(replies)
            op.cursor = "fin"
            return self.request()
        op.result = self.decode(op.tag, replies)
        op.cursor = "done"
        op.done = True
        return None

    def decode(self, t, replies):
        elements = {
            j: r.word for j, r in replies.items()
            if r is not None and r.tag == t and r.word is not None
        }
        if len(elements) < k_threshold(self.cfg):
            return None
        return decode_secret(elements, self.cfg.k, self.p)

    def abort(self):
        op = self.op
        self.op = None
        return op
