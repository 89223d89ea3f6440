"""A small two-wave global reset.

Every node runs a ``ResetAgent`` whose state ``(mode, tag, wave)`` rides on
every token the node sends. Modes go idle -> freezing -> resuming -> idle:

* a node that calls ``initiate(t)`` or hears a freezing peer of a newer wave
  freezes: its server is disabled and reset to ``t``, its client operation is
  aborted and its buffers are cleared;
* a freezing node starts resuming once every live peer was seen in the
  current wave (or any peer was seen resuming, which implies the former);
* a resuming node becomes idle (and re-enables its server) once every live
  peer was seen resuming or idle in the current wave.

The wave number tells stale messages of an older wave apart, so a node that
already went idle is not dragged into a second freeze by a late message.
A stuck or forged state drains the same way: the worst outcome is one extra
reset wave.
"""

IDLE = "idle"
FREEZING = "freezing"
RESUMING = "resuming"
MODES = (IDLE, FREEZING, RESUMING)

# declared bound, in asynchronous cycles, for a wave to finish
PSI = 4


def valid_message(msg):
    return (
        isinstance(msg, tuple)
        and len(msg) == 3
        and msg[0] in MODES
        and isinstance(msg[2], int)
        and msg[2] >= 0
    )


class ResetAgent:
    def __init__(self, node, peers):
        self.node = node
        self.peers = tuple(p for p in peers if p != node)
        self.mode = IDLE
        self.tag = None
        self.wave = 0
        self.seen = {}  # peer -> latest mode heard during the current wave

    def message(self):
        return (self.mode, self.tag, self.wave)

    def initiate(self, t):
        """Local call to start a reset; returns the actions to perform."""
        if self.mode == IDLE:
            return self._freeze(t, self.wave + 1)
        if self.mode == FREEZING and t is not None and (self.tag is None or t > self.tag):
            return self._freeze(t, self.wave, keep_seen=True)
        return []

    def _freeze(self, t, wave, keep_seen=False):
        self.mode = FREEZING
        self.tag = t
        self.wave = wave
        if not keep_seen:
            self.seen = {}
        return [("freeze", t)]

    def on_message(self, peer, msg, live):
        """Handle a peer's ``(mode, tag, wave)``; ``live`` is the set of live nodes."""
        if not valid_message(msg):
            return self.poll(live)
        mode, tag, wave = msg
        if wave < self.wave:
            return self.poll(live)
        actions = []
        if wave > self.wave:
            if mode == IDLE:
                # a peer finished a wave this node never took part in
                self.wave = wave
                self.seen = {}
                if self.mode != IDLE:
                    self.seen[peer] = mode
                return self.poll(live)
            actions += self._freeze(tag, wave)
        elif self.mode == IDLE:
            return []
        elif self.mode == FREEZING and mode != IDLE:
            if tag is not None and (self.tag is None or tag > self.tag):
                actions += self._freeze(tag, wave, keep_seen=True)
        self.seen[peer] = mode
        if self.mode == FREEZING and mode == RESUMING:
            # the peer saw every node frozen, so the first wave is over
            self.mode = RESUMING
        return actions + self.poll(live)

    def poll(self, live):
        if self.mode == IDLE:
            return []
        peers = [p for p in self.peers if p in live]
        if self.mode == FREEZING:
            if all(p in self.seen for p in peers):
                self.mode = RESUMING
            else:
                return []
        if all(self.seen.get(p) in (RESUMING, IDLE) for p in peers):
            self.mode = IDLE
            self.seen = {}
            return [("resume", self.tag)]
        return []
