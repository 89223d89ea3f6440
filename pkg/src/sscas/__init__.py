"""Self-stabilizing, privacy-preserving coded atomic storage.

Modules: ``coding`` (GF(p) Reed-Solomon / secret sharing), ``core`` (tags,
phases, quorums), ``server`` and ``client`` (the protocol), ``comm`` (token
channels), ``reset`` (global reset), ``sim`` (deterministic simulator),
``checker`` (offline trace checks) and ``cli``.
"""

from .coding import decode_secret, rs_decode, rs_encode, share_secret
from .core import T0, Phase, QuorumConfig, Tag, quorum_size
from .sim import Fault, Scenario, Simulator, parse_scenario

__version__ = "0.1.0"

__all__ = [
    "T0", "Phase", "QuorumConfig", "Tag", "quorum_size",
    "decode_secret", "rs_decode", "rs_encode", "share_secret",
    "Fault", "Scenario", "Simulator", "parse_scenario",
]
