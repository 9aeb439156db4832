"""Per-party protocol runtime and the three-thread session orchestrator.

Both compute servers run the same protocol code with only their party id
differing; the assistant runs the offline request loop. Message tags are
drawn from per-party counters that advance identically on both sides, so
the two transcripts stay aligned without negotiation.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .ring import FixedPointCodec, RingParams
from .offline import AssistantClient, MaterialPool, OfflineSource, serve_assistant
from .transport import ASSISTANT, P0, P1, LocalHub, PartyNetwork, TcpHub


@dataclass(frozen=True)
class DivisionConfig:
    """Public domain and iteration counts for the Newton-based protocols.

    ``lo``/``hi`` bound the divisor values the caller guarantees; the
    affine initial guess is derived from them. Eight reciprocal iterations
    keep the division round budget at the conventional 17 (16 iteration
    rounds plus the final product).
    """

    lo: float = 0.1
    hi: float = 100.0
    iterations: int = 8
    sqrt_lo: float = 0.002
    sqrt_hi: float = 16.0
    sqrt_iterations: int = 25

    @property
    def rounds(self) -> int:
        """Round budget of one division (reciprocal plus one multiply)."""
        return 2 * self.iterations + 1


class PartyRuntime:
    """One compute server's sequential protocol state."""

    def __init__(self, party: int, net: PartyNetwork, codec: FixedPointCodec,
                 offline: OfflineSource, div: DivisionConfig | None = None,
                 assistant: AssistantClient | None = None,
                 pair_rng: np.random.Generator | None = None,
                 trunc_mode: str | None = None):
        self.party = party
        self.net = net
        self.codec = codec
        self.offline = offline
        self.div = div or DivisionConfig()
        self.assistant = assistant
        self.pair_rng = pair_rng
        if trunc_mode is None:
            trunc_mode = "assistant" if assistant is not None else "local"
        if trunc_mode not in ("assistant", "local"):
            raise ValueError(f"unknown truncation mode {trunc_mode!r}")
        if trunc_mode == "assistant" and (assistant is None or pair_rng is None):
            raise ValueError("assistant truncation needs a client and a shared rng")
        self.trunc_mode = trunc_mode
        self._tag = 1 << 32

    @property
    def params(self) -> RingParams:
        return self.codec.params

    @property
    def stats(self):
        return self.net.stats

    def next_tag(self) -> int:
        self._tag += 1
        return self._tag

    def exchange(self, payload: np.ndarray) -> np.ndarray:
        """One bidirectional exchange with the peer compute server."""
        return self.net.peer.exchange(self.next_tag(), payload)

    def trunc_values(self, values: np.ndarray, bits: int,
                     rounding: bool = True) -> np.ndarray:
        """Shift shared raw words right by ``bits`` via the assistant.

        Party 0 adds a public offset that makes the hidden value strictly
        positive (and a half quantum when rounding); party 1 adds a random
        offset drawn from the generator both servers share but the
        assistant does not know. The masked sum can never wrap the ring,
        so the assistant's public shift is exact and the subtracted offset
        shifts commute, leaving at most 1.5 quanta of error.
        """
        p = self.params
        delta = 1 << (p.l - 3)
        shape = values.shape
        lam = self.pair_rng.integers(delta, p.modulus - 2 * delta,
                                     size=shape, dtype=np.uint64)
        if self.party == 0:
            off = delta + ((1 << (bits - 1)) if rounding else 0)
            w = values + np.uint64(off)
        else:
            w = values + lam
        t = self.assistant.trunc(w, bits).reshape(shape)
        if self.party == 0:
            t = t - (lam >> np.uint64(bits)) - np.uint64(delta >> bits)
        return t & p.mask

    @contextmanager
    def scope(self, name: str):
        self.stats.push_scope(name)
        try:
            yield
        finally:
            self.stats.pop_scope()


@dataclass
class SessionResult:
    outputs: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)


def run_session(job, codec: FixedPointCodec, seed: int = 0, backend: str = "inproc",
                div: DivisionConfig | None = None,
                pools: tuple[MaterialPool, MaterialPool] | None = None,
                trunc: str | None = None) -> SessionResult:
    """Run ``job(runtime) -> output`` on both compute servers.

    The assistant thread serves correlated randomness generated from
    ``seed``, and masked rescaling requests when ``trunc`` is "assistant"
    (the default). Pre-filled ``pools`` bypass it for offline material.
    Exceptions from any party propagate to the caller.
    """
    if backend == "inproc":
        hub = LocalHub()
    elif backend == "sockets":
        hub = TcpHub()
    else:
        raise ValueError(f"unknown transport backend {backend!r}")

    outputs = {}
    stats = {}
    errors = {}

    def compute_party(me: int):
        net = PartyNetwork(me, hub)
        client = AssistantClient(net.assistant)
        offline = pools[me] if pools is not None else client
        pair_rng = np.random.default_rng([seed & 0xFFFFFFFF, 0x7472756E63])
        rt = PartyRuntime(me, net, codec, offline, div, assistant=client,
                          pair_rng=pair_rng, trunc_mode=trunc or "assistant")
        try:
            outputs[me] = job(rt)
            client.shutdown()
        finally:
            stats[me] = net.stats
            net.close()

    def assistant_party():
        net = PartyNetwork(ASSISTANT, hub)
        try:
            serve_assistant(net, codec.params, seed)
        finally:
            net.close()

    def runner(name, fn, *args):
        try:
            fn(*args)
        except BaseException as exc:  # noqa: BLE001 - propagated to caller
            errors[name] = exc
            if hasattr(hub, "abort"):
                hub.abort.set()

    threads = [
        threading.Thread(target=runner, args=("assistant", assistant_party), daemon=True),
        threading.Thread(target=runner, args=("party0", compute_party, P0), daemon=True),
        threading.Thread(target=runner, args=("party1", compute_party, P1), daemon=True),
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if hasattr(hub, "close"):
        hub.close()

    for name in ("party0", "party1", "assistant"):
        if name in errors:
            raise RuntimeError(f"session failed in {name}") from errors[name]
    return SessionResult(outputs=outputs, stats=stats)
