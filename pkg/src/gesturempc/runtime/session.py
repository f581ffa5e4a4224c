"""Multi-party session execution: party engines, dealer service, reveal.

A session is n computing parties plus a dealer endpoint (id n) on a fully
connected transport mesh.  Every party runs the same program against a
PartyContext; the dealer only ever answers correlated-randomness requests
and never sees a data-bearing message (its inbound kinds are asserted by
tests).  All randomness derives from the session seed with fixed tags, so
a session opens the same values bit-for-bit on every transport and in the
single-process reference execution.

Programs are plain callables `program(ctx) -> result`; their bytecode hash
is exchanged at startup so mismatched parties abort instead of diverging.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass, field

import numpy as np

from ..fixedpoint import FixedPointConfig, DEFAULT_CONFIG
from ..mpc.engine import TensorEngineBase, Transcript, LocalEngine
from ..mpc.tensor import SharedTensor
from ..sharing import TripleDealer, split_planes
from .messages import Kind, pack_arrays, unpack_arrays
from .transport import Endpoint, SessionAbort, inproc_mesh, tcp_mesh


class SessionError(RuntimeError):
    pass


class RevealDeniedError(SessionError):
    pass


@dataclass
class SessionConfig:
    n_parties: int = 2
    seed: int = 0
    fp: FixedPointConfig = field(default_factory=lambda: DEFAULT_CONFIG)
    transport: str = "inproc"          # "inproc" | "tcp"
    timeout: float = 30.0
    reveal_deny: dict = field(default_factory=dict)  # party id -> True to refuse
    host: str | None = None            # tcp endpoint host; GESTUREMPC_HOST env fallback
    base_port: int | None = None       # fixed ports base_port + id; GESTUREMPC_BASE_PORT

    def __post_init__(self) -> None:
        if self.n_parties < 2:
            raise ValueError("need at least two computing parties")
        if self.transport not in ("inproc", "tcp"):
            raise ValueError(f"unknown transport {self.transport!r}")
        if self.host is None:
            self.host = os.environ.get("GESTUREMPC_HOST", "127.0.0.1")
        if self.base_port is None:
            env_port = os.environ.get("GESTUREMPC_BASE_PORT")
            self.base_port = int(env_port) if env_port else 0

    @property
    def dealer_id(self) -> int:
        return self.n_parties

    @property
    def session_id(self) -> int:
        return int(np.random.SeedSequence((self.seed, 7)).generate_state(1)[0])


def program_hash(program) -> bytes:
    code = program.__code__
    blob = code.co_code + repr(code.co_consts).encode() + repr(code.co_names).encode()
    return hashlib.sha256(blob).digest()


class PartyEngine(TensorEngineBase):
    """Tensor engine holding one party's planes, talking over an endpoint."""

    pax = 0

    def __init__(self, party_id: int, cfg: SessionConfig, endpoint: Endpoint,
                 transcript: Transcript | None = None):
        super().__init__(cfg.n_parties, cfg.fp, transcript)
        self.party_id = party_id
        self.cfg = cfg
        self.endpoint = endpoint
        self._counters = {"mul": 0, "matmul": 0, "cmp": 0}
        self._input_counters: dict = {}
        self._peers = [p for p in range(cfg.n_parties) if p != party_id]

    # -- deterministic seed derivations shared with LocalEngine ------------

    def _input_rng(self, owner: int) -> np.random.Generator:
        k = self._input_counters.get(owner, 0)
        self._input_counters[owner] = k + 1
        return np.random.default_rng(
            np.random.SeedSequence((self.cfg.seed, LocalEngine.TAG_INPUT, owner, k))
        )

    # -- messaging ----------------------------------------------------------

    def _sendrecv_all(self, kind: Kind, payload: bytes) -> list:
        """Symmetric exchange with every peer, deadlock-free by id order."""
        received: dict = {}
        for peer in self._peers:
            if peer > self.party_id:
                self.endpoint.send(peer, kind, payload)
        for peer in self._peers:
            if peer < self.party_id:
                received[peer] = self.endpoint.recv(peer, expect=kind)
        for peer in self._peers:
            if peer < self.party_id:
                self.endpoint.send(peer, kind, payload)
        for peer in self._peers:
            if peer > self.party_id:
                received[peer] = self.endpoint.recv(peer, expect=kind)
        return [received[p] for p in sorted(received)]

    # -- engine hooks ---------------------------------------------------------

    def _exchange_open(self, planes_list: list) -> list:
        payload = pack_arrays(planes_list)
        replies = self._sendrecv_all(Kind.OPENING, payload)
        totals = [np.array(p, dtype=np.uint64, copy=True) for p in planes_list]
        for msg in replies:
            for total, plane in zip(totals, unpack_arrays(msg.payload)):
                total += plane
        return totals

    def _party0_add(self, planes: np.ndarray, pub) -> np.ndarray:
        if self.party_id == 0:
            planes[...] = planes + np.asarray(pub, dtype=np.uint64)
        return planes

    def _trunc_signed(self, signed: np.ndarray, out: np.ndarray, by: np.int64) -> None:
        if self.party_id == 0:
            out[...] = signed >> by
        else:
            np.negative((np.zeros_like(signed) - signed) >> by, out=out)

    def _sharevec_planes(self, sv) -> np.ndarray:
        return np.asarray(sv.shares[self.party_id], dtype=np.uint64)

    def _request_dealer(self, kind: str, shape: tuple, expect: Kind) -> list:
        index = self._counters[kind]
        self._counters[kind] = index + 1
        body = json.dumps({"kind": kind, "index": index, "shape": list(shape)}).encode()
        self.endpoint.send(self.cfg.dealer_id, Kind.TRIPLE_REQUEST, body)
        reply = self.endpoint.recv(self.cfg.dealer_id, expect=expect)
        return unpack_arrays(reply.payload)

    def _fresh_mul_triple(self, shape: tuple) -> tuple:
        self.transcript.triples += 1
        return tuple(self._request_dealer("mul", tuple(shape), Kind.TRIPLE))

    def _fresh_matmul_triple(self, dims: tuple) -> tuple:
        self.transcript.triples += 1
        return tuple(self._request_dealer("matmul", tuple(dims), Kind.TRIPLE))

    def _fresh_comparison(self, shape: tuple) -> tuple:
        self.transcript.comparisons += 1
        return tuple(
            self._request_dealer("cmp", tuple(shape), Kind.COMPARISON_RANDOMNESS)
        )

    # -- data ingress / egress ------------------------------------------------

    def share_value(self, value, owner: int, frac_bits: int | None = None) -> SharedTensor:
        frac = self.fp.precision_t if frac_bits is None else frac_bits
        if self.party_id == owner:
            ring = self._encode_public(np.asarray(value, dtype=np.float64), frac)
            planes = split_planes(ring, self.n_parties, self._input_rng(owner))
            header = json.dumps({"frac": frac}).encode() + b"\x00"
            for peer in self._peers:
                self.endpoint.send(
                    peer, Kind.SHARE_DELIVERY, header + pack_arrays([planes[peer]])
                )
            mine = planes[self.party_id]
        else:
            self._input_counters[owner] = self._input_counters.get(owner, 0) + 1
            msg = self.endpoint.recv(owner, expect=Kind.SHARE_DELIVERY)
            head, body = msg.payload.split(b"\x00", 1)
            frac = json.loads(head)["frac"]
            (mine,) = unpack_arrays(body)
        return SharedTensor(np.ascontiguousarray(mine), mine.shape, frac)

    def reveal(self, st: SharedTensor, to: int = 0):
        """Authorized opening: only the target party learns the value."""
        self.transcript.rounds += 1
        words = int(np.prod(st.planes.shape, dtype=np.int64))
        self.transcript.payload_bytes += 8 * words * (self.n_parties - 1)
        entry = self.transcript.op_entry("reveal")
        entry["count"] += 1
        entry["rounds"] += 1
        if self.party_id != to:
            if self.cfg.reveal_deny.get(self.party_id):
                self.endpoint.send(to, Kind.REVEAL_GRANT, b"\x00")
            else:
                self.endpoint.send(to, Kind.REVEAL_GRANT, b"\x01" + pack_arrays([st.planes]))
            return None
        total = np.array(st.planes, dtype=np.uint64, copy=True)
        denied = []
        for peer in self._peers:
            msg = self.endpoint.recv(peer, expect=Kind.REVEAL_GRANT)
            if msg.payload[:1] != b"\x01":
                denied.append(peer)
                continue
            (plane,) = unpack_arrays(msg.payload[1:])
            total += plane
        if denied:
            raise RevealDeniedError(f"reveal grant withheld by parties {denied}")
        return self._decode(total, st.frac_bits)


@dataclass
class PartyContext:
    """What a session program sees: its id, engine ops, private inputs."""

    party_id: int
    n_parties: int
    engine: PartyEngine
    inputs: dict

    def share_input(self, name: str, owner: int = 0) -> SharedTensor:
        value = self.inputs.get(name) if self.party_id == owner else None
        if self.party_id == owner and value is None:
            raise SessionError(f"party {owner} is missing input {name!r}")
        return self.engine.share_value(value, owner=owner)

    def reveal(self, st: SharedTensor, to: int = 0):
        return self.engine.reveal(st, to=to)


@dataclass
class SessionResult:
    results: list
    transcripts: list
    endpoint_stats: list
    dealer_inbound: dict

    def transcripts_json(self) -> str:
        return json.dumps(
            {
                "parties": [tr.to_dict() if tr else None for tr in self.transcripts],
                "endpoints": self.endpoint_stats,
                "dealer_inbound": self.dealer_inbound,
            },
            indent=2,
        )


def _dealer_main(cfg: SessionConfig, endpoint: Endpoint) -> None:
    dealer = TripleDealer(
        seed=int(np.random.SeedSequence((cfg.seed, LocalEngine.TAG_DEALER)).generate_state(1)[0]),
        n_parties=cfg.n_parties,
    )
    issued: dict = {}
    issued_lock = threading.Lock()
    errors: list = []

    def serve(party: int) -> None:
        try:
            while True:
                msg = endpoint.recv(party)
                if msg.kind is Kind.CONTROL:
                    if msg.payload == b"done":
                        return
                    continue
                if msg.kind is not Kind.TRIPLE_REQUEST:
                    raise SessionAbort(
                        f"dealer received {msg.kind.name} from party {party}"
                    )
                req = json.loads(msg.payload.decode())
                kind, index, shape = req["kind"], req["index"], tuple(req["shape"])
                with issued_lock:
                    seen = issued.setdefault((kind, index), shape)
                if seen != shape:
                    raise SessionAbort(
                        f"triple request shape disagreement at {kind}#{index}"
                    )
                if kind == "mul":
                    planes = dealer.mul_triple_planes(index, shape)
                    reply_kind = Kind.TRIPLE
                elif kind == "matmul":
                    planes = dealer.matmul_triple_planes(index, shape)
                    reply_kind = Kind.TRIPLE
                else:
                    planes = dealer.comparison_planes(index, shape)
                    reply_kind = Kind.COMPARISON_RANDOMNESS
                endpoint.send(party, reply_kind, pack_arrays([p[party] for p in planes]))
        except SessionAbort as exc:
            errors.append(exc)

    threads = [
        threading.Thread(target=serve, args=(p,), daemon=True)
        for p in range(cfg.n_parties)
    ]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    if errors:
        raise errors[0]


def _party_main(cfg: SessionConfig, party_id: int, endpoint: Endpoint,
                program, inputs: dict, out: dict) -> None:
    engine = PartyEngine(party_id, cfg, endpoint)
    ctx = PartyContext(
        party_id=party_id, n_parties=cfg.n_parties, engine=engine,
        inputs=inputs or {},
    )
    # lockstep safety: refuse to run against a diverging program
    digest = program_hash(program)
    replies = engine._sendrecv_all(Kind.CONTROL, b"hash:" + digest)
    for msg in replies:
        if msg.payload != b"hash:" + digest:
            raise SessionError(f"program hash mismatch at party {party_id}")
    try:
        out["result"] = program(ctx)
    finally:
        endpoint.send(cfg.dealer_id, Kind.CONTROL, b"done")
    out["transcript"] = engine.transcript


def run_session(cfg: SessionConfig, program, party_inputs: dict | None = None,
                taps: dict | None = None) -> SessionResult:
    """Execute one program on all parties plus the dealer; returns per-party
    results and accounting.  Any party failure aborts the whole session.

    program is one callable for every party, or a {party_id: callable} map
    (diverging programs are caught by the startup hash exchange).  taps
    optionally attach message observers to endpoints, for tests.
    """
    party_inputs = party_inputs or {}
    n_endpoints = cfg.n_parties + 1
    if cfg.transport == "tcp":
        endpoints = tcp_mesh(n_endpoints, cfg.session_id, timeout=cfg.timeout,
                             host=cfg.host, base_port=cfg.base_port)
    else:
        endpoints = inproc_mesh(n_endpoints, cfg.session_id, timeout=cfg.timeout)
    for eid, tap in (taps or {}).items():
        endpoints[eid].tap = tap

    outs = [dict() for _ in range(cfg.n_parties)]
    failures: list = []

    def party_wrapper(pid: int) -> None:
        try:
            prog = program[pid] if isinstance(program, dict) else program
            _party_main(cfg, pid, endpoints[pid], prog, party_inputs.get(pid), outs[pid])
        except BaseException as exc:  # propagate with diagnostics, then unblock peers
            failures.append((pid, exc))
            endpoints[pid].close()

    def dealer_wrapper() -> None:
        try:
            _dealer_main(cfg, endpoints[cfg.dealer_id])
        except BaseException as exc:
            failures.append((cfg.dealer_id, exc))
            endpoints[cfg.dealer_id].close()

    threads = [
        threading.Thread(target=party_wrapper, args=(pid,), daemon=True)
        for pid in range(cfg.n_parties)
    ]
    threads.append(threading.Thread(target=dealer_wrapper, daemon=True))
    for th in threads:
        th.start()
    for th in threads:
        th.join(timeout=cfg.timeout * 4)
    if cfg.transport == "tcp":
        for ep in endpoints:
            ep.close()

    if failures:
        who, exc = failures[0]
        role = "dealer" if who == cfg.dealer_id else f"party {who}"
        raise SessionError(f"session aborted at {role}: {exc}") from exc

    return SessionResult(
        results=[o.get("result") for o in outs],
        transcripts=[o.get("transcript") for o in outs],
        endpoint_stats=[
            {"sent_kinds": ep.sent_kinds, "received_kinds": ep.received_kinds,
             "payload_bytes_sent": ep.bytes_sent}
            for ep in endpoints
        ],
        dealer_inbound=dict(endpoints[cfg.dealer_id].received_kinds),
    )


# ---------------------------------------------------------------------------
# single-process reference execution
# ---------------------------------------------------------------------------


@dataclass
class ReferenceContext:
    """Runs the same program once over a LocalEngine; bit-identical to the
    distributed session under the same seed."""

    engine: LocalEngine
    n_parties: int
    inputs: dict  # merged {owner: {name: value}}
    party_id: int = 0

    def share_input(self, name: str, owner: int = 0) -> SharedTensor:
        value = self.inputs.get(owner, {}).get(name)
        if value is None:
            raise SessionError(f"reference inputs missing {name!r} for owner {owner}")
        return self.engine.share(value, owner=owner)

    def reveal(self, st: SharedTensor, to: int = 0):
        return self.engine.open(st)


def run_reference(cfg: SessionConfig, program, party_inputs: dict | None = None):
    engine = LocalEngine(seed=cfg.seed, n_parties=cfg.n_parties, fp=cfg.fp)
    ctx = ReferenceContext(engine=engine, n_parties=cfg.n_parties,
                           inputs=party_inputs or {})
    return program(ctx), engine.transcript
