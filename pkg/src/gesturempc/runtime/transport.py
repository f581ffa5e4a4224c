"""Session transports: in-process queues and length-prefixed TCP.

Both present the same endpoint interface (send/recv of framed messages to
peer ids with per-channel FIFO ordering and strictly increasing sequence
numbers), so a session runs unchanged over either.  The TCP mesh binds
loopback listeners and fully connects all endpoints; it exists to
demonstrate genuine process separation and to prove transport equivalence
against the in-process queues.
"""

from __future__ import annotations

import queue
import socket
import struct
import threading

from .messages import FramingError, Kind, Message, decode_message, encode_message

_CLOSE = object()


class SessionAbort(RuntimeError):
    """Transport torn down or a peer vanished mid-session."""


class Endpoint:
    """One participant's view of the mesh; thread-safe per owning thread."""

    def __init__(self, endpoint_id: int, session_id: int, timeout: float = 30.0):
        self.id = endpoint_id
        self.session_id = session_id
        self.timeout = timeout
        self._send_seq: dict = {}
        self._recv_seq: dict = {}
        self._stats_lock = threading.Lock()
        self.sent_kinds: dict = {}
        self.received_kinds: dict = {}
        self.bytes_sent = 0
        self.tap = None  # optional callable(src, Message), used by tests

    # subclass surface
    def _send_bytes(self, dst: int, data: bytes) -> None:
        raise NotImplementedError

    def _recv_bytes(self, src: int) -> bytes:
        raise NotImplementedError

    def close(self) -> None:
        raise NotImplementedError

    def send(self, dst: int, kind: Kind, payload: bytes = b"") -> None:
        seq = self._send_seq.get(dst, 0)
        self._send_seq[dst] = seq + 1
        frame = encode_message(
            Message(kind=kind, session_id=self.session_id, seq=seq, payload=payload)
        )
        with self._stats_lock:
            self.sent_kinds[kind.name] = self.sent_kinds.get(kind.name, 0) + 1
            self.bytes_sent += len(payload)
        self._send_bytes(dst, frame)

    def recv(self, src: int, expect: Kind | None = None) -> Message:
        msg = decode_message(self._recv_bytes(src))
        if msg.session_id != self.session_id:
            raise SessionAbort(f"session id mismatch from {src}")
        last = self._recv_seq.get(src)
        if last is not None and msg.seq <= last:
            raise SessionAbort(f"non-increasing sequence from {src}")
        self._recv_seq[src] = msg.seq
        with self._stats_lock:
            self.received_kinds[msg.kind.name] = self.received_kinds.get(msg.kind.name, 0) + 1
        if self.tap is not None:
            self.tap(src, msg)
        if expect is not None and msg.kind is not expect:
            if msg.kind is Kind.CONTROL and msg.payload.startswith(b"abort:"):
                raise SessionAbort(msg.payload.decode(errors="replace"))
            raise SessionAbort(f"expected {expect.name}, got {msg.kind.name} from {src}")
        return msg


class InProcEndpoint(Endpoint):
    def __init__(self, endpoint_id: int, session_id: int, mesh: dict, timeout: float = 30.0):
        super().__init__(endpoint_id, session_id, timeout)
        self._mesh = mesh

    def _send_bytes(self, dst: int, data: bytes) -> None:
        try:
            self._mesh[(self.id, dst)].put(data)
        except KeyError:
            raise SessionAbort(f"no channel {self.id} -> {dst}") from None

    def _recv_bytes(self, src: int) -> bytes:
        try:
            data = self._mesh[(src, self.id)].get(timeout=self.timeout)
        except queue.Empty:
            raise SessionAbort(f"timed out waiting for endpoint {src}") from None
        if data is _CLOSE:
            raise SessionAbort(f"endpoint {src} closed the session")
        return data

    def close(self) -> None:
        for (src, dst), q in self._mesh.items():
            if src == self.id:
                q.put(_CLOSE)


def inproc_mesh(n_endpoints: int, session_id: int, timeout: float = 30.0) -> list:
    mesh: dict = {}
    for a in range(n_endpoints):
        for b in range(n_endpoints):
            if a != b:
                mesh[(a, b)] = queue.Queue()
    return [InProcEndpoint(i, session_id, mesh, timeout) for i in range(n_endpoints)]


class TcpEndpoint(Endpoint):
    def __init__(self, endpoint_id: int, session_id: int, socks: dict, timeout: float = 30.0):
        super().__init__(endpoint_id, session_id, timeout)
        self._socks = socks
        self._lock = threading.Lock()

    def _send_bytes(self, dst: int, data: bytes) -> None:
        try:
            self._socks[dst].sendall(data)
        except (KeyError, OSError) as exc:
            raise SessionAbort(f"send to endpoint {dst} failed: {exc}") from None

    def _recv_bytes(self, src: int) -> bytes:
        sock = self._socks.get(src)
        if sock is None:
            raise SessionAbort(f"no connection to endpoint {src}")

        def read_exact(n: int) -> bytes:
            buf = b""
            while len(buf) < n:
                try:
                    chunk = sock.recv(n - len(buf))
                except (OSError, ValueError) as exc:
                    raise SessionAbort(f"recv from {src} failed: {exc}") from None
                if not chunk:
                    raise SessionAbort(f"endpoint {src} disconnected")
                buf += chunk
            return buf

        from .messages import read_frame

        try:
            return read_frame(read_exact)
        except FramingError as exc:
            raise SessionAbort(f"bad frame from {src}: {exc}") from None

    def close(self) -> None:
        with self._lock:
            for sock in self._socks.values():
                try:
                    sock.shutdown(socket.SHUT_RDWR)
                except OSError:
                    pass
                sock.close()


def tcp_mesh(n_endpoints: int, session_id: int, timeout: float = 30.0,
             host: str = "127.0.0.1", base_port: int = 0) -> list:
    """Fully connected mesh; endpoint j dials every i < j.

    base_port 0 picks ephemeral ports (single-process tests); a fixed base
    binds base_port + endpoint_id for cross-process deployments.
    """
    listeners = []
    ports = []
    for eid in range(n_endpoints):
        srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        srv.bind((host, base_port + eid if base_port else 0))
        srv.listen(n_endpoints)
        listeners.append(srv)
        ports.append(srv.getsockname()[1])

    socks: list = [dict() for _ in range(n_endpoints)]
    errors: list = []

    def accept(i: int) -> None:
        try:
            for _ in range(n_endpoints - 1 - i):
                conn, _ = listeners[i].accept()
                peer = struct.unpack(">I", _read_n(conn, 4))[0]
                conn.settimeout(timeout)
                socks[i][peer] = conn
        except OSError as exc:
            errors.append(exc)

    threads = [threading.Thread(target=accept, args=(i,), daemon=True) for i in range(n_endpoints)]
    for th in threads:
        th.start()
    for j in range(n_endpoints):
        for i in range(j):
            cli = socket.create_connection((host, ports[i]), timeout=timeout)
            cli.settimeout(timeout)
            cli.sendall(struct.pack(">I", j))
            socks[j][i] = cli
    for th in threads:
        th.join(timeout=timeout)
    for srv in listeners:
        srv.close()
    if errors:
        raise SessionAbort(f"tcp mesh setup failed: {errors[0]}")
    return [TcpEndpoint(i, session_id, socks[i], timeout) for i in range(n_endpoints)]


def _read_n(sock: socket.socket, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise SessionAbort("peer disconnected during handshake")
        buf += chunk
    return buf
