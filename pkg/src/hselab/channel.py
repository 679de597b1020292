"""Wire protocol: message schema, newline-delimited JSON codec, in-process
and TCP transports, end-to-end sessions, and the man-in-the-middle relay.

The quantum channel is simulated by serializing state vectors.  That is
deliberately generous to the interceptor - she sees a full description of
each state - but the interceptor endpoint is constrained by construction
to measure in a fixed basis and resend the eigenstate, which is exactly
the attack model under study.  Classical messages (announcements, sift
reports, key comparison) are relayed by the interceptor byte-identically.

Per trial the message order is QuantumState x (c-1), then IndexAnnounce,
then SiftReport; one trial completes before the next begins.  Floats are
serialized with shortest round-tripping decimal form, so amplitudes
survive the wire bit-exactly.
"""

from __future__ import annotations

import json
import socket
import threading
from dataclasses import dataclass
from queue import Empty, Queue

from .errors import CodecError, HandshakeError, ProtocolError, SessionError
from .hilbert import TAU_NORM, Basis, StateVector
from .protocol import EVE, AliceSession, BobSession, EveInterceptor, TrialOutcome
from .rates import ProtocolConfig
from .rng import RandomStream

PROTOCOL_VERSION = 1
DEFAULT_PORT = 7117
_RECV_TIMEOUT = 60.0


@dataclass(frozen=True)
class Hello:
    protocol_version: int
    c: int
    d: int
    basis_set_id: str


@dataclass(frozen=True)
class QuantumState:
    trial_id: int
    slot: int
    amps: tuple  # ((re, im), ...) - one pair per amplitude


@dataclass(frozen=True)
class IndexAnnounce:
    trial_id: int
    a: tuple


@dataclass(frozen=True)
class SiftReport:
    trial_id: int
    sifted: bool


@dataclass(frozen=True)
class KeyCompare:
    trial_id_range: tuple  # (lo, hi): trials lo..hi-1
    letters: tuple


@dataclass(frozen=True)
class Bye:
    reason: str


Message = Hello | QuantumState | IndexAnnounce | SiftReport | KeyCompare | Bye


def quantum_state_message(trial_id: int, slot: int, state: StateVector) -> QuantumState:
    amps = tuple((float(z.real), float(z.imag)) for z in state.amps)
    return QuantumState(trial_id=trial_id, slot=slot, amps=amps)


def state_from_message(msg: QuantumState) -> StateVector:
    return StateVector([complex(re, im) for re, im in msg.amps])


def encode(msg: Message) -> bytes:
    """One message per line: UTF-8 JSON with a `type` discriminator."""
    if isinstance(msg, Hello):
        obj = {
            "type": "hello",
            "protocol_version": msg.protocol_version,
            "c": msg.c,
            "d": msg.d,
            "basis_set_id": msg.basis_set_id,
        }
    elif isinstance(msg, QuantumState):
        obj = {
            "type": "quantum_state",
            "trial_id": msg.trial_id,
            "slot": msg.slot,
            "amps": [[re, im] for re, im in msg.amps],
        }
    elif isinstance(msg, IndexAnnounce):
        obj = {"type": "index_announce", "trial_id": msg.trial_id, "a": list(msg.a)}
    elif isinstance(msg, SiftReport):
        obj = {"type": "sift_report", "trial_id": msg.trial_id, "sifted": msg.sifted}
    elif isinstance(msg, KeyCompare):
        obj = {
            "type": "key_compare",
            "trial_id": list(msg.trial_id_range),
            "letters": list(msg.letters),
        }
    elif isinstance(msg, Bye):
        obj = {"type": "bye", "reason": msg.reason}
    else:
        raise TypeError(f"not a message: {msg!r}")
    return json.dumps(obj, separators=(",", ":")).encode("utf-8") + b"\n"


def _plain_int(value, what: str, line_no=None) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise CodecError(f"{what} must be an integer, got {value!r}", line_no)
    return value


def _trial_id(obj, line_no) -> int:
    tid = _plain_int(obj.get("trial_id"), "trial_id", line_no)
    if tid < 0:
        raise CodecError(f"trial_id must be nonnegative, got {tid}", line_no)
    return tid


def decode(line: bytes, line_no: int | None = None) -> Message:
    """Parse one wire line; every malformed input raises CodecError."""
    try:
        obj = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CodecError(f"unparseable line: {exc}", line_no) from None
    if not isinstance(obj, dict):
        raise CodecError(f"message must be an object, got {type(obj).__name__}", line_no)
    kind = obj.get("type")
    if kind == "hello":
        version = _plain_int(obj.get("protocol_version"), "protocol_version", line_no)
        c = _plain_int(obj.get("c"), "c", line_no)
        d = _plain_int(obj.get("d"), "d", line_no)
        set_id = obj.get("basis_set_id")
        if not isinstance(set_id, str):
            raise CodecError("basis_set_id must be a string", line_no)
        return Hello(protocol_version=version, c=c, d=d, basis_set_id=set_id)
    if kind == "quantum_state":
        tid = _trial_id(obj, line_no)
        slot = _plain_int(obj.get("slot"), "slot", line_no)
        amps = obj.get("amps")
        if not isinstance(amps, list) or len(amps) < 2:
            raise CodecError("amps must list at least 2 amplitude pairs", line_no)
        pairs = []
        norm_sq = 0.0
        for pair in amps:
            if (
                not isinstance(pair, list)
                or len(pair) != 2
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in pair)
            ):
                raise CodecError(f"amplitude must be a [re, im] pair, got {pair!r}", line_no)
            re, im = float(pair[0]), float(pair[1])
            pairs.append((re, im))
            norm_sq += re * re + im * im
        if abs(norm_sq - 1.0) > TAU_NORM:
            raise CodecError(f"state vector not normalized: |amps|^2 = {norm_sq!r}", line_no)
        return QuantumState(trial_id=tid, slot=slot, amps=tuple(pairs))
    if kind == "index_announce":
        tid = _trial_id(obj, line_no)
        indices = obj.get("a")
        if not isinstance(indices, list) or not indices:
            raise CodecError("a must be a nonempty list of indices", line_no)
        return IndexAnnounce(
            trial_id=tid, a=tuple(_plain_int(v, "index", line_no) for v in indices)
        )
    if kind == "sift_report":
        tid = _trial_id(obj, line_no)
        sifted = obj.get("sifted")
        if not isinstance(sifted, bool):
            raise CodecError("sifted must be a boolean", line_no)
        return SiftReport(trial_id=tid, sifted=sifted)
    if kind == "key_compare":
        rng = obj.get("trial_id")
        if not (isinstance(rng, list) and len(rng) == 2):
            raise CodecError("trial_id must be a [lo, hi] pair", line_no)
        lo = _plain_int(rng[0], "range low", line_no)
        hi = _plain_int(rng[1], "range high", line_no)
        letters = obj.get("letters")
        if not isinstance(letters, list):
            raise CodecError("letters must be a list", line_no)
        return KeyCompare(
            trial_id_range=(lo, hi),
            letters=tuple(_plain_int(v, "letter", line_no) for v in letters),
        )
    if kind == "bye":
        reason = obj.get("reason")
        if not isinstance(reason, str):
            raise CodecError("reason must be a string", line_no)
        return Bye(reason=reason)
    raise CodecError(f"unknown message type {kind!r}", line_no)


class MemoryTransport:
    """One end of an in-process FIFO pair."""

    def __init__(self, inbox: Queue, outbox: Queue):
        self._inbox = inbox
        self._outbox = outbox
        self._closed = False

    def send_line(self, line: bytes) -> None:
        if self._closed:
            raise SessionError("transport closed")
        self._outbox.put(line)

    def recv_line(self) -> bytes | None:
        try:
            line = self._inbox.get(timeout=_RECV_TIMEOUT)
        except Empty:
            raise SessionError("timed out waiting for peer") from None
        return line

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self._outbox.put(None)


def memory_transport_pair() -> tuple[MemoryTransport, MemoryTransport]:
    a_to_b: Queue = Queue()
    b_to_a: Queue = Queue()
    return MemoryTransport(b_to_a, a_to_b), MemoryTransport(a_to_b, b_to_a)


class TcpTransport:
    """Newline-framed messages over one TCP connection."""

    def __init__(self, sock: socket.socket, timeout: float = _RECV_TIMEOUT):
        sock.settimeout(timeout)
        self._sock = sock
        self._reader = sock.makefile("rb")

    def send_line(self, line: bytes) -> None:
        try:
            self._sock.sendall(line)
        except OSError as exc:
            raise SessionError(f"send failed: {exc}") from exc

    def recv_line(self) -> bytes | None:
        try:
            line = self._reader.readline()
        except OSError as exc:
            raise SessionError(f"recv failed: {exc}") from exc
        return line if line else None

    def close(self) -> None:
        try:
            self._reader.close()
        except OSError:
            pass
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


def send_message(transport, msg: Message) -> None:
    transport.send_line(encode(msg))


def recv_message(transport) -> Message | None:
    line = transport.recv_line()
    if line is None:
        return None
    return decode(line)


@dataclass(frozen=True)
class AliceLog:
    """Alice-side session summary: what she sent and what survived."""

    letters: tuple
    key: tuple
    trials: int
    messages_sent: int


def run_session(
    role: str,
    transport,
    config: ProtocolConfig,
    n_trials: int,
    seed: int,
    basis_set_id: str = "custom",
    letters=None,
    compare: bool = True,
):
    """Drive one endpoint to completion.

    Returns the list of TrialOutcomes on the bob side and an AliceLog on
    the alice side.  Outcomes are identical to in-process run_trial with
    the same seed; Alice's basis choice never appears on the wire outside
    the final (explicitly public) key comparison.
    """
    if role not in ("alice", "bob"):
        raise ValueError(f"role must be alice or bob, got {role!r}")
    _handshake(transport, config, basis_set_id)
    if role == "alice":
        return _run_alice(transport, config, n_trials, seed, letters, compare)
    return _run_bob(transport, config, seed)


def _handshake(transport, config: ProtocolConfig, basis_set_id: str) -> None:
    send_message(
        transport,
        Hello(protocol_version=PROTOCOL_VERSION, c=config.c, d=config.d, basis_set_id=basis_set_id),
    )
    peer = recv_message(transport)
    if peer is None:
        raise SessionError("peer closed during handshake")
    if not isinstance(peer, Hello):
        raise HandshakeError(f"expected hello, got {type(peer).__name__}")
    if peer.protocol_version != PROTOCOL_VERSION:
        raise HandshakeError(f"protocol version mismatch: {peer.protocol_version} != {PROTOCOL_VERSION}")
    if (peer.c, peer.d) != (config.c, config.d):
        raise HandshakeError(
            f"alphabet/dimension mismatch: peer ({peer.c}, {peer.d}) != ours ({config.c}, {config.d})"
        )
    if peer.basis_set_id != basis_set_id:
        raise HandshakeError(f"basis set mismatch: {peer.basis_set_id!r} != {basis_set_id!r}")


def _run_alice(transport, config, n_trials, seed, letters, compare) -> AliceLog:
    session = AliceSession(config, seed, letters=letters)
    sent = 0
    for t in range(n_trials):
        _, states, announced = session.states_for_trial(t)
        for slot, state in enumerate(states):
            send_message(transport, quantum_state_message(t, slot, state))
            sent += 1
        send_message(transport, IndexAnnounce(trial_id=t, a=announced))
        sent += 1
        reply = recv_message(transport)
        if reply is None:
            raise SessionError(f"peer closed mid-session at trial {t}")
        if not isinstance(reply, SiftReport) or reply.trial_id != t:
            raise ProtocolError(f"expected sift report for trial {t}, got {reply!r}")
        session.record_sift(t, reply.sifted)
    if compare:
        send_message(
            transport,
            KeyCompare(trial_id_range=(0, n_trials), letters=tuple(session.raw_string)),
        )
        sent += 1
    send_message(transport, Bye(reason="done"))
    sent += 1
    reply = recv_message(transport)
    if reply is not None and not isinstance(reply, Bye):
        raise ProtocolError(f"expected bye, got {reply!r}")
    return AliceLog(
        letters=tuple(session.raw_string),
        key=tuple(session.key),
        trials=n_trials,
        messages_sent=sent,
    )


def _run_bob(transport, config, seed) -> list[TrialOutcome]:
    session = BobSession(config, seed)
    alice_letters = None
    expected_trial = 0
    expected_slot = 0
    while True:
        msg = recv_message(transport)
        if msg is None:
            raise SessionError("peer closed before bye")
        if isinstance(msg, QuantumState):
            if msg.trial_id != expected_trial or msg.slot != expected_slot:
                raise ProtocolError(
                    f"state for trial {msg.trial_id} slot {msg.slot}, "
                    f"expected trial {expected_trial} slot {expected_slot}"
                )
            if expected_slot == 0:
                session.begin_trial(expected_trial)
            session.measure(expected_slot, state_from_message(msg))
            expected_slot += 1
        elif isinstance(msg, IndexAnnounce):
            if msg.trial_id != expected_trial:
                raise ProtocolError(f"announcement for trial {msg.trial_id}, expected {expected_trial}")
            if expected_slot != config.c - 1:
                raise ProtocolError(
                    f"announcement after {expected_slot} of {config.c - 1} states"
                )
            if len(msg.a) != config.c - 1 or not all(0 <= v < config.d for v in msg.a):
                raise ProtocolError(f"malformed announcement {msg.a!r}")
            sifted, _ = session.conclude(expected_trial, msg.a)
            send_message(transport, SiftReport(trial_id=expected_trial, sifted=sifted))
            expected_trial += 1
            expected_slot = 0
        elif isinstance(msg, KeyCompare):
            lo, hi = msg.trial_id_range
            if (lo, hi) != (0, expected_trial) or len(msg.letters) != expected_trial:
                raise ProtocolError(f"key comparison range {msg.trial_id_range} does not match session")
            alice_letters = msg.letters
        elif isinstance(msg, Bye):
            send_message(transport, Bye(reason="done"))
            break
        else:
            raise ProtocolError(f"unexpected {type(msg).__name__} mid-session")
    return session.outcomes(alice_letters)


@dataclass(frozen=True)
class InterceptionRecord:
    trial_id: int
    slot: int
    outcome: int


class MitmLog:
    """Thread-safe record of what the interceptor measured."""

    def __init__(self):
        self._records: list[InterceptionRecord] = []
        self._lock = threading.Lock()

    def add(self, record: InterceptionRecord) -> None:
        with self._lock:
            self._records.append(record)

    @property
    def records(self) -> list[InterceptionRecord]:
        with self._lock:
            return list(self._records)


def run_mitm_pumps(
    alice_side, bob_side, eve_basis: Basis, seed: int, intercept_fraction: float = 1.0
) -> MitmLog:
    """Relay between two transports, measuring and replacing every quantum
    state while forwarding classical lines byte-identically.

    `alice_side` must be the transport facing the state sender.  Blocks
    until both directions reach EOF; returns the interception log.
    """
    log = MitmLog()
    root = EveInterceptor(eve_basis, RandomStream(seed, EVE), intercept_fraction)
    current: dict = {"trial": None, "eve": None}

    def forward_with_interception():
        while True:
            line = alice_side.recv_line()
            if line is None:
                bob_side.close()
                return
            try:
                msg = decode(line)
            except CodecError:
                bob_side.send_line(line)
                continue
            if isinstance(msg, QuantumState):
                if current["trial"] != msg.trial_id:
                    current["trial"] = msg.trial_id
                    current["eve"] = root.for_trial(msg.trial_id)
                outcome, resent = current["eve"].maybe_intercept(state_from_message(msg))
                if outcome is None:
                    bob_side.send_line(line)
                else:
                    log.add(InterceptionRecord(msg.trial_id, msg.slot, outcome))
                    bob_side.send_line(encode(quantum_state_message(msg.trial_id, msg.slot, resent)))
            else:
                bob_side.send_line(line)

    def forward_plain():
        while True:
            line = bob_side.recv_line()
            if line is None:
                alice_side.close()
                return
            alice_side.send_line(line)

    towards_bob = threading.Thread(target=forward_with_interception, daemon=True)
    towards_alice = threading.Thread(target=forward_plain, daemon=True)
    towards_bob.start()
    towards_alice.start()
    towards_bob.join()
    towards_alice.join()
    return log


def run_mitm(
    listen: tuple, forward: tuple, eve_basis: Basis, seed: int, intercept_fraction: float = 1.0
) -> MitmLog:
    """Accept one connection (the state sender), dial the forward address
    (the receiver), and relay with interception until the session ends."""
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as server:
        server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            server.bind(listen)
            server.listen(1)
            server.settimeout(_RECV_TIMEOUT)
            conn, _ = server.accept()
        except OSError as exc:
            raise SessionError(f"mitm listen failed on {listen}: {exc}") from exc
    alice_side = TcpTransport(conn)
    try:
        bob_sock = socket.create_connection(forward, timeout=_RECV_TIMEOUT)
    except OSError as exc:
        alice_side.close()
        raise SessionError(f"mitm connect failed to {forward}: {exc}") from exc
    bob_side = TcpTransport(bob_sock)
    try:
        return run_mitm_pumps(alice_side, bob_side, eve_basis, seed, intercept_fraction)
    finally:
        alice_side.close()
        bob_side.close()


def serve_session(
    host: str,
    port: int,
    role: str,
    config: ProtocolConfig,
    n_trials: int,
    seed: int,
    basis_set_id: str = "custom",
    letters=None,
    compare: bool = True,
    ready_event: threading.Event | None = None,
):
    """Listen for one peer connection, then run the session as `role`."""
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as server:
        server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            server.bind((host, port))
            server.listen(1)
        except OSError as exc:
            raise SessionError(f"cannot listen on {host}:{port}: {exc}") from exc
        if ready_event is not None:
            ready_event.set()
        server.settimeout(_RECV_TIMEOUT)
        try:
            conn, _ = server.accept()
        except OSError as exc:
            raise SessionError(f"accept failed: {exc}") from exc
    transport = TcpTransport(conn)
    try:
        return run_session(role, transport, config, n_trials, seed, basis_set_id, letters, compare)
    finally:
        transport.close()


def connect_session(
    host: str,
    port: int,
    role: str,
    config: ProtocolConfig,
    n_trials: int,
    seed: int,
    basis_set_id: str = "custom",
    letters=None,
    compare: bool = True,
):
    """Dial a listening peer, then run the session as `role`."""
    try:
        sock = socket.create_connection((host, port), timeout=_RECV_TIMEOUT)
    except OSError as exc:
        raise SessionError(f"cannot connect to {host}:{port}: {exc}") from exc
    transport = TcpTransport(sock)
    try:
        return run_session(role, transport, config, n_trials, seed, basis_set_id, letters, compare)
    finally:
        transport.close()
