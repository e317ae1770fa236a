"""
TCP front end for the broker: one thread per client connection.
"""

from __future__ import annotations

import itertools
import logging
import socket
import threading
import time
from typing import Callable

from .broker import Broker, BrokerResult
from .codec import encode

logger = logging.getLogger(__name__)

_POLL_INTERVAL_S = 0.2


def wall_clock_ms() -> int:
    return int(time.time() * 1000)


class MqttServer:
    """
    Accepts MQTT connections and feeds their bytes to a Broker.

    A malformed or misbehaving client only loses its own connection.

    Attributes:
        broker (Broker): Protocol handler shared by all connections.
        host (str): Interface to bind.
        port (int): Port to bind; 0 picks a free port (see `address`).
    """

    def __init__(
        self,
        broker: Broker,
        host: str = "0.0.0.0",
        port: int = 1883,
        clock: Callable[[], int] = wall_clock_ms,
    ) -> None:
        self.broker = broker
        self.host = host
        self.port = port
        self.clock = clock
        self._server_sock: socket.socket | None = None
        self._clients: dict[str, socket.socket] = {}
        self._send_locks: dict[str, threading.Lock] = {}
        self._lock = threading.Lock()
        self._accept_thread: threading.Thread | None = None
        self._threads: dict[str, threading.Thread] = {}
        self._stop = threading.Event()
        self._ids = itertools.count(1)

    @property
    def address(self) -> tuple[str, int]:
        if self._server_sock is None:
            raise RuntimeError("server not started")
        host, port = self._server_sock.getsockname()[:2]
        return host, port

    def start(self) -> None:
        """
        Bind, listen and start accepting in a background thread.

        Raises:
            OSError: If the port cannot be bound.
        """
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            sock.bind((self.host, self.port))
        except OSError:
            sock.close()
            raise
        sock.listen(16)
        sock.settimeout(_POLL_INTERVAL_S)
        self._server_sock = sock
        logger.info("MQTT broker listening on %s:%d", *self.address)
        self._accept_thread = threading.Thread(
            target=self._accept_loop, name="mqtt-accept", daemon=True
        )
        self._accept_thread.start()

    @property
    def connection_count(self) -> int:
        """Number of client connections still being served."""
        with self._lock:
            return len(self._threads)

    def serve_forever(self, duration_s: float | None = None) -> None:
        """
        Start if needed and block until `stop()` is called, `duration_s`
        seconds pass or the process is interrupted. The server is stopped on
        return.

        Raises:
            OSError: If the server was not started and the port cannot be bound.
        """
        if self._server_sock is None:
            self.start()
        deadline = None if duration_s is None else time.monotonic() + duration_s
        try:
            while not self._stop.wait(_POLL_INTERVAL_S):
                if deadline is not None and time.monotonic() >= deadline:
                    break
        finally:
            self.stop()

    def stop(self) -> None:
        self._stop.set()
        if self._server_sock is not None:
            self._server_sock.close()
        with self._lock:
            clients = list(self._clients.values())
            threads = list(self._threads.values())
        for client in clients:
            try:
                client.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
        if self._accept_thread is not None:
            threads.append(self._accept_thread)
        for thread in threads:
            if thread is not threading.current_thread():
                thread.join(timeout=2.0)
        logger.info("MQTT broker stopped")

    def _accept_loop(self) -> None:
        assert self._server_sock is not None
        while not self._stop.is_set():
            try:
                client_sock, addr = self._server_sock.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            connection_id = f"{addr[0]}:{addr[1]}#{next(self._ids)}"
            logger.info("connection %s opened", connection_id)
            thread = threading.Thread(
                target=self._handle_client,
                args=(client_sock, connection_id),
                name=f"mqtt-{connection_id}",
                daemon=True,
            )
            with self._lock:
                self._threads[connection_id] = thread
            thread.start()

    def _send(self, connection_id: str, data: bytes) -> None:
        with self._lock:
            sock = self._clients.get(connection_id)
            send_lock = self._send_locks.get(connection_id)
        if sock is None or send_lock is None:
            return
        try:
            with send_lock:
                sock.sendall(data)
        except OSError as e:
            logger.warning("send to %s failed: %s", connection_id, e)

    def _dispatch(self, connection_id: str, result: BrokerResult) -> None:
        if result.responses:
            self._send(connection_id, b"".join(encode(p) for p in result.responses))
        for delivery in result.deliveries:
            self._send(delivery.connection_id, encode(delivery.packet))

    def _handle_client(self, client_sock: socket.socket, connection_id: str) -> None:
        conn = self.broker.open_connection(connection_id)
        client_sock.settimeout(_POLL_INTERVAL_S)
        with self._lock:
            self._clients[connection_id] = client_sock
            self._send_locks[connection_id] = threading.Lock()
        try:
            while not self._stop.is_set():
                try:
                    data = client_sock.recv(4096)
                except socket.timeout:
                    continue
                except OSError:
                    break
                if not data:
                    break
                result = self.broker.feed(conn, data, self.clock())
                self._dispatch(connection_id, result)
                if result.close:
                    break
        except Exception:
            logger.exception("connection %s crashed", connection_id)
        finally:
            self.broker.close_connection(conn)
            with self._lock:
                self._clients.pop(connection_id, None)
                self._send_locks.pop(connection_id, None)
                self._threads.pop(connection_id, None)
            client_sock.close()
            logger.info("connection %s closed", connection_id)
