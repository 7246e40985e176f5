"""Socket transport speaking the same frames as the in-process network.

One request per connection: the client opens a connection, writes one
frame, reads reply frames until the server closes. The daemon object is
shared across connections, so sessions span requests naturally.
"""

from __future__ import annotations

import socket
import socketserver
import threading

from ..errors import FramingError
from .daemon import DataCentreDaemon
from .frames import HEADER_LEN, Frame, decode_frame, encode_frame


def _recv_exact(sock: socket.socket, count: int) -> bytes | None:
    buf = b""
    while len(buf) < count:
        chunk = sock.recv(count - len(buf))
        if not chunk:
            return None if not buf else buf
        buf += chunk
    return buf


def read_frame(sock: socket.socket) -> Frame | None:
    """Read one frame off a stream; None on clean EOF."""
    header = _recv_exact(sock, HEADER_LEN)
    if header is None:
        return None
    if len(header) < HEADER_LEN:
        raise FramingError("connection closed mid-header")
    payload_len = int.from_bytes(header[HEADER_LEN - 4:], "big")
    payload = b""
    if payload_len:
        payload = _recv_exact(sock, payload_len)
        if payload is None or len(payload) < payload_len:
            raise FramingError("connection closed mid-payload")
    return decode_frame(header + payload)


class DaemonServer(socketserver.ThreadingTCPServer):
    """Serves one data-centre daemon over TCP."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], daemon: DataCentreDaemon):
        self.dc_daemon = daemon
        super().__init__(address, _DaemonHandler)

    def serve_in_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread


class _DaemonHandler(socketserver.BaseRequestHandler):
    def handle(self):
        frame = read_frame(self.request)
        if frame is None:
            return
        replies = self.server.dc_daemon.handle_frame(frame, "user")
        for reply in replies:
            self.request.sendall(encode_frame(reply))


def tcp_transport(host: str, port: int):
    """A client-side request function for one daemon endpoint."""

    def request(frame: Frame) -> list[Frame]:
        with socket.create_connection((host, port)) as sock:
            sock.sendall(encode_frame(frame))
            sock.shutdown(socket.SHUT_WR)
            replies = []
            while True:
                reply = read_frame(sock)
                if reply is None:
                    return replies
                replies.append(reply)

    return request
