"""Wire protocol, data-centre daemons, user client, simulated network."""

from .client import DataCentreLink, RetrievalResult, UserClient
from .daemon import DataCentreDaemon, Phase, SessionState
from .frames import (
    HEADER_LEN,
    ErrorReason,
    Frame,
    MsgType,
    decode_frame,
    encode_frame,
    error_frame,
    error_reason,
)
from .network import AuditEvent, InProcessNetwork, LinkMonitor
from .sessions import (
    SessionGeometry,
    SessionSlices,
    decode_provision,
    encode_provision,
    new_session_id,
    reserve_mask_slice,
    reserve_user_slices,
    session_index,
)
from .tcp import DaemonServer, tcp_transport

__all__ = [
    "AuditEvent",
    "DataCentreDaemon",
    "DataCentreLink",
    "DaemonServer",
    "ErrorReason",
    "Frame",
    "HEADER_LEN",
    "InProcessNetwork",
    "LinkMonitor",
    "MsgType",
    "Phase",
    "RetrievalResult",
    "SessionGeometry",
    "SessionSlices",
    "SessionState",
    "UserClient",
    "decode_frame",
    "decode_provision",
    "encode_frame",
    "encode_provision",
    "error_frame",
    "error_reason",
    "new_session_id",
    "reserve_mask_slice",
    "reserve_user_slices",
    "session_index",
    "tcp_transport",
]
