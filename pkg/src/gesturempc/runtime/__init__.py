from .messages import FramingError, Kind, Message, decode_message, encode_message
from .session import (
    PartyContext,
    PartyEngine,
    ReferenceContext,
    RevealDeniedError,
    SessionConfig,
    SessionError,
    SessionResult,
    program_hash,
    run_reference,
    run_session,
)
from .transport import SessionAbort, inproc_mesh, tcp_mesh

__all__ = [
    "FramingError",
    "Kind",
    "Message",
    "decode_message",
    "encode_message",
    "PartyContext",
    "PartyEngine",
    "ReferenceContext",
    "RevealDeniedError",
    "SessionConfig",
    "SessionError",
    "SessionResult",
    "program_hash",
    "run_reference",
    "run_session",
    "SessionAbort",
    "inproc_mesh",
    "tcp_mesh",
]
