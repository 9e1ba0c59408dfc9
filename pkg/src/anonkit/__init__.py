"""Reversible HMAC-SHA256 pseudonymization for incident-response data."""

__version__ = "0.1.0"

from .core import EntityType, PolicyConfig, RunContext, Span, Detection, validate_policy  # noqa: E402
from .pseudonym import compute_digest, format_token, make_slug, pseudonymize  # noqa: E402
from .processors import Engine, process_file  # noqa: E402
from .reidentify import Restorer, deanonymize_text  # noqa: E402
from .vault import open_vault  # noqa: E402

__all__ = [
    "Detection",
    "Engine",
    "EntityType",
    "PolicyConfig",
    "RunContext",
    "Span",
    "Restorer",
    "compute_digest",
    "deanonymize_text",
    "format_token",
    "make_slug",
    "open_vault",
    "process_file",
    "pseudonymize",
    "validate_policy",
]
