"""Keyed pseudonyms: HMAC-SHA256 digests, hex slugs and ``<TYPE_slug>`` tokens."""

from __future__ import annotations

import hashlib
import hmac
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import TYPE_CHECKING

from .core import EntityType, RunContext
from .errors import (
    EmptyKey,
    EmptyValue,
    InvalidEntityType,
    LengthOutOfRange,
    MalformedSlug,
    SlugConflict,
    SlugSpaceExhausted,
)

if TYPE_CHECKING:
    from .vault import Vault

UNIT_SEPARATOR = b"\x1f"
MAX_SLUG = 64

_SLUG_RE = re.compile(r"[0-9a-f]{1,64}")
# Complement of format_token; the type part never contains lowercase hex.
TOKEN_RE = re.compile(r"<([A-Z0-9_:]+)_([0-9a-f]{1,64})>")


@dataclass(frozen=True)
class Digest256:
    bytes: bytes

    def __post_init__(self) -> None:
        if len(self.bytes) != 32:
            raise ValueError(f"digest must be 32 bytes, got {len(self.bytes)}")

    @property
    def hex(self) -> str:
        return self.bytes.hex()

    @classmethod
    def from_hex(cls, value: str) -> "Digest256":
        if len(value) != 64 or value != value.lower():
            raise ValueError(f"digest hex must be 64 lowercase chars: {value!r}")
        return cls(bytes.fromhex(value))


@dataclass(frozen=True)
class Token:
    entity_type: EntityType
    slug: str

    @property
    def rendered(self) -> str:
        return f"<{self.entity_type.name}_{self.slug}>"

    def __str__(self) -> str:
        return self.rendered


def hmac_sha256(key: bytes, message: bytes) -> bytes:
    """Raw HMAC-SHA256 primitive."""
    return hmac.new(key, message, hashlib.sha256).digest()


def canonical_input(entity_type: EntityType, value: str) -> bytes:
    """Message fed to the MAC: type name, 0x1F, value (no normalization)."""
    if not value:
        raise EmptyValue("cannot pseudonymize an empty value")
    return entity_type.name.encode("utf-8") + UNIT_SEPARATOR + value.encode("utf-8")


def compute_digest(key: bytes, entity_type: EntityType, value: str) -> Digest256:
    if not key:
        raise EmptyKey("HMAC key must not be empty")
    return Digest256(hmac_sha256(key, canonical_input(entity_type, value)))


def make_slug(digest: Digest256, length: int) -> str:
    if not isinstance(length, int) or not 1 <= length <= MAX_SLUG:
        raise LengthOutOfRange(f"slug length must be in 1..{MAX_SLUG}, got {length!r}")
    return digest.hex[:length]


def format_token(entity_type: EntityType, slug: str) -> Token:
    if not _SLUG_RE.fullmatch(slug or ""):
        raise MalformedSlug(f"slug must be 1-64 lowercase hex characters: {slug!r}")
    return Token(entity_type, slug)


def parse_token(rendered: str) -> Token:
    """Inverse of :func:`format_token`."""
    m = TOKEN_RE.fullmatch(rendered)
    if not m:
        raise MalformedSlug(f"not a token: {rendered!r}")
    try:
        etype = EntityType.parse(m.group(1))
    except InvalidEntityType as exc:
        raise MalformedSlug(f"not a token: {rendered!r} ({exc})") from None
    return Token(etype, m.group(2))


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds").replace("+00:00", "Z")


def pseudonymize(ctx: RunContext, vault: "Vault", entity_type: EntityType, value: str,
                 source: str = "") -> Token:
    """Return the stable token for ``value``, recording it in ``vault``.

    The slug starts at ``ctx.policy.slug_length`` hex characters and grows one
    character at a time while the vault already binds that slug to another
    digest. A value already in the vault always gets its stored slug back.
    """
    from .vault import PseudonymRecord

    digest = compute_digest(ctx.secret_key, entity_type, value)
    hexd = digest.hex
    with vault.lock:
        existing = vault.get_by_digest(hexd)
        if existing is not None:
            return format_token(existing.entity_type, existing.slug)
        for length in range(ctx.policy.slug_length, MAX_SLUG + 1):
            slug = hexd[:length]
            holder = vault.get_by_slug(slug)
            if holder is not None and holder.digest_hex != hexd:
                continue
            record = PseudonymRecord(
                digest_hex=hexd,
                slug=slug,
                entity_type=entity_type,
                original_value=value,
                first_seen=utc_now(),
                source=source,
            )
            try:
                stored = vault.upsert_record(record)
            except SlugConflict:
                continue
            return format_token(stored.entity_type, stored.slug)
    raise SlugSpaceExhausted(f"every prefix of {hexd} is bound to a different digest")


def collision_bound(n: int, bits: int = 256) -> float:
    """Birthday upper bound on any collision among ``n`` uniform ``bits``-bit values."""
    return n * n / 2.0 ** (bits + 1)
