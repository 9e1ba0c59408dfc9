"""Shared vocabulary: entity types, spans, detections, policy and run context."""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import InvalidEntityType, MissingSecretKey, PolicyError

SECRET_KEY_ENV = "SECRET_KEY"

_NAME_RE = re.compile(r"[A-Z0-9_]+")
CUSTOM_PREFIX = "CUSTOM:"

BUILTIN_TYPE_NAMES = (
    "IP_ADDRESS",
    "EMAIL",
    "URL",
    "HOSTNAME",
    "HASH",
    "CERT_SERIAL",
    "CERT_BODY",
    "CPE_STRING",
    "CREDENTIAL",
)


@dataclass(frozen=True, order=True)
class EntityType:
    """A category of identifier, e.g. ``HASH`` or ``CUSTOM:TICKET``."""

    name: str

    def __post_init__(self) -> None:
        name = self.name
        if not isinstance(name, str) or not name:
            raise InvalidEntityType(f"entity type name must be a non-empty string: {name!r}")
        if name.startswith(CUSTOM_PREFIX):
            label = name[len(CUSTOM_PREFIX):]
            if not _NAME_RE.fullmatch(label):
                raise InvalidEntityType(f"bad custom label in {name!r}")
        elif name not in BUILTIN_TYPE_NAMES:
            raise InvalidEntityType(
                f"unknown entity type {name!r}; use one of {', '.join(BUILTIN_TYPE_NAMES)} "
                f"or {CUSTOM_PREFIX}<LABEL>"
            )

    @classmethod
    def parse(cls, text: str) -> "EntityType":
        return cls(text.strip())

    @classmethod
    def custom(cls, label: str) -> "EntityType":
        return cls(CUSTOM_PREFIX + label)

    @property
    def is_custom(self) -> bool:
        return self.name.startswith(CUSTOM_PREFIX)

    def __str__(self) -> str:
        return self.name


IP_ADDRESS = EntityType("IP_ADDRESS")
EMAIL = EntityType("EMAIL")
URL = EntityType("URL")
HOSTNAME = EntityType("HOSTNAME")
HASH = EntityType("HASH")
CERT_SERIAL = EntityType("CERT_SERIAL")
CERT_BODY = EntityType("CERT_BODY")
CPE_STRING = EntityType("CPE_STRING")
CREDENTIAL = EntityType("CREDENTIAL")

BUILTIN_TYPES = tuple(EntityType(n) for n in BUILTIN_TYPE_NAMES)


@dataclass(frozen=True, order=True)
class Span:
    """Half-open ``[start, end)`` range of UTF-8 byte offsets."""

    start: int
    end: int

    def __post_init__(self) -> None:
        if not (0 <= self.start < self.end):
            raise ValueError(f"invalid span [{self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start

    def overlaps(self, other: "Span") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class Detection:
    entity_type: EntityType
    span: Span
    text: str
    recognizer_id: str
    score: float = 1.0
    priority: int = 0
    preserved: bool = False
    # Leaf address inside a structured document ("" for plain text).
    location: str = ""

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score out of range: {self.score}")


class ByteOffsets:
    """Translate between str indices and UTF-8 byte offsets of one text."""

    def __init__(self, text: str):
        self.text = text
        self._ascii = text.isascii()
        if not self._ascii:
            table = [0] * (len(text) + 1)
            total = 0
            for i, ch in enumerate(text):
                table[i] = total
                total += len(ch.encode("utf-8"))
            table[len(text)] = total
            self._table = table
            self._reverse = {b: i for i, b in enumerate(table)}

    def to_bytes(self, index: int) -> int:
        return index if self._ascii else self._table[index]

    def to_index(self, offset: int) -> int:
        if self._ascii:
            return offset
        try:
            return self._reverse[offset]
        except KeyError:
            raise ValueError(f"byte offset {offset} is not on a character boundary") from None

    def span(self, start: int, end: int) -> Span:
        return Span(self.to_bytes(start), self.to_bytes(end))

    def slice(self, span: Span) -> str:
        return self.text[self.to_index(span.start):self.to_index(span.end)]


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


@dataclass(frozen=True)
class PolicyConfig:
    slug_length: int = 64
    allow_list: frozenset[str] = frozenset()
    preserve_entities: frozenset[EntityType] = frozenset()
    lang: str = "en"
    custom_patterns: tuple[tuple[str, str], ...] = ()
    scan_json_keys: bool = False

    def declared_custom_types(self) -> set[EntityType]:
        out = set()
        for label, _ in self.custom_patterns:
            try:
                out.add(EntityType.parse(label))
            except InvalidEntityType:
                pass
        return out


def policy_violations(policy: PolicyConfig, declared: set[EntityType] | frozenset = frozenset()) -> list[Violation]:
    """Collect every invariant violation of ``policy`` (empty list when valid)."""
    found: list[Violation] = []
    if not isinstance(policy.slug_length, int) or not 1 <= policy.slug_length <= 64:
        found.append(Violation("SlugLengthOutOfRange", f"slug_length must be in 1..64, got {policy.slug_length!r}"))
    for entry in sorted(policy.allow_list):
        if not entry:
            found.append(Violation("EmptyAllowListEntry", "allow-list contains an empty entry"))
    for label, source in policy.custom_patterns:
        try:
            etype = EntityType.parse(label)
        except InvalidEntityType as exc:
            found.append(Violation("MalformedCustomPattern", str(exc)))
            continue
        if not etype.is_custom:
            found.append(Violation("MalformedCustomPattern", f"{label!r} is not a {CUSTOM_PREFIX} label"))
        try:
            compiled = re.compile(source)
        except re.error as exc:
            found.append(Violation("MalformedCustomPattern", f"{label}: {exc}"))
            continue
        if compiled.fullmatch("") is not None:
            found.append(Violation("MalformedCustomPattern", f"{label}: pattern matches the empty string"))
    known = set(BUILTIN_TYPES) | policy.declared_custom_types() | set(declared)
    for etype in sorted(policy.preserve_entities):
        if etype not in known:
            found.append(Violation("UnknownPreservedEntity", f"{etype} is neither built in nor declared"))
    return found


def validate_policy(policy: PolicyConfig, declared: set[EntityType] | frozenset = frozenset()) -> PolicyConfig:
    """Return ``policy`` unchanged, or raise :class:`PolicyError` listing all violations."""
    violations = policy_violations(policy, declared)
    if violations:
        raise PolicyError(violations)
    return policy


def split_csv_flag(value: str | None) -> list[str]:
    """Split a comma-separated flag value, trimming blanks around items."""
    if not value:
        return []
    return [item.strip() for item in value.split(",") if item.strip()]


@dataclass(frozen=True)
class RunContext:
    secret_key: bytes
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    vault_path: Path = Path("entities.ndjson")
    audit_actor: str = "unknown"

    def __post_init__(self) -> None:
        if not self.secret_key:
            raise MissingSecretKey(f"secret key is empty; set the {SECRET_KEY_ENV} environment variable")

    @classmethod
    def from_env(cls, policy: PolicyConfig | None = None, vault_path: Path | str = "entities.ndjson",
                 audit_actor: str | None = None, environ=None) -> "RunContext":
        env = os.environ if environ is None else environ
        raw = env.get(SECRET_KEY_ENV, "")
        if not raw:
            raise MissingSecretKey(
                f"{SECRET_KEY_ENV} is not set; export {SECRET_KEY_ENV}=<secret> before running"
            )
        actor = audit_actor or env.get("USER") or env.get("USERNAME") or "unknown"
        return cls(
            secret_key=raw.encode("utf-8"),
            policy=policy or PolicyConfig(),
            vault_path=Path(vault_path),
            audit_actor=actor,
        )

    def with_policy(self, **changes) -> "RunContext":
        return replace(self, policy=replace(self.policy, **changes))
