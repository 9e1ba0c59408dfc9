"""Mapping vault (``entities.ndjson``) and append-only audit log (``audit.ndjson``).

Both files are UTF-8, LF-terminated, one JSON object per line. The entity file
holds original values in clear text, so it must be protected like the key.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
from dataclasses import dataclass
from pathlib import Path

from .core import EntityType
from .errors import (
    CorruptRecordLine,
    DuplicateDigest,
    DuplicateSlug,
    InvalidAuditEvent,
    InvalidEntityType,
    SlugConflict,
    VaultMissing,
    VaultWriteFailure,
)
from .pseudonym import utc_now

logger = logging.getLogger(__name__)

AUDIT_FILENAME = "audit.ndjson"
AUDIT_ACTIONS = frozenset({"ANONYMIZE", "DEANONYMIZE", "LOOKUP", "EXPORT"})
RECORD_KEYS = ("digest", "slug", "type", "value", "first_seen", "source")

_DIGEST_RE = re.compile(r"[0-9a-f]{64}")
_SLUG_RE = re.compile(r"[0-9a-f]{1,64}")
_RFC3339_RE = re.compile(
    r"\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}(?:\.\d+)?(?:Z|[+-]\d{2}:\d{2})"
)


@dataclass(frozen=True)
class PseudonymRecord:
    digest_hex: str
    slug: str
    entity_type: EntityType
    original_value: str
    first_seen: str
    source: str = ""

    def problems(self) -> list[str]:
        out = []
        if not _DIGEST_RE.fullmatch(self.digest_hex):
            out.append("digest is not 64 lowercase hex chars")
        if not _SLUG_RE.fullmatch(self.slug) or not self.digest_hex.startswith(self.slug):
            out.append("slug is not a hex prefix of the digest")
        if not self.original_value:
            out.append("empty original value")
        if not _RFC3339_RE.fullmatch(self.first_seen):
            out.append("first_seen is not an RFC 3339 timestamp")
        return out

    def to_json(self) -> str:
        return json.dumps(
            {
                "digest": self.digest_hex,
                "slug": self.slug,
                "type": self.entity_type.name,
                "value": self.original_value,
                "first_seen": self.first_seen,
                "source": self.source,
            },
            ensure_ascii=False,
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> "PseudonymRecord":
        data = json.loads(line)
        if not isinstance(data, dict):
            raise ValueError("record is not a JSON object")
        missing = [k for k in RECORD_KEYS if k not in data]
        if missing:
            raise ValueError(f"missing keys {missing}")
        if not all(isinstance(data[k], str) for k in RECORD_KEYS):
            raise ValueError("all record fields must be strings")
        return cls(
            digest_hex=data["digest"],
            slug=data["slug"],
            entity_type=EntityType.parse(data["type"]),
            original_value=data["value"],
            first_seen=data["first_seen"],
            source=data["source"],
        )


@dataclass(frozen=True)
class AuditEvent:
    actor: str
    action: str
    slug: str = ""
    detail: str = ""
    timestamp: str = ""

    def validated(self) -> "AuditEvent":
        if self.action not in AUDIT_ACTIONS:
            raise InvalidAuditEvent(f"unknown audit action {self.action!r}")
        if self.slug and not _SLUG_RE.fullmatch(self.slug):
            raise InvalidAuditEvent(f"bad slug {self.slug!r}")
        ts = self.timestamp or utc_now()
        if not _RFC3339_RE.fullmatch(ts):
            raise InvalidAuditEvent(f"bad timestamp {ts!r}")
        return AuditEvent(self.actor, self.action, self.slug, self.detail, ts)

    def to_json(self) -> str:
        return json.dumps(
            {
                "timestamp": self.timestamp,
                "actor": self.actor,
                "action": self.action,
                "slug": self.slug,
                "detail": self.detail,
            },
            ensure_ascii=False,
            separators=(",", ":"),
        )


def _append_line(path: Path, line: str) -> None:
    try:
        with open(path, "a", encoding="utf-8", newline="\n") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())
    except OSError as exc:
        raise VaultWriteFailure(f"cannot append to {path}: {exc}") from exc


class Vault:
    """In-memory index over an ``entities.ndjson`` store.

    Mutations go through :attr:`lock`; readers may use the indexes freely once
    the vault is loaded.
    """

    def __init__(self, path: Path | str, audit_path: Path | str | None = None):
        self.path = Path(path)
        self.audit_path = Path(audit_path) if audit_path else self.path.with_name(AUDIT_FILENAME)
        self.lock = threading.RLock()
        self._by_digest: dict[str, PseudonymRecord] = {}
        self._by_slug: dict[str, PseudonymRecord] = {}

    def __len__(self) -> int:
        return len(self._by_digest)

    def __iter__(self):
        return iter(list(self._by_digest.values()))

    def _load(self) -> None:
        if not self.path.exists():
            return
        with open(self.path, encoding="utf-8", newline="") as fh:
            for line_no, raw in enumerate(fh, start=1):
                line = raw.rstrip("\n")
                if not line.strip():
                    continue
                try:
                    record = PseudonymRecord.from_json(line)
                except (ValueError, InvalidEntityType) as exc:
                    raise CorruptRecordLine(self.path, line_no, str(exc)) from None
                problems = record.problems()
                if problems:
                    raise CorruptRecordLine(self.path, line_no, "; ".join(problems))
                if record.digest_hex in self._by_digest:
                    raise DuplicateDigest(f"{self.path}:{line_no}: digest {record.digest_hex} repeated")
                if record.slug in self._by_slug:
                    raise DuplicateSlug(f"{self.path}:{line_no}: slug {record.slug} repeated")
                self._index(record)

    def _index(self, record: PseudonymRecord) -> None:
        self._by_digest[record.digest_hex] = record
        self._by_slug[record.slug] = record

    def get_by_digest(self, digest_hex: str) -> PseudonymRecord | None:
        return self._by_digest.get(digest_hex)

    def get_by_slug(self, slug: str) -> PseudonymRecord | None:
        return self._by_slug.get(slug)

    def upsert_record(self, record: PseudonymRecord) -> PseudonymRecord:
        problems = record.problems()
        if problems:
            raise ValueError("; ".join(problems))
        with self.lock:
            existing = self._by_digest.get(record.digest_hex)
            if existing is not None:
                return existing
            holder = self._by_slug.get(record.slug)
            if holder is not None:
                raise SlugConflict(f"slug {record.slug} already bound to digest {holder.digest_hex}")
            _append_line(self.path, record.to_json())
            self._index(record)
            return record

    def lookup_by_slug(self, slug: str, actor: str = "unknown", audit: bool = True) -> PseudonymRecord | None:
        """Exact slug match; records a LOOKUP audit event unless ``audit`` is false."""
        record = self._by_slug.get(slug)
        if audit:
            self.append_audit(AuditEvent(actor, "LOOKUP", slug if _SLUG_RE.fullmatch(slug or "") else "",
                                         "hit" if record else "miss"))
        return record

    def list_entities(self, entity_type: EntityType | None = None) -> list[PseudonymRecord]:
        records = [r for r in self._by_digest.values() if entity_type is None or r.entity_type == entity_type]
        records.sort(key=lambda r: (r.entity_type.name, r.original_value))
        return records

    def append_audit(self, event: AuditEvent) -> AuditEvent:
        event = event.validated()
        with self.lock:
            _append_line(self.audit_path, event.to_json())
        return event

    def read_audit(self) -> list[dict]:
        if not self.audit_path.exists():
            return []
        with open(self.audit_path, encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]


def open_vault(path: Path | str, must_exist: bool = False) -> Vault:
    """Load the vault at ``path``; an absent file is an empty vault unless ``must_exist``."""
    path = Path(path)
    if not path.parent.is_dir():
        raise VaultMissing(f"vault directory {path.parent} does not exist")
    if must_exist and not path.exists():
        raise VaultMissing(f"vault {path} not found")
    vault = Vault(path)
    vault._load()
    logger.debug("loaded %d records from %s", len(vault), path)
    return vault


# Module-level spellings matching the rest of the API.

def upsert_record(vault: Vault, record: PseudonymRecord) -> PseudonymRecord:
    return vault.upsert_record(record)


def lookup_by_slug(vault: Vault, slug: str, actor: str = "unknown") -> PseudonymRecord | None:
    return vault.lookup_by_slug(slug, actor)


def list_entities(vault: Vault, entity_type: EntityType | None = None) -> list[PseudonymRecord]:
    return vault.list_entities(entity_type)


def append_audit(vault: Vault, event: AuditEvent) -> AuditEvent:
    return vault.append_audit(event)
