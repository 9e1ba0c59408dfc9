"""Controlled re-identification of ``<TYPE_slug>`` tokens.

Every token is resolved and its vault record re-verified with the current key
before anything is substituted. A single failed verification aborts the whole
document with :class:`KeyMismatch` and nothing is written or audited.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .core import EntityType, RunContext
from .errors import InvalidEntityType, KeyMismatch
from .processors import IMAGE, TEXT, detect_format, output_path, processor_for, read_bytes
from .pseudonym import TOKEN_RE, compute_digest
from .vault import AuditEvent, PseudonymRecord, Vault


@dataclass
class RestoreReport:
    source: Path
    format: str
    restored: int = 0
    unknown: list[str] = field(default_factory=list)
    output: Path | None = None


class Restorer:
    def __init__(self, ctx: RunContext, vault: Vault):
        self.ctx = ctx
        self.vault = vault

    def resolve(self, rendered_type: str, slug: str) -> PseudonymRecord | None:
        """Return the verified record for a token, ``None`` if unknown.

        Raises KeyMismatch when the record exists but its digest does not
        match the current key.
        """
        try:
            etype = EntityType.parse(rendered_type)
        except InvalidEntityType:
            return None
        record = self.vault.lookup_by_slug(slug, self.ctx.audit_actor, audit=False)
        if record is None or record.entity_type != etype:
            return None
        digest = compute_digest(self.ctx.secret_key, record.entity_type, record.original_value)
        if digest.hex != record.digest_hex:
            raise KeyMismatch(
                f"vault record for slug {slug} does not verify under the supplied key "
                "(wrong SECRET_KEY or tampered vault)"
            )
        return record

    def restore_text(self, text: str, counter: list[str], unknown: list[str],
                     cache: dict) -> str:
        def sub(m):
            key = (m.group(1), m.group(2))
            if key not in cache:
                cache[key] = self.resolve(*key)
            record = cache[key]
            if record is None:
                unknown.append(m.group(0))
                return m.group(0)
            counter.append(record.slug)
            return record.original_value
        return TOKEN_RE.sub(sub, text)

    def restore_document(self, path: Path | str, out: Path | str | None = None,
                         fmt: str | None = None) -> RestoreReport:
        path = Path(path)
        fmt = fmt or detect_format(path)
        if fmt == IMAGE:
            fmt = TEXT
        processor = processor_for(fmt)
        content = processor.load(read_bytes(path))

        restored: list[str] = []
        unknown: list[str] = []
        cache: dict = {}
        # Substitution stays in memory, so a KeyMismatch aborts before any output or audit line.
        result = processor.rewrite(content, lambda s, _loc: self.restore_text(s, restored, unknown, cache),
                                   keys=True)

        for slug in restored:
            self.vault.append_audit(AuditEvent(self.ctx.audit_actor, "DEANONYMIZE", slug, f"source={path}"))
        target = Path(out) if out else output_path(path, "restored")
        target.write_bytes(processor.dump(result))
        return RestoreReport(path, fmt, len(restored), unknown, target)


def deanonymize_text(text: str, ctx: RunContext, vault: Vault) -> tuple[str, int, list[str]]:
    """Restore tokens in a plain string; returns ``(text, restored, unknown_tokens)``."""
    restorer = Restorer(ctx, vault)
    restored: list[str] = []
    unknown: list[str] = []
    out = restorer.restore_text(text, restored, unknown, {})
    for slug in restored:
        vault.append_audit(AuditEvent(ctx.audit_actor, "DEANONYMIZE", slug, "source=<text>"))
    return out, len(restored), unknown
