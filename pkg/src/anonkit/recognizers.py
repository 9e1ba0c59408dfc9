"""Pattern recognizers for technical and personal identifiers.

A :class:`RecognizerRegistry` bundles regex recognizers and a verbatim
dictionary. :func:`recognize_all` runs the whole registry over a text, drops
allow-listed matches, resolves overlaps and flags preserved types.
"""

from __future__ import annotations

import functools
import ipaddress
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping

from .core import (
    CERT_BODY,
    CERT_SERIAL,
    CPE_STRING,
    CREDENTIAL,
    EMAIL,
    HASH,
    HOSTNAME,
    IP_ADDRESS,
    URL,
    ByteOffsets,
    Detection,
    EntityType,
    PolicyConfig,
)
from .errors import DeclarationError, EmptyTerm, InvalidEntityType, PatternRuntimeFailure
from .pseudonym import TOKEN_RE

DEFAULT_CREDENTIAL_KEYWORDS = ("password", "passwd", "pwd", "secret", "token", "apikey")

# Higher wins when two candidate spans have the same length.
PRIORITY = {
    "CERT_BODY": 100,
    "CPE_STRING": 90,
    "URL": 80,
    "EMAIL": 70,
    "IP_ADDRESS": 60,
    "CERT_SERIAL": 50,
    "HASH": 40,
    "HOSTNAME": 30,
    "CREDENTIAL": 20,
    "CUSTOM": 10,
    "DICTIONARY": 0,
}

_OCTET = r"(?:25[0-5]|2[0-4][0-9]|1[0-9][0-9]|[1-9]?[0-9])"
IPV4_RE = re.compile(rf"(?<![\w.]){_OCTET}(?:\.{_OCTET}){{3}}(?![\w]|\.\d)")

_H16 = r"[0-9A-Fa-f]{1,4}"
_IPV6_BODY = "|".join([
    rf"(?:{_H16}:){{7}}{_H16}",
    rf"(?:{_H16}:){{1,7}}:",
    rf"(?:{_H16}:){{1,6}}:{_H16}",
    rf"(?:{_H16}:){{1,5}}(?::{_H16}){{1,2}}",
    rf"(?:{_H16}:){{1,4}}(?::{_H16}){{1,3}}",
    rf"(?:{_H16}:){{1,3}}(?::{_H16}){{1,4}}",
    rf"(?:{_H16}:){{1,2}}(?::{_H16}){{1,5}}",
    rf"{_H16}:(?::{_H16}){{1,6}}",
    rf":(?::{_H16}){{1,7}}",
])
IPV6_RE = re.compile(rf"(?<![\w:.])(?:{_IPV6_BODY})(?![\w:])")

EMAIL_RE = re.compile(r"(?<![\w.%+-])[A-Za-z0-9._%+-]+@(?:[A-Za-z0-9](?:[A-Za-z0-9-]*[A-Za-z0-9])?\.)+[A-Za-z]{2,63}(?![\w-])")

_URL_TAIL_STOP = r"\s<>\"'`"
URL_RE = re.compile(
    rf"(?<![\w+.-])[A-Za-z][A-Za-z0-9+.-]*://[^{_URL_TAIL_STOP}]*[^{_URL_TAIL_STOP}.,;:!?)\]}}]"
)

HOSTNAME_RE = re.compile(
    r"(?<![\w.@-])(?:[a-z0-9](?:[a-z0-9-]{0,61}[a-z0-9])?\.)+[a-z]{2,63}(?![\w-]|\.[\w-])",
    re.IGNORECASE,
)

HASH_RE = re.compile(
    r"(?<![0-9A-Za-z_])(?:[0-9A-Fa-f]{64}|[0-9A-Fa-f]{40}|[0-9A-Fa-f]{32})(?![0-9A-Za-z_])"
)

CERT_SERIAL_RE = re.compile(
    r"(?<![0-9A-Za-z_])(?<![0-9A-Fa-f]:)[0-9A-Fa-f]{2}(?::[0-9A-Fa-f]{2}){5,}(?![0-9A-Za-z_]|:[0-9A-Fa-f])"
)

CERT_BODY_RE = re.compile(
    r"-----BEGIN CERTIFICATE-----(?:(?!-----BEGIN CERTIFICATE-----).)*?-----END CERTIFICATE-----",
    re.DOTALL,
)

_CPE_STOP = r"\s<>\"'`"
CPE_RE = re.compile(
    rf"(?<![\w])cpe:(?:/[aho]|2\.3:[aho*-])(?:[^{_CPE_STOP}]*[^{_CPE_STOP}.,;)\]}}])?",
    re.IGNORECASE,
)


def credential_pattern(keywords: Iterable[str] = DEFAULT_CREDENTIAL_KEYWORDS) -> re.Pattern[str]:
    """Keyword, ``:`` or ``=``, then the value; only the value is the entity."""
    words = "|".join(re.escape(k) for k in sorted(set(keywords), key=len, reverse=True))
    return re.compile(
        rf"(?<![A-Za-z0-9])(?:{words})\s*[:=]\s*[\"']?(?P<value>[^\s\"']+)",
        re.IGNORECASE,
    )


@functools.lru_cache(maxsize=4096)
def _term_pattern(term: str) -> re.Pattern[str]:
    return re.compile(rf"(?<!\w){re.escape(term)}(?!\w)")


def _valid_ipv6(text: str) -> bool:
    if ":" not in text or not any(c in "0123456789abcdefABCDEF" for c in text):
        return False
    # Colon-joined byte pairs are certificate serials / MACs, not addresses.
    if "::" not in text and all(len(g) == 2 for g in text.split(":")):
        return False
    try:
        ipaddress.IPv6Address(text)
    except ValueError:
        return False
    return True


def _not_all_decimal(text: str) -> bool:
    return not text.isdigit()


@dataclass(frozen=True)
class Recognizer:
    id: str
    entity_type: EntityType
    pattern: re.Pattern[str]
    priority: int = 0
    group: int | str = 0
    validator: Callable[[str], bool] | None = None
    score: float = 1.0

    def find(self, text: str, offsets: ByteOffsets | None = None) -> list[Detection]:
        offsets = offsets or ByteOffsets(text)
        found = []
        try:
            for m in self.pattern.finditer(text):
                start, end = m.span(self.group)
                if start < 0 or start == end:
                    continue
                value = text[start:end]
                if self.validator is not None and not self.validator(value):
                    continue
                found.append(Detection(
                    entity_type=self.entity_type,
                    span=offsets.span(start, end),
                    text=value,
                    recognizer_id=self.id,
                    score=self.score,
                    priority=self.priority,
                ))
        except Exception as exc:  # noqa: BLE001 - reported with the recognizer id
            raise PatternRuntimeFailure(self.id, exc) from exc
        return found


@dataclass(frozen=True)
class RecognizerRegistry:
    recognizers: tuple[Recognizer, ...] = ()
    dictionary_terms: Mapping[str, EntityType] = field(default_factory=dict)

    def __post_init__(self) -> None:
        ids = [r.id for r in self.recognizers]
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        if dupes:
            raise ValueError(f"duplicate recognizer ids: {dupes}")
        for term in self.dictionary_terms:
            if not term:
                raise EmptyTerm("dictionary terms must be non-empty")

    def by_id(self, rid: str) -> Recognizer:
        for r in self.recognizers:
            if r.id == rid:
                return r
        raise KeyError(rid)

    def with_recognizers(self, extra: Iterable[Recognizer]) -> "RecognizerRegistry":
        return replace(self, recognizers=self.recognizers + tuple(extra))

    def with_pattern(self, entity_type: EntityType, source: str, rid: str | None = None,
                     priority: int | None = None) -> "RecognizerRegistry":
        if priority is None:
            priority = PRIORITY["CUSTOM"] if entity_type.is_custom else PRIORITY.get(entity_type.name, 0)
        rid = rid or f"pattern:{entity_type.name}:{len(self.recognizers)}"
        return self.with_recognizers([Recognizer(rid, entity_type, re.compile(source), priority)])

    def with_custom_patterns(self, patterns: Iterable[tuple[str, str]]) -> "RecognizerRegistry":
        reg = self
        for label, source in patterns:
            reg = reg.with_pattern(EntityType.parse(label), source, rid=f"custom:{label}:{len(reg.recognizers)}")
        return reg

    def custom_types(self) -> set[EntityType]:
        types = {r.entity_type for r in self.recognizers if r.entity_type.is_custom}
        types |= {t for t in self.dictionary_terms.values() if t.is_custom}
        return types

    def dictionary_detections(self, text: str, offsets: ByteOffsets | None = None) -> list[Detection]:
        if not self.dictionary_terms:
            return []
        offsets = offsets or ByteOffsets(text)
        found = []
        for term, etype in self.dictionary_terms.items():
            pat = _term_pattern(term)
            for m in pat.finditer(text):
                found.append(Detection(
                    entity_type=etype,
                    span=offsets.span(m.start(), m.end()),
                    text=m.group(0),
                    recognizer_id=f"dictionary:{etype.name}",
                    priority=PRIORITY["DICTIONARY"],
                ))
        return found


def builtin_registry(credential_keywords: Iterable[str] = DEFAULT_CREDENTIAL_KEYWORDS) -> RecognizerRegistry:
    p = PRIORITY
    return RecognizerRegistry(recognizers=(
        Recognizer("cert_body", CERT_BODY, CERT_BODY_RE, p["CERT_BODY"]),
        Recognizer("cpe_string", CPE_STRING, CPE_RE, p["CPE_STRING"]),
        Recognizer("url", URL, URL_RE, p["URL"]),
        Recognizer("email", EMAIL, EMAIL_RE, p["EMAIL"]),
        Recognizer("ipv4", IP_ADDRESS, IPV4_RE, p["IP_ADDRESS"]),
        Recognizer("ipv6", IP_ADDRESS, IPV6_RE, p["IP_ADDRESS"], validator=_valid_ipv6),
        Recognizer("cert_serial", CERT_SERIAL, CERT_SERIAL_RE, p["CERT_SERIAL"]),
        Recognizer("hash", HASH, HASH_RE, p["HASH"], validator=_not_all_decimal),
        Recognizer("hostname", HOSTNAME, HOSTNAME_RE, p["HOSTNAME"]),
        Recognizer("credential", CREDENTIAL, credential_pattern(credential_keywords), p["CREDENTIAL"],
                   group="value"),
    ))


def register_dictionary(registry: RecognizerRegistry, terms: Mapping[str, EntityType]) -> RecognizerRegistry:
    """Return a registry that also detects ``terms`` (whole word, case-sensitive)."""
    for term in terms:
        if not term:
            raise EmptyTerm("dictionary terms must be non-empty")
    merged = dict(registry.dictionary_terms)
    merged.update(terms)
    return replace(registry, dictionary_terms=merged)


def load_declarations(path: Path | str) -> list[tuple[EntityType, str]]:
    """Read ``TYPE<TAB>value`` lines; ``#`` comments and blank lines are skipped."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            type_name, sep, value = line.partition("\t")
            if not sep or not value:
                raise DeclarationError(f"{path}:{line_no}: expected TYPE<TAB>value")
            try:
                out.append((EntityType.parse(type_name), value))
            except InvalidEntityType as exc:
                raise DeclarationError(f"{path}:{line_no}: {exc}") from None
    return out


def registry_from_files(registry: RecognizerRegistry, patterns: Path | str | None = None,
                        dictionary: Path | str | None = None) -> RecognizerRegistry:
    if patterns:
        for i, (etype, source) in enumerate(load_declarations(patterns)):
            try:
                registry = registry.with_pattern(etype, source, rid=f"file:{etype.name}:{i}")
            except re.error as exc:
                raise DeclarationError(f"{patterns}: bad pattern for {etype}: {exc}") from None
    if dictionary:
        registry = register_dictionary(registry, dict((v, t) for t, v in load_declarations(dictionary)))
    return registry


def resolve_overlaps(detections: Iterable[Detection]) -> list[Detection]:
    """Greedy disjoint selection: longest span, then priority, then leftmost."""
    ranked = sorted(detections, key=lambda d: (-len(d.span), -d.priority, d.span.start, d.recognizer_id))
    chosen: list[Detection] = []
    for det in ranked:
        if any(det.span.overlaps(c.span) for c in chosen):
            continue
        chosen.append(det)
    chosen.sort(key=lambda d: d.span.start)
    return chosen


def token_spans(text: str, offsets: ByteOffsets | None = None):
    offsets = offsets or ByteOffsets(text)
    return [offsets.span(*m.span()) for m in TOKEN_RE.finditer(text)]


def recognize_all(text: str, registry: RecognizerRegistry, policy: PolicyConfig | None = None) -> list[Detection]:
    policy = policy or PolicyConfig()
    offsets = ByteOffsets(text)
    candidates: list[Detection] = []
    for rec in registry.recognizers:
        candidates.extend(rec.find(text, offsets))
    candidates.extend(registry.dictionary_detections(text, offsets))

    if policy.allow_list:
        candidates = [d for d in candidates if d.text not in policy.allow_list]
    # Existing tokens are never re-detected, so anonymizing twice is a no-op.
    existing = token_spans(text, offsets)
    if existing:
        candidates = [d for d in candidates if not any(d.span.overlaps(t) for t in existing)]

    resolved = resolve_overlaps(candidates)
    if policy.preserve_entities:
        resolved = [replace(d, preserved=True) if d.entity_type in policy.preserve_entities else d
                    for d in resolved]
    return resolved


def _single(recognizer_id: str, text: str) -> list[Detection]:
    return resolve_overlaps(builtin_registry().by_id(recognizer_id).find(text))


def recognize_hash(text: str) -> list[Detection]:
    return _single("hash", text)


def recognize_cert_serial(text: str) -> list[Detection]:
    return _single("cert_serial", text)


def recognize_cert_body(text: str) -> list[Detection]:
    return _single("cert_body", text)
