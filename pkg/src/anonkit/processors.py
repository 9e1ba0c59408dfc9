"""Format-aware anonymization of text, CSV, JSON and XML documents.

Every processor exposes the same traversal, ``rewrite(content, fn)``, which
applies ``fn(text, location)`` to each string leaf and leaves the structure
alone. Anonymization and re-identification are both expressed through it.
"""

from __future__ import annotations

import copy
import json
import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable

from lxml import etree

from .core import Detection, PolicyConfig, RunContext, validate_policy
from .errors import (
    AnonkitError,
    MalformedCsv,
    MalformedJson,
    MalformedXml,
    ProcessingFailed,
    UnreadableFile,
)
from .pseudonym import pseudonymize
from .recognizers import RecognizerRegistry, builtin_registry, recognize_all
from .vault import AuditEvent, Vault

logger = logging.getLogger(__name__)

TEXT, CSV, JSON, XML, IMAGE = "TEXT", "CSV", "JSON", "XML", "IMAGE"
FORMATS = (TEXT, CSV, JSON, XML, IMAGE)

EXTENSIONS = {
    ".txt": TEXT,
    ".log": TEXT,
    ".csv": CSV,
    ".json": JSON,
    ".xml": XML,
    ".png": IMAGE,
    ".jpg": IMAGE,
    ".jpeg": IMAGE,
}

Rewriter = Callable[[str, str], str]


@dataclass
class DocumentReport:
    source: Path
    format: str
    detections: list[Detection] = field(default_factory=list)
    replacements: int = 0
    output: Path | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def preserved(self) -> int:
        return sum(1 for d in self.detections if d.preserved)

    def prediction_rows(self, doc_id: str | None = None) -> list[dict]:
        """Detections in the line-JSON shape read by the eval harness."""
        doc = doc_id or self.source.name
        return [
            {
                "doc": doc,
                "start": d.span.start,
                "end": d.span.end,
                "type": d.entity_type.name,
                "text": d.text,
                "location": d.location,
                "recognizer": d.recognizer_id,
                "score": d.score,
                "preserved": d.preserved,
            }
            for d in self.detections
        ]


def detect_format(path: Path | str, head: bytes | None = None) -> str:
    """Pick a processor by extension, then by sniffing the first bytes."""
    path = Path(path)
    fmt = EXTENSIONS.get(path.suffix.lower())
    if fmt:
        return fmt
    if head is None:
        try:
            with open(path, "rb") as fh:
                head = fh.read(512)
        except OSError as exc:
            raise UnreadableFile(f"cannot read {path}: {exc}") from exc
    stripped = head.lstrip(b"\xef\xbb\xbf \t\r\n")
    if stripped.startswith(b"<"):
        return XML
    if stripped[:1] in (b"{", b"["):
        return JSON
    return TEXT


class Engine:
    """Binds a run context, a vault and a recognizer registry."""

    def __init__(self, ctx: RunContext, vault: Vault, registry: RecognizerRegistry | None = None,
                 ocr_cmd: str | None = None):
        registry = registry or builtin_registry()
        if ctx.policy.custom_patterns:
            registry = registry.with_custom_patterns(ctx.policy.custom_patterns)
        validate_policy(ctx.policy, registry.custom_types())
        self.ctx = ctx
        self.vault = vault
        self.registry = registry
        self.ocr_cmd = ocr_cmd

    @property
    def policy(self) -> PolicyConfig:
        return self.ctx.policy

    def anonymize_text(self, text: str, source: str = "", location: str = "") -> tuple[str, list[Detection]]:
        detections = recognize_all(text, self.registry, self.policy)
        if location:
            detections = [replace(d, location=location) for d in detections]
        if not any(not d.preserved for d in detections):
            return text, detections
        buf = text.encode("utf-8")
        for det in sorted(detections, key=lambda d: d.span.start, reverse=True):
            if det.preserved:
                continue
            token = pseudonymize(self.ctx, self.vault, det.entity_type, det.text, source=source)
            buf = buf[:det.span.start] + token.rendered.encode("utf-8") + buf[det.span.end:]
        return buf.decode("utf-8"), detections

    def rewriter(self, source: str, sink: list[Detection]) -> Rewriter:
        def fn(text: str, location: str) -> str:
            new, dets = self.anonymize_text(text, source=source, location=location)
            sink.extend(dets)
            return new
        return fn

    def process_file(self, path: Path | str, out: Path | str | None = None,
                     fmt: str | None = None) -> DocumentReport:
        path = Path(path)
        try:
            fmt = fmt or detect_format(path)
            if fmt == IMAGE:
                from .ocr import process_image
                report = process_image(path, self, out=out)
            else:
                report = self._process_document(path, fmt, out)
        except AnonkitError as exc:
            raise ProcessingFailed(path, exc) from exc
        except OSError as exc:
            raise ProcessingFailed(path, UnreadableFile(str(exc))) from exc
        self.vault.append_audit(AuditEvent(
            actor=self.ctx.audit_actor,
            action="ANONYMIZE",
            detail=(f"source={path} output={report.output} format={report.format} "
                    f"detections={len(report.detections)} replacements={report.replacements} "
                    f"lang={self.policy.lang}"),
        ))
        return report

    def _process_document(self, path: Path, fmt: str, out: Path | str | None) -> DocumentReport:
        processor = processor_for(fmt)
        content = processor.load(read_bytes(path))
        detections: list[Detection] = []
        result = processor.rewrite(content, self.rewriter(str(path), detections), keys=self.policy.scan_json_keys)
        target = Path(out) if out else output_path(path, "anon")
        target.write_bytes(processor.dump(result))
        return DocumentReport(
            source=path,
            format=fmt,
            detections=detections,
            replacements=sum(1 for d in detections if not d.preserved),
            output=target,
        )


def read_bytes(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except OSError as exc:
        raise UnreadableFile(f"cannot read {path}: {exc}") from exc


def output_path(path: Path, tag: str, ext: str | None = None) -> Path:
    """``<stem>.<tag>.<ext>`` beside ``path``; a trailing ``.anon`` stem part is dropped first."""
    name = path.name
    suffix = path.suffix if ext is None else ext
    stem = name[: len(name) - len(path.suffix)] if path.suffix else name
    if stem.endswith(".anon") and tag != "anon":
        stem = stem[: -len(".anon")]
    return path.with_name(f"{stem}.{tag}{suffix}")


def _decode(data: bytes, encoding: str = "utf-8") -> str:
    try:
        return data.decode(encoding)
    except UnicodeDecodeError as exc:
        raise UnreadableFile(f"not valid UTF-8 text: {exc}") from None


# -- processors ------------------------------------------------------------

class FileProcessor:
    format = ""

    def load(self, data: bytes):
        raise NotImplementedError

    def rewrite(self, content, fn: Rewriter, keys: bool = False):
        raise NotImplementedError

    def dump(self, content) -> bytes:
        raise NotImplementedError


class TextProcessor(FileProcessor):
    format = TEXT

    def load(self, data: bytes) -> str:
        return _decode(data)

    def rewrite(self, content: str, fn: Rewriter, keys: bool = False) -> str:
        return fn(content, "")

    def dump(self, content: str) -> bytes:
        return content.encode("utf-8")


@dataclass
class CsvCell:
    value: str
    quoted: bool = False


@dataclass
class CsvRow:
    cells: list[CsvCell]
    terminator: str = "\n"


_QUOTED_FIELD = re.compile(r'"((?:[^"]|"")*)"')
_PLAIN_FIELD = re.compile(r'[^,"\r\n]*')
_NEEDS_QUOTES = re.compile(r'[,"\r\n]')


def parse_csv(text: str) -> list[CsvRow]:
    """Split RFC 4180 CSV keeping each cell's quoting and each row's line ending."""
    rows: list[CsvRow] = []
    pos, n = 0, len(text)
    while pos < n:
        cells: list[CsvCell] = []
        row_no = len(rows) + 1
        while True:
            col_no = len(cells) + 1
            if pos < n and text[pos] == '"':
                m = _QUOTED_FIELD.match(text, pos)
                if not m:
                    raise MalformedCsv(row_no, col_no, "unterminated quoted field")
                cells.append(CsvCell(m.group(1).replace('""', '"'), quoted=True))
            else:
                m = _PLAIN_FIELD.match(text, pos)
                cells.append(CsvCell(m.group(0)))
            pos = m.end()
            if pos >= n:
                terminator = ""
                break
            ch = text[pos]
            if ch == ",":
                pos += 1
                continue
            if text.startswith("\r\n", pos):
                terminator = "\r\n"
            elif ch in "\r\n":
                terminator = ch
            else:
                raise MalformedCsv(row_no, col_no, f"unexpected {ch!r} after field")
            pos += len(terminator)
            break
        rows.append(CsvRow(cells, terminator))
    return rows


def format_csv(rows: Iterable[CsvRow]) -> str:
    parts = []
    for row in rows:
        cells = []
        for cell in row.cells:
            if cell.quoted or _NEEDS_QUOTES.search(cell.value):
                cells.append('"' + cell.value.replace('"', '""') + '"')
            else:
                cells.append(cell.value)
        parts.append(",".join(cells) + row.terminator)
    return "".join(parts)


class CsvProcessor(FileProcessor):
    format = CSV

    def load(self, data: bytes) -> list[CsvRow]:
        return parse_csv(_decode(data))

    def rewrite(self, content: list[CsvRow], fn: Rewriter, keys: bool = False) -> list[CsvRow]:
        out = []
        for r, row in enumerate(content, start=1):
            cells = [CsvCell(fn(cell.value, f"row={r},col={c}") if cell.value else cell.value, cell.quoted)
                     for c, cell in enumerate(row.cells, start=1)]
            out.append(CsvRow(cells, row.terminator))
        return out

    def dump(self, content: list[CsvRow]) -> bytes:
        return format_csv(content).encode("utf-8")


@dataclass
class JsonDocument:
    data: object
    indent: int | None = 2
    trailing_newline: bool = True


def _pointer_part(key) -> str:
    return str(key).replace("~", "~0").replace("/", "~1")


def rewrite_json(node, fn: Rewriter, keys: bool = False, pointer: str = ""):
    """Apply ``fn`` to every string leaf (and optionally keys) of a JSON value."""
    if isinstance(node, str):
        return fn(node, pointer or "/") if node else node
    if isinstance(node, list):
        return [rewrite_json(v, fn, keys, f"{pointer}/{i}") for i, v in enumerate(node)]
    if isinstance(node, dict):
        out = {}
        for k, v in node.items():
            child = f"{pointer}/{_pointer_part(k)}"
            new_key = fn(k, child + "#key") if keys and k else k
            out[new_key] = rewrite_json(v, fn, keys, child)
        return out
    return node


class JsonProcessor(FileProcessor):
    format = JSON

    def load(self, data: bytes) -> JsonDocument:
        text = _decode(data, "utf-8-sig")
        try:
            parsed = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedJson(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        body = text.strip()
        return JsonDocument(parsed, indent=2 if "\n" in body else None,
                            trailing_newline=text.endswith("\n"))

    def rewrite(self, content: JsonDocument, fn: Rewriter, keys: bool = False) -> JsonDocument:
        return replace(content, data=rewrite_json(content.data, fn, keys))

    def dump(self, content: JsonDocument) -> bytes:
        text = json.dumps(content.data, ensure_ascii=False, indent=content.indent)
        if content.trailing_newline:
            text += "\n"
        return text.encode("utf-8")


@dataclass
class XmlDocument:
    tree: etree._ElementTree
    declaration: bool = True
    trailing_newline: bool = True


def _xml_parser() -> etree.XMLParser:
    return etree.XMLParser(
        strip_cdata=False,
        remove_blank_text=False,
        remove_comments=False,
        remove_pis=False,
        resolve_entities=False,
        no_network=True,
        huge_tree=True,
    )


def parse_xml(data: bytes) -> XmlDocument:
    try:
        tree = etree.ElementTree(etree.fromstring(data, _xml_parser()))
    except etree.XMLSyntaxError as exc:
        line, col = exc.position if exc.position else (0, 0)
        raise MalformedXml(line, col, exc.msg) from None
    head = data.lstrip(b"\xef\xbb\xbf \t\r\n")
    return XmlDocument(tree, declaration=head.startswith(b"<?xml"),
                       trailing_newline=data.endswith(b"\n"))


def _text_is_cdata(el) -> bool:
    raw = etree.tostring(el, with_tail=False, encoding=str)
    cut = raw.find(">")
    return cut >= 0 and raw[cut - 1] != "/" and raw.startswith("<![CDATA[", cut + 1)


def rewrite_xml(tree: etree._ElementTree, fn: Rewriter) -> etree._ElementTree:
    """Rewrite text, tails, CDATA and attribute values on a copy of ``tree``.

    Tags, attribute names, namespaces, comments and processing instructions
    are left alone.
    """
    tree = copy.deepcopy(tree)
    for el in tree.getroot().iter():
        is_element = isinstance(el.tag, str)
        # getpath() fails on entity references; place comments, PIs and entities under their parent.
        path = tree.getpath(el) if is_element else tree.getpath(el.getparent()) + "/node()"
        if is_element:
            if el.text:
                new = fn(el.text, path + "/text()")
                if new != el.text:
                    el.text = etree.CDATA(new) if _text_is_cdata(el) else new
            for name, value in el.attrib.items():
                if value:
                    new = fn(value, f"{path}/@{name}")
                    if new != value:
                        el.set(name, new)
        if el.tail and el is not tree.getroot():
            el.tail = fn(el.tail, path + "#tail")
    return tree


class XmlProcessor(FileProcessor):
    format = XML

    def load(self, data: bytes) -> XmlDocument:
        return parse_xml(data)

    def rewrite(self, content: XmlDocument, fn: Rewriter, keys: bool = False) -> XmlDocument:
        return replace(content, tree=rewrite_xml(content.tree, fn))

    def dump(self, content: XmlDocument) -> bytes:
        encoding = content.tree.docinfo.encoding or "UTF-8"
        data = etree.tostring(content.tree, encoding=encoding, xml_declaration=content.declaration)
        if content.trailing_newline and not data.endswith(b"\n"):
            data += b"\n"
        return data


PROCESSORS: dict[str, type[FileProcessor]] = {
    TEXT: TextProcessor,
    CSV: CsvProcessor,
    JSON: JsonProcessor,
    XML: XmlProcessor,
}


def processor_for(fmt: str) -> FileProcessor:
    """Factory: DOCX/XLSX processors plug in here by registering in ``PROCESSORS``."""
    try:
        return PROCESSORS[fmt]()
    except KeyError:
        raise UnreadableFile(f"no processor for format {fmt}") from None


# -- functional spellings ----------------------------------------------------

def anonymize_text(text: str, ctx: RunContext, vault: Vault,
                   registry: RecognizerRegistry | None = None) -> tuple[str, list[Detection]]:
    return Engine(ctx, vault, registry).anonymize_text(text)


def anonymize_csv(rows: list[list[str]], ctx: RunContext, vault: Vault,
                  registry: RecognizerRegistry | None = None) -> list[list[str]]:
    engine = Engine(ctx, vault, registry)
    return [[engine.anonymize_text(cell)[0] if cell else cell for cell in row] for row in rows]


def anonymize_json(document, ctx: RunContext, vault: Vault, registry: RecognizerRegistry | None = None,
                   policy: PolicyConfig | None = None):
    if policy is not None:
        ctx = replace(ctx, policy=policy)
    engine = Engine(ctx, vault, registry)
    return rewrite_json(document, engine.rewriter("", []), keys=ctx.policy.scan_json_keys)


def anonymize_xml(document: etree._ElementTree | bytes | str, ctx: RunContext, vault: Vault,
                  registry: RecognizerRegistry | None = None) -> etree._ElementTree:
    if isinstance(document, str):
        document = document.encode("utf-8")
    if isinstance(document, bytes):
        document = parse_xml(document).tree
    engine = Engine(ctx, vault, registry)
    return rewrite_xml(document, engine.rewriter("", []))


def process_file(path: Path | str, ctx: RunContext, vault: Vault | None = None,
                 registry: RecognizerRegistry | None = None, out: Path | str | None = None) -> DocumentReport:
    from .vault import open_vault

    vault = vault if vault is not None else open_vault(ctx.vault_path)
    return Engine(ctx, vault, registry).process_file(path, out=out)
