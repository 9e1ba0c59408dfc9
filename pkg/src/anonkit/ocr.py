"""OCR boundary: run an external engine on an image and anonymize its transcript.

The engine is any executable that prints the recognized text on stdout. The
command template must contain ``{input}``, which is replaced by the image path.
Only the transcript ever reaches the anonymizer; image bytes never do.
"""

from __future__ import annotations

import os
import shlex
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

from .errors import MissingPlaceholder, OcrEngineFailed, OcrEngineMissing, UnreadableFile

if TYPE_CHECKING:
    from .processors import DocumentReport, Engine

DEFAULT_OCR_CMD = "tesseract {input} stdout"
OCR_CMD_ENV = "OCR_CMD"
PLACEHOLDER = "{input}"


@dataclass
class OcrResult:
    source_image: Path
    transcript: str
    engine_cmd: str
    warnings: list[str] = field(default_factory=list)


def resolve_ocr_cmd(explicit: str | None = None) -> str:
    return explicit or os.environ.get(OCR_CMD_ENV) or DEFAULT_OCR_CMD


def run_ocr(image_path: Path | str, cmd_template: str | None = None, timeout: float | None = 300) -> OcrResult:
    template = resolve_ocr_cmd(cmd_template)
    if PLACEHOLDER not in template:
        raise MissingPlaceholder(f"OCR command template must contain {PLACEHOLDER}: {template!r}")
    image_path = Path(image_path)
    if not image_path.is_file():
        raise UnreadableFile(f"image {image_path} does not exist")
    argv = [part.replace(PLACEHOLDER, str(image_path)) for part in shlex.split(template)]
    try:
        proc = subprocess.run(argv, capture_output=True, timeout=timeout, check=False)
    except FileNotFoundError as exc:
        raise OcrEngineMissing(f"OCR engine {argv[0]!r} not found; install it or pass --ocr-cmd") from exc
    except subprocess.TimeoutExpired as exc:
        raise OcrEngineFailed(-1, f"timed out after {timeout}s") from exc
    stderr = proc.stderr.decode("utf-8", errors="replace")
    if proc.returncode != 0:
        raise OcrEngineFailed(proc.returncode, stderr)
    transcript = proc.stdout.decode("utf-8", errors="replace")
    warnings = []
    if not transcript.strip():
        warnings.append(f"OCR produced an empty transcript for {image_path}")
    if "�" in transcript:
        warnings.append("transcript contained bytes that were not valid UTF-8")
    return OcrResult(image_path, transcript, template, warnings)


def process_image(path: Path | str, engine: "Engine", out: Path | str | None = None,
                  cmd_template: str | None = None) -> "DocumentReport":
    """OCR ``path`` and write the anonymized transcript to ``<stem>.anon.txt``."""
    from .processors import IMAGE, DocumentReport, output_path

    path = Path(path)
    result = run_ocr(path, cmd_template or getattr(engine, "ocr_cmd", None))
    text, detections = engine.anonymize_text(result.transcript, source=str(path))
    target = Path(out) if out else output_path(path, "anon", ".txt")
    target.write_text(text, encoding="utf-8", newline="")
    return DocumentReport(
        source=path,
        format=IMAGE,
        detections=detections,
        replacements=sum(1 for d in detections if not d.preserved),
        output=target,
        warnings=list(result.warnings),
    )


def run_ocr_many(paths, cmd_template: str | None = None, workers: int = 4) -> list[OcrResult]:
    """OCR several images concurrently; results come back in input order."""
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(lambda p: run_ocr(p, cmd_template), paths))
