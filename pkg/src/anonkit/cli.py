"""Command line entry point.

    anonkit anonymize FILE... [--slug-length N] [--allow-list a,b] [--preserve-entities T,...]
    anonkit deanonymize FILE...
    anonkit eval --gold gold.ndjson --pred pred.ndjson
    anonkit vault list [--type T] [--suggest-allowlist]

Exit codes: 0 success, 1 configuration error, 2 partial failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .core import EntityType, PolicyConfig, RunContext, Violation, split_csv_flag
from .errors import AnonkitError, InvalidEntityType, KeyMismatch, MissingSecretKey, PolicyError, VaultError
from .evaluation import evaluate, format_table, load_annotations
from .ocr import resolve_ocr_cmd
from .processors import Engine, output_path
from .recognizers import builtin_registry, registry_from_files
from .reidentify import Restorer
from .vault import AuditEvent, open_vault

logger = logging.getLogger("anonkit")

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2
DEFAULT_VAULT = "entities.ndjson"

_print_lock = threading.Lock()


def _emit(text: str, stream=None) -> None:
    with _print_lock:
        print(text, file=stream or sys.stdout, flush=True)


def _err(text: str) -> None:
    _emit(f"error: {text}", sys.stderr)


def _target_for(path: Path, out: str | None, many: bool, tag: str) -> Path | None:
    if not out:
        return None
    out_path = Path(out)
    if many or out_path.is_dir():
        out_path.mkdir(parents=True, exist_ok=True)
        return out_path / output_path(path, tag).name
    return out_path


def _build_policy(args) -> PolicyConfig:
    try:
        preserve = frozenset(EntityType.parse(t) for t in split_csv_flag(args.preserve_entities))
    except InvalidEntityType as exc:
        raise PolicyError([Violation("UnknownPreservedEntity", str(exc))]) from None
    return PolicyConfig(
        slug_length=args.slug_length,
        allow_list=frozenset(split_csv_flag(args.allow_list)),
        preserve_entities=preserve,
        lang=args.lang,
        scan_json_keys=args.scan_json_keys,
    )


def cmd_anonymize(args) -> int:
    try:
        policy = _build_policy(args)
        ctx = RunContext.from_env(policy, args.vault, args.actor)
        registry = registry_from_files(builtin_registry(), args.patterns, args.dictionary)
        vault = open_vault(ctx.vault_path)
        engine = Engine(ctx, vault, registry, ocr_cmd=resolve_ocr_cmd(args.ocr_cmd))
    except MissingSecretKey as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except (AnonkitError, OSError) as exc:
        _err(str(exc))
        return EXIT_CONFIG

    inputs = [Path(p) for p in args.inputs]
    many = len(inputs) > 1

    def run(path: Path):
        try:
            return path, engine.process_file(path, out=_target_for(path, args.out, many, "anon")), None
        except AnonkitError as exc:
            return path, None, exc

    with ThreadPoolExecutor(max_workers=max(1, args.workers)) as pool:
        results = list(pool.map(run, inputs))

    failures = 0
    total_det = total_rep = 0
    pred_rows = []
    for path, report, exc in results:
        if exc is not None:
            failures += 1
            _err(str(exc))
            continue
        total_det += len(report.detections)
        total_rep += report.replacements
        pred_rows.extend(report.prediction_rows())
        lines = [f"{path} -> {report.output} [{report.format}] "
                 f"detections={len(report.detections)} replaced={report.replacements} "
                 f"preserved={report.preserved}"]
        lines += [f"  warning: {w}" for w in report.warnings]
        _emit("\n".join(lines))

    if args.report:
        with open(args.report, "w", encoding="utf-8", newline="\n") as fh:
            for row in pred_rows:
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")

    ok = len(inputs) - failures
    _emit(f"summary: files={ok}/{len(inputs)} detections={total_det} replacements={total_rep}")
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_deanonymize(args) -> int:
    try:
        ctx = RunContext.from_env(vault_path=args.vault, audit_actor=args.actor)
        vault = open_vault(ctx.vault_path, must_exist=True)
    except (AnonkitError, OSError) as exc:
        _err(str(exc))
        return EXIT_CONFIG

    restorer = Restorer(ctx, vault)
    inputs = [Path(p) for p in args.inputs]
    many = len(inputs) > 1
    status = EXIT_OK
    for path in inputs:
        try:
            report = restorer.restore_document(path, out=_target_for(path, args.out, many, "restored"))
        except KeyMismatch as exc:
            _err(f"{path}: {exc}")
            return EXIT_CONFIG
        except (AnonkitError, OSError) as exc:
            _err(f"{path}: {exc}")
            status = EXIT_PARTIAL
            continue
        _emit(f"{path} -> {report.output} restored={report.restored} unknown={len(report.unknown)}")
        for token in sorted(set(report.unknown)):
            _emit(f"  warning: unknown token {token} left in place")
        if report.unknown:
            status = EXIT_PARTIAL
    return status


def cmd_vault_list(args) -> int:
    try:
        vault = open_vault(args.vault, must_exist=True)
        etype = EntityType.parse(args.type) if args.type else None
    except (VaultError, InvalidEntityType, OSError) as exc:
        _err(str(exc))
        return EXIT_CONFIG

    records = vault.list_entities(etype)
    actor = args.actor or os.environ.get("USER") or "unknown"
    vault.append_audit(AuditEvent(actor, "EXPORT", "",
                                  f"vault list type={args.type or '*'} rows={len(records)}"))
    if args.suggest_allowlist:
        seen = []
        for r in records:
            if r.original_value not in seen:
                seen.append(r.original_value)
        _emit(",".join(seen))
        return EXIT_OK

    _emit(f"{'TYPE':<16} {'SLUG':<16} {'FIRST_SEEN':<28} VALUE")
    for r in records:
        value = r.original_value.replace("\n", "\\n")
        _emit(f"{r.entity_type.name:<16} {r.slug[:16]:<16} {r.first_seen:<28} {value}")
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        gold = load_annotations(args.gold, include_preserved=True)
        pred = load_annotations(args.pred, include_preserved=args.include_preserved)
        overall, per_type = evaluate(gold, pred)
    except (AnonkitError, OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    if not args.json:
        _emit(format_table(overall, per_type))
    _emit(json.dumps({"scope": "overall", **overall.as_dict()}))
    for name, m in per_type.items():
        _emit(json.dumps({"scope": name, **m.as_dict()}))
    return EXIT_OK


def _slug_length(value: str) -> int:
    n = int(value)
    if not 1 <= n <= 64:
        raise argparse.ArgumentTypeError("slug length must be between 1 and 64")
    return n


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors (exit 1); 2 means partial failure."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="anonkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    vault_opts = argparse.ArgumentParser(add_help=False)
    vault_opts.add_argument("--vault", default=DEFAULT_VAULT, help="entity store (default: ./entities.ndjson)")
    vault_opts.add_argument("--actor", default=None, help="operator name recorded in the audit log")

    p = sub.add_parser("anonymize", parents=[vault_opts], help="pseudonymize files")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--lang", default="en", help="language tag (recorded, not interpreted)")
    p.add_argument("--slug-length", type=_slug_length, default=64)
    p.add_argument("--preserve-entities", default="", help="comma-separated types to detect but keep")
    p.add_argument("--allow-list", default="", help="comma-separated terms never replaced")
    p.add_argument("--out", default=None, help="output file, or directory for several inputs")
    p.add_argument("--ocr-cmd", default=None, help="OCR command template containing {input}")
    p.add_argument("--patterns", default=None, help="TYPE<TAB>regex declarations")
    p.add_argument("--dictionary", default=None, help="TYPE<TAB>term declarations")
    p.add_argument("--scan-json-keys", action="store_true")
    p.add_argument("--report", default=None, help="write detections as line-JSON for `eval --pred`")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_anonymize)

    p = sub.add_parser("deanonymize", parents=[vault_opts], help="restore originals from tokens")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_deanonymize)

    p = sub.add_parser("eval", help="score predictions against gold annotations")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--include-preserved", action="store_true",
                   help="count detections of preserved types as predictions")
    p.add_argument("--json", action="store_true", help="line-JSON only, no table")
    p.set_defaults(func=cmd_eval)

    list_opts = argparse.ArgumentParser(add_help=False, parents=[vault_opts])
    list_opts.add_argument("--type", default=None)
    list_opts.add_argument("--suggest-allowlist", action="store_true")

    p = sub.add_parser("vault", help="inspect the entity store")
    vsub = p.add_subparsers(dest="vault_command", required=True, parser_class=_Parser)
    vsub.add_parser("list", parents=[list_opts]).set_defaults(func=cmd_vault_list)
    sub.add_parser("vault-list", parents=[list_opts]).set_defaults(func=cmd_vault_list)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
