"""Command-line entry point: ``typedmem <command> ...``.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Sequence, TextIO

from .answering import serialize_record
from .config import AppConfig, engine_spec, load_config, open_engine, with_overrides
from .core import StoreType, Turn, sorted_records
from .engine import MemoryEngine, MemoryMode, QueryOutcome
from .errors import ParseError, StoreError, TypedMemError, ValidationError
from .evaluation.ablation import ABLATION_MODES, REPORTED_SWEEP, SweepResult, ablate_stores, sweep_k
from .evaluation.datasets import load_dataset, load_locomo
from .evaluation.runner import RunConfig, run_benchmark
from .store import import_jsonl, open_store

logger = logging.getLogger("typedmem")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
TEST_MODE_EPOCH = datetime(2024, 1, 1, tzinfo=timezone.utc)


class UsageError(Exception):
    pass


def _open(cfg: AppConfig, args: argparse.Namespace, *, must_exist: bool = False) -> MemoryEngine:
    if not (args.store or cfg.store):
        raise UsageError("no store path: pass --store or set 'store' in the config")
    return open_engine(cfg, args.store, must_exist=must_exist)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit with status 2
        raise UsageError(f"{self.prog}: {message}")


# -- conversation files ------------------------------------------------------


def load_turns(path: str | Path, sample: int | None = None) -> tuple[list[Turn], tuple[str, ...]]:
    """Read turns from a LoCoMo-format file or a plain JSON list of turns."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read conversation: {exc}", path=str(path)) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno, path=str(path)) from exc
    if isinstance(data, dict) and "turns" in data:
        data = data["turns"]
    if not data:
        raise ParseError("conversation file holds no turns", path=str(path))
    if isinstance(data, list) and isinstance(data[0], dict) and "conversation" in data[0]:
        samples = load_locomo(path)
        if sample is None and len(samples) > 1:
            raise ValidationError(f"{path} holds {len(samples)} samples; choose one with --sample", "sample")
        chosen = samples[sample or 0]
        return list(chosen.turns), chosen.speakers
    if not isinstance(data, list):
        raise ParseError("expected a list of turns", path=str(path))
    turns = []
    for i, raw in enumerate(data):
        try:
            turns.append(Turn.from_dict(raw))
        except (KeyError, TypeError, ValidationError) as exc:
            raise ParseError(f"turn {i}: {exc}", path=str(path)) from exc
    speakers = tuple(dict.fromkeys(t.speaker_id for t in turns))
    return turns, speakers


# -- printing ------------------------------------------------------------------


def format_query(outcome: QueryOutcome) -> str:
    lines = [f"answer: {outcome.answer.text}", "evidence:"]
    for owner in outcome.speaker_ids:
        bank = outcome.banks.get(owner)
        hits = list(bank) if bank is not None else []
        if not hits:
            lines.append(f"  [{owner}] (no memories)")
        for hit in hits:
            lines.append(f"  [{owner}] {hit.score:.4f} {hit.store.value} {hit.record_id} {serialize_record(hit.record)}")
    lines.append(
        f"latency: search={outcome.search_s:.3f}s generation={outcome.gen_s:.3f}s total={outcome.total_s:.3f}s"
    )
    return "\n".join(lines)


def _resolve_speakers(engine: MemoryEngine, given: Sequence[str] | None) -> list[str]:
    if given:
        return list(given)
    owners = engine.store.owners()
    if not owners:
        return ["user"]
    if len(owners) > 2:
        raise UsageError(f"store holds {len(owners)} owners; pick up to two with --speaker")
    return owners


# -- commands ------------------------------------------------------------------


def cmd_ingest(args: argparse.Namespace, cfg: AppConfig, out: TextIO) -> int:
    turns, _ = load_turns(args.file, args.sample)
    engine = _open(cfg, args)
    try:
        failures = 0
        for i, turn in enumerate(turns):
            failures += len(engine.ingest_turn(turn, i).errors)
        counts = engine.store.counts()
    finally:
        engine.store.close()
    print(f"turns: {len(turns)}", file=out)
    for kind in StoreType:
        print(f"{kind.table}: {counts[kind.value]}", file=out)
    print(f"extraction failures skipped: {failures}", file=out)
    return EXIT_OK


def cmd_query(args: argparse.Namespace, cfg: AppConfig, out: TextIO) -> int:
    engine = _open(cfg, args, must_exist=True)
    try:
        speakers = _resolve_speakers(engine, args.speaker)
        outcome = engine.query(args.question, speakers)
    finally:
        engine.store.close()
    print(format_query(outcome), file=out)
    return EXIT_OK


def cmd_chat(args: argparse.Namespace, cfg: AppConfig, out: TextIO, stdin: TextIO) -> int:
    engine = _open(cfg, args)
    user = args.user
    n = 0
    print("typedmem chat. Type a message to store it; /ask <question>, /mem, /quit.", file=out)
    try:
        for raw in stdin:
            line = raw.strip()
            if not line:
                continue
            if line in ("/quit", "/exit"):
                break
            try:
                if line == "/mem":
                    records = sorted_records(r for kind in StoreType for r in engine.store.list(kind, user))
                    if not records:
                        print("(no memories)", file=out)
                    for record in records[-args.recent :]:
                        print(f"[{record.id}] {serialize_record(record)}", file=out)
                elif line.startswith("/ask"):
                    question = line[len("/ask") :].strip()
                    if not question:
                        print("usage: /ask <question>", file=out)
                        continue
                    print(format_query(engine.query(question, [user])), file=out)
                else:
                    now = TEST_MODE_EPOCH + timedelta(minutes=n) if cfg.test_mode else datetime.now(timezone.utc)
                    outcome = engine.ingest_turn(Turn(user, line, now.isoformat(timespec="seconds")), n)
                    n += 1
                    mask = "".join(k.value[0] if getattr(outcome.mask, k.value) else "-" for k in StoreType)
                    print(f"stored [{mask}] {' '.join(outcome.record_ids)}", file=out)
            except TypedMemError as exc:
                print(f"error: {exc}", file=out)
    finally:
        engine.store.close()
    return EXIT_OK


def _run_config(args: argparse.Namespace, cfg: AppConfig, mode: MemoryMode = MemoryMode.TYPED) -> RunConfig:
    return RunConfig(
        mode=mode,
        k_per_store=cfg.retrieval.k_per_store,
        budget_K=cfg.retrieval.budget_K,
        parallelism=cfg.parallelism,
        dataset=Path(args.data).name if getattr(args, "data", None) else "",
    )


def _emit(report_paths: tuple[Path, Path], out: TextIO) -> None:
    print(report_paths[1].read_text(encoding="utf-8"), end="", file=out)
    print(f"wrote {report_paths[0]} and {report_paths[1]}", file=out)


def cmd_eval(args: argparse.Namespace, cfg: AppConfig, out: TextIO) -> int:
    samples = load_dataset(args.data, args.dataset)
    report = run_benchmark(samples, engine_spec(cfg), cfg.judge_provider(), _run_config(args, cfg, MemoryMode(args.mode)), args.work)
    _emit(report.write(args.out, f"eval-{args.mode}"), out)
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace, cfg: AppConfig, out: TextIO) -> int:
    samples = load_dataset(args.data, args.dataset)
    modes = [MemoryMode.TYPED, *ABLATION_MODES] if args.mode == "all" else [MemoryMode(args.mode)]
    summary = {}
    for mode in modes:
        rc = _run_config(args, cfg, mode)
        if mode is MemoryMode.TYPED:
            report = run_benchmark(samples, engine_spec(cfg), cfg.judge_provider(), rc, args.work)
        else:
            report = ablate_stores(samples, mode, engine_spec(cfg), cfg.judge_provider(), rc, args.work)
        report.write(args.out, f"ablate-{mode.value}")
        summary[mode.value] = {"judge_mean": report.judge_mean, "judge_std": report.judge_std, "tokens_mean": report.tokens_mean}
        print(f"{mode.value:<16} judge {report.judge_mean:6.2f} ± {report.judge_std:.2f}  tokens {report.tokens_mean:.1f}", file=out)
    Path(args.out, "ablate-summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, cfg: AppConfig, out: TextIO) -> int:
    if args.reported:
        result = SweepResult.from_points(REPORTED_SWEEP)
    else:
        if not args.data:
            raise UsageError("sweep needs a dataset file or --reported")
        samples = load_dataset(args.data, args.dataset)
        result, reports = sweep_k(samples, args.K, engine_spec(cfg), cfg.judge_provider(), _run_config(args, cfg), args.work)
        for K, report in reports.items():
            report.write(args.out, f"sweep-K{K}")
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "sweep.json").write_text(json.dumps(result.to_dict(), indent=2) + "\n", encoding="utf-8")
    (outdir / "sweep.txt").write_text(result.table(), encoding="utf-8")
    print(result.table(), end="", file=out)
    return EXIT_OK


def cmd_serve(args: argparse.Namespace, cfg: AppConfig, out: TextIO) -> int:
    from .service import serve

    serve(_open(cfg, args), args.host, args.port)
    return EXIT_OK


def cmd_export(args: argparse.Namespace, cfg: AppConfig, out: TextIO) -> int:
    path = args.store or cfg.store
    if not path:
        raise UsageError("export needs --store")
    if not Path(path).exists():
        raise StoreError(f"store not found: {path}")
    with open_store(path, cfg.embedder.dimension, test_mode=cfg.test_mode) as handle:
        n = handle.export_jsonl(args.out)
    print(f"exported {n} records to {args.out}", file=out)
    return EXIT_OK


def cmd_import(args: argparse.Namespace, cfg: AppConfig, out: TextIO) -> int:
    path = args.store or cfg.store
    if not path:
        raise UsageError("import needs --store")
    with import_jsonl(args.file, path, test_mode=cfg.test_mode) as handle:
        counts = handle.counts()
    print(f"imported into {path}: " + " ".join(f"{k}={v}" for k, v in counts.items()), file=out)
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="YAML/JSON config file")
    common.add_argument("--store", help="store file path")
    common.add_argument("--k", type=int, help="per-store top-k (default 20)")
    common.add_argument("--budget", type=int, help="evidence budget K per speaker (default 25)")
    common.add_argument("--parallelism", type=int, help="concurrent QA items during eval")
    common.add_argument("--test-mode", "--seed", dest="test_mode", action="store_true", default=None,
                        help="byte-stable outputs: sequential ids, turn-time created_at, stepping clock")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="typedmem", description="Typed conversational memory engine and evaluation harness.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", parents=[common], help="route, extract, embed and store a conversation")
    p.add_argument("file")
    p.add_argument("--sample", type=int, help="sample index for multi-sample LoCoMo files")

    p = sub.add_parser("query", parents=[common], help="answer a question from a store")
    p.add_argument("question")
    p.add_argument("--speaker", action="append", help="owner id (repeat for two banks)")

    p = sub.add_parser("chat", parents=[common], help="interactive REPL")
    p.add_argument("--user", default="user")
    p.add_argument("--recent", type=int, default=10, help="records shown by /mem")

    data_kinds = ["locomo", "longmemeval"]
    for name, helptext in (("eval", "run the benchmark"), ("ablate", "store ablations"), ("sweep", "evidence-budget sweep")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("data", nargs="?" if name == "sweep" else None)
        p.add_argument("--dataset", choices=data_kinds, help="dataset format (sniffed when omitted)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--work", help="directory for per-sample store files (reused across runs)")
        if name == "eval":
            p.add_argument("--mode", default="typed", choices=[m.value for m in MemoryMode])
        if name == "ablate":
            p.add_argument("--mode", default="all", choices=["all", *(m.value for m in ABLATION_MODES)])
        if name == "sweep":
            p.add_argument("--K", type=int, nargs="+", default=[20, 25, 30, 40, 60])
            p.add_argument("--reported", action="store_true", help="analyze the reported sweep points instead of running")

    p = sub.add_parser("serve", parents=[common], help="HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    p = sub.add_parser("export", parents=[common], help="export a store to JSONL")
    p.add_argument("--out", required=True)

    p = sub.add_parser("import", parents=[common], help="import a JSONL export into a store")
    p.add_argument("file")
    return parser


_COMMANDS = {
    "ingest": cmd_ingest,
    "query": cmd_query,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "sweep": cmd_sweep,
    "serve": cmd_serve,
    "export": cmd_export,
    "import": cmd_import,
}


def main(argv: Sequence[str] | None = None, stdout: TextIO | None = None, stdin: TextIO | None = None) -> int:
    out = stdout or sys.stdout
    err = sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=err)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = with_overrides(
            load_config(args.config),
            k=args.k, budget=args.budget, parallelism=args.parallelism, test_mode=args.test_mode,
        )
        if args.command == "chat":
            return cmd_chat(args, cfg, out, stdin or sys.stdin)
        return _COMMANDS[args.command](args, cfg, out)
    except UsageError as exc:
        print(f"typedmem: {exc}", file=err)
        return EXIT_USAGE
    except (TypedMemError, OSError) as exc:
        print(f"typedmem: error: {exc}", file=err)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
