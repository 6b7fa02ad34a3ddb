"""Command-line client for the lifting service.

The CLI only marshals arguments into service requests and renders responses:
by default it dispatches to the in-process handlers, with --server it posts
the same requests to a running service instance.

Exit codes: 0 success, 1 usage or parse error, 2 lift failure,
3 equivalence mismatch.
"""

from __future__ import annotations

import argparse
import json
import sys
import urllib.error
import urllib.request
from pathlib import Path

from .service import handlers, models

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_LIFT_FAILURE = 2
EXIT_MISMATCH = 3


def _parse_int_range(text: str):
    try:
        lo, hi = text.split(":")
        return (int(lo), int(hi))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="liftmr",
        description="Lift sequential MJ loops to verified MapReduce jobs and run them",
    )
    parser.add_argument("--server", help="base URL of a remote service (default: in-process)")
    parser.add_argument("--bmc-max-len", type=int, default=4, help="max data length checked")
    parser.add_argument("--bmc-int-range", type=_parse_int_range, default=(-2, 2), metavar="LO:HI")
    parser.add_argument("--bmc-alphabet", type=int, default=3, help="token count for string data")
    parser.add_argument("--recursion-bound", type=int, default=None)
    parser.add_argument("--max-emits", type=int, default=None)
    parser.add_argument("--timeout", type=float, default=600.0, metavar="SECONDS")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, default=None, metavar="DIR")
    parser.add_argument("--format", choices=("text", "tsv"), default="text")

    sub = parser.add_subparsers(dest="command", required=True)

    p_lift = sub.add_parser("lift", help="lift the loops of an MJ file to summaries")
    p_lift.add_argument("file", type=Path)
    p_lift.add_argument("--emit-spec", action="store_true", help="dump templates and grammars")

    p_run = sub.add_parser("run", help="execute a summary on a dataset file")
    p_run.add_argument("doc", type=Path, help="summary doc produced by lift")
    p_run.add_argument("--data", type=Path, required=True, help="dataset, one element per line")
    p_run.add_argument("--bind", action="append", default=[], metavar="NAME=VALUE")
    p_run.add_argument("--partition-size", type=int, default=65536)
    p_run.add_argument("--no-combiner", action="store_true")

    p_check = sub.add_parser("check", help="differentially test a summary against its program")
    p_check.add_argument("file", type=Path)
    p_check.add_argument("doc", type=Path)
    p_check.add_argument("--trials", type=int, default=1000)
    p_check.add_argument("--max-len", type=int, default=1000)

    p_bench = sub.add_parser("bench", help="lift, run and time the benchmark corpus")
    p_bench.add_argument("benchmarks", help="comma-separated names, or 'all'")
    p_bench.add_argument("--size", type=int, default=1_000_000)
    p_bench.add_argument("--bench-workers", default="1,4", metavar="N,N")
    p_bench.add_argument("--repeats", type=int, default=3)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8470)

    return parser


def _settings(args) -> models.SynthSettings:
    return models.SynthSettings(
        bmc_max_len=args.bmc_max_len,
        bmc_int_range=args.bmc_int_range,
        bmc_alphabet=args.bmc_alphabet,
        recursion_bound=args.recursion_bound,
        max_emits=args.max_emits,
        timeout_s=args.timeout,
        workers=args.workers,
        seed=args.seed,
    )


class Client:
    """Dispatches requests locally or to a remote service."""

    def __init__(self, server: str | None):
        self.server = server.rstrip("/") if server else None

    def call(self, endpoint: str, request, response_model):
        if self.server is None:
            return getattr(handlers, endpoint)(request)
        url = f"{self.server}/v1/{endpoint}"
        body = request.model_dump_json().encode()
        http_req = urllib.request.Request(
            url, data=body, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(http_req) as resp:
                return response_model.model_validate_json(resp.read())
        except urllib.error.URLError as e:
            print(f"error: cannot reach {url}: {e}", file=sys.stderr)
            raise SystemExit(EXIT_USAGE)


def _out_dir(args) -> Path:
    out = args.out or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_lift(args, client: Client) -> int:
    try:
        source = args.file.read_text()
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    req = models.LiftRequest(
        source=source, filename=str(args.file), settings=_settings(args), emit_spec=args.emit_spec
    )
    resp = client.call("lift", req, models.LiftResponse)
    for diag in resp.diagnostics:
        print(diag, file=sys.stderr)
    if resp.error:
        print(f"error: {resp.error}", file=sys.stderr)
        return EXIT_USAGE
    out = _out_dir(args)
    stem = args.file.stem
    for s in resp.summaries:
        frag = s.fragment.replace(":", "-")
        doc_path = out / f"{stem}.{frag}.summary"
        doc_path.write_text(s.doc)
        (out / f"{stem}.{frag}.sketch.java").write_text(s.sketch)
        if s.spec_text:
            (out / f"{stem}.{frag}.spec").write_text(s.spec_text)
        print(
            f"lifted {s.fragment}: iterations={s.iterations}"
            f" examined={s.candidates_examined} wall={s.wall_ms}ms -> {doc_path}"
        )
    if not resp.summaries:
        print("no fragment lifted", file=sys.stderr)
        return EXIT_LIFT_FAILURE
    return EXIT_OK


def cmd_run(args, client: Client) -> int:
    try:
        doc = args.doc.read_text()
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    bindings = {}
    for item in args.bind:
        name, sep, value = item.partition("=")
        if not sep:
            print(f"error: --bind needs NAME=VALUE, got {item!r}", file=sys.stderr)
            return EXIT_USAGE
        bindings[name] = value
    req = models.RunRequest(
        doc=doc,
        data_path=None if args.server else str(args.data),
        data=args.data.read_text().splitlines() if args.server else None,
        bindings=bindings,
        workers=args.workers,
        partition_size=args.partition_size,
        combiner=not args.no_combiner,
    )
    resp = client.call("run", req, models.RunResponse)
    if not resp.ok:
        print(f"error: {resp.error}", file=sys.stderr)
        return EXIT_USAGE
    for line in resp.lines:
        print(line)
    return EXIT_OK


def cmd_check(args, client: Client) -> int:
    try:
        source = args.file.read_text()
        doc = args.doc.read_text()
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    req = models.CheckRequest(
        source=source,
        doc=doc,
        trials=args.trials,
        seed=args.seed,
        max_len=args.max_len,
        workers=args.workers,
    )
    resp = client.call("check", req, models.CheckResponse)
    for diag in resp.diagnostics:
        print(diag, file=sys.stderr)
    if resp.error:
        print(f"error: {resp.error}", file=sys.stderr)
        return EXIT_USAGE
    if resp.verdict == "mismatch":
        m = resp.mismatch
        repro = _out_dir(args) / f"mismatch.trial{m.trial}.data"
        repro.write_text("".join(f"{v}\n" for v in m.data))
        print(f"MISMATCH at trial {m.trial}: {m.detail}")
        if m.bindings:
            print(f"bindings: {m.bindings}")
        print(f"reproducer dataset: {repro}")
        return EXIT_MISMATCH
    print(f"{resp.verdict}: {resp.trials_run} trials, {resp.skipped_traps} trapped inputs skipped")
    return EXIT_OK


def cmd_bench(args, client: Client) -> int:
    from . import corpus

    names = (
        list(corpus.BENCHMARK_NAMES)
        if args.benchmarks == "all"
        else [n.strip() for n in args.benchmarks.split(",") if n.strip()]
    )
    for n in names:
        if n not in corpus.BENCHMARK_NAMES:
            print(f"error: unknown benchmark {n!r}", file=sys.stderr)
            return EXIT_USAGE
    try:
        workers = [int(w) for w in args.bench_workers.split(",")]
    except ValueError:
        print("error: --bench-workers needs N,N", file=sys.stderr)
        return EXIT_USAGE
    req = models.BenchRequest(
        specs=[models.BenchRowSpec(name=n, size=args.size, seed=args.seed) for n in names],
        workers=workers,
        repeats=args.repeats,
        settings=_settings(args),
    )
    resp = client.call("bench", req, models.BenchResponse)
    rows = resp.rows
    failed = [r for r in rows if r.error or r.equivalence == "mismatch"]
    if args.format == "tsv":
        cols = ["name", "size", "lift_ms", "iterations", "examined", "seq_ms"]
        wcols = [f"job_ms_w{w}" for w in workers]
        print("\t".join(cols + wcols + ["equivalence"]))
        for r in rows:
            vals = [r.name, r.size, r.lift_ms, r.iterations, r.candidates_examined, r.seq_ms]
            vals += [r.job_ms.get(str(w)) for w in workers]
            vals += [r.error or r.equivalence]
            print("\t".join(str(v) for v in vals))
    else:
        for r in rows:
            if r.error:
                print(f"{r.name:14s} size={r.size}: ERROR {r.error}")
                continue
            jobs = "  ".join(f"w{w}={r.job_ms.get(str(w), 0) / 1000:.2f}s" for w in workers)
            print(
                f"{r.name:14s} size={r.size}  lift={r.lift_ms / 1000:.2f}s"
                f" iters={r.iterations}  seq={r.seq_ms / 1000:.2f}s  {jobs}"
                f"  equivalence={r.equivalence}"
            )
    if any(r.error for r in rows):
        return EXIT_LIFT_FAILURE
    if any(r.equivalence == "mismatch" for r in rows):
        return EXIT_MISMATCH
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    if args.command == "serve":
        return cmd_serve(args)
    client = Client(args.server)
    try:
        if args.command == "lift":
            return cmd_lift(args, client)
        if args.command == "run":
            return cmd_run(args, client)
        if args.command == "check":
            return cmd_check(args, client)
        if args.command == "bench":
            return cmd_bench(args, client)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    parser.error(f"unknown command {args.command!r}")
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
