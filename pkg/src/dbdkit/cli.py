"""Command-line entry point.

Every command reads one structured config file, writes its artifacts under a
fresh run directory named by config hash + timestamp (reruns never
overwrite), and stamps the config hash into each artifact. Exit codes:
0 success, 2 config error, 3 data error, 4 runtime error.

    dbdkit gen-corpus --config cfg.json
    dbdkit train --config cfg.json
    dbdkit eval --config cfg.json --checkpoint run/x.npz [--baseline run/y.npz]
    dbdkit stream --config cfg.json --checkpoint run/x.npz [--stdio]
    dbdkit icl --config cfg.json
    dbdkit export-embeddings --config cfg.json --checkpoint run/x.npz
    dbdkit plot --out dir histogram.csv history.jsonl ...
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import sys
import time
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, canonical_dict, config_hash, load_run_config
from .corpus import (
    Call, CorpusFormatError, Label, SpeakerTag, Turn, Waveform,
    generate_synthetic_corpus, load_corpus, save_corpus, split_corpus,
)
from .evaluation import (
    OVERFLOW_NEG, OVERFLOW_POS, compute_prf, dump_embeddings,
    first_prediction_distance, histogram_distances, paired_significance,
)
from .icl import OracleClient, RefusingClient, evaluate_icl
from .models import build_model, model_card
from .nn import load_checkpoint, save_checkpoint, set_global_seed
from .streaming import feed_turn, measure_latency, open_session
from .training import checkpoint_name, train

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4

HISTOGRAM_BUCKET_ORDER = ([OVERFLOW_NEG] + [str(d) for d in range(-5, 6)]
                          + [OVERFLOW_POS, "no_prediction"])


class DataError(RuntimeError):
    pass


def _run_dir(config: RunConfig, command: str) -> Path:
    stamp = _dt.datetime.now().strftime("%Y%m%d-%H%M%S")
    base = Path(config.paths.out_root)
    base.mkdir(parents=True, exist_ok=True)
    candidate = base / f"{command}-{config_hash(config)}-{stamp}"
    n = 0
    while candidate.exists():  # append-only: never reuse a run directory
        n += 1
        candidate = base / f"{command}-{config_hash(config)}-{stamp}-{n}"
    candidate.mkdir(parents=True)
    return candidate


def _write_config(config: RunConfig, run_dir: Path) -> None:
    payload = {"config_hash": config_hash(config), **canonical_dict(config)}
    (run_dir / "config.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load_corpus_from(config: RunConfig, override: str | None) -> list[Call]:
    path = override or config.paths.corpus
    if not path:
        raise DataError("no corpus path: set paths.corpus or pass --corpus")
    try:
        return load_corpus(path)
    except CorpusFormatError as exc:
        raise DataError(str(exc)) from exc


def _restore_model(config: RunConfig, checkpoint: str | None):
    path = checkpoint or config.paths.checkpoint
    if not path:
        raise DataError("no checkpoint path: set paths.checkpoint or pass --checkpoint")
    if not Path(path).exists():
        raise DataError(f"checkpoint not found: {path}")
    state, meta = load_checkpoint(path)
    set_global_seed(0)
    model = build_model(config.model_config())
    model.load_state_dict(state)
    model.eval()
    return model, meta


def _select_split(config: RunConfig, calls: list[Call]) -> list[Call]:
    which = config.evaluation.split
    if which == "all":
        return calls
    split = split_corpus(calls, config.split.ratios, config.split.seed)
    return {"train": split.train, "validation": split.validation,
            "test": split.test}[which]


def _metrics_record(config: RunConfig, **fields) -> str:
    record = {"config_hash": config_hash(config), **fields}
    return json.dumps(record, sort_keys=True)


# ---------------------------------------------------------------- commands

def cmd_gen_corpus(config: RunConfig, out_dir: str | None = None) -> Path:
    run_dir = Path(out_dir) if out_dir else _run_dir(config, "gen-corpus")
    run_dir.mkdir(parents=True, exist_ok=True)
    _write_config(config, run_dir)
    calls = generate_synthetic_corpus(config.corpus)
    path = save_corpus(calls, run_dir / "corpus.jsonl")
    n_breakdown = sum(1 for c in calls for t in c.turns
                      if t.label is Label.BREAKDOWN)
    summary = {"config_hash": config_hash(config), "calls": len(calls),
               "turns": sum(len(c.turns) for c in calls),
               "breakdown_turns": n_breakdown}
    (run_dir / "summary.json").write_text(
        json.dumps(summary, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {len(calls)} calls to {path}")
    return run_dir


def cmd_train(config: RunConfig, corpus_path: str | None = None) -> Path:
    calls = _load_corpus_from(config, corpus_path)
    split = split_corpus(calls, config.split.ratios, config.split.seed)
    run_dir = _run_dir(config, "train")
    _write_config(config, run_dir)
    model_cfg = config.model_config()
    results = train(model_cfg, split, config.training)
    metrics_lines = []
    for result in results:
        arch = result.model.architecture.value
        name = checkpoint_name(arch, result.seed)
        save_checkpoint(run_dir / f"{name}.npz", result.best_state,
                        {"architecture": arch, "seed": result.seed,
                         "config_hash": config_hash(config)})
        (run_dir / f"history_{result.seed}.jsonl").write_text(
            result.history.to_jsonl(), encoding="utf-8")
        (run_dir / f"model_card_{result.seed}.json").write_text(
            json.dumps(model_card(result.model), indent=2, sort_keys=True) + "\n",
            encoding="utf-8")
        for split_name, split_calls in (("validation", split.validation),
                                        ("test", split.test)):
            preds = []
            for call in split_calls:
                preds.extend(result.model.predict_call(call))
            report = compute_prf(preds, split_calls)
            metrics_lines.append(_metrics_record(
                config, model=arch, split=split_name, seed=result.seed,
                **report.as_dict()))
            print(f"seed {result.seed} {split_name}: "
                  f"P={report.precision:.4f} R={report.recall:.4f} "
                  f"F1={report.f1:.4f}")
    (run_dir / "metrics.jsonl").write_text("\n".join(metrics_lines) + "\n",
                                           encoding="utf-8")
    return run_dir


def cmd_eval(config: RunConfig, checkpoint: str | None = None,
             corpus_path: str | None = None,
             baseline: str | None = None) -> Path:
    model, meta = _restore_model(config, checkpoint)
    calls = _load_corpus_from(config, corpus_path)
    target = _select_split(config, calls)
    run_dir = _run_dir(config, "eval")
    _write_config(config, run_dir)
    preds = []
    for call in target:
        preds.extend(model.predict_call(call))
    report = compute_prf(preds, target)
    lines = [_metrics_record(config, model=model.architecture.value,
                             split=config.evaluation.split,
                             seed=meta.get("seed", -1), **report.as_dict())]
    (run_dir / "metrics.jsonl").write_text("\n".join(lines) + "\n",
                                           encoding="utf-8")
    # first-prediction distance histogram over calls with gold breakdowns
    by_call = {}
    for p in preds:
        by_call.setdefault(p.call_id, []).append(p)
    distances = [first_prediction_distance(c, by_call[c.id]) for c in target
                 if any(t.label is Label.BREAKDOWN for t in c.turns)]
    hist = histogram_distances(distances)
    with (run_dir / "distance_histogram.csv").open("w", newline="",
                                                   encoding="utf-8") as handle:
        handle.write(f"# config_hash: {config_hash(config)}\n")
        writer = csv.writer(handle)
        writer.writerow(["model", "bucket", "count"])
        for bucket in HISTOGRAM_BUCKET_ORDER:
            if bucket == "no_prediction":
                count = hist.no_prediction
            else:
                key = int(bucket) if bucket not in (OVERFLOW_NEG, OVERFLOW_POS) \
                    else bucket
                count = hist.buckets.get(key, 0)
            writer.writerow([model.architecture.value, bucket, count])
    if baseline:
        base_model, _ = _restore_model(config, baseline)
        base_preds = []
        for call in target:
            base_preds.extend(base_model.predict_call(call))
        p_value = paired_significance(
            preds, base_preds, target,
            n_resamples=config.evaluation.bootstrap_resamples,
            seed=config.evaluation.bootstrap_seed)
        (run_dir / "significance.json").write_text(json.dumps(
            {"config_hash": config_hash(config), "p_value": p_value,
             "n_resamples": config.evaluation.bootstrap_resamples},
            sort_keys=True) + "\n", encoding="utf-8")
        print(f"paired bootstrap p-value vs baseline: {p_value:.4f}")
    print(f"eval {config.evaluation.split}: P={report.precision:.4f} "
          f"R={report.recall:.4f} F1={report.f1:.4f}")
    return run_dir


def cmd_stream(config: RunConfig, checkpoint: str | None = None,
               corpus_path: str | None = None, stdio: bool = False,
               stdin=None, stdout=None) -> Path | None:
    model, _ = _restore_model(config, checkpoint)
    window = config.streaming.window
    if stdio:
        return _stream_stdio(model, window, stdin or sys.stdin,
                             stdout or sys.stdout)
    calls = _load_corpus_from(config, corpus_path)
    run_dir = _run_dir(config, "stream")
    _write_config(config, run_dir)
    verdict_lines = []
    for call in calls:
        session = open_session(model, window)
        for turn in call.turns:
            verdict, session = feed_turn(session, turn)
            verdict_lines.append(json.dumps(
                {"call_id": call.id, "turn_index": verdict.turn_index,
                 "score": round(verdict.score, 10),
                 "label": verdict.label.value}, sort_keys=True))
    (run_dir / "verdicts.jsonl").write_text("\n".join(verdict_lines) + "\n",
                                            encoding="utf-8")
    summary = measure_latency(model, calls, window)
    (run_dir / "latency.json").write_text(json.dumps(
        {"config_hash": config_hash(config), "frontend": summary.frontend,
         "n_turns": summary.n_turns, "mean_ms": summary.mean_ms,
         "p50_ms": summary.p50_ms, "p95_ms": summary.p95_ms},
        sort_keys=True) + "\n", encoding="utf-8")
    print(f"streamed {summary.n_turns} turns; "
          f"latency mean {summary.mean_ms:.2f} ms (frontend {summary.frontend})")
    return run_dir


def _stream_stdio(model, window, stdin, stdout) -> None:
    """Line-delimited request/response: one turn record in, one verdict out.
    A new call_id resets the session."""
    session = None
    current_call = None
    for raw in stdin:
        raw = raw.strip()
        if not raw:
            continue
        record = json.loads(raw)
        if session is None or record["call_id"] != current_call:
            session = open_session(model, window)
            current_call = record["call_id"]
        turn = Turn(
            call_id=record["call_id"], index=record["index"],
            speaker=SpeakerTag(record["speaker"]), text=record["text"],
            intent=record["intent"],
            waveform=Waveform(
                np.asarray(record.get("samples", []), dtype=np.float32),
                record["sample_rate"]),
            label=Label.NO_BREAKDOWN)
        verdict, session = feed_turn(session, turn)
        stdout.write(json.dumps(
            {"call_id": current_call, "turn_index": verdict.turn_index,
             "score": verdict.score, "label": verdict.label.value,
             "latency_ms": verdict.latency_ms}, sort_keys=True) + "\n")
        stdout.flush()
    return None


def cmd_icl(config: RunConfig, corpus_path: str | None = None) -> Path:
    calls = _load_corpus_from(config, corpus_path)
    split = split_corpus(calls, config.split.ratios, config.split.seed)
    client = {"oracle": lambda: OracleClient.for_calls(split.test),
              "refusing": RefusingClient}[config.icl.client]()
    rows = evaluate_icl(client, split.train, split.test,
                        list(config.icl.n_examples), seeds=config.icl.seeds,
                        budget_tokens=config.icl.budget_tokens)
    run_dir = _run_dir(config, "icl")
    _write_config(config, run_dir)
    with (run_dir / "icl_report.csv").open("w", newline="",
                                           encoding="utf-8") as handle:
        handle.write(f"# config_hash: {config_hash(config)}\n")
        writer = csv.writer(handle)
        writer.writerow(["n_examples", "mean_f1", "p25_f1", "p75_f1",
                         "client_failures"])
        for row in rows:
            writer.writerow([row.n_examples, f"{row.mean_f1:.6f}",
                             f"{row.p25_f1:.6f}", f"{row.p75_f1:.6f}",
                             row.client_failures])
            print(f"n={row.n_examples}: mean F1 {row.mean_f1:.4f} "
                  f"[p25 {row.p25_f1:.4f}, p75 {row.p75_f1:.4f}]")
    return run_dir


def cmd_export_embeddings(config: RunConfig, checkpoint: str | None = None,
                          corpus_path: str | None = None) -> Path:
    calls = _load_corpus_from(config, corpus_path)
    target = _select_split(config, calls)
    model, _ = _restore_model(config, checkpoint)
    run_dir = _run_dir(config, "export-embeddings")
    _write_config(config, run_dir)
    path = dump_embeddings(model, target, run_dir / "embeddings.tsv")
    print(f"wrote embeddings for {sum(len(c.turns) for c in target)} turns to {path}")
    return run_dir


def cmd_plot(inputs: list[str], out_dir: str) -> Path:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    made = []
    for input_path in inputs:
        path = Path(input_path)
        if not path.exists():
            raise DataError(f"plot input not found: {path}")
        if path.suffix == ".csv":
            rows = [r for r in csv.reader(
                line for line in path.read_text(encoding="utf-8").splitlines()
                if not line.startswith("#"))]
            header, body = rows[0], rows[1:]
            if header != ["model", "bucket", "count"]:
                raise DataError(f"{path}: expected histogram CSV header")
            by_model: dict[str, dict[str, int]] = {}
            for model, bucket, count in body:
                by_model.setdefault(model, {})[bucket] = int(count)
            for model, counts in by_model.items():
                fig, ax = plt.subplots(figsize=(8, 4))
                values = [counts.get(b, 0) for b in HISTOGRAM_BUCKET_ORDER]
                ax.bar(range(len(HISTOGRAM_BUCKET_ORDER)), values,
                       color="#4878a8")
                ax.set_xticks(range(len(HISTOGRAM_BUCKET_ORDER)))
                ax.set_xticklabels(HISTOGRAM_BUCKET_ORDER, rotation=45,
                                   ha="right")
                ax.set_xlabel("turns between first prediction and first gold breakdown")
                ax.set_ylabel("calls")
                ax.set_title(f"first-prediction distance: {model}")
                fig.tight_layout()
                target = out / f"distance_{model}_{path.stem}.png"
                fig.savefig(target, dpi=110)
                plt.close(fig)
                made.append(target)
        elif path.suffix == ".jsonl":
            lines = [json.loads(l) for l in
                     path.read_text(encoding="utf-8").splitlines() if l.strip()]
            epochs = [l for l in lines if "epoch" in l]
            if not epochs:
                raise DataError(f"{path}: no epoch records")
            fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
            xs = [e["epoch"] for e in epochs]
            ax1.plot(xs, [e["train_loss"] for e in epochs], marker="o")
            ax1.set_xlabel("epoch")
            ax1.set_ylabel("train loss")
            ax2.plot(xs, [e["val_f1"] for e in epochs], marker="o",
                     color="#a84848")
            ax2.set_xlabel("epoch")
            ax2.set_ylabel("validation F1")
            fig.tight_layout()
            target = out / f"history_{path.stem}.png"
            fig.savefig(target, dpi=110)
            plt.close(fig)
            made.append(target)
        else:
            raise DataError(f"{path}: expected .csv histogram or .jsonl history")
    for p in made:
        print(f"wrote {p}")
    return out


# ------------------------------------------------------------------- parser

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dbdkit",
        description="dialogue breakdown detection toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", required=True, help="run config JSON")
        return p

    p = with_config(sub.add_parser("gen-corpus", help="generate a synthetic corpus"))
    p.add_argument("--out", help="explicit output directory")

    p = with_config(sub.add_parser("train", help="train per config seeds"))
    p.add_argument("--corpus", help="corpus file (overrides paths.corpus)")

    p = with_config(sub.add_parser("eval", help="evaluate a checkpoint"))
    p.add_argument("--checkpoint", help="checkpoint archive")
    p.add_argument("--corpus", help="corpus file")
    p.add_argument("--baseline", help="second checkpoint for paired significance")

    p = with_config(sub.add_parser("stream", help="replay calls turn by turn"))
    p.add_argument("--checkpoint", help="checkpoint archive")
    p.add_argument("--corpus", help="corpus file")
    p.add_argument("--stdio", action="store_true",
                   help="line-delimited turn records on stdin, verdicts on stdout")

    p = with_config(sub.add_parser("icl", help="in-context-learning report"))
    p.add_argument("--corpus", help="corpus file")

    p = with_config(sub.add_parser("export-embeddings",
                                   help="dump before/after embeddings"))
    p.add_argument("--checkpoint", help="checkpoint archive")
    p.add_argument("--corpus", help="corpus file")

    p = sub.add_parser("plot", help="render histogram CSVs / history JSONLs")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "plot":
            cmd_plot(args.inputs, args.out)
            return EXIT_OK
        config = load_run_config(args.config)
        if args.command == "gen-corpus":
            cmd_gen_corpus(config, args.out)
        elif args.command == "train":
            cmd_train(config, args.corpus)
        elif args.command == "eval":
            cmd_eval(config, args.checkpoint, args.corpus, args.baseline)
        elif args.command == "stream":
            cmd_stream(config, args.checkpoint, args.corpus, args.stdio)
        elif args.command == "icl":
            cmd_icl(config, args.corpus)
        elif args.command == "export-embeddings":
            cmd_export_embeddings(config, args.checkpoint, args.corpus)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # keep the cause to one line per contract
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
