"""Command-line interface.

Subcommands: corpus stats, build, run, aggregate, gen-finetune, attn report.
Run and gen-finetune are driven by JSON config files so a whole experiment is
reproducible from one committed artifact.
"""
from __future__ import annotations

import argparse
import csv
import json
import random
import signal
import sys
import threading
from pathlib import Path

from . import attention, finetune, stats
from .client import ModelProfile, RetryPolicy
from .corpus import load_corpus
from .haystack import build_haystack, place_needle, place_needles
from .prompts import (
    Template,
    inject_pauses,
    load_template,
    render_prompt,
    technique_by_id,
)
from .runner import (
    RunContext,
    execute,
    load_needle_file,
    load_results,
    plan_runs,
)
from .tokenizer import load_vocab


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = getattr(args, "handler", None)
    if handler is None:
        parser.print_help()
        return 2
    return handler(args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pausebench",
        description="Needle-in-a-haystack benchmarking with pause-marker "
                    "injection techniques.",
    )
    sub = parser.add_subparsers(dest="command")

    p_corpus = sub.add_parser("corpus", help="corpus utilities")
    corpus_sub = p_corpus.add_subparsers(dest="corpus_command")
    p_stats = corpus_sub.add_parser("stats", help="document/paragraph/token counts")
    p_stats.add_argument("directory")
    p_stats.add_argument("--glob", default="*.txt")
    p_stats.add_argument("--vocab", help="rank file for token counts")
    p_stats.set_defaults(handler=cmd_corpus_stats)

    p_build = sub.add_parser("build", help="build a placed (optionally "
                                           "injected/rendered) context")
    p_build.add_argument("--corpus", required=True)
    p_build.add_argument("--glob", default="*.txt")
    p_build.add_argument("--vocab", required=True)
    p_build.add_argument("--tokens", type=int, required=True)
    p_build.add_argument("--depth", type=float,
                         help="single-needle depth percentage; omit for "
                              "three random-depth needles")
    p_build.add_argument("--needles", required=True, help="needle JSON file")
    p_build.add_argument("--needle-index", type=int, default=0)
    p_build.add_argument("--seed", type=int, default=0)
    p_build.add_argument("--technique",
                         help="inject markers and render this technique's "
                              "prompt instead of emitting the bare context")
    p_build.add_argument("--out", help="output file (default stdout)")
    p_build.add_argument("--meta-out", help="write placement metadata JSON")
    p_build.set_defaults(handler=cmd_build)

    p_run = sub.add_parser("run", help="execute an evaluation grid")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--no-resume", action="store_true")
    p_run.set_defaults(handler=cmd_run)

    p_agg = sub.add_parser("aggregate", help="summaries, percent change, heatmaps")
    p_agg.add_argument("results")
    p_agg.add_argument("--tables", required=True, help="output directory")
    p_agg.add_argument("--mode", choices=["per_trial_mean", "pooled"],
                       default="per_trial_mean")
    p_agg.set_defaults(handler=cmd_aggregate)

    p_ft = sub.add_parser("gen-finetune", help="generate a fine-tuning dataset")
    p_ft.add_argument("--config", required=True)
    p_ft.add_argument("--out", required=True, help="output directory")
    p_ft.set_defaults(handler=cmd_gen_finetune)

    p_attn = sub.add_parser("attn", help="attention dump analysis")
    attn_sub = p_attn.add_subparsers(dest="attn_command")
    p_report = attn_sub.add_parser("report", help="spike metrics and comparisons")
    p_report.add_argument("--dumps", nargs="+", required=True)
    p_report.add_argument("--out", required=True, help="output directory")
    p_report.add_argument("--window", type=int, default=attention.DEFAULT_WINDOW)
    p_report.set_defaults(handler=cmd_attn_report)

    return parser


def cmd_corpus_stats(args) -> int:
    corpus = load_corpus(args.directory, args.glob)
    paragraphs = corpus.paragraphs()
    print(f"documents:  {len(corpus.documents)}")
    print(f"paragraphs: {len(paragraphs)}")
    if args.vocab:
        tokenizer = load_vocab(args.vocab)
        total = sum(tokenizer.count_tokens(text)
                    for _, text in corpus.documents)
        print(f"tokens:     {total} ({tokenizer.name})")
    return 0


def cmd_build(args) -> int:
    corpus = load_corpus(args.corpus, args.glob)
    tokenizer = load_vocab(args.vocab)
    needles = load_needle_file(args.needles)
    hay = build_haystack(corpus, args.tokens, tokenizer, seed=args.seed)
    if args.depth is not None:
        needle = needles[args.needle_index % len(needles)]
        placed = place_needle(hay, needle, args.depth, tokenizer)
        question = needle.question
        reference = needle.reference_answer
    else:
        if len(needles) < 3:
            print("need at least 3 needles for multi placement",
                  file=sys.stderr)
            return 2
        placed = place_needles(hay, needles[:3], random.Random(args.seed),
                               tokenizer)
        question = " ".join(n.question for n in needles[:3])
        reference = " ".join(n.needle_text for n in needles[:3])

    meta = {
        "context_tokens": hay.token_count,
        "tokenizer": tokenizer.name,
        "question": question,
        "reference_answer": reference,
        "target_depths_pct": list(placed.target_depths_pct),
        "achieved_depths_pct": list(placed.achieved_depths_pct),
    }
    if args.technique:
        tech = technique_by_id(args.technique)
        injected, _ = inject_pauses(placed.text, tech.injection)
        rendered = render_prompt(tech, injected, question)
        text = rendered.user_content
        base = _context_byte_offset(tech)
        spans = _shift_spans_into(injected, placed, base)
        meta.update({
            "technique": tech.id,
            "pause_byte_offsets": list(rendered.pause_positions),
            "needle_byte_spans": spans,
        })
    else:
        text = placed.text
        meta.update({
            "technique": None,
            "pause_byte_offsets": [],
            "needle_byte_spans": [list(s) for s in placed.needle_spans],
        })

    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        print(text)
    if args.meta_out:
        Path(args.meta_out).write_text(json.dumps(meta, indent=2) + "\n",
                                       encoding="utf-8")
    return 0


def _context_byte_offset(tech) -> int:
    template = load_template(tech.template)
    return len(template[:template.index("{context}")].encode("utf-8"))


def _shift_spans_into(injected: str, placed, base: int) -> list[list[int]]:
    """Needle spans relative to the rendered prompt: find each needle in the
    injected context (unique by construction) and add the template offset."""
    data = injected.encode("utf-8")
    spans = []
    for needle_text in placed.extract_needles():
        nb = needle_text.encode("utf-8")
        offset = data.index(nb)
        spans.append([base + offset, len(nb)])
    return spans


def _profile_from_dict(raw: dict) -> ModelProfile:
    return ModelProfile(
        name=raw["name"],
        base_url=raw["base_url"],
        api_key_env=raw.get("api_key_env", "OPENAI_API_KEY"),
        max_context_tokens=raw.get("max_context_tokens", 128_000),
        temperature=raw.get("temperature", 0.0),
        max_output_tokens=raw.get("max_output_tokens", 256),
    )


def cmd_run(args) -> int:
    cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
    base = Path(args.config).parent

    def respath(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    corpus = load_corpus(respath(cfg["corpus_dir"]), cfg.get("corpus_glob", "*.txt"))
    tokenizer = load_vocab(respath(cfg["vocab_path"]))
    needles_cfg = cfg["needles"]
    if isinstance(needles_cfg, str):
        needles = load_needle_file(respath(needles_cfg))
    else:
        from .haystack import NeedleSpec
        needles = [NeedleSpec(r["needle"], r["question"], r["reference_answer"])
                   for r in needles_cfg]

    models = [_profile_from_dict(m) for m in cfg["models"]]
    judge = _profile_from_dict(cfg["judge"])
    finetuned = {name: _profile_from_dict(p)
                 for name, p in cfg.get("finetuned_models", {}).items()}
    retry_cfg = cfg.get("retry", {})
    retry = RetryPolicy(
        base_delay=retry_cfg.get("base_delay", 1.0),
        factor=retry_cfg.get("factor", 2.0),
        jitter=retry_cfg.get("jitter", 0.2),
        max_attempts=retry_cfg.get("max_attempts", 6),
        timeout=retry_cfg.get("timeout", 120.0),
    )
    ctx = RunContext(
        corpus=corpus, tokenizer=tokenizer, needles=needles,
        profiles={m.name: m for m in models}, judge=judge,
        seed=cfg.get("seed", 0), finetuned=finetuned,
        max_in_flight=cfg.get("max_in_flight", 4), retry=retry,
    )
    plan = plan_runs(
        models, cfg["techniques"], cfg["context_lengths"],
        mode=cfg.get("mode", "single"), finetuned=finetuned,
        depths=cfg.get("depths", 15), trials=cfg.get("trials"),
    )
    stop = threading.Event()
    previous = signal.signal(signal.SIGINT, lambda *a: stop.set())
    try:
        done = 0

        def progress(row):
            nonlocal done
            done += 1
            status = row["error"] or f"score={row['score']}"
            print(f"[{done}] {row['model']} {row['technique']} "
                  f"{row['context_tokens']}tok trial={row['trial']} {status}")

        appended = execute(plan, args.out, ctx,
                           resume=not args.no_resume, stop_event=stop,
                           progress=progress)
    finally:
        signal.signal(signal.SIGINT, previous)
    print(f"appended {appended} rows to {args.out} "
          f"({len(plan)} cells planned)")
    return 0


def _fmt_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def _slug(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in name)


def cmd_aggregate(args) -> int:
    rows = load_results(args.results)
    out_dir = Path(args.tables)
    out_dir.mkdir(parents=True, exist_ok=True)

    summaries = stats.summarize(rows, mode=args.mode)
    with open(out_dir / "summary.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["model", "technique", "context_tokens", "mean",
                         "std", "n_trials"])
        for s in summaries:
            writer.writerow([s.model, s.technique, s.context_tokens,
                             _fmt_cell(s.mean), _fmt_cell(s.std), s.n_trials])

    pct_rows = stats.percent_change_table(summaries)
    lengths = sorted({length for r in pct_rows for length in r.per_length})
    with open(out_dir / "percent_change.csv", "w", encoding="utf-8",
              newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["model", "technique",
                         *[f"pct_{length}" for length in lengths], "averaged"])
        for r in pct_rows:
            writer.writerow([
                r.model, r.technique,
                *[_fmt_cell(r.per_length.get(length)) for length in lengths],
                _fmt_cell(r.averaged),
            ])

    combos = sorted({(r["model"], r["technique"]) for r in rows
                     if r.get("mode") == "single"})
    for model, technique in combos:
        matrix = stats.heatmap_data(rows, model, technique)
        if not matrix:
            continue
        stem = f"heatmap_{_slug(model)}_{_slug(technique)}"
        with open(out_dir / f"{stem}.csv", "w", encoding="utf-8",
                  newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["context_tokens", "depth_pct", "mean_score"])
            for length, depth, mean in matrix:
                writer.writerow([length, _fmt_cell(depth), _fmt_cell(mean)])
        (out_dir / f"{stem}.svg").write_text(stats.render_heatmap(matrix),
                                             encoding="utf-8")
    report = stats.run_report(rows)
    print(f"rows={report['rows']} scored={report['scored']} "
          f"failed={report['failed']} -> {out_dir}")
    return 0


def cmd_gen_finetune(args) -> int:
    cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
    base = Path(args.config).parent

    def respath(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    corpus = load_corpus(respath(cfg["corpus_dir"]), cfg.get("corpus_glob", "*.txt"))
    tokenizer = load_vocab(respath(cfg["vocab_path"]))
    needles = load_needle_file(respath(cfg["needles"]))
    data_path, cfg_path = finetune.gen_dataset(
        corpus, tokenizer, args.out,
        sizes=cfg.get("sizes", list(finetune.DEFAULT_SIZES)),
        count_per_size=cfg.get("count_per_size", 1),
        needles=needles, seed=cfg.get("seed", 0),
    )
    print(f"wrote {data_path} and {cfg_path}")
    return 0


def cmd_attn_report(args) -> int:
    dumps = []
    for path in args.dumps:
        dump = attention.load_dump(path)
        dumps.append((dump.technique, dump))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    spike_lines = []
    for technique, dump in dumps:
        if not dump.pause_positions:
            continue
        report = attention.spike_report(dump, window=args.window)
        text = attention.spikes_csv(report)
        spike_lines.extend(text.splitlines()[1:] if spike_lines else
                           text.splitlines())
    if spike_lines:
        (out_dir / "spikes.csv").write_text("\n".join(spike_lines) + "\n",
                                            encoding="utf-8")
    if len(dumps) >= 2:
        rows = attention.compare(dumps, window=args.window)
        (out_dir / "compare.csv").write_text(attention.compare_csv(rows),
                                             encoding="utf-8")
        (out_dir / "compare.svg").write_text(attention.compare_svg(dumps),
                                             encoding="utf-8")
    print(f"report written to {out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
