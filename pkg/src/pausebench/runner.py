"""Grid expansion, resumable trial execution, and LLM-as-judge scoring.

A run is a cross product of (model, technique, context length, depth, trial)
cells. Every cell is keyed by a stable fingerprint; results are appended to a
JSON Lines file and completed keys are skipped on resume, so an interrupted
run can be continued without duplicate model calls. All randomness (essay
order, multi-needle depths) derives from the global seed plus the cell
fingerprint, which makes any single cell reproducible in isolation.
"""
from __future__ import annotations

import hashlib
import json
import logging
import random
import re
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

from .client import ClientError, ModelProfile, RetryPolicy, complete
from .corpus import Corpus
from .haystack import (
    NeedleSpec,
    build_haystack,
    depth_grid,
    place_needle,
    place_needles,
)
from .prompts import Technique, inject_pauses, render_prompt, technique_by_id
from .tokenizer import Tokenizer

log = logging.getLogger(__name__)

CONTEXT_LADDER = (1_000, 2_000, 4_000, 8_000, 16_000, 32_000, 64_000, 128_000)
SINGLE_TRIALS = 3
MULTI_TRIALS = 15
DEPTH_POINTS = 15

RESULT_FIELDS = (
    "key", "model", "technique", "mode", "context_tokens", "depth_pct",
    "trial", "score", "answer", "judge_raw", "achieved_depths",
    "pause_overhead_tokens", "error", "started_at", "finished_at",
)


class PlanError(ValueError):
    pass


class JudgeParseError(ValueError):
    pass


@dataclass(frozen=True)
class RunSpec:
    model: str
    technique: str
    context_tokens: int
    trial_index: int
    mode: str  # "single" | "multi"
    depth_pct: float | None = None  # single mode only

    def fingerprint(self) -> str:
        depth = "" if self.depth_pct is None else f"{self.depth_pct:.6f}"
        raw = "|".join([self.model, self.technique, str(self.context_tokens),
                        self.mode, depth, str(self.trial_index)])
        return hashlib.sha256(raw.encode("utf-8")).hexdigest()[:16]


@dataclass
class RunContext:
    """Everything execute() needs besides the plan itself."""
    corpus: Corpus
    tokenizer: Tokenizer
    needles: list[NeedleSpec]
    profiles: dict[str, ModelProfile]
    judge: ModelProfile
    seed: int = 0
    finetuned: dict[str, ModelProfile] = field(default_factory=dict)
    max_in_flight: int = 4
    retry: RetryPolicy = field(default_factory=RetryPolicy)


def plan_runs(models: list[ModelProfile], technique_ids: list[str],
              context_lengths: list[int], mode: str,
              finetuned: dict[str, ModelProfile] | None = None,
              depths: int = DEPTH_POINTS,
              trials: int | None = None) -> list[RunSpec]:
    """Deterministic cross product, filtered by each model's context limit."""
    if mode not in ("single", "multi"):
        raise PlanError(f"mode must be 'single' or 'multi', got {mode!r}")
    bad = [c for c in context_lengths if c not in CONTEXT_LADDER]
    if bad:
        raise PlanError(f"context lengths {bad} not in ladder {CONTEXT_LADDER}")
    finetuned = finetuned or {}
    n_trials = trials if trials is not None else (
        SINGLE_TRIALS if mode == "single" else MULTI_TRIALS
    )
    specs: list[RunSpec] = []
    for profile in models:
        lengths = [c for c in sorted(context_lengths)
                   if c <= profile.max_context_tokens]
        for tech_id in technique_ids:
            tech = technique_by_id(tech_id)
            if tech.requires_finetuned_model and profile.name not in finetuned:
                raise PlanError(
                    f"technique {tech_id} needs a fine-tuned endpoint for "
                    f"model {profile.name!r} but none is configured"
                )
            for length in lengths:
                if mode == "single":
                    for depth in depth_grid(depths):
                        for trial in range(n_trials):
                            specs.append(RunSpec(
                                model=profile.name, technique=tech_id,
                                context_tokens=length, depth_pct=depth,
                                trial_index=trial, mode="single",
                            ))
                else:
                    for trial in range(n_trials):
                        specs.append(RunSpec(
                            model=profile.name, technique=tech_id,
                            context_tokens=length, depth_pct=None,
                            trial_index=trial, mode="multi",
                        ))
    return specs


def derive_seed(global_seed: int, fingerprint: str, purpose: str) -> int:
    raw = f"{global_seed}:{fingerprint}:{purpose}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(raw).digest()[:8], "big")


def parse_score(text: str) -> int:
    """First standalone integer in [1, 10], scanning left to right."""
    for m in re.finditer(r"(?<!\d)(\d+)(?!\d)", text):
        value = int(m.group(1))
        if 1 <= value <= 10:
            return value
    raise JudgeParseError(f"no standalone integer in [1,10] in {text[:80]!r}")


def load_judge_template() -> str:
    ref = resources.files("pausebench") / "templates" / "judge.txt"
    return ref.read_text(encoding="utf-8")


def judge_score(answer: str, reference: str, question: str,
                judge: ModelProfile, *, retry: RetryPolicy | None = None,
                limiter=None) -> tuple[int, str]:
    """Score an answer with the rubric-prompted judge model.

    One re-ask is attempted when the judge's reply has no parseable score.
    """
    if not reference:
        raise ValueError("reference must be non-empty")
    prompt = (load_judge_template()
              .replace("{question}", question)
              .replace("{reference}", reference)
              .replace("{answer}", answer))
    messages = [("user", prompt)]
    result = complete(judge, messages, retry=retry, limiter=limiter)
    try:
        return parse_score(result.text), result.text
    except JudgeParseError:
        pass
    messages.append(("user", "Reply with only a single integer from 1 to 10."))
    result = complete(judge, messages, retry=retry, limiter=limiter)
    return parse_score(result.text), result.text


def prepare_trial(spec: RunSpec, ctx: RunContext):
    """Build the exact prompt for a cell: haystack, needles, markers, render.

    Returns (rendered, question, reference, achieved_depths, overhead_tokens).
    Deterministic given (ctx.seed, spec).
    """
    tech = technique_by_id(spec.technique)
    fp = spec.fingerprint()
    hay = build_haystack(ctx.corpus, spec.context_tokens, ctx.tokenizer,
                         seed=derive_seed(ctx.seed, fp, "haystack"))
    if spec.mode == "single":
        needle = ctx.needles[spec.trial_index % len(ctx.needles)]
        placed = place_needle(hay, needle, spec.depth_pct, ctx.tokenizer)
        question = needle.question
        reference = needle.reference_answer
    else:
        if len(ctx.needles) < 3:
            raise PlanError("multi mode needs at least 3 needles")
        trio = ctx.needles[:3]
        rng = random.Random(derive_seed(ctx.seed, fp, "needles"))
        placed = place_needles(hay, trio, rng, ctx.tokenizer)
        question = "Answer each question. " + " ".join(n.question for n in trio)
        reference = " ".join(n.needle_text for n in trio)

    injected, _ = inject_pauses(placed.text, tech.injection)
    overhead = 0
    if injected is not placed.text:
        overhead = (ctx.tokenizer.count_tokens(injected)
                    - ctx.tokenizer.count_tokens(placed.text))
    rendered = render_prompt(tech, injected, question)
    return rendered, question, reference, list(placed.achieved_depths_pct), overhead


def _target_profile(spec: RunSpec, ctx: RunContext) -> ModelProfile:
    tech = technique_by_id(spec.technique)
    if tech.requires_finetuned_model:
        try:
            return ctx.finetuned[spec.model]
        except KeyError:
            raise PlanError(
                f"no fine-tuned endpoint configured for {spec.model!r}"
            ) from None
    return ctx.profiles[spec.model]


def run_trial(spec: RunSpec, ctx: RunContext, limiter=None) -> dict:
    started = _now()
    row = {
        "key": spec.fingerprint(),
        "model": spec.model,
        "technique": spec.technique,
        "mode": spec.mode,
        "context_tokens": spec.context_tokens,
        "depth_pct": spec.depth_pct,
        "trial": spec.trial_index,
        "score": None,
        "answer": None,
        "judge_raw": None,
        "achieved_depths": None,
        "pause_overhead_tokens": None,
        "error": None,
        "started_at": started,
        "finished_at": None,
    }
    try:
        rendered, question, reference, achieved, overhead = prepare_trial(spec, ctx)
        row["achieved_depths"] = achieved
        row["pause_overhead_tokens"] = overhead
        target = _target_profile(spec, ctx)
        result = complete(target, rendered.messages, retry=ctx.retry,
                          limiter=limiter, tokenizer=ctx.tokenizer)
        row["answer"] = result.text
        score, raw = judge_score(result.text, reference, question, ctx.judge,
                                 retry=ctx.retry, limiter=limiter)
        row["score"] = score
        row["judge_raw"] = raw
    except (ClientError, JudgeParseError, PlanError, ValueError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        log.warning("trial %s failed: %s", row["key"], row["error"])
    row["finished_at"] = _now()
    return row


def read_result_keys(results_path) -> set[str]:
    path = Path(results_path)
    keys: set[str] = set()
    if not path.exists():
        return keys
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                keys.add(json.loads(line)["key"])
            except (json.JSONDecodeError, KeyError):
                continue
    return keys


def load_results(results_path) -> list[dict]:
    rows = []
    with open(results_path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def execute(plan: list[RunSpec], results_path, ctx: RunContext, *,
            resume: bool = True, stop_event: threading.Event | None = None,
            progress=None) -> int:
    """Run every cell of the plan that is not already in the results file.

    Trials run with bounded parallelism; a single writer appends rows as they
    complete. Per-trial failures are recorded as rows with an error field and
    do not abort the run. Returns the number of rows appended.
    """
    results_path = Path(results_path)
    done = read_result_keys(results_path) if resume else set()
    if not resume and results_path.exists():
        results_path.unlink()
    pending = [s for s in plan if s.fingerprint() not in done]
    seen = set()
    for spec in plan:
        fp = spec.fingerprint()
        if fp in seen:
            raise PlanError(f"duplicate cell in plan: {spec}")
        seen.add(fp)

    limiter = threading.BoundedSemaphore(ctx.max_in_flight)
    appended = 0
    results_path.parent.mkdir(parents=True, exist_ok=True)
    with open(results_path, "a", encoding="utf-8") as out:
        with ThreadPoolExecutor(max_workers=ctx.max_in_flight) as pool:
            futures = {}
            it = iter(pending)
            stopped = False

            def submit_next():
                nonlocal stopped
                if stopped or (stop_event is not None and stop_event.is_set()):
                    stopped = True
                    return
                spec = next(it, None)
                if spec is not None:
                    futures[pool.submit(run_trial, spec, ctx, limiter)] = spec

            for _ in range(min(ctx.max_in_flight, len(pending))):
                submit_next()
            while futures:
                fut = next(as_completed(futures))
                futures.pop(fut)
                row = fut.result()
                out.write(json.dumps(row) + "\n")
                out.flush()
                appended += 1
                if progress is not None:
                    progress(row)
                submit_next()
    return appended


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


def load_needle_file(path) -> list[NeedleSpec]:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return [
        NeedleSpec(needle_text=r["needle"], question=r["question"],
                   reference_answer=r["reference_answer"])
        for r in raw
    ]
