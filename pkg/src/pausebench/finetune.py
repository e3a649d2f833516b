"""Generate pause-injected fine-tuning datasets for external trainers.

Each record is a one-shot example with four parts: an instruction, a long
pause-injected context containing one needle, a query about the needle, and
a response that reproduces the needle verbatim. The toolkit never trains;
the sidecar training_config.json echoes the reference LoRA/training
hyperparameters for whatever trainer consumes the dataset.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from .corpus import Corpus
from .haystack import (
    MULTI_DEPTH_HIGH,
    MULTI_DEPTH_LOW,
    NeedleSpec,
    build_haystack,
    place_needle,
)
from .prompts import Injection, Template, inject_pauses, load_template
from .tokenizer import Tokenizer

TRAINING_CONFIG = {
    "lora": {
        "rank": 16,
        "alpha": 16,
        "dropout": 0,
        "target_modules": ["q_proj", "k_proj", "v_proj", "o_proj",
                           "gate_proj", "up_proj", "down_proj"],
    },
    "training": {
        "batch_size": 2,
        "gradient_accumulation_steps": 4,
        "learning_rate": 2e-4,
        "weight_decay": 0.01,
        "warmup_steps": 6,
        "steps": 60,
        "lr_scheduler": "linear",
        "optimizer": "adamw_8bit",
    },
    "other": {
        "mixed_precision": "fp16",
        "quantization_bits": 4,
    },
}

DEFAULT_SIZES = (1_000, 2_000, 4_000, 8_000, 16_000, 32_000, 64_000, 128_000)


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class TrainingRecord:
    instruction: str
    context: str
    query: str
    response: str
    meta: dict

    def as_json(self) -> dict:
        return {"instruction": self.instruction, "context": self.context,
                "query": self.query, "response": self.response,
                "meta": self.meta}


def _instruction_text() -> str:
    """The instruction section of the pause-aware template."""
    template = load_template(Template.PAUSE_AWARE)
    start = template.index("###Instruction:")
    start = template.index("\n\n", start) + 2
    end = template.index("\n\n###Context:", start)
    return template[start:end]


def render_record_prompt(record: TrainingRecord) -> str:
    """The record as the filled pause-aware prompt its trainer will see."""
    return (load_template(Template.PAUSE_AWARE)
            .replace("{context}", record.context)
            .replace("{input}", record.query))


def gen_example(corpus: Corpus, target_tokens: int, needle: NeedleSpec,
                tokenizer: Tokenizer, seed: int) -> TrainingRecord:
    """One training record: haystack to budget, needle at a seeded-uniform
    depth in [5, 95], standard pause markers after every paragraph."""
    rng = random.Random(seed)
    hay = build_haystack(corpus, target_tokens, tokenizer, seed=seed)
    depth = rng.uniform(MULTI_DEPTH_LOW, MULTI_DEPTH_HIGH)
    placed = place_needle(hay, needle, depth, tokenizer)
    injected, offsets = inject_pauses(placed.text, Injection.STANDARD)
    if injected.count(needle.needle_text) != 1:
        raise DatasetError("needle must occur exactly once after injection")
    if len(offsets) != len(hay.paragraphs):
        raise DatasetError("expected one pause marker per paragraph")
    return TrainingRecord(
        instruction=_instruction_text(),
        context=injected,
        query=needle.question,
        response=needle.needle_text,
        meta={
            "target_tokens": target_tokens,
            "needle_depth_pct": placed.achieved_depths_pct[0],
            "seed": seed,
            "haystack_tokens": hay.token_count,
        },
    )


def gen_dataset(corpus: Corpus, tokenizer: Tokenizer, out_dir, *,
                sizes=DEFAULT_SIZES, count_per_size: int = 1,
                needles: list[NeedleSpec], seed: int = 0) -> tuple[Path, Path]:
    """Write dataset.jsonl and training_config.json under *out_dir*.

    Needles are drawn round-robin from a seeded shuffle of the pool; record
    seeds derive from (seed, size, index) so reruns are byte-identical.
    """
    if not needles:
        raise DatasetError("needle pool is empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset_path = out_dir / "dataset.jsonl"
    config_path = out_dir / "training_config.json"

    pool = list(needles)
    random.Random(seed).shuffle(pool)

    records: list[TrainingRecord] = []
    seen: set[tuple[str, str]] = set()
    i = 0
    for size in sizes:
        for k in range(count_per_size):
            needle = pool[i % len(pool)]
            record_seed = _record_seed(seed, size, k)
            record = gen_example(corpus, size, needle, tokenizer, record_seed)
            dedup_key = (record.context, needle.needle_text)
            if dedup_key in seen:
                raise DatasetError(
                    f"duplicate (haystack, needle) pair at size {size} #{k}"
                )
            seen.add(dedup_key)
            records.append(record)
            i += 1

    with open(dataset_path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.as_json()) + "\n")
    config_path.write_text(json.dumps(TRAINING_CONFIG, indent=2) + "\n",
                           encoding="utf-8")
    return dataset_path, config_path


def _record_seed(seed: int, size: int, index: int) -> int:
    import hashlib
    raw = f"{seed}:{size}:{index}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(raw).digest()[:8], "big")
