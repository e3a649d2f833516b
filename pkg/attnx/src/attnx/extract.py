"""Capture per-layer attention over a prompt at the first generated token.

The model runs one greedy decoding step; for every layer we keep the
attention row of that step (the last prompt position attending over all
prompt positions), averaged over heads. Pause markers and the needle,
supplied as byte offsets alongside the prompt, are mapped to token indices
so downstream analysis can locate them in the vectors.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import torch
from transformers import AutoModelForCausalLM, AutoTokenizer

DEFAULT_PROMPT_CAP = 4096


class ExtractionError(RuntimeError):
    pass


@dataclass(frozen=True)
class PromptMeta:
    technique: str
    pause_byte_offsets: tuple[int, ...]
    needle_byte_span: tuple[int, int]  # (offset, length)

    @classmethod
    def from_file(cls, path) -> "PromptMeta":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        spans = raw.get("needle_byte_spans") or []
        if "needle_byte_span" in raw:
            span = raw["needle_byte_span"]
        elif spans:
            span = spans[0]
        else:
            raise ExtractionError("meta has no needle byte span")
        return cls(
            technique=raw.get("technique") or "baseline",
            pause_byte_offsets=tuple(raw.get("pause_byte_offsets", [])),
            needle_byte_span=(int(span[0]), int(span[1])),
        )


def load_schema() -> dict:
    ref = resources.files("attnx") / "schemas" / "attention_dump.schema.json"
    return json.loads(ref.read_text(encoding="utf-8"))


def _byte_to_char(prompt: str, byte_offset: int) -> int:
    data = prompt.encode("utf-8")
    if byte_offset > len(data):
        raise ExtractionError(f"byte offset {byte_offset} beyond prompt end")
    return len(data[:byte_offset].decode("utf-8"))


def _char_to_token(offsets, char_pos: int) -> int:
    for i, (start, end) in enumerate(offsets):
        if start <= char_pos < end:
            return i
    raise ExtractionError(f"no token covers character {char_pos}")


def extract_attention(model_id: str, prompt: str, meta: PromptMeta,
                      output_path, *,
                      max_prompt_tokens: int = DEFAULT_PROMPT_CAP,
                      device: str = "cpu") -> dict:
    """Run one greedy step and dump head-averaged per-layer attention.

    Returns the dump dict after validating it against the bundled schema and
    writing it to *output_path*.
    """
    try:
        tokenizer = AutoTokenizer.from_pretrained(model_id)
        model = AutoModelForCausalLM.from_pretrained(
            model_id, attn_implementation="eager"
        )
    except Exception as exc:
        raise ExtractionError(f"cannot load model {model_id!r}: {exc}") from exc
    model.to(device)
    model.eval()

    encoded = tokenizer(prompt, return_offsets_mapping=True,
                        return_tensors=None, add_special_tokens=False)
    input_ids = encoded["input_ids"]
    offsets = encoded["offset_mapping"]
    n = len(input_ids)
    if n == 0:
        raise ExtractionError("prompt encodes to zero tokens")
    if n > max_prompt_tokens:
        raise ExtractionError(
            f"prompt is {n} tokens, over the cap of {max_prompt_tokens}"
        )

    ids = torch.tensor([input_ids], device=device)
    with torch.no_grad():
        out = model(ids, output_attentions=True)
    if not out.attentions:
        raise ExtractionError("model returned no attention tensors")

    layers = []
    for attn in out.attentions:  # (1, heads, seq, seq)
        row = attn[0, :, -1, :].mean(dim=0)
        layers.append([float(w) for w in row.tolist()])

    next_id = int(out.logits[0, -1].argmax())
    next_text = tokenizer.decode([next_id])

    pause_tokens = [
        _char_to_token(offsets, _byte_to_char(prompt, off))
        for off in meta.pause_byte_offsets
    ]
    start_b, length_b = meta.needle_byte_span
    needle_start = _char_to_token(offsets, _byte_to_char(prompt, start_b))
    needle_last = _char_to_token(
        offsets, _byte_to_char(prompt, start_b + length_b) - 1
    )
    dump = {
        "model_name": str(model_id),
        "prompt_token_count": n,
        "layers": layers,
        "pause_positions": pause_tokens,
        "needle_span": [needle_start, needle_last + 1],
        "technique": meta.technique,
        "head_aggregation": "mean",
        "generated_token_id": next_id,
        "generated_token_text": next_text,
    }
    try:
        jsonschema.validate(dump, load_schema())
    except jsonschema.ValidationError as exc:
        raise ExtractionError(
            f"dump fails schema validation: {exc.message}"
        ) from exc
    Path(output_path).write_text(json.dumps(dump) + "\n", encoding="utf-8")
    return dump
