"""Pause-marker injection techniques and prompt rendering.

Six fixed techniques: an unmodified baseline plus five treatments that vary
along three axes -- how markers are injected into the context (none,
standard, instruction-augmented), which template renders the prompt (plain
or pause-aware, the latter explaining the markers up front), and whether the
target endpoint must be a fine-tuned model.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from importlib import resources

from .corpus import split_paragraphs

PAUSE_MARKER = "<PAUSE>"
AUGMENTED_SUFFIX = " (stop and absorb the information you have just read)"


class Injection(str, Enum):
    NONE = "none"
    STANDARD = "standard"
    AUGMENTED = "augmented"


class Template(str, Enum):
    PLAIN = "plain"
    PAUSE_AWARE = "pause_aware"


@dataclass(frozen=True)
class Technique:
    id: str
    injection: Injection
    template: Template
    requires_finetuned_model: bool


_CATALOG = (
    Technique("baseline", Injection.NONE, Template.PLAIN, False),
    Technique("t1_standard", Injection.STANDARD, Template.PLAIN, False),
    Technique("t2_instruction_augmented", Injection.AUGMENTED, Template.PLAIN, False),
    Technique("t3_preprompt", Injection.STANDARD, Template.PAUSE_AWARE, False),
    Technique("t4_finetuned_plain", Injection.NONE, Template.PLAIN, True),
    Technique("t5_pause_tuned", Injection.STANDARD, Template.PAUSE_AWARE, True),
)


def technique_catalog() -> list[Technique]:
    """The six fixed techniques (baseline plus treatments 1-5)."""
    return list(_CATALOG)


def technique_by_id(tech_id: str) -> Technique:
    for t in _CATALOG:
        if t.id == tech_id:
            return t
    raise KeyError(f"unknown technique id {tech_id!r}; known: "
                   f"{[t.id for t in _CATALOG]}")


@dataclass(frozen=True)
class RenderedPrompt:
    messages: tuple[tuple[str, str], ...]  # (role, content)
    pause_positions: tuple[int, ...]  # byte offsets into the user message

    @property
    def user_content(self) -> str:
        return self.messages[-1][1]


def load_template(which: Template) -> str:
    ref = resources.files("pausebench") / "templates" / f"{which.value}.txt"
    return ref.read_text(encoding="utf-8")


def inject_pauses(context: str, mode: Injection) -> tuple[str, list[int]]:
    """Append a pause marker line after each paragraph of *context*.

    Returns the injected text and the ascending byte offsets of each
    marker's first byte. All bytes outside the inserted marker lines are
    untouched, so stripping the inserted lines restores the input exactly.
    """
    if mode == Injection.NONE:
        return context, []
    if mode == Injection.STANDARD:
        marker_line = f"\n{PAUSE_MARKER}\n"
    elif mode == Injection.AUGMENTED:
        marker_line = f"\n{PAUSE_MARKER}{AUGMENTED_SUFFIX}\n"
    else:
        raise ValueError(f"unknown injection mode {mode!r}")

    paragraphs = split_paragraphs(context)
    if not paragraphs:
        return context, []

    data = context.encode("utf-8")
    marker_bytes = marker_line.encode("utf-8")
    # locate each paragraph's end byte offset in the original text
    ends: list[int] = []
    cursor = 0
    for p in paragraphs:
        pb = p.encode("utf-8")
        idx = data.index(pb, cursor)
        ends.append(idx + len(pb))
        cursor = idx + len(pb)

    out = bytearray()
    offsets: list[int] = []
    pos = 0
    for end in ends:
        out += data[pos:end]
        offsets.append(len(out) + 1)  # +1 skips the leading newline
        out += marker_bytes
        pos = end
    out += data[pos:]
    return bytes(out).decode("utf-8"), offsets


def strip_pauses(injected: str, mode: Injection) -> str:
    """Inverse of inject_pauses for the given mode (removes the exact lines)."""
    if mode == Injection.NONE:
        return injected
    if mode == Injection.STANDARD:
        marker_line = f"\n{PAUSE_MARKER}\n"
    else:
        marker_line = f"\n{PAUSE_MARKER}{AUGMENTED_SUFFIX}\n"
    return injected.replace(marker_line, "")


def render_prompt(technique: Technique, context: str,
                  question: str) -> RenderedPrompt:
    """Fill the technique's template with an already-injected context.

    The whole prompt is a single user message; the templates carry their own
    instruction header so no system message is added.
    """
    template = load_template(technique.template)
    if template.count("{context}") != 1 or template.count("{input}") != 1:
        raise AssertionError(
            f"template {technique.template.value} must contain "
            "{context} and {input} exactly once"
        )
    ctx_char = template.index("{context}")
    prefix = template[:ctx_char]
    filled = template.replace("{context}", context).replace("{input}", question)

    base = len(prefix.encode("utf-8"))
    positions = []
    ctx_bytes = context.encode("utf-8")
    start = 0
    marker = PAUSE_MARKER.encode("utf-8")
    while True:
        i = ctx_bytes.find(marker, start)
        if i == -1:
            break
        positions.append(base + i)
        start = i + len(marker)
    return RenderedPrompt(messages=(("user", filled),),
                          pause_positions=tuple(positions))
