"""Needle-in-a-haystack evaluation toolkit with pause-marker injection."""

from .client import CompletionResult, ModelProfile, RetryPolicy, complete
from .corpus import Corpus, Paragraph, load_corpus, split_paragraphs, split_sentences
from .haystack import (
    Haystack,
    NeedleSpec,
    PlacedContext,
    build_haystack,
    depth_grid,
    place_needle,
    place_needles,
)
from .prompts import (
    Injection,
    RenderedPrompt,
    Technique,
    Template,
    inject_pauses,
    render_prompt,
    technique_by_id,
    technique_catalog,
)
from .runner import (
    RunContext,
    RunSpec,
    execute,
    judge_score,
    parse_score,
    plan_runs,
)
from .stats import (
    PercentChangeRow,
    Summary,
    heatmap_data,
    percent_change,
    render_heatmap,
    summarize,
)
from .tokenizer import Tokenizer, load_vocab

__version__ = "0.1.0"

__all__ = [
    "CompletionResult", "ModelProfile", "RetryPolicy", "complete",
    "Corpus", "Paragraph", "load_corpus", "split_paragraphs", "split_sentences",
    "Haystack", "NeedleSpec", "PlacedContext", "build_haystack", "depth_grid",
    "place_needle", "place_needles",
    "Injection", "RenderedPrompt", "Technique", "Template", "inject_pauses",
    "render_prompt", "technique_by_id", "technique_catalog",
    "RunContext", "RunSpec", "execute", "judge_score", "parse_score",
    "plan_runs",
    "PercentChangeRow", "Summary", "heatmap_data", "percent_change",
    "render_heatmap", "summarize",
    "Tokenizer", "load_vocab",
    "__version__",
]
