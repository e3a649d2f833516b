"""attnx command line: one extraction per invocation."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .extract import DEFAULT_PROMPT_CAP, ExtractionError, PromptMeta, extract_attention


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="attnx",
        description="Capture per-layer attention from the first generated "
                    "token of a local causal LM.",
    )
    parser.add_argument("--model", required=True,
                        help="model id or local model directory")
    parser.add_argument("--prompt-file", required=True)
    parser.add_argument("--meta", required=True,
                        help="JSON with technique, pause_byte_offsets, "
                             "needle byte span")
    parser.add_argument("--out", required=True)
    parser.add_argument("--max-prompt-tokens", type=int,
                        default=DEFAULT_PROMPT_CAP)
    parser.add_argument("--device", default="cpu")
    args = parser.parse_args(argv)

    prompt = Path(args.prompt_file).read_text(encoding="utf-8")
    meta = PromptMeta.from_file(args.meta)
    try:
        dump = extract_attention(
            args.model, prompt, meta, args.out,
            max_prompt_tokens=args.max_prompt_tokens, device=args.device,
        )
    except ExtractionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}: {len(dump['layers'])} layers x "
          f"{dump['prompt_token_count']} positions")
    return 0


if __name__ == "__main__":
    sys.exit(main())
