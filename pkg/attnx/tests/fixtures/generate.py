#!/usr/bin/env python3
"""Regenerate the fixture prompt and placement metadata.

The test model tokenizes one byte per token, so the prompt is padded to
exactly 200 bytes to give a 200-token prompt. Offsets are computed here so
the committed meta.json always matches the committed prompt bytes.
"""
import json
from pathlib import Path

HERE = Path(__file__).parent

NEEDLE = "The lighthouse keeper's cat is named Barnacle."

PARTS = [
    "The quiet harbor holds three boats at dawn.",
    "<PAUSE>",
    NEEDLE + " Gulls circle the pier.",
    "<PAUSE>",
    "Visitors count the slow waves before breakfast",
]


def main():
    prompt = "\n".join(PARTS)
    pad = 200 - len(prompt.encode("utf-8")) - 1
    assert pad >= 0, "base prompt exceeds 200 bytes"
    prompt = prompt + " " + "." * (pad - 1) + "\n"
    data = prompt.encode("utf-8")
    assert len(data) == 200, len(data)

    pauses = []
    start = 0
    while True:
        i = data.find(b"<PAUSE>", start)
        if i == -1:
            break
        pauses.append(i)
        start = i + 1
    needle_off = data.index(NEEDLE.encode("utf-8"))

    (HERE / "prompt.txt").write_bytes(data)
    meta = {
        "technique": "t1_standard",
        "pause_byte_offsets": pauses,
        "needle_byte_spans": [[needle_off, len(NEEDLE.encode("utf-8"))]],
    }
    (HERE / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    print(f"prompt: {len(data)} bytes, {len(pauses)} pauses, "
          f"needle at {needle_off}")


if __name__ == "__main__":
    main()
