#!/usr/bin/env python3
"""Regenerate tests/fixtures/test_vocab.ranks.

Trains a tiny byte-level BPE vocabulary (256 bytes + 44 merges = 300 entries)
on the fixture essays and writes it in rank-file format:
one `<base64(token bytes)> <decimal rank>` line per token.
"""
import base64
import sys
from collections import Counter
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
ESSAYS = ROOT / "tests" / "fixtures" / "essays"
OUT = ROOT / "tests" / "fixtures" / "test_vocab.ranks"
N_MERGES = 44


def train(data: bytes, n_merges: int) -> list[bytes]:
    seq = [bytes([b]) for b in data]
    merged: list[bytes] = []
    for _ in range(n_merges):
        counts = Counter(zip(seq, seq[1:]))
        if not counts:
            break
        (left, right), _ = max(counts.items(), key=lambda kv: (kv[1], kv[0]))
        new = left + right
        merged.append(new)
        out = []
        i = 0
        while i < len(seq):
            if i + 1 < len(seq) and seq[i] == left and seq[i + 1] == right:
                out.append(new)
                i += 2
            else:
                out.append(seq[i])
                i += 1
        seq = out
    return merged


def main() -> int:
    data = b"\n\n".join(
        p.read_bytes() for p in sorted(ESSAYS.glob("*.txt"))
    )
    tokens = [bytes([b]) for b in range(256)] + train(data, N_MERGES)
    lines = [
        f"{base64.b64encode(tok).decode('ascii')} {rank}"
        for rank, tok in enumerate(tokens)
    ]
    OUT.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(tokens)} entries to {OUT}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
