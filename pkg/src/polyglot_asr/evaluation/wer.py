"""Word error rate with a deterministic S/D/I decomposition, pooled per accent."""
from __future__ import annotations

import string
from dataclasses import dataclass

from ..errors import EmptyReference

_EDGE_PUNCT = string.punctuation + "“”‘’«»¿¡…"


def tokenize(text: str) -> list:
    """Lowercase, split on whitespace, strip edge punctuation, drop empty tokens."""
    tokens = (tok.strip(_EDGE_PUNCT) for tok in text.lower().split())
    return [tok for tok in tokens if tok]


@dataclass(frozen=True)
class WerResult:
    substitutions: int
    deletions: int
    insertions: int
    reference_words: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def wer(self) -> float:
        if self.reference_words == 0:
            return 0.0
        return self.errors / self.reference_words

    def __add__(self, other: "WerResult") -> "WerResult":
        return WerResult(
            self.substitutions + other.substitutions,
            self.deletions + other.deletions,
            self.insertions + other.insertions,
            self.reference_words + other.reference_words,
        )


def align(ref: list, hyp: list) -> list:
    """Minimum edit alignment as a list of ops: '=' match, 'S', 'D', 'I'.

    Traceback from the end prefers substitution/match, then deletion, then
    insertion whenever several predecessors are optimal.
    """
    m, n = len(ref), len(hyp)
    d = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        d[i][0] = i
    for j in range(1, n + 1):
        d[0][j] = j
    for i in range(1, m + 1):
        ri = ref[i - 1]
        row, prev = d[i], d[i - 1]
        for j in range(1, n + 1):
            diag = prev[j - 1] + (ri != hyp[j - 1])
            row[j] = min(diag, prev[j] + 1, row[j - 1] + 1)
    ops = []
    i, j = m, n
    while i or j:
        if i and j and d[i][j] == d[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]):
            ops.append("=" if ref[i - 1] == hyp[j - 1] else "S")
            i, j = i - 1, j - 1
        elif i and d[i][j] == d[i - 1][j] + 1:
            ops.append("D")
            i -= 1
        else:
            ops.append("I")
            j -= 1
    ops.reverse()
    return ops


def wer_tokens(ref: list, hyp: list) -> WerResult:
    if not ref and hyp:
        raise EmptyReference("reference has no words but the hypothesis does")
    ops = align(ref, hyp)
    return WerResult(ops.count("S"), ops.count("D"), ops.count("I"), len(ref))


def wer(reference: str, hypothesis: str) -> WerResult:
    return wer_tokens(tokenize(reference), tokenize(hypothesis))


@dataclass(frozen=True)
class WerTable:
    """Accent rows x system columns of pooled WER results."""

    accents: tuple
    systems: tuple
    cells: dict  # (accent, system) -> WerResult

    def cell(self, accent: str, system: str) -> str:
        result = self.cells.get((accent, system))
        return "" if result is None else f"{100.0 * result.wer:.2f}"

    def merge(self, other: "WerTable") -> "WerTable":
        accents = self.accents + tuple(a for a in other.accents if a not in self.accents)
        systems = self.systems + tuple(s for s in other.systems if s not in self.systems)
        return WerTable(accents, systems, {**self.cells, **other.cells})

    def to_rows(self):
        header = ["accent", *self.systems]
        return header, [[a, *(self.cell(a, s) for s in self.systems)] for a in self.accents]

    def to_document(self) -> dict:
        def entry(r):
            if r is None:
                return None
            return {
                "wer": r.wer,
                "substitutions": r.substitutions,
                "deletions": r.deletions,
                "insertions": r.insertions,
                "reference_words": r.reference_words,
            }

        return {
            "systems": list(self.systems),
            "rows": [
                {"accent": a, **{s: entry(self.cells.get((a, s))) for s in self.systems}}
                for a in self.accents
            ],
        }

    def format(self) -> str:
        header, rows = self.to_rows()
        widths = [max(len(str(c)) for c in col) for col in zip(header, *rows)]
        lines = ["  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip() for r in [header, *rows]]
        return "\n".join(lines)


def aggregate_wer(pairs, system: str = "polyglot-asr") -> WerTable:
    """Pool (accent, reference, hypothesis) triples: summed errors / summed reference words."""
    pooled = {}
    for accent, ref, hyp in pairs:
        r = wer(ref, hyp)
        pooled[accent] = pooled[accent] + r if accent in pooled else r
    return WerTable(tuple(pooled), (system,), {(a, system): r for a, r in pooled.items()})
