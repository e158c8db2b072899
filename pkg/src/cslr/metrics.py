"""Word error rate: minimum-edit-distance alignment and pooled corpus scoring."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union


@dataclass(frozen=True)
class EditSummary:
    substitutions: int
    insertions: int
    deletions: int
    reference_length: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def wer(self) -> float:
        if self.reference_length == 0:
            raise ZeroDivisionError(
                "per-sentence WER is undefined for an empty reference; "
                "pool the counts at corpus level instead"
            )
        return self.errors / self.reference_length


def edit_align(reference: Sequence, hypothesis: Sequence) -> EditSummary:
    """Unit-cost minimum edit distance with a deterministic backtrack.

    On cost ties the backtrack prefers substitution over insertion over
    deletion, so the per-kind counts are reproducible.
    """
    ref = list(reference)
    hyp = list(hypothesis)
    r, h = len(ref), len(hyp)
    dist = [[0] * (h + 1) for _ in range(r + 1)]
    for i in range(1, r + 1):
        dist[i][0] = i
    for j in range(1, h + 1):
        dist[0][j] = j
    for i in range(1, r + 1):
        row = dist[i]
        prev = dist[i - 1]
        for j in range(1, h + 1):
            row[j] = min(prev[j - 1] + (ref[i - 1] != hyp[j - 1]),
                         row[j - 1] + 1,
                         prev[j] + 1)
    subs = ins = dels = 0
    i, j = r, h
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dist[i][j] == dist[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]):
            subs += ref[i - 1] != hyp[j - 1]
            i -= 1
            j -= 1
        elif j > 0 and dist[i][j] == dist[i][j - 1] + 1:
            ins += 1
            j -= 1
        else:
            dels += 1
            i -= 1
    return EditSummary(substitutions=subs, insertions=ins, deletions=dels,
                       reference_length=r)


def corpus_wer(pairs: Sequence) -> float:
    """Pooled (sum of error counts) / (sum of reference lengths)."""
    if not pairs:
        raise ValueError("corpus WER needs at least one sentence pair")
    errors = 0
    length = 0
    for reference, hypothesis in pairs:
        summary = edit_align(reference, hypothesis)
        errors += summary.errors
        length += summary.reference_length
    if length == 0:
        raise ValueError("corpus WER undefined: every reference is empty")
    return errors / length


def corpus_report(pairs: Sequence) -> dict:
    """Per-sentence summaries plus the pooled counts and WER."""
    sentences = []
    totals = {"substitutions": 0, "insertions": 0, "deletions": 0,
              "reference_length": 0}
    for reference, hypothesis in pairs:
        summary = edit_align(reference, hypothesis)
        sentences.append({
            "substitutions": summary.substitutions,
            "insertions": summary.insertions,
            "deletions": summary.deletions,
            "reference_length": summary.reference_length,
            "wer": summary.wer if summary.reference_length else None,
        })
        totals["substitutions"] += summary.substitutions
        totals["insertions"] += summary.insertions
        totals["deletions"] += summary.deletions
        totals["reference_length"] += summary.reference_length
    if totals["reference_length"] == 0:
        raise ValueError("corpus WER undefined: every reference is empty")
    errors = totals["substitutions"] + totals["insertions"] + totals["deletions"]
    return {
        "sentences": sentences,
        "totals": totals,
        "wer": errors / totals["reference_length"],
    }


def read_sentences(path: Union[str, Path]) -> list:
    """One sentence per line, tokens space-separated; blank lines are empty
    sentences."""
    lines = Path(path).read_text().splitlines()
    return [tuple(line.split()) for line in lines]


def write_sentences(sentences: Sequence, path: Union[str, Path]) -> None:
    Path(path).write_text(
        "".join(" ".join(str(tok) for tok in s) + "\n" for s in sentences))


def score_files(reference_path: Union[str, Path],
                hypothesis_path: Union[str, Path]) -> dict:
    references = read_sentences(reference_path)
    hypotheses = read_sentences(hypothesis_path)
    if len(references) != len(hypotheses):
        raise ValueError(
            f"line counts differ: {len(references)} references vs "
            f"{len(hypotheses)} hypotheses"
        )
    return corpus_report(list(zip(references, hypotheses)))


def format_report(report: dict) -> str:
    totals = report["totals"]
    lines = [
        f"sentences:     {len(report['sentences'])}",
        f"substitutions: {totals['substitutions']}",
        f"insertions:    {totals['insertions']}",
        f"deletions:     {totals['deletions']}",
        f"ref length:    {totals['reference_length']}",
        f"corpus WER:    {report['wer']:.4f}",
    ]
    return "\n".join(lines)


def save_report(report: dict, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True))
