"""Exact-match scoring, token accounting, bootstrap intervals and frontier tables."""

from __future__ import annotations

import json
import re
import string
from dataclasses import asdict, dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .answer import Answer
from .packer import EvidencePack
from .qa_gen import QAItem

BOOTSTRAP_B = 2000
_EDGE = string.punctuation + " "
_INT = re.compile(r"[0-9]+")


class DatasetMismatch(ValueError):
    def __init__(self, why: str = ""):
        super().__init__("dataset mismatch" + (f": {why}" if why else ""))


def normalize_answer(text: str) -> str:
    s = text.lower()
    while True:
        prev = s
        s = " ".join(s.split()).strip(_EDGE)
        if s == prev:
            break
    if _INT.fullmatch(s):
        s = str(int(s))
    return s


def exact_match(pred: str, gold: str) -> int:
    return int(normalize_answer(pred) == normalize_answer(gold))


@dataclass(frozen=True)
class RunReport:
    method: str
    protocol: str
    em: float
    avg_tokens: float
    per_family: Dict[str, Tuple[float, int]]
    n_questions: int
    ci_low: float
    ci_high: float
    config_hash: str = ""
    ci_center: float = 0.0
    label: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_family"] = {f: [em, n] for f, (em, n) in sorted(self.per_family.items())}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        d = dict(d)
        d["per_family"] = {f: (float(v[0]), int(v[1])) for f, v in d["per_family"].items()}
        return cls(**d)


def score_run(answers: Sequence[Tuple[QAItem, Answer, EvidencePack]], method: str = "", protocol: str = "",
              config_hash: str = "", episodes: Optional[Iterable[str]] = None, seed: int = 0,
              label: str = "") -> RunReport:
    """Aggregate per-question outcomes; ``episodes`` pins the expected dataset."""
    if not answers:
        raise ValueError("answers must be nonempty")
    qids = [q.qid for q, _, _ in answers]
    if len(set(qids)) != len(qids):
        raise DatasetMismatch("duplicate question ids")
    if episodes is not None:
        allowed = set(episodes)
        stray = sorted({q.episode_id for q, _, _ in answers} - allowed)
        if stray:
            raise DatasetMismatch(f"unknown episodes {stray[:3]}")
    # sort so the report does not depend on question order
    rows = sorted(answers, key=lambda r: r[0].qid)
    correct = [exact_match(a.text, q.gold_answer) for q, a, _ in rows]
    fam: Dict[str, List[int]] = {}
    for (q, _, _), c in zip(rows, correct):
        fam.setdefault(q.family, []).append(c)
    n = len(rows)
    center, lo, hi = bootstrap_ci(correct, seed=seed)
    return RunReport(
        method=method,
        protocol=protocol,
        em=sum(correct) / n,
        avg_tokens=sum(p.token_cost for _, _, p in rows) / n,
        per_family={f: (sum(v) / len(v), len(v)) for f, v in sorted(fam.items())},
        n_questions=n,
        ci_low=lo,
        ci_high=hi,
        config_hash=config_hash,
        ci_center=center,
        label=label,
    )


def _resample_indices(n: int, B: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(0, n, size=(B, n))


def bootstrap_ci(correctness: Sequence[int], B: int = BOOTSTRAP_B, seed: int = 0) -> Tuple[float, float, float]:
    """Percentile bootstrap: (mean of resample means, 2.5th, 97.5th percentile)."""
    x = np.asarray(correctness, dtype=float)
    if x.size == 0:
        raise ValueError("need at least one observation")
    means = x[_resample_indices(x.size, B, seed)].mean(axis=1)
    lo, hi = np.percentile(means, [2.5, 97.5])
    return float(means.mean()), float(lo), float(hi)


def paired_bootstrap(a: Sequence[int], b: Sequence[int], B: int = BOOTSTRAP_B,
                     seed: int = 0) -> Tuple[float, float, float]:
    """Bootstrap of mean(a) - mean(b) with jointly resampled question indices."""
    if len(a) != len(b):
        raise ValueError("paired lists must have equal length")
    xa, xb = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if xa.size == 0:
        raise ValueError("need at least one observation")
    idx = _resample_indices(xa.size, B, seed)
    diffs = xa[idx].mean(axis=1) - xb[idx].mean(axis=1)
    lo, hi = np.percentile(diffs, [2.5, 97.5])
    return float(diffs.mean()), float(lo), float(hi)


def pareto_flags(reports: Sequence[RunReport]) -> List[bool]:
    """True where no other report has strictly higher EM and strictly fewer tokens."""
    return [
        not any(o.em > r.em and o.avg_tokens < r.avg_tokens for o in reports)
        for r in reports
    ]


def frontier_rows(reports: Sequence[RunReport]) -> List[dict]:
    flags = pareto_flags(reports)
    rows = [
        {"method": r.label or r.method, "protocol": r.protocol, "em": r.em, "avg_tokens": r.avg_tokens,
         "ci_low": r.ci_low, "ci_high": r.ci_high, "pareto": f}
        for r, f in zip(reports, flags)
    ]
    rows.sort(key=lambda d: (-d["em"], d["avg_tokens"], d["method"]))
    return rows


def frontier_report(reports: Sequence[RunReport], as_json: bool = False) -> str:
    rows = frontier_rows(reports)
    if as_json:
        return json.dumps(rows, sort_keys=True, indent=1)
    width = max([len("Method")] + [len(r["method"]) for r in rows])
    lines = [f"{'Method':<{width}}  {'EM':>6}  {'95% CI':>15}  {'Avg. Tokens':>11}  Pareto"]
    for r in rows:
        ci = f"[{r['ci_low']:.3f},{r['ci_high']:.3f}]"
        lines.append(f"{r['method']:<{width}}  {r['em']:>6.4f}  {ci:>15}  {r['avg_tokens']:>11.1f}  "
                     f"{'*' if r['pareto'] else ''}")
    return "\n".join(lines)


def family_table(reports: Sequence[RunReport]) -> str:
    """Per-family EM with question counts in parentheses, one column per report."""
    fams = sorted({f for r in reports for f in r.per_family})
    names = [r.label or r.method for r in reports]
    width = max([len("family")] + [len(f) for f in fams])
    col = max([12] + [len(n) for n in names])
    out = [f"{'family':<{width}}  " + "  ".join(f"{n:>{col}}" for n in names)]
    for f in fams:
        cells = []
        for r in reports:
            em, n = r.per_family.get(f, (0.0, 0))
            cells.append(f"{em:.3f} ({n})".rjust(col))
        out.append(f"{f:<{width}}  " + "  ".join(cells))
    return "\n".join(out)
