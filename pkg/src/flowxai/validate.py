"""Quality scoring for generated explanations.

Four checks per explanation:
  structural validity   3-4 bullets, nothing but bullets, every bullet
                        names a top-5 feature exactly;
  semantic similarity   cosine between embeddings of the rule text and
                        the explanation text;
  faithfulness          each bullet's first directional term must agree
                        with the sign of the referenced feature's
                        attribution (zero attributions auto-pass);
  actionability         1-5 score parsed from a judge model's reply.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import requests

from .errors import EmbeddingFailure, UnparseableScore
from .explain import (Explanation, ExplanationRequest, build_evaluator_prompt,
                      feature_mentions)


@dataclass(frozen=True)
class DirectionLexicon:
    """Directional vocabulary; matching is case-insensitive on whole
    words/phrases (dots and underscores count as word characters)."""

    positive_terms: frozenset[str]
    negative_terms: frozenset[str]

    def __post_init__(self):
        overlap = self.positive_terms & self.negative_terms
        if overlap:
            raise ValueError(f"lexicon terms in both sets: {sorted(overlap)}")

    @classmethod
    def default(cls) -> "DirectionLexicon":
        raw = json.loads(resources.files("flowxai.prompts")
                         .joinpath("direction_lexicon.json").read_text())
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "DirectionLexicon":
        return cls(positive_terms=frozenset(t.lower() for t in raw["positive_terms"]),
                   negative_terms=frozenset(t.lower() for t in raw["negative_terms"]))

    @classmethod
    def from_json(cls, path: str | Path) -> "DirectionLexicon":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def first_term(self, text: str) -> tuple[str, int] | None:
        """(term, +1/-1) of the earliest whole-word directional term."""
        lowered = text.lower()
        best: tuple[int, int, str, int] | None = None  # (pos, -len, term, sign)
        for term, sign in [(t, +1) for t in self.positive_terms] + \
                          [(t, -1) for t in self.negative_terms]:
            pattern = r"(?<![\w.])" + re.escape(term) + r"(?![\w.])"
            match = re.search(pattern, lowered)
            if match is None:
                continue
            key = (match.start(), -len(term), term, sign)
            if best is None or key < best:
                best = key
        if best is None:
            return None
        return best[2], best[3]


@dataclass
class StructureResult:
    valid: bool
    reasons: list[str] = field(default_factory=list)


def check_structure(expl: Explanation) -> StructureResult:
    reasons = []
    n = len(expl.bullets)
    if n not in (3, 4):
        reasons.append(f"bullet count {n}")
    for line in expl.raw_text.splitlines():
        stripped = line.strip()
        if stripped and not stripped.startswith("- "):
            reasons.append(f"non-bullet content line: {stripped[:60]!r}")
    top5_names = [name for name, _, _ in expl.request.top5]
    for i, bullet in enumerate(expl.bullets):
        if not feature_mentions(bullet, top5_names):
            reasons.append(f"bullet {i + 1} references no top-5 feature: {bullet[:60]!r}")
    return StructureResult(valid=not reasons, reasons=reasons)


@dataclass
class FaithfulnessResult:
    score: float
    n_checked: int
    flags: list[str] = field(default_factory=list)


def attribution_faithfulness(expl: Explanation, req: ExplanationRequest,
                             lexicon: DirectionLexicon | None = None
                             ) -> FaithfulnessResult:
    """Fraction of direction-bearing bullets whose wording matches the
    attribution sign of the first top-5 feature they mention."""
    lexicon = lexicon or DirectionLexicon.default()
    attribution_of = {name: attr for name, _, attr in req.top5}
    top5_names = [name for name, _, _ in req.top5]

    passes = 0
    checked = 0
    flags: list[str] = []
    for i, bullet in enumerate(expl.bullets):
        mentioned = feature_mentions(bullet, top5_names)
        if not mentioned:
            flags.append(f"bullet {i + 1}: no top-5 feature, excluded")
            continue
        term = lexicon.first_term(bullet)
        if term is None:
            flags.append(f"bullet {i + 1}: no directional term, excluded")
            continue
        _, sign = term
        attr = attribution_of[mentioned[0]]
        checked += 1
        if attr == 0.0 or (sign > 0 and attr > 0) or (sign < 0 and attr < 0):
            passes += 1
    if checked == 0:
        return FaithfulnessResult(1.0, 0, flags + ["no-directional-language"])
    return FaithfulnessResult(passes / checked, checked, flags)


# -- semantic similarity -------------------------------------------------------


class TermFrequencyEmbedder:
    """Deterministic offline fallback: L2-normalized term-frequency vector
    over lowercased alphanumeric-and-dot tokens."""

    _TOKEN = re.compile(r"[a-z0-9.]+")

    def embed(self, texts: list[str]) -> list[dict[str, float]]:
        out = []
        for text in texts:
            counts: dict[str, float] = {}
            for token in self._TOKEN.findall(text.lower()):
                counts[token] = counts.get(token, 0.0) + 1.0
            norm = np.sqrt(sum(v * v for v in counts.values()))
            if norm > 0:
                counts = {k: v / norm for k, v in counts.items()}
            out.append(counts)
        return out

    def similarity(self, a: str, b: str) -> float:
        va, vb = self.embed([a, b])
        return float(sum(va[k] * vb.get(k, 0.0) for k in va))


class RemoteEmbedder:
    """Embedding endpoint client; same transport conventions as chat."""

    def __init__(self, endpoint_url: str, model_name: str,
                 timeout_s: float = 30.0, api_key: str = ""):
        self.endpoint_url = endpoint_url
        self.model_name = model_name
        self.timeout_s = timeout_s
        self.api_key = api_key

    def similarity(self, a: str, b: str) -> float:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            response = requests.post(
                self.endpoint_url,
                json={"model": self.model_name, "input": [a, b]},
                headers=headers, timeout=self.timeout_s)
        except requests.RequestException as exc:
            raise EmbeddingFailure(repr(exc)) from exc
        if response.status_code >= 300:
            raise EmbeddingFailure(f"HTTP {response.status_code}: {response.text[:200]}")
        try:
            data = response.json()["data"]
            va = np.asarray(data[0]["embedding"], dtype=np.float64)
            vb = np.asarray(data[1]["embedding"], dtype=np.float64)
        except (KeyError, IndexError, TypeError) as exc:
            raise EmbeddingFailure(f"malformed embedding response: {exc}") from exc
        denom = np.linalg.norm(va) * np.linalg.norm(vb)
        if denom == 0:
            return 0.0
        return float(va @ vb / denom)


def semantic_similarity(rule_text: str, explanation_text: str, embedder=None) -> float:
    if not rule_text or not explanation_text:
        raise ValueError("texts must be nonempty")
    embedder = embedder or TermFrequencyEmbedder()
    return embedder.similarity(rule_text, explanation_text)


# -- actionability -------------------------------------------------------------

_SCORE_PATTERN = re.compile(r"Actionability Score:\s*\[?\s*([0-9]+)\s*\]?")


def parse_actionability(reply: str) -> int:
    """First "Actionability Score: k" with k in 1..5 wins; brackets and
    surrounding chatter are tolerated."""
    match = _SCORE_PATTERN.search(reply)
    if not match:
        raise UnparseableScore(f"no actionability score in reply: {reply[:120]!r}")
    score = int(match.group(1))
    if not 1 <= score <= 5:
        raise UnparseableScore(f"score {score} outside 1..5")
    return score


def actionability(expl: Explanation, judge) -> int:
    """Render the evaluator prompt, call the judge provider, parse 1-5."""
    reply = judge.complete(build_evaluator_prompt(expl.raw_text))
    return parse_actionability(reply)


# -- batch evaluation -----------------------------------------------------------


@dataclass
class ValidationRecord:
    record_id: int
    generator: str
    structural_valid: bool
    semantic_similarity: float
    attribution_faithfulness: float
    faithfulness_n_checked: int
    actionability: int | None
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "generator": self.generator,
            "structural_valid": self.structural_valid,
            "semantic_similarity": self.semantic_similarity,
            "attribution_faithfulness": self.attribution_faithfulness,
            "faithfulness_n_checked": self.faithfulness_n_checked,
            "actionability": self.actionability,
            "flags": self.flags,
        }


@dataclass
class GeneratorSummary:
    generator: str
    n_instances: int
    struct_valid_pct: float
    semantic_similarity: float
    attribution_faithfulness: float
    actionability: float | None
    n_unparseable_scores: int

    def to_dict(self) -> dict:
        return {
            "generator": self.generator,
            "n_instances": self.n_instances,
            "struct_valid_pct": self.struct_valid_pct,
            "semantic_similarity": self.semantic_similarity,
            "attribution_faithfulness": self.attribution_faithfulness,
            "actionability": self.actionability,
            "n_unparseable_scores": self.n_unparseable_scores,
        }


def evaluate_explanation(expl: Explanation, judge, embedder=None,
                         lexicon: DirectionLexicon | None = None
                         ) -> ValidationRecord:
    req = expl.request
    structure = check_structure(expl)
    similarity = semantic_similarity(req.clause, expl.raw_text, embedder) \
        if expl.raw_text.strip() else 0.0
    faith = attribution_faithfulness(expl, req, lexicon)
    flags = list(structure.reasons) + list(faith.flags)
    try:
        score = actionability(expl, judge)
    except UnparseableScore as exc:
        score = None
        flags.append(f"unparseable actionability: {exc}")
    return ValidationRecord(
        record_id=req.record_id,
        generator=expl.generator,
        structural_valid=structure.valid,
        semantic_similarity=similarity,
        attribution_faithfulness=faith.score,
        faithfulness_n_checked=faith.n_checked,
        actionability=score,
        flags=flags,
    )


def summarize(records: list[ValidationRecord]) -> list[GeneratorSummary]:
    """Per-generator means, ordered by generator name."""
    by_generator: dict[str, list[ValidationRecord]] = {}
    for rec in records:
        by_generator.setdefault(rec.generator, []).append(rec)

    summaries = []
    for generator in sorted(by_generator):
        group = by_generator[generator]
        scores = [r.actionability for r in group if r.actionability is not None]
        summaries.append(GeneratorSummary(
            generator=generator,
            n_instances=len(group),
            struct_valid_pct=100.0 * np.mean([r.structural_valid for r in group]),
            semantic_similarity=float(np.mean([r.semantic_similarity for r in group])),
            attribution_faithfulness=float(
                np.mean([r.attribution_faithfulness for r in group])),
            actionability=float(np.mean(scores)) if scores else None,
            n_unparseable_scores=len(group) - len(scores),
        ))
    return summaries


def records_to_jsonl(records: list[ValidationRecord], path: str | Path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")


def summaries_to_csv(summaries: list[GeneratorSummary], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["generator", "struct_valid_pct", "semantic_similarity",
                         "attribution_faithfulness", "actionability"])
        for s in summaries:
            writer.writerow([
                s.generator, f"{s.struct_valid_pct:.1f}",
                f"{s.semantic_similarity:.3f}", f"{s.attribution_faithfulness:.2f}",
                "" if s.actionability is None else f"{s.actionability:.1f}",
            ])


def summaries_to_json(summaries: list[GeneratorSummary], path: str | Path) -> None:
    Path(path).write_text(json.dumps([s.to_dict() for s in summaries],
                                     sort_keys=True, indent=2))
