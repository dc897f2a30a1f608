"""Explanation generation: prompt rendering, chat clients, bullet parsing.

The generator prompt template ships as a package asset and is rendered
byte-stably by plain placeholder substitution. Transport is a chat-
completion-style JSON POST compatible with common local and hosted model
servers; a deterministic mock provider keeps the whole pipeline offline.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import time
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import requests

from .errors import ApiError, EmptyResponse, TransportError

_PROMPT_PACKAGE = "flowxai.prompts"


def _load_asset(name: str) -> str:
    return resources.files(_PROMPT_PACKAGE).joinpath(name).read_text(encoding="utf-8")


def generator_template() -> str:
    return _load_asset("generator.txt")


def evaluator_template() -> str:
    return _load_asset("evaluator.txt")


@dataclass(frozen=True)
class ExplanationRequest:
    """Everything the generator prompt needs for one record."""

    record_id: int
    cls_name: str
    clause: str  # rendered rule text whose support contains record_id
    top5: tuple[tuple[str, float, float], ...]  # (name, value, attribution)

    def __post_init__(self):
        if len(self.top5) != 5:
            raise ValueError(f"top5 must have exactly 5 entries, got {len(self.top5)}")


@dataclass
class LlmConfig:
    endpoint_url: str = ""
    model_name: str = "mock"
    temperature: float = 0.1
    max_tokens: int = 250
    timeout_s: float = 30.0
    retries: int = 3
    api_key_env: str = "FLOWXAI_API_KEY"
    mock: bool = False

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be > 0")

    @property
    def api_key(self) -> str:
        return os.environ.get(self.api_key_env, "")


@dataclass
class Explanation:
    raw_text: str
    bullets: list[str]
    generator: str
    request: ExplanationRequest

    def to_dict(self) -> dict:
        return {
            "record_id": self.request.record_id,
            "generator": self.generator,
            "raw_text": self.raw_text,
            "bullets": self.bullets,
        }


def format_ig_list(top5) -> str:
    """One line per feature: name, value to 4 decimals, signed attribution."""
    lines = [f"- `{name}`: value = {value:.4f}, Attribution = {attribution:+.4f}"
             for name, value, attribution in top5]
    return "\n".join(lines)


def build_generator_prompt(req: ExplanationRequest) -> str:
    prompt = generator_template()
    prompt = prompt.replace("{cls_name}", req.cls_name)
    prompt = prompt.replace("{clause}", req.clause)
    prompt = prompt.replace("{ig_list}", format_ig_list(req.top5))
    prompt = prompt.replace("{sample_feat_name}", req.top5[0][0])
    return prompt


def build_evaluator_prompt(explanation_text: str) -> str:
    return evaluator_template().replace("{explanation_text}", explanation_text)


# -- providers --------------------------------------------------------------


class HttpChatProvider:
    """Chat-completion JSON POST with exponential backoff.

    Retries transport failures and 5xx responses up to `retries` extra
    attempts; other non-2xx statuses raise ApiError immediately.
    """

    def __init__(self, cfg: LlmConfig, backoff_base_s: float = 0.25,
                 session: requests.Session | None = None):
        self.cfg = cfg
        self.backoff_base_s = backoff_base_s
        self.session = session or requests.Session()

    def complete(self, prompt: str) -> str:
        cfg = self.cfg
        payload = {
            "model": cfg.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if cfg.api_key:
            headers["Authorization"] = f"Bearer {cfg.api_key}"

        attempts = cfg.retries + 1
        last_error = ""
        for attempt in range(attempts):
            try:
                response = self.session.post(cfg.endpoint_url, json=payload,
                                             headers=headers, timeout=cfg.timeout_s)
            except requests.RequestException as exc:
                last_error = repr(exc)
            else:
                if response.status_code >= 500:
                    last_error = f"HTTP {response.status_code}"
                elif response.status_code >= 300:
                    raise ApiError(response.status_code, response.text)
                else:
                    return _extract_text(response.json())
            if attempt + 1 < attempts:
                time.sleep(self.backoff_base_s * 2**attempt)
        raise TransportError(attempts, last_error)


def _extract_text(body: dict) -> str:
    text = None
    if isinstance(body.get("choices"), list) and body["choices"]:
        message = body["choices"][0].get("message", {})
        text = message.get("content")
    elif isinstance(body.get("message"), dict):
        text = body["message"].get("content")
    if not text or not text.strip():
        raise EmptyResponse("no assistant text in response")
    return text


_POSITIVE_BULLETS = (
    "A high `{name}` of {value:.4f} was a key indicator for this classification.",
    "The `{name}` value of {value:.4f} was large, strongly supporting this classification.",
    "An elevated `{name}` of {value:.4f} was a significant driver of this decision.",
)
_NEGATIVE_BULLETS = (
    "The `{name}` value of {value:.4f} was low and not a concern here.",
    "A small `{name}` of {value:.4f} was noted as being less influential.",
    "The `{name}` reading of {value:.4f} was minimal and weighed against other causes.",
)


class MockChatProvider:
    """Deterministic offline stand-in for both generator and judge calls.

    Generator prompts get 3-4 bullets whose directional wording always
    matches the attribution sign parsed back out of the prompt's top-5
    block; evaluator prompts get a stable score in 3..5. Same prompt and
    seed, same reply, byte for byte.
    """

    _IG_LINE = re.compile(
        r"^- `(?P<name>[^`]+)`: value = (?P<value>-?\d+\.\d+),"
        r" Attribution = (?P<attr>[+-]\d+\.\d+)$")

    def __init__(self, seed: int = 0, model_name: str = "mock"):
        self.seed = seed
        self.model_name = model_name

    def _digest(self, prompt: str) -> int:
        tag = f"{self.seed}:{self.model_name}:{prompt}"
        return int(hashlib.sha256(tag.encode("utf-8")).hexdigest()[:12], 16)

    def complete(self, prompt: str) -> str:
        if "Actionability Score" in prompt and "{explanation_text}" not in prompt:
            return f"Actionability Score: {3 + self._digest(prompt) % 3}"

        features = []
        for line in prompt.splitlines():
            match = self._IG_LINE.match(line.strip())
            if match:
                # The sign character, not the rounded value, drives the
                # wording: a true -1e-5 renders as "-0.0000" and must
                # still get negative phrasing.
                features.append((match["name"], float(match["value"]),
                                 match["attr"].startswith("-")))
        if not features:
            return "Actionability Score: 3"

        digest = self._digest(prompt)
        n_bullets = 3 + digest % 2
        bullets = []
        for i, (name, value, negative) in enumerate(features[:n_bullets]):
            pool = _NEGATIVE_BULLETS if negative else _POSITIVE_BULLETS
            template = pool[(digest + i) % len(pool)]
            bullets.append("- " + template.format(name=name, value=value))
        return "\n".join(bullets)


ENDPOINT_ENV_VAR = "FLOWXAI_LLM_ENDPOINT"


def make_provider(cfg: LlmConfig, seed: int = 0):
    """Provider for `cfg`: HTTP when an endpoint is configured (directly or
    via the environment), the deterministic mock otherwise or when forced."""
    if cfg.mock:
        return MockChatProvider(seed=seed, model_name=cfg.model_name)
    endpoint = cfg.endpoint_url or os.environ.get(ENDPOINT_ENV_VAR, "")
    if not endpoint:
        return MockChatProvider(seed=seed, model_name=cfg.model_name)
    if endpoint != cfg.endpoint_url:
        cfg = replace(cfg, endpoint_url=endpoint)
    return HttpChatProvider(cfg)


# -- parsing -----------------------------------------------------------------


def parse_explanation(raw: str, req: ExplanationRequest,
                      generator: str = "unknown") -> Explanation:
    """Collect the "- "-prefixed lines, tolerating leading whitespace."""
    bullets = []
    for line in raw.splitlines():
        stripped = line.strip()
        if stripped.startswith("- "):
            bullets.append(stripped[2:].strip())
    return Explanation(raw_text=raw, bullets=bullets, generator=generator, request=req)


def feature_mentions(text: str, names) -> list[str]:
    """Names from `names` referenced in `text` by their exact spelling,
    ordered by first occurrence. Backticks are optional; partial matches
    (e.g. a name embedded in a longer dotted name) do not count."""
    hits = []
    for name in names:
        pattern = r"(?<![\w.])" + re.escape(name) + r"(?![\w.])"
        match = re.search(pattern, text)
        if match:
            hits.append((match.start(), name))
    return [name for _, name in sorted(hits)]


# -- audit trail --------------------------------------------------------------


@dataclass
class AuditLog:
    """Deterministic request/response log; no keys, no wall-clock times."""

    path: Path
    entries: list[dict] = field(default_factory=list)

    def record(self, record_id: int, generator: str, prompt: str, response: str,
               kind: str = "generate") -> None:
        self.entries.append({
            "seq": len(self.entries),
            "kind": kind,
            "record_id": record_id,
            "generator": generator,
            "prompt": prompt,
            "response": response,
        })

    def flush(self) -> None:
        with open(self.path, "w") as fh:
            for entry in self.entries:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
