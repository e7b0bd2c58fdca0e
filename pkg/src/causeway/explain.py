"""Turn a ranked cause set into a prompt and a natural-language explanation.

Each cause gets an up/down arrow relative to its mean over the window before
the anomaly, the causes are rendered into the exact ``CAUSES: [...]`` prompt
wire format, and the explanation text comes either from the deterministic
template or from a remote text-generation endpoint with template fallback.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .anomaly import AnomalyEvent
from .config import RemoteConfig, action_for
from .errors import EmptyCauseList, MalformedResponse, RemoteUnavailable, WindowTooShort
from .frames import TimeSeriesFrame, _num
from .graph import _f_json

logger = logging.getLogger(__name__)

ARROW_UP = "↑"
ARROW_DOWN = "↓"
PROMPT_HEADER = "CAUSES: ["
PROMPT_FOOTER = "].\nGENERATE_EXPLANATION:"


@dataclass
class DirectedCause:
    channel: str
    direction: str          # "up" | "down"
    f_stat: float

    @property
    def arrow(self) -> str:
        return ARROW_UP if self.direction == "up" else ARROW_DOWN


@dataclass
class ExplanationPrompt:
    text: str


@dataclass
class Explanation:
    text: str
    source: str             # "template" | "remote"
    causes: list[DirectedCause]


def annotate_direction(channel: str, frame: TimeSeriesFrame, anomaly: AnomalyEvent,
                       window_length: int, f_stat: float = 0.0) -> DirectedCause:
    """Label the channel up or down at the anomaly versus its prior-window mean.

    The baseline is the mean over [t_a - w, t_a - 1]; a value exactly at the
    mean counts as down (not increased).
    """
    idx = anomaly.index
    if idx - window_length < 0:
        raise WindowTooShort(
            f"anomaly at index {idx} needs {window_length} preceding intervals")
    series = frame.channel(channel)
    baseline = float(np.mean(series[idx - window_length: idx]))
    direction = "up" if float(series[idx]) > baseline else "down"
    return DirectedCause(channel, direction, f_stat)


def build_prompt(causes: list[DirectedCause]) -> ExplanationPrompt:
    """Byte-exact prompt: ``CAUSES: [c1<arrow>, c2<arrow>].\\nGENERATE_EXPLANATION:``."""
    if not causes:
        raise EmptyCauseList("cannot build a prompt from zero causes")
    body = ", ".join(f"{c.channel}{c.arrow}" for c in causes)
    return ExplanationPrompt(f"{PROMPT_HEADER}{body}{PROMPT_FOOTER}")


def parse_prompt(text: str) -> list[tuple[str, str]]:
    """Recover the (channel, direction) list from a prompt string."""
    if not (text.startswith(PROMPT_HEADER) and text.endswith(PROMPT_FOOTER)):
        raise EmptyCauseList("text does not match the prompt grammar")
    body = text[len(PROMPT_HEADER):-len(PROMPT_FOOTER)]
    out = []
    for item in body.split(", "):
        if not item or item[-1] not in (ARROW_UP, ARROW_DOWN):
            raise EmptyCauseList(f"cause item {item!r} lacks a direction arrow")
        out.append((item[:-1], "up" if item[-1] == ARROW_UP else "down"))
    return out


def _format_time(t: float) -> str:
    return datetime.fromtimestamp(t, tz=timezone.utc).strftime("%Y-%m-%d %H:%M UTC")


_DIRECTION_PHRASE = {"up": "a rise in", "down": "a drop in"}


def render_template(causes: list[DirectedCause], target: str, anomaly: AnomalyEvent,
                    actions: dict[str, str] | None = None,
                    aliases: dict[str, str] | None = None) -> Explanation:
    """Deterministic two-sentence explanation.

    Sentence one attributes the anomaly to the causes in ranked order with
    direction words; sentence two suggests the corrective action mapped from
    the top cause's channel.
    """
    if not causes:
        raise EmptyCauseList("cannot render an explanation from zero causes")
    aliases = aliases or {}
    shape = "spike" if anomaly.z_score >= 0 else "dip"
    parts = [f"{_DIRECTION_PHRASE[c.direction]} {aliases.get(c.channel, c.channel)}"
             for c in causes]
    if len(parts) == 1:
        attribution = parts[0]
    else:
        attribution = ", ".join(parts[:-1]) + " combined with " + parts[-1]
    first = (f"The {shape} in {aliases.get(target, target)} at "
             f"{_format_time(anomaly.time)} was driven by {attribution}.")
    action = action_for(causes[0].channel, actions or {})
    second = f"Consider {action} to address the dominant driver."
    return Explanation(text=f"{first} {second}", source="template", causes=list(causes))


def request_remote_explanation(prompt: ExplanationPrompt, endpoint: RemoteConfig,
                               fallback: Explanation | None = None) -> Explanation:
    """POST the prompt to a generic completion endpoint, falling back to the template.

    Wire contract: request ``{"prompt": ..., "max_tokens": N}``, response
    ``{"text": ...}``. Retries with exponential backoff; after the final
    failure the fallback explanation is returned (marked source=template), or
    the last error is raised when no fallback was provided.
    """
    import httpx

    if not endpoint.url:
        raise RemoteUnavailable("no remote endpoint configured")
    last_error: Exception | None = None
    payload = {"prompt": prompt.text, "max_tokens": endpoint.max_tokens}
    for attempt in range(endpoint.retries + 1):
        if attempt:
            time.sleep(endpoint.backoff_seconds * 2 ** (attempt - 1))
        try:
            response = httpx.post(endpoint.url, json=payload,
                                  timeout=endpoint.timeout_seconds)
            if response.status_code != 200:
                raise RemoteUnavailable(
                    f"endpoint returned HTTP {response.status_code}")
            try:
                doc = response.json()
            except (json.JSONDecodeError, ValueError) as exc:
                raise MalformedResponse(f"endpoint returned non-JSON body: {exc}") from exc
            if not isinstance(doc, dict) or not isinstance(doc.get("text"), str):
                raise MalformedResponse("endpoint response lacks a string 'text' field")
            return Explanation(text=doc["text"], source="remote",
                               causes=list(fallback.causes) if fallback else [])
        except (httpx.HTTPError, RemoteUnavailable, MalformedResponse) as exc:
            last_error = exc
            logger.warning("remote explanation attempt %d failed: %s", attempt + 1, exc)
    if fallback is not None:
        logger.warning("remote endpoint unavailable, using template explanation")
        return fallback
    if isinstance(last_error, (MalformedResponse, RemoteUnavailable)):
        raise last_error
    raise RemoteUnavailable(str(last_error))


def explanation_to_json(explanation: Explanation, target: str, anomaly: AnomalyEvent,
                        prompt: ExplanationPrompt) -> dict:
    return {
        "anomaly_time": _num(anomaly.time),
        "target": target,
        "causes": [
            {"channel": c.channel, "direction": c.direction, "f_stat": _f_json(c.f_stat)}
            for c in explanation.causes
        ],
        "prompt": prompt.text,
        "text": explanation.text,
        "source": explanation.source,
    }
