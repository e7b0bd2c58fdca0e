"""End-to-end orchestration: ingest -> detect -> discover -> prune -> rank -> explain.

Each anomaly is an independent, pure work item, so a bounded worker pool may
process them in any order; records are keyed by anomaly index and assembled
sorted, which makes output bytes identical for every pool size.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import explain as explain_mod
from .anomaly import AnomalyEvent, detect_anomalies, events_to_json
from .config import RunConfig
from .errors import DataError, WindowTooShort
from .frames import TimeSeriesFrame, format_epoch
from .granger import discover_graph
from .graph import CausalGraph, CauseSet, prune, rank_causes
from .ingest import parse_csv, preprocess

logger = logging.getLogger(__name__)


@dataclass
class AnomalyRecord:
    event: AnomalyEvent
    graph: CausalGraph
    pruned: CausalGraph
    causes: CauseSet
    window: tuple[int, int]
    explanation: explain_mod.Explanation | None
    prompt: explain_mod.ExplanationPrompt | None

    def explanation_json(self, target: str) -> dict:
        if self.explanation is None or self.prompt is None:
            # No ranked parents: a valid outcome meaning no causal explanation.
            return {
                "anomaly_time": self.event.to_json()["time"],
                "target": target,
                "causes": [],
                "prompt": None,
                "text": "",
                "source": "template",
            }
        return explain_mod.explanation_to_json(
            self.explanation, target, self.event, self.prompt)


@dataclass
class RunResult:
    frame: TimeSeriesFrame
    dropped_channels: list[str]
    events: list[AnomalyEvent]
    records: list[AnomalyRecord]
    skipped: list[tuple[AnomalyEvent, str]]   # (event, reason)


def ingest_csv(data: bytes | str, cfg: RunConfig,
               timestamp_column: str = "timestamp") -> tuple[TimeSeriesFrame, list[str]]:
    raw = parse_csv(data, timestamp_column)
    frame, dropped = preprocess(raw, cfg.preprocess)
    if dropped:
        logger.info("dropped sparse channels: %s", ", ".join(dropped))
    return frame, dropped


def explain_anomaly(frame: TimeSeriesFrame, event: AnomalyEvent, cfg: RunConfig,
                    ci_only: bool = False, template_only: bool = False) -> AnomalyRecord:
    """Run discovery, pruning, ranking, and explanation for one anomaly."""
    graph = discover_graph(frame, event, cfg.window)
    pruned = prune(graph, cfg.prune)
    causes = rank_causes(pruned, cfg.anomaly.target_channel, cfg.rank_k)
    causes.anomaly_time = event.time
    window = (event.index - cfg.window.window_length, event.index)

    if not causes.causes:
        return AnomalyRecord(event, graph, pruned, causes, window, None, None)

    directed = [
        explain_mod.annotate_direction(channel, frame, event,
                                       cfg.window.window_length, f_stat=f)
        for channel, f in causes.causes
    ]
    prompt = explain_mod.build_prompt(directed)
    if ci_only:
        explanation = explain_mod.Explanation("", "template", directed)
    else:
        explanation = explain_mod.render_template(
            directed, cfg.anomaly.target_channel, event, cfg.actions, cfg.aliases)
        if not template_only and cfg.remote.url:
            explanation = explain_mod.request_remote_explanation(
                prompt, cfg.remote, fallback=explanation)
    return AnomalyRecord(event, graph, pruned, causes, window, explanation, prompt)


def run_pipeline(data: bytes | str, cfg: RunConfig, *, timestamp_column: str = "timestamp",
                 ci_only: bool = False, template_only: bool = False,
                 workers: int = 1) -> RunResult:
    """Full pipeline over a CSV payload. Pure given (data, cfg, flags)."""
    frame, dropped = ingest_csv(data, cfg, timestamp_column)
    events = detect_anomalies(frame, cfg.anomaly)
    logger.info("detected %d anomalies on %r", len(events), cfg.anomaly.target_channel)

    records: dict[int, AnomalyRecord] = {}
    skipped: list[tuple[AnomalyEvent, str]] = []

    def work(event: AnomalyEvent):
        return event.index, explain_anomaly(frame, event, cfg, ci_only, template_only)

    runnable = []
    for event in events:
        if event.index < cfg.window.window_length:
            reason = (f"short window: index {event.index} < "
                      f"window_length {cfg.window.window_length}")
            skipped.append((event, reason))
            logger.warning("skipping anomaly at %s: %s", event.time, reason)
        else:
            runnable.append(event)

    if workers <= 1:
        results = map(work, runnable)
    else:
        pool = ThreadPoolExecutor(max_workers=workers)
        try:
            results = list(pool.map(work, runnable))
        finally:
            pool.shutdown()
    for index, record in results:
        records[index] = record
    ordered = [records[i] for i in sorted(records)]
    return RunResult(frame, dropped, events, ordered, skipped)


def _atomic_write(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _dump(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def write_outputs(result: RunResult, cfg: RunConfig, out_dir: str | Path) -> dict:
    """Write the stable output layout; returns a manifest of written paths."""
    out = Path(out_dir)
    (out / "graphs").mkdir(parents=True, exist_ok=True)
    (out / "explanations").mkdir(parents=True, exist_ok=True)

    _atomic_write(out / "anomalies.json", _dump(events_to_json(result.events)))
    manifest = {"anomalies": str(out / "anomalies.json"),
                "graphs": [], "explanations": []}
    target = cfg.anomaly.target_channel
    for record in result.records:
        token = format_epoch(record.event.time)
        graph_path = out / "graphs" / f"{token}.json"
        _atomic_write(graph_path,
                      _dump(record.graph.to_json(target, record.window)))
        expl_path = out / "explanations" / f"{token}.json"
        _atomic_write(expl_path, _dump(record.explanation_json(target)))
        manifest["graphs"].append(str(graph_path))
        manifest["explanations"].append(str(expl_path))
    return manifest


def find_record(result: RunResult, anomaly_time: float) -> AnomalyRecord:
    for record in result.records:
        if record.event.time == anomaly_time:
            return record
    raise DataError(f"no processed anomaly at time {anomaly_time}; "
                    f"have {[r.event.time for r in result.records]}")
