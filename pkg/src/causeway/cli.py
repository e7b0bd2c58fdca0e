"""Command-line interface.

Subcommands wrap the pipeline handlers one-to-one; all machine output goes to
stdout or files, diagnostics go to stderr. Exit codes: 0 success, 2 config
error, 3 data error, 4 remote error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import config as config_mod
from . import metrics as metrics_mod
from . import pipeline, synth
from .anomaly import detect_anomalies, events_to_json
from .errors import CausewayError
from .frames import format_epoch

logger = logging.getLogger("causeway")


def _read_bytes(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise CausewayError(f"cannot read {path!r}: {exc}") from exc


def _load_config(args) -> config_mod.RunConfig:
    cfg = config_mod.load(getattr(args, "config", None))
    if getattr(args, "target", None):
        cfg.anomaly.target_channel = args.target
    if getattr(args, "template_only", False):
        cfg.remote.url = None
    return cfg


def _emit(doc):
    json.dump(doc, sys.stdout, indent=2)
    sys.stdout.write("\n")


def cmd_run(args) -> int:
    cfg = _load_config(args)
    result = pipeline.run_pipeline(
        _read_bytes(args.csv), cfg,
        timestamp_column=args.timestamp_col,
        ci_only=args.ci_only,
        template_only=args.template_only,
        workers=args.workers,
    )
    manifest = pipeline.write_outputs(result, cfg, args.out)
    logger.info("wrote %d explanation(s) under %s", len(manifest["explanations"]), args.out)
    _emit(manifest)
    return 0


def cmd_detect(args) -> int:
    cfg = _load_config(args)
    frame, _ = pipeline.ingest_csv(_read_bytes(args.csv), cfg, args.timestamp_col)
    events = detect_anomalies(frame, cfg.anomaly)
    _emit(events_to_json(events))
    return 0


def cmd_explain(args) -> int:
    cfg = _load_config(args)
    result = pipeline.run_pipeline(
        _read_bytes(args.csv), cfg,
        timestamp_column=args.timestamp_col,
        template_only=args.template_only,
    )
    record = pipeline.find_record(result, args.anomaly_time)
    _emit(record.explanation_json(cfg.anomaly.target_channel))
    return 0


def cmd_synth(args) -> int:
    with open(args.spec, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if args.seed is not None:
        doc["seed"] = args.seed
    spec = synth.spec_from_json(doc)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if isinstance(spec, synth.ScenarioSpec):
        frame, event, causes = synth.build_scenario(spec)
        truth = synth.ground_truth_json(spec.base, causes, event)
    else:
        frame, _ = synth.generate_var(spec)
        truth = synth.ground_truth_json(spec)
    (out / "telemetry.csv").write_text(synth.frame_to_csv(frame), encoding="utf-8")
    (out / "ground_truth.json").write_text(json.dumps(truth, indent=2) + "\n",
                                           encoding="utf-8")
    _emit({"csv": str(out / "telemetry.csv"),
           "ground_truth": str(out / "ground_truth.json")})
    return 0


def cmd_evaluate(args) -> int:
    predictions = metrics_mod.load_predictions(args.predictions)
    annotations = metrics_mod.load_annotations(args.annotations)
    report = metrics_mod.evaluate(predictions, annotations,
                                  tolerance_seconds=args.tolerance_seconds)
    print(metrics_mod.report_table(report), file=sys.stderr)
    _emit(report.to_json())
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    config_mod.load(args.config)  # fail fast on a bad config before binding
    uvicorn.run("causeway.service.app:app", host=args.host, port=args.port,
                log_level="info")
    return 0


def _add_common(parser, csv: bool = True):
    if csv:
        parser.add_argument("csv", help="input telemetry CSV")
    parser.add_argument("--config", help="YAML/JSON run configuration")
    parser.add_argument("--timestamp-col", default="timestamp",
                        help="name of the timestamp column (default: timestamp)")
    parser.add_argument("--target", help="override the anomaly target channel")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="causeway",
        description="Explain telemetry anomalies via windowed Granger causal discovery.")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="increase stderr log level (-v info, -vv debug)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="full pipeline: detect, discover, rank, explain")
    _add_common(p)
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--ci-only", action="store_true",
                   help="emit ranked cause names with an empty explanation text")
    p.add_argument("--template-only", action="store_true",
                   help="never call the remote endpoint")
    p.add_argument("--workers", type=int, default=1,
                   help="worker pool size for independent anomalies")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("detect", help="print detected anomalies as JSON")
    _add_common(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("explain", help="explain a single anomaly by its epoch time")
    _add_common(p)
    p.add_argument("--anomaly-time", type=float, required=True,
                   help="epoch seconds of the anomaly to explain")
    p.add_argument("--template-only", action="store_true")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("synth", help="generate synthetic telemetry with ground truth")
    p.add_argument("spec", help="JSON generator spec (VAR or scenario)")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--seed", type=int, help="override the spec's seed")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("evaluate", help="score predictions against annotations")
    p.add_argument("predictions",
                   help="JSON list of cause sets, or a directory of per-anomaly records")
    p.add_argument("annotations", help="JSON annotation list")
    p.add_argument("--tolerance-seconds", type=float, default=0.0,
                   help="match predictions within this many seconds (default: exact)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--config", help="validated at startup")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CausewayError as exc:
        print(f"error [{type(exc).module}]: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
