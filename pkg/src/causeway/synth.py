"""Synthetic multichannel telemetry from a known lagged structural model.

Simulates x^j_t = self_j * x^j_{t-1} + sum(coeff * x^source_{t-lag}) + noise
with a documented, platform-stable noise source: the Philox 4x64 counter-based
generator supplies uniforms and a Box-Muller transform turns them into
normals, so a spec (seed included) always reproduces the same frame.
Scenario generation injects a step into one channel and reports the expected
anomaly and top cause, giving discovery tests an exact ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .anomaly import AnomalyEvent, detect_anomalies
from .config import AnomalyConfig
from .errors import InvalidSpec
from .frames import RawFrame, TimeSeriesFrame
from .graph import CausalGraph, CauseSet, EdgeStat
from .ingest import standardize

DEFAULT_START = 1609459200.0   # 2021-01-01T00:00:00Z
DEFAULT_INTERVAL = 3600.0


@dataclass(frozen=True)
class SynthEdge:
    source: str
    dest: str
    lag: int
    coefficient: float


@dataclass
class SynthSpec:
    channels: list[str]
    edges: list[SynthEdge] = field(default_factory=list)
    self_coefficients: dict[str, float] = field(default_factory=dict)
    noise_std: dict[str, float] = field(default_factory=dict)
    n: int = 500
    seed: int = 0
    start: float = DEFAULT_START
    interval: float = DEFAULT_INTERVAL


@dataclass
class Injection:
    channel: str
    start_index: int
    duration: int
    magnitude: float    # additive step, in units of the channel's base std


@dataclass
class ScenarioSpec:
    base: SynthSpec
    injection: Injection


def _validate(spec: SynthSpec) -> int:
    if not spec.channels:
        raise InvalidSpec("spec has no channels")
    if len(set(spec.channels)) != len(spec.channels):
        raise InvalidSpec("channel ids must be unique")
    max_lag = 1
    for e in spec.edges:
        if e.source not in spec.channels or e.dest not in spec.channels:
            raise InvalidSpec(f"edge {e.source}->{e.dest} references unknown channel")
        if e.lag < 1:
            raise InvalidSpec(f"edge {e.source}->{e.dest} has lag {e.lag}; lags are >= 1")
        max_lag = max(max_lag, e.lag)
    for cid in spec.channels:
        a = spec.self_coefficients.get(cid, 0.0)
        if not abs(a) < 1.0:
            raise InvalidSpec(f"self coefficient for {cid!r} must satisfy |a| < 1, got {a}")
        if spec.noise_std.get(cid, 0.0) < 0.0:
            raise InvalidSpec(f"noise std for {cid!r} must be >= 0")
    if spec.n <= 10 * max_lag:
        raise InvalidSpec(f"n must exceed 10 * max lag = {10 * max_lag}, got {spec.n}")
    return max_lag


def _normals(seed: int, shape: tuple[int, ...]) -> np.ndarray:
    """Standard normals from Philox-4x64 uniforms via Box-Muller."""
    count = int(np.prod(shape))
    pairs = (count + 1) // 2
    gen = np.random.Generator(np.random.Philox(key=seed))
    u1 = 1.0 - gen.random(pairs)        # (0, 1]: keeps log() finite
    u2 = gen.random(pairs)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])
    return z[:count].reshape(shape)


def _simulate(spec: SynthSpec, max_lag: int,
              injection: Injection | None = None,
              injection_step: float = 0.0) -> np.ndarray:
    """Raw (n_channels, n) simulation; burn-in of 10*max_lag steps is discarded."""
    c = len(spec.channels)
    burn_in = 10 * max_lag
    total = spec.n + burn_in
    index = {cid: i for i, cid in enumerate(spec.channels)}
    selfs = np.array([spec.self_coefficients.get(cid, 0.0) for cid in spec.channels])
    noise = _normals(spec.seed, (c, total)) * np.array(
        [spec.noise_std.get(cid, 0.0) for cid in spec.channels])[:, None]
    edges = [(index[e.source], index[e.dest], e.lag, e.coefficient) for e in spec.edges]

    x = np.zeros((c, total))
    inj_channel = index[injection.channel] if injection is not None else -1
    for t in range(1, total):
        x_t = selfs * x[:, t - 1] + noise[:, t]
        for src, dst, lag, coeff in edges:
            if t - lag >= 0:
                x_t[dst] += coeff * x[src, t - lag]
        if injection is not None:
            k = t - burn_in
            if injection.start_index <= k < injection.start_index + injection.duration:
                x_t[inj_channel] += injection_step
        x[:, t] = x_t
    return x[:, burn_in:]


def generate_var(spec: SynthSpec) -> tuple[TimeSeriesFrame, CausalGraph]:
    """Simulate the spec and return the standardized frame plus its true graph."""
    max_lag = _validate(spec)
    raw = _simulate(spec, max_lag)
    frame = standardize(RawFrame(
        spec.start + spec.interval * np.arange(spec.n, dtype=np.float64),
        list(spec.channels), raw))
    truth = CausalGraph(nodes=list(spec.channels))
    for e in spec.edges:
        truth.edges[(e.source, e.dest)] = EdgeStat(np.inf, 0.0, e.lag)
    return frame, truth


def build_scenario(spec: ScenarioSpec,
                   detection: AnomalyConfig | None = None
                   ) -> tuple[TimeSeriesFrame, AnomalyEvent | None, CauseSet]:
    """Inject a step into one channel and report the realized ground truth.

    The step height is ``magnitude`` times the injected channel's population
    std measured on an identical-seed clean simulation, so "std units" refers
    to the channel's own base variability. The expected anomaly is located by
    running the z-score detector on the generated target channel; a scenario
    whose injection never moves the target yields None.
    """
    base = spec.base
    inj = spec.injection
    max_lag = _validate(base)
    if inj.channel not in base.channels:
        raise InvalidSpec(f"injection channel {inj.channel!r} is not in the spec")
    if not (0 <= inj.start_index and inj.start_index + inj.duration <= base.n):
        raise InvalidSpec("injection window must lie within [0, n)")
    if inj.duration < 0:
        raise InvalidSpec("injection duration must be >= 0")

    clean = _simulate(base, max_lag)
    base_std = float(np.std(clean[base.channels.index(inj.channel)]))
    raw = _simulate(base, max_lag, inj, inj.magnitude * base_std)
    frame = standardize(RawFrame(
        base.start + base.interval * np.arange(base.n, dtype=np.float64),
        list(base.channels), raw))

    detection = detection or AnomalyConfig(target_channel=base.channels[-1])
    events = detect_anomalies(frame, detection)
    # The realized spike is the strongest detected event inside or after the
    # injection window (propagation lags shift it past start_index).
    candidates = [e for e in events if e.index >= inj.start_index]
    expected_event = max(candidates, key=lambda e: abs(e.z_score), default=None)
    expected_causes = CauseSet(detection.target_channel, [(inj.channel, 0.0)],
                               anomaly_time=None if expected_event is None
                               else expected_event.time)
    return frame, expected_event, expected_causes


def default_scenario(seed: int = 0, n: int = 400) -> ScenarioSpec:
    """Occupancy-spike scenario with the wiring of a small office zone.

    occupancy drives zone temperature and energy directly; zone temperature
    and chilled-water flow also feed energy; the damper channel is isolated.
    """
    channels = ["occupancy", "zone3_temp", "chilled_water_flow", "damper", "energy"]
    base = SynthSpec(
        channels=channels,
        edges=[
            SynthEdge("occupancy", "zone3_temp", 1, 0.5),
            SynthEdge("occupancy", "energy", 1, 0.8),
            SynthEdge("zone3_temp", "energy", 1, 0.35),
            SynthEdge("chilled_water_flow", "energy", 1, 0.3),
        ],
        self_coefficients={cid: 0.5 for cid in channels} | {"energy": 0.4},
        noise_std={cid: 0.1 for cid in channels},
        n=n,
        seed=seed,
    )
    injection = Injection("occupancy", start_index=max(64, n - 100), duration=16,
                          magnitude=8.0)
    return ScenarioSpec(base, injection)


# --- serialization ----------------------------------------------------------

def _per_channel(value, channels: list[str], name: str) -> dict[str, float]:
    if isinstance(value, dict):
        unknown = set(value) - set(channels)
        if unknown:
            raise InvalidSpec(f"{name} names unknown channels: {sorted(unknown)}")
        return {k: float(v) for k, v in value.items()}
    return {cid: float(value) for cid in channels}


def spec_from_json(doc: dict) -> SynthSpec | ScenarioSpec:
    """Parse a spec document; presence of "injection" (or "scenario") makes it a scenario."""
    if not isinstance(doc, dict):
        raise InvalidSpec("spec document must be a JSON object")
    if doc.get("scenario") == "default":
        scenario = default_scenario(seed=int(doc.get("seed", 0)),
                                    n=int(doc.get("n", 400)))
        return scenario
    try:
        channels = [str(c) for c in doc["channels"]]
    except KeyError:
        raise InvalidSpec("spec document lacks 'channels'") from None
    edges = [SynthEdge(str(e["source"]), str(e["dest"]), int(e.get("lag", 1)),
                       float(e["coefficient"]))
             for e in doc.get("edges", [])]
    base = SynthSpec(
        channels=channels,
        edges=edges,
        self_coefficients=_per_channel(doc.get("self_coefficients", 0.0),
                                       channels, "self_coefficients"),
        noise_std=_per_channel(doc.get("noise_std", 0.0), channels, "noise_std"),
        n=int(doc.get("n", 500)),
        seed=int(doc.get("seed", 0)),
        start=float(doc.get("start", DEFAULT_START)),
        interval=float(doc.get("interval", DEFAULT_INTERVAL)),
    )
    if "injection" in doc:
        inj = doc["injection"]
        return ScenarioSpec(base, Injection(
            str(inj["channel"]), int(inj["start_index"]),
            int(inj["duration"]), float(inj["magnitude"])))
    return base


def ground_truth_json(spec: SynthSpec, expected_causes: CauseSet | None = None,
                      expected_event: AnomalyEvent | None = None) -> dict:
    doc = {
        "edges": [
            {"source": e.source, "dest": e.dest, "lag": e.lag,
             "coefficient": e.coefficient}
            for e in sorted(spec.edges, key=lambda e: (e.source, e.dest, e.lag))
        ],
        "expected_causes": [] if expected_causes is None else expected_causes.channels(),
    }
    if expected_event is not None:
        doc["expected_anomaly_time"] = expected_event.to_json()["time"]
    return doc


def frame_to_csv(frame: TimeSeriesFrame, timestamp_column: str = "timestamp") -> str:
    """Render the frame as ingest-compatible CSV with raw (de-standardized) values."""
    lines = [",".join([timestamp_column] + list(frame.ids))]
    raw = frame.values * frame.stds[:, None] + frame.means[:, None]
    for i in range(frame.n_samples):
        stamp = datetime.fromtimestamp(frame.time_at(i), tz=timezone.utc)
        cells = [stamp.strftime("%Y-%m-%dT%H:%M:%S")]
        cells += [repr(float(v)) for v in raw[:, i]]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
