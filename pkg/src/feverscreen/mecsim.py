"""Deployment simulator: screening throughput and accuracy vs placement.

A deterministic event loop models people walking through the camera's field
of view while frames travel to a server (edge or cloud), queue for compute
slots, and return. A frame whose end-to-end latency (transmission + round
trip + queueing + compute) exceeds the per-frame budget is useless for
screening someone in stride and is dropped. A person is screened in stride
once enough in-budget frames complete before they leave the field of view;
otherwise they must stop at the checkpoint — a serial gate with a fixed
stopping overhead — and wait for enough frames, which is what converts
network latency into throughput loss.

Per-frame classification is correct with probability ``p_frame`` and the
person-level decision is the majority over the frames that informed it
(in-budget completions by exit when screened in stride, the minimum frame
count when screened at the gate; ties split by a fair coin). The decision is
realized by comparing one per-person uniform draw against the exact majority
probability for that frame count, so a run where latency removes frames can
only flip people from correctly screened to misscreened, never the reverse;
for a classifier better than chance this makes fixed-seed latency sweeps
monotone person by person, while any single run keeps exactly the majority
vote's distribution.

Throughput counts people whose screening started inside the arrival window
(in stride: their walk; at the gate: their admission) per minute of that
window; accuracy is taken over everyone eventually screened, so the two
never trade off by re-weighting who is counted. The gate's frames ride a
reserved compute slot rather than the walkway queue: a stopped person is
never stuck behind the stream, and the stream's queueing stays independent
of who is dwelling, which keeps every frame's latency pointwise monotone in
the network's round trip.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .screening import ConfusionCounts, accuracy as confusion_accuracy

DEFAULT_P_FRAME = 0.78


@dataclass(frozen=True)
class DeploymentProfile:
    """Where the compute lives and what the path to it costs."""

    rtt_ms: float
    bandwidth_mbps: float
    detection_ms: float
    synthesis_ms: float           # per synthesized tile
    association_ms: float
    screening_ms: float
    budget_ms: float              # per-frame deadline for in-stride use
    slots: int = 3                # parallel server frame slots
    tiles_per_frame: int = 5      # thermal candidates synthesized per frame

    def __post_init__(self):
        stages = (self.rtt_ms, self.detection_ms, self.synthesis_ms,
                  self.association_ms, self.screening_ms)
        if any(v < 0 for v in stages):
            raise ConfigError(f"times must be non-negative, got {stages}")
        if self.bandwidth_mbps < 0:
            raise ConfigError(f"bandwidth must be non-negative, "
                              f"got {self.bandwidth_mbps}")
        if self.budget_ms <= 0:
            raise ConfigError(f"budget must be positive, got {self.budget_ms}")
        if self.slots < 1 or self.tiles_per_frame < 1:
            raise ConfigError(f"need at least one slot and one tile, got "
                              f"{self.slots} and {self.tiles_per_frame}")

    @property
    def compute_ms(self) -> float:
        return (self.detection_ms + self.synthesis_ms * self.tiles_per_frame
                + self.association_ms + self.screening_ms)

    def to_dict(self) -> dict:
        return {"rtt_ms": self.rtt_ms, "bandwidth_mbps": self.bandwidth_mbps,
                "detection_ms": self.detection_ms,
                "synthesis_ms": self.synthesis_ms,
                "association_ms": self.association_ms,
                "screening_ms": self.screening_ms,
                "budget_ms": self.budget_ms, "slots": self.slots,
                "tiles_per_frame": self.tiles_per_frame}

    @staticmethod
    def from_dict(obj: dict) -> "DeploymentProfile":
        try:
            return DeploymentProfile(**{k: (int(v) if k in ("slots",
                                        "tiles_per_frame") else float(v))
                                        for k, v in obj.items()})
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"bad deployment profile: {exc}") from exc


@dataclass(frozen=True)
class PersonFlow:
    """Arrival process and checkpoint policy."""

    arrival_per_min: float = 70.0
    speed_mps: float = 1.0
    fov_span_m: float = 3.0
    fps: float = 10.0
    payload_kb: float = 200.0
    k_min: int = 4                # completed frames needed to screen someone
    stop_overhead_s: float = 3.5  # decelerate, position, re-accelerate
    dwell: bool = True            # may people stop and wait at the gate?

    def __post_init__(self):
        if self.arrival_per_min <= 0 or self.speed_mps <= 0 \
                or self.fov_span_m <= 0 or self.fps <= 0:
            raise ConfigError("arrival rate, speed, span and fps must be "
                              "positive")
        if self.payload_kb < 0 or self.stop_overhead_s < 0:
            raise ConfigError("payload and stop overhead must be "
                              "non-negative")
        if self.k_min < 1:
            raise ConfigError(f"k_min must be at least 1, got {self.k_min}")

    def to_dict(self) -> dict:
        return {"arrival_per_min": self.arrival_per_min,
                "speed_mps": self.speed_mps, "fov_span_m": self.fov_span_m,
                "fps": self.fps, "payload_kb": self.payload_kb,
                "k_min": self.k_min, "stop_overhead_s": self.stop_overhead_s,
                "dwell": self.dwell}

    @staticmethod
    def from_dict(obj: dict) -> "PersonFlow":
        try:
            kw = dict(obj)
            kw["k_min"] = int(kw.get("k_min", 4))
            kw["dwell"] = bool(kw.get("dwell", True))
            return PersonFlow(**kw)
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"bad person flow: {exc}") from exc


def edge_profile() -> DeploymentProfile:
    """On-premises server: sub-millisecond network, wide local uplink."""
    return DeploymentProfile(rtt_ms=1.0, bandwidth_mbps=100.0,
                             detection_ms=15.0, synthesis_ms=4.0,
                             association_ms=10.0, screening_ms=5.0,
                             budget_ms=100.0)


def cloud_profile() -> DeploymentProfile:
    """Remote server: long round trip, shared uplink, same compute."""
    return DeploymentProfile(rtt_ms=200.0, bandwidth_mbps=25.0,
                             detection_ms=15.0, synthesis_ms=4.0,
                             association_ms=10.0, screening_ms=5.0,
                             budget_ms=100.0)


def majority_correct_prob(k: int, p_frame: float) -> float:
    """P(majority of k independent frames is right), fair coin on ties.

    Nondecreasing in k when the per-frame classifier beats chance, which is
    what makes screening on fewer frames never look better.
    """
    if k < 1:
        raise ConfigError(f"need at least one frame, got {k}")
    if not 0.0 <= p_frame <= 1.0:
        raise ConfigError(f"p_frame must be in [0, 1], got {p_frame}")
    q = 1.0 - p_frame
    total = 0.0
    for i in range(k + 1):
        term = math.comb(k, i) * p_frame ** i * q ** (k - i)
        if 2 * i > k:
            total += term
        elif 2 * i == k:
            total += 0.5 * term
    return total


@dataclass(frozen=True)
class SimMetrics:
    persons_arrived: int
    persons_screened: int
    persons_unscreened: int
    throughput_per_min: float
    frames_generated: int
    frames_processed: int
    frames_dropped: int
    latency_p50_ms: float | None
    latency_p95_ms: float | None
    latency_p99_ms: float | None
    confusion: ConfusionCounts | None
    accuracy: float | None
    latencies_ms: tuple = field(repr=False, default=())

    def to_dict(self) -> dict:
        conf = None if self.confusion is None else {
            "tp": self.confusion.tp, "fp": self.confusion.fp,
            "tn": self.confusion.tn, "fn": self.confusion.fn}
        return {"persons_arrived": self.persons_arrived,
                "persons_screened": self.persons_screened,
                "persons_unscreened": self.persons_unscreened,
                "throughput_per_min": self.throughput_per_min,
                "frames_generated": self.frames_generated,
                "frames_processed": self.frames_processed,
                "frames_dropped": self.frames_dropped,
                "latency_p50_ms": self.latency_p50_ms,
                "latency_p95_ms": self.latency_p95_ms,
                "latency_p99_ms": self.latency_p99_ms,
                "confusion": conf, "accuracy": self.accuracy}


def write_latency_histogram(path, metrics: SimMetrics,
                            bin_ms: float = 10.0) -> None:
    """CSV latency histogram over completed frames."""
    if bin_ms <= 0:
        raise ConfigError(f"bin width must be positive, got {bin_ms}")
    lines = ["bin_lo_ms,bin_hi_ms,count"]
    lat = np.asarray(metrics.latencies_ms, dtype=np.float64)
    if lat.size:
        n_bins = int(math.floor(lat.max() / bin_ms)) + 1
        counts, edges = np.histogram(lat, bins=n_bins,
                                     range=(0.0, n_bins * bin_ms))
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            lines.append(f"{lo:.1f},{hi:.1f},{int(c)}")
    Path(path).write_text("".join(line + "\n" for line in lines))


class _Person:
    __slots__ = ("pid", "t_arrive", "fever", "u", "processed", "decided",
                 "dwelling", "correct", "start_time")

    def __init__(self, pid, t_arrive, fever, u):
        self.pid = pid
        self.t_arrive = t_arrive
        self.fever = fever
        self.u = u               # one draw decides this person, see simulate
        self.processed = 0
        self.decided = False
        self.dwelling = False
        self.correct = None
        self.start_time = None   # walk start or gate admission


class _Frame:
    __slots__ = ("pid", "t_capture", "dwell_frame")

    def __init__(self, pid, t_capture, dwell_frame):
        self.pid = pid
        self.t_capture = t_capture
        self.dwell_frame = dwell_frame


def simulate(profile: DeploymentProfile, flow: PersonFlow,
             oracle_rate: float, duration_s: float, seed: int,
             p_frame: float = DEFAULT_P_FRAME) -> SimMetrics:
    """Run one deployment for ``duration_s`` seconds of arrivals.

    Arrivals stop at ``duration_s`` but nobody is cut off mid-screening:
    frames in flight resolve and the gate works through its whole line, so
    with dwell enabled every arrival is eventually screened. Throughput only
    credits people whose screening started inside the window.
    """
    if duration_s <= 0:
        raise ConfigError(f"duration must be positive, got {duration_s}")
    if not 0.0 <= oracle_rate <= 1.0:
        raise ConfigError(f"oracle rate must be in [0, 1], got {oracle_rate}")
    if not 0.0 <= p_frame <= 1.0:
        raise ConfigError(f"p_frame must be in [0, 1], got {p_frame}")
    if flow.payload_kb > 0 and profile.bandwidth_mbps == 0:
        raise ConfigError("zero uplink bandwidth with a nonzero frame "
                          "payload never transmits")

    tx_s = 0.0
    if flow.payload_kb > 0:
        tx_s = (flow.payload_kb * 8.0 / profile.bandwidth_mbps) / 1000.0
    rtt_s = profile.rtt_ms / 1000.0
    compute_s = profile.compute_ms / 1000.0
    budget_s = profile.budget_ms / 1000.0
    walk_s = flow.fov_span_m / flow.speed_mps
    frame_gap = 1.0 / flow.fps
    vote_prob = {}

    def decide(person, k):
        if k not in vote_prob:
            vote_prob[k] = majority_correct_prob(k, p_frame)
        person.correct = bool(person.u < vote_prob[k])
        person.decided = True

    # arrivals: Poisson process cut at duration; fever truth and the
    # decision draw come off the same stream in arrival order, so they are
    # identical across profiles run on one seed
    rng = np.random.default_rng(seed)
    persons = []
    t = rng.exponential(60.0 / flow.arrival_per_min)
    while t < duration_s:
        fever = bool(rng.random() < oracle_rate)
        persons.append(_Person(len(persons), t, fever, rng.random()))
        t += rng.exponential(60.0 / flow.arrival_per_min)

    frames: list[_Frame] = []
    events: list = []            # (time, seq, kind, index)
    seq = 0

    def push(when, kind, idx):
        nonlocal seq
        heapq.heappush(events, (when, seq, kind, idx))
        seq += 1

    def capture(person, when, dwell_frame):
        frames.append(_Frame(person.pid, when, dwell_frame))
        if dwell_frame:
            # the gate rides a reserved slot: a stopped person is never
            # stuck behind the walkway stream, and the walkway stream's
            # queueing never depends on who is dwelling
            push(when + tx_s + rtt_s + compute_s, "result", len(frames) - 1)
        else:
            push(when + tx_s + rtt_s / 2.0, "server", len(frames) - 1)

    for p in persons:
        n_frames = int(math.ceil(walk_s * flow.fps - 1e-12))
        for j in range(n_frames):
            capture(p, p.t_arrive + j * frame_gap, False)
        push(p.t_arrive + walk_s, "exit", p.pid)

    slot_free = [0.0] * profile.slots
    gate_busy = False
    gate_line: list[int] = []
    processed = dropped = 0
    latencies: list[float] = []
    screened: list[_Person] = []

    def start_dwell(person, when):
        nonlocal gate_busy
        gate_busy = True
        person.dwelling = True
        person.start_time = when
        push(when + flow.stop_overhead_s, "dwell_capture", person.pid)

    def finish(person, when, k):
        nonlocal gate_busy
        decide(person, k)
        screened.append(person)
        if person.dwelling:
            person.dwelling = False
            gate_busy = False
            if gate_line:
                start_dwell(persons[gate_line.pop(0)], when)

    while events:
        when, _, kind, idx = heapq.heappop(events)
        if kind == "server":
            # FIFO service: frames start in arrival order on the earliest
            # free slot
            i = min(range(profile.slots), key=lambda k: slot_free[k])
            start = max(when, slot_free[i])
            slot_free[i] = start + compute_s
            push(slot_free[i] + rtt_s / 2.0, "result", idx)
        elif kind == "result":
            fr = frames[idx]
            person = persons[fr.pid]
            latency = when - fr.t_capture
            if fr.dwell_frame or latency <= budget_s + 1e-12:
                processed += 1
                latencies.append(latency * 1000.0)
                person.processed += 1
                if (person.dwelling and not person.decided
                        and person.processed >= flow.k_min):
                    # the gate holds people only until the minimum frame
                    # count, so a gated screening always votes on k_min
                    finish(person, when, flow.k_min)
            else:
                dropped += 1
        elif kind == "exit":
            person = persons[idx]
            if person.processed >= flow.k_min:
                person.start_time = person.t_arrive
                finish(person, when, person.processed)
            elif flow.dwell:
                if gate_busy:
                    gate_line.append(person.pid)
                else:
                    start_dwell(person, when)
        elif kind == "dwell_capture":
            person = persons[idx]
            if not person.decided:
                capture(person, when, True)
                push(when + frame_gap, "dwell_capture", person.pid)

    unscreened = len(persons) - len(screened)
    in_window = sum(1 for p in screened if p.start_time <= duration_s)
    throughput = in_window / (duration_s / 60.0)

    confusion = None
    acc = None
    if screened:
        tp = sum(1 for p in screened if p.fever and p.correct)
        fn = sum(1 for p in screened if p.fever and not p.correct)
        tn = sum(1 for p in screened if not p.fever and p.correct)
        fp = sum(1 for p in screened if not p.fever and not p.correct)
        confusion = ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)
        acc = confusion_accuracy(confusion)

    lat = np.asarray(latencies, dtype=np.float64)
    pct = (lambda q: float(np.percentile(lat, q))) if lat.size else (
        lambda q: None)
    return SimMetrics(
        persons_arrived=len(persons), persons_screened=len(screened),
        persons_unscreened=unscreened, throughput_per_min=throughput,
        frames_generated=len(frames), frames_processed=processed,
        frames_dropped=dropped, latency_p50_ms=pct(50),
        latency_p95_ms=pct(95), latency_p99_ms=pct(99),
        confusion=confusion, accuracy=acc,
        latencies_ms=tuple(latencies))


@dataclass(frozen=True)
class DeploymentReport:
    throughput_a_mean: float
    throughput_b_mean: float
    accuracy_a_mean: float
    accuracy_b_mean: float
    ratio_mean: float            # per-seed throughput a / b, averaged
    ratio_min: float
    ratio_max: float
    accuracy_gap_mean: float     # per-seed accuracy a - b, averaged
    accuracy_gap_min: float
    accuracy_gap_max: float
    seeds: tuple

    def to_dict(self) -> dict:
        return {"throughput_a_mean": self.throughput_a_mean,
                "throughput_b_mean": self.throughput_b_mean,
                "accuracy_a_mean": self.accuracy_a_mean,
                "accuracy_b_mean": self.accuracy_b_mean,
                "ratio_mean": self.ratio_mean, "ratio_min": self.ratio_min,
                "ratio_max": self.ratio_max,
                "accuracy_gap_mean": self.accuracy_gap_mean,
                "accuracy_gap_min": self.accuracy_gap_min,
                "accuracy_gap_max": self.accuracy_gap_max,
                "seeds": list(self.seeds)}


def compare_deployments(profile_a: DeploymentProfile,
                        profile_b: DeploymentProfile, flow: PersonFlow,
                        oracle_rate: float = 0.2, duration_s: float = 600.0,
                        seeds=(0, 1, 2), p_frame: float = DEFAULT_P_FRAME
                        ) -> DeploymentReport:
    """Same flow and seeds through both profiles; per-seed ratios and gaps."""
    seeds = tuple(int(s) for s in seeds)
    if not seeds:
        raise ConfigError("need at least one seed")
    tp_a, tp_b, acc_a, acc_b, ratios, gaps = [], [], [], [], [], []
    for s in seeds:
        ma = simulate(profile_a, flow, oracle_rate, duration_s, s, p_frame)
        mb = simulate(profile_b, flow, oracle_rate, duration_s, s, p_frame)
        if ma.accuracy is None or mb.accuracy is None:
            raise DataError(f"seed {s}: a profile screened nobody; "
                            f"no accuracy to compare")
        tp_a.append(ma.throughput_per_min)
        tp_b.append(mb.throughput_per_min)
        acc_a.append(ma.accuracy)
        acc_b.append(mb.accuracy)
        ratios.append(math.inf if mb.throughput_per_min == 0
                      else ma.throughput_per_min / mb.throughput_per_min)
        gaps.append(ma.accuracy - mb.accuracy)
    mean = lambda xs: float(np.mean(xs))
    return DeploymentReport(
        throughput_a_mean=mean(tp_a), throughput_b_mean=mean(tp_b),
        accuracy_a_mean=mean(acc_a), accuracy_b_mean=mean(acc_b),
        ratio_mean=mean(ratios), ratio_min=float(min(ratios)),
        ratio_max=float(max(ratios)), accuracy_gap_mean=mean(gaps),
        accuracy_gap_min=float(min(gaps)), accuracy_gap_max=float(max(gaps)),
        seeds=seeds)


@dataclass(frozen=True)
class Scenario:
    """One comparison: two profiles, a flow, and run parameters."""

    profile_a: DeploymentProfile
    profile_b: DeploymentProfile
    flow: PersonFlow
    oracle_rate: float = 0.2
    duration_s: float = 600.0
    seeds: tuple = (0, 1, 2)
    p_frame: float = DEFAULT_P_FRAME

    def to_dict(self) -> dict:
        return {"profile_a": self.profile_a.to_dict(),
                "profile_b": self.profile_b.to_dict(),
                "flow": self.flow.to_dict(), "oracle_rate": self.oracle_rate,
                "duration_s": self.duration_s, "seeds": list(self.seeds),
                "p_frame": self.p_frame}

    @staticmethod
    def from_dict(obj: dict) -> "Scenario":
        try:
            return Scenario(
                profile_a=DeploymentProfile.from_dict(obj["profile_a"]),
                profile_b=DeploymentProfile.from_dict(obj["profile_b"]),
                flow=PersonFlow.from_dict(obj["flow"]),
                oracle_rate=float(obj.get("oracle_rate", 0.2)),
                duration_s=float(obj.get("duration_s", 600.0)),
                seeds=tuple(int(s) for s in obj.get("seeds", (0, 1, 2))),
                p_frame=float(obj.get("p_frame", DEFAULT_P_FRAME)))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"bad scenario: {exc}") from exc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2,
                                         sort_keys=True) + "\n")

    @staticmethod
    def load(path) -> "Scenario":
        try:
            obj = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"scenario file is not JSON: {exc}") from exc
        return Scenario.from_dict(obj)

    def run(self) -> DeploymentReport:
        return compare_deployments(self.profile_a, self.profile_b, self.flow,
                                   self.oracle_rate, self.duration_s,
                                   self.seeds, self.p_frame)
