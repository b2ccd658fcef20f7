"""Two-clock time tagging, clock recovery, and coincidence matching.

Timestamps are integer picoseconds: a 350 s pass spans 3.5e14 ps, where
float accumulation would already cost precision.  The satellite clock is
modelled as a linear offset + drift against the ground clock; relative
timing jitter between the streams is lumped into the satellite tags.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAX_DRIFT_PPM = 100.0


@dataclass(frozen=True)
class ClockModel:
    """Linear clock relation: satellite = ground + offset + drift * ground."""

    offset_ps: float = 0.0
    drift_ppm: float = 0.0

    def __post_init__(self):
        if abs(self.drift_ppm) >= MAX_DRIFT_PPM:
            raise ValueError(f"|drift| must stay below {MAX_DRIFT_PPM} ppm")

    def satellite_time(self, ground_ps):
        return ground_ps + self.offset_ps + self.drift_ppm * 1e-6 * np.asarray(
            ground_ps, dtype=float
        )

    def ground_time(self, satellite_ps):
        return (np.asarray(satellite_ps, dtype=float) - self.offset_ps) / (
            1.0 + self.drift_ppm * 1e-6
        )


@dataclass(frozen=True)
class SyncConfig:
    """Synchronization laser and coincidence parameters."""

    sync_rate_hz: float = 10e3
    window_ps: float = 3000.0
    detector_jitter_sigma_ps: float = 150.0

    def __post_init__(self):
        if self.sync_rate_hz <= 0 or self.window_ps <= 0:
            raise ValueError("sync rate and window must be positive")
        if self.detector_jitter_sigma_ps < 0:
            raise ValueError("jitter sigma must be non-negative")


class TimeTagStream:
    """Sorted detection record: times in integer ps plus channel ids.

    `clock` stores the generating clock model (identity for the ground
    stream); it is bookkeeping, not something a detector would know.
    """

    __slots__ = ("times_ps", "channels", "clock")

    def __init__(self, times_ps, channels, clock: ClockModel | None = None):
        times = np.asarray(times_ps, dtype=np.int64).reshape(-1)
        chans = np.asarray(channels, dtype=np.int16).reshape(-1)
        if times.size != chans.size:
            raise ValueError("times and channels must have equal length")
        if times.size > 1 and np.any(np.diff(times) < 0):
            raise ValueError("time tags must be sorted ascending")
        times.flags.writeable = False
        chans.flags.writeable = False
        object.__setattr__(self, "times_ps", times)
        object.__setattr__(self, "channels", chans)
        object.__setattr__(self, "clock", clock or ClockModel())

    def __setattr__(self, name, value):
        raise AttributeError("TimeTagStream is immutable")

    def __len__(self) -> int:
        return self.times_ps.size

    def channel(self, channel_id: int) -> np.ndarray:
        return self.times_ps[self.channels == channel_id]

    def dump(self, path: str | Path) -> None:
        """Write the line-oriented text format `channel,time_ps`."""
        with open(path, "w", encoding="ascii") as fh:
            for ch, t in zip(self.channels, self.times_ps):
                fh.write(f"{int(ch)},{int(t)}\n")

    @classmethod
    def load(cls, path: str | Path) -> "TimeTagStream":
        channels, times = [], []
        with open(path, "r", encoding="ascii") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                ch, t = line.split(",")
                channels.append(int(ch))
                times.append(int(t))
        order = np.argsort(np.asarray(times, dtype=np.int64), kind="stable")
        return cls(
            np.asarray(times, dtype=np.int64)[order],
            np.asarray(channels, dtype=np.int16)[order],
        )


def sync_pulse_times_ps(config: SyncConfig, duration_s: float) -> np.ndarray:
    """Emission grid of the synchronization laser over a pass."""
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    period_ps = 1e12 / config.sync_rate_hz
    n = int(np.floor(duration_s * config.sync_rate_hz))
    return np.arange(n) * period_ps


def _merge_sorted(times: list[np.ndarray], channels: list[int]) -> tuple[np.ndarray, np.ndarray]:
    all_t = np.concatenate([np.asarray(t, dtype=np.int64) for t in times])
    all_c = np.concatenate(
        [np.full(len(t), c, dtype=np.int16) for t, c in zip(times, channels)]
    )
    order = np.argsort(all_t, kind="stable")
    return all_t[order], all_c[order]


def generate_streams(
    event_times_ps,
    clock: ClockModel,
    jitter_sigma_ps: float,
    ground_background_hz: float,
    satellite_background_hz: float,
    duration_s: float,
    rng: np.random.Generator,
    event_channel: int = 1,
    background_channel: int = 1,
) -> tuple[TimeTagStream, TimeTagStream]:
    """Simulate matched detection records on the two clocks.

    True events land on both streams; the satellite copy is displaced by
    the clock relation plus Gaussian jitter (the lumped relative jitter of
    detectors and sync link).  Each stream gains its own Poisson background.
    """
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    if jitter_sigma_ps < 0:
        raise ValueError("jitter sigma must be non-negative")
    events = np.asarray(event_times_ps, dtype=float).reshape(-1)

    span_ps = duration_s * 1e12
    ground_parts = [np.round(events).astype(np.int64)]
    ground_chans = [event_channel]
    sat_times = clock.satellite_time(events)
    if jitter_sigma_ps > 0 and events.size:
        sat_times = sat_times + rng.normal(0.0, jitter_sigma_ps, size=events.size)
    sat_parts = [np.round(sat_times).astype(np.int64)]
    sat_chans = [event_channel]

    for rate, parts, chans in (
        (ground_background_hz, ground_parts, ground_chans),
        (satellite_background_hz, sat_parts, sat_chans),
    ):
        if rate < 0:
            raise ValueError("background rate must be non-negative")
        n = rng.poisson(rate * duration_s)
        parts.append(np.round(rng.uniform(0.0, span_ps, size=n)).astype(np.int64))
        chans.append(background_channel)

    g_t, g_c = _merge_sorted(ground_parts, ground_chans)
    s_t, s_c = _merge_sorted(sat_parts, sat_chans)
    return (
        TimeTagStream(g_t, g_c),
        TimeTagStream(s_t, s_c, clock=clock),
    )


@dataclass(frozen=True)
class ClockFit:
    clock: ClockModel
    residual_rms_ps: float
    n_pulses: int


def fit_clock(ground_sync_ps, satellite_sync_ps) -> ClockFit:
    """Least-squares line through matched sync-pulse arrival pairs.

    Needs at least two pulses (unrecoverable below that); inputs must be
    sorted ascending.  For full precision supply >= 100 matched pulses.
    """
    g = np.asarray(ground_sync_ps, dtype=float).reshape(-1)
    s = np.asarray(satellite_sync_ps, dtype=float).reshape(-1)
    if g.size != s.size:
        raise ValueError("sync streams must be matched one-to-one")
    if g.size < 2:
        raise ValueError("clock fit is unrecoverable with fewer than 2 sync pulses")
    if np.any(np.diff(g) < 0) or np.any(np.diff(s) < 0):
        raise ValueError("sync tags must be sorted ascending")
    g_mean = g.mean()
    s_mean = s.mean()
    gc = g - g_mean
    slope = float(gc @ (s - s_mean) / (gc @ gc))
    offset = s_mean - slope * g_mean
    residuals = s - (offset + slope * g)
    rms = float(np.sqrt(np.mean(residuals**2)))
    clock = ClockModel(offset_ps=float(offset), drift_ppm=(slope - 1.0) * 1e6)
    return ClockFit(clock=clock, residual_rms_ps=rms, n_pulses=int(g.size))


@dataclass(frozen=True)
class MatchResult:
    pairs: tuple[tuple[int, int], ...]
    n_ground_unmatched: int
    n_satellite_unmatched: int

    @property
    def n_matched(self) -> int:
        return len(self.pairs)


def match_coincidences(
    ground: TimeTagStream,
    satellite: TimeTagStream,
    clock: ClockModel,
    window_ps: float,
) -> MatchResult:
    """Pair up tags within +/- window/2 after mapping the satellite stream
    onto the ground clock.

    Greedy in ground-time order: each ground tag takes the nearest still
    unused satellite tag inside its window (the earlier tag on an exact
    tie); every tag is used at most once.  Deterministic.
    """
    if window_ps <= 0:
        raise ValueError("window must be positive")
    half = window_ps / 2.0
    g = ground.times_ps.astype(float)
    s = clock.ground_time(satellite.times_ps)
    used = np.zeros(s.size, dtype=bool)
    pairs = []
    lo = 0
    for gi, t in enumerate(g):
        while lo < s.size and (s[lo] < t - half or used[lo]):
            lo += 1
        best = -1
        best_dist = np.inf
        j = lo
        while j < s.size and s[j] <= t + half:
            if not used[j]:
                dist = abs(s[j] - t)
                if dist < best_dist:
                    best = j
                    best_dist = dist
            j += 1
        if best >= 0:
            used[best] = True
            pairs.append((gi, best))
    return MatchResult(
        pairs=tuple(pairs),
        n_ground_unmatched=g.size - len(pairs),
        n_satellite_unmatched=s.size - len(pairs),
    )


def accidental_rate(trigger_rate_hz: float, background_rate_hz: float, window_s: float) -> float:
    """Rate of uncorrelated clicks falling inside a trigger's window."""
    if trigger_rate_hz < 0 or background_rate_hz < 0 or window_s < 0:
        raise ValueError("rates and window must be non-negative")
    return trigger_rate_hz * background_rate_hz * window_s
