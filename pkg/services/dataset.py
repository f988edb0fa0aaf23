"""
CASAS-style smart-home logs: parsing, rasterization into TraceDataset form,
sensor-subset filtering and day-based train/test splits.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from services.simulator import OccupantSeries, TraceDataset
from utils.file_utils import iter_text_lines

logger = logging.getLogger(__name__)

MOTION_VALUES = ("ON", "OFF")
OTHER_LABEL = "Other"
_TIME_FORMATS = ("%Y-%m-%d %H:%M:%S.%f", "%Y-%m-%d %H:%M:%S")


class DatasetError(Exception):
    """Raised when a dataset operation gets invalid input"""
    pass


@dataclass(frozen=True)
class RawEvent:
    timestamp: datetime
    sensor_id: str
    value: str
    annotation: Optional[Tuple[str, str]] = None


@dataclass(frozen=True)
class SensorInventory:
    """Motion sensors in first-appearance order"""
    sensor_ids: Tuple[str, ...]
    positions: Dict[str, Tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.sensor_ids)) != len(self.sensor_ids):
            raise DatasetError("sensor ids must be unique")

    @property
    def size(self) -> int:
        return len(self.sensor_ids)

    def index(self, sensor_id: str) -> int:
        return self.sensor_ids.index(sensor_id)


@dataclass
class ParseDiagnostics:
    lines: int = 0
    events: int = 0
    blank: int = 0
    malformed: int = 0
    dropped: int = 0
    # annotations carried by dropped (non-motion) lines
    orphan_annotations: List[Tuple[datetime, str, str]] = field(default_factory=list)

    def as_dict(self) -> Dict[str, int]:
        return {
            "lines": self.lines,
            "events": self.events,
            "blank": self.blank,
            "malformed": self.malformed,
            "dropped": self.dropped,
        }


def _parse_timestamp(date: str, time: str) -> Optional[datetime]:
    text = f"{date} {time}"
    for fmt in _TIME_FORMATS:
        try:
            return datetime.strptime(text, fmt)
        except ValueError:
            continue
    return None


def parse_casas(lines: Iterable[str]) -> Tuple[List[RawEvent], SensorInventory, ParseDiagnostics]:
    """
    Parse `DATE TIME SENSOR VALUE [ACTIVITY begin|end]` lines.

    Bad lines are counted in the diagnostics, never raised. Only motion
    sensors (ids starting with M, values ON/OFF) become events.
    """
    events: List[RawEvent] = []
    order: Dict[str, None] = {}
    diag = ParseDiagnostics()

    for line in lines:
        diag.lines += 1
        tokens = line.split()
        if not tokens:
            diag.blank += 1
            continue
        if len(tokens) < 4 or len(tokens) == 5:
            diag.malformed += 1
            continue
        timestamp = _parse_timestamp(tokens[0], tokens[1])
        if timestamp is None:
            diag.malformed += 1
            continue

        annotation = None
        if len(tokens) >= 6:
            marker = tokens[-1].lower()
            if marker not in ("begin", "end"):
                diag.malformed += 1
                continue
            annotation = (" ".join(tokens[4:-1]).strip(), marker)

        sensor, value = tokens[2], tokens[3].upper()
        if not sensor.startswith("M"):
            diag.dropped += 1
            if annotation is not None:
                diag.orphan_annotations.append((timestamp, annotation[0], annotation[1]))
            continue
        if value not in MOTION_VALUES:
            diag.malformed += 1
            continue

        events.append(RawEvent(timestamp, sensor, value, annotation))
        order.setdefault(sensor, None)

    diag.events = len(events)
    if diag.lines == 0:
        logger.warning("casas input is empty")
    elif diag.malformed or diag.dropped:
        logger.warning("casas parse lines=%d events=%d malformed=%d dropped=%d",
                       diag.lines, diag.events, diag.malformed, diag.dropped)
    return events, SensorInventory(tuple(order)), diag


def load_casas_file(path: Union[str, Path]) -> Tuple[List[RawEvent], SensorInventory, ParseDiagnostics]:
    return parse_casas(iter_text_lines(path))


def serialize_casas(events: Iterable[RawEvent]) -> Iterator[str]:
    """Inverse of parse_casas for motion events"""
    for event in events:
        stamp = event.timestamp.strftime("%Y-%m-%d %H:%M:%S.%f")
        line = f"{stamp} {event.sensor_id} {event.value}"
        if event.annotation is not None:
            line += f" {event.annotation[0]} {event.annotation[1]}"
        yield line


def _intervals(marks: Sequence[Tuple[datetime, str, str]], last: datetime) -> List[Tuple[datetime, datetime, str]]:
    """Pair begin/end marks per activity; an unclosed begin runs to the end of the log"""
    open_marks: Dict[str, List[datetime]] = {}
    intervals = []
    for when, activity, marker in sorted(marks, key=lambda m: m[0]):
        if marker == "begin":
            open_marks.setdefault(activity, []).append(when)
        elif open_marks.get(activity):
            intervals.append((open_marks[activity].pop(), when, activity))
    for activity, starts in open_marks.items():
        intervals.extend((start, last, activity) for start in starts)
    return sorted(intervals, key=lambda i: i[0])


def rasterize(
    events: Sequence[RawEvent],
    inventory: SensorInventory,
    period_seconds: float = 3.0,
    extra_annotations: Sequence[Tuple[datetime, str, str]] = (),
    unlabeled: str = "other",
) -> TraceDataset:
    """
    Discretize the log into fixed windows of `period_seconds`.

    Bit j of a window is 1 iff sensor j turned ON inside it, or its latest
    event before the window was ON and no OFF falls inside the window. The
    label is the annotated activity covering the window start, else Other.
    Windows are aligned to midnight of the first day.
    """
    if not events:
        raise DatasetError("cannot rasterize an empty event list")

    events = sorted(events, key=lambda e: e.timestamp)
    first, last = events[0].timestamp, events[-1].timestamp
    midnight = datetime(first.year, first.month, first.day)
    origin = midnight + timedelta(seconds=math.floor((first - midnight).total_seconds() / period_seconds) * period_seconds)
    n_windows = int(math.floor((last - origin).total_seconds() / period_seconds)) + 1
    starts = np.arange(n_windows) * period_seconds

    bits = np.zeros((n_windows, inventory.size), dtype=np.uint8)
    per_sensor: Dict[str, List[RawEvent]] = {}
    for event in events:
        per_sensor.setdefault(event.sensor_id, []).append(event)
    for j, sensor in enumerate(inventory.sensor_ids):
        sensor_events = per_sensor.get(sensor, [])
        if not sensor_events:
            continue
        seconds = np.array([(e.timestamp - origin).total_seconds() for e in sensor_events])
        is_on = np.array([e.value == "ON" for e in sensor_events])
        window = np.floor(seconds / period_seconds).astype(int)
        on_inside = np.bincount(window[is_on], minlength=n_windows)[:n_windows] > 0
        off_inside = np.bincount(window[~is_on], minlength=n_windows)[:n_windows] > 0
        latest = np.searchsorted(seconds, starts, side="left") - 1
        on_before = np.where(latest >= 0, is_on[np.clip(latest, 0, None)], False)
        bits[:, j] = on_inside | (on_before & ~off_inside)

    marks = [(e.timestamp, e.annotation[0], e.annotation[1]) for e in events if e.annotation is not None]
    marks.extend(extra_annotations)
    intervals = _intervals(marks, last)
    class_names = list(dict.fromkeys(activity for _, _, activity in intervals))
    labels = np.full(n_windows, -1, dtype=int)
    for begin, end, activity in intervals:
        lo = max(0, math.ceil((begin - origin).total_seconds() / period_seconds))
        hi = min(n_windows - 1, math.floor((end - origin).total_seconds() / period_seconds))
        if lo <= hi:
            labels[lo:hi + 1] = class_names.index(activity)

    keep = np.ones(n_windows, dtype=bool)
    if (labels < 0).any():
        if unlabeled == "drop":
            keep = labels >= 0
        else:
            if OTHER_LABEL not in class_names:
                class_names.append(OTHER_LABEL)
            labels[labels < 0] = class_names.index(OTHER_LABEL)
    if not keep.any():
        raise DatasetError("no annotated windows left after dropping unlabeled time")

    series = OccupantSeries(times=starts[keep], bits=bits[keep], labels=labels[keep])
    return TraceDataset(
        series=(series,),
        sensor_names=inventory.sensor_ids,
        class_names=tuple(class_names),
        origin=origin,
    )


def filter_sensors(ds: TraceDataset, keep: Iterable[int]) -> TraceDataset:
    """Project the dataset onto a subset of sensor columns (original order)"""
    columns = sorted(set(int(k) for k in keep))
    if not columns:
        raise DatasetError("sensor subset must not be empty")
    bad = [k for k in columns if not 0 <= k < ds.sensor_count]
    if bad:
        raise DatasetError(f"sensor indices {bad} out of range [0, {ds.sensor_count})")
    return replace(
        ds,
        series=tuple(replace(s, bits=s.bits[:, columns]) for s in ds.series),
        sensor_names=tuple(ds.sensor_names[k] for k in columns),
    )


def day_index(ds: TraceDataset, series: OccupantSeries) -> np.ndarray:
    """Calendar-day number of every window relative to the dataset origin's day"""
    origin = ds.origin or datetime(1970, 1, 1)
    offset = (origin - datetime(origin.year, origin.month, origin.day)).total_seconds()
    return np.floor((series.times + offset) / 86400.0).astype(int)


def split_by_days(ds: TraceDataset, train_fraction: float = 0.7) -> Tuple[TraceDataset, TraceDataset]:
    """
    First ceil(train_fraction * days) calendar days go to train, the rest to test.
    """
    if ds.occupants != 1:
        raise DatasetError("day split expects a single-occupant dataset")
    series = ds.series[0]
    days = day_index(ds, series)
    distinct = np.unique(days)
    if len(distinct) < 2:
        raise DatasetError("day split needs a dataset spanning at least two calendar days")
    n_train = min(math.ceil(round(train_fraction * len(distinct), 9)), len(distinct) - 1)
    in_train = days < distinct[n_train]

    def part(mask):
        return replace(ds, series=(OccupantSeries(
            times=series.times[mask], bits=series.bits[mask], labels=series.labels[mask],
        ),))

    logger.info("day split days=%d train_days=%d", len(distinct), n_train)
    return part(in_train), part(~in_train)
