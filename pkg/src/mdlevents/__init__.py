"""Multi-timescale load event detection for 1 Hz aggregate power data."""

from .model import DetectionConfig, Event, EventFeatures, PowerSeries, Stage, event_features, events_overlap

__all__ = [
    "DetectionConfig",
    "Event",
    "EventFeatures",
    "PowerSeries",
    "Stage",
    "event_features",
    "events_overlap",
]
