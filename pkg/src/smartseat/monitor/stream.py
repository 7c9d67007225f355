"""Debounced posture classification over a live frame stream.

The classifier keeps the last k raw model predictions; the emitted label is
their majority vote and an event fires only when that label changes.
Majority ties resolve to the currently emitted label when it is among the
tied ones (stability), otherwise to the lowest class index.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from ..errors import InvalidConfigError
from ..models.base import TrainedModel


@dataclass(frozen=True)
class PostureEvent:
    timestamp_ms: int
    label: str
    confidence: float


class StreamClassifier:
    def __init__(self, model: TrainedModel, debounce_k: int = 5):
        if debounce_k < 1:
            raise InvalidConfigError("debounce_k must be at least 1")
        if model.n_features != 10:
            raise InvalidConfigError(
                f"model consumes {model.n_features} features; ingest frames carry 10"
            )
        self.model = model
        self.debounce_k = debounce_k
        self._window: deque[tuple[str, float]] = deque(maxlen=debounce_k)
        self._emitted: str | None = None

    @property
    def current_label(self) -> str | None:
        return self._emitted

    def _majority(self) -> str:
        counts = Counter(label for label, _ in self._window)
        top = max(counts.values())
        tied = [label for label, c in counts.items() if c == top]
        if len(tied) > 1 and self._emitted in tied:
            return self._emitted
        return min(tied, key=lambda l: self.model.class_names.index(l))

    def push(self, timestamp_ms: int, counts: Sequence[int]) -> PostureEvent | None:
        """Feed one frame; returns an event when the debounced label changes."""
        label, conf = self.model.predict_one_with_confidence(counts)
        self._window.append((label, conf))
        majority = self._majority()
        if majority == self._emitted:
            return None
        self._emitted = majority
        votes = [c for l, c in self._window if l == majority]
        confidence = float(np.mean(votes)) if votes else conf
        return PostureEvent(timestamp_ms=timestamp_ms, label=majority,
                            confidence=confidence)


def classify_stream(
    frames: Iterable[tuple[int, Sequence[int]]],
    model: TrainedModel,
    debounce_k: int = 5,
) -> Iterator[PostureEvent]:
    """Events for a (timestamp_ms, counts) stream; see StreamClassifier."""
    clf = StreamClassifier(model, debounce_k)
    for t, counts in frames:
        event = clf.push(t, counts)
        if event is not None:
            yield event
