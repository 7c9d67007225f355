"""Smart-seat toolkit: synthetic pressure sensing, posture classification,
PPG heart-rate processing, and real-time monitoring."""

__version__ = "0.1.0"
