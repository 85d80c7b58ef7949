"""Frequency unit helpers.

All frequencies are angular (rad/s) internally. User-facing values are
ordinary kHz/MHz, multiplied by 2*pi on ingestion.
"""

import math

TWO_PI = 2.0 * math.pi


def khz(value):
    """Ordinary kHz -> angular frequency in rad/s."""
    return TWO_PI * 1e3 * value


def mhz(value):
    """Ordinary MHz -> angular frequency in rad/s."""
    return TWO_PI * 1e6 * value


def to_khz(omega):
    """Angular frequency in rad/s -> ordinary kHz."""
    return omega / (TWO_PI * 1e3)


def to_mhz(omega):
    return omega / (TWO_PI * 1e6)
