"""Threshold anomaly detector working on the disclosed residue.

This module deliberately imports nothing that can decrypt: it sees the
residue ciphertext and the public scale factors, never a secret key.
"""
from __future__ import annotations

from dataclasses import dataclass

from .codec import Scales, restore_residue
from .encryptor import disclosed_residue
from .lwe import Ciphertext


def detect(r_restored: float, threshold: float) -> bool:
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    return abs(r_restored) > threshold


@dataclass
class AnomalyDetector:
    scales: Scales
    q: int
    threshold: float
    alarms: int = 0

    def observe(self, rct: Ciphertext) -> tuple[float, bool]:
        """Restore the residue from ``rct`` and compare it with the threshold."""
        r = restore_residue(disclosed_residue(rct), self.scales, self.q)
        alarm = detect(r, self.threshold)
        self.alarms += alarm
        return r, alarm
