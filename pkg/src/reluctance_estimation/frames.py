"""Estimate records shared by both estimators and both kernel backends."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class Quality(str, enum.Enum):
    """Confidence-interval verdict on the two current samples behind an estimate."""

    HQ = "HQ"
    LQ = "LQ"


class EstimateFrame(NamedTuple):
    """Estimates published for one sample."""

    r_hat: float
    l_hat: float
    lambda_hat: float
    quality: Quality
    t: float


@dataclass
class EstimateSeries:
    """Column-wise estimates for a whole record (one row per published frame)."""

    t: np.ndarray
    r_hat: np.ndarray
    l_hat: np.ndarray
    lambda_hat: np.ndarray
    hq: np.ndarray

    def __len__(self):
        return len(self.t)

    def frames(self):
        for t, r, l, lam, hq in zip(self.t, self.r_hat, self.l_hat, self.lambda_hat, self.hq):
            yield EstimateFrame(float(r), float(l), float(lam), Quality.HQ if hq else Quality.LQ, float(t))

    def window(self, mask) -> EstimateSeries:
        return EstimateSeries(self.t[mask], self.r_hat[mask], self.l_hat[mask],
                              self.lambda_hat[mask], self.hq[mask])

    @classmethod
    def from_kernel_output(cls, t, r, l, lam, hq_code):
        """Drop registration rows (``hq_code == -1``) from batch kernel output."""
        keep = hq_code >= 0
        return cls(np.asarray(t, dtype=np.float64)[keep], r[keep], l[keep], lam[keep], hq_code[keep] == 1)
