"""Expected packet delivery delay (EPDD) with an optional mid-path TA.

A TA at node ``n`` splits the path into a source->TA segment ``(d1, q1)`` and
a TA->destination segment ``(d2, q2)``.  A packet lost ``a`` times on the
first segment and ``b`` times on the second takes::

    delta(a, b) = (m*a + 1)*d1 + (m*b + 1)*d2

where ``m`` is the retransmission-timeout multiplier (timeout = m one-way
segment delays).  Losses are independent per traversal, so::

    P(a, b) = q1**a (1 - q1) * q2**b (1 - q2)

and the EPDD is the sum of ``P * delta`` over all ``(a, b)``.  With the
default ``m = 2`` a single loss without a TA triples the one-way delay.

Without a TA (the fictive node) the whole path is a single segment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from tars.paths import PathCandidate, segment_stats


@dataclass(frozen=True)
class DelayModelConfig:
    tail_epsilon: float = 1e-12
    max_retx: int = 64
    rto_multiplier: float = 2.0

    def __post_init__(self):
        if not 0 < self.tail_epsilon < 1:
            raise ValueError("tail_epsilon must lie in (0, 1)")
        if self.max_retx < 1:
            raise ValueError("max_retx must be >= 1")
        if self.rto_multiplier < 1:
            raise ValueError("rto_multiplier must be >= 1")


DEFAULT_DELAY_MODEL = DelayModelConfig()


class LossSplit(NamedTuple):
    a: int  # losses source -> TA
    b: int  # losses TA -> destination


def delta(split: LossSplit, d1: float, d2: float, cfg: DelayModelConfig = DEFAULT_DELAY_MODEL) -> float:
    m = cfg.rto_multiplier
    return (m * split.a + 1) * d1 + (m * split.b + 1) * d2


def joint_prob(split: LossSplit, q1: float, q2: float) -> float:
    return q1 ** split.a * (1 - q1) * q2 ** split.b * (1 - q2)


def _retx_limit(q: float, cfg: DelayModelConfig) -> int:
    """Smallest A with tail mass q**(A+1) < tail_epsilon, capped at max_retx."""
    if q <= 0.0:
        return 0
    a = math.ceil(math.log(cfg.tail_epsilon) / math.log(q)) - 1
    while q ** (a + 1) >= cfg.tail_epsilon:
        a += 1
    return max(0, min(a, cfg.max_retx))


def epdd_segments(d1: float, q1: float, d2: float, q2: float, cfg: DelayModelConfig = DEFAULT_DELAY_MODEL) -> float:
    """Truncated double sum over ``(a, b)`` for explicit segment aggregates."""
    m = cfg.rto_multiplier
    a = np.arange(_retx_limit(q1, cfg) + 1)
    b = np.arange(_retx_limit(q2, cfg) + 1)
    pa = q1 ** a * (1 - q1)
    pb = q2 ** b * (1 - q2)
    cost = (m * a[:, None] + 1) * d1 + (m * b[None, :] + 1) * d2
    return float(np.sum(np.outer(pa, pb) * cost))


def epdd(p: PathCandidate, ta: int, cfg: DelayModelConfig = DEFAULT_DELAY_MODEL) -> float:
    """EPDD of ``p`` with the TA at ``ta`` (or ``p.fictive_id`` for no TA).

    Truncation error is bounded by ``total_delay * tail_epsilon * C`` with
    ``C = 2 * (m * (A + 2) + 1) / (1 - q)`` for the per-segment limit ``A``
    and the larger segment loss ``q``, as long as ``max_retx`` is not the
    binding limit.
    """
    return epdd_segments(*segment_stats(p, ta), cfg)


def epdd_closed_form(p: PathCandidate, ta: int, cfg: DelayModelConfig = DEFAULT_DELAY_MODEL) -> float:
    d1, q1, d2, q2 = segment_stats(p, ta)
    return closed_form_segments(d1, q1, d2, q2, cfg)


def closed_form_segments(d1, q1, d2, q2, cfg: DelayModelConfig = DEFAULT_DELAY_MODEL) -> float:
    # E[a] = q / (1 - q) for a geometric loss count
    m = cfg.rto_multiplier
    return d1 * (1 + m * q1 / (1 - q1)) + d2 * (1 + m * q2 / (1 - q2))


def monte_carlo_epdd(
    p: PathCandidate,
    ta: int,
    n_packets: int,
    seed=None,
    cfg: DelayModelConfig = DEFAULT_DELAY_MODEL,
) -> tuple[float, float]:
    """Simulate per-packet loss counts and return ``(mean, standard error)`` in ms."""
    if n_packets < 1:
        raise ValueError("n_packets must be >= 1")
    d1, q1, d2, q2 = segment_stats(p, ta)
    rng = np.random.default_rng(seed)
    # geometric() counts trials up to the first success; losses are trials - 1
    a = rng.geometric(1.0 - q1, size=n_packets) - 1
    b = rng.geometric(1.0 - q2, size=n_packets) - 1
    m = cfg.rto_multiplier
    samples = (m * a + 1) * d1 + (m * b + 1) * d2
    mean = float(samples.mean())
    if n_packets == 1:
        return mean, 0.0
    return mean, float(samples.std(ddof=1) / math.sqrt(n_packets))
