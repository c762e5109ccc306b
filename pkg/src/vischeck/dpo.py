"""Direct preference optimization loss on (chosen, rejected) log-probabilities.

The implicit reward is beta * (logp_policy - logp_ref); the partition term is
never computed because it cancels in the pairwise margin. The loss uses a
numerically stable softplus, safe for margins up to about 1e4 in magnitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

from .errors import EmptyBatch

DEFAULT_BETA = 0.1


@dataclass(frozen=True)
class DpoInputs:
    logp_policy_pref: float
    logp_ref_pref: float
    logp_policy_rej: float
    logp_ref_rej: float
    beta: float = DEFAULT_BETA

    def __post_init__(self):
        for v in (self.logp_policy_pref, self.logp_ref_pref,
                  self.logp_policy_rej, self.logp_ref_rej, self.beta):
            if not math.isfinite(v):
                raise ValueError("DPO inputs must be finite")
        if self.beta <= 0:
            raise ValueError("beta must be > 0")

    @property
    def margin(self) -> float:
        return ((self.logp_policy_pref - self.logp_ref_pref)
                - (self.logp_policy_rej - self.logp_ref_rej))


def reward(logp_policy: float, logp_ref: float, beta: float = DEFAULT_BETA) -> float:
    """Implicit reward up to the constant partition term."""
    return beta * (logp_policy - logp_ref)


def _softplus(x: float) -> float:
    # log(1 + e^x) without overflow
    if x > 0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def dpo_loss(inputs: DpoInputs) -> float:
    """-log sigmoid(beta * margin); ln 2 at zero margin."""
    return _softplus(-inputs.beta * inputs.margin)


def dpo_grad(inputs: DpoInputs) -> Tuple[float, float]:
    """(d loss / d logp_policy_pref, d loss / d logp_policy_rej)."""
    s = _sigmoid(-inputs.beta * inputs.margin)
    return (-inputs.beta * s, inputs.beta * s)


def batch_loss(batch: Sequence[DpoInputs]) -> float:
    if not batch:
        raise EmptyBatch("batch_loss needs at least one item")
    return sum(dpo_loss(b) for b in batch) / len(batch)
