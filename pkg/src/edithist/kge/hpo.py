"""Bounded random search over training hyperparameters."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class Range:
    """Numeric range; ``log`` samples uniformly in log space, ``integer`` rounds."""
    low: float
    high: float
    log: bool = False
    integer: bool = False

    def sample(self, rng: np.random.Generator):
        if self.log:
            x = math.exp(rng.uniform(math.log(self.low), math.log(self.high)))
        else:
            x = rng.uniform(self.low, self.high)
        if self.integer:
            return int(min(max(round(x), self.low), self.high))
        return float(x)


@dataclass
class Trial:
    index: int
    params: dict
    score: float


def sample_params(space: dict, rng: np.random.Generator) -> dict:
    """Draw one point; list/tuple values are categorical choices."""
    out = {}
    for name in sorted(space):
        spec = space[name]
        if isinstance(spec, Range):
            out[name] = spec.sample(rng)
        elif isinstance(spec, (list, tuple)):
            out[name] = spec[int(rng.integers(len(spec)))]
        else:
            out[name] = spec
    return out


def random_search(space: dict, budget: int, objective: Callable[[dict], float], seed: int = 42,
                  log_path=None):
    """Evaluate ``budget`` random points; return ``(best_params, trials)``.

    The first trial wins ties. When ``log_path`` is given every trial is written
    there as JSON lines.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(seed)
    trials = []
    best = None
    fh = None
    if log_path is not None:
        Path(log_path).parent.mkdir(parents=True, exist_ok=True)
        fh = open(log_path, "w", encoding="utf-8")
    try:
        for i in range(budget):
            params = sample_params(space, rng)
            score = float(objective(params))
            trial = Trial(i, params, score)
            trials.append(trial)
            if fh:
                fh.write(json.dumps({"trial": i, "params": params, "score": score}, sort_keys=True) + "\n")
            if best is None or score > best.score:
                best = trial
    finally:
        if fh:
            fh.close()
    return best.params, trials
