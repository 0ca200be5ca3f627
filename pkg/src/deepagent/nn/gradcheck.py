"""Finite-difference validation of analytic gradients.

Runs in train mode so batch statistics and dropout paths are exercised;
dropout masks are pinned for the duration of the sweep, otherwise the
central differences would sample different noise on every evaluation.
Only meaningful in 64-bit precision.
"""

from __future__ import annotations

import contextlib

import numpy as np

from deepagent.nn.layers import Dropout, Sequential


@contextlib.contextmanager
def _pinned_dropout(model: Sequential):
    drops = [l for l in model.layers if isinstance(l, Dropout)]
    for d in drops:
        d.pin = True
    try:
        yield
    finally:
        for d in drops:
            d.pin = False
            d._pinned_mask = None


def gradient_check(model: Sequential, loss_fn, x: np.ndarray, y,
                   h: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn(prediction, y)`` must return ``(loss, dloss_dprediction)``.
    The relative error per parameter entry is
    ``|analytic - fd| / max(|analytic|, |fd|, 1e-8)``.
    """
    with _pinned_dropout(model):
        out = model.forward(x, train=True)
        _, dout = loss_fn(out, y)
        model.zero_grad()
        model.backward(dout)
        analytic = [p.grad.copy() for p in model.params()]

        worst = 0.0
        for param, agrad in zip(model.params(), analytic):
            flat = param.value.reshape(-1)
            aflat = agrad.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                lp, _ = loss_fn(model.forward(x, train=True), y)
                flat[i] = orig - h
                lm, _ = loss_fn(model.forward(x, train=True), y)
                flat[i] = orig
                fd = (lp - lm) / (2.0 * h)
                denom = max(abs(aflat[i]), abs(fd), 1e-8)
                worst = max(worst, abs(aflat[i] - fd) / denom)
    return worst
