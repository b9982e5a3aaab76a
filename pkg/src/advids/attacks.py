"""Inner maximisation: loss-ascent attacks inside an L-inf ball.

All four methods run ``iterations`` ascent steps from a starting point, project
every iterate onto the ball of radius ``epsilon`` around the original row
intersected with the feature box, and return, row by row, the candidate with
the highest loss.  The original row is always a candidate, so no attack can
lower the loss.

* ``dfgsm``  every coordinate steps by ``step_size * sign(grad)``.
* ``rfgsm``  as dfgsm, but starts from a uniform random point in the ball.
* ``bga``    only coordinates with ``|g_j| >= ||g||_2 / sqrt(m)`` step.
* ``bca``    only the coordinate with the largest ``|g_j|`` steps.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .errors import ConfigError, ShapeError
from .nn import input_gradient

METHODS = ("natural", "dfgsm", "rfgsm", "bga", "bca")
ATTACK_METHODS = METHODS[1:]


@dataclass(frozen=True)
class AttackConfig:
    method: str = "dfgsm"
    epsilon: float = 0.1
    step_size: float = 0.01
    iterations: int = 50
    lower_bounds: object = 0.0
    upper_bounds: object = 1.0
    seed: int = 0

    def validate(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown attack method {self.method!r}; expected one of {METHODS}")
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise ConfigError(f"epsilon must be finite and >= 0, got {self.epsilon}")
        if not self.step_size > 0:
            raise ConfigError(f"step_size must be > 0, got {self.step_size}")
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise ConfigError(f"iterations must be an integer >= 1, got {self.iterations}")
        if np.any(np.asarray(self.lower_bounds) > np.asarray(self.upper_bounds)):
            raise ConfigError("lower_bounds must not exceed upper_bounds")
        return self

    def bounds(self, m):
        lo = np.broadcast_to(np.asarray(self.lower_bounds, dtype=np.float64), (m,))
        hi = np.broadcast_to(np.asarray(self.upper_bounds, dtype=np.float64), (m,))
        return np.ascontiguousarray(lo), np.ascontiguousarray(hi)

    def with_method(self, method):
        return replace(self, method=method)


@dataclass
class AttackResult:
    x_adv: np.ndarray
    natural_loss: float
    adversarial_loss: float
    changed: np.ndarray
    iterate_count: int
    row_natural_loss: np.ndarray = None
    row_adversarial_loss: np.ndarray = None


def _prepare(net, x, y, cfg):
    cfg.validate()
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.input_dim:
        raise ShapeError(f"expected a batch of shape (n, {net.input_dim}), got {x.shape}")
    y = np.asarray(y)
    if y.shape != (x.shape[0],):
        raise ShapeError(f"expected {x.shape[0]} labels, got shape {y.shape}")
    return x, y


def _result(x0, best_x, loss0, best_loss, iterations):
    return AttackResult(
        x_adv=best_x,
        natural_loss=float(np.mean(loss0)) if len(loss0) else 0.0,
        adversarial_loss=float(np.mean(best_loss)) if len(best_loss) else 0.0,
        changed=np.any(best_x != x0, axis=1),
        iterate_count=iterations,
        row_natural_loss=loss0,
        row_adversarial_loss=best_loss,
    )


def _ascend(net, x0, y, cfg, step_fn, start=None):
    lo, hi = cfg.bounds(x0.shape[1])
    eps, step = float(cfg.epsilon), float(cfg.step_size)
    loss0, grad = input_gradient(net, x0, y)
    best_x, best_loss = x0.copy(), loss0.copy()
    cur = x0
    if start is not None:
        cur = kernels.project(start, x0, eps, lo, hi)
        cur_loss, grad = input_gradient(net, cur, y)
        kernels.keep_best(best_x, best_loss, cur, cur_loss)
    for _ in range(int(cfg.iterations)):
        cur = step_fn(cur, x0, np.ascontiguousarray(grad), step, eps, lo, hi)
        cur_loss, grad = input_gradient(net, cur, y)
        kernels.keep_best(best_x, best_loss, cur, cur_loss)
    return _result(x0, best_x, loss0, best_loss, int(cfg.iterations))


def natural(x):
    return np.array(x, dtype=np.float64, copy=True)


def random_start(x, epsilon, seed, row_offset=0):
    """Uniform draw from the L-inf ball around each row.

    Row ``i`` uses its own stream keyed by ``(seed, row_offset + i)``, so a
    batch split into pieces draws the same noise as the whole batch.
    """
    n, m = x.shape
    noise = np.empty((n, m))
    for i in range(n):
        noise[i] = np.random.default_rng([int(seed), int(row_offset) + i]).uniform(-1.0, 1.0, m)
    return x + epsilon * noise


def dfgsm_s(net, x, y, cfg):
    x, y = _prepare(net, x, y, cfg)
    return _ascend(net, x, y, cfg, kernels.sign_step)


def rfgsm_s(net, x, y, cfg, row_offset=0):
    x, y = _prepare(net, x, y, cfg)
    start = random_start(x, float(cfg.epsilon), cfg.seed, row_offset)
    return _ascend(net, x, y, cfg, kernels.sign_step, start=start)


def bga_s(net, x, y, cfg):
    x, y = _prepare(net, x, y, cfg)
    return _ascend(net, x, y, cfg, kernels.bga_step)


def bca_s(net, x, y, cfg):
    x, y = _prepare(net, x, y, cfg)
    return _ascend(net, x, y, cfg, kernels.bca_step)


def inner_maximize(net, attack_batch, labels, cfg, row_offset=0):
    """Dispatch on ``cfg.method`` and return a feasible adversarial batch."""
    x, y = _prepare(net, attack_batch, labels, cfg)
    if cfg.method == "natural":
        loss0, _ = input_gradient(net, x, y)
        return _result(x, natural(x), loss0, loss0.copy(), 0)
    if cfg.method == "rfgsm":
        return rfgsm_s(net, x, y, cfg, row_offset=row_offset)
    return {"dfgsm": dfgsm_s, "bga": bga_s, "bca": bca_s}[cfg.method](net, x, y, cfg)
