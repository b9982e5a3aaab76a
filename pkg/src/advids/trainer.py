"""Outer minimisation: natural and adversarial training with Adam."""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .attacks import METHODS, AttackConfig, inner_maximize
from .errors import ConfigError, DataError, NumericInputError, TrainingDivergedError
from .metrics import VariantCounter
from .nn import AdamState, adam_step, backward, forward, init_network, loss_nll, predict
from .seeding import derive_seed

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 100
    learning_rate: float = 0.01
    attack: AttackConfig = field(default_factory=lambda: AttackConfig(method="natural"))
    seed: int = 0
    convergence_patience: int = 10
    augment: bool = False

    def validate(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        self.attack.validate()
        return self


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)
    # cumulative number of distinct (sample, variant) pairs seen so far
    distinct_adversarials: list = field(default_factory=list)
    attack_calls: list = field(default_factory=list)
    batches_with_attack_rows: list = field(default_factory=list)
    adam_steps: list = field(default_factory=list)
    n_attack_train: int = 0
    benign_rows_modified: int = 0
    final_epoch: int = -1

    def __len__(self):
        return len(self.train_loss)

    def rows(self):
        for i in range(len(self)):
            yield (i, self.train_loss[i], self.val_loss[i], self.val_acc[i], self.distinct_adversarials[i])

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("epoch,train_loss,val_loss,val_acc,distinct_adversarials\n")
            for epoch, tl, vl, va, d in self.rows():
                fh.write(f"{epoch},{tl!r},{vl!r},{va!r},{d}\n")


def _validation(net, X, y):
    if len(y) == 0:
        return float("nan"), float("nan")
    log_probs, _ = forward(net, X)
    return loss_nll(log_probs, y), float(np.mean(np.argmax(log_probs, axis=1) == y))


def train_model(dataset, net_init, cfg, log_every=0):
    """Train a copy of ``net_init`` on the train split.

    With a non-natural attack, the attack rows of every batch are replaced by
    (or, with ``cfg.augment``, supplemented with) their inner-maximisation
    output before the Adam step.  Benign rows are never touched.  Training
    stops after ``cfg.epochs`` or once validation loss has not improved for
    ``cfg.convergence_patience`` epochs.
    """
    cfg.validate()
    X, y = dataset.part("train")
    if len(y) == 0:
        raise DataError("train split is empty")
    X_val, y_val = dataset.part("val")
    net = net_init.copy()
    state = AdamState.for_net(net)
    adversarial = cfg.attack.method != "natural"
    history = TrainHistory(n_attack_train=int(np.sum(y == 1)))
    seen = VariantCounter()
    best_val, stale = np.inf, 0

    for epoch in range(cfg.epochs):
        order = np.random.default_rng(derive_seed(cfg.seed, "shuffle", epoch)).permutation(len(y))
        loss_sum, n_seen, calls, with_attack, steps = 0.0, 0, 0, 0, 0
        for b, start in enumerate(range(0, len(y), cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            xb, yb = X[idx], y[idx]
            att = yb == 1
            variants = xb[att]
            if att.any():
                with_attack += 1
            if adversarial and att.any():
                acfg = replace(cfg.attack, seed=derive_seed(cfg.attack.seed, "attack", epoch, b))
                variants = inner_maximize(net, xb[att], yb[att], acfg).x_adv
                calls += 1
                if cfg.augment:
                    xb = np.vstack([xb, variants])
                    yb = np.r_[yb, np.ones(len(variants), dtype=yb.dtype)]
                else:
                    xb = xb.copy()
                    xb[att] = variants
                    history.benign_rows_modified += int(np.any(xb[~att] != X[idx][~att], axis=1).sum())
            seen.add(idx[att], variants)

            log_probs, trace = forward(net, xb)
            loss = loss_nll(log_probs, yb)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch)
            grads, _ = backward(net, trace, yb)
            try:
                adam_step(net, grads, state, cfg.learning_rate)
            except NumericInputError as exc:
                raise TrainingDivergedError(epoch, f"training diverged at epoch {epoch}: {exc}") from exc
            steps += 1
            loss_sum += loss * len(yb)
            n_seen += len(yb)

        val_loss, val_acc = _validation(net, X_val, y_val)
        history.train_loss.append(loss_sum / n_seen)
        history.val_loss.append(val_loss)
        history.val_acc.append(val_acc)
        history.distinct_adversarials.append(len(seen))
        history.attack_calls.append(calls)
        history.batches_with_attack_rows.append(with_attack)
        history.adam_steps.append(steps)
        history.final_epoch = epoch
        if log_every and (epoch % log_every == 0 or epoch == cfg.epochs - 1):
            log.info(
                "%s epoch %d train_loss %.5f val_loss %.5f val_acc %.4f",
                cfg.attack.method, epoch, history.train_loss[-1], val_loss, val_acc,
            )

        if cfg.convergence_patience > 0 and np.isfinite(val_loss):
            if val_loss < best_val:
                best_val, stale = val_loss, 0
            else:
                stale += 1
                if stale >= cfg.convergence_patience:
                    break
    return net, history


def default_layer_sizes(n_features, hidden=(300, 100, 40)):
    return [int(n_features), *hidden, 2]


def train_all_five(dataset, base_cfg, layer_sizes=None, net_init=None, log_every=0):
    """Natural plus the four adversarial models, same seed and starting weights."""
    if net_init is None:
        sizes = layer_sizes or default_layer_sizes(dataset.n_features)
        net_init = init_network(sizes, derive_seed(base_cfg.seed, "init"))
    models = {}
    for method in METHODS:
        cfg = replace(base_cfg, attack=replace(base_cfg.attack, method=method))
        models[method] = train_model(dataset, net_init, cfg, log_every=log_every)
    return models


__all__ = ["TrainConfig", "TrainHistory", "train_model", "train_all_five", "default_layer_sizes", "predict"]
