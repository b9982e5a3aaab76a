"""Confusion-based metrics, evasion rate, covering number and the model x attack matrix."""

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from . import kernels
from .attacks import ATTACK_METHODS, inner_maximize
from .errors import DataError
from .nn import forward

# rows attacked per inner_maximize call during evaluation
EVAL_CHUNK = 512
# rounding applied before two adversarial rows are compared for identity
VARIANT_SCALE = 1e6


def _ratio(num, den):
    return num / den if den else 0.0


@dataclass
class EvalReport:
    tp: int
    fp: int
    tn: int
    fn: int
    auc: float = None

    @property
    def n(self):
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self):
        return _ratio(self.tp + self.tn, self.n)

    @property
    def fpr(self):
        return _ratio(self.fp, self.fp + self.tn)

    @property
    def fnr(self):
        return _ratio(self.fn, self.fn + self.tp)

    @property
    def evasion_rate(self):
        """FNR; only an evasion rate when the attack rows were perturbed."""
        return self.fnr


def confusion(y_true, y_pred):
    y_true, y_pred = np.asarray(y_true), np.asarray(y_pred)
    return (
        int(np.sum((y_true == 1) & (y_pred == 1))),
        int(np.sum((y_true == 0) & (y_pred == 1))),
        int(np.sum((y_true == 0) & (y_pred == 0))),
        int(np.sum((y_true == 1) & (y_pred == 0))),
    )


def auc_score(y_true, scores):
    """Mann-Whitney AUC with average ranks for ties; ``None`` if a class is absent."""
    y_true = np.asarray(y_true)
    n_pos, n_neg = int(np.sum(y_true == 1)), int(np.sum(y_true == 0))
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(scores)
    return float((ranks[y_true == 1].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def evaluate(net, X, y, with_auc=False):
    y = np.asarray(y)
    if len(y) == 0:
        raise DataError("cannot evaluate on an empty split")
    log_probs, _ = forward(net, X)
    tp, fp, tn, fn = confusion(y, np.argmax(log_probs, axis=1))
    auc = auc_score(y, log_probs[:, 1]) if with_auc else None
    return EvalReport(tp, fp, tn, fn, auc)


def perturb(net, attack_cfg, X_attack):
    """Attack every row of an attack-only matrix, in chunks with consistent per-row seeding."""
    X_attack = np.asarray(X_attack, dtype=np.float64)
    ones = np.ones(len(X_attack), dtype=np.int64)
    out = np.empty_like(X_attack)
    for start in range(0, len(X_attack), EVAL_CHUNK):
        stop = start + EVAL_CHUNK
        res = inner_maximize(net, X_attack[start:stop], ones[start:stop], attack_cfg, row_offset=start)
        out[start:stop] = res.x_adv
    return out


def evasion_rate(net, attack_cfg, X_attack, y_attack=None):
    """Percentage of perturbed attack rows classified benign."""
    if y_attack is not None and np.any(np.asarray(y_attack) != 1):
        raise DataError("evasion rate needs attack-labelled rows only")
    if len(X_attack) == 0:
        raise DataError("cannot compute an evasion rate on an empty attack set")
    X_adv = perturb(net, attack_cfg, X_attack)
    return 100.0 * evaluate(net, X_adv, np.ones(len(X_adv), dtype=np.int64)).fnr


class VariantCounter:
    """Counts distinct (original row id, variant) pairs, variants rounded to 1e-6."""

    def __init__(self):
        self._seen = set()

    def add(self, ids, variants):
        variants = np.ascontiguousarray(variants, dtype=np.float64)
        if len(variants):
            ids = np.ascontiguousarray(ids, dtype=np.int64)
            self._seen.update(kernels.row_hashes(variants, ids, VARIANT_SCALE).tolist())

    def __len__(self):
        return len(self._seen)


def covering_number(history, n_attack_train=None):
    """Distinct adversarial variants per original attack training row, over all epochs."""
    n = history.n_attack_train if n_attack_train is None else n_attack_train
    if not n:
        raise DataError("covering number needs at least one attack training row")
    if not len(history.distinct_adversarials):
        raise DataError("covering number needs a non-empty history")
    return history.distinct_adversarials[-1] / n


def class_margin(X, y):
    """L-inf distance from the attack-class mean to the hyperplane bisecting the two class means.

    With ``d`` the difference of class means this is ``||d||_2^2 / (2 ||d||_1)``:
    the smallest L-inf shift that carries the attack mean onto the bisector.
    """
    X, y = np.asarray(X, dtype=np.float64), np.asarray(y)
    if not (np.any(y == 0) and np.any(y == 1)):
        raise DataError("class margin needs rows of both classes")
    d = X[y == 1].mean(axis=0) - X[y == 0].mean(axis=0)
    l1 = np.abs(d).sum()
    return float(d @ d / (2.0 * l1)) if l1 > 0 else 0.0


@dataclass
class CrossMatrix:
    models: list
    attacks: list
    cells: np.ndarray  # percent, rows = models, cols = attacks

    def row(self, model):
        return self.cells[self.models.index(model)]

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["model", *self.attacks])
            for name, row in zip(self.models, self.cells):
                w.writerow([name, *(f"{v:.4f}" for v in row)])
        return Path(path)

    def to_text(self):
        return format_table(["Model", *self.attacks], [[m, *(f"{v:.1f}" for v in r)] for m, r in zip(self.models, self.cells)])


def cross_matrix(models, attack_cfgs, X_attack):
    """Evasion rate of every model (rows) under every attack (columns).

    ``models`` maps name -> net; ``attack_cfgs`` maps method name -> AttackConfig.
    """
    names, attacks = list(models), list(attack_cfgs)
    cells = np.array([[evasion_rate(models[m], attack_cfgs[a], X_attack) for a in attacks] for m in names])
    return CrossMatrix(names, attacks, cells.reshape(len(names), len(attacks)))


@dataclass
class ModelMetrics:
    model: str
    accuracy: float
    fpr: float
    fnr: float
    evasion_rate: float
    cn: float


@dataclass
class MetricsTable:
    rows: list = field(default_factory=list)

    HEADER = ("model", "accuracy", "fpr", "fnr", "evasion_rate", "cn")

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.HEADER)
            for r in self.rows:
                w.writerow([r.model, f"{r.accuracy:.4f}", f"{r.fpr:.4f}", f"{r.fnr:.4f}", f"{r.evasion_rate:.4f}", f"{r.cn:.4f}"])
        return Path(path)

    def to_text(self):
        head = ["Model", "Accuracy", "FPR", "FNR (clean)", "Evasion Rate", "CN"]
        body = [
            [r.model, f"{r.accuracy:.1f}", f"{r.fpr:.1f}", f"{r.fnr:.1f}", f"{r.evasion_rate:.1f}", f"{r.cn:.1f}"]
            for r in self.rows
        ]
        return format_table(head, body)


def metrics_table(models, histories, attack_cfgs, X_test, y_test):
    """Per-model accuracy / FPR / clean FNR on the test split, evasion rate under the
    model's own training attack (clean FNR for the natural model) and CN.  Percentages."""
    y_test = np.asarray(y_test)
    X_att = np.asarray(X_test)[y_test == 1]
    table = MetricsTable()
    for name, net in models.items():
        rep = evaluate(net, X_test, y_test)
        if name in attack_cfgs:
            er = evasion_rate(net, attack_cfgs[name], X_att)
        else:
            er = 100.0 * rep.fnr
        cn = covering_number(histories[name]) if name in histories else float("nan")
        table.rows.append(ModelMetrics(name, 100 * rep.accuracy, 100 * rep.fpr, 100 * rep.fnr, er, cn))
    return table


def format_table(header, rows):
    cols = [header] + [list(map(str, r)) for r in rows]
    widths = [max(len(r[i]) for r in cols) for i in range(len(header))]
    line = lambda r: "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
    out = [line(header), "  ".join("-" * w for w in widths)]
    out.extend(line(r) for r in cols[1:])
    return "\n".join(out) + "\n"


def attack_configs(base_cfg, methods=ATTACK_METHODS):
    return {m: replace(base_cfg, method=m) for m in methods}
