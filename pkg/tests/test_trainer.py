from dataclasses import replace

import numpy as np
import pytest

import advids.trainer as trainer
from advids.attacks import METHODS, AttackConfig
from advids.data import Dataset, SynthConfig, split, synth_generate
from advids.errors import ConfigError, DataError, TrainingDivergedError
from advids.metrics import covering_number, evaluate
from advids.nn import init_network
from advids.trainer import TrainConfig, default_layer_sizes, train_all_five, train_model


def _cfg(method="natural", eps=0.1, epochs=3, **kw):
    attack = AttackConfig(method, eps, eps / 4 if eps else 0.01, kw.pop("iterations", 5), 0.0, 1.0, 3)
    return TrainConfig(epochs=epochs, batch_size=kw.pop("batch_size", 32), learning_rate=kw.pop("lr", 0.01), attack=attack, seed=1, **kw)


def _same(a, b):
    return all(np.array_equal(p, q) for p, q in zip(a.params(), b.params()))


def test_natural_training_reaches_high_validation_accuracy():
    ds = split(synth_generate(SynthConfig(16, 500, 500, 6.0, 1.0, seed=0)), seed=0)
    cfg = TrainConfig(epochs=30, batch_size=100, learning_rate=0.001, seed=0)
    net, hist = train_model(ds, init_network(default_layer_sizes(16), 0), cfg)
    assert max(hist.val_acc) >= 0.95
    assert evaluate(net, *ds.part("val")).accuracy >= 0.95


@pytest.mark.parametrize("method", METHODS[1:])
def test_zero_epsilon_matches_natural_bit_for_bit(method, small_synth):
    init = init_network([6, 8, 2], 4)
    base, _ = train_model(small_synth, init, _cfg("natural", eps=0.0))
    adv, _ = train_model(small_synth, init, _cfg(method, eps=0.0))
    assert _same(base, adv)


def test_single_batch_accounting(small_synth):
    n_train = int(np.sum(small_synth.mask("train")))
    init = init_network([6, 4, 2], 0)
    net, hist = train_model(small_synth, init, _cfg("dfgsm", epochs=1, batch_size=n_train + 5))
    assert hist.adam_steps == [1] and hist.attack_calls == [1]
    assert not _same(net, init)


def test_input_network_not_mutated(small_synth):
    init = init_network([6, 4, 2], 0)
    snapshot = init.copy()
    train_model(small_synth, init, _cfg("bga"))
    assert _same(init, snapshot)


def test_attack_calls_equal_batches_with_attack_rows():
    # tiny batches so some contain only benign rows
    ds = split(synth_generate(SynthConfig(4, 10, 60, 6.0, 1.0, seed=2)), seed=2)
    _, hist = train_model(ds, init_network([4, 4, 2], 1), _cfg("rfgsm", batch_size=3, epochs=4))
    assert hist.attack_calls == hist.batches_with_attack_rows
    assert all(c < s for c, s in zip(hist.attack_calls, hist.adam_steps))


@pytest.mark.parametrize("augment", [False, True])
def test_benign_rows_never_modified(augment, small_synth, monkeypatch):
    seen = []
    real = trainer.inner_maximize

    def spy(net, batch, labels, cfg, row_offset=0):
        seen.append(np.asarray(labels).copy())
        return real(net, batch, labels, cfg, row_offset)

    monkeypatch.setattr(trainer, "inner_maximize", spy)
    _, hist = train_model(small_synth, init_network([6, 4, 2], 0), _cfg("dfgsm", augment=augment))
    assert seen and all(np.all(l == 1) for l in seen)
    assert hist.benign_rows_modified == 0


def test_reproducible(small_synth):
    init = init_network([6, 5, 2], 2)
    a, ha = train_model(small_synth, init, _cfg("rfgsm"))
    b, hb = train_model(small_synth, init, _cfg("rfgsm"))
    assert _same(a, b) and ha.train_loss == hb.train_loss


def test_natural_history_gives_cn_one(small_synth):
    _, hist = train_model(small_synth, init_network([6, 4, 2], 0), _cfg("natural", epochs=4))
    assert covering_number(hist) == 1.0
    assert hist.distinct_adversarials[-1] == hist.n_attack_train


def test_adversarial_cn_at_least_one(small_synth):
    _, hist = train_model(small_synth, init_network([6, 4, 2], 0), _cfg("dfgsm", epochs=3))
    assert covering_number(hist) >= 1.0
    assert all(np.isfinite(hist.train_loss))


def test_early_stopping(small_synth):
    cfg = replace(_cfg("natural", epochs=200), convergence_patience=2)
    _, hist = train_model(small_synth, init_network([6, 4, 2], 0), cfg)
    assert len(hist) < 200 and hist.final_epoch == len(hist) - 1


def test_divergence_raises():
    X = np.array([[0.0, 1.0], [1.0, 0.0]] * 4)
    y = np.array([0, 1] * 4)
    ds = Dataset(X * 1e300, y, ["a", "b"])
    net = init_network([2, 2], 0)
    net.weights[0][:] = 1e10
    with pytest.raises(TrainingDivergedError), np.errstate(over="ignore", invalid="ignore"):
        train_model(ds, net, _cfg("natural", epochs=2))


def test_train_all_five_shares_architecture_and_collapses_at_zero_budget(small_synth):
    models = train_all_five(small_synth, _cfg(eps=0.0, epochs=2), layer_sizes=[6, 5, 2])
    assert list(models) == ["natural", "dfgsm", "rfgsm", "bga", "bca"]
    nets = [m[0] for m in models.values()]
    assert all(n.layer_sizes == [6, 5, 2] for n in nets)
    assert all(_same(nets[0], n) for n in nets[1:])


def test_history_csv(tmp_path, small_synth):
    _, hist = train_model(small_synth, init_network([6, 4, 2], 0), _cfg(epochs=2))
    hist.to_csv(tmp_path / "h.csv")
    text = (tmp_path / "h.csv").read_text().splitlines()
    assert text[0] == "epoch,train_loss,val_loss,val_acc,distinct_adversarials" and len(text) == 3


def test_empty_train_split():
    ds = Dataset(np.zeros((2, 2)), [0, 1], ["a", "b"], ["test", "test"])
    with pytest.raises(DataError):
        train_model(ds, init_network([2, 2], 0), _cfg())


@pytest.mark.parametrize("kw", [dict(epochs=0), dict(batch_size=0), dict(learning_rate=0.0)])
def test_bad_config(kw):
    with pytest.raises(ConfigError):
        replace(TrainConfig(), **kw).validate()
