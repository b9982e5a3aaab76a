"""Command-line harness: ``advids {synth,prep,train,matrix,attack-dump}``.

Every command reads the same experiment configuration (``--config`` INI file,
``--preset``, flags) and works inside one output directory::

    <out>/dataset.csv      normalised (and optionally PCA-projected) rows + split tag
    <out>/normalizer.csv   per-feature train min / max
    <out>/pca.csv          PCA model (only with --pca)
    <out>/manifest.json    seeds, row counts, selected features, PCA k
    <out>/models/<m>.npz   checkpoints
    <out>/history/<m>.csv  per-epoch training history
    <out>/matrix.csv       evasion-rate cross matrix (+ .txt)
    <out>/metrics.csv      per-model accuracy / FPR / FNR / evasion / CN (+ .txt)

Exit codes: 0 success, 2 usage or configuration error, 3 I/O or data/schema
error, 4 numeric divergence.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import data as datapipe
from . import kernels
from .attacks import ATTACK_METHODS, METHODS
from .config import PRESETS, build_config, save_ini
from .errors import ConfigError, DataError, NumericInputError, TrainingDivergedError
from .metrics import cross_matrix, metrics_table, perturb
from .nn import forward, init_network, load_checkpoint, save_checkpoint
from .pca import fit_pca, select_components, transform
from .trainer import TrainHistory, default_layer_sizes, train_model

log = logging.getLogger("advids")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _config(args):
    overrides = {
        "seed": args.seed,
        "epsilon": args.epsilon,
        "step_size": getattr(args, "step_size", None),
        "iterations": args.iterations,
        "pca": args.pca,
        "features": args.features,
        "out": args.out,
        "epochs": getattr(args, "epochs", None),
        "batch_size": getattr(args, "batch_size", None),
        "learning_rate": getattr(args, "learning_rate", None),
    }
    if getattr(args, "input", None):
        overrides.update(source="csv", path=args.input)
    if getattr(args, "label_column", None):
        overrides["label_column"] = args.label_column
    if getattr(args, "positive_label", None):
        overrides["positive_label"] = args.positive_label
    return build_config(args.config, args.preset, overrides)


def _write_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_prepared(out):
    out = Path(out)
    manifest_path = out / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"{manifest_path} not found; run `advids prep` first")
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    ds = datapipe.load_csv(out / "dataset.csv", label_column="label", positive_label="1", categorical=[])
    return ds, manifest


def _attack_bounds(ds, manifest):
    """[0, 1] on normalised features; the train attack-row range per component after PCA."""
    if manifest.get("pca"):
        X, y = ds.part("train")
        att = X[y == 1]
        return att.min(axis=0), att.max(axis=0)
    return 0.0, 1.0


def _feature_indices(spec, ds):
    spec = str(spec).strip()
    if spec.isdigit():
        k = int(spec)
        if k == 0 or k == ds.n_features:
            return list(range(ds.n_features))
        return datapipe.rank_features(ds, k)
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"--features expects an integer or an existing list file, got {spec!r}")
    wanted = [line.strip() for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    idx = []
    for item in wanted:
        if item in ds.feature_names:
            idx.append(ds.feature_names.index(item))
        elif item.isdigit() and int(item) < ds.n_features:
            idx.append(int(item))
        else:
            raise ConfigError(f"feature {item!r} from {path} not found in the dataset")
    return idx


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_synth(args):
    cfg = _config(args)
    out = Path(args.output) if args.output else Path(cfg.out) / "synth.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    ds = datapipe.synth_generate(cfg.synth_config())
    datapipe.write_csv(ds, out)
    print(f"wrote {len(ds)} rows ({int(ds.y.sum())} attack) to {out}")
    return EXIT_OK


def cmd_prep(args):
    cfg = _config(args)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.source == "csv":
        drop = [c.strip() for c in cfg.drop.split(",") if c.strip()]
        raw = datapipe.load_csv(
            cfg.path, cfg.label_column, cfg.positive_label, drop_columns=drop, encoding=cfg.categorical_encoding
        )
        requested = None
    else:
        raw = datapipe.synth_generate(cfg.synth_config())
        requested = {"n_attack": cfg.n_attack, "n_benign": cfg.n_benign, "n_features": cfg.n_features}

    ds = datapipe.split(raw, cfg.train_fraction, cfg.val_fraction, cfg.seed_for("split"))
    chosen = _feature_indices(cfg.features, ds)
    ds = ds.select_features(chosen)
    norm = datapipe.fit_normalizer(ds)
    ds = datapipe.apply_normalizer(norm, ds)
    norm.save(out / "normalizer.csv")

    pca_info = None
    if cfg.pca:
        model = fit_pca(ds.part("train")[0])
        k = select_components(model, cfg.pca)
        model.save(out / "pca.csv")
        ds = ds.with_features(transform(model, ds.X, k), [f"pc{i}" for i in range(k)])
        pca_info = {"threshold": cfg.pca, "k": k, "cumulative_ratio": float(np.sum(model.explained_variance_ratio[:k]))}

    datapipe.write_csv(ds, out / "dataset.csv")
    (out / "features.txt").write_text("\n".join(norm.feature_names) + "\n", encoding="utf-8")
    save_ini(cfg, out / "config.ini")

    counts = {}
    for tag in datapipe.SPLITS:
        _, y = ds.part(tag)
        counts[tag] = {"attack": int(np.sum(y == 1)), "benign": int(np.sum(y == 0))}
    manifest = {
        "source": cfg.source if cfg.source == "synth" else str(cfg.path),
        "root_seed": cfg.seed,
        "seeds": {k: cfg.seed_for(k) for k in ("synth", "split", "init", "train", "attack", "eval")},
        "rows": {"total": len(ds), "attack": int(ds.y.sum()), "benign": int(len(ds) - ds.y.sum()), "split": counts},
        "requested": requested,
        "selected_features": list(norm.feature_names),
        "n_features": ds.n_features,
        "pca": pca_info,
    }
    _write_json(manifest, out / "manifest.json")
    msg = f"prepared {len(ds)} rows x {ds.n_features} features in {out}"
    if pca_info:
        msg += f" (PCA k={pca_info['k']})"
    print(msg)
    return EXIT_OK


def _train_one(cfg, ds, manifest, method, out):
    lo, hi = _attack_bounds(ds, manifest)
    sizes = default_layer_sizes(ds.n_features, cfg.hidden_sizes())
    net0 = init_network(sizes, cfg.seed_for("init"))
    tcfg = cfg.train_config(method, lo, hi)
    net, history = train_model(ds, net0, tcfg)
    for epoch, tl, vl, va, d in history.rows():
        print(f"[{method}] epoch {epoch:4d}  train_loss {tl:.5f}  val_loss {vl:.5f}  val_acc {va:.4f}  distinct {d}")
    (out / "models").mkdir(exist_ok=True)
    (out / "history").mkdir(exist_ok=True)
    save_checkpoint(net, out / "models" / f"{method}.npz")
    history.to_csv(out / "history" / f"{method}.csv")


def cmd_train(args):
    cfg = _config(args)
    out = Path(cfg.out)
    ds, manifest = _load_prepared(out)
    methods = METHODS if args.method == "all" else (args.method,)
    for method in methods:
        _train_one(cfg, ds, manifest, method, out)
    return EXIT_OK


def _read_history(path):
    h = TrainHistory()
    with open(path, encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            _, tl, vl, va, d = line.strip().split(",")
            h.train_loss.append(float(tl))
            h.val_loss.append(float(vl))
            h.val_acc.append(float(va))
            h.distinct_adversarials.append(int(d))
    return h


def cmd_matrix(args):
    cfg = _config(args)
    out = Path(cfg.out)
    ds, manifest = _load_prepared(out)
    missing = [m for m in METHODS if not (out / "models" / f"{m}.npz").exists()]
    if missing:
        raise FileNotFoundError(f"missing checkpoints for: {', '.join(missing)} (run `advids train --method ...`)")
    models = {m: load_checkpoint(out / "models" / f"{m}.npz") for m in METHODS}
    histories = {}
    n_attack_train = int(np.sum(ds.part("train")[1] == 1))
    for m in METHODS:
        hpath = out / "history" / f"{m}.csv"
        if hpath.exists():
            histories[m] = _read_history(hpath)
            histories[m].n_attack_train = n_attack_train
    lo, hi = _attack_bounds(ds, manifest)
    attack_cfgs = {a: cfg.attack_config(a, lo, hi, seed_label="eval") for a in ATTACK_METHODS}
    X_test, y_test = ds.part("test")
    if len(y_test) == 0:
        raise DataError("test split is empty")
    matrix = cross_matrix(models, attack_cfgs, X_test[y_test == 1])
    matrix.to_csv(out / "matrix.csv")
    (out / "matrix.txt").write_text(matrix.to_text(), encoding="utf-8")
    table = metrics_table(models, histories, attack_cfgs, X_test, y_test)
    table.to_csv(out / "metrics.csv")
    (out / "metrics.txt").write_text(table.to_text(), encoding="utf-8")
    print("Evasion rate (%) - rows: trained model, columns: attack")
    print(matrix.to_text())
    print(table.to_text())
    return EXIT_OK


def cmd_attack_dump(args):
    cfg = _config(args)
    out = Path(cfg.out)
    ds, manifest = _load_prepared(out)
    ckpt = out / "models" / f"{args.model}.npz"
    if not ckpt.exists():
        raise FileNotFoundError(f"missing checkpoint {ckpt}")
    net = load_checkpoint(ckpt)
    X_test, y_test = ds.part(args.split)
    X_att = X_test[y_test == 1]
    n = args.n
    if n > len(X_att):
        print(f"warning: requested {n} rows but only {len(X_att)} attack rows available; dumping {len(X_att)}", file=sys.stderr)
        n = len(X_att)
    X_att = X_att[:n]
    lo, hi = _attack_bounds(ds, manifest)
    X_adv = perturb(net, cfg.attack_config(args.method, lo, hi, seed_label="eval"), X_att)
    pred_orig = np.argmax(forward(net, X_att)[0], axis=1) if n else np.empty(0, dtype=int)
    pred_adv = np.argmax(forward(net, X_adv)[0], axis=1) if n else np.empty(0, dtype=int)
    linf = np.abs(X_adv - X_att).max(axis=1) if n else np.empty(0)
    path = Path(args.output) if args.output else out / f"attack_{args.method}_{args.model}.csv"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(["pair", "perturbed", *ds.feature_names, "linf", "prediction"]) + "\n")
        for i in range(n):
            for flag, row, pred in ((0, X_att[i], pred_orig[i]), (1, X_adv[i], pred_adv[i])):
                cells = [str(i), str(flag), *(repr(float(v)) for v in row), repr(float(linf[i])), str(int(pred))]
                fh.write(",".join(cells) + "\n")
    flipped = int(np.sum((pred_orig == 1) & (pred_adv == 0)))
    print(f"wrote {n} original/adversarial pairs to {path}; {flipped} flipped from attack to benign")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _common(p):
    p.add_argument("--config", help="INI experiment configuration")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--seed", type=int, help="root seed")
    p.add_argument("--out", help="run directory")
    p.add_argument("--epsilon", type=float, help="L-inf attack budget")
    p.add_argument("--step-size", dest="step_size", type=float, help="attack step size per iteration")
    p.add_argument("--iterations", type=int, help="attack iterations s")
    p.add_argument("--pca", type=float, help="PCA cumulative-variance threshold (0 disables)")
    p.add_argument("--features", help="number of features to keep, or a file listing feature names")


def build_parser():
    parser = argparse.ArgumentParser(prog="advids", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic two-cluster dataset as CSV")
    _common(p)
    p.add_argument("--output", help="CSV path (default <out>/synth.csv)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("prep", help="split, select features, normalise, optional PCA")
    _common(p)
    p.add_argument("--input", help="labelled CSV (default: synthetic data)")
    p.add_argument("--label-column", dest="label_column")
    p.add_argument("--positive-label", dest="positive_label")
    p.set_defaults(func=cmd_prep)

    p = sub.add_parser("train", help="train one model (or all five)")
    _common(p)
    p.add_argument("--method", required=True, choices=[*METHODS, "all"])
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("matrix", help="evasion-rate matrix and per-model metrics")
    _common(p)
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("attack-dump", help="write original/adversarial row pairs")
    _common(p)
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--model", default="natural", choices=METHODS, help="checkpoint to attack")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--split", default="test", choices=datapipe.SPLITS)
    p.add_argument("--output")
    p.set_defaults(func=cmd_attack_dump)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    log.info("kernel backend: %s", kernels.BACKEND)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"advids: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingDivergedError, NumericInputError) as exc:
        print(f"advids: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, DataError) as exc:
        print(f"advids: error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
