"""Command-line front end.

Subcommands cover the whole pipeline: gen-data, train, attack,
extract-features, fit-detector, experiment-seen, experiment-unseen,
experiment-ood, and demo-circles. Every command reads one strict config
document, derives all randomness from the master seed, writes its outputs
under the output directory, and exits nonzero with a diagnostic on any
failure. Rerunning with an identical config reproduces byte-identical
numeric outputs.
"""

import argparse
import csv
import os
import sys

import numpy as np

from . import attacks, config, jsonio, model, plots, trainer
from .detect import (
    features_batch,
    fit_ensemble,
    fit_quantile_detector,
    predict_ensemble_batch,
    read_feature_csv,
    write_feature_csv,
)
from .detect.metrics import auroc
from .errors import (
    ConfigError,
    ContractError,
    DimensionError,
    DivergenceError,
    FormatError,
    NonFiniteError,
)
from .harness import (
    Dataset,
    build_bundle,
    gen_synthetic,
    read_dataset_csv,
    run_ood,
    run_seen,
    run_unseen,
    write_dataset_csv,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_MISSING_FILE = 3
EXIT_CONTRACT = 4
EXIT_DIVERGED = 5


def _resolve(out_dir, name):
    return os.path.join(out_dir, name)


def _load_dataset(doc, out_dir, master, path_key=None, path=None):
    """Dataset from an explicit CSV path or the config's data section."""
    if path:
        ds, _ = read_dataset_csv(path)
        return ds
    body = config.section(doc, "data")
    if body["path"]:
        ds, _ = read_dataset_csv(body["path"])
        return ds
    return gen_synthetic(config.data_spec(doc, config.derive_seed(master, config.SEED_DATA)))


def _train_net(doc, data, master, mode=None):
    mbody = config.section(doc, "model")
    net = model.init_net(
        dim=data.dim, width=mbody["width"], depth=mbody["blocks"], classes=mbody["classes"],
        h=float(mbody["h"]), seed=config.derive_seed(master, config.SEED_INIT),
        gain=float(mbody["gain"]), head_gain=float(mbody["head_gain"]))
    tcfg = config.train_config(doc, config.derive_seed(master, config.SEED_TRAIN), mode=mode)
    report = trainer.train(net, data.x, data.y, tcfg)
    return net, report


def cmd_gen_data(doc, out_dir, master, threads):
    spec = config.data_spec(doc, config.derive_seed(master, config.SEED_DATA))
    ds = gen_synthetic(spec)
    write_dataset_csv(_resolve(out_dir, "dataset.csv"), ds, meta={"spec": spec.to_dict()})
    print(f"wrote {ds.n} samples to {_resolve(out_dir, 'dataset.csv')}")
    return EXIT_OK


def cmd_train(doc, out_dir, master, threads):
    ds = _load_dataset(doc, out_dir, master)
    net, report = _train_net(doc, ds, master)
    model.save_checkpoint(net, _resolve(out_dir, "checkpoint.json"))
    jsonio.dump(report.to_dict(), _resolve(out_dir, "train_report.json"))
    print(f"trained {net.depth}-block net: final train accuracy "
          f"{report.final_train_accuracy:.4f}")
    return EXIT_OK


def cmd_attack(doc, out_dir, master, threads):
    body = config.section(doc, "attack")
    if not body["checkpoint"]:
        raise ConfigError("attack command needs attack.checkpoint")
    net = model.load_checkpoint(body["checkpoint"])
    ds = _load_dataset(doc, out_dir, master, path=body["dataset"])
    acfg = config.attack_config(doc, config.derive_seed(master, config.SEED_ATTACK))
    results = attacks.attack_batch(net, ds.x, ds.y, acfg, box=ds.box, threads=threads)
    adv = Dataset(x=np.stack([r.adversarial for r in results]), y=ds.y.copy(), box=ds.box)
    write_dataset_csv(_resolve(out_dir, "adversarial.csv"), adv,
                      origins=["adversarial"] * adv.n)
    attacks.write_manifest(_resolve(out_dir, "attack_manifest.json"), acfg, results)
    rate = float(np.mean([r.success for r in results]))
    print(f"attacked {adv.n} samples with {acfg.kind}: success rate {rate:.4f}")
    return EXIT_OK


def cmd_extract_features(doc, out_dir, master, threads):
    body = config.section(doc, "detect")
    if not body["checkpoint"] or not body["dataset"]:
        raise ConfigError("extract-features needs detect.checkpoint and detect.dataset")
    net = model.load_checkpoint(body["checkpoint"])
    ds, origins = read_dataset_csv(body["dataset"])
    preds, trajs = model.predict_batch(net, ds.x)
    feats = features_batch(trajs)
    labels = np.array([1 if o == "adversarial" else 0 for o in origins], dtype=np.int64)
    write_feature_csv(_resolve(out_dir, "features.csv"), feats, labels, preds)
    print(f"extracted {feats.shape[1]} features for {feats.shape[0]} samples")
    return EXIT_OK


def cmd_fit_detector(doc, out_dir, master, threads):
    body = config.section(doc, "detect")
    if not body["train_features"]:
        raise ConfigError("fit-detector needs detect.train_features")
    feats, labels, preds = read_feature_csv(body["train_features"])
    settings = config.detector_settings(doc, config.derive_seed(master, config.SEED_DETECTOR))
    detector = fit_ensemble(feats, labels, preds, cfg=settings.forest, seed=settings.seed,
                            min_class_samples=settings.min_class_samples, threads=threads)
    jsonio.dump(detector.to_dict(), _resolve(out_dir, "detector.json"))

    metrics = {"train": _detector_metrics(detector, feats, labels, preds)}
    if body["test_features"]:
        t_feats, t_labels, t_preds = read_feature_csv(body["test_features"])
        metrics["test"] = _detector_metrics(detector, t_feats, t_labels, t_preds)
    jsonio.dump(metrics, _resolve(out_dir, "detector_metrics.json"))
    print(f"fitted ensemble ({len(detector.per_class)} per-class forests); "
          f"train accuracy {metrics['train']['accuracy']:.4f}")
    return EXIT_OK


def _detector_metrics(detector, feats, labels, preds):
    flagged, _, general_scores = predict_ensemble_batch(detector, feats, preds)
    out = {"accuracy": float(np.mean(flagged == labels)), "n": int(labels.size)}
    if labels.min() != labels.max():
        out["fpr"] = float(np.mean(flagged[labels == 0] == 1))
        out["tpr"] = float(np.mean(flagged[labels == 1] == 1))
        out["auroc"] = float(auroc(general_scores, labels))
    return out


def _experiment_parts(doc, out_dir, master, threads):
    ds = _load_dataset(doc, out_dir, master)
    net, train_report = _train_net(doc, ds, master)
    ebody = config.section(doc, "experiment")
    test_spec = config.data_spec(doc, config.derive_seed(master, config.SEED_TEST_DATA))
    test_spec.n = ebody["test_n"]
    test = gen_synthetic(test_spec)
    model.save_checkpoint(net, _resolve(out_dir, "checkpoint.json"))
    jsonio.dump(train_report.to_dict(), _resolve(out_dir, "train_report.json"))
    return net, test, ebody


def _write_report(report, out_dir, master):
    report.seeds["master"] = master
    report.write(_resolve(out_dir, "report.json"), _resolve(out_dir, "report.csv"))
    plots.save_report_bars(_resolve(out_dir, "report.svg"), report)


def cmd_experiment_seen(doc, out_dir, master, threads):
    net, test, _ = _experiment_parts(doc, out_dir, master, threads)
    acfg = config.attack_config(doc, config.derive_seed(master, config.SEED_ATTACK))
    with_noise = config.section(doc, "detect")["with_noise"]
    bundle = build_bundle(net, test, acfg, config.derive_seed(master, config.SEED_SPLIT),
                          with_noise=with_noise, threads=threads)
    settings = config.detector_settings(doc, config.derive_seed(master, config.SEED_DETECTOR))
    report = run_seen(net, bundle, settings, threads=threads)
    _write_report(report, out_dir, master)
    row = report.rows[0]
    print(f"seen {row['attack']}: detection accuracy {row['detection_accuracy']:.4f}, "
          f"auroc {row['auroc']:.4f}")
    return EXIT_OK


def cmd_experiment_unseen(doc, out_dir, master, threads):
    net, test, ebody = _experiment_parts(doc, out_dir, master, threads)
    with_noise = config.section(doc, "detect")["with_noise"]
    split_seed = config.derive_seed(master, config.SEED_SPLIT)

    train_cfg = config.attack_config(doc, config.derive_seed(master, config.SEED_ATTACK))
    train_bundle = build_bundle(net, test, train_cfg, split_seed,
                                with_noise=with_noise, threads=threads)
    kinds = ebody["test_attacks"] or ["bim", "pgd"]
    test_bundles = {}
    for i, kind in enumerate(kinds):
        acfg = config.attack_config(doc, config.derive_seed(master, config.SEED_ATTACK + 10 + i),
                                    kind=kind)
        test_bundles[kind] = build_bundle(net, test, acfg, split_seed,
                                          with_noise=with_noise, threads=threads)
    settings = config.detector_settings(doc, config.derive_seed(master, config.SEED_DETECTOR))
    report = run_unseen(net, train_bundle, test_bundles, settings, threads=threads)
    _write_report(report, out_dir, master)
    for row in report.rows:
        print(f"unseen {row['attack']}: detection accuracy {row['detection_accuracy']:.4f}")
    return EXIT_OK


def cmd_experiment_ood(doc, out_dir, master, threads):
    ds = _load_dataset(doc, out_dir, master)
    net, train_report = _train_net(doc, ds, master)
    model.save_checkpoint(net, _resolve(out_dir, "checkpoint.json"))
    jsonio.dump(train_report.to_dict(), _resolve(out_dir, "train_report.json"))

    ebody = config.section(doc, "experiment")
    if not ebody["second"] or not ebody["third"]:
        raise ConfigError("experiment-ood needs experiment.second and experiment.third data specs")
    second = gen_synthetic(config.spec_from_dict(
        ebody["second"], config.derive_seed(master, config.SEED_SECOND)))
    third = gen_synthetic(config.spec_from_dict(
        ebody["third"], config.derive_seed(master, config.SEED_THIRD)))
    settings = config.detector_settings(doc, config.derive_seed(master, config.SEED_DETECTOR))
    report = run_ood(net, ds, second, third, settings, threads=threads)
    _write_report(report, out_dir, master)
    row = report.rows[0]
    print(f"ood: detection accuracy {row['detection_accuracy']:.4f}, "
          f"unseen-distribution detection rate {row['ood_tpr']:.4f}")
    return EXIT_OK


DEMO_BLOCKS_SHOWN = (0, 6, 9)


def cmd_demo_circles(doc, out_dir, master, threads):
    """Train vanilla and lap nets on circles; emit embedding scatters and
    transport-cost histograms as CSV plus SVG renderings."""
    ds = _load_dataset(doc, out_dir, master)
    test_spec = config.data_spec(doc, config.derive_seed(master, config.SEED_TEST_DATA))
    test_spec.n = config.section(doc, "experiment")["test_n"]
    test = gen_synthetic(test_spec)

    ood_n = config.section(doc, "experiment")["ood_n"]
    rng = np.random.default_rng(config.derive_seed(master, config.SEED_OOD_POINTS))
    angles = rng.uniform(0.0, 2.0 * np.pi, ood_n)
    ood = 1.5 * np.column_stack([np.cos(angles), np.sin(angles)])

    acfg = config.attack_config(doc, config.derive_seed(master, config.SEED_ATTACK))
    panel_points = np.concatenate([test.x, ood])
    panel_classes = np.concatenate([test.y, -np.ones(ood_n, dtype=np.int64)])

    per_net_panels = {}
    per_net_hist = {}
    for mode in ("vanilla", "lap"):
        net, _ = _train_net(doc, ds, master, mode=mode)
        _, trajs = model.predict_batch(net, panel_points)
        stack = np.stack([t.embeddings for t in trajs], axis=1)  # (M+1, n, d)
        per_net_panels[mode] = stack
        _write_embedding_csv(_resolve(out_dir, f"embeddings_{mode}.csv"), stack, panel_classes)

        _, clean_trajs = model.predict_batch(net, test.x)
        clean_costs = model.batch_costs(clean_trajs)
        results = attacks.attack_batch(net, test.x, test.y, acfg, box=test.box, threads=threads)
        adv_points = np.stack([r.adversarial for r in results])
        _, adv_trajs = model.predict_batch(net, adv_points)
        adv_costs = model.batch_costs(adv_trajs)
        quantile = fit_quantile_detector(clean_costs)
        per_net_hist[mode] = (clean_costs, adv_costs, quantile.low, quantile.high)

    _write_hist_csv(_resolve(out_dir, "transport_hist.csv"), per_net_hist)
    blocks = [b for b in DEMO_BLOCKS_SHOWN if b <= per_net_panels["vanilla"].shape[0] - 1]
    plots.save_embedding_panels(_resolve(out_dir, "fig_embeddings.svg"), per_net_panels,
                                blocks, panel_classes)
    plots.save_cost_histogram(_resolve(out_dir, "fig_hist.svg"), per_net_hist)
    print(f"demo outputs written under {out_dir}")
    return EXIT_OK


def _write_embedding_csv(path, stack, classes):
    """Block-indexed sections: all points at block 0, then block 1, ..."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["block", "x0", "x1", "cls"])
        for block in range(stack.shape[0]):
            for point, cls in zip(stack[block], classes):
                name = "ood" if cls == -1 else str(int(cls))
                writer.writerow([block, jsonio.format_real(point[0]),
                                 jsonio.format_real(point[1]), name])


def _write_hist_csv(path, per_net, bins=40):
    """Histogram series per net (clean, adversarial) plus quantile rows."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["net", "series", "left", "right", "count"])
        for net_label, (clean, adv, low, high) in per_net.items():
            edges = np.histogram_bin_edges(np.concatenate([clean, adv]), bins=bins)
            for series, values in (("clean", clean), ("adversarial", adv)):
                counts, _ = np.histogram(values, bins=edges)
                for left, right, count in zip(edges[:-1], edges[1:], counts):
                    writer.writerow([net_label, series, jsonio.format_real(left),
                                     jsonio.format_real(right), int(count)])
            writer.writerow([net_label, "quantile_low", jsonio.format_real(low),
                             jsonio.format_real(low), 0])
            writer.writerow([net_label, "quantile_high", jsonio.format_real(high),
                             jsonio.format_real(high), 0])


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "attack": cmd_attack,
    "extract-features": cmd_extract_features,
    "fit-detector": cmd_fit_detector,
    "experiment-seen": cmd_experiment_seen,
    "experiment-unseen": cmd_experiment_unseen,
    "experiment-ood": cmd_experiment_ood,
    "demo-circles": cmd_demo_circles,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="advtraj",
        description="Residual-trajectory adversarial sample detection pipeline")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="config JSON path")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--threads", type=int, default=1, help="worker thread bound")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        doc = config.load_config(args.config) if args.config else config.validate({})
        master = args.seed if args.seed is not None else doc.get("seed", 0)
        out_dir = args.out or doc.get("out", ".")
        os.makedirs(out_dir, exist_ok=True)
        return COMMANDS[args.command](doc, out_dir, master, max(1, args.threads))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return EXIT_MISSING_FILE
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ContractError, DimensionError, NonFiniteError, IndexError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except Exception as exc:  # anything else is still a diagnostic, not a traceback
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
