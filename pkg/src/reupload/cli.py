"""Command-line experiment runner.

Exit codes: 0 on success, 2 for usage or configuration problems, 3 for
runtime or data failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import analysis, data, noise, train
from .data import Dataset
from .errors import ReuploadError
from .model import CircuitSpec, Scheme

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3

GENERATORS = ("circles", "moons", "tetromino", "worst_case")


class ConfigError(Exception):
    """The experiment configuration is malformed."""


class RuntimeFailure(Exception):
    """A prerequisite is missing or a computation failed."""


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in r])


# ---------------------------------------------------------------------------
# experiment configuration


@dataclass
class ExperimentConfig:
    dataset: dict
    scheme: Scheme
    layers: list[int]
    encode_scale: float
    train: train.TrainConfig
    seeds: list[int]
    noise: noise.NoiseConfig | None = None
    analyses: list[str] = field(default_factory=list)
    out: str | None = None
    base_dir: Path = Path(".")


def _require(block, key, where):
    if not isinstance(block, dict) or key not in block:
        raise ConfigError(f"missing {where}.{key}")
    return block[key]


def parse_dataset_block(block, base_dir: Path) -> dict:
    """Normalize a dataset block, resolving and checking the CSV path."""
    if not isinstance(block, dict):
        raise ConfigError("dataset block must be a mapping")
    sources = [k for k in ("generator", "csv") if k in block]
    if len(sources) != 1:
        raise ConfigError("dataset block needs exactly one of 'generator' or 'csv'")
    block = dict(block)
    if "csv" in block:
        path = Path(block["csv"])
        if not path.is_absolute():
            path = (base_dir / path).resolve()
        if not path.exists():
            raise ConfigError(f"dataset csv not found: {path}")
        block["csv"] = str(path)
    elif block["generator"] not in GENERATORS:
        raise ConfigError(f"unknown generator {block['generator']!r}; choose from {GENERATORS}")
    return block


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    known = {"dataset", "circuit", "train", "seeds", "seed", "noise", "analysis", "out"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    base = path.parent
    ds = parse_dataset_block(_require(raw, "dataset", "config"), base)
    circ = _require(raw, "circuit", "config")
    try:
        scheme = Scheme(_require(circ, "scheme", "circuit"))
    except ValueError:
        raise ConfigError(f"unknown scheme {circ.get('scheme')!r}") from None
    layers = _require(circ, "layers", "circuit")
    layers = [layers] if isinstance(layers, int) else list(layers)
    if not layers or not all(isinstance(v, int) and v >= 1 for v in layers):
        raise ConfigError("circuit.layers must be a positive integer or a list of them")
    encode_scale = float(circ.get("encode_scale", np.pi / 2))
    seeds = raw.get("seeds", [raw.get("seed", 0)])
    if isinstance(seeds, int):
        seeds = [seeds]
    try:
        tcfg = train.TrainConfig.from_dict(raw.get("train") or {})
        ncfg = noise.NoiseConfig(**raw["noise"]) if raw.get("noise") else None
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    analyses = list(raw.get("analysis") or [])
    bad = set(analyses) - {"landscape", "fourier"}
    if bad:
        raise ConfigError(f"unknown analyses {sorted(bad)}")
    return ExperimentConfig(ds, scheme, layers, encode_scale, tcfg, [int(s) for s in seeds], ncfg, analyses,
                            raw.get("out"), base)


def build_dataset(block: dict) -> Dataset:
    """Materialize a (normalized) dataset block."""
    opts = {k: v for k, v in block.items() if k not in ("generator", "csv")}
    try:
        if "csv" in block:
            pca_k = opts.pop("pca_k", None)
            test_fraction = opts.pop("test_fraction", None)
            split_seed = opts.pop("split_seed", 0)
            ds = data.load_csv(block["csv"], **opts)
            if pca_k is not None:
                ds, _ = data.pca_pipeline(ds, int(pca_k), test_fraction, split_seed)
            elif test_fraction is not None:
                ds = data.split_dataset(ds, float(test_fraction), split_seed)
        else:
            gen = block["generator"]
            if gen == "worst_case":
                ds, _ = data.gen_worst_case(int(opts["N"]), [int(c) for c in str(opts["labels"])],
                                            opts.get("variant", "powers_of_two"))
            else:
                ds = {"circles": data.gen_circles, "moons": data.gen_moons, "tetromino": data.gen_tetromino}[gen](**opts)
    except TypeError as exc:
        raise ConfigError(f"bad dataset options: {exc}") from None
    except KeyError as exc:
        raise ConfigError(f"dataset option {exc} missing") from None
    ds.meta["source"] = block
    return ds


def dataset_for_report(report: train.TrainReport, override: str | None = None) -> Dataset:
    if override is not None:
        if not Path(override).exists():
            raise RuntimeFailure(f"dataset file not found: {override}")
        return data.load_csv(override)
    src = report.dataset_meta.get("source")
    if not src:
        raise RuntimeFailure("report does not record its dataset source; pass --data")
    if "csv" in src and not Path(src["csv"]).exists():
        raise RuntimeFailure(f"dataset file recorded in the report is gone: {src['csv']}")
    return build_dataset(src)


def load_report(path) -> train.TrainReport:
    p = Path(path)
    if not p.exists():
        raise RuntimeFailure(f"report not found: {p}")
    try:
        return train.TrainReport.from_json(p)
    except (KeyError, ValueError, TypeError) as exc:
        raise RuntimeFailure(f"cannot read report {p}: {exc}") from None


# ---------------------------------------------------------------------------
# commands


def cmd_dataset(args, out: Path) -> int:
    block = {"generator": args.generator} if args.generator != "csv" else {"csv": args.path}
    seed = args.seed if args.seed is not None else 0
    if args.generator in ("circles", "moons"):
        block.update(n=args.n, noise_sd=args.noise, seed=seed, test_fraction=args.test_fraction)
        if args.generator == "circles":
            block["factor"] = args.factor
    elif args.generator == "tetromino":
        block.update(n_train=args.n_train, noise=args.noise, seed=seed)
    elif args.generator == "worst_case":
        if args.N is None or args.labels is None:
            raise ConfigError("worst_case needs --N and --labels")
        block.update(N=args.N, labels=args.labels, variant=args.variant)
    else:
        if args.pca_k is not None:
            block["pca_k"] = args.pca_k
        if args.test_fraction is not None:
            block["test_fraction"] = args.test_fraction
        block["split_seed"] = seed
    block = parse_dataset_block(block, Path.cwd())
    ds = build_dataset(block)
    out.mkdir(parents=True, exist_ok=True)
    name = args.generator
    if args.generator == "tetromino":
        for part in (data.TRAIN, data.TEST):
            mask = ds.split == part
            sub = Dataset(ds.features[mask], ds.labels[mask], ds.split[mask], dict(ds.meta, part=part))
            data.save_csv(sub, out / f"{name}_{part}.csv")
            print(f"wrote {out / f'{name}_{part}.csv'} ({int(mask.sum())} rows)")
    else:
        data.save_csv(ds, out / f"{name}.csv")
        n_tr, n_te = int(np.sum(ds.split == data.TRAIN)), int(np.sum(ds.split == data.TEST))
        print(f"wrote {out / f'{name}.csv'} ({len(ds.labels)} rows, {n_tr} train / {n_te} test)")
    return EXIT_OK


def cmd_train(args, out: Path | None) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seeds = [args.seed]
    out = out or Path(cfg.out or "out")
    if not Path(out).is_absolute() and args.out is None and cfg.out:
        out = cfg.base_dir / out
    ds = build_dataset(cfg.dataset)
    if not ds.has_both_classes():
        raise RuntimeFailure("training split must contain both classes")
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for L in cfg.layers:
        spec = CircuitSpec(cfg.scheme, ds.n_features, L, encode_scale=cfg.encode_scale)
        reports = train.train_seeds(spec, ds, cfg.train, cfg.seeds)
        for r in reports:
            stem = f"L{L}_seed{r.config.seed}"
            r.to_json(out / f"{stem}.json")
            r.write_loss_csv(out / f"{stem}_loss.csv")
        summ = train.summarize(reports)
        best = next(r for r in reports if r.config.seed == summ["best_seed"])
        row = {"layers": L, **summ, "best_train_test_gap": best.train_accuracy - (best.test_accuracy or 0.0)}
        if cfg.noise is not None:
            nrep = noise.mc_accuracy(spec, best.final_params, best.final_threshold, ds, cfg.noise)
            nrep.to_json(out / f"L{L}_noise.json")
            nrep.write_csv(out / f"L{L}_noise_accuracies.csv")
            row.update(noisy_mean_accuracy=nrep.mean_accuracy, noisy_accuracy_sd=nrep.accuracy_sd)
        if "landscape" in cfg.analyses:
            _landscape(best, ds, 51, out / f"L{L}_landscape")
        if "fourier" in cfg.analyses and ds.n_features == 1:
            analysis.fourier_spectrum(spec, best.final_params).write_csv(out / f"L{L}_fourier.csv")
        rows.append(row)
        test = "n/a" if row["best_test_accuracy"] is None else f"{row['best_test_accuracy']:.4f}"
        print(f"L={L}: best seed {row['best_seed']} train {row['best_train_accuracy']:.4f} test {test}"
              f" | mean test {row['mean_test_accuracy']}")
    header = list(rows[0].keys())
    _write_rows(out / "accuracy_vs_layers.csv", header, [[r[h] for h in header] for r in rows])
    _dump_json({"rows": rows}, out / "summary.json")
    return EXIT_OK


def _landscape(report, ds, grid, stem: Path) -> analysis.LandscapeGrid:
    loss = train.make_objective(report.config.loss, report.spec, ds)
    g = analysis.landscape_projection(report, loss, grid)
    g.write_grid_csv(stem.with_name(stem.name + "_grid.csv"))
    g.write_path_csv(stem.with_name(stem.name + "_path.csv"))
    _dump_json({"axes": g.axes.tolist(), "random_axes": g.random_axes, "origin": g.origin.tolist()},
               stem.with_name(stem.name + ".json"))
    return g


def cmd_analyze(args, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    if args.what == "vc":
        rows = analysis.vc_profile(args.layers)
        analysis.write_vc_csv(rows, out / "vc.csv")
        for r in rows:
            print(f"layers={r.layers}: largest shattered {r.largest_shattered}, alternating fails at "
                  f"{r.smallest_alternating_failure} (2l+1 = {2 * r.layers + 1})")
    elif args.what == "sharpness":
        seed = args.seed if args.seed is not None else 0
        cmp_ = analysis.worst_case_sharpness(N=args.N, seed=seed, fd_step=args.fd_step, restarts=args.restarts)
        if args.scheme in ("both", "original"):
            cmp_.original.to_json(out / "sharpness_original.json")
            print(f"original: {cmp_.original.largest_hessian_eigenvalue:.6g}")
        if args.scheme in ("both", "compressed"):
            cmp_.compressed.to_json(out / "sharpness_compressed.json")
            print(f"compressed: {cmp_.compressed.largest_hessian_eigenvalue:.6g}")
        if args.scheme == "both":
            cmp_.to_json(out / "sharpness.json")
            print(f"ratio: {cmp_.ratio:.6g}")
    elif args.what == "landscape":
        rep = load_report(args.report)
        g = _landscape(rep, dataset_for_report(rep, args.data), args.grid, out / "landscape")
        print(f"wrote {args.grid}x{args.grid} grid; random axes: {g.random_axes}")
    else:
        if args.report:
            rep = load_report(args.report)
            spec, params = rep.spec, rep.final_params
        else:
            spec = CircuitSpec(Scheme(args.scheme), 1, args.layers)
            seed = args.seed if args.seed is not None else 0
            params = np.random.default_rng(seed).uniform(0, 2 * np.pi, spec.n_params)
        spec_ = analysis.fourier_spectrum(spec, params, args.orders)
        spec_.write_csv(out / "fourier.csv")
        print(f"Parseval residual {spec_.parseval_residual():.3g}; max |c_k| above order {spec.n_layers}: "
              f"{spec_.max_above(spec.n_layers):.3g}")
    return EXIT_OK


def cmd_noise(args, out: Path) -> int:
    rep = load_report(args.report)
    ds = dataset_for_report(rep, args.data)
    seed = args.seed if args.seed is not None else 0
    try:
        cfg = noise.NoiseConfig(total_counts=args.counts, mc_repetitions=args.reps, seed=seed, mode=args.mode)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    nrep = noise.mc_accuracy(rep.spec, rep.final_params, rep.final_threshold, ds, cfg, split=args.split)
    out.mkdir(parents=True, exist_ok=True)
    nrep.to_json(out / "noise.json")
    nrep.write_csv(out / "noise_accuracies.csv")
    flag = " (single repetition: sd is 0 by definition)" if nrep.single_repetition else ""
    print(f"accuracy {nrep.mean_accuracy:.4f} +/- {nrep.accuracy_sd:.4f}{flag}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")

    p = argparse.ArgumentParser(prog="reupload", parents=[common],
                                description="Simulate, train and analyze photonic re-uploading classifiers.")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("dataset", parents=[common], help="generate or ingest a dataset")
    d.add_argument("generator", choices=GENERATORS + ("csv",))
    d.add_argument("path", nargs="?", help="input CSV (csv only)")
    d.add_argument("--n", type=int, default=500)
    d.add_argument("--factor", type=float, default=0.6)
    d.add_argument("--noise", type=float, default=None)
    d.add_argument("--test-fraction", type=float, default=None)
    d.add_argument("--n-train", type=int, default=100)
    d.add_argument("--N", type=int)
    d.add_argument("--labels", help="worst_case labels as a 0/1 string")
    d.add_argument("--variant", default="powers_of_two", choices=("powers_of_two", "inverse_powers"))
    d.add_argument("--pca-k", type=int)

    t = sub.add_parser("train", parents=[common], help="train from a YAML experiment config")
    t.add_argument("config")

    a = sub.add_parser("analyze", parents=[common], help="learning-theory analyses")
    asub = a.add_subparsers(dest="what", required=True)
    v = asub.add_parser("vc", parents=[common])
    v.add_argument("--layers", type=int, required=True)
    s = asub.add_parser("sharpness", parents=[common])
    s.add_argument("--scheme", choices=("both", "original", "compressed"), default="both")
    s.add_argument("--N", type=int, default=20)
    s.add_argument("--fd-step", type=float, default=1e-4)
    s.add_argument("--restarts", type=int, default=5)
    ls = asub.add_parser("landscape", parents=[common])
    ls.add_argument("--report", required=True)
    ls.add_argument("--grid", type=int, default=101)
    ls.add_argument("--data")
    f = asub.add_parser("fourier", parents=[common])
    f.add_argument("--report")
    f.add_argument("--scheme", choices=("original", "compressed"), default="original")
    f.add_argument("--layers", type=int, default=1)
    f.add_argument("--orders", type=int)

    n = sub.add_parser("noise", parents=[common], help="Monte Carlo shot-noise accuracy")
    n.add_argument("--report", required=True)
    n.add_argument("--counts", type=int, default=10_000)
    n.add_argument("--reps", type=int, default=1000)
    n.add_argument("--mode", choices=("poisson", "binomial"), default="poisson")
    n.add_argument("--split", choices=(data.TRAIN, data.TEST), default=data.TEST)
    n.add_argument("--data")
    return p


def _defaults(args) -> None:
    args.seed = getattr(args, "seed", None)
    args.out = getattr(args, "out", None)
    if getattr(args, "command", None) == "dataset" and args.noise is None:
        args.noise = {"circles": 0.05, "moons": 0.1, "tetromino": 0.1}.get(args.generator)
    if getattr(args, "command", None) == "dataset" and args.test_fraction is None and args.generator in ("circles", "moons"):
        args.test_fraction = 0.2


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    _defaults(args)
    out = Path(args.out) if args.out is not None else None
    try:
        if args.command == "dataset":
            if args.generator == "csv" and not args.path:
                parser.error("dataset csv needs an input path")
            return cmd_dataset(args, out or Path("out"))
        if args.command == "train":
            return cmd_train(args, out)
        if args.command == "analyze":
            return cmd_analyze(args, out or Path("out"))
        return cmd_noise(args, out or Path("out"))
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RuntimeFailure, ReuploadError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
