"""Command-line entry point: ``dltm simulate|fit|diagnose|forecast|pg-bench|replay``.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from dltm import __version__
from dltm.corpus import load_corpus, save_corpus
from dltm.diagnostics import convergence_report, prior_overlap_curve
from dltm.forecast import BANDS, archive_spec, forecast_curve, marginal_topic_curve
from dltm.gibbs import ChainConfig, Hyperparams, PosteriorArchive, json_default, run_chain, run_multi_chain, set_threads
from dltm.polya_gamma import bench_csv, pg_bench
from dltm.synth import GroundTruth, SynthDesign, simulate_corpus

log = logging.getLogger("dltm")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _load_toml(path):
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _pick_fields(cls, table):
    names = {f.name for f in fields(cls)}
    unknown = set(table) - names
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return {k: v for k, v in table.items() if k in names}


def _resolve_threads(flag):
    if flag is not None:
        return flag
    env = os.environ.get("DLTM_THREADS")
    return int(env) if env else None


def write_manifest(out, subcommand, argv, params, seed, config_path=None):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "subcommand": subcommand,
        "argv": list(argv),
        "config_path": None if config_path is None else str(config_path),
        "params": params,
        "seed": seed,
        "out": str(out),
        "version": __version__,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=json_default) + "\n")
    return manifest


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------


def cmd_simulate(args, argv):
    table = _load_toml(args.design) if args.design else {}
    table = table.get("design", table)
    design = SynthDesign(**_pick_fields(SynthDesign, table))
    if args.seed is not None:
        design.seed = args.seed
    out = Path(args.out)
    write_manifest(out, "simulate", argv, asdict(design), design.seed, args.design)
    corpus, truth = simulate_corpus(design)
    save_corpus(corpus, out / "corpus.txt")
    truth.save(out / "truth", corpus)
    print(f"wrote {out / 'corpus.txt'} ({corpus.n_docs} documents, {corpus.n_words} words) and {out / 'truth'}")


def fit_settings(table, base_dir):
    """Split a fit config table into (corpus path, ChainConfig kwargs, Hyperparams)."""
    table = dict(table)
    hyper = table.pop("hyper", {})
    corpus = table.pop("corpus", None)
    table.pop("out", None)
    table.pop("chains", None)
    table.pop("format", None)
    if corpus is not None:
        corpus = Path(corpus)
        if not corpus.is_absolute():
            corpus = base_dir / corpus
    return corpus, _pick_fields(ChainConfig, table), Hyperparams(**_pick_fields(Hyperparams, hyper))


def cmd_fit(args, argv):
    table = _load_toml(args.config)
    base = Path(args.config).resolve().parent
    corpus_path, cfg_kw, hp = fit_settings(table, base)
    if args.corpus:
        corpus_path = Path(args.corpus)
    if corpus_path is None:
        raise UsageError("no corpus given (config key 'corpus' or --corpus)")
    if args.seed is not None:
        cfg_kw["seed"] = args.seed
    threads = _resolve_threads(args.threads) or cfg_kw.get("threads")
    cfg_kw["threads"] = threads
    cfg_kw.setdefault("parallel", True)
    config = ChainConfig(**cfg_kw)
    chains = args.chains or table.get("chains", 1)
    fmt = args.format or table.get("format", "csv")
    out = Path(args.out or table.get("out") or "fit")
    params = {"corpus": str(corpus_path), "config": asdict(config), "hyper": asdict(hp), "chains": chains, "format": fmt}
    write_manifest(out, "fit", argv, params, config.seed, args.config)
    corpus = load_corpus(corpus_path)
    corpus.check_lengths()
    if config.parallel:
        set_threads(threads)
    if chains > 1:
        run_multi_chain(corpus, config, hp, chains, out=out, fmt=fmt)
    else:
        run_chain(corpus, config, hp, out=out / "chain_0", fmt=fmt)
    print(f"wrote {chains} chain archive(s) under {out}")


def _csv(path, header, rows):
    lines = [header] + [",".join(str(x) if isinstance(x, (int, np.integer)) else format(float(x), ".17g") for x in r) for r in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_diagnose(args, argv):
    out = Path(args.out)
    params = {"archives": args.archives, "truth": args.truth, "pairs": args.pairs, "overlap_V": args.overlap_v}
    seed = 0 if args.seed is None else args.seed
    write_manifest(out, "diagnose", argv, params, seed)
    archives = [PosteriorArchive.load(a) for a in args.archives]
    truth = GroundTruth.load(args.truth) if args.truth else None
    rep = convergence_report(archives, truth, n_pairs=args.pairs, seed=seed)
    (out / "report.json").write_text(json.dumps(rep.summary(), indent=2, sort_keys=True) + "\n")
    if rep.topic_mean_tv is not None:
        K, T = rep.topic_mean_tv.shape
        _csv(out / "topic_mean_tv.csv", "k,t,tv", [(k, t, rep.topic_mean_tv[k, t]) for k in range(K) for t in range(T)])
        _csv(out / "doc_mean_tv.csv", "d,tv", list(enumerate(rep.doc_mean_tv)))
        _csv(out / "across_trace.csv", "sample,k,tv", [(s, k, v) for s, row in enumerate(rep.across_trace) for k, v in enumerate(row)])
    if rep.within is not None:
        _csv(out / "within.csv", "chain,pair,k,tv", [(c, i, k, v) for c, m in enumerate(rep.within) for i, row in enumerate(m) for k, v in enumerate(row)])
    if rep.truth_topic_tv is not None:
        _csv(out / "truth_topic_tv.csv", "chain,k,t,tv", [(c, k, t, v) for c, m in enumerate(rep.truth_topic_tv) for k, row in enumerate(m) for t, v in enumerate(row)])
        _csv(out / "truth_doc_tv.csv", "chain,d,tv", [(c, d, v) for c, row in enumerate(rep.truth_doc_tv) for d, v in enumerate(row)])
    if args.overlap_v:
        grid = np.array(args.overlap_grid)
        curve = prior_overlap_curve(args.overlap_v, grid, n_mc=args.overlap_mc, rng=seed)
        _csv(out / "overlap.csv", "sigma2,overlap", list(zip(grid, curve)))
    print(f"wrote {out / 'report.json'}")


def cmd_forecast(args, argv):
    out = Path(args.out)
    seed = 0 if args.seed is None else args.seed
    params = {k: v for k, v in vars(args).items() if k not in ("func",)}
    write_manifest(out, "forecast", argv, params, seed)
    archive = PosteriorArchive.load(args.archive)
    spec = archive_spec(archive)
    if args.trend:
        hp = Hyperparams(**archive.hyper)
        spec = hp.state_space(args.trend, args.omega if args.omega is not None else archive.config.get("omega", math.pi / 2))
        if spec.p != archive.alpha.shape[-1]:
            raise ValueError(f"trend {args.trend!r} has state size {spec.p} but the archive stores {archive.alpha.shape[-1]}")
    kw = dict(n_mc=args.n_mc, seed=seed, include_obs_noise=not args.no_obs_noise, band=args.band)
    (out / "curve.csv").write_text(marginal_topic_curve(archive, spec, **kw).to_csv())
    if args.horizon > 0:
        (out / "forecast.csv").write_text(forecast_curve(archive, spec, horizon=args.horizon, **kw).to_csv())
    print(f"wrote curves under {out}")


def cmd_pg_bench(args, argv):
    seed = 0 if args.seed is None else args.seed
    rows = pg_bench(args.n, args.b_rate, args.c_sd, args.replications, seed, threshold=args.threshold)
    text = bench_csv(rows)
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)


def cmd_replay(args, argv):
    manifest = json.loads(Path(args.manifest).read_text())
    return main(manifest["argv"])


# --------------------------------------------------------------------------


def build_parser():
    p = _Parser(prog="dltm", description="Dynamic linear topic model tools.")
    p.add_argument("--version", action="version", version=f"dltm {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def common(sp, threads=False):
        sp.add_argument("--seed", type=int)
        if threads:
            sp.add_argument("--threads", type=int, help="worker threads (default: DLTM_THREADS or all cores)")

    s = sub.add_parser("simulate", help="generate a synthetic corpus and its truth")
    s.add_argument("--design", help="TOML file with design keys (optionally under [design])")
    s.add_argument("--out", required=True)
    common(s)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("fit", help="run the Gibbs sampler")
    s.add_argument("--config", required=True, help="TOML fit config")
    s.add_argument("--corpus", help="override the config's corpus path")
    s.add_argument("--out")
    s.add_argument("--chains", type=int)
    s.add_argument("--format", choices=("csv", "npy"))
    common(s, threads=True)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("diagnose", help="TV convergence report")
    s.add_argument("archives", nargs="+")
    s.add_argument("--truth")
    s.add_argument("--out", required=True)
    s.add_argument("--pairs", type=int, default=1000)
    s.add_argument("--overlap-v", type=int, help="also emit a prior overlap curve for this vocabulary size")
    s.add_argument("--overlap-grid", type=float, nargs="+", default=[0.01, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0])
    s.add_argument("--overlap-mc", type=int, default=500)
    common(s)
    s.set_defaults(func=cmd_diagnose)

    s = sub.add_parser("forecast", help="marginal topic curves and forecasts")
    s.add_argument("archive")
    s.add_argument("--out", required=True)
    s.add_argument("--horizon", type=int, default=1)
    s.add_argument("--trend", choices=("random_walk", "linear", "quadratic", "harmonic"))
    s.add_argument("--omega", type=float)
    s.add_argument("--n-mc", type=int, default=200)
    s.add_argument("--band", choices=BANDS, default="new_document")
    s.add_argument("--no-obs-noise", action="store_true")
    common(s)
    s.set_defaults(func=cmd_forecast)

    s = sub.add_parser("pg-bench", help="time exact vs Gaussian Polya-Gamma sampling")
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--b-rate", type=float, default=150.0)
    s.add_argument("--c-sd", type=float, default=1.0)
    s.add_argument("--threshold", type=float)
    s.add_argument("--replications", type=int, default=100)
    s.add_argument("--out")
    common(s)
    s.set_defaults(func=cmd_pg_bench)

    s = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    s.add_argument("manifest")
    s.set_defaults(func=cmd_replay)
    return p


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        rc = args.func(args, argv)
    except UsageError as exc:
        print(f"dltm: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, KeyError, TypeError, tomllib.TOMLDecodeError, np.linalg.LinAlgError) as exc:
        print(f"dltm: error: {exc}", file=sys.stderr)
        return 2
    return rc or 0


if __name__ == "__main__":
    sys.exit(main())
