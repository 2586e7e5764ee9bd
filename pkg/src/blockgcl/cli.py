"""Command-line entry point.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, default_workers, load_sweep_spec, load_train_config
from .encoder import load_checkpoint, save_checkpoint
from .evaluation import embed, linear_probe, mad_profile
from .graph import DatasetFormatError, generate_sbm, load_dataset, resolve_dataset_path, save_dataset
from .report import SchemaError, plot, read_csv, write_csv, write_embeddings_csv, write_mad_csv
from .sweep import run_sweep
from .trainer import fit

log = logging.getLogger("blockgcl")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

SUMMARY_COLUMNS = [
    "dataset", "mode", "depth", "block_size", "seed", "epochs", "final_loss",
    "acc_mean", "acc_std", "final_mad_last_layer",
]


def _overrides(args) -> dict:
    out = {}
    if getattr(args, "seed", None) is not None:
        out["seed"] = args.seed
    if getattr(args, "precision", None) is not None:
        out["precision"] = args.precision
    return out


def _load_graph(path, opts=None):
    kw = {}
    if opts is not None:
        kw = dict(row_normalize=opts.row_normalize, split_seed=opts.split_seed)
    return load_dataset(resolve_dataset_path(path), **kw)


def cmd_train(args) -> int:
    cfg, opts = load_train_config(args.config, overrides=_overrides(args))
    g = _load_graph(opts.dataset, opts)
    out = Path(args.out or "runs/train")
    out.mkdir(parents=True, exist_ok=True)
    resolved = cfg.resolved(g.name)
    header = {**resolved.as_dict(), **dataclasses.asdict(opts), "dataset_name": g.name}

    losses_path = out / "losses.csv"
    if losses_path.exists():
        losses_path.unlink()
    enc, record = fit(g, cfg, loss_log=losses_path)
    save_checkpoint(enc, out / "encoder.ckpt")

    profile = mad_profile(enc, g)
    write_mad_csv(out / "mad.csv", profile, header)
    z = embed(enc, g)
    if opts.dump_embeddings:
        write_embeddings_csv(out / "embeddings.csv", z, header)
    probe = linear_probe(
        z, g, repeats=opts.probe_repeats, seed=opts.probe_seed,
        lr=opts.probe_lr, weight_decay=opts.probe_weight_decay, epochs=opts.probe_epochs,
    )
    write_csv(out / "probe.csv", ["repeat", "accuracy"], list(enumerate(probe.accuracies)), header)
    final_loss = record.epoch_losses[-1] if record.epoch_losses else None
    write_csv(
        out / "summary.csv",
        SUMMARY_COLUMNS,
        [[g.name, resolved.mode, resolved.depth, resolved.effective_block_size, resolved.seed,
          resolved.epochs, final_loss, probe.mean, probe.std, profile.values[-1]]],
        header,
    )
    last_mad = profile.values[-1]
    print(
        f"{g.name} mode={resolved.mode} depth={resolved.depth} "
        f"block_size={resolved.effective_block_size} seed={resolved.seed} "
        f"acc={probe.mean:.4f}+-{probe.std:.4f} "
        f"mad_last={'undefined' if last_mad is None else f'{last_mad:.4f}'} -> {out}"
    )
    return EXIT_OK


def cmd_sweep(args) -> int:
    over = _overrides(args)
    if args.workers is not None:
        over["workers"] = args.workers
    spec = load_sweep_spec(args.config, overrides=over)
    workers = spec.workers or default_workers()
    out = Path(args.out or "runs/sweep")
    path = run_sweep(spec, out, workers=workers)
    _, _, rows = read_csv(path)
    failed = sum(r["status"] != "ok" for r in rows)
    print(f"{len(rows)} cells ({failed} failed) -> {path}")
    return EXIT_OK


def cmd_mad(args) -> int:
    enc = load_checkpoint(args.checkpoint)
    g = _load_graph(args.dataset)
    profile = mad_profile(enc, g)
    out = Path(args.out or "mad.csv")
    write_mad_csv(out, profile, {"checkpoint": str(args.checkpoint), "dataset": str(args.dataset)})
    print(" ".join("undefined" if v is None else f"{v:.4f}" for v in profile.values))
    return EXIT_OK


def cmd_probe(args) -> int:
    g = _load_graph(args.dataset)
    if args.checkpoint:
        z = embed(load_checkpoint(args.checkpoint), g)
        source = str(args.checkpoint)
    elif args.embeddings:
        _, cols, rows = read_csv(args.embeddings)
        z = np.array([[float(r[c]) for c in cols if c != "node"] for r in rows])
        source = str(args.embeddings)
    else:
        raise ConfigError("probe needs --checkpoint or --embeddings")
    seed = args.seed or 0
    res = linear_probe(z, g, repeats=args.repeats, seed=seed)
    if args.out:
        write_csv(args.out, ["repeat", "accuracy"], list(enumerate(res.accuracies)),
                  {"source": source, "dataset": str(args.dataset), **res.params})
    print(f"acc={res.mean:.4f}+-{res.std:.4f} over {args.repeats} repeats")
    return EXIT_OK


def cmd_gen_synthetic(args) -> int:
    g = generate_sbm(
        args.blocks, args.nodes_per_block, args.p_in, args.p_out, args.feature_dim,
        seed=args.seed or 0, noise=args.noise,
    )
    out = save_dataset(g, args.out or "sbm")
    s = g.summary()
    print(f"{s['nodes']} nodes, {s['edges_undirected']} edges, {s['features']} features -> {out}")
    return EXIT_OK


def cmd_plot(args) -> int:
    out = plot(args.results, args.kind, args.out or "plot.svg")
    print(out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blockgcl", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, help="key = value config file")
        sp.add_argument("--out", help="output directory or file")
        sp.add_argument("--seed", type=int)

    t = sub.add_parser("train", help="train one encoder, then MAD + linear probe")
    common(t)
    t.add_argument("--precision", choices=["f32", "f64"])
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("sweep", help="run a depth/block-size/mode grid")
    common(s)
    s.add_argument("--precision", choices=["f32", "f64"])
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_sweep)

    m = sub.add_parser("mad", help="per-layer MAD of a checkpoint on a dataset")
    common(m, config=False)
    m.add_argument("--checkpoint", required=True)
    m.add_argument("--dataset", required=True)
    m.set_defaults(func=cmd_mad)

    pr = sub.add_parser("probe", help="linear probe on checkpoint or embedding CSV")
    common(pr, config=False)
    pr.add_argument("--dataset", required=True)
    pr.add_argument("--checkpoint")
    pr.add_argument("--embeddings")
    pr.add_argument("--repeats", type=int, default=5)
    pr.set_defaults(func=cmd_probe)

    gsyn = sub.add_parser("gen-synthetic", help="write a stochastic-block-model dataset")
    common(gsyn, config=False)
    gsyn.add_argument("--blocks", type=int, default=2)
    gsyn.add_argument("--nodes-per-block", type=int, default=50)
    gsyn.add_argument("--p-in", type=float, default=0.5)
    gsyn.add_argument("--p-out", type=float, default=0.05)
    gsyn.add_argument("--feature-dim", type=int, default=16)
    gsyn.add_argument("--noise", type=float, default=1.0)
    gsyn.set_defaults(func=cmd_gen_synthetic)

    pl = sub.add_parser("plot", help="render results CSV as an SVG line chart")
    pl.add_argument("results")
    pl.add_argument("--kind", choices=["depth-accuracy", "mad-layers"], required=True)
    pl.add_argument("--out")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, DatasetFormatError, SchemaError) as exc:
        print(f"blockgcl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        log.debug("failure", exc_info=True)
        print(f"blockgcl: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
