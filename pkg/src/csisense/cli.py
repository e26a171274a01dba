"""Command-line entry point: ``csisense <command> [options]``.

Exit codes: 0 success, 2 invalid input or configuration, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import core, sim
from .errors import NumericalError, ValidationError
from .harness import protocol
from .harness.config import ExperimentConfig
from .harness.data import to_dataset
from .nn.checkpoint import save_checkpoint, write_curves
from .preprocess.pipeline import PipelineSpec, run_pipeline
from .transforms import minirocket, music, spectral

log = logging.getLogger("csisense")


# -- helpers ---------------------------------------------------------------------------


def _load_config(args, **overrides):
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig(**overrides)
    if args.seed is not None:
        cfg = cfg.with_(seeds=(args.seed,))
    return cfg


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _read_samples(path):
    """A directory of ``.csit`` files (label in metadata) or a single file."""
    p = Path(path)
    files = sorted(p.glob("*.csit")) if p.is_dir() else [p]
    if not files:
        raise ValidationError(f"no .csit files in {p}", "data")
    return [(c, int(c.meta.get("label", 0))) for c in map(core.load, files)]


def _dataset(args, kind="activity"):
    if getattr(args, "data", None):
        return to_dataset(_read_samples(args.data))
    templates = sim.activity_templates() if kind == "activity" else sim.occupancy_templates()
    return to_dataset(sim.make_activity_dataset(templates, args.per_class, seed=args.data_seed))


def _write_report(out, report, curves):
    report.save(out / "report.json")
    write_curves(out / "curves.csv", curves)


# -- commands --------------------------------------------------------------------------


def cmd_simulate(args):
    out = _out_dir(args)
    if args.config:
        scenes = sim.load_scenes(args.config)
        if args.seed is not None:
            scenes = [replace(s, seed=args.seed) for s in scenes]
        samples = [(sim.generate(s), s.label) for s in scenes]
    else:
        seed = 0 if args.seed is None else args.seed
        samples = sim.make_activity_dataset(sim.activity_templates(), args.per_class, seed=seed)
    for i, (csi, _) in enumerate(samples):
        core.save(csi, out / f"sample_{i:05d}.csit")
    print(f"wrote {len(samples)} samples to {out}")


def cmd_preprocess(args):
    spec = PipelineSpec.load(args.pipeline)
    result = run_pipeline(spec, core.load(args.inp))
    if isinstance(result, core.CsiTensor):
        n = core.save(result, args.out)
        print(f"wrote {n} bytes to {args.out}")
    else:
        np.save(args.out, result)
        print(f"wrote array {result.shape} to {args.out}")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def cmd_features(args):
    samples = _read_samples(args.inp)
    if args.method == "minirocket":
        # one series per sample: subcarrier amplitude traces laid end to end
        x = np.stack([np.abs(c.data).transpose(1, 2, 3, 0).reshape(-1) for c, _ in samples])
        model = minirocket.minirocket_fit(x, seed=args.seed or 0)
        feats = minirocket.minirocket_transform(model, x)
        header = ["label", *[f"f{i}" for i in range(feats.shape[1])]]
        _write_csv(args.out, header, [[lab, *row] for (_, lab), row in zip(samples, feats)])
    elif args.method == "stft":
        csi = samples[0][0]
        trace = np.abs(csi.data[:, args.subcarrier, 0, 0])
        mag = spectral.stft(trace, args.window_len, args.hop, args.window)
        _write_csv(args.out, ["frame", *[f"bin{k}" for k in range(mag.shape[1])]], [[i, *r] for i, r in enumerate(mag)])
    else:
        csi = samples[0][0]
        col = csi.data[:, args.subcarrier, 0, 0]
        grid = music.music_velocity(col, csi.carrier_freqs[args.subcarrier], csi.sample_interval, args.sources)
        _write_csv(args.out, ["velocity", "pseudo_spectrum"], zip(grid.velocities, grid.values))
        print("peaks:", " ".join(f"{v:.2f}" for v in grid.peaks()[: args.sources]))
    print(f"wrote {args.out}")


def cmd_baseline(args):
    cfg = _load_config(args, mode="supervised")
    out = _out_dir(args)
    ds = _dataset(args)
    report = protocol.run_supervised(cfg, ds)
    _write_report(out, report, {f"loss_seed{s}": v for s, v in report.extra["loss"].items()})
    print(f"supervised accuracy {report.accuracy:.4f} over seeds {report.seeds_used}")


def cmd_train_ssl(args):
    cfg = _load_config(args, mode="ssl_pretrain")
    out = _out_dir(args)
    ds = _dataset(args)
    curves = {}
    for seed in cfg.seeds:
        tr, te = protocol.split(ds.y, cfg.split_ratio, seed)
        net, hist = protocol.pretrain_ssl(cfg, ds.x[tr], seed)
        z = protocol.embed(net.encoder, ds.x[te].astype(cfg.np_dtype))
        ok, std = protocol.collapse_gate(z, cfg.collapse_std, cfg.collapse_fraction)
        curves[f"loss_seed{seed}"] = hist.loss
        save_checkpoint(net.encoder, out / f"encoder_seed{seed}.ckpt", {"config": cfg.to_dict(), "seed": seed})
        print(f"seed {seed}: final loss {hist.loss[-1] if hist.loss else float('nan'):.4f}, gate {'ok' if ok else 'FAILED'}")
    write_curves(out / "curves.csv", curves)


def cmd_probe(args):
    cfg = _load_config(args)
    out = _out_dir(args)
    ds = _dataset(args)
    if args.control:
        report = protocol.random_baseline_probe(cfg, ds)
        curves = {}
    else:
        def keep(seed, _res, net, _hist):
            save_checkpoint(net.encoder, out / f"encoder_seed{seed}.ckpt", {"config": cfg.to_dict(), "seed": seed})

        report = protocol.run_ssl_probe(cfg, ds, on_seed=keep)
        curves = {f"ssl_loss_seed{s}": v for s, v in report.extra["ssl_loss"].items()}
        curves.update({f"probe_loss_seed{s}": v for s, v in report.extra["probe_curves"].items()})
    _write_report(out, report, curves)
    print(f"{cfg.shots}-shot accuracy {report.accuracy:.4f} over seeds {report.seeds_used}")


def cmd_transfer(args):
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig.transfer_defaults()
    if args.seed is not None:
        cfg = cfg.with_(seeds=(args.seed,))
    out = _out_dir(args)
    d1 = _dataset(args, "activity")
    d2 = to_dataset(sim.make_activity_dataset(sim.occupancy_templates(), args.per_class, seed=args.data_seed + 1))
    report = protocol.transfer_run(cfg, d1, d2)
    control = protocol.random_baseline_probe(cfg, d2)
    report.extra["random_control_accuracy"] = control.accuracy
    _write_report(out, report, {f"ssl_loss_seed{s}": v for s, v in report.extra["ssl_loss"].items()})
    print(f"transfer accuracy {report.accuracy:.4f} (random encoder {control.accuracy:.4f})")


# -- parser ----------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="csisense", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_help="output directory"):
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--seed", type=int, help="run a single seed instead of the configured list")
        sp.add_argument("--out", required=True, help=out_help)

    def data_opts(sp):
        sp.add_argument("--data", help="directory of .csit samples; default: synthetic activity set")
        sp.add_argument("--per-class", type=int, default=100)
        sp.add_argument("--data-seed", type=int, default=7)

    sp = sub.add_parser("simulate", help="render scenes (or the synthetic activity set) to .csit files")
    common(sp)
    sp.add_argument("--scene", dest="config", help="scene JSON (same as --config)")
    sp.add_argument("--per-class", type=int, default=100)
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("preprocess", help="run a JSON pipeline over one .csit file")
    sp.add_argument("--pipeline", required=True)
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--out", required=True, help="output .csit (or .npy for array results)")
    sp.set_defaults(fn=cmd_preprocess)

    sp = sub.add_parser("features", help="MiniRocket, STFT or MUSIC features as CSV")
    sp.add_argument("--method", choices=("minirocket", "stft", "music"), required=True)
    sp.add_argument("--in", dest="inp", required=True, help=".csit file or directory")
    sp.add_argument("--out", required=True, help="output CSV")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--subcarrier", type=int, default=0)
    sp.add_argument("--window-len", type=int, default=32)
    sp.add_argument("--hop", type=int, default=8)
    sp.add_argument("--window", choices=("hann", "rect"), default="hann")
    sp.add_argument("--sources", type=int, default=1)
    sp.set_defaults(fn=cmd_features)

    for name, fn, help_ in (
        ("baseline", cmd_baseline, "supervised baseline"),
        ("train-ssl", cmd_train_ssl, "SSL pretraining; writes encoder checkpoints"),
        ("probe", cmd_probe, "SSL pretraining followed by the few-shot linear probe"),
        ("transfer", cmd_transfer, "pretrain on the activity set, probe on the occupancy set"),
    ):
        sp = sub.add_parser(name, help=help_)
        common(sp)
        data_opts(sp)
        if name == "probe":
            sp.add_argument("--control", action="store_true", help="probe a random, untrained encoder instead")
        sp.set_defaults(fn=fn)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.fn(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
