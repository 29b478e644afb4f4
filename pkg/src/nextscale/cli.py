"""Command-line entry point: ``nextscale <subcommand> [options]``.

Exit codes: 0 success, 1 usage or configuration error, 2 shape/domain
error, 3 file or format error. Diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from ._validation import parse_size
from .analysis import BENCH_HEADER, delta_log_magnitude, latency_bench, nyquist_bin
from .codec import Codebook, encode_multiscale, format_ladder, parse_ladder, reconstruct
from .config import SCHEMA, Config, ConfigError
from .dse import PriorMode, build_prior
from .exceptions import DomainError, FormatError, NextScaleError, PersistenceError, ShapeError
from .experiments import ABLATION_HEADER, ablation_suite, build_configs, execute, load_codebook, load_reference
from .grids import load_tensor, load_tokens, save_tensor, save_tokens, write_csv
from .guidance import apply_ssg, verify_closed_form
from .synth import KINDS, synthesize

HELP_WIDTH = 88


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _formatter(prog):
    return argparse.HelpFormatter(prog, width=HELP_WIDTH)


def _hw(text):
    size = parse_size(text)
    if len(size) != 2:
        raise argparse.ArgumentTypeError(f"expected HxW, got {text!r}")
    return size


def _sizes(text):
    out = []
    for part in text.split(","):
        size = parse_size(part)
        if len(size) != 3:
            raise argparse.ArgumentTypeError(f"expected HxWxV entries, got {part!r}")
        out.append(size)
    return out


def _add_config_flags(p):
    p.add_argument("--config", metavar="FILE", help="key=value config file; flags override it")
    for name, key in SCHEMA.items():
        kw = dict(dest=f"cfg_{name}", default=None, help=f"{key.help} (default: {key.default})")
        if key.kind == "enum":
            kw["choices"] = key.choices
        p.add_argument(f"--{name.replace('_', '-')}", metavar=None if key.choices else "V", **kw)
    p.add_argument("--out", required=True, metavar="PATH", help="output directory (or CSV for ablate)")


def _config_from_args(args) -> Config:
    cfg = Config.from_file(args.config) if args.config else Config()
    overrides = {name: getattr(args, f"cfg_{name}") for name in SCHEMA}
    return cfg.update(overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nextscale", description="Guided next-scale generation toolkit.",
                     formatter_class=_formatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    p = sub.add_parser("dse", help="build a prior from coarse logits", formatter_class=_formatter)
    p.add_argument("--in", dest="inp", required=True, metavar="TENSOR", help="coarse logits (NSGT)")
    p.add_argument("--out", required=True, metavar="TENSOR", help="output prior (NSGT)")
    p.add_argument("--target", required=True, type=_hw, metavar="HxW", help="target spatial size")
    p.add_argument("--mode", default="dse", choices=[m.value for m in PriorMode], help="prior construction")
    p.add_argument("--interp", default="linear", choices=["nearest", "linear"],
                   help="interpolation for the extrapolated band")
    p.add_argument("--raw-copy", action="store_true", help="embed coarse coefficients without amplitude correction")

    p = sub.add_parser("guide", help="apply guidance, or verify the closed form", formatter_class=_formatter)
    p.add_argument("--logits", metavar="TENSOR", help="current-step logits (NSGT)")
    p.add_argument("--prior", metavar="TENSOR",
                   help="prior at the logits' size, or smaller previous-step logits to build it from")
    p.add_argument("--beta", type=float, default=1.0, help="guidance scale (default: 1.0)")
    p.add_argument("--mode", default="dse", choices=[m.value for m in PriorMode],
                   help="prior construction when --prior is smaller than --logits")
    p.add_argument("--out", metavar="TENSOR", help="guided logits (NSGT)")
    p.add_argument("--verify", action="store_true", help="check the closed-form maximiser numerically")
    p.add_argument("--dim", type=int, default=32, help="vector length for --verify (default: 32)")
    p.add_argument("--trials", type=int, default=100, help="random instances for --verify (default: 100)")
    p.add_argument("--seed", type=int, default=0, help="seed for --verify (default: 0)")

    p = sub.add_parser("codec", help="multi-scale residual quantisation", formatter_class=_formatter)
    csub = p.add_subparsers(dest="codec_command", metavar="ACTION", parser_class=_Parser)
    e = csub.add_parser("encode", help="feature tensor -> token maps", formatter_class=_formatter)
    e.add_argument("--feature", required=True, metavar="TENSOR", help="feature field (NSGT)")
    e.add_argument("--ladder", default="1x1,2x2,4x4,8x8", help="scale ladder (default: 1x1,2x2,4x4,8x8)")
    e.add_argument("--codebook", default="gen:32,auto,0,0.5",
                   help="codebook tensor or gen:V,C|auto,SEED[,SCALE] (default: gen:32,auto,0,0.5)")
    e.add_argument("--upsample", default="nearest", choices=["nearest", "linear"], help="upsampler U")
    e.add_argument("--out", required=True, metavar="DIR", help="output directory")
    d = csub.add_parser("decode", help="token maps -> feature tensor", formatter_class=_formatter)
    d.add_argument("--in", dest="inp", required=True, metavar="DIR", help="directory written by encode")
    d.add_argument("--out", required=True, metavar="TENSOR", help="reconstructed feature field (NSGT)")

    for name, text in (("run", "generate every scale, baseline vs guided"),
                       ("complete", "teacher-force a prefix, generate the rest"),
                       ("ablate", "prior x decay ablation grid")):
        _add_config_flags(sub.add_parser(name, help=text, formatter_class=_formatter))

    p = sub.add_parser("analyze", help="radial delta log-magnitude profile", formatter_class=_formatter)
    p.add_argument("--a", required=True, metavar="TENSOR", help="first field (NSGT)")
    p.add_argument("--b", required=True, metavar="TENSOR", help="second field (NSGT)")
    p.add_argument("--prev", type=_hw, metavar="HxW", help="previous-scale size for the Nyquist marker")
    p.add_argument("--out", required=True, metavar="CSV", help="profile CSV")

    p = sub.add_parser("bench", help="guidance latency vs a dense predictor step", formatter_class=_formatter)
    p.add_argument("--sizes", type=_sizes, default=[(8, 8, 256), (16, 16, 512)], metavar="HxWxV,...",
                   help="previous-scale sizes; the current scale doubles them (default: 8x8x256,16x16x512)")
    p.add_argument("--reps", type=int, default=100, help="timed repetitions, at least 10 (default: 100)")
    p.add_argument("--out", required=True, metavar="CSV", help="timing CSV")

    p = sub.add_parser("demo", help="synthesise a reference feature field", formatter_class=_formatter)
    p.add_argument("--kind", default="blobs", choices=KINDS, help="pattern (default: blobs)")
    p.add_argument("--size", default="8x8x4", metavar="HxWxC", help="field size (default: 8x8x4)")
    p.add_argument("--seed", type=int, default=0, help="seed (default: 0)")
    p.add_argument("--out", required=True, metavar="TENSOR", help="output tensor (NSGT)")
    return parser


# -- handlers -------------------------------------------------------------------


def _cmd_dse(args):
    prev = load_tensor(args.inp)
    prior = build_prior(prev, *args.target, args.mode, amplitude_preserving=not args.raw_copy,
                        interp=args.interp)
    save_tensor(prior, args.out)


def _cmd_guide(args):
    if args.verify:
        res = verify_closed_form(args.dim, args.trials, args.seed)
        print(f"max stationarity residual: {res.max_fd_gradient_norm:.3e}")
        print(f"max gradient-ascent error: {res.max_ascent_error:.3e} ({res.max_ascent_iterations} iterations)")
        print(f"max objective-gap relative error: {res.max_gap_rel_error:.3e}")
        return
    if not (args.logits and args.prior and args.out):
        raise UsageError("guide needs --logits, --prior and --out (or --verify)")
    logits = load_tensor(args.logits)
    prior = load_tensor(args.prior)
    if prior.shape[:2] != logits.shape[:2]:
        prior = build_prior(prior, logits.shape[0], logits.shape[1], args.mode)
    save_tensor(apply_ssg(logits, prior, args.beta), args.out)


def _cmd_codec(args):
    if args.codec_command == "encode":
        feature = load_tensor(args.feature)
        ladder = parse_ladder(args.ladder)
        cb = load_codebook(args.codebook, feature.shape[2])
        tokens = encode_multiscale(feature, ladder, cb, args.upsample)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        save_tensor(cb.as_tensor(), out / "codebook.nsgt")
        for k, tok in enumerate(tokens, start=1):
            save_tokens(tok, out / f"tokens_{k}.nsgt")
        (out / "manifest.txt").write_text(
            f"ladder={format_ladder(ladder)}\nupsample={args.upsample}\nscales={len(ladder)}\n"
        )
    elif args.codec_command == "decode":
        src = Path(args.inp)
        try:
            lines = (src / "manifest.txt").read_text().splitlines()
        except OSError as exc:
            raise PersistenceError(f"cannot read manifest in {src}: {exc}") from exc
        meta = dict(line.split("=", 1) for line in lines if "=" in line)
        if not {"ladder", "upsample", "scales"} <= meta.keys():
            raise FormatError(f"{src}/manifest.txt is missing keys")
        ladder = parse_ladder(meta["ladder"])
        cb = Codebook.from_array(load_tensor(src / "codebook.nsgt"))
        tokens = [load_tokens(src / f"tokens_{k}.nsgt") for k in range(1, int(meta["scales"]) + 1)]
        save_tensor(reconstruct(tokens, ladder, cb, meta["upsample"]), args.out)
    else:
        raise UsageError("codec needs an action: encode or decode")


def _cmd_experiment(args, completion):
    report = execute(_config_from_args(args), completion=completion)
    out = Path(args.out)
    report.to_csv(out / "report.csv")
    print(report.summary())


def _cmd_ablate(args):
    cfg = _config_from_args(args)
    reference = load_reference(cfg["feature"])
    rc, oc = build_configs(cfg, reference.shape[2])
    rows = ablation_suite(reference, rc, oc)
    write_csv(args.out, ABLATION_HEADER, rows)
    for row in rows:
        print(f"{row[0]:<18} mse={row[4]:.6g} acc={row[5]:.4f} wall={row[6]:.3f}s")


def _cmd_analyze(args):
    a = load_tensor(args.a)
    b = load_tensor(args.b)
    nyq = nyquist_bin(*args.prev, *a.shape[:2]) if args.prev else None
    prof = delta_log_magnitude(a, b, nyq)
    rows = [(b_, v, "" if nyq is None else int(b_ >= nyq)) for b_, v in prof.rows()]
    write_csv(args.out, ["bin", "delta_log_magnitude", "above_nyquist"], rows)
    if nyq is not None:
        print(f"previous-scale nyquist bin: {nyq}")


def _cmd_bench(args):
    rows = latency_bench(args.sizes, args.reps)
    write_csv(args.out, BENCH_HEADER, rows)
    for size, op, mean, std, ratio in rows:
        print(f"{size:<12} {op:<10} mean={mean * 1e3:.3f}ms std={std * 1e3:.3f}ms ratio={ratio:.3f}")


def _cmd_demo(args):
    size = parse_size(args.size)
    if len(size) != 3:
        raise ShapeError(f"--size must be HxWxC, got {args.size!r}")
    save_tensor(synthesize(args.kind, *size, seed=args.seed), args.out)


HANDLERS = {
    "dse": _cmd_dse,
    "guide": _cmd_guide,
    "codec": _cmd_codec,
    "run": lambda a: _cmd_experiment(a, completion=False),
    "complete": lambda a: _cmd_experiment(a, completion=True),
    "ablate": _cmd_ablate,
    "analyze": _cmd_analyze,
    "bench": _cmd_bench,
    "demo": _cmd_demo,
}


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return 1
        HANDLERS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(exc, file=sys.stderr)
        return 1
    except (ShapeError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FormatError, PersistenceError, OSError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3
    except NextScaleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
