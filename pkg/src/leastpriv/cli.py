"""Command-line entry point.

Exit codes: 0 pass, 1 certification failed, 2 bad input, 3 a checked
invariant did not hold (a self-test tripwire).

Every command writes its files into ``--out`` together with a
``manifest.json``. Manifests hold no paths, only content digests, and
take their timestamp from ``SOURCE_DATE_EPOCH`` when it is set, so two
runs with equal inputs and seed produce byte-identical bundles.
Nothing is ever colored, so ``NO_COLOR`` holds trivially.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._util import fmt12, substream
from .certify import CERT_TOL, CertBudget, certify_lpp, certify_ulpp, theorem_report
from .dist import (
    Alphabet,
    Channel,
    channel_to_dict,
    dump_json,
    joint_to_dict,
    load_channel,
    load_joint,
    posterior_positivity,
)
from .empirical import AuditMatrix, Dataset, audit_repeated, sample_dataset, split_dataset
from .errors import DivergenceError, LeakageError
from .frontier import (
    SearchConfig,
    enumerate_deterministic,
    feasibility_check,
    frontier_csv,
    pareto_filter,
    read_frontier_csv,
    search_channels,
)
from .instances import deterministic_label_joint, random_positive_joint
from .render import HeatmapSpec, render_frontier_svg, render_heatmap_svg
from .replab import (
    TrainConfig,
    correlated_battery,
    eval_accuracy,
    export_representations,
    fit_quantizer,
    representation_provider,
    train_encoder_censored,
    train_encoder_erm,
)

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_INVARIANT = 0, 1, 2, 3


class InputError(Exception):
    """Bad flags or unreadable inputs (exit 2)."""


# output bundle -------------------------------------------------------------------

def _file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        try:
            t = _dt.datetime.fromtimestamp(int(epoch), tz=_dt.timezone.utc)
        except ValueError:
            raise InputError("SOURCE_DATE_EPOCH must be an integer") from None
    else:
        t = _dt.datetime.now(tz=_dt.timezone.utc).replace(microsecond=0)
    return t.isoformat().replace("+00:00", "Z")


class Bundle:
    """Output directory plus the manifest describing it."""

    def __init__(self, out: str, command: str, seed: int, config: dict, inputs: dict):
        self.dir = Path(out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.command, self.seed = command, seed
        self.config = config
        self.inputs = {k: _file_digest(v) for k, v in sorted(inputs.items())}
        self.files: list[str] = []

    @property
    def config_digest(self) -> str:
        doc = {"command": self.command, "seed": self.seed, "config": self.config, "inputs": self.inputs}
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()

    def write_text(self, name: str, text: str) -> Path:
        return self.write_bytes(name, text.encode("utf-8"))

    def write_bytes(self, name: str, data: bytes) -> Path:
        path = self.dir / name
        path.write_bytes(data)
        self.files.append(name)
        return path

    def write_json(self, name: str, doc) -> Path:
        return self.write_text(name, json.dumps(doc, indent=2) + "\n")

    def close(self) -> None:
        created = _timestamp()
        manifest = {
            "command": self.command,
            "config": self.config,
            "config_digest": self.config_digest,
            "inputs": self.inputs,
            "seed": self.seed,
            "version": __version__,
            "timestamps": {"created": created},
            "files": sorted(self.files),
        }
        (self.dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def _say(msg: str) -> None:
    print(msg)


# synth -----------------------------------------------------------------------------

def _labels_arg(text: str, x_size: int) -> np.ndarray:
    if text == "parity":
        return np.arange(x_size) % 2
    try:
        labels = np.array([int(t) for t in text.split(",")])
    except ValueError:
        raise InputError("--deterministic-labels takes 'parity' or a comma list of label indices") from None
    if labels.size != x_size or labels.min() < 0:
        raise InputError(f"need {x_size} non-negative labels, got {text!r}")
    return labels


def cmd_synth(args) -> int:
    out_joint = args.positive_posterior or args.deterministic_labels is not None
    out_channel = args.bsc is not None or args.identity or args.constant
    if not (out_joint or out_channel or args.battery):
        raise InputError("nothing to synthesize: pass a joint, channel or --battery flag")
    if args.positive_posterior and args.deterministic_labels is not None:
        raise InputError("--positive-posterior and --deterministic-labels are exclusive")
    if sum([args.bsc is not None, args.identity, args.constant]) > 1:
        raise InputError("pick one channel flag")
    if args.sample is not None and not out_joint:
        raise InputError("--sample needs a joint flag")
    if args.x_size < 1 or args.y_size < 1:
        raise InputError("alphabet sizes must be positive")

    config = {k: getattr(args, k) for k in ("positive_posterior", "deterministic_labels", "bsc", "identity",
                                             "constant", "sample", "battery", "x_size", "y_size")}
    bundle = Bundle(args.out, "synth", args.seed, config, {})
    joint = None
    if args.positive_posterior:
        joint = random_positive_joint(args.x_size, args.y_size, substream(args.seed, "synth", "joint"))
    elif args.deterministic_labels is not None:
        joint = deterministic_label_joint(args.x_size, _labels_arg(args.deterministic_labels, args.x_size))
    if joint is not None:
        bundle.write_json("joint.json", joint_to_dict(joint))
    x = joint.axes[0] if joint is not None else Alphabet.range("X", 2 if args.bsc is not None else args.x_size)
    ch = None
    if args.bsc is not None:
        if x.size != 2:
            raise InputError("--bsc needs a binary X")
        ch = Channel.bsc(args.bsc, x)
    elif args.identity:
        ch = Channel.identity(x)
    elif args.constant:
        ch = Channel.constant(x)
    if ch is not None:
        bundle.write_json("channel.json", channel_to_dict(ch))
    if args.sample is not None:
        if args.sample < 1:
            raise InputError("--sample must be positive")
        seed = int(substream(args.seed, "synth", "sample").integers(2**63))
        bundle.write_text("data.csv", sample_dataset(joint, args.sample, seed).to_csv())
    if args.battery:
        bundle.write_text("battery.csv", correlated_battery(args.seed, args.battery).to_csv())
    bundle.close()
    _say(f"wrote {', '.join(bundle.files)} to {bundle.dir}")
    return EXIT_OK


# certify ---------------------------------------------------------------------------

def cmd_certify(args) -> int:
    jxy = load_joint(args.joint)
    ch = load_channel(args.channel)
    config = {"gamma": args.gamma, "unconditional": args.unconditional, "tolerance": args.tolerance}
    bundle = Bundle(args.out, "certify", args.seed, config, {"joint": args.joint, "channel": args.channel})
    report = theorem_report(jxy, ch, tol=args.tolerance)
    doc = report.to_dict()
    cert = None
    if args.gamma is not None:
        budget = CertBudget(args.gamma)
        if args.unconditional:
            px = jxy.marginal(ch.input_axes[0].name)
            cert = certify_ulpp(px, ch, budget, tol=args.tolerance)
        else:
            cert = certify_lpp(jxy, ch, budget, tol=args.tolerance)
        doc["certificate"] = {
            "kind": "ulpp" if args.unconditional else "lpp",
            "passed": cert.passed,
            "achieved": float(fmt12(cert.achieved)),
            "budget": float(fmt12(cert.budget)),
        }
    bundle.write_json("report.json", doc)
    bundle.close()
    _say(f"gamma_lpp   {fmt12(report.gamma_lpp)}")
    _say(f"gamma_ulpp  {fmt12(report.gamma_ulpp)}")
    _say(f"epsilon_ldp {fmt12(report.epsilon_ldp.epsilon)}")
    for name, flag in report.theorem_flags.items():
        state = "pass" if flag.passed else "FAIL"
        _say(f"{name:24s} {state}{'' if flag.applicable else ' (vacuous)'}")
    if not report.all_passed:
        return EXIT_INVARIANT
    if cert is not None:
        _say(f"certificate {'pass' if cert.passed else 'FAIL'} ({fmt12(cert.achieved)} vs {fmt12(cert.budget)})")
        if not cert.passed:
            return EXIT_FAIL
    return EXIT_OK


# audit -----------------------------------------------------------------------------

def _censor_pairs(items) -> dict:
    out = {}
    for item in items or ():
        task, sep, sens = item.partition("=")
        if not sep or not task or not sens:
            raise InputError(f"--censor takes TASK=ATTRIBUTE, got {item!r}")
        out[task] = sens
    return out


def cmd_audit(args) -> int:
    ds = Dataset.from_csv(args.csv)
    tasks, sens = list(args.task), list(args.sensitive)
    for name in tasks + sens + list(args.features or []) + list(args.z_cols or []):
        if name not in ds:
            raise InputError(f"no column named {name!r} in {args.csv}")
    censor = _censor_pairs(args.censor)
    for t, s in censor.items():
        if t not in tasks or s not in ds:
            raise InputError(f"--censor {t}={s} names an unknown task or column")
    if args.repeats < 1:
        raise InputError("--repeats must be at least 1")

    cfg = TrainConfig(learning_rate=args.lr, epochs=args.epochs, batch_size=args.batch_size,
                      seed=args.seed, censor_lambda=0.0)
    config = {"task": tasks, "sensitive": sens, "repr": args.repr, "repeats": args.repeats,
              "features": args.features, "z_cols": args.z_cols, "censor": censor, "lambda": args.lam,
              "epochs": args.epochs, "lr": args.lr, "batch_size": args.batch_size, "bins": args.bins}
    bundle = Bundle(args.out, "audit", args.seed, config, {"csv": args.csv})

    def run(provider):
        return audit_repeated(ds, tasks, sens, provider, repeats=args.repeats, seed=args.seed, jobs=args.jobs)

    if args.repr == "columns":
        z_cols = args.z_cols or [n for n in ds.names if n.startswith("z_")]
        if not z_cols:
            raise InputError("--repr columns needs z_ columns in the CSV or --z-cols")
        matrix = run(z_cols)
    else:
        features = args.features or [n for n in ds.names
                                     if n not in tasks and n not in sens and not n.startswith("z_")]
        if not features:
            raise InputError("no feature columns left to train on; pass --features")
        erm = run(representation_provider(ds, features, cfg, bins_per_dim=args.bins))
        if args.repr == "erm":
            matrix = erm
        else:
            bundle.write_json("audit_erm.json", erm.to_dict())
            targets = {t: censor.get(t, erm.top_attribute(t)) for t in tasks}
            gcfg = TrainConfig(learning_rate=args.lr, epochs=args.epochs, batch_size=args.batch_size,
                               seed=args.seed, censor_lambda=args.lam, censor_target=next(iter(targets.values())))
            matrix = run(representation_provider(ds, features, gcfg, censor=targets, bins_per_dim=args.bins))
            matrix = AuditMatrix(matrix.tasks, matrix.sensitives, matrix.cells,
                                 {**matrix.meta, "censored": targets})

    bundle.write_json("audit.json", matrix.to_dict())
    bundle.write_text("audit.csv", matrix.to_csv())
    bundle.write_bytes("heatmap.svg", render_heatmap_svg(HeatmapSpec.from_matrix(matrix)))
    bundle.close()
    for t in tasks:
        top = matrix.top_attribute(t)
        _say(f"{t}: highest delta_adv {fmt12(matrix.cell(t, top).delta_adv)} on {top}")
    return EXIT_OK


# frontier --------------------------------------------------------------------------

def cmd_frontier(args) -> int:
    jxy = load_joint(args.joint)
    do_enum = args.enumerate or not args.search
    config = {"z_size": args.z_size, "enumerate": do_enum, "search": args.search,
              "restarts": args.restarts, "steps": args.steps, "budget": args.budget,
              "tolerance": args.tolerance}
    bundle = Bundle(args.out, "frontier", args.seed, config, {"joint": args.joint})
    points = []
    if do_enum:
        points += enumerate_deterministic(jxy, args.z_size)
    if args.search:
        cfg = SearchConfig(z_size=args.z_size, restarts=args.restarts, steps_per_restart=args.steps,
                           leakage_budget=args.budget, seed=args.seed, jobs=args.jobs)
        points += search_channels(jxy, cfg)
    post = posterior_positivity(jxy)
    feas = feasibility_check(points, post, tol=args.tolerance)
    bundle.write_text("frontier.csv", frontier_csv(points))
    bundle.write_text("pareto.csv", frontier_csv(pareto_filter(points)))
    bundle.write_bytes("frontier.svg", render_frontier_svg(points))
    bundle.write_json("feasibility.json", {"passed": feas.passed, "applicable": feas.applicable,
                                           "worst_residual": float(fmt12(feas.worst_residual)),
                                           "note": feas.note, "points": len(points)})
    bundle.close()
    _say(f"{len(points)} points; worst residual {fmt12(feas.worst_residual)}"
         f"{'' if feas.applicable else ' (assumption not met)'}")
    return EXIT_OK if feas.passed else EXIT_INVARIANT


# replab ----------------------------------------------------------------------------

def cmd_replab(args) -> int:
    ds = Dataset.from_csv(args.csv)
    for name in [args.task] + list(args.features or []) + ([args.censor] if args.censor else []):
        if name not in ds:
            raise InputError(f"no column named {name!r} in {args.csv}")
    features = args.features or [n for n in ds.names if n != args.task and n != args.censor
                                 and not n.startswith("z_")]
    lam = args.lam if args.censor else 0.0
    cfg = TrainConfig(learning_rate=args.lr, epochs=args.epochs, batch_size=args.batch_size, seed=args.seed,
                      censor_lambda=lam, censor_target=args.censor, width=args.width)
    config = {"task": args.task, "features": features, "censor": args.censor, "lambda": lam,
              "epochs": args.epochs, "lr": args.lr, "batch_size": args.batch_size, "width": args.width,
              "bins": args.bins}
    bundle = Bundle(args.out, "replab", args.seed, config, {"csv": args.csv})
    split = split_dataset(ds, int(substream(args.seed, "split", 0).integers(2**63)))
    train = train_encoder_censored if args.censor else train_encoder_erm
    model = train(ds, split, args.task, features, cfg)
    quant = fit_quantizer(model, ds, split.train_idx, args.bins)
    out_ds, _ = export_representations(model, ds, quant)
    bundle.write_text("model.json", model.to_json(quant))
    bundle.write_text("representations.csv", out_ds.to_csv())
    bundle.close()
    acc = eval_accuracy(model, ds, split.eval_idx)
    _say(f"eval accuracy {fmt12(acc)}; final training loss {fmt12(model.losses[-1])}")
    return EXIT_OK


# report ----------------------------------------------------------------------------

def cmd_report(args) -> int:
    src = Path(args.source)
    files = sorted(src.iterdir()) if src.is_dir() else [src]
    bundle = Bundle(args.out, "report", args.seed, {}, {f.name: f for f in files
                                                         if f.name in ("audit.json", "frontier.csv")})
    rendered = 0
    for f in files:
        if f.name == "audit.json":
            try:
                matrix = AuditMatrix.from_dict(json.loads(f.read_text(encoding="utf-8")))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise InputError(f"{f}: not an audit document ({exc})") from None
            bundle.write_bytes("heatmap.svg", render_heatmap_svg(HeatmapSpec.from_matrix(matrix)))
            rendered += 1
        elif f.name == "frontier.csv":
            try:
                points = read_frontier_csv(f.read_text(encoding="utf-8"))
            except (KeyError, ValueError) as exc:
                raise InputError(f"{f}: not a frontier table ({exc})") from None
            bundle.write_bytes("frontier.svg", render_frontier_svg(points))
            rendered += 1
    if not rendered:
        raise InputError(f"no audit.json or frontier.csv found at {src}")
    bundle.close()
    _say(f"rendered {', '.join(bundle.files)}")
    return EXIT_OK


# parser ----------------------------------------------------------------------------

def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--seed", type=int, default=d(0), help="root seed for every random substream")
    p.add_argument("--jobs", type=int, default=d(1), help="worker threads (output order is fixed)")
    p.add_argument("--out", default=d("out"), help="output directory")
    p.add_argument("--tolerance", type=float, default=d(CERT_TOL), help="absolute tolerance for checks")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="leastpriv", description="Leakage certification and audits.")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        _global_flags(p, suppress=True)
        return p

    p = add("synth", "write seeded joints, channels and sampled datasets")
    p.add_argument("--positive-posterior", action="store_true")
    p.add_argument("--deterministic-labels", metavar="G", help="'parity' or comma-separated label per x")
    p.add_argument("--bsc", type=float, metavar="P")
    p.add_argument("--identity", action="store_true")
    p.add_argument("--constant", action="store_true")
    p.add_argument("--sample", type=int, metavar="N")
    p.add_argument("--battery", type=int, metavar="N", help="rows of the correlated-attribute table")
    p.add_argument("--x-size", type=int, default=4)
    p.add_argument("--y-size", type=int, default=2)
    p.set_defaults(func=cmd_synth)

    p = add("certify", "certify a channel against a leakage budget")
    p.add_argument("joint")
    p.add_argument("channel")
    p.add_argument("--gamma", type=float)
    p.add_argument("--unconditional", action="store_true", help="certify max leakage instead")
    p.set_defaults(func=cmd_certify)

    p = add("audit", "estimate leakage gains on a categorical CSV")
    p.add_argument("csv")
    p.add_argument("--task", nargs="+", required=True)
    p.add_argument("--sensitive", nargs="+", required=True)
    p.add_argument("--repr", choices=("columns", "erm", "grad"), default="columns")
    p.add_argument("--features", nargs="+")
    p.add_argument("--z-cols", nargs="+")
    p.add_argument("--censor", nargs="+", metavar="TASK=ATTR")
    p.add_argument("--lambda", dest="lam", type=float, default=4.0)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--bins", type=int, default=4)
    p.set_defaults(func=cmd_audit)

    p = add("frontier", "trace utility against conditional leakage")
    p.add_argument("joint")
    p.add_argument("--z-size", type=int, default=2)
    p.add_argument("--enumerate", action="store_true")
    p.add_argument("--search", action="store_true")
    p.add_argument("--restarts", type=int, default=32)
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--budget", type=float)
    p.set_defaults(func=cmd_frontier)

    p = add("replab", "train one encoder and export its representation columns")
    p.add_argument("csv")
    p.add_argument("--task", required=True)
    p.add_argument("--features", nargs="+")
    p.add_argument("--censor", metavar="ATTR")
    p.add_argument("--lambda", dest="lam", type=float, default=4.0)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--width", type=int)
    p.add_argument("--bins", type=int, default=4)
    p.set_defaults(func=cmd_replab)

    p = add("report", "re-render figures from a saved bundle")
    p.add_argument("source", help="bundle directory, audit.json or frontier.csv")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.jobs < 1:
        parser.error("--jobs must be at least 1")
    if args.tolerance < 0:
        parser.error("--tolerance must be non-negative")
    try:
        return args.func(args)
    except (InputError, LeakageError, OSError, DivergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
