"""``seqdistill`` command line: data, train, extract, infer, bench, inspect.

Exit codes are part of the interface: 0 success, 2 validation failure,
3 training divergence, 64 usage error, 65 malformed input file, 66 missing
file.

Settings come from an optional JSON ``--config`` file overlaid by flags. The
resolved settings are written as ``run_config.json`` next to every output
so any run can be repeated from its own provenance copy.
"""
import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import c45
from .adaptive_structure import StructureConfig
from .errors import DimensionError, FormatError, TrainingDiverged, ValidationError
from .inference_bench import (NetworkPredictor, RulePredictor, StatefulNetworkPredictor, compare,
                              evaluate, format_table, report_to_json)
from .path_extraction import build_path_dataset, path_table, write_c45_files
from .rnn_dbn import load_model, loads_model, save_model, stack_train
from .rnn_rbm import TrainHyper
from .sequence_data import load_pianoroll, parse_pianoroll, save_pianoroll, synth_markov, validate

EXIT_OK, EXIT_VALIDATION, EXIT_DIVERGED = 0, 2, 3
EXIT_USAGE, EXIT_FORMAT, EXIT_MISSING = 64, 65, 66

log = logging.getLogger("seqdistill")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class RunConfig:
    command: str
    seed: int = 0
    hyper: TrainHyper = field(default_factory=TrainHyper)
    structure: StructureConfig = field(default_factory=StructureConfig)
    paths: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(asdict(self), indent=1, sort_keys=True) + "\n"

    def write_next_to(self, out_dir):
        path = Path(out_dir) / "run_config.json"
        path.write_text(self.to_json(), encoding="utf-8")
        return path


def _read_config(path):
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: config must be a JSON object")
    return doc


def _merge(cls, base, flags):
    known = {f.name for f in fields(cls)}
    unknown = set(base) - known
    if unknown:
        raise ValidationError(f"unknown {cls.__name__} keys in config: {sorted(unknown)}")
    values = dict(base)
    values.update({k: v for k, v in flags.items() if v is not None})
    return cls(**values)


def resolve_config(args):
    """Config file first, then flags on top. Everything is settled before any stage runs."""
    doc = _read_config(getattr(args, "config", None))
    seed = args.seed if getattr(args, "seed", None) is not None else doc.get("seed", 0)
    hyper_flags = {
        "learning_rate": getattr(args, "lr", None),
        "batch_size": getattr(args, "batch", None),
        "epochs": getattr(args, "epochs", None),
        "gradient": getattr(args, "gradient", None),
        "seed": seed,
    }
    struct_flags = {
        "max_layers": getattr(args, "max_layers", None),
        "initial_hidden": getattr(args, "hidden", None),
        "max_hidden": getattr(args, "max_hidden", None),
        "layer_threshold": getattr(args, "layer_threshold", None),
    }
    return RunConfig(
        command=args.command if not getattr(args, "action", None) else f"{args.command} {args.action}",
        seed=int(seed),
        hyper=_merge(TrainHyper, doc.get("hyper", {}), hyper_flags),
        structure=_merge(StructureConfig, doc.get("structure", {}), struct_flags),
        paths={k: str(v) for k, v in vars(args).items()
               if k in ("dataset", "model", "rules", "out", "path") and v is not None},
        options={k: v for k, v in doc.get("options", {}).items()},
    )


def _threads():
    raw = os.environ.get("SEQDISTILL_THREADS")
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"SEQDISTILL_THREADS must be a positive integer, got {raw!r}")
    if n < 1:
        raise UsageError(f"SEQDISTILL_THREADS must be a positive integer, got {raw!r}")
    return n


def _out_dir(path):
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _check_dataset(dataset):
    problems = validate(dataset)
    if problems:
        raise ValidationError("dataset is invalid:\n  " + "\n  ".join(problems))
    return dataset


def _load_rulesets(path):
    return c45.loads_rulesets(Path(path).read_text(encoding="utf-8"))


# -- commands ---------------------------------------------------------------

def cmd_data(args):
    if args.action == "synth":
        cfg = resolve_config(args)
        ds = synth_markov(cfg.seed, args.dim, args.states, args.length, args.n_train,
                          args.n_test, args.noise)
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        save_pianoroll(ds, out)
        cfg.options.update(dim=args.dim, states=args.states, length=args.length,
                           n_train=args.n_train, n_test=args.n_test, noise=args.noise)
        cfg.write_next_to(out.parent)
        print(f"wrote {out} (D={ds.dimension}, {len(ds.train)} train, {len(ds.test)} test)")
        return EXIT_OK
    # validate: parse without the loader's own checks so every problem is listed
    text = Path(args.path).read_text(encoding="utf-8")
    try:
        ds = parse_pianoroll(text, source=args.path)
    except ValidationError as exc:
        print(f"{args.path}: invalid\n  {exc}")
        return EXIT_VALIDATION
    problems = validate(ds)
    if problems:
        print(f"{args.path}: {len(problems)} problem(s)")
        for p in problems:
            print(f"  {p}")
        return EXIT_VALIDATION
    print(f"{args.path}: ok")
    return EXIT_OK


def cmd_train(args):
    cfg = resolve_config(args)
    dataset = _check_dataset(load_pianoroll(args.dataset))
    out = _out_dir(args.out)
    cfg.write_next_to(out)
    log.info("training on %s: %d sequences, D=%d", args.dataset, len(dataset.train), dataset.dimension)
    with threadpool_limits(limits=_threads()):
        model = stack_train(dataset, cfg.hyper, cfg.structure, out / "structure.jsonl")
    save_model(model, out / "model.json")
    with open(out / "errors.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["layer", "epoch", "error"])
        for l, trace in enumerate(model.metadata["error_traces"], start=1):
            for epoch, err in enumerate(trace, start=1):
                writer.writerow([l, epoch, repr(float(err))])
    sizes = ", ".join(str(p.n_hidden) for p in model.layers)
    print(f"wrote {out / 'model.json'}: {model.n_layers} layer(s), hidden sizes [{sizes}]")
    return EXIT_OK


def cmd_extract(args):
    cfg = resolve_config(args)
    cfg.options.update(min_cases=args.min_cases, confidence=args.confidence, prune=not args.no_prune)
    model = load_model(args.model)
    dataset = _check_dataset(load_pianoroll(args.dataset))
    if dataset.dimension != model.n_visible:
        raise DimensionError(f"dataset D={dataset.dimension} but model expects D={model.n_visible}")
    dims = range(dataset.dimension) if args.target_dim is None else [args.target_dim]
    out = _out_dir(args.out)
    c45_dir = out / "c45"
    c45_dir.mkdir(exist_ok=True)
    cfg.write_next_to(out)
    with threadpool_limits(limits=_threads()):
        table = path_table(model, dataset.train)
    rulesets, counts = [], {}
    for d in dims:
        pd = build_path_dataset(model, dataset, d, table)
        write_c45_files(pd, c45_dir / f"dim{d:03d}")
        _, rs = c45.induce(pd, args.min_cases, args.confidence, prune=not args.no_prune)
        rulesets.append(rs)
        counts[d] = len(rs)
    (out / "rulesets.json").write_text(
        c45.dumps_rulesets(rulesets, {"model": str(args.model), "dataset": str(args.dataset)}),
        encoding="utf-8")
    summary = {"total_rules": sum(counts.values()),
               "per_dimension": {str(d): n for d, n in counts.items()}}
    (out / "rule_counts.json").write_text(json.dumps(summary, indent=1) + "\n", encoding="utf-8")
    for d, n in counts.items():
        print(f"dim {d:3d}: {n} rule(s)")
    print(f"total rules: {summary['total_rules']}")
    return EXIT_OK


def cmd_infer(args):
    model = load_model(args.model)
    dataset = _check_dataset(load_pianoroll(args.dataset))
    if dataset.dimension != model.n_visible:
        raise DimensionError(f"dataset D={dataset.dimension} but model expects D={model.n_visible}")
    predictor = (RulePredictor(model, _load_rulesets(args.rules)) if args.rules
                 else NetworkPredictor(model))
    report = evaluate(predictor, dataset.test, repeats=1)
    print(f"{report.predictor}: accuracy {report.accuracy_percent:.2f}%, "
          f"exact frames {report.exact_frame_percent:.2f}% over {report.frames_evaluated} frames")
    if args.out:
        preds = []
        for seq in dataset.test:
            predictor.reset()
            preds.append([np.flatnonzero(predictor.step(f)).tolist() for f in seq[:-1]])
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps({"predictor": report.predictor, "predictions": preds},
                                  separators=(",", ":")) + "\n", encoding="utf-8")
        resolve_config(args).write_next_to(out.parent)
    return EXIT_OK


def cmd_bench(args):
    for p in (args.model, args.rules, args.dataset):
        if not Path(p).exists():
            raise FileNotFoundError(p)
    model = load_model(args.model)
    rulesets = _load_rulesets(args.rules)
    dataset = _check_dataset(load_pianoroll(args.dataset))
    if not dataset.test:
        raise ValidationError("dataset has no test split to benchmark on")
    net, rules = compare(model, rulesets, dataset.test, repeats=args.repeats)
    stateful = evaluate(StatefulNetworkPredictor(model), dataset.test, repeats=args.repeats)
    table = format_table(net, rules)
    print(table, end="")
    print(f"speedup {rules.speedup_vs_network:.1f}x "
          f"(vs stateful network {stateful.cpu_time_seconds / rules.cpu_time_seconds:.1f}x)")
    if args.out:
        out = _out_dir(args.out)
        (out / "bench.txt").write_text(table, encoding="utf-8")
        (out / "bench.json").write_text(report_to_json(net, rules), encoding="utf-8")
        (out / "bench_stateful_network.json").write_text(
            json.dumps(stateful.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")
        resolve_config(args).write_next_to(out)
    return EXIT_OK


def _inspect_model(model):
    print(f"rnn_dbn model, {model.n_layers} layer(s)")
    print(f"{'layer':>5} {'D':>6} {'H':>6} {'K':>6}")
    for l, p in enumerate(model.layers, start=1):
        print(f"{l:>5} {p.n_visible:>6} {p.n_hidden:>6} {p.n_recurrent:>6}")
    if model.structure_log:
        print("structure log:")
        for rec in model.structure_log:
            print(f"  epoch {rec['epoch']:>4} layer {rec['layer']} {rec['kind']:<10} "
                  f"index {rec['index']:>4} -> H={rec['H_after']}")


def _inspect_rulesets(rulesets):
    for rs in rulesets:
        print(f"# dimension {rs.target_dimension}: {len(rs)} rule(s), default {rs.default_class}")
        for rule in rs.rules:
            print(c45.format_rule(rule))


def _inspect_dataset(ds):
    mean_T = np.mean([len(s) for s in ds.train + ds.test])
    print(f"dataset {ds.name!r}: D={ds.dimension}, {len(ds.train)} train / {len(ds.test)} test "
          f"sequences, mean T={mean_T:.1f}")


def cmd_inspect(args):
    text = Path(args.path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{args.path}:{exc.lineno}:{exc.colno}: not JSON ({exc.msg})") from exc
    kind = doc.get("kind") if isinstance(doc, dict) else None
    if kind == "rnn_dbn":
        _inspect_model(loads_model(text))
    elif kind == "rulesets":
        _inspect_rulesets(c45.loads_rulesets(text))
    elif isinstance(doc, dict) and {"dimension", "train"} <= set(doc):
        _inspect_dataset(parse_pianoroll(text, source=args.path))
    else:
        raise FormatError(f"{args.path}: unknown artifact kind")
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def _training_flags(p):
    p.add_argument("--config", help="JSON file with 'seed', 'hyper' and 'structure' sections")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float, help="learning rate (default 0.001)")
    p.add_argument("--batch", type=int, help="minibatch size (default 100)")
    p.add_argument("--gradient", choices=("hybrid", "exact"))
    p.add_argument("--layers", "--max-layers", dest="max_layers", type=int)
    p.add_argument("--hidden", type=int, help="initial hidden units per layer")
    p.add_argument("--max-hidden", type=int)
    p.add_argument("--layer-threshold", type=float)


def build_parser():
    parser = _Parser(prog="seqdistill", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    data = sub.add_parser("data", help="generate or validate sequence datasets")
    dsub = data.add_subparsers(dest="action", required=True, parser_class=_Parser)
    synth = dsub.add_parser("synth", help="write a synthetic cyclic dataset")
    synth.add_argument("--config")
    synth.add_argument("--seed", type=int)
    synth.add_argument("--dim", type=int, default=88)
    synth.add_argument("--states", type=int, default=4)
    synth.add_argument("--length", type=int, default=32)
    synth.add_argument("--n-train", type=int, default=40)
    synth.add_argument("--n-test", type=int, default=20)
    synth.add_argument("--noise", type=float, default=0.0)
    synth.add_argument("--out", required=True)
    val = dsub.add_parser("validate", help="check a dataset file")
    val.add_argument("path")

    train = sub.add_parser("train", help="train an adaptive stack")
    train.add_argument("dataset")
    _training_flags(train)
    train.add_argument("--out", required=True, help="output directory")

    ext = sub.add_parser("extract", help="build C4.5 tables and induce rule sets")
    ext.add_argument("model")
    ext.add_argument("dataset")
    ext.add_argument("--out", required=True, help="output directory")
    ext.add_argument("--target-dim", type=int, help="extract one dimension only")
    ext.add_argument("--min-cases", type=int, default=2)
    ext.add_argument("--confidence", type=float, default=0.25)
    ext.add_argument("--no-prune", action="store_true")
    ext.add_argument("--config")
    ext.add_argument("--seed", type=int)

    inf = sub.add_parser("infer", help="predict next frames on the test split")
    inf.add_argument("model")
    inf.add_argument("dataset")
    inf.add_argument("--rules", help="use these rule sets instead of the network")
    inf.add_argument("--out", help="write predicted frames (sparse JSON) here")

    bench = sub.add_parser("bench", help="network vs rules accuracy and CPU time")
    bench.add_argument("model")
    bench.add_argument("rules")
    bench.add_argument("dataset")
    bench.add_argument("--repeats", type=int, default=5)
    bench.add_argument("--out", help="directory for bench.txt / bench.json")

    insp = sub.add_parser("inspect", help="print a model, rule set file or dataset")
    insp.add_argument("path")
    return parser


COMMANDS = {"data": cmd_data, "train": cmd_train, "extract": cmd_extract,
            "infer": cmd_infer, "bench": cmd_bench, "inspect": cmd_inspect}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return exc.code or EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"missing file: {exc.filename or exc}", file=sys.stderr)
        return EXIT_MISSING
    except TrainingDiverged as exc:
        print(f"training diverged: {exc} (last good epoch {exc.last_good_epoch})", file=sys.stderr)
        return EXIT_DIVERGED
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (ValidationError, DimensionError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
