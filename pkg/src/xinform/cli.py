"""Command-line entry point.

Exit codes: 0 on success, 1 on domain errors, 2 on usage errors.  Errors are
written to stderr as one JSON object.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from collections import Counter
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .errors import DomainError
from .explainers import (anchor_metrics, gradient_explain, grow_anchor, shap_explain, shap_permutation_oracle,
                         single_axis_counterfactual, strong_counterfactual, top_gradient_component,
                         weak_counterfactual)
from .geometry import as_point, distribution_from_json
from .models import ClassSpec, model_from_json, validate_model_document
from .oracles import ORACLES, run_oracle
from .rademacher import (CSV_COLUMNS, EventSpec, append_csv, conditional_rademacher, constraints_from_json, csv_text,
                         default_workers, empirical_rademacher, gap_report)
from .scenarios import REGISTRY, list_scenarios, plot_series, run_scenario

METHODS = ("gradient", "topgrad", "shap", "anchor", "cf-weak", "cf-strong", "cf-axis")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ------------------------------------------------------------ I/O helpers

def _load_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise DomainError("io-error", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise DomainError("bad-document", f"{path} is not valid JSON: {exc}") from None


def _dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _finite(doc):
    """Replace non-finite floats by the string sentinels used in every document."""
    if isinstance(doc, float) and not math.isfinite(doc):
        return "nan" if math.isnan(doc) else ("inf" if doc > 0 else "-inf")
    if isinstance(doc, dict):
        return {k: _finite(v) for k, v in doc.items()}
    if isinstance(doc, (list, tuple)):
        return [_finite(v) for v in doc]
    return doc


def _parse_point(text: str, d: int):
    try:
        vals = [float(t) for t in text.split(",")]
    except ValueError:
        raise UsageError(f"--point needs comma-separated numbers, got {text!r}") from None
    return as_point(vals, d)


def _parse_sets(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise UsageError(f"--set needs key=value, got {item!r}")
        out[key.strip()] = val.strip()
    return out


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: list
    config: dict
    seed: int | None
    version: str = __version__
    started: str = ""
    finished: str = ""
    outputs: dict = field(default_factory=dict)

    def write(self, paths, manifest_path: str):
        self.outputs = {p: _sha256(p) for p in paths}
        with open(manifest_path, "w", encoding="utf-8") as fh:
            fh.write(_dumps(asdict(self)))


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class _Run:
    """Collects outputs of one command and writes its manifest."""

    def __init__(self, argv, args):
        self.argv = list(argv)
        self.args = args
        self.started = _now()
        self.files = []

    def emit(self, text: str, path: str | None):
        if path is None:
            sys.stdout.write(text)
        else:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
            self.files.append(path)

    def append_rows(self, path: str, reports, summary: str | None = None):
        append_csv(path, reports)
        if summary is not None:
            with open(path, "a", encoding="utf-8") as fh:
                fh.write(summary)
        if path not in self.files:
            self.files.append(path)

    def finish(self, config: dict, seed):
        if not self.files:
            return
        m = RunManifest(self.argv, _finite(config), seed, started=self.started, finished=_now())
        target = getattr(self.args, "manifest", None) or self.files[0] + ".manifest.json"
        m.write(self.files, target)


def _workers(args) -> int:
    w = args.workers if args.workers is not None else default_workers()
    if w < 1:
        raise UsageError("--workers must be at least 1")
    return w


# ------------------------------------------------------------ subcommands

def cmd_explain(args, run: _Run):
    model = model_from_json(_load_json(args.model))
    dist = distribution_from_json(_load_json(args.dist))
    if dist.d != model.d:
        raise DomainError("dimension-mismatch", f"model has dimension {model.d}, distribution {dist.d}")
    x0 = _parse_point(args.point, model.d)
    m = args.method
    if m == "gradient":
        doc = gradient_explain(model, x0).to_json()
    elif m == "topgrad":
        doc = top_gradient_component(model, x0).to_json()
    elif m == "shap":
        doc = shap_explain(model, dist, x0).to_json()
        if args.oracle:
            slow = shap_permutation_oracle(model, dist, x0)
            doc["oracle"] = slow.to_json()
            doc["oracle_max_discrepancy"] = float(np.max(np.abs(np.subtract(doc["phi"], slow.phi))))
    elif m == "anchor":
        a = grow_anchor(model, dist, x0, args.min_precision)
        doc = a.to_json()
        cov, prec = anchor_metrics(model, dist, a.rule, x0)
        doc["verified"] = {"coverage": cov, "precision": prec}
    elif m == "cf-weak":
        if args.seed is None:
            raise UsageError("--method cf-weak needs --seed")
        doc = weak_counterfactual(model, x0, dist.support, args.seed).to_json()
    elif m == "cf-strong":
        doc = strong_counterfactual(model, x0).to_json()
    else:
        doc = single_axis_counterfactual(model, x0).to_json()
    doc = {"method": m, "point": list(map(float, x0)), "label": model.label(x0), "explanation": _finite(doc)}
    run.emit(_dumps(doc), args.out)
    return {"method": m, "model": args.model, "dist": args.dist, "point": args.point}, args.seed


def _hints(paths):
    return tuple(model_from_json(_load_json(p)) for p in paths or ())


def cmd_rademacher(args, run: _Run):
    cls = ClassSpec.from_json(_load_json(args.class_spec))
    cs = constraints_from_json(_load_json(args.constraints))
    dist = distribution_from_json(_load_json(args.dist))
    hints = _hints(args.hint)
    w = _workers(args)
    if args.event:
        event = EventSpec.from_json(_load_json(args.event))
        est = conditional_rademacher(cls, cs, dist, args.n, event, args.trials, args.seed, w, hints)
    else:
        est = empirical_rademacher(cls, cs, dist, args.n, args.trials, args.seed, w, hints)
    doc = {"class": cls.label(), "conditional": bool(args.event), **est.to_json()}
    run.emit(_dumps(_finite(doc)), args.out)
    return {"class": cls.to_json(), "constraints": args.constraints, "dist": args.dist, "n": args.n,
            "trials": args.trials, "event": args.event}, args.seed


def cmd_gap(args, run: _Run):
    cls = ClassSpec.from_json(_load_json(args.class_spec))
    pc = constraints_from_json(_load_json(args.predict))
    ec = constraints_from_json(_load_json(args.explain))
    dist = distribution_from_json(_load_json(args.dist))
    event = EventSpec.from_json(_load_json(args.event)) if args.event else None
    rep = gap_report(cls, pc, ec, dist, args.n, args.trials, args.seed, event=event, scenario_id=args.scenario_id,
                     workers=_workers(args), hints=_hints(args.hint), timing=args.timing)
    run.emit(_dumps(_finite(rep.to_json())), args.out)
    if args.csv:
        run.append_rows(args.csv, [rep])
    return {"class": cls.to_json(), "predict": args.predict, "explain": args.explain, "dist": args.dist,
            "n": args.n, "trials": args.trials, "event": args.event}, args.seed


def _scenario_overrides(args) -> dict:
    sets = _parse_sets(args.set)
    if args.seed is not None:
        if "seed" in sets and int(float(sets["seed"])) != args.seed:
            raise UsageError("--seed and --set seed=... disagree")
        sets["seed"] = str(args.seed)
    return sets


def _summary_line(outcomes) -> str:
    verdicts = Counter(o.headline.verdict for o in outcomes)
    conform = sum(o.conforms for o in outcomes)
    parts = [f"scenarios={len(outcomes)}", f"conforming={conform}"]
    parts += [f"{v}={verdicts[v]}" for v in sorted(verdicts)]
    return "# summary " + " ".join(parts) + "\n"


def cmd_scenario(args, run: _Run):
    if args.action == "list":
        run.emit(_dumps(list_scenarios()), args.out)
        return {"action": "list"}, None
    sets = _scenario_overrides(args)
    if args.action == "plot-data":
        if args.id is None:
            raise UsageError("scenario plot-data needs a scenario id")
        ns = None
        if args.ns:
            try:
                ns = [int(t) for t in args.ns.split(",")]
            except ValueError:
                raise UsageError("--ns needs comma-separated integers") from None
        run.emit(plot_series(args.id, ns, sets, workers=_workers(args)), args.out)
        return {"action": "plot-data", "id": args.id, "set": sets, "ns": ns}, args.seed
    if args.all == (args.id is not None):
        raise UsageError("scenario run needs exactly one of <id> or --all")
    model = model_from_json(_load_json(args.model)) if args.model else None
    if args.all and model is not None:
        raise UsageError("--model applies to a single scenario")
    ids = list(REGISTRY) if args.all else [args.id]
    w = _workers(args)
    outcomes = [run_scenario(sid, sets, model=model, workers=w, timing=args.timing) for sid in ids]
    if args.all:
        doc = {"scenarios": [o.to_json() for o in outcomes],
               "conforming": sum(o.conforms for o in outcomes), "total": len(outcomes)}
        reports = [o.headline for o in outcomes]
        if args.csv:
            run.append_rows(args.csv, reports, _summary_line(outcomes))
        else:
            sys.stdout.write(csv_text(reports) + _summary_line(outcomes))
        if args.out:
            run.emit(_dumps(_finite(doc)), args.out)
    else:
        doc = outcomes[0].to_json()
        run.emit(_dumps(_finite(doc)), args.out)
        if args.csv:
            run.append_rows(args.csv, [outcomes[0].headline])
    config = {"action": "run", "ids": ids, "set": sets, "model": args.model,
              "params": {o.scenario.id: o.params for o in outcomes}}
    return config, outcomes[0].params["seed"]


def _oracle_value(key: str, text: str):
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    try:
        num = float(text)
    except ValueError:
        return text
    # resolutions stay real even when written as integers
    return int(num) if num.is_integer() and key not in ("h", "step") else num


def cmd_oracle(args, run: _Run):
    cfg = {key: _oracle_value(key, val) for key, val in _parse_sets(args.set).items()}
    try:
        rep = run_oracle(args.kind, **cfg)
    except TypeError as exc:
        raise UsageError(f"bad oracle configuration: {exc}") from None
    run.emit(_dumps(_finite(rep.to_json())), args.out)
    if not rep.passed:
        raise DomainError("oracle-mismatch", f"{args.kind}: discrepancy {rep.max_discrepancy} exceeds tolerance")
    return {"kind": args.kind, **cfg}, cfg.get("seed")


def cmd_models(args, run: _Run):
    doc = _load_json(args.file)
    problems = validate_model_document(doc)
    out = {"file": args.file, "valid": not problems,
           "violations": [{"path": p, "message": m} for p, m in problems]}
    run.emit(_dumps(out), args.out)
    if problems:
        raise DomainError("invalid-model", f"{len(problems)} invariant violation(s) in {args.file}")
    return {"file": args.file}, None


def cmd_report(args, run: _Run):
    """Summarise a results CSV: verdict counts and registry conformance per row."""
    try:
        with open(args.csv_file, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(line for line in fh if not line.startswith("#"))
            rows = list(reader)
            header = reader.fieldnames or []
    except OSError as exc:
        raise DomainError("io-error", f"cannot read {args.csv_file}: {exc.strerror}") from None
    if tuple(header) != CSV_COLUMNS:
        raise DomainError("bad-document", f"{args.csv_file} is not a results CSV")
    entries = []
    for r in rows:
        s = REGISTRY.get(r["scenario_id"])
        expected = None if s is None else s.expected
        want = {"informative": "informative", "non-informative": "non-informative-consistent"}.get(expected)
        entries.append({"scenario_id": r["scenario_id"], "class": r["class"], "n": int(r["n"]),
                        "verdict": r["verdict"], "expected": expected,
                        "conforms": None if want is None else r["verdict"] == want})
    checked = [e for e in entries if e["conforms"] is not None]
    doc = {"rows": len(entries), "verdicts": dict(sorted(Counter(e["verdict"] for e in entries).items())),
           "registry_rows": len(checked), "conforming": sum(e["conforms"] for e in checked), "entries": entries}
    run.emit(_dumps(doc), args.out)
    return {"csv": args.csv_file}, None


# ------------------------------------------------------------ parser

def _common(p, seed_required=False, workers=False):
    p.add_argument("--out", help="write the result here instead of stdout")
    p.add_argument("--manifest", help="manifest path (default: <first output>.manifest.json)")
    if seed_required is not None:
        p.add_argument("--seed", type=int, required=seed_required, help="master seed for all randomness")
    if workers:
        p.add_argument("--workers", type=int, help="parallel processes (default: $XINFORM_WORKERS or 1)")


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="xinform", description="Explanations and Rademacher-gap informativeness tests.")
    top.add_argument("--version", action="version", version=__version__)
    sub = top.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("explain", help="explain one model at one point")
    p.add_argument("--model", required=True)
    p.add_argument("--dist", required=True)
    p.add_argument("--point", required=True, help='comma-separated coordinates, e.g. "0.3,0.7"')
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--oracle", action="store_true", help="add the permutation-oracle SHAP values")
    p.add_argument("--min-precision", type=float, default=1.0, help="anchor precision floor")
    _common(p, seed_required=False)
    p.set_defaults(func=cmd_explain)

    for name, helptext in (("rademacher", "estimate an empirical Rademacher complexity"),
                           ("gap", "paired prediction/explanation gap report")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--class", dest="class_spec", required=True, help="class spec JSON")
        if name == "rademacher":
            p.add_argument("--constraints", required=True)
        else:
            p.add_argument("--predict", required=True, help="prediction constraints JSON")
            p.add_argument("--explain", required=True, help="explanation constraints JSON")
            p.add_argument("--csv", help="append one result row here")
            p.add_argument("--scenario-id", default="custom")
            p.add_argument("--timing", action="store_true", help="record runtime (outputs stop being byte-stable)")
        p.add_argument("--dist", required=True)
        p.add_argument("-n", type=int, required=True)
        p.add_argument("--trials", type=int, default=200)
        p.add_argument("--event", help="conditioning event JSON")
        p.add_argument("--hint", action="append", help="model JSON known to be feasible (repeatable)")
        _common(p, seed_required=True, workers=True)
        p.set_defaults(func=cmd_rademacher if name == "rademacher" else cmd_gap)

    p = sub.add_parser("scenario", help="registered experiments")
    p.add_argument("action", choices=("run", "list", "plot-data"))
    p.add_argument("id", nargs="?")
    p.add_argument("--all", action="store_true")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--model", help="replace the scenario's builtin model")
    p.add_argument("--csv")
    p.add_argument("--ns", help="plot-data sample sizes, comma-separated")
    p.add_argument("--timing", action="store_true", help="record runtime (outputs stop being byte-stable)")
    _common(p, seed_required=False, workers=True)
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("oracle", help="cross-check a fast path against its brute-force oracle")
    p.add_argument("kind", choices=sorted(ORACLES))
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    _common(p, seed_required=None)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("models", help="model documents")
    msub = p.add_subparsers(dest="models_command", required=True, parser_class=_Parser)
    v = msub.add_parser("validate", help="check a model document's invariants")
    v.add_argument("file")
    _common(v, seed_required=None)
    v.set_defaults(func=cmd_models)

    p = sub.add_parser("report", help="summarise a results CSV")
    p.add_argument("csv_file")
    _common(p, seed_required=None)
    p.set_defaults(func=cmd_report)
    return top


def _fail(code: int, kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        for name in ("n", "trials"):
            if getattr(args, name, 1) is not None and getattr(args, name, 1) < 1:
                raise UsageError(f"--{name} must be at least 1")
        run = _Run(argv, args)
        config, seed = args.func(args, run)
        run.finish(config, seed)
    except UsageError as exc:
        return _fail(2, "usage", str(exc))
    except DomainError as exc:
        return _fail(1, exc.kind, exc.message)
    except BrokenPipeError:
        return 0
    return 0


if __name__ == "__main__":
    sys.exit(main())
