"""Command-line driver: ingest, train, explain, ipf, theory, report.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# --------------------------------------------------------------------------- output helpers


def write_atomic(path: Path, text: str) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)
    return hashlib.sha256(text.encode()).hexdigest()


def csv_text(rows: list[dict]) -> str:
    import csv
    import io

    if not rows:
        return ""
    cols = []
    for r in rows:
        cols.extend(c for c in r if c not in cols)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def versions() -> dict:
    import numba
    import scipy
    import yaml

    return {"ipflab": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__, "pyyaml": yaml.__version__}


def write_manifest(out_dir: Path, command: str, argv, outputs: dict, config=None, seed=None) -> None:
    manifest = {"command": command, "argv": list(argv), "versions": versions(), "master_seed": seed,
                "config_digest": config.digest() if config is not None else None,
                "config": config.to_dict() if config is not None else None, "outputs": outputs}
    write_atomic(Path(out_dir) / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


def _load_config(args):
    from .config import ExperimentConfig

    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig.from_dict({})
    over = {}
    if getattr(args, "dataset", None):
        over["dataset.name"] = args.dataset
    if getattr(args, "seed", None) is not None:
        over["ipf.master_seed"] = args.seed
    if getattr(args, "sample_size", None) is not None:
        over["ipf.sample_size"] = args.sample_size
    if getattr(args, "u", None):
        over["ipf.u"] = list(args.u)
    if getattr(args, "workers", None) is not None:
        over["ipf.workers"] = args.workers
    if getattr(args, "model", None):
        over["model.artifact"] = args.model
    return cfg.override(**over)


def _say(msg):
    print(msg, file=sys.stderr)


# --------------------------------------------------------------------------- commands


def cmd_ingest(args) -> int:
    from .config import dataset_files
    from .tabular import SchemaConfig, load_csv

    if args.csv:
        if not args.schema:
            raise UsageError("--csv needs --schema")
        csv_path, schema_path = Path(args.csv), Path(args.schema)
    else:
        csv_path, schema_path = dataset_files(_load_config(args))
    sc = SchemaConfig.load(schema_path)
    data = load_csv(csv_path, sc)
    summary = {"name": sc.name, "rows": len(data), "features": len(data.schema),
               "categorical": int(data.schema.categorical_mask.sum()),
               "numerical": int((~data.schema.categorical_mask).sum()),
               "positive_rate": float(data.labels.mean()),
               "actionable": [f.name for f in data.schema if f.actionable],
               "groups": {g: {str(v): int((vals == v).sum()) for v in np.unique(vals)}
                          for g, vals in data.groups.items()}}
    text = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    if args.out:
        write_atomic(Path(args.out), text)
    print(text, end="")
    return EXIT_OK


def cmd_train(args) -> int:
    from .experiment import fit_model, load_context
    from .models import evaluate
    from .models.io import dumps

    cfg = _load_config(args)
    out = Path(args.out_dir)
    ctx = load_context(cfg)
    t0 = time.perf_counter()
    model = fit_model(cfg, ctx)
    seconds = time.perf_counter() - t0
    metrics = {"dataset": ctx.name, "model": cfg.model["kind"], "train_rows": len(ctx.train),
               "test_rows": len(ctx.test), **evaluate(model, ctx.test).as_dict(), "train_seconds": seconds}
    outputs = {"model.json": write_atomic(out / "model.json", dumps(model))}
    outputs["metrics.json"] = write_atomic(out / "metrics.json", json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    write_manifest(out, "train", sys.argv[1:], outputs, cfg, cfg.model.get("seed"))
    print(json.dumps({k: v for k, v in metrics.items() if k != "train_seconds"}, sort_keys=True))
    return EXIT_OK


def cmd_explain(args) -> int:
    from .experiment import attach_model, load_context, make_engine

    cfg = _load_config(args)
    ctx = attach_model(cfg, load_context(cfg))
    spec = {"name": args.engine, "k": args.k, "params": {}}
    engine = make_engine(spec, ctx, float(cfg.ipf["target_p"]))
    rows = np.flatnonzero(np.isin(ctx.data.row_ids, args.row)) if args.row else \
        np.flatnonzero(ctx.model.predict(ctx.data.codes) == 0)[:1]
    if len(rows) == 0:
        raise UsageError("no such row")
    lines = []
    for i in rows:
        z = ctx.data.codes[i]
        rng = np.random.default_rng(np.random.SeedSequence(int(cfg.ipf["master_seed"]),
                                                           spawn_key=(int(ctx.data.row_ids[i]),)))
        res = engine.explain(z, rng)
        rec = {"input_id": int(ctx.data.row_ids[i]), "engine": engine.name, "k": engine.k,
               "failed": res.failed, "reason": res.reason, "degenerate": res.degenerate,
               "input": dict(zip(ctx.data.schema.names, ctx.data.schema.from_codes(z).values)),
               "candidates": [dict(zip(ctx.data.schema.names, c.values)) for c in res.candidates],
               "costs": [float(c) for c in ctx.cost_model.costs(z, res.codes)] if len(res) else [],
               "validity": [bool(v) for v in res.validity]}
        lines.append(json.dumps(rec, sort_keys=True, default=str))
    text = "\n".join(lines) + "\n"
    if args.out:
        write_atomic(Path(args.out), text)
    print(text, end="")
    return EXIT_OK


def cmd_ipf(args) -> int:
    from .experiment import attach_model, load_context, records_of, run_protocol, summary_rows

    cfg = _load_config(args)
    out = Path(args.out_dir)
    ctx = attach_model(cfg, load_context(cfg))
    runs = run_protocol(cfg, ctx, progress=None if args.quiet else _say)
    records = records_of(runs, ctx.name, ctx.data.schema)
    groups = {g: ctx.group_specs[g] for g in cfg.check_groups(ctx.group_specs)}
    rows = summary_rows(records, groups, cfg.ipf["relative_mode"])
    outputs = {
        "trajectories.jsonl": write_atomic(out / "trajectories.jsonl",
                                           "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)),
        "summary.csv": write_atomic(out / "summary.csv", csv_text(rows)),
    }
    write_manifest(out, "ipf", sys.argv[1:], outputs, cfg, cfg.ipf["master_seed"])
    _say(f"{len(records)} trajectories -> {out}")
    return EXIT_OK


def cmd_theory(args) -> int:
    from . import theory

    out = Path(args.out_dir)
    outputs = {}
    if args.bench == "stability":
        if args.engine == "inverse-distance":
            cert, sampled = theory.inverse_distance_bench(seed=args.seed)
            rows = [cert.as_row()]
            if sampled is not None:
                rows.append({"engine": cert.engine, "verdict": "unstable", "witness_seed": sampled["seed"],
                             "witness": " ".join(repr(float(v)) for v in sampled["w"]), "u_grid": sampled["u"]})
        else:
            _, certs = theory.stability_bench(args.worlds, args.probes, seed=args.seed, engines=(args.engine,))
            rows = [c.as_row() for c in certs]
        outputs["stability.csv"] = write_atomic(out / "stability.csv", csv_text(rows))
        verdicts = {r["verdict"] for r in rows}
        print(f"{args.engine}: {len(rows)} certificate(s), verdicts {sorted(verdicts)}")
    elif args.bench == "polygon":
        rows = []
        for k in args.k:
            for u in args.u:
                r = theory.polygon_monte_carlo(theory.PolygonScenario(k, u, args.trials), args.seed)
                rows.append(r.as_row())
                print(f"k={k} u={u} trials={args.trials} relative_cost={r.mean_relative_cost:.4f} "
                      f"(se {r.se:.4f}) consistency={r.consistency:.4f} guard_hits={r.guard_hits}")
        outputs["polygon.csv"] = write_atomic(out / "polygon.csv", csv_text(rows))
    elif args.bench == "oscillation":
        if args.replay:
            fx = theory.OscillationFixture.load(args.fixture or theory.FIXTURE_PATH)
        else:
            fx = theory.find_oscillation_fixture(args.attempts, args.seed)
            if fx is None:
                print(f"not found: no period-2 landscape in {args.attempts} attempts")
                return EXIT_RUNTIME
            outputs["fixture.json"] = write_atomic(out / "fixture.json",
                                                   json.dumps(fx.__dict__, indent=2, sort_keys=True) + "\n")
        tr = theory.replay(fx, args.T)
        period = theory.detect_cycle(tr, args.tolerance)
        one = theory.one_shot_cost(fx)
        row = {"x1": " ".join(map(repr, fx.x1)), "x2": " ".join(map(repr, fx.x2)), "u": fx.u, "T": args.T,
               "steps": tr.steps, "period": period if period is not None else "", "total_cost": tr.total_cost,
               "one_shot_cost": one, "cost_ratio": tr.total_cost / one}
        outputs["oscillation.csv"] = write_atomic(out / "oscillation.csv", csv_text([row]))
        print(f"period={period} total_cost={tr.total_cost:.6f} one_shot={one:.6f} ratio={tr.total_cost / one:.3f}")
    write_manifest(out, f"theory {args.bench}", sys.argv[1:], outputs, seed=args.seed)
    return EXIT_OK


def cmd_report(args) -> int:
    from .experiment import ReportError, check_records, parity_rows, tidy_rows
    from .ipf import read_jsonl
    from .tabular import SchemaConfig, bundled

    records = []
    for path in args.tables:
        recs = read_jsonl(path)
        try:
            check_records(recs)
        except ReportError as e:
            raise UsageError(f"{path}: {e}") from e
        records.extend(recs)
    specs = {}
    for ds in sorted({r["dataset"] for r in records}):
        try:
            specs[ds] = {g.name: g for g in SchemaConfig.load(bundled(ds)[1]).groups}
        except FileNotFoundError:
            specs[ds] = {}
    for path in args.schema or []:
        sc = SchemaConfig.load(path)
        specs[sc.name] = {g.name: g for g in sc.groups}
    out = Path(args.out_dir)
    outputs = {"records.csv": write_atomic(out / "records.csv", csv_text([
        {k: v for k, v in r.items() if k not in ("deltas", "start", "groups")} |
        {f"group_{g}": v for g, v in r["groups"].items()} for r in records])),
        "tidy.csv": write_atomic(out / "tidy.csv", csv_text(tidy_rows(records))),
        "parity.csv": write_atomic(out / "parity.csv", csv_text(parity_rows(records, specs)))}
    write_manifest(out, "report", sys.argv[1:], outputs)
    print(f"{len(records)} records from {len(args.tables)} table(s) -> {out}")
    return EXIT_OK


# --------------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ipflab", description="Counterfactual explanations under iterative partial fulfillment.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, out_default):
        sp.add_argument("--config", help="experiment config (YAML)")
        sp.add_argument("--dataset", help="bundled dataset name (overrides the config)")
        sp.add_argument("--out-dir", default=out_default)

    sp = sub.add_parser("ingest", help="validate a dataset and print its summary")
    sp.add_argument("--config")
    sp.add_argument("--dataset")
    sp.add_argument("--csv")
    sp.add_argument("--schema")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("train", help="train the configured model")
    common(sp, "runs/train")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("explain", help="CF audit log for dataset rows")
    common(sp, "runs/explain")
    sp.add_argument("--model", help="model artifact (trained from the config if absent)")
    sp.add_argument("--engine", default="random",
                    choices=("random", "genetic", "prototype", "optimal-cost", "lookup", "gradient"))
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--row", type=int, nargs="*", help="row ids (default: first negative row)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_explain)

    sp = sub.add_parser("ipf", help="simulate IPF for every configured setup")
    common(sp, "runs/ipf")
    sp.add_argument("--model")
    sp.add_argument("--seed", type=int, help="master seed")
    sp.add_argument("--sample-size", type=int)
    sp.add_argument("--u", type=float, nargs="+")
    sp.add_argument("--workers", type=int)
    sp.add_argument("--quiet", action="store_true")
    sp.set_defaults(func=cmd_ipf)

    sp = sub.add_parser("theory", help="theory benches")
    tsub = sp.add_subparsers(dest="bench", required=True, parser_class=_Parser)
    st = tsub.add_parser("stability")
    st.add_argument("--engine", default="optimal-cost", choices=("optimal-cost", "lookup", "inverse-distance"))
    st.add_argument("--worlds", type=int, default=50)
    st.add_argument("--probes", type=int, default=20)
    po = tsub.add_parser("polygon")
    po.add_argument("--k", type=int, nargs="+", default=[5])
    po.add_argument("--u", type=float, nargs="+", default=[0.5])
    po.add_argument("--trials", type=int, default=10000)
    osc = tsub.add_parser("oscillation")
    osc.add_argument("--replay", action="store_true", help="replay the bundled fixture instead of searching")
    osc.add_argument("--fixture")
    osc.add_argument("--attempts", type=int, default=50)
    osc.add_argument("--T", type=int, default=30)
    osc.add_argument("--tolerance", type=float, default=1e-6)
    for t in (st, po, osc):
        t.add_argument("--seed", type=int, default=0)
        t.add_argument("--out-dir", default="runs/theory")
    sp.set_defaults(func=cmd_theory)

    sp = sub.add_parser("report", help="merge trajectory tables into plot-ready CSVs")
    sp.add_argument("--tables", nargs="+", required=True)
    sp.add_argument("--schema", nargs="*", help="schema YAMLs for non-bundled datasets")
    sp.add_argument("--out-dir", default="runs/report")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    from .config import ConfigError
    from .tabular import SchemaError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "bench", None) == "polygon":
            if any(k < 2 for k in args.k) or any(not 0 < u <= 1 for u in args.u) or args.trials < 1:
                raise UsageError("polygon needs k >= 2, u in (0, 1] and trials >= 1")
        return args.func(args)
    except UsageError as e:
        print(f"ipflab: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, SchemaError, FileNotFoundError) as e:
        print(f"ipflab: configuration error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return int(e.code or 0)
    except Exception as e:
        print(f"ipflab: runtime failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
