"""Command-line entry point: ``verge simulate | fit | summarize | predict | benchmark``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import io
from .model import (
    EmptyTraceError,
    NumericalFault,
    PredictionError,
    Trace,
    ValidationError,
    default_hyperparameters,
    standardize,
)
from .sampler import RunConfig, run_chains
from .simulation import Scenario, format_table, gen_dataset, run_campaign, table_rows
from .summaries import predict, smoothed_curves, summarize

log = logging.getLogger("verge")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_EMPTY = 4
EXIT_PREDICTION = 5

RUN_KEYS = set(RunConfig.__dataclass_fields__)


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _split_config(cfg):
    """Split a flat config mapping into hyperparameter and run-setting overrides."""
    hyper, run = {}, {}
    for k, v in cfg.items():
        (run if k in RUN_KEYS else hyper)[k] = v
    return hyper, run


def _load_train(path):
    y, X, Z = io.read_dataset_csv(path)
    if y is None:
        raise ValidationError(f"{path}: training data needs a y column")
    return standardize(y, X, Z)


def _check_meta(trace, data):
    meta = trace.meta.get("standardizer")
    if meta is None:
        return
    st = data.standardizer
    ok = (np.allclose(meta["x_mean"], st.x_mean) and np.allclose(meta["x_sd"], st.x_sd)
          and np.allclose(meta["z_min"], st.z_min) and np.allclose(meta["z_range"], st.z_range)
          and np.isclose(meta["y_mean"], st.y_mean))
    if not ok:
        raise ValidationError("training data does not match the data the trace was fitted on")


def _load_traces(paths):
    traces = [io.read_trace(p) for p in paths]
    merged = Trace(records=[r for t in traces for r in t.records], meta=traces[0].meta)
    if len(merged) == 0:
        raise EmptyTraceError("trace holds no records")
    return merged


def cmd_simulate(args):
    sim = gen_dataset(args.p, args.n, args.n_test, args.k, args.seed)
    os.makedirs(args.out, exist_ok=True)
    io.write_dataset_csv(os.path.join(args.out, "train.csv"), *sim.raw_train)
    io.write_dataset_csv(os.path.join(args.out, "test.csv"), *sim.raw_test)
    truth = sim.truth.to_dict()
    truth.update({"n": args.n, "n_test": args.n_test, "P": args.p, "K": args.k, "seed": args.seed})
    _write_json(os.path.join(args.out, "truth.json"), truth)
    print(f"wrote {args.n} training and {args.n_test} test rows with {args.p} predictors to {args.out}")


def cmd_fit(args):
    data = _load_train(args.train)
    cfg = io.load_config(args.config) if args.config else {}
    hyper_over, run_over = _split_config(cfg)
    burn_in = args.burn_in if args.burn_in is not None else args.iters // 2
    run = {"total_iterations": args.iters, "burn_in": burn_in, "thin": args.thin,
           "seed": args.seed, "chains": args.chains, "rho_step": args.rho_step,
           "scale_step": args.scale_step, "dump_dir": args.out}
    run.update(run_over)
    config = RunConfig(**run)
    hyper = default_hyperparameters(data.P, **hyper_over)
    os.makedirs(args.out, exist_ok=True)

    results = run_chains(data, hyper, config)
    stats = {}
    if config.chains == 1:
        trace, st = results[0]
        io.write_trace(os.path.join(args.out, "trace.jsonl"), trace)
        stats["chain1"] = st.to_dict()
    else:
        ppis = []
        for c, (trace, st) in enumerate(results, start=1):
            io.write_trace(os.path.join(args.out, f"trace_chain{c}.jsonl"), trace)
            stats[f"chain{c}"] = st.to_dict()
            ppis.append(trace.gamma_matrix().mean(axis=0) if len(trace) else np.zeros(data.P))
        corr = {}
        for a in range(len(ppis)):
            for b in range(a + 1, len(ppis)):
                r = np.corrcoef(ppis[a], ppis[b])[0, 1]
                corr[f"chain{a + 1}-chain{b + 1}"] = None if np.isnan(r) else float(r)
        _write_json(os.path.join(args.out, "ppi_correlation.json"), {"pearson": corr})
        for pair, r in corr.items():
            print(f"predictor PPI correlation {pair}: {r}")
    _write_json(os.path.join(args.out, "move_stats.json"), stats)
    print(f"wrote trace(s) and move statistics to {args.out}")


def cmd_summarize(args):
    trace = _load_traces(args.trace)
    data = _load_train(args.train)
    _check_meta(trace, data)
    report = summarize(trace, data.n, threshold=args.threshold, fdr=args.fdr)
    os.makedirs(args.out, exist_ok=True)
    _write_json(os.path.join(args.out, "report.json"), report.to_dict())

    with open(os.path.join(args.out, "ppi.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["predictor", "ppi", "selected"] + [f"z{k + 1}_ppi" for k in range(data.K)])
        for j, p in enumerate(report.predictor_ppi):
            w.writerow([f"x{j + 1}", repr(float(p)), int(j in report.selected_predictors)]
                       + [repr(float(v)) for v in report.covariate_ppi[j]])
    with open(os.path.join(args.out, "edges.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "ppi", "selected"])
        for (i, j), p in report.edge_ppi.items():
            w.writerow([f"x{i + 1}", f"x{j + 1}", repr(float(p)), int(p > args.threshold)])

    raw_Z = data.standardizer.inverse_Z(data.Z)
    curves = {}
    smooth = {}
    if report.selected_predictors:
        try:
            sel, sm = smoothed_curves(trace, data, data.Z, threshold=args.threshold)
            smooth = {int(j): sm[r] for r, j in enumerate(sel)}
        except PredictionError as exc:
            log.warning("smoothed curves unavailable: %s", exc)
    for j in report.selected_predictors:
        curves[j] = report.beta_hat[j]
        path = os.path.join(args.out, f"coef_x{j + 1}.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"z{k + 1}" for k in range(data.K)] + ["beta_hat", "beta_smooth"])
            for i in range(data.n):
                sm = repr(float(smooth[j][i])) if j in smooth else ""
                w.writerow([repr(float(v)) for v in raw_Z[i]]
                           + [repr(float(report.beta_hat[j, i])), sm])
    if not args.no_plots:
        from .plotting import plot_coefficient_curves, plot_ppi

        plot_ppi(report.predictor_ppi, report.threshold, os.path.join(args.out, "ppi.png"))
        plot_coefficient_curves(raw_Z, {j: smooth.get(j, curves[j]) for j in curves},
                                report.selected_covariates,
                                os.path.join(args.out, "coefficients.png"))
    print(f"selected predictors: {[f'x{j + 1}' for j in report.selected_predictors]}")
    print(f"selected edges: {len(report.selected_edges)}")


def cmd_predict(args):
    trace = _load_traces(args.trace)
    data = _load_train(args.train)
    _check_meta(trace, data)
    y_test, X_test, Z_test = io.read_dataset_csv(args.test)
    if X_test.shape[1] != data.P or Z_test.shape[1] != data.K:
        raise ValidationError("test file dimensions do not match the training data")
    st = data.standardizer
    y_hat = st.inverse_y(predict(trace, data, st.transform_X(X_test), st.transform_Z(Z_test),
                                 threshold=args.threshold))
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "predictions.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y_hat"] + ([] if y_test is None else ["y"]))
        for i, v in enumerate(y_hat):
            w.writerow([repr(float(v))] + ([] if y_test is None else [repr(float(y_test[i]))]))
    summary = {"n_test": int(y_hat.size)}
    if y_test is not None:
        from .simulation import pmse

        summary["pmse"] = pmse(y_hat, y_test)
        print(f"PMSE {summary['pmse']!r}")
    _write_json(os.path.join(args.out, "prediction_summary.json"), summary)


def cmd_benchmark(args):
    scenario = Scenario.preset(args.scenario, desk_scale=args.desk_scale)
    if args.config:
        cfg = io.load_config(args.config)
        merged = {**vars(scenario), **cfg}
        if "run" in cfg:
            merged["run"] = {**scenario.run, **cfg["run"]}
        scenario = Scenario.from_dict(merged)
    if args.seed is not None:
        scenario.seed = args.seed
    if args.replicates is not None:
        scenario.replicates = args.replicates
    if args.iters is not None:
        scenario.run = {**scenario.run, "total_iterations": args.iters,
                        "burn_in": args.iters // 2}
    result = run_campaign(scenario)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "campaign.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "target", "mean", "sd", "count"])
        for metric, group, mean, sd, count in table_rows(result["table"]):
            w.writerow([metric, group, "" if mean is None else repr(mean),
                        "" if sd is None else repr(sd), count])
    text = format_table(result["table"])
    text += f"\n\nreplicates: {len(result['replicates'])} scored, {result['failures']} failed\n"
    with open(os.path.join(args.out, "campaign.txt"), "w") as fh:
        fh.write(text)
    _write_json(os.path.join(args.out, "replicates.json"), result["replicates"])
    print(text, end="")


def build_parser():
    p = argparse.ArgumentParser(prog="verge", description=__doc__)
    p.add_argument("--quiet", action="store_true", help="suppress progress lines on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a synthetic cluster-graph data set")
    s.add_argument("--n", type=int, default=200)
    s.add_argument("--p", type=int, default=60)
    s.add_argument("--k", type=int, default=3)
    s.add_argument("--n-test", type=int, default=50)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=".")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="run the MCMC sampler on a training CSV")
    f.add_argument("--train", required=True)
    f.add_argument("--out", default=".")
    f.add_argument("--iters", type=int, default=60_000)
    f.add_argument("--burn-in", type=int, default=None, help="default: half of --iters")
    f.add_argument("--thin", type=int, default=5)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--chains", type=int, default=1)
    f.add_argument("--rho-step", type=float, default=0.5)
    f.add_argument("--scale-step", type=float, default=0.3)
    f.add_argument("--config", help="YAML/JSON file of hyperparameter and run overrides")
    f.set_defaults(func=cmd_fit)

    m = sub.add_parser("summarize", help="selection report and plot data from traces")
    m.add_argument("--trace", required=True, action="append")
    m.add_argument("--train", required=True)
    m.add_argument("--out", default=".")
    m.add_argument("--threshold", type=float, default=0.5)
    m.add_argument("--fdr", type=float, default=None,
                   help="choose the predictor threshold by expected FDR instead")
    m.add_argument("--no-plots", action="store_true")
    m.set_defaults(func=cmd_summarize)

    r = sub.add_parser("predict", help="predict held-out responses")
    r.add_argument("--trace", required=True, action="append")
    r.add_argument("--train", required=True)
    r.add_argument("--test", required=True)
    r.add_argument("--out", default=".")
    r.add_argument("--threshold", type=float, default=0.5)
    r.set_defaults(func=cmd_predict)

    b = sub.add_parser("benchmark", help="multi-replicate simulation campaign")
    b.add_argument("--scenario", default="base")
    b.add_argument("--desk-scale", action="store_true")
    b.add_argument("--replicates", type=int, default=None)
    b.add_argument("--iters", type=int, default=None)
    b.add_argument("--seed", type=int, default=None)
    b.add_argument("--config", help="YAML/JSON scenario file")
    b.add_argument("--out", default=".")
    b.set_defaults(func=cmd_benchmark)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        stream=sys.stderr, format="%(message)s")
    try:
        args.func(args)
    except EmptyTraceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except PredictionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PREDICTION
    except NumericalFault as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
