"""Command-line surface for the attribution pipeline.

Subcommands: generate, train, fit-scm, icc, sobol-check, verify, pgu.
Every run is reproducible from its --seed flags; repeated invocations
write byte-identical outputs. Exit codes: 0 success, 1 check failure,
2 usage, 3 I/O, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import estimator, evaluation, icc, predictor, reference, scm_learn, sobol
from .errors import DataError, InputError, IoError, NumericError
from .graph import load_graph, save_graph
from .sampler import QmcConfig
from .scm import load_scm, save_scm


def _check_outputs(paths, force: bool):
    for path in paths:
        parent = os.path.dirname(os.path.abspath(path))
        if not os.path.isdir(parent):
            raise IoError(f"output directory {parent} does not exist")
        if os.path.exists(path) and not force:
            raise IoError(f"{path} exists; pass --force to overwrite")


def _load_dataset(args) -> evaluation.Dataset:
    graph = load_graph(args.graph) if getattr(args, "graph", None) else None
    if getattr(args, "schema", None):
        with open(args.schema) as fh:
            schema = json.load(fh)
        return evaluation.load_csv(args.data, schema, graph=graph, seed=args.seed)
    train_csv = os.path.join(args.data, "train.csv")
    test_csv = os.path.join(args.data, "test.csv")
    return evaluation.load_split_csv(train_csv, test_csv, graph=graph,
                                     task=getattr(args, "task", "regression"))


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(args) -> int:
    out = args.output
    os.makedirs(out, exist_ok=True)
    files = {name: os.path.join(out, name) for name in
             ("train.csv", "test.csv", "graph.json", "scm.json")}
    _check_outputs(files.values(), args.force)
    ds = evaluation.generate_synthetic(args.n_train, args.n_test, seed=args.seed)
    evaluation.write_csv(files["train.csv"], ds.feature_names,
                         ds.train_features, ds.train_target)
    evaluation.write_csv(files["test.csv"], ds.feature_names,
                         ds.test_features, ds.test_target)
    save_graph(ds.graph, files["graph.json"])
    save_scm(evaluation.standardized_reference_scm(ds.feature_means, ds.feature_scales),
             files["scm.json"])
    print(f"wrote {len(files)} files to {out} "
          f"({len(ds.train_idx)} train rows, {len(ds.test_idx)} test rows)")
    return 0


def cmd_train(args) -> int:
    _check_outputs([args.output], args.force)
    ds = _load_dataset(args)
    loss = "cross_entropy" if ds.task == "binary" else "squared_error"
    cfg = predictor.TrainConfig(
        epochs=args.epochs, batch_size=args.batch_size,
        learning_rate=args.learning_rate, seed=args.seed, loss=loss,
        hidden=tuple(args.hidden),
    )
    net = predictor.train((ds.train_features, ds.train_target), cfg)
    predictor.save_weights(net, args.output)
    if ds.task == "binary":
        metric = "f1"
        tr = evaluation._f1(ds.train_target, (net(ds.train_features) >= 0.5).astype(int))
        te = evaluation._f1(ds.test_target, (net(ds.test_features) >= 0.5).astype(int))
    else:
        metric = "rmse"
        tr = float(np.sqrt(np.mean((net(ds.train_features) - ds.train_target) ** 2)))
        te = float(np.sqrt(np.mean((net(ds.test_features) - ds.test_target) ** 2)))
    print(f"wrote {args.output}  train {metric}={tr:.4f}  test {metric}={te:.4f}")
    return 0


def cmd_fit_scm(args) -> int:
    if not args.graph:
        raise InputError("fit-scm requires --graph")
    _check_outputs([args.output], args.force)
    ds = _load_dataset(args)
    fit = scm_learn.fit_anm(ds.train_features, ds.graph,
                            regressor=args.regressor, seed=args.seed)
    save_scm(fit.scm, args.output)
    quality = scm_learn.fit_quality(fit, ds.test_features)
    print(f"wrote {args.output}")
    for name, diag in quality["per_node"].items():
        print(f"  {name}: holdout R2={diag['r_squared']:.3f} "
              f"resid-parent |corr|={diag['residual_parent_corr']:.3f} "
              f"marginal KS={diag['marginal_ks']:.3f}")
    if quality["flagged"]:
        print(f"  warning: residual dependence flagged for {quality['flagged']}")
    return 0


def cmd_icc(args) -> int:
    csv_out = os.path.splitext(args.output)[0] + ".csv"
    _check_outputs([args.output, csv_out], args.force)
    net = predictor.load_weights(args.model)
    if args.scm:
        model_scm = load_scm(args.scm)
    elif args.fit_anm:
        if not args.graph:
            raise InputError("--fit-anm requires --graph")
        if not args.data:
            raise InputError("--fit-anm requires --data")
        ds = _load_dataset(args)
        model_scm = scm_learn.fit_anm(ds.train_features, ds.graph,
                                      regressor=args.regressor, seed=args.seed).scm
    else:
        raise InputError("pass --scm FILE or --fit-anm with --data/--graph")

    if args.method == "topo":
        report = icc.icc_topological(
            model_scm, net, B=args.batch, ordering_budget=args.ordering_budget,
            scramble=args.scramble, seed=args.seed,
        )
    else:
        report = icc.icc_shapley(
            model_scm, net, B=args.batch, subset_budget=args.subset_budget,
            scramble=args.scramble, seed=args.seed,
        )
    report = icc.normalize_and_clamp(report, clamp=not args.no_clamp)
    report.save_json(args.output)
    report.save_csv(csv_out)
    print(f"wrote {args.output} and {csv_out}")
    width = max(len(n) for n in report.feature_names)
    for i, name in enumerate(report.feature_names):
        print(f"  {name:<{width}}  raw={report.raw[i]:+.4f}  "
              f"normalized={report.normalized[i]:.4f}")
    if not report.exact:
        print("  note: orderings were sampled, values are approximate")
    return 0


def cmd_pgu(args) -> int:
    csv_out = os.path.splitext(args.output)[0] + ".csv"
    _check_outputs([args.output, csv_out], args.force)
    ds = _load_dataset(args)
    net = predictor.load_weights(args.model)
    test = ds.test_features
    rankings: dict[str, evaluation.Ranking] = {}
    for path in args.ranking or []:
        name, ranking = _load_ranking(path, ds)
        rankings[name] = ranking
    rankings["pfi"] = evaluation.pfi(
        net, ds, metric="rmse" if ds.task == "regression" else "f1_proxy",
        repeats=args.repeats, seed=args.seed,
    )
    rng_seeds = range(args.seed, args.seed + args.random_baselines)
    randoms = [evaluation.random_ranking(ds.p, s) for s in rng_seeds]

    payload = {"rankings": {}, "pgu": {}}
    rows = []
    for name, ranking in rankings.items():
        per_k = evaluation.pgu_per_k(net, test, ranking)
        payload["rankings"][name] = [ds.feature_names[j] for j in ranking.order]
        payload["pgu"][name] = {"per_k": per_k, "aggregate": float(sum(per_k))}
        rows += [(name, k + 1, v) for k, v in enumerate(per_k)]
    rand_aggs = []
    for ranking in randoms:
        per_k = evaluation.pgu_per_k(net, test, ranking)
        rand_aggs.append(float(sum(per_k)))
        rows += [(ranking.method, k + 1, v) for k, v in enumerate(per_k)]
    payload["pgu"]["random_baseline"] = {
        "aggregates": rand_aggs,
        "mean_aggregate": float(np.mean(rand_aggs)),
    }
    with open(args.output, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")
    with open(csv_out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "k", "pgu"])
        for name, k, v in rows:
            writer.writerow([name, k, repr(v)])
    print(f"wrote {args.output} and {csv_out}")
    for name in payload["pgu"]:
        if name == "random_baseline":
            print(f"  random baseline mean aggregate: "
                  f"{payload['pgu'][name]['mean_aggregate']:.4f}")
        else:
            print(f"  {name}: aggregate PGU = {payload['pgu'][name]['aggregate']:.4f}")
    return 0


def _load_ranking(path: str, ds: evaluation.Dataset):
    with open(path) as fh:
        obj = json.load(fh)
    name_to_idx = {n: i for i, n in enumerate(ds.feature_names)}
    if "features" in obj:  # attribution report
        feats = obj["features"]
        vals = [f["icc_normalized"] if f["icc_normalized"] is not None else f["icc_raw"]
                for f in feats]
        order = tuple(name_to_idx[feats[i]["name"]]
                      for i in np.argsort(vals)[::-1])
        return obj.get("method", os.path.basename(path)), evaluation.Ranking(
            order=order, method=obj.get("method", "report"))
    if "order" in obj:  # plain ranking file
        order = tuple(name_to_idx[n] if isinstance(n, str) else int(n)
                      for n in obj["order"])
        name = obj.get("method", os.path.basename(path))
        return name, evaluation.Ranking(order=order, method=name)
    raise DataError(f"{path}: neither an attribution report nor a ranking file")


# ---------------------------------------------------------------------------
# sobol-check and verify


def _linear_predictor(coeffs):
    coeffs = np.asarray(coeffs, dtype=np.float64)
    return lambda x: np.asarray(x) @ coeffs


def cmd_sobol_check(args) -> int:
    cases = _sobol_equivalence_cases(args.batch, args.grid, args.seed)
    failures = 0
    for name, feature_rows in cases:
        print(name)
        for label, mc, oracle, tol in feature_rows:
            ok = abs(mc - oracle) <= tol
            failures += 0 if ok else 1
            status = "ok " if ok else "FAIL"
            print(f"  [{status}] {label}: estimate={mc:+.4f} oracle={oracle:+.4f} "
                  f"tol={tol:.4f}")
    return 1 if failures else 0


def _sobol_equivalence_cases(B: int, grid: int, seed: int):
    """Shapley attributions vs the quadrature oracle on three test functions."""
    out = []
    # additive and pure-interaction on standard normal inputs
    gauss = [reference.independent_scm(
        tuple(reference.GaussianNoise() for _ in range(2)))] * 2
    funcs = [
        ("additive f = x1 + x2", gauss[0], lambda x: x[:, 0] + x[:, 1]),
        ("interaction f = x1 * x2", gauss[1], lambda x: x[:, 0] * x[:, 1]),
    ]
    for name, model_scm, fn in funcs:
        dec = sobol.hdmr(fn, model_scm.noise, grid=grid)
        rows = _compare_shapley(model_scm, fn, dec, B, seed)
        out.append((name, rows))
    ishigami_scm = reference.independent_uniform_scm(3)
    fn = lambda x: (np.sin(x[:, 0]) + 7.0 * np.sin(x[:, 1]) ** 2
                    + 0.1 * x[:, 2] ** 4 * np.sin(x[:, 0]))  # noqa: E731
    dec = sobol.hdmr(fn, ishigami_scm.noise, grid=grid)
    out.append(("ishigami", _compare_shapley(ishigami_scm, fn, dec, B, seed)))
    return out


def _compare_shapley(model_scm, fn, dec, B, seed, n_seeds: int = 10):
    reps = np.array([
        icc.icc_shapley(model_scm, fn, B=B, seed=seed + r).raw
        for r in range(n_seeds)
    ])
    mean = reps.mean(axis=0)
    se = reps.std(axis=0, ddof=1) / np.sqrt(n_seeds)
    rows = []
    for j in range(model_scm.p):
        oracle = sobol.sobol_to_shapley(dec, j)
        tol = max(0.02, 3.0 * se[j])
        rows.append((f"feature {model_scm.graph.nodes[j]}", mean[j], oracle, tol))
    return rows


def _verify_checks(tolerance: float | None, seed: int):
    """Yield (name, callable) pairs; each callable returns (ok, detail)."""
    lin = reference.reference_linear_scm()
    readout = np.array([0.0, 0.0, 1.0])
    net = _linear_predictor(readout)

    def tol_or(default):
        return default if tolerance is None else tolerance

    def check_calibration():
        B = 2**14
        empty = estimator.phi_scm(lin, net, frozenset(), B, seed=seed).value
        full = estimator.phi_scm(lin, net, frozenset(range(3)), B, seed=seed).value
        ok = abs(empty) < tol_or(0.01) and abs(full - 1.0) < max(1e-12, 0.0 if tolerance is None else tolerance)
        return ok, f"phi(empty)={empty:+.2e} phi(full)-1={full - 1.0:+.2e}"

    def check_efficiency():
        report = icc.icc_topological(lin, net, B=2**12, seed=seed)
        inner = icc.efficiency_residual(report)
        outer = abs(sum(report.raw) - 1.0)
        ok = inner < 1e-12 and outer < tol_or(0.03)
        return ok, f"telescoped={inner:.2e} vs-ideal={outer:.3f}"

    def check_nullity():
        g = reference.build_graph(["a", "b"], [])
        model_scm = reference.independent_scm(
            (reference.GaussianNoise(), reference.GaussianNoise()), ["a", "b"])
        fn = _linear_predictor([1.0, 0.0])
        rep = icc.icc_shapley(model_scm, fn, B=2**14, seed=seed)
        del g
        ok = abs(rep.raw[1]) < tol_or(0.01)
        return ok, f"|icc(disconnected)|={abs(rep.raw[1]):.4f}"

    def check_symmetry():
        model_scm = reference.independent_scm(
            (reference.GaussianNoise(), reference.GaussianNoise()))
        fn = _linear_predictor([1.0, 1.0])
        reps = np.array([
            icc.icc_shapley(model_scm, fn, B=2**10, seed=seed + r).raw
            for r in range(20)
        ])
        diff = abs(reps[:, 0].mean() - reps[:, 1].mean())
        se = np.sqrt(reps[:, 0].var(ddof=1) / 20 + reps[:, 1].var(ddof=1) / 20)
        ok = diff < (2 * se if tolerance is None else tolerance)
        return ok, f"diff={diff:.4f} 2se={2 * se:.4f}"

    def check_sensitivity():
        rep = icc.icc_topological(lin, _linear_predictor([0.0, 1.0, 0.0]), B=2**14,
                                  seed=seed)
        ok = abs(rep.raw[2]) < tol_or(0.01)  # X is a sink the readout ignores
        return ok, f"|icc(ignored sink)|={abs(rep.raw[2]):.4f}"

    def check_linear_oracle():
        target = reference.analytic_icc(lin, readout)
        topo = np.asarray(icc.icc_topological(lin, net, B=2**14, seed=seed).raw)
        shap = np.asarray(icc.icc_shapley(lin, net, B=2**14, seed=seed).raw)
        err = max(np.abs(topo - target).max(), np.abs(shap - target).max())
        ok = err < tol_or(0.02)
        return ok, f"max|err|={err:.4f}"

    def check_sobol_equivalence():
        cases = _sobol_equivalence_cases(2**12, 32, seed)
        worst = 0.0
        ok = True
        for _, rows in cases:
            for _, mc, oracle, tol in rows:
                worst = max(worst, abs(mc - oracle))
                if abs(mc - oracle) > (tol if tolerance is None else tolerance):
                    ok = False
        return ok, f"max|err|={worst:.4f}"

    def check_rqmc():
        B = 2**10
        qm = [estimator.phi_scm(lin, net, frozenset([0]), B, seed=seed + r).value
              for r in range(30)]
        mc = [estimator.phi_scm(lin, net, frozenset([0]), B, engine="pseudo",
                                seed=seed + 500 + r).value for r in range(30)]
        s_q, s_m = np.std(qm, ddof=1), np.std(mc, ddof=1)
        return s_q < s_m, f"std(scrambled)={s_q:.2e} < std(pseudo)={s_m:.2e}"

    return [
        ("calibration", check_calibration),
        ("efficiency", check_efficiency),
        ("nullity", check_nullity),
        ("symmetry", check_symmetry),
        ("sensitivity", check_sensitivity),
        ("linear-oracle", check_linear_oracle),
        ("sobol-equivalence", check_sobol_equivalence),
        ("rqmc", check_rqmc),
    ]


def cmd_verify(args) -> int:
    checks = _verify_checks(args.tolerance, args.seed)
    if args.only:
        checks = [(n, f) for n, f in checks if args.only in n]
        if not checks:
            raise InputError(f"no check matches --only {args.only!r}")
    failures = 0
    for name, fn in checks:
        ok, detail = fn()
        failures += 0 if ok else 1
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# parser


def _add_common(sp, output_default=None, needs_output=True):
    sp.add_argument("--seed", type=int, default=0, help="master random seed")
    sp.add_argument("--threads", type=int, default=1,
                    help="worker cap (results are identical at any value)")
    sp.add_argument("--force", action="store_true",
                    help="overwrite existing output files")
    if needs_output:
        sp.add_argument("--output", "-o", default=output_default,
                        required=output_default is None, help="output path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="icckit",
        description="Feature attribution for tabular predictors via "
                    "noise-conditioned variance decomposition.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write the synthetic dataset files")
    _add_common(g, output_default="synthetic")
    g.add_argument("--n-train", type=int, default=700)
    g.add_argument("--n-test", type=int, default=300)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train the built-in feed-forward net")
    _add_common(t, output_default="model.json")
    t.add_argument("--data", required=True, help="directory with train.csv/test.csv")
    t.add_argument("--task", choices=["regression", "binary"], default="regression")
    t.add_argument("--epochs", type=int, default=100)
    t.add_argument("--batch-size", type=int, default=32)
    t.add_argument("--learning-rate", type=float, default=3e-4)
    t.add_argument("--hidden", type=int, nargs="+", default=[256, 128])
    t.set_defaults(func=cmd_train)

    f = sub.add_parser("fit-scm", help="fit an additive-noise model to data")
    _add_common(f, output_default="fitted_scm.json")
    f.add_argument("--data", required=True)
    f.add_argument("--graph", required=True, help="graph JSON file")
    f.add_argument("--schema", help="schema JSON for a single CSV")
    f.add_argument("--task", choices=["regression", "binary"], default="regression")
    f.add_argument("--regressor", choices=["poly_ridge", "mlp"], default="poly_ridge")
    f.set_defaults(func=cmd_fit_scm)

    i = sub.add_parser("icc", help="compute feature attributions")
    _add_common(i, output_default="report.json")
    i.add_argument("--model", required=True, help="weight JSON file")
    i.add_argument("--method", choices=["topo", "shapley"], default="topo")
    i.add_argument("--scm", help="SCM JSON file (exact backend)")
    i.add_argument("--fit-anm", action="store_true",
                   help="fit an additive-noise model from --data/--graph first")
    i.add_argument("--data", help="dataset directory (with --fit-anm)")
    i.add_argument("--graph", help="graph JSON (with --fit-anm)")
    i.add_argument("--schema", help="schema JSON for a single CSV")
    i.add_argument("--task", choices=["regression", "binary"], default="regression")
    i.add_argument("--regressor", choices=["poly_ridge", "mlp"], default="poly_ridge")
    i.add_argument("-B", "--batch", type=int, default=4096,
                   help="estimator block size (a power of two is recommended)")
    i.add_argument("--scramble", choices=["none", "nested", "shift"], default="nested")
    i.add_argument("--ordering-budget", type=int, default=icc.DEFAULT_ORDERING_BUDGET)
    i.add_argument("--subset-budget", type=int, default=icc.DEFAULT_PERMUTATION_BUDGET)
    i.add_argument("--no-clamp", action="store_true",
                   help="keep negative attributions when normalizing")
    i.set_defaults(func=cmd_icc)

    s = sub.add_parser("sobol-check", help="compare attributions with the "
                                           "quadrature oracle on test functions")
    _add_common(s, needs_output=False)
    s.add_argument("-B", "--batch", type=int, default=2**12)
    s.add_argument("--grid", type=int, default=64)
    s.set_defaults(func=cmd_sobol_check)

    v = sub.add_parser("verify", help="run the built-in property suite")
    _add_common(v, needs_output=False)
    v.add_argument("--only", help="run only checks whose name contains this")
    v.add_argument("--tolerance", type=float,
                   help="override the per-check Monte Carlo tolerances")
    v.set_defaults(func=cmd_verify)

    p = sub.add_parser("pgu", help="prediction-gap evaluation of rankings")
    _add_common(p, output_default="pgu.json")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--task", choices=["regression", "binary"], default="regression")
    p.add_argument("--ranking", nargs="*", help="attribution reports or ranking files")
    p.add_argument("--repeats", type=int, default=10, help="PFI shuffles per feature")
    p.add_argument("--random-baselines", type=int, default=20)
    p.set_defaults(func=cmd_pgu)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "batch", None) is not None:
        if args.batch >= 2 and args.batch & (args.batch - 1):
            print(f"warning: B={args.batch} is not a power of two", file=sys.stderr)
    try:
        return args.func(args)
    except (InputError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except DataError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except NumericError as err:
        print(f"error: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
