"""Command-line entry point: ``smmkit <command> ...`` (or ``python -m smmkit``)."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import harness
from .expected import ExpectedKernelConfig
from .flex import SmoothingFamily, verify_equivalence
from .kernels import parse_kernel
from .level2 import parse_level2
from .measures import Gaussian, LabeledMeasureSet, distributions_from_list
from .model import (accuracy, build_gram, decision_function, load_model, save_model, sign,
                    train)
from .solver import SolverParams
from .verification import lipschitz_bound_rkhs, risk_deviation_check


def _read_json(path):
    with open(path) as f:
        return json.load(f)


def _emit(obj, out):
    text = json.dumps(obj, indent=1, sort_keys=True)
    if out:
        with open(out, "w") as f:
            f.write(text)
    else:
        print(text)


def _load_set(path, split) -> LabeledMeasureSet:
    return LabeledMeasureSet.from_dict(_load_node(path, split))


def _load_node(path, split):
    """A list of distributions, or the ``split`` entry of a dataset file."""
    data = _read_json(path)
    if isinstance(data, dict) and "distributions" not in data:
        data = data[split]
    return data


def _load_dists(path, split):
    node = _load_node(path, split)
    return distributions_from_list(node if isinstance(node, list) else node["distributions"])


def _config(args):
    corr = None if args.correction == "auto" else args.correction == "on"
    return ExpectedKernelConfig(parse_kernel(args.kernel), diagonal_correction=corr,
                                empirical_fallback=args.fallback)


def _add_kernel_args(p):
    p.add_argument("--kernel", default="rbf:gamma=1", help='embedding kernel, e.g. "rbf:gamma=0.25"')
    p.add_argument("--level2", default=None, help='level-2 kernel, e.g. "l2:rbf:gamma=0.1"')
    p.add_argument("--correction", choices=("auto", "on", "off"), default="auto",
                   help="same-index trace correction (linear kernel only)")
    p.add_argument("--fallback", action="store_true",
                   help="sample stand-ins when no closed form exists")


def cmd_gen(args):
    spec = harness.SyntheticTaskSpec.from_dict(_read_json(args.spec)) if args.spec \
        else harness.SyntheticTaskSpec.desk()
    if args.seed is not None:
        spec = harness.SyntheticTaskSpec.from_dict({**spec.to_dict(), "seed": args.seed})
    tr, te = harness.generate_task(spec)
    _emit({"spec": spec.to_dict(), "train": tr.to_dict(), "test": te.to_dict()}, args.out)


def cmd_gram(args):
    dists = _load_dists(args.data, args.split)
    level2 = parse_level2(args.level2) if args.level2 else None
    G = build_gram(_config(args), dists, level2)
    np.savetxt(args.out, G.values, delimiter=",", fmt="%.17g")
    sidecar = args.out[:-4] + ".json" if args.out.endswith(".csv") else args.out + ".json"
    _emit(G.provenance(), sidecar)


def cmd_train(args):
    data = _load_set(args.data, args.split)
    level2 = parse_level2(args.level2) if args.level2 else None
    model = train(data, _config(args), level2, SolverParams(C=args.C, tol=args.tol), seed=args.seed)
    save_model(model, args.out)
    print(json.dumps({"n_support": int(len(model.support)), "bias": model.bias,
                      "training_accuracy": accuracy(model, data), **model.metadata}))


def cmd_predict(args):
    model = load_model(args.model)
    node = _load_node(args.data, args.split)
    labels = None
    if isinstance(node, dict) and node.get("labels") is not None:
        labels = np.asarray(node["labels"], dtype=float)
    dists = distributions_from_list(node if isinstance(node, list) else node["distributions"])
    scores = decision_function(model, dists)
    out = {"decision": scores.tolist(), "label": sign(scores).astype(int).tolist()}
    if labels is not None:
        out["accuracy"] = float(np.mean(sign(scores) == labels))
    _emit(out, args.out)


def cmd_cv(args):
    data = _load_set(args.data, args.split)
    grid = harness.CVGrid.from_dict(_read_json(args.grid)) if args.grid else harness.CVGrid.desk()
    best, acc = harness.run_cv(data, grid, args.combo, np.random.default_rng(args.seed), seed=args.seed)
    _emit({"combo": args.combo, "best": best, "cv_accuracy": acc}, args.out)


def cmd_experiment(args):
    spec = harness.SyntheticTaskSpec.from_dict(_read_json(args.spec)) if args.spec \
        else harness.SyntheticTaskSpec.desk()
    grid = harness.CVGrid.from_dict(_read_json(args.grid)) if args.grid else harness.CVGrid.desk()
    combos = harness.parse_combos(args.combos)

    def progress(rep, accs):
        print(f"rep {rep}: " + " ".join(f"{k}={v:.3f}" for k, v in accs.items()), file=sys.stderr)

    report = harness.run_experiment(spec, combos, args.reps, args.seed, grid,
                                    baselines=not args.no_baselines, n_virtual=args.n_virtual,
                                    progress=progress)
    harness.write_report(report, args.out, args.csv)
    if args.boundary_csv:
        rows = harness.experiment_boundary(spec, report, combos[0])
        harness.write_boundary_csv(rows, args.boundary_csv)
    for name, res in report.results.items():
        print(f"{name}: {res['mean']:.4f} +- {res['std']:.4f}")


def cmd_verify_equivalence(args):
    rng = np.random.default_rng(args.seed)
    X = rng.standard_normal((args.n, args.dim))
    y = np.where(np.arange(args.n) % 2 == 0, 1.0, -1.0)
    fam = SmoothingFamily(variances=args.variance_scale * rng.uniform(0.0, 1.0, args.n))
    probes = rng.uniform(-3, 3, (args.probes, args.dim))
    report = verify_equivalence(X, y, fam, parse_kernel(args.kernel),
                                SolverParams(C=args.C), probes, seed=args.seed)
    _emit(report, args.out)
    return 0 if report["passed"] else 1


def cmd_verify_bound(args):
    rng = np.random.default_rng(args.seed)
    if args.model:
        model = load_model(args.model)
    else:
        task = harness.SyntheticTaskSpec.desk(dim=2, seed=args.seed, wishart_df=4,
                                              wishart_scale_pos=0.1, wishart_scale_neg=0.2)
        tr, _ = harness.generate_task(task)
        model = train(tr, ExpectedKernelConfig(parse_kernel(args.kernel)),
                      params=SolverParams(C=args.C), seed=args.seed)
    dim = model.support_distributions[0].dim
    C_f = lipschitz_bound_rkhs(model)
    cases = []
    for _ in range(args.cases):
        A = rng.standard_normal((dim, dim))
        P = Gaussian(rng.uniform(-3, 3, dim), A @ A.T * rng.uniform(0.05, 1.0))
        y = float(rng.choice([-1.0, 1.0]))
        r = risk_deviation_check(P, y, model, n=args.samples, rng=rng, C_f=C_f)
        cases.append({"lhs": r.lhs, "rhs": r.rhs, "stderr": r.stderr, "holds": r.holds})
    out = {"C_f": C_f, "cases": cases, "n_holds": sum(c["holds"] for c in cases),
           "holds": all(c["holds"] for c in cases)}
    if args.cases == 1:
        out.update(cases[0])
    _emit(out, args.out)
    return 0 if out["holds"] else 1


def build_parser():
    ap = argparse.ArgumentParser(prog="smmkit", description="Support measure machines")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic train/test task")
    p.add_argument("--spec", help="task spec JSON (desk-scale defaults otherwise)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("gram", help="Gram matrix as CSV plus a provenance sidecar")
    p.add_argument("--data", required=True, help="JSON list of distributions or a dataset")
    p.add_argument("--split", default="train")
    p.add_argument("--out", required=True)
    _add_kernel_args(p)
    p.set_defaults(func=cmd_gram)

    p = sub.add_parser("train", help="train an SMM and save it as JSON")
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--out", required=True)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    _add_kernel_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="decision values and labels from a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("cv", help="grid cross-validation for one kernel combination")
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--grid")
    p.add_argument("--combo", default="rbf/rbf", help='"embedding/level2", e.g. "poly2/rbf"')
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("experiment", help="repeated synthetic benchmark")
    p.add_argument("--spec")
    p.add_argument("--grid")
    p.add_argument("--combos", default="rbf/rbf", help="comma-separated combos")
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--csv")
    p.add_argument("--no-baselines", action="store_true")
    p.add_argument("--n-virtual", type=int, default=5)
    p.add_argument("--boundary-csv", help="decision lattice for 2-D tasks")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("verify", help="numerical checks")
    vsub = p.add_subparsers(dest="check", required=True)
    q = vsub.add_parser("equivalence", help="linear SMM on smoothed points vs Flex-SVM")
    q.add_argument("--n", type=int, default=30)
    q.add_argument("--dim", type=int, default=2)
    q.add_argument("--probes", type=int, default=50)
    q.add_argument("--kernel", default="rbf:gamma=1")
    q.add_argument("--variance-scale", type=float, default=0.5)
    q.add_argument("--C", type=float, default=1.0)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out")
    q.set_defaults(func=cmd_verify_equivalence)
    q = vsub.add_parser("bound", help="risk-deviation bound on random Gaussians")
    q.add_argument("--model", help="saved RBF model (a 2-D model is trained otherwise)")
    q.add_argument("--kernel", default="rbf:gamma=1")
    q.add_argument("--C", type=float, default=1.0)
    q.add_argument("--cases", type=int, default=20)
    q.add_argument("--samples", type=int, default=2000)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out")
    q.set_defaults(func=cmd_verify_bound)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return int(args.func(args) or 0)


if __name__ == "__main__":
    sys.exit(main())
