"""Command-line interface: fit, predict, cv, simulate, gradcheck, rank.

Exit codes: 0 success, 2 malformed input file, 3 shape mismatch,
4 optimization failure (including degenerate data and zero beta),
5 gradient check mismatch.
"""

import argparse
import json
import sys

import numpy as np

from . import io
from .errors import (ConstantTruth, DegenerateData, FactorizationError,
                     MalformedFile, NonFiniteObjective, RankDeficiencyError,
                     ShapeMismatch, TooFewSamples, ZeroBeta)
from .model import (Dataset, ModelParams, build_workspace, finite_diff_gradient,
                    grad_log_likelihood)
from .optimizer import FitConfig, FitResult, fit
from .select import cross_validate, rank_features
from .simulate import GenConfig, LinesConfig, generate, generate_lines

EXIT_OK = 0
EXIT_MALFORMED = 2
EXIT_SHAPE = 3
EXIT_OPTIM = 4
EXIT_GRADCHECK = 5

_MODE_NAMES = {"line-search": "line_search_ascent", "adam": "adaptive_moment"}


def _add_fit_flags(sub):
    sub.add_argument("--alpha", type=float, default=1.0)
    sub.add_argument("--tol", type=float, default=1e-4)
    sub.add_argument("--max-iter", type=int, default=5000)
    sub.add_argument("--mode", choices=sorted(_MODE_NAMES), default="line-search")
    sub.add_argument("--restarts", type=int, default=3)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--step0", type=float, default=1e-2)
    sub.add_argument("--init", choices=["random-normal", "pca-warm-start"],
                     default="random-normal")


def _fit_config(args, d):
    return FitConfig(d=d, alpha=args.alpha, tol=args.tol, max_iter=args.max_iter,
                     mode=_MODE_NAMES[args.mode], step0=args.step0,
                     restarts=args.restarts, seed=args.seed,
                     init=args.init.replace("-", "_"))


def _load_dataset(args):
    X, fg_names, r = io.read_table(args.foreground, response_col=args.response_col)
    Y, bg_names, _ = io.read_table(args.background)
    if fg_names != bg_names:
        raise ShapeMismatch(
            "foreground and background feature columns disagree by name or order")
    return Dataset(X=X, r=r, Y=Y, feature_names=fg_names)


def cmd_fit(args):
    data = _load_dataset(args)
    config = _fit_config(args, args.d)
    result = fit(data, config)
    meta = {"seed": config.seed, "iterations": result.iterations,
            "final_ll": float(result.final_ll), "converged": result.converged}
    doc = io.model_to_dict(result.params, result.center_x, result.center_r,
                           config.alpha, meta, feature_names=data.feature_names)
    io.save_model(args.out, doc)
    report = {"final_ll": float(result.final_ll), "iterations": result.iterations,
              "converged": result.converged, "best_restart": result.best_restart,
              "grad_inf_norm": result.grad_inf_norm,
              "wall_time_seconds": result.wall_time_seconds, "model": args.out}
    print(json.dumps(report))
    return EXIT_OK


def cmd_predict(args):
    params, center_x, center_r, _, names, meta = io.load_model(args.model)
    X, in_names, _ = io.read_table(args.input)
    if X.shape[1] != params.p:
        raise ShapeMismatch(f"model has p={params.p} but input has {X.shape[1]} columns")
    if names is not None and in_names != list(names):
        raise ShapeMismatch("input feature columns disagree with the model's")
    ws = build_workspace(params)
    means = (X - center_x) @ ws.pred_coef + center_r
    io.write_predictions(args.out, means, ws.pred_var)
    return EXIT_OK


def cmd_cv(args):
    data = _load_dataset(args)
    d_grid = [int(tok) for tok in args.d_grid.split(",") if tok]
    config = _fit_config(args, d_grid[0])
    report = cross_validate(data, d_grid, args.k, config)
    doc = {
        "d_grid": report.d_grid,
        "k": report.k,
        "best_d": report.best_d,
        "train_r2": [[None if np.isnan(v) else float(v) for v in row]
                     for row in report.train_r2],
        "test_r2": [[None if np.isnan(v) else float(v) for v in row]
                    for row in report.test_r2],
    }
    print(json.dumps(doc))
    if args.out_csv:
        import csv
        with open(args.out_csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["d", "fold", "train_r2", "test_r2"])
            for di, d in enumerate(report.d_grid):
                for fi in range(report.k):
                    writer.writerow([d, fi,
                                     repr(float(report.train_r2[di, fi])),
                                     repr(float(report.test_r2[di, fi]))])
    return EXIT_OK


def cmd_simulate(args):
    if args.lines:
        config = LinesConfig(image_side=args.image_side, n_fg=args.n, n_bg=args.m,
                             background_rank=args.background_rank,
                             noise_sd=args.noise_sd,
                             line_column=(args.line_column if args.line_column >= 0
                                          else args.image_side // 2),
                             seed=args.seed)
        data = generate_lines(config)
        truth = None
    else:
        if args.p < 1 or args.d < 1:
            raise ShapeMismatch("--p and --d are required for model simulation")
        config = GenConfig(n=args.n, m=args.m, p=args.p, d=args.d, seed=args.seed)
        data, truth = generate(config)
    names = data.feature_names or [f"f{i}" for i in range(data.p)]
    io.write_table(args.out_prefix + "_foreground.csv", data.X, names,
                   responses=data.r, response_col=args.response_col)
    io.write_table(args.out_prefix + "_background.csv", data.Y, names)
    if truth is not None:
        meta = {"seed": args.seed, "iterations": 0, "final_ll": None, "converged": True}
        doc = io.model_to_dict(truth, np.zeros(data.p), 0.0, 1.0, meta,
                               feature_names=names)
        io.save_model(args.out_prefix + "_truth.json", doc)
    return EXIT_OK


def cmd_gradcheck(args):
    rng_master = np.random.default_rng(args.seed)
    blocks = ("S", "W", "beta", "sigma2", "tau2")
    worst = {b: 0.0 for b in blocks}
    bad_seed = None
    for trial in range(args.trials):
        inst_seed = int(rng_master.integers(0, 2**32))
        rng = np.random.default_rng(inst_seed)
        n = 0 if trial % 5 == 4 else args.n      # exercise the vanishing-term case
        params = ModelParams(S=rng.standard_normal((args.p, args.d)),
                             W=rng.standard_normal((args.p, args.d)),
                             beta=rng.standard_normal(args.d),
                             sigma2=float(rng.uniform(0.3, 1.5)),
                             tau2=float(rng.uniform(0.3, 1.5)))
        data = Dataset(X=rng.standard_normal((n, args.p)),
                       r=rng.standard_normal(n),
                       Y=rng.standard_normal((args.m, args.p)))
        alpha = float(rng.choice([0.0, 0.5, 1.0, 2.0]))
        ana = grad_log_likelihood(params, data, alpha)
        num = finite_diff_gradient(params, data, alpha, step=args.step)
        for block, a, b in (("S", ana.dS, num.dS), ("W", ana.dW, num.dW),
                            ("beta", ana.dbeta, num.dbeta),
                            ("sigma2", ana.dsigma2, num.dsigma2),
                            ("tau2", ana.dtau2, num.dtau2)):
            a = np.atleast_1d(np.asarray(a, float))
            b = np.atleast_1d(np.asarray(b, float))
            # err <= rtol iff |a-b| <= rtol*|b| + 1e-8 (abs slack near zero)
            slack = 1e-8 / args.rtol if args.rtol > 0 else 1e-300
            rel = np.abs(a - b) / (np.abs(b) + slack)
            err = float(np.max(rel)) if rel.size else 0.0
            worst[block] = max(worst[block], err)
            if err > args.rtol and bad_seed is None:
                bad_seed = inst_seed
    for block in blocks:
        print(f"{block}: worst relative error {worst[block]:.3e}")
    if any(worst[b] > args.rtol for b in blocks):
        print(f"gradient mismatch (offending instance seed: {bad_seed})")
        return EXIT_GRADCHECK
    return EXIT_OK


def cmd_rank(args):
    params, center_x, center_r, alpha, names, meta = io.load_model(args.model)
    result = FitResult(params=params, center_x=center_x, center_r=center_r,
                       ll_trace=[meta.get("final_ll", np.nan) or np.nan],
                       converged=bool(meta.get("converged", False)),
                       iterations=int(meta.get("iterations", 0)),
                       best_restart=0, wall_time_seconds=0.0)
    ranking = rank_features(result, names,
                            canonical_rotation=not args.no_canonical_rotation)
    import csv
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "feature", "score"])
        for rank, idx in enumerate(ranking.order, start=1):   # idx is 1-based
            label = names[idx - 1] if names else str(idx)
            writer.writerow([rank, label, repr(float(ranking.scores[idx - 1]))])
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="contrareg",
                                     description="Contrastive linear regression toolkit")
    subs = parser.add_subparsers(dest="command", required=True)

    p_fit = subs.add_parser("fit", help="fit the model to foreground/background tables")
    p_fit.add_argument("--foreground", required=True)
    p_fit.add_argument("--background", required=True)
    p_fit.add_argument("--response-col", required=True)
    p_fit.add_argument("-d", type=int, required=True)
    p_fit.add_argument("--out", required=True)
    _add_fit_flags(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_pred = subs.add_parser("predict", help="predict responses with a saved model")
    p_pred.add_argument("--model", required=True)
    p_pred.add_argument("--input", required=True)
    p_pred.add_argument("--out", required=True)
    p_pred.set_defaults(func=cmd_predict)

    p_cv = subs.add_parser("cv", help="cross-validate the latent dimension")
    p_cv.add_argument("--foreground", required=True)
    p_cv.add_argument("--background", required=True)
    p_cv.add_argument("--response-col", required=True)
    p_cv.add_argument("--d-grid", required=True, help="comma-separated, e.g. 1,2,3")
    p_cv.add_argument("--k", type=int, default=10)
    p_cv.add_argument("--out-csv", default=None,
                      help="tidy per-cell CSV (d, fold, train_r2, test_r2)")
    _add_fit_flags(p_cv)
    p_cv.set_defaults(func=cmd_cv)

    p_sim = subs.add_parser("simulate", help="write a simulated dataset to CSV")
    p_sim.add_argument("--n", type=int, required=True)
    p_sim.add_argument("--m", type=int, required=True)
    p_sim.add_argument("--p", type=int, default=0)
    p_sim.add_argument("--d", type=int, default=0)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out-prefix", required=True)
    p_sim.add_argument("--response-col", default="response")
    p_sim.add_argument("--lines", action="store_true",
                       help="corrupted-lines image analog instead of the model")
    p_sim.add_argument("--image-side", type=int, default=28)
    p_sim.add_argument("--background-rank", type=int, default=4)
    p_sim.add_argument("--noise-sd", type=float, default=0.1)
    p_sim.add_argument("--line-column", type=int, default=-1)
    p_sim.set_defaults(func=cmd_simulate)

    p_gc = subs.add_parser("gradcheck", help="analytic vs finite-difference gradients")
    p_gc.add_argument("--p", type=int, default=6)
    p_gc.add_argument("--d", type=int, default=2)
    p_gc.add_argument("--n", type=int, default=5)
    p_gc.add_argument("--m", type=int, default=5)
    p_gc.add_argument("--trials", type=int, default=20)
    p_gc.add_argument("--seed", type=int, default=0)
    p_gc.add_argument("--step", type=float, default=1e-5)
    p_gc.add_argument("--rtol", type=float, default=1e-4)
    p_gc.set_defaults(func=cmd_gradcheck)

    p_rank = subs.add_parser("rank", help="feature ranking from a saved model")
    p_rank.add_argument("--model", required=True)
    p_rank.add_argument("--out", required=True)
    p_rank.add_argument("--no-canonical-rotation", action="store_true")
    p_rank.set_defaults(func=cmd_rank)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MalformedFile as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except (ShapeMismatch, TooFewSamples) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SHAPE
    except (DegenerateData, NonFiniteObjective, FactorizationError,
            RankDeficiencyError, ZeroBeta, ConstantTruth) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OPTIM


if __name__ == "__main__":
    sys.exit(main())
