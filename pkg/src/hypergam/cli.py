"""Batch command-line interface.

Subcommands: ``select`` (model search/enumeration and report files), ``fit``
(posterior curve estimation for one model), ``optimize`` (continuous-dof
refinement of a model) and ``simulate`` (benchmark scenario data sets).

Every configuration key can live in a flat ``key = value`` text file passed
via ``--config`` and can be overridden by a command-line flag of the same
name. Exit codes: 2 configuration error, 3 data error, 4 numerical failure.
All emitted CSV files carry a header row and serialize floats with 17
significant digits, so identical configs and seeds reproduce outputs
byte-for-byte.
"""

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from ._backend import backend_name
from .dof import DofGrid
from .engine import Workspace
from .errors import ConfigError, DataError, HypergamError
from .postprocess import aggregate_meta, median_probability_pattern, optimize_dof
from .sampler import credible_bands, curves, sample_gaussian, sample_glm
from .simulate import Scenario, generate

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

_DEFAULTS = {
    "family": "gaussian",
    "prior": "hyper-g/n",
    "knots": "4",
    "grid": "",
    "iters": "100000",
    "p-move": "0.75",
    "seed": "1",
    "start": "null",
    "method": "auto",
    "enumerate-cap": "1000000",
    "samples": "10000",
    "thin": "2",
    "burnin": "1000",
    "iwls-steps": "2",
    "grid-points": "100",
    "level": "0.95",
    "gh-nodes": "20",
    "out": "hypergam-out",
    "threads": "",
    "model": "map",
    "scenario": "null",
    "n": "100",
    "sigma": "0.2",
    "p": "",
}

_KEYS = sorted(set(_DEFAULTS) | {"data", "response"})


def _f17(x) -> str:
    return format(float(x), ".17g")


def load_config_file(path: str) -> dict:
    cfg = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key '{key}'")
        cfg[key] = value
    return cfg


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = dict(_DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(load_config_file(args.config))
    for key in _KEYS:
        val = getattr(args, key.replace("-", "_"), None)
        if val is not None:
            cfg[key] = str(val)
    return cfg


def _add_common(sub):
    sub.add_argument("--config", help="flat key = value config file")
    for key in _KEYS:
        sub.add_argument(f"--{key}", dest=key.replace("-", "_"), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hypergam",
        description="Bayesian covariate and spline-transformation selection "
        "for (generalised) additive models",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    for name, doc in [
        ("select", "score the model space and emit ranked reports"),
        ("fit", "sample a model's posterior and emit plot-ready curve files"),
        ("optimize", "continuous degrees-of-freedom refinement of a model"),
        ("simulate", "generate a benchmark scenario data set"),
    ]:
        _add_common(subs.add_parser(name, help=doc))
    return parser


def _load_data(cfg):
    import pandas as pd

    if not cfg.get("data"):
        raise ConfigError("missing 'data' (path to a CSV file)")
    if not cfg.get("response"):
        raise ConfigError("missing 'response' (response column name)")
    try:
        df = pd.read_csv(cfg["data"])
    except OSError as exc:
        raise DataError(f"cannot read {cfg['data']}: {exc}") from exc
    if cfg["response"] not in df.columns:
        raise ConfigError(f"response column '{cfg['response']}' not in data")
    ycol = cfg["response"]
    covs = [c for c in df.columns if c != ycol]
    if not covs:
        raise DataError("no covariate columns")
    for c in covs + [ycol]:
        if not np.issubdtype(df[c].dtype, np.number):
            raise DataError(f"column '{c}' is not numeric (categorical covariates are rejected)")
    if df[covs + [ycol]].isna().any().any():
        raise DataError("missing values are not supported")
    return df[covs].to_numpy(float), df[ycol].to_numpy(float), covs


def _workspace(cfg):
    x, y, names = _load_data(cfg)
    grid = None
    if cfg["grid"]:
        try:
            grid = DofGrid(np.array([float(v) for v in cfg["grid"].split(",")]))
        except ValueError as exc:
            raise ConfigError(f"bad grid: {exc}") from exc
    return Workspace(
        x,
        y,
        family=cfg["family"],
        prior=cfg["prior"],
        n_inner_knots=int(cfg["knots"]),
        grid=grid,
        names=names,
        gh_nodes=int(cfg["gh-nodes"]),
    )


def _threads(cfg):
    if cfg["threads"]:
        return int(cfg["threads"])
    return int(os.environ.get("HYPERGAM_THREADS", "1"))


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _run_selection(ws, cfg):
    """Score models by enumeration or search; returns (scores, diagnostics)."""
    space = len(ws.grid.values) ** ws.p
    method = cfg["method"]
    if method == "auto":
        method = "enumerate" if space <= 20_000 else "search"
    diag = {"method": method, "model_space_size": space}
    t0 = time.perf_counter()
    if method == "enumerate":
        scores = ws.score_all(cap=int(cfg["enumerate-cap"]), threads=_threads(cfg))
        iters = None
    elif method == "search":
        state = ws.search(
            iters=int(cfg["iters"]),
            seed=int(cfg["seed"]),
            start=cfg["start"] if cfg["start"] in ("null", "full") else
            tuple(float(v) for v in cfg["start"].split(",")),
            p_move=float(cfg["p-move"]),
        )
        scores = ws.scores_from_search(state)
        iters = state.iterations
        diag["search_acceptance_rate"] = state.acceptance_rate
        diag["visited_models"] = len(state.visit_counts)
        for s in scores:
            s.visit_count = state.visit_counts.get(s.model, 0)
    else:
        raise ConfigError(f"unknown method '{method}'")
    diag["wall_time_s"] = time.perf_counter() - t0
    diag["models_scored"] = len(scores)
    diag["failed_models"] = ws.n_failed_models
    diag["iterations"] = iters
    diag["backend"] = backend_name()
    return scores, diag


def cmd_select(cfg) -> int:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    ws = _workspace(cfg)
    scores, diag = _run_selection(ws, cfg)
    iters = diag.get("iterations")

    ranked = sorted(scores, key=lambda s: s.post_prob, reverse=True)
    header = (
        ["rank"]
        + [f"d_{name}" for name in ws.names]
        + ["log_marglik", "log_prior", "post_prob", "freq_prob", "visits"]
    )
    rows = []
    for rank, s in enumerate(ranked, 1):
        freq = s.visit_count / iters if iters else ""
        rows.append(
            [rank]
            + [_f17(d) for d in s.model]
            + [
                _f17(s.log_marglik),
                _f17(s.log_prior),
                _f17(s.post_prob),
                _f17(freq) if freq != "" else "",
                s.visit_count,
            ]
        )
    _write_csv(out / "models.csv", header, rows)

    table = ws.inclusion_table(scores)
    _write_csv(
        out / "inclusion.csv",
        ["covariate", "p_none", "p_linear", "p_smooth"],
        [
            [name, _f17(r[0]), _f17(r[1]), _f17(r[2])]
            for name, r in zip(ws.names, table)
        ],
    )

    metas = aggregate_meta(scores)
    _write_csv(
        out / "meta_models.csv",
        ["pattern", "included", "post_prob", "n_members"],
        [
            [
                "".join("1" if f else "0" for f in m.pattern),
                "+".join(ws.names[j] for j in m.included) or "(null)",
                _f17(m.post_prob),
                len(m.member_weights),
            ]
            for m in metas
        ],
    )

    mpp = median_probability_pattern(table)
    run = {
        "config": cfg,
        "diagnostics": diag,
        "map_model": list(ranked[0].model),
        "map_log_marglik": ranked[0].log_marglik,
        "median_probability_pattern": ["included" if f else "excluded" for f in mpp],
        "cache_size": len(ws._memo),
    }
    (out / "run.json").write_text(json.dumps(run, indent=2, sort_keys=True) + "\n")
    print(f"select: wrote {out}/models.csv, inclusion.csv, meta_models.csv, run.json")
    return 0


def _resolve_model(ws, cfg):
    if cfg["model"] == "map":
        scores, diag = _run_selection(ws, cfg)
        ranked = max(scores, key=lambda s: s.post_prob)
        return ranked.model, diag
    model = tuple(float(v) for v in cfg["model"].split(","))
    if len(model) != ws.p:
        raise ConfigError(f"model must have {ws.p} entries")
    return model, {"method": "explicit-model"}


def cmd_fit(cfg) -> int:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    ws = _workspace(cfg)
    model, diag = _resolve_model(ws, cfg)
    size = int(cfg["samples"])
    seed = int(cfg["seed"])
    if ws.family is None:
        draws = sample_gaussian(ws, model, size, seed)
    else:
        draws = sample_glm(
            ws,
            model,
            size,
            seed,
            thin=int(cfg["thin"]),
            burnin=int(cfg["burnin"]),
            iwls_steps=int(cfg["iwls-steps"]),
        )
    grids = ws.prediction_grids(int(cfg["grid-points"]))
    level = float(cfg["level"])
    curve_map = curves(draws, grids, names=ws.names)
    written = []
    for j, cs in curve_map.items():
        if model[j] == 0:
            continue
        bands = credible_bands(cs.values, level)
        path = out / f"curves_{ws.names[j]}.csv"
        _write_csv(
            path,
            ["grid", "mean", "ptwise_lo", "ptwise_hi", "simul_lo", "simul_hi"],
            [
                [
                    _f17(gv),
                    _f17(m),
                    _f17(pl),
                    _f17(ph),
                    _f17(sl),
                    _f17(sh),
                ]
                for gv, m, pl, ph, sl, sh in zip(
                    cs.grid,
                    bands.mean,
                    bands.pointwise_lo,
                    bands.pointwise_hi,
                    bands.simultaneous_lo,
                    bands.simultaneous_hi,
                )
            ],
        )
        written.append(path.name)
    run = {
        "config": cfg,
        "model": list(model),
        "selection": diag,
        "acceptance_rate": draws.acceptance_rate,
        "proposal_failures": draws.n_proposal_failures,
        "files": written,
    }
    (out / "run.json").write_text(json.dumps(run, indent=2, sort_keys=True) + "\n")
    print(f"fit: wrote {len(written)} curve files to {out}")
    return 0


def cmd_optimize(cfg) -> int:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    ws = _workspace(cfg)
    model, diag = _resolve_model(ws, cfg)
    start_lml = ws.log_marglik(model)
    d_opt, lml_opt = optimize_dof(ws, model)
    run = {
        "config": cfg,
        "selection": diag,
        "model": list(model),
        "log_marglik": start_lml,
        "optimized_dof": [float(v) for v in d_opt],
        "optimized_log_marglik": lml_opt,
    }
    (out / "optimized.json").write_text(json.dumps(run, indent=2, sort_keys=True) + "\n")
    _write_csv(
        out / "optimized_dof.csv",
        ["covariate", "dof_start", "dof_optimized"],
        [
            [name, _f17(d0), _f17(d1)]
            for name, d0, d1 in zip(ws.names, model, d_opt)
        ],
    )
    print(
        f"optimize: log marginal likelihood {start_lml:.4f} -> {lml_opt:.4f}; "
        f"wrote {out}/optimized.json"
    )
    return 0


def cmd_simulate(cfg) -> int:
    try:
        sc = Scenario(
            kind=cfg["scenario"],
            n=int(cfg["n"]),
            seed=int(cfg["seed"]),
            sigma=float(cfg["sigma"]),
            p=int(cfg["p"]) if cfg["p"] else None,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    X, y, truth = generate(sc)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"sim_{sc.kind}_n{sc.n}_seed{sc.seed}.csv"
    header = [f"x{j+1}" for j in range(X.shape[1])] + ["y"]
    rows = [
        [_f17(v) for v in row] + [_f17(yy)]
        for row, yy in zip(X, y)
    ]
    _write_csv(path, header, rows)
    (out / path.name.replace(".csv", "_truth.json")).write_text(
        json.dumps(
            {
                "effective": [j + 1 for j in truth.effective],
                "kinds": {str(j + 1): k for j, k in truth.kinds.items()},
                "correlated_nuisance": [j + 1 for j in truth.correlated_nuisance],
                "surrogate": truth.surrogate + 1 if truth.surrogate is not None else None,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    print(f"simulate: wrote {path}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "select":
            return cmd_select(cfg)
        if args.command == "fit":
            return cmd_fit(cfg)
        if args.command == "optimize":
            return cmd_optimize(cfg)
        return cmd_simulate(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except HypergamError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
