"""Command-line interface.

Every command accepts ``--config FILE`` (JSON), ``--seed``, ``--out`` and
``--print-config``; flags override values from the file, unknown keys are
rejected. Exit codes: 0 success, 2 usage or configuration error, 3 data
error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import bernstein, diagnostics, io, manifold, mcmc, models, pipeline

log = logging.getLogger("maxreg")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(ValueError):
    pass


_COMMON = {"seed": 0, "out": "out"}

DEFAULTS: dict[str, dict[str, Any]] = {
    "simulate": {"scenario": None, "model": None, "n": 5000},
    "transform": {"x_prices": None, "y_prices": None},
    "fit": {
        "data": None, "radial_quantile": 0.95, "iterations": 10000, "burn_in": 4000,
        "prior_concentration": 0.1, "J": None, "target_accept": 0.44, "adapt_window": 50,
    },
    "manifold": {
        "fit": None, "model": None, "scenario": None, "q": "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9",
        "x_max": 20.0, "n_x": 100, "credible_level": 0.95, "thin": 200,
    },
    "predict": {"fit": None, "sidecar": None, "x": None, "q": "0.75,0.9,0.95", "credible_level": 0.95, "thin": 200},
    "residuals": {"fit": None, "data": None, "threshold": None, "thin": 200},
}

# types for flags whose default is None
_TYPES = {"scenario": int, "J": int, "threshold": float}

_HELP = {
    "scenario": "simulation preset: 1 Hüsler–Reiss(0.1), 2 Logistic(0.9), 3 Coles–Tawn(0.5, 100)",
    "model": "parametric model, e.g. logistic:0.5, hr:0.1, ct:0.5,100",
    "fit": "directory written by the fit command",
    "q": "comma-separated quantile levels",
    "x": "comma-separated covariate values on the original margin",
    "J": "Bernstein degree (default: number of exceedances)",
    "threshold": "radial threshold (default: the one used for fitting)",
    "sidecar": "sidecar JSON written by the transform command",
}


def derive_seed(seed: int, component: int) -> int:
    """Independent child seed for one component of a run."""
    return int(np.random.SeedSequence([int(seed), component]).generate_state(1)[0])


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maxreg", description="Regression of block maxima on block maxima.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    for name, keys in DEFAULTS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON file of options; flags take precedence")
        sp.add_argument("--print-config", action="store_true", help="echo the resolved configuration")
        for key, default in {**keys, **_COMMON}.items():
            typ = _TYPES.get(key, type(default) if default is not None else str)
            flag = "--" + key.replace("_", "-")
            sp.add_argument(flag, dest=key, type=typ, default=None, help=_HELP.get(key, f"default: {default}"))
    return p


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    allowed = {**DEFAULTS[command], **_COMMON}
    cfg = dict(allowed)
    if args.config:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as err:
            raise UsageError(f"cannot read config {args.config}: {err}") from err
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = sorted(set(loaded) - set(allowed))
        if unknown:
            raise UsageError(f"unknown config keys for {command}: {', '.join(unknown)}")
        for key, value in loaded.items():
            want = _TYPES.get(key, type(allowed[key]) if allowed[key] is not None else None)
            if value is not None and want is float and isinstance(value, int):
                value = float(value)
            if value is not None and want is not None and not isinstance(value, want):
                raise UsageError(f"config key {key!r} must be {want.__name__}")
            cfg[key] = value
    for key in allowed:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _floats(text: str, what: str) -> np.ndarray:
    try:
        vals = np.array([float(v) for v in str(text).split(",") if v.strip()])
    except ValueError as err:
        raise UsageError(f"cannot parse {what}: {text!r}") from err
    if vals.size == 0:
        raise UsageError(f"empty {what}")
    return vals


def _model(cfg) -> models.EvModel:
    if (cfg.get("scenario") is None) == (cfg.get("model") is None):
        raise UsageError("give exactly one of --scenario and --model")
    if cfg.get("scenario") is not None:
        if cfg["scenario"] not in models.SCENARIOS:
            raise UsageError(f"scenario must be one of {sorted(models.SCENARIOS)}")
        return models.SCENARIOS[cfg["scenario"]]
    try:
        return models.parse_model(cfg["model"])
    except ValueError as err:
        raise UsageError(str(err)) from err


def _require(cfg, *keys):
    for key in keys:
        if cfg.get(key) is None:
            raise UsageError(f"--{key.replace('_', '-')} is required")


def cmd_simulate(cfg) -> None:
    mdl = _model(cfg)
    if cfg["n"] < 1:
        raise UsageError("--n must be positive")
    data = models.sample(mdl, cfg["n"], derive_seed(cfg["seed"], 0))
    out = Path(cfg["out"])
    pipeline.write_pairs_csv(out / "pairs.csv", data[:, 0], data[:, 1])
    io.dump_json(out / "simulate.json", {"model": repr(mdl), "n": cfg["n"], "seed": cfg["seed"]})


def cmd_transform(cfg) -> None:
    _require(cfg, "x_prices", "y_prices")
    sx = pipeline.read_price_csv(cfg["x_prices"])
    sy = pipeline.read_price_csv(cfg["y_prices"])
    pairs = pipeline.frechet_pairs(sx, sy)
    out = Path(cfg["out"])
    pipeline.write_pairs_csv(out / "pairs.csv", pairs.x, pairs.y, pairs.block_ids)
    pipeline.write_sidecar(out / "pairs.json", pairs)


def _mcmc_config(cfg) -> mcmc.McmcConfig:
    try:
        return mcmc.McmcConfig(
            iterations=cfg["iterations"], burn_in=cfg["burn_in"], prior_concentration=cfg["prior_concentration"],
            J=cfg["J"], seed=derive_seed(cfg["seed"], 1), target_accept=cfg["target_accept"],
            adapt_window=cfg["adapt_window"],
        )
    except ValueError as err:
        raise UsageError(str(err)) from err


def cmd_fit(cfg) -> None:
    _require(cfg, "data")
    mc = _mcmc_config(cfg)
    if not (0.0 < cfg["radial_quantile"] < 1.0):
        raise UsageError("--radial-quantile must lie in (0, 1)")
    data = pipeline.read_pairs_csv(cfg["data"])
    sample = bernstein.decompose(data, cfg["radial_quantile"])
    chain = mcmc.run_chain(sample, mc)
    out = Path(cfg["out"])
    io.write_chain(out / "chain.jsonl", chain)
    io.write_density(out / "density.json", chain.posterior_mean_density())
    io.write_pseudo_angles(out / "pseudo_angles.csv", sample)
    ess = chain.ess()
    io.dump_json(out / "summary.json", {
        "J": chain.J, "d": chain.d, "k": sample.k, "threshold_u": float(sample.threshold_u),
        "radial_quantile": cfg["radial_quantile"], "iterations": mc.iterations, "burn_in": mc.burn_in,
        "seed": cfg["seed"], "chain_seed": mc.seed,
        "acceptance_rate": [float(io.fmt(a)) for a in chain.acceptance_rate_per_coordinate],
        "ess": [float(io.fmt(e)) for e in ess],
        "ess_min": float(io.fmt(ess.min())) if ess.size else None,
        "step_sizes": [float(io.fmt(s)) for s in chain.step_sizes],
        "warnings": chain.warnings,
    })


def load_fit(fit_dir) -> mcmc.McmcChain:
    """Rebuild a chain from the files written by ``fit``."""
    fit_dir = Path(fit_dir)
    try:
        with open(fit_dir / "summary.json") as fh:
            summary = json.load(fh)
        states, lps = io.read_chain_states(fit_dir / "chain.jsonl")
    except (OSError, json.JSONDecodeError, KeyError) as err:
        raise pipeline.DataError(f"cannot load fit from {fit_dir}: {err}") from err
    return mcmc.McmcChain(
        J=summary["J"], d=summary["d"], states=states.reshape(len(lps), -1), log_posterior_trace=lps,
        acceptance_rate_per_coordinate=np.asarray(summary["acceptance_rate"]), seed=summary["chain_seed"],
        step_sizes=np.asarray(summary["step_sizes"]), step_history=np.zeros((0, states.shape[-1])),
        burn_in=summary["burn_in"], warnings=list(summary["warnings"]), threshold_u=summary["threshold_u"],
    )


def _grid(cfg):
    q = _floats(cfg["q"], "q levels")
    if np.any((q <= 0) | (q >= 1)):
        raise UsageError("q levels must lie in (0, 1)")
    if cfg["x_max"] <= 0 or cfg["n_x"] < 2:
        raise UsageError("need --x-max > 0 and --n-x >= 2")
    return q, manifold.default_x_grid(cfg["n_x"], cfg["x_max"])


def cmd_manifold(cfg) -> None:
    q, xg = _grid(cfg)
    if cfg.get("fit") is not None:
        if cfg.get("model") is not None or cfg.get("scenario") is not None:
            raise UsageError("give either --fit or a parametric model, not both")
        chain = load_fit(cfg["fit"])
        if chain.d != 2:
            raise UsageError("manifold grids over x are available for one covariate only")
        man = mcmc.posterior_manifold(chain, q, xg, cfg["credible_level"], cfg["thin"])
    else:
        man = manifold.manifold_grid(_model(cfg), q, xg)
    io.write_manifold(cfg["out"], man)


def cmd_predict(cfg) -> None:
    _require(cfg, "fit", "sidecar", "x")
    chain = load_fit(cfg["fit"])
    if chain.d != 2:
        raise UsageError("prediction is available for one covariate only")
    try:
        with open(cfg["sidecar"]) as fh:
            side = json.load(fh)
        mx = pipeline.MarginTransform(side["margins"]["x"], side["labels"]["x"])
        my = pipeline.MarginTransform(side["margins"]["y"], side["labels"]["y"])
    except (OSError, KeyError, json.JSONDecodeError) as err:
        raise pipeline.DataError(f"cannot read sidecar {cfg['sidecar']}: {err}") from err
    q = _floats(cfg["q"], "q levels")
    x_raw = _floats(cfg["x"], "x values")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        x_fr = mx.to_frechet(x_raw)
        man = mcmc.posterior_manifold(chain, q, x_fr, cfg["credible_level"], cfg["thin"])
        y_mid, y_lo, y_hi = (my.from_frechet(a) for a in (man.values, man.lower, man.upper))
    for w in caught:
        log.warning("%s", w.message)
    lines = ["x,x_frechet,q,y_frechet,y_frechet_lower,y_frechet_upper,y,y_lower,y_upper"]
    for j, xv in enumerate(x_raw):
        for i, qv in enumerate(q):
            cells = [xv, x_fr[j], qv, man.values[i, j], man.lower[i, j], man.upper[i, j],
                     y_mid[i, j], y_lo[i, j], y_hi[i, j]]
            lines.append(",".join(io.fmt(c) for c in cells))
    io.atomic_write_text(Path(cfg["out"]) / "predictions.csv", "\n".join(lines) + "\n")


def cmd_residuals(cfg) -> None:
    _require(cfg, "fit", "data")
    chain = load_fit(cfg["fit"])
    data = pipeline.read_pairs_csv(cfg["data"])
    if data.shape[1] != chain.d:
        raise pipeline.DataError(f"data has {data.shape[1]} columns, fit expects {chain.d}")
    u = chain.threshold_u if cfg["threshold"] is None else cfg["threshold"]
    rep = diagnostics.quantile_residuals(chain, data, u, thin=cfg["thin"])
    out = Path(cfg["out"])
    io.atomic_write_text(out / "residuals.csv", diagnostics.residuals_csv(rep))
    ks = rep.ks_statistic()
    io.dump_json(out / "residuals_summary.json", {
        "n": rep.n, "threshold_u": float(io.fmt(u)), "n_clamped": rep.n_clamped,
        "ks_statistic": None if rep.n == 0 else float(io.fmt(ks)),
        "ks_pvalue": None if rep.n == 0 else float(io.fmt(rep.ks_pvalue())),
    })


COMMANDS = {
    "simulate": cmd_simulate, "transform": cmd_transform, "fit": cmd_fit,
    "manifold": cmd_manifold, "predict": cmd_predict, "residuals": cmd_residuals,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args.command, args)
        if args.print_config:
            print(json.dumps(cfg, indent=2, sort_keys=True))
        COMMANDS[args.command](cfg)
    except UsageError as err:
        print(f"maxreg {args.command}: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (pipeline.DataError, bernstein.InsufficientExceedances, OSError) as err:
        print(f"maxreg {args.command}: data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except (ArithmeticError, bernstein.InvalidWeights) as err:
        print(f"maxreg {args.command}: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as err:
        print(f"maxreg {args.command}: {err}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
