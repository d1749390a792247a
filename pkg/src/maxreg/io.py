"""File formats: atomic writes, manifold tables, densities and chains."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .bernstein import BernsteinAngularDensity, PseudoAngleSample
from .manifold import RegressionManifold

__all__ = [
    "DIGITS",
    "fmt",
    "atomic_write_text",
    "dump_json",
    "manifold_csv",
    "manifold_json",
    "write_manifold",
    "read_manifold_json",
    "write_density",
    "read_density",
    "write_chain",
    "read_chain_states",
    "write_pseudo_angles",
]

DIGITS = 12


def fmt(v: float) -> str:
    return f"{float(v):.{DIGITS}g}"


def atomic_write_text(path, text: str):
    """Write ``text`` to a temporary file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _x_columns(x_grid: np.ndarray) -> tuple[list[str], list[list[str]]]:
    if x_grid.ndim == 1:
        return ["x"], [[fmt(v)] for v in x_grid]
    names = [f"x{i + 1}" for i in range(x_grid.shape[1])]
    return names, [[fmt(v) for v in row] for row in x_grid]


def manifold_csv(man: RegressionManifold) -> str:
    """Long format, one row per ``(q, x)`` cell: ``q,x,y[,lo,hi]``."""
    names, xs = _x_columns(man.x_grid)
    bands = man.lower is not None and man.upper is not None
    header = ["q", *names, "y"] + (["lo", "hi"] if bands else [])
    lines = [",".join(header)]
    for i, q in enumerate(man.q_levels):
        for j, xcells in enumerate(xs):
            row = [fmt(q), *xcells, fmt(man.values[i, j])]
            if bands:
                row += [fmt(man.lower[i, j]), fmt(man.upper[i, j])]
            lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _rounded(a) -> list:
    return np.vectorize(lambda v: float(fmt(v)), otypes=[float])(np.asarray(a, dtype=float)).tolist()


def manifold_json(man: RegressionManifold) -> dict:
    out = {
        "q_levels": _rounded(man.q_levels),
        "x_grid": _rounded(man.x_grid),
        "values": _rounded(man.values),
        "meta": man.meta,
    }
    if man.lower is not None:
        out.update(lower=_rounded(man.lower), upper=_rounded(man.upper), credible_level=man.credible_level)
    return out


def write_manifold(out_dir, man: RegressionManifold, stem: str = "manifold"):
    out_dir = Path(out_dir)
    atomic_write_text(out_dir / f"{stem}.csv", manifold_csv(man))
    dump_json(out_dir / f"{stem}.json", manifold_json(man))


def write_density(path, h: BernsteinAngularDensity):
    dump_json(path, h.to_dict())


def read_density(path) -> BernsteinAngularDensity:
    with open(path) as fh:
        return BernsteinAngularDensity.from_dict(json.load(fh))


def write_chain(path, chain) -> None:
    """JSON lines ``{"iter", "logits", "log_post"}``, one per kept state."""
    lines = []
    for n, (state, lp) in enumerate(zip(chain.states, chain.log_posterior_trace)):
        rec = {"iter": chain.burn_in + n, "logits": [float(v) for v in state], "log_post": float(lp)}
        lines.append(json.dumps(rec, sort_keys=True))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_chain_states(path) -> tuple[np.ndarray, np.ndarray]:
    states, lps = [], []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                states.append(rec["logits"])
                lps.append(rec["log_post"])
    return np.array(states, dtype=float), np.array(lps, dtype=float)


def write_pseudo_angles(path, sample: PseudoAngleSample):
    lines = [
        f"# threshold_u={fmt(sample.threshold_u)} radial_quantile={fmt(sample.radial_quantile)} k={sample.k}",
        ",".join(["r"] + [f"w_{i + 1}" for i in range(sample.d)]),
    ]
    for w, r in zip(sample.angles, sample.radii):
        lines.append(",".join([fmt(r), *map(fmt, w)]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_manifold_json(path) -> RegressionManifold:
    with open(path) as fh:
        d = json.load(fh)
    return RegressionManifold(d["q_levels"], d["x_grid"], d["values"], d.get("lower"), d.get("upper"),
                              d.get("credible_level"), d.get("meta", {}))
