"""Batch command-line surface: estimation, bounds, frontiers, bands.

Every command is deterministic given its inputs and seed: floats are written
with shortest round-trip formatting, JSON keys are sorted, and files are
written atomically (temp file then rename).  The fully resolved configuration
is echoed into the output directory alongside the results.  A JSON config
file may supply any flag value; explicit flags override the file.

Exit codes: 0 success, 2 validation or infeasibility, 3 I/O or file format,
4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import breakdown as bd
from . import estimation as est
from . import inference as inf
from . import oracle as orc
from .core_bounds import (
    identified_set_from_effect_shares,
    identified_set_from_increments,
    identified_set_from_pretrend_shares,
)
from .types import (
    AnticipationIncrementBounds,
    Conclusion,
    DidSensError,
    FLAG_FINITE,
    FLAG_UNBOUNDED,
    FrontierGrid,
    InternalInvariantError,
    PanelFormatError,
    PretrendShareBounds,
    ReducedForm,
    RelativeMagnitude,
    TreatmentShareBounds,
)

ANTICIPATION_CHOICES = ("increments", "pretrend", "effect")


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def _atomic_write(path: Path, data: str | bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: Path, obj) -> None:
    _atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _echo_config(out: Path, command: str, resolved: dict) -> None:
    payload = {"command": command}
    payload.update(resolved)
    _write_json(out / "config.json", payload)


def _fmt(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# Input helpers
# ---------------------------------------------------------------------------

def _load_gamma(path: str) -> ReducedForm:
    return ReducedForm.from_json(Path(path).read_text(encoding="utf-8"))


def _load_draws(path: str) -> est.PosteriorDraws:
    return est.read_draws_csv(Path(path).read_text(encoding="utf-8"))


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise ValueError(f"expected comma-separated numbers, got {text!r}") from None


def _anticipation_bounds(cfg: dict, n_pre: int):
    """Anticipation restriction from resolved flags, for a given pre-trend count."""
    kind = cfg["anticipation"]
    if kind == "increments":
        if cfg.get("lower") is None or cfg.get("upper") is None:
            raise ValueError("increments calibration needs --lower and --upper")
        return AnticipationIncrementBounds(_float_list(cfg["lower"]), _float_list(cfg["upper"]))
    if kind == "pretrend":
        return PretrendShareBounds(cfg["share_lo"], cfg["share_hi"])
    if kind == "effect":
        if cfg.get("lower") is not None and cfg.get("upper") is not None:
            return TreatmentShareBounds(_float_list(cfg["lower"]), _float_list(cfg["upper"]))
        return TreatmentShareBounds.constant(cfg["share_lo"], cfg["share_hi"], n_pre)
    raise ValueError(f"unknown anticipation calibration {kind!r}")


def _identified_set(gamma: ReducedForm, cfg: dict):
    bounds = _anticipation_bounds(cfg, gamma.n_pre)
    magnitude = RelativeMagnitude(cfg["magnitude"])
    kind = cfg["anticipation"]
    if kind == "increments":
        return identified_set_from_increments(gamma, bounds, magnitude)
    if kind == "pretrend":
        return identified_set_from_pretrend_shares(gamma, bounds, magnitude)
    return identified_set_from_effect_shares(gamma, bounds, magnitude)


def _grid_points(cfg: dict) -> list[tuple[float, float]]:
    vary = cfg["grid_vary"]
    start, stop, count = cfg["grid_start"], cfg["grid_stop"], int(cfg["grid_count"])
    if count < 1:
        raise ValueError("grid needs at least one point")
    if count == 1:
        values = [float(start)]
    else:
        step = (stop - start) / (count - 1)
        values = [start + k * step for k in range(count)]
    fixed = cfg.get("grid_fixed")
    if vary == "point":
        return [(v, v) for v in values]
    if fixed is None:
        raise ValueError("--grid-fixed is required unless --grid-vary=point")
    if vary == "lo":
        return [(v, float(fixed)) for v in values]
    if vary == "hi":
        return [(float(fixed), v) for v in values]
    raise ValueError(f"unknown grid axis {vary!r}")


def _conclusion(cfg: dict) -> Conclusion:
    kind = cfg["conclusion"]
    if kind == "sign":
        return Conclusion.negative_effect()
    if kind == "above":
        if cfg.get("tau") is None:
            raise ValueError("--tau is required for the above-threshold conclusion")
        return Conclusion.above(cfg["tau"])
    raise ValueError(f"unknown conclusion {kind!r}")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _cmd_estimate(cfg: dict) -> int:
    out = Path(cfg["out"])
    data = est.PanelDataset.from_csv(cfg["panel"])
    n_pre = cfg.get("n_pre_trends")
    gamma = est.compute_reduced_form(data, n_pre_trends=n_pre)
    if cfg["method"] == "bayes":
        draws = est.bayesian_bootstrap(data, int(cfg["n_draws"]), int(cfg["seed"]), n_pre)
    else:
        draws = est.cluster_bootstrap(data, int(cfg["n_draws"]), int(cfg["seed"]), n_pre)
    summary = est.posterior_summary(draws, cfg["alpha"])

    lines = ["coordinate,median,lower,upper"]
    for name, med, lo, hi in zip(summary.names, summary.median, summary.lower, summary.upper):
        lines.append(f"{name},{_fmt(med)},{_fmt(lo)},{_fmt(hi)}")
    _atomic_write(out / "summary.csv", "\n".join(lines) + "\n")
    _atomic_write(out / "gamma.json", gamma.to_json() + "\n")
    if cfg["draws_format"] == "binary":
        tmp_target = out / "draws.bin"
        tmp_target.parent.mkdir(parents=True, exist_ok=True)
        est.write_draws_binary(draws, tmp_target)
    else:
        _atomic_write(out / "draws.csv", est.write_draws_csv(draws))
    _echo_config(out, "estimate", cfg)
    return 0


def _interval_csv(itv) -> str:
    return "lb,ub\n" + f"{_fmt(itv.lb)},{_fmt(itv.ub)}\n"


def _witness_json(wit):
    if wit is None:
        return None
    return {"r": wit.r, "corner": {k: v for k, v in wit.corner.items()}}


def _cmd_bounds(cfg: dict) -> int:
    out = Path(cfg["out"])
    if cfg.get("gamma") is not None:
        gamma = _load_gamma(cfg["gamma"])
        itv = _identified_set(gamma, cfg)
        _atomic_write(out / "bounds.csv", _interval_csv(itv))
        _write_json(
            out / "bounds.json",
            {
                "lb": itv.lb,
                "ub": itv.ub,
                "lb_witness": _witness_json(itv.lb_witness),
                "ub_witness": _witness_json(itv.ub_witness),
            },
        )
    elif cfg.get("draws") is not None:
        draws = _load_draws(cfg["draws"])
        rows = ["lb,ub"]
        lbs = []
        ubs = []
        for b in range(draws.n_draws):
            itv = _identified_set(draws.reduced_form(b), cfg)
            lbs.append(itv.lb)
            ubs.append(itv.ub)
            rows.append(f"{_fmt(itv.lb)},{_fmt(itv.ub)}")
        _atomic_write(out / "interval_draws.csv", "\n".join(rows) + "\n")
        _write_json(
            out / "bounds.json",
            {"lb_median": float(np.median(lbs)), "ub_median": float(np.median(ubs))},
        )
    else:
        raise ValueError("bounds needs --gamma or --draws")
    _echo_config(out, "bounds", cfg)
    return 0


def _frontier_value_grid(gamma: ReducedForm, points, conclusion, parameterization):
    return bd.frontier_grid(gamma, points, conclusion, parameterization)


def _cmd_frontier(cfg: dict) -> int:
    out = Path(cfg["out"])
    points = _grid_points(cfg)
    conclusion = _conclusion(cfg)
    parameterization = (
        bd.PARAM_PRETREND if cfg["anticipation"] == "pretrend" else bd.PARAM_EFFECT
    )
    if cfg["anticipation"] == "increments":
        raise ValueError(
            "frontiers are traced over share calibrations; the increment box "
            "has one dimension per pre-period"
        )

    if cfg.get("gamma") is not None:
        grid = _frontier_value_grid(_load_gamma(cfg["gamma"]), points, conclusion, parameterization)
    elif cfg.get("draws") is not None:
        draws = _load_draws(cfg["draws"])
        matrix = np.empty((draws.n_draws, len(points)))
        for b in range(draws.n_draws):
            g = _frontier_value_grid(draws.reduced_form(b), points, conclusion, parameterization)
            for j, flag in enumerate(g.flags):
                if flag == "error":
                    raise ValueError(f"grid point {points[j]} invalid: {g.messages[j]}")
            matrix[b] = g.values
        header = ",".join(f"pt{j}" for j in range(len(points)))
        rows = [header]
        for b in range(draws.n_draws):
            rows.append(",".join(_fmt(v) for v in matrix[b]))
        _atomic_write(out / "frontier_draws.csv", "\n".join(rows) + "\n")
        _write_json(out / "frontier_grid.json", {"axis": [list(p) for p in points]})
        med = np.median(matrix, axis=0)
        values = tuple(float(v) for v in med)
        flags = tuple(
            FLAG_FINITE if math.isfinite(v) else FLAG_UNBOUNDED for v in values
        )
        grid = FrontierGrid(tuple(points), values, flags)
    else:
        raise ValueError("frontier needs --gamma or --draws")

    _atomic_write(out / "frontier.csv", grid.to_csv())
    _atomic_write(out / "frontier.json", grid.to_json() + "\n")
    if cfg.get("plot"):
        _plot_frontier(out / "frontier.svg", grid, cfg["m_cap"])
    _echo_config(out, "frontier", cfg)
    return 0


def _read_matrix_csv(path: str) -> np.ndarray:
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    rows = [[float(x) for x in line.split(",")] for line in lines[1:]]
    return np.array(rows)


def _cmd_band(cfg: dict) -> int:
    out = Path(cfg["out"])
    matrix = _read_matrix_csv(cfg["frontier_draws"])
    grid_labels = None
    grid_path = cfg.get("grid")
    if grid_path is None:
        candidate = Path(cfg["frontier_draws"]).parent / "frontier_grid.json"
        grid_path = str(candidate) if candidate.exists() else None
    if grid_path is not None:
        axis = json.loads(Path(grid_path).read_text(encoding="utf-8"))["axis"]
        grid_labels = tuple((float(a), float(b)) for a, b in axis)
    band = inf.simultaneous_lower_band(matrix, cfg["alpha"], grid=grid_labels)

    lines = ["param_lo,param_hi,center,band,flag"]
    for j in range(len(band.center)):
        if grid_labels is not None:
            lo, hi = grid_labels[j]
            label = f"{_fmt(lo)},{_fmt(hi)}"
        else:
            label = f"{j},{j}"
        c = band.center[j]
        b = band.band[j]
        c_txt = "" if not math.isfinite(c) else _fmt(c)
        b_txt = "" if (isinstance(b, float) and math.isnan(b)) else _fmt(b)
        lines.append(f"{label},{c_txt},{b_txt},{band.flags[j]}")
    _atomic_write(out / "band.csv", "\n".join(lines) + "\n")
    _write_json(
        out / "band.json",
        {
            "alpha": band.alpha,
            "critical": band.critical,
            "center": [_json_value(v) for v in band.center],
            "band": [_json_value(v) for v in band.band],
            "flags": list(band.flags),
            "n_hard_violations": band.n_hard_violations,
        },
    )
    if cfg.get("plot"):
        _plot_band(out / "band.svg", band)
    _echo_config(out, "band", cfg)
    return 0


def _json_value(v: float):
    if isinstance(v, float) and math.isnan(v):
        return None
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return float(v)


def _cmd_credset(cfg: dict) -> int:
    out = Path(cfg["out"])
    matrix = _read_matrix_csv(cfg["interval_draws"])
    if matrix.ndim != 2 or matrix.shape[1] != 2:
        raise ValueError("interval draws file must have two columns: lb,ub")
    cred = inf.pointwise_credible_set(matrix[:, 0], matrix[:, 1], cfg["alpha"])
    _atomic_write(
        out / "credset.csv",
        "center_lb,center_ub,enlargement,lb,ub\n"
        + ",".join(
            _fmt(v)
            for v in (cred.center_lb, cred.center_ub, cred.enlargement, cred.lb, cred.ub)
        )
        + "\n",
    )
    _write_json(
        out / "credset.json",
        {
            "alpha": cred.alpha,
            "center_lb": cred.center_lb,
            "center_ub": cred.center_ub,
            "enlargement": cred.enlargement,
            "lb": cred.lb,
            "ub": cred.ub,
        },
    )
    _echo_config(out, "credset", cfg)
    return 0


def _cmd_oracle(cfg: dict) -> int:
    out = Path(cfg["out"])
    gamma = _load_gamma(cfg["gamma"])
    magnitude = RelativeMagnitude(cfg["magnitude"])
    bounds = _anticipation_bounds(cfg, gamma.n_pre)
    kind = cfg["anticipation"]
    density = int(cfg["density"])

    if kind == "increments":
        closed = identified_set_from_increments(gamma, bounds, magnitude)
        lattice = orc.lattice_extremes_increments(gamma, bounds, magnitude, density)
        param = orc.PARAM_INCREMENTS
    elif kind == "pretrend":
        closed = identified_set_from_pretrend_shares(gamma, bounds, magnitude)
        lattice = orc.lattice_extremes_pretrend_shares(gamma, bounds, magnitude, density)
        param = orc.PARAM_PRETREND_SHARES
    else:
        closed = identified_set_from_effect_shares(gamma, bounds, magnitude)
        lattice = orc.lattice_extremes_effect_shares(gamma, bounds, magnitude, density)
        param = orc.PARAM_EFFECT_SHARES

    scale = max(1.0, abs(closed.lb), abs(closed.ub))
    agree = (
        abs(closed.lb - lattice.lb) <= 1e-12 * scale
        and abs(closed.ub - lattice.ub) <= 1e-12 * scale
    )

    n_targets = int(cfg["sharpness_targets"])
    sharp_ok = 0
    failures = []
    for k in range(n_targets):
        t = closed.lb + (closed.ub - closed.lb) * (k / max(1, n_targets - 1))
        dgp = orc.construct_attaining_dgp(gamma, t, param, bounds, magnitude)
        ok, reasons = orc.verify_dgp(dgp, gamma, bounds, magnitude)
        if ok:
            sharp_ok += 1
        else:
            failures.append({"target": t, "reasons": reasons})

    report = {
        "closed_form": {"lb": closed.lb, "ub": closed.ub},
        "lattice": {"lb": lattice.lb, "ub": lattice.ub},
        "lattice_density": density,
        "agreement": agree,
        "sharpness_targets": n_targets,
        "sharpness_passed": sharp_ok,
        "sharpness_failures": failures,
    }
    _write_json(out / "oracle_report.json", report)
    lines = ["check,status,detail"]
    lines.append(
        "lattice_agreement,"
        + ("pass" if agree else "fail")
        + f",closed=[{_fmt(closed.lb)};{_fmt(closed.ub)}] lattice=[{_fmt(lattice.lb)};{_fmt(lattice.ub)}]"
    )
    lines.append(
        "sharpness_round_trip,"
        + ("pass" if sharp_ok == n_targets else "fail")
        + f",{sharp_ok}/{n_targets} targets attained"
    )
    _atomic_write(out / "oracle.csv", "\n".join(lines) + "\n")
    _echo_config(out, "oracle", cfg)
    if not agree or sharp_ok != n_targets:
        raise InternalInvariantError(
            "oracle disagreement; see oracle_report.json for details"
        )
    return 0


# ---------------------------------------------------------------------------
# Plots (optional, SVG, deterministic)
# ---------------------------------------------------------------------------

def _plt():
    try:
        import matplotlib
    except ImportError as exc:
        raise ValueError(
            "plot output requires matplotlib (install the 'plot' extra)"
        ) from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "did-sens"
    return plt


def _grid_x(axis):
    los = [p[0] for p in axis]
    his = [p[1] for p in axis]
    if all(h == his[0] for h in his):
        return los, "lower share bound"
    if all(lo == los[0] for lo in los):
        return his, "upper share bound"
    return list(range(len(axis))), "grid point"


def _plot_frontier(path: Path, grid: FrontierGrid, m_cap: float) -> None:
    plt = _plt()
    x, xlabel = _grid_x(grid.axis)
    y = grid.capped_values(m_cap)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(x, y, marker="o", color="steelblue", label="breakdown value")
    for xv, v, f in zip(x, grid.values, grid.flags):
        if f == FLAG_UNBOUNDED:
            ax.annotate("inf", (xv, m_cap), textcoords="offset points", xytext=(0, 4))
    ax.set_xlabel(xlabel)
    ax.set_ylabel("relative magnitude at breakdown")
    ax.legend(loc="best")
    fig.tight_layout()
    _save_svg(fig, path)


def _plot_band(path: Path, band: inf.LowerBand) -> None:
    plt = _plt()
    axis = band.grid
    if axis and isinstance(axis[0], tuple):
        x, xlabel = _grid_x(axis)
    else:
        x, xlabel = list(range(len(band.center))), "grid point"
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(x, band.center, marker="o", color="steelblue", label="frontier (median)")
    ax.plot(x, band.band, linestyle="--", color="darkorange", label="lower band")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("relative magnitude")
    ax.legend(loc="best")
    fig.tight_layout()
    _save_svg(fig, path)


def _save_svg(fig, path: Path) -> None:
    import io as _io

    buf = _io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    _atomic_write(path, buf.getvalue())


# ---------------------------------------------------------------------------
# Argument parsing and config merge
# ---------------------------------------------------------------------------

_DEFAULTS = {
    "estimate": {
        "n_draws": 1000, "seed": 0, "alpha": 0.10, "method": "bayes",
        "draws_format": "csv", "n_pre_trends": None,
    },
    "bounds": {
        "anticipation": "pretrend", "share_lo": 0.0, "share_hi": 0.0,
        "magnitude": 1.0, "lower": None, "upper": None,
        "gamma": None, "draws": None,
    },
    "frontier": {
        "anticipation": "pretrend", "conclusion": "sign", "tau": None,
        "grid_vary": "lo", "grid_fixed": None, "grid_start": 0.0,
        "grid_stop": 1.0, "grid_count": 11, "m_cap": 100.0, "plot": False,
        "gamma": None, "draws": None,
    },
    "band": {"alpha": 0.10, "grid": None, "plot": False},
    "credset": {"alpha": 0.10},
    "oracle": {
        "anticipation": "pretrend", "share_lo": 0.0, "share_hi": 0.0,
        "magnitude": 1.0, "lower": None, "upper": None,
        "density": orc.DEFAULT_GRID_DENSITY, "sharpness_targets": 5,
    },
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="did-sens",
        description="DiD sensitivity analysis under joint relaxations of "
        "parallel trends and no anticipation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--out", help="output directory", default=None)

    p = sub.add_parser("estimate", help="reduced form and bootstrap draws from a panel CSV")
    add_common(p)
    p.add_argument("--panel", help="panel CSV (unit_id,cluster_id,time,y,treated)")
    p.add_argument("--n-draws", type=int, dest="n_draws")
    p.add_argument("--seed", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--n-pre-trends", type=int, dest="n_pre_trends")
    p.add_argument("--method", choices=("bayes", "frequentist"))
    p.add_argument("--draws-format", choices=("csv", "binary"), dest="draws_format")

    p = sub.add_parser("bounds", help="identified set for the treatment effect")
    add_common(p)
    p.add_argument("--gamma", help="reduced-form JSON file")
    p.add_argument("--draws", help="draws CSV (per-draw intervals)")
    p.add_argument("--anticipation", choices=ANTICIPATION_CHOICES)
    p.add_argument("--share-lo", type=float, dest="share_lo")
    p.add_argument("--share-hi", type=float, dest="share_hi")
    p.add_argument("--lower", help="comma-separated per-period lower bounds")
    p.add_argument("--upper", help="comma-separated per-period upper bounds")
    p.add_argument("--magnitude", type=float)

    p = sub.add_parser("frontier", help="breakdown frontier over a share-bound grid")
    add_common(p)
    p.add_argument("--gamma")
    p.add_argument("--draws")
    p.add_argument("--anticipation", choices=("pretrend", "effect"))
    p.add_argument("--conclusion", choices=("sign", "above"))
    p.add_argument("--tau", type=float)
    p.add_argument("--grid-vary", choices=("lo", "hi", "point"), dest="grid_vary")
    p.add_argument("--grid-fixed", type=float, dest="grid_fixed")
    p.add_argument("--grid-start", type=float, dest="grid_start")
    p.add_argument("--grid-stop", type=float, dest="grid_stop")
    p.add_argument("--grid-count", type=int, dest="grid_count")
    p.add_argument("--m-cap", type=float, dest="m_cap")
    p.add_argument("--plot", action="store_const", const=True)

    p = sub.add_parser("band", help="simultaneous lower credible band from frontier draws")
    add_common(p)
    p.add_argument("--frontier-draws", dest="frontier_draws")
    p.add_argument("--grid", help="grid JSON written by the frontier command")
    p.add_argument("--alpha", type=float)
    p.add_argument("--plot", action="store_const", const=True)

    p = sub.add_parser("credset", help="pointwise credible set from interval draws")
    add_common(p)
    p.add_argument("--interval-draws", dest="interval_draws")
    p.add_argument("--alpha", type=float)

    p = sub.add_parser("oracle", help="closed form vs lattice agreement diagnostics")
    add_common(p)
    p.add_argument("--gamma")
    p.add_argument("--anticipation", choices=ANTICIPATION_CHOICES)
    p.add_argument("--share-lo", type=float, dest="share_lo")
    p.add_argument("--share-hi", type=float, dest="share_hi")
    p.add_argument("--lower")
    p.add_argument("--upper")
    p.add_argument("--magnitude", type=float)
    p.add_argument("--density", type=int)
    p.add_argument("--sharpness-targets", type=int, dest="sharpness_targets")
    return parser


_REQUIRED = {
    "estimate": ("panel", "out"),
    "bounds": ("out",),
    "frontier": ("out",),
    "band": ("frontier_draws", "out"),
    "credset": ("interval_draws", "out"),
    "oracle": ("gamma", "out"),
}


def _resolve(args: argparse.Namespace) -> dict:
    command = args.command
    cfg = dict(_DEFAULTS[command])
    if args.config:
        loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(loaded, dict):
            raise ValueError("config file must hold a JSON object")
        for key, value in loaded.items():
            cfg[key] = value
    for key, value in vars(args).items():
        if key in ("command", "config"):
            continue
        if value is not None:
            cfg[key] = value
    cfg.setdefault("out", None)
    missing = [k for k in _REQUIRED[command] if cfg.get(k) in (None, "")]
    if missing:
        raise ValueError(f"missing required option(s): {', '.join('--' + m.replace('_', '-') for m in missing)}")
    return cfg


_HANDLERS = {
    "estimate": _cmd_estimate,
    "bounds": _cmd_bounds,
    "frontier": _cmd_frontier,
    "band": _cmd_band,
    "credset": _cmd_credset,
    "oracle": _cmd_oracle,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve(args)
        return _HANDLERS[args.command](cfg)
    except InternalInvariantError as exc:
        print(f"did-sens: internal invariant violated: {exc}", file=sys.stderr)
        return 4
    except PanelFormatError as exc:
        print(f"did-sens: input format error: {exc}", file=sys.stderr)
        return 3
    except (json.JSONDecodeError, UnicodeDecodeError, OSError) as exc:
        print(f"did-sens: I/O error: {exc}", file=sys.stderr)
        return 3
    except (DidSensError, ValueError) as exc:
        print(f"did-sens: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # unexpected: treat as internal
        print(f"did-sens: unexpected failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
