"""Command-line front door: test, simulate, power-curve, fredmd.

Statistical outcomes never change the exit status; only operational
failures (bad files, bad config) do. All outputs carry a provenance block
(tool version, seed, config digest) and contain no timestamps, so a rerun
of the same command is byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import click
import numpy as np
import yaml

from . import __version__
from .adequacy import TestReport, run_tests
from .errors import FarmtestError, FormatError
from .factor_model import DataMatrixPair, fit_factor_model
from .fredmd import build_problem, load_fredmd
from .simulate import (
    RESULT_CSV_HEADER,
    CellResult,
    cell_from_mapping,
    grid_from_mapping,
    power_curve,
    result_csv_row,
    run_cell,
)

REPORT_FIELDS = [
    "s_tilde_sq", "t_n", "trace_hat", "sigma_eps_sq", "m_n",
    "p_max", "p_quad", "p_fisher", "f_n",
    "reject_max", "reject_quad", "reject_fisher",
    "alpha", "n", "p", "k", "k_estimated",
]


def _threads_option(value: int | None) -> int:
    """Flag > FARM_THREADS > available parallelism."""
    if value is not None:
        return max(1, value)
    env = os.environ.get("FARM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise click.ClickException(f"FARM_THREADS must be an integer, got {env!r}")
    return os.cpu_count() or 1


def _config_digest(config: dict) -> str:
    """Digest of the statistical configuration (never runtime knobs like
    thread count or output paths, which must not change results)."""
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _provenance(config: dict, seed: int | None = None) -> dict:
    prov = {"tool": "farmtest", "version": __version__,
            "config_digest": _config_digest(config)}
    if seed is not None:
        prov["seed"] = seed
    return prov


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


def _report_json(report: TestReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def _report_csv(report: TestReport) -> str:
    d = report.to_dict()
    prov = d.get("provenance", {})
    comment = (f"# farmtest {prov.get('version', __version__)} "
               f"config_digest={prov.get('config_digest', 'n/a')}\n")
    row = ",".join(
        str(d[f]).lower() if isinstance(d[f], bool) else repr(d[f]) if isinstance(d[f], float) else str(d[f])
        for f in REPORT_FIELDS
    )
    return comment + ",".join(REPORT_FIELDS) + "\n" + row + "\n"


def _load_numeric_csv(path: str) -> np.ndarray:
    """Plain numeric CSV, optional single header row."""
    try:
        raw = Path(path).read_text()
    except OSError as exc:
        raise click.ClickException(f"cannot read {path}: {exc}")
    lines = [ln for ln in raw.splitlines() if ln.strip()]
    if not lines:
        raise click.ClickException(f"{path} is empty")
    first = lines[0].replace(",", " ").split()
    skip = 0
    try:
        [float(tok) for tok in first]
    except ValueError:
        skip = 1
    try:
        arr = np.loadtxt(lines[skip:], delimiter=",", ndmin=2)
    except ValueError as exc:
        raise click.ClickException(f"{path}: {exc}")
    return arr


def _summary_lines(report: TestReport) -> list[str]:
    def line(name, p, reject):
        verdict = "reject" if reject else "no rejection"
        return f"{name:<11s} p = {p:.4g} -> {verdict} at alpha = {report.alpha:g}"

    return [
        line("max-type:", report.pvalues.p_max, report.reject_max),
        line("quad-type:", report.pvalues.p_quad, report.reject_quad),
        line("fisher:", report.pvalues.p_fisher, report.reject_fisher),
    ]


@click.group()
@click.version_option(version=__version__, prog_name="farmtest")
def main():
    """Adequacy tests for factor-augmented regression."""


# ---------------------------------------------------------------------------
# farmtest test
# ---------------------------------------------------------------------------

@main.command("test")
@click.option("--x", "x_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Covariate matrix CSV (n rows, p columns).")
@click.option("--y", "y_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Response vector CSV (n rows).")
@click.option("--alpha", default=0.05, show_default=True, help="Significance level.")
@click.option("--k", default=None, type=int, help="Factor count; omit to estimate it.")
@click.option("--kmax", default=None, type=int, help="Search bound for the ratio estimator.")
@click.option("--out", default=None, type=click.Path(), help="Write the report here instead of stdout.")
@click.option("--format", "fmt", default="json", type=click.Choice(["json", "csv"]),
              show_default=True, help="Report format.")
def cmd_test(x_path, y_path, alpha, k, kmax, out, fmt):
    """Run the three adequacy tests on a plain numeric dataset."""
    X = _load_numeric_csv(x_path)
    y = _load_numeric_csv(y_path)
    if y.shape[1] == 1:
        y = y[:, 0]
    elif y.shape[0] == 1:
        y = y[0, :]
    else:
        raise click.ClickException(f"{y_path} must hold a single row or column")
    try:
        fit = fit_factor_model(DataMatrixPair(X=X, Y=y), K=k, kmax=kmax)
        config = {
            "command": "test",
            "x_sha256": hashlib.sha256(Path(x_path).read_bytes()).hexdigest()[:16],
            "y_sha256": hashlib.sha256(Path(y_path).read_bytes()).hexdigest()[:16],
            "alpha": alpha, "k": k, "kmax": kmax,
        }
        report = run_tests(fit, alpha=alpha, provenance=_provenance(config))
    except FarmtestError as exc:
        raise click.ClickException(str(exc))
    _emit(_report_json(report) if fmt == "json" else _report_csv(report), out)
    for line in _summary_lines(report):
        click.echo(line, err=True)


# ---------------------------------------------------------------------------
# farmtest simulate / power-curve
# ---------------------------------------------------------------------------

def _load_config(path: str) -> dict:
    try:
        cfg = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise click.ClickException(f"cannot read {path}: {exc}")
    except yaml.YAMLError as exc:
        raise click.ClickException(f"{path}: invalid YAML: {exc}")
    if not isinstance(cfg, dict):
        raise click.ClickException(f"{path}: config must be a mapping")
    return cfg


def _apply_overrides(cfg: dict, reps, seed, alpha) -> dict:
    cfg = dict(cfg)
    if reps is not None:
        cfg["reps"] = reps
    if seed is not None:
        cfg["seed"] = seed
    if alpha is not None:
        cfg["alpha"] = alpha
    return cfg


def _cell_config_echo(cell) -> dict:
    return {
        "n": cell.n, "p": cell.p, "k": cell.k, "k_mode": cell.k_mode,
        "kmax": cell.kmax, "sigma_u": cell.sigma_u, "rho": cell.rho,
        "beta": {"pattern": cell.beta.pattern, "s": cell.beta.s,
                 "omega": cell.beta.omega, "target": cell.beta.target},
        "gamma_star": list(cell.gamma_star), "eps_sd": cell.eps_sd,
        "reps": cell.reps, "seed": cell.seed, "alpha": cell.alpha,
    }


def _provenance_comment(cell, config: dict) -> str:
    prov = _provenance(config, seed=cell.seed)
    return (f"# farmtest {prov['version']} seed={prov['seed']} "
            f"config_digest={prov['config_digest']}\n")


@main.command("simulate")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="Cell config (YAML).")
@click.option("--reps", default=None, type=int, help="Override replication count.")
@click.option("--seed", default=None, type=int, help="Override base seed.")
@click.option("--alpha", default=None, type=float, help="Override significance level.")
@click.option("--threads", default=None, type=int,
              help="Worker processes [default: FARM_THREADS or all cores].")
@click.option("--out", default=None, type=click.Path(), help="Write the CSV here instead of stdout.")
def cmd_simulate(config_path, reps, seed, alpha, threads, out):
    """Estimate rejection rates for one Monte Carlo cell."""
    cfg = _apply_overrides(_load_config(config_path), reps, seed, alpha)
    cfg.pop("grid", None)
    try:
        cell = cell_from_mapping(cfg)
        result = run_cell(cell, threads=_threads_option(threads))
    except FarmtestError as exc:
        raise click.ClickException(str(exc))
    _echo_cell_progress(result)
    text = (_provenance_comment(cell, _cell_config_echo(cell))
            + RESULT_CSV_HEADER + "\n" + result_csv_row(result) + "\n")
    _emit(text, out)


def _echo_cell_progress(result: CellResult) -> None:
    c = result.cell
    click.echo(
        f"cell s={c.beta.s} omega={c.resolved_omega():g} n={c.n} p={c.p} "
        f"sigma_u={c.sigma_u}: rate_max={result.rate_max:.3f} "
        f"rate_quad={result.rate_quad:.3f} rate_fisher={result.rate_fisher:.3f} "
        f"({result.reps_completed} reps, {result.n_failed} failed, "
        f"{result.wall_time:.1f}s)",
        err=True,
    )


POWER_CSV_HEADER = "s,omega,n,p,sigma_u,test,rate,se,reps,seed"


def _power_csv_rows(results: list[CellResult]) -> list[str]:
    rows = []
    for res in results:
        c = res.cell
        prefix = [str(c.beta.s), format(c.resolved_omega(), ".10g"),
                  str(c.n), str(c.p), c.sigma_u]
        for test, rate, se in (
            ("max", res.rate_max, res.se_max),
            ("quad", res.rate_quad, res.se_quad),
            ("fisher", res.rate_fisher, res.se_fisher),
        ):
            rows.append(",".join(prefix + [test, format(rate, ".6f"),
                                           format(se, ".6f"), str(c.reps), str(c.seed)]))
    return rows


@main.command("power-curve")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Cell config with a grid section (YAML).")
@click.option("--reps", default=None, type=int, help="Override replication count.")
@click.option("--seed", default=None, type=int, help="Override base seed.")
@click.option("--alpha", default=None, type=float, help="Override significance level.")
@click.option("--threads", default=None, type=int,
              help="Worker processes [default: FARM_THREADS or all cores].")
@click.option("--out", default=None, type=click.Path(), help="Write the CSV here instead of stdout.")
@click.option("--svg", "svg_dir", default=None, type=click.Path(file_okay=False),
              help="Also write one minimal SVG line chart per test into this directory.")
def cmd_power_curve(config_path, reps, seed, alpha, threads, out, svg_dir):
    """Rejection rates over a grid of (sparsity, signal) points."""
    cfg = _apply_overrides(_load_config(config_path), reps, seed, alpha)
    grid_cfg = cfg.pop("grid", None)
    if grid_cfg is None:
        raise click.ClickException("power-curve needs a 'grid' section in the config")
    try:
        cell = cell_from_mapping(cfg)
        points = grid_from_mapping(grid_cfg, cell)
        results = power_curve(cell, points, threads=_threads_option(threads),
                              progress=_echo_cell_progress)
    except FarmtestError as exc:
        raise click.ClickException(str(exc))
    config_echo = {**_cell_config_echo(cell), "grid": [[s, w] for s, w in points]}
    text = (_provenance_comment(cell, config_echo) + POWER_CSV_HEADER + "\n"
            + "\n".join(_power_csv_rows(results)) + "\n")
    _emit(text, out)
    if svg_dir:
        _write_svg_charts(results, svg_dir)
        click.echo(f"wrote SVG charts to {svg_dir}", err=True)


def _write_svg_charts(results: list[CellResult], directory: str) -> None:
    Path(directory).mkdir(parents=True, exist_ok=True)
    svals = [r.cell.beta.s for r in results]
    varying_s = len(set(svals)) > 1
    xs = [float(s) for s in svals] if varying_s else [r.cell.resolved_omega() for r in results]
    xlabel = "s" if varying_s else "omega"
    for test in ("max", "quad", "fisher"):
        ys = [getattr(r, f"rate_{test}") for r in results]
        path = Path(directory) / f"power_{test}.svg"
        path.write_text(_line_chart_svg(xs, ys, xlabel, f"{test} rejection rate"))


def _line_chart_svg(xs, ys, xlabel: str, title: str,
                    width: int = 480, height: int = 320) -> str:
    """Line chart as a bare SVG string: axes, polyline, point markers."""
    ml, mr, mt, mb = 50, 15, 30, 40
    pw, ph = width - ml - mr, height - mt - mb
    x0, x1 = min(xs), max(xs)
    span = (x1 - x0) or 1.0

    def px(x):
        return ml + pw * (x - x0) / span

    def py(y):
        return mt + ph * (1.0 - y)

    pts = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in zip(xs, ys))
    markers = "".join(
        f'<circle cx="{px(x):.1f}" cy="{py(y):.1f}" r="3" fill="#1f77b4"/>'
        for x, y in zip(xs, ys)
    )
    yticks = "".join(
        f'<line x1="{ml - 4}" y1="{py(v):.1f}" x2="{ml}" y2="{py(v):.1f}" stroke="#000"/>'
        f'<text x="{ml - 8}" y="{py(v) + 4:.1f}" font-size="10" text-anchor="end">{v:.1f}</text>'
        for v in (0.0, 0.25, 0.5, 0.75, 1.0)
    )
    xticks = "".join(
        f'<line x1="{px(x):.1f}" y1="{mt + ph}" x2="{px(x):.1f}" y2="{mt + ph + 4}" stroke="#000"/>'
        f'<text x="{px(x):.1f}" y="{mt + ph + 16}" font-size="10" text-anchor="middle">{x:g}</text>'
        for x in sorted(set(xs))
    )
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">'
        f'<text x="{width / 2}" y="18" font-size="12" text-anchor="middle">{title}</text>'
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>'
        f"{yticks}{xticks}"
        f'<text x="{ml + pw / 2}" y="{height - 8}" font-size="11" text-anchor="middle">{xlabel}</text>'
        f'<polyline points="{pts}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>'
        f"{markers}</svg>\n"
    )


# ---------------------------------------------------------------------------
# farmtest fredmd
# ---------------------------------------------------------------------------

@main.command("fredmd")
@click.option("--csv", "csv_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="FRED-MD style CSV.")
@click.option("--response", required=True, help="Series to treat as the response.")
@click.option("--start", default=None, help="Window start, e.g. 1992-02 or 1992.02.")
@click.option("--end", default=None, help="Window end, e.g. 2007-10 or 2007.10.")
@click.option("--alpha", default=0.05, show_default=True, help="Significance level.")
@click.option("--k", default=None, type=int, help="Factor count; omit to estimate it.")
@click.option("--kmax", default=15, show_default=True, type=int,
              help="Search bound for the ratio estimator.")
@click.option("--out", default=None, type=click.Path(), help="Write the JSON report here.")
@click.option("--dump", "dump_dir", default=None, type=click.Path(file_okay=False),
              help="Also write the assembled X/Y matrices and manifest for audit.")
def cmd_fredmd(csv_path, response, start, end, alpha, k, kmax, out, dump_dir):
    """Ingest a macro panel, fit factors, and test adequacy for one response."""
    try:
        ds = load_fredmd(csv_path)
        problem = build_problem(ds, response, start=start, end=end)
        fit = fit_factor_model(DataMatrixPair(X=problem.X, Y=problem.Y), K=k, kmax=kmax)
        config = {
            "command": "fredmd",
            "csv_sha256": hashlib.sha256(Path(csv_path).read_bytes()).hexdigest()[:16],
            "response": response, "start": start, "end": end,
            "alpha": alpha, "k": k, "kmax": kmax,
        }
        report = run_tests(fit, alpha=alpha, provenance=_provenance(config))
    except FormatError as exc:
        raise click.ClickException(f"{csv_path}: {exc}")
    except FarmtestError as exc:
        raise click.ClickException(str(exc))
    if dump_dir:
        problem.save(dump_dir)
    doc = {
        "report": report.to_dict(),
        "dropped_series": problem.dropped_series,
        "window": [problem.dates[0], problem.dates[-1]],
        "response": response,
    }
    _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", out)
    click.echo(
        f"{response}: n={report.n} months, p={report.p} covariates, "
        f"k={report.k}{' (estimated)' if report.k_estimated else ''}, "
        f"{len(problem.dropped_series)} series dropped",
        err=True,
    )
    for line in _summary_lines(report):
        click.echo(line, err=True)


if __name__ == "__main__":
    main()
