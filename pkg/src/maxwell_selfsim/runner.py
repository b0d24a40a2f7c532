"""Task execution for the command line: builds models, runs solvers, writes CSV."""

from __future__ import annotations

import os
from fractions import Fraction

import numpy as np

from . import __version__
from .config import RunConfig
from .evolve import evolve, rescaled_deviation
from .grid import GridFunction, LogGrid, exp_power
from .model import MaxwellModel, make_elastic, make_inelastic, make_thermostat, read_model
from .moments import moment_table
from .selfsim import solve_profile
from .spectral import lambda_p, mu_p, psi, spectral_profile, theta_star
from .transform import inverse_radial_fourier, tail_fit

__all__ = ["build_model", "build_grid", "load_function", "run_task"]


def _fmt(v) -> str:
    if v is None:
        return "div"
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (bool, np.bool_, str)):
        return str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def build_model(cfg: RunConfig) -> MaxwellModel:
    m = cfg.model
    g = None if m.g == 1 else float(m.g)
    if m.preset == "elastic":
        return make_elastic(m.d, g, m.n_quad)
    if m.preset == "thermostat":
        return make_thermostat(m.d, g, m.m, m.theta, m.n_quad)
    if m.preset == "inelastic":
        return make_inelastic(m.d, m.e, m.n_quad)
    return read_model(m.file)


def build_grid(cfg: RunConfig) -> LogGrid:
    n = cfg.numerics
    return LogGrid(n.x_min, n.x_max, n.grid_n)


def load_function(spec: str, grid: LogGrid) -> GridFunction:
    """``exp``, ``exp_p:<p>`` or a CSV file with columns ``x, u``.

    File data are interpolated in ``ln x``; below the first sample the
    value moves linearly to ``u(0) = 1`` and beyond the last it is held.
    """
    if spec == "exp":
        return exp_power(grid)
    if spec.startswith("exp_p:"):
        p = float(Fraction(spec.split(":", 1)[1]))
        if not p > 0:
            raise ValueError("exp_p needs a positive power")
        return exp_power(grid, p)
    if not os.path.exists(spec):
        raise ValueError(f"unknown function spec or missing file {spec!r}")
    data = np.loadtxt(spec, delimiter=",", comments="#", skiprows=_header_rows(spec), ndmin=2)
    x, u = data[:, 0], data[:, 1]
    if np.any(x <= 0) or np.any(np.diff(x) <= 0):
        raise ValueError(f"{spec}: x must be positive and increasing")
    xn = grid.nodes
    vals = np.interp(np.log(xn), np.log(x), u)
    below = xn < x[0]
    vals[below] = 1.0 + (u[0] - 1.0) * xn[below] / x[0]
    return GridFunction(grid, vals, value_at_zero=1.0, tail_limit=float(u[-1]))


def _header_rows(path) -> int:
    # a single non-comment, non-numeric header line is allowed
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            try:
                float(line.split(",")[0])
                return 0
            except ValueError:
                return 1
    return 0


class _Writer:
    def __init__(self, cfg: RunConfig, model: MaxwellModel):
        self.dir = cfg.output_dir
        os.makedirs(self.dir, exist_ok=True)
        self.meta = [f"# maxwell-selfsim {__version__}",
                     f"# model={model.name} fingerprint={model.fingerprint()}"]
        self.meta += [f"# config: {line}" for line in cfg.echo()]
        self.summary: list = list(cfg.echo())

    def csv(self, name: str, header, rows):
        path = os.path.join(self.dir, name)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(self.meta) + "\n")
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")

    def add(self, key: str, value):
        self.summary.append(f"{key}={_fmt(value)}")

    def close(self):
        with open(os.path.join(self.dir, "summary.txt"), "w", encoding="utf-8",
                  newline="\n") as fh:
            fh.write("\n".join(self.summary) + "\n")


def _task_spectral(cfg, model, out):
    n = cfg.numerics
    prof = spectral_profile(model)
    for k, v in prof.as_dict().items():
        out.add(k, v)
    if cfg.model.preset in ("elastic", "thermostat"):
        g = None if cfg.model.g == 1 else float(cfg.model.g)
        out.add("theta_star", theta_star(cfg.model.d, g, float(cfg.model.m)))
    ps = np.linspace(n.p_max / n.p_points, n.p_max, n.p_points)
    out.csv("spectral.csv", ["p", "lambda", "mu", "psi"],
            ([p, lambda_p(model, p), mu_p(model, p), psi(model, p)] for p in ps))


def _task_profile(cfg, model, out):
    n = cfg.numerics
    prof = solve_profile(model, p=n.p, tol=n.tol, max_iter=n.max_iter, grid=build_grid(cfg))
    for k, v in prof.as_dict().items():
        out.add(k, v)
    x = prof.w.x_nodes
    out.csv("profile.csv", ["x_tilde", "w", "e_minus_x"], zip(x, prof.w.values, np.exp(-x)))


def _task_evolve(cfg, model, out):
    n = cfg.numerics
    grid = build_grid(cfg)
    u0 = load_function(n.u0, grid)
    trace = evolve(model, u0, n.t_end, n.dt, n.output_every)
    out.add("dt_used", trace.dt)
    out.add("final_supnorm", trace.final.sup_norm())
    x_idx = np.arange(0, grid.n, n.x_stride)
    x = grid.nodes[x_idx]
    out.csv("evolve.csv", ["t", "x", "u"],
            ([t, xi, ui] for t, s in zip(trace.times, trace.states)
             for xi, ui in zip(x, s.values[x_idx])))
    cols = [trace.times, trace.column("u0"), trace.column("slope0"), trace.column("supnorm")]
    header = ["t", "u0val", "slope0", "supnorm"]
    if n.reference:
        prof = solve_profile(model, p=1.0, tol=n.tol, max_iter=n.max_iter, grid=grid)
        dev = rescaled_deviation(trace, prof.mu_star, prof.w, p=1.0)
        cols += [dev["sup"], dev["weighted"]]
        header += ["dev_sup", "dev_weighted"]
        out.add("final_dev_sup", dev["sup"][-1])
    out.csv("diagnostics.csv", header, zip(*cols))


def _task_moments(cfg, model, out):
    table = moment_table(model, cfg.numerics.S)
    out.add("s_star", table.s_star)
    out.add("p0", table.p0)
    out.add("mu1", table.mu1)
    out.add("exact", table.exact)
    out.csv("moments.csv", ["s", "m_s", "m_s_exact", "verdict"],
            ([s, None if v is None else float(v),
              v if isinstance(v, Fraction) else ("div" if v is None else ""), verdict]
             for s, v, verdict in table.rows()))


def _task_invert(cfg, model, out):
    n = cfg.numerics
    grid = build_grid(cfg)
    if n.u0 == "profile":
        prof = solve_profile(model, p=n.p, tol=n.tol, max_iter=n.max_iter, grid=grid)
        st = grid.stencil(grid.nodes ** n.p)
        u = GridFunction.from_exponent(grid, prof.w.evaluate_stencil_exponent(st),
                                       value_at_zero=1.0, tail_limit=0.0)
    else:
        u = load_function(n.u0, grid)
    r = np.linspace(0.0, n.r_max, n.r_points)
    dist = inverse_radial_fourier(u, n.dim, r)
    out.add("mass", dist.mass_estimate)
    out.add("min_density", dist.min_density)
    out.add("positivity_ok", dist.positivity_ok)
    if n.tail_window is not None:
        fit = tail_fit(dist, n.tail_window)
        out.add("tail_exponent", fit.exponent)
        out.add("tail_fit_quality", fit.fit_quality)
    out.csv("distribution.csv", ["r", "f"], zip(r, dist.density))


_TASKS = {"spectral": _task_spectral, "profile": _task_profile, "evolve": _task_evolve,
          "moments": _task_moments, "invert": _task_invert}


def run_task(cfg: RunConfig) -> None:
    """Execute ``cfg.task``; exceptions propagate to the caller."""
    model = build_model(cfg)
    out = _Writer(cfg, model)
    _TASKS[cfg.task](cfg, model, out)
    out.close()
