"""Experiment protocols: parameter sweeps, reconstructions and ablations.

Every experiment takes an :class:`ExperimentConfig` and returns an
:class:`ExperimentResult` holding a table of rows plus one trace per solver
run. Work is split into independent tasks that can run in a process pool;
results are merged in task order, so the table does not depend on the
number of workers.

Configuration is flat key/value. Solver keys (``rho``, ``lam``, ``box`` ...)
apply to every method; a ``method.key`` entry (``tv.box = none``) overrides
one method only.
"""

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .grid import load_image, make_one_bar, make_two_bar, psnr, relative_error, shepp_logan
from .operators import (
    FourierSampling,
    limited_angles,
    make_lowfreq_square_mask,
    make_lowpass_mask_1d,
    make_radial_mask,
    radon_operator,
)
from .solvers import (
    Problem,
    SolverParams,
    sart_solve,
    solve_l1_minus_l2,
    solve_l1_over_l2,
    solve_lp,
    solve_tv,
    zero_fill,
)

log = logging.getLogger(__name__)

__all__ = [
    "EXACT_TOL",
    "WORKERS_ENV",
    "KINDS",
    "METHODS",
    "ExperimentConfig",
    "ExperimentResult",
    "parse_config_text",
    "run_experiment",
    "run_onebar_sweep",
    "run_twobar_sweep",
    "run_superres",
    "run_mri_radial",
    "run_ct_limited",
    "run_sensitivity_grid",
    "run_ablations",
]

EXACT_TOL = 1e-6
WORKERS_ENV = "GRADRATIO_WORKERS"
METHODS = ("l1l2", "tv", "lp", "l1ml2", "zf", "sart")
SOLVER_KEYS = ("rho", "gamma", "beta", "lam", "box", "k_max", "j_max", "eps_rel",
               "h_norm_floor", "cg_tol", "cg_max_iter")


# -- value parsing ---------------------------------------------------------------


def _as_list(cast):
    def parse(v):
        if isinstance(v, (list, tuple)):
            return [cast(x) for x in v]
        return [cast(x) for x in str(v).replace(";", ",").split(",") if x.strip()]
    return parse


def _as_box(v):
    if v is None or (isinstance(v, str) and v.strip().lower() in ("none", "off", "")):
        return None
    p, q = _as_list(float)(v)
    return (p, q)


def _as_opt_float(v):
    if v is None or (isinstance(v, str) and v.strip().lower() == "none"):
        return None
    return float(v)


def _as_bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _as_str(v):
    return str(v).strip()


PARSERS = {
    "methods": _as_list(_as_str),
    "seed": int,
    "N": int,
    "fc": int,
    "s": int,
    "s_min": int,
    "s_max": int,
    "restarts": int,
    "stop_on_exact": _as_bool,
    "t_min": float,
    "t_max": float,
    "t_step": float,
    "size": int,
    "image": _as_str,
    "ratio": float,
    "lines": _as_list(int),
    "theta": _as_list(float),
    "n_angles": int,
    "n_detectors": int,
    "sart_iters": int,
    "app": _as_str,
    "exp_min": int,
    "exp_max": int,
    "lams": _as_list(float),
    "k_maxes": _as_list(int),
    "studies": _as_list(_as_str),
    "j_maxes": _as_list(int),
    "alpha": float,
    # solver parameters
    "rho": float,
    "gamma": _as_opt_float,
    "beta": float,
    "lam": float,
    "box": _as_box,
    "k_max": int,
    "j_max": int,
    "eps_rel": float,
    "h_norm_floor": _as_opt_float,
    "cg_tol": float,
    "cg_max_iter": int,
}


# -- presets -----------------------------------------------------------------------

_MRI_SOLVER = dict(rho=1.0, beta=1.0, lam=1000.0, box=(0.0, 1.0), j_max=5)
_CT_SOLVER = dict(rho=0.0625, beta=0.25, lam=0.05, box=(0.0, 1.0), j_max=1, cg_tol=1e-4,
                  cg_max_iter=100)

PRESETS = {
    "onebar": dict(
        methods=["tv", "l1l2"], N=100, fc=2, s_min=1, s_max=49, restarts=10,
        stop_on_exact=True, seed=0,
        lam=100.0, rho=8.0, beta=1.0, box=(0.0, 1.0), k_max=2000, j_max=5, eps_rel=1e-12,
        **{"tv.box": None, "tv.rho": 1.0, "tv.k_max": 5000, "tv.eps_rel": 1e-13},
    ),
    "twobar": dict(
        methods=["tv", "l1l2"], N=100, s=12, fc=4, t_min=1.05, t_max=1.95, t_step=0.05,
        restarts=10, stop_on_exact=True, seed=0,
        lam=100.0, rho=8.0, beta=1.0, box=(1.0, 2.0), k_max=2000, j_max=5, eps_rel=1e-12,
        **{"tv.box": None, "tv.rho": 1.0, "tv.k_max": 5000, "tv.eps_rel": 1e-13},
    ),
    "superres": dict(
        methods=["zf", "tv", "lp", "l1ml2", "l1l2"], image="shepp_logan", size=256,
        ratio=0.05, seed=0, k_max=300, eps_rel=1e-5, **_MRI_SOLVER,
    ),
    "mri": dict(
        methods=["zf", "tv", "lp", "l1ml2", "l1l2"], size=256, lines=[20, 25, 30], seed=0,
        k_max=100, eps_rel=1e-14, **_MRI_SOLVER,
    ),
    "ct": dict(
        methods=["sart", "tv", "lp", "l1ml2", "l1l2"], size=256, theta=[30.0, 45.0],
        n_angles=31, n_detectors=362, sart_iters=100, seed=0, k_max=1500, eps_rel=1e-5,
        **_CT_SOLVER,
    ),
    "sensitivity": dict(
        methods=["l1l2"], app="mri", size=256, lines=[6], theta=[45.0], n_angles=31,
        n_detectors=362, exp_min=-4, exp_max=4, lams=[100.0, 1000.0, 10000.0],
        k_maxes=[500, 1000], seed=0, eps_rel=1e-14, **_MRI_SOLVER,
    ),
    "ablation": dict(
        methods=["l1l2"], app="mri", size=256, lines=[6], theta=[45.0], n_angles=31,
        n_detectors=362, studies=["box", "jmax"], j_maxes=[1, 3, 5, 10], seed=0,
        k_max=300, eps_rel=1e-14, **_MRI_SOLVER,
    ),
}

# application presets swapped in by `app = ct`
_APP_SOLVER = {"mri": _MRI_SOLVER, "ct": _CT_SOLVER}
_APP_EXTRA = {
    "mri": {},
    "ct": {"lams": [0.005, 0.05, 0.5], "k_maxes": [300]},
}

KINDS = tuple(PRESETS)


@dataclass
class ExperimentConfig:
    """Resolved settings for one experiment.

    Parameters
    ----------
    kind : str
        One of :data:`KINDS`.
    values : dict
        Overrides applied on top of the preset for `kind`; strings are parsed
        with the same rules as a config file.
    """

    kind: str
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in PRESETS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        raw = dict(PRESETS[self.kind])
        app = str(self.values.get("app", raw.get("app", ""))).strip()
        if app and self.kind in ("sensitivity", "ablation"):
            if app not in _APP_SOLVER:
                raise ValueError(f"unknown application {app!r}")
            raw.update(_APP_SOLVER[app])
            raw.update(_APP_EXTRA[app])
        raw.update(self.values)
        self.values = {k: _parse_value(k, v) for k, v in raw.items()}
        for m in self.values["methods"]:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def params_for(self, method, **extra):
        """SolverParams for `method`: globals, then ``method.key`` overrides, then `extra`."""
        kw = {k: self.values[k] for k in SOLVER_KEYS if k in self.values}
        prefix = method + "."
        for k, v in self.values.items():
            if k.startswith(prefix):
                kw[k[len(prefix):]] = v
        kw.update(extra)
        kw["rng_seed"] = int(kw.get("rng_seed", self.values.get("seed", 0)))
        return SolverParams(**kw)

    def to_dict(self):
        out = {}
        for k, v in sorted(self.values.items()):
            out[k] = list(v) if isinstance(v, tuple) else v
        return {"kind": self.kind, "values": out}


def _parse_value(key, value):
    base = key.split(".", 1)[1] if "." in key else key
    if "." in key and key.split(".", 1)[0] not in METHODS:
        raise ValueError(f"unknown method prefix in {key!r}")
    if "." in key and base not in SOLVER_KEYS:
        raise ValueError(f"only solver keys take a method prefix: {key!r}")
    if base not in PARSERS:
        raise ValueError(f"unknown config key {key!r}")
    if value is None and base in ("box", "gamma", "h_norm_floor"):
        return None
    try:
        return PARSERS[base](value)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"bad value for {key!r}: {value!r}") from exc


def parse_config_text(text):
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, val = (x.strip() for x in line.split("=", 1))
        if not key:
            raise ValueError(f"line {lineno}: empty key")
        values[key] = val
    return values


@dataclass
class ExperimentResult:
    """Table columns, row dicts, and traces keyed by run id."""

    columns: list
    rows: list
    traces: dict


# -- task execution ----------------------------------------------------------------


def _worker_count():
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ValueError(f"{WORKERS_ENV} must be at least 1")
    return n


def _run_task(task):
    fn, kwargs = task
    return fn(**kwargs)


def _execute(tasks, columns):
    """Run `tasks` (``(fn, kwargs)`` pairs) and merge their outputs in order."""
    workers = min(_worker_count(), max(1, len(tasks)))
    if workers == 1:
        outputs = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_run_task, tasks))
    rows, traces = [], {}
    for out in outputs:
        for row, trace_id, trace in out:
            rows.append({c: row.get(c) for c in columns})
            if trace_id in traces:
                raise RuntimeError(f"duplicate trace id {trace_id}")
            traces[trace_id] = trace
    return ExperimentResult(list(columns), rows, traces)


# -- single runs -------------------------------------------------------------------


def _trace(method, params, diag, extra=None):
    out = {"method": method, "params": None if params is None else params.to_dict()}
    if diag is not None:
        out.update(diag.to_dict())
    if extra:
        out.update(extra)
    return out


def _solve(method, problem, params, truth, sart_iters=100, alpha=0.5, restarts=1,
           stop_on_exact=False):
    """Run one method; returns ``(u, diagnostics, extra_trace_fields)``."""
    if method == "zf":
        return zero_fill(problem.b, problem.op), None, {}
    if method == "sart":
        res = sart_solve(problem, iterations=sart_iters, ground_truth=truth)
        return res.u, res.diagnostics, {}
    if method == "tv":
        res = solve_tv(problem, params, ground_truth=truth)
    elif method == "lp":
        res = solve_lp(problem, params, ground_truth=truth)
    elif method == "l1ml2":
        res = solve_l1_minus_l2(problem, params, ground_truth=truth, alpha=alpha)
    elif method == "l1l2":
        return _solve_l1l2_restarts(problem, params, truth, restarts, stop_on_exact)
    else:
        raise ValueError(f"unknown method {method!r}")
    return res.u, res.diagnostics, {}


def _solve_l1l2_restarts(problem, params, truth, restarts, stop_on_exact):
    # restart 0 starts from zero, the others from seeded random points in the box
    best, errors = None, []
    for r in range(max(1, restarts)):
        p = params.with_(rng_seed=params.rng_seed * 1000 + r)
        res = solve_l1_over_l2(problem, p, ground_truth=truth, init="zero" if r == 0 else "random")
        err = relative_error(res.u, truth)
        errors.append(err)
        if best is None or err < best[0]:
            best = (err, r, res)
        if stop_on_exact and err < EXACT_TOL:
            break
    _, r_best, res = best
    return res.u, res.diagnostics, {"restart_errors": errors, "best_restart": r_best}


def _metrics(u, truth, diag, t0):
    re = relative_error(u, truth)
    return {
        "re": re,
        "psnr": psnr(u, truth),
        "iters": 0 if diag is None else diag.outer_iterations,
        "seconds": time.perf_counter() - t0,
    }


def _timed_solve(method, problem, params, truth, **kw):
    t0 = time.perf_counter()
    u, diag, extra = _solve(method, problem, params, truth, **kw)
    return u, diag, extra, _metrics(u, truth, diag, t0)


# -- 1D sweeps ---------------------------------------------------------------------


def _onebar_task(method, s, N, fc, params, restarts, stop_on_exact):
    truth = make_one_bar(N, s)
    op = FourierSampling(make_lowpass_mask_1d(N, fc))
    problem = Problem(op, op.apply(truth))
    _, diag, extra, m = _timed_solve(method, problem, params, truth, restarts=restarts,
                                     stop_on_exact=stop_on_exact)
    row = dict(method=method, s=s, exact_recovery=m["re"] < EXACT_TOL, **m)
    return [(row, f"{method}_s{s}", _trace(method, params, diag, extra))]


def run_onebar_sweep(config):
    """Exact recovery of one-bar signals over the bar offset `s`.

    Columns: method, s, re, psnr, exact_recovery, iters, seconds.
    """
    c = config
    tasks = []
    for method in c["methods"]:
        for s in range(c["s_min"], c["s_max"] + 1):
            tasks.append((_onebar_task, dict(
                method=method, s=s, N=c["N"], fc=c["fc"], params=c.params_for(method),
                restarts=c["restarts"] if method == "l1l2" else 1,
                stop_on_exact=c["stop_on_exact"])))
    return _execute(tasks, ["method", "s", "re", "psnr", "exact_recovery", "iters", "seconds"])


def _t_grid(t_min, t_max, step):
    n = int(np.floor((t_max - t_min) / step + 1e-9)) + 1
    return [round(t_min + i * step, 10) for i in range(n)]


def _twobar_task(method, t, N, s, fc, params, restarts, stop_on_exact):
    truth = make_two_bar(N, s, t)
    op = FourierSampling(make_lowpass_mask_1d(N, fc))
    problem = Problem(op, op.apply(truth))
    _, diag, extra, m = _timed_solve(method, problem, params, truth, restarts=restarts,
                                     stop_on_exact=stop_on_exact)
    row = dict(method=method, t=t, exact_recovery=m["re"] < EXACT_TOL, **m)
    return [(row, f"{method}_t{t:g}", _trace(method, params, diag, extra))]


def run_twobar_sweep(config):
    """Exact recovery of two-bar signals over the background level `t`.

    Columns: method, t, re, psnr, exact_recovery, iters, seconds.
    """
    c = config
    tasks = []
    for method in c["methods"]:
        for t in _t_grid(c["t_min"], c["t_max"], c["t_step"]):
            tasks.append((_twobar_task, dict(
                method=method, t=t, N=c["N"], s=c["s"], fc=c["fc"],
                params=c.params_for(method),
                restarts=c["restarts"] if method == "l1l2" else 1,
                stop_on_exact=c["stop_on_exact"])))
    return _execute(tasks, ["method", "t", "re", "psnr", "exact_recovery", "iters", "seconds"])


# -- images ------------------------------------------------------------------------


def _phantom(config):
    image = config.get("image", "shepp_logan")
    if image == "shepp_logan":
        return shepp_logan(config["size"])
    u = load_image(image)
    if u.ndim != 2:
        raise ValueError("the input image must be 2D")
    return u


def _image_task(method, truth, op_spec, params, alpha, sart_iters, labels, trace_id):
    op = _build_operator(op_spec)
    problem = Problem(op, op.apply(truth))
    _, diag, extra, m = _timed_solve(method, problem, params, truth, alpha=alpha,
                                     sart_iters=sart_iters)
    row = dict(method=method, **labels, **m)
    return [(row, trace_id, _trace(method, params, diag, extra))]


def _build_operator(spec):
    kind = spec["kind"]
    if kind == "square":
        return FourierSampling(make_lowfreq_square_mask(spec["m"], spec["n"], spec["ratio"]))
    if kind == "radial":
        return FourierSampling(make_radial_mask(spec["m"], spec["n"], spec["lines"]))
    if kind == "radon":
        return radon_operator(spec["m"], spec["n"], limited_angles(spec["theta"], spec["n_angles"]),
                              spec["n_detectors"])
    raise ValueError(f"unknown operator kind {kind!r}")


def _check_methods(methods, allowed, kind):
    bad = [m for m in methods if m not in allowed]
    if bad:
        raise ValueError(f"{kind} does not support method(s) {bad}")


def run_superres(config):
    """Recovery of an image from a centered square of low frequencies.

    Columns: method, ratio, sampling, re, psnr, iters, seconds.
    """
    c = config
    _check_methods(c["methods"], ("zf", "tv", "lp", "l1ml2", "l1l2"), "superres")
    truth = _phantom(c)
    m, n = truth.shape
    spec = dict(kind="square", m=m, n=n, ratio=c["ratio"])
    sampling = float(_build_operator(spec).mask.mean())
    tasks = [(_image_task, dict(
        method=method, truth=truth, op_spec=spec, params=c.params_for(method),
        alpha=c.get("alpha", 0.5), sart_iters=0,
        labels=dict(ratio=c["ratio"], sampling=sampling), trace_id=f"{method}_r{c['ratio']:g}"))
        for method in c["methods"]]
    return _execute(tasks, ["method", "ratio", "sampling", "re", "psnr", "iters", "seconds"])


def run_mri_radial(config):
    """Reconstruction from radial lines in k-space for each line count.

    Columns: method, lines, sampling, re, psnr, iters, seconds.
    """
    c = config
    _check_methods(c["methods"], ("zf", "tv", "lp", "l1ml2", "l1l2"), "mri")
    truth = _phantom(c)
    m, n = truth.shape
    tasks = []
    for lines in c["lines"]:
        spec = dict(kind="radial", m=m, n=n, lines=lines)
        sampling = float(_build_operator(spec).mask.mean())
        for method in c["methods"]:
            tasks.append((_image_task, dict(
                method=method, truth=truth, op_spec=spec, params=c.params_for(method),
                alpha=c.get("alpha", 0.5), sart_iters=0,
                labels=dict(lines=lines, sampling=sampling), trace_id=f"{method}_L{lines}")))
    return _execute(tasks, ["method", "lines", "sampling", "re", "psnr", "iters", "seconds"])


def run_ct_limited(config):
    """Limited-angle parallel-beam tomography for each angular range.

    Columns: method, theta, re, psnr, iters, seconds.
    """
    c = config
    _check_methods(c["methods"], ("sart", "tv", "lp", "l1ml2", "l1l2"), "ct")
    truth = _phantom(c)
    m, n = truth.shape
    tasks = []
    for theta in c["theta"]:
        spec = dict(kind="radon", m=m, n=n, theta=theta, n_angles=c["n_angles"],
                    n_detectors=c["n_detectors"])
        for method in c["methods"]:
            tasks.append((_image_task, dict(
                method=method, truth=truth, op_spec=spec, params=c.params_for(method),
                alpha=c.get("alpha", 0.5), sart_iters=c["sart_iters"],
                labels=dict(theta=theta), trace_id=f"{method}_th{theta:g}")))
    return _execute(tasks, ["method", "theta", "re", "psnr", "iters", "seconds"])


def _app_operator_spec(config, shape):
    m, n = shape
    if config["app"] == "mri":
        return dict(kind="radial", m=m, n=n, lines=config["lines"][0])
    return dict(kind="radon", m=m, n=n, theta=config["theta"][0], n_angles=config["n_angles"],
                n_detectors=config["n_detectors"])


def run_sensitivity_grid(config):
    """L1/L2 relative error over ``(rho, beta) = (2**i, 2**j)`` for each lambda and kMax.

    Columns: app, lam, k_max, rho, beta, re, psnr, iters, seconds.
    """
    c = config
    truth = _phantom(c)
    spec = _app_operator_spec(c, truth.shape)
    exps = range(c["exp_min"], c["exp_max"] + 1)
    tasks = []
    for lam in c["lams"]:
        for k_max in c["k_maxes"]:
            for i in exps:
                for j in exps:
                    params = c.params_for("l1l2", lam=lam, k_max=k_max, rho=2.0 ** i,
                                          beta=2.0 ** j, gamma=None)
                    tasks.append((_image_task, dict(
                        method="l1l2", truth=truth, op_spec=spec, params=params, alpha=0.5,
                        sart_iters=0,
                        labels=dict(app=c["app"], lam=lam, k_max=k_max, rho=2.0 ** i,
                                    beta=2.0 ** j),
                        trace_id=f"l1l2_lam{lam:g}_k{k_max}_i{i}_j{j}")))
    return _execute(tasks, ["app", "lam", "k_max", "rho", "beta", "re", "psnr", "iters",
                            "seconds"])


def _ablation_task(truth, op_spec, params, labels, trace_id):
    op = _build_operator(op_spec)
    problem = Problem(op, op.apply(truth))
    t0 = time.perf_counter()
    res = solve_l1_over_l2(problem, params, ground_truth=truth)
    m = _metrics(res.u, truth, res.diagnostics, t0)
    re_trace = res.diagnostics.re_trace
    # the trace holds unclipped iterates; the returned one is clipped to the box
    row = dict(labels, re=m["re"], re_min=float(min(min(re_trace), m["re"])), iters=m["iters"],
               seconds=m["seconds"])
    return [(row, trace_id, _trace("l1l2", params, res.diagnostics))]


def run_ablations(config):
    """Box constraint on/off and inner iteration count (jMax) studies for L1/L2.

    Columns: app, study, box, j_max, re, re_min, iters, seconds. ``re`` is the
    final relative error and ``re_min`` the smallest along the run.
    """
    c = config
    truth = _phantom(c)
    spec = _app_operator_spec(c, truth.shape)
    base = c.params_for("l1l2")
    tasks = []
    for study in c["studies"]:
        if study == "box":
            settings = [(base.box, base.j_max), (None, base.j_max)]
        elif study == "jmax":
            settings = [(base.box, j) for j in c["j_maxes"]]
        else:
            raise ValueError(f"unknown ablation study {study!r}")
        for box, j_max in settings:
            params = base.with_(box=box, j_max=j_max)
            box_label = "none" if box is None else f"{box[0]:g}:{box[1]:g}"
            tasks.append((_ablation_task, dict(
                truth=truth, op_spec=spec, params=params,
                labels=dict(app=c["app"], study=study, box=box_label, j_max=j_max),
                trace_id=f"{study}_box{box_label.replace(':', '-')}_j{j_max}")))
    return _execute(tasks, ["app", "study", "box", "j_max", "re", "re_min", "iters", "seconds"])


RUNNERS = {
    "onebar": run_onebar_sweep,
    "twobar": run_twobar_sweep,
    "superres": run_superres,
    "mri": run_mri_radial,
    "ct": run_ct_limited,
    "sensitivity": run_sensitivity_grid,
    "ablation": run_ablations,
}


def run_experiment(config):
    """Dispatch on ``config.kind``."""
    log.info("running %s", config.kind)
    return RUNNERS[config.kind](config)
