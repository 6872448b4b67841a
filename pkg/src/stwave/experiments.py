"""
Experiment runners producing tabular results.

Each runner takes an :class:`ExperimentConfig` and returns an
:class:`ExperimentResult` whose rows are dictionaries keyed by the result
columns.  Rows come out in configuration order; nothing here touches the
file system (see :mod:`stwave.cli`).
"""
from dataclasses import dataclass, field, replace

import numpy as np

from .analysis import (convergence_rates, energy_trace, phase_errors, relative_difference,
                       stability_bound_check)
from .estimator import SpaceTimeWaveSolver
from .exceptions import InvalidParameterError, NumericalError
from .geometry import unit_box
from .problem import WaveProblem, make_problem

__all__ = ["KINDS", "ExperimentConfig", "ExperimentResult", "run_experiment", "random_smooth_source"]

KINDS = ("convergence", "cfl-sweep", "delta-sweep", "energy", "dispersion", "scattering",
         "disc-velocity", "stability-bound")

DEFAULT_PROBLEM = {
    "convergence": "standing_wave",
    "cfl-sweep": "standing_wave",
    "delta-sweep": "standing_wave",
    "energy": "energy_wave",
    "dispersion": "periodic_tent",
    "scattering": "scattering",
    "disc-velocity": "discontinuous_velocity",
    "stability-bound": None,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment.

    Mesh cases are ``zip(n_space, n_time)``; a single ``n_time`` is
    broadcast, and ``ht_over_hs`` derives ``n_time`` from ``n_space`` on
    the unit interval instead.  ``cfl-sweep`` uses ``n_time[0]`` together
    with ``ratios`` (``h_t / h_s``).  In 2D the second direction gets
    ``space_aspect`` times as many elements as the first.  ``solver`` is
    passed to :class:`~stwave.estimator.SpaceTimeWaveSolver`.
    """

    name: str
    kind: str
    problem: str = None
    problem_args: dict = field(default_factory=dict)
    degrees: tuple = (2,)
    degree_time: int = None
    regularity_space: int = None
    regularity_time: int = None
    method: str = "iga-stab"
    delta: float = None
    n_space: tuple = ()
    n_time: tuple = ()
    ht_over_hs: float = None
    ratios: tuple = ()
    deltas: tuple = ()
    c0_breakpoints: tuple = (0.5,)
    variants: tuple = ("c0", "max")
    modes: tuple = (1, 2, 3, 5)
    n_samples: int = 201
    samples: int = 5
    seed: int = 0
    assembly: str = "auto"
    solver: str = "auto"
    space_aspect: int = 1
    threads: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameterError(f"unknown experiment kind {self.kind!r}")
        for p in self.degrees:
            for q in (self.regularity_space, self.regularity_time):
                if q is not None and q > p - 1:
                    raise InvalidParameterError(f"regularity {q} exceeds degree - 1 = {p - 1}")
        if self.delta is not None and not self.delta > 0:
            raise InvalidParameterError("delta must be positive")
        if self.kind != "cfl-sweep" and not self.n_space:
            raise InvalidParameterError("n_space must list at least one mesh")
        if self.kind == "cfl-sweep" and (not self.n_time or not self.ratios):
            raise InvalidParameterError("cfl-sweep needs n_time and ratios")
        if int(self.space_aspect) < 1:
            raise InvalidParameterError("space_aspect must be a positive integer")
        if self.kind == "delta-sweep" and not self.deltas:
            raise InvalidParameterError("delta-sweep needs deltas")


@dataclass
class ExperimentResult:
    name: str
    kind: str
    columns: list
    rows: list
    failures: list = field(default_factory=list)


# ----------------------------------------------------------------------
def _problem(cfg):
    name = cfg.problem or DEFAULT_PROBLEM[cfg.kind]
    return make_problem(name, **cfg.problem_args)


def _mesh_cases(cfg, T):
    ns = list(cfg.n_space)
    if cfg.ht_over_hs is not None:
        nt = [max(1, int(round(T * n / cfg.ht_over_hs))) for n in ns]
    elif len(cfg.n_time) == len(ns):
        nt = list(cfg.n_time)
    elif len(cfg.n_time) == 1:
        nt = list(cfg.n_time) * len(ns)
    elif not cfg.n_time:
        nt = ns
    else:
        raise InvalidParameterError("n_time must have one entry or as many as n_space")
    return list(zip(ns, nt))


def _estimator(cfg, p, ns, nt, **overrides):
    if cfg.space_aspect != 1:
        ns = (ns, int(cfg.space_aspect) * ns)
    params = dict(degree=p, degree_time=cfg.degree_time, n_elements_space=ns, n_elements_time=nt,
                  regularity_space=cfg.regularity_space, regularity_time=cfg.regularity_time,
                  method=cfg.method, delta=cfg.delta, assembly=cfg.assembly, threads=cfg.threads,
                  solver=cfg.solver, fallback="exact")
    params.update(overrides)
    return SpaceTimeWaveSolver(**params)


_ERROR_COLUMNS = ["h_t", "h_s", "ratio", "n_dof", "l2", "h1", "l2_final", "h1_final", "residual",
                  "blow_up", "status"]


def _solve_row(est, problem, base, failures):
    """Fit and evaluate; solver failures become rows with infinite errors."""
    try:
        est.fit(problem)
    except NumericalError as exc:
        failures.append(f"{base}: {exc}")
        nan = float("inf")
        trial, _ = est.build_spaces(problem)
        return dict(base, h_t=trial.h_t, h_s=trial.h_s, ratio=trial.h_t / trial.h_s,
                    n_dof=trial.n_dof, l2=nan, h1=nan, l2_final=nan, h1_final=nan,
                    residual=float("nan"), blow_up=True, status="singular"), None
    row = dict(base)
    if problem.exact is not None:
        rep = est.error_report()
        row.update(h_t=rep.h_t, h_s=rep.h_s, ratio=rep.h_t / rep.h_s, n_dof=rep.n_dof, l2=rep.l2,
                   h1=rep.h1, l2_final=rep.l2_final, h1_final=rep.h1_final, blow_up=rep.blow_up)
    else:
        tr = est.system_.trial
        row.update(h_t=tr.h_t, h_s=tr.h_s, ratio=tr.h_t / tr.h_s, n_dof=est.n_dof_)
    row.update(residual=est.residual_["residual"], status=est.status_)
    return row, est


def _add_rates(rows, group_keys, h_key="h_s", err_keys=(("l2", "rate_l2"), ("h1", "rate_h1"))):
    groups = {}
    for r in rows:
        groups.setdefault(tuple(r[k] for k in group_keys), []).append(r)
    for members in groups.values():
        for err, col in err_keys:
            members[0][col] = float("nan")
            for a, b in zip(members[:-1], members[1:]):
                try:
                    b[col] = float(convergence_rates([(a[h_key], a[err]), (b[h_key], b[err])])[0])
                except (ValueError, ArithmeticError):
                    b[col] = float("nan")


def _base(cfg, p, **extra):
    return dict(experiment=cfg.name, method=cfg.method, p=p,
                p_t=cfg.degree_time if cfg.degree_time is not None else p,
                delta=cfg.delta if cfg.delta is not None else (
                    10.0 ** (-(cfg.degree_time or p)) if cfg.method == "iga-stab" else float("nan")),
                **extra)


_HEAD = ["experiment", "method", "p", "p_t", "delta"]


# ----------------------------------------------------------------------
def _convergence(cfg):
    problem = _problem(cfg)
    rows, failures = [], []
    for p in cfg.degrees:
        for ns, nt in _mesh_cases(cfg, problem.T):
            rows.append(_solve_row(_estimator(cfg, p, ns, nt), problem, _base(cfg, p), failures)[0])
    _add_rates(rows, ["p"])
    return _HEAD + _ERROR_COLUMNS + ["rate_l2", "rate_h1"], rows, failures


def _cfl_sweep(cfg):
    problem = _problem(cfg)
    nt = cfg.n_time[0]
    rows, failures = [], []
    for p in cfg.degrees:
        for r in cfg.ratios:
            ns = max(1, int(round(r * nt / problem.T)))
            rows.append(_solve_row(_estimator(cfg, p, ns, nt), problem,
                                   _base(cfg, p, target_ratio=float(r)), failures)[0])
    return _HEAD + ["target_ratio"] + _ERROR_COLUMNS, rows, failures


def _delta_sweep(cfg):
    problem = _problem(cfg)
    cases = _mesh_cases(cfg, problem.T)
    rows, failures = [], []
    for p in cfg.degrees:
        for ns, nt in cases:
            for d in cfg.deltas:
                est = _estimator(cfg, p, ns, nt, method="iga-stab", delta=float(d))
                base = dict(_base(replace(cfg, method="iga-stab"), p), delta=float(d))
                rows.append(_solve_row(est, problem, base, failures)[0])
    return _HEAD + _ERROR_COLUMNS, rows, failures


def _energy(cfg):
    problem = _problem(cfg)
    E = problem.exact.meta.get("energy") if problem.exact is not None else None
    times = np.linspace(0.0, problem.T, cfg.n_samples)
    rows, failures = [], []
    for p in cfg.degrees:
        for ns, nt in _mesh_cases(cfg, problem.T):
            summary, est = _solve_row(_estimator(cfg, p, ns, nt), problem, _base(cfg, p), failures)
            if est is None:
                continue
            tr = energy_trace(est.solution_, times, exact_energy=E)
            for t, e, rel, s in zip(tr.times, tr.energy, tr.rel_error, tr.sign):
                rows.append(dict(_base(cfg, p), h_t=summary["h_t"], h_s=summary["h_s"],
                                 n_dof=summary["n_dof"], t=t, energy=e, exact=E, rel_error=rel,
                                 sign=int(s), status=summary["status"]))
    cols = _HEAD + ["h_t", "h_s", "n_dof", "t", "energy", "exact", "rel_error", "sign", "status"]
    return cols, rows, failures


def _dispersion(cfg):
    problem = _problem(cfg)
    times = np.linspace(0.0, problem.T, cfg.n_samples)
    rows, failures = [], []
    for p in cfg.degrees:
        for ns, nt in _mesh_cases(cfg, problem.T):
            summary, est = _solve_row(_estimator(cfg, p, ns, nt), problem, _base(cfg, p), failures)
            if est is None:
                continue
            ph = phase_errors(est.solution_, list(cfg.modes), times, problem.exact.fourier)
            for i, n in enumerate(ph.modes):
                exact = np.asarray(problem.exact.fourier(n, times))
                for j, t in enumerate(times):
                    rows.append(dict(_base(cfg, p), h_t=summary["h_t"], h_s=summary["h_s"],
                                     n_dof=summary["n_dof"], mode=int(n), t=t,
                                     phase_error=ph.errors[i, j], abs_exact=abs(exact[j]),
                                     abs_discrete=abs(ph.coefficients[i, j]),
                                     status=summary["status"]))
    cols = _HEAD + ["h_t", "h_s", "n_dof", "mode", "t", "phase_error", "abs_exact", "abs_discrete",
                    "status"]
    return cols, rows, failures


def _scattering(cfg):
    """Self-convergence against the last (finest) mesh of the list."""
    problem = _problem(cfg)
    cases = _mesh_cases(cfg, problem.T)
    if len(cases) < 2:
        raise InvalidParameterError("scattering needs at least two meshes (the last is the reference)")
    rows, failures = [], []
    for p in cfg.degrees:
        ref_row, ref = _solve_row(_estimator(cfg, p, *cases[-1]), problem, _base(cfg, p), failures)
        group = []
        for ns, nt in cases[:-1]:
            row, est = _solve_row(_estimator(cfg, p, ns, nt), problem, _base(cfg, p), failures)
            if est is not None and ref is not None:
                row["l2_self"] = relative_difference(est.solution_, ref.solution_)
            else:
                row["l2_self"] = float("inf")
            row["reference"] = 0
            group.append(row)
        _add_rates(group, ["p"], err_keys=(("l2_self", "rate_l2"),))
        ref_row.update(l2_self=0.0, reference=1, rate_l2=float("nan"))
        rows.extend(group + [ref_row])
    cols = _HEAD + ["h_t", "h_s", "ratio", "n_dof", "reference", "l2_self", "rate_l2", "residual",
                    "status"]
    return cols, rows, failures


def _disc_velocity(cfg):
    problem = _problem(cfg)
    rows, failures = [], []
    for variant in cfg.variants:
        if variant not in ("c0", "max"):
            raise InvalidParameterError(f"unknown variant {variant!r}; use c0 or max")
        c0 = tuple(cfg.c0_breakpoints) if variant == "c0" else ()
        for p in cfg.degrees:
            for ns, nt in _mesh_cases(cfg, problem.T):
                est = _estimator(cfg, p, ns, nt, c0_breakpoints=c0)
                rows.append(_solve_row(est, problem, _base(cfg, p, variant=variant), failures)[0])
    _add_rates(rows, ["variant", "p"])
    return _HEAD + ["variant"] + _ERROR_COLUMNS + ["rate_l2", "rate_h1"], rows, failures


def random_smooth_source(rng, dim=1, T=1.0, modes=3):
    """``f = sum a_jk sin(j pi x) [sin(l pi y)] cos(k pi t / T)`` with normal ``a``."""
    shape = (modes,) * dim + (modes + 1,)
    a = rng.standard_normal(shape)

    def f(x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        out = np.zeros(x.shape[0])
        for idx in np.ndindex(*shape):
            term = a[idx] * np.cos(idx[-1] * np.pi * t / T)
            for d in range(dim):
                term = term * np.sin((idx[d] + 1) * np.pi * x[:, d])
            out += term
        return out

    return f


def _stability_bound(cfg):
    T = float(cfg.problem_args.get("T", 1.0))
    dim = int(cfg.problem_args.get("dim", 1))
    rng = np.random.default_rng(cfg.seed)
    rows, failures = [], []
    for p in cfg.degrees:
        for ns, nt in _mesh_cases(cfg, T):
            for k in range(cfg.samples):
                f = random_smooth_source(rng, dim, T)
                problem = WaveProblem(unit_box(dim, T=T), source=f, name="random_source")
                row, est = _solve_row(_estimator(cfg, p, ns, nt), problem,
                                      _base(cfg, p, sample=k, seed=cfg.seed), failures)
                row["bound_ratio"] = (stability_bound_check(est.solution_, f, T)
                                      if est is not None else float("inf"))
                rows.append(row)
    cols = _HEAD + ["sample", "seed", "h_t", "h_s", "ratio", "n_dof", "bound_ratio", "residual",
                    "status"]
    return cols, rows, failures


_RUNNERS = {
    "convergence": _convergence,
    "cfl-sweep": _cfl_sweep,
    "delta-sweep": _delta_sweep,
    "energy": _energy,
    "dispersion": _dispersion,
    "scattering": _scattering,
    "disc-velocity": _disc_velocity,
    "stability-bound": _stability_bound,
}


def run_experiment(cfg):
    """Run one configured experiment.

    Returns
    -------
    ExperimentResult
        ``failures`` lists solver failures (singular systems without an
        exact fallback); their rows carry infinite errors.
    """
    columns, rows, failures = _RUNNERS[cfg.kind](cfg)
    return ExperimentResult(cfg.name, cfg.kind, columns, rows, failures)
