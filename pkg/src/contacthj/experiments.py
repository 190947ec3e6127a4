"""Reproducible experiment drivers: parameter sweeps, stability tables, CSV output.

Every driver takes explicit parameters and a seeded RNG where randomness is
involved, so repeated runs produce byte-identical CSV files.  Floats are
serialized with repr, which round-trips exactly.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, replace

import numpy as np

from .hamiltonians import model_from_name
from .mather import classify_stability, measure_ensemble, uniqueness_check
from .semigroup import GridFunction, StepScheme, backward_step
from .weakkam import extract_graph, find_stationary, mane_filter

_CONFIG_TYPES = {
    "model": str,
    "a": float,
    "b": float,
    "n": int,
    "dt": float,
    "T": float,
    "delta": float,
    "seed": int,
    "x0": float,
    "p0": float,
    "u0": float,
    "t": float,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat key=value configuration shared by the command line drivers.

    Files use one ``key=value`` pair per line; blank lines and lines starting
    with '#' are skipped.  Unknown keys raise, so typos fail loudly.
    """

    model: str = "example3"
    a: float = 0.0
    b: float = 2.0
    n: int = 128
    dt: float = 2e-3
    T: float = 10.0
    delta: float = 0.01
    seed: int = 0
    x0: float = 0.0
    p0: float = 0.0
    u0: float = 1.0
    t: float = 0.5

    @classmethod
    def from_text(cls, text):
        kw = {}
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"expected key=value, got {line!r}")
            key, _, val = line.partition("=")
            key = key.strip()
            if key not in _CONFIG_TYPES:
                raise ValueError(f"unknown config key {key!r}")
            kw[key] = _CONFIG_TYPES[key](val.strip())
        return cls(**kw)

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            return cls.from_text(fh.read())

    def updated(self, **kw):
        """Return a copy with the non-None entries of kw applied."""
        clean = {}
        for key, val in kw.items():
            if val is None:
                continue
            if key not in _CONFIG_TYPES:
                raise ValueError(f"unknown config key {key!r}")
            clean[key] = _CONFIG_TYPES[key](val)
        return replace(self, **clean)

    def to_text(self):
        lines = []
        for key in sorted(_CONFIG_TYPES):
            val = getattr(self, key)
            lines.append(f"{key}={_fmt(val)}")
        return "\n".join(lines) + "\n"

    def hash(self):
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    def build_model(self):
        return model_from_name(self.model, a=self.a, b=self.b)

    def build_scheme(self, model):
        return StepScheme.for_model(model, dt=self.dt)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows, config_hash):
    """Write rows to path with a config-hash comment line on top.

    Floats go through repr so reruns of the same configuration produce
    byte-identical files.
    """
    lines = [f"# config_hash={config_hash}", ",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Lyapunov probe
# ---------------------------------------------------------------------------


@dataclass
class LyapunovRun:
    """Sup-distance traces of a +-delta perturbation pair and the fitted rate.

    rate is the slope of log(max(d_plus, d_minus)) over the fit window;
    negative means the perturbations contract back to the reference.
    """

    times: np.ndarray
    d_plus: np.ndarray
    d_minus: np.ndarray
    rate: float
    grew: bool
    window: tuple
    delta: float

    @property
    def d_max(self):
        return np.maximum(self.d_plus, self.d_minus)


def run_lyapunov(model, scheme, reference: GridFunction, *, delta=0.01,
                 T=20.0, sample_every=0.5, excursion=None) -> LyapunovRun:
    """Perturb a stationary profile by +-delta and track the sup distance.

    Both signs are evolved because instability is frequently one-sided: the
    min-coupling of the backward operator caps upward bumps, so a profile can
    swallow +delta while -delta runs away.  The reported series is sampled
    every ``sample_every`` time units and the run stops early once
    max(d_plus, d_minus) passes ``excursion`` (default max(1, 100 delta)).

    The rate comes from a least-squares line through log d_max.  For decaying
    runs the fit skips t < 1 (transient) and points within a factor 20 of the
    observed floor (discrete fixed point offset); for growing runs it uses
    the stretch between 2 delta and the excursion cap.
    """
    scheme.validate(model)
    if delta <= 0:
        raise ValueError("delta must be positive")
    if excursion is None:
        excursion = max(1.0, 100.0 * delta)
    stride = max(1, int(round(sample_every / scheme.dt)))
    n_samples = int(round(T / sample_every))
    wp = GridFunction(reference.n, reference.values + delta)
    wm = GridFunction(reference.n, reference.values - delta)
    times = [0.0]
    dp = [delta]
    dm = [delta]
    for k in range(1, n_samples + 1):
        for _ in range(stride):
            wp = backward_step(model, scheme, wp)
            wm = backward_step(model, scheme, wm)
        dpk = wp.sup_distance(reference) if np.all(np.isfinite(wp.values)) else np.inf
        dmk = wm.sup_distance(reference) if np.all(np.isfinite(wm.values)) else np.inf
        times.append(k * sample_every)
        dp.append(dpk)
        dm.append(dmk)
        if max(dpk, dmk) > excursion:
            break
    t = np.array(times)
    d = np.maximum(np.array(dp), np.array(dm))
    good = np.isfinite(d) & (d > 0)
    grew = bool(d[-1] > min(excursion, 10.0 * delta)) if np.isfinite(d[-1]) else True
    if grew:
        mask = good & (d >= 2.0 * delta) & (d <= excursion) & (t > 0)
        if mask.sum() < 2:
            mask = good & (t >= t[-1] / 2.0)
    else:
        floor = float(d[good].min())
        mask = good & (t >= 1.0) & (d >= 20.0 * floor)
        if mask.sum() < 3:
            mask = good & (t >= 1.0)
        if mask.sum() < 2:
            mask = good
    rate = float(np.polyfit(t[mask], np.log(d[mask]), 1)[0])
    window = (float(t[mask][0]), float(t[mask][-1]))
    return LyapunovRun(times=t, d_plus=np.array(dp), d_minus=np.array(dm),
                       rate=rate, grew=grew, window=window, delta=delta)


def lyapunov_csv_rows(run: LyapunovRun):
    header = ["t", "d_plus", "d_minus", "d_max"]
    dmax = run.d_max
    rows = [(run.times[i], run.d_plus[i], run.d_minus[i], dmax[i])
            for i in range(len(run.times))]
    return header, rows


# ---------------------------------------------------------------------------
# Stability table over the forcing family
# ---------------------------------------------------------------------------

TABLE1_CELLS = [
    (0.0, 2.0), (0.0, 1.0), (0.0, 0.5), (0.0, -1.0),
    (1.0, 2.0), (1.0, 0.0), (1.0, 0.5), (1.0, -1.0),
]

_EXPECTED = {
    (0.0, 2.0): ("asymptotically_stable", True),
    (1.0, 2.0): ("asymptotically_stable", True),
    (0.0, 1.0): ("critical", False),
    (1.0, 0.0): ("critical", False),
    (0.0, 0.5): ("unstable", False),
    (0.0, -1.0): ("unstable", False),
    (1.0, -1.0): ("unstable", False),
    (1.0, 0.5): ("asymptotically_stable", False),
}


@dataclass
class Table1Cell:
    a: float
    b: float
    certified: bool
    residual: float
    verdict: str
    expected_verdict: str
    unique: bool
    expected_unique: bool
    match: bool
    a_min: float
    a_max: float
    n_measures: int
    kinds: str
    route: str
    lyapunov_rate: float
    rate_consistent: bool
    seconds: float


@dataclass
class Table1Result:
    cells: list
    seconds: float

    @property
    def all_match(self):
        return all(c.match for c in self.cells)


def _rate_consistent(verdict, rate, crit_tol):
    if verdict == "asymptotically_stable":
        return rate < -crit_tol
    if verdict == "unstable":
        return rate > crit_tol
    return abs(rate) <= 0.25


def run_table1(*, n=128, dt=2e-3, dt_flow=1e-3, lyap_T=12.0, delta=0.01,
               crit_tol=1e-2, cells=None, log=None) -> Table1Result:
    """Classify the zero solution across the (a, b) forcing grid.

    For each cell: certify that the zero profile is stationary, sample its
    graph, keep the flow-invariant part, build the invariant measures,
    classify stability from the averaged coupling coefficient, run the
    uniqueness criteria, and confirm the verdict with a perturbation probe.
    ``match`` compares (verdict, uniqueness) against the expected pair.
    """
    t_start = time.perf_counter()
    out = []
    for a, b in (TABLE1_CELLS if cells is None else cells):
        t0 = time.perf_counter()
        model = model_from_name("example3", a=a, b=b)
        scheme = StepScheme.for_model(model, dt=dt)
        stat = find_stationary(model, scheme, GridFunction.constant(n, 0.0),
                               T_max=5.0, tol=1e-3)
        certified = bool(stat.converged)
        sol = stat.solution
        graph = extract_graph(model, sol, dt=dt, source=f"a={a} b={b}")
        kept = mane_filter(model, graph, dt=dt_flow)
        measures = measure_ensemble(model, kept, dt=dt_flow)
        report = classify_stability(model, measures, crit_tol=crit_tol)
        crit = uniqueness_check(model, crit_tol=crit_tol)
        lyap = run_lyapunov(model, scheme, sol, delta=delta, T=lyap_T)
        expected_verdict, expected_unique = _EXPECTED.get(
            (a, b), (report.verdict, crit.passed))
        cell = Table1Cell(
            a=a, b=b,
            certified=certified,
            residual=stat.residual,
            verdict=report.verdict,
            expected_verdict=expected_verdict,
            unique=crit.passed,
            expected_unique=expected_unique,
            match=(certified and report.verdict == expected_verdict
                   and crit.passed == expected_unique),
            a_min=report.a_min,
            a_max=report.a_max,
            n_measures=len(measures),
            kinds="+".join(sorted({m.kind for m in measures})),
            route=crit.route,
            lyapunov_rate=lyap.rate,
            rate_consistent=_rate_consistent(report.verdict, lyap.rate, crit_tol),
            seconds=time.perf_counter() - t0,
        )
        out.append(cell)
        if log is not None:
            flag = "ok" if cell.match else "MISMATCH"
            log(f"[{flag}] a={a:g} b={b:g}: verdict={cell.verdict} "
                f"unique={cell.unique} route={cell.route} "
                f"a_min={cell.a_min:.3f} a_max={cell.a_max:.3f} "
                f"rate={cell.lyapunov_rate:+.3f} ({cell.seconds:.1f}s)")
    return Table1Result(cells=out, seconds=time.perf_counter() - t_start)


def table1_csv_rows(result: Table1Result):
    header = ["a", "b", "certified", "verdict", "expected_verdict", "unique",
              "expected_unique", "match", "a_min", "a_max", "n_measures",
              "kinds", "route", "lyapunov_rate", "rate_consistent"]
    rows = [(c.a, c.b, c.certified, c.verdict, c.expected_verdict, c.unique,
             c.expected_unique, c.match, c.a_min, c.a_max, c.n_measures,
             c.kinds, c.route, c.lyapunov_rate, c.rate_consistent)
            for c in result.cells]
    return header, rows


# ---------------------------------------------------------------------------
# Uniqueness sweep
# ---------------------------------------------------------------------------


@dataclass
class SweepResult:
    """Clustered limits of the backward iteration from random initial data.

    A single cluster is consistent with uniqueness on the sampled data but
    proves nothing beyond it; see ``caveat``.
    """

    n_initials: int
    n_converged: int
    n_clusters: int
    labels: list
    residuals: list
    cluster_sup_norms: list
    max_spread: float
    caveat: str = ("finitely many initial profiles can exhibit non-uniqueness "
                   "but never prove uniqueness")


def run_uniqueness_sweep(*, model_name="example2", n_initials=10, n=128,
                         dt=2e-3, seed=0, T_max=40.0, tol=1e-3,
                         cluster_tol=5e-3, log=None) -> SweepResult:
    """Drive random low-frequency initial profiles to their stationary limits.

    Initial data are trigonometric polynomials rescaled into [-1, 1].  The
    converged limits are clustered by sup distance; distinct clusters would
    exhibit non-uniqueness of the stationary solution.
    """
    model = model_from_name(model_name)
    scheme = StepScheme.for_model(model, dt=dt)
    rng = np.random.default_rng(seed)
    x = GridFunction.make_nodes(n)
    solutions = []
    labels = []
    residuals = []
    reps = []
    for i in range(n_initials):
        c = rng.uniform(-1.0, 1.0, size=5)
        vals = (c[0] + c[1] * np.cos(x) + c[2] * np.sin(x)
                + 0.5 * c[3] * np.cos(2 * x) + 0.5 * c[4] * np.sin(2 * x))
        peak = float(np.max(np.abs(vals)))
        if peak > 1.0:
            vals = vals / peak
        res = find_stationary(model, scheme, GridFunction(n, vals),
                              T_max=T_max, tol=tol)
        residuals.append(res.residual)
        if not res.converged:
            labels.append(-1)
            if log is not None:
                log(f"run {i}: no convergence (divergence={res.divergence})")
            continue
        sol = res.solution
        solutions.append(sol)
        for j, rep in enumerate(reps):
            if sol.sup_distance(rep) <= cluster_tol:
                labels.append(j)
                break
        else:
            reps.append(sol)
            labels.append(len(reps) - 1)
        if log is not None:
            log(f"run {i}: converged to cluster {labels[-1]} "
                f"(residual {res.residual:.2e})")
    max_spread = 0.0
    for sol, lab in zip(solutions, (l for l in labels if l >= 0)):
        max_spread = max(max_spread, sol.sup_distance(reps[lab]))
    return SweepResult(
        n_initials=n_initials,
        n_converged=len(solutions),
        n_clusters=len(reps),
        labels=labels,
        residuals=residuals,
        cluster_sup_norms=[r.sup_norm() for r in reps],
        max_spread=max_spread,
    )


def sweep_csv_rows(result: SweepResult):
    header = ["run", "converged", "cluster", "residual"]
    rows = [(i, lab >= 0, lab, result.residuals[i])
            for i, lab in enumerate(result.labels)]
    return header, rows
