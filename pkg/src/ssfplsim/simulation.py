"""Monte Carlo study: data-generating process, accuracy metrics and replicate runner.

Each replicate ``k`` of a scenario draws from its own generator seeded by
``SeedSequence([seed, k])``, so results do not depend on how replicates are
scheduled across workers.
"""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .estimator import FitConfig, fit_ssfplsim
from .exceptions import NoFeasibleFit, SSFPLSIMError
from .functional import (
    BSplineBasis,
    Direction,
    FunctionalSample,
    Grid,
    build_bspline_basis,
    calibrate_direction,
    project,
)
from .link import LinkModel, estimate_link_many

__all__ = [
    "Scenario",
    "ScenarioReport",
    "TRUE_BETA_NONZERO",
    "TRUE_DIRECTION_SEED",
    "true_beta",
    "gen_scalar_covariates",
    "gen_curves",
    "true_direction",
    "regression_function",
    "gen_response",
    "generate_replicate",
    "metric_selection",
    "metric_beta_se",
    "metric_theta_se",
    "metric_link_msep",
    "run_replicate",
    "run_scenario",
    "paper_scenarios",
]

log = logging.getLogger(__name__)

TRUE_BETA_NONZERO = {0: 3.0, 1: 1.5, 4: 2.0}
TRUE_DIRECTION_SEED = (0.0, 1.0, 0.0, 1.0, -1.0, -1.0)
SPLINE_ORDER = 3
SPLINE_KNOTS = 3


@dataclass(frozen=True)
class Scenario:
    n: int
    p: int
    rho: float
    c: float
    M: int = 100
    seed: int = 0
    grid_size: int = 100
    test_size: int = 100
    name: str = ""

    def __post_init__(self):
        if self.n < 10:
            raise ValueError("scenario needs n >= 10")
        if self.p < 5:
            raise ValueError("scenario needs p >= 5 so that the true support exists")
        if self.M < 1:
            raise ValueError("scenario needs M >= 1")
        if not 0 <= self.rho < 1:
            raise ValueError("rho must lie in [0, 1)")
        if not self.c >= 0:
            raise ValueError("c must be non-negative")

    @property
    def label(self) -> str:
        return self.name or f"n{self.n}_p{self.p}_rho{self.rho:g}_c{self.c:g}"


def true_beta(p: int) -> np.ndarray:
    beta = np.zeros(p)
    for j, v in TRUE_BETA_NONZERO.items():
        beta[j] = v
    return beta


def gen_scalar_covariates(n: int, p: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """Rows from ``N(0, Sigma)`` with ``Sigma_jk = rho^|j-k|`` via the AR(1) recursion."""
    if not abs(rho) < 1:
        raise ValueError("|rho| must be < 1")
    z = rng.standard_normal((n, p))
    x = np.empty_like(z)
    x[:, 0] = z[:, 0]
    s = math.sqrt(1.0 - rho * rho)
    for j in range(1, p):
        x[:, j] = rho * x[:, j - 1] + s * z[:, j]
    return x


def gen_curves(n: int, grid: Grid, rng: np.random.Generator | None = None, coefficients=None) -> FunctionalSample:
    """``X(t) = a cos(2 pi t) + b sin(4 pi t) + 2 c (t - 0.25)(t - 0.5)``, ``a, b, c ~ U[0, 10]``.

    ``coefficients`` (shape ``(n, 3)``) fixes ``(a, b, c)`` instead of drawing them.
    """
    if coefficients is None:
        coefficients = rng.uniform(0.0, 10.0, size=(n, 3))
    coefficients = np.asarray(coefficients, dtype=float).reshape(n, 3)
    t = grid.points
    basis = np.vstack([np.cos(2 * np.pi * t), np.sin(4 * np.pi * t), 2.0 * (t - 0.25) * (t - 0.5)])
    return FunctionalSample(coefficients @ basis, grid)


def true_direction(basis: BSplineBasis, rule: str = "gauss6") -> Direction:
    if basis.order != SPLINE_ORDER or basis.interior_knots != SPLINE_KNOTS:
        raise ValueError("the simulation direction is defined for order 3 with 3 interior knots")
    return calibrate_direction(TRUE_DIRECTION_SEED, basis, rule)


def regression_function(x, sample: FunctionalSample, theta0: Direction, beta0) -> np.ndarray:
    """Noiseless regression ``X beta0 + <theta0, X>^3``."""
    return np.asarray(x, dtype=float) @ np.asarray(beta0, dtype=float) + project(sample, theta0) ** 3


def gen_response(x, sample, theta0, beta0, c: float, rng: np.random.Generator) -> np.ndarray:
    """Response with Gaussian noise of variance ``c`` times the empirical variance
    of the regression values."""
    reg = regression_function(x, sample, theta0, beta0)
    var_r = float(np.var(reg, ddof=1))
    if not var_r > 0:
        raise ValueError("regression values have zero variance")
    if c == 0:
        return reg.copy()
    return reg + rng.normal(0.0, math.sqrt(c * var_r), size=reg.size)


@dataclass(frozen=True, eq=False)
class ReplicateData:
    x: np.ndarray
    curves: FunctionalSample
    y: np.ndarray
    test_curves: FunctionalSample


def _replicate_rng(seed: int, k: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(k)]))


def generate_replicate(s: Scenario, k: int, theta0: Direction, grid: Grid) -> ReplicateData:
    rng = _replicate_rng(s.seed, k)
    x = gen_scalar_covariates(s.n, s.p, s.rho, rng)
    curves = gen_curves(s.n, grid, rng)
    y = gen_response(x, curves, theta0, true_beta(s.p), s.c, rng)
    test = gen_curves(s.test_size, grid, rng)
    return ReplicateData(x, curves, y, test)


# --------------------------------------------------------------------------
# metrics


def metric_selection(beta_hat, beta0):
    """Percent of true zeros kept at zero and percent of true nonzeros zeroed.

    A percentage whose reference set is empty is returned as ``None``.
    """
    beta_hat = np.asarray(beta_hat, dtype=float)
    beta0 = np.asarray(beta0, dtype=float)
    if beta_hat.shape != beta0.shape:
        raise ValueError("coefficient vectors differ in length")
    zero0, zero_hat = beta0 == 0, beta_hat == 0
    correct = 100.0 * np.sum(zero0 & zero_hat) / np.sum(zero0) if zero0.any() else None
    incorrect = 100.0 * np.sum(~zero0 & zero_hat) / np.sum(~zero0) if (~zero0).any() else None
    return (None if correct is None else float(correct),
            None if incorrect is None else float(incorrect))


def metric_beta_se(beta_hat, beta0) -> float:
    d = np.asarray(beta_hat, dtype=float) - np.asarray(beta0, dtype=float)
    return float(d @ d)


def metric_theta_se(theta_hat: Direction, theta0: Direction) -> float:
    """Trapezoid approximation of the integrated squared difference of the directions."""
    diff = theta_hat.curve - theta0.curve
    return float(diff.grid.weights @ (diff.values ** 2))


def cube(u):
    return np.asarray(u, dtype=float) ** 3


def metric_link_msep(model: LinkModel, test: FunctionalSample, theta0: Direction, m_true=cube,
                     return_excluded: bool = False):
    """Mean squared difference between ``m_hat(<theta_hat, X>)`` and ``m(<theta0, X>)``
    over the test curves; curves with an empty neighborhood are skipped."""
    est, ok = estimate_link_many(model, test)
    if not ok.any():
        raise NoFeasibleFit("no test curve has a non-empty neighborhood")
    truth = m_true(project(test, theta0))
    val = float(np.mean((est[ok] - truth[ok]) ** 2))
    if return_excluded:
        return val, int(np.sum(~ok))
    return val


# --------------------------------------------------------------------------
# replicate / scenario runner


def _setup(s: Scenario):
    grid = Grid.uniform(0.0, 1.0, s.grid_size)
    basis = build_bspline_basis(SPLINE_ORDER, SPLINE_KNOTS, grid)
    return grid, basis


def run_replicate(s: Scenario, k: int, fit_config: FitConfig | None = None,
                  candidates=None, return_fit: bool = False):
    """Generate replicate ``k``, fit it and compute all metrics.

    Returns a dict of plain Python values (and the fit when ``return_fit``).
    """
    fit_config = replace(fit_config or FitConfig(), baselines=True,
                         true_support=tuple(sorted(TRUE_BETA_NONZERO)))
    grid, basis = _setup(s)
    theta0 = true_direction(basis, fit_config.calibration)
    data = generate_replicate(s, k, theta0, grid)
    beta0 = true_beta(s.p)
    t0 = time.perf_counter()
    try:
        fit = fit_ssfplsim(data.curves, data.x, data.y, basis, fit_config, candidates)
    except NoFeasibleFit as exc:
        log.warning("scenario %s replicate %d: %s", s.label, k, exc)
        rec = {"replicate": k, "failed": True}
        return (rec, None) if return_fit else rec
    elapsed = time.perf_counter() - t0
    correct, incorrect = metric_selection(fit.beta_hat, beta0)
    model = LinkModel(fit, data.curves, data.x, data.y)
    try:
        msep, excluded = metric_link_msep(model, data.test_curves, theta0, cube, return_excluded=True)
    except SSFPLSIMError:
        msep, excluded = None, s.test_size
    rec = {
        "replicate": k,
        "failed": False,
        "correct_pct": correct,
        "incorrect_pct": incorrect,
        "selected": [j + 1 for j in fit.selected],
        "beta_se_pls": metric_beta_se(fit.beta_hat, beta0),
        "beta_se_ols": metric_beta_se(fit.baselines["beta_ols"], beta0),
        "beta_se_oracle": metric_beta_se(fit.baselines["beta_oracle"], beta0),
        "theta_se": metric_theta_se(fit.theta_hat, theta0),
        "msep": msep,
        "msep_excluded": excluded,
        "h_hat": fit.h_hat,
        "lambda_hat": fit.lambda_hat,
        "bic": fit.bic,
        "theta_hat": [float(v) for v in fit.theta_hat.coefficients],
        "_seconds": elapsed,
    }
    return (rec, fit) if return_fit else rec


def _mean_sd(values):
    vals = np.asarray([v for v in values if v is not None], dtype=float)
    if vals.size == 0:
        return None, None
    sd = float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0
    return float(np.mean(vals)), sd


@dataclass
class ScenarioReport:
    scenario: Scenario
    replicates: list = field(default_factory=list)
    runtimes: list = field(default_factory=list)

    @property
    def ok(self) -> list:
        return [r for r in self.replicates if not r["failed"]]

    @property
    def failures(self) -> int:
        return sum(1 for r in self.replicates if r["failed"])

    def _stat(self, key):
        return _mean_sd(r[key] for r in self.ok)

    @property
    def correct_pct(self):
        return self._stat("correct_pct")[0]

    @property
    def incorrect_pct(self):
        return self._stat("incorrect_pct")[0]

    def beta_se(self, estimator: str):
        """``(mean, sd)`` of squared errors for ``"oracle"``, ``"pls"`` or ``"ols"``."""
        return self._stat(f"beta_se_{estimator}")

    @property
    def theta_se(self):
        return self._stat("theta_se")

    @property
    def msep_values(self) -> list:
        return [r["msep"] for r in self.ok if r["msep"] is not None]

    @property
    def msep_median(self):
        vals = self.msep_values
        return float(np.median(vals)) if vals else None

    def summary_row(self) -> dict:
        s = self.scenario
        row = {"scenario": s.label, "n": s.n, "p": s.p, "rho": s.rho, "c": s.c, "M": s.M,
               "seed": s.seed, "failures": self.failures,
               "correct_pct": self.correct_pct, "incorrect_pct": self.incorrect_pct}
        for est in ("oracle", "pls", "ols"):
            m, sd = self.beta_se(est)
            row[f"beta_se_{est}_mean"], row[f"beta_se_{est}_sd"] = m, sd
        row["theta_se_mean"], row["theta_se_sd"] = self.theta_se
        row["msep_median"] = self.msep_median
        row["msep_mean"] = _mean_sd(self.msep_values)[0]
        row["msep_excluded"] = sum(r["msep_excluded"] for r in self.ok)
        return row

    def to_dict(self) -> dict:
        """Deterministic content (no timings)."""
        reps = [{k: v for k, v in r.items() if not k.startswith("_")} for r in self.replicates]
        return {"scenario": asdict(self.scenario), "summary": self.summary_row(), "replicates": reps}


def _replicate_task(args):
    s, k, cfg = args
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=1):
        return run_replicate(s, k, cfg)


def run_scenario(s: Scenario, fit_config: FitConfig | None = None, threads: int = 1,
                 replicates=None) -> ScenarioReport:
    """Run replicates ``0..M-1`` (or the given subset) and aggregate them.

    BLAS is pinned to one thread per replicate so that results are identical for
    any ``threads``.
    """
    ks = list(range(s.M)) if replicates is None else list(replicates)
    tasks = [(s, k, fit_config) for k in ks]
    if threads <= 1:
        recs = [_replicate_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            recs = list(ex.map(_replicate_task, tasks))
    recs.sort(key=lambda r: r["replicate"])
    runtimes = [r.get("_seconds") for r in recs]
    for r in recs:
        if r["failed"]:
            log.warning("scenario %s: replicate %d had no feasible fit", s.label, r["replicate"])
    return ScenarioReport(s, recs, runtimes)


def paper_scenarios(M: int = 100, seed: int = 0) -> list[Scenario]:
    """The eight simulation settings ``(n, p) x rho x c``."""
    out = []
    for n, p in ((100, 50), (200, 100)):
        for rho in (0.0, 0.5):
            for c in (0.01, 0.05):
                out.append(Scenario(n=n, p=p, rho=rho, c=c, M=M, seed=seed))
    return out
