"""Monte Carlo checks of operator predictions.

Normality of linear statistics (KS and Anderson-Darling against a fixed
normal law), empirical susceptibilities, decay of space correlations and the
``sqrt(N)`` scaling of the sup-CDF distance.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np
from scipy import stats as sps

from .errors import InsufficientESS, NoDecayDetected, NotFactorizable, ZeroVariance
from .models import ModelKind, site_fields
from .sampling import (
    GGEConfig,
    ImTracePower,
    LocalField,
    SampleBatch,
    TracePower,
    observable_series,
    sample_direct,
    sample_mcmc,
)
from .seeds import MonomialTable, _ipow, diagonal_monomials
from .timeseries import batch_means_se, effective_sample_size

__all__ = [
    "Estimate",
    "CLTReport",
    "DecayReport",
    "BerryEsseenReport",
    "clt_check",
    "susceptibility_empirical",
    "correlation_decay",
    "berry_esseen_scan",
    "sup_cdf_distance",
    "anderson_darling",
    "sample_auto",
]

MIN_ESS = 500
QUANTILES = (0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99)


class Estimate(NamedTuple):
    value: float
    se: float


def _write_rows(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["N", "statistic", "value"])
        for N, name, val in rows:
            w.writerow([N, name, repr(float(val)) if val is not None else ""])


def _trace_observable(s: int, part: str):
    if part not in ("Re", "Im"):
        raise ValueError("part must be 'Re' or 'Im'")
    return TracePower(s) if part == "Re" else ImTracePower(s)


def _is_direct(batch: SampleBatch) -> bool:
    return batch.diagnostics.get("sampler") == "direct"


def _ess(batch: SampleBatch, x: np.ndarray, name: str | None = None) -> float:
    if _is_direct(batch):
        return float(len(x))
    recorded = batch.diagnostics.get("effective_sample_size", {})
    if name is not None and name in recorded:
        return float(recorded[name])
    return float(effective_sample_size(x))


def _mean_se(batch, x):
    if _is_direct(batch):
        return float(np.std(x, ddof=1) / math.sqrt(len(x)))
    return batch_means_se(x)


def anderson_darling(z: np.ndarray) -> float:
    """Anderson-Darling statistic of ``z`` against the fixed standard normal law."""
    z = np.sort(np.asarray(z, dtype=float))
    n = len(z)
    i = np.arange(1, n + 1)
    lo = sps.norm.logcdf(z)
    hi = sps.norm.logsf(z[::-1])
    return float(-n - np.sum((2 * i - 1) * (lo + hi)) / n)


def sup_cdf_distance(z: np.ndarray, intervals: int = 512, span: float = 5.0) -> float:
    """``max |F_n(x) - Phi(x)|`` over ``intervals + 1`` equally spaced points of ``[-span, span]``."""
    z = np.sort(np.asarray(z, dtype=float))
    grid = np.linspace(-span, span, intervals + 1)
    emp = np.searchsorted(z, grid, side="right") / len(z)
    return float(np.max(np.abs(emp - sps.norm.cdf(grid))))


# --------------------------------------------------------------------------
# CLT


@dataclass
class CLTReport:
    """Standardized linear statistic against its predicted normal limit.

    Means and variances are per site (divided by ``N``).  ``mean_ok`` asks
    for agreement within 3 SE, ``var_ok`` within ``max(3 SE, 5%)``.
    """

    N: int
    sample_count: int
    observable: str
    measure_type: str
    empirical_mean: float
    empirical_mean_se: float
    empirical_var: float
    empirical_var_se: float
    predicted_A: float
    predicted_sigma2: float
    ks_distance: float
    ks_pvalue: float
    ad_statistic: float
    ess: float
    quantiles: dict = field(default_factory=dict)
    ks_threshold: float = 0.02

    @property
    def mean_ok(self) -> bool:
        return abs(self.empirical_mean - self.predicted_A) < 3 * self.empirical_mean_se

    @property
    def var_ok(self) -> bool:
        tol = max(3 * self.empirical_var_se, 0.05 * abs(self.predicted_sigma2))
        return abs(self.empirical_var - self.predicted_sigma2) < tol

    @property
    def ks_ok(self) -> bool:
        return self.ks_distance < self.ks_threshold

    @property
    def passed(self) -> bool:
        return self.mean_ok and self.var_ok and self.ks_ok

    def to_json(self):
        out = asdict(self)
        out.update(mean_ok=self.mean_ok, var_ok=self.var_ok, ks_ok=self.ks_ok, passed=self.passed)
        return out

    def rows(self):
        keys = ("empirical_mean", "empirical_mean_se", "empirical_var", "empirical_var_se", "predicted_A",
                "predicted_sigma2", "ks_distance", "ks_pvalue", "ad_statistic", "ess")
        return [(self.N, k, getattr(self, k)) for k in keys]

    def to_csv(self, path):
        _write_rows(path, self.rows())


def _prediction(predicted, measure_type):
    """``(A, sigma2)`` from a CLTQuantities-like object, a pair or a dict."""
    if predicted is None:
        raise ValueError("a prediction (A, sigma2) is required")
    if isinstance(predicted, dict):
        if measure_type == "Type2" and predicted.get("A_tilde") is not None:
            return float(predicted["A_tilde"]), float(predicted["sigma2_tilde"])
        return float(predicted["A"]), float(predicted["sigma2"])
    if isinstance(predicted, (tuple, list)):
        return float(predicted[0]), float(predicted[1])
    if measure_type == "Type2":
        if predicted.A_tilde is None:
            raise ValueError("Type-2 batches need A_tilde and sigma2_tilde")
        return float(predicted.A_tilde), float(predicted.sigma2_tilde)
    return float(predicted.A), float(predicted.sigma2)


def clt_check(batch: SampleBatch, s: int, part: str = "Re", predicted=None, *,
              min_ess: float = MIN_ESS, ks_threshold: float = 0.02, variance_scale: float = 1.0) -> CLTReport:
    """Standardize ``Tr (Re|Im) M^s`` by the predicted ``(A, sigma2)`` and test normality.

    Type-2 batches are centred by the ``alpha``-averaged quantities.
    ``variance_scale`` multiplies the predicted variance; values other than 1
    serve as power checks of the KS test.
    """
    obs = _trace_observable(s, part)
    x = observable_series(batch, obs)
    N = batch.config.N
    n = len(x)
    ess = _ess(batch, x, obs.name)
    if ess < min_ess:
        raise InsufficientESS(f"effective sample size {ess:.0f} below {min_ess}")
    A, s2 = _prediction(predicted, batch.config.measure_type)
    s2 *= variance_scale
    if not s2 > 0:
        raise ZeroVariance(f"predicted variance {s2} is not positive")
    z = (x - N * A) / math.sqrt(N * s2)
    ks = sps.kstest(z, "norm")
    mean = float(np.mean(x)) / N
    mean_se = _mean_se(batch, x) / N
    dev = (x - np.mean(x)) ** 2
    var = float(np.sum(dev) / (n - 1)) / N
    var_se = _mean_se(batch, dev) / N
    q = np.quantile(z, QUANTILES)
    return CLTReport(
        N=N, sample_count=n, observable=obs.name, measure_type=batch.config.measure_type,
        empirical_mean=mean, empirical_mean_se=float(mean_se), empirical_var=var, empirical_var_se=float(var_se),
        predicted_A=A, predicted_sigma2=s2, ks_distance=float(ks.statistic), ks_pvalue=float(ks.pvalue),
        ad_statistic=anderson_darling(z), ess=ess, quantiles={str(p): float(v) for p, v in zip(QUANTILES, q)},
        ks_threshold=ks_threshold,
    )


# --------------------------------------------------------------------------
# susceptibility


def _block_jackknife(x, y, blocks):
    n = len(x)
    blocks = max(2, min(blocks, n))
    size = n // blocks
    x, y = x[: size * blocks], y[: size * blocks]
    sx, sy, sxy = (v.reshape(blocks, size).sum(axis=1) for v in (x, y, x * y))
    m = size * (blocks - 1)
    # leave-one-block-out covariances
    mx = (sx.sum() - sx) / m
    my = (sy.sum() - sy) / m
    cxy = (sxy.sum() - sxy) / m - mx * my
    return float(math.sqrt((blocks - 1) / blocks * np.sum((cxy - cxy.mean()) ** 2)))


def susceptibility_empirical(batch: SampleBatch, m: int, n: int, part: str = "Re", *,
                             min_ess: float = MIN_ESS, blocks: int | None = None) -> Estimate:
    """``(1/N) Cov(Tr M^m, Tr M^n)`` with a jackknife standard error.

    Direct samples use the delete-one jackknife (in 200 groups); MCMC
    samples use 50 contiguous blocks so that residual autocorrelation is
    absorbed.  The estimator is symmetric in ``(m, n)``.
    """
    om, on = _trace_observable(m, part), _trace_observable(n, part)
    x = observable_series(batch, om)
    y = observable_series(batch, on)
    ess = min(_ess(batch, x, om.name), _ess(batch, y, on.name))
    if ess < min_ess:
        raise InsufficientESS(f"effective sample size {ess:.0f} below {min_ess}")
    N = batch.config.N
    # centring by the first value keeps constant series exactly at zero
    xc = x - x[0]
    yc = y - y[0]
    xc = xc - xc.mean()
    yc = yc - yc.mean()
    k = len(x)
    if (m, n) > (n, m):
        xc, yc = yc, xc
    cov = float(np.sum(xc * yc) / (k - 1))
    if blocks is None:
        blocks = 200 if _is_direct(batch) else 50
    se = _block_jackknife(xc, yc, blocks) * k / (k - 1)
    return Estimate(cov / N, se / N)


# --------------------------------------------------------------------------
# decay of correlations


@dataclass
class DecayReport:
    """Covariances ``Cov(I(x_0), J(x_d))`` against the distance ``d``.

    The log-linear fit uses the contiguous range of distances ``d >= 1``
    whose covariance exceeds ``noise_factor`` standard errors.
    """

    N: int
    sample_count: int
    distances: list
    cov_estimates: list
    cov_se: list
    fit_range: list
    fitted_log_slope: float | None
    slope_se: float | None
    slope_ci: list | None
    fit_r2: float | None
    mu_hat: float | None

    @property
    def decay_detected(self) -> bool:
        return self.fitted_log_slope is not None and self.slope_ci is not None and self.slope_ci[1] < 0

    def to_json(self):
        out = asdict(self)
        out["decay_detected"] = bool(self.decay_detected)
        return out

    def rows(self):
        out = []
        for d, c, e in zip(self.distances, self.cov_estimates, self.cov_se):
            out += [(self.N, f"cov[{d}]", c), (self.N, f"cov_se[{d}]", e)]
        for k in ("fitted_log_slope", "slope_se", "fit_r2", "mu_hat"):
            out.append((self.N, k, getattr(self, k)))
        return out

    def to_csv(self, path):
        _write_rows(path, self.rows())


def _local_table(kind: ModelKind, obs, N: int):
    if isinstance(obs, int):
        obs = LocalField(obs, 0)
    if isinstance(obs, LocalField):
        return MonomialTable(diagonal_monomials(kind, N, obs.m, 0), kind.field_vars)
    if isinstance(obs, dict):
        return MonomialTable(obs, kind.field_vars)
    if callable(obs):
        return obs
    raise TypeError(f"unsupported local observable {obs!r}")


def _translates(tab, sites, kind, N, chunk=512):
    """Values of a local observable at every base site: shape ``(S, N)``."""
    S = sites.shape[0]
    out = np.empty((S, N))
    if callable(tab) and not isinstance(tab, MonomialTable):
        for s in range(0, S, chunk):
            out[s:s + chunk] = np.asarray(tab(sites[s:s + chunk]), dtype=float)
        return out
    shifts = np.arange(N)
    site_idx = (tab.site[:, :, None] + shifts) % N  # (n_mono, F, N)
    var_idx = np.broadcast_to(tab.var[:, :, None], site_idx.shape)
    pw = tab.pow[:, :, None]
    maxp = int(tab.pow.max()) if tab.pow.size else 0
    for s in range(0, S, chunk):
        F = site_fields(kind, sites[s:s + chunk])
        g = _ipow(F[:, site_idx, var_idx], pw, maxp)  # (B, n_mono, F, N)
        out[s:s + chunk] = np.real(np.tensordot(np.prod(g, axis=2), tab.coef, axes=([1], [0])))
    return out


def correlation_decay(batch: SampleBatch, I=2, J=2, max_distance: int | None = None, *,
                      noise_factor: float = 5.0, min_points: int = 3, level: float = 0.95) -> DecayReport:
    """Spatial covariance decay of two local observables on a periodic Type-1 batch.

    ``I`` and ``J`` are conserved densities ``[M^m]_jj`` (an int ``m`` or a
    ``LocalField``), monomial dicts anchored at site 0, or callables mapping
    site arrays ``(S, N, d)`` to values ``(S, N)``.  Translation invariance
    is used to average over base sites.  Raises ``NoDecayDetected`` (with
    the report attached as ``.report``) when fewer than ``min_points``
    distances rise above the noise.
    """
    cfg = batch.config
    if not cfg.kind.periodic or cfg.measure_type != "Type1":
        raise ValueError("correlation decay needs a periodic Type-1 batch")
    if batch.sites is None:
        raise ValueError("correlation decay needs stored configurations")
    N = cfg.N
    if max_distance is None:
        max_distance = N // 2
    max_distance = min(max_distance, N // 2)
    VI = _translates(_local_table(cfg.kind, I, N), batch.sites, cfg.kind, N)
    VJ = VI if (I is J or I == J) else _translates(_local_table(cfg.kind, J, N), batch.sites, cfg.kind, N)
    # shift-by-first-entry keeps constant observables exactly centred
    VI = VI - VI.flat[0]
    VJ = VJ - VJ.flat[0]
    VI = VI - VI.mean()
    VJ = VJ - VJ.mean()
    dists = list(range(max_distance + 1))
    covs, ses = [], []
    for d in dists:
        per_sample = np.mean(VI * np.roll(VJ, -d, axis=1), axis=1)
        covs.append(float(per_sample.mean()))
        if not np.any(per_sample):
            ses.append(0.0)
        else:
            ses.append(float(_mean_se(batch, per_sample)))
    rng_idx = []
    for d in dists[1:]:
        if ses[d] > 0 and abs(covs[d]) > noise_factor * ses[d]:
            rng_idx.append(d)
        elif rng_idx:
            break
    report = DecayReport(N, len(batch), dists, covs, ses, rng_idx, None, None, None, None, None)
    if len(rng_idx) < min_points:
        exc = NoDecayDetected(f"only {len(rng_idx)} distances above {noise_factor} SE")
        exc.report = report
        raise exc
    d = np.array(rng_idx, dtype=float)
    y = np.log(np.abs([covs[i] for i in rng_idx]))
    w = (np.abs([covs[i] for i in rng_idx]) / np.array([ses[i] for i in rng_idx])) ** 2
    X = np.stack([np.ones_like(d), d], axis=1)
    XtW = X.T * w
    beta = np.linalg.solve(XtW @ X, XtW @ y)
    resid = y - X @ beta
    dof = len(d) - 2
    s2 = float(np.sum(w * resid ** 2) / dof) if dof > 0 else 0.0
    cov_beta = np.linalg.inv(XtW @ X) * max(s2, 1.0)
    slope = float(beta[1])
    se = float(math.sqrt(cov_beta[1, 1]))
    tq = float(sps.t.ppf(0.5 + level / 2, max(dof, 1)))
    ybar = np.sum(w * y) / np.sum(w)
    tss = float(np.sum(w * (y - ybar) ** 2))
    r2 = 1.0 - float(np.sum(w * resid ** 2)) / tss if tss > 0 else 1.0
    return replace(report, fitted_log_slope=slope, slope_se=se, slope_ci=[float(slope - tq * se), float(slope + tq * se)],
                   fit_r2=r2, mu_hat=math.exp(slope))


# --------------------------------------------------------------------------
# Berry-Esseen


@dataclass
class BerryEsseenReport:
    Ns: list
    sup_distances: list
    scaled: list
    sample_counts: list
    predictions: list

    @property
    def spread(self) -> float:
        """Ratio of the largest to the smallest scaled distance."""
        return float(max(self.scaled) / min(self.scaled))

    def to_json(self):
        out = asdict(self)
        out["spread"] = self.spread
        return out

    def rows(self):
        out = []
        for N, d, s in zip(self.Ns, self.sup_distances, self.scaled):
            out += [(N, "sup_distance", d), (N, "scaled", s)]
        return out

    def to_csv(self, path):
        _write_rows(path, self.rows())


def sample_auto(config: GGEConfig, count: int, rng_seed=0, observables=(), store_configs: bool = False,
                **mcmc) -> SampleBatch:
    """Exact samples when the measure factorizes, MCMC otherwise."""
    try:
        return sample_direct(config, count, rng_seed, observables, store_configs)
    except NotFactorizable:
        return sample_mcmc(config, count, rng_seed=rng_seed, observables=observables,
                           store_configs=store_configs, **mcmc)


def berry_esseen_scan(config: GGEConfig, s: int, Ns, samples_per_N: int, predicted_fn: Callable, *,
                      part: str = "Re", rng_seed: int = 0, intervals: int = 512, **mcmc) -> BerryEsseenReport:
    """Sup-CDF distance of the standardized statistic for each ``N``, and its ``sqrt(N)`` multiple.

    ``predicted_fn(N)`` returns the centring and variance, either as a pair
    or as an object accepted by ``clt_check``.
    """
    obs = _trace_observable(s, part)
    out = BerryEsseenReport([], [], [], [], [])
    for i, N in enumerate(Ns):
        cfg = replace(config, N=int(N))
        A, s2 = _prediction(predicted_fn(int(N)), cfg.measure_type)
        if not s2 > 0:
            raise ZeroVariance(f"predicted variance {s2} is not positive")
        batch = sample_auto(cfg, samples_per_N, rng_seed=rng_seed + i, observables=[obs], **mcmc)
        x = batch.series[obs.name]
        z = (x - N * A) / math.sqrt(N * s2)
        d = sup_cdf_distance(z, intervals)
        out.Ns.append(int(N))
        out.sup_distances.append(d)
        out.scaled.append(d * math.sqrt(N))
        out.sample_counts.append(len(x))
        out.predictions.append([A, s2])
    return out


def dumps(report) -> str:
    """JSON text of a report with 17 significant digits."""
    return json.dumps(report.to_json(), indent=2, default=float)
