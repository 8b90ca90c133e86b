"""Per-frequency semi-supervised association of time-frequency bins to persons.

At each frequency the masked ratio values are modeled as a complex-Gaussian
mixture whose component means are pinned to the calibration features at the
tracked person locations, plus one zero-mean wide outlier component. EM learns
only priors and person variances; aggregated responsibilities give per-person
speaking probabilities for the temporal filter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .alignment import TrainingSet, nearest_training
from .spectral import TINY, BinauralSpectrogram


@dataclass(frozen=True)
class AssociationConfig:
    tol: float = 1e-6            # absolute log-likelihood convergence
    max_iters: int = 50
    outlier_scale: float = 100.0  # outlier variance relative to the init variance
    variance_floor: float = 1e-8


@dataclass(frozen=True)
class FreqMixtureParams:
    """Mixture parameters at one frequency: components 0..Nv-1 are visible
    persons (means fixed), component Nv is the zero-mean outlier."""

    priors: np.ndarray
    variances: np.ndarray
    means: np.ndarray
    person_ids: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))

    def __post_init__(self):
        priors = np.asarray(self.priors, dtype=np.float64)
        variances = np.asarray(self.variances, dtype=np.float64)
        means = np.asarray(self.means, dtype=np.complex128)
        if len(priors) != len(variances) or len(means) != len(priors) - 1:
            raise ValueError("need Nv+1 priors and variances for Nv means")
        if abs(priors.sum() - 1.0) > 1e-9 or np.any(priors < 0):
            raise ValueError("priors must be a distribution")
        if np.any(variances <= 0):
            raise ValueError("variances must be positive")
        if len(means) and variances[-1] < variances[:-1].max() - 1e-12:
            raise ValueError("outlier variance must dominate person variances")
        object.__setattr__(self, "priors", priors)
        object.__setattr__(self, "variances", variances)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "person_ids", np.asarray(self.person_ids, dtype=int))

    @property
    def n_persons(self) -> int:
        return len(self.means)


def complex_gauss_density(x, mu, sigma):
    """Circular complex-normal density (pi*sigma)^-1 exp(-|x - mu|^2 / sigma).

    Broadcasts over array arguments; sigma must be positive.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(sigma <= 0):
        raise ValueError("sigma must be positive")
    d2 = np.abs(np.asarray(x) - np.asarray(mu)) ** 2
    return np.exp(-d2 / sigma) / (np.pi * sigma)


def _log_resp(
    values: np.ndarray, active: np.ndarray, priors: np.ndarray,
    variances: np.ndarray, means: np.ndarray,
) -> tuple[np.ndarray, float]:
    """Responsibilities and observed log-likelihood at one frequency.

    ``values`` has shape (K,); rows of the result sum to 1 on active bins and
    are zero elsewhere. Bins where every weighted density underflows are
    assigned to the outlier component.
    """
    K = len(values)
    C = len(priors)
    d2 = np.empty((K, C))
    with np.errstate(over="ignore"):  # inf distance means density zero, handled below
        d2[:, :-1] = np.abs(values[:, None] - means[None, :]) ** 2
        d2[:, -1] = np.abs(values) ** 2
    with np.errstate(divide="ignore"):
        logw = np.log(priors)[None, :] - np.log(np.pi * variances)[None, :] - d2 / variances[None, :]
    lse = logsumexp(logw, axis=1)
    resp = np.zeros((K, C))
    ok = active & np.isfinite(lse)
    resp[ok] = np.exp(logw[ok] - lse[ok, None])
    dead = active & ~np.isfinite(lse)
    resp[dead, -1] = 1.0
    loglik = float(np.sum(lse[ok]))
    return resp, loglik


def e_step(Y: BinauralSpectrogram, freq: int, params: FreqMixtureParams) -> np.ndarray:
    """Posterior component responsibilities for the bins at one frequency."""
    values = Y.Y[freq]
    active = Y.mask[freq] == 1
    resp, _ = _log_resp(values, active, params.priors, params.variances, params.means)
    return resp


def m_step(
    Y: BinauralSpectrogram,
    freq: int,
    responsibilities: np.ndarray,
    params: FreqMixtureParams,
    cfg: AssociationConfig = AssociationConfig(),
) -> FreqMixtureParams:
    """Re-estimate priors and person variances; the outlier variance is fixed.

    With no active bins at this frequency the parameters are returned
    unchanged. Person variances are floored, and a component holding no
    responsibility mass keeps its previous variance.
    """
    active = (Y.mask[freq] == 1).astype(np.float64)
    total = active.sum()
    if total == 0:
        return params
    r = responsibilities * active[:, None]
    mass = r.sum(axis=0)
    priors = mass / total
    d2 = np.abs(Y.Y[freq][:, None] - params.means[None, :]) ** 2
    variances = params.variances.copy()
    ceiling = variances[-1]  # person components may not out-spread the outlier
    for n in range(params.n_persons):
        if mass[n] > TINY:
            updated = float((r[:, n] * d2[:, n]).sum() / mass[n])
            variances[n] = min(max(updated, cfg.variance_floor), ceiling)
    return FreqMixtureParams(
        priors=priors, variances=variances, means=params.means, person_ids=params.person_ids
    )


@dataclass(frozen=True)
class FitResult:
    """Outcome of fitting all per-frequency mixtures for one time slice."""

    params: list[FreqMixtureParams]
    responsibilities: np.ndarray   # (F, K, Nv+1), zero rows at inactive bins
    informative: bool              # False when the slice had no usable evidence
    loglik_history: np.ndarray     # total observed log-likelihood per iteration
    n_iters: int
    converged: bool


def fit_freq_mixtures(
    Y: BinauralSpectrogram,
    ts: TrainingSet,
    positions: np.ndarray,
    visibility: np.ndarray,
    cfg: AssociationConfig = AssociationConfig(),
) -> FitResult:
    """Fit the per-frequency mixtures for one time slice.

    Component means come from the calibration feature at the nearest
    calibration location of each visible person. All frequencies are fit
    jointly (vectorized), each with its own convergence; the recorded total
    log-likelihood is non-decreasing across iterations.
    """
    visibility = np.asarray(visibility, dtype=np.uint8)
    ids = np.nonzero(visibility)[0]
    F, K = Y.Y.shape
    if len(ids) == 0:
        return FitResult(
            params=[], responsibilities=np.zeros((F, K, 1)), informative=False,
            loglik_history=np.zeros(0), n_iters=0, converged=True,
        )
    means = np.stack(
        [ts.features[:, nearest_training(ts, positions[n])] for n in ids], axis=1
    )  # (F, Nv)
    Nv = len(ids)
    C = Nv + 1
    active = Y.mask == 1
    n_active = active.sum()

    d2p = np.abs(Y.Y[:, :, None] - means[:, None, :]) ** 2  # (F, K, Nv)
    if n_active > 0:
        init_var = max(float(np.median(d2p[active])), cfg.variance_floor)
    else:
        init_var = 1.0
    priors = np.full((F, C), 1.0 / C)
    variances = np.empty((F, C))
    variances[:, :Nv] = init_var
    variances[:, Nv] = cfg.outlier_scale * init_var

    if n_active == 0:
        params = [
            FreqMixtureParams(priors[f], variances[f], means[f], ids) for f in range(F)
        ]
        return FitResult(
            params=params, responsibilities=np.zeros((F, K, C)), informative=False,
            loglik_history=np.zeros(0), n_iters=0, converged=True,
        )

    d2 = np.concatenate([d2p, np.abs(Y.Y)[:, :, None] ** 2], axis=2)  # (F, K, C)
    act = active.astype(np.float64)
    has_bins = active.any(axis=1)
    alive = has_bins.copy()
    ll_freq = np.where(has_bins, -np.inf, 0.0)  # -inf: no iteration recorded yet
    history = []
    resp = np.zeros((F, K, C))
    n_iters = 0
    for it in range(cfg.max_iters):
        n_iters = it + 1
        with np.errstate(divide="ignore"):
            logw = (
                np.log(priors)[:, None, :]
                - np.log(np.pi * variances)[:, None, :]
                - d2 / variances[:, None, :]
            )
        lse = logsumexp(logw, axis=2)  # (F, K)
        ok = active & np.isfinite(lse)
        new_resp = np.zeros((F, K, C))
        new_resp[ok] = np.exp(logw[ok] - lse[ok][:, None])
        new_resp[active & ~np.isfinite(lse), C - 1] = 1.0
        new_ll = np.where(has_bins, np.sum(np.where(ok, lse, 0.0), axis=1), 0.0)

        resp[alive] = new_resp[alive]
        just_converged = alive & (np.abs(new_ll - ll_freq) < cfg.tol)
        ll_freq = np.where(alive, new_ll, ll_freq)
        alive &= ~just_converged
        history.append(float(ll_freq.sum()))
        if not alive.any():
            break

        # M-step on still-iterating frequencies only
        r = resp * act[:, :, None]
        mass = r.sum(axis=1)               # (F, C)
        total = act.sum(axis=1)            # (F,)
        new_priors = np.where(has_bins[:, None], mass / np.maximum(total, 1.0)[:, None], priors)
        num = (r[:, :, :Nv] * d2p).sum(axis=1)
        new_var = variances.copy()
        upd = mass[:, :Nv] > TINY
        new_var[:, :Nv][upd] = np.maximum(
            num[upd] / mass[:, :Nv][upd], cfg.variance_floor
        )
        # clip into the outlier's shadow so it always stays the widest component
        new_var[:, :Nv] = np.minimum(new_var[:, :Nv], new_var[:, Nv:Nv + 1])
        priors[alive] = new_priors[alive]
        variances[alive] = new_var[alive]

    converged = not alive.any()
    params = [
        FreqMixtureParams(priors[f], variances[f], means[f], ids) for f in range(F)
    ]
    return FitResult(
        params=params, responsibilities=resp, informative=True,
        loglik_history=np.array(history), n_iters=n_iters, converged=converged,
    )


def speaking_probabilities(responsibilities: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Aggregate responsibilities into per-person speaking probabilities.

    P_n is the fraction of active-bin responsibility mass on person n. A slice
    with no active bins is uninformative and yields 0.5 for every person.
    """
    resp = np.asarray(responsibilities)
    act = (np.asarray(mask) == 1).astype(np.float64)
    n_persons = resp.shape[2] - 1
    total = act.sum()
    if total == 0:
        return np.full(n_persons, 0.5)
    return (resp[:, :, :n_persons] * act[:, :, None]).sum(axis=(0, 1)) / total
