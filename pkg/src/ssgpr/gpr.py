"""Gaussian process regression: plaintext oracle and the shared pipeline.

The plaintext functions are the accuracy reference; the pp_* functions
run the same model on secret shares through the interactive protocols.
Hyperparameters are public configuration on both compute servers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .protocols import (ExpParams, _rescale, pp_exp, pp_matinv, ss_dist, ss_matmul,
                        ss_mul, ss_sqrt)
from .session import PartyRuntime
from .sharing import SharedArray

SQUARED_EXPONENTIAL = "se"
MATERN32 = "matern32"


@dataclass(frozen=True)
class KernelConfig:
    kind: str = SQUARED_EXPONENTIAL
    length_scale: float = 1.0
    signal_variance: float = 1.0
    noise_variance: float = 0.1

    def __post_init__(self):
        if self.kind not in (SQUARED_EXPONENTIAL, MATERN32):
            raise ValueError(f"unknown kernel {self.kind!r}")
        if min(self.length_scale, self.signal_variance, self.noise_variance) <= 0:
            raise ValueError("kernel hyperparameters must be strictly positive")

    @property
    def pivot_domain(self) -> tuple[float, float]:
        """Public bounds on the LDL pivots of K + noise_variance*I."""
        return (self.noise_variance / 2.0,
                2.0 * (self.signal_variance + self.noise_variance))


def kernel_from_sqdist(d, config: KernelConfig):
    """Kernel value as a function of the squared Euclidean distance."""
    d = np.asarray(d, dtype=np.float64)
    if config.kind == SQUARED_EXPONENTIAL:
        return config.signal_variance * np.exp(-d / (2.0 * config.length_scale ** 2))
    s = np.sqrt(3.0 * d) / config.length_scale
    return config.signal_variance * (1.0 + s) * np.exp(-s)


def kernel_plaintext(x, xp, config: KernelConfig) -> float:
    d = float(np.sum((np.asarray(x, dtype=np.float64) - np.asarray(xp)) ** 2))
    return float(kernel_from_sqdist(d, config))


def sqdist_matrix(x, xp) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    xp = np.atleast_2d(np.asarray(xp, dtype=np.float64))
    d = (x ** 2).sum(1)[:, None] + (xp ** 2).sum(1)[None, :] - 2.0 * x @ xp.T
    return np.maximum(d, 0.0)


def kernel_matrix_plaintext(x, xp, config: KernelConfig) -> np.ndarray:
    return kernel_from_sqdist(sqdist_matrix(x, xp), config)


@dataclass
class Predictions:
    mean: np.ndarray
    variance: np.ndarray


def gpr_predict_plaintext(x, y, x_star, config: KernelConfig) -> Predictions:
    """Exact posterior mean and variance, the oracle for every loss metric."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    x_star = np.atleast_2d(np.asarray(x_star, dtype=np.float64))
    k = kernel_matrix_plaintext(x, x, config)
    a = k + config.noise_variance * np.eye(len(y))
    k_star = kernel_matrix_plaintext(x_star, x, config)
    sol = np.linalg.solve(a, y)
    mean = k_star @ sol
    var = config.signal_variance - np.sum(k_star * np.linalg.solve(a, k_star.T).T, axis=1)
    return Predictions(mean=mean, variance=var)


def loss_metrics(oracle: Predictions, pp: Predictions):
    """Mean relative differences of mean and variance predictions.

    Test points whose oracle value is exactly zero are excluded from the
    corresponding average; the exclusion counts are reported.
    """
    def rel(a, b):
        a = np.asarray(a, dtype=np.float64).reshape(-1)
        b = np.asarray(b, dtype=np.float64).reshape(-1)
        keep = a != 0.0
        if not np.any(keep):
            return float("nan"), int((~keep).sum())
        return float(np.mean(np.abs(b[keep] - a[keep]) / np.abs(a[keep]))), int((~keep).sum())

    loss_mu, skipped_mu = rel(oracle.mean, pp.mean)
    loss_var, skipped_var = rel(oracle.variance, pp.variance)
    return {"loss_mu": loss_mu, "loss_var": loss_var,
            "excluded_mu": skipped_mu, "excluded_var": skipped_var}


@dataclass
class GprModelShares:
    """One party's model state after the construction stage."""

    X: SharedArray
    y: SharedArray
    K: SharedArray
    Inv: SharedArray
    config: KernelConfig
    y_shift: float = 0.0


def pp_kernel(rt: PartyRuntime, dist: SharedArray, config: KernelConfig,
              exp_params: ExpParams, policy: str = "clamp") -> SharedArray:
    """Kernel values from shares of squared distances."""
    if config.kind == SQUARED_EXPONENTIAL:
        arg = _rescale(rt, dist.scale_public(-1.0 / (2.0 * config.length_scale ** 2)))
        e = pp_exp(rt, arg, exp_params, policy=policy)
        return _rescale(rt, e.scale_public(config.signal_variance))
    t = dist.scale_int(3)
    s = ss_sqrt(rt, t)
    w = _rescale(rt, s.scale_public(1.0 / config.length_scale))
    e = pp_exp(rt, -w, exp_params, policy=policy)
    k = ss_mul(rt, w.add_public(1.0), e)
    return _rescale(rt, k.scale_public(config.signal_variance))


def pp_gpr_construct(rt: PartyRuntime, x: SharedArray, y: SharedArray,
                     config: KernelConfig, exp_params: ExpParams,
                     policy: str = "clamp", y_shift: float = 0.0) -> GprModelShares:
    """Model construction: gram matrix and the shared inverse."""
    n = x.shape[0]
    dist = ss_dist(rt, x)
    k = pp_kernel(rt, dist, config, exp_params, policy)
    # The gram diagonal is k(x, x) = signal_variance by stationarity, a
    # public value; writing it directly sidesteps the square root's
    # zero-distance edge case on the Matern path.
    idx = np.arange(n)
    k.values[idx, idx] = rt.codec.encode(config.signal_variance) if rt.party == 0 else 0
    m = k.copy()
    if rt.party == 0:
        m.values[idx, idx] = (m.values[idx, idx]
                              + rt.codec.encode(config.noise_variance)) & rt.params.mask
    inv = pp_matinv(rt, m, pivot_domain=config.pivot_domain)
    return GprModelShares(X=x, y=y, K=k, Inv=inv, config=config, y_shift=y_shift)


def pp_gpr_predict(rt: PartyRuntime, model: GprModelShares, x_star: SharedArray,
                   exp_params: ExpParams, policy: str = "clamp"):
    """Prediction stage: shares of posterior means and variances."""
    config = model.config
    d_star = ss_dist(rt, x_star, model.X)
    k_star = pp_kernel(rt, d_star, config, exp_params, policy)
    w = ss_matmul(rt, k_star, model.Inv)
    y_col = model.y.reshape(-1, 1)
    mean = ss_matmul(rt, w, y_col).reshape(-1)
    if model.y_shift:
        mean = mean.add_public(np.full(mean.shape, model.y_shift))

    quad_raw = ss_mul(rt, w, k_star, truncate=False)
    p = rt.params
    quad = _rescale(rt, SharedArray(rt.party,
                    quad_raw.values.sum(axis=1, dtype=np.uint64) & p.mask,
                    quad_raw.codec, quad_raw.scale))
    # k(x*, x*) = signal_variance is public, so the prior term of the
    # variance needs no protocol work.
    var = (-quad).add_public(config.signal_variance)
    return mean, var
