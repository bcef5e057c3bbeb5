"""
Mixing diagnostics for a scalar trace: autocorrelation, integrated
autocorrelation time and effective sample size.

The estimator uses the second half of the series (the first half counts as
burn-in):

    M     = len(series) // 2
    C     = min{l >= 1 : |rho_l| < 2 / sqrt(M)}   (C = M if no lag qualifies)
    tau   = 1/2 + sum_{l=1}^{C-1} rho_l
    ESS   = 2 M / (1 + tau)

Because tau starts at 1/2, an iid chain gets ESS = 4M/3 > M. The report also
carries the textbook ESS = M / (1 + 2 sum rho_l) over the same lags as
`ess_conventional` for comparison.
"""
from dataclasses import asdict, dataclass

import numpy as np


@dataclass
class DiagnosticsReport:
    tau_hat: float
    ess: float
    ess_conventional: float
    cutoff_C: int
    M: int
    rho: np.ndarray

    def to_dict(self):
        d = asdict(self)
        d["rho"] = [float(x) for x in self.rho]
        return d


def autocorr(series, max_lag=None):
    """Biased-normalized sample autocorrelation rho_0..rho_max_lag (via FFT)."""
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("need a 1-d series of length >= 2")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")
    N = x.size
    max_lag = N - 1 if max_lag is None else min(int(max_lag), N - 1)
    d = x - x.mean()
    denom = float(d @ d)
    if denom <= 0.0 or np.ptp(x) == 0.0:
        raise ValueError("zero-variance series")
    size = 1 << int(np.ceil(np.log2(2 * N)))
    f = np.fft.rfft(d, size)
    acov = np.fft.irfft(f * np.conj(f), size)[: max_lag + 1]
    rho = acov / denom
    rho[0] = 1.0
    return rho


def iat_ess(series):
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.size < 4:
        raise ValueError("need a 1-d series of length >= 4")
    M = x.size // 2
    half = x[x.size - M:]
    rho = autocorr(half, M - 1)
    bound = 2.0 / np.sqrt(M)
    small = np.nonzero(np.abs(rho[1:]) < bound)[0]
    C = int(small[0]) + 1 if small.size else M
    s = float(rho[1:C].sum())
    tau = 0.5 + s
    ess = 2.0 * M / (1.0 + tau)
    ess_conv = M / (1.0 + 2.0 * s)
    return DiagnosticsReport(tau, ess, ess_conv, C, M, rho)
