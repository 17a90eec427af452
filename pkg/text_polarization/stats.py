"""
Shared statistics: one and two sample t-tests and (weighted) least squares.
"""
import json
import logging
from dataclasses import dataclass, asdict

import numpy as np
from scipy import stats as sps

from text_polarization.errors import StatisticsError

logger = logging.getLogger(__name__)


@dataclass
class RegressionReport:
    coefficients: dict
    std_errors: dict
    p_values: dict
    r_squared: float
    adj_r_squared: float
    n: int
    weights_used: bool = False

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class TTestResult:
    t: float
    p: float
    mean: float = None
    df: float = None

    def __iter__(self):
        return iter((self.t, self.p, self.mean))


def t_pvalue(t: float, df: float) -> float:
    """
    Two-sided p-value of a t statistic.
    """
    return float(min(1.0, 2.0 * sps.t.sf(abs(t), df)))


def one_sample_ttest(values, mu0: float = 0.0) -> TTestResult:
    values = np.asarray(values, dtype=float)
    n = len(values)
    if n < 2:
        raise StatisticsError(f"The t-test needs at least 2 values, got {n}.")
    sd = values.std(ddof=1)
    if sd == 0:
        raise StatisticsError("The values have zero variance.")
    mean = float(values.mean())
    t = (mean - mu0) / (sd / np.sqrt(n))
    return TTestResult(float(t), t_pvalue(t, n - 1), mean, n - 1)


def two_sample_ttest(a, b, equal_var: bool = False) -> TTestResult:
    """
    Two-sided two sample t-test, Welch by default.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = len(a), len(b)
    if na < 2 or nb < 2:
        raise StatisticsError(f"Each group needs at least 2 values, "
                              f"got {na} and {nb}.")
    va, vb = a.var(ddof=1), b.var(ddof=1)
    if va == 0 and vb == 0:
        raise StatisticsError("Both groups have zero variance.")
    diff = a.mean() - b.mean()
    if equal_var:
        df = na + nb - 2
        pooled = ((na - 1) * va + (nb - 1) * vb) / df
        se = np.sqrt(pooled * (1.0 / na + 1.0 / nb))
    else:
        qa, qb = va / na, vb / nb
        se = np.sqrt(qa + qb)
        df = (qa + qb) ** 2 / (qa ** 2 / (na - 1) + qb ** 2 / (nb - 1))
    t = diff / se
    return TTestResult(float(t), t_pvalue(t, df), float(diff), float(df))


def _collinear_columns(X: np.ndarray, names) -> [str]:
    # R of a pivoted QR exposes the dependent columns
    from scipy.linalg import qr
    _, r, piv = qr(X, mode='economic', pivoting=True)
    diag = np.abs(np.diag(r))
    tol = diag.max() * max(X.shape) * np.finfo(float).eps if len(diag) else 0
    rank = int(np.sum(diag > tol))
    return [names[i] for i in sorted(piv[rank:])]


def ols(y, X, weights=None, names=None, intercept: bool = True
        ) -> RegressionReport:
    """
    Weighted least squares with t-distribution p-values.
    :param y: response, length n
    :param X: design matrix n x p (without intercept column)
    :param weights: optional positive weights
    :param names: column names of X
    :param intercept: prepend an 'intercept' column
    """
    y = np.asarray(y, dtype=float).ravel()
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    n = len(y)
    if X.shape[0] != n:
        raise StatisticsError(f"The design has {X.shape[0]} rows but "
                              f"the response has {n} values.")
    names = list(names) if names else [f'x{i}' for i in range(X.shape[1])]
    if intercept:
        X = np.column_stack([np.ones(n), X])
        names = ['intercept'] + names
    p = X.shape[1]
    if n <= p:
        raise StatisticsError(f"The regression needs more than {p} "
                              f"observations, got {n}.")
    if weights is None:
        w = np.ones(n)
    else:
        w = np.asarray(weights, dtype=float).ravel()
        if np.any(w <= 0):
            raise StatisticsError("The regression weights must be positive.")
    sw = np.sqrt(w)
    Xw = X * sw[:, None]
    yw = y * sw
    if np.linalg.matrix_rank(Xw) < p:
        cols = _collinear_columns(Xw, names)
        raise StatisticsError(f"The design matrix is rank deficient, "
                              f"collinear columns: {cols}")
    xtx = Xw.T @ Xw
    try:
        beta = np.linalg.solve(xtx, Xw.T @ yw)
        xtx_inv = np.linalg.inv(xtx)
    except np.linalg.LinAlgError:
        logger.debug("Normal equations are singular, using QR.")
        q, r = np.linalg.qr(Xw)
        beta = np.linalg.solve(r, q.T @ yw)
        r_inv = np.linalg.inv(r)
        xtx_inv = r_inv @ r_inv.T
    resid = yw - Xw @ beta
    sse = float(resid @ resid)
    df = n - p
    sigma2 = sse / df
    se = np.sqrt(np.diag(xtx_inv) * sigma2)
    if intercept:
        ybar = np.sum(w * y) / np.sum(w)
        sst = float(np.sum(w * (y - ybar) ** 2))
    else:
        sst = float(yw @ yw)
    if sst == 0:
        raise StatisticsError("The response has zero variance.")
    r2 = max(0.0, min(1.0, 1.0 - sse / sst))
    k = p - 1 if intercept else p
    adj = 1.0 - (1.0 - r2) * (n - 1) / df if intercept else \
        1.0 - (1.0 - r2) * n / df
    t = np.divide(beta, se, out=np.full_like(beta, np.inf), where=se > 0)
    pvals = [t_pvalue(tt, df) if np.isfinite(tt) else 0.0 for tt in t]
    logger.debug("OLS n=%d k=%d R2=%.4f", n, k, r2)
    return RegressionReport(
        coefficients=dict(zip(names, map(float, beta))),
        std_errors=dict(zip(names, map(float, se))),
        p_values=dict(zip(names, pvals)),
        r_squared=r2,
        adj_r_squared=float(adj),
        n=n,
        weights_used=weights is not None,
    )
