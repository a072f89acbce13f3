"""Land-use efficiency and its power-law relationship with distance to
the city center, compared across form-representation groups.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError

from .errors import DataError

GROUPS = ("raw", "core", "representative")


@dataclass
class EfficiencyRecord:
    block_id: str
    group: str
    e_area: float  # building area / block area
    e_num: float   # building count / block area (1/m^2)
    distance: float  # block centroid to city center, meters


def efficiency(block, buildings, group: str, city_center) -> EfficiencyRecord:
    """Both efficiency indicators over a building subset of one block.

    The block area is always the full boundary area regardless of the
    subset. Raises when the subset is empty (callers skip with a reason).
    """
    if group not in GROUPS:
        raise DataError(f"unknown group {group!r}")
    if not buildings:
        raise DataError(f"block {block.id!r}: empty building subset for {group!r}")
    block_area = block.boundary.area
    built = sum(b.footprint.area for b in buildings)
    center = np.asarray(city_center, dtype=float)
    distance = float(np.hypot(*(block.boundary.centroid - center)))
    if distance <= 0:
        raise DataError(f"block {block.id!r} coincides with the city center")
    return EfficiencyRecord(
        block_id=block.id,
        group=group,
        e_area=built / block_area,
        e_num=len(buildings) / block_area,
        distance=distance,
    )


@dataclass
class RegressionFit:
    """Ordinary least squares of log y on log x (power law y = a x^b)."""

    n: int
    log_a: float           # natural-log intercept
    b: float
    se_log_a: float
    se_b: float
    r2: float
    adjusted_r2: float
    f_stat: float
    p_value: float
    residual_se: float
    rejected: list[int] = field(default_factory=list)

    @property
    def log10_a(self) -> float:
        return self.log_a / math.log(10.0)

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "log_a_natural": self.log_a,
            "log_a_base10": self.log10_a,
            "b": self.b,
            "se_log_a": self.se_log_a,
            "se_b": self.se_b,
            "r2": self.r2,
            "adjusted_r2": self.adjusted_r2,
            "f_stat": self.f_stat,
            "p_value": self.p_value,
            "residual_se": self.residual_se,
            "rejected_points": self.rejected,
        }


def fit_power(x, y) -> RegressionFit:
    """Fit y = a x^b by OLS on natural logs.

    Nonpositive points are excluded and listed in the result. R^2 is on
    the log scale; the p-value comes from the F(1, n-2) distribution via
    the regularized incomplete beta function.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError("x and y must be 1-D and the same length")
    bad = np.flatnonzero((x <= 0) | (y <= 0) | ~np.isfinite(x) | ~np.isfinite(y))
    keep = np.setdiff1d(np.arange(len(x)), bad)
    if len(keep) < 3:
        raise DataError(f"need at least 3 positive points, have {len(keep)}")
    lx = np.log(x[keep])
    ly = np.log(y[keep])
    n = len(lx)
    mx = lx.mean()
    my = ly.mean()
    sxx = float(((lx - mx) ** 2).sum())
    if sxx <= 0:
        raise DataError("all x values identical; slope undefined")
    sxy = float(((lx - mx) * (ly - my)).sum())
    b = sxy / sxx
    log_a = my - b * mx
    fitted = log_a + b * lx
    ssr = float(((ly - fitted) ** 2).sum())
    sst = float(((ly - my) ** 2).sum())
    r2 = 0.0 if sst <= 0 else 1.0 - ssr / sst
    dof = n - 2
    sigma2 = ssr / dof
    se_b = math.sqrt(sigma2 / sxx)
    se_log_a = math.sqrt(sigma2 * (1.0 / n + mx**2 / sxx))
    if r2 >= 1.0:
        f_stat = math.inf
        p_value = np.nextafter(0.0, 1.0)
    elif r2 <= 0.0:
        f_stat = 0.0
        p_value = 1.0
    else:
        f_stat = (r2 / 1.0) / ((1.0 - r2) / dof)
        # survival of F(1, dof) via the regularized incomplete beta
        p_value = float(betainc(dof / 2.0, 0.5, dof / (dof + f_stat)))
        p_value = max(p_value, np.nextafter(0.0, 1.0))
    return RegressionFit(
        n=n,
        log_a=log_a,
        b=b,
        se_log_a=se_log_a,
        se_b=se_b,
        r2=r2,
        adjusted_r2=1.0 - (1.0 - r2) * (n - 1) / dof if sst > 0 else 0.0,
        f_stat=f_stat,
        p_value=p_value,
        residual_se=math.sqrt(sigma2),
        rejected=[int(i) for i in bad],
    )


class PowerLawRegressor(BaseEstimator, RegressorMixin):
    """Estimator wrapper over :func:`fit_power` (predicts a x^b)."""

    def fit(self, X, y):
        x = np.asarray(X, dtype=float).reshape(-1)
        self.fit_ = fit_power(x, y)
        return self

    def predict(self, X):
        if not hasattr(self, "fit_"):
            raise NotFittedError("regressor is not fitted")
        x = np.asarray(X, dtype=float).reshape(-1)
        return np.exp(self.fit_.log_a) * x**self.fit_.b


def compare_groups(
    fits: dict[str, dict[str, RegressionFit]],
    note: str | None = None,
) -> dict:
    """Tabulate R^2 and its change against the raw group, per indicator,
    in the fixed order raw -> core -> representative. Missing groups are
    flagged rather than failing."""
    report: dict = {"groups": [], "missing_groups": [], "indicators": {}}
    if note:
        report["note"] = note
    for group in GROUPS:
        (report["groups"] if group in fits else report["missing_groups"]).append(group)
    for indicator in ("e_area", "e_num"):
        rows = []
        base_r2 = None
        for group in GROUPS:
            fit = fits.get(group, {}).get(indicator)
            if fit is None:
                continue
            if group == "raw":
                base_r2 = fit.r2
            rows.append(
                {
                    "group": group,
                    "indicator": indicator,
                    "r2": fit.r2,
                    "delta_r2_vs_raw": None if base_r2 is None else fit.r2 - base_r2,
                    "significant_at_0.001": bool(fit.p_value < 0.001),
                    "fit": fit.to_json_dict(),
                }
            )
        report["indicators"][indicator] = rows
    return report


def write_efficiency_csv(path, records: list[EfficiencyRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["block_id", "group", "e_area", "e_num", "distance_m"])
        for r in records:
            writer.writerow(
                [r.block_id, r.group, repr(float(r.e_area)), repr(float(r.e_num)), repr(float(r.distance))]
            )
