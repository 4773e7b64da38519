"""Distribution and test statistics for per-group yield analysis.

Covers Gaussian kernel density estimation with the Silverman plug-in
bandwidth, central-tendency binning, box-plot statistics, one-way ANOVA with
the categorical R-squared identity, the studentized range distribution
evaluated by Gauss-Legendre quadrature, and Tukey HSD pairwise comparisons
with family-wise confidence intervals.

All functions are pure; none mutate their inputs.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import brentq
from scipy.special import betainc, ndtr

# Tail probabilities below this floor are reported at the floor: quadrature
# noise makes smaller values meaningless, so consumers render them as
# "< 1e-12".
P_FLOOR = 1e-12

_SQRT_2PI = math.sqrt(2.0 * math.pi)


class DegenerateDataError(ValueError):
    """Raised when a sample has no usable spread for the requested statistic."""


# ---------------------------------------------------------------------------
# Kernel density estimation


@dataclass(frozen=True)
class KdeConfig:
    """``bandwidth_rule`` is "silverman" or "fixed"; fixed requires ``h > 0``."""

    bandwidth_rule: str = "silverman"
    h: float | None = None
    evaluation_points: int = 256

    def __post_init__(self):
        if self.bandwidth_rule not in ("silverman", "fixed"):
            raise ValueError(f"unknown bandwidth rule {self.bandwidth_rule!r}")
        if self.bandwidth_rule == "fixed" and not (self.h is not None and self.h > 0):
            raise ValueError("fixed bandwidth requires h > 0")
        if self.evaluation_points < 2:
            raise ValueError("evaluation_points must be >= 2")


def silverman_bandwidth(data: Sequence[float]) -> float:
    """Plug-in bandwidth h = (4 sigma^5 / (3 n))**(1/5), sigma with ddof=1."""
    arr = np.asarray(data, dtype=np.float64)
    n = arr.size
    if n < 2:
        raise DegenerateDataError(f"bandwidth needs at least 2 samples, got {n}")
    sigma = float(np.std(arr, ddof=1))
    if sigma == 0.0:
        raise DegenerateDataError("zero variance: supply a fixed bandwidth instead")
    return (4.0 * sigma**5 / (3.0 * n)) ** 0.2


def resolve_bandwidth(data: Sequence[float], config: KdeConfig) -> float:
    if config.bandwidth_rule == "fixed":
        return float(config.h)  # type: ignore[arg-type]
    return silverman_bandwidth(data)


def kde_evaluate(data: Sequence[float], config: KdeConfig, x: Sequence[float]) -> np.ndarray:
    """Mean-of-Gaussians density f(x) = (1/n) sum_i K_h(x - x_i)."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.size < 1:
        raise ValueError("kde needs at least one sample")
    h = resolve_bandwidth(arr, config)
    pts = np.asarray(x, dtype=np.float64)
    z = (pts[..., None] - arr) / h
    return np.exp(-0.5 * z * z).sum(axis=-1) / (arr.size * h * _SQRT_2PI)


def kde_curve(data: Sequence[float], config: KdeConfig) -> tuple[np.ndarray, np.ndarray]:
    """Density sampled on a regular grid padded 3 bandwidths past the data."""
    arr = np.asarray(data, dtype=np.float64)
    h = resolve_bandwidth(arr, config)
    x = np.linspace(arr.min() - 3.0 * h, arr.max() + 3.0 * h, config.evaluation_points)
    return x, kde_evaluate(arr, config, x)


# ---------------------------------------------------------------------------
# Binning


@dataclass(frozen=True)
class BinSpec:
    """Grouping rule: interval bins over sorted edges, or categorical labels.

    Interval membership is (a, b]; the first interval also includes its left
    edge so the data minimum is not orphaned.
    """

    kind: str  # "central_tendency" | "explicit_edges" | "categorical"
    labels: tuple[str, ...]
    edges: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("central_tendency", "explicit_edges", "categorical"):
            raise ValueError(f"unknown bin kind {self.kind!r}")
        if self.kind == "categorical":
            if self.edges is not None:
                raise ValueError("categorical bins take no edges")
        else:
            if self.edges is None or len(self.edges) < 2:
                raise ValueError("interval bins need at least 2 edges")
            if any(a >= b for a, b in zip(self.edges, self.edges[1:])):
                raise ValueError(f"edges must be strictly increasing, got {list(self.edges)}")
            if len(self.labels) != len(self.edges) - 1:
                raise ValueError("need exactly one label per interval")


def format_edge(v: float) -> str:
    """Edge rendered to at most 3 decimals, trailing zeros trimmed."""
    return f"{v:.3f}".rstrip("0").rstrip(".")


def interval_label(a: float, b: float) -> str:
    return f"({format_edge(a)}, {format_edge(b)}]"


def central_tendency_edges(minimum: float, mean: float, sd: float, maximum: float) -> list[float]:
    """Edges [min, mean-sd, mean, mean+sd, max]; must come out strictly increasing."""
    edges = [minimum, mean - sd, mean, mean + sd, maximum]
    if any(a >= b for a, b in zip(edges, edges[1:])):
        raise DegenerateDataError(
            f"central-tendency edges are not strictly increasing: {edges}; "
            "supply explicit edges instead"
        )
    return edges


def central_tendency_bins(data: Sequence[float]) -> BinSpec:
    """Four bins splitting the data at mean-sd, mean, and mean+sd."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.size < 2:
        raise DegenerateDataError(f"binning needs at least 2 values, got {arr.size}")
    sd = float(np.std(arr, ddof=1))
    if sd == 0.0:
        raise DegenerateDataError("zero variance: data cannot be binned by spread")
    edges = central_tendency_edges(float(arr.min()), float(np.mean(arr)), sd, float(arr.max()))
    return bins_from_edges(edges, kind="central_tendency")


def bins_from_edges(edges: Sequence[float], kind: str = "explicit_edges") -> BinSpec:
    labels = tuple(interval_label(a, b) for a, b in zip(edges, edges[1:]))
    return BinSpec(kind=kind, labels=labels, edges=tuple(float(e) for e in edges))


def categorical_bins(values: Sequence[object]) -> BinSpec:
    """One bin per distinct non-missing value, labels sorted."""
    labels = sorted({str(v) for v in values if v is not None})
    return BinSpec(kind="categorical", labels=tuple(labels))


def assign_bins(values: Sequence[object], spec: BinSpec) -> list[str | None]:
    """Per-value group label; values outside every bin map to None."""
    if spec.kind == "categorical":
        known = set(spec.labels)
        return [str(v) if v is not None and str(v) in known else None for v in values]

    edges = spec.edges
    assert edges is not None
    out: list[str | None] = []
    for v in values:
        if v is None or (isinstance(v, float) and math.isnan(v)):
            out.append(None)
            continue
        v = float(v)
        if v == edges[0]:
            out.append(spec.labels[0])
        elif edges[0] < v <= edges[-1]:
            out.append(spec.labels[bisect_left(edges, v) - 1])
        else:
            out.append(None)
    return out


# ---------------------------------------------------------------------------
# Box statistics


@dataclass(frozen=True)
class BoxStats:
    q1: float
    median: float
    q3: float
    iqr: float
    whisker_low: float
    whisker_high: float
    mean: float
    n: int
    outliers: tuple[float, ...]


def box_stats(values: Sequence[float]) -> BoxStats:
    """Quartiles by linear interpolation at rank p*(n-1)+1, whiskers at the
    most extreme observations within 1.5*IQR of the quartiles."""
    arr = np.sort(np.asarray(values, dtype=np.float64))
    if arr.size == 0:
        raise ValueError("box_stats needs at least one value")
    q1, median, q3 = (float(q) for q in np.quantile(arr, [0.25, 0.5, 0.75]))
    iqr = q3 - q1
    lo_fence = q1 - 1.5 * iqr
    hi_fence = q3 + 1.5 * iqr
    inside = arr[(arr >= lo_fence) & (arr <= hi_fence)]
    # quartiles always lie within the fences, so inside is never empty
    whisker_low = float(inside[0])
    whisker_high = float(inside[-1])
    outliers = tuple(float(v) for v in arr[(arr < lo_fence) | (arr > hi_fence)])
    return BoxStats(
        q1=q1,
        median=median,
        q3=q3,
        iqr=iqr,
        whisker_low=whisker_low,
        whisker_high=whisker_high,
        mean=float(arr.mean()),
        n=int(arr.size),
        outliers=outliers,
    )


# ---------------------------------------------------------------------------
# One-way ANOVA


@dataclass(frozen=True)
class GroupSummary:
    label: str
    n: int
    mean: float
    variance: float | None  # None for singleton groups


@dataclass(frozen=True)
class AnovaResult:
    ssb: float
    ssw: float
    sst: float
    df_between: int
    df_within: int
    msb: float
    msw: float
    f: float
    p_value: float
    r_squared: float
    group_summaries: tuple[GroupSummary, ...]


def _check_groups(groups: Mapping[str, Sequence[float]]) -> dict[str, np.ndarray]:
    if len(groups) < 2:
        raise ValueError(f"need at least 2 groups, got {len(groups)}")
    arrays: dict[str, np.ndarray] = {}
    for label, vals in groups.items():
        arr = np.asarray(vals, dtype=np.float64)
        if arr.size == 0:
            raise ValueError(f"group {label!r} is empty")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"group {label!r} contains non-finite values")
        arrays[str(label)] = arr
    return arrays


def anova_oneway(groups: Mapping[str, Sequence[float]]) -> AnovaResult:
    """Single-factor ANOVA over labeled groups.

    SSB = sum n_i (mean_i - grand)^2, SSW = sum of within-group squared
    deviations, SST over the pooled sample; F = MSB/MSW with df (k-1, N-k),
    p the upper F tail, and R^2 = SSB/SST.

    A zero MSW is an error unless SSB is also zero, in which case the data
    are completely constant and F is 0 by convention.
    """
    arrays = _check_groups(groups)
    k = len(arrays)
    n_total = sum(a.size for a in arrays.values())
    df_between = k - 1
    df_within = n_total - k
    if df_within < 1:
        raise ValueError(f"no residual degrees of freedom: N={n_total}, k={k}")

    pooled = np.concatenate(list(arrays.values()))
    grand = float(pooled.mean())
    ssb = float(sum(a.size * (a.mean() - grand) ** 2 for a in arrays.values()))
    ssw = float(sum(((a - a.mean()) ** 2).sum() for a in arrays.values()))
    sst = float(((pooled - grand) ** 2).sum())

    msb = ssb / df_between
    msw = ssw / df_within
    if msw == 0.0:
        if ssb != 0.0:
            raise DegenerateDataError("within-group variance is zero; F is undefined")
        f = 0.0
    else:
        f = msb / msw
    p = max(f_distribution_sf(f, df_between, df_within), P_FLOOR)
    r_squared = ssb / sst if sst > 0.0 else 0.0

    summaries = tuple(
        GroupSummary(
            label=label,
            n=int(a.size),
            mean=float(a.mean()),
            variance=float(np.var(a, ddof=1)) if a.size > 1 else None,
        )
        for label, a in arrays.items()
    )
    return AnovaResult(
        ssb=ssb,
        ssw=ssw,
        sst=sst,
        df_between=df_between,
        df_within=df_within,
        msb=msb,
        msw=msw,
        f=f,
        p_value=p,
        r_squared=r_squared,
        group_summaries=summaries,
    )


def f_distribution_sf(f: float, df1: int, df2: int) -> float:
    """Upper tail of the F distribution via the regularized incomplete beta."""
    if df1 < 1 or df2 < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got ({df1}, {df2})")
    if f < 0:
        raise ValueError(f"F statistic must be nonnegative, got {f}")
    # P(F > f) = I_{df2/(df2 + df1 f)}(df2/2, df1/2)
    x = df2 / (df2 + df1 * f)
    return float(min(1.0, max(0.0, betainc(df2 / 2.0, df1 / 2.0, x))))


# ---------------------------------------------------------------------------
# Studentized range distribution
#
# Q = R / S with R the range of k independent standard normals and S an
# independent chi_df / sqrt(df) scale estimate.  Conditioning on S = s:
#
#   P(Q <= q) = integral over s of f_S(s) * P(R <= q s) ds
#   P(R <= r) = k * integral phi(z) * (Phi(z) - Phi(z - r))**(k-1) dz
#
# Both integrals are smooth, so fixed-width Gauss-Legendre panels reach far
# below the 1e-5 accuracy target.

_GL_NODES, _GL_WEIGHTS = leggauss(24)


def _panel_quadrature(a: float, b: float, max_width: float) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights tiling [a, b] in panels <= max_width wide."""
    n_panels = max(1, math.ceil((b - a) / max_width))
    edges = np.linspace(a, b, n_panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = mid[:, None] + half[:, None] * _GL_NODES
    weights = half[:, None] * np.broadcast_to(_GL_WEIGHTS, nodes.shape)
    return nodes.ravel(), weights.ravel()


def _phi(z: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * z * z) / _SQRT_2PI


def _range_cdf_at_scales(q: float, k: int, s: np.ndarray) -> np.ndarray:
    """P(R <= q*s_i) for every scale in s, one shared z quadrature."""
    # The integrand is O(phi(z)), so capping the upper limit at 40 discards
    # less than 1e-300 even when q*s extends further.
    z_hi = min(10.0 + q * float(s.max()), 40.0)
    z, wz = _panel_quadrature(-10.0, z_hi, max_width=0.5)
    diff = ndtr(z) - ndtr(z[None, :] - q * s[:, None])
    inner = (wz * _phi(z) * diff ** (k - 1)).sum(axis=1)
    return k * inner


def _chi_scale_logpdf(s: np.ndarray, df: float) -> np.ndarray:
    """log density of chi_df / sqrt(df) (unit-mean-square scale estimate)."""
    return (
        (1.0 - df / 2.0) * math.log(2.0)
        + (df / 2.0) * math.log(df)
        - math.lgamma(df / 2.0)
        + (df - 1.0) * np.log(s)
        - df * s * s / 2.0
    )


def _validate_range_params(k: int, df: float):
    if not isinstance(k, (int, np.integer)) or k < 2:
        raise ValueError(f"k must be an integer >= 2, got {k!r}")
    if not (df >= 1):
        raise ValueError(f"df must be >= 1 (or inf), got {df!r}")


def studentized_range_sf(q: float, k: int, df: float) -> float:
    """P(Q_{k,df} > q); df=inf collapses the scale integral."""
    _validate_range_params(k, df)
    if q < 0:
        raise ValueError(f"q must be nonnegative, got {q}")
    if q == 0.0:
        return 1.0

    if math.isinf(df) or df > 1e5:
        cdf = float(_range_cdf_at_scales(q, k, np.array([1.0]))[0])
        return min(1.0, max(0.0, 1.0 - cdf))

    spread = 8.0 / math.sqrt(2.0 * df)
    s_lo = max(0.0, 1.0 - spread)
    s_hi = 1.0 + spread
    s, ws = _panel_quadrature(s_lo, s_hi, max_width=max((s_hi - s_lo) / 16.0, 0.05))
    density = np.exp(_chi_scale_logpdf(s, df))
    cdf = float((ws * density * _range_cdf_at_scales(q, k, s)).sum())
    return min(1.0, max(0.0, 1.0 - cdf))


def studentized_range_quantile(alpha: float, k: int, df: float) -> float:
    """q with studentized_range_sf(q, k, df) = alpha, to 1e-6 in q."""
    _validate_range_params(k, df)
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")

    hi = 1.0
    while studentized_range_sf(hi, k, df) > alpha:
        hi *= 2.0
        if hi > 1024.0:
            raise RuntimeError(f"quantile bracket failed for alpha={alpha}, k={k}, df={df}")
    try:
        return float(
            brentq(lambda x: studentized_range_sf(x, k, df) - alpha, 0.0, hi, xtol=1e-7)
        )
    except RuntimeError as exc:
        raise RuntimeError(f"quantile search failed for alpha={alpha}, k={k}, df={df}") from exc


# ---------------------------------------------------------------------------
# Tukey HSD


@dataclass(frozen=True)
class TukeyPair:
    group1: str
    group2: str
    mean_diff: float
    se: float
    q_stat: float
    p_adj: float
    ci_low: float
    ci_high: float
    reject: bool


@dataclass(frozen=True)
class TukeyResult:
    pairs: tuple[TukeyPair, ...]
    fwer: float
    q_critical: float
    se_convention: str


def fwer_per_comparison(alpha_pc: float, m: int) -> float:
    """Family-wise error rate 1 - (1 - alpha)^m over m independent tests."""
    if not (0.0 < alpha_pc < 1.0):
        raise ValueError(f"alpha must be in (0, 1), got {alpha_pc}")
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    return 1.0 - (1.0 - alpha_pc) ** m


def tukey_hsd(
    groups: Mapping[str, Sequence[float]],
    fwer: float = 0.01,
    se_convention: str = "paper",
    anova: AnovaResult | None = None,
) -> TukeyResult:
    """All-pairs comparison of group means against the studentized range.

    Pairs are enumerated in sorted label order with mean_diff = mean(group2)
    - mean(group1).  The default "paper" convention takes
    SE = sqrt(MSE/n_i + MSE/n_j); "kramer" divides that by sqrt(2), which is
    the textbook Tukey-Kramer scaling.
    """
    if not (0.0 < fwer < 1.0):
        raise ValueError(f"fwer must be in (0, 1), got {fwer}")
    if se_convention not in ("paper", "kramer"):
        raise ValueError(f"unknown SE convention {se_convention!r}")
    arrays = _check_groups(groups)
    if anova is None:
        anova = anova_oneway(groups)
    mse = anova.msw
    if mse == 0.0:
        raise DegenerateDataError("zero mean squared error; pairwise SE is undefined")

    k = len(arrays)
    df = anova.df_within
    labels = sorted(arrays)
    q_critical = studentized_range_quantile(fwer, k, df)

    pairs = []
    for i, g1 in enumerate(labels):
        for g2 in labels[i + 1 :]:
            a, b = arrays[g1], arrays[g2]
            diff = float(b.mean() - a.mean())
            se = math.sqrt(mse / a.size + mse / b.size)
            if se_convention == "kramer":
                se /= math.sqrt(2.0)
            q_stat = diff / se
            p_adj = max(studentized_range_sf(abs(q_stat), k, df), P_FLOOR)
            half = q_critical * se
            pairs.append(
                TukeyPair(
                    group1=g1,
                    group2=g2,
                    mean_diff=diff,
                    se=se,
                    q_stat=q_stat,
                    p_adj=p_adj,
                    ci_low=diff - half,
                    ci_high=diff + half,
                    reject=p_adj < fwer,
                )
            )
    return TukeyResult(pairs=tuple(pairs), fwer=fwer, q_critical=q_critical, se_convention=se_convention)
