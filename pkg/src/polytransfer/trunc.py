"""Truncated-statistics application: label-space truncation of regression noise.

Labels are y = f*(x) + eps with standard normal noise, observed only when y
falls in a truncation set S of the real line.  The truncated mean squared
error of a model f averages E[(y - f(x_i))^2] over y ~ N(f*(x_i), 1)
conditioned on S; the full MSE drops the conditioning.  With
alpha = min_i N(f*(x_i), 1; S), a change of measure gives

    truncated_mse <= (1/alpha) * full_mse          (always), and
    full_mse <= (C / alpha^2) * truncated_mse      (anti-concentration route),

since (y - c)^2 is a nonnegative degree-2 polynomial of y and the
untruncated normal is log-concave.  The coefficient does not depend on the
complexity of f*.

Label-space expectations over interval unions use panelized Gauss-Legendre
quadrature (absolute error well below 1e-10), keeping the inequality checks
free of Monte Carlo noise; general sets fall back to Monte Carlo.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from . import dist
from .mc import McSpec
from .transfer import HolderPair, TransferReport

QUAD_MASS_FLOOR = 1e-6
MC_MASS_FLOOR = 1e-3
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)
_PANEL_WIDTH = 2.0   # in noise standard deviations
_TAIL_CUT = 39.0     # N(0,1) density underflows past ~39 sd


class MassTooSmallError(ValueError):
    pass


@dataclass
class TruncatedRegressionInstance:
    """Covariates plus the true model and the label truncation set."""

    covariates: np.ndarray
    f_star: object                 # callable R^n -> R
    trunc_set: dist.TruncationSet

    def __post_init__(self):
        X = np.asarray(self.covariates, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.shape[0] < 1:
            raise ValueError("need at least one covariate")
        self.covariates = X
        self.locations = np.array([float(self.f_star(x)) for x in X])
        if not np.all(np.isfinite(self.locations)):
            raise ValueError("f_star produced a non-finite location")


def _intervals_of(s: dist.TruncationSet):
    if isinstance(s, dist.IntervalUnion):
        return s.intervals
    if isinstance(s, dist.Halfspace) and len(s.normal) == 1:
        a = float(s.normal[0])
        if a > 0:
            return ((-math.inf, s.offset / a),)
        if a < 0:
            return ((s.offset / a, math.inf),)
    if isinstance(s, dist.BoxSet) and len(s.lo) == 1:
        return ((float(s.lo[0]), float(s.hi[0])),)
    return None


def _panel_quad(lo: float, hi: float, fn) -> float:
    """Gauss-Legendre on panels of width <= _PANEL_WIDTH over [lo, hi]."""
    if hi <= lo:
        return 0.0
    n_panels = max(1, int(math.ceil((hi - lo) / _PANEL_WIDTH)))
    edges = np.linspace(lo, hi, n_panels + 1)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        y = mid + half * _GL_NODES
        total += half * float(np.sum(_GL_WEIGHTS * fn(y)))
    return total


def truncated_normal_moments(mu: float, intervals) -> tuple[float, float, float]:
    """(mass, first moment, second moment) of N(mu, 1) restricted to intervals."""
    m0 = m1 = m2 = 0.0
    for a, b in intervals:
        lo = max(a, mu - _TAIL_CUT)
        hi = min(b, mu + _TAIL_CUT)
        if hi <= lo:
            continue
        m0 += _panel_quad(lo, hi, lambda y: norm.pdf(y, mu, 1.0))
        m1 += _panel_quad(lo, hi, lambda y: y * norm.pdf(y, mu, 1.0))
        m2 += _panel_quad(lo, hi, lambda y: y * y * norm.pdf(y, mu, 1.0))
    return m0, m1, m2


def sample_truncated_normal(mean: float, var: float, s: dist.TruncationSet,
                            n: int, seed: int) -> np.ndarray:
    """Draws from N(mean, var) conditioned on s; all samples land inside s."""
    mass = float(dist.gaussian_mass([mean], [[var]], s))
    if mass < QUAD_MASS_FLOOR:
        raise MassTooSmallError(f"truncation mass {mass:.3g} below {QUAD_MASS_FLOOR}")
    tg = dist.TruncatedGaussian([mean], [[var]], s)
    return tg.sample(n, seed)[:, 0]


def _per_location_expected_sq(mu: float, c: float, s: dist.TruncationSet,
                              mc: McSpec | None) -> float:
    """E[(y - c)^2] for y ~ N(mu, 1) conditioned on s."""
    intervals = _intervals_of(s)
    if intervals is not None:
        m0, m1, m2 = truncated_normal_moments(mu, intervals)
        if m0 < QUAD_MASS_FLOOR:
            raise MassTooSmallError(f"truncation mass {m0:.3g} below {QUAD_MASS_FLOOR}")
        return (m2 - 2.0 * c * m1 + c * c * m0) / m0
    if mc is None:
        raise ValueError("general truncation sets need a Monte Carlo budget")
    mass = float(dist.gaussian_mass([mu], [[1.0]], s))
    if mass < MC_MASS_FLOOR:
        raise MassTooSmallError(f"truncation mass {mass:.3g} below {MC_MASS_FLOOR}")
    y = sample_truncated_normal(mu, 1.0, s, mc.n_samples, mc.seed)
    return float(np.mean((y - c) ** 2))


def truncated_mse(model, inst: TruncatedRegressionInstance,
                  mc: McSpec | None = None) -> float:
    """(1/N) sum_i E_{y ~ N_S(f*(x_i), 1)} [(y - model(x_i))^2]."""
    preds = np.array([float(model(x)) for x in inst.covariates])
    vals = [_per_location_expected_sq(mu, c, inst.trunc_set, mc)
            for mu, c in zip(inst.locations, preds)]
    return float(np.mean(vals))


def full_mse(model, inst: TruncatedRegressionInstance,
             mc: McSpec | None = None) -> float:
    """Same average without truncation: 1 + (f*(x_i) - model(x_i))^2 per point."""
    preds = np.array([float(model(x)) for x in inst.covariates])
    return float(np.mean(1.0 + (inst.locations - preds) ** 2))


def alpha_mass_min(inst: TruncatedRegressionInstance) -> float:
    """min_i N(f*(x_i), 1; S): the usable-mass floor of the instance."""
    masses = [float(dist.gaussian_mass([mu], [[1.0]], inst.trunc_set))
              for mu in inst.locations]
    return float(min(masses))


@dataclass
class TruncatedTransferResult:
    alpha: float
    truncated: float
    full: float
    forward: TransferReport    # full <= (C / alpha^2) truncated
    reverse: TransferReport    # truncated <= (1 / alpha) full

    @property
    def both_satisfied(self) -> bool:
        return self.forward.satisfied and self.reverse.satisfied


def save_instance(inst: TruncatedRegressionInstance, path) -> None:
    """Covariate CSV with a one-line truncation-set descriptor up top."""
    intervals = _intervals_of(inst.trunc_set)
    if intervals is None:
        raise ValueError("only interval-reducible sets serialize")
    desc = " ".join(f"{a!r}:{b!r}" for a, b in intervals)
    with open(path, "w", newline="") as fh:
        fh.write(f"# intervals {desc}\n")
        writer = csv.writer(fh)
        writer.writerow([f"x{i}" for i in range(inst.covariates.shape[1])])
        for row in inst.covariates:
            writer.writerow([repr(float(v)) for v in row])


def load_instance(path, f_star) -> TruncatedRegressionInstance:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("# intervals "):
            raise ValueError("missing truncation-set descriptor line")
        pairs = []
        for token in header[len("# intervals "):].split():
            a, b = token.split(":")
            pairs.append((float(a), float(b)))
        rows = list(csv.reader(fh))
    X = np.array([[float(v) for v in row] for row in rows[1:]])
    return TruncatedRegressionInstance(X, f_star, dist.IntervalUnion(tuple(pairs)))


def truncated_transfer_check(model, inst: TruncatedRegressionInstance,
                             constant: float = 1.0,
                             mc: McSpec | None = None) -> TruncatedTransferResult:
    """Report both directions of the truncated/full MSE comparison."""
    alpha = alpha_mass_min(inst)
    floor = QUAD_MASS_FLOOR if _intervals_of(inst.trunc_set) is not None else MC_MASS_FLOOR
    if alpha < max(floor, 1e-3):
        raise MassTooSmallError(f"alpha = {alpha:.3g} below the usable floor")
    t_mse = truncated_mse(model, inst, mc)
    f_mse = full_mse(model, inst, mc)
    holder = HolderPair(math.inf, 1.0)
    se = 0.0 if mc is None else f_mse / math.sqrt(mc.n_samples)
    coeff_fwd = constant / alpha ** 2
    forward = TransferReport(
        kind="truncated-forward", degree=2, holder=holder, constant=constant,
        bridge="target-is-log-concave", coefficient=coeff_fwd,
        lhs=f_mse, lhs_se=se, rhs=coeff_fwd * t_mse, rhs_se=coeff_fwd * se)
    coeff_rev = 1.0 / alpha
    reverse = TransferReport(
        kind="truncated-reverse", degree=2, holder=holder, constant=1.0,
        bridge="change-of-measure", coefficient=coeff_rev,
        lhs=t_mse, lhs_se=se, rhs=coeff_rev * f_mse, rhs_se=coeff_rev * se)
    return TruncatedTransferResult(alpha, t_mse, f_mse, forward, reverse)
