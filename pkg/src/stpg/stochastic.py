"""Parameter domain, coefficient laws, quadrature and moment estimation.

The random diffusion coefficient is treated as a deterministic function
of a scalar parameter, so integrals over the parameter domain can be
evaluated with deterministic quadrature ladders instead of Monte Carlo.
Midpoint rules are the default because they never place nodes on the
interval endpoints; whether they avoid interior singular points depends
on the rule size and is asserted at construction time.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

__all__ = [
    "ParameterDomain",
    "CoefficientModel",
    "MomentEstimate",
    "quadrature",
    "lp_norm",
    "predict_max_moment",
    "predict_pbar",
    "moment_exponents",
    "classify_trend",
    "singular_example_moments",
]

_SAMPLING_MODES = ("midpoint-quadrature", "gauss-legendre", "monte-carlo")


@dataclass(frozen=True)
class ParameterDomain:
    """Scalar parameter domain with a probability measure and a rule family.

    kind "uniform-interval" is the uniform law on [low, high];
    kind "lognormal" maps rules on (0, 1) through the lognormal inverse
    CDF with the given location and scale.
    """

    kind: str = "uniform-interval"
    low: float = -0.5
    high: float = 0.5
    location: float = 0.0
    scale: float = 1.0
    sampling: str = "midpoint-quadrature"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("uniform-interval", "lognormal"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.sampling not in _SAMPLING_MODES:
            raise ValueError(f"unknown sampling mode {self.sampling!r}")
        if self.kind == "uniform-interval" and not self.low < self.high:
            raise ValueError("empty parameter interval")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    def transform(self, unit: np.ndarray) -> np.ndarray:
        """Map points of (0, 1) to parameter values."""
        unit = np.asarray(unit, dtype=float)
        if self.kind == "uniform-interval":
            return self.low + (self.high - self.low) * unit
        return np.exp(self.location + self.scale * ndtri(unit))


def quadrature(domain: ParameterDomain, n: int, avoid=()) -> tuple:
    """Nodes and probability weights of a size-n rule on the domain.

    Midpoint rules place nodes at the cell centers of a uniform grid on
    (0, 1); Gauss rules use Legendre nodes rescaled to (0, 1);
    Monte Carlo draws each sample from an independent counter-derived
    generator so that serial and parallel evaluation agree. Nodes are
    checked against the avoid list of singular points and the rule is
    rejected if one collides.
    """
    if n < 1:
        raise ValueError("rule size must be at least 1")
    if domain.sampling == "midpoint-quadrature":
        unit = (np.arange(n) + 0.5) / n
        weights = np.full(n, 1.0 / n)
    elif domain.sampling == "gauss-legendre":
        gx, gw = np.polynomial.legendre.leggauss(n)
        unit = 0.5 * (gx + 1.0)
        weights = 0.5 * gw
    else:
        unit = np.array([
            np.random.default_rng([domain.seed, i]).uniform() for i in range(n)
        ])
        weights = np.full(n, 1.0 / n)
    nodes = domain.transform(unit)
    for point in avoid:
        gap = np.min(np.abs(nodes - point))
        if gap < 1e-12:
            raise ValueError(
                f"rule of size {n} places a node at the singular point {point}")
    return nodes, weights


_CASES = {
    # name: (a(omega), c0(omega), singular points); evaluation happens on
    # numpy scalars so singular points yield inf instead of raising
    "a": (lambda w: 1.0 + 1.0 / w ** 2, lambda w: 1.0 + w ** 3, (0.0,)),
    "b": (lambda w: np.abs(w) ** 0.99, lambda w: 1.0 + w ** 3, (0.0,)),
    "c": (lambda w: np.abs(w) ** 0.99, lambda w: np.abs(w) ** -0.5, (0.0,)),
    "d": (lambda w: np.abs(w) ** 0.99, lambda w: np.abs(w - 0.4) ** -0.5,
          (0.0, 0.4)),
    "lognormal": (lambda w: w, lambda w: np.float64(1.0), ()),
    "constant": (lambda w: np.float64(1.0), lambda w: np.float64(1.0), ()),
    "zero": (lambda w: np.float64(1.0), lambda w: np.float64(0.0), ()),
}


@dataclass(frozen=True)
class CoefficientModel:
    """Diffusion value a(w) and forcing amplitude c0(w) for one law.

    Evaluation at a singular point yields a non-finite or degenerate
    value rather than raising; downstream solves flag such paths.
    """

    case: str = "custom"
    a_fn: callable = None
    c0_fn: callable = None
    singular_points: tuple = ()

    def __post_init__(self):
        if self.case != "custom":
            if self.case not in _CASES:
                raise ValueError(f"unknown coefficient case {self.case!r}")
            a_fn, c0_fn, singular = _CASES[self.case]
            object.__setattr__(self, "a_fn", a_fn)
            object.__setattr__(self, "c0_fn", c0_fn)
            object.__setattr__(self, "singular_points", singular)
        elif self.a_fn is None or self.c0_fn is None:
            raise ValueError("custom models need a_fn and c0_fn")

    def a(self, omega: float) -> float:
        with np.errstate(divide="ignore", over="ignore"):
            return float(self.a_fn(np.float64(omega)))

    def c0(self, omega: float) -> float:
        with np.errstate(divide="ignore", over="ignore"):
            return float(self.c0_fn(np.float64(omega)))

    def rho(self, omega: float) -> float:
        """Boundedness over coercivity; identically 1 for scalar diffusion."""
        return 1.0


def default_domain(case: str, sampling: str = "midpoint-quadrature",
                   seed: int = 0) -> ParameterDomain:
    """Parameter domain conventionally paired with a named case."""
    if case == "lognormal":
        return ParameterDomain(kind="lognormal", sampling=sampling, seed=seed)
    return ParameterDomain(kind="uniform-interval", low=-0.5, high=0.5,
                           sampling=sampling, seed=seed)


@dataclass
class MomentEstimate:
    """Quadrature ladder of estimates of one moment of a pathwise quantity."""

    p: float
    sizes: list
    estimates: list
    flagged: list
    classification: str = "inconclusive"

    def __post_init__(self):
        sizes = list(self.sizes)
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError("ladder sizes must be strictly increasing")
        if any(e < 0 for e, f in zip(self.estimates, self.flagged) if not f):
            raise ValueError("moment estimates must be nonnegative")


def lp_norm(p: float, values, weights) -> tuple:
    """Weighted p-mean (sum w_i v_i^p)^(1/p) with flag propagation.

    Returns (estimate, flagged). Non-finite entries flag the estimate
    instead of poisoning downstream arithmetic; negative entries are
    rejected because the values are norms.
    """
    if p < 1:
        raise ValueError("p must be at least 1")
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.shape != weights.shape:
        raise ValueError("values and weights must have matching shapes")
    finite = np.isfinite(values)
    if np.any(values[finite] < 0):
        raise ValueError("pathwise norms must be nonnegative")
    if not np.all(finite):
        return math.nan, True
    est = float(np.sum(weights * values ** p) ** (1.0 / p))
    return est, not math.isfinite(est)


def predict_max_moment(alpha: float, beta: float, gamma: float) -> float:
    """Largest guaranteed moment of the solution from the data exponents.

        p = min( alpha gamma / (alpha + gamma),
                 2 beta gamma / (beta + 2 gamma) )

    with the limit conventions for infinite exponents, so (inf, inf,
    gamma) gives gamma. The value is a supremum: data integrable to
    orders below alpha, beta, gamma give solution moments of every
    order below p.
    """
    for name, value in (("alpha", alpha), ("beta", beta), ("gamma", gamma)):
        if value < 1:
            raise ValueError(f"{name} must be at least 1")
    if math.isinf(gamma):
        first = alpha
    elif math.isinf(alpha):
        first = gamma
    else:
        first = alpha * gamma / (alpha + gamma)
    if math.isinf(gamma):
        second = beta
    elif math.isinf(beta):
        second = 2.0 * gamma
    else:
        second = 2.0 * beta * gamma / (beta + 2.0 * gamma)
    return min(first, second)


def predict_pbar(p: float, theta: float) -> tuple:
    """Moment surviving the fully discrete quasi-optimality transfer.

    p_bar = p - p^2 / (theta + p), equal to p when the boundedness
    variable has moments of every order. Returns (p_bar, flagged) with
    the flag set when the result drops below 1 and no moment is
    guaranteed.
    """
    if p < 1:
        raise ValueError("p must be at least 1")
    if theta < 1:
        raise ValueError("theta must be at least 1")
    p_bar = p if math.isinf(theta) else p - p * p / (theta + p)
    return p_bar, p_bar < 1


def moment_exponents(alpha: float, beta: float, gamma: float,
                     theta: float = math.inf):
    """Bundle the data exponents with the derived solution moments."""
    from .constants import MomentExponents

    p = predict_max_moment(alpha, beta, gamma)
    if p >= 1:
        p_bar, _ = predict_pbar(p, theta)
    else:
        p_bar = math.nan
    return MomentExponents(alpha=alpha, beta=beta, gamma=gamma, theta=theta,
                           p=p, p_bar=p_bar)


def singular_example_moments(exponent: float) -> tuple:
    """Moment exponents for coinciding power-law singularities.

    For diffusion |w - z0|^s and forcing |w - z1|^(-s) with separate
    singular points, a pathwise factorization gives moments up to 1/s
    while the generic prediction from the data exponents alone gives
    the more conservative 1/(2 s). Returns (predicted, pathwise).
    """
    if not 0 < exponent < 1:
        raise ValueError("exponent must lie in (0, 1)")
    data_order = 1.0 / exponent
    predicted = predict_max_moment(data_order, math.inf, data_order)
    return predicted, data_order


def classify_trend(estimates, delta: float = 0.05, decay: float = 1.3,
                   window: int = 3) -> str:
    """Mechanical convergence judgment for a doubling quadrature ladder.

    converging: the increments decay by an average factor of at least
    `decay` per rung across the ladder (geometric mean of the first to
    last increment), or the tail has stopped increasing. diverging: not
    converging, and the last `window` successive ratios all stay at or
    above 1 + delta. Anything else is inconclusive.

    Convergence is judged first: a ladder with collapsing increments
    can still show large early ratios, and the averaged increment rate
    keeps the judgment stable when an integrable singularity makes
    individual midpoint increments oscillate.
    """
    est = np.asarray(list(estimates), dtype=float)
    if len(est) < 4:
        raise ValueError("need at least 4 ladder points")
    if not np.all(np.isfinite(est)):
        return "inconclusive"

    inc = np.diff(est)
    scale = max(np.max(np.abs(est)), 1e-300)
    converged = abs(inc[-1]) <= 1e-12 * scale
    if not converged and inc[0] > 0:
        rate = (inc[0] / abs(inc[-1])) ** (1.0 / (len(inc) - 1))
        converged = rate >= decay
    if converged:
        return "converging"

    ratios = est[1:] / est[:-1]
    recent = ratios[-min(window, len(ratios)):]
    if np.all(recent >= 1.0 + delta):
        return "diverging"
    return "inconclusive"
