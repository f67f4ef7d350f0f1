"""Parameters, particle configurations and the duality observable.

Rates are kept as exact rationals so that boundary conditions such as
alpha/p + gamma/q = 1 can be decided with zero rounding error; numerical
modules convert to float at their entry points.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

RationalLike = Union[int, str, Fraction, float]


class ChamberError(ValueError):
    """Site vector violates the required ordered chamber."""


class ValidityError(ValueError):
    """Parameters outside the validity region of a formula."""


def as_fraction(value: RationalLike) -> Fraction:
    """Coerce to an exact Fraction.

    Floats are converted through their shortest decimal repr, so 0.9
    becomes 9/10 rather than the binary expansion of the double.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


@dataclass(frozen=True)
class ModelParams:
    """Jump and boundary rates of half-line open ASEP.

    p_rate/q_rate are the right/left bulk jump rates, alpha/gamma the
    injection/ejection rates at site 1.  The asymmetry q = q_rate/p_rate
    must lie in (0, 1).
    """

    p_rate: Fraction
    q_rate: Fraction
    alpha: Fraction
    gamma: Fraction

    def __post_init__(self):
        for name in ("p_rate", "q_rate", "alpha", "gamma"):
            object.__setattr__(self, name, as_fraction(getattr(self, name)))
        if self.p_rate <= 0 or self.q_rate <= 0:
            raise ValidityError("jump rates must be positive")
        if self.alpha < 0 or self.gamma < 0:
            raise ValidityError("boundary rates must be nonnegative")
        if not (0 < self.q < 1):
            raise ValidityError(f"asymmetry q = q_rate/p_rate must be in (0,1), got {self.q}")

    @classmethod
    def from_density(cls, p_rate: RationalLike, q_rate: RationalLike,
                     rho: RationalLike) -> "ModelParams":
        """Boundary rates from a density: alpha = rho*p, gamma = (1-rho)*q.

        This parametrization satisfies alpha/p + gamma/q = 1 identically.
        """
        p, q, r = as_fraction(p_rate), as_fraction(q_rate), as_fraction(rho)
        if not (0 <= r <= 1):
            raise ValidityError("density must be in [0,1]")
        return cls(p, q, r * p, (1 - r) * q)

    @property
    def q(self) -> Fraction:
        return self.q_rate / self.p_rate

    @property
    def rho(self) -> Fraction:
        return self.alpha / self.p_rate

    def liggett_ok(self) -> bool:
        """alpha/p + gamma/q = 1, decided exactly."""
        return self.alpha / self.p_rate + self.gamma / self.q_rate == 1

    def formula_ok(self) -> bool:
        """rho in (1/(1+sqrt(q)), 1], i.e. rho/(1-rho) > 1/sqrt(q), exactly.

        rho > 1/(1+sqrt(q))  <=>  rho*sqrt(q) > 1-rho  <=>  q*rho^2 > (1-rho)^2
        for rho < 1; rho = 1 always qualifies.
        """
        r = self.rho
        if r > 1:
            return False
        if r == 1:
            return True
        return self.q * r * r > (1 - r) * (1 - r)


@dataclass(frozen=True)
class SegmentParams(ModelParams):
    """Open ASEP on a segment: a second reservoir acts at site ell-1.

    beta annihilates there (through-count N goes up), delta creates
    (N goes down).  ell is the dual-lattice length; occupation variables
    live on sites 1..ell-1.
    """

    ell: int = 2
    beta: Fraction = Fraction(0)
    delta: Fraction = Fraction(0)

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "beta", as_fraction(self.beta))
        object.__setattr__(self, "delta", as_fraction(self.delta))
        if not isinstance(self.ell, int) or self.ell < 2:
            raise ValidityError("segment length parameter ell must be an integer >= 2")
        if self.beta < 0 or self.delta < 0:
            raise ValidityError("boundary rates must be nonnegative")

    @classmethod
    def from_densities(cls, p_rate: RationalLike, q_rate: RationalLike,
                       rho0: RationalLike, rho_ell: RationalLike, ell: int) -> "SegmentParams":
        p, q = as_fraction(p_rate), as_fraction(q_rate)
        r0, rl = as_fraction(rho0), as_fraction(rho_ell)
        for r in (r0, rl):
            if not (0 <= r <= 1):
                raise ValidityError("densities must be in [0,1]")
        return cls(p, q, r0 * p, (1 - r0) * q, ell=ell,
                   beta=(1 - rl) * p, delta=rl * q)

    @property
    def rho0(self) -> Fraction:
        return self.alpha / self.p_rate

    @property
    def rho_ell(self) -> Fraction:
        return self.delta / self.q_rate

    def liggett2_ok(self) -> bool:
        """Both boundary conditions alpha/p+gamma/q = 1 and beta/p+delta/q = 1."""
        return self.liggett_ok() and self.beta / self.p_rate + self.delta / self.q_rate == 1


@dataclass(frozen=True)
class AsepState:
    """Half-line configuration as the (finite) set of occupied sites."""

    occupied: frozenset

    def __post_init__(self):
        object.__setattr__(self, "occupied", frozenset(self.occupied))
        if any((not isinstance(s, int)) or s < 1 for s in self.occupied):
            raise ValueError("occupied sites must be integers >= 1")

    @classmethod
    def empty(cls) -> "AsepState":
        return cls(frozenset())


@dataclass(frozen=True)
class SegmentState:
    """Segment configuration: occupation bits on 1..ell-1 plus through-count."""

    eta: tuple
    n_ell: int = 0

    def __post_init__(self):
        object.__setattr__(self, "eta", tuple(int(b) for b in self.eta))
        if any(b not in (0, 1) for b in self.eta):
            raise ValueError("eta must be a 0/1 vector")

    @property
    def ell(self) -> int:
        return len(self.eta) + 1

    @classmethod
    def empty(cls, ell: int) -> "SegmentState":
        return cls((0,) * (ell - 1), 0)


def check_chamber(x: Sequence[int], low: int = 1, high: int | None = None) -> tuple:
    """Validate a strictly increasing site vector within [low, high]."""
    xs = tuple(int(v) for v in x)
    if not xs:
        raise ChamberError("site vector must be nonempty")
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise ChamberError(f"site vector must be strictly increasing, got {xs}")
    if xs[0] < low:
        raise ChamberError(f"first site {xs[0]} below {low}")
    if high is not None and xs[-1] > high:
        raise ChamberError(f"last site {xs[-1]} above {high}")
    return xs


def current(state: AsepState, x: int):
    """Number of particles at or to the right of site x."""
    return sum(1 for s in state.occupied if s >= x)


def h_product(occupied: Iterable[int], x: Sequence[int], q):
    """prod_i q^{N_{x_i}} without chamber validation (any integer sites).

    Works for exact Fraction q as well as float q; used internally by the
    duality verifier on arbitrary (possibly unordered) site vectors.
    """
    occ = list(occupied)
    total = 0
    for xi in x:
        total += sum(1 for s in occ if s >= xi)
    return q ** total


def observable_h(state: AsepState, x: Sequence[int], q):
    """Duality observable prod_i q^{N_{x_i}} on a strictly increasing chamber vector."""
    xs = check_chamber(x, low=1)
    return h_product(state.occupied, xs, q)


def current_segment(state: SegmentState, x: int):
    """Segment current: particles on sites >= x plus the through-count."""
    return sum(state.eta[x - 1:]) + state.n_ell


def h_product_segment(eta: Sequence[int], n_ell: int, x: Sequence[int], q):
    """Segment observable without chamber validation."""
    total = 0
    for xi in x:
        total += sum(eta[max(xi - 1, 0):]) + n_ell
    return q ** total


def observable_h_segment(state: SegmentState, x: Sequence[int], q):
    """prod_i q^{N_{x_i}} with N_x = sum_{i>=x} eta_i + N_ell, for 1 <= x_1 < ... <= ell."""
    xs = check_chamber(x, low=1, high=state.ell)
    return h_product_segment(state.eta, state.n_ell, xs, q)
