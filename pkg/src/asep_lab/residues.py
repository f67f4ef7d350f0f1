"""Residue-reduction engine for the contour-integrand factors.

The integrand for the n-point q-moment is a product of atomic factors:

    q^{n(n-1)/2} * prod_{i<j} (z_i-z_j)/(q z_i-z_j) * (1-q z_i z_j)/(1-z_i z_j)
                 * prod_j F_{x_j}(z_j)/z_j

Residues are never taken by numerical micro-contours.  A diagram's
substitutions are applied sequentially; at each step exactly one factor
becomes identically singular and the pair (z_a - pole) * factor is
replaced by its finite limit 1/(dD/dz_a), computed from the factor's
linear dependence on the consumed variable.  Everything stays an exact
product of factors over the surviving (pivot) variables, evaluable at
arbitrary complex nodes.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .partitions import Diagram, substitution_steps


class ReductionError(RuntimeError):
    """Internal consistency failure while consuming residue substitutions."""


@dataclass(frozen=True)
class Monomial:
    """q^qexp * z_var^vpow; vpow = 0 with var None means a pure q-power."""

    qexp: int
    var: Optional[int]
    vpow: int

    def __post_init__(self):
        if (self.var is None) != (self.vpow == 0):
            raise ValueError("vpow must be 0 exactly when var is None")

    def subst(self, var: int, target: "Monomial") -> "Monomial":
        """Replace z_var by the target monomial (closed under composition)."""
        if self.var != var:
            return self
        return Monomial(self.qexp + self.vpow * target.qexp,
                        target.var, self.vpow * target.vpow)

    def inverse(self) -> "Monomial":
        return Monomial(-self.qexp, self.var, -self.vpow)

    def value(self, q: float, assign: Dict[int, object]):
        v = q ** self.qexp
        if self.var is not None:
            z = assign[self.var]
            v = v * (z if self.vpow == 1 else z ** self.vpow)
        return v


def zvar(i: int) -> Monomial:
    return Monomial(0, i, 1)


# ---------------------------------------------------------------------------
# atomic factors

DIFF = "diff"            # M - M'
INV_QDIFF = "inv_qdiff"  # 1 / (q M - M')
QPROD = "qprod"          # 1 - q M M'
INV_PROD = "inv_prod"    # 1 / (1 - M M')
F_OVER_Z = "f_over_z"    # F_x(M) / M
SCALAR = "scalar"        # q^qexp


@dataclass(frozen=True)
class Factor:
    kind: str
    a: Optional[Monomial] = None
    b: Optional[Monomial] = None
    site: Optional[int] = None
    qexp: int = 0

    def subst(self, var: int, target: Monomial) -> "Factor":
        if self.kind == SCALAR:
            return self
        new_a = self.a.subst(var, target) if self.a is not None else None
        new_b = self.b.subst(var, target) if self.b is not None else None
        if new_a is self.a and new_b is self.b:
            return self
        return dataclasses.replace(self, a=new_a, b=new_b)

    def vars(self) -> Tuple[int, ...]:
        vs = []
        for m in (self.a, self.b):
            if m is not None and m.var is not None and m.var not in vs:
                vs.append(m.var)
        return tuple(vs)

    def identically_singular(self) -> bool:
        """Denominator vanishes as a function, not just at a point."""
        if self.kind == INV_QDIFF:
            return (self.a.var == self.b.var and self.a.vpow == self.b.vpow
                    and self.a.qexp + 1 == self.b.qexp)
        if self.kind == INV_PROD:
            return (self.a.var == self.b.var and self.a.vpow + self.b.vpow == 0
                    and self.a.qexp + self.b.qexp == 0)
        return False


def consume_limit(factor: Factor, var: int) -> Tuple[int, Optional[Monomial]]:
    """Limit of (z_var - pole) * factor as 1/(dD/dz_var) for the linear denominator D.

    Returns (sign, monomial multiplier or None).  The consumed variable is
    always pristine (q^0 z_var) in the singular factor, which the
    substitution order guarantees; anything else is a reduction bug.
    """
    holder, other = (factor.a, factor.b) if (factor.a.var == var) else (factor.b, factor.a)
    if holder.var != var or holder.qexp != 0 or holder.vpow != 1:
        raise ReductionError(f"consumed variable z_{var} not pristine in {factor}")
    if factor.kind == INV_QDIFF:
        # D = q M - z_var (the consumed variable sits in the second slot)
        if factor.b.var != var:
            raise ReductionError(f"unexpected singular arrangement in {factor}")
        return -1, None
    if factor.kind == INV_PROD:
        # D = 1 - M z_var, dD/dz_var = -M
        return -1, other.inverse()
    raise ReductionError(f"factor kind {factor.kind} cannot be consumed")


@dataclass(frozen=True)
class ReducedIntegrand:
    """Residue-reduced integrand: prefactor times surviving atomic factors."""

    factors: Tuple[Factor, ...]
    free_vars: Tuple[int, ...]
    sign: int = 1
    prefactor_monos: Tuple[Monomial, ...] = ()

    def all_pieces(self) -> List[Factor]:
        return list(self.factors)


def build_phi(x: Sequence[int], n: Optional[int] = None) -> List[Factor]:
    """Atomic-factor list of the n-point integrand for sites x (x_i >= 0).

    The kernel F itself is supplied at evaluation time through the context,
    so the same factor list serves the plain and the weak-asymmetry-scaled
    kernels.
    """
    x = tuple(int(v) for v in x)
    if any(v < 0 for v in x):
        raise ValueError("sites must be >= 0")
    n = len(x) if n is None else n
    factors: List[Factor] = [Factor(SCALAR, qexp=n * (n - 1) // 2)]
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            factors.append(Factor(DIFF, zvar(i), zvar(j)))
            factors.append(Factor(INV_QDIFF, zvar(i), zvar(j)))
            factors.append(Factor(QPROD, zvar(i), zvar(j)))
            factors.append(Factor(INV_PROD, zvar(i), zvar(j)))
    for j in range(1, n + 1):
        factors.append(Factor(F_OVER_Z, a=zvar(j), site=x[j - 1]))
    return factors


def reduce_by_diagram(factors: Sequence[Factor], diagram: Diagram) -> ReducedIntegrand:
    """Apply a diagram's residue substitutions with analytic pole cancellation.

    Exactly one factor must turn identically singular per step (the order
    rule walks rows from the extremities inward, which keeps intermediate
    factors finite); zero or several singular factors signal a diagram or
    ordering bug.
    """
    live = list(factors)
    sign = 1
    monos: List[Monomial] = []
    for var, (qe, pivot, vp) in substitution_steps(diagram):
        target = Monomial(qe, pivot, vp)
        substituted: List[Factor] = []
        singular: List[Factor] = []
        for f in live:
            g = f.subst(var, target)
            if g.identically_singular():
                singular.append(f)  # limit rule needs the pre-substitution factor
            else:
                substituted.append(g)
        if len(singular) != 1:
            raise ReductionError(
                f"step z_{var} -> {target} produced {len(singular)} singular factors")
        s, mono = consume_limit(singular[0], var)
        sign *= s
        if mono is not None:
            monos.append(mono)
        live = substituted
    free = diagram.pivots
    for f in live:
        if any(v not in free for v in f.vars()):
            raise ReductionError(f"factor {f} still references a consumed variable")
    return ReducedIntegrand(tuple(live), tuple(free), sign, tuple(monos))


# ---------------------------------------------------------------------------
# evaluation

@dataclass(frozen=True)
class EvalContext:
    """Float parameters plus kernel choice for factor evaluation.

    kernel 'plain' is the ASEP kernel F; 'scaled' multiplies the site-j
    kernel by q^{lattice_x/2} e^{(p+q-1)t} with the F-site shifted by one,
    matching the weak-asymmetry observable.
    """

    q: float
    p: float
    rho: float
    t: float
    kernel: str = "plain"

    def f_kernel(self, z, site: int):
        q, p, rho, t = self.q, self.p, self.rho, self.t
        one_minus_z = 1.0 - z
        one_minus_qz = 1.0 - q * z
        exponent = (1.0 - q) ** 2 * z * p * t / (one_minus_z * one_minus_qz)
        if self.kernel == "scaled":
            # q^{site/2} e^{(p + q-rate - 1) t} F_{site+1}; combined into one
            # exponential because the growth factor alone overflows at small
            # asymmetry while the sum has bounded real part on the contour
            x = site + 1
            exponent = exponent + (p + q * p - 1.0) * t + 0.5 * site * math.log(q)
        else:
            x = site
        val = (1.0 - q * z * z) / one_minus_z
        val = val * np.exp(exponent)
        val = val * (one_minus_z / one_minus_qz) ** x
        val = val * (rho / (rho + (1.0 - rho) * z))
        return val


def factor_value(f: Factor, ctx: EvalContext, assign: Dict[int, object]):
    q = ctx.q
    if f.kind == SCALAR:
        return q ** f.qexp
    if f.kind == F_OVER_Z:
        m = f.a.value(q, assign)
        return ctx.f_kernel(m, f.site) / m
    a = f.a.value(q, assign)
    b = f.b.value(q, assign)
    if f.kind == DIFF:
        return a - b
    if f.kind == INV_QDIFF:
        return 1.0 / (q * a - b)
    if f.kind == QPROD:
        return 1.0 - q * a * b
    if f.kind == INV_PROD:
        return 1.0 / (1.0 - a * b)
    raise ValueError(f"unknown factor kind {f.kind}")


def evaluate(reduced: ReducedIntegrand, ctx: EvalContext, assign: Dict[int, object]):
    """Value of the reduced integrand at a free-variable assignment.

    Accepts scalars or broadcastable numpy arrays as assignment values.
    """
    val = complex(reduced.sign)
    for m in reduced.prefactor_monos:
        val = val * m.value(ctx.q, assign)
    for f in reduced.factors:
        val = val * factor_value(f, ctx, assign)
    return val


def time_derivative_terms(reduced: ReducedIntegrand, ctx: EvalContext):
    """Per-kernel analytic d/dt multipliers, keyed by free variable.

    d/dt of the integrand equals the integrand times the sum over F-factors
    of (1-q)^2 M p / ((1-M)(1-q M)) at the factor's monomial argument M;
    the multiplier is t-independent.  Returns {var: [callable(z), ...]}.
    """
    q, p = ctx.q, ctx.p
    terms: Dict[int, list] = {}

    def make(mono: Monomial):
        def mult(zval):
            m = mono.value(q, {mono.var: zval})
            return (1.0 - q) ** 2 * m * p / ((1.0 - m) * (1.0 - q * m))
        return mult

    for f in reduced.factors:
        if f.kind != F_OVER_Z:
            continue
        terms.setdefault(f.a.var, []).append(make(f.a))
    return terms
