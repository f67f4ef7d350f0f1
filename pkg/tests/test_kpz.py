import math

import numpy as np
import pytest

from asep_lab.kpz import (DIRICHLET, ROBIN, ContourSpec, KpzParams,
                          robin_halfline_first_moment_exact,
                          robin_pde_first_moment, scaled_asep_moment,
                          she_moment_nested, she_moment_residue_form,
                          _robin_heat_profile)
from asep_lab.model import ValidityError
from asep_lab.moments import QuadratureSpec


def test_params_validation():
    with pytest.raises(ValidityError):
        KpzParams(t=1.0, x=(0.5,), A=0.0)           # Robin needs A > 0
    with pytest.raises(ValidityError):
        KpzParams(t=1.0, x=(0.7, 0.2), A=1.0)       # not increasing
    with pytest.raises(ValidityError):
        KpzParams(t=0.0, x=(0.5,), A=1.0)
    KpzParams(t=1.0, x=(0.5,), boundary=DIRICHLET)  # no A needed


def test_contour_spec_ordering():
    with pytest.raises(ValidityError):
        ContourSpec((0.0, 0.9))     # gap must exceed 1
    with pytest.raises(ValidityError):
        ContourSpec((0.5, 2.0))     # first line must be the axis
    spec = ContourSpec.default(3)
    assert spec.offsets[0] == 0.0


def test_first_moment_matches_image_kernel_closed_form():
    for A, t, x in ((1.0, 1.0, 0.5), (2.0, 0.5, 0.25), (0.7, 2.0, 1.5)):
        nested = she_moment_nested(KpzParams(t=t, x=(x,), A=A))
        exact = robin_halfline_first_moment_exact(A, t, x)
        assert abs(nested - exact) < 1e-10 * abs(exact)


def test_dirichlet_first_moment_is_kernel_derivative():
    t, x = 1.0, 0.5
    nested = she_moment_nested(KpzParams(t=t, x=(x,), boundary=DIRICHLET))
    expected = 4.0 * (x / t) * math.exp(-x * x / (2 * t)) / math.sqrt(2 * math.pi * t)
    assert abs(nested - expected) < 1e-10


def test_residue_form_equals_nested():
    k1 = KpzParams(t=1.0, x=(0.5,), A=1.0)
    assert she_moment_residue_form(k1) == pytest.approx(she_moment_nested(k1), rel=1e-8)
    k2 = KpzParams(t=1.0, x=(0.2, 0.7), A=1.0)
    assert she_moment_residue_form(k2) == pytest.approx(she_moment_nested(k2), rel=1e-6)


def test_residue_form_rejects_dirichlet():
    with pytest.raises(ValidityError):
        she_moment_residue_form(KpzParams(t=1.0, x=(0.5,), boundary=DIRICHLET))


def test_contour_offset_invariance():
    k2 = KpzParams(t=1.0, x=(0.2, 0.7), A=1.0)
    base = she_moment_nested(k2, ContourSpec((0.0, 1.25)))
    moved = she_moment_nested(k2, ContourSpec((0.0, 1.35)))
    assert abs(base - moved) < 1e-8


def test_tail_truncation_controlled():
    k2 = KpzParams(t=0.5, x=(0.2, 0.7), A=1.0)
    loose = she_moment_nested(k2, ContourSpec((0.0, 1.25), tail_tol=1e-10))
    tight = she_moment_nested(k2, ContourSpec((0.0, 1.25), tail_tol=1e-14))
    assert abs(loose - tight) < 1e-10


def test_moments_positive():
    for kpz in (KpzParams(t=0.5, x=(0.1, 0.6), A=0.5),
                KpzParams(t=1.0, x=(0.3,), boundary=DIRICHLET)):
        assert she_moment_nested(kpz) > 0


def test_axis_integrand_has_gaussian_envelope():
    # on the first contour (the axis), |kernel| <= e^{-t y^2 / 2}
    from asep_lab.kpz import _kernel
    t, x, A = 1.0, 0.5, 1.0
    y = np.linspace(-8, 8, 401)
    vals = np.abs(_kernel(1j * y, x, t, A, ROBIN))
    assert np.all(vals <= np.exp(-t * y * y / 2.0) + 1e-15)


def test_pde_oracle_against_first_moment():
    pde = robin_pde_first_moment(1.0, 1.0, 0.5)
    nested = she_moment_nested(KpzParams(t=1.0, x=(0.5,), A=1.0))
    assert abs(pde.value - nested) < 1e-4 * nested
    assert pde.grid_error < 1e-5


def test_pde_oracle_mass_conserved_when_reflecting():
    res = robin_pde_first_moment(0.0, 1.0, 0.5)
    assert abs(res.mass - 1.0) < 1e-6


def test_pde_oracle_approaches_absorbing_limit():
    vals = [robin_pde_first_moment(A, 0.7, 0.4).value for A in (1.0, 10.0, 100.0)]
    assert vals[0] > vals[1] > vals[2] > 0


def test_scaled_moment_is_the_lattice_identity():
    # same residue machinery, scaled kernel: must equal the plain moment
    # times the deterministic scaling factors
    from asep_lab.model import ModelParams
    from asep_lab.moments import q_moment
    eps, t, x, A = 0.1, 1.0, 1.0, 1.0
    kpz = KpzParams(t=t, x=(x,), A=A)
    sq = math.sqrt(eps)
    rho = 0.5 + sq * (0.25 + A / 2)
    params = ModelParams.from_density(0.5 * math.exp(sq), 0.5 * math.exp(-sq), rho)
    X = round(x / eps)
    T = t / eps ** 2
    quad = QuadratureSpec.with_1d_nodes(512)
    plain = q_moment(T, (X + 1,), params, quad).value
    outside = (eps ** -0.5 * float(params.q) ** (X / 2)
               * math.exp((float(params.p_rate) + float(params.q_rate) - 1) * T) * plain)
    bridged = scaled_asep_moment(eps, kpz, quad)
    assert abs(bridged - outside) < 1e-12 * abs(outside)


def test_scaled_moment_validates():
    with pytest.raises(ValidityError):
        scaled_asep_moment(-0.1, KpzParams(t=1.0, x=(0.5,), A=1.0))
    with pytest.raises(ValidityError):
        # sites collide after rounding
        scaled_asep_moment(0.2, KpzParams(t=1.0, x=(0.41, 0.48), A=1.0))


def test_bridge_differences_shrink():
    kpz = KpzParams(t=1.0, x=(1.0,), A=1.0)
    limit = she_moment_nested(kpz)
    diffs = [abs(scaled_asep_moment(eps, kpz) - limit) for eps in (0.2, 0.1, 0.05)]
    assert diffs[0] > diffs[1] > diffs[2]


def test_rannacher_startup_profile_is_smooth():
    xs, u = _robin_heat_profile(1.0, 0.05, 4.0, 2e-3, 2e-3, 1.6e-2)
    assert np.all(np.isfinite(u))
    # no Crank-Nicolson ringing: the profile should be monotone in the tail
    tail = u[len(u) // 2:]
    assert np.all(np.diff(tail) <= 1e-12)
