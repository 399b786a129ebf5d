import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seirvac.analysis import DecompositionAnchors
from seirvac.control import (
    DEN_EPS,
    ControlGains,
    TrackingGainConfig,
    TrackingGainState,
    _simplex_extrema,
    gain_feasibility,
    tracking_forcing_column,
    tracking_gain_step,
    vaccination_full,
    vaccination_restricted,
    vaccination_switched,
)
from seirvac.model import EpidemicParams
from seirvac.observer import ObserverParams, ObserverState

OBS = ObserverParams(
    mu_hat=1.0 / 235.0,
    omega_hat=1.0 / 14.0,
    beta_hat=1.46,
    sigma_hat=0.5,
    gamma_hat=0.5,
    n_total=1000.0,
)
GAINS = ControlGains(
    k1=1.0, k2=-0.1, k3=-0.5, k4=0.95 / 14.0, k5=-1.46 / 1000.0, g=1.0 / 235.0
)
XH = ObserverState(250.0, 150.0, 150.0, 450.0)

gain_floats = st.floats(-2.0, 2.0, allow_nan=False, allow_infinity=False)
nonneg_gains = st.floats(0.0, 2.0, allow_nan=False, allow_infinity=False)
pop_floats = st.floats(0.0, 1e4, allow_nan=False, allow_infinity=False)


# ---------------------------------------------------------------------------
# Vaccination laws
# ---------------------------------------------------------------------------


def test_full_law_frozen_value():
    # exact rational evaluation: 92147/2800
    assert vaccination_full(OBS, GAINS, XH) == pytest.approx(
        32.909642857142856, rel=1e-13
    )


def test_restricted_law_frozen_value_and_ignores_exposed():
    gains = ControlGains(k1=1.0, k2=99.0)
    xh = ObserverState(500.0, 123.0, 0.0, 0.0)
    assert vaccination_restricted(OBS, gains, xh) == pytest.approx(117.5, rel=1e-14)


def test_restricted_law_drops_only_the_exposed_term():
    full = vaccination_full(OBS, GAINS, XH)
    restricted = vaccination_restricted(OBS, GAINS, XH)
    exposed_term = GAINS.k2 * XH.e / (OBS.mu_hat * OBS.n_total)
    assert restricted == pytest.approx(full - exposed_term, rel=1e-12)


def test_switched_law_passes_through_in_range_values():
    gains = ControlGains(g=0.5 * OBS.mu_hat)
    value, fallback = vaccination_switched(OBS, gains, XH)
    assert value == 0.5
    assert fallback is False


def test_switched_law_fallback_drops_exposed_and_infectious_terms():
    # the frozen full value 32.9 is far above 1, so the fallback engages
    value, fallback = vaccination_switched(OBS, GAINS, XH)
    assert fallback is True
    expected = (
        GAINS.k1 * XH.s + GAINS.k4 * XH.r + GAINS.k5 * XH.s * XH.i
        + GAINS.g * OBS.n_total
    ) / (OBS.mu_hat * OBS.n_total)
    assert value == pytest.approx(expected, rel=1e-14)


@given(
    k1=nonneg_gains, k2=gain_floats, k3=gain_floats, k4=nonneg_gains,
    k5=nonneg_gains, g=nonneg_gains,
    s=pop_floats, e=pop_floats, i=pop_floats, r=pop_floats,
)
@settings(max_examples=200, deadline=None)
def test_switched_law_nonnegative_for_nonnegative_gains(
    k1, k2, k3, k4, k5, g, s, e, i, r
):
    # either branch: in range means >= 0 by the guard, fallback means a sum
    # of products of nonnegative numbers
    gains = ControlGains(k1=k1, k2=k2, k3=k3, k4=k4, k5=k5, g=g)
    value, _ = vaccination_switched(OBS, gains, ObserverState(s, e, i, r))
    assert value >= 0.0


# ---------------------------------------------------------------------------
# Simplex extrema
# ---------------------------------------------------------------------------


def _grid_extrema(gains: ControlGains, n_total: float, steps: int = 160):
    """Brute-force extrema over the simplex S+E+I+R = N.

    For fixed (S, I) the remaining mass splits between E and R, where the
    objective is affine, so only the two pure splits matter.
    """
    hi = -math.inf
    lo = math.inf
    for a in range(steps + 1):
        s = n_total * a / steps
        for b in range(steps + 1 - a):
            i = n_total * b / steps
            rest = n_total - s - i
            core = gains.k1 * s + gains.k3 * i + gains.k5 * s * i
            for tail in (gains.k2 * rest, gains.k4 * rest):
                hi = max(hi, core + tail)
                lo = min(lo, core + tail)
    return hi, lo


@given(k1=gain_floats, k2=gain_floats, k3=gain_floats, k4=gain_floats,
       k5=gain_floats)
@settings(max_examples=60, deadline=None)
def test_simplex_extrema_match_grid_search(k1, k2, k3, k4, k5):
    gains = ControlGains(k1=k1, k2=k2, k3=k3, k4=k4, k5=k5)
    n_total = 1.0
    exact_max, exact_min = _simplex_extrema(gains, n_total)
    grid_max, grid_min = _grid_extrema(gains, n_total)
    # grid points are feasible, so the exact extrema must contain them ...
    assert exact_max >= grid_max - 1e-12
    assert exact_min <= grid_min + 1e-12
    # ... and a Lipschitz bound keeps the exact extrema near the grid
    slack = (abs(k1) + abs(k2) + abs(k3) + abs(k4) + 2.0 * abs(k5)) / 160.0 + 1e-12
    assert exact_max <= grid_max + slack
    assert exact_min >= grid_min - slack


def test_simplex_extrema_interior_edge_point():
    # symmetric bilinear bump: maximum at S = I = N/2, above every vertex
    gains = ControlGains(k5=1.0)
    exact_max, exact_min = _simplex_extrema(gains, 2.0)
    assert exact_max == pytest.approx(1.0, rel=1e-15)
    assert exact_min == 0.0


# ---------------------------------------------------------------------------
# Gain feasibility
# ---------------------------------------------------------------------------


def test_feasibility_frozen_verdicts_for_aggressive_gains():
    plant = EpidemicParams(
        mu=1.0 / 235.0, omega=1.0 / 14.0, beta=1.46 * 1.2,
        sigma=0.5 * 0.8, gamma=0.5 * 0.8, n_total=1000.0,
    )
    rep = gain_feasibility(
        OBS, GAINS, DecompositionAnchors(),
        i_hat_range=(0.0, 1000.0), i_range=(0.0, 1000.0), p=plant,
    )
    assert rep.char_k4_bound is True
    assert rep.char_leading_factor is True
    assert rep.char_all is True
    assert rep.box_g is True
    assert rep.box_k2_nonpos is True
    assert rep.box_k3 is True
    assert rep.box_k4 is True
    assert rep.box_k1k5 is True
    assert rep.box_all is True
    # the two published readings of the exposed-gain condition disagree here
    assert rep.metzler_needs_k2_zero is False
    assert rep.ahat0_metzler is False
    assert rep.sandwich_max == pytest.approx(1000.0)
    assert rep.sandwich_min == pytest.approx(-500.0)
    assert rep.sandwich_all is False
    assert rep.obs_pert_all is True
    assert rep.plant_pert_rates is True
    assert rep.plant_pert_anchor is False
    assert rep.plant_pert_all is False
    assert rep.nonneg_law_printed is False
    assert rep.nonneg_law_text is False
    assert rep.observer_positive is False
    assert rep.plant_positive is False


def test_feasibility_fully_satisfied_configuration():
    muh = OBS.mu_hat
    gains = ControlGains(
        k1=muh / 4.0, k2=0.0, k3=-muh / 4.0, k4=muh / 4.0, k5=0.0, g=muh / 2.0
    )
    plant = EpidemicParams(
        mu=OBS.mu_hat, omega=OBS.omega_hat, beta=OBS.beta_hat,
        sigma=OBS.sigma_hat, gamma=OBS.gamma_hat, n_total=OBS.n_total,
    )
    anchors = DecompositionAnchors(i_r=1000.0, i_hat_r=1000.0)
    rep = gain_feasibility(
        OBS, gains, anchors,
        i_hat_range=(0.0, 1000.0), i_range=(0.0, 1000.0), p=plant,
    )
    assert rep.char_all is True
    assert rep.box_all is True
    assert rep.metzler_needs_k2_zero is True
    assert rep.ahat0_metzler is True
    assert rep.sandwich_all is True
    assert rep.obs_pert_all is True
    assert rep.plant_pert_all is True
    assert rep.nonneg_law_printed is True
    assert rep.nonneg_law_text is True
    assert rep.observer_positive is True
    assert rep.plant_positive is True


def test_feasibility_without_plant_leaves_plant_side_open():
    rep = gain_feasibility(OBS, GAINS, DecompositionAnchors())
    assert rep.plant_pert_rates is None
    assert rep.plant_pert_all is None
    assert rep.plant_positive is None


# ---------------------------------------------------------------------------
# Tracking gain
# ---------------------------------------------------------------------------

UNIT_OBS = ObserverParams(
    mu_hat=1.0, omega_hat=0.0, beta_hat=0.0, sigma_hat=0.0, gamma_hat=0.0,
    n_total=1.0,
)


def _integrate_tracking(q, cfg, t_end, dt, a0=None):
    if a0 is None:
        a0 = -np.eye(4)
    state = TrackingGainState.initial(cfg)
    zero = np.zeros(4)
    g = cfg.g_init
    t = 0.0
    n_steps = round(t_end / dt)
    for _ in range(n_steps):
        g, state = tracking_gain_step(
            q, cfg, state, a0, lambda tau: zero, t, dt
        )
        t += dt
    return g, state


@pytest.mark.parametrize(
    "t_end,expected",
    [
        (0.5, 2.5414940825367984),
        (1.0, 1.5819767068693265),
        (5.0, 1.0067836549063043),
    ],
)
def test_tracking_gain_matches_analytic_quotient(t_end, expected):
    # with a_hat_0 = -I, mu_hat = 1 and no forcing the quotient has the
    # closed form 1/(1 - exp(-t)); both clamps are kept out of the way
    cfg = TrackingGainConfig(g_max=100.0, horizon_t=10.0, g_init=0.5)
    g, _ = _integrate_tracking(UNIT_OBS, cfg, t_end, 1e-3)
    assert g == pytest.approx(expected, abs=1e-9)


def test_tracking_gain_clamp_and_hold_registers():
    # same closed form, now with clamps that the quotient violates: above
    # g_max for small t (hold the initial value), inside [0, g_max] before
    # the horizon (pass through), above mu_hat after the horizon (hold the
    # never-updated tight register, i.e. the initial value again)
    q = ObserverParams(mu_hat=0.5, omega_hat=0.0, beta_hat=0.0,
                       sigma_hat=0.0, gamma_hat=0.0, n_total=1.0)
    cfg = TrackingGainConfig(g_max=100.0, horizon_t=0.5, g_init=0.2)

    g_early, _ = _integrate_tracking(q, cfg, 0.005, 1e-3)
    assert g_early == 0.2  # quotient ~200 exceeds g_max

    g_mid, _ = _integrate_tracking(q, cfg, 0.4, 1e-3)
    assert g_mid == pytest.approx(3.0332447817197368, abs=1e-9)

    g_late, state = _integrate_tracking(q, cfg, 0.6, 1e-3)
    assert g_late == 0.2
    assert state.last_g_tight == 0.2
    # the wide register keeps tracking the quotient even after the horizon
    assert state.last_g_wide == pytest.approx(2.216369215160885, abs=1e-9)


def test_tracking_gain_denominator_guard():
    cfg = TrackingGainConfig(g_max=100.0, horizon_t=10.0, g_init=0.25)
    state = TrackingGainState.initial(cfg)
    g, new = tracking_gain_step(
        UNIT_OBS, cfg, state, -np.eye(4), lambda tau: np.zeros(4), 0.0, 1e-13
    )
    assert g == 0.25
    assert abs(new.z_den[3]) < DEN_EPS


def test_tracking_gain_step_does_not_mutate_input_state():
    cfg = TrackingGainConfig(g_max=1.0, horizon_t=1.0, g_init=0.1)
    state = TrackingGainState.initial(cfg)
    tracking_gain_step(
        UNIT_OBS, cfg, state, -np.eye(4), lambda tau: np.zeros(4), 0.0, 0.01
    )
    assert not state.z_num.any()
    assert not state.z_den.any()
    assert state.last_g_wide == 0.1


def test_tracking_forcing_column_frozen():
    gains = ControlGains(k5=-1.46 / 1000.0)
    col = tracking_forcing_column(OBS, gains, 150.0, 100.0)
    np.testing.assert_allclose(col, [0.0, 0.146, 0.0, 0.073], rtol=1e-12, atol=0.0)


def test_tracking_forcing_column_vanishes_at_anchor():
    gains = ControlGains(k5=0.3)
    col = tracking_forcing_column(OBS, gains, 150.0, 150.0)
    # only the incidence entry survives at the anchor level
    np.testing.assert_allclose(
        col, [0.0, OBS.beta1_hat * 150.0, 0.0, 0.0], rtol=1e-15
    )
