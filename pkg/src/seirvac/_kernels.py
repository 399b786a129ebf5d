"""Hot fixed-step integration loop, compiled when possible.

The simulation loop is written once, in plain scalar Python that is also a
valid compilation target, and is wrapped by ``numba.njit`` unless the
environment variable ``SEIRVAC_DISABLE_NUMBA`` is set to 1/true/yes (or
numba is unavailable).  Both paths execute the identical statement sequence,
so they produce the same floating-point results; ``benchmarks/bench_kernels.py``
times one against the other.

The loop advances the plant and observer (8 states) plus, for the tracking
law, two auxiliary 4-state convolution systems, with one classical
fourth-order step per time step.  The vaccination command is held constant
across each step by default; ``per_stage`` re-evaluates it at every internal
stage instead.
"""

from __future__ import annotations

import math
import os

LAW_NONE = 0
LAW_CONSTANT = 1
LAW_FULL = 2
LAW_RESTRICTED = 3
LAW_SWITCHED = 4
LAW_TRACKING = 5

LAW_CODES = {
    "none": LAW_NONE,
    "constant": LAW_CONSTANT,
    "full": LAW_FULL,
    "restricted": LAW_RESTRICTED,
    "switched": LAW_SWITCHED,
    "tracking": LAW_TRACKING,
}

# diag slot layout (float64[12])
DIAG_DRIFT_PLANT = 0
DIAG_DRIFT_OBS = 1
DIAG_MIN_COMPONENT = 2
DIAG_FIRST_VIOLATION_T = 3
DIAG_CLAMPED_STEPS = 4
DIAG_FALLBACK_STEPS = 5
DIAG_ABORT_T = 6
DIAG_FINAL_G = 7
DIAG_PLANT_VIOLATION_STEPS = 8
DIAG_OBS_VIOLATION_STEPS = 9


def _simulate_loop(
    # plant rates
    mu, omega, beta1, sigma, gamma, n_total,
    # observer rates
    mu_h, omega_h, beta1_h, sigma_h, gamma_h,
    # gains
    k1, k2, k3, k4, k5, g_const,
    # law selection and input handling
    law, v_const, clamp_v, per_stage,
    # tracking data (zeros when unused)
    ahat0, i_hat_anchor, g_max, horizon_t, g_init,
    # initial state
    s0, e0, i0, r0, sh0, eh0, ih0, rh0,
    # stepping
    dt, n_steps, record_every, pos_tol,
    # outputs
    rec, diag,
):
    """Integrate the closed-loop system; fill ``rec`` and ``diag``.

    Returns 0 on success, 1 when a state stopped being finite (the abort
    time then sits in ``diag[DIAG_ABORT_T]``).
    """
    inv_mu_n = 1.0 / (mu_h * n_total)
    births = mu * n_total
    births_h = mu_h * n_total
    inv_n = 1.0 / n_total

    # frozen estimate matrix entries for the tracking integrals
    a00 = ahat0[0, 0]; a01 = ahat0[0, 1]; a02 = ahat0[0, 2]; a03 = ahat0[0, 3]
    a10 = ahat0[1, 0]; a11 = ahat0[1, 1]; a12 = ahat0[1, 2]; a13 = ahat0[1, 3]
    a20 = ahat0[2, 0]; a21 = ahat0[2, 1]; a22 = ahat0[2, 2]; a23 = ahat0[2, 3]
    a30 = ahat0[3, 0]; a31 = ahat0[3, 1]; a32 = ahat0[3, 2]; a33 = ahat0[3, 3]

    def law_value(sh, eh, ih, rh, g_now):
        # returns (commanded value, fallback flag as 1.0/0.0)
        if law == LAW_NONE:
            return 0.0, 0.0
        if law == LAW_CONSTANT:
            return v_const, 0.0
        if law == LAW_RESTRICTED:
            return (
                k1 * sh + k3 * ih + k4 * rh + k5 * sh * ih + g_now * n_total
            ) * inv_mu_n, 0.0
        full = (
            k1 * sh + k2 * eh + k3 * ih + k4 * rh + k5 * sh * ih + g_now * n_total
        ) * inv_mu_n
        if law == LAW_SWITCHED:
            if 0.0 <= full <= 1.0:
                return full, 0.0
            return (
                k1 * sh + k4 * rh + k5 * sh * ih + g_now * n_total
            ) * inv_mu_n, 1.0
        return full, 0.0  # LAW_FULL and LAW_TRACKING

    def deriv(s, e, i, r, sh, eh, ih, rh, v):
        inc = beta1 * s * i
        inc_h = beta1_h * sh * ih
        ds = -mu * s + omega * r - inc + births * (1.0 - v)
        de = inc - (mu + sigma) * e
        di = -(mu + gamma) * i + sigma * e
        dr = -(mu + omega) * r + gamma * i + births * v
        dsh = -mu_h * sh + omega_h * rh - inc_h + births_h * (1.0 - v)
        deh = inc_h - (mu_h + sigma_h) * eh
        dih = -(mu_h + gamma_h) * ih + sigma_h * eh
        drh = -(mu_h + omega_h) * rh + gamma_h * ih + births_h * v
        return ds, de, di, dr, dsh, deh, dih, drh

    def z_deriv(z0, z1, z2, z3, f0, f1, f3):
        # auxiliary linear system: ż = Â₀ z + forcing
        d0 = a00 * z0 + a01 * z1 + a02 * z2 + a03 * z3 + f0
        d1 = a10 * z0 + a11 * z1 + a12 * z2 + a13 * z3 + f1
        d2 = a20 * z0 + a21 * z1 + a22 * z2 + a23 * z3
        d3 = a30 * z0 + a31 * z1 + a32 * z2 + a33 * z3 + f3
        return d0, d1, d2, d3

    s = s0; e = e0; i = i0; r = r0
    sh = sh0; eh = eh0; ih = ih0; rh = rh0
    zn0 = 0.0; zn1 = 0.0; zn2 = 0.0; zn3 = 0.0
    zd0 = 0.0; zd1 = 0.0; zd2 = 0.0; zd3 = 0.0
    last_g_wide = g_init
    last_g_tight = g_init

    max_drift_p = 0.0
    max_drift_o = 0.0
    min_comp = s0
    first_violation = -1.0
    clamped_steps = 0.0
    fallback_steps = 0.0
    plant_violation_steps = 0.0
    obs_violation_steps = 0.0
    g_now = g_const
    ridx = 0
    status = 0

    for step in range(n_steps + 1):
        t = step * dt

        # resolve the gain in effect at this instant
        if law == LAW_TRACKING:
            if abs(zd3) < 1e-12:
                g_now = g_init
            else:
                g_bar = (1.0 - zn3) / zd3
                if math.isfinite(g_bar):
                    if 0.0 <= g_bar <= g_max:
                        last_g_wide = g_bar
                    if 0.0 <= g_bar <= mu_h:
                        last_g_tight = g_bar
                if t <= horizon_t:
                    g_now = g_bar if 0.0 <= g_bar <= g_max else last_g_wide
                else:
                    g_now = g_bar if 0.0 <= g_bar <= mu_h else last_g_tight
        elif law == LAW_NONE or law == LAW_CONSTANT:
            g_now = 0.0

        v_cmd, fb = law_value(sh, eh, ih, rh, g_now)
        if clamp_v:
            v_app = min(1.0, max(0.0, v_cmd))
        else:
            v_app = v_cmd

        # bookkeeping on the visited state
        total_p = s + e + i + r
        total_o = sh + eh + ih + rh
        drift_p = abs(total_p - n_total)
        drift_o = abs(total_o - n_total)
        if drift_p > max_drift_p:
            max_drift_p = drift_p
        if drift_o > max_drift_o:
            max_drift_o = drift_o
        low_p = s
        if e < low_p: low_p = e
        if i < low_p: low_p = i
        if r < low_p: low_p = r
        low_o = sh
        if eh < low_o: low_o = eh
        if ih < low_o: low_o = ih
        if rh < low_o: low_o = rh
        low = low_p if low_p < low_o else low_o
        if low < min_comp:
            min_comp = low
        if low_p < -pos_tol:
            plant_violation_steps += 1.0
        if low_o < -pos_tol:
            obs_violation_steps += 1.0
        if low < -pos_tol and first_violation < 0.0:
            first_violation = t
        check = total_p + total_o
        if math.isnan(check) or math.isinf(check):
            status = 1
            diag[DIAG_ABORT_T] = t
            break

        if step % record_every == 0:
            es = s - sh; ee = e - eh; ei = i - ih; er = r - rh
            rec[ridx, 0] = t
            rec[ridx, 1] = s; rec[ridx, 2] = e; rec[ridx, 3] = i; rec[ridx, 4] = r
            rec[ridx, 5] = sh; rec[ridx, 6] = eh; rec[ridx, 7] = ih; rec[ridx, 8] = rh
            rec[ridx, 9] = v_cmd
            rec[ridx, 10] = v_app
            rec[ridx, 11] = g_now
            rec[ridx, 12] = math.sqrt(es * es + ee * ee + ei * ei + er * er)
            ridx += 1

        if step == n_steps:
            break
        if v_app != v_cmd:
            clamped_steps += 1.0
        if fb != 0.0:
            fallback_steps += 1.0

        # classical fourth-order step; v held unless per_stage
        d1 = deriv(s, e, i, r, sh, eh, ih, rh, v_app)
        hs = 0.5 * dt
        s2 = s + hs * d1[0]; e2 = e + hs * d1[1]; i2 = i + hs * d1[2]; r2 = r + hs * d1[3]
        sh2 = sh + hs * d1[4]; eh2 = eh + hs * d1[5]; ih2 = ih + hs * d1[6]; rh2 = rh + hs * d1[7]
        if per_stage:
            vc2, _ = law_value(sh2, eh2, ih2, rh2, g_now)
            v2 = min(1.0, max(0.0, vc2)) if clamp_v else vc2
        else:
            v2 = v_app
        d2 = deriv(s2, e2, i2, r2, sh2, eh2, ih2, rh2, v2)
        s3 = s + hs * d2[0]; e3 = e + hs * d2[1]; i3 = i + hs * d2[2]; r3 = r + hs * d2[3]
        sh3 = sh + hs * d2[4]; eh3 = eh + hs * d2[5]; ih3 = ih + hs * d2[6]; rh3 = rh + hs * d2[7]
        if per_stage:
            vc3, _ = law_value(sh3, eh3, ih3, rh3, g_now)
            v3 = min(1.0, max(0.0, vc3)) if clamp_v else vc3
        else:
            v3 = v_app
        d3 = deriv(s3, e3, i3, r3, sh3, eh3, ih3, rh3, v3)
        s4 = s + dt * d3[0]; e4 = e + dt * d3[1]; i4 = i + dt * d3[2]; r4 = r + dt * d3[3]
        sh4 = sh + dt * d3[4]; eh4 = eh + dt * d3[5]; ih4 = ih + dt * d3[6]; rh4 = rh + dt * d3[7]
        if per_stage:
            vc4, _ = law_value(sh4, eh4, ih4, rh4, g_now)
            v4 = min(1.0, max(0.0, vc4)) if clamp_v else vc4
        else:
            v4 = v_app
        d4 = deriv(s4, e4, i4, r4, sh4, eh4, ih4, rh4, v4)

        sixth = dt / 6.0
        s += sixth * (d1[0] + 2.0 * d2[0] + 2.0 * d3[0] + d4[0])
        e += sixth * (d1[1] + 2.0 * d2[1] + 2.0 * d3[1] + d4[1])
        i += sixth * (d1[2] + 2.0 * d2[2] + 2.0 * d3[2] + d4[2])
        r += sixth * (d1[3] + 2.0 * d2[3] + 2.0 * d3[3] + d4[3])

        if law == LAW_TRACKING:
            # forcing columns at the four stage states (one-way coupling,
            # so the stage values of the estimate are already available)
            fn0_1 = sh * (beta1_h + k5) * (i_hat_anchor - ih) * inv_n
            fn1_1 = sh * beta1_h * ih * inv_n
            fn3_1 = sh * k5 * (ih - i_hat_anchor) * inv_n
            fn0_2 = sh2 * (beta1_h + k5) * (i_hat_anchor - ih2) * inv_n
            fn1_2 = sh2 * beta1_h * ih2 * inv_n
            fn3_2 = sh2 * k5 * (ih2 - i_hat_anchor) * inv_n
            fn0_3 = sh3 * (beta1_h + k5) * (i_hat_anchor - ih3) * inv_n
            fn1_3 = sh3 * beta1_h * ih3 * inv_n
            fn3_3 = sh3 * k5 * (ih3 - i_hat_anchor) * inv_n
            fn0_4 = sh4 * (beta1_h + k5) * (i_hat_anchor - ih4) * inv_n
            fn1_4 = sh4 * beta1_h * ih4 * inv_n
            fn3_4 = sh4 * k5 * (ih4 - i_hat_anchor) * inv_n

            zn_d1 = z_deriv(zn0, zn1, zn2, zn3, mu_h + fn0_1, fn1_1, fn3_1)
            zn0b = zn0 + hs * zn_d1[0]; zn1b = zn1 + hs * zn_d1[1]
            zn2b = zn2 + hs * zn_d1[2]; zn3b = zn3 + hs * zn_d1[3]
            zn_d2 = z_deriv(zn0b, zn1b, zn2b, zn3b, mu_h + fn0_2, fn1_2, fn3_2)
            zn0c = zn0 + hs * zn_d2[0]; zn1c = zn1 + hs * zn_d2[1]
            zn2c = zn2 + hs * zn_d2[2]; zn3c = zn3 + hs * zn_d2[3]
            zn_d3 = z_deriv(zn0c, zn1c, zn2c, zn3c, mu_h + fn0_3, fn1_3, fn3_3)
            zn0d = zn0 + dt * zn_d3[0]; zn1d = zn1 + dt * zn_d3[1]
            zn2d = zn2 + dt * zn_d3[2]; zn3d = zn3 + dt * zn_d3[3]
            zn_d4 = z_deriv(zn0d, zn1d, zn2d, zn3d, mu_h + fn0_4, fn1_4, fn3_4)
            zn0 += sixth * (zn_d1[0] + 2.0 * zn_d2[0] + 2.0 * zn_d3[0] + zn_d4[0])
            zn1 += sixth * (zn_d1[1] + 2.0 * zn_d2[1] + 2.0 * zn_d3[1] + zn_d4[1])
            zn2 += sixth * (zn_d1[2] + 2.0 * zn_d2[2] + 2.0 * zn_d3[2] + zn_d4[2])
            zn3 += sixth * (zn_d1[3] + 2.0 * zn_d2[3] + 2.0 * zn_d3[3] + zn_d4[3])

            zd_d1 = z_deriv(zd0, zd1, zd2, zd3, -1.0, 0.0, 1.0)
            zd0b = zd0 + hs * zd_d1[0]; zd1b = zd1 + hs * zd_d1[1]
            zd2b = zd2 + hs * zd_d1[2]; zd3b = zd3 + hs * zd_d1[3]
            zd_d2 = z_deriv(zd0b, zd1b, zd2b, zd3b, -1.0, 0.0, 1.0)
            zd0c = zd0 + hs * zd_d2[0]; zd1c = zd1 + hs * zd_d2[1]
            zd2c = zd2 + hs * zd_d2[2]; zd3c = zd3 + hs * zd_d2[3]
            zd_d3 = z_deriv(zd0c, zd1c, zd2c, zd3c, -1.0, 0.0, 1.0)
            zd0d = zd0 + dt * zd_d3[0]; zd1d = zd1 + dt * zd_d3[1]
            zd2d = zd2 + dt * zd_d3[2]; zd3d = zd3 + dt * zd_d3[3]
            zd_d4 = z_deriv(zd0d, zd1d, zd2d, zd3d, -1.0, 0.0, 1.0)
            zd0 += sixth * (zd_d1[0] + 2.0 * zd_d2[0] + 2.0 * zd_d3[0] + zd_d4[0])
            zd1 += sixth * (zd_d1[1] + 2.0 * zd_d2[1] + 2.0 * zd_d3[1] + zd_d4[1])
            zd2 += sixth * (zd_d1[2] + 2.0 * zd_d2[2] + 2.0 * zd_d3[2] + zd_d4[2])
            zd3 += sixth * (zd_d1[3] + 2.0 * zd_d2[3] + 2.0 * zd_d3[3] + zd_d4[3])

        sh = sh + sixth * (d1[4] + 2.0 * d2[4] + 2.0 * d3[4] + d4[4])
        eh = eh + sixth * (d1[5] + 2.0 * d2[5] + 2.0 * d3[5] + d4[5])
        ih = ih + sixth * (d1[6] + 2.0 * d2[6] + 2.0 * d3[6] + d4[6])
        rh = rh + sixth * (d1[7] + 2.0 * d2[7] + 2.0 * d3[7] + d4[7])

    diag[DIAG_DRIFT_PLANT] = max_drift_p
    diag[DIAG_DRIFT_OBS] = max_drift_o
    diag[DIAG_MIN_COMPONENT] = min_comp
    diag[DIAG_FIRST_VIOLATION_T] = first_violation
    diag[DIAG_CLAMPED_STEPS] = clamped_steps
    diag[DIAG_FALLBACK_STEPS] = fallback_steps
    diag[DIAG_FINAL_G] = g_now
    diag[DIAG_PLANT_VIOLATION_STEPS] = plant_violation_steps
    diag[DIAG_OBS_VIOLATION_STEPS] = obs_violation_steps
    return status


def _numba_disabled() -> bool:
    flag = os.environ.get("SEIRVAC_DISABLE_NUMBA", "").strip().lower()
    return flag in {"1", "true", "yes"}


simulate_loop_py = _simulate_loop
_jit_cache = None


def jit_loop():
    """Compile (once) and return the accelerated loop, ignoring the env flag."""
    global _jit_cache
    if _jit_cache is None:
        from numba import njit

        _jit_cache = njit(cache=True)(_simulate_loop)
    return _jit_cache


NUMBA_ACTIVE = False
if not _numba_disabled():
    try:
        simulate_loop = jit_loop()
        NUMBA_ACTIVE = True
    except ImportError:
        simulate_loop = simulate_loop_py
else:
    simulate_loop = simulate_loop_py
