"""Stability and positivity analysis of the coupled plant/observer system.

The closed-loop observer and the plant driven by the observer-based
vaccination law form a linear time-varying cascade

    x̂' = Â(t) x̂ + b̂,      x̃' = (A(t) - Â(t) + B(t)) x̂ + A(t) x̃ + b̃

in the estimate x̂ and the estimation error x̃ = x - x̂.  Each time-varying
matrix splits into a constant part frozen at anchor infectious levels plus a
perturbation that vanishes at the anchors.  This module builds those
matrices, certifies stability of the frozen part (characteristic polynomial,
Routh test, root finding, a small-gain transfer-function bound), quantifies
the perturbation (spectral norms, sliding-window integrals), and assembles
exponential transient envelopes for the full time-varying system.

Polynomials are plain float arrays with coefficients in ascending degree
order: coeffs[k] multiplies s**k.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, fields

import numpy as np

from .control import ControlGains
from .model import EpidemicParams
from .observer import ObserverParams

__all__ = [
    "DecompositionAnchors",
    "SystemMatrices",
    "Decomposition",
    "AffineVectors",
    "StabilityReport",
    "RootConvergenceError",
    "build_system_matrices",
    "build_decomposition",
    "perturbation_block",
    "metzler_check",
    "spectral_norm",
    "characteristic_polynomial",
    "polynomial_eval",
    "polynomial_from_roots",
    "polynomial_roots",
    "hurwitz_check",
    "stability_abscissa",
    "hinf_norm_hhat",
    "matrix_exponential",
    "affine_vectors_and_bounds",
    "transient_envelope",
    "certify",
]


class RootConvergenceError(RuntimeError):
    """Raised when the simultaneous root iteration fails its residual test."""


@dataclass(frozen=True)
class DecompositionAnchors:
    """Frozen reference levels for the matrix decompositions.

    ``i_r`` and ``i_hat_r`` are the plant and observer infectious levels at
    which the constant parts A₀ and Â₀ are evaluated.  ``b011`` and ``b021``
    are the (1,1) and (2,1) entries granted to the constant coupling block
    B₀; whatever they absorb is removed from the coupling perturbation.
    """

    i_r: float = 0.0
    i_hat_r: float = 0.0
    b011: float = 0.0
    b021: float = 0.0


@dataclass(frozen=True)
class SystemMatrices:
    """Time-varying closed-loop matrices evaluated at given (I, Î) levels."""

    a: np.ndarray       # plant matrix A(t)
    a_hat: np.ndarray   # closed-loop observer matrix Â(t)
    b_mat: np.ndarray   # coupling matrix B(t) injecting x̂ into the plant
    b: np.ndarray       # plant affine offset
    b_hat: np.ndarray   # observer affine offset


@dataclass(frozen=True)
class Decomposition:
    """Constant/perturbation splits of the closed-loop matrices."""

    a0: np.ndarray
    delta_a: np.ndarray
    a_hat0: np.ndarray
    delta_a_hat: np.ndarray
    b0: np.ndarray
    delta_b: np.ndarray
    a_bar0: np.ndarray      # block [[Â₀, 0], [B₀, A₀]]
    a_tilde0: np.ndarray    # block [[ΔÂ, 0], [ΔB, ΔA]]


# ---------------------------------------------------------------------------
# Matrix construction
# ---------------------------------------------------------------------------


def build_system_matrices(
    p: EpidemicParams,
    q: ObserverParams,
    gains: ControlGains,
    i: float,
    i_hat: float,
) -> SystemMatrices:
    """Closed-loop matrices of the plant/observer cascade at levels (I, Î).

    Â(t) is the observer matrix after substituting the full vaccination law,
    A(t) is the open plant matrix, and B(t) carries the observer state into
    the plant through the shared vaccination input (scaled by μ/μ̂ because
    the law is normalized with the estimated birth rate).
    """
    mu, om, b1 = p.mu, p.omega, p.beta1
    sg, ga = p.sigma, p.gamma
    muh, omh, b1h = q.mu_hat, q.omega_hat, q.beta1_hat
    sgh, gah = q.sigma_hat, q.gamma_hat
    k1, k2, k3, k4, k5, g = gains.k1, gains.k2, gains.k3, gains.k4, gains.k5, gains.g
    n = p.n_total

    a = np.array(
        [
            [-(mu + b1 * i), 0.0, 0.0, om],
            [b1 * i, -(mu + sg), 0.0, 0.0],
            [0.0, sg, -(mu + ga), 0.0],
            [0.0, 0.0, ga, -(mu + om)],
        ]
    )
    a_hat = np.array(
        [
            [-(muh + k1 + (b1h + k5) * i_hat), -k2, -k3, omh - k4],
            [b1h * i_hat, -(muh + sgh), 0.0, 0.0],
            [0.0, sgh, -(muh + gah), 0.0],
            [k1 + k5 * i_hat, k2, gah + k3, -(muh + omh - k4)],
        ]
    )
    ratio = mu / muh
    row = np.array([k1 + k5 * i_hat, k2, k3, k4])
    b_mat = np.zeros((4, 4))
    b_mat[0] = -ratio * row
    b_mat[3] = ratio * row

    b = np.array([(1.0 - g / muh) * mu * n, 0.0, 0.0, g * mu * n / muh])
    b_hat = np.array([(muh - g) * n, 0.0, 0.0, g * n])
    return SystemMatrices(a=a, a_hat=a_hat, b_mat=b_mat, b=b, b_hat=b_hat)


def build_decomposition(
    p: EpidemicParams,
    q: ObserverParams,
    gains: ControlGains,
    anchors: DecompositionAnchors,
    i: float,
    i_hat: float,
) -> Decomposition:
    """Split each closed-loop matrix into anchor-frozen plus perturbation.

    The perturbations ΔA, ΔÂ and ΔB are written out explicitly rather than
    formed by subtraction, and satisfy the reconstruction identities

        A₀ + ΔA = A(t),   Â₀ + ΔÂ = Â(t),   B₀ + ΔB = A(t) - Â(t) + B(t)

    entrywise to rounding.  The 8x8 stacked forms gather the frozen and
    perturbation parts of the cascade matrix.
    """
    mu, om, b1 = p.mu, p.omega, p.beta1
    sg, ga = p.sigma, p.gamma
    muh, omh, b1h = q.mu_hat, q.omega_hat, q.beta1_hat
    sgh, gah = q.sigma_hat, q.gamma_hat
    k1, k2, k3, k4, k5 = gains.k1, gains.k2, gains.k3, gains.k4, gains.k5
    ir, ihr = anchors.i_r, anchors.i_hat_r

    a0 = np.array(
        [
            [-(mu + b1 * ir), 0.0, 0.0, om],
            [0.0, -(mu + sg), 0.0, 0.0],
            [0.0, sg, -(mu + ga), 0.0],
            [0.0, 0.0, ga, -(mu + om)],
        ]
    )
    delta_a = np.zeros((4, 4))
    delta_a[0, 0] = b1 * (ir - i)
    delta_a[1, 0] = b1 * i

    a_hat0 = np.array(
        [
            [-(muh + k1 + (b1h + k5) * ihr), -k2, -k3, omh - k4],
            [0.0, -(muh + sgh), 0.0, 0.0],
            [0.0, sgh, -(muh + gah), 0.0],
            [k1 + k5 * ihr, k2, gah + k3, -(muh + omh - k4)],
        ]
    )
    delta_a_hat = np.zeros((4, 4))
    delta_a_hat[0, 0] = (b1h + k5) * (ihr - i_hat)
    delta_a_hat[1, 0] = b1h * i_hat
    delta_a_hat[3, 0] = k5 * (i_hat - ihr)

    b0 = np.zeros((4, 4))
    b0[0, 0] = anchors.b011
    b0[1, 0] = anchors.b021

    r = 1.0 - mu / muh
    delta_b = np.array(
        [
            [
                muh - mu + b1h * i_hat - b1 * i + r * (k1 + k5 * i_hat) - anchors.b011,
                r * k2,
                r * k3,
                om - omh + r * k4,
            ],
            [b1 * i - b1h * i_hat - anchors.b021, muh - mu + sgh - sg, 0.0, 0.0],
            [0.0, sg - sgh, muh + gah - mu - ga, 0.0],
            [
                -r * (k1 + k5 * i_hat),
                -r * k2,
                ga - gah - r * k3,
                muh + omh - mu - om - r * k4,
            ],
        ]
    )

    a_bar0 = np.zeros((8, 8))
    a_bar0[:4, :4] = a_hat0
    a_bar0[4:, :4] = b0
    a_bar0[4:, 4:] = a0

    a_tilde0 = np.zeros((8, 8))
    a_tilde0[:4, :4] = delta_a_hat
    a_tilde0[4:, :4] = delta_b
    a_tilde0[4:, 4:] = delta_a

    return Decomposition(
        a0=a0,
        delta_a=delta_a,
        a_hat0=a_hat0,
        delta_a_hat=delta_a_hat,
        b0=b0,
        delta_b=delta_b,
        a_bar0=a_bar0,
        a_tilde0=a_tilde0,
    )


def perturbation_block(
    p: EpidemicParams,
    q: ObserverParams,
    gains: ControlGains,
    anchors: DecompositionAnchors,
    i: float,
    i_hat: float,
) -> np.ndarray:
    """The stacked 8x8 perturbation at levels (I, Î) without the frozen part."""
    return build_decomposition(p, q, gains, anchors, i, i_hat).a_tilde0


# ---------------------------------------------------------------------------
# Matrix predicates and norms
# ---------------------------------------------------------------------------


def metzler_check(m: np.ndarray, tol: float = 0.0) -> tuple[bool, list[tuple[int, int]]]:
    """Whether every off-diagonal entry is >= -tol; offenders listed.

    Metzler structure is what makes the flow of a linear system leave the
    nonnegative orthant invariant.
    """
    offenders = [
        (i, j)
        for i in range(m.shape[0])
        for j in range(m.shape[1])
        if i != j and m[i, j] < -tol
    ]
    return not offenders, offenders


def spectral_norm(
    m: np.ndarray,
    start: np.ndarray | None = None,
    max_iter: int = 500,
    rtol: float = 1e-14,
) -> tuple[float, np.ndarray]:
    """Largest singular value by power iteration on the Gram matrix.

    Returns the norm and the final iterate, which callers tracking a slowly
    varying matrix can feed back as the next warm start.
    """
    n = m.shape[1]
    if start is None:
        v = np.ones(n) / math.sqrt(n)
    else:
        v = start / np.linalg.norm(start)
    sigma = 0.0
    for _ in range(max_iter):
        w = m @ v
        sig_new = float(np.linalg.norm(w))
        if sig_new == 0.0:
            return 0.0, v
        u = m.T @ w
        nu = float(np.linalg.norm(u))
        if nu == 0.0:
            return sig_new, v
        v = u / nu
        if abs(sig_new - sigma) <= rtol * sig_new:
            sigma = sig_new
            break
        sigma = sig_new
    return sigma, v


# ---------------------------------------------------------------------------
# Polynomials
# ---------------------------------------------------------------------------


def polynomial_eval(coeffs: np.ndarray, s: complex) -> complex:
    """Horner evaluation of an ascending-order coefficient array."""
    acc = 0.0 + 0.0j
    for c in reversed(np.asarray(coeffs)):
        acc = acc * s + c
    return acc


def polynomial_from_roots(roots, leading: float = 1.0) -> np.ndarray:
    """Real ascending coefficients of leading * prod (s - root)."""
    coeffs = np.array([1.0 + 0.0j])
    for r in roots:
        coeffs = np.convolve(coeffs, np.array([-r, 1.0], dtype=complex))
    out = coeffs.real * leading
    return out


def characteristic_polynomial(m: np.ndarray) -> np.ndarray:
    """Ascending coefficients of det(sI - M) via the trace recurrence.

    Uses the classical resolvent identity: with M₁ = M and
    Mₖ = M(Mₖ₋₁ + cₖ₋₁ I), the coefficients follow from cₖ = -tr(Mₖ)/k.
    Exact in exact arithmetic; needs only matrix products and traces.
    """
    n = m.shape[0]
    descending = np.empty(n + 1)
    descending[0] = 1.0
    mk = np.zeros_like(m, dtype=float)
    c_prev = 1.0
    for k in range(1, n + 1):
        mk = m @ (mk + c_prev * np.eye(n))
        c_prev = -np.trace(mk) / k
        descending[k] = c_prev
    return descending[::-1].copy()


def polynomial_roots(coeffs, max_iter: int = 500) -> np.ndarray:
    """All complex roots by simultaneous (Durand-Kerner) iteration.

    Roots at the origin are deflated first, the rest start on a circle of
    radius set by the coefficient bound and are refined simultaneously.
    Convergence is accepted only if every root passes the residual test
    |p(root)| <= 1e-9 * ||coeffs||; conjugate pairs are symmetrized so real
    polynomials report exactly conjugate root pairs.

    Raises:
        ValueError: degree < 1 after trimming.
        RootConvergenceError: residual test failed after max_iter sweeps.
    """
    orig = np.asarray(coeffs, dtype=float)
    c = orig.copy()
    while len(c) > 1 and c[-1] == 0.0:
        c = c[:-1]
    if len(c) < 2:
        raise ValueError("polynomial degree must be at least 1")
    origin_roots = 0
    while c[0] == 0.0:
        origin_roots += 1
        c = c[1:]
    roots: list[complex] = [0.0j] * origin_roots
    n = len(c) - 1
    if n >= 1:
        monic = (c / c[-1]).astype(complex)
        radius = 1.0 + float(np.max(np.abs(monic[:-1]))) if n > 0 else 1.0
        z = np.array(
            [radius * cmath.exp(1j * (2.0 * math.pi * k / n + 0.5)) for k in range(n)]
        )
        for _ in range(max_iter):
            shift_max = 0.0
            for idx in range(n):
                zi = z[idx]
                denom = 1.0 + 0.0j
                for jdx in range(n):
                    if jdx != idx:
                        denom *= zi - z[jdx]
                if denom == 0.0:
                    denom = 1e-30
                delta = polynomial_eval(monic, zi) / denom
                z[idx] = zi - delta
                shift_max = max(shift_max, abs(delta))
            if shift_max <= 1e-14 * (1.0 + float(np.max(np.abs(z)))):
                break
        scale = float(np.linalg.norm(orig))
        for zi in z:
            if abs(polynomial_eval(orig, zi)) > 1e-9 * scale:
                raise RootConvergenceError(
                    f"root iteration residual {abs(polynomial_eval(orig, zi)):.3e} "
                    f"exceeds 1e-9 * {scale:.3e}"
                )
        roots.extend(_symmetrize_conjugates(z))
    out = np.array(roots, dtype=complex)
    order = np.lexsort((out.imag, out.real))
    return out[order]


def _symmetrize_conjugates(z: np.ndarray) -> list[complex]:
    """Snap near-real roots to the axis and average conjugate partners."""
    remaining = list(z)
    out: list[complex] = []
    while remaining:
        zi = remaining.pop()
        tol = 1e-8 * (1.0 + abs(zi))
        if abs(zi.imag) <= tol:
            out.append(complex(zi.real, 0.0))
            continue
        best, best_d = None, math.inf
        for j, zj in enumerate(remaining):
            d = abs(zj - zi.conjugate())
            if d < best_d:
                best, best_d = j, d
        if best is not None and best_d <= 1e-6 * (1.0 + abs(zi)):
            zj = remaining.pop(best)
            mean = 0.5 * (zi + zj.conjugate())
            out.append(mean)
            out.append(mean.conjugate())
        else:
            out.append(zi)
    return out


def hurwitz_check(coeffs) -> bool:
    """Strict left-half-plane test by the Routh tabulation.

    After normalizing the leading coefficient positive, every coefficient
    and every first-column pivot of the Routh array must be strictly
    positive.  A vanishing pivot or row signals roots on or symmetric about
    the imaginary axis, which already fails the strict test, so the
    tabulation can stop right there.
    """
    c = np.asarray(coeffs, dtype=float)
    while len(c) > 1 and c[-1] == 0.0:
        c = c[:-1]
    if len(c) == 0 or c[-1] == 0.0:
        return False
    descending = c[::-1].copy()
    if descending[0] < 0.0:
        descending = -descending
    n = len(descending) - 1
    if n == 0:
        return True
    if bool(np.any(descending <= 0.0)):
        return False
    width = n // 2 + 1
    row_prev = np.zeros(width)
    row_curr = np.zeros(width)
    row_prev[: len(descending[0::2])] = descending[0::2]
    row_curr[: len(descending[1::2])] = descending[1::2]
    scale = float(np.max(np.abs(descending)))
    for _ in range(n - 1):
        pivot = row_curr[0]
        if pivot <= 1e-13 * scale:
            return False
        row_next = np.zeros(width)
        for j in range(width - 1):
            row_next[j] = (pivot * row_prev[j + 1] - row_prev[0] * row_curr[j + 1]) / pivot
        row_prev, row_curr = row_curr, row_next
        if not np.any(row_curr != 0.0):
            return False
    return bool(row_curr[0] > 1e-13 * scale)


def stability_abscissa(m: np.ndarray) -> float:
    """Largest real part over the spectrum of M.

    Block-triangular structure (an exactly zero off-diagonal block) splits
    the spectrum into the diagonal blocks' spectra, so such matrices are
    recursed into exactly; dense blocks go through the characteristic
    polynomial and the simultaneous root iteration.
    """
    n = m.shape[0]
    if n == 1:
        return float(m[0, 0])
    for k in range(1, n):
        if not m[:k, k:].any():
            return max(stability_abscissa(m[:k, :k]), stability_abscissa(m[k:, k:]))
        if not m[k:, :k].any():
            return max(stability_abscissa(m[:k, :k]), stability_abscissa(m[k:, k:]))
    roots = polynomial_roots(characteristic_polynomial(m))
    return float(np.max(roots.real))


# ---------------------------------------------------------------------------
# Transfer-function norm
# ---------------------------------------------------------------------------


def hinf_norm_hhat(
    q: ObserverParams,
    gains: ControlGains,
    anchors: DecompositionAnchors,
    grid_points: int = 4001,
    refine: bool = True,
) -> tuple[float, float]:
    """Peak magnitude of the loop transfer function of the frozen estimate.

    The frozen observer matrix Â₀ has characteristic polynomial
    d̂(s) + (k₁ + k₅Î_r)·n̂(s) with

        n̂(s) = (k₄ - ω̂)(s + μ̂ + σ̂)(s + μ̂ + γ̂)
        d̂(s) = (s + μ̂ + k₁ + (β̂₁+k₅)Î_r)(s + μ̂ + σ̂)(s + μ̂ + γ̂)(s + μ̂ + ω̂ - k₄)

    and the small-gain condition asks for the supremum over frequency of
    |k₁ + k₅Î_r| · |n̂(iw)/d̂(iw)| to stay below one.  The supremum is taken
    over a logarithmic grid (default 1e-6 .. 1e6 rad/day) and optionally
    refined by a golden-section search around the grid argmax.

    Returns:
        (norm value, frequency of the peak in rad/day).  Exactly zero when
        the numerator gain k₄ - ω̂ or the loop gain k₁ + k₅Î_r vanishes.

    Raises:
        ValueError: some factor of d̂ is not strictly stable.
    """
    muh, omh = q.mu_hat, q.omega_hat
    loop_gain = gains.k1 + gains.k5 * anchors.i_hat_r
    num_gain = gains.k4 - omh
    f1 = muh + gains.k1 + (q.beta1_hat + gains.k5) * anchors.i_hat_r
    f2 = muh + q.sigma_hat
    f3 = muh + q.gamma_hat
    f4 = muh + omh - gains.k4
    if min(f1, f2, f3, f4) <= 0.0:
        raise ValueError("frozen observer polynomial is not Hurwitz; norm undefined")
    if loop_gain == 0.0 or num_gain == 0.0:
        return 0.0, 0.0

    num = num_gain * np.convolve([f2, 1.0], [f3, 1.0])
    den = np.convolve(np.convolve([f1, 1.0], [f2, 1.0]), np.convolve([f3, 1.0], [f4, 1.0]))
    num_desc = num[::-1]
    den_desc = den[::-1]

    def mag(w: np.ndarray) -> np.ndarray:
        s = 1j * w
        return abs(loop_gain) * np.abs(np.polyval(num_desc, s)) / np.abs(
            np.polyval(den_desc, s)
        )

    grid = np.logspace(-6.0, 6.0, grid_points)
    values = mag(grid)
    j = int(np.argmax(values))
    best_w, best_v = float(grid[j]), float(values[j])
    if refine:
        lo = math.log10(grid[max(j - 1, 0)])
        hi = math.log10(grid[min(j + 1, grid_points - 1)])
        inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
        a, b = lo, hi
        c = b - inv_phi * (b - a)
        d = a + inv_phi * (b - a)
        fc = float(mag(np.array([10.0**c]))[0])
        fd = float(mag(np.array([10.0**d]))[0])
        for _ in range(80):
            if fc > fd:
                b, d, fd = d, c, fc
                c = b - inv_phi * (b - a)
                fc = float(mag(np.array([10.0**c]))[0])
            else:
                a, c, fc = c, d, fd
                d = a + inv_phi * (b - a)
                fd = float(mag(np.array([10.0**d]))[0])
        w_ref = 10.0 ** (0.5 * (a + b))
        v_ref = float(mag(np.array([w_ref]))[0])
        if v_ref > best_v:
            best_w, best_v = float(w_ref), v_ref
    return best_v, best_w


# ---------------------------------------------------------------------------
# Matrix exponential
# ---------------------------------------------------------------------------


def matrix_exponential(m: np.ndarray, t: float = 1.0) -> np.ndarray:
    """exp(M t) by scaling-and-squaring with a truncated power series.

    The argument is halved until its infinity norm drops below one half,
    the series is summed until terms fall under machine precision relative
    to the partial sum, and the result is squared back up.
    """
    a = np.asarray(m, dtype=float) * t
    norm = float(np.max(np.sum(np.abs(a), axis=1))) if a.size else 0.0
    squarings = 0
    if norm > 0.5:
        squarings = max(0, int(math.ceil(math.log2(norm / 0.5))))
        a = a / (2.0**squarings)
    n = a.shape[0]
    result = np.eye(n)
    term = np.eye(n)
    for k in range(1, 61):
        term = term @ a / k
        result = result + term
        if float(np.max(np.abs(term))) <= 1e-16 * float(np.max(np.abs(result))):
            break
    for _ in range(squarings):
        result = result @ result
    return result


# ---------------------------------------------------------------------------
# Affine offsets and transient envelopes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AffineVectors:
    """Affine offsets of the cascade and their norms.

    ``b_tilde`` is formed literally as b - b̂ so the identity is exact; the
    closed-form norm expressions are evaluated independently and recorded
    next to the direct Euclidean norms.  ``forcing_bound`` is the calculable
    bound ‖b̂‖ + ‖b̃‖ that feeds the transient envelope of the stacked
    system, and ``forcing_bound_coarse`` its weaker parameter-only version.
    ``epsilon_min`` is the smallest forcing budget that admits the actual
    parameter mismatch, which is just ‖b̃‖.
    """

    b: np.ndarray
    b_hat: np.ndarray
    b_tilde: np.ndarray
    b_bar: np.ndarray
    b_norm: float
    b_hat_norm: float
    b_tilde_norm: float
    b_bar_norm: float
    b_hat_norm_closed: float
    b_tilde_norm_closed: float
    forcing_bound: float
    forcing_bound_coarse: float
    epsilon_min: float


def affine_vectors_and_bounds(
    p: EpidemicParams, q: ObserverParams, g: float
) -> AffineVectors:
    """Affine offsets b, b̂, b̃ = b - b̂ and the stacked (b̂, b̃) with norms.

    Verifies the algebraic identity between the two closed forms of ‖b̂‖,
        N·sqrt((μ̂-2g)μ̂ + 2g²) = N·sqrt((μ̂-g)² + g²),
    and checks the direct norms stay below their closed-form bounds.
    """
    n = p.n_total
    muh = q.mu_hat
    b = np.array([(1.0 - g / muh) * p.mu * n, 0.0, 0.0, g * p.mu * n / muh])
    b_hat = np.array([(muh - g) * n, 0.0, 0.0, g * n])
    b_tilde = b - b_hat
    b_bar = np.concatenate([b_hat, b_tilde])

    b_norm = float(np.linalg.norm(b))
    b_hat_norm = float(np.linalg.norm(b_hat))
    b_tilde_norm = float(np.linalg.norm(b_tilde))
    b_bar_norm = float(np.linalg.norm(b_bar))

    radicand = (muh - 2.0 * g) * muh + 2.0 * g * g
    closed_a = n * math.sqrt(radicand)
    closed_b = n * math.sqrt((muh - g) ** 2 + g * g)
    if abs(closed_a - closed_b) > 1e-9 * max(1.0, closed_a):
        raise AssertionError("closed-form norm identity violated")
    mismatch = abs(p.mu - muh) / muh
    b_tilde_closed = mismatch * closed_a
    bound = (1.0 + mismatch) * closed_a
    bound_coarse = ((2.0 * muh + p.mu) / muh) * closed_a

    return AffineVectors(
        b=b,
        b_hat=b_hat,
        b_tilde=b_tilde,
        b_bar=b_bar,
        b_norm=b_norm,
        b_hat_norm=b_hat_norm,
        b_tilde_norm=b_tilde_norm,
        b_bar_norm=b_bar_norm,
        b_hat_norm_closed=closed_a,
        b_tilde_norm_closed=b_tilde_closed,
        forcing_bound=bound,
        forcing_bound_coarse=bound_coarse,
        epsilon_min=b_tilde_norm,
    )


def transient_envelope(
    k0: float, rho0: float, initial_norm: float, forcing_norm: float, t: np.ndarray
) -> np.ndarray:
    """Exponential transient bound k₀e^(-ρ₀t)(‖x(0)‖ + forcing ∫₀ᵗ e^(ρ₀τ)dτ).

    Closed form k₀e^(-ρ₀t)‖x(0)‖ + (k₀·forcing/ρ₀)(1 - e^(-ρ₀t)); its
    t -> ∞ limit is k₀·forcing/ρ₀.  Requires ρ₀ > 0.
    """
    if rho0 <= 0.0:
        raise ValueError("transient envelope needs a positive decay margin")
    decay = np.exp(-rho0 * np.asarray(t, dtype=float))
    return k0 * decay * initial_norm + (k0 * forcing_norm / rho0) * (1.0 - decay)


def transient_constant(m: np.ndarray, rho0: float, safety: float = 1.05) -> float:
    """Estimated constant k₀ with ‖exp(M t)‖ <= k₀ e^(-ρ₀ t) for t >= 0.

    Samples ‖exp(M t)‖ e^(ρ₀ t) on a logarithmic time grid and applies a
    safety multiplier; computed in log space so slow decay rates do not
    overflow.  A sampled estimate, not a proof — callers should budget
    margin in ρ₀ accordingly.
    """
    log_best = 0.0  # t -> 0 gives ||I|| = 1
    for tt in np.logspace(-3.0, 3.0, 61):
        norm_e, _ = spectral_norm(matrix_exponential(m, tt))
        if not math.isfinite(norm_e):
            return math.inf
        if norm_e > 0.0:
            log_best = max(log_best, math.log(norm_e) + rho0 * tt)
    return math.exp(log_best) * safety


# ---------------------------------------------------------------------------
# Certification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StabilityReport:
    """Flat summary of every stability/positivity certificate.

    ``k0`` is estimated by sampling ‖exp(Ā₀ t)‖·e^(ρ₀ t) on a logarithmic
    time grid and applying a safety factor, so it is marked as estimated
    rather than proven.
    """

    mode: str
    plant_factors_positive: bool
    d_hurwitz: bool
    dhat_hurwitz: bool
    det_ahat0_hurwitz: bool
    d_factor_gap: float
    dhat_identity_gap: float
    hinf_value: float
    hinf_peak_omega: float
    small_gain_ok: bool
    cascade_stable_smallgain: bool
    a0_metzler: bool
    ahat0_metzler: bool
    rho: float
    sup_perturbation_norm: float
    rho0: float
    margin_positive: bool
    alpha0: float
    alpha1: float
    alpha0_threshold: float
    window_margin_ok: bool
    k0: float
    k0_estimated: bool
    b_norm: float
    b_hat_norm: float
    b_tilde_norm: float
    b_bar_norm: float
    forcing_bound: float
    forcing_bound_coarse: float
    epsilon_min: float
    envelope_limit_bar: float
    envelope_limit_hat: float
    envelope_limit_tilde: float

    def to_text(self) -> str:
        lines = [f"{f.name} = {getattr(self, f.name)}" for f in fields(self)]
        return "\n".join(lines) + "\n"

    def to_csv_rows(self) -> list[tuple[str, str]]:
        return [(f.name, repr(getattr(self, f.name))) for f in fields(self)]


def _window_fit(
    t: np.ndarray, norms: np.ndarray
) -> tuple[float, float]:
    """Least-squares (slope, intercept) bound for sliding-window integrals.

    For a ladder of window lengths T the worst-case integral of the
    perturbation norm over any window of length T is computed from the
    cumulative trapezoid, then a line alpha0*T + alpha1 is fitted through
    those worst cases.
    """
    n = len(t)
    if n < 3:
        return float(norms.max(initial=0.0)), 0.0
    dt_samples = np.diff(t)
    cumulative = np.concatenate(
        [[0.0], np.cumsum(0.5 * (norms[1:] + norms[:-1]) * dt_samples)]
    )
    shifts = sorted({max(1, (n - 1) * j // 12) for j in range(1, 7)})
    lengths, worst = [], []
    for k in shifts:
        diffs = cumulative[k:] - cumulative[:-k]
        spans = t[k:] - t[:-k]
        lengths.append(float(np.mean(spans)))
        worst.append(float(np.max(diffs)))
    design = np.column_stack([lengths, np.ones(len(lengths))])
    sol, *_ = np.linalg.lstsq(design, np.array(worst), rcond=None)
    return float(sol[0]), float(sol[1])


def certify(
    p: EpidemicParams,
    q: ObserverParams,
    gains: ControlGains,
    anchors: DecompositionAnchors,
    *,
    i_range: tuple[float, float] | None = None,
    i_hat_range: tuple[float, float] | None = None,
    t_series: np.ndarray | None = None,
    i_series: np.ndarray | None = None,
    i_hat_series: np.ndarray | None = None,
    alpha0_fraction: float = 0.9,
    k0_safety: float = 1.05,
) -> StabilityReport:
    """Assemble the full stability certificate for the cascade.

    Two sourcing modes for the perturbation size: *range* mode takes
    a-priori intervals for the infectious levels and exploits that the
    perturbation is affine in (I, Î), so its norm peaks at an interval
    corner; *trajectory* mode evaluates the perturbation norm along recorded
    series.  Everything else (frozen-part spectra, transfer-function peak,
    affine offsets, envelope constants) is mode-independent.

    Args:
        p, q, gains, anchors: system description.
        i_range, i_hat_range: a-priori levels for range mode.
        t_series, i_series, i_hat_series: recorded levels for trajectory
            mode.
        alpha0_fraction: the fitted average perturbation rate must stay
            below this fraction of the frozen decay rate.
        k0_safety: multiplier applied to the sampled transient constant.

    Returns:
        StabilityReport with one entry per certificate.
    """
    range_mode = i_range is not None or i_hat_range is not None
    series_mode = i_series is not None or i_hat_series is not None
    if range_mode == series_mode:
        raise ValueError("provide either ranges or series, not both")
    if series_mode and (t_series is None or i_series is None or i_hat_series is None):
        raise ValueError("trajectory mode needs t_series, i_series and i_hat_series")
    if range_mode and (i_range is None or i_hat_range is None):
        raise ValueError("range mode needs both i_range and i_hat_range")

    mu, om, b1 = p.mu, p.omega, p.beta1
    muh, omh = q.mu_hat, q.omega_hat

    plant_factors = (
        mu + b1 * anchors.i_r > 0.0
        and mu + p.sigma > 0.0
        and mu + p.gamma > 0.0
        and mu + om > 0.0
    )

    d_coeffs = polynomial_from_roots(
        [-(mu + b1 * anchors.i_r), -(mu + p.sigma), -(mu + p.gamma), -(mu + om)]
    )
    d_hurwitz = hurwitz_check(d_coeffs)

    f1 = muh + gains.k1 + (q.beta1_hat + gains.k5) * anchors.i_hat_r
    f2 = muh + q.sigma_hat
    f3 = muh + q.gamma_hat
    f4 = muh + omh - gains.k4
    dhat_coeffs = polynomial_from_roots([-f1, -f2, -f3, -f4])
    dhat_hurwitz = hurwitz_check(dhat_coeffs)

    decomp = build_decomposition(p, q, gains, anchors, anchors.i_r, anchors.i_hat_r)
    det_a0 = characteristic_polynomial(decomp.a0)
    d_factor_gap = float(np.max(np.abs(det_a0 - d_coeffs)))
    det_ahat0 = characteristic_polynomial(decomp.a_hat0)
    nhat = (gains.k4 - omh) * np.convolve([f2, 1.0], [f3, 1.0])
    loop_gain = gains.k1 + gains.k5 * anchors.i_hat_r
    identity = dhat_coeffs.copy()
    identity[: len(nhat)] += loop_gain * nhat
    dhat_identity_gap = float(np.max(np.abs(det_ahat0 - identity)))
    det_ahat0_hurwitz = hurwitz_check(det_ahat0)

    try:
        hinf_value, hinf_peak = hinf_norm_hhat(q, gains, anchors)
    except ValueError:
        hinf_value, hinf_peak = math.inf, math.nan
    small_gain = hinf_value < 1.0
    cascade_stable_smallgain = bool(
        plant_factors and dhat_hurwitz and min(f1, f2, f3, f4) > 0.0 and small_gain
    )

    a0_metzler, _ = metzler_check(decomp.a0)
    ahat0_metzler, _ = metzler_check(decomp.a_hat0)

    abscissa = stability_abscissa(decomp.a_bar0)
    rho = -abscissa

    if range_mode:
        corners = [
            (ci, cih)
            for ci in i_range  # type: ignore[union-attr]
            for cih in i_hat_range  # type: ignore[union-attr]
        ]
        sup_norm = 0.0
        for ci, cih in corners:
            block = perturbation_block(p, q, gains, anchors, ci, cih)
            sigma, _ = spectral_norm(block)
            sup_norm = max(sup_norm, sigma)
        alpha0, alpha1 = sup_norm, 0.0
        mode = "range"
    else:
        t_arr = np.asarray(t_series, dtype=float)
        i_arr = np.asarray(i_series, dtype=float)
        ih_arr = np.asarray(i_hat_series, dtype=float)
        norms = np.empty(len(t_arr))
        warm: np.ndarray | None = None
        for idx in range(len(t_arr)):
            block = perturbation_block(p, q, gains, anchors, i_arr[idx], ih_arr[idx])
            sigma, warm = spectral_norm(block, start=warm)
            norms[idx] = sigma
        sup_norm = float(np.max(norms)) if len(norms) else 0.0
        alpha0, alpha1 = _window_fit(t_arr, norms)
        mode = "trajectory"

    rho0 = rho - sup_norm
    margin_positive = rho > sup_norm
    threshold = alpha0_fraction * rho
    window_margin_ok = alpha0 < threshold

    with np.errstate(divide="ignore", over="ignore"):
        k0 = transient_constant(decomp.a_bar0, rho0, safety=k0_safety)

    vecs = affine_vectors_and_bounds(p, q, gains.g)
    if rho0 > 0.0 and math.isfinite(k0):
        env_bar = k0 * vecs.forcing_bound / rho0
        env_hat = k0 * vecs.b_hat_norm_closed / rho0
        env_tilde = k0 * vecs.b_tilde_norm_closed / rho0
    else:
        env_bar = env_hat = env_tilde = math.inf

    return StabilityReport(
        mode=mode,
        plant_factors_positive=plant_factors,
        d_hurwitz=d_hurwitz,
        dhat_hurwitz=dhat_hurwitz,
        det_ahat0_hurwitz=det_ahat0_hurwitz,
        d_factor_gap=d_factor_gap,
        dhat_identity_gap=dhat_identity_gap,
        hinf_value=hinf_value,
        hinf_peak_omega=hinf_peak,
        small_gain_ok=small_gain,
        cascade_stable_smallgain=cascade_stable_smallgain,
        a0_metzler=a0_metzler,
        ahat0_metzler=ahat0_metzler,
        rho=rho,
        sup_perturbation_norm=sup_norm,
        rho0=rho0,
        margin_positive=margin_positive,
        alpha0=alpha0,
        alpha1=alpha1,
        alpha0_threshold=threshold,
        window_margin_ok=window_margin_ok,
        k0=k0,
        k0_estimated=True,
        b_norm=vecs.b_norm,
        b_hat_norm=vecs.b_hat_norm,
        b_tilde_norm=vecs.b_tilde_norm,
        b_bar_norm=vecs.b_bar_norm,
        forcing_bound=vecs.forcing_bound,
        forcing_bound_coarse=vecs.forcing_bound_coarse,
        epsilon_min=vecs.epsilon_min,
        envelope_limit_bar=env_bar,
        envelope_limit_hat=env_hat,
        envelope_limit_tilde=env_tilde,
    )
