"""High-energy expansion machinery: the coefficient recursion, least-squares
extraction of coefficients from M samples along a ray, and the leading
whole-line coefficient.

The expansion M_plus(z, x) ~ i I + sum_k m_k(x) z^{-k} holds uniformly in
upper half-plane sectors; its coefficients are differential polynomials in
the potential blocks (the AKNS invariants) generated by a quadratic
recursion with one x-derivative per order.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import IllConditionedFit, InsufficientDerivatives, SectorViolation
from .foundation import matnorm


@dataclass(frozen=True, eq=False)
class DerivativeSamples:
    """Potential samples and finite-difference derivatives on a grid."""

    xs: np.ndarray
    b: np.ndarray          # (n, 2m, 2m)
    derivs: tuple          # derivs[k-1] = B^(k) on the grid

    @property
    def order(self):
        return len(self.derivs)

    @property
    def m(self):
        return self.b.shape[1] // 2


def derivative_samples(spec, xs, order):
    """Sample B and its first ``order`` derivatives (order-2 central
    differences, one-sided at the ends) on a strictly increasing grid."""
    xs = np.asarray(xs, float)
    if np.any(np.diff(xs) <= 0):
        raise ValueError("grid must be strictly increasing")
    b = np.array([spec.eval(x) for x in xs])
    derivs = []
    cur = b
    for _ in range(order):
        cur = np.gradient(cur, xs, axis=0, edge_order=2)
        derivs.append(cur)
    return DerivativeSamples(xs=xs, b=b, derivs=tuple(derivs))


@dataclass(frozen=True, eq=False)
class ExpansionCoefficients:
    sign: int
    x: float
    coeffs: tuple          # m x m matrices, orders 0..N
    order: int


def expansion_coefficients(derivs, x, order, sign=1):
    """Coefficients m_{+-,0..order}(x) from the quadratic recursion.

    m_0 = +-i I;  m_1 = -(B12 + B21)/2 +- (i/2)(B11 - B22);
    m_{k+1} = +-(i/2) [ m_k' + sum_{l=1}^{k} m_l m_{k+1-l}
                        + sum_{l=0}^{k} m_l B22 m_{k-l}
                        + B12 m_k + m_k B21 ].
    The derivative term is taken by differentiating the lower coefficient on
    the sample grid, so order N needs derivative data through order N - 1.
    """
    if order >= 1 and derivs.order < order - 1:
        raise InsufficientDerivatives(
            f"order {order} needs B derivatives through order {order - 1}, "
            f"got {derivs.order}")
    xs = derivs.xs
    idx = np.where(np.isclose(xs, x, rtol=0, atol=1e-12))[0]
    if len(idx) == 0:
        raise ValueError(f"x = {x} is not a grid node")
    idx = int(idx[0])

    m = derivs.m
    n = len(xs)
    b11 = derivs.b[:, :m, :m]
    b12 = derivs.b[:, :m, m:]
    b21 = derivs.b[:, m:, :m]
    b22 = derivs.b[:, m:, m:]
    eye = np.broadcast_to(np.eye(m), (n, m, m))

    mk = [sign * 1j * eye.copy()]
    if order >= 1:
        mk.append(-0.5 * (b12 + b21) + sign * 0.5j * (b11 - b22))
    for k in range(1, order):
        dmk = np.gradient(mk[k], xs, axis=0, edge_order=2)
        quad = np.zeros_like(mk[0])
        for ell in range(1, k + 1):
            quad = quad + mk[ell] @ mk[k + 1 - ell]
        for ell in range(0, k + 1):
            quad = quad + mk[ell] @ b22 @ mk[k - ell]
        nxt = sign * 0.5j * (dmk + quad + b12 @ mk[k] + mk[k] @ b21)
        mk.append(nxt)

    return ExpansionCoefficients(sign=sign, x=float(xs[idx]),
                                 coeffs=tuple(c[idx] for c in mk),
                                 order=order)


def fit_expansion(samples, order, sector_angle=0.1, min_ratio=4.0):
    """Weighted least squares for the model sum_k c_k z^{-k} on M samples.

    samples: iterable of (z, M).  All z must lie in the sector
    sector_angle < arg z < pi - sector_angle, with a magnitude spread of at
    least min_ratio.  Rows are weighted by |z|^order to equalize the
    conditioning of the Vandermonde system in 1/z.

    Returns (coeffs, residuals): coefficient matrices c_0..c_order and the
    per-sample model residual norms.
    """
    samples = list(samples)
    if len(samples) < order + 2:
        raise IllConditionedFit(
            f"need at least {order + 2} samples for order {order}")
    zs = np.array([complex(z) for z, _ in samples])
    mats = np.array([np.atleast_2d(np.asarray(v, complex)) for _, v in samples])
    args = np.angle(zs)
    if np.any((args <= sector_angle) | (args >= math.pi - sector_angle)):
        raise SectorViolation(
            f"samples must satisfy {sector_angle} < arg z < pi - {sector_angle}")
    mags = np.abs(zs)
    if mags.max() / mags.min() < min_ratio:
        raise IllConditionedFit(
            f"|z| spread {mags.max() / mags.min():.2f} below {min_ratio}")

    w = mags ** order
    design = np.vander(1.0 / zs, order + 1, increasing=True) * w[:, None]
    rhs = mats.reshape(len(zs), -1) * w[:, None]
    sol, *_ = np.linalg.lstsq(design, rhs, rcond=None)
    mdim = mats.shape[1]
    coeffs = tuple(sol[k].reshape(mdim, mdim) for k in range(order + 1))

    residuals = []
    for z, mat in samples:
        model = sum(c / complex(z) ** k for k, c in enumerate(coeffs))
        residuals.append(matnorm(np.atleast_2d(np.asarray(mat)) - model))
    return coeffs, residuals


def _combination(b, m):
    b11, b12 = b[:m, :m], b[:m, m:]
    b21, b22 = b[m:, :m], b[m:, m:]
    top = np.hstack([b11 - b22, b12 + b21])
    bot = np.hstack([b12 + b21, b22 - b11])
    return np.vstack([top, bot])


def fullline_first_coeff(spec, x):
    """Leading 1/z coefficient of the whole-line M: the averaged one-sided
    combination matrix -(i/8)[comb(B(x+0)) + comb(B(x-0))]."""
    m = spec.m
    plus = _combination(spec.eval(x, side=+1), m)
    minus = _combination(spec.eval(x, side=-1), m)
    return -0.125j * (plus + minus)
