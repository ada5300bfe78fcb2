"""Regular-interval M-functions, the Weyl disk functional, membership
classification, and the limit-point half-line M-function.

The half-line value is obtained by truncating at c, imposing a self-adjoint
boundary condition there (which pins the truncated M on the Weyl circle),
and doubling c until the values settle; disk nesting makes the truncation
error at most the disk diameter.  Numerically the truncated value is carried
in the Cayley chart theta = (u1 + i*sigma*u2)(u1 - i*sigma*u2)^{-1}, which
compactifies the Riccati flow: theta stays in the closed unit ball along
disk trajectories, segments are split until each Moebius factor is
well-conditioned, and earlier roundoff is contracted away by the flow
itself.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateArguments,
    EigenvalueHit,
    IntegrationFailure,
    NoConvergence,
    SingularDenominator,
)
from .foundation import herm_defect, hermitize, jmat, matnorm, sigma
from .propagator import DEFAULT_ATOL, DEFAULT_RTOL, Propagator, auto_scale

_COND_LIMIT = 1e12      # beta @ Phi condition number marking an eigenvalue hit
_MOBIUS_COND = 3e6      # split segments above this factor condition
_MIN_SEG = 1e-9


def _smallest_sv(mat):
    try:
        return float(np.linalg.svd(mat, compute_uv=False)[-1])
    except np.linalg.LinAlgError:
        return 0.0


def _rel_cond(mat, scale):
    """Effective condition of inverting ``mat`` inside a product whose
    inputs have the given scale (np.linalg.cond is scale-blind and always 1
    for 1 x 1 matrices)."""
    smin = _smallest_sv(mat)
    if smin == 0.0 or not math.isfinite(smin):
        return math.inf
    return (scale + 1e-300) / smin


def _beta_blocks(beta):
    if hasattr(beta, "alpha1"):
        return beta.alpha1, beta.alpha2
    b1, b2 = beta
    return np.atleast_2d(np.asarray(b1, complex)), np.atleast_2d(np.asarray(b2, complex))


def regular_m(z, c, x0, alpha, beta, spec, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
              cond_limit=_COND_LIMIT, propagator=None):
    """M-function of the regular problem on [x0, c] with boundary data
    (alpha at x0, beta at c): -[beta Phi(z,c)]^{-1} [beta Theta(z,c)].

    Raises EigenvalueHit when beta Phi is singular within the condition
    budget, which happens exactly when z is an eigenvalue of the regular
    self-adjoint problem.
    """
    if c == x0:
        raise DegenerateArguments("regular M needs c != x0")
    z = complex(z)
    b1, b2 = _beta_blocks(beta)
    prop = propagator or Propagator(z, spec, rtol=rtol, atol=atol)
    psi = prop.transfer(x0, c, scale=auto_scale(z, x0, c)) @ alpha.psi0()
    m = alpha.m
    theta, phi = psi[:, :m], psi[:, m:]
    bphi = b1 @ phi[:m] + b2 @ phi[m:]
    btheta = b1 @ theta[:m] + b2 @ theta[m:]
    scale_in = matnorm(np.hstack([b1, b2])) * matnorm(phi)
    cond = _rel_cond(bphi, scale_in)
    if cond > cond_limit:
        raise EigenvalueHit(
            f"beta Phi(z, c={c}) is singular (cond {cond:.2e}): "
            "z is an eigenvalue of the regular boundary value problem",
            cond=cond)
    return -np.linalg.solve(bphi, btheta)


def e_c(mat, z, c, x0, alpha, spec, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
        return_defect=False, propagator=None):
    """Disk functional E_c(M) = sigma(x0,c,z) U(z,c)* (iJ) U(z,c), Hermitian.

    Nonpositive exactly on the Weyl disk at c; zero on the circle.
    """
    z = complex(z)
    sig = sigma(x0, c, z)
    prop = propagator or Propagator(z, spec, rtol=rtol, atol=atol)
    m = alpha.m
    col = np.vstack([np.eye(m), np.asarray(mat, complex)])
    u = (prop.transfer(x0, c, scale=0) @ alpha.psi0()) @ col
    e = sig * (u.conj().T @ (1j * jmat(m)) @ u)
    defect = herm_defect(e)
    e = hermitize(e)
    if return_defect:
        return e, defect
    return e


@dataclass(frozen=True, eq=False)
class WeylPoint:
    """A candidate M with its classification against the disk at c."""

    M: np.ndarray
    z: complex
    c: float
    x0: float
    classification: str      # "interior" | "boundary" | "exterior"
    e_c_value: np.ndarray


def disk_membership(mat, z, c, x0, alpha, spec, tol=1e-8, **kw):
    """Classify M against the Weyl disk at c by the sign of lambda_max(E_c).

    The tolerance is scale-aware: tol * (1 + ||E_c||).
    """
    e = e_c(mat, z, c, x0, alpha, spec, **kw)
    lam_max = float(np.linalg.eigvalsh(e)[-1])
    eff = tol * (1.0 + matnorm(e))
    if lam_max > eff:
        cls = "exterior"
    elif lam_max < -eff:
        cls = "interior"
    else:
        cls = "boundary"
    return WeylPoint(M=np.asarray(mat, complex), z=complex(z), c=float(c),
                     x0=float(x0), classification=cls, e_c_value=e)


# ---------------------------------------------------------------------------
# Half-line M via the compactified truncation sweep
# ---------------------------------------------------------------------------

def _cayley_frame(sig, m):
    eye = np.eye(m)
    c = np.block([[eye, 1j * sig * eye], [eye, -1j * sig * eye]])
    cinv = 0.5 * np.block([[eye, eye], [-1j * sig * eye, 1j * sig * eye]])
    return c, cinv


def _mobius_step(s, theta):
    m = theta.shape[0]
    num = s[:m, :m] @ theta + s[:m, m:]
    den = s[m:, :m] @ theta + s[m:, m:]
    kappa = matnorm(s) * _safe_inv_norm(den)
    return num, den, kappa


def _safe_inv_norm(den):
    if not np.all(np.isfinite(den)):
        return math.inf
    try:
        return float(np.linalg.norm(np.linalg.inv(den), 2))
    except np.linalg.LinAlgError:
        return math.inf


def _mobius_across(prop, a, b, theta, frame, scale, depth=0):
    """Carry theta from a to b through the transfer matrix, bisecting the
    interval until each factor is well conditioned."""
    c, cinv = frame
    t = prop.transfer(a, b, scale=scale)
    if np.all(np.isfinite(t)):
        s = c @ t @ cinv
        num, den, kappa = _mobius_step(s, theta)
    else:
        kappa = math.inf
    if kappa > _MOBIUS_COND:
        if abs(b - a) < _MIN_SEG or depth > 80:
            raise IntegrationFailure(
                f"Moebius factor on [{a}, {b}] stayed ill-conditioned")
        mid = 0.5 * (a + b)
        theta = _mobius_across(prop, a, mid, theta, frame, scale, depth + 1)
        return _mobius_across(prop, mid, b, theta, frame, scale, depth + 1)
    return np.linalg.solve(den.T, num.T).T


def _theta_from_subspace(w1, w2, sig):
    p = w1 + 1j * sig * w2
    q = w1 - 1j * sig * w2
    if _rel_cond(q, matnorm(w1) + matnorm(w2)) > _COND_LIMIT:
        raise SingularDenominator("subspace not representable in the Cayley chart")
    return np.linalg.solve(q.T, p.T).T


def _m_from_theta(theta, sig, alpha):
    m = theta.shape[0]
    eye = np.eye(m)
    w = np.vstack([0.5 * (theta + eye), -0.5j * sig * (theta - eye)])
    aw = alpha.alpha @ w
    ajw = alpha.alpha_j() @ w
    if _rel_cond(aw, matnorm(w)) > _COND_LIMIT:
        raise SingularDenominator("alpha-chart readoff singular")
    return -np.linalg.solve(aw.T, ajw.T).T


@dataclass(frozen=True, eq=False)
class HalfLineM:
    """Limit-point half-line Weyl-Titchmarsh matrix with its truncation tail."""

    M: np.ndarray
    z: complex
    x0: float
    alpha: object
    sign: int                # +1: half line [x0, +inf), -1: (-inf, x0]
    tail_bound: float
    c_final: float
    sweeps: int


def halfline_m(z, x0, alpha, spec, sign=1, tol=1e-10, max_range=1e8,
               rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, beta=None):
    """Half-line M-function M_plus (sign=+1) or M_minus (sign=-1).

    Truncates at c = x0 +/- 2^k with the self-adjoint boundary condition
    beta = (I_m, 0) at c and doubles until successive values agree within
    tol (relative to 1 + ||M||); the last difference is recorded as
    tail_bound.  Raises NoConvergence when c would exceed max_range, which
    for z very close to the real axis is the expected failure mode.
    """
    z = complex(z)
    if z.imag == 0:
        raise DegenerateArguments("half-line M needs Im z != 0")
    m = alpha.m
    sig = sigma(x0 + sign, x0, z)
    frame = _cayley_frame(sig, m)
    prop = Propagator(z, spec, rtol=rtol, atol=atol)

    if beta is None:
        b1, b2 = np.eye(m), np.zeros((m, m))
    else:
        b1, b2 = _beta_blocks(beta)
    # boundary subspace J beta* at c: w1 = -beta2*, w2 = beta1*
    theta_c = _theta_from_subspace(-b2.conj().T, b1.conj().T, sig)

    scale = 1 if z.imag * sign < 0 else -1   # damps the backward sweep c -> x0
    prev = None
    tail = math.inf
    k = 0
    sweeps = 0
    while True:
        span = 2.0 ** k
        if span > max_range:
            raise NoConvergence(
                f"no Cauchy convergence by c = x0 + {sign * span:g} "
                f"(z too close to the real axis for tol {tol:.1e})",
                best=prev, tail=tail)
        c = x0 + sign * span
        theta = _mobius_across(prop, c, x0, theta_c, frame, scale)
        mval = _m_from_theta(theta, sig, alpha)
        sweeps += 1
        if prev is not None:
            tail = matnorm(mval - prev)
            if tail < tol * (1.0 + matnorm(mval)):
                return HalfLineM(M=mval, z=z, x0=float(x0), alpha=alpha,
                                 sign=sign, tail_bound=tail,
                                 c_final=c, sweeps=sweeps)
        prev = mval
        k += 1


def lft_boundary_change(m_gamma, alpha, gamma):
    """Rewrite an M-function from boundary data gamma to alpha:
    M_alpha = [-alpha J gamma* + alpha gamma* M] [alpha gamma* + alpha J gamma* M]^{-1}.
    """
    m_gamma = np.asarray(m_gamma, complex)
    ag = alpha.alpha @ gamma.alpha.conj().T
    ajg = alpha.alpha_j() @ gamma.alpha.conj().T
    num = -ajg + ag @ m_gamma
    den = ag + ajg @ m_gamma
    if _rel_cond(den, 1.0 + matnorm(m_gamma)) > _COND_LIMIT:
        raise SingularDenominator(
            "alpha gamma* + alpha J gamma* M is singular")
    return np.linalg.solve(den.T, num.T).T
