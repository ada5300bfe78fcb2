"""Whole-line Weyl-Titchmarsh matrix, Green's matrix, and the boundary-value
density Upsilon = pi^{-1} Im log M.

M(z, x0) is assembled from the two half-line M-functions; it is a Herglotz
matrix of full rank 2m, so the principal matrix logarithm is well defined
off the real axis and Upsilon has spectrum in [0, 1].
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import LogBranchFailure, SingularDifference
from .foundation import alpha_dirichlet, hermitize, matnorm
from .propagator import DEFAULT_ATOL, DEFAULT_RTOL, Propagator
from .weyldisk import halfline_m

_SING_COND = 1e12


@dataclass(frozen=True, eq=False)
class FullLineM:
    """Block 2m x 2m Weyl-Titchmarsh matrix of the whole-line operator."""

    z: complex
    x0: float
    alpha: object
    m11: np.ndarray
    m12: np.ndarray
    m21: np.ndarray
    m22: np.ndarray
    m22_defect: float
    plus: object           # HalfLineM toward +inf
    minus: object          # HalfLineM toward -inf

    @property
    def matrix(self):
        return np.block([[self.m11, self.m12], [self.m21, self.m22]])


def fullline_m(z, x0, alpha, spec, tol=1e-10, rtol=DEFAULT_RTOL,
               atol=DEFAULT_ATOL, max_range=1e8):
    """Assemble M(z, x0, alpha) from M_minus and M_plus.

    M11 = (M_- - M_+)^{-1}, M12 = M11 (M_- + M_+)/2,
    M21 = (M_- + M_+)/2 M11, M22 = M_+- M11 M_-+ (both orderings averaged,
    their distance reported as m22_defect).
    """
    mp = halfline_m(z, x0, alpha, spec, sign=+1, tol=tol, rtol=rtol,
                    atol=atol, max_range=max_range)
    mm = halfline_m(z, x0, alpha, spec, sign=-1, tol=tol, rtol=rtol,
                    atol=atol, max_range=max_range)
    diff = mm.M - mp.M
    scale = 1.0 + max(matnorm(mp.M), matnorm(mm.M))
    smin = float(np.linalg.svd(diff, compute_uv=False)[-1])
    if smin <= scale / _SING_COND:
        raise SingularDifference(
            f"M_- - M_+ numerically singular at z = {z} "
            "(z at the spectrum within resolution)")
    dinv = np.linalg.inv(diff)
    ssum = 0.5 * (mm.M + mp.M)
    m22a = mp.M @ dinv @ mm.M
    m22b = mm.M @ dinv @ mp.M
    return FullLineM(z=complex(z), x0=float(x0), alpha=alpha,
                     m11=dinv, m12=dinv @ ssum, m21=ssum @ dinv,
                     m22=0.5 * (m22a + m22b),
                     m22_defect=matnorm(m22a - m22b),
                     plus=mp, minus=mm)


def principal_logm(mat, cut_tol=1e-12, branch_shift=1e-14):
    """Principal matrix logarithm with a guard along the negative real axis.

    Eigenvalues within cut_tol of the cut are nudged by +i*branch_shift
    (Herglotz values touch the cut only where the boundary limit is real,
    approached from above).  Zero or non-finite eigenvalues raise
    LogBranchFailure.
    """
    mat = np.asarray(mat, complex)
    evals = np.linalg.eigvals(mat)
    if not np.all(np.isfinite(evals)) or np.any(np.abs(evals) < 1e-300):
        raise LogBranchFailure("matrix logarithm undefined: zero or "
                               "non-finite eigenvalue")
    if np.any((evals.real < 0) & (np.abs(evals.imag) < cut_tol)):
        mat = mat + 1j * branch_shift * np.eye(mat.shape[0])
    out = scipy.linalg.logm(mat)
    if not np.all(np.isfinite(out)):
        raise LogBranchFailure("matrix logarithm did not converge")
    return out


@dataclass(frozen=True, eq=False)
class UpsilonSample:
    lam: float
    eps: float
    value: np.ndarray       # Hermitian, spectrum in [0, 1] up to tolerance
    raw: np.ndarray         # value at eps without Richardson correction


def upsilon(lam, x0, alpha, spec, eps, tol=1e-8, richardson=True, **kw):
    """Boundary-value sample pi^{-1} Im log M(lam + i*eps, x0, alpha).

    With richardson=True the eps -> 0 limit is accelerated with the
    two-point rule 2 Y(eps) - Y(2 eps).
    """
    def one(e):
        mat = fullline_m(lam + 1j * e, x0, alpha, spec, tol=tol, **kw).matrix
        logm = principal_logm(mat)
        return hermitize((logm - logm.conj().T) / 2j) / math.pi

    raw = one(eps)
    if richardson:
        val = 2.0 * raw - one(2.0 * eps)
    else:
        val = raw
    return UpsilonSample(lam=float(lam), eps=float(eps), value=val, raw=raw)


# ---------------------------------------------------------------------------
# Green's matrix
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GreensMatrix:
    z: complex
    x: float
    xp: float
    value: np.ndarray


class GreensEvaluator:
    """Green's matrix G(z, x, x') of the whole-line operator for fixed z.

    Caches the half-line M-functions and the propagators at z and conj(z),
    so sweeps over (x, x') are cheap.  Only the canonical boundary data
    (I_m 0) is supported.
    """

    def __init__(self, z, x0, spec, tol=1e-10, rtol=DEFAULT_RTOL,
                 atol=DEFAULT_ATOL):
        self.z = complex(z)
        self.x0 = float(x0)
        self.spec = spec
        alpha = alpha_dirichlet(spec.m)
        self.alpha = alpha
        self.full = fullline_m(z, x0, alpha, spec, tol=tol, rtol=rtol,
                               atol=atol)
        diff = self.full.minus.M - self.full.plus.M
        self.dinv = np.linalg.inv(diff)
        self._prop = Propagator(self.z, spec, rtol=rtol, atol=atol)
        self._prop_bar = Propagator(np.conj(self.z), spec, rtol=rtol, atol=atol)

    def _weyl(self, x, sign, conjugate=False):
        # U_sign(z, x) = Psi(z, x, x0) (I; M_sign); at conj(z) the half-line
        # matrices are the adjoints of those at z
        m = self.spec.m
        mhalf = self.full.plus.M if sign > 0 else self.full.minus.M
        if conjugate:
            mhalf = mhalf.conj().T
            prop = self._prop_bar
        else:
            prop = self._prop
        col = np.vstack([np.eye(m), mhalf])
        return prop.transfer(self.x0, x, scale=0) @ col

    def value(self, x, xp, side=None):
        if x == xp:
            if side not in (1, -1):
                raise ValueError("on the diagonal pass side=+1 (x'=x+0) or -1")
            upper = side > 0
        else:
            upper = x < xp
        if upper:
            left = self._weyl(x, -1)
            right = self._weyl(xp, +1, conjugate=True)
        else:
            left = self._weyl(x, +1)
            right = self._weyl(xp, -1, conjugate=True)
        val = left @ self.dinv @ right.conj().T
        return GreensMatrix(z=self.z, x=float(x), xp=float(xp), value=val)

    def diagonal_m(self, x):
        """[G(z, x, x+0) + G(z, x, x-0)] / 2, the block M matrix at x."""
        gp = self.value(x, x, side=+1).value
        gm = self.value(x, x, side=-1).value
        return 0.5 * (gp + gm)


def greens_matrix(z, x, xp, x0, spec, side=None, tol=1e-10, **kw):
    """One-shot Green's matrix value; see GreensEvaluator for sweeps."""
    return GreensEvaluator(z, x0, spec, tol=tol, **kw).value(x, xp, side=side)
