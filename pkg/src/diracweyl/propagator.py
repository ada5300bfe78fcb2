"""Propagation of the first-order system J Psi' = (z I + B(x)) Psi.

The workhorse is the Propagator class, which produces transfer matrices
T(xb <- xa) with an optional exponential rescale e^{i s z (xb - xa)} that
keeps entries bounded when |Im z| * |xb - xa| is large (the rescale cancels
in every M-function ratio).  Constant pieces propagate through cached
eigendecompositions (exact up to roundoff for any span); sampled pieces go
through an adaptive Runge-Kutta integration; periodic potentials reduce long
spans to powers of the one-period transfer.

The Volterra route (successive approximation of the integral equation for
the decaying Weyl solution of a compactly supported potential) lives here as
well; it is deliberately quadrature-based so it stays independent of the
transfer-matrix machinery and can serve as a cross-check oracle.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm
from scipy.signal import lfilter

from .errors import (
    DegenerateArguments,
    IntegrationFailure,
    IterationDivergence,
    MismatchedEvaluation,
    NoCompactSupport,
)
from .foundation import ConstantPiece, alpha_dirichlet, jmat, matnorm

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
# eigenbasis condition caps: diagonalization errors scale like eps * cond,
# so beyond ~1e6 fall back to expm / binary powering
_EIG_COND_MAX = 1e6
_POW_COND_MAX = 1e6


def system_matrix(z, b):
    """Coefficient A(x) of Psi' = A Psi, i.e. J^{-1} (z I + B) = -J (z I + B)."""
    b = np.asarray(b)
    d = b.shape[0]
    return -jmat(d // 2) @ (z * np.eye(d) + b)


def auto_scale(z, xa, xb):
    """Rescale sign that damps the dominant exponential growth on [xa, xb]."""
    s = complex(z).imag * (xb - xa)
    if s == 0:
        return 0
    return 1 if s > 0 else -1


def _matpow(t, k):
    """t**k for integer k, eigendecomposition first, binary powering fallback."""
    d = t.shape[0]
    if k == 0:
        return np.eye(d, dtype=complex)
    w, v = np.linalg.eig(t)
    if np.all(np.isfinite(v)) and np.linalg.cond(v) < _POW_COND_MAX:
        return v @ np.diag(w ** k) @ np.linalg.inv(v)
    base = t if k > 0 else np.linalg.inv(t)
    n = abs(k)
    out = np.eye(d, dtype=complex)
    while n:
        if n & 1:
            out = out @ base
        base = base @ base
        n >>= 1
    return out


class Propagator:
    """Transfer matrices for one (z, spec) pair, with caching.

    Not thread-safe per instance (it memoizes); build one per worker.
    """

    def __init__(self, z, spec, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
                 method="DOP853"):
        self.z = complex(z)
        self.spec = spec
        self.rtol = rtol
        self.atol = atol
        self.method = method
        self.m = spec.m
        self._zero = ConstantPiece(-math.inf, math.inf,
                                   np.zeros((2 * spec.m, 2 * spec.m)))
        self._eig = {}        # (piece id, scale) -> (w, v, vinv) or None
        self._seg = {}        # (piece id, a, b, scale) -> transfer
        self._rhs = {}        # (piece id, scale) -> interpolated coefficient
        self._period_t = {}   # (phase, scale) -> one-period transfer
        self.ode_steps = 0

    # -- geometry helpers -----------------------------------------------------

    def _piece_at(self, x):
        """Piece owning the point x (segments are identified by their
        midpoint, which is immune to boundary roundoff)."""
        for p in self.spec.pieces:
            if p.x_lo <= x < p.x_hi:
                return p
        return self._zero

    def _edges_in(self, lo, hi):
        edges = []
        for e in _piece_edges(self.spec):
            if lo < e < hi:
                edges.append(e)
        return sorted(set(edges))

    # -- elementary transfers -------------------------------------------------

    def _const_transfer(self, piece, a, b, scale):
        key = (id(piece), scale)
        if key not in self._eig:
            acoef = system_matrix(self.z, piece.value)
            if scale:
                acoef = acoef + 1j * scale * self.z * np.eye(2 * self.m)
            try:
                w, v = np.linalg.eig(acoef)
                cond = np.linalg.cond(v)
            except np.linalg.LinAlgError:
                cond = math.inf
            if np.all(np.isfinite(w)) and cond < _EIG_COND_MAX:
                self._eig[key] = (acoef, w, v, np.linalg.inv(v))
            else:
                self._eig[key] = (acoef, None, None, None)
        acoef, w, v, vinv = self._eig[key]
        span = b - a
        if w is not None:
            # overflow to inf is an expected probe outcome on long spans;
            # callers detect it and bisect
            with np.errstate(over="ignore", invalid="ignore"):
                return (v * np.exp(w * span)) @ vinv
        return expm(acoef * span)

    def _grid_rhs(self, piece, scale):
        """Interpolated coefficient A(x) at the piece nodes, cached per
        (piece, scale); A is affine in B so the linear interpolant of the
        node coefficients equals the coefficient of the interpolated B."""
        key = (id(piece), scale)
        if key not in self._rhs:
            xs = piece.xs
            nodes = np.array([system_matrix(self.z, v) for v in piece.values])
            if scale:
                nodes = nodes + 1j * scale * self.z * np.eye(2 * self.m)
            self._rhs[key] = (xs, nodes)
        xs, nodes = self._rhs[key]
        d = 2 * self.m
        last = len(xs) - 1

        def rhs(x, y):
            k = np.searchsorted(xs, x)
            if k <= 0:
                acoef = nodes[0]
            elif k > last:
                acoef = nodes[last]
            else:
                t = (x - xs[k - 1]) / (xs[k] - xs[k - 1])
                acoef = (1.0 - t) * nodes[k - 1] + t * nodes[k]
            return (acoef @ y.reshape(d, d)).ravel()

        return rhs

    def _grid_transfer(self, piece, a, b, scale):
        key = (id(piece), a, b, scale)
        if key in self._seg:
            return self._seg[key]
        d = 2 * self.m
        eye = np.eye(d, dtype=complex)
        sol = solve_ivp(self._grid_rhs(piece, scale), (a, b),
                        eye.ravel().astype(complex),
                        method=self.method, rtol=self.rtol, atol=self.atol,
                        dense_output=False)
        self.ode_steps += sol.t.size
        if not sol.success or not np.all(np.isfinite(sol.y[:, -1])):
            raise IntegrationFailure(
                f"propagation failed on [{a}, {b}] at z = {self.z}: {sol.message}")
        t = sol.y[:, -1].reshape(d, d)
        self._seg[key] = t
        return t

    def _piece_transfer(self, a, b, scale):
        """Transfer across [a, b] assumed to lie inside a single piece
        (after periodic wrapping)."""
        if self.spec.is_periodic:
            base = self.spec.pieces[0].x_lo
            w = self.spec.period
            off = math.floor((0.5 * (a + b) - base) / w) * w
            a, b = a - off, b - off
        piece = self._piece_at(0.5 * (a + b))
        if piece.kind == "constant":
            return self._const_transfer(piece, a, b, scale)
        return self._grid_transfer(piece, a, b, scale)

    def _walk(self, xa, xb, scale):
        """Product of piece transfers over [xa, xb] (no period powering)."""
        d = 2 * self.m
        t = np.eye(d, dtype=complex)
        lo, hi = min(xa, xb), max(xa, xb)
        if self.spec.is_periodic:
            base = self.spec.pieces[0].x_lo
            w = self.spec.period
            cell = [e - base for e in _piece_edges(self.spec)]
            k_lo = math.floor((lo - base) / w) - 1
            k_hi = math.floor((hi - base) / w) + 1
            edges = sorted({base + k * w + e for k in range(k_lo, k_hi + 1)
                            for e in cell if lo < base + k * w + e < hi})
        else:
            edges = self._edges_in(lo, hi)
        pts = [lo] + edges + [hi]
        if xb < xa:
            pts = pts[::-1]
        for a, b in zip(pts, pts[1:]):
            if abs(b - a) < 1e-13:
                continue
            t = self._piece_transfer(a, b, scale) @ t
        return t

    def transfer(self, xa, xb, scale=0):
        """T(xb <- xa) with the rescale factor e^{i*scale*z*(xb - xa)} folded in."""
        if xa == xb:
            return np.eye(2 * self.m, dtype=complex)
        spec = self.spec
        if spec.is_periodic and abs(xb - xa) > 2 * spec.period:
            w = spec.period
            span = xb - xa
            k = math.floor(span / w)
            r = span - k * w
            if abs(r) < 1e-12 * max(1.0, abs(span)):
                r = 0.0
            phase = (xa - spec.pieces[0].x_lo) % w
            pkey = (round(phase, 12), scale)
            if pkey not in self._period_t:
                self._period_t[pkey] = self._walk(xa, xa + w, scale)
            tk = _matpow(self._period_t[pkey], k)
            if not r:
                return tk
            # B(x + k*w) = B(x): the remainder T(xa+kw+r <- xa+kw) equals
            # T(xa+r <- xa), which stays inside the cached cell structure
            return self._walk(xa, xa + r, scale) @ tk
        return self._walk(xa, xb, scale)


def _piece_edges(spec):
    edges = []
    for p in spec.pieces:
        for e in (p.x_lo, p.x_hi):
            if math.isfinite(e):
                edges.append(e)
    return sorted(set(edges))


def fundamental_system(z, x, x0, alpha, spec, rtol=DEFAULT_RTOL,
                       atol=DEFAULT_ATOL, propagator=None):
    """Normalized fundamental system Psi(z, x, x0, alpha) = (Theta Phi).

    The initial value at x = x0 reproduces (alpha* Jalpha*) exactly.  Entries
    grow like e^{|Im z| |x - x0|}; callers probing that regime should work
    with M-function ratios instead (where rescaling applies).
    """
    prop = propagator or Propagator(z, spec, rtol=rtol, atol=atol)
    psi0 = alpha.psi0()
    if x == x0:
        psi = psi0
    else:
        psi = prop.transfer(x0, x, scale=0) @ psi0
    m = alpha.m
    return FundamentalSystem(z=complex(z), x=float(x), x0=float(x0),
                             alpha=alpha, theta=psi[:, :m], phi=psi[:, m:],
                             ode_steps=prop.ode_steps)


@dataclass(frozen=True, eq=False)
class FundamentalSystem:
    """Value of the fundamental system at one (z, x)."""

    z: complex
    x: float
    x0: float
    alpha: object
    theta: np.ndarray
    phi: np.ndarray
    ode_steps: int = 0

    @property
    def psi(self):
        return np.hstack([self.theta, self.phi])


def symplectic_defect(fs_zbar, fs_z):
    """|| Psi(zbar, x)* J Psi(z, x) - J ||, an integration accuracy monitor.

    The two arguments must be evaluations at conjugate spectral parameters
    with identical x, x0 and boundary data.
    """
    if (fs_zbar.x != fs_z.x or fs_zbar.x0 != fs_z.x0
            or abs(np.conj(fs_zbar.z) - fs_z.z) > 0
            or not np.array_equal(fs_zbar.alpha.alpha, fs_z.alpha.alpha)):
        raise MismatchedEvaluation(
            "symplectic check needs conjugate z and identical (x, x0, alpha)")
    m = fs_z.alpha.m
    j = jmat(m)
    return matnorm(fs_zbar.psi.conj().T @ j @ fs_z.psi - j)


# ---------------------------------------------------------------------------
# Volterra route for compactly supported potentials
# ---------------------------------------------------------------------------

def _phase_weights(h, phi):
    """Integrals of e^{phi*s}*(1 - s/h) and e^{phi*s}*(s/h) over [0, h].

    Exact phase integration against a linear interpolant; series branch for
    small |phi*h| to dodge cancellation.
    """
    w = phi * h
    if abs(w) < 1e-5:
        c1 = h * (0.5 + w / 3.0 + w * w / 8.0)
        c0 = h * (0.5 + w / 6.0 + w * w / 24.0)
        return c0, c1
    e = np.exp(w)
    total = (e - 1.0) / phi
    c1 = e / phi - (e - 1.0) / (phi * phi * h)
    return total - c1, c1


def _p0_apply(x, m):
    """([[1, -i], [i, 1]] (x) I_m) applied to a stacked (…, 2m, m) array."""
    top, bot = x[..., :m, :], x[..., m:, :]
    return np.concatenate([top - 1j * bot, 1j * top + bot], axis=-2)


def _p1_apply(x, m):
    top, bot = x[..., :m, :], x[..., m:, :]
    return np.concatenate([top + 1j * bot, -1j * top + bot], axis=-2)


@dataclass(frozen=True, eq=False)
class WeylSolution:
    """Square-integrable (Weyl) solution at one x, tilde-normalized: equal to
    (seed) * e^{i z (x - x0)} beyond the support of B."""

    z: complex
    x: float
    x0: float
    u1: np.ndarray           # includes the exponential factor
    u2: np.ndarray
    v1: np.ndarray           # rescaled by e^{-i z (x - x0)}
    v2: np.ndarray
    normalization: str = "tilde"
    iterations: int = 0
    last_diff: float = math.nan

    def weyl_m(self):
        """u2 u1^{-1}: the half-line M-function at base point x (alpha0)."""
        return self.v2 @ np.linalg.inv(self.v1)


def weyl_solution_volterra(z, x, x0, spec, alpha=None, tol=1e-12,
                           max_iter=200, points_per_unit=None):
    """Solve the rescaled Volterra equation for the decaying solution by
    successive approximation (product quadrature, exact in the oscillatory
    phase against a piecewise-linear integrand).

    Requires Im z > 0 and compactly supported B.  Geometric/factorial
    convergence in the iteration count; IterationDivergence when the budget
    is exhausted.
    """
    z = complex(z)
    if z.imag <= 0:
        raise DegenerateArguments("Volterra route needs Im z > 0")
    if spec.is_periodic or not spec.is_compactly_supported():
        raise NoCompactSupport("potential must have bounded support")
    m = spec.m
    if alpha is None:
        alpha = alpha_dirichlet(m)
    a1s = alpha.alpha1.conj().T
    a2s = alpha.alpha2.conj().T
    seed_top = a1s - 1j * a2s
    seed = np.vstack([seed_top, 1j * seed_top])      # value beyond the support

    lo_supp, y0 = spec.support()
    lo = min(x, x0, lo_supp)
    if x >= y0 - 1e-13:
        v = seed
        return _pack_weyl(z, x, x0, v, m, 0, 0.0)

    density = points_per_unit or max(4000.0, 800.0 * (1.0 + abs(z)))
    cuts = sorted({lo, y0, x, x0, *(e for e in _piece_edges(spec)
                                    if lo < e < y0)})
    cuts = [c for c in cuts if lo <= c <= y0]
    segs = []
    for a, b in zip(cuts, cuts[1:]):
        if b - a < 1e-13:
            continue
        n = max(3, int(math.ceil((b - a) * density)) + 1)
        segs.append(np.linspace(a, b, n))

    j = jmat(m)
    jb = []   # J B at nodes, per segment
    for xs in segs:
        mats = np.empty((len(xs), 2 * m, 2 * m), dtype=complex)
        for i, t in enumerate(xs):
            side = 1 if i < len(xs) - 1 else -1
            mats[i] = j @ spec.eval(t, side=side)
        jb.append(mats)

    phi = 2j * z
    seed_b = np.broadcast_to(seed, (1, 2 * m, m))
    vcur = [np.broadcast_to(seed, (len(xs), 2 * m, m)).copy() for xs in segs]
    norm0 = matnorm(seed)
    last_diff = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        vnew = []
        carry0 = np.zeros((2 * m, m), dtype=complex)
        carry1 = np.zeros((2 * m, m), dtype=complex)
        # walk segments right to left, accumulating the two suffix integrals
        for si in range(len(segs) - 1, -1, -1):
            xs = segs[si]
            h = xs[1] - xs[0]
            w = jb[si] @ vcur[si]                       # (n, 2m, m)
            n = len(xs)
            shape = w.shape[1:]
            flat = w.reshape(n, -1)
            # plain suffix integral (trapezoid)
            u0 = 0.5 * h * (flat[:-1] + flat[1:])
            i0 = np.concatenate([[carry0.ravel()], u0[::-1]]).cumsum(axis=0)[::-1]
            # phase-weighted suffix integral, AR(1) scan
            c0, c1 = _phase_weights(h, phi)
            r = np.exp(phi * h)
            u1 = c0 * flat[:-1] + c1 * flat[1:]
            seq = np.concatenate([[carry1.ravel()], u1[::-1]])
            y = lfilter([1.0], [1.0, -r], seq, axis=0)
            i1 = y[::-1]
            q = 0.5 * (_p0_apply(i0.reshape(n, *shape), m)
                       + _p1_apply(i1.reshape(n, *shape), m))
            vnew.insert(0, seed_b + q)
            carry0 = i0[0].reshape(shape)
            carry1 = i1[0].reshape(shape)
        diff = max(float(np.max(np.abs(a - b))) for a, b in zip(vnew, vcur))
        vcur = vnew
        if not math.isfinite(diff) or diff > 1e12 * (1.0 + norm0):
            raise IterationDivergence(
                f"successive approximations diverged at iteration {it}")
        last_diff = diff
        if diff < tol:
            break
    else:
        raise IterationDivergence(
            f"no convergence within {max_iter} iterations "
            f"(last difference {last_diff:.3e}); raise max_iter for large ||B||_1")

    # read off the value at x (x is a segment endpoint by construction)
    val = None
    for xs, vv in zip(segs, vcur):
        k = np.searchsorted(xs, x)
        if k < len(xs) and abs(xs[k] - x) < 1e-10:
            val = vv[k]
            break
        if k > 0 and abs(xs[k - 1] - x) < 1e-10:
            val = vv[k - 1]
            break
    if val is None:
        raise IntegrationFailure(f"evaluation point {x} missing from the grid")
    return _pack_weyl(z, x, x0, val, m, it, last_diff)


def _pack_weyl(z, x, x0, v, m, iterations, last_diff):
    ex = np.exp(1j * z * (x - x0))
    return WeylSolution(z=z, x=float(x), x0=float(x0),
                        u1=v[:m, :] * ex, u2=v[m:, :] * ex,
                        v1=v[:m, :].copy(), v2=v[m:, :].copy(),
                        iterations=iterations, last_diff=last_diff)
