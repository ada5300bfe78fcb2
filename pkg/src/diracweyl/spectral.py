"""Trace-formula verification, Floquet band structure, reflectionless and
Borg-type diagnostics, and the local-uniqueness decay experiment.
"""

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DifferenceBelowNoise,
    DifferentiationFailure,
    NotPeriodic,
)
from .foundation import alpha_dirichlet, matnorm
from .fullline import fullline_m, principal_logm, upsilon
from .propagator import DEFAULT_ATOL, DEFAULT_RTOL, Propagator
from .weyldisk import halfline_m


def _combination(b, m):
    b11, b12 = b[:m, :m], b[:m, m:]
    b21, b22 = b[m:, :m], b[m:, m:]
    top = np.hstack([b11 - b22, b12 + b21])
    bot = np.hstack([b12 + b21, b22 - b11])
    return np.vstack([top, bot])


@dataclass(frozen=True, eq=False)
class TraceCheck:
    x: float
    lhs: np.ndarray           # averaged one-sided combination matrix of B(x)
    zs: tuple
    rhs: tuple                # 2 z^2 d/dz log M(z, x) per sample
    residuals: tuple


def trace_check(x, spec, ray_angle=math.pi / 2, zmags=(1e2, 3e2, 1e3),
                rel_step=1e-3, tol=1e-12, alpha=None, **kw):
    """Check the trace identity: 2 z^2 (d/dz) log M(z, x) converges to the
    one-sided combination matrix of B at x along a ray in the upper half
    plane.

    The derivative is a central difference with step |z| * rel_step along
    the ray (a complex-step scheme is pointless here because M itself comes
    out of a solver).
    """
    spec_m = spec.m
    alpha = alpha or alpha_dirichlet(spec_m)
    lhs = 0.5 * (_combination(spec.eval(x, side=+1), spec_m)
                 + _combination(spec.eval(x, side=-1), spec_m))
    direction = cmath.exp(1j * ray_angle)
    zs, rhs, residuals = [], [], []
    for mag in zmags:
        z = mag * direction
        try:
            lp = principal_logm(
                fullline_m(z * (1 + rel_step), x, alpha, spec, tol=tol, **kw).matrix)
            lm = principal_logm(
                fullline_m(z * (1 - rel_step), x, alpha, spec, tol=tol, **kw).matrix)
        except Exception as exc:
            raise DifferentiationFailure(
                f"log M derivative failed at |z| = {mag:g}: {exc}") from exc
        deriv = (lp - lm) / (2.0 * rel_step * z)
        val = 2.0 * z * z * deriv
        if not np.all(np.isfinite(val)):
            raise DifferentiationFailure(
                f"non-finite derivative at |z| = {mag:g}")
        zs.append(z)
        rhs.append(val)
        residuals.append(matnorm(val - lhs))
    return TraceCheck(x=float(x), lhs=lhs, zs=tuple(zs), rhs=tuple(rhs),
                      residuals=tuple(residuals))


# ---------------------------------------------------------------------------
# Floquet theory
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Monodromy:
    z: complex
    x0: float
    period: float
    matrix: np.ndarray
    multipliers: np.ndarray   # eigenvalues sorted by modulus


def monodromy(z, spec, x0=None, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
    """One-period transfer matrix Psi(z, x0 + omega, x0), Psi(x0) = I."""
    if not spec.is_periodic:
        raise NotPeriodic("monodromy needs a periodic potential")
    if x0 is None:
        x0 = spec.pieces[0].x_lo
    prop = Propagator(z, spec, rtol=rtol, atol=atol)
    t = prop.transfer(x0, x0 + spec.period, scale=0)
    mult = np.linalg.eigvals(t)
    mult = mult[np.argsort(np.abs(mult))]
    return Monodromy(z=complex(z), x0=float(x0), period=spec.period,
                     matrix=t, multipliers=mult)


@dataclass(frozen=True, eq=False)
class BandStructure:
    lams: np.ndarray
    in_band: np.ndarray       # bool per grid point
    multipliers: np.ndarray   # (n, 2m)
    bands: tuple              # maximal in-band runs as (lo, hi) pairs
    gaps: tuple               # interior out-of-band runs


def _runs(lams, flags, want):
    out = []
    start = None
    for i, f in enumerate(flags):
        if f == want and start is None:
            start = i
        if f != want and start is not None:
            out.append((float(lams[start]), float(lams[i - 1])))
            start = None
    if start is not None:
        out.append((float(lams[start]), float(lams[-1])))
    return tuple(out)


def band_spectrum(spec, lams, tol=1e-6, x0=None, **kw):
    """Flag each real lambda in-band iff every Floquet multiplier is
    unimodular within tol * max(1, omega)."""
    if not spec.is_periodic:
        raise NotPeriodic("band structure needs a periodic potential")
    lams = np.asarray(lams, float)
    eff = tol * max(1.0, spec.period)
    mults = []
    flags = np.zeros(len(lams), dtype=bool)
    for i, lam in enumerate(lams):
        mono = monodromy(lam, spec, x0=x0, **kw)
        mults.append(mono.multipliers)
        flags[i] = bool(np.all(np.abs(np.abs(mono.multipliers) - 1.0) <= eff))
    bands = _runs(lams, flags, True)
    gaps = []
    for lo, hi in _runs(lams, flags, False):
        if lo > lams[0] and hi < lams[-1]:
            gaps.append((lo, hi))
    return BandStructure(lams=lams, in_band=flags,
                         multipliers=np.array(mults), bands=bands,
                         gaps=tuple(gaps))


# ---------------------------------------------------------------------------
# Reflectionless / Borg diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ReflectionlessReport:
    ok: bool
    worst: float
    samples: tuple            # (x, lam, deviation)


def reflectionless_check(spec, xs, lams, eps=1e-6, tol=1e-3,
                         upsilon_tol=1e-7, **kw):
    """True iff ||Upsilon(lam, x) - I/2|| <= tol over all samples.

    lams should lie inside the essential spectrum (use band_spectrum for
    periodic potentials to pick them).
    """
    m = spec.m
    half = 0.5 * np.eye(2 * m)
    worst = 0.0
    samples = []
    alpha = alpha_dirichlet(m)
    for x in xs:
        for lam in lams:
            val = upsilon(lam, x, alpha, spec, eps, tol=upsilon_tol, **kw).value
            dev = matnorm(val - half)
            samples.append((float(x), float(lam), dev))
            worst = max(worst, dev)
    return ReflectionlessReport(ok=worst <= tol, worst=worst,
                                samples=tuple(samples))


@dataclass(frozen=True, eq=False)
class BorgReport:
    full_spectrum: bool
    lam_max: float
    grid_step: float
    bands: tuple
    gaps: tuple
    comb_diag_max: float      # sup ||B11 - B22|| over a period
    comb_off_max: float       # sup ||B12 + B21|| over a period
    consistent: bool


def borg_diagnostic(spec, lam_max=None, grid_step=0.01, comb_tol=1e-8,
                    band_tol=1e-6, samples=201, **kw):
    """Rigidity check for periodic potentials: if the spectrum fills the
    sampled window (with multiplier-unimodularity as the multiplicity
    evidence), the combinations B11 - B22 and B12 + B21 must vanish.

    The verdict is the implication, so a gap plus nonzero combinations is
    consistent (contrapositive direction).
    """
    if not spec.is_periodic:
        raise NotPeriodic("Borg diagnostic needs a periodic potential")
    if lam_max is None:
        lam_max = 10.0 * spec.bound() + 10.0
    n = max(3, int(round(2 * lam_max / grid_step)) + 1)
    lams = np.linspace(-lam_max, lam_max, n)
    bands = band_spectrum(spec, lams, tol=band_tol, **kw)
    full = bool(np.all(bands.in_band))

    m = spec.m
    lo = spec.pieces[0].x_lo
    xs = np.linspace(lo, lo + spec.period, samples)
    cd = co = 0.0
    for x in xs:
        b = spec.eval(x, side=+1)
        cd = max(cd, matnorm(b[:m, :m] - b[m:, m:]))
        co = max(co, matnorm(b[:m, m:] + b[m:, :m]))
    consistent = (not full) or (cd <= comb_tol and co <= comb_tol)
    return BorgReport(full_spectrum=full, lam_max=float(lam_max),
                      grid_step=float(grid_step), bands=bands.bands,
                      gaps=bands.gaps, comb_diag_max=cd, comb_off_max=co,
                      consistent=consistent)


# ---------------------------------------------------------------------------
# Local uniqueness: exponential closeness of half-line M-functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DecayFit:
    ray_angle: float
    zmags: tuple
    norms: tuple              # ||M1 - M2|| per sample (NaN where discarded)
    slope: float              # s in ||dM|| ~ C |z|^-p e^{-s Im z}
    intercept: float
    prefactor_exp: float      # fitted p
    r2: float
    used: tuple               # sample indices that entered the fit


def uniqueness_decay(spec1, spec2, x0, a, ray_angle=math.pi / 2,
                     zmags=(3.0, 4.0, 5.0, 6.0, 7.0, 8.0), alpha=None,
                     tol=1e-11, noise_factor=10.0, **kw):
    """Fit the exponential decay rate of ||M_{1,+} - M_{2,+}|| along a ray.

    For potentials in the reduced (normal) form that agree a.e. on
    (x0, x0 + a) the difference decays like e^{-2 a Im z} up to a power of
    |z|; the fit therefore solves
    log||dM|| = c - p log|z| - s Im z and reports s (target 2a) together
    with the prefactor exponent p.  Samples whose difference is within
    noise_factor times the half-line solver tolerance are discarded; if
    none survive the two potentials are indistinguishable and
    DifferenceBelowNoise is raised.
    """
    alpha = alpha or alpha_dirichlet(spec1.m)
    direction = cmath.exp(1j * ray_angle)
    norms = []
    noise = []
    for mag in zmags:
        z = mag * direction
        m1 = halfline_m(z, x0, alpha, spec1, sign=+1, tol=tol, **kw)
        m2 = halfline_m(z, x0, alpha, spec2, sign=+1, tol=tol, **kw)
        norms.append(matnorm(m1.M - m2.M))
        noise.append(m1.tail_bound + m2.tail_bound + tol)
    norms = np.array(norms)
    used = [i for i, (d, n) in enumerate(zip(norms, noise))
            if d > noise_factor * n]
    if len(used) < 3:
        raise DifferenceBelowNoise(
            "M-function differences sit at the solver noise floor "
            f"(max {norms.max():.3e}); the potentials are indistinguishable "
            "at this tolerance")
    zs = np.array([zmags[i] * direction for i in used])
    y = np.log(norms[used])
    design = np.column_stack([np.ones(len(zs)),
                              -np.log(np.abs(zs)),
                              -zs.imag])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    fitted = design @ coef
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    report_norms = tuple(float(d) if i in used else math.nan
                         for i, d in enumerate(norms))
    return DecayFit(ray_angle=float(ray_angle), zmags=tuple(zmags),
                    norms=report_norms, slope=float(coef[2]),
                    intercept=float(coef[0]), prefactor_exp=float(coef[1]),
                    r2=r2, used=tuple(used))
