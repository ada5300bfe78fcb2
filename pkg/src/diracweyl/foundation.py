"""Core types: the symplectic form, boundary data, sign factor, and the
potential model with file ingestion.

Complex matrices are plain numpy arrays throughout; the helpers here enforce
the algebraic invariants (Hermiticity, normalization, the Lagrangian
condition).  All value types are immutable after construction, so they can be
shared freely across concurrent evaluations.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateArguments,
    EmptyWindow,
    NonHermitianPiece,
    NotLagrangian,
    NotNormalized,
    OutOfDomain,
)

# Default tolerance for algebraic identity checks (double precision products
# at block dimension m <= 8).
ALG_TOL = 1e-10

# Matrix norm policy: a single switch used by every defect/convergence check.
# 2 is the spectral norm; "fro" trades a little sharpness for speed.
NORM_ORD = 2


def matnorm(x):
    """Matrix norm under the library-wide policy."""
    return float(np.linalg.norm(np.asarray(x), ord=NORM_ORD))


def jmat(m):
    """The canonical symplectic form J = [[0, -I_m], [I_m, 0]]."""
    j = np.zeros((2 * m, 2 * m), dtype=complex)
    j[:m, m:] = -np.eye(m)
    j[m:, :m] = np.eye(m)
    return j


def herm_defect(x):
    """Distance of x from its Hermitian part."""
    x = np.asarray(x)
    return matnorm(x - x.conj().T)


def hermitize(x):
    x = np.asarray(x)
    return 0.5 * (x + x.conj().T)


def mat_imag(x):
    """Matrix imaginary part (X - X*) / 2i (Hermitian)."""
    x = np.asarray(x)
    return (x - x.conj().T) / 2j


def mat_real(x):
    """Matrix real part (X + X*) / 2 (Hermitian)."""
    x = np.asarray(x)
    return (x + x.conj().T) / 2


def sigma(s, t, z):
    """Sign of (s - t) * Im(z), the orientation factor of the disk functional.

    Returns +1 or -1.  Raises DegenerateArguments when s = t or z is real.
    """
    z = complex(z)
    if s == t:
        raise DegenerateArguments("sigma undefined for s = t")
    if z.imag == 0.0:
        raise DegenerateArguments("sigma undefined for real z")
    return 1 if (s - t) * z.imag > 0 else -1


# ---------------------------------------------------------------------------
# Boundary data
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BoundaryData:
    """Row blocks (alpha1, alpha2) of a normalized Lagrangian boundary matrix.

    Satisfies alpha @ alpha* = I and alpha @ J @ alpha* = 0 within the
    tolerance it was validated at.  Construct through validate_boundary_data.
    """

    alpha1: np.ndarray
    alpha2: np.ndarray

    @property
    def m(self):
        return self.alpha1.shape[0]

    @property
    def alpha(self):
        """The m x 2m boundary matrix (alpha1 alpha2)."""
        return np.hstack([self.alpha1, self.alpha2])

    def psi0(self):
        """Initial value (alpha* Jalpha*) of the normalized fundamental system.

        Exact by construction: entries are conjugates of the stored blocks.
        """
        a1s = self.alpha1.conj().T
        a2s = self.alpha2.conj().T
        top = np.hstack([a1s, -a2s])
        bot = np.hstack([a2s, a1s])
        return np.vstack([top, bot])

    def alpha_j(self):
        """alpha @ J, the complementary row block."""
        return np.hstack([self.alpha2, -self.alpha1])


def validate_boundary_data(alpha1, alpha2, tol=ALG_TOL):
    """Check the normalization and Lagrangian conditions and build the value.

    Raises NotNormalized when ||alpha alpha* - I|| > tol and NotLagrangian
    when ||alpha J alpha*|| > tol.
    """
    a1 = np.atleast_2d(np.array(alpha1, dtype=complex))
    a2 = np.atleast_2d(np.array(alpha2, dtype=complex))
    if a1.shape != a2.shape or a1.shape[0] != a1.shape[1]:
        raise ValueError("alpha blocks must be square and of equal shape")
    m = a1.shape[0]
    norm_defect = matnorm(a1 @ a1.conj().T + a2 @ a2.conj().T - np.eye(m))
    if norm_defect > tol:
        raise NotNormalized(
            f"||alpha alpha* - I|| = {norm_defect:.3e} exceeds tol {tol:.1e}")
    lagr = a2 @ a1.conj().T - a1 @ a2.conj().T  # alpha J alpha* / ... = 2i Im
    lagr_defect = matnorm(lagr)
    if lagr_defect > tol:
        raise NotLagrangian(
            f"||alpha J alpha*|| = {lagr_defect:.3e} exceeds tol {tol:.1e}")
    a1.flags.writeable = False
    a2.flags.writeable = False
    return BoundaryData(a1, a2)


def alpha_dirichlet(m):
    """Boundary data (I_m  0): kills the first component block at x0."""
    return validate_boundary_data(np.eye(m), np.zeros((m, m)))


def alpha_neumann(m):
    """Boundary data (0  I_m): kills the second component block at x0."""
    return validate_boundary_data(np.zeros((m, m)), np.eye(m))


# ---------------------------------------------------------------------------
# Potential model
# ---------------------------------------------------------------------------

def _check_hermitian_samples(values, tol, what):
    defect = max(herm_defect(v) for v in values)
    if defect > tol:
        raise NonHermitianPiece(
            f"{what}: Hermiticity defect {defect:.3e} exceeds tol {tol:.1e}")


@dataclass(frozen=True, eq=False)
class ConstantPiece:
    x_lo: float
    x_hi: float
    value: np.ndarray

    kind = "constant"

    def __post_init__(self):
        v = np.array(self.value, dtype=complex)
        v.flags.writeable = False
        object.__setattr__(self, "value", v)
        if not (self.x_hi > self.x_lo):
            raise ValueError("piece needs x_hi > x_lo")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite entries in constant piece")
        _check_hermitian_samples([v], ALG_TOL, "constant piece")

    def eval(self, x):
        return self.value

    def bound(self):
        return matnorm(self.value)


@dataclass(frozen=True, eq=False)
class GridPiece:
    """Sampled values with piecewise-linear interpolation between nodes."""

    xs: np.ndarray
    values: np.ndarray  # (n, 2m, 2m)

    kind = "grid"

    def __post_init__(self):
        xs = np.array(self.xs, dtype=float)
        vals = np.array(self.values, dtype=complex)
        if xs.ndim != 1 or len(xs) < 2 or np.any(np.diff(xs) <= 0):
            raise ValueError("grid nodes must be strictly increasing, n >= 2")
        if vals.shape[0] != len(xs):
            raise ValueError("one sample per grid node required")
        if not np.all(np.isfinite(vals)):
            raise ValueError("non-finite entries in grid piece")
        _check_hermitian_samples(vals, ALG_TOL, "grid piece")
        xs.flags.writeable = False
        vals.flags.writeable = False
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "values", vals)

    @property
    def x_lo(self):
        return float(self.xs[0])

    @property
    def x_hi(self):
        return float(self.xs[-1])

    def eval(self, x):
        xs = self.xs
        if x <= xs[0]:
            return self.values[0]
        if x >= xs[-1]:
            return self.values[-1]
        k = int(np.searchsorted(xs, x))
        # snap to nodes so that period translates of aligned points evaluate
        # bit-identically despite float wrap error
        snap = 1e-12 * (1.0 + abs(x))
        for j in (k - 1, k):
            if abs(x - xs[j]) <= snap:
                return self.values[j]
        t = (x - xs[k - 1]) / (xs[k] - xs[k - 1])
        return (1.0 - t) * self.values[k - 1] + t * self.values[k]

    def bound(self):
        return max(matnorm(v) for v in self.values)


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """Piecewise description of the Hermitian coefficient B(x).

    Outside its pieces the potential is zero (the locally integrable
    extension), unless a hard ``domain`` is declared, in which case
    evaluation beyond it raises OutOfDomain.  If ``period`` is set the
    pieces must tile exactly one period and evaluation wraps.
    """

    m: int
    pieces: tuple = ()
    period: float = None
    name: str = ""
    domain: tuple = None

    def __post_init__(self):
        pieces = tuple(self.pieces)
        object.__setattr__(self, "pieces", pieces)
        d = 2 * self.m
        for p in pieces:
            shape = p.value.shape if p.kind == "constant" else p.values.shape[1:]
            if shape != (d, d):
                raise ValueError(f"piece shape {shape} does not match 2m={d}")
        for a, b in zip(pieces, pieces[1:]):
            if b.x_lo < a.x_hi - 1e-12:
                raise ValueError("pieces must be ordered and non-overlapping")
        if self.period is not None:
            if not pieces:
                raise ValueError("periodic spec needs at least one piece")
            if self.period <= 0:
                raise ValueError("period must be positive")
            span = pieces[-1].x_hi - pieces[0].x_lo
            if not math.isclose(span, self.period, rel_tol=0, abs_tol=1e-9):
                raise ValueError("pieces must tile exactly one period")
            if not all(map(math.isfinite, (pieces[0].x_lo, pieces[-1].x_hi))):
                raise ValueError("periodic pieces must be finite")

    # -- geometry ------------------------------------------------------------

    @property
    def is_periodic(self):
        return self.period is not None

    def support(self):
        """(x_lo, x_hi) hull of the pieces; (0.0, 0.0) for the zero potential."""
        if not self.pieces:
            return (0.0, 0.0)
        return (self.pieces[0].x_lo, self.pieces[-1].x_hi)

    def is_compactly_supported(self):
        if self.is_periodic:
            return False
        lo, hi = self.support()
        return math.isfinite(lo) and math.isfinite(hi)

    def bound(self):
        """Upper estimate of sup_x ||B(x)||."""
        if not self.pieces:
            return 0.0
        return max(p.bound() for p in self.pieces)

    def breakpoints(self):
        """Sorted finite piece edges (one period's worth when periodic)."""
        pts = []
        for p in self.pieces:
            for v in (p.x_lo, p.x_hi):
                if math.isfinite(v):
                    pts.append(v)
            if p.kind == "grid":
                pts.extend(p.xs.tolist())
        return sorted(set(pts))

    # -- evaluation ----------------------------------------------------------

    def _wrap(self, x):
        base = self.pieces[0].x_lo
        y = base + (x - base) % self.period
        snap = 1e-12 * (1.0 + abs(x))
        for p in self.pieces:
            for e in (p.x_lo, p.x_hi):
                if abs(y - e) <= snap:
                    return e
        return y

    def eval(self, x, side=0):
        """B(x); ``side`` = +1 / -1 selects the one-sided limit at piece edges."""
        x = float(x)
        if self.domain is not None and not (self.domain[0] <= x <= self.domain[1]):
            raise OutOfDomain(f"x = {x} outside domain {self.domain}")
        if self.is_periodic:
            x = self._wrap(x)
            if side < 0 and math.isclose(x, self.pieces[0].x_lo, abs_tol=1e-12):
                x = self.pieces[-1].x_hi
        zero = np.zeros((2 * self.m, 2 * self.m), dtype=complex)
        shift = 0.0 if side == 0 else math.copysign(1e-12, side)
        xq = x + shift
        for p in self.pieces:
            if p.x_lo <= xq < p.x_hi or (xq >= p.x_hi and p is self.pieces[-1]
                                         and xq <= p.x_hi + 1e-12):
                return np.asarray(p.eval(min(max(x, p.x_lo), p.x_hi)))
        return zero

    # -- constructors ----------------------------------------------------

    @classmethod
    def zero(cls, m, name="zero"):
        return cls(m=m, pieces=(), name=name)

    @classmethod
    def constant(cls, value, x_lo=-math.inf, x_hi=math.inf, period=None, name=""):
        """Constant B on [x_lo, x_hi] (the whole line by default).

        With ``period`` set, the piece covers one period cell and the
        potential repeats.
        """
        value = np.asarray(value, dtype=complex)
        m = value.shape[0] // 2
        if period is not None:
            x_lo = 0.0 if not math.isfinite(x_lo) else x_lo
            x_hi = x_lo + period
        return cls(m=m, pieces=(ConstantPiece(x_lo, x_hi, value),),
                   period=period, name=name)

    @classmethod
    def from_samples(cls, xs, values, period=None, name=""):
        values = np.asarray(values, dtype=complex)
        m = values.shape[1] // 2
        return cls(m=m, pieces=(GridPiece(np.asarray(xs, float), values),),
                   period=period, name=name)


def eval_potential(spec, x, side=0):
    """Evaluate B(x) for a PotentialSpec (Hermitian 2m x 2m)."""
    return spec.eval(x, side=side)


def normal_form_matrix(b11, b12):
    """Assemble [[B11, B12], [B12, -B11]] from Hermitian blocks."""
    b11 = np.atleast_2d(np.asarray(b11, dtype=complex))
    b12 = np.atleast_2d(np.asarray(b12, dtype=complex))
    top = np.hstack([b11, b12])
    bot = np.hstack([b12, -b11])
    return np.vstack([top, bot])


def truncate_potential(spec, x0, y0):
    """Restrict spec to the window [x0, y0], zero elsewhere.

    The result is non-periodic with compact support; inside (x0, y0) it
    agrees with the original exactly.
    """
    if not (y0 > x0):
        raise EmptyWindow(f"window [{x0}, {y0}] is empty")

    out = []

    def clip(piece, lo, hi, offset=0.0):
        lo = max(lo, x0)
        hi = min(hi, y0)
        if hi - lo <= 1e-14:
            return
        if piece.kind == "constant":
            out.append(ConstantPiece(lo, hi, piece.value))
        else:
            xs = piece.xs + offset
            keep = (xs > lo + 1e-13) & (xs < hi - 1e-13)
            nodes = np.concatenate([[lo], xs[keep], [hi]])
            vals = np.array([piece.eval(t - offset) for t in nodes])
            out.append(GridPiece(nodes, vals))

    if spec.is_periodic:
        base = spec.pieces[0].x_lo
        w = spec.period
        k_lo = math.floor((x0 - base) / w)
        k_hi = math.ceil((y0 - base) / w)
        for k in range(k_lo, k_hi):
            off = k * w
            for p in spec.pieces:
                clip(p, p.x_lo + off, p.x_hi + off, offset=off)
    else:
        for p in spec.pieces:
            clip(p, p.x_lo, p.x_hi)

    out.sort(key=lambda p: p.x_lo)
    name = f"{spec.name}|[{x0},{y0}]" if spec.name else f"truncated[{x0},{y0}]"
    return PotentialSpec(m=spec.m, pieces=tuple(out), name=name)


def check_normal_form(spec, interval, tol=ALG_TOL, samples=101):
    """True iff B22 = -B11 and B21 = B12 with Hermitian blocks on the interval.

    Sampled check; piece edges are probed from both sides.
    """
    lo, hi = interval
    m = spec.m
    xs = list(np.linspace(lo, hi, samples))
    for x in xs:
        for side in (-1, 1):
            b = spec.eval(x, side=side)
            b11, b12 = b[:m, :m], b[:m, m:]
            b21, b22 = b[m:, :m], b[m:, m:]
            if (matnorm(b22 + b11) > tol or matnorm(b21 - b12) > tol
                    or herm_defect(b11) > tol or herm_defect(b12) > tol):
                return False
    return True


# ---------------------------------------------------------------------------
# File format: {"m": int, "period": float?, "pieces": [...]}, complex entries
# serialized as [re, im] pairs.
# ---------------------------------------------------------------------------

def _complex_out(mat):
    mat = np.asarray(mat, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in mat]


def _complex_in(data):
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise ValueError("matrix entries must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def _edge_out(v):
    if v == math.inf:
        return "inf"
    if v == -math.inf:
        return "-inf"
    return float(v)


def _edge_in(v):
    if v == "inf":
        return math.inf
    if v == "-inf":
        return -math.inf
    return float(v)


def potential_to_dict(spec):
    pieces = []
    for p in spec.pieces:
        entry = {"x_lo": _edge_out(p.x_lo), "x_hi": _edge_out(p.x_hi),
                 "kind": p.kind}
        if p.kind == "constant":
            entry["data"] = _complex_out(p.value)
        else:
            entry["data"] = {"x": [float(t) for t in p.xs],
                             "values": [_complex_out(v) for v in p.values]}
        pieces.append(entry)
    doc = {"m": spec.m, "pieces": pieces}
    if spec.period is not None:
        doc["period"] = float(spec.period)
    if spec.name:
        doc["name"] = spec.name
    return doc


def potential_from_dict(doc):
    m = int(doc["m"])
    pieces = []
    for entry in doc.get("pieces", []):
        x_lo = _edge_in(entry["x_lo"])
        x_hi = _edge_in(entry["x_hi"])
        kind = entry.get("kind", "constant")
        if kind == "constant":
            pieces.append(ConstantPiece(x_lo, x_hi, _complex_in(entry["data"])))
        elif kind == "grid":
            xs = np.asarray(entry["data"]["x"], dtype=float)
            vals = np.array([_complex_in(v) for v in entry["data"]["values"]])
            pieces.append(GridPiece(xs, vals))
        else:
            raise ValueError(f"unknown piece kind {kind!r}")
    return PotentialSpec(m=m, pieces=tuple(pieces),
                         period=doc.get("period"), name=doc.get("name", ""))


def load_potential(path):
    with open(path) as fh:
        doc = json.load(fh)
    try:
        return potential_from_dict(doc)
    except NonHermitianPiece:
        raise
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed potential file {path}: {exc}") from exc


def save_potential(spec, path):
    with open(path, "w") as fh:
        json.dump(potential_to_dict(spec), fh, indent=1)
        fh.write("\n")
