"""Shared fixtures and independent oracles.

The oracles here deliberately avoid the library's propagation code paths:
free-system values are closed-form trigonometry, constant-coefficient
transfers come from a hand-rolled eigendecomposition, and the constant
off-diagonal M-functions come from the exponential ansatz.
"""

import numpy as np
import pytest

from diracweyl import (
    ConstantPiece,
    GridPiece,
    PotentialSpec,
    normal_form_matrix,
    validate_boundary_data,
)


# ---------------------------------------------------------------------------
# closed-form oracles
# ---------------------------------------------------------------------------

def free_psi(z, x, x0, alpha):
    """Fundamental system for B = 0: cos/sin blocks against alpha*."""
    a1s = alpha.alpha1.conj().T
    a2s = alpha.alpha2.conj().T
    c = np.cos(z * (x - x0))
    s = np.sin(z * (x - x0))
    theta = np.vstack([a1s * c + a2s * s, a2s * c - a1s * s])
    phi = np.vstack([-a2s * c + a1s * s, a1s * c + a2s * s])
    return theta, phi


def const_transfer_eig(z, b, dx):
    """e^{A dx} for A = -J(zI + B) via plain eigendecomposition."""
    b = np.asarray(b, complex)
    d = b.shape[0]
    m = d // 2
    j = np.zeros((d, d), complex)
    j[:m, m:] = -np.eye(m)
    j[m:, :m] = np.eye(m)
    a = -j @ (z * np.eye(d) + b)
    w, v = np.linalg.eig(a)
    return v @ np.diag(np.exp(w * dx)) @ np.linalg.inv(v)


def mplus_const_q(z, q):
    """Half-line M for constant off-diagonal coupling q (decaying branch)."""
    s = np.sqrt(q * q - z * z)
    return -(q + s) / z


def mminus_const_q(z, q):
    s = np.sqrt(q * q - z * z)
    return (s - q) / z


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def random_hermitian(rng, m, scale=1.0):
    a = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    return scale * 0.5 * (a + a.conj().T)


def random_boundary(rng, m):
    """Random valid boundary data (C W, S W) rotated by a random unitary."""
    def unitary(k):
        q, r = np.linalg.qr(rng.normal(size=(k, k))
                            + 1j * rng.normal(size=(k, k)))
        return q * (np.diag(r) / np.abs(np.diag(r)))
    w = unitary(m)
    left = unitary(m)
    phi = rng.uniform(0, np.pi / 2, size=m)
    a1 = left @ (np.diag(np.cos(phi)) @ w)
    a2 = left @ (np.diag(np.sin(phi)) @ w)
    return validate_boundary_data(a1, a2)


def random_normal_form_spec(rng, m, max_pieces=3, amp=0.35):
    """Piecewise-constant potential in the normal form, compact support."""
    pieces = []
    x = 0.0
    for _ in range(int(rng.integers(1, max_pieces + 1))):
        length = rng.uniform(0.3, 1.2)
        b = normal_form_matrix(random_hermitian(rng, m, amp),
                               random_hermitian(rng, m, amp))
        pieces.append(ConstantPiece(x, x + length, b))
        x += length
    return PotentialSpec(m=m, pieces=tuple(pieces), name="random-nf")


def smooth_bump_spec(amp=0.8, n=1601, tail_q=None, name="bump"):
    """Normal-form bump amp*sin(pi x)^2 on [0, 1] sampled densely, with an
    optional constant-coupling tail on [1, 2]."""
    xs = np.linspace(0.0, 1.0, n)
    vals = np.array([normal_form_matrix([[0.0]],
                                        [[amp * np.sin(np.pi * x) ** 2]])
                     for x in xs])
    pieces = [GridPiece(xs, vals)]
    if tail_q is not None:
        pieces.append(ConstantPiece(1.0, 2.0,
                                    normal_form_matrix([[0.0]], [[tail_q]])))
    return PotentialSpec(m=1, pieces=tuple(pieces), name=name)


# ---------------------------------------------------------------------------
# fixtures
# ---------------------------------------------------------------------------

@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def zero1():
    return PotentialSpec.zero(1)


@pytest.fixture
def zero2():
    return PotentialSpec.zero(2)


@pytest.fixture
def const_q1():
    """Constant off-diagonal coupling q = 1 on the whole line."""
    return PotentialSpec.constant(normal_form_matrix([[0.0]], [[1.0]]))


@pytest.fixture
def const_q1_periodic():
    return PotentialSpec.constant(normal_form_matrix([[0.0]], [[1.0]]),
                                  period=1.0)


@pytest.fixture
def const_q1_window():
    """q = 1 truncated to [0, 1]."""
    return PotentialSpec.constant(normal_form_matrix([[0.0]], [[1.0]]),
                                  x_lo=0.0, x_hi=1.0)
