"""Cylindrical and spherical Bessel/Hankel functions on the two axes we need.

Arguments are restricted to the positive real axis (``x``) and the positive
imaginary axis (``i x``); wavenumbers in this package are only ever ``k`` or
``i k``.  Evaluation is delegated to the AMOS routines in :mod:`scipy.special`;
this module adds the axis conventions, derivative bookkeeping, domain checks
and the Hankel asymptotic coefficients.

Every function accepts scalar or array ``x`` and an integer order ``n`` (which
may also be an integer array broadcastable against ``x``).
"""

from math import factorial
from typing import NamedTuple

import numpy as np
from scipy import special as sp

from .errors import DomainError

N_MAX = 128


class FunPair(NamedTuple):
    value: np.ndarray
    derivative: np.ndarray


def _check(n, x, allow_negative_order=True):
    n = np.asarray(n)
    x = np.asarray(x, dtype=float)
    if not np.issubdtype(n.dtype, np.integer):
        if not np.all(np.equal(np.mod(n, 1), 0)):
            raise DomainError("order must be an integer")
        n = n.astype(int)
    if np.any(np.abs(n) > N_MAX):
        raise DomainError(f"order exceeds N_MAX={N_MAX}")
    if not allow_negative_order and np.any(n < 0):
        raise DomainError("order must be non-negative")
    if np.any(~np.isfinite(x)) or np.any(x <= 0):
        raise DomainError("argument must be finite and > 0")
    return n, x


def cylinder_jy(n, x):
    """Return ``(J_n, Y_n, J_n', Y_n')`` at real ``x > 0``."""
    n, x = _check(n, x)
    j = sp.jv(n, x)
    y = sp.yv(n, x)
    jp = sp.jvp(n, x)
    yp = sp.yvp(n, x)
    return j, y, jp, yp


def cylinder_h1(n, x):
    """First-kind Hankel function ``H_n^(1)(x)`` and its derivative."""
    j, y, jp, yp = cylinder_jy(n, x)
    return FunPair(j + 1j * y, jp + 1j * yp)


def cylinder_h1_imag(n, x):
    """``H_n^(1)(i x)`` and ``dH_n^(1)/dz`` at ``z = i x``.

    Uses ``H_n^(1)(i x) = (2/pi) (-i)^(n+1) K_n(x)``; the derivative follows
    from ``d/dx H(i x) = i H'(i x)``.
    """
    n, x = _check(n, x)
    phase = (-1j) ** np.mod(n + 1, 4)
    value = (2.0 / np.pi) * phase * sp.kv(n, x)
    deriv = -1j * (2.0 / np.pi) * phase * sp.kvp(n, x)
    return FunPair(value, deriv)


def modified_ik(n, x):
    """Return ``(I_n, K_n, I_n', K_n')`` at real ``x > 0``."""
    n, x = _check(n, x)
    return sp.iv(n, x), sp.kv(n, x), sp.ivp(n, x), sp.kvp(n, x)


def spherical_jn(n, x):
    n, x = _check(n, x, allow_negative_order=False)
    return FunPair(sp.spherical_jn(n, x), sp.spherical_jn(n, x, derivative=True))


def spherical_h1(n, x):
    """Spherical Hankel function ``h_n^(1)(x)`` and its derivative."""
    n, x = _check(n, x, allow_negative_order=False)
    value = sp.spherical_jn(n, x) + 1j * sp.spherical_yn(n, x)
    deriv = sp.spherical_jn(n, x, derivative=True) + 1j * sp.spherical_yn(n, x, derivative=True)
    return FunPair(value, deriv)


def spherical_h1_imag(n, x):
    """``h_n^(1)(i x)`` and ``dh_n^(1)/dz`` at ``z = i x``.

    With scipy's modified spherical function ``k_n(x) = sqrt(pi/(2x)) K_{n+1/2}(x)``
    one has ``h_n^(1)(i x) = -(2/pi) (-i)^n k_n(x)``.
    """
    n, x = _check(n, x, allow_negative_order=False)
    phase = (-1j) ** np.mod(n, 4)
    value = -(2.0 / np.pi) * phase * sp.spherical_kn(n, x)
    deriv = 1j * (2.0 / np.pi) * phase * sp.spherical_kn(n, x, derivative=True)
    return FunPair(value, deriv)


def hankel_asymptotic_coeffs(nu, J):
    """Coefficients ``a_{nu,0..J}`` of the large-argument Hankel expansion.

    ``H_nu^(1)(z) ~ sqrt(2/(pi z)) exp(i(z - nu pi/2 - pi/4)) sum_j a_{nu,j} z^-j``
    with ``a_{nu,j} = i^j prod_{l=1..j} (4 nu^2 - (2l-1)^2) / (j! 8^j)``.

    ``nu`` may be half-integer: for ``nu = n + 1/2`` the same numbers give the
    (terminating) expansion of the spherical Hankel function,
    ``h_n^(1)(z) = exp(i(z - n pi/2 - pi/2)) / z * sum_j a_{n+1/2,j} z^-j``.
    """
    if not 0 <= J <= 8:
        raise DomainError("truncation J must lie in [0, 8]")
    if abs(nu) > N_MAX + 1:
        raise DomainError(f"order exceeds N_MAX={N_MAX}")
    mu = 4.0 * nu * nu
    out = np.empty(J + 1, dtype=complex)
    prod = 1.0
    out[0] = 1.0
    for j in range(1, J + 1):
        prod *= mu - (2 * j - 1) ** 2
        out[j] = (1j ** j) * prod / (factorial(j) * 8.0 ** j)
    return out
