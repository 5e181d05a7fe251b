"""Far-field to near-field propagation with combined layer potentials.

A radiating field outside an auxiliary circle/sphere ``|y| = R0`` is written as
``u = (K - i eta S) phi`` with the double- and single-layer potentials of the
Helmholtz (``kappa = k``) or modified Helmholtz (``kappa = i k``) operator.  The
density is recovered from far-field samples by Tikhonov regularization and
the potential is then evaluated anywhere outside the circle.

In 3D only axisymmetric fields (symmetric about the incident direction ``d``)
are treated.  The sphere is split into rings at Gauss-Legendre nodes in
``cos(polar angle)``; a density is constant on each ring and the azimuthal
integral is folded into the kernels with a trapezoid rule.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import DomainError, IllConditioned
from .specfun import cylinder_h1, cylinder_h1_imag

ALPHA_GRID = tuple(10.0 ** -e for e in range(2, 13))
FALLBACK_ALPHA = 1e-8
N_AZIMUTH = 64


def _frame(d):
    """Orthonormal ``(e1, e2, d)`` with ``d`` the symmetry axis."""
    d = np.asarray(d, dtype=float)
    d = d / np.linalg.norm(d)
    helper = np.array([1.0, 0.0, 0.0]) if abs(d[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = helper - np.dot(helper, d) * d
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(d, e1), d


@dataclass(frozen=True, eq=False)
class BoundaryGrid:
    """Quadrature on the auxiliary circle (2D) or sphere (3D) of radius ``R0``.

    ``points``/``normals`` hold one node per unknown; in 3D this is the ring
    point at azimuth zero.  ``weights`` sum to the boundary measure.
    """

    m: int
    R0: float
    points: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    axis: np.ndarray = None
    n_azimuth: int = 0

    @classmethod
    def circle(cls, R0, count=64):
        if R0 <= 0 or count < 4:
            raise DomainError("need R0 > 0 and at least 4 nodes")
        th = 2 * np.pi * np.arange(count) / count
        nrm = np.column_stack([np.cos(th), np.sin(th)])
        w = np.full(count, 2 * np.pi * R0 / count)
        return cls(2, float(R0), R0 * nrm, nrm, w)

    @classmethod
    def sphere(cls, R0, rings=32, d=(0.0, 0.0, 1.0), n_azimuth=N_AZIMUTH):
        if R0 <= 0 or rings < 2 or n_azimuth < 4:
            raise DomainError("need R0 > 0, at least 2 rings and 4 azimuthal points")
        e1, _, ax = _frame(d)
        c, wgl = leggauss(rings)
        s = np.sqrt(1 - c * c)
        nrm = s[:, None] * e1[None, :] + c[:, None] * ax[None, :]
        return cls(3, float(R0), R0 * nrm, nrm, 2 * np.pi * R0 ** 2 * wgl, ax, int(n_azimuth))

    @property
    def size(self):
        return len(self.weights)

    @property
    def n_modes(self):
        """Number of resolved angular modes, used for aperture sizing."""
        return self.size // 2

    @property
    def measure(self):
        return 2 * np.pi * self.R0 if self.m == 2 else 4 * np.pi * self.R0 ** 2

    def nodes_full(self):
        """All quadrature points ``(Q, A, m)``, normals and per-point weights.

        In 2D ``A = 1``.  In 3D every ring is expanded over ``n_azimuth``
        equispaced azimuths.
        """
        if self.m == 2:
            return self.points[:, None, :], self.normals[:, None, :], self.weights[:, None]
        e1, e2, ax = _frame(self.axis)
        c = self.normals @ ax
        s = np.sqrt(np.clip(1 - c * c, 0, None))
        ph = 2 * np.pi * np.arange(self.n_azimuth) / self.n_azimuth
        nrm = (s[:, None, None] * (np.cos(ph)[None, :, None] * e1 + np.sin(ph)[None, :, None] * e2)
               + c[:, None, None] * ax[None, None, :])
        w = np.repeat(self.weights[:, None] / self.n_azimuth, self.n_azimuth, axis=1)
        return self.R0 * nrm, nrm, w


@dataclass(frozen=True, eq=False)
class BoundaryDensity:
    """Density values on a grid for wavenumber ``kappa = k`` or ``i k``."""

    grid: BoundaryGrid
    values: np.ndarray
    k: float
    branch: str
    eta: float = 1.0

    def __post_init__(self):
        if self.branch not in ("k", "ik"):
            raise DomainError("branch must be 'k' or 'ik'")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("density values must be finite")
        if len(self.values) != self.grid.size:
            raise DomainError("density size does not match the grid")


@dataclass(frozen=True, eq=False)
class ApertureSet:
    """Observation directions with an optional exclusion around ``d``.

    ``exclusion`` is ``("none", 0)``, ``("cap", delta)`` for ``|x - d| > delta``
    or ``("band", delta)`` for ``|x.d| > delta``.
    """

    directions: np.ndarray
    d: np.ndarray
    exclusion: tuple = ("none", 0.0)

    def __post_init__(self):
        nrm = np.linalg.norm(self.directions, axis=1)
        if np.any(np.abs(nrm - 1) > 1e-12):
            raise DomainError("aperture directions must be unit vectors")

    @classmethod
    def build(cls, m, d, kind="none", delta=0.0, count=None):
        """Full grid (128 equispaced in 2D, 64 Gauss polar angles in 3D) minus the exclusion."""
        d = np.asarray(d, dtype=float)
        d = d / np.linalg.norm(d)
        if m == 2:
            count = 128 if count is None else count
            th = np.arctan2(d[1], d[0]) + 2 * np.pi * np.arange(count) / count
            dirs = np.column_stack([np.cos(th), np.sin(th)])
        elif m == 3:
            count = 64 if count is None else count
            e1, _, ax = _frame(d)
            c, _ = leggauss(count)
            dirs = np.sqrt(1 - c * c)[:, None] * e1[None, :] + c[:, None] * ax[None, :]
        else:
            raise DomainError("dimension must be 2 or 3")
        if kind == "none":
            keep = np.ones(len(dirs), dtype=bool)
        elif kind == "cap":
            keep = np.linalg.norm(dirs - d, axis=1) > delta
        elif kind == "band":
            keep = np.abs(dirs @ d) > delta
        else:
            raise DomainError(f"unknown exclusion {kind!r}")
        return cls(dirs[keep], d, (kind, float(delta)))

    def __len__(self):
        return len(self.directions)


def gamma(m, k, branch):
    if m == 3:
        return 1.0 / (4 * np.pi)
    if branch == "k":
        return np.exp(1j * np.pi / 4) / np.sqrt(8 * k * np.pi)
    return 1.0 / np.sqrt(8 * k * np.pi)


def _kappa(k, branch):
    if branch not in ("k", "ik"):
        raise DomainError("branch must be 'k' or 'ik'")
    if not k > 0:
        raise DomainError("wavenumber must be positive")
    return k if branch == "k" else 1j * k


def farfield_matrix(k, branch, grid, eta, aperture):
    """Far-field operator ``gamma [d/dnu e^{-i kappa x.y} - i eta e^{-i kappa x.y}] w``."""
    if eta == 0:
        raise DomainError("coupling eta must be nonzero")
    if len(aperture) < 2 * grid.n_modes:
        raise DomainError("aperture has fewer than 2 directions per resolved mode")
    kap = _kappa(k, branch)
    y, nu, w = grid.nodes_full()
    xh = aperture.directions
    phase = np.exp(-1j * kap * np.einsum("pi,qai->pqa", xh, y))
    dnu = -1j * kap * np.einsum("pi,qai->pqa", xh, nu)
    return gamma(grid.m, k, branch) * np.sum((dnu - 1j * eta) * phase * w[None], axis=2)


def _svd(A):
    try:
        return np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise IllConditioned(str(exc)) from exc


def _filtered(svd, b, alpha):
    U, s, Vh = svd
    coef = (s / (s * s + alpha)) * (U.conj().T @ b)
    phi = Vh.conj().T @ coef
    if not np.all(np.isfinite(phi)):
        raise IllConditioned(f"non-finite Tikhonov solution at alpha={alpha:g}")
    return phi


def tikhonov_solve(A, b, alpha):
    """Solve ``(alpha I + A* A) phi = A* b``.

    The Hermitian system is solved through the SVD of ``A`` (filter factors
    ``s/(s^2 + alpha)``), which is the same solution without squaring the
    condition number.
    """
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    return _filtered(_svd(np.asarray(A)), np.asarray(b, dtype=complex), alpha)


class AlphaChoice(NamedTuple):
    alpha: float
    fallback: bool


def choose_alpha(A, b, eps, grid=ALPHA_GRID):
    """Discrepancy rule on a geometric grid.

    Returns the largest ``alpha`` whose residual is within
    ``max(1.1 eps |b|, 1e-12)``; for ``eps = 0`` the smallest grid value.
    If no grid value qualifies, ``alpha = 1e-8`` with ``fallback=True``.
    """
    if eps < 0:
        raise DomainError("noise level must be non-negative")
    grid = sorted(grid, reverse=True)
    if eps == 0:
        return AlphaChoice(grid[-1], False)
    A = np.asarray(A)
    b = np.asarray(b, dtype=complex)
    svd = _svd(A)
    bound = max(1.1 * eps * np.linalg.norm(b), 1e-12)
    for alpha in grid:
        if np.linalg.norm(A @ _filtered(svd, b, alpha) - b) <= bound:
            return AlphaChoice(alpha, False)
    return AlphaChoice(FALLBACK_ALPHA, True)


def _kernels(m, kap, x, y, nu):
    """Combined-layer pieces ``(dPhi/dnu_y, Phi)`` for targets ``x`` (P, m) and sources (..., m)."""
    diff = x[:, None, None, :] - y[None]
    r = np.linalg.norm(diff, axis=-1)
    cos_term = -np.einsum("pqai,qai->pqa", diff, nu) / r
    if m == 2:
        if np.isreal(kap):
            kk = float(np.real(kap))
            h = cylinder_h1(0, kk * r)
            scale = kk
        else:
            kk = float(np.imag(kap))
            h = cylinder_h1_imag(0, kk * r)
            scale = 1j * kk
        phi = 0.25j * h.value
        dphi = 0.25j * scale * h.derivative
    else:
        e = np.exp(1j * kap * r)
        phi = e / (4 * np.pi * r)
        dphi = e * (1j * kap * r - 1) / (4 * np.pi * r * r)
    return dphi * cos_term, phi


def eval_potential(density, x, chunk=256):
    """Combined layer potential ``(K - i eta S) phi`` at points with ``|x| > R0``."""
    grid = density.grid
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != grid.m:
        raise DomainError("point dimension does not match the grid")
    if np.any(np.linalg.norm(x, axis=1) <= grid.R0):
        raise DomainError("evaluation points must lie outside the auxiliary boundary")
    kap = _kappa(density.k, density.branch)
    y, nu, w = grid.nodes_full()
    out = np.empty(len(x), dtype=complex)
    for i in range(0, len(x), chunk):
        dk, sk = _kernels(grid.m, kap, x[i:i + chunk], y, nu)
        ker = np.sum((dk - 1j * density.eta * sk) * w[None], axis=2)
        out[i:i + chunk] = ker @ density.values
    return out[0] if single else out


@dataclass(frozen=True, eq=False)
class ReconstructedField:
    """Immutable accessor ``x -> u(x)`` for ``|x| > R0``."""

    density: BoundaryDensity
    alpha: float
    fallback: bool
    residual: float
    aperture: ApertureSet = field(repr=False, default=None)

    def __call__(self, x):
        return eval_potential(self.density, x)


def reconstruct_field(branch, k, samples, aperture, grid, eta=1.0, eps=0.0, alpha_grid=ALPHA_GRID):
    """Far-field samples on ``aperture`` -> accessor for ``u_H`` (``"H"``) or ``u_M`` (``"M"``).

    The exclusion must match the branch: none or a cap around ``d`` for ``H``,
    none or a band around ``x.d = 0`` for ``M``.
    """
    kind = aperture.exclusion[0]
    if branch == "H":
        if kind not in ("none", "cap"):
            raise DomainError("the Helmholtz branch takes a cap exclusion")
        kb = "k"
    elif branch == "M":
        if kind not in ("none", "band"):
            raise DomainError("the modified branch takes a band exclusion")
        kb = "ik"
    else:
        raise DomainError("branch must be 'H' or 'M'")
    b = np.asarray(samples, dtype=complex)
    if b.shape != (len(aperture),):
        raise DomainError("one far-field sample per aperture direction is required")
    A = farfield_matrix(k, kb, grid, eta, aperture)
    choice = choose_alpha(A, b, eps, alpha_grid)
    phi = tikhonov_solve(A, b, choice.alpha)
    res = float(np.linalg.norm(A @ phi - b) / max(np.linalg.norm(b), 1e-300))
    return ReconstructedField(BoundaryDensity(grid, phi, k, kb, eta), choice.alpha, choice.fallback, res, aperture)
