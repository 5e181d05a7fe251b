"""Exact modal solver for plane-wave biharmonic scattering by a disk or sphere.

The scattered field splits into a Helmholtz part ``u_H`` (outgoing Hankel
modes of ``k r``) and a modified-Helmholtz part ``u_M`` (Hankel modes of
``i k r``, exponentially decaying).  On the circle/sphere ``r = a`` both parts
and the incident plane wave are expanded mode by mode; each boundary condition
then reduces to one 2x2 linear system per mode.

2D modes use the convention ``u_H = sum_n alpha_{H,n} H_n(k r) e^{i n phi}``
with ``phi`` measured from the incident direction.  3D scenes are axisymmetric
about ``d`` and expand in Legendre polynomials ``P_n(xhat . d)``.
"""

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import eval_legendre

from . import specfun
from .errors import DomainError, NoConvergence, SingularMode

SINGULAR_TOL = 1e-13
TAIL_TOL = 1e-14


class BoundaryCondition(str, Enum):
    DIRICHLET_PAIR = "dirichlet_pair"  # (u, d_nu u)
    NAVIER_PAIR = "navier_pair"  # (u, lap u)
    NEUMANN_PAIR = "neumann_pair"  # (lap u, d_nu lap u)
    MIXED_A = "mixed_a"  # (u, d_nu lap u)
    MIXED_B = "mixed_b"  # (d_nu u, lap u)
    MIXED_C = "mixed_c"  # (d_nu u, d_nu lap u)

    def traces(self, value, dnormal, lap_factor):
        """Map (value, normal derivative) of an eigenfunction of the Laplacian
        with eigenvalue ``lap_factor`` to the two imposed boundary traces."""
        lap, dlap = lap_factor * value, lap_factor * dnormal
        return {
            BoundaryCondition.DIRICHLET_PAIR: (value, dnormal),
            BoundaryCondition.NAVIER_PAIR: (value, lap),
            BoundaryCondition.NEUMANN_PAIR: (lap, dlap),
            BoundaryCondition.MIXED_A: (value, dlap),
            BoundaryCondition.MIXED_B: (dnormal, lap),
            BoundaryCondition.MIXED_C: (dnormal, dlap),
        }[self]


@dataclass(frozen=True)
class Scene:
    m: int
    k: float
    a: float
    bc: BoundaryCondition
    d: tuple

    def __post_init__(self):
        if self.m not in (2, 3):
            raise DomainError("dimension must be 2 or 3")
        if not (self.k > 0 and self.a > 0):
            raise DomainError("k and a must be positive")
        if self.k * self.a > 40:
            raise DomainError("k*a > 40 is outside the series regime")
        d = tuple(float(c) for c in self.d)
        if len(d) != self.m:
            raise DomainError("incident direction has wrong dimension")
        if abs(math.sqrt(sum(c * c for c in d)) - 1.0) > 1e-14:
            raise DomainError("incident direction must be a unit vector")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "bc", BoundaryCondition(self.bc))

    @property
    def dvec(self):
        return np.asarray(self.d)

    @classmethod
    def from_dict(cls, data):
        d = np.asarray(data["d"], dtype=float)
        # accept directions normalized to a few ulps in JSON
        d = d / np.linalg.norm(d)
        return cls(m=int(data["m"]), k=float(data["k"]), a=float(data["a"]), bc=data["bc"], d=tuple(d))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def to_dict(self):
        return {"m": self.m, "k": self.k, "a": self.a, "bc": self.bc.value, "d": list(self.d)}

    def to_json(self):
        return json.dumps(self.to_dict())


@dataclass(frozen=True)
class ModalSolution:
    scene: Scene
    N: int
    orders: np.ndarray
    alpha_H: np.ndarray
    alpha_M: np.ndarray
    # per non-negative order, for fast evaluation
    _aH: np.ndarray = field(repr=False, compare=False)
    _aM: np.ndarray = field(repr=False, compare=False)

    def coeff(self, n):
        """Return ``(alpha_{H,n}, alpha_{M,n})``."""
        idx = np.searchsorted(self.orders, n)
        if idx >= len(self.orders) or self.orders[idx] != n:
            raise DomainError(f"mode {n} not in solution")
        return self.alpha_H[idx], self.alpha_M[idx]


@dataclass(frozen=True)
class FieldValue:
    x: np.ndarray
    uH: np.ndarray
    uM: np.ndarray
    uInc: np.ndarray
    uTotal: np.ndarray


def _mode_columns(n, scene):
    """Boundary (value, radial derivative) of the n-th outgoing H/M modes and
    of the incident mode, all at r = a."""
    k, a = scene.k, scene.a
    if scene.m == 2:
        hH = specfun.cylinder_h1(n, k * a)
        hM = specfun.cylinder_h1_imag(n, k * a)
        j, _, jp, _ = specfun.cylinder_jy(n, k * a)
        c = 1j ** (n % 4)
    else:
        hH = specfun.spherical_h1(n, k * a)
        hM = specfun.spherical_h1_imag(n, k * a)
        jj = specfun.spherical_jn(n, k * a)
        j, jp = jj.value, jj.derivative
        c = (1j ** (n % 4)) * (2 * n + 1)
    colH = (complex(hH.value), complex(k * hH.derivative))
    colM = (complex(hM.value), complex(1j * k * hM.derivative))
    inc = (complex(c * j), complex(c * k * jp))
    return colH, colM, inc


def assemble_mode_system(n, scene):
    """Return ``(M_n, r_n)`` with ``M_n @ (alpha_H, alpha_M) = r_n``."""
    if scene.m == 3 and n < 0:
        raise DomainError("3D modes are indexed by n >= 0")
    if abs(n) > specfun.N_MAX:
        raise DomainError("mode order exceeds N_MAX")
    k2 = scene.k ** 2
    colH, colM, inc = _mode_columns(n, scene)
    tH = scene.bc.traces(colH[0], colH[1], -k2)
    tM = scene.bc.traces(colM[0], colM[1], +k2)
    tI = scene.bc.traces(inc[0], inc[1], -k2)
    M = np.array([[tH[0], tM[0]], [tH[1], tM[1]]], dtype=complex)
    r = -np.array(tI, dtype=complex)
    return M, r


def _is_singular(M):
    # equilibrate rows then columns so the test is scale-free
    S = M / np.linalg.norm(M, axis=1, keepdims=True)
    S = S / np.linalg.norm(S, axis=0, keepdims=True)
    return abs(np.linalg.det(S)) < SINGULAR_TOL


def solve_modes(scene):
    """Solve every modal system and pick the truncation ``N`` automatically.

    ``N`` is the smallest order ``>= ceil(k a) + 10`` at which both the
    coefficient tail ``|alpha_H,N| + |alpha_M,N|`` and the boundary traces of
    the incident mode fall below ``1e-14`` relative to their maxima.
    """
    N0 = int(math.ceil(scene.k * scene.a)) + 10
    aH, aM, tails = [], [], []
    for n in range(0, specfun.N_MAX + 1):
        M, r = assemble_mode_system(n, scene)
        if not np.all(np.isfinite(M)) or not np.all(np.isfinite(r)):
            break
        if _is_singular(M):
            raise SingularMode(n, f"scene={scene.to_json()}")
        x = np.linalg.solve(M, r)
        aH.append(x[0])
        aM.append(x[1])
        tails.append(np.max(np.abs(r)))
        if n >= N0:
            coef = np.abs(aH) + np.abs(aM)
            tr = np.asarray(tails)
            if coef[-1] < TAIL_TOL * coef.max() and tr[-1] < TAIL_TOL * tr.max():
                return _build_solution(scene, n, np.asarray(aH), np.asarray(aM))
    raise NoConvergence(f"modal tail bound not met by N={specfun.N_MAX} for {scene.to_json()}")


def _build_solution(scene, N, aH, aM):
    if scene.m == 2:
        pos = np.arange(0, N + 1)
        orders = np.arange(-N, N + 1)
        sign = (-1.0) ** pos
        full_H = np.concatenate([(sign * aH)[:0:-1], aH])
        full_M = np.concatenate([(sign * aM)[:0:-1], aM])
    else:
        orders = np.arange(0, N + 1)
        full_H, full_M = aH, aM
    return ModalSolution(scene, N, orders, full_H, full_M, aH, aM)


def _as_points(x, m):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[-1] != m:
        raise DomainError(f"points must have {m} coordinates")
    return x, single


def _angular(sol, xhat):
    """Angular factors for n = 0..N: eps_n cos(n phi) in 2D, P_n(cos) in 3D."""
    scene = sol.scene
    n = np.arange(sol.N + 1)[:, None]
    d = scene.dvec
    cos_t = np.clip(xhat @ d, -1.0, 1.0)
    if scene.m == 2:
        sin_t = d[0] * xhat[:, 1] - d[1] * xhat[:, 0]
        phi = np.arctan2(sin_t, cos_t)
        eps = np.where(n == 0, 1.0, 2.0)
        return eps * np.cos(n * phi[None, :])
    return eval_legendre(n, cos_t[None, :])


def _radial(sol, r, branch):
    """Radial functions and their r-derivatives for n = 0..N, shape (N+1, P)."""
    scene = sol.scene
    k = scene.k
    n = np.arange(sol.N + 1)[:, None]
    kr = k * r[None, :]
    if branch == "H":
        fp = specfun.cylinder_h1(n, kr) if scene.m == 2 else specfun.spherical_h1(n, kr)
        return fp.value, k * fp.derivative
    fp = specfun.cylinder_h1_imag(n, kr) if scene.m == 2 else specfun.spherical_h1_imag(n, kr)
    with np.errstate(invalid="ignore"):
        val = np.where(np.isfinite(fp.value), fp.value, 0.0)
        der = np.where(np.isfinite(fp.derivative), 1j * k * fp.derivative, 0.0)
    return val, der


def _series(sol, x, with_derivative=False):
    r = np.linalg.norm(x, axis=1)
    xhat = x / r[:, None]
    ang = _angular(sol, xhat)
    RH, dRH = _radial(sol, r, "H")
    RM, dRM = _radial(sol, r, "M")
    aH = sol._aH[:, None]
    aM = sol._aM[:, None]
    uH = np.sum(aH * RH * ang, axis=0)
    uM = np.sum(aM * RM * ang, axis=0)
    if not with_derivative:
        return uH, uM
    return uH, uM, np.sum(aH * dRH * ang, axis=0), np.sum(aM * dRM * ang, axis=0)


def eval_field(sol, x):
    """Evaluate ``u_H``, ``u_M``, incident and total field at exterior points."""
    pts, single = _as_points(x, sol.scene.m)
    r = np.linalg.norm(pts, axis=1)
    if np.any(r <= sol.scene.a):
        raise DomainError("evaluation point not exterior to the obstacle")
    uH, uM = _series(sol, pts)
    uI = np.exp(1j * sol.scene.k * (pts @ sol.scene.dvec))
    fv = FieldValue(pts, uH, uM, uI, uI + uH + uM)
    if single:
        return FieldValue(pts[0], uH[0], uM[0], uI[0], fv.uTotal[0])
    return fv


def boundary_traces(sol, x):
    """Total-field traces ``(u, d_nu u, lap u, d_nu lap u)`` at points with
    ``|x| = a``.  The incident field enters in closed form."""
    pts, _ = _as_points(x, sol.scene.m)
    k, d = sol.scene.k, sol.scene.dvec
    r = np.linalg.norm(pts, axis=1)
    if np.any(np.abs(r - sol.scene.a) > 1e-12 * sol.scene.a):
        raise DomainError("points must lie on the obstacle boundary")
    nu = pts / r[:, None]
    uH, uM, dH, dM = _series(sol, pts, with_derivative=True)
    uI = np.exp(1j * k * (pts @ d))
    dI = 1j * k * (nu @ d) * uI
    k2 = k * k
    u = uI + uH + uM
    du = dI + dH + dM
    lap = -k2 * (uI + uH) + k2 * uM
    dlap = -k2 * (dI + dH) + k2 * dM
    return u, du, lap, dlap


def boundary_points(scene, count=64):
    """Equispaced points on the circle, or a Fibonacci lattice on the sphere."""
    if scene.m == 2:
        th = 2 * np.pi * np.arange(count) / count
        return scene.a * np.column_stack([np.cos(th), np.sin(th)])
    i = np.arange(count) + 0.5
    z = 1 - 2 * i / count
    phi = np.pi * (1 + 5 ** 0.5) * i
    s = np.sqrt(1 - z * z)
    return scene.a * np.column_stack([s * np.cos(phi), s * np.sin(phi), z])


def boundary_pair(sol, x):
    """The two traces imposed by the scene's condition at boundary points ``x``."""
    u, du, lap, dlap = boundary_traces(sol, x)
    return {
        BoundaryCondition.DIRICHLET_PAIR: (u, du),
        BoundaryCondition.NAVIER_PAIR: (u, lap),
        BoundaryCondition.NEUMANN_PAIR: (lap, dlap),
        BoundaryCondition.MIXED_A: (u, dlap),
        BoundaryCondition.MIXED_B: (du, lap),
        BoundaryCondition.MIXED_C: (du, dlap),
    }[sol.scene.bc]


def boundary_residual(sol, count=64):
    """Max over boundary samples of ``|trace_1| + |trace_2|`` for the scene's condition."""
    t1, t2 = boundary_pair(sol, boundary_points(sol.scene, count))
    return float(np.max(np.abs(t1) + np.abs(t2)))


def far_field(sol, xhat):
    """Return ``(u_H^inf, u_M^inf)`` at the unit direction(s) ``xhat``."""
    scene = sol.scene
    xh, single = _as_points(xhat, scene.m)
    xh = xh / np.linalg.norm(xh, axis=1, keepdims=True)
    ang = _angular(sol, xh)
    n = np.arange(sol.N + 1)[:, None]
    k = scene.k
    if scene.m == 2:
        cH = np.sqrt(2 / (k * np.pi)) * np.exp(-1j * (n * np.pi / 2 + np.pi / 4))
        cM = np.sqrt(2 / (k * np.pi)) * np.exp(-1j * (n * np.pi / 2 + np.pi / 2))
    else:
        cH = (-1j) ** ((n + 1) % 4) / k
        cM = (-1j) ** ((n + 1) % 4) / (1j * k)
    fH = np.sum(sol._aH[:, None] * cH * ang, axis=0)
    fM = np.sum(sol._aM[:, None] * cM * ang, axis=0)
    if single:
        return fH[0], fM[0]
    return fH, fM


def atkinson_ground_truth(sol, xhat, J):
    """Atkinson coefficients ``f_1..f_J`` and ``g_1..g_J`` at direction ``xhat``.

    Built by resumming the mode-wise large-argument Hankel expansions, so
    ``f_1``/``g_1`` coincide with :func:`far_field`.
    """
    if not 1 <= J <= 6:
        raise DomainError("Atkinson order J must lie in [1, 6]")
    scene = sol.scene
    xh, _ = _as_points(xhat, scene.m)
    xh = xh / np.linalg.norm(xh, axis=1, keepdims=True)
    ang = _angular(sol, xh)[:, 0]
    k = scene.k
    f = np.zeros(J, dtype=complex)
    g = np.zeros(J, dtype=complex)
    for n in range(sol.N + 1):
        if scene.m == 2:
            a = specfun.hankel_asymptotic_coeffs(n, J - 1)
            lead_H = np.sqrt(2 / (k * np.pi)) * np.exp(-1j * (n * np.pi / 2 + np.pi / 4))
            lead_M = np.sqrt(2 / (k * np.pi)) * np.exp(-1j * (n * np.pi / 2 + np.pi / 2))
        else:
            a = specfun.hankel_asymptotic_coeffs(n + 0.5, J - 1)
            lead_H = (-1j) ** ((n + 1) % 4) / k
            lead_M = (-1j) ** ((n + 1) % 4) / (1j * k)
        j = np.arange(J)
        f += sol._aH[n] * lead_H * ang[n] * a * k ** (-j)
        g += sol._aM[n] * lead_M * ang[n] * a * (1j * k) ** (-j.astype(float))
    return f, g


def sample_phaseless(sol, points, noise=0.0, seed=None):
    """Phaseless data ``|u| (1 + noise * xi)``, ``xi ~ U[-1, 1]``."""
    if noise < 0:
        raise DomainError("noise level must be >= 0")
    fv = eval_field(sol, points)
    mod = np.abs(np.atleast_1d(fv.uTotal))
    if noise > 0:
        rng = np.random.default_rng(seed)
        mod = mod * (1.0 + noise * rng.uniform(-1.0, 1.0, size=mod.shape))
    return mod if np.ndim(points) > 1 else mod[0]
