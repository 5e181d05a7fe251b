"""Phase retrieval of far-field Atkinson coefficients from phaseless ray data.

Every formula in this module follows the same two-step pattern:

1. Sample ``|u|`` at a few radii along one ray ``t xhat`` and form a real
   weighted quantity (``t^{(m-1)/2}(|u|^2 - 1)`` for the Helmholtz part,
   ``t^{(m-1)/2} e^{k t}(|u|^2 - |e^{ikx.d} + u_H|^2)`` for the modified part).
   A Vandermonde system in ``1/t`` strips the expansion in inverse powers.
2. Each extracted real coefficient has the form ``f e^{i theta} + conj(f) e^{-i theta}``;
   two such values at phases ``theta_1 != theta_2 (mod pi)`` determine ``f``.

Phaseless data are supplied through a *probe*: any callable mapping an array
of radii to the moduli ``|u(t xhat, d)|``.  The Helmholtz-part accessor used
by the modified-part formulas maps an array of radii to ``u_H(t xhat, d)``.
"""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateNodes, DegenerateTau, DirectionTooClose, DomainError, NoRootInWindow

log = logging.getLogger(__name__)

TAU_SIN_TOL = 1e-6
DIRECTION_TOL = 1e-6
AMPLIFICATION_THRESHOLD = 1e-10


@dataclass(frozen=True)
class RetrievalPlan:
    """Free parameters of the multipoint formulas.

    ``sigma`` defaults to ``1..order``.  ``tau`` and ``delta`` default to the
    conditioning-optimal choices computed from the geometry at run time.
    ``t`` is the base radius (modified part); ``level`` the lattice level
    (Helmholtz part).
    """

    order: int = 1
    m: int = 2
    sigma: tuple = None
    tau: float = None
    t: float = 100.0
    level: int = 1
    delta: float = None

    def __post_init__(self):
        if self.order < 1:
            raise DomainError("plan order must be >= 1")
        if self.m not in (2, 3):
            raise DomainError("dimension must be 2 or 3")
        sigma = tuple(range(1, self.order + 1)) if self.sigma is None else tuple(float(s) for s in self.sigma)
        if len(sigma) != self.order:
            raise DomainError("need one scale factor per order")
        if any(s <= 0 for s in sigma) or len(set(sigma)) != len(sigma):
            raise DomainError("scale factors must be distinct and positive")
        object.__setattr__(self, "sigma", sigma)
        if self.t <= 0 or self.level < 1:
            raise DomainError("t must be positive and level >= 1")
        if self.delta is not None and self.delta <= 0:
            raise DomainError("search half-width must be positive")

    def to_dict(self):
        return {"order": self.order, "m": self.m, "sigma": list(self.sigma), "tau": self.tau,
                "t": self.t, "level": self.level, "delta": self.delta}

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        if data.get("sigma") is not None:
            data["sigma"] = tuple(data["sigma"])
        return cls(**data)


@dataclass
class RaySampleSet:
    xhat: np.ndarray
    d: np.ndarray
    radii: list = field(default_factory=list)
    moduli: list = field(default_factory=list)
    phased: list = None

    def record(self, radii, moduli):
        self.radii.extend(np.atleast_1d(radii).tolist())
        self.moduli.extend(np.atleast_1d(moduli).tolist())


@dataclass
class FarFieldEstimate:
    xhat: np.ndarray
    coeffs: np.ndarray
    residuals: np.ndarray
    plan: RetrievalPlan
    kind: str = "f"
    samples: RaySampleSet = None
    amplified: bool = False
    previous: np.ndarray = None

    @property
    def order(self):
        return len(self.coeffs)


# --- building blocks ---------------------------------------------------------


def vandermonde_solve(nodes, values):
    """Solve ``sum_l c_l / t_j^(l-1) = v_j`` for ``c``.

    Björck–Pereyra elimination in the variable ``z_j = 1/t_j``: Newton divided
    differences followed by conversion from the Newton to the monomial basis.
    ``values`` may carry trailing dimensions (several right-hand sides).
    """
    t = np.asarray(nodes, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise DomainError("nodes must be a non-empty 1-D array")
    if np.any(t <= 0):
        raise DomainError("nodes must be positive")
    n = t.size
    v = np.array(values, dtype=complex if np.iscomplexobj(values) else float)
    if v.shape[0] != n:
        raise DomainError("need one value per node")
    if n > 1:
        gaps = np.abs(t[:, None] - t[None, :])[~np.eye(n, dtype=bool)]
        if gaps.min() <= 1e-9 * t.max():
            raise DegenerateNodes(f"nodes too close: min gap {gaps.min():.3e}")
    z = 1.0 / t
    c = v.copy()
    tail = (slice(None),) + (None,) * (c.ndim - 1)
    for k in range(n - 1):
        c[k + 1:] = (c[k + 1:] - c[k:-1]) / (z[k + 1:] - z[: n - k - 1])[tail]
    for k in range(n - 2, -1, -1):
        for j in range(k, n - 1):
            c[j] = c[j] - z[k] * c[j + 1]
    return c


def phase_pair_solve(theta1, theta2, W1, W2):
    """Solve ``f e^{i theta_l} + conj(f) e^{-i theta_l} = W_l``, l = 1, 2.

    Returns ``(f, residual)``: the first component of the raw 2x2 solve and
    ``|second - conj(first)|``, which vanishes for real data.
    """
    gap = math.sin(theta1 - theta2)
    if abs(gap) <= TAU_SIN_TOL:
        raise DegenerateTau(f"|sin(theta1 - theta2)| = {abs(gap):.3e}")
    e1, e2 = np.exp(1j * theta1), np.exp(1j * theta2)
    det = e1 / e2 - e2 / e1
    a = (W1 / e2 - W2 / e1) / det
    b = (e1 * W2 - e2 * W1) / det
    return a, np.abs(b - np.conj(a))


def _check_helmholtz_direction(xhat, d):
    c = float(np.dot(xhat, d))
    if abs(1.0 - c) <= DIRECTION_TOL:
        raise DirectionTooClose("observation direction coincides with the incident direction")
    return c


def _check_modified_direction(xhat, d):
    c = float(np.dot(xhat, d))
    if abs(c) <= DIRECTION_TOL:
        raise DirectionTooClose("observation direction is orthogonal to the incident direction")
    return c


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def helmholtz_period(xhat, d, k):
    """Radial period ``2 pi / (k (1 - xhat.d))`` of the Helmholtz interference term."""
    c = _check_helmholtz_direction(xhat, d)
    return 2 * np.pi / (k * (1 - c))


def default_tau_helmholtz(xhat, d, k):
    return helmholtz_period(xhat, d, k) / 4


def default_tau_modified(xhat, d, k):
    c = _check_modified_direction(xhat, d)
    return np.pi / (2 * k * abs(c))


def _validate_tau(tau, rate):
    # rate: phase advance per unit radius
    if abs(math.sin(tau * rate)) <= TAU_SIN_TOL:
        raise DegenerateTau(f"tau={tau!r} lies on the excluded lattice pi/{rate:.6g} Z")


def grid_helmholtz(plan, xhat, d, k, level=None):
    """Radii ``t_j = sigma_j L Delta`` and ``t_j + tau`` on the lattice ``Delta = 2 pi/(k(1 - xhat.d))``.

    Returns ``(t, t_tilde, tau)``.  Integer scale factors make every difference
    ``t_j - t_1`` a multiple of ``Delta`` at every level.
    """
    xhat, d = _unit(xhat), _unit(d)
    L = plan.level if level is None else int(level)
    if L < 1:
        raise DomainError("level must be >= 1")
    if any(s != int(s) for s in plan.sigma):
        raise DomainError("lattice radii need integer scale factors")
    delta = helmholtz_period(xhat, d, k)
    tau = default_tau_helmholtz(xhat, d, k) if plan.tau is None else float(plan.tau)
    _validate_tau(tau, k * (1 - np.dot(xhat, d)))
    t = np.asarray(plan.sigma, dtype=float) * L * delta
    return t, t + tau, tau


def _query(probe, radii, samples):
    mod = np.asarray(probe(np.asarray(radii, dtype=float)), dtype=float)
    if samples is not None:
        samples.record(radii, mod)
    return mod


# --- Helmholtz part ------------------------------------------------------------


def retrieve_f_3d(plan, xhat, d, k, probe, level=None):
    """Multipoint retrieval of ``f_1..f_n`` in three dimensions."""
    if plan.m != 3:
        raise DomainError("retrieve_f_3d needs a 3D plan")
    xhat, d = _unit(xhat), _unit(d)
    t, tt, tau = grid_helmholtz(plan, xhat, d, k, level)
    samples = RaySampleSet(xhat, d)
    mod = _query(probe, t, samples)
    modt = _query(probe, tt, samples)
    F = vandermonde_solve(t, t * (mod ** 2 - 1))
    Ft = vandermonde_solve(tt, tt * (modt ** 2 - 1))
    rate = k * (1 - np.dot(xhat, d))
    th1, th2 = t[0] * rate, tt[0] * rate
    n = plan.order
    f = np.zeros(n, dtype=complex)
    res = np.zeros(n)
    for j in range(n):
        corr = sum(f[l] * np.conj(f[j - 1 - l]) for l in range(j))
        f[j], res[j] = phase_pair_solve(th1, th2, F[j] - corr, Ft[j] - corr)
    return FarFieldEstimate(xhat, f, res, replace(plan, tau=tau), "f", samples)


def retrieve_f_2d_twopoint(xhat, d, k, t, tau, probe):
    """Two-point formula for ``u_H^inf`` in two dimensions (error ``O(t^-1/2)``)."""
    xhat, d = _unit(xhat), _unit(d)
    c = _check_helmholtz_direction(xhat, d)
    tau = default_tau_helmholtz(xhat, d, k) if tau is None else float(tau)
    rate = k * (1 - c)
    _validate_tau(tau, rate)
    samples = RaySampleSet(xhat, d)
    r = np.array([t, t + tau], dtype=float)
    mod = _query(probe, r, samples)
    v = np.sqrt(r) * (mod ** 2 - 1)
    f, res = phase_pair_solve(r[0] * rate, r[1] * rate, v[0], v[1])
    plan = RetrievalPlan(order=1, m=2, tau=tau, t=float(t))
    return FarFieldEstimate(xhat, np.array([f]), np.array([res]), plan, "f", samples)


def _hcoeffs(f):
    """``h_j = sum_{l=1..j} f_l conj(f_{j-l+1})`` for j = 1..len(f)."""
    n = len(f)
    return np.array([sum(f[l] * np.conj(f[j - l]) for l in range(j + 1)) for j in range(n)])


def _stage_2d(t, tt, mod, modt, rate, f_prev, n):
    """One stage of the recursive 2D scheme using the first ``n`` radii."""
    tn, ttn = t[:n], tt[:n]
    base = np.sqrt(tn) * (mod[:n] ** 2 - 1)
    baset = np.sqrt(ttn) * (modt[:n] ** 2 - 1)

    def corrected(h):
        p = np.arange(1, len(h) + 1) - 0.5
        return (base - np.sum(h[None, :] / tn[:, None] ** p[None, :], axis=1),
                baset - np.sum(h[None, :] / ttn[:, None] ** p[None, :], axis=1))

    th1, th2 = tn[0] * rate, ttn[0] * rate
    v, vt = corrected(_hcoeffs(f_prev)) if len(f_prev) else (base, baset)
    F, Ft = vandermonde_solve(tn, v), vandermonde_solve(ttn, vt)
    f_tilde = np.array([phase_pair_solve(th1, th2, F[j], Ft[j])[0] for j in range(n)])
    v, vt = corrected(_hcoeffs(f_tilde))
    F, Ft = vandermonde_solve(tn, v), vandermonde_solve(ttn, vt)
    out = [phase_pair_solve(th1, th2, F[j], Ft[j]) for j in range(n)]
    return np.array([o[0] for o in out]), np.array([o[1] for o in out])


def retrieve_f_2d_revised(xhat, d, k, t, tau, probe):
    """Revised two-point formula: subtracts the ``|f_1|^2 / sqrt(t)`` self-term (error ``O(1/t)``)."""
    xhat, d = _unit(xhat), _unit(d)
    c = _check_helmholtz_direction(xhat, d)
    tau = default_tau_helmholtz(xhat, d, k) if tau is None else float(tau)
    rate = k * (1 - c)
    _validate_tau(tau, rate)
    samples = RaySampleSet(xhat, d)
    r = np.array([t], dtype=float)
    mod = _query(probe, np.array([t, t + tau]), samples)
    f, res = _stage_2d(r, r + tau, mod[:1], mod[1:], rate, np.zeros(0, dtype=complex), 1)
    plan = RetrievalPlan(order=1, m=2, tau=tau, t=float(t))
    return FarFieldEstimate(xhat, f, res, plan, "f", samples)


def retrieve_f_2d_recursive(plan, xhat, d, k, probe, level=None):
    """Recursive multipoint formula for ``f_1..f_n`` in two dimensions.

    Stage 1 is the revised two-point formula; stage ``s`` reuses the radii of
    stage ``s - 1`` and adds ``t_s``, ``t_s + tau``, so ``2n`` moduli are used
    in total.  The returned estimate carries the stage ``n - 1`` coefficients
    in ``previous``.
    """
    if plan.m != 2:
        raise DomainError("recursive formula is two-dimensional")
    xhat, d = _unit(xhat), _unit(d)
    t, tt, tau = grid_helmholtz(plan, xhat, d, k, level)
    rate = k * (1 - np.dot(xhat, d))
    samples = RaySampleSet(xhat, d)
    mod = _query(probe, t, samples)
    modt = _query(probe, tt, samples)
    f = np.zeros(0, dtype=complex)
    prev = f
    res = np.zeros(0)
    for s in range(1, plan.order + 1):
        prev = f
        f, res = _stage_2d(t, tt, mod, modt, rate, f, s)
    return FarFieldEstimate(xhat, f, res, replace(plan, tau=tau), "f", samples, previous=prev)


# --- modified part -------------------------------------------------------------


@dataclass(frozen=True)
class VValue:
    value: np.ndarray
    amplified: bool


def v_function_M(x, d, modulus, uH_value, m, k):
    """``|x|^{(m-1)/2} e^{k|x|} (|u|^2 - |e^{ik x.d} + u_H|^2)`` at points ``x``.

    ``amplified`` is set when ``e^{-k|x|} < 1e-10``: round-off in ``|u|`` or
    in ``u_H`` is then magnified beyond double-precision signal.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    r = np.linalg.norm(x, axis=1)
    ref = np.exp(1j * k * (x @ np.asarray(d, dtype=float))) + np.asarray(uH_value)
    val = r ** ((m - 1) / 2) * np.exp(k * r) * (np.asarray(modulus) ** 2 - np.abs(ref) ** 2)
    amplified = bool(np.any(np.exp(-k * r) < AMPLIFICATION_THRESHOLD))
    if amplified:
        log.warning("e^{-k|x|} below %.0e at |x| = %.3g: modified-part signal at round-off level",
                    AMPLIFICATION_THRESHOLD, r.max())
    return VValue(val, amplified)


def _reference_phase(s, xhat, d, k, uH):
    """``e^{ik s xhat.d} + u_H(s xhat)`` along the ray."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    return np.exp(1j * k * s * np.dot(xhat, d)) + np.asarray(uH(s))


def arg_match_radii(xhat, d, k, uH, target, center, half_width=None, window=None):
    """Find ``t`` with ``arg(e^{ik t xhat.d} + u_H(t xhat)) = target (mod 2 pi)``.

    The search runs over ``[center - half_width, center + half_width]`` (or an
    explicit ``window=(lo, hi)``).  The argument is tracked continuously on a
    grid of step ``min(0.1, pi/(4k))``; the bracketed crossing nearest to
    ``center`` (the first one when ``center`` is None) is refined by bisection.
    """
    xhat, d = _unit(xhat), _unit(d)
    c = _check_modified_direction(xhat, d)
    if window is None:
        if half_width is None:
            half_width = 2 * np.pi / (k * abs(c))
        window = (center - half_width, center + half_width)
    lo, hi = float(window[0]), float(window[1])
    if lo <= 0 or hi <= lo:
        raise DomainError("invalid search window")
    step = min(0.1, np.pi / (4 * k))
    s = np.linspace(lo, hi, max(2, int(math.ceil((hi - lo) / step)) + 1))
    z = _reference_phase(s, xhat, d, k, uH)
    phase = np.unwrap(np.angle(z))
    # anchor the branch to the plane-wave phase at the left end
    lin = k * s[0] * c
    phase += 2 * np.pi * np.round((lin - phase[0]) / (2 * np.pi))
    psi = (phase - target) / (2 * np.pi)
    cells = np.floor(psi)
    hit = np.nonzero(cells[1:] != cells[:-1])[0]
    if hit.size == 0:
        raise NoRootInWindow(f"no argument match for target {target:.6g} in [{lo:.6g}, {hi:.6g}]")
    if center is None:
        i = hit[0]
    else:
        i = hit[np.argmin(np.abs(s[hit] - center))]
    level = max(cells[i], cells[i + 1])
    goal = target + 2 * np.pi * level
    a, b = s[i], s[i + 1]
    za = z[i]
    fa = phase[i] - goal

    def g(x):
        return phase[i] + np.angle(_reference_phase(x, xhat, d, k, uH)[0] / za) - goal

    fb = phase[i + 1] - goal
    if fa == 0:
        return a
    for _ in range(200):
        mid = 0.5 * (a + b)
        fm = g(mid)
        if abs(fm) < 1e-12 or b - a < 1e-14 * mid:
            return mid
        if (fm < 0) == (fa < 0):
            a, fa = mid, fm
        else:
            b, fb = mid, fm
    return 0.5 * (a + b)


def retrieve_g_twopoint(m, xhat, d, k, t, tau, probe, uH):
    """Two-point formula for ``u_M^inf`` (error ``O(1/t)`` in 3D, ``O(t^-1/2)`` in 2D)."""
    xhat, d = _unit(xhat), _unit(d)
    c = _check_modified_direction(xhat, d)
    tau = default_tau_modified(xhat, d, k) if tau is None else float(tau)
    _validate_tau(tau, k * c)
    samples = RaySampleSet(xhat, d)
    r = np.array([t, t + tau], dtype=float)
    mod = _query(probe, r, samples)
    vv = v_function_M(r[:, None] * xhat[None, :], d, mod, uH(r), m, k)
    g, res = phase_pair_solve(-k * r[0] * c, -k * r[1] * c, vv.value[0], vv.value[1])
    plan = RetrievalPlan(order=1, m=m, tau=tau, t=float(t))
    return FarFieldEstimate(xhat, np.array([g]), np.array([res]), plan, "g", samples, vv.amplified)


def modified_radii(plan, xhat, d, k, uH, t=None):
    """Argument-matched radii ``t_j`` and ``t~_j`` for the multipoint modified formula.

    Returns ``(radii, radii_tilde, theta, theta_tilde, tau)`` where the
    thetas are the common phases of ``e^{ikx.d} + u_H`` on each group.
    """
    xhat, d = _unit(xhat), _unit(d)
    c = _check_modified_direction(xhat, d)
    t = plan.t if t is None else float(t)
    tau = default_tau_modified(xhat, d, k) if plan.tau is None else float(plan.tau)
    _validate_tau(tau, k * c)
    period = 2 * np.pi / (k * abs(c))
    delta = period / 4 if plan.delta is None else plan.delta
    s1 = plan.sigma[0]
    theta = k * s1 * t * c
    theta_t = k * (s1 * t + tau) * c
    radii, radii_t = [], []
    for j, s in enumerate(plan.sigma):
        if j == 0:
            w = (max(s * t - delta, 0.5 * s * t), s * t + delta)
            wt = (max(s * t + tau - delta, 0.5 * s * t), s * t + tau + delta)
        else:
            # consecutive matches of one phase are a period apart; start past
            # the previous root so nodes stay distinct when the period exceeds t
            w = (max(s * t - period / 2 - delta, radii[-1] + period / 2), s * t + period + delta)
            wt = (max(s * t + tau - period / 2 - delta, radii_t[-1] + period / 2), s * t + tau + period + delta)
        radii.append(arg_match_radii(xhat, d, k, uH, theta, s * t, window=w))
        radii_t.append(arg_match_radii(xhat, d, k, uH, theta_t, s * t + tau, window=wt))
    return np.array(radii), np.array(radii_t), theta, theta_t, tau


def w_function_M(radii, xhat, d, k, m, modulus, uH):
    """``v / |e^{ikx.d} + u_H|`` at the given radii; returns ``(w, amplified)``."""
    ref = _reference_phase(radii, xhat, d, k, uH)
    vv = v_function_M(radii[:, None] * xhat[None, :], d, modulus, ref - np.exp(1j * k * radii * np.dot(xhat, d)), m, k)
    return vv.value / np.abs(ref), vv.amplified


def retrieve_g_multipoint(plan, xhat, d, k, probe, uH, t=None):
    """Multipoint formula for ``g_1..g_n`` at argument-matched radii."""
    xhat, d = _unit(xhat), _unit(d)
    r, rt, theta, theta_t, tau = modified_radii(plan, xhat, d, k, uH, t)
    samples = RaySampleSet(xhat, d)
    mod = _query(probe, r, samples)
    modt = _query(probe, rt, samples)
    w, amp1 = w_function_M(r, xhat, d, k, plan.m, mod, uH)
    wt, amp2 = w_function_M(rt, xhat, d, k, plan.m, modt, uH)
    G = vandermonde_solve(r, w)
    Gt = vandermonde_solve(rt, wt)
    out = [phase_pair_solve(-theta, -theta_t, G[j], Gt[j]) for j in range(plan.order)]
    g = np.array([o[0] for o in out])
    res = np.array([o[1] for o in out])
    used = replace(plan, tau=tau, t=plan.t if t is None else float(t))
    return FarFieldEstimate(xhat, g, res, used, "g", samples, amp1 or amp2)
