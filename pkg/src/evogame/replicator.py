"""Replicator ODE tools: integration, equilibria, transforms, certificates.

The certificate machinery builds a composite barrier out of three kinds of
pieces, each tied to a boundary feature of the zero-diagonal game:

* corner pieces ``g_k = log^-((u_a + u_b)/eta)`` for vertices both
  neighbors can invade,
* edge pieces ``h_k = u_a - p log(u_a + u_k psi_a) + u_b - q log(u_b +
  u_k psi_b) - eps log(u_k)`` for sides carrying an attracting, invadable
  mixed equilibrium (``psi_i = ((delta - u_i)^+)^2`` patches the logs so
  the piece blows up only on its own side),
* edge pieces ``h_k = u_dominated - eps log(u_k)`` for sides where one
  strategy dominates the other.

Capping each edge piece at its maximum over ``{u_k >= delta}`` and adding
everything with small weights gives a function that is flat in the middle
of the simplex and climbs to infinity at the boundary; the certificate is
a grid check that it strictly decreases along the flow wherever it sits
above the flat level.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import ConfigError, NumericFailure
from .games import GameMatrix, SimplexPoint, phi_R

logger = logging.getLogger(__name__)

CONVERGED_TOL = 1e-10   # sup-norm of the field at an accepted state
BOUNDARY_TOL = 1e-12    # any coordinate below this ends the run
RESIDUAL_TOL = 1e-10    # fixed points must satisfy the field to this
_CONVERGED_RUN = 10     # consecutive accepted steps below CONVERGED_TOL


def _entries3(G) -> np.ndarray:
    g = G.entries if isinstance(G, GameMatrix) else np.asarray(G, dtype=float)
    if g.shape != (3, 3):
        raise ConfigError("expected a 3-strategy game")
    if np.any(np.diag(g) != 0.0):
        raise ConfigError("expected a zero diagonal; apply normalize_zero_diagonal first")
    return g


def _field(g: np.ndarray, v: np.ndarray) -> np.ndarray:
    # raw replicator rhs; no simplex validation so RK stages may drift
    gu = g @ v
    return v * (gu - v @ gu)


# ---------------------------------------------------------------------------
# integration


@dataclass(frozen=True)
class StepControl:
    """Adaptive step-size policy for :func:`integrate`."""

    atol: float = 1e-10
    first_step: float = 1e-3
    max_steps: int = 500_000

    def __post_init__(self):
        if self.atol <= 0 or self.first_step <= 0 or self.max_steps < 1:
            raise ConfigError("step control parameters must be positive")


@dataclass(frozen=True)
class Trajectory:
    """A solution path: strictly increasing times, simplex states."""

    times: np.ndarray
    states: np.ndarray
    terminal_flag: str  # converged | max_time | boundary_hit

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        s = np.asarray(self.states, dtype=float)
        if t.ndim != 1 or s.ndim != 2 or s.shape[0] != t.shape[0]:
            raise ConfigError("times and states must align")
        if t.shape[0] and np.any(np.diff(t) <= 0):
            raise ConfigError("times must be strictly increasing")
        if s.size and (np.any(np.abs(s.sum(axis=1) - 1.0) > 1e-9) or np.any(s < -1e-15)):
            raise ConfigError("states left the simplex")
        if self.terminal_flag not in ("converged", "max_time", "boundary_hit"):
            raise ConfigError(f"unknown terminal flag {self.terminal_flag!r}")
        t.flags.writeable = False
        s.flags.writeable = False
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", s)

    @property
    def final(self) -> SimplexPoint:
        return SimplexPoint(self.states[-1])


# Dormand-Prince 5(4) tableau.
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                   187 / 2100, 1 / 40])


def integrate(G, u0, t_max: float, step_control: Optional[StepControl] = None) -> Trajectory:
    """Follow du_i/dt = u_i((Gu)_i - u'Gu) from ``u0`` until ``t_max``.

    Embedded 5(4) pair, error accepted against ``atol`` in the sup norm,
    accepted states renormalized onto the simplex.  Stops early when the
    field stays below 1e-10 for ten accepted steps (``converged``) or a
    coordinate drops below 1e-12 (``boundary_hit``).  A step size that
    underflows raises :class:`NumericFailure` with the partial trajectory
    attached as ``err.trajectory``.
    """
    ctl = step_control or StepControl()
    g = G.entries if isinstance(G, GameMatrix) else np.asarray(G, dtype=float)
    u = SimplexPoint(np.asarray(u0, dtype=float) if not isinstance(u0, SimplexPoint) else u0.u).u.copy()
    if g.shape[0] != g.shape[1] or g.shape[0] != u.shape[0]:
        raise ConfigError("game and start dimensions disagree")
    if t_max <= 0:
        raise ConfigError("t_max must be positive")

    times = [0.0]
    states = [u.copy()]
    t, h = 0.0, min(ctl.first_step, t_max)
    k = np.empty((7, u.shape[0]))
    quiet = 1 if np.max(np.abs(_field(g, u))) < CONVERGED_TOL else 0
    flag = "max_time"

    for _ in range(ctl.max_steps):
        if t >= t_max:
            break
        h = min(h, t_max - t)
        k[0] = _field(g, u)
        for i in range(1, 7):
            k[i] = _field(g, u + h * (_DP_A[i] @ k[:i]))
        u5 = u + h * (_DP_B5 @ k)
        err = np.max(np.abs(h * ((_DP_B5 - _DP_B4) @ k)))
        if err > ctl.atol:
            h *= max(0.2, 0.9 * (ctl.atol / err) ** 0.2)
            if h < 1e-13 * max(1.0, t):
                partial = Trajectory(np.array(times), np.array(states), "max_time")
                exc = NumericFailure(f"step size underflow at t={t:.6g}: stiff problem")
                exc.trajectory = partial
                raise exc
            continue
        t += h
        u = np.clip(u5, 0.0, None)
        u /= u.sum()
        times.append(t)
        states.append(u.copy())
        quiet = quiet + 1 if np.max(np.abs(_field(g, u))) < CONVERGED_TOL else 0
        if quiet >= _CONVERGED_RUN:
            flag = "converged"
            break
        if np.min(u) < BOUNDARY_TOL:
            flag = "boundary_hit"
            break
        h *= min(5.0, max(0.2, 0.9 * (ctl.atol / max(err, 1e-300)) ** 0.2))
    else:
        raise NumericFailure(f"integration exceeded {ctl.max_steps} steps")

    return Trajectory(np.array(times), np.array(states), flag)


# ---------------------------------------------------------------------------
# equilibria


@dataclass(frozen=True)
class EdgeFixedPoint:
    """Mixed equilibrium of a 2x2 subgame written as (0, a; b, 0).

    ``p`` is the share of the strategy whose off-diagonal payoff is
    ``alpha_k`` — on edge k that is strategy k+1 — and ``q = 1 - p``.
    Both strategies earn ``payoff`` there.
    """

    p: float
    q: float
    attracting: bool
    payoff: float


def edge_fixed_point(alpha_k: float, beta_k: float) -> Optional[EdgeFixedPoint]:
    """Mixed point of an edge subgame, or None when one strategy dominates."""
    if alpha_k == 0.0 or beta_k == 0.0:
        raise ConfigError("degenerate edge: alpha or beta vanishes")
    if (alpha_k > 0) != (beta_k > 0):
        return None  # dominance: flow runs the length of the edge
    s = alpha_k + beta_k
    return EdgeFixedPoint(p=alpha_k / s, q=beta_k / s,
                          attracting=alpha_k > 0, payoff=alpha_k * beta_k / s)


def _geq_numerators(alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    # num_k = b_k b_{k+1} + a_k a_{k-1} - a_k b_k (cyclic, 0-based)
    return np.array([beta[k] * beta[(k + 1) % 3] + alpha[k] * alpha[(k + 2) % 3]
                     - alpha[k] * beta[k] for k in range(3)])


def interior_equilibrium_3(H) -> Optional[SimplexPoint]:
    """The unique interior fixed-point candidate of a zero-diagonal 3-game.

    Returns None when the three numerators do not share the sign of their
    sum D; raises on D == 0 (degenerate) and verifies the residual before
    returning.
    """
    g = _entries3(H)
    Hm = H if isinstance(H, GameMatrix) else GameMatrix(g)
    alpha, beta = Hm.alpha_beta()
    nums = _geq_numerators(alpha, beta)
    D = nums.sum()
    if D == 0.0:
        raise ConfigError("degenerate game: equilibrium numerators sum to zero")
    rho = nums / D
    if np.any(rho <= 0.0):
        return None
    point = SimplexPoint(rho)
    residual = np.max(np.abs(phi_R(g, point)))
    if residual >= RESIDUAL_TOL:
        raise NumericFailure(f"interior point residual {residual:.2e}; rescale the game")
    return point


# ---------------------------------------------------------------------------
# transforms


@dataclass(frozen=True)
class LVSystem:
    """dv_i/dt = v_i (r_i + sum_j B_ij v_j) on the positive orthant."""

    r: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        B = np.asarray(self.B, dtype=float)
        if B.shape != (r.shape[0], r.shape[0]):
            raise ConfigError("interaction matrix must be square over the growth vector")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(B))):
            raise ConfigError("non-finite Lotka-Volterra coefficients")
        r.flags.writeable = False
        B.flags.writeable = False
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "B", B)

    def rate(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return v * (self.r + self.B @ v)


def to_lotka_volterra(G) -> LVSystem:
    """Quotient map v_i = u_i/u_n: r_i = G_in - G_nn, B_ij = G_ij - G_nj."""
    g = G.entries if isinstance(G, GameMatrix) else np.asarray(G, dtype=float)
    n = g.shape[0]
    if g.shape != (n, n) or n < 2:
        raise ConfigError("need a square game with at least two strategies")
    return LVSystem(r=g[:-1, -1] - g[-1, -1], B=g[:-1, :-1] - g[-1, :-1])


def projective_transform(G, m) -> GameMatrix:
    """Column scaling G_ij / m_j; trajectories map by u -> u*m (renormalized)."""
    g = G.entries if isinstance(G, GameMatrix) else np.asarray(G, dtype=float)
    w = np.asarray(m, dtype=float)
    if w.shape != (g.shape[1],):
        raise ConfigError("one positive weight per strategy required")
    if np.any(w <= 0.0) or not np.all(np.isfinite(w)):
        raise ConfigError("projective weights must be positive and finite")
    labels = G.labels if isinstance(G, GameMatrix) else ()
    return GameMatrix(g / w[None, :], labels)


def projective_image(u, m) -> SimplexPoint:
    """Where the projective transform sends a state: v_i = u_i m_i / sum."""
    v = (u.u if isinstance(u, SimplexPoint) else np.asarray(u, dtype=float)) * np.asarray(m, dtype=float)
    return SimplexPoint(v / v.sum())


def lv_lyapunov(a, b, c, d, e, f, x_star, y_star):
    """Goh weights (A, B) for V = A(x - x* log x) + B(y - y* log y).

    Preconditions (b, f < 0, bf - ce > 0, positive fixed point that
    actually kills the constant terms) return None when violated, as does
    a failed grid certificate.  Weight choice follows the sign of ce:
    opposite signs cancel the cross term (A/B = -e/c), a shared sign
    symmetrizes it (Ac = Be), and ce = 0 takes the coupled weight small.
    """
    if not (b < 0 and f < 0 and b * f - c * e > 0 and x_star > 0 and y_star > 0):
        return None
    scale = max(abs(a), abs(b), abs(c), abs(d), abs(e), abs(f), 1.0)
    if abs(a + b * x_star + c * y_star) > 1e-9 * scale or \
       abs(d + e * x_star + f * y_star) > 1e-9 * scale:
        return None  # not a fixed point of these coefficients
    if c * e != 0:
        A, B = abs(e), abs(c)  # kills or symmetrizes the cross term either way
    elif c == 0.0 and e == 0.0:
        A, B = 1.0, 1.0
    elif e == 0.0:
        A, B = min(1.0, 2.0 * b * f / c ** 2), 1.0
    else:
        A, B = 1.0, min(1.0, 2.0 * b * f / e ** 2)
    big = max(A, B)
    A, B = A / big, B / big

    xs = np.linspace(x_star / 10.0, 10.0 * x_star, 100)
    ys = np.linspace(y_star / 10.0, 10.0 * y_star, 100)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    dV = A * (X - x_star) * (a + b * X + c * Y) + B * (Y - y_star) * (d + e * X + f * Y)
    off_fp = ((X - x_star) / x_star) ** 2 + ((Y - y_star) / y_star) ** 2 > 1e-20
    if np.max(dV[off_fp]) >= 0.0:
        logger.warning("lv_lyapunov grid certificate failed at dV/dt=%.3g",
                       float(np.max(dV[off_fp])))
        return None
    return A, B


# ---------------------------------------------------------------------------
# repelling certificates


def acs_check(H):
    """(gamma, max_eta) when H is almost constant sum with an interior point.

    gamma is the mean off-diagonal pair sum; eta_ij the residuals.  The
    hypothesis is gamma > 0 and max|eta| < gamma/2.
    """
    g = _entries3(H)
    sums = np.array([g[0, 1] + g[1, 0], g[0, 2] + g[2, 0], g[1, 2] + g[2, 1]])
    gamma = float(sums.mean())
    max_eta = float(np.max(np.abs(sums - gamma)))
    if gamma <= 0.0 or max_eta >= gamma / 2.0:
        return None
    try:
        rho = interior_equilibrium_3(g)
    except ConfigError:
        return None
    if rho is None:
        return None
    return gamma, max_eta


@dataclass(frozen=True)
class CornerPiece:
    """g_k = log^-((1 - u_k)/eta): climbs near vertex k, zero elsewhere."""

    vertex: int
    eta: float


@dataclass(frozen=True)
class EdgePiece:
    """One barrier for the side u_side = 0.

    kind "afb" wraps an attracting invadable mixed point (p, q are the
    equilibrium shares of strategies side+1 and side+2); "dom1"/"dom2"
    cover dominance edges via u_dominated - eps log(u_side).  ``cap`` is
    the ceiling M; ``pi`` the composite weight; dom2 additionally records
    the dominant-share ``floor`` below which another piece takes over.
    """

    side: int
    kind: str
    pi: float
    delta: float
    epsilon: float
    cap: float
    p: float = 0.0
    q: float = 0.0
    dominated: int = -1
    floor: float = 0.0


@dataclass(frozen=True)
class RepellingCertificate:
    """A numerically certified boundary-repelling function.

    ``grid_report`` is the largest d(psi)/dt over the master grid cells in
    the certified band {m_threshold < psi < band_cap}; valid certificates
    have it strictly negative.  The grid parameters are recorded so the
    check is reproducible.
    """

    game: GameMatrix
    class_label: str
    corners: tuple
    edges: tuple
    rho: Optional[SimplexPoint]
    m_threshold: float
    band_cap: float
    grid_report: float
    grid_density: int
    boundary_offset: float

    def evaluate(self, points: np.ndarray):
        """(psi, rate) at interior points; rows must lie on the simplex."""
        U = np.atleast_2d(np.asarray(points, dtype=float))
        if self.class_label == "almost-constant-sum":
            return _acs_psi_rate(self.game.entries, self.rho.u, U)
        return _composite_psi_rate(self.game.entries, self.corners, self.edges, U)


_LABEL_ALIASES = {
    "ex7.1": "7.1", "7.1": "7.1",
    "ex7.2": "7.2", "7.2": "7.2",
    "ex7.3": "7.3", "7.3": "7.3",
    "almost-constant-sum": "acs", "acs": "acs",
}


@lru_cache(maxsize=4)
def _bary_grid(density: int, offset: float) -> np.ndarray:
    i, j = np.meshgrid(np.arange(density + 1), np.arange(density + 1), indexing="ij")
    keep = i + j <= density
    u1 = i[keep] / density
    u2 = j[keep] / density
    U = np.column_stack([u1, u2, 1.0 - u1 - u2])
    U = offset + (1.0 - 3.0 * offset) * U  # pull off the boundary, keep the sum
    U.flags.writeable = False
    return U


def _flow(g: np.ndarray, U: np.ndarray):
    GU = U @ g.T
    mean = np.einsum("ij,ij->i", U, GU)
    fit = GU - mean[:, None]        # per-strategy fitness differences
    return U * fit, fit


def _acs_psi_rate(g: np.ndarray, rho: np.ndarray, U: np.ndarray):
    psi = (U - rho * np.log(U)).sum(axis=1) - float((rho - rho * np.log(rho)).sum())
    _, fit = _flow(g, U)
    rate = ((U - rho) * fit).sum(axis=1)
    return psi, rate


def _composite_psi_rate(g: np.ndarray, corners, edges, U: np.ndarray):
    phi, fit = _flow(g, U)
    psi = np.zeros(U.shape[0])
    rate = np.zeros(U.shape[0])
    for cp in corners:
        k = cp.vertex
        a, b = (k + 1) % 3, (k + 2) % 3
        s = U[:, a] + U[:, b]
        active = s < cp.eta
        psi += np.where(active, -np.log(np.maximum(s, 1e-300) / cp.eta), 0.0)
        rate += np.where(active, -(phi[:, a] + phi[:, b]) / s, 0.0)
    for ep in edges:
        h, dh = _edge_h_dh(ep, U, phi, fit)
        psi += ep.pi * np.maximum(h, ep.cap)
        rate += ep.pi * np.where(h > ep.cap, dh, 0.0)
    return psi, rate


def _edge_h_dh(ep: EdgePiece, U: np.ndarray, phi: np.ndarray, fit: np.ndarray):
    k = ep.side
    if ep.kind == "afb":
        a, b = (k + 1) % 3, (k + 2) % 3
        h = U[:, a] + U[:, b] - ep.epsilon * np.log(U[:, k])
        dh = phi[:, a] + phi[:, b] - ep.epsilon * fit[:, k]
        for idx, w in ((a, ep.p), (b, ep.q)):
            slack = np.maximum(ep.delta - U[:, idx], 0.0)
            arg = U[:, idx] + U[:, k] * slack ** 2
            h -= w * np.log(arg)
            dh -= w * (phi[:, idx] * (1.0 - 2.0 * U[:, k] * slack)
                       + phi[:, k] * slack ** 2) / arg
        return h, dh
    h = U[:, ep.dominated] - ep.epsilon * np.log(U[:, k])
    return h, phi[:, ep.dominated] - ep.epsilon * fit[:, k]


def _corner_band(k: int, eta: float, offset: float) -> np.ndarray:
    s = np.geomspace(2.0 * offset, eta * 0.999, 25)
    f = np.linspace(1e-3, 1.0 - 1e-3, 41)
    S, F = np.meshgrid(s, f, indexing="ij")
    U = np.zeros((S.size, 3))
    U[:, k] = 1.0 - S.ravel()
    U[:, (k + 1) % 3] = (S * F).ravel()
    U[:, (k + 2) % 3] = (S * (1.0 - F)).ravel()
    return U


def _side_band(k: int, delta: float, offset: float) -> np.ndarray:
    s = np.geomspace(2.0 * offset, delta * 0.999, 25)
    f = np.linspace(1e-3, 1.0 - 1e-3, 201)
    S, F = np.meshgrid(s, f, indexing="ij")
    U = np.zeros((S.size, 3))
    U[:, k] = S.ravel()
    U[:, (k + 1) % 3] = ((1.0 - S) * F).ravel()
    U[:, (k + 2) % 3] = ((1.0 - S) * (1.0 - F)).ravel()
    return U


def _edge_cap(ep: EdgePiece, g: np.ndarray, grid: np.ndarray) -> float:
    """Ceiling M chosen so the capped piece engages only where it decreases.

    A dominance piece decreases on its whole band, so the exact sup of h
    over {u_side >= delta} suffices.  A patched piece also misbehaves in the
    two corner diamonds inside its own band, so its ceiling is the sup of h
    over every certification cell outside the band's good region; with that
    choice max(h, M) stays flat wherever the decrease lemma is silent.
    """
    if ep.kind != "afb":
        return (1.0 - ep.delta) - ep.epsilon * math.log(ep.delta)
    k = ep.side
    a, b = (k + 1) % 3, (k + 2) % 3
    good = (grid[:, k] < ep.delta) & (grid[:, a] > ep.delta) & (grid[:, b] > ep.delta)
    rest = grid[~good]
    phi, fit = _flow(g, rest)
    h, _ = _edge_h_dh(ep, rest, phi, fit)
    top = float(np.max(h))
    return top + 1e-9 * abs(top) + 1e-12


def build_repelling(H, class_label: str, grid_density: int = 400,
                    boundary_offset: float = 1e-6) -> Optional[RepellingCertificate]:
    """Construct and certify a repelling function for a supported class.

    Accepts labels Ex7.1/Ex7.2/Ex7.3 (or bare 7.1/7.2/7.3) and
    "almost-constant-sum".  Games with an unstable (repelling) edge
    equilibrium, or a stable one that the third strategy cannot invade,
    are refused with :class:`ConfigError` — no barrier can exist.  A
    search that exhausts its budget returns None after logging the
    violating grid cell.
    """
    label = _LABEL_ALIASES.get(str(class_label).strip().lower())
    if label is None:
        raise ConfigError(f"unsupported certificate class {class_label!r}")
    g = _entries3(H)
    Hm = H if isinstance(H, GameMatrix) else GameMatrix(g)

    if label == "acs":
        return _build_acs(Hm, grid_density, boundary_offset)

    alpha, beta = Hm.alpha_beta()
    nums = _geq_numerators(alpha, beta)
    kinds = []
    for k in range(3):
        if alpha[k] == 0.0 or beta[k] == 0.0:
            raise ConfigError(f"degenerate edge {k + 1}: subgame payoff vanishes")
        if alpha[k] > 0 and beta[k] > 0:
            if nums[k] <= 0.0:
                raise ConfigError(
                    f"edge {k + 1} equilibrium is attracting but not invadable")
            kinds.append("stable")
        elif alpha[k] < 0 and beta[k] < 0:
            raise ConfigError(
                f"unstable mixed equilibrium on edge {k + 1}: no repelling function exists")
        else:
            kinds.append("dom")
    want = {"7.1": 3, "7.2": 2, "7.3": 1}[label]
    if kinds.count("stable") != want:
        raise ConfigError(
            f"class {class_label}: expected {want} stable edge(s), found {kinds.count('stable')}")

    return _build_composite(Hm, label, kinds, alpha, beta, grid_density, boundary_offset)


def _build_acs(Hm, grid_density, boundary_offset):
    if acs_check(Hm) is None:
        logger.warning("almost-constant-sum hypothesis fails; no certificate")
        return None
    rho = interior_equilibrium_3(Hm)
    U = _bary_grid(grid_density, boundary_offset)
    psi, rate = _acs_psi_rate(Hm.entries, rho.u, U)
    band = psi > 0.0
    worst = float(np.max(rate[band]))
    if worst >= 0.0:
        logger.warning("acs certificate failed: dV/dt=%.3g at %s",
                       worst, U[band][int(np.argmax(rate[band]))])
        return None
    return RepellingCertificate(
        game=Hm, class_label="almost-constant-sum", corners=(), edges=(), rho=rho,
        m_threshold=0.0, band_cap=math.inf, grid_report=worst,
        grid_density=grid_density, boundary_offset=boundary_offset)


def _dominated_index(alpha_k: float, side: int) -> int:
    # alpha_k > 0 means side+1 beats side+2 on this edge
    return (side + 2) % 3 if alpha_k > 0 else (side + 1) % 3


def _search_eta(g: np.ndarray, k: int, offset: float) -> Optional[float]:
    eta = 0.25
    for _ in range(20):
        U = _corner_band(k, eta, offset)
        phi, _ = _flow(g, U)
        a, b = (k + 1) % 3, (k + 2) % 3
        if np.max(-(phi[:, a] + phi[:, b]) / (U[:, a] + U[:, b])) < 0.0:
            return eta
        eta /= 2.0
    return None


def _piece_band_ok(ep: EdgePiece, g: np.ndarray, offset: float) -> bool:
    U = _side_band(ep.side, ep.delta, offset)
    phi, fit = _flow(g, U)
    _, dh = _edge_h_dh(ep, U, phi, fit)
    a, b = (ep.side + 1) % 3, (ep.side + 2) % 3
    if ep.kind == "afb":
        sel = (U[:, a] > ep.delta) & (U[:, b] > ep.delta)
    elif ep.kind == "dom2":
        dominant = a if ep.dominated == b else b
        sel = U[:, dominant] >= ep.floor
    else:
        sel = np.ones(U.shape[0], dtype=bool)
    return bool(np.max(dh[sel]) < 0.0)


def _build_composite(Hm, label, kinds, alpha, beta, grid_density, boundary_offset):
    g = Hm.entries
    stable = [k for k in range(3) if kinds[k] == "stable"]
    doms = [k for k in range(3) if kinds[k] == "dom"]

    # corners: every vertex for 7.1; for 7.2 only the one where both
    # attracting sides meet (kornf needs both neighbors to invade it)
    corner_at = list(range(3)) if label == "7.1" else (doms if label == "7.2" else [])
    corners = []
    for k in corner_at:
        eta = _search_eta(g, k, boundary_offset)
        if eta is None:
            logger.warning("corner %d never becomes repelling; giving up", k + 1)
            return None
        corners.append(CornerPiece(vertex=k, eta=eta))

    dom_pieces = []
    for k in doms:
        i = _dominated_index(alpha[k], k)
        j = (k + 1) % 3 if i == (k + 2) % 3 else (k + 2) % 3
        if g[k, i] > 0.0 and g[k, j] > 0.0:
            dom_pieces.append(("dom1", k, i))
        elif g[k, j] > 0.0 and g[k, i] <= 0.0:
            dom_pieces.append(("dom2", k, i))
        else:
            logger.warning("side %d: strategy %d cannot invade the dominant type; "
                           "no covering lemma applies", k + 1, k + 1)
            return None

    min_eta = min((cp.eta for cp in corners), default=0.5)

    def settle_dom(ep: EdgePiece) -> Optional[EdgePiece]:
        # a dominance piece wants the widest wedge it can defend: its rate
        # -eps*fit_side strengthens with epsilon, and the activation reach
        # delta*exp(-(1-delta)/eps) must stretch past the cells near the
        # dominated vertex where a dom2 rate turns positive
        for _ in range(5):
            eps = 0.8
            for _ in range(20):
                trial = replace(ep, epsilon=eps,
                                floor=ep.delta if ep.kind == "dom2" else 0.0)
                if _piece_band_ok(trial, g, boundary_offset):
                    return trial
                eps /= 2.0
            ep = replace(ep, delta=ep.delta / 2.0)
        return None

    def settle_afb(ep: EdgePiece) -> Optional[EdgePiece]:
        # the patched pieces fail by a too-wide band (an interior rest point
        # inside it zeroes the rate), so concede delta
        for _ in range(20):
            if _piece_band_ok(ep, g, boundary_offset):
                return ep
            ep = replace(ep, delta=ep.delta / 2.0, epsilon=ep.delta / 8.0)
        return None

    pieces = []
    for kind, k, i in sorted(dom_pieces):  # dom1 before dom2
        ep = settle_dom(EdgePiece(side=k, kind=kind, pi=1.0, delta=0.25,
                                  epsilon=0.8, cap=0.0, dominated=i))
        if ep is None:
            logger.warning("dominance piece on side %d never decreases", k + 1)
            return None
        pieces.append(ep)

    delta0 = min(0.125, 0.49 * min_eta)
    for k in stable:
        p = alpha[k] / (alpha[k] + beta[k])
        ep = EdgePiece(side=k, kind="afb", pi=1.0, delta=delta0,
                       epsilon=delta0 / 4.0, cap=0.0, p=p, q=1.0 - p)
        ep = settle_afb(ep)
        if ep is None:
            logger.warning("edge piece on side %d never decreases", k + 1)
            return None
        pieces.append(ep)

    U = _bary_grid(grid_density, boundary_offset)
    pieces = [replace(ep, cap=_edge_cap(ep, g, U)) for ep in pieces]
    halvable = [n for n, ep in enumerate(pieces) if ep.kind in ("afb", "dom2")]
    for _ in range(20):
        corners_t = tuple(corners)
        edges_t = tuple(pieces)
        psi, rate = _composite_psi_rate(g, corners_t, edges_t, U)
        m0 = sum(ep.pi * ep.cap for ep in pieces)
        band = (psi > m0 * (1.0 + 1e-9)) & (psi < 10.0 * m0)
        if not np.any(band):
            logger.warning("certificate band is empty at this grid density")
            return None
        worst = float(np.max(rate[band]))
        if worst < 0.0:
            return RepellingCertificate(
                game=Hm, class_label=f"Ex{label}", corners=corners_t,
                edges=edges_t, rho=None, m_threshold=m0, band_cap=10.0 * m0,
                grid_report=worst, grid_density=grid_density,
                boundary_offset=boundary_offset)
        cell = U[band][int(np.argmax(rate[band]))]
        phi, fit = _flow(g, cell[None, :])
        contrib = []
        for n in halvable:
            ep = pieces[n]
            h, dh = _edge_h_dh(ep, cell[None, :], phi, fit)
            if h[0] > ep.cap and dh[0] > 0.0:
                contrib.append((ep.pi * dh[0], n))
        if not contrib:
            logger.warning("repelling search stuck: dPsi/dt=%.3g at u=%s "
                           "with no shrinkable positive piece", worst, cell)
            return None
        n = max(contrib)[1]
        pieces[n] = replace(pieces[n], pi=pieces[n].pi / 2.0)
    logger.warning("repelling search exhausted its budget; last violation %.3g", worst)
    return None
