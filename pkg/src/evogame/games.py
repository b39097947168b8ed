"""Game matrices, weak-selection transforms, and the three reaction terms.

Payoffs follow the row-player convention: ``entries[i, j]`` is the payoff
to strategy ``i`` when matched against strategy ``j``.  Three-strategy
matrices are analyzed in zero-diagonal form

    [[0,  a3, b2],
     [b3, 0,  a1],
     [a2, b1, 0 ]]

where the triples ``(a1, a2, a3)`` and ``(b1, b2, b3)`` are indexed by the
strategy that sits out of the corresponding 2x2 subgame.  That indexing is
invariant under cyclic relabeling, which is what makes the edge analysis in
:mod:`evogame.classifier` composable.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError

SIMPLEX_TOL = 1e-12      # |sum(u) - 1| beyond this is an error, not a repair
CLAMP_TOL = 1e-15        # components in [-CLAMP_TOL, 0) are rounded up to 0


class UpdateRule(Enum):
    BIRTH_DEATH = "bd"
    DEATH_BIRTH = "db"

    @classmethod
    def parse(cls, text: "UpdateRule | str") -> "UpdateRule":
        if isinstance(text, cls):
            return text
        key = text.strip().lower().replace("-", "").replace("_", "")
        if key in ("bd", "birthdeath"):
            return cls.BIRTH_DEATH
        if key in ("db", "deathbirth"):
            return cls.DEATH_BIRTH
        raise ConfigError(f"unknown update rule: {text!r}")


@dataclass(frozen=True)
class GameMatrix:
    """An n-strategy payoff matrix (n = 2 or 3) with optional labels."""

    entries: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ConfigError(f"payoff matrix must be square, got {a.shape}")
        n = a.shape[0]
        if n not in (2, 3):
            raise ConfigError(f"only 2- and 3-strategy games supported, got n={n}")
        if not np.all(np.isfinite(a)):
            raise ConfigError("payoff matrix has non-finite entries")
        object.__setattr__(self, "entries", a)
        labels = tuple(self.labels) if self.labels else tuple(str(i + 1) for i in range(n))
        if len(labels) != n:
            raise ConfigError(f"expected {n} labels, got {len(labels)}")
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def is_zero_diagonal(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(np.diag(self.entries)) <= tol))

    def alpha_beta(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (alpha, beta) triples of a zero-diagonal 3-strategy game.

        ``alpha[k]``/``beta[k]`` (0-based k for edge k+1) parameterize the
        subgame between strategies k+1 and k+2 (mod 3) as (0, a; b, 0).
        """
        if self.n != 3:
            raise ConfigError("alpha/beta decomposition needs a 3-strategy game")
        if not self.is_zero_diagonal(tol=0.0):
            raise ConfigError("alpha/beta decomposition needs a zero diagonal")
        g = self.entries
        alpha = np.array([g[(k + 1) % 3, (k + 2) % 3] for k in range(3)])
        beta = np.array([g[(k + 2) % 3, (k + 1) % 3] for k in range(3)])
        return alpha, beta

    @classmethod
    def from_alpha_beta(cls, alpha: Sequence[float], beta: Sequence[float],
                        labels: tuple[str, ...] = ()) -> "GameMatrix":
        a1, a2, a3 = alpha
        b1, b2, b3 = beta
        return cls(np.array([[0.0, a3, b2], [b3, 0.0, a1], [a2, b1, 0.0]]), labels)


@dataclass(frozen=True)
class CoalescenceConstants:
    """The five walk probabilities (plus kappa) that parameterize weak selection.

    p1/p2 are the Birth-Death triple probabilities (all three walks stay
    apart; walks 2,3 meet but avoid walk 1), pbar1/pbar2 the Death-Birth
    analogues.  ``halfwidths`` carries optional 95% CI half-widths keyed by
    field name for Monte Carlo provenance; analytic entries omit them.
    ``unchecked=True`` skips invariant validation, for deliberately
    perturbed inputs that the identity checker should flag rather than
    refuse.
    """

    kappa: float
    p01: float
    p1: float
    p2: float
    pbar1: float
    pbar2: float
    halfwidths: dict = field(default_factory=dict)
    unchecked: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.unchecked:
            return
        if self.kappa < 1.0:
            raise ConfigError(f"kappa must be >= 1, got {self.kappa}")
        for name in ("p01", "p1", "p2", "pbar1", "pbar2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name}={v} outside [0, 1]")
        # consistency identities, honoring stored statistical slack
        tol_bd = self._slack("p1", "p2", "p01")
        if abs(2.0 * self.p2 + self.p1 - self.p01) > tol_bd:
            raise ConfigError(
                f"2*p2 + p1 = {2 * self.p2 + self.p1:.7f} != p01 = {self.p01:.7f}")
        tol_db = self._slack("pbar1", "pbar2", "p01")
        rhs = self.p01 * (1.0 + 1.0 / self.kappa)
        if abs(2.0 * self.pbar2 + self.pbar1 - rhs) > tol_db:
            raise ConfigError(
                f"2*pbar2 + pbar1 = {2 * self.pbar2 + self.pbar1:.7f} != "
                f"p01*(1+1/kappa) = {rhs:.7f}")
        if not self.pbar2 - self.p01 / self.kappa > -self._slack("pbar2", "p01"):
            raise ConfigError("pbar2 - p01/kappa must be positive")

    def _slack(self, *names: str) -> float:
        hw = sum(self.halfwidths.get(n, 0.0) for n in names)
        return 1e-9 + 3.0 * hw


@dataclass(frozen=True)
class SimplexPoint:
    """A frequency vector: nonnegative components summing to 1."""

    u: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float).copy()
        if abs(u.sum() - 1.0) > SIMPLEX_TOL:
            raise ConfigError(f"components sum to {u.sum()!r}, not 1")
        neg = u < 0.0
        if np.any(u[neg] < -CLAMP_TOL):
            raise ConfigError(f"negative component in {u!r}")
        u[neg] = 0.0
        u.flags.writeable = False
        object.__setattr__(self, "u", u)

    def __len__(self) -> int:
        return len(self.u)

    def __getitem__(self, i):
        return self.u[i]


def _entries(G) -> np.ndarray:
    if isinstance(G, GameMatrix):
        return G.entries
    return np.asarray(G, dtype=float)


def _usimplex(u) -> np.ndarray:
    if isinstance(u, SimplexPoint):
        return u.u
    return SimplexPoint(np.asarray(u, dtype=float)).u


def normalize_zero_diagonal(G: GameMatrix) -> GameMatrix:
    """Subtract each column's diagonal entry from that column.

    Column shifts cancel in every fitness difference, so replicator
    dynamics are unchanged.
    """
    g = _entries(G)
    if g.shape[0] != 3:
        raise ConfigError("zero-diagonal normalization is for 3-strategy games")
    out = g - np.diag(g)[None, :]
    labels = G.labels if isinstance(G, GameMatrix) else ()
    return GameMatrix(out, labels)


def theta(update: UpdateRule, G2: GameMatrix, coal: CoalescenceConstants) -> float:
    """Structure coefficient for the 2-strategy off-diagonal perturbation.

    Birth-Death:  theta = (p2/p1) (alpha+beta-gamma-delta).
    Death-Birth:  theta = (pbar2/pbar1) (alpha+beta-gamma-delta)
                          - (p01 / (kappa*pbar1)) (beta-gamma).
    """
    g = _entries(G2)
    if g.shape[0] != 2:
        raise ConfigError("theta is for 2-strategy games")
    a, b = g[0, 0], g[0, 1]
    c, d = g[1, 0], g[1, 1]
    s = a + b - c - d
    if update is UpdateRule.BIRTH_DEATH:
        if coal.p1 == 0.0:
            raise ConfigError("degenerate constants: p1 = 0")
        return (coal.p2 / coal.p1) * s
    if coal.pbar1 == 0.0:
        raise ConfigError("degenerate constants: pbar1 = 0")
    return (coal.pbar2 / coal.pbar1) * s - coal.p01 / (coal.kappa * coal.pbar1) * (b - c)


def modify_game_2(G2: GameMatrix, update: UpdateRule,
                  coal: CoalescenceConstants) -> GameMatrix:
    """Return (alpha, beta+theta; gamma-theta, delta)."""
    g = _entries(G2).copy()
    th = theta(update, G2, coal)
    g[0, 1] += th
    g[1, 0] -= th
    labels = G2.labels if isinstance(G2, GameMatrix) else ()
    return GameMatrix(g, labels)


def theta3(update: UpdateRule, coal: CoalescenceConstants) -> float:
    """Structure coefficient for zero-diagonal 3-strategy games.

    p2/p1 under Birth-Death; (pbar2 - p01/kappa)/pbar1 under Death-Birth.
    """
    if update is UpdateRule.BIRTH_DEATH:
        if coal.p1 == 0.0:
            raise ConfigError("degenerate constants: p1 = 0")
        return coal.p2 / coal.p1
    if coal.pbar1 == 0.0:
        raise ConfigError("degenerate constants: pbar1 = 0")
    return (coal.pbar2 - coal.p01 / coal.kappa) / coal.pbar1


def modify_game_3(G3: GameMatrix, th: float) -> GameMatrix:
    """H[i,j] = (1+theta) G[i,j] - theta G[j,i] for zero-diagonal G."""
    g = _entries(G3)
    if g.shape[0] != 3:
        raise ConfigError("modify_game_3 is for 3-strategy games")
    if np.any(np.diag(g) != 0.0):
        raise ConfigError("modify_game_3 requires a zero diagonal")
    h = (1.0 + th) * g - th * g.T
    labels = G3.labels if isinstance(G3, GameMatrix) else ()
    return GameMatrix(h, labels)


def phi_R(G, u) -> np.ndarray:
    """Replicator reaction term u_i ((Gu)_i - u'Gu)."""
    g = _entries(G)
    v = _usimplex(u)
    gu = g @ v
    return v * (gu - v @ gu)


def _pair_coupling(g: np.ndarray, kind: str) -> np.ndarray:
    # kind "bd": G_ii - G_ji + G_ij - G_jj  (skew across the diagonal pair)
    # kind "anti": G_ij - G_ji
    if kind == "bd":
        d = np.diag(g)
        return d[:, None] - g.T + g - d[None, :]
    return g - g.T


def phi_B(G, u, coal: CoalescenceConstants) -> np.ndarray:
    """Birth-Death reaction term: p1*phi_R + p2 * pair-coupling correction."""
    g = _entries(G)
    v = _usimplex(u)
    corr = v * (_pair_coupling(g, "bd") @ v)
    return coal.p1 * phi_R(g, v) + coal.p2 * corr


def phi_D(G, u, coal: CoalescenceConstants) -> np.ndarray:
    """Death-Birth reaction term: phi_B's form minus the (p01/kappa) antisymmetric part."""
    g = _entries(G)
    v = _usimplex(u)
    corr = v * (_pair_coupling(g, "bd") @ v)
    anti = v * (_pair_coupling(g, "anti") @ v)
    return coal.pbar1 * phi_R(g, v) + coal.pbar2 * corr - (coal.p01 / coal.kappa) * anti


def perturbation_matrix(G, coal: CoalescenceConstants) -> np.ndarray:
    """A[i,j] = (p2/p1)(G_ii + G_ij - G_ji - G_jj); skew-symmetric."""
    g = _entries(G)
    return (coal.p2 / coal.p1) * _pair_coupling(g, "bd")
