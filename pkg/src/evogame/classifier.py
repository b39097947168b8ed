"""Phase verdicts for 2-strategy games and the edge catalogue for 3.

The two-strategy half turns a (modified) payoff matrix into one of four
sign cases, locates the interior rest point when there is one, and names
the bistable winner by the sign of the reaction term at one half.  The
three-strategy half reads each boundary edge of the simplex as a 2x2
subgame, asks whether the strategy sitting out can invade the attracting
edge equilibria, and maps the resulting sign pattern to a catalogue label
("7.1" ... "7.4A") with a predicted long-run outcome and its proof status.

Sign margins at or below ``GENERIC_TOL`` are never resolved by guessing:
the 2-strategy operations raise, the 3-strategy catalogue returns the
"non-generic" verdict.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, NumericFailure
from .games import (
    CoalescenceConstants,
    GameMatrix,
    SimplexPoint,
    UpdateRule,
    modify_game_3,
    phi_B,
    phi_D,
    theta3,
)
from .replicator import EdgeFixedPoint, _geq_numerators, edge_fixed_point, interior_equilibrium_3

GENERIC_TOL = 1e-9   # |sign margin| at or below this -> refuse to classify

_REGIONS2 = ("coexist", "1≫2", "2≫1",
             "bistable-1-wins", "bistable-2-wins", "bistable-tie")
_EDGE_KINDS = ("attracting", "repelling", "1≫2", "2≫1")
_PROVED_COEXIST = ("7.1", "7.2", "7.3", "almost-constant-sum")


# ---------------------------------------------------------------------------
# two strategies


@dataclass(frozen=True)
class PhaseVerdict2:
    """Sign-case verdict for a two-strategy game.

    ``case`` is S1..S4 from the signs of beta-delta and alpha-gamma.
    ``equilibrium`` is the interior rest frequency of strategy 1, present
    exactly when the rest point exists (S1 stable, S2 unstable).
    ``winner`` is the strategy that takes over; it is absent for S1
    coexistence and for the S2 standing-wave tie (region "bistable-tie",
    where the reaction term vanishes at one half and neither side moves).
    """

    case: str
    region: str
    equilibrium: Optional[float] = None
    winner: Optional[int] = None

    def __post_init__(self):
        if self.case not in ("S1", "S2", "S3", "S4"):
            raise ConfigError(f"unknown case {self.case!r}")
        if self.region not in _REGIONS2:
            raise ConfigError(f"unknown region {self.region!r}")
        if (self.equilibrium is None) == (self.case in ("S1", "S2")):
            raise ConfigError("equilibrium present iff case is S1 or S2")
        if (self.winner is None) != (self.case == "S1" or self.region == "bistable-tie"):
            raise ConfigError("winner absent iff coexistence or a bistable tie")


def _entries2(G) -> np.ndarray:
    g = G.entries if isinstance(G, GameMatrix) else np.asarray(G, dtype=float)
    if g.shape != (2, 2):
        raise ConfigError(f"expected a 2x2 payoff matrix, got shape {g.shape}")
    return g


def classify2(Gmod) -> PhaseVerdict2:
    """Classify a 2-strategy matrix (alpha, beta; gamma, delta) by sign case.

    Expects the matrix *after* any weak-selection modification
    (:func:`evogame.games.modify_game_2`); passing a raw matrix gives the
    mean-field verdict.  Cases: beta>delta, alpha<gamma -> S1 coexist at
    ubar=(beta-delta)/(beta-delta+gamma-alpha); both reversed -> S2
    bistable with the same (now unstable) ubar and the winner decided by
    the sign of the reaction term at 1/2, i.e. of alpha+beta-gamma-delta;
    beta<delta, alpha<gamma -> S3, 2 takes over; both positive -> S4.

    Raises ConfigError when either sign margin is within GENERIC_TOL of a
    boundary tie.
    """
    (a, b), (c, d) = _entries2(Gmod)
    sb = b - d
    sa = a - c
    if abs(sb) <= GENERIC_TOL or abs(sa) <= GENERIC_TOL:
        raise ConfigError(
            f"non-generic 2-strategy game: beta-delta={sb:.3g}, alpha-gamma={sa:.3g}")
    if sb > 0.0 and sa < 0.0:
        return PhaseVerdict2("S1", "coexist", equilibrium=sb / (sb - sa))
    if sb > 0.0:
        return PhaseVerdict2("S4", "1≫2", winner=1)
    if sa < 0.0:
        return PhaseVerdict2("S3", "2≫1", winner=2)
    ubar = sb / (sb - sa)
    risk = a + b - c - d          # = 8 * phi(1/2)
    if abs(risk) <= GENERIC_TOL:
        return PhaseVerdict2("S2", "bistable-tie", equilibrium=ubar)
    if risk > 0.0:
        return PhaseVerdict2("S2", "bistable-1-wins", equilibrium=ubar, winner=1)
    return PhaseVerdict2("S2", "bistable-2-wins", equilibrium=ubar, winner=2)


@dataclass(frozen=True)
class PhasePortrait:
    """One point of the (S, T) phase diagram at fixed R, P.

    Both boundary lines pass through ``(pivot_s, pivot_t)`` — (P, R)
    under Birth-Death, the shifted (P*, R*) under Death-Birth — with
    slopes ``slope_low`` = m/(1+m) and ``slope_high`` = (1+m)/m (infinite
    when the coupling ratio m is zero).  The wedge between them is
    coexist above the pivot and bistable below it.
    """

    region: str
    equilibrium: Optional[float]
    winner: Optional[int]
    pivot_s: float
    pivot_t: float
    slope_low: float
    slope_high: float


def phase_region(R: float, S: float, T: float, P: float,
                 update: "UpdateRule | str",
                 coal: CoalescenceConstants) -> PhasePortrait:
    """Locate (R,S,T,P) on the two-line phase diagram of an update rule.

    This is the line-geometry route: the region is decided by the signed
    distances from the two boundary lines, not by modifying the matrix
    and re-classifying (that is classify2's job, and the two routes are
    held to agree by tests).  Birth-Death uses the raw pivot (P, R) and
    coupling ratio m = p2/p1; Death-Birth shifts the pivot to (P*, R*)
    with P* = P - nu (R-P)/(1+2m), R* = R + nu (R-P)/(1+2m), where
    m = (pbar2 - p01/kappa)/pbar1 and nu = p01/(kappa pbar1).  In the
    coexist and bistable wedges the rest frequency of strategy 1 comes
    from the same signed distances, and the bistable winner is strategy 1
    exactly when R* + S > T + P* (risk dominance in the starred frame).

    Raises ConfigError for points within GENERIC_TOL of either line.
    """
    update = UpdateRule.parse(update)
    if update is UpdateRule.BIRTH_DEATH:
        if coal.p1 == 0.0:
            raise ConfigError("degenerate constants: p1 = 0")
        m = coal.p2 / coal.p1
        nu = 0.0
    else:
        if coal.pbar1 == 0.0:
            raise ConfigError("degenerate constants: pbar1 = 0")
        m = (coal.pbar2 - coal.p01 / coal.kappa) / coal.pbar1
        nu = coal.p01 / (coal.kappa * coal.pbar1)
    if m < 0.0:
        raise ConfigError(f"negative coupling ratio m={m:.3g}")
    shift = nu * (R - P) / (1.0 + 2.0 * m)
    rstar = R + shift
    pstar = P - shift
    s_ag = (1.0 + m) * (rstar - T) + m * (S - pstar)   # sign of alpha-gamma
    s_bd = m * (rstar - T) + (1.0 + m) * (S - pstar)   # sign of beta-delta
    if abs(s_ag) <= GENERIC_TOL or abs(s_bd) <= GENERIC_TOL:
        raise ConfigError(
            f"non-generic point: line margins {s_ag:.3g}, {s_bd:.3g}")
    slope_low = m / (1.0 + m)
    slope_high = np.inf if m == 0.0 else (1.0 + m) / m

    def portrait(region, equilibrium=None, winner=None):
        return PhasePortrait(region, equilibrium, winner,
                             pivot_s=pstar, pivot_t=rstar,
                             slope_low=slope_low, slope_high=slope_high)

    if s_bd > 0.0 and s_ag < 0.0:
        return portrait("coexist", equilibrium=s_bd / (s_bd - s_ag))
    if s_bd > 0.0:
        return portrait("1≫2", winner=1)
    if s_ag < 0.0:
        return portrait("2≫1", winner=2)
    ubar = s_bd / (s_bd - s_ag)
    risk = (rstar - T) - (pstar - S)
    if abs(risk) <= GENERIC_TOL:
        return portrait("bistable-tie", equilibrium=ubar)
    if risk > 0.0:
        return portrait("bistable-1-wins", equilibrium=ubar, winner=1)
    return portrait("bistable-2-wins", equilibrium=ubar, winner=2)


def tarnita_favored2(G2, update: "UpdateRule | str", kappa: float) -> bool:
    """Linear structure-coefficient test: sigma*R + S > T + sigma*P.

    sigma is 1 under Birth-Death and (kappa+1)/(kappa-1) under
    Death-Birth, so kappa = 1 has no Death-Birth test (the coefficient
    blows up) and raises ZeroDivisionError.
    """
    (R, S), (T, P) = _entries2(G2)
    update = UpdateRule.parse(update)
    if update is UpdateRule.BIRTH_DEATH:
        sigma = 1.0
    else:
        if kappa < 1.0:
            raise ConfigError(f"kappa must be >= 1, got {kappa}")
        if kappa == 1.0:
            raise ZeroDivisionError(
                "sigma = (kappa+1)/(kappa-1) is undefined at kappa = 1")
        sigma = (kappa + 1.0) / (kappa - 1.0)
    return bool(sigma * R + S > T + sigma * P)


def favored_by_selection_n(G, update: "UpdateRule | str",
                           coal: CoalescenceConstants, n: int = 3) -> tuple[bool, ...]:
    """Which strategies the selected flow favors at the uniform mix.

    Evaluates the update rule's reaction term at (1/n, ..., 1/n) and
    reports phi_k > 0 per strategy.  Margins below roundoff scale
    (1e-12 relative to the largest payoff) count as ties, i.e. not
    favored — a fully symmetric game favors nobody.
    """
    g = G.entries if isinstance(G, GameMatrix) else np.asarray(G, dtype=float)
    if n != 3:
        raise ConfigError("only the 3-strategy uniform-mix test is supported")
    if g.shape != (3, 3):
        raise ConfigError(f"expected a 3x3 payoff matrix, got shape {g.shape}")
    update = UpdateRule.parse(update)
    u = np.full(3, 1.0 / 3.0)
    phi = phi_B(g, u, coal) if update is UpdateRule.BIRTH_DEATH else phi_D(g, u, coal)
    tie = 1e-12 * max(1.0, float(np.abs(g).max()))
    return tuple(bool(x > tie) for x in phi)


# ---------------------------------------------------------------------------
# three strategies


@dataclass(frozen=True)
class EdgeReport:
    """Edge k of the simplex boundary, read as the 2x2 subgame between
    strategies (k+1)%3 and (k+2)%3.

    ``kind`` gives the within-edge flow: "attracting"/"repelling" for a
    mixed rest point, "1≫2" when the first strategy of the ordered pair
    dominates, "2≫1" for the reverse.  ``numerator`` is the invasion
    discriminant of the off-edge strategy k (positive: k grows at the
    edge rest point); ``invadable`` resolves its sign for attracting
    edges and is None elsewhere, where no one sits at the rest point.
    """

    edge: int
    kind: str
    alpha: float
    beta: float
    numerator: float
    fixed_point: Optional[EdgeFixedPoint]
    invadable: Optional[bool]


@dataclass(frozen=True)
class Taxonomy3:
    """Catalogue verdict for a (modified) three-strategy game.

    ``prediction`` is the long-run outcome claim attached to the label:
    "coexistence-proved" only ever comes with the labels that admit a
    boundary-repelling certificate; everything that relies on a strategy
    dying out, spiralling out, or picking a bistable side is marked
    "conjectured" in ``proof_status``.  ``target`` is the predicted limit
    point when there is a specific one, ``interior_fp`` the interior rest
    point when the numerators admit one, and ``delta`` the cyclic-game
    discriminant (product of alphas plus product of betas), reported for
    rock-paper-scissors games only.
    """

    example_label: str
    edge_reports: tuple
    prediction: str
    proof_status: str
    interior_fp: Optional[SimplexPoint] = None
    target: Optional[SimplexPoint] = None
    delta: Optional[float] = None
    theta: float = 0.0
    modified: Optional[GameMatrix] = None

    def __post_init__(self):
        if self.prediction == "coexistence-proved" \
                and self.example_label not in _PROVED_COEXIST:
            raise ConfigError(
                f"label {self.example_label!r} has no proved-coexistence class")


def _interior_or_none(Hm: GameMatrix) -> Optional[SimplexPoint]:
    # mixed-sign numerators summing to zero mean "no interior rest
    # point", not a usable equilibrium -- fold that case into None
    try:
        return interior_equilibrium_3(Hm)
    except ConfigError:
        return None


def _edge_point(k: int, fp: EdgeFixedPoint) -> SimplexPoint:
    u = np.zeros(3)
    u[(k + 1) % 3] = fp.p
    u[(k + 2) % 3] = fp.q
    return SimplexPoint(u)


def _vertex(k: int) -> SimplexPoint:
    u = np.zeros(3)
    u[k] = 1.0
    return SimplexPoint(u)


def _converges_to(point: SimplexPoint) -> str:
    return "converges-to-(" + ", ".join(f"{x:.6g}" for x in point.u) + ")"


def _wins_of(kinds: list, k: int) -> int:
    # dominance edges strategy k wins: on edge k+1 it is the second of
    # the pair, on edge k+2 the first
    w = 0
    if kinds[(k + 1) % 3] == "2≫1":
        w += 1
    if kinds[(k + 2) % 3] == "1≫2":
        w += 1
    return w


def _catalogue3(Hm: GameMatrix, th: float) -> Taxonomy3:
    alpha, beta = Hm.alpha_beta()
    nongeneric = Taxonomy3("non-generic", (), "non-generic", "n/a",
                           theta=th, modified=Hm)
    if np.any(np.abs(alpha) <= GENERIC_TOL) or np.any(np.abs(beta) <= GENERIC_TOL):
        return nongeneric

    nums = _geq_numerators(alpha, beta)
    kinds = []
    for k in range(3):
        if alpha[k] > 0.0 and beta[k] > 0.0:
            kinds.append("attracting")
        elif alpha[k] < 0.0 and beta[k] < 0.0:
            kinds.append("repelling")
        elif alpha[k] > 0.0:
            kinds.append("1≫2")
        else:
            kinds.append("2≫1")
    if any(kinds[k] == "attracting" and abs(nums[k]) <= GENERIC_TOL
           for k in range(3)):
        return nongeneric

    reports = tuple(
        EdgeReport(k, kinds[k], float(alpha[k]), float(beta[k]), float(nums[k]),
                   edge_fixed_point(float(alpha[k]), float(beta[k])),
                   bool(nums[k] > 0.0) if kinds[k] == "attracting" else None)
        for k in range(3))

    rho = _interior_or_none(Hm)

    def verdict(label, prediction, status, **extra):
        return Taxonomy3(label, reports, prediction, status,
                         theta=th, modified=Hm, **extra)

    def proved_coexistence(label):
        if rho is None:
            raise NumericFailure(
                f"label {label}: invadability promises an interior rest point "
                "but the numerators have mixed signs")
        return verdict(label, "coexistence-proved", "proved", interior_fp=rho)

    stable = [k for k in range(3) if kinds[k] == "attracting"]
    invadable = [k for k in stable if nums[k] > 0.0]

    if "repelling" in kinds:
        # outside the catalogue proper: an unstable mixed edge point
        # splits its edge into two basins, so the honest claim is the
        # bistable one, and no repelling certificate can exist
        return verdict("unstable-edge", "bistable-conjectured", "conjectured",
                       interior_fp=rho)

    if len(stable) == 3:
        if len(invadable) == 3:
            return proved_coexistence("7.1")
        if len(invadable) == 2:
            sink = next(k for k in stable if nums[k] <= 0.0)
            target = _edge_point(sink, reports[sink].fixed_point)
            return verdict("7.1A", _converges_to(target), "conjectured",
                           interior_fp=rho, target=target)
        raise NumericFailure(
            "three attracting edges with fewer than two invadable: the sign "
            "lemma rules this out, so the numerator arithmetic is inconsistent")

    if len(stable) == 2:
        if len(invadable) == 2:
            return proved_coexistence("7.2")
        if len(invadable) == 1:
            sink = next(k for k in stable if nums[k] <= 0.0)
            target = _edge_point(sink, reports[sink].fixed_point)
            return verdict("7.2A", _converges_to(target), "conjectured",
                           interior_fp=rho, target=target)
        return verdict("7.2B", "bistable-conjectured", "conjectured",
                       interior_fp=rho)

    if len(stable) == 1:
        k = stable[0]
        wins = _wins_of(kinds, k)
        edge_eq = _edge_point(k, reports[k].fixed_point)
        if nums[k] > 0.0:
            if wins == 2:
                target = _vertex(k)
                return verdict("7.3A", _converges_to(target), "conjectured",
                               interior_fp=rho, target=target)
            if wins == 1:
                return proved_coexistence("7.3")
            raise NumericFailure(
                "an invading strategy that loses both dominance edges has a "
                "negative numerator by inspection; inconsistent arithmetic")
        if wins == 2:
            return verdict("7.3B", "bistable-conjectured", "conjectured",
                           interior_fp=rho)
        if wins == 1:
            return verdict("7.3D", "dies-out-conjectured", "conjectured",
                           interior_fp=rho, target=edge_eq)
        return verdict("7.3C", _converges_to(edge_eq), "conjectured",
                       interior_fp=rho, target=edge_eq)

    # all three edges are dominance lanes
    wins = [_wins_of(kinds, k) for k in range(3)]
    if max(wins) == 1:
        delta = float(alpha.prod() + beta.prod())
        if abs(delta) <= GENERIC_TOL:
            return nongeneric
        if rho is None:
            raise NumericFailure(
                "a cyclic game always has positive numerators; inconsistent "
                "arithmetic")
        if delta > 0.0:
            return verdict("7.4", "coexistence-conjectured", "conjectured",
                           interior_fp=rho, delta=delta)
        return verdict("7.4", "dies-out-conjectured", "conjectured",
                       interior_fp=rho, delta=delta)
    winner = wins.index(2)
    target = _vertex(winner)
    return verdict("7.4A", _converges_to(target), "conjectured",
                   interior_fp=rho, target=target)


def classify3(G3, update: "UpdateRule | str",
              coal: CoalescenceConstants) -> Taxonomy3:
    """Catalogue a zero-diagonal 3-strategy game under an update rule.

    The matrix is modified first (``modify_game_3`` with the rule's
    ``theta3``) and the catalogue reads the modified edges; the
    "replicator-limit" constants preset makes the modification the
    identity, which is the mean-field classification.  Genericity is
    decided on the modified matrix: any |alpha|, |beta|, attracting-edge
    numerator, or cyclic-game delta at or below GENERIC_TOL returns the
    "non-generic" verdict rather than a guess.

    The label partition is by the number of attracting edges: three
    (7.1 all invadable / 7.1A one sink), two (7.2 both invadable, 7.2A
    one, 7.2B none), one (invadable: 7.3 when the off-edge strategy wins
    one dominance lane, 7.3A when it wins both; noninvadable: 7.3B both,
    7.3D one, 7.3C none), zero (cyclic 7.4 with the delta law, else
    7.4A).  Any repelling edge point gets the honest extra label
    "unstable-edge".
    """
    update = UpdateRule.parse(update)
    th = theta3(update, coal)
    H = modify_game_3(G3 if isinstance(G3, GameMatrix) else GameMatrix(G3), th)
    return _catalogue3(H, th)


@dataclass(frozen=True)
class GuardReport:
    """Outcome of the three-attracting-edges invadability check."""

    applicable: bool
    attracting_edges: int
    invadable_count: Optional[int]
    ok: bool
    detail: str


def impossible_case_guard(G3) -> GuardReport:
    """Check the sign lemma: three attracting edges force >= 2 invadable.

    Applies only when every edge has alpha, beta > 0; anything else
    passes vacuously.  ``ok=False`` would mean the numerator arithmetic
    contradicts the lemma — an implementation bug, not a property of the
    game — which is why this ships as a guard rather than an assert.
    """
    Hm = G3 if isinstance(G3, GameMatrix) else GameMatrix(np.asarray(G3, dtype=float))
    alpha, beta = Hm.alpha_beta()
    n_attracting = int(np.sum((alpha > 0.0) & (beta > 0.0)))
    if n_attracting < 3:
        return GuardReport(False, n_attracting, None, True,
                           "fewer than three attracting edges; nothing to check")
    nums = _geq_numerators(alpha, beta)
    if np.any(np.abs(nums) <= GENERIC_TOL):
        return GuardReport(True, 3, None, True,
                           "a numerator is marginal; cannot certify either way")
    count = int(np.sum(nums > 0.0))
    if count >= 2:
        return GuardReport(True, 3, count, True,
                           f"invadable count {count} in {{2, 3}} as required")
    return GuardReport(True, 3, count, False,
                       f"invadable count {count} violates the sign lemma")
