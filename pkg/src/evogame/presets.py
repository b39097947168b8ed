"""Named kernels, coalescence constants, and payoff matrices.

Lookups are functions rather than prebuilt dicts so the quadrature-backed
constants are computed lazily (and cached).  Every preset passes its
type's validation at load time; ``all_names`` feeds the CLI self-test.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Callable

import numpy as np

from .coalescence import Kernel, chi_and_p01
from .errors import ConfigError
from .games import CoalescenceConstants, GameMatrix

# ---------------------------------------------------------------------------
# kernels

_KERNELS: dict[str, Callable[[], Kernel]] = {
    "nn3d": lambda: Kernel.nearest_neighbor(3),
    "moore3d": lambda: Kernel.moore(3),
    "nn4d": lambda: Kernel.nearest_neighbor(4),
}


@lru_cache(maxsize=None)
def kernel_preset(name: str) -> Kernel:
    try:
        return _KERNELS[name]()
    except KeyError:
        raise ConfigError(
            f"unknown kernel preset {name!r}; have {sorted(_KERNELS)}") from None


# ---------------------------------------------------------------------------
# coalescence constants

# Rounded reference values for the 3-d nearest-neighbor walk.  p2/pbar2
# are derived from the sum rules rather than quoted, so the bundle is
# exactly self-consistent and validation is slack-free.
_P01_REF = 0.6404566
_P1_REF = 0.325
_PBAR1_REF = 0.345


def _paper_3d_nn() -> CoalescenceConstants:
    return CoalescenceConstants(
        kappa=6.0,
        p01=_P01_REF,
        p1=_P1_REF,
        p2=(_P01_REF - _P1_REF) / 2.0,
        pbar1=_PBAR1_REF,
        pbar2=(_P01_REF * (1.0 + 1.0 / 6.0) - _PBAR1_REF) / 2.0,
        halfwidths={"p1": 0.005, "pbar1": 0.005, "p2": 0.0025, "pbar2": 0.0025},
    )


def _analytic_3d_nn() -> CoalescenceConstants:
    # pair quantities by quadrature; triple probabilities from long-horizon
    # Monte Carlo extrapolations (documented half-widths), closed into an
    # exactly consistent bundle via the sum rules
    _, p01 = chi_and_p01(Kernel.nearest_neighbor(3))
    p1, pbar1 = 0.2925, 0.3496
    return CoalescenceConstants(
        kappa=6.0,
        p01=p01,
        p1=p1,
        p2=(p01 - p1) / 2.0,
        pbar1=pbar1,
        pbar2=(p01 * (1.0 + 1.0 / 6.0) - pbar1) / 2.0,
        halfwidths={"p1": 1e-3, "pbar1": 1e-3, "p2": 5e-4, "pbar2": 5e-4},
    )


def _replicator_limit() -> CoalescenceConstants:
    # p2 = 0 and pbar2 = p01/kappa zero out both structure coefficients,
    # so game modification becomes the identity and the spatial reaction
    # terms reduce to plain replicator flow
    return CoalescenceConstants(
        kappa=6.0, p01=1.0,
        p1=1.0, p2=0.0,
        pbar1=5.0 / 6.0, pbar2=1.0 / 6.0,
    )


_CONSTANTS: dict[str, Callable[[], CoalescenceConstants]] = {
    "paper-3d-nn": _paper_3d_nn,
    "analytic-3d-nn": _analytic_3d_nn,
    "replicator-limit": _replicator_limit,
}


@lru_cache(maxsize=None)
def constants_preset(name: str) -> CoalescenceConstants:
    try:
        return _CONSTANTS[name]()
    except KeyError:
        raise ConfigError(
            f"unknown constants preset {name!r}; have {sorted(_CONSTANTS)}") from None


# ---------------------------------------------------------------------------
# 2-strategy games


def prisoners_dilemma(b: float = 3.0, c: float = 1.0) -> GameMatrix:
    """Donation game: cooperators pay c to give b."""
    if not b > c > 0:
        raise ConfigError("need b > c > 0")
    return GameMatrix([[b - c, -c], [b, 0.0]], ("C", "D"))


def snowdrift(b: float = 3.0, c: float = 1.0) -> GameMatrix:
    """Cost shared when both cooperate: (b - c/2, b - c; b, 0)."""
    if not b > c > 0:
        raise ConfigError("need b > c > 0")
    return GameMatrix([[b - c / 2.0, b - c], [b, 0.0]], ("C", "D"))


def hawk_dove(v: float = 2.0, c: float = 4.4) -> GameMatrix:
    if not c > v > 0:
        raise ConfigError("need c > v > 0 for a mixed equilibrium")
    return GameMatrix([[(v - c) / 2.0, v], [0.0, v / 2.0]], ("H", "D"))


# ---------------------------------------------------------------------------
# 3-strategy taxonomy fixtures
#
# One representative per classifier case, keyed by the case id the
# classifier reports.  Stored as (alpha, beta) edge triples; edge k is
# the subgame between strategies k+1 and k+2 (cyclic).

_TAXONOMY: dict[str, tuple[tuple[float, float, float], tuple[float, float, float]]] = {
    # three stable edges, all invadable -> proved coexistence
    "case-7.1": ((1.0, 1.0, 1.0), (1.0, 1.0, 1.0)),
    # three stable edges, one noninvadable sink
    "case-7.1A": ((2.0, 1.0, 0.3), (4.0, 0.5, 1.0)),
    # two stable edges, both invadable -> proved coexistence
    "case-7.2": ((1.0, 1.0, 1.0), (1.0, 0.5, -0.25)),
    # two stable edges, exactly one invadable
    "case-7.2A": ((0.5, 1.0, 1.0), (1.0, -0.5, 1.0)),
    # two stable edges, neither invadable -> bistable (open)
    "case-7.2B": ((2.0, 0.5, 1.0), (2.0, 0.5, -2.0)),
    # one stable edge, invadable, with an interior equilibrium
    "case-7.3": ((-0.5, 1.0, -0.5), (1.0, 1.0, 2.0)),
    # one stable edge, invadable, no interior equilibrium
    "case-7.3A": ((1.0, 1.0, -1.0), (-1.0, 1.0, 1.0)),
    # one stable edge, noninvadable, interior equilibrium present
    "case-7.3B": ((1.0, 3.0, -1.0), (-1.0, 3.0, 1.0)),
    # one stable edge, noninvadable, off-edge strategy dominated on both
    # other edges -> flows into the edge equilibrium
    "case-7.3C": ((-1.0, 1.0, 1.0), (1.0, 1.0, -1.0)),
    # one stable edge, noninvadable, dominance arrows in opposite
    # directions (die-out left open)
    "case-7.3D": ((-0.5, 1.0, -0.5), (1.0, 1.0, 0.5)),
    # no stable edge, rock-paper-scissors cycle spiralling inward
    "case-7.4-spiral-in": ((-0.5, -0.5, -0.5), (1.0, 1.0, 1.0)),
    # no stable edge, cycle spiralling out to the boundary
    "case-7.4-spiral-out": ((-2.0, -2.0, -0.3), (1.0, 1.0, 1.0)),
    # no edge fixed points at all: heteroclinic one-way lane
    "case-7.4A": ((-1.0, -1.0, 1.0), (1.0, 1.0, -1.0)),
}


def _games() -> dict[str, Callable[[], GameMatrix]]:
    table: dict[str, Callable[[], GameMatrix]] = {
        "pd": prisoners_dilemma,
        "snowdrift": snowdrift,
        "hawk-dove": hawk_dove,
        "stag-hunt": lambda: GameMatrix([[3.0, 0.0], [2.0, 1.0]], ("S", "H")),
        "bos": lambda: GameMatrix([[0.0, 1.0], [2.0, -1.0]]),
        "rps": lambda: GameMatrix([[0.0, -1.0, 1.0], [1.0, 0.0, -1.0],
                                   [-1.0, 1.0, 0.0]], ("R", "P", "S")),
    }
    for name, (alpha, beta) in _TAXONOMY.items():
        table[name] = (lambda a=alpha, b=beta: GameMatrix.from_alpha_beta(a, b))
    return table


def _cancer_default(family: str) -> GameMatrix:
    from . import cancer  # deferred: cancer builds on the classifier stack

    return cancer.build(cancer.default_spec(family))


_CANCER_FAMILIES = ("myeloma", "chemical", "glycolytic", "stroma")


@lru_cache(maxsize=None)
def game_preset(name: str) -> GameMatrix:
    table = _games()
    if name in table:
        return table[name]()
    if name in _CANCER_FAMILIES:
        return _cancer_default(name)
    raise ConfigError(
        f"unknown game preset {name!r}; have "
        f"{sorted(list(table) + list(_CANCER_FAMILIES))}")


def all_names() -> dict[str, tuple[str, ...]]:
    """Every preset name by category (used by the CLI self-test)."""
    return {
        "kernel": tuple(sorted(_KERNELS)),
        "constants": tuple(sorted(_CONSTANTS)),
        "game": tuple(sorted(list(_games()) + list(_CANCER_FAMILIES))),
    }
