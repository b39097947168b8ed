"""Worked-example values and algebraic invariants of the game transforms."""
import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evogame.errors import ConfigError
from evogame.games import (
    CoalescenceConstants,
    GameMatrix,
    SimplexPoint,
    UpdateRule,
    modify_game_2,
    modify_game_3,
    normalize_zero_diagonal,
    perturbation_matrix,
    phi_B,
    phi_D,
    phi_R,
    theta,
    theta3,
)
from evogame.presets import (
    constants_preset,
    game_preset,
    hawk_dove,
    prisoners_dilemma,
    snowdrift,
)

PAPER = constants_preset("paper-3d-nn")
NEUTRAL = constants_preset("replicator-limit")
BD, DB = UpdateRule.BIRTH_DEATH, UpdateRule.DEATH_BIRTH


def bundle(kappa: float, p01: float, p1: float, pbar1: float) -> CoalescenceConstants:
    """Constants closed under the two sum rules (so validation is exact)."""
    return CoalescenceConstants(
        kappa=kappa, p01=p01, p1=p1, p2=(p01 - p1) / 2.0,
        pbar1=pbar1, pbar2=(p01 * (1.0 + 1.0 / kappa) - pbar1) / 2.0)


entry = st.floats(-10.0, 10.0, allow_nan=False)


@st.composite
def zero_diag_games(draw, n=3):
    g = np.array([[draw(entry) for _ in range(n)] for _ in range(n)])
    np.fill_diagonal(g, 0.0)
    return GameMatrix(g)


@st.composite
def simplex_points(draw, n=3):
    w = np.array([draw(st.floats(1e-3, 1.0)) for _ in range(n)])
    return SimplexPoint(w / w.sum())


# ---------------------------------------------------------------------------
# theta / modify_game_2


def test_theta_pd_birth_death():
    b, c = 3.0, 1.0
    th = theta(BD, prisoners_dilemma(b, c), PAPER)
    assert th == pytest.approx(-2.0 * c * PAPER.p2 / PAPER.p1, rel=1e-14)


def test_theta_bos_is_zero():
    bos = GameMatrix([[0.0, 1.0], [2.0, -1.0]])
    assert theta(BD, bos, PAPER) == 0.0


def test_theta_db_vanishing_case():
    # alpha+beta = gamma+delta and beta = gamma kill both DB terms
    g = GameMatrix([[2.0, 1.0], [1.0, 2.0]])
    assert theta(DB, g, PAPER) == pytest.approx(0.0, abs=1e-15)


def test_modified_pd_birth_death():
    b, c = 4.0, 1.5
    lam = PAPER.p2 / PAPER.p1
    got = modify_game_2(prisoners_dilemma(b, c), BD, PAPER)
    want = [[b - c, -c - 2.0 * c * lam], [b + 2.0 * c * lam, 0.0]]
    npt.assert_allclose(got.entries, want, rtol=1e-14)
    assert got.labels == ("C", "D")


def test_modify_game_2_theta_zero_fixed_point():
    bos = GameMatrix([[0.0, 1.0], [2.0, -1.0]])
    npt.assert_array_equal(modify_game_2(bos, BD, PAPER).entries, bos.entries)


def test_snowdrift_modified_beta():
    b, c = 3.0, 1.0
    got = modify_game_2(snowdrift(b, c), BD, PAPER)
    assert got.entries[0, 1] == pytest.approx(
        b - c + (PAPER.p2 / PAPER.p1) * (b - 1.5 * c), rel=1e-14)


def test_theta_degenerate_constants():
    broken = CoalescenceConstants(kappa=6.0, p01=0.5, p1=0.0, p2=0.25,
                                  pbar1=0.4, pbar2=0.3, unchecked=True)
    with pytest.raises(ConfigError):
        theta(BD, prisoners_dilemma(), broken)


# ---------------------------------------------------------------------------
# theta3 / modify_game_3


def test_theta3_quoted_ratio():
    quoted = CoalescenceConstants(
        kappa=6.0, p01=0.6404566, p1=0.325, p2=0.15775,
        pbar1=0.345, pbar2=0.2010996833333,
        halfwidths={"p1": 5e-3, "p2": 2.5e-3, "pbar1": 5e-3, "pbar2": 2.5e-3})
    assert theta3(BD, quoted) == pytest.approx(0.4854, abs=1e-4)


def test_theta3_db_zero_when_pbar2_matches():
    # replicator-limit preset has pbar2 = p01/kappa and p2 = 0 by design
    assert theta3(DB, NEUTRAL) == 0.0
    assert theta3(BD, NEUTRAL) == 0.0


def test_modify_game_3_theta_zero_identity():
    g = game_preset("case-7.2")
    npt.assert_array_equal(modify_game_3(g, 0.0).entries, g.entries)


def test_modify_game_3_symmetric_fixed_point():
    g = GameMatrix([[0.0, 2.0, -1.0], [2.0, 0.0, 0.5], [-1.0, 0.5, 0.0]])
    npt.assert_allclose(modify_game_3(g, 0.7).entries, g.entries, atol=1e-15)


def test_modify_game_3_one_sided_entry():
    # an entry pair (-d, 0) turns into (-(1+theta) d, theta d)
    d, th = 2.0, 0.45
    g = GameMatrix([[0.0, 1.0, 2.0], [3.0, 0.0, -d], [4.0, 0.0, 0.0]])
    h = modify_game_3(g, th).entries
    assert h[1, 2] == pytest.approx(-(1.0 + th) * d, rel=1e-15)
    assert h[2, 1] == pytest.approx(th * d, rel=1e-15)


def test_modify_game_3_rejects_nonzero_diagonal():
    with pytest.raises(ConfigError):
        modify_game_3(GameMatrix(np.eye(3)), 0.3)


# ---------------------------------------------------------------------------
# reaction terms


def test_phi_r_vertices_are_fixed_points():
    g = game_preset("stag-hunt")
    for i in range(2):
        u = np.zeros(2)
        u[i] = 1.0
        npt.assert_array_equal(phi_R(g, u), np.zeros(2))


def test_phi_r_stag_hunt_interior_equilibrium():
    npt.assert_allclose(phi_R(game_preset("stag-hunt"), [0.5, 0.5]),
                        [0.0, 0.0], atol=1e-15)


def test_phi_r_rps_center():
    center = np.full(3, 1.0 / 3.0)
    npt.assert_allclose(phi_R(game_preset("rps"), center), np.zeros(3), atol=1e-16)


def test_phi_b_reduces_to_replicator_without_coalescence():
    g = game_preset("case-7.1A")
    u = SimplexPoint([0.2, 0.5, 0.3])
    npt.assert_allclose(phi_B(g, u, NEUTRAL), phi_R(g, u), atol=1e-15)


def test_phi_vertex_inputs():
    g = game_preset("case-7.3")
    e2 = np.array([0.0, 1.0, 0.0])
    npt.assert_array_equal(phi_B(g, e2, PAPER), np.zeros(3))
    npt.assert_array_equal(phi_D(g, e2, PAPER), np.zeros(3))


@settings(max_examples=200, deadline=None)
@given(zero_diag_games(), simplex_points())
def test_zero_sum_of_reaction_terms(g, u):
    scale = max(np.abs(g.entries).max(), 1.0)
    for f in (phi_R(g, u), phi_B(g, u, PAPER), phi_D(g, u, PAPER)):
        assert abs(f.sum()) <= 1e-12 * scale


@settings(max_examples=200, deadline=None)
@given(zero_diag_games(), simplex_points())
def test_transform_consistency_bd(g, u):
    h = modify_game_3(g, PAPER.p2 / PAPER.p1)
    scale = max(np.abs(g.entries).max(), 1.0)
    npt.assert_allclose(phi_B(g, u, PAPER), PAPER.p1 * phi_R(h, u),
                        atol=1e-12 * scale)


@settings(max_examples=200, deadline=None)
@given(zero_diag_games(), simplex_points())
def test_transform_consistency_db(g, u):
    h = modify_game_3(g, theta3(DB, PAPER))
    scale = max(np.abs(g.entries).max(), 1.0)
    npt.assert_allclose(phi_D(g, u, PAPER), PAPER.pbar1 * phi_R(h, u),
                        atol=1e-12 * scale)


@settings(max_examples=100, deadline=None)
@given(zero_diag_games(n=2), simplex_points(n=2))
def test_modify_game_2_matches_phi_b(g, u):
    # the 2-strategy modification is the same algebraic identity
    h = modify_game_2(g, BD, PAPER)
    scale = max(np.abs(g.entries).max(), 1.0)
    npt.assert_allclose(phi_B(g, u, PAPER), PAPER.p1 * phi_R(h, u),
                        atol=1e-12 * scale)


@settings(max_examples=100, deadline=None)
@given(zero_diag_games())
def test_perturbation_matrix_skew(g):
    a = perturbation_matrix(g, PAPER)
    npt.assert_allclose(a, -a.T, atol=1e-13)


def test_perturbation_quadratic_form_vanishes():
    g = game_preset("case-7.3B")
    a = perturbation_matrix(g, PAPER)
    rng = np.random.default_rng(7)
    for _ in range(20):
        w = rng.random(3)
        u = w / w.sum()
        assert abs(u @ a @ u) < 1e-14


# ---------------------------------------------------------------------------
# normalization


def test_normalize_chemical_competition():
    z, e, f, g, h = 5.0, 1.0, 4.0, 2.0, 1.0
    raw = GameMatrix([[z - e - f + g, z - e, z - e + g],
                      [z - h, z - h, z - h],
                      [z - f, z, z]], ("P", "R", "S"))
    want = [[0.0, h - e, g - e],
            [e + f - g - h, 0.0, -h],
            [e - g, h, 0.0]]
    npt.assert_allclose(normalize_zero_diagonal(raw).entries, want, atol=1e-14)


def test_normalize_trivia():
    g = game_preset("case-7.2B")
    npt.assert_array_equal(normalize_zero_diagonal(g).entries, g.entries)
    const = GameMatrix(np.full((3, 3), 4.2))
    npt.assert_array_equal(normalize_zero_diagonal(const).entries, np.zeros((3, 3)))


@settings(max_examples=100, deadline=None)
@given(st.builds(GameMatrix, st.lists(st.lists(entry, min_size=3, max_size=3),
                                      min_size=3, max_size=3)),
       simplex_points())
def test_normalize_preserves_replicator_flow(g, u):
    scale = max(np.abs(g.entries).max(), 1.0)
    npt.assert_allclose(phi_R(normalize_zero_diagonal(g), u), phi_R(g, u),
                        atol=1e-12 * scale)


# ---------------------------------------------------------------------------
# cooperation threshold under Death-Birth


@pytest.mark.parametrize("kappa", [4.0, 6.0, 9.0])
def test_db_pd_persistence_boundary(kappa):
    # modified beta entry changes sign exactly at b/c = kappa
    coal = bundle(kappa, 0.64, 0.32, 0.34)
    c = 1.0
    for b, sign in [(kappa * c * 1.2, 1.0), (kappa * c * 0.8, -1.0)]:
        beta = modify_game_2(prisoners_dilemma(b, c), DB, coal).entries[0, 1]
        assert np.sign(beta) == sign
    on_boundary = modify_game_2(prisoners_dilemma(kappa * c, c), DB, coal)
    assert abs(on_boundary.entries[0, 1]) < 1e-12


# ---------------------------------------------------------------------------
# types and validation


def test_game_matrix_validation():
    with pytest.raises(ConfigError):
        GameMatrix(np.zeros((4, 4)))
    with pytest.raises(ConfigError):
        GameMatrix(np.zeros((2, 3)))
    with pytest.raises(ConfigError):
        GameMatrix([[np.nan, 0.0], [0.0, 0.0]])
    with pytest.raises(ConfigError):
        GameMatrix(np.zeros((2, 2)), labels=("only-one",))


def test_alpha_beta_round_trip():
    g = game_preset("case-7.1A")
    alpha, beta = g.alpha_beta()
    back = GameMatrix.from_alpha_beta(alpha, beta)
    npt.assert_array_equal(back.entries, g.entries)


def test_alpha_beta_requires_zero_diagonal():
    with pytest.raises(ConfigError):
        GameMatrix(np.eye(3)).alpha_beta()
    with pytest.raises(ConfigError):
        hawk_dove().alpha_beta()


def test_simplex_point_validation():
    with pytest.raises(ConfigError):
        SimplexPoint([0.5, 0.6])
    with pytest.raises(ConfigError):
        SimplexPoint([1.2, -0.2])
    clamped = SimplexPoint([1.0 + 1e-16, -1e-16])
    assert clamped[1] == 0.0
    assert len(clamped) == 2


def test_constants_validation():
    with pytest.raises(ConfigError):
        bundle(0.5, 0.64, 0.32, 0.34)          # kappa < 1
    with pytest.raises(ConfigError):
        bundle(6.0, 1.4, 0.7, 0.75)            # p01 > 1
    with pytest.raises(ConfigError):
        CoalescenceConstants(kappa=6.0, p01=0.64, p1=0.375, p2=0.1577,
                             pbar1=0.345, pbar2=0.2011)  # sum rule broken
    # the same numbers construct fine when flagged unchecked
    loose = CoalescenceConstants(kappa=6.0, p01=0.64, p1=0.375, p2=0.1577,
                                 pbar1=0.345, pbar2=0.2011, unchecked=True)
    assert loose.p1 == 0.375


def test_constants_halfwidth_slack():
    # a 1e-3 inconsistency passes only when covered by stored half-widths
    kw = dict(kappa=6.0, p01=0.6404566, p1=0.326, p2=0.1577283,
              pbar1=0.345, pbar2=0.20109968333333335)
    with pytest.raises(ConfigError):
        CoalescenceConstants(**kw)
    CoalescenceConstants(**kw, halfwidths={"p1": 5e-4})


def test_update_rule_parse():
    assert UpdateRule.parse("bd") is BD
    assert UpdateRule.parse("Birth-Death") is BD
    assert UpdateRule.parse("death_birth") is DB
    assert UpdateRule.parse(DB) is DB
    with pytest.raises(ConfigError):
        UpdateRule.parse("moran")
