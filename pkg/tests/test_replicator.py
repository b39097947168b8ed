"""Flow integration, equilibria, transforms, and boundary certificates."""
import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp
from scipy.spatial.distance import directed_hausdorff

from evogame.errors import ConfigError, NumericFailure
from evogame.games import GameMatrix, SimplexPoint, phi_R
from evogame.presets import game_preset, hawk_dove, prisoners_dilemma
from evogame.replicator import (
    LVSystem,
    StepControl,
    Trajectory,
    acs_check,
    build_repelling,
    edge_fixed_point,
    integrate,
    interior_equilibrium_3,
    lv_lyapunov,
    projective_image,
    projective_transform,
    to_lotka_volterra,
)

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


def rhs(g):
    e = g.entries
    return lambda t, u: u * (e @ u - u @ e @ u)


# ---------------------------------------------------------------------------
# integration


def test_integrate_matches_reference_solver():
    g = game_preset("case-7.2")
    traj = integrate(g, [0.2, 0.3, 0.5], 25.0)
    assert traj.terminal_flag == "max_time"
    assert traj.times[-1] == 25.0
    ref = solve_ivp(rhs(g), (0.0, 25.0), [0.2, 0.3, 0.5],
                    rtol=1e-12, atol=1e-14, dense_output=True)
    npt.assert_allclose(traj.final.u, ref.sol(25.0), atol=1e-9)


def test_integrate_cycling_game_matches_reference():
    # inward spiral keeps the field large the whole way, so errors can pile up
    g = game_preset("case-7.4-spiral-in")
    traj = integrate(g, [0.7, 0.2, 0.1], 40.0)
    ref = solve_ivp(rhs(g), (0.0, 40.0), [0.7, 0.2, 0.1],
                    rtol=1e-12, atol=1e-14, dense_output=True)
    npt.assert_allclose(traj.final.u, ref.sol(40.0), atol=1e-8)


def test_hawk_dove_converges_to_mixed_point():
    traj = integrate(hawk_dove(), [0.9, 0.1], 500.0)
    assert traj.terminal_flag == "converged"
    assert traj.final[0] == pytest.approx(1.0 / 2.2, abs=1e-9)


def test_defectors_take_over():
    # the cooperator share decays exponentially, so the field dies before
    # the coordinate reaches the boundary cutoff: this registers as converged
    traj = integrate(prisoners_dilemma(), [0.5, 0.5], 60.0)
    assert traj.terminal_flag == "converged"
    assert traj.final[0] < 1e-9
    assert traj.final[1] == pytest.approx(1.0, abs=1e-9)


def test_vertex_start_never_moves():
    e1 = np.array([1.0, 0.0, 0.0])
    traj = integrate(game_preset("case-7.2"), e1, 1e4)
    assert traj.terminal_flag == "boundary_hit"
    npt.assert_array_equal(traj.states, np.broadcast_to(e1, traj.states.shape))


def test_noninvadable_edge_absorbs():
    # case-7.1A: strategy 1 cannot invade the (2,3) mixture, so a small
    # stake dies out while the pair settles at alpha/(alpha+beta) = 1/3
    traj = integrate(game_preset("case-7.1A"), [0.001, 0.98, 0.019], 400.0)
    assert traj.terminal_flag == "boundary_hit"
    assert traj.final[0] < 1e-12
    assert traj.final[1] == pytest.approx(1.0 / 3.0, abs=1e-6)


def test_integrate_step_budget():
    with pytest.raises(NumericFailure, match="exceeded"):
        integrate(game_preset("case-7.4-spiral-in"), [0.5, 0.3, 0.2], 1e6,
                  StepControl(max_steps=40))


def test_integrate_validation():
    g = game_preset("rps")
    with pytest.raises(ConfigError):
        integrate(g, [0.5, 0.5], 1.0)          # dimension mismatch
    with pytest.raises(ConfigError):
        integrate(g, [0.2, 0.3, 0.5], 0.0)     # no time span
    with pytest.raises(ConfigError):
        StepControl(atol=0.0)
    with pytest.raises(ConfigError):
        StepControl(max_steps=0)


def test_trajectory_validation():
    good = np.array([[0.2, 0.8], [0.3, 0.7]])
    with pytest.raises(ConfigError):
        Trajectory(np.array([0.0, 0.0]), good, "max_time")      # times stall
    with pytest.raises(ConfigError):
        Trajectory(np.array([0.0]), good, "max_time")           # length clash
    with pytest.raises(ConfigError):
        Trajectory(np.array([0.0, 1.0]), good * 1.1, "max_time")
    with pytest.raises(ConfigError):
        Trajectory(np.array([0.0, 1.0]), good, "blew_up")
    assert Trajectory(np.array([0.0, 1.0]), good, "converged").final[1] == 0.7


@settings(max_examples=25, deadline=None)
@given(zero_diag_games(), simplex_points())
def test_integrate_stays_on_simplex(g, u):
    traj = integrate(g, u, 3.0)
    assert np.all(np.diff(traj.times) > 0)
    npt.assert_allclose(traj.states.sum(axis=1), 1.0, atol=1e-9)
    assert np.min(traj.states) >= -1e-15
    assert traj.terminal_flag in ("converged", "max_time", "boundary_hit")


# ---------------------------------------------------------------------------
# equilibria


def test_edge_fixed_point_attracting():
    fp = edge_fixed_point(2.0, 4.0)
    assert fp.p == pytest.approx(1.0 / 3.0, rel=1e-15)
    assert fp.q == pytest.approx(2.0 / 3.0, rel=1e-15)
    assert fp.attracting
    assert fp.payoff == pytest.approx(8.0 / 6.0, rel=1e-15)


def test_edge_fixed_point_repelling():
    fp = edge_fixed_point(-1.0, -2.0)
    assert fp.p == pytest.approx(1.0 / 3.0, rel=1e-15)
    assert not fp.attracting
    assert fp.payoff == pytest.approx(-2.0 / 3.0, rel=1e-15)


def test_edge_fixed_point_dominance_and_degenerate():
    assert edge_fixed_point(1.0, -1.0) is None
    assert edge_fixed_point(-0.5, 2.0) is None
    with pytest.raises(ConfigError):
        edge_fixed_point(0.0, 1.0)


def test_interior_equilibrium_case_73():
    rho = interior_equilibrium_3(game_preset("case-7.3"))
    npt.assert_allclose(rho.u, [7 / 19, 2 / 19, 10 / 19], rtol=1e-14)


def test_interior_equilibrium_rps_center():
    rho = interior_equilibrium_3(game_preset("rps"))
    npt.assert_allclose(rho.u, np.full(3, 1 / 3), rtol=1e-15)


def test_interior_equilibrium_absent():
    assert interior_equilibrium_3(game_preset("case-7.3C")) is None


def test_interior_equilibrium_degenerate_sum():
    g = GameMatrix.from_alpha_beta((1.0, 1.0, -1.0), (0.0, -1.0, 1.0))
    with pytest.raises(ConfigError, match="sum to zero"):
        interior_equilibrium_3(g)


def test_interior_equilibrium_residual_guard():
    # blowing the payoffs up to 1e8 leaves the point itself unchanged but
    # pushes the float residual past the certification cutoff
    big = GameMatrix(game_preset("case-7.3").entries * 1e8)
    with pytest.raises(NumericFailure, match="residual"):
        interior_equilibrium_3(big)


@pytest.mark.parametrize("name", ["case-7.1", "case-7.2", "case-7.3", "rps"])
def test_interior_equilibrium_residual(name):
    rho = interior_equilibrium_3(game_preset(name))
    assert np.max(np.abs(phi_R(game_preset(name), rho))) < 1e-10


# ---------------------------------------------------------------------------
# Lotka-Volterra quotient


def test_lv_coefficients_all_ones_game():
    lv = to_lotka_volterra(game_preset("case-7.1"))
    npt.assert_array_equal(lv.r, [1.0, 1.0])
    npt.assert_array_equal(lv.B, [[-1.0, 0.0], [0.0, -1.0]])


@pytest.mark.parametrize("name", ["case-7.1", "case-7.2", "case-7.3", "rps"])
def test_lv_fixed_point_is_quotient_of_rho(name):
    lv = to_lotka_volterra(game_preset(name))
    rho = interior_equilibrium_3(game_preset(name))
    vstar = rho.u[:2] / rho.u[2]
    assert np.max(np.abs(lv.r + lv.B @ vstar)) < 1e-12


@settings(max_examples=200, deadline=None)
@given(zero_diag_games(), simplex_points())
def test_lv_quotient_rule(g, u):
    # v = (u1/u3, u2/u3) moves by u3 * (LV rate): same orbit, rescaled clock
    lv = to_lotka_volterra(g)
    fit = g.entries @ u.u - u.u @ g.entries @ u.u
    v = u.u[:2] / u.u[2]
    scale = max(np.abs(g.entries).max(), 1.0) ** 2
    npt.assert_allclose(v * (fit[:2] - fit[2]), u.u[2] * lv.rate(v),
                        atol=1e-12 * scale)


@settings(max_examples=200, deadline=None)
@given(zero_diag_games())
def test_lv_determinant_is_third_numerator(g):
    # det B equals the invadability numerator of the (1,2) edge
    alpha, beta = g.alpha_beta()
    num3 = beta[2] * beta[0] + alpha[2] * alpha[1] - alpha[2] * beta[2]
    B = to_lotka_volterra(g).B
    det = B[0, 0] * B[1, 1] - B[0, 1] * B[1, 0]
    scale = max(np.abs(g.entries).max(), 1.0) ** 2
    assert det == pytest.approx(num3, abs=1e-12 * scale)


@pytest.mark.parametrize("name,u0", [("case-7.1", [0.6, 0.3, 0.1]),
                                     ("case-7.2", [0.2, 0.3, 0.5])])
def test_lv_orbits_coincide(name, u0):
    # quotient trajectories trace the LV orbit up to a change of clock, so
    # compare shapes: every mapped sample must sit on the reference orbit
    g = game_preset(name)
    traj = integrate(g, u0, 80.0)
    V = traj.states[:, :2] / traj.states[:, 2:3]
    lv = to_lotka_volterra(g)
    ref = solve_ivp(lambda s, v: lv.rate(v), (0.0, 300.0), V[0],
                    rtol=1e-12, atol=1e-14, dense_output=True)
    tau = np.concatenate([[0.0], np.geomspace(1e-8, 300.0, 40000)])
    assert directed_hausdorff(V, ref.sol(tau).T)[0] < 2e-3


def test_lv_system_validation():
    with pytest.raises(ConfigError):
        LVSystem(r=np.ones(2), B=np.ones((3, 2)))
    with pytest.raises(ConfigError):
        LVSystem(r=np.array([np.inf, 0.0]), B=np.zeros((2, 2)))
    with pytest.raises(ConfigError):
        to_lotka_volterra(np.zeros((1, 1)))


# ---------------------------------------------------------------------------
# projective change of coordinates


def test_projective_round_trip_restores_pair_sums():
    base = game_preset("case-7.4-spiral-in")  # constant sum: every pair adds to 1/2
    m = np.array([2.0, 0.5, 1.0])
    scrambled = projective_transform(base, m)
    s = scrambled.entries
    assert {s[0, 1] + s[1, 0], s[0, 2] + s[2, 0], s[1, 2] + s[2, 1]} != {0.5}
    r = projective_transform(scrambled, 1.0 / m).entries
    for i, j in ((0, 1), (0, 2), (1, 2)):
        assert r[i, j] + r[j, i] == pytest.approx(0.5, rel=1e-15)


def test_projective_maps_interior_equilibrium():
    base = game_preset("case-7.4-spiral-in")
    m = np.array([2.0, 0.5, 1.0])
    got = interior_equilibrium_3(projective_transform(base, m))
    want = projective_image(interior_equilibrium_3(base), m)
    npt.assert_allclose(got.u, want.u, atol=1e-12)


def test_projective_image_renormalizes():
    v = projective_image([0.25, 0.25, 0.5], [4.0, 4.0, 1.0])
    npt.assert_allclose(v.u, [0.4, 0.4, 0.2], rtol=1e-15)


def test_projective_validation():
    g = game_preset("rps")
    for bad in ([1.0, 1.0], [1.0, 0.0, 1.0], [1.0, -2.0, 1.0], [1.0, np.inf, 1.0]):
        with pytest.raises(ConfigError):
            projective_transform(g, bad)


# ---------------------------------------------------------------------------
# planar Lyapunov weights


def test_lv_lyapunov_same_sign_cross_terms():
    # b=-1, f=-2, c=e=0.5 at (1, 2); symmetrized weights come out equal
    assert lv_lyapunov(0.0, -1.0, 0.5, 3.5, 0.5, -2.0, 1.0, 2.0) == (1.0, 1.0)


def test_lv_lyapunov_opposite_signs_cancel_cross_term():
    A, B = lv_lyapunov(-1.0, -1.0, 1.0, 4.5, -0.5, -2.0, 1.0, 2.0)
    assert (A, B) == (0.5, 1.0)


def test_lv_lyapunov_decoupled_branch():
    assert lv_lyapunov(1.0, -1.0, 0.0, 3.5, 0.5, -2.0, 1.0, 2.0) == (1.0, 1.0)


def test_lv_lyapunov_refuses_bad_inputs():
    assert lv_lyapunov(0.0, 1.0, 0.5, 3.5, 0.5, -2.0, 1.0, 2.0) is None      # b > 0
    assert lv_lyapunov(0.0, -1.0, 3.0, 3.5, 3.0, -2.0, 1.0, 2.0) is None     # bf < ce
    assert lv_lyapunov(9.0, -1.0, 0.5, 3.5, 0.5, -2.0, 1.0, 2.0) is None     # not a rest point


# ---------------------------------------------------------------------------
# constant-sum rate law


@pytest.mark.parametrize("gm,gamma", [
    (game_preset("case-7.4-spiral-in"), 0.5),
    (GameMatrix.from_alpha_beta((1.5, 0.5, 1.2), (0.5, 1.5, 0.8)), 2.0),
])
def test_constant_sum_cross_entropy_rate(gm, gamma):
    # sum rho_i dlog(u_i)/dt == (gamma/2) |u - rho|^2 when pair sums are gamma
    rho = interior_equilibrium_3(gm).u
    rng = np.random.default_rng(11)
    for _ in range(25):
        w = rng.random(3) + 1e-3
        u = w / w.sum()
        fit = gm.entries @ u - u @ gm.entries @ u
        assert rho @ fit == pytest.approx(
            0.5 * gamma * ((u - rho) ** 2).sum(), abs=1e-12)


# ---------------------------------------------------------------------------
# almost-constant-sum check


def test_acs_check_constant_sum():
    H = GameMatrix([[0.0, -1.0, 3.0], [3.0, 0.0, -1.0], [-1.0, 3.0, 0.0]])
    assert acs_check(H) == (2.0, 0.0)


def test_acs_check_perturbed():
    H = GameMatrix([[0.0, -1.0, 3.0], [3.0, 0.0, -0.9], [-1.0, 2.8, 0.0]])
    gamma, eta = acs_check(H)
    assert gamma == pytest.approx(5.9 / 3.0, rel=1e-12)
    assert eta == pytest.approx(0.2 / 3.0, rel=1e-12)


def test_acs_check_refusals():
    # pair sums (2, 2, 4.5): the spread swamps the mean
    assert acs_check(GameMatrix([[0.0, 1.0, 1.0], [1.0, 0.0, 2.0],
                                 [1.0, 2.5, 0.0]])) is None
    # negative mean
    assert acs_check(GameMatrix(-np.ones((3, 3)) + np.eye(3))) is None
    # sums all equal but no interior rest point
    flat = GameMatrix.from_alpha_beta((1.9, -0.1, 0.2), (0.1, 2.1, 1.8))
    assert acs_check(flat) is None


# ---------------------------------------------------------------------------
# repelling certificates


def bary_grid(density, offset):
    # the recorded-grid convention certificates promise to reproduce
    i, j = np.meshgrid(np.arange(density + 1), np.arange(density + 1), indexing="ij")
    keep = i + j <= density
    U = np.column_stack([i[keep] / density, j[keep] / density,
                         1.0 - i[keep] / density - j[keep] / density])
    return offset + (1.0 - 3.0 * offset) * U


@pytest.fixture(scope="module")
def certificates():
    return {label: build_repelling(game_preset(f"case-{label}"), f"Ex{label}")
            for label in ("7.1", "7.2", "7.3")}


def test_certificates_exist_and_certify(certificates):
    for label, cert in certificates.items():
        assert cert is not None, label
        assert cert.class_label == f"Ex{label}"
        assert cert.grid_report < 0.0
        assert cert.m_threshold == sum(ep.pi * ep.cap for ep in cert.edges)
        assert cert.band_cap == 10.0 * cert.m_threshold


def test_certificate_piece_inventories(certificates):
    def layout(cert):
        return (sorted(cp.vertex for cp in cert.corners),
                sorted((ep.side, ep.kind) for ep in cert.edges))

    assert layout(certificates["7.1"]) == (
        [0, 1, 2], [(0, "afb"), (1, "afb"), (2, "afb")])
    assert layout(certificates["7.2"]) == (
        [2], [(0, "afb"), (1, "afb"), (2, "dom1")])
    assert layout(certificates["7.3"]) == (
        [], [(0, "dom2"), (1, "afb"), (2, "dom1")])


def test_certificate_check_is_reproducible(certificates):
    for cert in certificates.values():
        U = bary_grid(cert.grid_density, cert.boundary_offset)
        psi, rate = cert.evaluate(U)
        band = (psi > cert.m_threshold * (1.0 + 1e-9)) & (psi < cert.band_cap)
        assert float(np.max(rate[band])) == cert.grid_report


def test_certificate_climbs_at_dominance_edge(certificates):
    cert = certificates["7.3"]
    pts = np.array([[1e-4, 0.9, 0.1 - 1e-4],
                    [1e-8, 0.9, 0.1 - 1e-8],
                    [1e-12, 0.9, 0.1 - 1e-12]])
    psi, rate = cert.evaluate(pts)
    assert np.all(np.diff(psi) > 0)
    assert np.all(psi > cert.m_threshold)
    in_band = psi < cert.band_cap
    assert np.all(rate[in_band] < 0.0)


def test_acs_certificate():
    H = GameMatrix([[0.0, -1.0, 3.0], [3.0, 0.0, -0.9], [-1.0, 2.8, 0.0]])
    cert = build_repelling(H, "almost-constant-sum")
    assert cert.class_label == "almost-constant-sum"
    assert cert.m_threshold == 0.0
    assert cert.band_cap == np.inf
    assert cert.grid_report < 0.0
    pts = np.array([[0.4, 1e-4, 0.6 - 1e-4], [0.4, 1e-8, 0.6 - 1e-8]])
    psi, rate = cert.evaluate(pts)
    assert psi[1] > psi[0] > 0.0
    assert np.all(rate < 0.0)


def test_acs_certificate_refused_when_spread_too_wide():
    wide = GameMatrix([[0.0, 1.0, 1.0], [1.0, 0.0, 2.0], [1.0, 2.5, 0.0]])
    assert build_repelling(wide, "almost-constant-sum") is None


def test_repelling_refuses_unstable_edge():
    bad = GameMatrix.from_alpha_beta((-1.0, 1.0, 1.0), (-2.0, 1.0, 1.0))
    with pytest.raises(ConfigError, match="unstable"):
        build_repelling(bad, "Ex7.1")


def test_repelling_refuses_noninvadable_edge():
    with pytest.raises(ConfigError, match="not invadable"):
        build_repelling(game_preset("case-7.1A"), "Ex7.1")


def test_repelling_refuses_wrong_shape():
    with pytest.raises(ConfigError, match="stable edge"):
        build_repelling(game_preset("case-7.2"), "Ex7.1")
    with pytest.raises(ConfigError, match="stable edge"):
        build_repelling(game_preset("case-7.3"), "Ex7.2")


def test_repelling_refuses_junk():
    with pytest.raises(ConfigError, match="unsupported"):
        build_repelling(game_preset("case-7.1"), "Ex9.9")
    with pytest.raises(ConfigError, match="degenerate"):
        build_repelling(GameMatrix.from_alpha_beta((0.0, 1.0, 1.0),
                                                   (1.0, 1.0, 1.0)), "Ex7.1")
    with pytest.raises(ConfigError):
        build_repelling(hawk_dove(), "Ex7.1")        # wrong size
    with pytest.raises(ConfigError):
        build_repelling(np.eye(3), "Ex7.1")          # nonzero diagonal


def test_repelling_label_aliases():
    for spelling in ("7.3", "Ex7.3", " ex7.3 "):
        cert = build_repelling(game_preset("case-7.3"), spelling)
        assert cert.class_label == "Ex7.3"
