"""Coalescence probabilities of random walks on Z^d (d >= 3).

Two routes to every constant:

* analytic — the lattice Green function by midpoint quadrature over
  (-pi, pi)^d plus Richardson extrapolation in the cell count.  The
  midpoint grid satisfies the walk's one-step harmonic relation exactly
  (not just in the limit), so escape-probability consistency checks hold
  to machine precision at every resolution; only the *values* need the
  extrapolation.
* Monte Carlo — jump-chain simulation of two or three coalescing
  walkers (compiled kernels in ``_walks``), reporting Wald intervals.
  A finite horizon biases class probabilities by O(horizon^-1/2); the
  identity checker budgets ``BIAS_COEFFICIENT / sqrt(horizon)`` per
  estimate on top of the statistical tolerance.

Walker conventions for the triple starts (all offsets fresh kernel
draws): birth-death uses positions 0, v1, v1+v2; death-birth uses
v1, v2, v2+v3.  Class {23} is the event that walkers 2 and 3 coalesce
while walker 1 escapes both.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _walks
from .errors import ConfigError, NumericFailure
from .games import CoalescenceConstants, UpdateRule

# Truncating a walk at a finite horizon overcounts escape by the probability
# of absorption after the horizon, a first-passage tail ~ c / sqrt(h) in d=3.
# Calibrated against the quadrature values with common-random-number horizon
# differences: c ~= 0.29 for the pair walk (theory: 2 (2 pi sigma^2)^{-3/2}
# / chi^2 ~= 0.29 for the nearest-neighbor difference walk, sigma^2 = 1/3) and
# c ~= 0.47 / 0.56 for the three-walker apart classes. 0.6 covers them all.
BIAS_COEFFICIENT = 0.6  # horizon-bias allowance per MC estimate, times horizon^-1/2
_LANE_LIMIT = _walks.MAX_LANE_DRIFT


def _quad_limits(d: int) -> tuple[int, int, float]:
    # (n_min, n_max, tol): grids are n^d points, so the ceiling drops fast
    # with dimension; d=3 is the precision-critical case
    if d == 3:
        return 32, 256, 1e-6
    if d == 4:
        return 16, 64, 1e-3
    return 8, 32, 1e-2


# ---------------------------------------------------------------------------
# kernel


def _as_vec(x: Iterable[int]) -> tuple[int, ...]:
    v = tuple(int(c) for c in x)
    return v


@dataclass(frozen=True)
class Kernel:
    """Symmetric finite-range step distribution on Z^d.

    Parameters
    ----------
    d : int
        Lattice dimension.
    offsets : tuple of ((int, ...), Fraction | float)
        Support points with probabilities.  Must sum to 1, exclude the
        origin, be closed under negation with matching weights, and
        generate all of Z^d.  ``from_weights`` stores exact rationals,
        which keeps ``kappa`` free of rounding (a uniform kernel on m
        offsets gives kappa == m exactly).
    """

    d: int
    offsets: tuple[tuple[tuple[int, ...], Fraction | float], ...]

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ConfigError("kernel dimension must be positive")
        seen: dict[tuple[int, ...], float] = {}
        for vec, p in self.offsets:
            if len(vec) != self.d:
                raise ConfigError(f"offset {vec} has wrong dimension")
            if p <= 0.0:
                raise ConfigError(f"offset {vec} has non-positive weight")
            if all(c == 0 for c in vec):
                raise ConfigError("kernel must not place mass on the origin")
            if vec in seen:
                raise ConfigError(f"duplicate offset {vec}")
            seen[vec] = p
        if abs(sum(seen.values()) - 1.0) > 1e-12:
            raise ConfigError("kernel weights must sum to 1")
        for vec, p in seen.items():
            neg = tuple(-c for c in vec)
            if neg not in seen or abs(seen[neg] - p) > 1e-12:
                raise ConfigError(f"kernel not symmetric at offset {vec}")
        if not _generates_lattice(list(seen), self.d):
            raise ConfigError("kernel support does not generate Z^d")

    @classmethod
    def from_weights(cls, d: int, weights: Mapping[Sequence[int], float]) -> "Kernel":
        total = sum(Fraction(w) for w in weights.values())
        if total <= 0:
            raise ConfigError("kernel weights must have positive total")
        offsets = tuple(
            (_as_vec(v), Fraction(p) / total) for v, p in sorted(weights.items())
        )
        return cls(d, offsets)

    @classmethod
    def nearest_neighbor(cls, d: int = 3) -> "Kernel":
        w = {}
        for j in range(d):
            for s in (1, -1):
                v = [0] * d
                v[j] = s
                w[tuple(v)] = 1.0
        return cls.from_weights(d, w)

    @classmethod
    def moore(cls, d: int = 3) -> "Kernel":
        """Uniform distribution on the full unit box minus the origin."""
        w = {}
        for v in np.ndindex(*(3,) * d):
            vec = tuple(int(c) - 1 for c in v)
            if any(vec):
                w[vec] = 1.0
        return cls.from_weights(d, w)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        offs = np.array([v for v, _ in self.offsets], dtype=np.int64)
        probs = np.array([p for _, p in self.offsets], dtype=np.float64)
        return offs, probs

    @property
    def step_range(self) -> int:
        return max(max(abs(c) for c in v) for v, _ in self.offsets)

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {v: p for v, p in self.offsets}


def _generates_lattice(vectors: list[tuple[int, ...]], d: int) -> bool:
    # Integer row reduction; the generated subgroup is Z^d iff every
    # pivot of the reduced basis is +-1.
    rows = [list(v) for v in vectors]
    pivots = []
    for col in range(d):
        live = [r for r in rows if r[col] != 0]
        if not live:
            return False
        # Euclid on the column entries until one nonzero remains
        while len(live) > 1:
            live.sort(key=lambda r: abs(r[col]))
            a, b = live[0], live[1]
            q = b[col] // a[col]
            for j in range(d):
                b[j] -= q * a[j]
            live = [r for r in live if r[col] != 0]
        piv = live[0]
        pivots.append(abs(piv[col]))
        rest = []
        for r in rows:
            if r is piv or r[col] == 0:
                if r is not piv:
                    rest.append(r)
                continue
            q = r[col] // piv[col]
            for j in range(d):
                r[j] -= q * piv[j]
            if any(r):
                rest.append(r)
        rows = rest
    return all(p == 1 for p in pivots)


# ---------------------------------------------------------------------------
# analytic route


def kappa(kernel: Kernel) -> float:
    """1 / sum_x p(x) p(-x) — inverse weight of a one-step meeting."""
    # floats convert to Fraction exactly, so the sum is a single rounding
    table = {v: Fraction(p) for v, p in kernel.offsets}
    s = sum(p * table[tuple(-c for c in v)] for v, p in table.items())
    return float(1 / s)


@lru_cache(maxsize=32)
def _grid_pass(kernel: Kernel, n: int, targets: tuple[tuple[int, ...], ...]):
    # midpoint grid t_j = -pi + (2k+1) pi/n avoids both t=0 and the
    # corner zeros of 1 - phi for bipartite kernels
    d = kernel.d
    axes = -np.pi + (2.0 * np.arange(n) + 1.0) * (np.pi / n)
    offs, probs = kernel.arrays()
    phi = np.zeros((n,) * d)
    for v, p in zip(offs, probs):
        phase = np.zeros(())
        for j in range(d):
            shape = (1,) * j + (n,) + (1,) * (d - 1 - j)
            phase = phase + v[j] * axes.reshape(shape)
        phi += p * np.cos(phase)
    weight = 1.0 / (1.0 - phi)
    chi = float(weight.mean())
    spectrum = np.fft.fftn(weight)
    del weight, phi
    values = np.empty(len(targets))
    scale = 1.0 / n**d
    for i, x in enumerate(targets):
        c = np.exp(1j * np.pi * (1.0 / n - 1.0) * np.array(x)).prod()
        idx = tuple(int(xc) % n for xc in x)
        values[i] = scale * (c * np.conj(spectrum[idx])).real
    return chi, values


def _green_richardson(kernel: Kernel, targets: tuple[tuple[int, ...], ...],
                      resolution: int | None = None):
    """Richardson-extrapolated Green-function values at the targets.

    Returns (chi, values, n) where n is the finer of the two grids used.
    Plain midpoint values carry an O(1/n) error from the singular cells;
    2*G_{2n} - G_n cancels it, and the extrapolated object still obeys
    the exact grid identities because the relation is linear.
    """
    if kernel.d < 3:
        raise ConfigError("walk is recurrent for d < 3; constants diverge")
    if resolution is not None:
        n = int(resolution)
        if n < 4 or n % 2:
            raise ConfigError("quadrature resolution must be an even integer >= 4")
        c1, v1 = _grid_pass(kernel, n // 2, targets)
        c2, v2 = _grid_pass(kernel, n, targets)
        return 2.0 * c2 - c1, 2.0 * v2 - v1, n
    n, n_max, tol = _quad_limits(kernel.d)
    c1, v1 = _grid_pass(kernel, n, targets)
    c2, v2 = _grid_pass(kernel, 2 * n, targets)
    prev = 2.0 * c2 - c1
    while True:
        n *= 2
        if 2 * n > n_max:
            raise NumericFailure(
                f"quadrature not converged to {tol} by n={n_max}; "
                "pass an explicit quadrature_resolution"
            )
        c1, v1 = c2, v2
        c2, v2 = _grid_pass(kernel, 2 * n, targets)
        cur = 2.0 * c2 - c1
        # extrapolated sequence decays ~n^-3, so the final error is at
        # most ~1/7 of the last successive difference
        if abs(cur - prev) < 3.0 * tol:
            return cur, 2.0 * v2 - v1, 2 * n
        prev = cur


def chi_and_p01(kernel: Kernel, quadrature_resolution: int | None = None
                ) -> tuple[float, float]:
    """Expected coincidence count chi and pair escape probability 1/chi."""
    chi, _, _ = _green_richardson(kernel, ((0,) * kernel.d,), quadrature_resolution)
    return chi, 1.0 / chi


def green_function(kernel: Kernel, points: Sequence[Sequence[int]],
                   quadrature_resolution: int | None = None) -> np.ndarray:
    """Expected coincidences of two independent walkers started x apart."""
    targets = tuple(_as_vec(x) for x in points)
    _, vals, _ = _green_richardson(kernel, targets, quadrature_resolution)
    return vals


def escape_exact(kernel: Kernel, x: Sequence[int],
                 quadrature_resolution: int | None = None) -> float:
    """P(two walkers started x apart never meet) = 1 - G(x)/G(0)."""
    vec = _as_vec(x)
    if all(c == 0 for c in vec):
        return 0.0
    targets = ((0,) * kernel.d, vec)
    _, vals, _ = _green_richardson(kernel, targets, quadrature_resolution)
    return 1.0 - vals[1] / vals[0]


def _convolve(a: dict, b: dict) -> dict:
    out: dict[tuple[int, ...], float] = {}
    for va, pa in a.items():
        for vb, pb in b.items():
            key = tuple(x + y for x, y in zip(va, vb))
            out[key] = out.get(key, 0.0) + pa * pb
    return out


def _escape_moments(kernel: Kernel, resolution: int | None = None):
    """Mean escape probability after 1, 2 and 3 kernel draws, plus the
    cross-pair version (two walkers one draw each from a common origin)."""
    p1 = kernel.as_dict()
    p2 = _convolve(p1, p1)
    p3 = _convolve(p2, p1)
    cross = _convolve(p1, {tuple(-c for c in v): p for v, p in p1.items()})
    support = set(p1) | set(p2) | set(p3) | set(cross)
    support.discard((0,) * kernel.d)
    targets = ((0,) * kernel.d,) + tuple(sorted(support))
    _, vals, _ = _green_richardson(kernel, targets, resolution)
    g = dict(zip(targets, vals))
    g0 = g[(0,) * kernel.d]

    def avg(dist):
        # mass on the origin contributes escape probability 0
        return sum(p * (1.0 - g[v] / g0) for v, p in dist.items() if any(v))

    return avg(p1), avg(p2), avg(p3), avg(cross)


# ---------------------------------------------------------------------------
# Monte Carlo route


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo estimate with a 95% Wald half-width."""

    value: float
    halfwidth: float
    samples: int
    horizon: int

    def interval(self) -> tuple[float, float]:
        return self.value - self.halfwidth, self.value + self.halfwidth

    @property
    def bias_allowance(self) -> float:
        return BIAS_COEFFICIENT / math.sqrt(self.horizon)


@dataclass(frozen=True)
class PartitionEstimate:
    """Coalescence-class probabilities of one triple-walker run."""

    update: UpdateRule
    apart: Estimate
    pair12: Estimate
    pair13: Estimate
    pair23: Estimate
    all_together: Estimate
    seed: int = 0

    def classes(self) -> dict[str, Estimate]:
        return {"apart": self.apart, "12": self.pair12, "13": self.pair13,
                "23": self.pair23, "all": self.all_together}


def _wald(count: int, n: int, horizon: int) -> Estimate:
    v = count / n
    hw = 1.96 * math.sqrt(max(v * (1.0 - v), 1.0 / n) / n)
    return Estimate(v, hw, n, horizon)


def _packed_ok(kernel: Kernel, horizon: int, extra_draws: int = 3) -> bool:
    return kernel.d <= 3 and (horizon + extra_draws) * kernel.step_range < _LANE_LIMIT


@lru_cache(maxsize=32)
def _tables(kernel: Kernel):
    offs, probs = kernel.arrays()
    k = len(probs)
    thresh, alias = _alias_tables(probs)
    thresh3, alias3 = _alias_tables(np.tile(probs, 3) / 3.0)
    packed = None
    if kernel.d <= 3:
        steps = np.zeros(k, np.int64)
        for i in range(k):
            s = 0
            for j in range(kernel.d):
                s += int(offs[i, j]) << (21 * j)
            steps[i] = np.int64(s)
        d12 = np.concatenate([-steps, steps, np.zeros(k, np.int64)])
        d13 = np.concatenate([-steps, np.zeros(k, np.int64), steps])
        packed = (steps, d12, d13)
    return offs, thresh, alias, thresh3, alias3, packed


def _alias_tables(probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Vose construction; thresholds quantized to 32 bits
    k = len(probs)
    scaled = np.asarray(probs, dtype=np.float64) * k
    thresh = np.full(k, np.uint64(1) << np.uint64(32), dtype=np.uint64)
    alias = np.arange(k, dtype=np.int64)
    small = [i for i in range(k) if scaled[i] < 1.0]
    large = [i for i in range(k) if scaled[i] >= 1.0]
    while small and large:
        s = small.pop()
        g = large.pop()
        thresh[s] = np.uint64(min(round(scaled[s] * 2.0**32), 2**32))
        alias[s] = g
        scaled[g] -= 1.0 - scaled[s]
        (small if scaled[g] < 1.0 else large).append(g)
    return thresh, alias


def estimate_pair_escape(kernel: Kernel, samples: int, horizon: int,
                         seed: int = 0, start_draws: int = 1) -> Estimate:
    """P(two walkers never meet within the horizon), walkers started
    ``start_draws`` independent kernel draws apart."""
    if kernel.d < 3:
        raise ConfigError("pair escape is zero in d < 3; nothing to estimate")
    if horizon < 1 or samples < 100:
        raise ConfigError("need horizon >= 1 and samples >= 100")
    if start_draws < 0:
        raise ConfigError("start_draws must be nonnegative")
    offs, thresh, alias, _, _, packed = _tables(kernel)
    if packed is not None and _packed_ok(kernel, horizon, start_draws):
        esc = _walks.pair_escape_packed(np.uint64(seed), samples, horizon,
                                        packed[0], thresh, alias, start_draws)
    else:
        esc = _walks.pair_escape_generic(np.uint64(seed), samples, horizon,
                                         offs, thresh, alias, start_draws)
    return _wald(int(esc), samples, horizon)


def triple_partition(kernel: Kernel, update: UpdateRule | str, samples: int,
                     horizon: int, seed: int = 0) -> PartitionEstimate:
    """Full five-class partition for one triple-walker configuration."""
    rule = UpdateRule.parse(update)
    if kernel.d < 3:
        raise ConfigError("triple coalescence classes degenerate in d < 3")
    if horizon < 1 or samples < 100:
        raise ConfigError("need horizon >= 1 and samples >= 100")
    mode = 0 if rule is UpdateRule.BIRTH_DEATH else 1
    offs, thresh, alias, thresh3, alias3, packed = _tables(kernel)
    if packed is not None and _packed_ok(kernel, horizon):
        counts = _walks.triple_classes_packed(
            np.uint64(seed), samples, horizon, packed[0], thresh, alias,
            packed[1], packed[2], thresh3, alias3, mode)
    else:
        counts = _walks.triple_classes_generic(
            np.uint64(seed), samples, horizon, offs, thresh, alias,
            thresh3, alias3, mode)
    est = [_wald(int(c), samples, horizon) for c in counts]
    return PartitionEstimate(rule, est[0], est[1], est[2], est[3], est[4], seed)


def estimate_triple_bd(kernel: Kernel, samples: int, horizon: int,
                       seed: int = 0) -> tuple[Estimate, Estimate]:
    """(p1, p2): all-apart and {23}-class probabilities, walkers started
    at 0, v1, v1+v2."""
    part = triple_partition(kernel, UpdateRule.BIRTH_DEATH, samples, horizon, seed)
    return part.apart, part.pair23


def estimate_triple_db(kernel: Kernel, samples: int, horizon: int,
                       seed: int = 0) -> tuple[Estimate, Estimate]:
    """(pbar1, pbar2): all-apart and {23}-class probabilities, walkers
    started at v1, v2, v2+v3."""
    part = triple_partition(kernel, UpdateRule.DEATH_BIRTH, samples, horizon, seed)
    return part.apart, part.pair23


def constants_from_estimates(kernel: Kernel, bd: PartitionEstimate,
                             db: PartitionEstimate) -> CoalescenceConstants:
    """Bundle MC partition estimates into the constants record used by
    the game-transform layer (kappa and p01 from the analytic route)."""
    k = kappa(kernel)
    _, p01 = chi_and_p01(kernel)
    hw = {
        "p1": bd.apart.halfwidth + bd.apart.bias_allowance,
        "p2": bd.pair23.halfwidth + bd.pair23.bias_allowance,
        "pbar1": db.apart.halfwidth + db.apart.bias_allowance,
        "pbar2": db.pair23.halfwidth + db.pair23.bias_allowance,
    }
    return CoalescenceConstants(
        kappa=k, p01=p01,
        p1=bd.apart.value, p2=bd.pair23.value,
        pbar1=db.apart.value, pbar2=db.pair23.value,
        halfwidths=hw,
    )


# ---------------------------------------------------------------------------
# identity suite


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    lhs: float
    rhs: float
    tol: float
    mode: str  # "analytic" | "constants" | "mc"
    kind: str = "equal"  # or "greater"

    @property
    def residual(self) -> float:
        return self.lhs - self.rhs

    @property
    def passed(self) -> bool:
        if self.kind == "greater":
            return self.residual > self.tol
        return abs(self.residual) <= self.tol

    def line(self) -> str:
        mark = "pass" if self.passed else "FAIL"
        rel = ">" if self.kind == "greater" else "vs"
        return (f"[{mark}] {self.name}: {self.lhs:.8f} {rel} {self.rhs:.8f}"
                f"  (residual {self.residual:+.3e}, tol {self.tol:.3e}, {self.mode})")


@dataclass(frozen=True)
class IdentityReport:
    checks: tuple[IdentityCheck, ...]

    @property
    def all_pass(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failed(self) -> tuple[IdentityCheck, ...]:
        return tuple(c for c in self.checks if not c.passed)

    def __str__(self) -> str:
        return "\n".join(c.line() for c in self.checks)


def _mc_tol(estimates: Sequence[tuple[float, Estimate]], sigma: float,
            extra_hw: float = 0.0) -> float:
    stat = sum(abs(c) * e.halfwidth for c, e in estimates) + extra_hw
    bias = sum(abs(c) * e.bias_allowance for c, e in estimates)
    return sigma / 1.96 * stat + bias


def check_identities(constants: CoalescenceConstants | None = None, *,
                     kernel: Kernel | None = None,
                     bd: PartitionEstimate | None = None,
                     db: PartitionEstimate | None = None,
                     atol: float = 1e-10, sigma: float = 3.0,
                     quadrature_resolution: int | None = None) -> IdentityReport:
    """Cross-check every exact relation the inputs can express.

    Analytic rows (needs ``kernel``) must hold to ``atol``; rows built
    from MC partitions are tested at ``sigma`` combined half-widths plus
    the horizon-bias allowance.  ``constants`` rows use its recorded
    half-widths when present, otherwise ``atol``.
    """
    if constants is None and kernel is None and bd is None and db is None:
        raise ConfigError("nothing to check")
    if (bd is not None or db is not None) and kernel is None:
        raise ConfigError("MC partition checks need the kernel for analytic references")
    rows: list[IdentityCheck] = []

    if kernel is not None:
        e1, e2, e3, ex = _escape_moments(kernel, quadrature_resolution)
        kap = kappa(kernel)
        rows += [
            IdentityCheck("pair escape, one draw vs two", e1, e2, atol, "analytic"),
            IdentityCheck("pair escape, cross pair vs two draws", ex, e2, atol, "analytic"),
            IdentityCheck("pair escape, three draws vs (1+1/kappa) x one",
                          e3, (1.0 + 1.0 / kap) * e1, atol, "analytic"),
        ]

    if constants is not None:
        c = constants
        slack = c._slack("p1", "p2", "p01") if c.halfwidths else atol
        rows.append(IdentityCheck("constants: 2 p2 + p1 = p01",
                                  2.0 * c.p2 + c.p1, c.p01, slack, "constants"))
        slack = c._slack("pbar1", "pbar2", "p01") if c.halfwidths else atol
        rows.append(IdentityCheck("constants: 2 pbar2 + pbar1 = p01 (1+1/kappa)",
                                  2.0 * c.pbar2 + c.pbar1,
                                  c.p01 * (1.0 + 1.0 / c.kappa), slack, "constants"))
        slack = c._slack("pbar2", "p01") if c.halfwidths else 0.0
        rows.append(IdentityCheck("constants: pbar2 - p01/kappa positive",
                                  c.pbar2, c.p01 / c.kappa, slack,
                                  "constants", kind="greater"))

    if bd is not None:
        p01 = 1.0 / _green_richardson(
            kernel, ((0,) * kernel.d,), quadrature_resolution)[0]
        a, c12, c13, c23 = bd.apart, bd.pair12, bd.pair13, bd.pair23
        rows += [
            IdentityCheck("bd: walkers 1,2 never meet = p01",
                          a.value + c13.value + c23.value, p01,
                          _mc_tol([(1, a), (1, c13), (1, c23)], sigma), "mc"),
            IdentityCheck("bd: walkers 2,3 never meet = p01",
                          a.value + c12.value + c13.value, p01,
                          _mc_tol([(1, a), (1, c12), (1, c13)], sigma), "mc"),
            IdentityCheck("bd: walkers 1,3 never meet = p01",
                          a.value + c12.value + c23.value, p01,
                          _mc_tol([(1, a), (1, c12), (1, c23)], sigma), "mc"),
            IdentityCheck("bd: class {12} = class {13}", c12.value, c13.value,
                          _mc_tol([(1, c12), (1, c13)], sigma), "mc"),
            IdentityCheck("bd: class {12} = class {23}", c12.value, c23.value,
                          _mc_tol([(1, c12), (1, c23)], sigma), "mc"),
            IdentityCheck("bd: 2 x {23} + apart = p01",
                          2.0 * c23.value + a.value, p01,
                          _mc_tol([(2, c23), (1, a)], sigma), "mc"),
        ]

    if db is not None:
        kap = kappa(kernel)
        p01 = 1.0 / _green_richardson(
            kernel, ((0,) * kernel.d,), quadrature_resolution)[0]
        a, c12, c13, c23 = db.apart, db.pair12, db.pair13, db.pair23
        rows += [
            IdentityCheck("db: walkers 1,2 never meet = p01",
                          a.value + c13.value + c23.value, p01,
                          _mc_tol([(1, a), (1, c13), (1, c23)], sigma), "mc"),
            IdentityCheck("db: walkers 2,3 never meet = p01",
                          a.value + c12.value + c13.value, p01,
                          _mc_tol([(1, a), (1, c12), (1, c13)], sigma), "mc"),
            IdentityCheck("db: walkers 1,3 never meet = p01 (1+1/kappa)",
                          a.value + c12.value + c23.value,
                          p01 * (1.0 + 1.0 / kap),
                          _mc_tol([(1, a), (1, c12), (1, c23)], sigma), "mc"),
            IdentityCheck("db: class {12} = class {23}", c12.value, c23.value,
                          _mc_tol([(1, c12), (1, c23)], sigma), "mc"),
            IdentityCheck("db: class {12} = class {13} + p01/kappa",
                          c12.value, c13.value + p01 / kap,
                          _mc_tol([(1, c12), (1, c13)], sigma), "mc"),
            IdentityCheck("db: 2 x {23} + apart = p01 (1+1/kappa)",
                          2.0 * c23.value + a.value, p01 * (1.0 + 1.0 / kap),
                          _mc_tol([(2, c23), (1, a)], sigma), "mc"),
            IdentityCheck("db: class {13} positive", c13.value, 0.0,
                          sigma / 1.96 * c13.halfwidth, "mc", kind="greater"),
        ]

    return IdentityReport(tuple(rows))


def run_identity_suite(kernel: Kernel, samples: int = 400_000,
                       horizon: int = 100_000, seed: int = 0,
                       ) -> tuple[IdentityReport, PartitionEstimate, PartitionEstimate]:
    """Fresh triple-partition runs for both updates plus the full report."""
    bd = triple_partition(kernel, UpdateRule.BIRTH_DEATH, samples, horizon, seed)
    db = triple_partition(kernel, UpdateRule.DEATH_BIRTH, samples, horizon, seed + 1)
    report = check_identities(kernel=kernel, bd=bd, db=db)
    return report, bd, db
