"""Brute-force discrete-time cross-check of the equilibrium.

A period-Delta approximation on a uniform logit grid with a two-point
signal: each period the standardized innovation is +-1 with equal odds
and the belief jumps by the conjecture-implied step, interpolated
linearly where it lands. The grid is much finer than the jump size
(dz ~ psi * Delta, well under the psi * sqrt(Delta) jump scale): spacing
at the jump scale itself would let the interpolation curvature error act
like artificial signal noise that never vanishes with Delta.

The fixed point alternates three blocks until the conjectured mimicking
profile stops moving:

  1. agent value iteration over the endpoint actions, given the
     conjecture and the stopping rule (the period objective is linear in
     the action, so endpoint evaluation is exact);
  2. principal policy iteration on the stopping indicator;
  3. a conjecture update toward the pointwise indifference root: at each
     state, the mimicking probability at which the agent is exactly
     indifferent between the endpoint actions given the current value
     function. Full mimicking freezes the belief and destroys its own
     benefit, so the root is interior wherever mixing is sustainable.

Cells near the mixing boundary cannot satisfy the indifference exactly
(the true support edge falls between grid nodes), so their targets keep
flipping by O(slope * dz) under any fixed damping and a pointwise
residual test can never pass. The loop instead runs an approach phase at
the nominal damping, then a polish phase at a smaller weight whose
trailing rounds are averaged; the zero-mean flip noise cancels in the
average, and the returned objects are re-solved once under the averaged
conjecture. Genuinely convergent cases (for instance the fully
separating regime) exit early on the movement test.

This solver shares nothing with the closed-form machinery beyond the
model primitives; it exists to validate the other modules end to end.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._numba import NUMBA_ENABLED, njit
from .model import GameParams, inv_logit, termination_payoff


class OscillationError(RuntimeError):
    """The damped conjecture iteration failed to settle."""


@dataclass(frozen=True)
class DiscreteGame:
    """Discretization controls for the period game."""

    delta: float = 1e-3          # period length
    z_max: float = 10.0          # grid half-width in logit units
    dz_per_delta: float = 1.0    # grid spacing as a multiple of psi * delta
    damping: float = 0.5         # conjecture step weight in the approach phase
    polish_damping: float = 0.12
    approach_rounds: int = 40
    polish_rounds: int = 200
    avg_window: int = 100        # trailing rounds averaged into the final conjecture
    tol_inner: float = 1e-8      # sup-norm stop for both value loops
    tol_outer: float = 1e-5      # early-exit test on the conjecture movement
    max_outer: int = 500
    vi_maxit: int = 400_000
    a_cap: float = 1.0 - 1e-6
    root_iters: int = 48         # bisection depth for the indifference root

    def __post_init__(self):
        if self.delta <= 0.0 or self.z_max <= 0.0:
            raise ValueError("delta and z_max must be positive")


@dataclass(frozen=True)
class DiscreteEquilibrium:
    p_star: float
    z_grid: np.ndarray
    p_grid: np.ndarray
    a: np.ndarray
    v: np.ndarray
    w: np.ndarray
    outer_iters: int
    outer_residual: float        # undamped sup |target - conjecture| at exit


def _gather_weights(zq, z0, dz, n):
    """(index, fraction) of each query under linear interpolation, edge-clamped."""
    pos = (zq - z0) / dz
    pos = np.clip(pos, 0.0, n - 1.0)
    idx = np.minimum(pos.astype(np.int64), n - 2)
    frac = pos - idx
    return idx, frac


def _py_vi_agent(v, iu0, fu0, id0, fd0, iu1, fu1, id1, fd1,
                 surv, flow0, flow1, g1, tol, maxit):
    n = v.size
    vn = np.empty(n)
    for it in range(maxit):
        diff = 0.0
        for i in range(n):
            ev0 = 0.5 * ((v[iu0[i]] * (1.0 - fu0[i]) + v[iu0[i] + 1] * fu0[i])
                         + (v[id0[i]] * (1.0 - fd0[i]) + v[id0[i] + 1] * fd0[i]))
            ev1 = 0.5 * ((v[iu1[i]] * (1.0 - fu1[i]) + v[iu1[i] + 1] * fu1[i])
                         + (v[id1[i]] * (1.0 - fd1[i]) + v[id1[i] + 1] * fd1[i]))
            v0 = flow0 + g1 * surv[i] * ev0
            v1 = flow1 + g1 * surv[i] * ev1
            nv = v0 if v0 > v1 else v1
            d = abs(nv - v[i])
            if d > diff:
                diff = d
            vn[i] = nv
        v[:] = vn
        if diff < tol:
            return it + 1
    return -maxit


def _py_eval_principal(w, iu, fu, idn, fd, stop_prob, reward, g2, tol, maxit):
    n = w.size
    wn = np.empty(n)
    for it in range(maxit):
        diff = 0.0
        for i in range(n):
            ev = 0.5 * ((w[iu[i]] * (1.0 - fu[i]) + w[iu[i] + 1] * fu[i])
                        + (w[idn[i]] * (1.0 - fd[i]) + w[idn[i] + 1] * fd[i]))
            nv = stop_prob[i] * reward[i] + (1.0 - stop_prob[i]) * (g2 * ev)
            d = abs(nv - w[i])
            if d > diff:
                diff = d
            wn[i] = nv
        w[:] = wn
        if diff < tol:
            return it + 1
    return -maxit


if NUMBA_ENABLED:
    _vi_agent = njit(cache=True)(_py_vi_agent)
    _eval_principal = njit(cache=True)(_py_eval_principal)
else:
    def _vi_agent(v, iu0, fu0, id0, fd0, iu1, fu1, id1, fd1,
                  surv, flow0, flow1, g1, tol, maxit):
        for it in range(maxit):
            ev0 = 0.5 * ((v[iu0] * (1.0 - fu0) + v[iu0 + 1] * fu0)
                         + (v[id0] * (1.0 - fd0) + v[id0 + 1] * fd0))
            ev1 = 0.5 * ((v[iu1] * (1.0 - fu1) + v[iu1 + 1] * fu1)
                         + (v[id1] * (1.0 - fd1) + v[id1 + 1] * fd1))
            vn = np.maximum(flow0 + g1 * surv * ev0, flow1 + g1 * surv * ev1)
            diff = np.max(np.abs(vn - v))
            v[:] = vn
            if diff < tol:
                return it + 1
        return -maxit

    def _eval_principal(w, iu, fu, idn, fd, stop_prob, reward, g2, tol, maxit):
        for it in range(maxit):
            ev = 0.5 * ((w[iu] * (1.0 - fu) + w[iu + 1] * fu)
                        + (w[idn] * (1.0 - fd) + w[idn + 1] * fd))
            wn = stop_prob * reward + (1.0 - stop_prob) * (g2 * ev)
            diff = np.max(np.abs(wn - w))
            w[:] = wn
            if diff < tol:
                return it + 1
        return -maxit


def _cutoff_from_w(z, reward, w):
    f = reward - w
    pos = np.nonzero(f > 0.0)[0]
    if pos.size == 0:
        return z[-1]
    i = pos[0]
    if i == 0:
        return z[0]
    t = f[i - 1] / (f[i - 1] - f[i])
    return z[i - 1] + t * (z[i] - z[i - 1])


class _AgentStage:
    """Transitions and indifference roots for one parameter set."""

    def __init__(self, params: GameParams, dg: DiscreteGame, z, dz):
        self.z = z
        self.dz = dz
        self.n = z.size
        self.psi = params.psi
        self.delta = dg.delta
        self.sd = params.psi * math.sqrt(dg.delta)
        self.g1 = math.exp(-params.r1 * dg.delta)
        self.flow0 = (1.0 - self.g1) * (params.u + params.c)
        self.flow1 = (1.0 - self.g1) * params.u
        self.cost = (1.0 - self.g1) * params.c
        self.cap = dg.a_cap
        self.root_iters = dg.root_iters

    def _targets(self, a_hat):
        one_m = 1.0 - a_hat
        z, psi, delta, sd = self.z, self.psi, self.delta, self.sd
        drift0 = psi**2 * one_m * (1.0 - 0.5 * one_m) * delta
        drift1 = psi**2 * one_m * (-0.5 * one_m) * delta
        return (z + drift0 + sd * one_m, z + drift0 - sd * one_m,
                z + drift1 + sd * one_m, z + drift1 - sd * one_m)

    def value_iterate(self, v, a_hat, surv, tol, maxit):
        t0u, t0d, t1u, t1d = self._targets(a_hat)
        iu0, fu0 = _gather_weights(t0u, self.z[0], self.dz, self.n)
        id0, fd0 = _gather_weights(t0d, self.z[0], self.dz, self.n)
        iu1, fu1 = _gather_weights(t1u, self.z[0], self.dz, self.n)
        id1, fd1 = _gather_weights(t1d, self.z[0], self.dz, self.n)
        return _vi_agent(v, iu0, fu0, id0, fd0, iu1, fu1, id1, fd1,
                         surv, self.flow0, self.flow1, self.g1, tol, maxit)

    def _interp(self, v, zq):
        i, f = _gather_weights(zq, self.z[0], self.dz, self.n)
        return v[i] * (1.0 - f) + v[i + 1] * f

    def _mimic_gain(self, v, surv, a):
        """Period gain from mimicking minus its cost, when conjectured at a."""
        t0u, t0d, t1u, t1d = self._targets(a)
        e0 = 0.5 * (self._interp(v, t0u) + self._interp(v, t0d))
        e1 = 0.5 * (self._interp(v, t1u) + self._interp(v, t1d))
        return -self.cost + self.g1 * surv * (e1 - e0)

    def indifference_root(self, v, surv):
        """Conjecture making the agent indifferent, zero where unsustainable."""
        lo = np.zeros(self.n)
        hi = np.full(self.n, self.cap)
        active = self._mimic_gain(v, surv, lo) > 0.0
        for _ in range(self.root_iters):
            mid = 0.5 * (lo + hi)
            up = self._mimic_gain(v, surv, mid) > 0.0
            lo = np.where(up, mid, lo)
            hi = np.where(up, hi, mid)
        root = 0.5 * (lo + hi)
        return np.where(active, root, 0.0)


def discrete_equilibrium(params: GameParams, dg: DiscreteGame = DiscreteGame(),
                         init_a: np.ndarray | None = None) -> DiscreteEquilibrium:
    """Fixed point of the period game; independent of the closed form.

    Raises OscillationError if the round budget is exhausted or the
    conjecture is still moving wholesale when the phases end.
    """
    r2, lam, psi = params.r2, params.lam, params.psi
    delta = dg.delta
    dz = min(psi * delta * dg.dz_per_delta, psi * math.sqrt(delta))
    half = int(math.ceil(dg.z_max / dz))
    n = 2 * half + 1
    z = (np.arange(n) - half) * dz
    p = inv_logit(z)
    reward = termination_payoff(p, params)

    p_arrive = -math.expm1(-lam * delta)
    if not p_arrive < 0.5:
        raise ValueError("delta too coarse: arrival probability must stay below 0.5")
    g2 = math.exp(-r2 * delta)
    sd = psi * math.sqrt(delta)
    stage = _AgentStage(params, dg, z, dz)

    a_hat = np.zeros(n) if init_a is None else np.clip(
        np.asarray(init_a, float).copy(), 0.0, dg.a_cap)
    v = np.zeros(n)
    w = np.zeros(n)
    b = reward > 0.0
    acc = np.zeros(n)
    n_acc = 0

    def principal_round(a_used):
        nonlocal b
        one_m = 1.0 - a_used
        driftw = psi**2 * one_m**2 * (p - 0.5) * delta
        iuw, fuw = _gather_weights(z + driftw + sd * one_m, z[0], dz, n)
        idw, fdw = _gather_weights(z + driftw - sd * one_m, z[0], dz, n)
        for _ in range(100):
            stop_prob = p_arrive * b.astype(float)
            it_w = _eval_principal(w, iuw, fuw, idw, fdw, stop_prob, reward,
                                   g2, dg.tol_inner, dg.vi_maxit)
            if it_w < 0:
                raise OscillationError("principal value evaluation exhausted its budget")
            b_new = reward > w
            if np.array_equal(b_new, b):
                return
            b = b_new
        raise OscillationError("stopping-policy iteration did not settle")

    total_rounds = dg.approach_rounds + dg.polish_rounds
    if total_rounds > dg.max_outer:
        raise ValueError("approach_rounds + polish_rounds exceeds max_outer")
    outer_res = math.inf
    outer = 0
    settled = False
    for outer in range(1, total_rounds + 1):
        surv = 1.0 - p_arrive * b.astype(float)
        it_a = stage.value_iterate(v, a_hat, surv, dg.tol_inner, dg.vi_maxit)
        if it_a < 0:
            raise OscillationError("agent value iteration exhausted its sweep budget")
        principal_round(a_hat)
        surv = 1.0 - p_arrive * b.astype(float)
        target = stage.indifference_root(v, surv)
        step = target - a_hat
        outer_res = float(np.max(np.abs(step)))
        wgt = dg.damping if outer <= dg.approach_rounds else dg.polish_damping
        a_hat = np.clip(a_hat + wgt * step, 0.0, dg.a_cap)
        if outer > total_rounds - dg.avg_window:
            acc += a_hat
            n_acc += 1
        if outer_res < dg.tol_outer:
            settled = True
            break

    if not settled:
        if outer_res > 0.5:
            raise OscillationError(
                f"conjecture loop still moving wholesale after {outer} rounds; "
                f"residual {outer_res:.2e}")
        if n_acc > 0:
            a_hat = acc / n_acc

    # final consistency pass: re-solve both values under the final conjecture
    # until the stopping mask stops moving, so the returned objects cohere
    for _ in range(25):
        surv = 1.0 - p_arrive * b.astype(float)
        it_a = stage.value_iterate(v, a_hat, surv, dg.tol_inner, dg.vi_maxit)
        if it_a < 0:
            raise OscillationError("agent value iteration exhausted its sweep budget")
        b_before = b.copy()
        principal_round(a_hat)
        if np.array_equal(b, b_before):
            break
    else:
        raise OscillationError("final stopping mask failed to stabilize")

    z_cut = _cutoff_from_w(z, reward, w)
    return DiscreteEquilibrium(p_star=float(inv_logit(z_cut)), z_grid=z, p_grid=p,
                               a=a_hat, v=v.copy(), w=w.copy(),
                               outer_iters=outer, outer_residual=outer_res)
