"""Monte Carlo validation of the equilibrium objects.

Simulates the belief process in logit coordinates under each agent type,
with termination opportunities at exact exponential arrival times. The
noninvestible type drifts up at +psi^2 (1-a)^2 / 2, the investible type
down at the mirror rate, both diffusing at psi (1-a). Type-conditioned
runs combine into unconditional estimates with prior weights.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _simkernels
from ._numba import NUMBA_ENABLED
from .agent import eval_agent
from .model import GameParams, Numerics, inv_logit, logit
from .principal import Equilibrium

TYPE_NONINVESTIBLE = "NI"
TYPE_INVESTIBLE = "I"

_TAG_NI, _TAG_I, _TAG_DIAG = 0, 1, 2


@dataclass(frozen=True)
class SimConfig:
    """Simulation controls. dt and horizon default from the model scales."""

    p0: float = 0.3
    n_paths: int = 100_000
    seed: int = 12345
    dt: float | None = None          # must satisfy dt <= 0.01 / max(1, psi^2)
    horizon: float | None = None     # defaults to 20 / min(r1, r2)
    z_cap: float = 12.0
    t_probe: float = 1.0
    batch: int = 4096
    band_refine: int = 4             # step shrink factor inside the mixing band

    def resolve(self, params: GameParams) -> "SimConfig":
        dt = self.dt if self.dt is not None else 0.01 / max(1.0, params.psi**2)
        horizon = self.horizon if self.horizon is not None else 20.0 / min(params.r1, params.r2)
        cfg = replace(self, dt=dt, horizon=horizon)
        cfg.validate(params)
        return cfg

    def validate(self, params: GameParams):
        if not (0.0 < self.p0 < 1.0):
            raise ValueError("p0 must lie in (0, 1)")
        if self.dt is None or self.horizon is None:
            raise ValueError("dt and horizon unresolved; call resolve(params)")
        if self.dt > 0.01 / max(1.0, params.psi**2) * (1.0 + 1e-12):
            raise ValueError("dt too coarse: need dt <= 0.01 / max(1, psi^2)")
        if self.z_cap < 12.0:
            raise ValueError("z_cap must be at least 12")
        if self.n_paths < 1:
            raise ValueError("n_paths must be positive")


@dataclass(frozen=True)
class PathRecord:
    """Outcome of one simulated path."""

    stop_time: float
    stopped: bool
    agent_payoff: float      # NaN for investible-type paths
    disc_r1: float           # e^{-r1 T}
    disc_r2: float           # e^{-r2 T}
    p_probe: float           # belief at the probe time (frozen after stopping)


@dataclass(frozen=True)
class SimReport:
    """Monte Carlo means and standard errors for one equilibrium."""

    n_paths: int
    seed: int
    p0: float
    agent_value_mean: float
    agent_value_se: float
    principal_value_mean: float
    principal_value_se: float
    disc_r1_ni_mean: float
    disc_r1_ni_se: float
    disc_r2_ni_mean: float
    disc_r2_ni_se: float
    disc_r1_i_mean: float
    disc_r1_i_se: float
    disc_r2_i_mean: float
    disc_r2_i_se: float
    martingale_gap: float
    martingale_se: float
    low_mimic_mean: float
    low_mimic_se: float
    censored_frac_ni: float
    censored_frac_i: float
    lane: str


@dataclass(frozen=True)
class MartingaleResult:
    gap: float
    se: float
    mixture_mean: float


@dataclass(frozen=True)
class LearningDiagnostic:
    """Discounted time spent at low mimicking before leaving a belief interval."""

    value: float
    se: float
    mean_disc_exit: float    # E[e^{-r1 T}] at the interval exit time
    exited_frac: float


def _policy_table(eq: Equilibrium, cfg: SimConfig, num: Numerics):
    n = 2 * int(round(cfg.z_cap / num.z_table_step)) + 1
    z_tab = np.linspace(-cfg.z_cap, cfg.z_cap, n)
    a_tab, _ = eval_agent(eq.agent, z_tab)
    inv_dz = (n - 1) / (2.0 * cfg.z_cap)
    return np.ascontiguousarray(a_tab), -cfg.z_cap, inv_dz


def _se(x):
    return float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else math.nan


def _run_type(eq: Equilibrium, cfg: SimConfig, agent_type: str,
              num: Numerics, force_numpy=False, n_paths=None, path_offset=0):
    p = eq.params
    a_tab, z_lo, inv_dz = _policy_table(eq, cfg, num)
    sign = 1.0 if agent_type == TYPE_NONINVESTIBLE else -1.0
    tag = _TAG_NI if agent_type == TYPE_NONINVESTIBLE else _TAG_I
    n = cfg.n_paths if n_paths is None else n_paths
    if eq.agent.regime == "hump-shaped":
        band_lo, band_hi = eq.agent.z_L - 0.3, eq.agent.z_R + 0.3
        dt_band = cfg.dt / max(1, cfg.band_refine)
    else:
        band_lo, band_hi, dt_band = np.inf, -np.inf, cfg.dt
    return _simkernels.run_main(
        z0=logit(cfg.p0), z_star=eq.agent.z_star, drift_sign=sign, psi=p.psi,
        r1=p.r1, r2=p.r2, u=p.u, c=p.c, lam=p.lam, dt=cfg.dt, horizon=cfg.horizon,
        z_cap=cfg.z_cap, t_probe=cfg.t_probe, a_tab=a_tab, z_lo=z_lo,
        inv_dz=inv_dz, n_paths=n, seed=cfg.seed, tag=tag, batch=cfg.batch,
        force_numpy=force_numpy, path_offset=path_offset,
        dt_band=dt_band, band_lo=band_lo, band_hi=band_hi)


def simulate_path(eq: Equilibrium, agent_type: str, cfg: SimConfig,
                  path_index: int = 0, num: Numerics = Numerics()) -> PathRecord:
    """Run the single path identified by path_index and return its record."""
    if agent_type not in (TYPE_NONINVESTIBLE, TYPE_INVESTIBLE):
        raise ValueError("agent_type must be 'NI' or 'I'")
    cfg = cfg.resolve(eq.params)
    rec = _run_type(eq, cfg, agent_type, num, n_paths=1, path_offset=path_index)
    t, stopped, pay, d1, d2, zpr = rec[0]
    return PathRecord(stop_time=float(t), stopped=bool(stopped),
                      agent_payoff=float(pay) if agent_type == TYPE_NONINVESTIBLE else math.nan,
                      disc_r1=float(d1), disc_r2=float(d2), p_probe=float(inv_logit(zpr)))


def estimate_values(eq: Equilibrium, cfg: SimConfig, num: Numerics = Numerics(),
                    eps: float = 0.1, interval=(0.05, 0.95),
                    force_numpy: bool | None = None,
                    with_diagnostic: bool = True) -> SimReport:
    """Aggregate type-conditioned runs into payoff and diagnostic estimates.

    The agent estimate is the mean discounted flow payoff of the
    noninvestible type; the principal estimate weights the two
    type-conditioned lump-sum estimates by the prior p0. Draws come from
    per-path streams keyed by (seed, run, path), so reports are
    reproducible bit for bit under a fixed lane.
    """
    cfg = cfg.resolve(eq.params)
    fnp = (not NUMBA_ENABLED) if force_numpy is None else force_numpy
    p = eq.params
    res_ni = _run_type(eq, cfg, TYPE_NONINVESTIBLE, num, force_numpy=fnp)
    res_i = _run_type(eq, cfg, TYPE_INVESTIBLE, num, force_numpy=fnp)

    pay_ni = res_ni[:, 2]
    lump_ni = np.where(res_ni[:, 1] > 0.0, res_ni[:, 4] * p.w_NI, 0.0)
    lump_i = np.where(res_i[:, 1] > 0.0, res_i[:, 4] * p.w_I, 0.0)
    w1, w2 = cfg.p0, 1.0 - cfg.p0
    principal_mean = w1 * float(np.mean(lump_ni)) + w2 * float(np.mean(lump_i))
    principal_se = math.sqrt((w1 * _se(lump_ni)) ** 2 + (w2 * _se(lump_i)) ** 2)

    p_probe_ni = inv_logit(res_ni[:, 5])
    p_probe_i = inv_logit(res_i[:, 5])
    mix_mean = w1 * float(np.mean(p_probe_ni)) + w2 * float(np.mean(p_probe_i))
    mart_se = math.sqrt((w1 * _se(p_probe_ni)) ** 2 + (w2 * _se(p_probe_i)) ** 2)

    if with_diagnostic:
        diag = learning_diagnostic(eq, cfg, eps=eps, interval=interval, num=num,
                                   force_numpy=fnp)
        low_mean, low_se = diag.value, diag.se
    else:
        low_mean, low_se = math.nan, math.nan

    return SimReport(
        n_paths=cfg.n_paths, seed=cfg.seed, p0=cfg.p0,
        agent_value_mean=float(np.mean(pay_ni)), agent_value_se=_se(pay_ni),
        principal_value_mean=principal_mean, principal_value_se=principal_se,
        disc_r1_ni_mean=float(np.mean(res_ni[:, 3])), disc_r1_ni_se=_se(res_ni[:, 3]),
        disc_r2_ni_mean=float(np.mean(res_ni[:, 4])), disc_r2_ni_se=_se(res_ni[:, 4]),
        disc_r1_i_mean=float(np.mean(res_i[:, 3])), disc_r1_i_se=_se(res_i[:, 3]),
        disc_r2_i_mean=float(np.mean(res_i[:, 4])), disc_r2_i_se=_se(res_i[:, 4]),
        martingale_gap=abs(mix_mean - cfg.p0), martingale_se=mart_se,
        low_mimic_mean=low_mean, low_mimic_se=low_se,
        censored_frac_ni=float(np.mean(res_ni[:, 1] == 0.0)),
        censored_frac_i=float(np.mean(res_i[:, 1] == 0.0)),
        lane="numpy" if fnp else "numba")


def martingale_check(eq: Equilibrium, cfg: SimConfig, t_probe: float,
                     num: Numerics = Numerics(),
                     force_numpy: bool | None = None) -> MartingaleResult:
    """|E[p at (t_probe wedge T)] - p0| under the prior type mixture."""
    cfg = replace(cfg, t_probe=t_probe).resolve(eq.params)
    if cfg.t_probe > cfg.horizon:
        raise ValueError("t_probe beyond the simulation horizon")
    fnp = (not NUMBA_ENABLED) if force_numpy is None else force_numpy
    res_ni = _run_type(eq, cfg, TYPE_NONINVESTIBLE, num, force_numpy=fnp)
    res_i = _run_type(eq, cfg, TYPE_INVESTIBLE, num, force_numpy=fnp)
    w1, w2 = cfg.p0, 1.0 - cfg.p0
    p_ni = inv_logit(res_ni[:, 5])
    p_i = inv_logit(res_i[:, 5])
    mix = w1 * float(np.mean(p_ni)) + w2 * float(np.mean(p_i))
    se = math.sqrt((w1 * _se(p_ni)) ** 2 + (w2 * _se(p_i)) ** 2)
    return MartingaleResult(gap=abs(mix - cfg.p0), se=se, mixture_mean=mix)


def learning_diagnostic(eq: Equilibrium, cfg: SimConfig, eps: float,
                        interval=(0.05, 0.95), num: Numerics = Numerics(),
                        force_numpy: bool | None = None) -> LearningDiagnostic:
    """Mean of r1 * int e^{-r1 t} 1{a(p_t) <= 1-eps} dt up to leaving the interval.

    Runs the noninvestible dynamics without termination: the clock stops
    when the belief leaves (interval[0], interval[1]) or at the horizon.
    """
    if not (0.0 < eps <= 1.0):
        raise ValueError("eps must lie in (0, 1]")
    lo, hi = interval
    if not (0.0 < lo < cfg.p0 < hi < 1.0):
        raise ValueError("interval must strictly contain p0 inside (0, 1)")
    cfg = cfg.resolve(eq.params)
    fnp = (not NUMBA_ENABLED) if force_numpy is None else force_numpy
    p = eq.params
    a_tab, z_lo, inv_dz = _policy_table(eq, cfg, num)
    res = _simkernels.run_diag(
        z0=logit(cfg.p0), z_int_lo=logit(lo), z_int_hi=logit(hi), psi=p.psi,
        r1=p.r1, u=p.u, c=p.c, a_thresh=1.0 - eps, dt=cfg.dt, horizon=cfg.horizon,
        a_tab=a_tab, z_lo=z_lo, inv_dz=inv_dz, n_paths=cfg.n_paths,
        seed=cfg.seed, tag=_TAG_DIAG, batch=cfg.batch, force_numpy=fnp)
    vals = res[:, 3]
    return LearningDiagnostic(value=float(np.mean(vals)), se=_se(vals),
                              mean_disc_exit=float(np.mean(res[:, 2])),
                              exited_frac=float(np.mean(res[:, 1] > 0.0)))
