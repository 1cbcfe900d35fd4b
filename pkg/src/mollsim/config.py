"""Experiment configuration: a single TOML document in, a validated
plan out.

A config names one kernel, one initial law, one horizon, and a sweep
over ensemble sizes (with either an explicit step-size ladder or the
balanced coupling h = N^-(v1+v2)/v3).  Validation is aggregated: every
problem is reported, not just the first.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

try:
    import tomllib
except ModuleNotFoundError:  # 3.10
    import tomli as tomllib

import numpy as np

from . import rates
from .grids import GridSpec
from .initial import GaussianMixture, IsotropicGaussian
from .kernels import (BoundedLipschitzDemo, KellerSegel, RieszGradient,
                      TruncatedRiesz, assumptions_for, zero_kernel)


class ConfigError(ValueError):
    """Carries the full aggregated list of validation failures."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid config:\n  - " + "\n  - ".join(self.problems))


@dataclass(frozen=True)
class MarginalStudy:
    t: float
    p: float
    c: float
    grid: GridSpec
    replicas: int
    particle_index: int = 0
    min_count: int = 20


@dataclass
class ExperimentConfig:
    title: str
    kernel: object
    d: int
    initial_law: object
    T: float
    snapshot_count: int
    sweep_N: tuple
    sweep_h: tuple          # empty in coupled mode
    coupled: bool
    replicas: int
    moments: tuple
    seeds: tuple
    r: object               # norm parameter for the sweep error
    zeta: object
    alpha: object           # Fraction when given as a ratio string
    cells_per_radius: int
    cutoff_A: float
    measure_L: float
    measure_n: int
    pde_dt: float
    pde_mode: str
    pde_self_tol: float
    h_base: float = None
    plateau_h: float = None     # finest rung, excluded from the h fit
    slope_band_n: float = 0.15
    slope_band_h: float = 0.2
    flat_band: float = 0.1      # for boundedness studies (target slope 0)
    check_density_flat: bool = False
    marginal: MarginalStudy = None
    budget_ops: float = 2.0e12
    budget_override: bool = False
    max_table_bytes: float = 1.5e9
    output_dir: str = "runs/out"
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def measure_grid(self) -> GridSpec:
        return GridSpec(d=self.d, L=self.measure_L, n=self.measure_n)

    def exponents(self) -> rates.RateExponents:
        return rates.exponents(self.d, self.r, self.zeta, self.alpha)

    def snapshot_times(self):
        """Uniform error-measurement times (0, T]; t=0 handled apart."""
        S = self.snapshot_count
        return tuple((k + 1) * self.T / S for k in range(S))

    def coupled_h_for(self, N: int) -> float:
        """Balanced step size snapped down to divide the snapshot
        interval, so every snapshot sits on the step grid."""
        interval = self.T / self.snapshot_count
        h_raw = rates.coupled_h(N, self.exponents())
        n_sub = max(1, int(math.ceil(interval / h_raw - 1e-9)))
        return interval / n_sub

    def plan(self):
        """The (N, h) grid actually run."""
        if self.coupled:
            return tuple((N, self.coupled_h_for(N)) for N in self.sweep_N)
        return tuple((N, h) for N in self.sweep_N for h in self.sweep_h)

    def estimated_ops(self) -> float:
        """Pairwise-interaction count: sum of N^2 (T/h) M over the plan."""
        total = 0.0
        for N, h in self.plan():
            total += float(N) ** 2 * (self.T / h) * self.replicas
        total *= len(self.seeds)
        if self.marginal is not None:
            for N, _h in self.plan():
                h = _h
                total += (float(N) ** 2 * (self.marginal.t / h)
                          * self.marginal.replicas * len(self.seeds))
        return total


_KERNELS = {
    "zero": lambda d, t: zero_kernel(d),
    "bounded_demo": lambda d, t: BoundedLipschitzDemo(d=d),
    "keller_segel": lambda d, t: KellerSegel(d=d, chi=float(t.get("chi", 1.0))),
    "riesz": lambda d, t: RieszGradient(
        d=d, s=float(t.get("s", d - 2)),
        sign=str(t.get("sign", "repulsive"))),
    "truncated_riesz": lambda d, t: TruncatedRiesz(
        d=d, alpha_sing=float(t["alpha_sing"])),
}


def _parse_number(x):
    """Ratio strings stay exact; 'inf' allowed."""
    if isinstance(x, str):
        if x.strip().lower() in ("inf", "infinity"):
            return math.inf
        return Fraction(x)
    if isinstance(x, bool):
        raise ConfigError(["expected a number, got a boolean"])
    return x


def _parse_initial(tbl, d):
    law = tbl.get("law", "gaussian")
    if law == "gaussian":
        center = np.asarray(tbl.get("center", [0.0] * d), dtype=float)
        return IsotropicGaussian(center=center,
                                 variance=float(tbl.get("variance", 1.0)))
    if law == "mixture":
        comps = [(float(w), np.asarray(c, dtype=float), float(v))
                 for w, c, v in tbl["components"]]
        return GaussianMixture(components=tuple(comps))
    raise ConfigError(["unknown initial law %r" % (law,)])


def load_config(path) -> ExperimentConfig:
    """Parse the TOML document; structural errors raise ConfigError."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> ExperimentConfig:
    try:
        ktbl = raw["kernel"]
        d = int(ktbl["d"])
        family = ktbl["family"]
        if family not in _KERNELS:
            raise ConfigError(["unknown kernel family %r (know %s)"
                               % (family, sorted(_KERNELS))])
        kernel = _KERNELS[family](d, ktbl)
        initial = _parse_initial(raw.get("initial", {}), d)
        ttbl = raw["time"]
        stbl = raw["sweep"]
        mtbl = raw.get("mollifier", {})
        gtbl = raw["grids"]
        ltbl = raw.get("limits", {})
        vtbl = raw.get("verdict", {})

        assump = assumptions_for(kernel)
        r = _parse_number(stbl.get("r", assump.r))
        zeta = _parse_number(stbl.get("zeta", assump.zeta))
        alpha = _parse_number(mtbl.get("alpha", "1/3"))

        marg = None
        if raw.get("marginal", {}).get("enabled", False):
            mg = raw["marginal"]
            marg = MarginalStudy(
                t=float(mg["t"]), p=float(mg["p"]), c=float(mg["c"]),
                grid=GridSpec(d=d, L=float(mg["grid_L"]),
                              n=int(mg["grid_n"])),
                replicas=int(mg["replicas"]),
                particle_index=int(mg.get("particle_index", 0)),
                min_count=int(mg.get("min_count", 20)))

        return ExperimentConfig(
            title=str(raw.get("title", "untitled")),
            kernel=kernel, d=d, initial_law=initial,
            T=float(ttbl["T"]),
            snapshot_count=int(ttbl.get("snapshots", 8)),
            sweep_N=tuple(int(n) for n in stbl["N"]),
            sweep_h=tuple(float(h) for h in ttbl.get("h", [])),
            coupled=bool(stbl.get("coupled_h", False)),
            replicas=int(stbl.get("replicas", 1)),
            moments=tuple(int(m) for m in stbl.get("moments", [1])),
            seeds=tuple(int(s) for s in stbl.get("seeds", [0])),
            r=r, zeta=zeta, alpha=alpha,
            cells_per_radius=int(mtbl.get("cells_per_radius", 32)),
            cutoff_A=float(raw.get("cutoff", {}).get("A", 4.0)),
            measure_L=float(gtbl["L"]), measure_n=int(gtbl["n"]),
            pde_dt=float(gtbl["pde_dt"]),
            pde_mode=str(gtbl.get("pde_mode", "analytic_symbol")),
            pde_self_tol=float(gtbl.get("pde_self_tol", 1e-2)),
            h_base=(float(ttbl["h_base"]) if "h_base" in ttbl else None),
            plateau_h=(float(vtbl["plateau_h"]) if "plateau_h" in vtbl
                       else None),
            slope_band_n=float(vtbl.get("band_n", 0.15)),
            slope_band_h=float(vtbl.get("band_h", 0.2)),
            flat_band=float(vtbl.get("flat_band", 0.1)),
            check_density_flat=bool(vtbl.get("density_flat", False)),
            marginal=marg,
            budget_ops=float(ltbl.get("budget_ops", 2.0e12)),
            budget_override=bool(ltbl.get("budget_override", False)),
            max_table_bytes=float(ltbl.get("max_table_bytes", 1.5e9)),
            output_dir=str(raw.get("output", {}).get("directory",
                                                     "runs/out")),
            raw=raw)
    except ConfigError:
        raise
    except KeyError as ex:
        raise ConfigError(["missing required config key: %s" % (ex,)])


def _divides(h, T, tol=1e-9):
    n = round(T / h)
    return n >= 1 and abs(T / h - n) <= tol * max(1.0, n)


def validate_config(cfg: ExperimentConfig):
    """All problems as a list of messages; empty means valid."""
    probs = []
    d = cfg.d
    if d < 1:
        probs.append("d must be >= 1")
    if cfg.T <= 0:
        probs.append("T must be positive")
    if cfg.snapshot_count < 1:
        probs.append("snapshot count must be >= 1")
    if cfg.replicas < 1:
        probs.append("replicas must be >= 1")
    if not cfg.seeds:
        probs.append("at least one master seed is required")
    if any(m < 1 for m in cfg.moments) or not cfg.moments:
        probs.append("moment orders must be >= 1")
    if cfg.cutoff_A <= 0:
        probs.append("cutoff threshold A must be positive")
    if any(N < 2 for N in cfg.sweep_N) or not cfg.sweep_N:
        probs.append("sweep N values must be >= 2")

    # admissibility of the mollifier growth exponent
    try:
        bound = rates.alpha_bound(d, rates._coerce(cfg.r))
        a = rates._coerce(cfg.alpha)
        if not (0 < a < bound):
            probs.append(
                "mollifier exponent alpha=%s violates the admissibility "
                "bound alpha < %s (d=%d, r=%s)" % (a, bound, d, cfg.r))
    except (ValueError, TypeError, ZeroDivisionError) as ex:
        probs.append("alpha/r admissibility check failed: %s" % ex)

    if not cfg.coupled:
        if not cfg.sweep_h:
            probs.append("fixed-h mode needs a nonempty [time].h list")
        for h in cfg.sweep_h:
            if h <= 0:
                probs.append("step size h=%g must be positive" % h)
            elif not _divides(h, cfg.T):
                probs.append("step size h=%g does not divide T=%g"
                             % (h, cfg.T))
            interval = cfg.T / cfg.snapshot_count
            if h > 0 and not _divides(h, interval):
                probs.append("step size h=%g does not divide the snapshot "
                             "interval %g" % (h, interval))
    if cfg.h_base is not None:
        for h in cfg.sweep_h:
            k = h / cfg.h_base
            if abs(k - round(k)) > 1e-9 or round(k) < 1:
                probs.append("h=%g is not an integer multiple of "
                             "h_base=%g" % (h, cfg.h_base))
    if cfg.plateau_h is not None and cfg.plateau_h not in cfg.sweep_h:
        probs.append("plateau_h=%g must be one of the [time].h rungs"
                     % cfg.plateau_h)

    # measure grid resolves the narrowest mollifier in the sweep
    if cfg.sweep_N:
        try:
            a = float(rates._coerce(cfg.alpha))
            eps_min = max(cfg.sweep_N) ** (-a)
            spacing = 2.0 * cfg.measure_L / cfg.measure_n
            if spacing > eps_min / 4.0:
                probs.append(
                    "measure grid spacing %.4g exceeds epsilon/4 = %.4g "
                    "at N=%d; refine [grids].n" %
                    (spacing, eps_min / 4.0, max(cfg.sweep_N)))
            # kernel table memory at the deepest sweep point
            nodes = 2 * 3 * cfg.cells_per_radius + 1
            tbl_bytes = float(nodes) ** d * d * 8
            if tbl_bytes > cfg.max_table_bytes:
                probs.append("kernel table estimate %.3g bytes exceeds "
                             "the limit %.3g" % (tbl_bytes,
                                                 cfg.max_table_bytes))
        except (ValueError, TypeError) as ex:
            probs.append("mollifier resolution check failed: %s" % ex)

    if cfg.d > 2:
        probs.append("reference solver grids beyond d=2 are rejected")
    if cfg.measure_n < 4 or (cfg.measure_n & (cfg.measure_n - 1)) != 0:
        probs.append("[grids].n must be a power of two for the solver")
    if cfg.pde_dt <= 0:
        probs.append("[grids].pde_dt must be positive")
    if cfg.pde_mode not in ("analytic_symbol", "mollified_grid"):
        probs.append("unknown pde_mode %r" % (cfg.pde_mode,))

    if cfg.marginal is not None:
        mg = cfg.marginal
        if mg.replicas < 1000:
            probs.append("marginal study needs at least 1000 replicas")
        if not (1 < mg.p) or (d > 1 and not (mg.p < d / (d - 1.0))):
            probs.append("marginal p=%g outside (1, d/(d-1))" % mg.p)
        if not mg.c > 2:
            probs.append("marginal c=%g must exceed 2" % mg.c)
        if not (0 < mg.t <= cfg.T):
            probs.append("marginal time %g outside (0, T]" % mg.t)

    try:
        ops = cfg.estimated_ops()
        if ops > cfg.budget_ops and not cfg.budget_override:
            probs.append(
                "estimated pair operations %.3g exceed the budget %.3g; "
                "set [limits].budget_override = true to force" %
                (ops, cfg.budget_ops))
    except (ValueError, ZeroDivisionError) as ex:
        probs.append("operation estimate failed: %s" % ex)

    return probs


def config_hash(cfg: ExperimentConfig) -> str:
    blob = json.dumps(cfg.raw, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
