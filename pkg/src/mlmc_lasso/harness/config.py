"""Experiment configuration: defaults, JSON round-trip, CLI overrides."""

import json
from dataclasses import asdict, dataclass, fields

from ..errors import ConfigError
from ..mcmc import Proposal
from ..schemes import SchemeKind, default_small_level

ALL_SCHEMES = ("SIES", "EES1", "EES2")
U64 = 2**64


@dataclass(frozen=True)
class McmcEntry:
    """One MCMC method to cost.  ``dt=None`` means the MC plan's ``dt_lopt``."""

    proposal: str
    dt: float = None
    sigma2: float = None

    def __post_init__(self):
        try:
            prop = Proposal.parse(self.proposal)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        object.__setattr__(self, "proposal", prop.name)
        if prop is Proposal.RW:
            if self.sigma2 is None or not self.sigma2 > 0:
                raise ConfigError("RW entries need a positive sigma2")
        elif self.dt is not None and not self.dt > 0:
            raise ConfigError("dt must be positive when given")


DEFAULT_MCMC = (
    McmcEntry("EES1"),
    McmcEntry("EES2"),
    McmcEntry("RW", sigma2=0.3),
    McmcEntry("RW", sigma2=0.8),
)


@dataclass(frozen=True)
class ExperimentConfig:
    p: int = 10
    n: int = 7
    T: float = 10.0
    L: int = 16
    l_s: int = None
    l_max: int = 13  # finest level on the error curve
    N_curve: int = 1000
    N_pilot: int = 1000  # samples per level for MLMC variance pilots
    eta2: float = 0.04
    seed: int = 1
    problem_seed: int = None  # None: derived from ``seed``
    schemes: tuple = ALL_SCHEMES
    mcmc: tuple = DEFAULT_MCMC
    M: int = 100
    mcmc_n_min: int = 128
    mcmc_n_max: int = 2**20
    beta_sweep: tuple = (1.0, 4.0, 16.0)
    beta_steps: int = 20000
    beta_chains: int = 20
    beta_rw_scale: float = 0.3  # RW variance is beta_rw_scale / beta**2
    figure_levels: int = 3
    figure_fine_level: int = 16
    figure_decimation: int = 16
    threads: int = 1

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)
        try:
            set_("schemes", tuple(SchemeKind.parse(s).name for s in self.schemes))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        mc = []
        for m in self.mcmc:
            if isinstance(m, McmcEntry):
                mc.append(m)
            elif isinstance(m, dict):
                mc.append(McmcEntry(**m))
            else:
                raise ConfigError(f"bad mcmc entry {m!r}")
        set_("mcmc", tuple(mc))
        set_("beta_sweep", tuple(float(b) for b in self.beta_sweep))
        set_("T", float(self.T))
        set_("eta2", float(self.eta2))
        if self.l_s is None:
            if not self.T > 0:
                raise ConfigError("T must be positive")
            set_("l_s", default_small_level(self.T))
        self.validate()

    @property
    def problem_seed_value(self):
        return self.seed if self.problem_seed is None else self.problem_seed

    def validate(self):
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.p >= 1 and self.n >= 1, "p and n must be positive")
        need(self.T > 0, "T must be positive")
        need(0 <= self.l_s < self.L, "need 0 <= l_s < L")
        need(self.l_s < self.l_max <= self.L, "need l_s < l_max <= L")
        need(self.N_curve >= 2, "N_curve must be at least 2")
        need(self.N_pilot >= 2, "N_pilot must be at least 2")
        need(self.eta2 > 0, "eta2 must be positive")
        need(0 <= self.seed < U64, "seed must be a 64-bit unsigned integer")
        need(self.problem_seed is None or 0 <= self.problem_seed < U64, "problem_seed out of range")
        need(len(self.schemes) > 0, "at least one scheme is required")
        need(self.M >= 10, "M must be at least 10")
        need(1 <= self.mcmc_n_min <= self.mcmc_n_max, "need 1 <= mcmc_n_min <= mcmc_n_max")
        need(len(self.beta_sweep) > 0, "beta_sweep must be nonempty")
        need(all(b > 0 for b in self.beta_sweep), "betas must be positive")
        need(
            all(a < b for a, b in zip(self.beta_sweep, self.beta_sweep[1:])),
            "beta_sweep must be strictly ascending",
        )
        need(self.beta_steps >= 100 and self.beta_chains >= 2, "beta sweep too small")
        need(self.beta_rw_scale > 0, "beta_rw_scale must be positive")
        need(self.figure_levels >= 1, "figure_levels must be positive")
        need(self.figure_decimation >= 1, "figure_decimation must be positive")
        need(self.threads >= 0, "threads must be nonnegative")

    def to_dict(self):
        d = asdict(self)
        d["schemes"] = list(self.schemes)
        d["beta_sweep"] = list(self.beta_sweep)
        d["mcmc"] = [
            {k: v for k, v in asdict(m).items() if v is not None} for m in self.mcmc
        ]
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, text):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)

    def override(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        if not kw:
            return self
        d = self.to_dict()
        d.update(kw)
        return type(self).from_dict(d)


def load_config(path=None, **overrides):
    """Defaults, then the JSON file at ``path``, then non-None ``overrides``."""
    cfg = ExperimentConfig()
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                cfg = ExperimentConfig.from_json(fh.read())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
    return cfg.override(**overrides)


__all__ = ["ALL_SCHEMES", "DEFAULT_MCMC", "ExperimentConfig", "McmcEntry", "load_config"]
