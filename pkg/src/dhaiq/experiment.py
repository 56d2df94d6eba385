"""Seeded scenario runs, parameter sweeps and the CSV they produce."""

from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass, fields, replace
from typing import Iterable, Sequence

import numpy as np

from . import analysis
from .gf import GaloisField
from .protocol import AdversaryModel, ProtocolParams, RunMetrics, dhaiq_run, run_with_shift
from .topology import ConfigError, Deployment, deploy

CSV_COLUMNS = (
    "n", "z0", "dist", "shift",
    "mean_innocent", "sd_innocent", "mean_catch", "sd_catch",
    "mean_tx", "mean_rounds", "seeds",
)
DISTS = ("uniform", "gaussian")
_DIST_CODE = {"uniform": 0, "gaussian": 1}


@dataclass(frozen=True)
class ScenarioConfig:
    n: int = 400
    W: float = 800.0
    r: float = 50.0
    z0: int = 25
    dist: str = "uniform"
    sigma: float | None = None  # gaussian spread, W/8 when unset
    mean_x: float | None = None  # gaussian centre, square centre when unset
    mean_y: float | None = None
    mu: float = 5.0
    shift: bool = False
    runs_per_point: int = 30
    u: int = 8
    p: int = 16
    master_seed: int = 0
    mode: str = "both"
    act_normal: bool = False
    connected: bool = False

    def validate(self) -> ScenarioConfig:
        problems = []
        if self.n < 1:
            problems.append(f"n must be >= 1 (got {self.n})")
        if not 0 <= self.z0 <= self.n:
            problems.append(f"z0 must be in [0, n] (got z0={self.z0}, n={self.n})")
        if self.W <= 0:
            problems.append(f"W must be > 0 (got {self.W})")
        if self.r <= 0:
            problems.append(f"r must be > 0 (got {self.r})")
        if self.mu < 1:
            problems.append(f"mu must be >= 1 (got {self.mu})")
        if self.runs_per_point < 1:
            problems.append(f"runs_per_point must be >= 1 (got {self.runs_per_point})")
        if not 2 <= self.u <= 16:
            problems.append(f"u must be in [2, 16] (got {self.u})")
        if self.p < 1:
            problems.append(f"p must be >= 1 (got {self.p})")
        if self.dist not in DISTS:
            problems.append(f"dist must be one of {DISTS} (got {self.dist!r})")
        if self.mode not in ("payload", "coefficients", "both"):
            problems.append(f"mode must be payload, coefficients or both (got {self.mode!r})")
        if self.sigma is not None and self.sigma <= 0:
            problems.append(f"sigma must be > 0 (got {self.sigma})")
        if self.master_seed < 0:
            problems.append(f"master_seed must be >= 0 (got {self.master_seed})")
        if problems:
            raise ConfigError("; ".join(problems))
        return self

    @property
    def gaussian_params(self) -> dict:
        return {
            "mean": (
                self.W / 2 if self.mean_x is None else self.mean_x,
                self.W / 2 if self.mean_y is None else self.mean_y,
            ),
            "sigma": self.W / 8 if self.sigma is None else self.sigma,
        }

    def protocol_params(self) -> ProtocolParams:
        return ProtocolParams(
            gf=_field(self.u), k=4, p=self.p, mu=self.mu,
            model=AdversaryModel(self.mode, self.act_normal),
        )


_FIELDS: dict[int, GaloisField] = {}


def _field(u: int) -> GaloisField:
    if u not in _FIELDS:
        _FIELDS[u] = GaloisField(u)
    return _FIELDS[u]


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def parse_config(text: str, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        pairs[key] = value
    return apply_overrides(base or ScenarioConfig(), pairs)


def apply_overrides(config: ScenarioConfig, pairs: dict[str, str]) -> ScenarioConfig:
    types = {f.name: f.type for f in fields(ScenarioConfig)}
    updates = {}
    for key, value in pairs.items():
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        kind = str(types[key])
        try:
            if "bool" in kind:
                updates[key] = _parse_bool(value)
            elif "None" in kind:
                updates[key] = None if value.lower() in ("", "none") else float(value)
            elif "int" in kind:
                updates[key] = int(value)
            elif "float" in kind:
                updates[key] = float(value)
            else:
                updates[key] = value
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc
    return replace(config, **updates)


def seed_streams(config: ScenarioConfig, index: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Topology and protocol generators for seed ``index`` of a cell.

    The shift setting is deliberately not part of the entropy: shift on and
    off then see the same placements and the same first run.
    """
    ss = np.random.SeedSequence([config.master_seed, config.n, config.z0, _DIST_CODE[config.dist], index])
    topo, proto = ss.spawn(2)
    return np.random.default_rng(topo), np.random.default_rng(proto)


def build_deployment(config: ScenarioConfig, rng: np.random.Generator) -> Deployment:
    return deploy(
        config.n, config.W, config.r, config.z0, rng,
        dist=config.dist, params=config.gaussian_params, require_connected=config.connected,
    )


@dataclass
class SeedRow:
    index: int
    innocent_ratio: float
    catch_ratio: float
    transmissions: int
    rounds: int
    marked: int
    metrics: RunMetrics


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    rows: list[SeedRow]

    def _col(self, name: str) -> list[float]:
        return [getattr(r, name) for r in self.rows]

    def aggregate(self) -> dict:
        def sd(xs):
            return statistics.stdev(xs) if len(xs) > 1 else 0.0

        inn, cat = self._col("innocent_ratio"), self._col("catch_ratio")
        c = self.config
        return {
            "n": c.n,
            "z0": c.z0,
            "dist": c.dist,
            "shift": "on" if c.shift else "off",
            "mean_innocent": statistics.fmean(inn),
            "sd_innocent": sd(inn),
            "mean_catch": statistics.fmean(cat),
            "sd_catch": sd(cat),
            "mean_tx": statistics.fmean(self._col("transmissions")),
            "mean_rounds": statistics.fmean(self._col("rounds")),
            "seeds": len(self.rows),
        }


def run_seed(config: ScenarioConfig, index: int) -> SeedRow:
    topo_rng, proto_rng = seed_streams(config, index)
    net = build_deployment(config, topo_rng)
    params = config.protocol_params()
    if config.shift:
        metrics = run_with_shift(net, params, proto_rng).final
    else:
        metrics = dhaiq_run(net, params, proto_rng)
    return SeedRow(
        index, metrics.innocent_ratio, metrics.catch_ratio,
        metrics.probe_transmissions, metrics.rounds_elapsed, len(metrics.marked), metrics,
    )


def run_scenario(config: ScenarioConfig) -> ScenarioResult:
    config.validate()
    return ScenarioResult(config, [run_seed(config, i) for i in range(config.runs_per_point)])


def sweep(
    template: ScenarioConfig,
    z0_list: Sequence[int],
    n_list: Sequence[int],
    shifts: Sequence[bool] = (False, True),
    dists: Sequence[str] | None = None,
) -> list[dict]:
    """One aggregate row per (n, z0, dist, shift) cell, in that nesting order."""
    if not z0_list or not n_list or not shifts:
        raise ConfigError("sweep lists must be non-empty")
    dists = dists or (template.dist,)
    cells = [
        replace(template, n=n, z0=z0, dist=d, shift=s)
        for n in n_list for d in dists for s in shifts for z0 in z0_list
    ]
    for c in cells:
        c.validate()
    return [run_scenario(c).aggregate() for c in cells]


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".6g")
    return str(value)


def to_csv(rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


@dataclass
class ClaimRow:
    k: int
    division: tuple[float, float, float, float]
    lagrange: float
    hessian: float
    regime: str
    ok: bool


def verify_claim(k_list: Sequence[int], resolution: float = 0.01, tol: float = 1e-6) -> list[ClaimRow]:
    """Numerical optimum, multiplier and Hessian sign for each k.

    For k < 7 the equal split must be the optimum and g(k) negative; k = 7
    is the boundary where g vanishes; beyond it the equal split is no
    longer a maximum and only the sign of g is checked.
    """
    rows = []
    for k in k_list:
        if not 1 <= k <= 10:
            raise ConfigError(f"k must be in 1..10, got {k}")
        div = analysis.optimal_division(k, resolution)
        lam = analysis.lagrange_multiplier(k)
        g = analysis.hessian_diag(k)
        if k < 7:
            regime = "max"
            ok = max(abs(a - 0.25) for a in div) <= tol and g < 0
            if k == 3:
                ok = ok and lam == 0
        elif k == 7:
            regime = "boundary"
            ok = g == 0
        else:
            regime = "not-max"
            ok = g > 0
        rows.append(ClaimRow(k, div.a, lam, g, regime, ok))
    return rows


def format_claim(rows: Sequence[ClaimRow]) -> str:
    out = ["k,a1,a2,a3,a4,lagrange,hessian_diag,regime,ok"]
    for r in rows:
        a = ",".join(format(v, ".6g") for v in r.division)
        out.append(f"{r.k},{a},{r.lagrange:.6g},{r.hessian:.6g},{r.regime},{'yes' if r.ok else 'NO'}")
    return "\n".join(out) + "\n"
