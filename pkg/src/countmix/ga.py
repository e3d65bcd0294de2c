"""Genetic-algorithm search over covariate subsets, plus component reports.

Each chromosome is a covariate inclusion mask; fitness is an information
criterion of the mixture refit on the masked design (lower is fitter).
Fitness is pure, so a mask-keyed cache is shared across runs and
generations without affecting results.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .countglm import NB2, POISSON
from .criteria import ScoreRow, score_model
from .data import (
    ColumnStats,
    CovariateMask,
    Dataset,
    apply_mask,
    subset_rows,
    summary_stats,
)
from .errors import CountmixError, DomainError
from .mixture import MixtureModel, em_fit
from .selection import DEFAULT_G_MAX, choose_family, normalize_criterion, sweep

WALD_Z = 1.96
# a covariate is treated as constant inside a component below this
# responsibility-weighted variance
CONSTANT_VAR_TOL = 1e-12


@dataclass(frozen=True)
class GaConfig:
    """GA hyperparameters; the defaults favor small, well-cached searches.

    ``runs`` independent GA runs are aggregated into winner frequencies,
    so 200 runs gives 0.5% frequency granularity.  ``G=None`` means the
    component count is chosen by a sweep of the full model before the GA
    starts; ``select_g_per_mask`` instead re-selects G for every mask
    (much costlier).
    """

    pop_size: int = 30
    generations: int = 40
    crossover_rate: float = 0.8
    mutation_rate: float | None = None  # None -> 1/p at runtime
    elitism: int = 2
    criterion: str = "caic"
    G: int | None = None
    runs: int = 200
    seed: int = 0
    restarts: int = 5
    g_max: int = DEFAULT_G_MAX
    select_g_per_mask: bool = False

    def __post_init__(self):
        if self.pop_size < 4:
            raise DomainError("pop_size must be >= 4")
        if not 0 <= self.elitism < self.pop_size:
            raise DomainError("elitism must be in [0, pop_size)")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise DomainError("crossover_rate must be in [0, 1]")
        if self.mutation_rate is not None and not 0.0 <= self.mutation_rate <= 1.0:
            raise DomainError("mutation_rate must be in [0, 1]")
        if self.runs < 1 or self.generations < 1:
            raise DomainError("runs and generations must be >= 1")
        normalize_criterion(self.criterion)


@dataclass(frozen=True)
class SubsetRecord:
    """A winning mask with its scores and how often it won."""

    mask: CovariateMask
    aic: float
    caic: float
    sbc: float
    wins: int
    runs: int

    @property
    def rel_freq(self) -> Fraction:
        return Fraction(self.wins, self.runs)


def _score_mask(mask, d, G, family, cache, seed, restarts, criterion, g_max):
    """ScoreRow for a mask (memoized); None records a failed fit."""
    key = mask.key
    if key in cache:
        return cache[key]
    sub = apply_mask(d, mask)
    try:
        if G is None:
            res = sweep(sub, g_max, seed=seed, restarts=restarts, family=family)
            row = next(r for r in res.rows if r.G == res.best[criterion])
        else:
            model = em_fit(sub, G, family, seed=seed, restarts=restarts)
            row = score_model(model, sub)
    except CountmixError:
        row = None
    cache[key] = row
    return row


def fitness(
    mask: CovariateMask,
    d: Dataset,
    G: int | None,
    family: str,
    criterion: str,
    cache: dict,
    seed=0,
    restarts: int = 5,
    g_max: int = DEFAULT_G_MAX,
) -> float:
    """Criterion value of the mixture refit on the masked design (lower wins).

    Failures score +inf, so a broken mask survives in the population but
    can never win.  Results are memoized in ``cache`` by mask bits.
    """
    criterion = normalize_criterion(criterion)
    row = _score_mask(mask, d, G, family, cache, seed, restarts, criterion, g_max)
    if row is None or row.error is not None:
        return np.inf
    value = getattr(row, criterion)
    if value is None or not np.isfinite(value):
        return np.inf
    return float(value)


def _tournament(rng, fits):
    i = int(rng.integers(len(fits)))
    j = int(rng.integers(len(fits)))
    return i if fits[i] <= fits[j] else j


def evolve(d: Dataset, cfg: GaConfig, family: str | None = None) -> list[SubsetRecord]:
    """Run ``cfg.runs`` independent GA searches and tabulate winner frequencies.

    Every run draws a fresh Bernoulli(0.5) population, then iterates
    tournament selection (k=2), uniform crossover, per-bit mutation, and
    elitism; the run winner is the best-ever mask seen.  Records are
    sorted by relative frequency (descending) then criterion value.
    """
    if d.p < 1:
        raise DomainError("GA subset selection needs at least one covariate")
    criterion = normalize_criterion(cfg.criterion)
    if family is None:
        family = choose_family(d)
    if family not in (POISSON, NB2):
        raise DomainError(f"unknown family {family!r}")

    if cfg.select_g_per_mask:
        G = None
    elif cfg.G is not None:
        G = cfg.G
    else:
        full = sweep(d, cfg.g_max, seed=cfg.seed, restarts=cfg.restarts, family=family)
        G = full.best[criterion]

    p = d.p
    mut = cfg.mutation_rate if cfg.mutation_rate is not None else 1.0 / p
    cache: dict[bytes, ScoreRow | None] = {}

    def fit_of(bits: np.ndarray) -> float:
        return fitness(
            CovariateMask(bits), d, G, family, criterion, cache,
            seed=cfg.seed, restarts=cfg.restarts, g_max=cfg.g_max,
        )

    win_counts: dict[bytes, int] = {}
    for run in range(cfg.runs):
        rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, run)))
        pop = rng.random((cfg.pop_size, p)) < 0.5
        fits = [fit_of(row) for row in pop]
        best_bits = pop[int(np.argmin(fits))].copy()
        best_fit = min(fits)
        for _ in range(cfg.generations):
            order = np.argsort(fits, kind="stable")
            nxt = [pop[i].copy() for i in order[: cfg.elitism]]
            while len(nxt) < cfg.pop_size:
                pa = pop[_tournament(rng, fits)]
                pb = pop[_tournament(rng, fits)]
                if rng.random() < cfg.crossover_rate:
                    swap = rng.random(p) < 0.5
                    c1 = np.where(swap, pb, pa)
                    c2 = np.where(swap, pa, pb)
                else:
                    c1, c2 = pa.copy(), pb.copy()
                for child in (c1, c2):
                    if len(nxt) >= cfg.pop_size:
                        break
                    flip = rng.random(p) < mut
                    child = np.logical_xor(child, flip)
                    nxt.append(child)
            pop = np.asarray(nxt)
            fits = [fit_of(row) for row in pop]
            gen_best = int(np.argmin(fits))
            if fits[gen_best] < best_fit:
                best_fit = fits[gen_best]
                best_bits = pop[gen_best].copy()
        key = best_bits.tobytes()
        win_counts[key] = win_counts.get(key, 0) + 1

    records = []
    for key, count in win_counts.items():
        mask = CovariateMask(np.frombuffer(key, dtype=bool).copy())
        row = cache.get(key)
        if row is None or row.error is not None:
            aic_v = caic_v = sbc_v = float("nan")
        else:
            aic_v, caic_v, sbc_v = row.aic, row.caic, row.sbc
        records.append(
            SubsetRecord(
                mask=mask, aic=aic_v, caic=caic_v, sbc=sbc_v,
                wins=count, runs=cfg.runs,
            )
        )
    # ICOMP is a fine fitness but is not tabulated per record; fall back to
    # CAIC for ordering in that case.  Mask label is a stable final tie-break.
    crit_attr = {"aic": "aic", "sbc": "sbc", "caic": "caic", "icomp": "caic"}[criterion]
    records.sort(
        key=lambda r: (
            -r.rel_freq,
            getattr(r, crit_attr) if np.isfinite(getattr(r, crit_attr)) else np.inf,
            r.mask.render(),
        )
    )
    return records


def _component_variance_weights(model: MixtureModel, d: Dataset, g: int):
    """Per-row observed-information weights for component g."""
    comp = model.components[g]
    mu = np.exp(d.X @ comp.beta)
    if model.family == POISSON:
        return mu
    amu = comp.alpha * mu
    return mu * (1.0 + comp.alpha * d.y) / (1.0 + amu) ** 2


def report_components(model: MixtureModel, d: Dataset) -> list[dict]:
    """Per-component coefficient tables with Wald 2.5% / 97.5% bounds.

    A covariate that is constant within a component's weighted support
    (responsibility-weighted variance below ``CONSTANT_VAR_TOL``) is
    excluded from that component's table: its beta/se/interval render as
    unavailable (None) and it is dropped from the information matrix
    used for the remaining standard errors.
    """
    if not model.converged:
        raise DomainError("report_components requires a converged model")
    tables = []
    for g, comp in enumerate(model.components):
        r = model.responsibilities[:, g]
        mass = r.sum()
        wbar = r / mass if mass > 0 else np.full(d.n, 1.0 / d.n)
        active = [0]  # intercept is constant by design and always reported
        dropped = set()
        for j in range(1, d.p + 1):
            col = d.X[:, j]
            mean = float(wbar @ col)
            var = float(wbar @ (col - mean) ** 2)
            if var < CONSTANT_VAR_TOL:
                dropped.add(j)
            else:
                active.append(j)
        v = _component_variance_weights(model, d, g)
        Xa = d.X[:, active]
        wts = np.where(r > 0.0, r * v, 0.0)
        info = Xa.T @ (Xa * wts[:, None])
        try:
            cov = np.linalg.inv(info)
            with np.errstate(invalid="ignore"):
                se_active = np.sqrt(np.diag(cov))
        except np.linalg.LinAlgError:
            se_active = np.full(len(active), np.nan)
        se = dict(zip(active, se_active))

        rows = []
        for j in list(range(1, d.p + 1)) + [0]:
            name = "intercept" if j == 0 else d.names[j - 1]
            if j in dropped:
                rows.append({"name": name, "beta": None, "se": None, "lo": None, "hi": None})
                continue
            b = float(comp.beta[j])
            s = float(se[j])
            rows.append(
                {
                    "name": name,
                    "beta": b,
                    "se": s,
                    "lo": b - WALD_Z * s,
                    "hi": b + WALD_Z * s,
                }
            )
        tables.append({"component": g + 1, "pi": comp.pi, "alpha": comp.alpha, "rows": rows})
    return tables


def component_summaries(
    model: MixtureModel, d: Dataset
) -> list[dict[str, ColumnStats] | None]:
    """Summary statistics over the MAP-assigned rows of each component.

    A component owning no rows after MAP assignment yields None.
    """
    labels = np.argmax(model.responsibilities, axis=1)
    out: list[dict[str, ColumnStats] | None] = []
    for g in range(model.G):
        idx = np.flatnonzero(labels == g)
        if idx.size == 0:
            out.append(None)
            continue
        out.append(summary_stats(subset_rows(d, idx)))
    return out
