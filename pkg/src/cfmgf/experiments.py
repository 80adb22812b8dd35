"""Monte Carlo harness: null critical points, power studies, warp-speed GARCH.

Every replication draws from its own substream keyed by
``(table key, d, n, replication)`` so results are identical for any number
of workers. Critical points use the upper order statistic convention: the
upper-alpha point of ``reps`` draws is the ``ceil(reps * (1 - alpha))``-th
smallest value (the minimum for ``alpha = 1``, ``+inf`` for ``alpha = 0``).
Rejection is for statistics strictly above the critical point.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from os import PathLike
from typing import Iterable, Sequence

import numpy as np

from .errors import BadParameter, BootstrapUnstable, CfmgfError
from .garch import GarchSpec, bootstrap_resample, garch_simulate, garch_statistic, qmle_fit
from .sampling import AlternativeSpec, RngStream, draw
from .standardize import scaled_residuals
from .statistics import hw_values, t_values, ttilde_values

DESK = {"critical": 2000, "power": 500, "warp": 2000}
FULL = {"critical": 10000, "power": 1000, "warp": 10000}

# test labels used in report grids
T = "T"
T_ONE = "Ttilde_one"
T_TWO = "Ttilde_two"
HW = "HW"


def upper_quantile(values: np.ndarray, alpha: float) -> float:
    """Upper-alpha critical point by the order statistic convention."""
    if not 0 <= alpha <= 1:
        raise BadParameter(f"alpha must lie in [0, 1], got {alpha}")
    if alpha == 0:
        return math.inf
    v = np.sort(np.asarray(values, dtype=float))
    k = math.ceil(round(len(v) * (1 - alpha), 9))
    return float(v[max(k, 1) - 1])


def _key(text: str) -> int:
    return zlib.crc32(text.encode())


@dataclass
class ExperimentReport:
    """A Monte Carlo table: one value per grid entry plus provenance."""

    kind: str
    grid: list[dict]
    values: np.ndarray
    replications: int
    master_seed: int
    wall_time: float = 0.0
    meta: dict = field(default_factory=dict)

    def lookup(self, **keys) -> float:
        hits = [v for g, v in zip(self.grid, self.values)
                if all(g.get(k) == val for k, val in keys.items())]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} entries match {keys}")
        return float(hits[0])

    def rows(self) -> list[dict]:
        return [dict(g, value=float(v)) for g, v in zip(self.grid, self.values)]

    def to_csv(self, path: str | PathLike | None = None) -> str:
        rows = self.rows()
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]) if rows else ["value"],
                                lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def sidecar(self) -> dict:
        return {"kind": self.kind, "replications": self.replications,
                "master_seed": self.master_seed, "wall_time": self.wall_time,
                "meta": {k: v for k, v in self.meta.items() if k != "draws"},
                "schema_version": 1}

    def to_json(self, path: str | PathLike | None = None) -> str:
        text = json.dumps(self.sidecar(), indent=2, default=str)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    def to_text(self, column: str = "param", digits: int = 2) -> str:
        """Pretty table with one column per value of ``column`` (gamma or beta)."""
        cols = sorted({g[column] for g in self.grid}, key=lambda c: (str(type(c)), c))
        row_keys = [k for k in self.grid[0] if k != column] if self.grid else []
        table: dict[tuple, dict] = {}
        for g, v in zip(self.grid, self.values):
            table.setdefault(tuple(g[k] for k in row_keys), {})[g[column]] = v
        head = [*row_keys, *(f"{c:g}" if isinstance(c, float) else str(c) for c in cols)]
        lines = [[str(k) for k in rk] + [f"{cells[c]:.{digits}f}" if c in cells else ""
                                         for c in cols]
                 for rk, cells in table.items()]
        widths = [max(len(h), *(len(line[i]) for line in lines)) if lines else len(h)
                  for i, h in enumerate(head)]
        fmt = lambda cells: "  ".join(c.rjust(w) for c, w in zip(cells, widths))
        out = [f"# {self.kind}: {self.replications} replications, seed {self.master_seed}",
               fmt(head), fmt(["-" * w for w in widths])]
        out += [fmt(line) for line in lines]
        return "\n".join(out)


def _run_chunks(func, n_items: int, workers: int, *args) -> list:
    """Apply ``func(start, stop, *args)`` over index chunks, concatenated in order."""
    if workers <= 1 or n_items < 2:
        return func(0, n_items, *args)
    bounds = np.linspace(0, n_items, workers * 4 + 1).astype(int)
    with ProcessPoolExecutor(workers) as pool:
        futures = [pool.submit(func, int(a), int(b), *args)
                   for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        out = []
        for f in futures:
            out.extend(f.result())
        return out


def _iid_stats(x: np.ndarray, gammas, ttilde_gammas, betas) -> dict:
    y = scaled_residuals(x)
    d = y.d
    out = {}
    if len(gammas):
        raw = t_values(y, gammas)
        for g, v in zip(gammas, raw):
            out[(T, float(g))] = (g / math.pi) ** (d / 2) * v
    if len(ttilde_gammas):
        for g, v in zip(ttilde_gammas, ttilde_values(y, ttilde_gammas)):
            out[(T_ONE, float(g))] = v
            out[(T_TWO, float(g))] = abs(v)
    if len(betas):
        for b, v in zip(betas, hw_values(y, betas)):
            out[(HW, float(b))] = v
    return out


def _sample_chunk(start, stop, spec, n, rng, key, gammas, ttilde_gammas, betas):
    out = []
    for r in range(start, stop):
        gen = rng.substream(key, spec.d, n, r).generator()
        out.append(_iid_stats(draw(spec, n, gen), gammas, ttilde_gammas, betas))
    return out


def simulate_statistics(spec: AlternativeSpec, n: int, reps: int, rng: RngStream,
                        gammas: Sequence[float] = (), ttilde_gammas: Sequence[float] = (),
                        betas: Sequence[float] = (), workers: int = 1) -> dict:
    """Draw ``reps`` samples of size ``n`` and evaluate every requested statistic.

    Returns ``{(test, param): array of reps values}``. T values are on the
    ``(gamma/pi)^{d/2} T`` scale; ``Ttilde_two`` holds ``|Ttilde|``.
    """
    key = _key(str(spec))
    per_rep = _run_chunks(_sample_chunk, reps, workers, spec, n, rng, key,
                          list(gammas), list(ttilde_gammas), list(betas))
    return {k: np.array([r[k] for r in per_rep]) for k in per_rep[0]}


def null_statistics(d: int, n: int, reps: int, rng: RngStream, **kwargs) -> dict:
    return simulate_statistics(AlternativeSpec("normal", d), n, reps, rng, **kwargs)


def critical_table(d_list: Iterable[int], n_list: Iterable[int], gamma_list: Sequence[float],
                   alpha_list: Sequence[float], reps: int, rng: RngStream,
                   statistic: str = T, workers: int = 1,
                   keep_draws: bool = False) -> ExperimentReport:
    """Empirical upper-alpha points under N(0, I).

    ``statistic`` is ``"T"`` (on the ``(gamma/pi)^{d/2} T`` scale),
    ``"Ttilde_one"``, ``"Ttilde_two"`` (critical point of ``|Ttilde|``) or
    ``"HW"`` (``gamma_list`` then holds betas).
    """
    if reps < 500:
        raise BadParameter("critical tables need reps >= 500")
    t0 = time.perf_counter()
    grid, values, draws = [], [], {}
    kw = {T: "gammas", T_ONE: "ttilde_gammas", T_TWO: "ttilde_gammas", HW: "betas"}[statistic]
    for d in d_list:
        for n in n_list:
            sims = null_statistics(d, n, reps, rng, workers=workers, **{kw: gamma_list})
            for a in alpha_list:
                for g in gamma_list:
                    arr = sims[(statistic, float(g))]
                    grid.append({"stat": statistic, "d": d, "n": n, "alpha": a, "param": float(g)})
                    values.append(upper_quantile(arr, a))
            if keep_draws:
                draws[(d, n)] = sims
    report = ExperimentReport("critical_table", grid, np.array(values), reps, rng.master_seed,
                              time.perf_counter() - t0)
    if keep_draws:
        report.meta["draws"] = draws
    return report


def power_table(alternatives: Sequence[str | AlternativeSpec], d_list: Iterable[int], n: int,
                gamma_list: Sequence[float], alpha: float | Sequence[float], reps: int,
                rng: RngStream, family: str = T, beta_list: Sequence[float] = (),
                critical: dict | None = None, null_reps: int = DESK["critical"],
                workers: int = 1) -> ExperimentReport:
    """Rejection percentages against alternatives.

    ``family`` is ``"T"`` or ``"Ttilde"`` (reported one- and two-sided);
    ``beta_list`` adds the HW comparator. Critical points come from
    ``critical`` (``{(d, n): null_statistics(...) output}``) or are simulated
    on the fly with ``null_reps`` replications under the same seed discipline.
    """
    alphas = [alpha] if np.isscalar(alpha) else list(alpha)
    t0 = time.perf_counter()
    gkw = {"gammas": gamma_list} if family == T else {"ttilde_gammas": gamma_list}
    tests = [T] if family == T else [T_ONE, T_TWO]
    critical = dict(critical or {})
    grid, values = [], []
    for d in d_list:
        null = critical.get((d, n))
        if null is None:
            null = null_statistics(d, n, null_reps, rng, betas=beta_list, workers=workers, **gkw)
            critical[(d, n)] = null
        for alt in alternatives:
            spec = alt if isinstance(alt, AlternativeSpec) else AlternativeSpec.parse(alt, d)
            if spec.d != d:
                spec = AlternativeSpec(spec.kind, d, spec.params)
            sims = simulate_statistics(spec, n, reps, rng, betas=beta_list, workers=workers, **gkw)
            for a in alphas:
                for test in tests:
                    for g in gamma_list:
                        crit = upper_quantile(null[(test, float(g))], a)
                        grid.append({"alternative": str(spec), "d": d, "n": n, "alpha": a,
                                     "test": test, "param": float(g)})
                        values.append(100.0 * np.mean(sims[(test, float(g))] > crit))
                for b in beta_list:
                    crit = upper_quantile(null[(HW, float(b))], a)
                    grid.append({"alternative": str(spec), "d": d, "n": n, "alpha": a,
                                 "test": HW, "param": float(b)})
                    values.append(100.0 * np.mean(sims[(HW, float(b))] > crit))
    return ExperimentReport("power_table", grid, np.array(values), reps, rng.master_seed,
                            time.perf_counter() - t0,
                            meta={"null_reps": null_reps, "family": family})


def _warp_chunk(start, stop, spec, alt, n, rng, key, gammas, betas, burn_in):
    out = []
    for i in range(start, stop):
        try:
            path = garch_simulate(spec, n, rng.substream(key, i, 0), alt, burn_in=burn_in)
            fit = qmle_fit(path.x)
            xs = bootstrap_resample(fit, rng.substream(key, i, 1).generator())
            fit_s = qmle_fit(xs)
        except CfmgfError as exc:
            out.append({"failed": repr(exc)})
            continue
        rec = {"converged": fit.converged and fit_s.converged}
        for name, params in (("Ttilde", gammas), ("HW", betas)):
            if len(params):
                rec[name] = garch_statistic(fit.residuals, params, name)
                rec[name + "*"] = garch_statistic(fit_s.residuals, params, name)
        out.append(rec)
    return out


def warp_speed_garch(spec: GarchSpec, alternatives: Sequence[str | AlternativeSpec], n: int,
                     gamma_list: Sequence[float], alpha: float | Sequence[float], mc_reps: int,
                     rng: RngStream, beta_list: Sequence[float] = (), burn_in: int = 500,
                     max_fail_frac: float = 0.05, workers: int = 1,
                     keep_draws: bool = False) -> ExperimentReport:
    """Warp-speed level/power study of the GARCH innovation test.

    Each Monte Carlo sample is simulated, fitted and tested, then exactly one
    Gaussian bootstrap resample is generated from its fit, refitted and
    tested. The resampled statistics of all samples are pooled into one null
    reference; the rejection rate is the share of original statistics above
    its upper-alpha point (one-sided in ``Ttilde``; HW rejects for large values).
    With ``keep_draws`` the original and resampled statistics are kept in
    ``meta["draws"][alternative][test]`` as ``(stat, boot)`` arrays.
    """
    if mc_reps < 1000:
        raise BadParameter("warp-speed studies need mc_reps >= 1000")
    alphas = [alpha] if np.isscalar(alpha) else list(alpha)
    t0 = time.perf_counter()
    grid, values, meta, draws = [], [], {}, {}
    for alt in alternatives:
        innov = alt if isinstance(alt, AlternativeSpec) else AlternativeSpec.parse(alt, spec.d)
        key = _key("garch:" + str(innov))
        recs = _run_chunks(_warp_chunk, mc_reps, workers, spec, innov, n, rng, key,
                           list(gamma_list), list(beta_list), burn_in)
        ok = [r for r in recs if "failed" not in r]
        failed = len(recs) - len(ok)
        if failed > max_fail_frac * mc_reps:
            raise BootstrapUnstable(f"{failed} of {mc_reps} warp-speed replicates failed for {innov}")
        meta[str(innov)] = {"failed": failed,
                            "unconverged": sum(not r["converged"] for r in ok)}
        draws[str(innov)] = {
            name: (np.array([r[name] for r in ok]), np.array([r[name + "*"] for r in ok]))
            for name, params in (("Ttilde", gamma_list), ("HW", beta_list)) if len(params)}
        for a in alphas:
            for name, params in (("Ttilde", gamma_list), ("HW", beta_list)):
                for pi, p in enumerate(params):
                    stat = draws[str(innov)][name][0][:, pi]
                    boot = draws[str(innov)][name][1][:, pi]
                    crit = upper_quantile(boot, a)
                    grid.append({"alternative": str(innov), "d": spec.d,
                                 "r": float(spec.R[0, 1]) if spec.d > 1 else 0.0,
                                 "n": n, "alpha": a, "test": name, "param": float(p)})
                    values.append(100.0 * np.mean(stat > crit))
    if keep_draws:
        meta["draws"] = draws
    return ExperimentReport("garch_table", grid, np.array(values), mc_reps, rng.master_seed,
                            time.perf_counter() - t0, meta=meta)
