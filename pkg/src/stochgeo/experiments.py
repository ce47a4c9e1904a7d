"""Replicated Monte Carlo experiments on random polytopes and caps.

Every replication draws from its own stream ``derive("rep", n, r, attempt)``
of the configured seed, so tables do not depend on the number of worker
threads.  A replication whose hull is degenerate is redrawn with the next
attempt number and counted as a resample.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .caps import (
    cap_construction,
    chord_half_angle,
    conditioned_frames,
    hat_vs,
    subspace_hit_probability,
    wet_part,
)
from .errors import DegenerateInput, OriginOutside, OutOfRange
from .geometry import ball_volume
from .hull import Polytope, convex_hull, min_facet_offset, polytope_volume
from .intrinsic import body_intrinsic_volume, exact_intrinsic, kubota_constant, kubota_intrinsic, projection_volumes
from .sampling import BodySpec, RngStream, haar_bases, uniform_body
from .stats import fit_exponent, jackknife_var_of_var, mean_and_se
from .tables import ExperimentConfig, ExperimentTable

MAX_ATTEMPTS = 100
PILOT_REPS = 16
PILOT_FRAMES = 256
MAX_FRAMES = 100_000
REFERENCE_FRAMES = 400_000


def _pool_map(fn, items, threads: int | None):
    items = list(items)
    workers = threads or os.cpu_count() or 1
    if workers == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _params_hash(params: dict) -> str:
    text = json.dumps(params, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _fit(x, y, err) -> tuple[float, float]:
    try:
        return fit_exponent(x, y, err)
    except (ValueError, ArithmeticError):
        return math.nan, math.nan


@lru_cache(maxsize=None)
def reference_intrinsic_volume(semiaxes: tuple, s: int) -> tuple[float, float]:
    """V_s of the mother body: closed form where available, otherwise a
    fixed-seed high-accuracy Kubota run over exact ellipsoid projections."""
    spec = BodySpec(semiaxes)
    return body_intrinsic_volume(spec, s, REFERENCE_FRAMES, RngStream(0).derive("reference", semiaxes, s))


# ------------------------------------------------------------ evaluation

class _Evaluator:
    """V_s of a hull under the configured evaluator and frame policy."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.d = cfg.d
        self.s = cfg.s
        self.needs_frames = cfg.evaluator == "kubota" and cfg.s < cfg.d
        self.root = RngStream(cfg.seed)

    def frames_for_level(self, n: int) -> tuple[int, np.ndarray | None]:
        if not self.needs_frames:
            return 0, None
        N = self.cfg.kubota_n or self.pilot_frames(n)
        if not self.cfg.common_frames:
            return N, None
        return N, haar_bases(self.d, self.s, self.root.derive("frames", n), N)

    def pilot_frames(self, n: int) -> int:
        """Frame count making the per-polytope MC variance at most 1% of the
        inter-replication variance, estimated from a small pilot run."""
        c = kubota_constant(self.d, self.s)
        means, mc = [], []
        for r in range(PILOT_REPS):
            st = self.root.derive("pilot", n, r)
            P = self.hull(uniform_body(self.cfg.body, st, n))
            vals = c * projection_volumes(P.vertices, haar_bases(self.d, self.s, st.derive("frames"), PILOT_FRAMES))
            means.append(vals.mean())
            mc.append(vals.var(ddof=1))
        sigma2 = float(np.mean(mc))
        between = max(float(np.var(means, ddof=1)) - sigma2 / PILOT_FRAMES, 1e-300)
        return int(min(MAX_FRAMES, max(PILOT_FRAMES, math.ceil(100.0 * sigma2 / between))))

    def hull(self, pts) -> Polytope:
        return convex_hull(pts, method=self.cfg.hull_method)

    def value(self, P: Polytope, frames, stream: RngStream) -> float:
        s, d = self.s, self.d
        if s == d:
            return polytope_volume(P)
        if self.cfg.evaluator == "exact":
            return exact_intrinsic(P, s, self.cfg.angle_samples, stream.derive("angles")).value
        return kubota_intrinsic(P, s, 0, None, frames=frames).value

    def rep_frames(self, N: int, frames, stream: RngStream):
        if not self.needs_frames or frames is not None:
            return frames
        return haar_bases(self.d, self.s, stream.derive("frames"), N)


def _replicate(ev: _Evaluator, n: int, r: int, body_fn):
    """Run ``body_fn(pts, stream)`` on a fresh sample, resampling on degeneracy."""
    for attempt in range(MAX_ATTEMPTS):
        st = ev.root.derive("rep", n, r, attempt)
        pts = uniform_body(ev.cfg.body, st, n)
        try:
            return body_fn(pts, st), attempt
        except DegenerateInput:
            continue
    raise DegenerateInput(f"{MAX_ATTEMPTS} consecutive degenerate samples at n={n}")


def _level_values(cfg: ExperimentConfig, ev: _Evaluator, n: int):
    N, frames = ev.frames_for_level(n)

    def one(r):
        def body(pts, st):
            return ev.value(ev.hull(pts), ev.rep_frames(N, frames, st), st)
        return _replicate(ev, n, r, body)

    out = _pool_map(one, range(cfg.reps), cfg.threads)
    vals = np.array([v for v, _ in out])
    return vals, sum(a for _, a in out), N


def _base_metadata(cfg: ExperimentConfig, name: str) -> dict:
    return {
        "experiment": name,
        "config_hash": cfg.config_hash,
        "seed": cfg.seed,
        "body": cfg.body.describe(),
        "d": cfg.d,
        "s": cfg.s,
        "evaluator": cfg.evaluator,
    }


# ------------------------------------------------------------ experiments

def variance_experiment(cfg: ExperimentConfig) -> ExperimentTable:
    """Sample variance of V_s(K_n) per n with jackknife errors; slope of log var."""
    ev = _Evaluator(cfg)
    rows, resamples = [], 0
    for n in cfg.n_grid:
        vals, res, N = _level_values(cfg, ev, n)
        resamples += res
        mean, _ = mean_and_se(vals)
        var = float(vals.var(ddof=1))
        rows.append((n, mean, var, math.sqrt(jackknife_var_of_var(vals)), cfg.reps, N, res))
    table = ExperimentTable(("n", "mean", "variance", "variance_se", "reps", "frames", "resamples"), rows)
    table.slope, table.stderr = _fit(table.column("n"), table.column("variance"), table.column("variance_se"))
    table.metadata = _base_metadata(cfg, "variance") | {"resamples": resamples}
    return table


def expectation_experiment(cfg: ExperimentConfig) -> ExperimentTable:
    """Mean gap V_s(K) - E V_s(K_n) and the scaled constant c_hat = gap (n/V(K))^(2/(d+1))."""
    ev = _Evaluator(cfg)
    ref, ref_se = reference_intrinsic_volume(cfg.body.semiaxes, cfg.s)
    vol = cfg.body.volume
    e = 2.0 / (cfg.d + 1)
    rows, resamples = [], 0
    for n in cfg.n_grid:
        vals, res, N = _level_values(cfg, ev, n)
        resamples += res
        mean, se = mean_and_se(vals)
        gap = ref - mean
        gap_se = math.hypot(se, ref_se)
        rows.append((n, mean, gap, gap_se, gap * (n / vol) ** e, cfg.reps, N, res))
    table = ExperimentTable(("n", "mean", "gap", "gap_se", "c_hat", "reps", "frames", "resamples"), rows)
    table.slope, table.stderr = _fit(table.column("n"), table.column("gap"), table.column("gap_se"))
    top = table.column("c_hat")[len(rows) // 2:]
    spread = (max(top) - min(top)) / abs(float(np.mean(top))) if top else math.nan
    table.metadata = _base_metadata(cfg, "expectation") | {
        "resamples": resamples,
        "reference": ref,
        "reference_se": ref_se,
        "c_hat_spread": spread,
    }
    return table


def efron_stein_experiment(cfg: ExperimentConfig) -> ExperimentTable:
    """(n+1) E(V_s(K_{n+1}) - V_s(K_n))^2 next to the sample variance.

    Each replication uses the same first n points as :func:`variance_experiment`
    and ``cfg.extra_points`` independent candidates for the (n+1)-st point;
    the squared increments are averaged over the candidates.
    """
    ev = _Evaluator(cfg)
    E = cfg.extra_points
    rows, resamples = [], 0
    for n in cfg.n_grid:
        N, frames = ev.frames_for_level(n)

        def one(r, n=n, N=N, frames=frames):
            def body(pts, st):
                P = ev.hull(pts)
                fr = ev.rep_frames(N, frames, st)
                f = ev.value(P, fr, st)
                extra = uniform_body(cfg.body, st.derive("extra"), E)
                sq = []
                for y in extra[~P.contains(extra, tol=0.0)]:
                    Q = ev.hull(np.vstack([P.vertices, y]))
                    sq.append((ev.value(Q, fr, st) - f) ** 2)
                return f, math.fsum(sq) / E
            return _replicate(ev, n, r, body)

        out = _pool_map(one, range(cfg.reps), cfg.threads)
        f = np.array([o[0][0] for o in out])
        dsq = np.array([o[0][1] for o in out])
        res = sum(o[1] for o in out)
        resamples += res
        m, se = mean_and_se(dsq)
        var = float(f.var(ddof=1))
        rows.append((n, (n + 1) * m, (n + 1) * se, var, math.sqrt(jackknife_var_of_var(f)), cfg.reps, res))
    table = ExperimentTable(("n", "efron_stein", "efron_stein_se", "variance", "variance_se", "reps", "resamples"), rows)
    table.slope, table.stderr = _fit(table.column("n"), table.column("efron_stein"), table.column("efron_stein_se"))
    var_slope, var_stderr = _fit(table.column("n"), table.column("variance"), table.column("variance_se"))
    table.metadata = _base_metadata(cfg, "efron-stein") | {
        "resamples": resamples,
        "extra_points": E,
        "variance_slope": var_slope,
        "variance_stderr": var_stderr,
    }
    return table


@dataclass(frozen=True)
class Trajectory:
    d: int
    s: int
    checkpoints: tuple
    values: tuple
    reference: float

    @property
    def gaps(self) -> np.ndarray:
        return self.reference - np.asarray(self.values)

    @property
    def scaled_gaps(self) -> np.ndarray:
        return self.gaps * np.asarray(self.checkpoints, dtype=float) ** (2.0 / (self.d + 1))

    def gaps_non_increasing(self) -> bool:
        g = self.gaps
        return bool(np.all(np.diff(g) <= 0.0))

    def relative_fluctuation(self, last: int = 5) -> float:
        """max |g_i / mean(g) - 1| over the last scaled gaps."""
        g = self.scaled_gaps[-last:]
        return float(np.max(np.abs(g / g.mean() - 1.0)))

    def to_table(self, config_hash: str = "", seed: int | None = None) -> ExperimentTable:
        rows = [(int(n), v, g, sg) for n, v, g, sg in zip(self.checkpoints, self.values, self.gaps, self.scaled_gaps)]
        meta = {
            "experiment": "strong-law",
            "config_hash": config_hash,
            "seed": seed,
            "d": self.d,
            "s": self.s,
            "reference": self.reference,
            "relative_fluctuation": self.relative_fluctuation(),
            "gaps_non_increasing": self.gaps_non_increasing(),
        }
        return ExperimentTable(("n", "value", "gap", "scaled_gap"), rows, metadata=meta)


def checkpoint_grid(d: int, n_max: int, power: int = 4) -> list[int]:
    out, k = [], 1
    while k**power <= n_max:
        if k**power >= d + 1:
            out.append(k**power)
        k += 1
    return out


def strong_law_trajectory(cfg: ExperimentConfig, n_max: int = 100_000, power: int = 4, trajectory: int = 0) -> Trajectory:
    """One nested point stream evaluated at n_k = k^power.

    The hull at each checkpoint is built from the previous hull's vertices
    and the new points, and its value is carried over unchanged when no new
    point falls outside; with an exact evaluator (or fixed frames) the
    values are then non-decreasing.
    """
    ev = _Evaluator(cfg)
    ref, _ = reference_intrinsic_volume(cfg.body.semiaxes, cfg.s)
    st = ev.root.derive("trajectory", trajectory)
    pts = uniform_body(cfg.body, st, n_max)
    frames = None
    if ev.needs_frames:
        frames = haar_bases(cfg.d, cfg.s, st.derive("frames"), cfg.kubota_n or 20_000)
    cps = checkpoint_grid(cfg.d, n_max, power)
    values, P, prev, val = [], None, 0, math.nan
    for n in cps:
        new = pts[prev:n]
        if P is None:
            P = ev.hull(new)
            val = ev.value(P, frames, st)
        elif not np.all(P.contains(new, tol=0.0)):
            P = ev.hull(np.vstack([P.vertices, new]))
            val = max(val, ev.value(P, frames, st))
        values.append(val)
        prev = n
    return Trajectory(cfg.d, cfg.s, tuple(cps), tuple(values), ref)


def angle_measure_experiment(d: int, s: int, alphas, N: int, stream: RngStream) -> ExperimentTable:
    """Empirical Haar measure of {L : angle(e_1, L) <= alpha} per alpha.

    Exact values come from |e_1|L|^2 ~ Beta(s/2, (d-s)/2).
    """
    alphas = [float(a) for a in alphas]
    if any(not 0.0 < a <= 0.5 for a in alphas):
        raise OutOfRange("alpha grid must lie in (0, 0.5]")
    if not 1 <= s < d:
        raise ValueError(f"need 1 <= s < d, got s={s}, d={d}")
    rows = []
    for i, a in enumerate(alphas):
        B = haar_bases(d, s, stream.derive("alpha", i), N)
        proj2 = np.einsum("nk,nk->n", B[:, :, 0], B[:, :, 0])
        hits = int(np.sum(proj2 >= math.cos(a) ** 2))
        p = hits / N
        se = math.sqrt(max(p * (1.0 - p), 1.0 / N) / N)
        rows.append((a, p, se, subspace_hit_probability(d, s, a), hits, N))
    table = ExperimentTable(("alpha", "measure", "measure_se", "exact", "hits", "samples"), rows)
    table.slope, table.stderr = _fit(table.column("alpha"), table.column("measure"), table.column("measure_se"))
    params = {"experiment": "angle-measure", "d": d, "s": s, "alphas": alphas, "N": N, "seed": stream.seed, "stream_id": stream.stream_id}
    table.metadata = {"experiment": "angle-measure", "config_hash": _params_hash(params), "seed": stream.seed, "d": d, "s": s}
    return table


def hatvs_variance_experiment(d: int, s: int, ts, reps: int, N: int, stream: RngStream) -> ExperimentTable:
    """Variance of V-hat_s(Z) over Z uniform in Delta_0 per cap height t.

    x = e_1; z_1..z_d are drawn once per t and the N conditioned frames are
    shared by all Z at that t.
    """
    ts = [float(t) for t in ts]
    if any(not 0.0 < t <= 0.1 for t in ts):
        raise OutOfRange("cap heights must lie in (0, 0.1]")
    if reps < 3:
        raise ValueError("reps must be at least 3")
    x = np.zeros(d)
    x[0] = 1.0
    rows = []
    for i, t in enumerate(ts):
        st = stream.derive("t", i)
        fam = cap_construction(x, t)
        F = np.array([fam.sample(j, st.derive("F", j)) for j in range(1, d + 1)])
        phi = chord_half_angle(2.0 * d * math.sqrt(t))
        acc = subspace_hit_probability(d, s, phi)
        frames = None if s == d else conditioned_frames(x, s, phi, N, st.derive("frames"))
        Z = fam.sample(0, st.derive("Z"), reps)
        vals = np.array([hat_vs(z, F, x, t, s, N, None, frames=frames) for z in Z])
        mean, _ = mean_and_se(vals)
        rows.append((t, mean, float(vals.var(ddof=1)), math.sqrt(jackknife_var_of_var(vals)), reps, acc))
    table = ExperimentTable(("t", "mean", "variance", "variance_se", "reps", "acceptance"), rows)
    table.slope, table.stderr = _fit(table.column("t"), table.column("variance"), table.column("variance_se"))
    params = {"experiment": "hatvs", "d": d, "s": s, "ts": ts, "reps": reps, "N": N, "seed": stream.seed, "stream_id": stream.stream_id}
    table.metadata = {"experiment": "hatvs", "config_hash": _params_hash(params), "seed": stream.seed, "d": d, "s": s}
    return table


def floating_radius_for(d: int, n: int, c: float) -> float:
    """Radius of the floating body at volume parameter (c log n / n) kappa_d."""
    t = c * math.log(n) / n * ball_volume(d)
    if t >= ball_volume(d) / 2.0:
        return 0.0
    return wet_part(d, t).floating_radius


def floating_containment_experiment(cfg: ExperimentConfig, c: float) -> ExperimentTable:
    """Frequency with which the floating ball escapes K_n."""
    if not cfg.body.is_ball:
        raise ValueError("the containment experiment needs the unit ball")
    if not c > 0:
        raise ValueError("c must be positive")
    ev = _Evaluator(cfg)
    rows, resamples = [], 0
    for n in cfg.n_grid:
        r = floating_radius_for(cfg.d, n, c)

        def one(i, n=n, r=r):
            def body(pts, st):
                P = ev.hull(pts)
                try:
                    return min_facet_offset(P) < r
                except OriginOutside:
                    return True
            return _replicate(ev, n, i, body)

        out = _pool_map(one, range(cfg.reps), cfg.threads)
        fails = sum(bool(f) for f, _ in out)
        res = sum(a for _, a in out)
        resamples += res
        rows.append((n, fails, fails / cfg.reps, cfg.reps, r, res))
    table = ExperimentTable(("n", "failures", "frequency", "reps", "radius", "resamples"), rows)
    table.metadata = _base_metadata(cfg, "floating") | {
        "resamples": resamples,
        "c": c,
        "config_hash": _params_hash(cfg.canonical() | {"c": c}),
    }
    return table
