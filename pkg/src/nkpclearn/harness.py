"""Monte Carlo runner for the two learning scenarios and tabulated summaries."""
from __future__ import annotations

import csv
import io
import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .domain import (
    AuxParams,
    Lambda,
    NkpcError,
    NotPositiveDefinite,
    ParamSpace,
    SCENARIO_A_AUX,
    SCENARIO_A_THETA,
    SCENARIO_B_AUX,
    SCENARIO_B_THETA,
    StructuralParams,
    THETA_NAMES,
)
from .equilibria import EquilibriaReport, GCurve, find_roots
from .estimation import assemble_lambda, fit_ar1, fit_nls
from .filter import InitPolicy
from .inference import (
    StepShrunk,
    influence_panel,
    supf_test,
    uniform_band,
    wald,
)
from .simulator import SimConfig, simulate

MAX_FAIL_SHARE = 0.10
BAND_GRID = 401


class McAborted(NkpcError):
    pass


@dataclass(frozen=True)
class McScenario:
    """One Monte Carlo design.

    ``init`` picks the learner's starting value for estimation: ``true`` uses
    the simulated pre-sample value, otherwise an ``InitPolicy`` mode.
    ``supf_B = 0`` skips the supF test and ``bootstrap_B = 0`` skips the bands.
    """

    name: str
    theta: StructuralParams
    aux: AuxParams
    sample_sizes: tuple = (250, 500, 1000, 2000)
    reps: int = 500
    bootstrap_B: int = 199
    band_alpha: float = 0.05
    seed: int = 20240101
    init: str = "true"
    init_pi: float = 0.0
    burn_in: int = 0
    supf_B: int = 0
    space: ParamSpace = ParamSpace()

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if not self.sample_sizes:
            raise ValueError("need at least one sample size")
        if self.init not in ("true", "first_obs", "estimated"):
            raise ValueError(f"unknown init {self.init!r}")

    @property
    def lam(self) -> Lambda:
        return Lambda.from_params(self.theta, self.aux)

    def init_policy(self) -> InitPolicy:
        if self.init == "true":
            return InitPolicy.fixed(self.init_pi)
        return InitPolicy(self.init)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sample_sizes"] = list(self.sample_sizes)
        return d


def builtin_scenario(name: str, **overrides) -> McScenario:
    name = name.upper()
    if name == "A":
        base = McScenario("A", SCENARIO_A_THETA, SCENARIO_A_AUX)
    elif name == "B":
        base = McScenario("B", SCENARIO_B_THETA, SCENARIO_B_AUX)
    elif name == "NULL":
        # same design as A with no expectations channel
        base = McScenario("NULL", replace(SCENARIO_A_THETA, delta=0.0), SCENARIO_A_AUX,
                          bootstrap_B=0)
    else:
        raise KeyError(f"unknown scenario {name!r}; choose A, B or NULL")
    return replace(base, **overrides)


def replication_seeds(seed: int, k: int) -> tuple[int, int, int]:
    """Seeds for (simulation, band bootstrap, supF bootstrap) of replication ``k``."""
    ss = np.random.SeedSequence(seed, spawn_key=(k,))
    s = ss.generate_state(3, dtype=np.uint64)
    return int(s[0]), int(s[1]), int(s[2])


# --- root bookkeeping ----------------------------------------------------------

def root_labels(truth: EquilibriaReport) -> list[str]:
    labels = []
    for i, cls in enumerate(truth.classification):
        labels.append("double" if cls == "double" else f"beta{i + 1}")
    return labels


def match_roots(est: EquilibriaReport, truth: EquilibriaReport) -> dict[str, float]:
    """Assign estimated roots to true roots.

    Nearest-truth matching, except that a split pair around a true double root
    is reported as ``double_left`` / ``double_right``.
    """
    labels = root_labels(truth)
    true = np.asarray(truth.roots)
    out: dict[str, float] = {}
    used = set()
    if est.count == truth.count and "double" not in labels:
        return dict(zip(labels, est.roots))
    if "double" in labels and est.count == 3:
        # the split pair is the adjacent pair centred closest to the true double root
        tb = true[labels.index("double")]
        i = min((0, 1), key=lambda j: abs(0.5 * (est.roots[j] + est.roots[j + 1]) - tb))
        out["double_left"] = est.roots[i]
        out["double_right"] = est.roots[i + 1]
        out["averaged_pair"] = 0.5 * (est.roots[i] + est.roots[i + 1])
        used.update((i, i + 1))
    for i, b in enumerate(est.roots):
        if i in used:
            continue
        j = int(np.argmin(np.abs(true - b)))
        key = labels[j]
        if key in out:
            key = f"{key}_extra{i}"
        out[key] = b
    return out


# --- one replication -----------------------------------------------------------

def run_replication(scn: McScenario, n: int, k: int, truth: EquilibriaReport) -> dict:
    sim_seed, band_seed, supf_seed = replication_seeds(scn.seed, k)
    rec = {"n": n, "rep": k, "status": "ok", "boundary": "", "step_shrunk": False}
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            path = simulate(SimConfig(scn.theta, scn.aux, n, burn_in=scn.burn_in,
                                      seed=sim_seed, init_pi=scn.init_pi))
            data = path.dataset()
            init = scn.init_policy()
            nls = fit_nls(data, scn.space, init)
            rec["boundary"] = "+".join(nls.boundary)
            for name, v in zip(THETA_NAMES, nls.theta_hat.as_array()):
                rec[name] = v
            ar = fit_ar1(data)
            lf = assemble_lambda(nls, ar)
            for name, v in asdict(lf.lambda_hat).items():
                rec[f"lam_{name}"] = v
            if scn.supf_B:
                sf = supf_test(data, scn.space, scn.supf_B, supf_seed, init)
                rec["supf"] = sf.statistic
                rec["supf_p"] = sf.p_value
            if scn.theta.delta != 0:
                rep = find_roots(lf.lambda_hat)
                rec["count"] = rep.count
                if rep.count == 1:
                    rec["root_single"] = rep.roots[0]
                for key, b in match_roots(rep, truth).items():
                    rec[f"root_{key}"] = b
                w = wald(data, nls, space=scn.space)
                ts = w.t_test(scn.theta)
                for name, se, t in zip(THETA_NAMES, w.std_errors, ts):
                    rec[f"se_{name}"] = se
                    rec[f"reject_{name}"] = bool(abs(t) > 1.959963984540054)
                if scn.bootstrap_B:
                    panel = influence_panel(data, nls, ar, w.A_n)
                    g_true = GCurve.from_lambda(scn.lam).G(np.linspace(0, 1, BAND_GRID))
                    for mode, tag in (("studentized", "cover_s"), ("percentile", "cover_p")):
                        band = uniform_band(lf, panel, BAND_GRID, scn.band_alpha,
                                            scn.bootstrap_B, band_seed, mode)
                        rec[tag] = band.covers(g_true)
        rec["step_shrunk"] = any(issubclass(c.category, StepShrunk) for c in caught)
    except NotPositiveDefinite as exc:
        rec["status"] = "not_pd"
        rec["error"] = str(exc)
    except NkpcError as exc:
        rec["status"] = type(exc).__name__
        rec["error"] = str(exc)
    return rec


def _run_one(args):
    return run_replication(*args)


# --- aggregation ---------------------------------------------------------------

@dataclass
class McSummary:
    scenario: McScenario
    records: list = field(repr=False)
    table: dict = field(default_factory=dict)

    def block(self, n: int) -> dict:
        return self.table[n]

    def records_for(self, n: int, ok_only: bool = True) -> list:
        return [r for r in self.records
                if r["n"] == n and (not ok_only or r["status"] == "ok")]

    def column(self, n: int, key: str, where=None) -> np.ndarray:
        rows = self.records_for(n)
        if where is not None:
            rows = [r for r in rows if where(r)]
        return np.array([r[key] for r in rows if key in r], dtype=float)

    def to_json(self, **kw) -> str:
        return json.dumps({"scenario": self.scenario.to_dict(),
                           "table": {str(n): b for n, b in self.table.items()}}, **kw)

    def records_csv(self, path=None) -> str:
        keys: list[str] = []
        for r in self.records:
            for key in r:
                if key not in keys:
                    keys.append(key)
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=keys, restval="")
        w.writeheader()
        for r in self.records:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _moments(x: np.ndarray) -> tuple[float, Optional[float]]:
    if x.size == 0:
        return float("nan"), None
    sd = float(np.std(x, ddof=1)) if x.size > 1 else None
    return float(np.mean(x)), sd


def summarize_block(scn: McScenario, recs: list, truth: EquilibriaReport) -> dict:
    ok = [r for r in recs if r["status"] == "ok"]
    failures: dict[str, int] = {}
    for r in recs:
        if r["status"] != "ok":
            failures[r["status"]] = failures.get(r["status"], 0) + 1
    block: dict = {"reps": len(recs), "ok": len(ok), "failures": failures,
                   "boundary_hits": sum(bool(r["boundary"]) for r in ok),
                   "step_shrunk": sum(bool(r.get("step_shrunk")) for r in ok),
                   "params": {}}
    for name, true in zip(THETA_NAMES, scn.theta.as_array()):
        x = np.array([r[name] for r in ok], dtype=float)
        mean, sd = _moments(x)
        entry = {"true": float(true), "mean": mean, "bias": mean - float(true), "sd": sd}
        rej = [r[f"reject_{name}"] for r in ok if f"reject_{name}" in r]
        entry["size"] = float(np.mean(rej)) if rej else None
        block["params"][name] = entry
    for tag in ("cover_s", "cover_p"):
        vals = [r[tag] for r in ok if tag in r]
        block[tag] = float(np.mean(vals)) if vals else None
    if any("supf_p" in r for r in ok):
        ps = np.array([r["supf_p"] for r in ok])
        block["supf_reject_5"] = float(np.mean(ps <= 0.05))
    counted = [r for r in ok if "count" in r]
    if counted:
        block["count_freq"] = {str(c): sum(r["count"] == c for r in counted) / len(counted)
                               for c in (1, 2, 3)}
        roots: dict = {}
        true_vals = dict(zip(root_labels(truth), truth.roots))
        for c in (1, 2, 3):
            sub = [r for r in counted if r["count"] == c]
            keys = sorted({k[5:] for r in sub for k in r if k.startswith("root_")})
            for key in keys:
                x = np.array([r[f"root_{key}"] for r in sub if f"root_{key}" in r])
                mean, sd = _moments(x)
                base = "double" if key in ("double_left", "double_right", "averaged_pair") \
                    else key.split("_extra")[0]
                tv = true_vals.get(base)
                roots[f"r{c}:{key}"] = {"n": int(x.size), "mean": mean, "sd": sd,
                                        "true": tv, "bias": None if tv is None else mean - tv}
        block["roots"] = roots
    return block


def run_mc(scn: McScenario, threads: int = 1) -> McSummary:
    truth = find_roots(scn.lam) if scn.theta.delta != 0 else None
    tasks = [(scn, n, k, truth) for n in scn.sample_sizes for k in range(scn.reps)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            records = list(ex.map(_run_one, tasks, chunksize=max(1, len(tasks) // (8 * threads))))
    else:
        records = [_run_one(t) for t in tasks]
    summary = McSummary(scn, records)
    for n in scn.sample_sizes:
        recs = [r for r in records if r["n"] == n]
        block = summarize_block(scn, recs, truth)
        if len(recs) - block["ok"] > MAX_FAIL_SHARE * len(recs):
            raise McAborted(f"n={n}: {len(recs) - block['ok']} of {len(recs)} replications failed "
                            f"({block['failures']})")
        summary.table[n] = block
    return summary


# --- tables --------------------------------------------------------------------

TABLE_FIELDS = ("n", "block", "key", "stat", "value")


def table_rows(summary: McSummary) -> list[tuple]:
    rows = []
    for n, b in summary.table.items():
        for name, e in b["params"].items():
            for stat in ("mean", "bias", "sd", "size"):
                rows.append((n, "theta", name, stat, e[stat]))
        for tag in ("cover_s", "cover_p", "supf_reject_5"):
            if b.get(tag) is not None:
                rows.append((n, "inference", tag, "rate", b[tag]))
        for c, f in b.get("count_freq", {}).items():
            rows.append((n, "count", f"P(r={c})", "freq", f))
        for key, e in b.get("roots", {}).items():
            for stat in ("mean", "bias", "sd"):
                rows.append((n, "roots", key, stat, e[stat]))
        rows.append((n, "failures", "total", "count", b["reps"] - b["ok"]))
        rows.append((n, "failures", "boundary_hits", "count", b["boundary_hits"]))
    return rows


def _fmt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def summarize_to_table(summary: McSummary, format: str = "csv") -> str:
    rows = table_rows(summary)
    if format in ("csv", "tsv"):
        buf = io.StringIO()
        w = csv.writer(buf, delimiter="," if format == "csv" else "\t", lineterminator="\n")
        w.writerow(TABLE_FIELDS)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()
    if format == "text":
        lines = [f"Scenario {summary.scenario.name}"]
        for n, b in summary.table.items():
            lines.append(f"n = {n}  (reps {b['reps']}, failures {b['reps'] - b['ok']}, "
                         f"boundary hits {b['boundary_hits']})")
            lines.append(f"  {'':8s}" + "".join(f"{p:>10s}" for p in THETA_NAMES))
            for stat in ("mean", "bias", "sd", "size"):
                vals = [b["params"][p][stat] for p in THETA_NAMES]
                lines.append(f"  {stat:8s}" + "".join(
                    f"{'NA':>10s}" if v is None else f"{v:10.4f}" for v in vals))
            for tag in ("cover_p", "cover_s", "supf_reject_5"):
                if b.get(tag) is not None:
                    lines.append(f"  {tag:8s}{b[tag]:10.4f}")
            for c, f in b.get("count_freq", {}).items():
                lines.append(f"  P(r={c})  {f:10.4f}")
            for key, e in b.get("roots", {}).items():
                sd = "NA" if e["sd"] is None else f"{e['sd']:.4f}"
                lines.append(f"  {key:22s} n={e['n']:4d} mean={e['mean']:.4f} sd={sd}")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown table format {format!r}")


def parse_table(text: str, format: str = "csv") -> list[tuple]:
    """Inverse of ``summarize_to_table`` for the delimited formats."""
    rd = csv.reader(io.StringIO(text), delimiter="," if format == "csv" else "\t")
    header = next(rd)
    if tuple(header) != TABLE_FIELDS:
        raise ValueError("unexpected table header")
    out = []
    for n, blk, key, stat, value in rd:
        v = None if value == "NA" else float(value)
        out.append((int(n), blk, key, stat, v))
    return out
