"""Parametric studies: reward ratios, discounting, prior beliefs, test volumes."""

import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .belief import PriorSpec, SafetyRequirement, is_terminal, prior_from_moments
from .config import load_preset, merge, spec_to_doc, to_spec, validate
from .model import ProblemSpec
from .solver import immediate_policy, solve_problem

STUDY_IDS = ("table3", "table4", "fig2", "fig3", "fig4", "fig5")

DEFAULT_C_REFS = (0.90, 0.95, 0.99)
DEFAULT_GAMMAS = (0.5, 0.75, 1.0)
DEFAULT_MUS = (0.5, 0.9, 1.0)
DEFAULT_SIGMA2S = tuple(float(f"{v:.6g}") for v in np.logspace(-3, 3, 25))


def fmt(v):
    """Cell formatting shared by all CSV outputs (12 significant digits)."""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return str(v)


@dataclass
class StudyResult:
    study_id: str
    axes: dict
    columns: list
    rows: list
    provenance: dict
    summary: dict = field(default_factory=dict)

    def to_csv(self):
        lines = [",".join(self.columns)]
        lines += [",".join(fmt(v) for v in row) for row in self.rows]
        return "\n".join(lines) + "\n"

    def to_json(self):
        doc = {
            "study": self.study_id,
            "axes": self.axes,
            "columns": self.columns,
            "rows": [[_jsonable(v) for v in row] for row in self.rows],
            "summary": self.summary,
            "provenance": self.provenance,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    return v


def _provenance(spec_or_doc, **extra):
    doc = spec_to_doc(spec_or_doc) if isinstance(spec_or_doc, ProblemSpec) else spec_or_doc
    return dict({"config": doc, "version": __version__}, **extra)


# -- helpers on solved tables ---------------------------------------------------


def _reported_grid(spec: ProblemSpec, table2d):
    """Restrict a (K, N) slice to K, N >= 1."""
    return table2d[1 - spec.k_lo:, 1 - spec.n_lo:]


def _terminal_mask(spec: ProblemSpec):
    kthr = np.asarray(spec.terminal_thresholds)
    K = np.arange(1, spec.k_max + 1)[:, None]
    N = np.arange(1, spec.n_max + 1)
    return K <= kthr[N - spec.n_lo][None, :]


def max_rate_curve(pt, t=1, beta_i=0):
    """Per N, the largest observed rate K/N at which the policy still tests."""
    spec = pt.spec
    pol = _reported_grid(spec, pt.slice(t, beta_i))
    out = []
    for jn in range(pol.shape[1]):
        ks = np.flatnonzero(pol[:, jn] > 0)
        if ks.size:
            N = jn + 1
            out.append((N, (int(ks.max()) + 1) / N))
    return out


def count_terminal(prior, req, k_max=50, n_max=50):
    """Number of terminal states with K in 1..k_max and N in 1..n_max."""
    total = 0
    K = 0
    for N in range(1, n_max + 1):
        while K < k_max and is_terminal(K + 1, N, prior, req):
            K += 1
        total += K
    return total


def terminal_state_delta(mu, sigma2, req: SafetyRequirement, k_max=50, n_max=50):
    """Change in the number of terminal states caused by a (mu, sigma2) prior."""
    prior = prior_from_moments(PriorSpec(mu, sigma2))
    return count_terminal(prior, req, k_max, n_max) - count_terminal(None, req, k_max, n_max)


def classify_prior_effect(deltas):
    """Behaviour type of a delta series ordered by increasing variance.

    1: gains at low variance and never a loss; -1: never a gain and some loss;
    0: gains at low variance but losses at intermediate variance.
    """
    deltas = list(deltas)
    if not deltas or all(d == 0 for d in deltas):
        return None
    if all(d <= 0 for d in deltas):
        return -1
    if deltas[0] > 0:
        return 1 if all(d >= 0 for d in deltas) else 0
    return None


def min_reward_ratio(c_ref, k_max=50, n_max=50, lambda_ref=1.0, n_cap=200, lo=1e-3, hi=1e7, rel_tol=1e-5,
                     **solve_kw):
    """Smallest eta/(1-eta) for which the one-step policy tests at some state with K/N > lambda_ref.

    Bisection in log space, reported to 3 significant figures.
    """
    req = SafetyRequirement(lambda_ref, c_ref)
    K = np.arange(1, k_max + 1)[:, None]
    N = np.arange(1, n_max + 1)[None, :]
    over = K > lambda_ref * N

    def tests(ratio):
        spec = ProblemSpec(req, eta=ratio / (1.0 + ratio), horizon=1, k_max=k_max, n_max=n_max, n_cap=n_cap)
        pol = immediate_policy(spec, **solve_kw).slice(1, 0)
        return bool((pol[over] > 0).any())

    if not over.any() or not tests(hi):
        raise ValueError(f"no reward ratio up to {hi:g} produces testing above lambda_ref")
    if tests(lo):
        return lo
    while hi / lo - 1.0 > rel_tol:
        mid = math.sqrt(lo * hi)
        if tests(mid):
            hi = mid
        else:
            lo = mid
    return float(f"{hi:.3g}")


def testing_stats(pt, t=1, beta_i=0):
    """(avg tests over testing states, testing fraction of non-terminal states, counts)."""
    spec = pt.spec
    pol = _reported_grid(spec, pt.slice(t, beta_i))
    nonterminal = ~_terminal_mask(spec)
    testing = pol > 0
    n_test = int(testing.sum())
    n_nonterm = int(nonterminal.sum())
    avg = float(pol[testing].mean()) if n_test else 0.0
    return avg, n_test / n_nonterm if n_nonterm else 0.0, n_test, n_nonterm


def discount_study(template: ProblemSpec = None, gammas=DEFAULT_GAMMAS, t=1, **solve_kw) -> StudyResult:
    template = template or to_spec(load_preset("fig1"))
    rows = []
    for g in gammas:
        sol = solve_problem(dataclasses.replace(template, gamma=float(g)), **solve_kw)
        avg, frac, n_test, n_nonterm = testing_stats(sol.policy, t)
        rows.append([float(g), avg, frac, n_test, n_nonterm])
    return StudyResult(
        "table4",
        {"gamma": [float(g) for g in gammas]},
        ["gamma", "avg_tests", "testing_fraction", "testing_states", "nonterminal_states"],
        rows,
        _provenance(template, t=t),
    )


def terminal_step_scatter(spec: ProblemSpec, **solve_kw):
    """Rows (K/N, N, K, n*) of the one-step policy over non-terminal states."""
    pol = _reported_grid(spec, immediate_policy(spec, **solve_kw).slice(1, 0))
    term = _terminal_mask(spec)
    rows = []
    for ik in range(pol.shape[0]):
        for jn in range(pol.shape[1]):
            if not term[ik, jn]:
                K, N = ik + 1, jn + 1
                rows.append([K / N, N, K, int(pol[ik, jn])])
    return rows


# -- study runners keyed by id --------------------------------------------------


def _template(preset, overrides):
    return validate(merge(load_preset(preset), overrides or {}))


def _variants(doc):
    base = merge(doc, {"prior": None, "innovation": None})
    return {
        "baseline": base,
        "innovation": merge(base, {"innovation": doc.get("innovation")}),
        "prior": merge(base, {"prior": doc.get("prior")}),
        "combined": doc,
    }


def run_table3(overrides=None, **solve_kw):
    doc = _template("table2", merge({"prior": None, "innovation": None}, overrides or {}))
    spec = to_spec(doc)
    c_refs = doc.get("study", {}).get("c_refs", list(DEFAULT_C_REFS))
    rows = [
        [c, min_reward_ratio(c, spec.k_max, spec.n_max, spec.requirement.lambda_ref, spec.n_cap, **solve_kw)]
        for c in c_refs
    ]
    return StudyResult("table3", {"c_ref": c_refs}, ["c_ref", "min_reward_ratio"], rows, _provenance(doc))


def run_table4(overrides=None, **solve_kw):
    doc = _template("fig1", overrides)
    study = doc.get("study", {})
    res = discount_study(to_spec(doc), study.get("gammas", list(DEFAULT_GAMMAS)), study.get("t", 1), **solve_kw)
    res.provenance = _provenance(doc, t=study.get("t", 1))
    return res


def run_fig2(overrides=None, **solve_kw):
    doc = _template("fig1", overrides)
    t = doc.get("study", {}).get("t", 1)
    rows = []
    summary = {}
    for name in ("baseline", "innovation", "prior"):
        vdoc = _variants(doc)[name]
        sol = solve_problem(to_spec(vdoc), **solve_kw)
        pol = _reported_grid(sol.spec, sol.policy.slice(t, 0))
        ks, ns = np.nonzero(pol)
        for ik, jn in zip(ks, ns):
            rows.append([name, int(ik) + 1, int(jn) + 1, int(pol[ik, jn])])
        summary[name] = {"testing_states": int(ks.size), "terminal_states": int(_terminal_mask(sol.spec).sum())}
    return StudyResult("fig2", {"variant": ["baseline", "innovation", "prior"], "t": t},
                       ["variant", "K", "N", "n_star"], rows, _provenance(doc), summary)


def run_fig3(overrides=None, **solve_kw):
    doc = _template("fig1", overrides)
    rows = []
    summary = {}
    for name in ("baseline", "combined"):
        sol = solve_problem(to_spec(_variants(doc)[name]), **solve_kw)
        peak = 0.0
        for t in range(1, sol.spec.horizon + 1):
            for N, rate in max_rate_curve(sol.policy, t):
                rows.append([name, t, N, rate])
                peak = max(peak, rate)
        summary[name] = {"max_rate": peak}
    return StudyResult("fig3", {"variant": ["baseline", "combined"]}, ["variant", "t", "N", "max_rate"],
                       rows, _provenance(doc), summary)


def run_fig4(overrides=None, **solve_kw):
    doc = _template("table2", overrides)
    spec = to_spec(doc)
    study = doc.get("study", {})
    mus = study.get("mus", list(DEFAULT_MUS))
    sigma2s = sorted(study.get("sigma2s", list(DEFAULT_SIGMA2S)))
    c_refs = study.get("c_refs", [spec.requirement.c_ref])
    rows = []
    types = {}
    for c in c_refs:
        req = SafetyRequirement(spec.requirement.lambda_ref, c)
        for mu in mus:
            deltas = [terminal_state_delta(mu, s2, req, spec.k_max, spec.n_max) for s2 in sigma2s]
            rows += [[mu, s2, c, d] for s2, d in zip(sigma2s, deltas)]
            types[f"mu={fmt(mu)},c_ref={fmt(c)}"] = classify_prior_effect(deltas)
    return StudyResult("fig4", {"mu": mus, "sigma2": sigma2s, "c_ref": c_refs}, ["mu", "sigma2", "c_ref", "delta"],
                       rows, _provenance(doc), {"types": types})


def run_fig5(overrides=None, **solve_kw):
    doc = _template("table2", merge({"prior": None, "innovation": None, "eta": 0.99, "horizon": 1}, overrides or {}))
    spec = to_spec(doc)
    rows = terminal_step_scatter(spec, **solve_kw)
    return StudyResult("fig5", {"eta": spec.eta, "c_ref": spec.requirement.c_ref},
                       ["rate", "N", "K", "n_star"], rows, _provenance(doc))


RUNNERS = {
    "table3": run_table3,
    "table4": run_table4,
    "fig2": run_fig2,
    "fig3": run_fig3,
    "fig4": run_fig4,
    "fig5": run_fig5,
}


def run_study(study_id, overrides=None, **solve_kw) -> StudyResult:
    if study_id not in RUNNERS:
        raise KeyError(f"unknown study {study_id!r}; choose from {STUDY_IDS}")
    return RUNNERS[study_id](overrides, **solve_kw)
