"""Experiment runner and command-line entry point.

A run is described by one JSON document::

    {"kind": "localLaw", "parameters": {...}, "masterSeed": 7, "workers": 4,
     "outputDir": "runs"}

Numeric parameters may be given as exact decimal strings ("0.1"). Every task
gets its own seed derived from (masterSeed, taskIndex), so the numbers do not
depend on the worker count. Artifacts are written to a temporary directory and
renamed into ``<outputDir>/<kind>`` only when the run succeeds.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import shutil
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from importlib import metadata

import numpy as np

from . import correlation, girko, hermitization, identities, mde
from .ensembles import EnsembleSpec, construct_matched_pair, sample_matrix
from .hermitization import ShiftParams
from .identities import jsonable
from .numkernel import DomainError

KINDS = ("sample", "localLaw", "twoResolvent", "universality", "identities", "girko", "mde")
TOP_KEYS = {"kind", "parameters", "masterSeed", "workers", "outputDir"}
QUARTER = float(np.pi / 4)

IDENTITY_CHECKS = ("jacobian", "pfaffian", "stiefel", "detRatio", "hciz", "threeVector")

DEFAULTS: dict[str, dict] = {
    "sample": {"family": "gaussian", "N": 4, "variance": None, "customMoments": None,
               "count": 1},
    "localLaw": {"family": "gaussian", "Ns": [250, 500, 1000, 2000], "a": 0.3, "b": 0.4,
                 "theta": QUARTER, "eta": 0.5, "samples": 200, "slopeTolerance": 0.3},
    "twoResolvent": {"family": "gaussian", "Ns": [250, 500, 1000, 2000], "a": 0.3, "b": 0.4,
                     "theta": QUARTER, "eta": 0.6, "samples": 200, "slopeTolerance": 0.4},
    "universality": {"configs": [{"family": "complexGinibre", "N": 1024, "t": 0.0, "sigma": 1.0},
                                 {"family": "gaussian", "N": 1024, "t": 0.1, "sigma": "computed"},
                                 {"family": "rademacher", "N": 1024, "t": 0.1,
                                  "sigma": "computed"}],
                     "z": [0.3, 0.4], "samples": 200, "window": 4.0, "bins": 24,
                     "referenceIndex": 0, "pMin": 0.01, "zMax": 3.0},
    "identities": {"checks": list(IDENTITY_CHECKS), "jacobianNs": [3, 4, 5],
                   "jacobianPoints": 20, "pfaffianInstances": 2, "pfaffianSamples": 1_000_000,
                   "t": 1.0, "stiefelN": 6, "stiefelSamples": 400_000, "detRatioN": 20,
                   "detRatioInstances": 20, "hciPairs": 5, "hcizSamples": 200_000,
                   "threeVectorN": 200, "threeVectorT": 0.1, "a": 0.3, "b": 0.4},
    "girko": {"family": "gaussian", "N": 300, "epsilon": 0.3, "z": [0.3, 0.4], "seeds": 20,
              "radius": 1.5, "threshold": 0.1, "comparison": True, "comparisonN": 400,
              "comparisonSamples": 100, "t": 0.1, "varianceFactor": 1.5},
    "mde": {"points": 50, "etas": [1.0, 0.1, 0.01, 0.0001], "residualTolerance": 1e-12},
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def _coerce(value, default, key):
    """Convert decimal strings to the type of the default value."""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"parameter {key!r} must be a boolean")
        return value
    if isinstance(default, (int, float)) and not isinstance(default, bool):
        if isinstance(value, str):
            try:
                d = Decimal(value)
            except InvalidOperation:
                raise ConfigError(f"parameter {key!r}: {value!r} is not a decimal number") from None
            return int(d) if isinstance(default, int) and d == d.to_integral_value() else float(d)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"parameter {key!r} must be numeric")
        return int(value) if isinstance(default, int) and float(value).is_integer() else float(value)
    if isinstance(default, list) and default and not isinstance(default[0], dict) \
            and isinstance(value, list):
        return [_coerce(v, default[0], key) for v in value]
    return value


@dataclass
class ExperimentConfig:
    kind: str
    parameters: dict = field(default_factory=dict)
    masterSeed: int = 0
    workers: int = 1
    outputDir: str = "runs"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown kind {self.kind!r}; expected one of {KINDS}")
        bad = sorted(set(self.parameters) - set(DEFAULTS[self.kind]))
        if bad:
            raise ConfigError(f"unknown parameters for {self.kind}: {bad}")
        if int(self.workers) < 1:
            raise ConfigError("workers must be >= 1")
        if self.kind == "identities":
            unknown = sorted(set(self.resolved()["checks"]) - set(IDENTITY_CHECKS))
            if unknown:
                raise ConfigError(f"unknown identity checks: {unknown}")

    def resolved(self) -> dict:
        out = dict(DEFAULTS[self.kind])
        for k, v in self.parameters.items():
            out[k] = _coerce(v, DEFAULTS[self.kind][k], k) if DEFAULTS[self.kind][k] is not None \
                else v
        return out

    def to_dict(self) -> dict:
        return {"kind": self.kind, "parameters": self.parameters, "masterSeed": self.masterSeed,
                "workers": self.workers, "outputDir": self.outputDir}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        bad = sorted(set(d) - TOP_KEYS)
        if bad:
            raise ConfigError(f"unknown configuration keys: {bad}")
        if "kind" not in d:
            raise ConfigError("configuration needs a 'kind'")
        seed = d.get("masterSeed", 0)
        workers = d.get("workers", 1)
        try:
            seed = int(Decimal(str(seed)))
            workers = int(Decimal(str(workers)))
        except InvalidOperation:
            raise ConfigError("masterSeed and workers must be integers") from None
        params = d.get("parameters", {})
        if not isinstance(params, dict):
            raise ConfigError("'parameters' must be an object")
        return cls(kind=d["kind"], parameters=params, masterSeed=seed, workers=workers,
                   outputDir=str(d.get("outputDir", "runs")))

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))


def task_seed(master: int, index: int) -> int:
    """Seed of task ``index``; independent of how tasks are scheduled."""
    ss = np.random.SeedSequence([int(master) & 0xFFFFFFFFFFFFFFFF, int(index)])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


@contextmanager
def worker_map(workers: int):
    if workers <= 1:
        yield map
        return
    with ProcessPoolExecutor(max_workers=workers) as ex:
        yield lambda fn, items: ex.map(fn, items, chunksize=1)


# ---------------------------------------------------------------------------
# Result and artifacts
# ---------------------------------------------------------------------------

@dataclass
class ExperimentResult:
    config: dict
    startedAt: str
    finishedAt: str
    artifacts: list
    summary: dict
    flags: dict
    softwareVersion: str
    taskSeeds: list
    outputPath: str = ""

    @property
    def allPass(self) -> bool:
        return all(bool(v) for v in self.flags.values())

    def to_dict(self) -> dict:
        return {"config": self.config, "startedAt": self.startedAt, "finishedAt": self.finishedAt,
                "artifacts": self.artifacts, "summary": jsonable(self.summary),
                "flags": jsonable(self.flags), "allPass": self.allPass,
                "softwareVersion": self.softwareVersion, "taskSeeds": self.taskSeeds}


class _Artifacts:
    def __init__(self):
        self.files: dict[str, str] = {}

    def csv(self, name: str, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])
        self.files[name] = buf.getvalue()

    def json(self, name: str, obj):
        self.files[name] = json.dumps(jsonable(obj), indent=2, sort_keys=True) + "\n"

    def text(self, name: str, text: str):
        self.files[name] = text


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0.0.0"


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S%z")


# ---------------------------------------------------------------------------
# Task functions (top level so they pickle)
# ---------------------------------------------------------------------------

def _sample_task(args):
    spec, = args
    return sample_matrix(spec)


def _local_task(args):
    family, N, seed, p, eta, m, two, det = args
    A = sample_matrix(EnsembleSpec(family, N, seed=seed))
    if two:
        return float(np.abs(mde.empirical_two_resolvent(A, p, eta, mde.ALL_PAIRS) - det).max())
    return mde.one_resolvent_error(A, p, eta, m)


def _universality_task(args):
    cfg, seed = args
    return correlation.eigenvalues(correlation.config_matrix(cfg, seed))


def _identity_task(args):
    name, kw = args
    return _IDENTITY_RUNNERS[name](**kw).to_dict()


def _run_jacobian(N, seed):
    return identities.verify_jacobian(N, identities.random_phi_point(N, seed))


def _run_pfaffian(t, seed, samples):
    rng = np.random.default_rng(seed)
    l1 = complex(rng.uniform(-0.5, 0.5), rng.uniform(0.1, 0.5))
    l2 = complex(rng.uniform(-0.5, 0.5), rng.uniform(0.1, 0.5))
    A2 = [[rng.uniform(-0.8, 0.8)]]
    return identities.verify_pfaffian_identity(5, t, l1, l2, A2, mcSamples=samples, seed=seed)


def _run_stiefel(N, t, seed, samples):
    return identities.verify_stiefel_gaussian(N, ShiftParams(0.2, 0.5, 0.6), t, seed=seed,
                                              mcSamples=samples)


def _run_det_ratio(N, seed):
    rng = np.random.default_rng(seed)
    p = ShiftParams(rng.uniform(-0.5, 0.5), rng.uniform(0.2, 0.7), rng.uniform(0.15, 1.4))
    return identities.verify_det_ratio(N, p, rng.uniform(0.05, 0.5), seed=seed)


def _run_hciz(pairs, seed, samples):
    return identities.verify_hciz_ratio([tuple(complex(*x) for x in pr) for pr in pairs],
                                        mcSamples=samples, seed=seed)


def _run_three_vector(N, t, a, b, seed):
    A = sample_matrix(EnsembleSpec("gaussian", N, seed=seed))
    z = complex(a, b)
    eta = hermitization.solve_eta_zt(A, z, t)
    v = hermitization.three_vector(A, ShiftParams(a, b, QUARTER), eta, t)
    bound = 1e-8 * N / t
    return identities.IdentityReport("three_vector", complex(np.abs(v).max()), 0j, tolAbs=bound,
                                     tolRel=0.0, params={"N": N, "t": t, "eta": eta,
                                                         "components": v, "bound": bound})


_IDENTITY_RUNNERS = {"jacobian": _run_jacobian, "pfaffian": _run_pfaffian,
                     "stiefel": _run_stiefel, "detRatio": _run_det_ratio, "hciz": _run_hciz,
                     "threeVector": _run_three_vector}


# ---------------------------------------------------------------------------
# Runners
# ---------------------------------------------------------------------------

def _run_sample(P, cfg, mapper, art):
    seeds = [task_seed(cfg.masterSeed, i) for i in range(P["count"])]
    specs = [EnsembleSpec(P["family"], P["N"], seed=s, variance=P["variance"],
                          customMoments=P["customMoments"]) for s in seeds]
    mats = list(mapper(_sample_task, [(s,) for s in specs]))
    cplx = any(np.iscomplexobj(m) for m in mats)
    rows = []
    for k, M in enumerate(mats):
        for (i, j), v in np.ndenumerate(M):
            rows.append([k, i, j, float(np.real(v))] + ([float(np.imag(v))] if cplx else []))
    art.csv("entries.csv", ["sample", "row", "col", "value"] + (["imag"] if cplx else []), rows)
    return {"count": len(mats), "N": P["N"]}, {}, seeds


def _run_local(P, cfg, mapper, art, two: bool):
    p = ShiftParams(P["a"], P["b"], P["theta"])
    eta = P["eta"]
    for N in P["Ns"]:
        lim = N ** (-1 / 6 + 0.05) if two else N ** (-0.5 + 0.05)
        if not eta > lim:
            raise DomainError(f"eta={eta} is below the admissible scale {lim:.3g} at N={N}")
    m = mde.solve_mde(p, eta).m
    det = mde.deterministic_two_resolvent(m, mde.ALL_PAIRS) if two else None
    tasks, seeds = [], []
    for N in P["Ns"]:
        for j in range(P["samples"]):
            s = task_seed(cfg.masterSeed, len(tasks))
            seeds.append(s)
            tasks.append((P["family"], int(N), s, p, eta, m, two, det))
    errors = np.array(list(mapper(_local_task, tasks)))
    rows, summary_rows = [], []
    medians = []
    for k, N in enumerate(P["Ns"]):
        e = errors[k * P["samples"]:(k + 1) * P["samples"]]
        for j, v in enumerate(e):
            rows.append([N, j, seeds[k * P["samples"] + j], v])
        med = float(np.median(e))
        medians.append(med)
        summary_rows.append([N, med, float(np.quantile(e, 0.9)), float(e.mean())])
    slope = mde.fit_slope(P["Ns"], medians)
    art.csv("errors.csv", ["N", "sample", "seed", "error"], rows)
    art.csv("summary.csv", ["N", "median", "p90", "mean"], summary_rows)
    art.json("plot.json", {"type": "loglog", "x": "N", "y": "median", "data": "summary.csv",
                           "reference": {"label": "slope -1", "slope": -1.0}})
    tol = P["slopeTolerance"]
    return ({"slope": slope, "medians": medians, "Ns": P["Ns"], "eta": eta},
            {"slope": abs(slope + 1) <= tol}, seeds)


def _universality_configs(P):
    out = []
    for c in P["configs"]:
        bad = set(c) - {"family", "N", "t", "sigma", "label", "variance"}
        if bad:
            raise ConfigError(f"unknown universality config keys: {sorted(bad)}")
        sigma = c.get("sigma", 1.0)
        sigma = sigma if sigma == "computed" else float(Decimal(str(sigma)))
        spec = EnsembleSpec(c["family"], int(c["N"]),
                            variance=None if c.get("variance") is None else float(c["variance"]))
        out.append(correlation.UniversalityConfig(spec, float(Decimal(str(c.get("t", 0)))), sigma,
                                                  c.get("label", "")))
    return out


def _run_universality(P, cfg, mapper, art):
    cfgs = _universality_configs(P)
    if len(cfgs) < 2:
        raise ConfigError("universality needs at least two configs")
    z = complex(*P["z"])
    seeds = [task_seed(cfg.masterSeed, j) for j in range(P["samples"])]
    est = {}
    sig = {}
    for i, c in enumerate(cfgs):
        key = f"{i}:{c.name}"
        sig[key] = correlation.config_sigma(c, z, seeds)
        spectra = list(mapper(_universality_task, [(c, s) for s in seeds]))
        est[key] = correlation.estimate_pair_correlation(
            spectra, z, sig[key], P["window"], P["bins"],
            metadata={"family": c.spec.family, "N": c.spec.N, "t": c.t,
                      "masterSeed": cfg.masterSeed})
        art.text(f"pair_correlation_{i}.csv", est[key].to_csv())
    keys = list(est)
    ref = keys[P["referenceIndex"]]
    flags, chi, cmp_ = {}, {}, {}
    for i, k in enumerate(keys):
        chi[k] = est[k].chi2_test()
        if cfgs[i].spec.family == "complexGinibre":
            flags[f"chi2[{k}]"] = chi[k]["p"] > P["pMin"]
        if k != ref:
            cmp_[k] = correlation.compare_estimates(est[k], est[ref])
            flags[f"agree[{k}]"] = cmp_[k]["maxZ"] < P["zMax"]
    art.json("comparison.json", {"sigma": sig, "chi2": {k: {x: v[x] for x in ("chi2", "dof", "p")}
                                                        for k, v in chi.items()},
                                 "againstReference": cmp_, "reference": ref})
    edges = est[ref].binEdges
    art.json("plot.json", {"type": "line", "x": "r", "y": "rho_hat",
                           "series": [f"pair_correlation_{i}.csv" for i in range(len(keys))],
                           "reference": {"label": "(1 - exp(-r^2)) / pi^2",
                                         "r": (edges[:-1] + edges[1:]) / 2,
                                         "value": correlation.ginue_rho2_radial((edges[:-1] + edges[1:]) / 2)}})
    return ({"sigma": sig, "chi2p": {k: v["p"] for k, v in chi.items()},
             "maxZ": {k: v["maxZ"] for k, v in cmp_.items()}}, flags, seeds)


def _hciz_pairs(n):
    base = [((0.3, 0.4), (-0.2, 0.1)), ((0.0, 0.5), (0.5, 0.0)), ((0.6, 0.2), (-0.3, -0.3)),
            ((0.05, 0.0), (0.0, 0.02)), ((0.7, -0.1), (0.2, 0.6)), ((-0.4, 0.4), (0.4, 0.4))]
    return base[:n]


def _pair(v):
    return (v[0], v[1]) if isinstance(v, list) else (v, 0.0)


def _run_identities(P, cfg, mapper, art):
    tasks = []
    idx = 0

    def nxt():
        nonlocal idx
        idx += 1
        return task_seed(cfg.masterSeed, idx - 1)

    for c in P["checks"]:
        if c == "jacobian":
            for N in P["jacobianNs"]:
                tasks += [("jacobian", {"N": int(N), "seed": nxt()}) for _ in range(P["jacobianPoints"])]
        elif c == "pfaffian":
            tasks += [("pfaffian", {"t": P["t"], "seed": nxt(), "samples": P["pfaffianSamples"]})
                      for _ in range(P["pfaffianInstances"])]
        elif c == "stiefel":
            tasks.append(("stiefel", {"N": P["stiefelN"], "t": P["t"], "seed": nxt(),
                                      "samples": P["stiefelSamples"]}))
        elif c == "detRatio":
            tasks += [("detRatio", {"N": P["detRatioN"], "seed": nxt()})
                      for _ in range(P["detRatioInstances"])]
        elif c == "hciz":
            tasks.append(("hciz", {"pairs": _hciz_pairs(P["hciPairs"]), "seed": nxt(),
                                   "samples": P["hcizSamples"]}))
        elif c == "threeVector":
            tasks.append(("threeVector", {"N": P["threeVectorN"], "t": P["threeVectorT"],
                                          "a": P["a"], "b": P["b"], "seed": nxt()}))
    reports = list(mapper(_identity_task, tasks))
    art.json("reports.json", reports)
    rows = [[r["name"], *_pair(r["lhs"]), *_pair(r["rhs"]), r["relError"], r["mcStderr"],
             r["pass"]] for r in reports]
    art.csv("summary.csv", ["name", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "relError",
                            "mcStderr", "pass"], rows)
    flags = {}
    for r in reports:
        flags[r["name"]] = flags.get(r["name"], True) and r["pass"]
    summary = {name: {"count": sum(1 for r in reports if r["name"] == name),
                      "pass": flags[name],
                      "maxRelError": max(r["relError"] for r in reports if r["name"] == name)}
               for name in flags}
    return summary, flags, [kw["seed"] for _, kw in tasks]


def _run_girko(P, cfg, mapper, art):
    spec = EnsembleSpec(P["family"], P["N"])
    f = girko.TestFunction(radius=P["radius"])
    z = complex(*P["z"])
    seeds = [task_seed(cfg.masterSeed, i) for i in range(P["seeds"])]
    res = girko.girko_experiment(spec, f, z, P["epsilon"], seeds, mapper)
    art.csv("girko.csv", ["seed", "direct", "integral", "discrepancy"],
            [[r["seed"], r["direct"], r["integral"], r["discrepancy"]] for r in res["rows"]])
    summary = {"medianRelative": res["medianRelative"], "laplacianL1": res["laplacianL1"]}
    flags = {"girko": res["medianRelative"] < P["threshold"]}
    if P["comparison"]:
        target = EnsembleSpec("gaussian", P["comparisonN"])
        pair = construct_matched_pair(target, P["t"], prefer_gaussian=False)
        base_seed = task_seed(cfg.masterSeed, P["seeds"])
        matched = girko.comparison_experiment(pair, f, [z], 1, P["comparisonSamples"],
                                              seed=base_seed % (2 ** 31), mapper=mapper)
        mism = girko.comparison_experiment(girko.mismatched_pair(pair, P["varianceFactor"]), f,
                                           [z], 1, P["comparisonSamples"],
                                           seed=base_seed % (2 ** 31), mapper=mapper)
        summary.update({"matched": matched, "mismatched": mism})
        flags["matched"] = matched["zScore"] < 3
        flags["mismatched"] = mism["zScore"] > 5
    art.json("summary.json", summary)
    return summary, flags, seeds


def _random_bulk_params(seed: int, n: int):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        a, b = rng.uniform(-0.85, 0.85), rng.uniform(0.1, 0.85)
        if a * a + b * b < 0.81:
            out.append(ShiftParams(float(a), float(b), float(rng.uniform(0.15, np.pi / 2 - 0.15))))
    return out


def _mde_task(args):
    p, eta = args
    sol = mde.solve_mde(p, eta)
    spec = mde.x_spectrum(sol)
    return [p.a, p.b, p.theta, eta, sol.residual, sol.method, sol.iterations, spec.unitCount]


def _run_mde(P, cfg, mapper, art):
    seed = task_seed(cfg.masterSeed, 0)
    params = _random_bulk_params(seed, P["points"])
    rows = list(mapper(_mde_task, [(p, float(e)) for p in params for e in P["etas"]]))
    art.csv("mde.csv", ["a", "b", "theta", "eta", "residual", "method", "iterations",
                        "unitEigenvalues"], rows)
    maxres = max(r[4] for r in rows)
    return ({"maxResidual": maxres, "points": len(params)},
            {"residual": maxres < P["residualTolerance"],
             "unitMultiplicity": all(r[7] == 8 for r in rows)}, [seed])


_RUNNERS = {"sample": _run_sample,
            "localLaw": lambda P, c, m, a: _run_local(P, c, m, a, False),
            "twoResolvent": lambda P, c, m, a: _run_local(P, c, m, a, True),
            "universality": _run_universality, "identities": _run_identities,
            "girko": _run_girko, "mde": _run_mde}


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    config.validate()
    P = config.resolved()
    started = _now()
    art = _Artifacts()
    with worker_map(config.workers) as mapper:
        summary, flags, seeds = _RUNNERS[config.kind](P, config, mapper, art)
    art.json("config.json", config.to_dict())
    final = os.path.join(config.outputDir, config.kind)
    os.makedirs(config.outputDir, exist_ok=True)
    result = ExperimentResult(config=config.to_dict(), startedAt=started, finishedAt=_now(),
                              artifacts=sorted(art.files) + ["result.json"], summary=summary,
                              flags=flags, softwareVersion=_version(), taskSeeds=seeds,
                              outputPath=final)
    tmp = tempfile.mkdtemp(prefix=f".{config.kind}.", dir=config.outputDir)
    try:
        for name, text in art.files.items():
            with open(os.path.join(tmp, name), "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        with open(os.path.join(tmp, "result.json"), "w", encoding="utf-8") as fh:
            json.dump(result.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        old = None
        if os.path.exists(final):
            old = tempfile.mkdtemp(prefix=f".{config.kind}.old.", dir=config.outputDir)
            os.replace(final, os.path.join(old, "prev"))
        os.replace(tmp, final)
        if old:
            shutil.rmtree(old, ignore_errors=True)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return result


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rmtlab", description="Run a seeded random-matrix experiment.")
    ap.add_argument("kind", help=f"one of {', '.join(KINDS)}")
    ap.add_argument("--config", required=True, help="JSON configuration file")
    ap.add_argument("--seed", type=int, default=None, help="override masterSeed")
    ap.add_argument("--workers", type=int, default=None, help="override worker count")
    ap.add_argument("--out", default=None, help="override output directory")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a JSON object")
        if raw.get("kind", args.kind) != args.kind:
            raise ConfigError(f"config kind {raw['kind']!r} does not match {args.kind!r}")
        raw = {**raw, "kind": args.kind}
        if args.seed is not None:
            raw["masterSeed"] = args.seed
        if args.workers is not None:
            raw["workers"] = args.workers
        if args.out is not None:
            raw["outputDir"] = args.out
        cfg = ExperimentConfig.from_dict(raw)
    except (ConfigError, DomainError, json.JSONDecodeError, OSError) as exc:
        print(f"rmtlab: invalid configuration: {exc}", file=sys.stderr)
        return 2
    try:
        result = run_experiment(cfg)
    except (ConfigError, DomainError) as exc:
        # raised before anything is written
        print(f"rmtlab: invalid input: {exc}", file=sys.stderr)
        return 2
    for k, v in result.flags.items():
        print(f"{k}: {'PASS' if v else 'FAIL'}")
    print(f"results in {result.outputPath}")
    return 0 if result.allPass else 1


if __name__ == "__main__":
    raise SystemExit(main())
