"""Command line driver: experiment specs, presets and seed listings.

    gge-spectra run <spec.toml|spec.json|preset-name> [--out results] [--threads T]
    gge-spectra presets [--json]
    gge-spectra seeds print --model toda --potential "x^4" [--N 12] [--json]

``run`` writes ``<out>/<name>/`` with ``spec.json``, ``samples.bin``,
``operator.json``, ``clt.json``, ``susceptibility.json``, ``decay.json``,
``berry_esseen.json`` and ``log.txt`` (only the files of requested tasks).
Exit status: 0 when every requested check passes, 1 on a failed check,
2 on a configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import stats, transferop
from .errors import ConfigError, GGEError, NoDecayDetected, UnsupportedPotential
from .models import ModelKind, random_coordinates
from .potential import Polynomial
from .sampling import Current, GGEConfig, ImTracePower, TracePower, sample_mcmc
from .seeds import extract_seed, monomials_to_json, verify_decomposition
from .timeseries import batch_means_se

__all__ = ["ExperimentSpec", "PRESETS", "run", "list_presets", "dumps", "main"]

TASKS = ("sample", "transfer", "verify-clt", "susceptibility", "decay", "berry-esseen", "seeds-check", "currents")

_PERIODIC = {
    "TodaNonPeriodic": "TodaPeriodic",
    "LaguerreNonPeriodic": "ExpTodaPeriodic",
    "AntisymNonPeriodic": "VolterraPeriodic",
    "CMVNonPeriodic": "CMVPeriodic",
}


# --------------------------------------------------------------------------
# JSON with 17 significant digits


def _enc(o, lvl, ind):
    pad = " " * (ind * (lvl + 1))
    end = " " * (ind * lvl)
    if isinstance(o, dict):
        if not o:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_enc(v, lvl + 1, ind)}" for k, v in o.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(o, np.ndarray):
        o = o.tolist()
    if isinstance(o, (list, tuple)):
        if not o:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in o):
            return "[" + ", ".join(_enc(v, lvl + 1, ind) for v in o) + "]"
        return "[\n" + ",\n".join(pad + _enc(v, lvl + 1, ind) for v in o) + "\n" + end + "]"
    if o is None:
        return "null"
    if isinstance(o, (bool, np.bool_)):
        return "true" if o else "false"
    if isinstance(o, (int, np.integer)):
        return str(int(o))
    if isinstance(o, (float, np.floating)):
        x = float(o)
        return format(x, ".17g") if math.isfinite(x) else "null"
    if isinstance(o, complex):
        return _enc([o.real, o.imag], lvl, ind)
    if hasattr(o, "to_json"):
        return _enc(o.to_json(), lvl, ind)
    return json.dumps(str(o))


def dumps(obj, indent: int = 2) -> str:
    """JSON text in which every float carries 17 significant digits."""
    return _enc(obj, 0, indent) + "\n"


# --------------------------------------------------------------------------
# experiment spec


@dataclass
class ExperimentSpec:
    name: str
    model: ModelKind
    alpha: float
    potential: Polynomial
    tasks: list
    measure_type: str = "Type1"
    s: int = 2
    part: str = "Re"
    N: int = 256
    sampler: dict = field(default_factory=dict)
    operator: dict = field(default_factory=dict)
    susceptibility: list = field(default_factory=list)
    decay: dict = field(default_factory=dict)
    berry_esseen: dict = field(default_factory=dict)
    currents: list = field(default_factory=list)
    seeds_check: dict = field(default_factory=dict)
    predicted: dict | None = None
    ks_threshold: float = 0.02
    jacobi_params: list | None = None

    SAMPLER_DEFAULTS = {"count": 20000, "burn_in": 1000, "thin": None, "rng_seed": 0, "method": "auto", "chains": 1}
    OPERATOR_DEFAULTS = {"nodes_per_dim": None, "deltas": list(transferop.DEFAULT_DELTAS), "M_quad": 12}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        try:
            return cls._from_dict(d)
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid spec: {exc}") from None

    @classmethod
    def _from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - {"name", "model", "alpha", "potential", "tasks", "measure_type", "observable", "N",
                            "sampler", "operator", "susceptibility", "decay", "berry_esseen", "currents",
                            "seeds_check", "predicted", "ks_threshold", "jacobi_params", "description"}
        if unknown:
            raise ConfigError(f"unknown spec keys: {sorted(unknown)}")
        for key in ("name", "model", "alpha", "potential"):
            if key not in d:
                raise ConfigError(f"missing spec key {key!r}")
        m = d["model"]
        model = ModelKind.parse(m) if isinstance(m, str) else ModelKind.from_json(m)
        pot = d["potential"]
        P = Polynomial.parse(pot) if isinstance(pot, str) else Polynomial.from_json(pot)
        obs = d.get("observable", {})
        tasks = list(d.get("tasks", []))
        if not tasks:
            raise ConfigError("no tasks requested")
        bad = [t for t in tasks if t not in TASKS]
        if bad:
            raise ConfigError(f"unknown tasks {bad}; choose from {list(TASKS)}")
        sampler = {**cls.SAMPLER_DEFAULTS, **d.get("sampler", {})}
        operator = {**cls.OPERATOR_DEFAULTS, **d.get("operator", {})}
        sus = d.get("susceptibility", {})
        pairs = sus.get("pairs", []) if isinstance(sus, dict) else sus
        cur = d.get("currents", {})
        currents = cur.get("n", []) if isinstance(cur, dict) else cur
        spec = cls(
            name=str(d["name"]), model=model, alpha=float(d["alpha"]), potential=P, tasks=tasks,
            measure_type=d.get("measure_type", "Type1"), s=int(obs.get("s", 2)), part=obs.get("part", "Re"),
            N=int(d.get("N", 256)), sampler=sampler, operator=operator,
            susceptibility=[[int(a), int(b)] for a, b in pairs], decay=dict(d.get("decay", {})),
            berry_esseen=dict(d.get("berry_esseen", {})), currents=[int(n) for n in currents],
            seeds_check=dict(d.get("seeds_check", {})), predicted=d.get("predicted"),
            ks_threshold=float(d.get("ks_threshold", 0.02)),
            jacobi_params=None if d.get("jacobi_params") is None else [float(v) for v in d["jacobi_params"]],
        )
        spec.validate()
        return spec

    def validate(self):
        t = set(self.tasks)
        if not self.name or any(c in self.name for c in "/\\"):
            raise ConfigError("name must be a plain directory name")
        if self.part not in ("Re", "Im"):
            raise ConfigError("observable.part must be 'Re' or 'Im'")
        if self.sampler["method"] not in ("auto", "direct", "mcmc"):
            raise ConfigError("sampler.method must be auto, direct or mcmc")
        predicted = self.predicted is not None
        if "verify-clt" in t and not ("sample" in t and ("transfer" in t or predicted)):
            raise ConfigError("verify-clt needs the sample task and either transfer or predicted values")
        if "susceptibility" in t:
            if not self.susceptibility:
                raise ConfigError("susceptibility needs at least one (m, n) pair")
            if not ({"sample", "transfer"} & t):
                raise ConfigError("susceptibility needs sample or transfer")
        if "decay" in t:
            if "sample" not in t:
                raise ConfigError("decay needs the sample task")
            if not self.model.periodic or self.measure_type != "Type1":
                raise ConfigError("decay needs a periodic Type-1 model")
        if "berry-esseen" in t and not ("transfer" in t or predicted):
            raise ConfigError("berry-esseen needs transfer or predicted values")
        if "currents" in t:
            if not self.currents:
                raise ConfigError("currents needs a list of n")
            if self.model.family != "jacobi" or self.measure_type != "Type1":
                raise ConfigError("currents are defined for the periodic Toda lattice")
        self.config()  # raises on invalid model/potential combinations

    def config(self, N: int | None = None) -> GGEConfig:
        try:
            jp = None if self.jacobi_params is None else tuple(self.jacobi_params)
            return GGEConfig(self.model, self.alpha, self.potential, N or self.N, self.measure_type,
                             jacobi_params=jp)
        except UnsupportedPotential as exc:
            raise ConfigError(str(exc)) from None

    def operator_kind(self) -> ModelKind:
        k = self.model
        tag = _PERIODIC.get(k.tag, k.tag)
        return ModelKind(tag, r=k.r, unit=k.unit, real_coeffs=k.real_coeffs)

    def to_json(self):
        return {
            "name": self.name,
            "model": self.model.to_json(),
            "alpha": self.alpha,
            "potential": self.potential.to_json(),
            "tasks": list(self.tasks),
            "measure_type": self.measure_type,
            "observable": {"s": self.s, "part": self.part},
            "N": self.N,
            "sampler": self.sampler,
            "operator": self.operator,
            "susceptibility": {"pairs": self.susceptibility},
            "decay": self.decay,
            "berry_esseen": self.berry_esseen,
            "currents": {"n": self.currents},
            "seeds_check": self.seeds_check,
            "predicted": self.predicted,
            "ks_threshold": self.ks_threshold,
            "jacobi_params": self.jacobi_params,
        }


def load_spec(path_or_name: str) -> ExperimentSpec:
    """Spec from a TOML or JSON file, or the name of a preset."""
    p = Path(path_or_name)
    if not p.exists():
        if path_or_name in PRESETS:
            return ExperimentSpec.from_dict({"name": path_or_name, **PRESETS[path_or_name]})
        raise ConfigError(f"spec file {path_or_name!r} not found and not a preset name")
    text = p.read_text()
    try:
        if p.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            try:
                import tomllib
            except ModuleNotFoundError:  # Python < 3.11
                import tomli as tomllib
            data = tomllib.loads(text)
    except ValueError as exc:
        raise ConfigError(f"cannot parse {path_or_name}: {exc}") from None
    return ExperimentSpec.from_dict(data)


# --------------------------------------------------------------------------
# presets: one per lattice / ensemble family, plus the quartic Toda studies


def _preset(description, model, potential, s=2, *, measure_type="Type1", alpha=1.0, N=256, part="Re",
            tasks=("sample", "transfer", "verify-clt"), **extra):
    d = {"description": description, "model": model, "potential": potential, "alpha": alpha, "N": N,
         "measure_type": measure_type, "observable": {"s": s, "part": part}, "tasks": list(tasks)}
    d.update(extra)
    return d


PRESETS = {
    "toda-quadratic-clt": _preset(
        "CLT for the Toda lattice (quadratic potential, exact samples)", "toda", "x^2/2", 2,
        tasks=("sample", "transfer", "verify-clt", "susceptibility"), susceptibility={"pairs": [[1, 1], [2, 2], [1, 2]]}),
    "gaussian-beta-clt": _preset(
        "CLT for the real high-temperature beta ensemble", "gaussian-beta", "x^2/2", 2, measure_type="Type2", N=4096),
    "exp-toda-clt": _preset(
        "CLT for the exponential Toda lattice", "exp-toda", "x", 1, N=128, ks_threshold=0.025),
    "laguerre-clt": _preset(
        "CLT for the Laguerre beta ensemble", "laguerre", "x", 1, measure_type="Type2", N=256, ks_threshold=0.025),
    "volterra-clt": _preset(
        "CLT for the Volterra lattice", "volterra", "-x^2", 2),
    "antisym-clt": _preset(
        "CLT for the antisymmetric beta ensemble", "antisym", "-x^2", 2, measure_type="Type2", N=4096),
    "ablowitz-ladik-clt": _preset(
        "CLT for the defocusing Ablowitz-Ladik lattice", "ablowitz-ladik", "z", 1, N=128, ks_threshold=0.025),
    "circular-beta-clt": _preset(
        "CLT for the circular beta ensemble", "circular", "0", 1, measure_type="Type2", N=1024),
    "schur-flow-clt": _preset(
        "CLT for the defocusing Schur flow", "schur", "z", 1, N=128, ks_threshold=0.025),
    "jacobi-beta-clt": _preset(
        "CLT for the Jacobi beta ensemble at high temperature", "jacobi", "0", 1, measure_type="Type2", N=4096),
    "inb-clt": _preset(
        "CLT for INB lattices (additive, r = 1)", {"tag": "INBAdditive", "r": 1}, "x^2", 2, N=128,
        ks_threshold=0.025),
    "toda-quartic-clt": _preset(
        "Quartic Toda: operator CLT moments, susceptibility and current against Monte Carlo",
        "toda", "x^4+x^2/2", 2, tasks=("sample", "transfer", "verify-clt", "susceptibility", "currents"),
        sampler={"count": 40000}, susceptibility={"pairs": [[2, 2]]}, currents={"n": [1]}),
    "toda-quartic-decay": _preset(
        "Quartic Toda: exponential decay of conserved-density correlations", "toda", "x^4+x^2/2", 2,
        tasks=("sample", "decay"), sampler={"count": 100000}, decay={"m": 2, "max_distance": 20}),
    "toda-quartic-berry-esseen": _preset(
        "Quartic Toda: sqrt(N) scaling of the sup-CDF distance", "toda", "x^4+x^2/2", 2,
        tasks=("transfer", "berry-esseen"), berry_esseen={"Ns": [64, 256, 1024], "count": 50000}),
    "toda-seeds-check": _preset(
        "Seed and weed decomposition against dense traces", "toda", "x^8+x^2", 2,
        tasks=("seeds-check",), seeds_check={"Ns": [8, 12, 16], "draws": 100}),
}


def list_presets():
    return [(name, d["description"]) for name, d in PRESETS.items()]


# --------------------------------------------------------------------------
# running


def _threads(flag: int | None) -> int:
    env = os.environ.get("GGE_SPECTRA_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError("GGE_SPECTRA_THREADS must be an integer") from None
    return max(1, flag or os.cpu_count() or 1)


class _Run:
    def __init__(self, spec: ExperimentSpec, outdir: Path, threads: int, log: logging.Logger):
        self.spec = spec
        self.out = outdir
        self.threads = threads
        self.log = log
        self.failures = []
        self.batch = None
        self.quant = None

    def check(self, ok: bool, what: str):
        if ok:
            self.log.info("check passed: %s", what)
        else:
            self.log.error("check failed: %s", what)
            self.failures.append(what)
        return bool(ok)

    def write(self, name, obj):
        (self.out / name).write_text(dumps(obj))

    # tasks ---------------------------------------------------------------

    def sample(self):
        sp = self.spec
        obs = [TracePower(sp.s) if sp.part == "Re" else ImTracePower(sp.s)]
        for m, n in sp.susceptibility:
            obs += [TracePower(m), TracePower(n)]
        obs += [Current(n) for n in sp.currents]
        obs = list(dict.fromkeys(obs))
        cfg = sp.config()
        smp = sp.sampler
        store = "decay" in sp.tasks
        t0 = time.perf_counter()
        mcmc = dict(burn_in=int(smp["burn_in"]), thin=smp["thin"], chains=int(smp["chains"]), threads=self.threads)
        if smp["method"] == "direct":
            from .sampling import sample_direct

            self.batch = sample_direct(cfg, int(smp["count"]), smp["rng_seed"], obs, store)
        elif smp["method"] == "mcmc":
            self.batch = sample_mcmc(cfg, int(smp["count"]), rng_seed=smp["rng_seed"], observables=obs,
                                     store_configs=store, **mcmc)
        else:
            self.batch = stats.sample_auto(cfg, int(smp["count"]), smp["rng_seed"], obs, store, **mcmc)
        self.log.info("sampled %d configurations (%s) in %.1f s", len(self.batch),
                      self.batch.diagnostics.get("sampler"), time.perf_counter() - t0)
        self.batch.save_binary(self.out / "samples.bin")

    def transfer(self):
        sp = self.spec
        op = sp.operator
        kind = sp.operator_kind()
        t0 = time.perf_counter()
        q = transferop.clt_mean_and_variance(
            kind, sp.potential, sp.s, sp.part, sp.alpha, nodes_per_dim=op["nodes_per_dim"],
            deltas=tuple(op["deltas"]), type2=sp.measure_type == "Type2", M_quad=int(op["M_quad"]),
            jacobi_params=sp.jacobi_params)
        self.quant = q
        self.log.info("operator quantities in %.1f s", time.perf_counter() - t0)
        self.check(q.converged, "transfer: grid converged")
        self.check(q.lambda0 > 0 and q.gap > 0, "transfer: dominant eigenvalue positive with a gap")
        self.check(q.imag_residual_A < 1e-6 and q.imag_residual_sigma2 < 1e-6, "transfer: imaginary residuals")
        self.check(q.sigma2 >= 0, "transfer: sigma2 non-negative")
        self.operator_record = q.to_json(kind, sp.potential, sp.s, sp.alpha)

    def prediction(self):
        if self.spec.predicted is not None:
            return self.spec.predicted
        return self.quant

    def verify_clt(self):
        sp = self.spec
        rep = stats.clt_check(self.batch, sp.s, sp.part, self.prediction(), ks_threshold=sp.ks_threshold)
        slack = 0.0
        if sp.measure_type == "Type2":
            # boundary terms of the Type-2 density shift E[Tr] by O(1)
            slack = sp.s * (1.0 + abs(rep.predicted_A)) / sp.N
        mean_ok = abs(rep.empirical_mean - rep.predicted_A) < 3 * rep.empirical_mean_se + slack
        self.check(mean_ok, "verify-clt: empirical mean matches A")
        self.check(rep.var_ok, "verify-clt: empirical variance matches sigma2")
        self.check(rep.ks_ok, f"verify-clt: KS distance below {rep.ks_threshold}")
        rec = rep.to_json()
        rec.update(mean_slack=slack, mean_ok=mean_ok, passed=bool(mean_ok and rep.var_ok and rep.ks_ok))
        self.write("clt.json", rec)

    def susceptibility(self):
        sp = self.spec
        rows = []
        kind = sp.operator_kind()
        for m, n in sp.susceptibility:
            row = {"m": m, "n": n}
            if self.batch is not None:
                est = stats.susceptibility_empirical(self.batch, m, n)
                row.update(empirical=est.value, empirical_se=est.se)
            if "transfer" in sp.tasks and sp.measure_type == "Type1":
                d = transferop.susceptibility(kind, sp.potential, m, n, sp.alpha,
                                              nodes_per_dim=sp.operator["nodes_per_dim"], details=True)
                row.update(operator=d["C"], operator_imag_residual=d["imag_residual"], converged=d["converged"])
                self.check(d["converged"], f"susceptibility C[{m},{n}]: grid converged")
            if "empirical" in row and "operator" in row:
                ok = abs(row["empirical"] - row["operator"]) < 3 * row["empirical_se"]
                row["pass"] = ok
                self.check(ok, f"susceptibility C[{m},{n}]: operator within 3 SE of Monte Carlo")
            rows.append(row)
        self.write("susceptibility.json", {"alpha": sp.alpha, "N": sp.N, "entries": rows})

    def decay(self):
        d = self.spec.decay
        m = int(d.get("m", self.spec.s))
        try:
            rep = stats.correlation_decay(self.batch, m, m, d.get("max_distance"))
            rec = rep.to_json()
            self.check(rep.decay_detected and rep.fit_r2 > 0.9, "decay: negative slope with R^2 > 0.9")
        except NoDecayDetected as exc:
            # informational: the measure may have finite-range correlations
            self.log.info("no decay detected: %s", exc)
            rec = exc.report.to_json()
            if d.get("require", False):
                self.check(False, "decay: correlations above noise")
        self.write("decay.json", rec)

    def berry_esseen(self):
        sp = self.spec
        be = sp.berry_esseen
        pred = stats._prediction(self.prediction(), sp.measure_type)
        smp = sp.sampler
        rep = stats.berry_esseen_scan(
            sp.config(), sp.s, be.get("Ns", [64, 256, 1024]), int(be.get("count", smp["count"])),
            lambda N: pred, part=sp.part, rng_seed=smp["rng_seed"], burn_in=int(smp["burn_in"]),
            chains=int(smp["chains"]), threads=self.threads)
        self.check(rep.spread < 3.0, "berry-esseen: scaled distances within a factor 3")
        self.write("berry_esseen.json", rep.to_json())

    def currents(self):
        sp = self.spec
        out = []
        for n in sp.currents:
            d = transferop.toda_current_mean(sp.potential, n, sp.alpha, nodes_per_dim=sp.operator["nodes_per_dim"],
                                             details=True)
            row = {"n": n, "integral": d["integral"], "type2": d["type2"]}
            self.check(abs(d["integral"] - d["type2"]) < 1e-3, f"currents n={n}: both operator formulas agree")
            if self.batch is not None:
                x = self.batch.series[Current(n).name]
                se = (float(np.std(x, ddof=1) / math.sqrt(len(x))) if stats._is_direct(self.batch)
                      else batch_means_se(x))
                row.update(monte_carlo=float(np.mean(x)), monte_carlo_se=se)
                self.check(abs(row["monte_carlo"] - d["integral"]) < 3 * se,
                           f"currents n={n}: Monte Carlo within 3 SE")
            out.append(row)
        self.operator_record = {**getattr(self, "operator_record", {}), "currents": out}

    def seeds_check(self):
        sp = self.spec
        sc = sp.seeds_check
        rng = np.random.default_rng(int(sp.sampler["rng_seed"]))
        rows = []
        for N in sc.get("Ns", [8, 12, 16]):
            seed = extract_seed(sp.model, sp.potential, int(N))
            worst = max(verify_decomposition(seed, sp.model, sp.potential, random_coordinates(sp.model, int(N), rng))
                        for _ in range(int(sc.get("draws", 100))))
            rows.append({"N": int(N), "k": seed.k, "max_residual": worst})
            self.check(worst < 1e-10, f"seeds-check N={N}: residual below 1e-10")
        self.operator_record = {**getattr(self, "operator_record", {}), "seeds_check": rows}


def run(spec: ExperimentSpec | str, out_root: str | Path = "results", threads: int | None = None) -> int:
    """Execute a spec; returns the process exit code."""
    try:
        if not isinstance(spec, ExperimentSpec):
            spec = load_spec(spec)
        nthreads = _threads(threads)
    except (ConfigError, GGEError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    outdir = Path(out_root) / spec.name
    outdir.mkdir(parents=True, exist_ok=True)
    log = logging.getLogger(f"gge_spectra.run.{spec.name}")
    log.setLevel(logging.INFO)
    log.propagate = False
    for h in list(log.handlers):
        log.removeHandler(h)
    fh = logging.FileHandler(outdir / "log.txt", mode="w")
    fh.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    log.addHandler(fh)
    sh = logging.StreamHandler(sys.stderr)
    sh.setFormatter(logging.Formatter("[%(name)s] %(message)s"))
    log.addHandler(sh)
    (outdir / "spec.json").write_text(dumps(spec.to_json()))
    r = _Run(spec, outdir, nthreads, log)
    code = 0
    try:
        order = [("sample", r.sample), ("transfer", r.transfer), ("verify-clt", r.verify_clt),
                 ("susceptibility", r.susceptibility), ("decay", r.decay), ("berry-esseen", r.berry_esseen),
                 ("currents", r.currents), ("seeds-check", r.seeds_check)]
        for name, fn in order:
            if name in spec.tasks:
                log.info("task %s", name)
                fn()
        if hasattr(r, "operator_record"):
            r.write("operator.json", r.operator_record)
        code = 1 if r.failures else 0
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        code = 2
    except GGEError as exc:
        log.error("check failed: %s: %s", type(exc).__name__, exc)
        code = 1
    finally:
        log.info("exit %d", code)
        for h in (fh, sh):
            log.removeHandler(h)
            h.close()
    return code


# --------------------------------------------------------------------------
# seeds print


def _fmt_monos(monos, kind: ModelKind) -> str:
    parts = []
    for key, c in sorted(monos.items()):
        coef = f"{c.real:.17g}" if c.imag == 0 else f"({c.real:.17g}{c.imag:+.17g}j)"
        fac = "*".join(f"{v}[{s}]" + (f"^{p}" if p > 1 else "") for s, v, p in key)
        parts.append(f"{coef}*{fac}" if fac else coef)
    return " + ".join(parts) if parts else "0"


def _seeds_print(args) -> int:
    try:
        kind = ModelKind.parse(args.model, r=args.r, unit=args.unit)
        P = Polynomial.parse(args.potential)
        seed = extract_seed(kind, P, args.N)
    except (GGEError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    if args.json:
        sys.stdout.write(dumps({"model": kind.to_json(), "potential": P.to_json(), "N": args.N, "k": seed.k,
                                "loc": monomials_to_json(seed.loc), "cross": monomials_to_json(seed.cross),
                                "weed": monomials_to_json(seed.weed)}))
        return 0
    print(f"model {kind}, P = {P}, N = {args.N}, circular index k = {seed.k}")
    print(f"loc(X)     = {_fmt_monos(seed.loc, kind)}")
    print(f"cross(X,Y) = {_fmt_monos(seed.cross, kind)}")
    print("seed       = loc(X)/2 + loc(Y)/2 + cross(X,Y), Y the next block of k sites")
    print(f"weed       = {_fmt_monos(seed.weed, kind)}")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="gge-spectra", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    p_run = sub.add_parser("run", help="run an experiment spec (TOML/JSON file or preset name)")
    p_run.add_argument("spec")
    p_run.add_argument("--out", default="results")
    p_run.add_argument("--threads", type=int, default=None)
    p_pre = sub.add_parser("presets", help="list preset experiments")
    p_pre.add_argument("--json", action="store_true")
    p_seeds = sub.add_parser("seeds", help="seed utilities")
    seeds_sub = p_seeds.add_subparsers(dest="seeds_cmd", required=True)
    p_print = seeds_sub.add_parser("print", help="print the seed and weed of Tr P(M)")
    p_print.add_argument("--model", required=True)
    p_print.add_argument("--potential", required=True)
    p_print.add_argument("--N", type=int, default=12)
    p_print.add_argument("--r", type=int, default=None)
    p_print.add_argument("--unit", default=None)
    p_print.add_argument("--json", action="store_true")
    args = ap.parse_args(argv)
    if args.cmd == "run":
        return run(args.spec, args.out, args.threads)
    if args.cmd == "presets":
        if args.json:
            sys.stdout.write(dumps([{"name": n, "description": d, "spec": {"name": n, **PRESETS[n]}}
                                    for n, d in list_presets()]))
        else:
            w = max(len(n) for n in PRESETS)
            for n, d in list_presets():
                print(f"{n:<{w}}  {d}")
        return 0
    return _seeds_print(args)


if __name__ == "__main__":
    sys.exit(main())
