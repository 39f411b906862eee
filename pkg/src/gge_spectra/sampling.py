"""Sampling of generalized Gibbs ensembles and high-temperature beta ensembles.

Type-1 measures are ``prod_j F(x_j, alpha) exp(-Re Tr P(M))`` on periodic
lattices.  Type-2 measures use the non-periodic matrix, site-dependent
exponents with ``beta = 2 alpha / N`` and a boundary term pinning the last
coordinate.

Two samplers are provided.  :func:`sample_direct` draws exact i.i.d. samples
when the density factorizes (quadratic Toda, CMV with ``P = 0`` and a few
more).  :func:`sample_mcmc` runs Metropolis-within-Gibbs with single
coordinate updates whose energy difference only involves the monomials of
``Tr P(M)`` touching the updated site.
"""

from __future__ import annotations

import json
import math
import struct
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, MixingWarning, NonNormalizable, NotFactorizable, UnsupportedPotential
from .models import (
    Coordinates,
    ModelKind,
    build_matrix,
    coords_from_sites,
    site_array,
    site_fields,
)
from .potential import Polynomial
from .seeds import MonomialTable, check_potential, diagonal_monomials, trace_monomials, _factors, _pmul, _padd
from .timeseries import effective_sample_size, integrated_time

__all__ = [
    "BoundaryTerm",
    "GGEConfig",
    "SampleBatch",
    "TracePower",
    "ReTracePower",
    "ImTracePower",
    "LocalField",
    "Current",
    "sample_direct",
    "sample_mcmc",
    "observable_series",
    "log_density",
    "site_weights",
]

DIRECT_CHUNK = 1 << 23  # coordinates per chunk of direct draws

_NONPERIODIC = {
    "TodaPeriodic": "TodaNonPeriodic",
    "ExpTodaPeriodic": "LaguerreNonPeriodic",
    "VolterraPeriodic": "AntisymNonPeriodic",
    "CMVPeriodic": "CMVNonPeriodic",
}

# coordinate update codes shared with the kernels
REAL, POSITIVE, INTERVAL, DISK, PHASE, FROZEN, PAIRED = range(7)
F_IDENTITY, F_SQRT, F_CMV, F_CMV_REAL = range(4)


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class BoundaryTerm:
    """Distribution of the pinned last coordinate of a Type-2 measure.

    ``DiracAtZero``: the last off-diagonal entry vanishes.  ``UniformPhase``:
    the last Verblunsky coefficient is uniform on the unit circle.
    ``DiracVector``: the last coordinate is fixed to ``values``.
    """

    tag: str
    values: tuple = ()

    def __post_init__(self):
        if self.tag not in ("DiracAtZero", "UniformPhase", "DiracVector"):
            raise ConfigError(f"unknown boundary term {self.tag!r}")
        if self.tag == "DiracVector" and not self.values:
            raise ConfigError("DiracVector needs values")

    def to_json(self):
        return {"tag": self.tag, "values": list(self.values)}


def _default_boundary(kind: ModelKind) -> BoundaryTerm:
    if kind.family == "cmv":
        return BoundaryTerm("DiracVector", (-1.0,)) if kind.real_coeffs else BoundaryTerm("UniformPhase")
    return BoundaryTerm("DiracAtZero")


@dataclass(frozen=True)
class GGEConfig:
    """Target measure: model, pressure ``alpha``, potential and lattice size.

    A Type-2 request on a periodic model tag is mapped to its non-periodic
    counterpart (Toda to the Gaussian ensemble, exponential Toda to Laguerre,
    Volterra to the antisymmetric ensemble, Ablowitz-Ladik/Schur to the
    circular/Jacobi ensembles).  ``jacobi_params`` holds ``(a~, b~)`` for the
    real CMV Type-2 measure and defaults to ``a~ = b~ = (-1 + alpha/N)/2``.
    """

    kind: ModelKind
    alpha: float
    potential: Polynomial
    N: int
    measure_type: str = "Type1"
    boundary: BoundaryTerm | None = None
    jacobi_params: tuple | None = None

    def __post_init__(self):
        if isinstance(self.potential, str):
            object.__setattr__(self, "potential", Polynomial.parse(self.potential))
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", ModelKind.parse(self.kind))
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ConfigError("alpha must be a positive real")
        if self.measure_type not in ("Type1", "Type2"):
            raise ConfigError("measure_type must be 'Type1' or 'Type2'")
        kind = self.kind
        if self.measure_type == "Type2":
            if kind.is_inb:
                raise ConfigError("INB lattices have no Type-2 measure")
            if kind.periodic:
                kind = ModelKind(_NONPERIODIC[kind.tag], real_coeffs=kind.real_coeffs)
                object.__setattr__(self, "kind", kind)
            if self.boundary is None:
                object.__setattr__(self, "boundary", _default_boundary(kind))
            if kind.family == "cmv" and kind.real_coeffs and self.jacobi_params is None:
                t = (-1.0 + self.alpha / self.N) / 2
                object.__setattr__(self, "jacobi_params", (t, t))
        elif self.boundary is not None:
            raise ConfigError("boundary terms only apply to Type-2 measures")
        if self.N < 2:
            raise ConfigError("N must be at least 2")
        if kind.family == "cmv" and kind.periodic and self.N % 2:
            raise ConfigError("periodic CMV lattices need an even N")
        if kind.is_inb and self.N < kind.r + 1:
            raise ConfigError("INB lattices need N >= r + 1")
        try:
            check_potential(kind, self.potential)
        except UnsupportedPotential as exc:
            raise NonNormalizable(str(exc)) from None
        if self.potential.is_zero and kind.family != "cmv":
            raise NonNormalizable("a zero potential is only normalisable on compact domains")

    def to_json(self):
        return {
            "kind": self.kind.to_json(),
            "alpha": self.alpha,
            "potential": self.potential.to_json(),
            "N": self.N,
            "measure_type": self.measure_type,
            "boundary": None if self.boundary is None else self.boundary.to_json(),
            "jacobi_params": None if self.jacobi_params is None else list(self.jacobi_params),
        }

    @classmethod
    def from_json(cls, data) -> "GGEConfig":
        b = data.get("boundary")
        return cls(
            ModelKind.from_json(data["kind"]),
            float(data["alpha"]),
            Polynomial.from_json(data["potential"]),
            int(data["N"]),
            data.get("measure_type", "Type1"),
            None if b is None else BoundaryTerm(b["tag"], tuple(b.get("values", ()))),
            None if data.get("jacobi_params") is None else tuple(data["jacobi_params"]),
        )


# --------------------------------------------------------------------------
# per-site weights


def site_weights(config: GGEConfig):
    """Update codes ``(N, d)`` and log-weight exponents ``(N, d, 3)``.

    Exponent slots: positive axes use ``[log x]``; interval axes use
    ``[log(1-a^2), log(1-a), log(1+a)]``; the disk uses ``[log(1-|a|^2)]``
    stored on the first component.
    """
    kind, N, al = config.kind, config.N, config.alpha
    d = len(kind.site_vars)
    dom = np.zeros((N, d), dtype=np.intp)
    w = np.zeros((N, d, 3))
    fam = kind.family
    t2 = config.measure_type == "Type2"
    j1 = np.arange(1, N + 1)  # 1-based site labels
    last = not kind.periodic
    if fam == "jacobi":
        dom[:, 0] = REAL
        dom[:, 1] = POSITIVE
        w[:, 1, 0] = 2 * al * (N - j1) / N - 1 if t2 else 2 * al - 1
        if last:
            dom[-1, 1] = FROZEN
            w[-1, 1, 0] = 0
    elif fam == "gram":
        dom[:] = POSITIVE
        if t2:
            w[:, 0, 0] = 2 * al * (N - j1 + 1) / N - 1
            w[:, 1, 0] = 2 * al * (N - j1) / N - 1
        else:
            w[:, :, 0] = 2 * al - 1
        if last:
            dom[-1, 1] = FROZEN
            w[-1, 1, 0] = 0
    elif fam == "antisym":
        dom[:, 0] = POSITIVE
        w[:, 0, 0] = al * (1 - j1 / N) - 1 if t2 else al - 1
        if last:
            dom[-1, 0] = FROZEN
            w[-1, 0, 0] = 0
    elif fam == "cmv" and not kind.real_coeffs:
        dom[:, 0] = DISK
        dom[:, 1] = PAIRED
        w[:, 0, 0] = al * (1 - j1 / N) - 1 if t2 else al - 1
        if last:
            dom[-1, 0] = PHASE
            w[-1, 0, 0] = 0
    elif fam == "cmv":
        dom[:, 0] = INTERVAL
        if t2:
            at, bt = config.jacobi_params
            w[:, 0, 0] = al * (1 - j1 / N)
            w[:, 0, 1] = at + 1 - al / N
            even = j1 % 2 == 0
            w[even, 0, 2] += bt + 1 - al / N
            w[~even, 0, 1] += bt + 1 - al / N
        else:
            w[:, 0, 0] = al - 1
        if last:
            dom[-1, 0] = FROZEN
            w[-1, 0, :] = 0
    else:
        dom[:, 0] = POSITIVE
        w[:, 0, 0] = al - 1
    return dom, w


def _initial_sites(config: GGEConfig) -> np.ndarray:
    kind, N = config.kind, config.N
    dom, _ = site_weights(config)
    X = np.zeros((N, dom.shape[1]))
    X[dom == POSITIVE] = 1.0
    X[dom == DISK] = 0.5
    if kind.family == "cmv" and not kind.periodic:
        if kind.real_coeffs:
            vals = config.boundary.values if config.boundary else (-1.0,)
            X[-1, 0] = vals[0]
        else:
            X[-1] = (1.0, 0.0)
    return X


def _field_code(kind: ModelKind) -> int:
    if kind.family == "antisym":
        return F_SQRT
    if kind.family == "cmv":
        return F_CMV_REAL if kind.real_coeffs else F_CMV
    return F_IDENTITY


# --------------------------------------------------------------------------
# literal density (reference implementation for checks)


def log_density(config: GGEConfig, coords: Coordinates) -> float:
    """Unnormalised log-density of ``coords``, written directly from the measure.

    This is an independent reference for the per-site exponent tables used
    by the sampler: weights are spelled out per model and the energy uses the
    dense Lax matrix.
    """
    kind, N, al = config.kind, config.N, config.alpha
    t2 = config.measure_type == "Type2"
    L = build_matrix(kind, coords).entries
    P = config.potential
    tr = 0j
    Pk = np.eye(N, dtype=complex)
    for m in range(P.degree + 1):
        if P.coeffs[m] != 0:
            tr += P.coeffs[m] * np.trace(Pk)
        Pk = Pk @ L
    out = -tr.real
    fam = kind.family
    if fam == "jacobi":
        b = np.asarray(coords.b, dtype=float)
        for j in range(1, len(b) + 1):
            e = 2 * al * (N - j) / N - 1 if t2 else 2 * al - 1
            out += e * math.log(b[j - 1])
    elif fam == "gram":
        a = np.asarray(coords.a, dtype=float)
        b = np.asarray(coords.b, dtype=float)
        for j in range(1, N + 1):
            out += (2 * al * (N - j + 1) / N - 1 if t2 else 2 * al - 1) * math.log(a[j - 1])
        for j in range(1, len(b) + 1):
            out += (2 * al * (N - j) / N - 1 if t2 else 2 * al - 1) * math.log(b[j - 1])
    elif fam == "antisym":
        a = np.asarray(coords.a, dtype=float)
        for j in range(1, len(a) + 1):
            out += (al * (1 - j / N) - 1 if t2 else al - 1) * math.log(a[j - 1])
    elif fam == "cmv":
        a = np.asarray(coords.a, dtype=complex)
        n_free = N if kind.periodic else N - 1
        for j in range(1, n_free + 1):
            aj = a[j - 1]
            if kind.real_coeffs and t2:
                at, bt = config.jacobi_params
                x = aj.real
                out += al * (1 - j / N) * math.log(1 - x * x)
                out += (at + 1 - al / N) * math.log(1 - x)
                out += (bt + 1 - al / N) * math.log(1 + (-1) ** j * x)
            else:
                e = al * (1 - j / N) - 1 if t2 else al - 1
                out += e * math.log(1 - abs(aj) ** 2)
    else:
        v = coords.b if kind.unit == "a" else coords.a
        out += (al - 1) * float(np.sum(np.log(np.asarray(v, dtype=float))))
    return float(out)


# --------------------------------------------------------------------------
# energy tables


@dataclass
class _EnergyTables:
    coef: np.ndarray
    mstart: np.ndarray
    fsite: np.ndarray
    ffield: np.ndarray
    fpow: np.ndarray
    sstart: np.ndarray
    smono: np.ndarray
    all_ids: np.ndarray
    complex_fields: bool


def _energy_tables(config: GGEConfig) -> _EnergyTables:
    kind, N = config.kind, config.N
    monos = trace_monomials(kind, config.potential, N)
    monos.pop((), None)
    vidx = {v: i for i, v in enumerate(kind.field_vars)}
    keys = sorted(monos)
    cplx = _field_code(kind) == F_CMV
    coef = np.array([monos[k] for k in keys], dtype=complex)
    if not cplx:
        coef = coef.real.copy()
    mstart = np.zeros(len(keys) + 1, dtype=np.intp)
    fs, ff, fp = [], [], []
    touch = [[] for _ in range(N)]
    for i, key in enumerate(keys):
        for s, v, p in key:
            fs.append(s)
            ff.append(vidx[v])
            fp.append(p)
        mstart[i + 1] = len(fs)
        for s in sorted({s for s, _, _ in key}):
            touch[s].append(i)
    sstart = np.zeros(N + 1, dtype=np.intp)
    sstart[1:] = np.cumsum([len(t) for t in touch])
    smono = np.array([i for t in touch for i in t], dtype=np.intp)
    return _EnergyTables(
        coef,
        mstart,
        np.array(fs, dtype=np.intp),
        np.array(ff, dtype=np.intp),
        np.array(fp, dtype=np.intp),
        sstart,
        smono,
        np.arange(len(keys), dtype=np.intp),
        cplx,
    )


def _fields_of(config: GGEConfig, X: np.ndarray, cplx: bool) -> np.ndarray:
    F = site_fields(config.kind, X[None])[0]
    return np.ascontiguousarray(F if cplx else F.real)


# --------------------------------------------------------------------------
# observables


@dataclass(frozen=True)
class TracePower:
    """Real part of ``Tr M^s`` (the trace itself for real spectra)."""

    s: int

    @property
    def name(self):
        return f"TracePower({self.s})"


@dataclass(frozen=True)
class ReTracePower:
    s: int

    @property
    def name(self):
        return f"ReTracePower({self.s})"


@dataclass(frozen=True)
class ImTracePower:
    s: int

    @property
    def name(self):
        return f"ImTracePower({self.s})"


@dataclass(frozen=True)
class LocalField:
    """Conserved density ``[M^m]_jj``."""

    m: int
    j: int

    @property
    def name(self):
        return f"LocalField({self.m},{self.j})"


@dataclass(frozen=True)
class Current:
    """Toda current ``[L^n L_down]_jj``; ``j=None`` averages over sites.

    ``L_down`` keeps the sub-diagonal of ``L`` and the corner entry
    ``(1, N)``, so that ``J_j = [L^n]_{j, j+1} b_j`` for every site and
    ``J_j = a_j`` for ``n = 0``.
    """

    n: int
    j: int | None = None

    @property
    def name(self):
        return f"Current({self.n},{'mean' if self.j is None else self.j})"


def _current_monomials(kind: ModelKind, n: int, N: int, j: int) -> dict:
    if kind.family != "jacobi":
        raise ValueError("currents are defined for Toda-type (Jacobi) models only")
    if n == 0:
        return {((j, "a", 1),): 1.0 + 0j}
    col = (j + 1) % N
    if not kind.periodic and j == N - 1:
        return {}
    (L,) = _factors(kind, N)
    v = {j: {(): 1.0 + 0j}}
    for _ in range(n):
        w = {}
        for row, poly in v.items():
            for c, f in L[row]:
                _padd(w.setdefault(c, {}), _pmul(poly, f))
        v = w
    entry = v.get(col, {})
    return {k: c for k, c in _pmul(entry, {((j, "b", 1),): 1.0 + 0j}).items() if c != 0}


def _observable_table(kind: ModelKind, obs, N: int):
    """(MonomialTable, part, scale) with value = scale * part(table)."""
    if isinstance(obs, (TracePower, ReTracePower, ImTracePower)):
        if isinstance(obs, ImTracePower) and kind.family != "cmv":
            raise ValueError("imaginary parts are only defined for CMV models")
        monos = trace_monomials(kind, Polynomial.monomial(obs.s), N)
        part = "imag" if isinstance(obs, ImTracePower) else "real"
        return MonomialTable(monos, kind.field_vars), part, 1.0
    if isinstance(obs, LocalField):
        if not 0 <= obs.j < N:
            raise IndexError(f"site {obs.j} outside [0, {N})")
        return MonomialTable(diagonal_monomials(kind, N, obs.m, obs.j), kind.field_vars), "real", 1.0
    if isinstance(obs, Current):
        if obs.j is None:
            monos = {}
            if kind.periodic:
                from .seeds import _shift

                base = _current_monomials(kind, obs.n, N, 0)
                for j in range(N):
                    _padd(monos, _shift(base, j, N))
            else:
                for j in range(N):
                    _padd(monos, _current_monomials(kind, obs.n, N, j))
            return MonomialTable(monos, kind.field_vars), "real", 1.0 / N
        if not 0 <= obs.j < N:
            raise IndexError(f"site {obs.j} outside [0, {N})")
        return MonomialTable(_current_monomials(kind, obs.n, N, obs.j), kind.field_vars), "real", 1.0
    raise TypeError(f"unknown observable {obs!r}")


class _ObservableEvaluator:
    def __init__(self, kind, observables, N):
        self.kind = kind
        self.obs = list(observables)
        self.tables = [_observable_table(kind, o, N) for o in self.obs]

    def __call__(self, sites: np.ndarray) -> dict:
        F = site_fields(self.kind, sites)
        out = {}
        for o, (tab, part, scale) in zip(self.obs, self.tables):
            val = tab.evaluate(F)
            out[o.name] = scale * (val.imag if part == "imag" else val.real)
        return out


def parse_observable(text: str):
    """``"TracePower(2)"``, ``"LocalField(2,0)"``, ``"Current(1)"`` and so on."""
    text = text.strip()
    name, _, rest = text.partition("(")
    args = [a.strip() for a in rest.rstrip(")").split(",") if a.strip()]
    cls = {"TracePower": TracePower, "ReTracePower": ReTracePower, "ImTracePower": ImTracePower,
           "LocalField": LocalField, "Current": Current}.get(name)
    if cls is None:
        raise ValueError(f"unknown observable {text!r}")
    vals = [None if a in ("mean", "None") else int(a) for a in args]
    return cls(*vals)


# --------------------------------------------------------------------------
# sample container


@dataclass
class SampleBatch:
    """Samples of one configuration: per-site arrays and/or observable series.

    ``sites`` has shape ``(S, N, d)`` (``None`` when configurations were not
    stored); ``series`` maps observable names to length-``S`` vectors.
    """

    config: GGEConfig
    sites: np.ndarray | None
    series: dict = field(default_factory=dict)
    weights: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    def __len__(self):
        if self.sites is not None:
            return self.sites.shape[0]
        return len(next(iter(self.series.values()))) if self.series else 0

    @property
    def configs(self) -> list:
        if self.sites is None:
            raise ValueError("configurations were not stored for this batch")
        return [coords_from_sites(self.config.kind, x) for x in self.sites]

    def _header(self):
        return {
            "config": self.config.to_json(),
            "diagnostics": _jsonable(self.diagnostics),
            "count": len(self),
            "site_shape": None if self.sites is None else list(self.sites.shape[1:]),
            "series": sorted(self.series),
            "has_weights": self.weights is not None,
        }

    def save_binary(self, path) -> None:
        """Little-endian f64 columns after a length-prefixed JSON header."""
        head = json.dumps(self._header()).encode()
        with open(path, "wb") as fh:
            fh.write(struct.pack("<Q", len(head)))
            fh.write(head)
            if self.sites is not None:
                S = self.sites.shape[0]
                cols = self.sites.reshape(S, -1).T
                fh.write(np.ascontiguousarray(cols, dtype="<f8").tobytes())
            for name in sorted(self.series):
                fh.write(np.ascontiguousarray(self.series[name], dtype="<f8").tobytes())
            if self.weights is not None:
                fh.write(np.ascontiguousarray(self.weights, dtype="<f8").tobytes())

    @classmethod
    def load_binary(cls, path) -> "SampleBatch":
        with open(path, "rb") as fh:
            (n,) = struct.unpack("<Q", fh.read(8))
            head = json.loads(fh.read(n))
            data = np.frombuffer(fh.read(), dtype="<f8")
        S = head["count"]
        pos = 0
        sites = None
        if head["site_shape"] is not None:
            N, d = head["site_shape"]
            size = S * N * d
            sites = data[pos:pos + size].reshape(N * d, S).T.reshape(S, N, d).copy()
            pos += size
        series = {}
        for name in head["series"]:
            series[name] = data[pos:pos + S].copy()
            pos += S
        weights = data[pos:pos + S].copy() if head["has_weights"] else None
        return cls(GGEConfig.from_json(head["config"]), sites, series, weights, head["diagnostics"])

    def to_csv(self, path, max_rows: int = 100_000) -> None:
        if len(self) > max_rows:
            raise ValueError("batch too large for CSV export; use save_binary")
        cols, names = [], []
        if self.sites is not None:
            S, N, d = self.sites.shape
            for j in range(N):
                for c, v in enumerate(self.config.kind.site_vars):
                    names.append(f"{v}_{j}")
                    cols.append(self.sites[:, j, c])
        for name in sorted(self.series):
            names.append(name)
            cols.append(self.series[name])
        if self.weights is not None:
            names.append("weight")
            cols.append(self.weights)
        arr = np.column_stack(cols) if cols else np.zeros((0, 0))
        np.savetxt(path, arr, delimiter=",", header=",".join(names), comments="", fmt="%.17g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# --------------------------------------------------------------------------
# direct sampling


def _quadratic_coeff(P: Polynomial):
    """``c`` when ``P = c0 + c x^2`` (real), else ``None``."""
    if P.degree != 2 or not P.is_real or (len(P.coeffs) > 1 and P.coeffs[1] != 0):
        return None
    return P.coeffs[2].real


def sample_direct(config: GGEConfig, count: int, rng_seed=0, observables=(), store_configs: bool = True) -> SampleBatch:
    """Exact i.i.d. samples for factorizable measures.

    Supported: Toda (Type 1 and 2) with ``P = c x^2``; Volterra/antisymmetric
    with ``P = -c x^2``; CMV models with ``P = 0``.
    """
    kind, N = config.kind, config.N
    rng = np.random.default_rng(rng_seed)
    d = len(kind.site_vars)
    evaluate = _ObservableEvaluator(kind, observables, N) if observables else None
    # without stored configurations, draw in chunks of about 2^23 coordinates
    step = count if store_configs else max(1, min(count, DIRECT_CHUNK // (N * d)))
    parts, chunks = [], []
    for lo in range(0, count, step):
        X = _direct_draws(config, min(step, count - lo), rng)
        if evaluate is not None:
            parts.append(evaluate(X))
        if store_configs:
            chunks.append(X)
    series = {key: np.concatenate([p[key] for p in parts]) for key in parts[0]} if parts else {}
    X = np.concatenate(chunks) if store_configs else None
    diag = {"acceptance_rate": 1.0, "chain_length": count, "burn_in": 0, "sampler": "direct",
            "effective_sample_size": {k: float(count) for k in series}}
    return SampleBatch(config, X, series, None, diag)


def _direct_draws(config: GGEConfig, count: int, rng) -> np.ndarray:
    kind, N, al = config.kind, config.N, config.alpha
    P = config.potential
    t2 = config.measure_type == "Type2"
    j1 = np.arange(1, N + 1)
    d = len(kind.site_vars)
    X = np.zeros((count, N, d))
    fam = kind.family
    c = _quadratic_coeff(P)
    if fam == "jacobi" and c is not None and c > 0:
        # exp(-c Tr L^2) = prod exp(-c a^2) exp(-2c b^2)
        X[:, :, 0] = rng.normal(0.0, math.sqrt(1 / (2 * c)), (count, N))
        shape = 2 * al * (N - j1) / N if t2 else np.full(N, 2 * al)
        nb = N if kind.periodic else N - 1
        X[:, :nb, 1] = np.sqrt(rng.chisquare(shape[:nb], (count, nb))) / (2 * math.sqrt(c))
    elif fam == "antisym" and c is not None and c < 0:
        # Tr L^2 = -2 sum a_j, so exp(|c| Tr L^2) = prod exp(-2|c| a_j)
        shape = al * (1 - j1 / N) if t2 else np.full(N, float(al))
        n = N if kind.periodic else N - 1
        X[:, :n, 0] = rng.gamma(shape[:n], 1 / (2 * abs(c)), (count, n))
    elif fam == "cmv" and P.is_zero:
        n = N if kind.periodic else N - 1
        par = al * (1 - j1 / N) if t2 else np.full(N, float(al))
        if kind.real_coeffs:
            if t2:
                at, bt = config.jacobi_params
                e_minus = par + at + 1 - al / N + np.where(j1 % 2 == 0, 0.0, bt + 1 - al / N)
                e_plus = par + np.where(j1 % 2 == 0, bt + 1 - al / N, 0.0)
            else:
                e_minus = e_plus = par - 1
            # (1-a)^{e-} (1+a)^{e+} on (-1, 1): (1+a)/2 ~ Beta(e+ + 1, e- + 1)
            B = rng.beta(e_plus[:n] + 1, e_minus[:n] + 1, (count, n))
            X[:, :n, 0] = 2 * B - 1
            if not kind.periodic:
                X[:, -1, 0] = config.boundary.values[0] if t2 else -1.0
        else:
            u = rng.beta(1.0, par[:n], (count, n))
            th = rng.uniform(0, 2 * np.pi, (count, n))
            X[:, :n, 0] = np.sqrt(u) * np.cos(th)
            X[:, :n, 1] = np.sqrt(u) * np.sin(th)
            if not kind.periodic:
                th = rng.uniform(0, 2 * np.pi, count)
                X[:, -1, 0] = np.cos(th)
                X[:, -1, 1] = np.sin(th)
    else:
        raise NotFactorizable(f"no exact sampler for {kind} with P = {P}; use sample_mcmc")
    return X


# --------------------------------------------------------------------------
# MCMC


class _Chain:
    def __init__(self, config: GGEConfig, tables: _EnergyTables, backend, rng, init=None):
        self.config = config
        self.t = tables
        self.backend = backend
        self.rng = rng
        self.dom, self.wexp = site_weights(config)
        self.X = np.ascontiguousarray(_initial_sites(config) if init is None else np.array(init, dtype=float))
        self.F = _fields_of(config, self.X, tables.complex_fields)
        self.fcode = _field_code(config.kind)
        self.logstep = np.full(self.dom.shape, math.log(0.5))
        self.logstep[self.dom == DISK] = 0.0
        self.logstep[self.dom == PAIRED] = 0.0
        self.acc = np.zeros(self.dom.shape, dtype=np.intp)
        self.tries = np.zeros(self.dom.shape, dtype=np.intp)

    def run(self, S: int, record_energy: bool = False) -> np.ndarray:
        N, d = self.dom.shape
        z = self.rng.standard_normal((S, N, d))
        u = self.rng.random((S, N, d))
        energy = np.zeros(S if record_energy else 0)
        t = self.t
        self.backend.sweeps(self.X, self.F, self.fcode, t.coef, t.mstart, t.fsite, t.ffield, t.fpow,
                            t.sstart, t.smono, t.all_ids, self.dom, self.wexp, self.logstep,
                            z, u, self.acc, self.tries, energy)
        return energy

    def reset_counts(self):
        self.acc[:] = 0
        self.tries[:] = 0

    def adapt(self, gain: float):
        """Robbins-Monro step on log step sizes towards 44% acceptance."""
        active = self.tries > 0
        rate = np.where(active, self.acc / np.maximum(self.tries, 1), 0.44)
        self.logstep += gain * (rate - 0.44)
        disk = self.dom == DISK
        if disk.any():
            # the angular step follows the radial one
            idx = np.nonzero(disk)
            self.logstep[idx[0], idx[1] + 1] = self.logstep[idx]
        np.clip(self.logstep, -12.0, 3.0, out=self.logstep)
        self.reset_counts()


def _split(count: int, chains: int):
    base, extra = divmod(count, chains)
    return [base + (1 if i < extra else 0) for i in range(chains)]


def sample_mcmc(
    config: GGEConfig,
    count: int,
    thin: int | None = None,
    burn_in: int = 1000,
    rng_seed=0,
    *,
    chains: int = 1,
    threads: int = 1,
    observables=(),
    store_configs: bool = True,
    backend: str | None = None,
    init=None,
    adapt_every: int = 25,
) -> SampleBatch:
    """Metropolis-within-Gibbs samples of the exact unnormalised density.

    Proposals: additive random walk on real axes, multiplicative (log-scale)
    walk on positive axes, ``atanh``-scale walk on ``(-1, 1)``, and a joint
    walk in ``(logit |a|^2, arg a)`` inside the unit disk.  Step sizes adapt
    during burn-in only (Robbins-Monro towards 44% acceptance) and are then
    frozen.  ``thin=None`` uses the integrated autocorrelation time of the
    energy measured during the second half of burn-in.

    Chains get independent streams spawned from ``rng_seed`` and are merged in
    chain order, so results do not depend on ``threads``.
    """
    if count < 1:
        raise ConfigError("count must be positive")
    if burn_in < 0:
        raise ConfigError("burn_in must be non-negative")
    be = kernels.get_backend(backend)
    tables = _energy_tables(config)
    evaluator = _ObservableEvaluator(config.kind, observables, config.N) if observables else None
    seqs = np.random.SeedSequence(rng_seed).spawn(chains)
    counts = _split(count, chains)

    def one(c):
        rng = np.random.default_rng(seqs[c])
        ch = _Chain(config, tables, be, rng, init)
        trace = []
        done = 0
        k = 0
        while done < burn_in:
            S = min(adapt_every, burn_in - done)
            e = ch.run(S, record_energy=done >= burn_in // 2)
            trace.append(e)
            done += S
            k += 1
            ch.adapt(1.0 / math.sqrt(k))
        ch.reset_counts()
        trace = np.concatenate(trace) if trace else np.zeros(0)
        tau = integrated_time(trace) if len(trace) >= 20 else 1.0
        th = thin if thin is not None else max(1, int(round(tau)))
        n = counts[c]
        store = np.empty((n,) + ch.X.shape) if store_configs else None
        buf = []
        series = {o.name: [] for o in observables}
        for i in range(n):
            ch.run(th)
            if store is not None:
                store[i] = ch.X
            if evaluator is not None:
                buf.append(ch.X.copy())
                if len(buf) == 256 or i == n - 1:
                    vals = evaluator(np.array(buf))
                    for key, v in vals.items():
                        series[key].append(v)
                    buf = []
        series = {k: (np.concatenate(v) if v else np.zeros(0)) for k, v in series.items()}
        return store, series, ch.acc.sum(), ch.tries.sum(), tau, th, ch.logstep.copy()

    if threads > 1 and chains > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(chains)))
    else:
        results = [one(c) for c in range(chains)]
    sites = np.concatenate([r[0] for r in results]) if store_configs else None
    series = {o.name: np.concatenate([r[1][o.name] for r in results]) for o in observables}
    acc = sum(int(r[2]) for r in results)
    tries = sum(int(r[3]) for r in results)
    rate = acc / tries if tries else 1.0
    diag = {
        "acceptance_rate": rate,
        "chain_length": int(sum(counts[i] * results[i][5] for i in range(chains)) + chains * burn_in),
        "burn_in": burn_in,
        "thin": [int(r[5]) for r in results],
        "tau_energy": [float(r[4]) for r in results],
        "chains": chains,
        "sampler": "mcmc",
        "backend": "compiled" if be is not kernels._kernels_py else "python",
        "effective_sample_size": {k: _chain_ess([r[1][k] for r in results]) for k in series},
    }
    if not 0.1 <= rate <= 0.7:
        warnings.warn(f"MCMC acceptance rate {rate:.3f} outside [0.1, 0.7]", MixingWarning, stacklevel=2)
    return SampleBatch(config, sites, series, None, diag)


def _chain_ess(parts) -> float:
    return float(sum(effective_sample_size(p) for p in parts if len(p) > 3))


def observable_series(batch: SampleBatch, observable) -> np.ndarray:
    """One real value per stored configuration."""
    if isinstance(observable, str):
        observable = parse_observable(observable)
    if observable.name in batch.series:
        return np.asarray(batch.series[observable.name])
    if batch.sites is None:
        raise ValueError(f"{observable.name} was not recorded and configurations were not stored")
    ev = _ObservableEvaluator(batch.config.kind, [observable], batch.config.N)
    out = []
    for s in range(0, len(batch), 512):
        out.append(ev(batch.sites[s:s + 512])[observable.name])
    return np.concatenate(out) if out else np.zeros(0)


def internal_log_density(config: GGEConfig, sites: np.ndarray) -> float:
    """Unnormalised log-density as the sampler sees it (exponent tables plus monomial energy)."""
    tables = _energy_tables(config)
    be = kernels.get_backend("python")
    X = np.ascontiguousarray(np.asarray(sites, dtype=float))
    F = _fields_of(config, X, tables.complex_fields)
    e = be.total_energy(X, F, _field_code(config.kind), tables.coef, tables.mstart, tables.fsite,
                        tables.ffield, tables.fpow, tables.all_ids)
    dom, w = site_weights(config)
    from ._kernels_py import _log_weight

    lw = sum(_log_weight(X, w, dom, j, c) for j in range(config.N) for c in range(X.shape[1]))
    return float(lw - e)
