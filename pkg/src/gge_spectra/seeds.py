"""Circular seed/weed decompositions of trace observables.

An extensive observable ``Y(x) = Tr P(M(x))`` over a chain of ``N`` sites is
written as

    Y(x) = sum_{J=1}^{M-1} seed(X_J, X_{J+1}) + weed(X_1, X_M, x_{kM+1..N})

where ``X_J`` are consecutive blocks of ``k`` sites and ``N = kM + l``.  Seeds
and weeds are explicit monomial lists in the per-site variables of the model
(``a``, ``b`` for Jacobi and Gram matrices, ``a`` for antisymmetric and INB
matrices, ``a``, ``abar``, ``rho`` for CMV matrices).

Diagonal entries ``[M^m]_jj`` are obtained either from the super-Motzkin path
expansion (Jacobi matrices) or by propagating a symbolic unit vector through
the sparse factors of ``M``.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import IncompatibleSeeds, TruncationWarning, UnsupportedPotential
from .models import ModelKind, Coordinates, build_matrix, site_array, site_fields
from .potential import Polynomial

__all__ = [
    "MotzkinTerm",
    "motzkin_terms",
    "local_field",
    "MonomialTable",
    "Seed",
    "check_potential",
    "diagonal_monomials",
    "trace_monomials",
    "generator_monomials",
    "extract_seed",
    "extract_seeds",
    "verify_decomposition",
]

MAX_SEED_DEGREE = 12


# --------------------------------------------------------------------------
# super-Motzkin expansion of periodic Jacobi matrices


@dataclass(frozen=True)
class MotzkinTerm:
    """One path class: ``n[i]`` up/down pairs over the edge ``(j+i, j+i+1)``,
    ``q[i]`` level steps at ``j+i``, and the number ``rho`` of such paths."""

    n: tuple
    q: tuple
    rho: int
    lo: int

    @property
    def m(self) -> int:
        return sum(2 * x for x in self.n) + sum(self.q)

    def exponents(self):
        """Yield ``(offset, var, power)`` with ``a_{j+i}^{q_i}`` and ``b_{j+i}^{2 n_i}``."""
        for idx, (ni, qi) in enumerate(zip(self.n, self.q)):
            i = self.lo + idx
            if qi:
                yield (i, "a", qi)
            if ni:
                yield (i, "b", 2 * ni)


def _binom(n, k):
    if k == 0:
        return 1
    if n < 0 or k < 0 or k > n:
        return 0
    return math.comb(n, k)


def _rho(n, q, lo):
    g = lambda d, i: d[i - lo] if 0 <= i - lo < len(d) else 0  # noqa: E731
    hi = lo + len(n) - 1
    val = _binom(g(n, -1) + g(n, 0) + g(q, 0), g(q, 0)) * _binom(g(n, -1) + g(n, 0), g(n, 0))
    for i in range(lo, hi + 1):
        if i == -1:
            continue
        if i >= 0:
            val *= _binom(g(n, i) + g(n, i + 1) + g(q, i + 1) - 1, g(q, i + 1))
            val *= _binom(g(n, i) + g(n, i + 1) - 1, g(n, i + 1))
        else:
            val *= _binom(g(n, i) + g(n, i + 1) + g(q, i + 1) - 1, g(q, i + 1))
            val *= _binom(g(n, i) + g(n, i + 1) - 1, g(n, i))
    return val


@lru_cache(maxsize=None)
def _motzkin(m: int):
    mt = m // 2
    lo, hi = -mt, mt
    width = hi - lo + 1
    out = []

    def rec(idx, rem, n, q):
        if idx == width:
            if rem == 0:
                out.append((tuple(n), tuple(q)))
            return
        for ni in range(rem // 2 + 1):
            for qi in range(rem - 2 * ni + 1):
                n.append(ni)
                q.append(qi)
                rec(idx + 1, rem - 2 * ni - qi, n, q)
                n.pop()
                q.pop()

    rec(0, m, [], [])
    terms = []
    for n, q in sorted(out):
        ok = True
        for idx in range(width):
            i = lo + idx
            if n[idx]:
                continue
            # a path leaves level i only through the edge it counts
            if i >= 0 and idx + 1 < width and (n[idx + 1] or q[idx + 1]):
                ok = False
            if i < 0 and (q[idx] or (idx > 0 and n[idx - 1])):
                ok = False
        if not ok:
            continue
        rho = _rho(n, q, lo)
        if rho > 0:
            terms.append(MotzkinTerm(n, q, rho, lo))
    return tuple(terms)


def motzkin_terms(m: int) -> list:
    """All super-Motzkin path classes contributing to ``[L^m]_jj``, with multiplicities."""
    if not 1 <= m <= 12:
        raise ValueError("m must lie in [1, 12]")
    return list(_motzkin(m))


def local_field(term_list, j: int, coords: Coordinates) -> float:
    """``[L^m]_jj`` of a periodic Jacobi matrix from its path expansion."""
    a = np.asarray(coords.a, dtype=float)
    b = np.asarray(coords.b, dtype=float)
    N = len(a)
    if not 0 <= j < N:
        raise IndexError(f"site {j} outside [0, {N})")
    m = term_list[0].m if term_list else 0
    if m >= N:
        # paths winding around the ring are not part of the expansion
        raise ValueError(f"the path expansion needs N > m (got N={N}, m={m})")
    total = 0.0
    for t in term_list:
        v = float(t.rho)
        for off, var, p in t.exponents():
            v *= (a if var == "a" else b)[(j + off) % N] ** p
        total += v
    return total


# --------------------------------------------------------------------------
# sparse symbolic polynomials: dict {((site, var, power), ...): coeff}

_ONE = {(): 1.0 + 0j}


def _kmul(k1, k2):
    if not k1:
        return k2
    if not k2:
        return k1
    acc = {}
    for s, v, p in k1:
        acc[(s, v)] = acc.get((s, v), 0) + p
    for s, v, p in k2:
        acc[(s, v)] = acc.get((s, v), 0) + p
    return tuple(sorted((s, v, p) for (s, v), p in acc.items()))


def _kmul1(key, f):
    fs, fv, fp = f
    i = bisect_left(key, (fs, fv))
    if i < len(key) and key[i][0] == fs and key[i][1] == fv:
        return key[:i] + ((fs, fv, key[i][2] + fp),) + key[i + 1:]
    return key[:i] + (f,) + key[i:]


def _pmul(p, q):
    out = {}
    if len(q) == 1:
        ((k2, c2),) = q.items()
        if len(k2) == 1:
            f = k2[0]
            for k1, c1 in p.items():
                k = _kmul1(k1, f)
                out[k] = out.get(k, 0) + c1 * c2
            return out
        if not k2:
            return {k: c * c2 for k, c in p.items()}
    for k1, c1 in p.items():
        for k2, c2 in q.items():
            k = _kmul(k1, k2)
            out[k] = out.get(k, 0) + c1 * c2
    return out


def _padd(acc, p, scale=1.0):
    for k, c in p.items():
        acc[k] = acc.get(k, 0) + scale * c
    return acc


def _var(site, name, coeff=1.0):
    return {((site, name, 1),): complex(coeff)}


def _const(c):
    return {(): complex(c)}


def _factors(kind: ModelKind, n: int, periodic: bool | None = None):
    """Sparse symbolic factors whose product is the Lax matrix (rows: list of (col, poly))."""
    per = kind.periodic if periodic is None else periodic
    fam = kind.family
    rows = lambda: [[] for _ in range(n)]  # noqa: E731
    nb = n if per else n - 1
    if fam == "jacobi":
        L = rows()
        for i in range(n):
            L[i].append((i, _var(i, "a")))
        for i in range(nb):
            j = (i + 1) % n
            L[i].append((j, _var(i, "b")))
            L[j].append((i, _var(i, "b")))
        return [L]
    if fam == "gram":
        B, Bt = rows(), rows()
        for i in range(n):
            B[i].append((i, _var(i, "a")))
            Bt[i].append((i, _var(i, "a")))
        for i in range(nb):
            j = (i + 1) % n
            B[i].append((j, _var(i, "b")))
            Bt[j].append((i, _var(i, "b")))
        return [B, Bt]
    if fam == "antisym":
        L = rows()
        for i in range(nb):
            j = (i + 1) % n
            L[i].append((j, _var(i, "s")))
            L[j].append((i, _var(i, "s", -1.0)))
        return [L]
    if fam == "cmv":
        odd, even = rows(), rows()
        for j in range(1, n + 1):
            target = odd if j % 2 == 1 else even
            s = j - 1
            xi = [[_var(s, "abar"), _var(s, "rho")], [_var(s, "rho"), _var(s, "a", -1.0)]]
            if s + 1 < n:
                for r in range(2):
                    for c in range(2):
                        target[s + r].append((s + c, xi[r][c]))
            elif per:
                target[n - 1].append((n - 1, xi[0][0]))
                target[n - 1].append((0, xi[0][1]))
                target[0].append((n - 1, xi[1][0]))
                target[0].append((0, xi[1][1]))
            else:
                target[s].append((s, xi[0][0]))
        if per:
            return [odd, even]
        even[0].append((0, _const(1.0)))
        return [even, odd]
    L = rows()
    r = kind.r
    for i in range(n):
        up = _const(1.0) if kind.unit == "a" else _var(i, "a")
        low = _const(1.0) if kind.unit == "b" else _var(i, "b")
        L[i].append(((i + 1) % n, up))
        L[(i + r) % n].append((i, low))
    return [L]


def _band(kind: ModelKind) -> int:
    return {"jacobi": 1, "gram": 1, "antisym": 1, "cmv": 2}.get(kind.family, max(1, kind.r or 1))


def _diag_power(factors, n, m, i):
    v = {i: _ONE}
    for _ in range(m):
        for F in factors:
            w = {}
            for row, poly in v.items():
                for col, f in F[row]:
                    prod = _pmul(poly, f)
                    if col in w:
                        _padd(w[col], prod)
                    else:
                        w[col] = prod
            v = w
    return {k: c for k, c in v.get(i, {}).items() if c != 0}


def _convert_antisym(poly):
    out = {}
    for key, c in poly.items():
        new = []
        for s, v, p in key:
            if v == "s" and p % 2 == 0:
                new.append((s, "a", p // 2))
            else:
                new.append((s, v, p))
        k = tuple(sorted(new))
        out[k] = out.get(k, 0) + c
    return out


def _clean(poly, tol=0.0):
    return {k: c for k, c in poly.items() if abs(c) > tol}


def diagonal_monomials(kind: ModelKind, n: int, m: int, i: int, periodic: bool | None = None) -> dict:
    """Exact ``[M^m]_ii`` of the size-``n`` Lax matrix as a monomial dict (absolute sites)."""
    poly = _diag_power(_factors(kind, n, periodic), n, m, i)
    if kind.family == "antisym":
        poly = _convert_antisym(poly)
    return _clean(poly, 1e-300)


@lru_cache(maxsize=4096)
def _factors_cached(kind, n):
    return _factors(kind, n)


@lru_cache(maxsize=65536)
def _diag_items(kind, n, m, i):
    d = _diag_power(_factors_cached(kind, n), n, m, i)
    if kind.family == "antisym":
        d = _convert_antisym(d)
    return tuple(d.items())


def _diag_cached(kind, n, m, i):
    return dict(_diag_items(kind, n, m, i))


def _shift(poly, d, n=None):
    out = {}
    for key, c in poly.items():
        k = tuple(sorted(((s + d) % n if n else s + d, v, p) for s, v, p in key))
        out[k] = out.get(k, 0) + c
    return out


@lru_cache(maxsize=None)
def _generator_power(kind: ModelKind, m: int):
    """Diagonal entries of ``M^m`` deep inside a long chain, relative to their own site.

    Returns a tuple of dicts, one per residue class of the matrix period.
    """
    per_kind = kind
    if not kind.periodic:
        per_kind = ModelKind({"TodaNonPeriodic": "TodaPeriodic", "LaguerreNonPeriodic": "ExpTodaPeriodic",
                              "AntisymNonPeriodic": "VolterraPeriodic", "CMVNonPeriodic": "CMVPeriodic"}[kind.tag],
                             real_coeffs=kind.real_coeffs)
    w = _band(per_kind)
    n0 = 4 * (m * w + 3)
    n0 += n0 % 2
    c = n0 // 2
    factors = _factors(per_kind, n0)
    if kind.family == "cmv" and not kind.periodic:
        # the finite CMV matrix multiplies the two block factors in the other order
        factors = factors[::-1]
    period = 2 if per_kind.family == "cmv" else 1
    out = []
    for q in range(period):
        d = _diag_power(factors, n0, m, c + q)
        if kind.family == "antisym":
            d = _convert_antisym(d)
        out.append(_shift(_clean(d), -(c + q)))
    return tuple(out)


def _poly_generators(kind: ModelKind, P: Polynomial):
    period = 2 if kind.family == "cmv" else 1
    gens = [dict() for _ in range(period)]
    for m, coeff in P.terms():
        if m == 0:
            for g in gens:
                _padd(g, _ONE, coeff)
            continue
        if m > MAX_SEED_DEGREE:
            raise UnsupportedPotential(f"degree {m} exceeds the seed expansion limit {MAX_SEED_DEGREE}")
        for g, d in zip(gens, _generator_power(kind, m)):
            _padd(g, d, coeff)
    return [_clean(g) for g in gens]


def generator_monomials(kind: ModelKind, P: Polynomial) -> dict:
    """A single-site generator ``g`` with ``Tr P(M) = sum_j g(S^j x)`` on long periodic chains.

    For CMV matrices the two parity classes of diagonal entries are averaged;
    this is exact because the trace is invariant under a one-site shift of the
    Verblunsky coefficients.
    """
    gens = _poly_generators(kind, P)
    if len(gens) == 1:
        return gens[0]
    out = {}
    for g in gens:
        _padd(out, g, 1.0 / len(gens))
    return _clean(out)


def _zero_sites(kind: ModelKind, n: int):
    """Variables pinned to zero by the padded per-site layout."""
    if kind.periodic:
        return set()
    if kind.family in ("jacobi", "gram"):
        return {(n - 1, "b")}
    if kind.family == "antisym":
        return {(n - 1, "a")}
    return {(n - 1, "rho")}


def _drop_zero(poly, zeros):
    if not zeros:
        return poly
    return {k: c for k, c in poly.items() if not any((s, v) in zeros for s, v, _ in k)}


def trace_monomials(kind: ModelKind, P: Polynomial, n: int) -> dict:
    """Exact monomial expansion of ``Tr P(M)`` for an ``n``-site chain (absolute site labels)."""
    total = {}
    period = 2 if kind.family == "cmv" else 1
    for m, coeff in P.terms():
        if m == 0:
            _padd(total, _ONE, coeff * n)
            continue
        if kind.periodic:
            # exact translation invariance by one matrix period
            for q in range(period):
                d = _diag_cached(kind, n, m, q)
                for t in range(q, n, period):
                    _padd(total, _shift(d, t - q, n), coeff)
            continue
        gen = _generator_power(kind, m)
        reach_m = _band(kind) * m
        for i in range(n):
            if reach_m <= i < n - reach_m:
                _padd(total, _shift(gen[i % period], i), coeff)
            else:
                _padd(total, _diag_cached(kind, n, m, i), coeff)
    return _drop_zero(_clean(total, 0.0), _zero_sites(kind, n))


# --------------------------------------------------------------------------
# numeric evaluation of monomial lists


class MonomialTable:
    """Vectorised evaluation of a monomial dict over per-site field arrays.

    ``fields`` arrays have shape ``(B, n_sites, n_vars)``; monomial factors
    reference ``(site, var)`` with ``site`` an absolute index into that array.
    """

    def __init__(self, monomials: dict, field_vars, site_shift: int = 0):
        self.field_vars = tuple(field_vars)
        vidx = {v: i for i, v in enumerate(self.field_vars)}
        items = sorted(monomials.items())
        self.keys = [k for k, _ in items]
        self.coef = np.array([c for _, c in items], dtype=complex)
        F = max([len(k) for k in self.keys] + [1])
        n = len(items)
        self.site = np.zeros((n, F), dtype=np.intp)
        self.var = np.zeros((n, F), dtype=np.intp)
        self.pow = np.zeros((n, F), dtype=np.intp)
        for r, key in enumerate(self.keys):
            for c, (s, v, p) in enumerate(key):
                self.site[r, c] = s + site_shift
                self.var[r, c] = vidx[v]
                self.pow[r, c] = p

    def __len__(self):
        return len(self.keys)

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.coef.imag == 0))

    def products(self, fields: np.ndarray, chunk: int = 1 << 22) -> np.ndarray:
        """Monomial values without coefficients, shape ``(B, n_monomials)``."""
        fields = np.asarray(fields)
        B = fields.shape[0]
        n = len(self)
        out = np.empty((B, n), dtype=fields.dtype)
        if n == 0:
            return out
        step = max(1, chunk // max(1, n * self.site.shape[1]))
        maxp = int(self.pow.max()) if self.pow.size else 0
        for s in range(0, B, step):
            g = fields[s:s + step][:, self.site, self.var]
            out[s:s + step] = np.prod(_ipow(g, self.pow, maxp), axis=-1)
        return out

    def evaluate(self, fields: np.ndarray) -> np.ndarray:
        """Sum of monomials, shape ``(B,)`` (complex)."""
        if len(self) == 0:
            return np.zeros(np.asarray(fields).shape[0], dtype=complex)
        return self.products(fields) @ self.coef


def _ipow(g, p, maxp):
    """Elementwise integer power by repeated multiplication (exact for small powers)."""
    out = np.ones_like(g)
    base = g
    e = np.broadcast_to(p, g.shape)
    bit = 1
    while bit <= maxp:
        mask = (e & bit) != 0
        if mask.any():
            out = np.where(mask, out * base, out)
        base = base * base
        bit <<= 1
    return out


# --------------------------------------------------------------------------
# Assumption checks on the potential


def check_potential(kind: ModelKind, P: Polynomial) -> None:
    """Raise :class:`UnsupportedPotential` when ``P`` cannot define a normalisable measure."""
    if P.is_zero:
        return
    fam = kind.family
    lead = P.leading
    d = P.degree
    if fam != "cmv" or kind.real_coeffs:
        if not P.is_real:
            raise UnsupportedPotential("the potential must have real coefficients for this model")
        lead = lead.real
    if fam == "jacobi":
        if d < 2 or d % 2 or lead <= 0:
            raise UnsupportedPotential("Jacobi models need even degree >= 2 and a positive leading coefficient")
    elif fam == "gram":
        if d < 1 or lead <= 0:
            raise UnsupportedPotential("Gram models need degree >= 1 and a positive leading coefficient")
    elif fam == "antisym":
        if d < 2 or d % 2 or lead * (-1) ** (d // 2) <= 0:
            raise UnsupportedPotential("antisymmetric models need a leading term (-1)^d c x^(2d) with c > 0")
    elif fam == "inb":
        if d % (kind.r + 1) or lead <= 0:
            raise UnsupportedPotential("INB potentials need degree divisible by r+1 and a positive leading coefficient")


# --------------------------------------------------------------------------
# seeds


def _span(key):
    sites = [s for s, _, _ in key]
    return (min(sites), max(sites)) if sites else (0, 0)


def _min_k(gen: dict) -> int:
    k = 1
    for key in gen:
        lo, hi = _span(key)
        k = max(k, hi - lo)
    return k


def _seed_parts(gen: dict, k: int):
    """Split the translates of ``gen`` whose first site lies in block 0."""
    loc, cross = {}, {}
    for key, c in gen.items():
        lo, hi = _span(key) if key else (0, 0)
        for u in range(k):
            d = u - lo
            shifted = tuple(sorted((s + d, v, p) for s, v, p in key))
            last = hi + d
            if last >= 2 * k:
                raise ValueError("generator does not fit two blocks")
            target = loc if last < k else cross
            target[shifted] = target.get(shifted, 0) + c
    return _clean(loc), _clean(cross)


def _seed_full(loc, cross, k):
    out = {}
    _padd(out, loc, 0.5)
    _padd(out, _shift(loc, k), 0.5)
    _padd(out, cross)
    return _clean(out)


@dataclass
class Seed:
    """Seed/weed decomposition of ``Tr P(M)`` for a chain of ``N`` sites."""

    kind: ModelKind
    poly: Polynomial
    N: int
    k: int
    loc: dict
    cross: dict
    weed: dict
    _lower: float | None = field(default=None, repr=False)

    @property
    def M(self) -> int:
        return self.N // self.k

    @property
    def ell(self) -> int:
        return self.N - self.k * self.M

    @property
    def monomials(self) -> dict:
        """Seed as one monomial dict over sites ``0 .. 2k-1``."""
        return _seed_full(self.loc, self.cross, self.k)

    def _fields(self, X):
        return site_fields(self.kind, np.asarray(X, dtype=float))

    def seed_eval(self, X, Y) -> np.ndarray:
        """Seed on two blocks of site coordinates with shape ``(..., k, d)``."""
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        both = np.concatenate([X, Y], axis=-2)
        lead = both.shape[:-2]
        flat = both.reshape((-1,) + both.shape[-2:])
        val = MonomialTable(self.monomials, self.kind.field_vars).evaluate(self._fields(flat))
        return val.reshape(lead)

    def weed_eval(self, sites) -> np.ndarray:
        """Weed on full per-site arrays with shape ``(..., N, d)``."""
        sites = np.asarray(sites, dtype=float)
        lead = sites.shape[:-2]
        flat = sites.reshape((-1,) + sites.shape[-2:])
        val = MonomialTable(self.weed, self.kind.field_vars).evaluate(self._fields(flat))
        return val.reshape(lead)

    def total(self, sites) -> np.ndarray:
        """``sum_J seed(X_J, X_{J+1}) + weed`` on per-site arrays ``(..., N, d)``."""
        sites = np.asarray(sites, dtype=float)
        k, M = self.k, self.M
        out = self.weed_eval(sites)
        for J in range(M - 1):
            out = out + self.seed_eval(sites[..., J * k:(J + 1) * k, :], sites[..., (J + 1) * k:(J + 2) * k, :])
        return out

    @property
    def lower_bound(self) -> float:
        """Lower bound of ``Re seed`` from a random scan refined by local minimisation."""
        if self._lower is None:
            self._lower = _seed_lower_bound(self)
        return self._lower

    def to_json(self):
        return monomials_to_json(self.monomials, self.kind)


def monomials_to_json(monos: dict, kind: ModelKind | None = None):
    out = []
    for key, c in sorted(monos.items()):
        coeff = c.real if c.imag == 0 else [c.real, c.imag]
        out.append({"coeff": coeff, "sites": [{"offset": s, "var": v, "power": p} for s, v, p in key]})
    return out


def _build(kind, P, N, k, exact):
    gen = generator_monomials(kind, P)
    loc, cross = _seed_parts(gen, k)
    full = _seed_full(loc, cross, k)
    M = N // k
    weed = dict(exact)
    for J in range(M - 1):
        _padd(weed, _shift(full, J * k), -1.0)
    scale = max([abs(c) for c in exact.values()] + [1.0])
    weed = _drop_zero(_clean(weed, 1e-13 * scale), _zero_sites(kind, N))
    allowed = set(range(k)) | set(range((M - 1) * k, N))
    ok = all(s in allowed for key in weed for s, _, _ in key)
    return Seed(kind, P, N, k, loc, cross, weed), ok


def extract_seed(kind: ModelKind, P: Polynomial | str, N: int, *, validate: bool = True, k: int | None = None) -> Seed:
    """Seed/weed decomposition of ``Tr P(M)`` on ``N`` sites.

    ``validate`` checks the growth conditions that make ``P`` a potential;
    observables such as ``x`` or ``x^3`` are extracted with ``validate=False``.
    ``k`` forces a larger circular index (used to make several seeds compatible).
    """
    if isinstance(P, str):
        P = Polynomial.parse(P)
    if validate:
        check_potential(kind, P)
    gen = generator_monomials(kind, P)
    kk = max(_min_k(gen), k or 1)
    if k is not None and k < _min_k(gen):
        raise IncompatibleSeeds(f"k={k} is below the minimal circular index {_min_k(gen)}")
    exact = trace_monomials(kind, P, N)
    while True:
        if kk > N:
            raise IncompatibleSeeds("no valid circular index for this lattice size")
        if k is not None and kk != k and kk % k:
            kk += 1
            continue
        if kk >= _min_k(gen):
            seed, ok = _build(kind, P, N, kk, exact)
            if ok:
                return seed
        kk += 1


def extract_seeds(kind: ModelKind, polys, N: int, *, validate_first: bool = True, kmax: int = 8):
    """Compatible seeds (common circular index, the lcm of the minimal ones)."""
    polys = [Polynomial.parse(p) if isinstance(p, str) else p for p in polys]
    ks = [_min_k(generator_monomials(kind, p)) for p in polys]
    k = math.lcm(*ks)
    if k > kmax:
        raise IncompatibleSeeds(f"common circular index {k} exceeds {kmax}")
    if validate_first:
        check_potential(kind, polys[0])
    return [extract_seed(kind, p, N, validate=False, k=k) for p in polys]


def verify_decomposition(seed: Seed, kind: ModelKind, P: Polynomial | str, coords: Coordinates) -> float:
    """Relative residual ``|Tr P(M) - sum seed - weed| / (1 + |Tr P(M)|)``."""
    if isinstance(P, str):
        P = Polynomial.parse(P)
    L = build_matrix(kind, coords).entries
    dense = 0j
    Pk = np.eye(L.shape[0], dtype=complex)
    for m in range(P.degree + 1):
        c = P.coeffs[m]
        if c != 0:
            dense += c * np.trace(Pk)
        Pk = Pk @ L
    if P.is_zero and not seed.weed and not seed.loc and not seed.cross:
        return 0.0
    approx = complex(seed.total(site_array(kind, coords)[None])[0])
    return abs(dense - approx) / (1.0 + abs(dense))


# --------------------------------------------------------------------------
# lower bound of the seed


def _sample_sites(kind: ModelKind, shape, rng, radius):
    doms = kind.site_domains()
    X = np.empty(shape + (len(doms),))
    if doms[0] == "disk":
        r = np.sqrt(rng.random(shape)) * 0.999999
        th = rng.random(shape) * 2 * np.pi
        X[..., 0] = r * np.cos(th)
        X[..., 1] = r * np.sin(th)
        return X
    for i, d in enumerate(doms):
        if d == "real":
            X[..., i] = rng.uniform(-radius, radius, shape)
        elif d == "positive":
            X[..., i] = rng.uniform(0, radius, shape)
        else:
            X[..., i] = rng.uniform(-0.999999, 0.999999, shape)
    return X


def _seed_lower_bound(seed: Seed, n_scan: int = 200_000, seed_rng: int = 0) -> float:
    from scipy.optimize import minimize

    rng = np.random.default_rng(seed_rng)
    k = seed.k
    table = MonomialTable(seed.monomials, seed.kind.field_vars)
    d = len(seed.kind.site_vars)
    doms = seed.kind.site_domains()

    def f(flat):
        Z = flat.reshape((-1, 2 * k, d))
        return table.evaluate(site_fields(seed.kind, Z)).real

    best = np.inf
    mins = []
    for radius in (2.0, 6.0, 20.0):
        Z = _sample_sites(seed.kind, (n_scan, 2 * k), rng, radius)
        vals = f(Z.reshape(n_scan, -1))
        order = np.argsort(vals)[:8]
        bounds = []
        for _ in range(2 * k):
            for dom in doms:
                bounds.append({"real": (None, None), "positive": (0, None), "interval": (-1, 1)}.get(dom, (-1, 1)))
        local = vals[order[0]]
        for idx in order:
            res = minimize(lambda z: f(z[None])[0], Z[idx].ravel(), method="L-BFGS-B", bounds=bounds)
            local = min(local, res.fun)
        mins.append(local)
        best = min(best, local)
    if mins[-1] < mins[0] - 1.0 and mins[-1] < 2 * mins[1] - mins[0] - 1.0:
        import warnings

        warnings.warn("seed appears unbounded below; lower bound set to -inf", TruncationWarning)
        return -np.inf
    return float(best - 1e-9 * (1.0 + abs(best)))
