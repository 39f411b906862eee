"""Transfer operators of circular seeds and the free energies they generate.

For a seed ``W`` of ``Re Tr P(M)`` with circular index ``k`` and a seed ``U``
of an observable, the operator

    (L_t f)(Y) = int f(X) sqrt(F(X) F(Y)) exp(-W(X, Y) - i t U(X, Y)) dX

acts on functions of one block of ``k`` sites.  Its dominant eigenvalue
``lam(alpha, t)`` gives the periodic free energy ``F1 = -(1/k) ln lam`` per
site.  Means, variances and susceptibilities of linear statistics are
``t``-derivatives of ``F1``; the high-temperature (Type-2) free energy is the
``alpha``-average ``F2(alpha) = -(1/k) int_0^1 ln lam(alpha x) dx``.

Operators are discretized by the symmetrized Nystrom method on tensor grids:
Gauss-Legendre on real axes, Gauss-Jacobi on positive axes (absorbing the
``x^e`` factor of the weight), Gauss-Jacobi in ``|a|^2`` with a uniform
angular rule on the unit disk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, LinearOperator, eigs
from scipy.special import roots_jacobi, roots_legendre

from .errors import (
    DerivativeUnstable,
    GapCollapse,
    GridTooLarge,
    IncompatibleSeeds,
    QuadratureFailure,
    UnboundedWeight,
)
from .models import ModelKind, site_fields
from .potential import Polynomial
from .seeds import MonomialTable, check_potential, extract_seed, extract_seeds

__all__ = [
    "TransferKernel",
    "SpectralResult",
    "CLTQuantities",
    "build_kernel",
    "discretize",
    "dominant_spectrum",
    "free_energy_type1",
    "free_energy_type2",
    "clt_mean_and_variance",
    "jacobi_ensemble_type2",
    "susceptibility",
    "toda_current_mean",
    "reweight_coefficient",
]

MAX_GRID = 20_000
DENSE_MAX = 500
DENSE_ASSEMBLY = 4096
DEFAULT_DELTAS = (1e-2, 5e-3)
TAIL = 1e-12


# --------------------------------------------------------------------------
# per-site weights and quadrature axes


def _weight_exponents(kind: ModelKind, alpha: float):
    """Per-coordinate weight description of the periodic measure.

    Returns a list of ``(domain, exponent)``: ``positive`` axes carry
    ``x^e``, ``interval`` carries ``(1-a^2)^e`` and ``disk`` carries
    ``(1-|a|^2)^e``.
    """
    fam = kind.family
    if fam == "jacobi":
        return [("real", 0.0), ("positive", 2 * alpha - 1)]
    if fam == "gram":
        return [("positive", 2 * alpha - 1), ("positive", 2 * alpha - 1)]
    if fam in ("antisym", "inb"):
        return [("positive", alpha - 1)]
    if kind.real_coeffs:
        return [("interval", alpha - 1)]
    return [("disk", alpha - 1)]


def _singular_axes(kind: ModelKind) -> int:
    """Coordinates per site whose weight normalisation diverges like 1/alpha."""
    return 2 if kind.family == "gram" else 1


@dataclass(frozen=True)
class _Axis:
    rule: str
    n: int
    lo: float = 0.0
    hi: float = 1.0
    exponent: float = 0.0
    exponent2: float | None = None  # (1+a) exponent of an asymmetric interval rule

    def nodes_weights(self):
        n = self.n
        if self.rule == "legendre":
            x, w = roots_legendre(n)
            half = 0.5 * (self.hi - self.lo)
            return self.lo + half * (x + 1), w * half
        if self.rule == "jacobi-positive":
            # int_0^B g(x) x^e dx with x = B(1+y)/2
            y, w = roots_jacobi(n, 0.0, self.exponent)
            B = self.hi
            return B * (1 + y) / 2, w * (B / 2) ** (self.exponent + 1)
        if self.rule == "jacobi-interval":
            e2 = self.exponent if self.exponent2 is None else self.exponent2
            y, w = roots_jacobi(n, self.exponent, e2)
            return y, w
        if self.rule == "disk-radial":
            # int_0^1 g(u) (1-u)^e du / 2, u = |a|^2 = (1+y)/2; the 1/2 is d^2a = du dtheta / 2
            y, w = roots_jacobi(n, self.exponent, 0.0)
            return (1 + y) / 2, w * 0.5 ** (self.exponent + 1) * 0.5
        if self.rule == "angle":
            th = 2 * np.pi * np.arange(n) / n
            return th, np.full(n, 2 * np.pi / n)
        raise ValueError(self.rule)


# --------------------------------------------------------------------------
# kernel


def reweight_coefficient(P: Polynomial, x0: float = 1.0) -> float:
    """``c = inf_{|x| >= x0} P(x) / (2 x^2)`` clipped at 0.

    ``P(x) >= C + 2c x^2`` then holds on the whole line for some constant ``C``,
    and ``P - (c/2) x^2`` still grows like ``P``.
    """
    if P.is_zero or P.degree < 2:
        return 0.0
    coeffs = np.array([c.real for c in P.coeffs])
    # P(x)/x^2 on |x| >= x0: its minimum is at x = +-x0 or at a critical point
    q = np.polynomial.Polynomial(coeffs)
    r = np.polynomial.Polynomial([0, 0, 1])
    cand = [x0, -x0]
    # critical points of P/x^2: x P' - 2P = 0
    crit = (np.polynomial.Polynomial([0, 1]) * q.deriv() - 2 * q).roots()
    cand += [z.real for z in crit if abs(z.imag) < 1e-12 and abs(z.real) >= x0]
    vals = [q(x) / r(x) for x in cand]
    return max(0.0, 0.5 * min(vals))


@dataclass
class TransferKernel:
    """Kernel operator of one (model, potential, observables) triple at fixed ``alpha``.

    ``observables`` is a list of ``(s, part)`` pairs; ``t`` holds one value
    per observable.  ``seed_W`` is the seed of ``Re Tr P~(M)`` with
    ``P~ = P - (c/2) x^2`` for Jacobi (Toda) models, whose Gaussian part moves
    into the per-site weight ``F~ = F exp(-(c/2)(a^2 + 2 b^2))``.
    """

    kind: ModelKind
    P: Polynomial
    alpha: float
    observables: list
    t: tuple
    k: int
    seed_W: object
    seeds_U: list
    c_reweight: float
    cutoffs: list = field(default_factory=list)
    block_weights: list | None = None

    @property
    def dims(self) -> int:
        return self.k * (2 if self.kind.family in ("jacobi", "gram") or (self.kind.family == "cmv" and not self.kind.real_coeffs) else 1)

    def axes(self, n: int) -> list:
        """Quadrature axes of one site (the block repeats them ``k`` times)."""
        out = []
        for (dom, e), cut in zip(_weight_exponents(self.kind, self.alpha), self.cutoffs):
            if dom == "real":
                out.append(_Axis("legendre", n, cut[0], cut[1]))
            elif dom == "positive":
                out.append(_Axis("jacobi-positive", n, 0.0, cut[1], e))
            elif dom == "interval":
                out.append(_Axis("jacobi-interval", n, -1.0, 1.0, e))
            else:
                out.append(_Axis("disk-radial", n, 0.0, 1.0, e))
                out.append(_Axis("angle", n))
        return out

    def block_axes(self, n: int) -> list:
        """Axes of a whole block; ``block_weights`` overrides real-CMV sites
        with ``(1-a)^e- (1+a)^e+`` weights, one pair per site of the block."""
        if self.block_weights is None:
            return self.axes(n) * self.k
        return [_Axis("jacobi-interval", n, -1.0, 1.0, em, ep) for em, ep in self.block_weights]

    def to_json(self):
        return {
            "model": self.kind.to_json(),
            "P": self.P.to_json(),
            "alpha": self.alpha,
            "observables": [list(o) for o in self.observables],
            "t": list(self.t),
            "k": self.k,
            "c_reweight": self.c_reweight,
            "cutoffs": [list(c) for c in self.cutoffs],
            "block_weights": None if self.block_weights is None else [list(b) for b in self.block_weights],
        }


def _seeds_for(kind, P, observables, k_multiple=1):
    c = reweight_coefficient(P) if kind.family == "jacobi" else 0.0
    Pw = P - Polynomial.monomial(2, c / 2) if c else P
    polys = [Pw] + [Polynomial.monomial(s) for s, _ in observables]
    for s, _ in observables:
        if s < 1:
            raise ValueError("observable powers must be positive")
    seeds = extract_seeds(kind, polys, 64, validate_first=False)
    if seeds[0].k % k_multiple:
        k = math.lcm(seeds[0].k, k_multiple)
        seeds = [extract_seed(kind, p, 64, validate=False, k=k) for p in polys]
    return c, seeds[0], seeds[1:]


def _split_cross(monos: dict, k: int):
    """Factor cross monomials into block-X and block-Y parts."""
    xs, ys, coef = {}, {}, []
    xkeys, ykeys = [], []
    for key, cval in sorted(monos.items()):
        xk = tuple(f for f in key if f[0] < k)
        yk = tuple((s - k, v, p) for s, v, p in key if s >= k)
        xkeys.append(xk)
        ykeys.append(yk)
        coef.append(cval)
    return xkeys, ykeys, np.array(coef, dtype=complex)


class _Discretization:
    """Grid data of a kernel at fixed ``alpha`` and node count (independent of ``t``).

    Cross terms are stored in factored form ``part(A @ B.T)``; the dense
    matrices are only formed when the grid has at most ``DENSE_ASSEMBLY``
    points, otherwise the operator is applied block by block.
    """

    def __init__(self, kern: TransferKernel, n: int):
        self.kern = kern
        kind = kern.kind
        k = kern.k
        site_axes = kern.axes(n)
        all_axes = kern.block_axes(n)
        sizes = [a.n for a in all_axes]
        G = int(np.prod(sizes, dtype=float))
        if G > MAX_GRID:
            raise GridTooLarge(f"{G} grid points exceed the limit {MAX_GRID}")
        self.G = G
        self.sizes = sizes
        nw = [a.nodes_weights() for a in all_axes]
        mesh = np.meshgrid(*[x for x, _ in nw], indexing="ij")
        wmesh = np.meshgrid(*[w for _, w in nw], indexing="ij")
        coords = np.stack([m.ravel() for m in mesh], axis=-1)
        w = np.prod(np.stack([m.ravel() for m in wmesh], axis=-1), axis=-1)
        per = len(site_axes)
        sites = []
        for b in range(k):
            block = coords[:, b * per:(b + 1) * per]
            if kind.family == "cmv" and not kind.real_coeffs:
                r = np.sqrt(block[:, 0])
                sites.append(np.stack([r * np.cos(block[:, 1]), r * np.sin(block[:, 1])], axis=-1))
            else:
                sites.append(block)
        self.sites = np.stack(sites, axis=1)  # (G, k, d)
        self.weights = w
        self.dense = G <= DENSE_ASSEMBLY
        fields = site_fields(kind, self.sites)
        extra = np.zeros(G)
        if kern.c_reweight:
            a, b = self.sites[..., 0], self.sites[..., 1]
            extra = 0.5 * kern.c_reweight * np.sum(a * a + 2 * b * b, axis=1)
        self.locW = self._loc(kern.seed_W, fields, "Re") + extra
        self.locU = [self._loc(sd, fields, part) for sd, (_, part) in zip(kern.seeds_U, kern.observables)]
        self.crossW = self._cross(kern.seed_W, fields, "Re")
        self.crossU = [self._cross(sd, fields, part) for sd, (_, part) in zip(kern.seeds_U, kern.observables)]
        self._expw = None

    @staticmethod
    def _part(z, part):
        return z.imag if part == "Im" else z.real

    def _loc(self, seed, fields, part):
        tab = MonomialTable(seed.loc, self.kern.kind.field_vars)
        return self._part(tab.evaluate(fields), part)

    def _cross(self, seed, fields, part):
        """Cross term as a dense matrix, or as ``(A, B, part)`` factors on large grids."""
        if not seed.cross:
            return None
        xk, yk, coef = _split_cross(seed.cross, self.kern.k)
        fv = self.kern.kind.field_vars
        fx = MonomialTable({key: 1.0 for key in set(xk)}, fv)
        fy = MonomialTable({key: 1.0 for key in set(yk)}, fv)
        px, py = fx.products(fields), fy.products(fields)
        ix = {key: i for i, key in enumerate(fx.keys)}
        iy = {key: i for i, key in enumerate(fy.keys)}
        A = px[:, [ix[key] for key in xk]] * coef
        B = py[:, [iy[key] for key in yk]]
        if self.dense:
            return self._part(A @ B.T, part)
        return (A, B, part)

    def _cross_rows(self, c, rows):
        if c is None:
            return None
        if isinstance(c, tuple):
            A, B, part = c
            return self._part(A[rows] @ B.T, part)
        return c[rows]

    def separable(self, t) -> bool:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return self.crossW is None and all(
            cu is None or not tq for tq, cu in zip(t, self.crossU))

    def _scaling(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        active = [q for q, tq in enumerate(t) if tq and q < len(self.locU)]
        if not active:
            return np.sqrt(self.weights) * np.exp(-0.5 * self.locW), active
        loc = self.locW.astype(complex)
        for q in active:
            loc = loc + 1j * t[q] * self.locU[q]
        return np.sqrt(self.weights) * np.exp(-0.5 * loc), active

    def spectrum(self, t) -> SpectralResult:
        """Dominant pair of the discretized kernel; rank-one kernels are handled exactly."""
        if self.separable(t):
            v, _ = self._scaling(t)
            lam = complex(np.sum(v * v))
            return SpectralResult(lam, v / np.linalg.norm(v), abs(lam), self.G, None, 0j)
        if self.dense:
            return dominant_spectrum(self.matrix(t))
        return dominant_spectrum(self.operator(t))

    def _block(self, t, rows, s, active):
        E = self._cross_rows(self.crossW, rows)
        D = np.ones((len(range(*rows.indices(self.G))), self.G)) if E is None else np.exp(-E)
        phase = None
        for q in active:
            cu = self._cross_rows(self.crossU[q], rows)
            if cu is not None:
                phase = t[q] * cu if phase is None else phase + t[q] * cu
        if phase is not None:
            D = D * np.exp(-1j * phase)
        return D * s[rows, None] * s[None, :]

    def operator(self, t) -> LinearOperator:
        """Matrix-free kernel, assembled row block by row block at each product."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        s, active = self._scaling(t)
        G = self.G
        step = max(1, (1 << 21) // G)
        cplx = bool(active) or np.iscomplexobj(s)

        def matvec(x):
            x = np.asarray(x).ravel()
            y = np.empty(G, dtype=complex if (cplx or np.iscomplexobj(x)) else float)
            for r0 in range(0, G, step):
                rows = slice(r0, min(G, r0 + step))
                y[rows] = self._block(t, rows, s, active) @ x
            return y

        return LinearOperator((G, G), matvec=matvec, dtype=complex if cplx else float)

    def _expW(self):
        if self._expw is None:
            self._expw = np.ones((self.G, self.G)) if self.crossW is None else np.exp(-self.crossW)
        return self._expw

    def matrix(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if not self.dense:
            s, active = self._scaling(t)
            return np.vstack([self._block(t, slice(r, min(self.G, r + 512)), s, active)
                              for r in range(0, self.G, 512)])
        s, active = self._scaling(t)
        if not active:
            return self._expW() * s[:, None] * s[None, :]
        phase = None
        for q in active:
            if self.crossU[q] is not None:
                phase = t[q] * self.crossU[q] if phase is None else phase + t[q] * self.crossU[q]
        if phase is None:
            D = self._expW().astype(complex)
        else:
            D = np.exp(-1j * phase)
            D *= self._expW()
        D *= s[:, None]
        D *= s[None, :]
        return D


def _cutoffs(kind, alpha, seed_W, c_rew, k):
    """Per-coordinate integration boxes from a one-dimensional tail estimate."""
    d = len(kind.site_vars)
    doms = _weight_exponents(kind, alpha)
    if kind.family == "cmv":
        return [(-1.0, 1.0)] * len(doms)
    # a block's full local energy; neighbours sit at 0
    tab = MonomialTable(seed_W.loc, kind.field_vars)
    out = []
    for q, (dom, e) in enumerate(doms):
        def energy(z):
            X = np.zeros((len(z), k, d))
            X[:, 0, q] = z
            val = tab.evaluate(site_fields(kind, X)).real
            if c_rew:
                val = val + 0.5 * c_rew * (z * z * (1 if q == 0 else 2))
            return val

        if dom == "real":
            lo = _tail_point(lambda z: energy(-z), 0.0)
            hi = _tail_point(energy, 0.0)
            out.append((-1.15 * lo, 1.15 * hi))
        else:
            out.append((0.0, 1.15 * _tail_point(energy, e)))
    return out


def _tail_point(energy, e, tail=TAIL):
    """Smallest ``B`` with ``int_B^inf z^e exp(-energy) < tail * int_0^inf``."""
    zmax = 1.0
    for _ in range(60):
        z = np.linspace(zmax / 4000, zmax, 4000)
        phi = energy(z) - e * np.log(z)
        if phi[-1] - phi.min() > 80:
            break
        zmax *= 2
    else:
        raise UnboundedWeight("the per-site weight does not decay along a coordinate axis")
    z = np.linspace(zmax / 20000, zmax, 20000)
    lw = -(energy(z) - e * np.log(z))
    dens = np.exp(lw - lw.max())
    cum = np.cumsum(dens[::-1])[::-1]
    total = cum[0]
    idx = np.nonzero(cum <= tail * total)[0]
    return float(z[idx[0]] if len(idx) else zmax)



def build_kernel(kind, P, s: int | list = 2, observable_part: str = "Re", alpha: float = 1.0, t=0.0, *,
                 scan_points: int = 20000, rng_seed: int = 0, site_pair_weights=None) -> TransferKernel:
    """Kernel of ``Re Tr P`` with observables ``Tr (Re|Im) M^s``.

    ``s`` may be a list of powers (one ``t`` per power) for susceptibilities.
    ``site_pair_weights`` (real CMV only) replaces the ``(1-a^2)^(alpha-1)``
    site weight by ``(1-a)^e- (1+a)^e+`` with a pair ``(e-, e+)`` for odd and
    one for even sites; the circular index is then made even.
    """
    if isinstance(kind, str):
        kind = ModelKind.parse(kind)
    if isinstance(P, str):
        P = Polynomial.parse(P)
    if not kind.periodic:
        raise ValueError("transfer operators are built for periodic (Type-1) models")
    if kind.tag == "INBMultiplicative":
        raise ValueError("operator computations for multiplicative INB lattices are not supported")
    check_potential(kind, P)
    if observable_part not in ("Re", "Im"):
        raise ValueError("observable_part must be 'Re' or 'Im'")
    if observable_part == "Im" and kind.family != "cmv":
        raise ValueError("imaginary parts are only meaningful for CMV models")
    powers = [s] if isinstance(s, int) else list(s)
    obs = [(p, observable_part) for p in powers]
    if site_pair_weights is not None and not (kind.family == "cmv" and kind.real_coeffs):
        raise ValueError("site_pair_weights only applies to real CMV models")
    c, sW, sU = _seeds_for(kind, P, obs, 2 if site_pair_weights is not None else 1)
    k = sW.k
    if k > 8:
        raise IncompatibleSeeds(f"circular index {k} exceeds 8")
    if kind.family == "cmv" and k > (2 if kind.real_coeffs else 1):
        raise GridTooLarge(f"CMV operators are limited to circular index {1 if not kind.real_coeffs else 2} (got {k}); "
                           "use the sampler instead")
    tt = tuple(np.broadcast_to(np.asarray(t, dtype=float), (len(obs),)).tolist())
    kern = TransferKernel(kind, P, float(alpha), obs, tt, k, sW, sU, c)
    if site_pair_weights is not None:
        kern.block_weights = [tuple(map(float, site_pair_weights[j % 2])) for j in range(k)]
    kern.cutoffs = _cutoffs(kind, alpha, sW, c, k)
    _check_bounded(kern, scan_points, rng_seed)
    return kern


def _check_bounded(kern: TransferKernel, n: int, rng_seed: int):
    """Random scan of ``|U|^3 exp(-W)``: the maximum must not grow with the box."""
    rng = np.random.default_rng(rng_seed)
    kind = kern.kind
    d = len(kind.site_vars)
    fv = kind.field_vars
    W = MonomialTable(kern.seed_W.monomials, fv)
    Us = [MonomialTable(sd.monomials, fv) for sd in kern.seeds_U]
    scans = []
    for R in (4.0, 16.0):
        X = np.empty((n, 2 * kern.k, d))
        for q, (dom, _) in enumerate(_weight_exponents(kind, kern.alpha)):
            if dom == "real":
                X[..., q] = rng.uniform(-R, R, X.shape[:-1])
            elif dom == "positive":
                X[..., q] = rng.uniform(0, R, X.shape[:-1])
            elif dom == "interval":
                X[..., q] = rng.uniform(-1, 1, X.shape[:-1])
            else:
                r = np.sqrt(rng.random(X.shape[:-1]))
                th = rng.uniform(0, 2 * np.pi, X.shape[:-1])
                X[..., 0], X[..., 1] = r * np.cos(th), r * np.sin(th)
                break
        F = site_fields(kind, X)
        w = W.evaluate(F).real
        if kern.c_reweight:
            a, b = X[..., 0], X[..., 1]
            w = w + 0.5 * kern.c_reweight * np.sum(a * a + 2 * b * b, axis=1)
        val = np.zeros(n)
        for U in Us:
            val = np.maximum(val, np.abs(U.evaluate(F)) ** 3)
        scans.append((w, val))
    # one reference level for both boxes, otherwise a sparse outer scan looks inflated
    wref = min(float(w.min()) for w, _ in scans)
    with np.errstate(over="ignore"):
        maxima = [float(np.max(v * np.exp(-(w - wref)))) for w, v in scans]
    if maxima[1] > 10 * max(maxima[0], 1e-300) and maxima[1] > 1.0:
        raise UnboundedWeight("|U|^3 exp(-W) grows with the scan box")


def discretize(kernel: TransferKernel, nodes_per_dim: int) -> np.ndarray:
    """Symmetrized Nystrom matrix ``sqrt(w_i w_j) k(x_i, x_j)`` at ``kernel.t``."""
    return _Discretization(kernel, nodes_per_dim).matrix(kernel.t)


# --------------------------------------------------------------------------
# spectra


@dataclass
class SpectralResult:
    lambda_dom: complex
    eigenfunction: np.ndarray
    gap: float
    grid_size: int
    converged: bool | None = None
    lambda_2: complex = 0j

    def to_json(self):
        return {
            "lambda_dom": [self.lambda_dom.real, self.lambda_dom.imag],
            "lambda_2": [self.lambda_2.real, self.lambda_2.imag],
            "gap": self.gap,
            "grid_size": self.grid_size,
            "converged": self.converged,
        }


def dominant_spectrum(D, dense_max: int = DENSE_MAX, check_gap: bool = True) -> SpectralResult:
    """Two eigenvalues of largest modulus; dense below ``dense_max``, Arnoldi above."""
    n = D.shape[0]
    vals = vecs = None
    if n > dense_max:
        v0 = np.ones(n, dtype=complex if np.iscomplexobj(D) else float)
        try:
            vals, vecs = eigs(D, k=2, which="LM", v0=v0, tol=1e-14, ncv=min(n, 20), maxiter=5000)
        except (ArpackError, ArpackNoConvergence):
            vals = None
        if vals is not None and abs(vals).max() == 0:
            vals = None
        if vals is None and isinstance(D, np.ndarray) and n <= 6000:
            vals, vecs = scipy.linalg.eig(D)
    else:
        vals, vecs = scipy.linalg.eig(np.asarray(D))
    if vals is None:
        raise GapCollapse("eigensolver failed to converge")
    order = np.argsort(-np.abs(vals))
    lam = complex(vals[order[0]])
    lam2 = complex(vals[order[1]]) if len(vals) > 1 else 0j
    v = vecs[:, order[0]]
    # rank-one kernels: Arnoldi returns a spurious second value of tiny modulus
    if abs(lam2) < 1e-12 * abs(lam):
        lam2 = 0j
    phase = v[np.argmax(np.abs(v))]
    v = v / (phase / abs(phase)) / np.linalg.norm(v)
    gap = abs(lam) - abs(lam2)
    if check_gap and gap < 1e-8 * abs(lam):
        raise GapCollapse(f"spectral gap {gap:.3g} below 1e-8 |lambda|")
    return SpectralResult(lam, v, float(gap), n, None, lam2)


# --------------------------------------------------------------------------
# operator model with caching over t


def _default_nodes(D: int) -> int:
    if D == 1:
        return 96
    if D == 2:
        return 48
    return max(4, int(math.floor((8000.0) ** (1.0 / D))))


class _Operator:
    """Discretizations of one (model, potential, observables) triple, cached by ``(alpha, n)``."""

    def __init__(self, kind, P, observables, nodes_per_dim=None, rel_tol=1e-6, pair_weights=None):
        self.pair_weights = pair_weights  # alpha -> ((e-, e+) odd site, (e-, e+) even site)
        self.kind = ModelKind.parse(kind) if isinstance(kind, str) else kind
        self.P = Polynomial.parse(P) if isinstance(P, str) else P
        self.observables = [tuple(o) for o in observables]
        self.nodes = nodes_per_dim
        self.rel_tol = rel_tol
        self._kernels = {}
        self._disc = {}
        self.records = []

    def kernel(self, alpha):
        key = round(float(alpha), 15)
        if key not in self._kernels:
            powers = [s for s, _ in self.observables] or [1]
            part = self.observables[0][1] if self.observables else "Re"
            pw = None if self.pair_weights is None else self.pair_weights(alpha)
            kern = build_kernel(self.kind, self.P, powers, part, alpha, 0.0, site_pair_weights=pw)
            if not self.observables:
                kern.observables, kern.seeds_U = [], []
                kern.t = ()
            self._kernels[key] = kern
        return self._kernels[key]

    def n_for(self, alpha):
        kern = self.kernel(alpha)
        return self.nodes or _default_nodes(kern.dims)

    def disc(self, alpha, n):
        key = (round(float(alpha), 15), n)
        if key not in self._disc:
            if len(self._disc) > 4:
                self._disc.pop(next(iter(self._disc)))
            self._disc[key] = _Discretization(self.kernel(alpha), n)
        return self._disc[key]

    def spectrum(self, alpha, t, n=None):
        n = n or self.n_for(alpha)
        return self.disc(alpha, n).spectrum(t)

    def log_lambdas(self, alpha, ts, n=None):
        """``ln lam(alpha, t)`` for each ``t`` vector, with ``t = 0`` first; plus the t=0 spectrum."""
        n = n or self.n_for(alpha)
        dsc = self.disc(alpha, n)
        zero = dsc.spectrum(np.zeros(max(1, len(self.observables))))
        lam0 = zero.lambda_dom
        if abs(lam0.imag) > 1e-10 * abs(lam0) or lam0.real <= 0:
            raise GapCollapse("dominant eigenvalue at t = 0 is not real positive")
        out = []
        for t in ts:
            t = np.atleast_1d(np.asarray(t, dtype=float))
            if not np.any(t):
                out.append(0j)
                continue
            sp = dsc.spectrum(t)
            if abs(sp.lambda_dom) > abs(lam0) * (1 + 1e-9):
                raise GapCollapse("|lam(t)| exceeds lam(0); truncation too coarse")
            out.append(np.log(sp.lambda_dom / lam0))
        return math.log(lam0.real), np.array(out), zero, n

    def converged(self, alpha, n=None):
        """Compare ``lam(alpha, 0)`` on ``n/2`` and ``n`` nodes per axis."""
        n = n or self.n_for(alpha)
        t0 = np.zeros(max(1, len(self.observables)))
        fine = self.disc(alpha, n).spectrum(t0).lambda_dom.real
        coarse = _Discretization(self.kernel(alpha), max(2, n // 2)).spectrum(t0).lambda_dom.real
        return abs(fine - coarse) <= self.rel_tol * abs(fine), fine, coarse


# --------------------------------------------------------------------------
# finite differences


def _stencil(deltas, dim, mixed=False):
    pts = [np.zeros(dim)]
    for d in deltas:
        if mixed:
            for a in (-1, 1):
                for b in (-1, 1):
                    pts.append(np.array([a * d, b * d]))
        else:
            for m in (-2, -1, 1, 2):
                v = np.zeros(dim)
                v[0] = m * d
                pts.append(v)
    return pts


def _derivs_1d(values, deltas, scale):
    """First/second derivatives at 0 from 5-point stencils, Richardson across ``deltas``."""
    f0 = values[0]
    out = []
    for i, d in enumerate(deltas):
        fm2, fm1, fp1, fp2 = values[1 + 4 * i:5 + 4 * i]
        d1 = (-fp2 + 8 * fp1 - 8 * fm1 + fm2) / (12 * d)
        d2 = (-fp2 + 16 * fp1 - 30 * f0 + 16 * fm1 - fm2) / (12 * d * d)
        out.append((d1 * scale, d2 * scale))
    (b1, b2), (s1, s2) = out[0], out[-1]
    for big, small, what in ((b1, s1, "first"), (b2, s2, "second")):
        if abs(big - small) > 1e-3 * max(1.0, abs(small)):
            raise DerivativeUnstable(f"{what} derivative differs by {abs(big - small):.3g} between stencil widths")
    return s1 + (s1 - b1) / 15, s2 + (s2 - b2) / 15


def _mixed(values, deltas, scale):
    out = []
    for i, d in enumerate(deltas):
        mm, mp, pm, pp = values[1 + 4 * i:5 + 4 * i]
        out.append((pp - pm - mp + mm) / (4 * d * d) * scale)
    big, small = out[0], out[-1]
    if abs(big - small) > 1e-3 * max(1.0, abs(small)):
        raise DerivativeUnstable(f"mixed derivative differs by {abs(big - small):.3g} between stencil widths")
    return small + (small - big) / 3


# --------------------------------------------------------------------------
# quantities


@dataclass
class CLTQuantities:
    """Per-site CLT centring and variance for periodic (A, sigma2) and Type-2 (tilde) measures."""

    A: float
    sigma2: float
    A_tilde: float | None
    sigma2_tilde: float | None
    free_energy_1: float
    free_energy_2: float | None
    imag_residual_A: float = 0.0
    imag_residual_sigma2: float = 0.0
    lambda0: float = float("nan")
    gap: float = float("nan")
    grid: list = field(default_factory=list)
    cutoffs: list = field(default_factory=list)
    converged: bool = False
    k: int = 1

    def to_json(self, kind=None, P=None, s=None, alpha=None):
        out = {}
        if kind is not None:
            out["model"] = kind.to_json() if hasattr(kind, "to_json") else str(kind)
        if P is not None:
            out["P"] = P.to_json() if hasattr(P, "to_json") else P
        if s is not None:
            out["s"] = s
        if alpha is not None:
            out["alpha"] = alpha
        out.update({
            "A": self.A,
            "sigma2": self.sigma2,
            "A_tilde": self.A_tilde,
            "sigma2_tilde": self.sigma2_tilde,
            "F1": self.free_energy_1,
            "F2": self.free_energy_2,
            "imag_residual_A": self.imag_residual_A,
            "imag_residual_sigma2": self.imag_residual_sigma2,
            "lambda0": self.lambda0,
            "gap": self.gap,
            "grid": self.grid,
            "cutoffs": self.cutoffs,
            "converged": self.converged,
            "k": self.k,
        })
        return out


def _gl(M):
    x, w = roots_legendre(M)
    return (x + 1) / 2, w / 2


def free_energy_type1(kind, P, alpha: float, *, nodes_per_dim: int | None = None, details: bool = False):
    """``F1 = -(1/k) ln lam(alpha, 0)`` per site.

    The Gaussian reweighting is an exact split of ``Tr P``, so no correction
    term is needed to refer the value back to ``P``.
    """
    op = _Operator(kind, P, [], nodes_per_dim)
    kern = op.kernel(alpha)
    n = op.n_for(alpha)
    sp = op.spectrum(alpha, np.zeros(1), n)
    F1 = -math.log(sp.lambda_dom.real) / kern.k
    if not details:
        return F1
    ok, fine, coarse = op.converged(alpha, n)
    sp.converged = ok
    return {"F1": F1, "spectrum": sp, "k": kern.k, "nodes": n, "cutoffs": kern.cutoffs, "converged": ok}


def _regular_log_lambda(op, s, ts, n=None):
    """``ln lam(s, t)`` with the ``t = 0`` singular part ``-k n_s ln s`` removed."""
    kern = op.kernel(s)
    ln0, lnt, zero, n = op.log_lambdas(s, ts, n)
    sing = kern.k * _singular_axes(op.kind)
    return ln0 + sing * math.log(s), lnt, zero


def free_energy_type2(kind, P, alpha: float, M_quad: int = 12, *, nodes_per_dim: int | None = None,
                      tol: float = 1e-7, max_nodes: int = 96) -> float:
    """``F2 = -(1/k) int_0^1 ln lam(alpha x, 0) dx``.

    ``ln lam(s) = -k n_s ln s + r(s)`` with ``r`` regular at ``s = 0``; the
    logarithm is integrated in closed form and ``r`` by Gauss-Legendre rules
    of increasing size until two successive values agree within ``tol``.
    """
    op = _Operator(kind, P, [], nodes_per_dim)
    k = op.kernel(alpha).k
    ns = _singular_axes(op.kind)
    prev = None
    M = M_quad
    while M <= max_nodes:
        x, w = _gl(M)
        r = np.array([_regular_log_lambda(op, alpha * xi, [np.zeros(1)])[0] for xi in x])
        val = float(w @ r)
        if prev is not None and abs(val - prev) < tol * max(1.0, abs(val)):
            return -val / k + ns * (math.log(alpha) - 1.0)
        prev = val
        M *= 2
    raise QuadratureFailure(f"alpha-quadrature did not settle within {max_nodes} nodes")


def clt_mean_and_variance(kind, P, s: int, part: str = "Re", alpha: float = 1.0, *,
                          nodes_per_dim: int | None = None, deltas=DEFAULT_DELTAS,
                          type2: bool = True, M_quad: int = 12, jacobi_params=None) -> CLTQuantities:
    """``A = -i dF1/dt``, ``sigma2 = d^2F1/dt^2`` at ``t = 0`` and their Type-2 averages.

    ``A_tilde = int_0^1 A(alpha x) dx`` and ``sigma2_tilde`` likewise, obtained
    from ``t``-differences of ``F2``.  For real CMV models the Type-2 measure
    is the high-temperature Jacobi ensemble, whose site weights are not an
    ``alpha``-rescaling of the Schur-flow weights; its quantities come from
    :func:`jacobi_ensemble_type2` with ``jacobi_params = (a~, b~)``.
    """
    op = _Operator(kind, P, [(s, part)], nodes_per_dim)
    kern = op.kernel(alpha)
    k = kern.k
    ts = _stencil(deltas, 1)
    ln0, lnt, zero, n = op.log_lambdas(alpha, ts)
    F = -(ln0 + lnt) / k
    d1, d2 = _derivs_1d(F, deltas, 1.0)
    A = -1j * d1
    ok, _, _ = op.converged(alpha, n)
    out = CLTQuantities(
        A=float(A.real), sigma2=float(d2.real), A_tilde=None, sigma2_tilde=None,
        free_energy_1=-ln0 / k, free_energy_2=None,
        imag_residual_A=float(abs(A.imag)), imag_residual_sigma2=float(abs(d2.imag)),
        lambda0=math.exp(ln0), gap=zero.gap, grid=[n] * kern.dims, cutoffs=[list(c) for c in kern.cutoffs],
        converged=bool(ok), k=k,
    )
    if type2 and op.kind.family == "cmv" and op.kind.real_coeffs:
        jac = jacobi_ensemble_type2(P, s, part, alpha, jacobi_params or (-0.5, -0.5), M_quad=M_quad,
                                    nodes_per_dim=nodes_per_dim, deltas=deltas)
        out.A_tilde, out.sigma2_tilde, out.free_energy_2 = jac["A_tilde"], jac["sigma2_tilde"], jac["F2"]
    elif type2:
        x, w = _gl(M_quad)
        ns = _singular_axes(op.kind)
        vals = []
        for xi in x:
            reg, lt, _ = _regular_log_lambda(op, alpha * xi, ts)
            vals.append(np.concatenate([[reg], lt[1:]]))
        vals = np.array(vals)
        Fx = -(w @ vals) / k
        F2 = Fx[0] + ns * (math.log(alpha) - 1.0)
        Fx = np.concatenate([[0.0], Fx[1:]])
        t1, t2 = _derivs_1d(Fx, deltas, 1.0)
        out.A_tilde = float((-1j * t1).real)
        out.sigma2_tilde = float(t2.real)
        out.free_energy_2 = float(F2.real)
    return out


def _jacobi_pair_weights(s: float, params):
    at, bt = params
    # (1-a^2)^s (1-a)^(a~+1) (1+(-1)^j a)^(b~+1): odd sites first, then even
    return (s + at + bt + 2, s), (s + at + 1, s + bt + 1)


def jacobi_ensemble_type2(P, s: int, part: str = "Re", alpha: float = 1.0, params=(-0.5, -0.5), *,
                          M_quad: int = 12, nodes_per_dim: int | None = None, deltas=DEFAULT_DELTAS) -> dict:
    """Mean, variance and free energy per site of the high-temperature Jacobi ensemble.

    At depth ``x = j/N`` the density is locally a period-2 real-CMV GGE with
    site weights ``(1-a^2)^(alpha x) (1-a)^(a~+1) (1+(-1)^j a)^(b~+1)``
    (the ``alpha/N`` shifts vanish in the limit).  Nothing is singular at
    ``x = 0``, so ``F2 = -(1/k) int_0^1 ln lam(alpha x) dx`` is a plain
    Gauss-Legendre average.
    """
    if min(params) <= -1:
        raise ValueError("Jacobi parameters must exceed -1")
    kind = ModelKind("CMVPeriodic", real_coeffs=True)
    P = Polynomial.parse(P) if isinstance(P, str) else P
    op = _Operator(kind, P, [(s, part)], nodes_per_dim, pair_weights=lambda a: _jacobi_pair_weights(a, params))
    ts = _stencil(deltas, 1)
    x, w = _gl(M_quad)
    vals = []
    for xi in x:
        ln0, lt, _, _ = op.log_lambdas(alpha * xi, ts)
        vals.append(np.concatenate([[ln0], lt[1:]]))
    k = op.kernel(alpha * x[0]).k
    Fx = -(w @ np.array(vals)) / k
    F2 = float(Fx[0].real)
    t1, t2 = _derivs_1d(np.concatenate([[0.0], Fx[1:]]), deltas, 1.0)
    A = -1j * t1
    return {"A_tilde": float(A.real), "sigma2_tilde": float(t2.real), "F2": F2,
            "imag_residual": float(max(abs(A.imag), abs(t2.imag))), "k": k, "params": list(params)}


def susceptibility(kind, P, m: int, n: int, alpha: float = 1.0, *, part: str = "Re",
                   nodes_per_dim: int | None = None, deltas=DEFAULT_DELTAS, details: bool = False):
    """``C_{m,n} = d^2 F1 / dt1 dt2`` at zero for ``Re P + i t1 Tr M^m + i t2 Tr M^n``."""
    op = _Operator(kind, P, [(m, part), (n, part)], nodes_per_dim)
    kern = op.kernel(alpha)
    ts = _stencil(deltas, 2, mixed=True)
    ln0, lnt, zero, nn = op.log_lambdas(alpha, ts)
    F = -(lnt) / kern.k
    C = _mixed(F, deltas, 1.0)
    if not details:
        return float(C.real)
    ok, _, _ = op.converged(alpha, nn)
    return {"C": float(C.real), "imag_residual": float(abs(C.imag)), "converged": bool(ok),
            "gap": zero.gap, "grid": [nn] * kern.dims, "k": kern.k}


def toda_current_mean(P, n: int, alpha: float, *, M_quad: int = 8, nodes_per_dim: int | None = None,
                      deltas=DEFAULT_DELTAS, details: bool = False):
    """Mean Toda current per site, ``lim E[J^[n]] / N``, computed two ways.

    ``integral``: ``int_0^alpha C_{1,n}(s) ds`` by Gauss-Legendre in ``s``.
    ``type2``: ``alpha`` times the mixed ``t``-derivative of ``F2``, with a
    different rule in ``x``.  Both must agree within ``1e-3``.
    """
    kind = ModelKind("TodaPeriodic")
    P = Polynomial.parse(P) if isinstance(P, str) else P
    op = _Operator(kind, P, [(1, "Re"), (n, "Re")], nodes_per_dim)
    ts = _stencil(deltas, 2, mixed=True)

    def mixed_at(s):
        _, lnt, _, _ = op.log_lambdas(s, ts)
        return _mixed(-lnt / op.kernel(s).k, deltas, 1.0)

    x, w = _gl(M_quad)
    integral = alpha * float(sum(wi * mixed_at(alpha * xi).real for xi, wi in zip(x, w)))
    x2, w2 = _gl(M_quad + 3)
    lnts = []
    for xi in x2:
        _, lnt, _, _ = op.log_lambdas(alpha * xi, ts)
        lnts.append(-lnt / op.kernel(alpha * xi).k)
    F2t = np.asarray(w2 @ np.array(lnts))
    type2 = alpha * float(_mixed(F2t, deltas, 1.0).real)
    if abs(integral - type2) > 1e-3:
        raise DerivativeUnstable(f"current formulas disagree: {integral} vs {type2}")
    if details:
        return {"integral": integral, "type2": type2}
    return integral
