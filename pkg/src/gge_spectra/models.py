"""Lax matrices of the integrable lattices and β-ensembles.

Every model is described by a :class:`ModelKind` and built from a
:class:`Coordinates` record.  Indices are 0-based; periodic models wrap
``j -> j mod N``.

The per-site view used by the samplers and transfer operators pads the
coordinates so every site carries the same variables: the missing last
off-diagonal entry of a non-periodic Jacobi, Gram or antisymmetric matrix is
stored as ``0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import DomainError

__all__ = [
    "ModelKind",
    "Coordinates",
    "LaxMatrix",
    "build_matrix",
    "trace_power",
    "eigenvalues",
    "MAX_POWER",
    "site_array",
    "coords_from_sites",
    "site_fields",
    "random_coordinates",
]

MAX_POWER = 64

_TAGS = (
    "TodaPeriodic",
    "TodaNonPeriodic",
    "ExpTodaPeriodic",
    "LaguerreNonPeriodic",
    "VolterraPeriodic",
    "AntisymNonPeriodic",
    "CMVPeriodic",
    "CMVNonPeriodic",
    "INBAdditive",
    "INBMultiplicative",
)

_ALIASES = {
    "toda": "TodaPeriodic",
    "toda-periodic": "TodaPeriodic",
    "toda-nonperiodic": "TodaNonPeriodic",
    "gaussian-beta": "TodaNonPeriodic",
    "exp-toda": "ExpTodaPeriodic",
    "laguerre": "LaguerreNonPeriodic",
    "volterra": "VolterraPeriodic",
    "antisym": "AntisymNonPeriodic",
    "antisymmetric": "AntisymNonPeriodic",
    "cmv": "CMVPeriodic",
    "ablowitz-ladik": "CMVPeriodic",
    "schur": "CMVPeriodic",
    "circular": "CMVNonPeriodic",
    "jacobi": "CMVNonPeriodic",
    "cmv-nonperiodic": "CMVNonPeriodic",
    "inb-additive": "INBAdditive",
    "inb-multiplicative": "INBMultiplicative",
}


@dataclass(frozen=True)
class ModelKind:
    """Model tag plus its parameters.

    ``r`` is the band offset of the INB lattices.  ``unit`` names the INB
    diagonal that is frozen to 1 (``"a"``: super-diagonal, ``"b"``: the
    ``r``-th sub-diagonal).  ``real_coeffs`` selects real Verblunsky
    coefficients for the CMV models (Schur flow and Jacobi ensemble).
    """

    tag: str
    r: int | None = None
    unit: str | None = None
    real_coeffs: bool = False

    def __post_init__(self):
        if self.tag not in _TAGS:
            raise ValueError(f"unknown model tag {self.tag!r}")
        if self.tag.startswith("INB"):
            if self.r is None or int(self.r) < 1:
                raise ValueError("INB models need r >= 1")
            unit = self.unit or ("a" if self.tag == "INBAdditive" else "b")
            if unit not in ("a", "b"):
                raise ValueError("unit must be 'a' or 'b'")
            object.__setattr__(self, "unit", unit)
            object.__setattr__(self, "r", int(self.r))
        if self.real_coeffs and not self.is_cmv:
            raise ValueError("real_coeffs only applies to CMV models")

    @classmethod
    def parse(cls, name: str, r: int | None = None, unit: str | None = None) -> "ModelKind":
        key = name.strip()
        tag = _ALIASES.get(key.lower(), key)
        real = key.lower() in ("schur", "jacobi")
        return cls(tag, r=r, unit=unit, real_coeffs=real)

    @property
    def periodic(self) -> bool:
        return self.tag in ("TodaPeriodic", "ExpTodaPeriodic", "VolterraPeriodic", "CMVPeriodic") or self.is_inb

    @property
    def is_cmv(self) -> bool:
        return self.tag.startswith("CMV")

    @property
    def is_inb(self) -> bool:
        return self.tag.startswith("INB")

    @property
    def family(self) -> str:
        return {
            "TodaPeriodic": "jacobi",
            "TodaNonPeriodic": "jacobi",
            "ExpTodaPeriodic": "gram",
            "LaguerreNonPeriodic": "gram",
            "VolterraPeriodic": "antisym",
            "AntisymNonPeriodic": "antisym",
            "CMVPeriodic": "cmv",
            "CMVNonPeriodic": "cmv",
        }.get(self.tag, "inb")

    @property
    def site_vars(self) -> tuple:
        """Names of the real per-site coordinates, in storage order."""
        if self.family in ("jacobi", "gram"):
            return ("a", "b")
        if self.family == "antisym":
            return ("a",)
        if self.family == "cmv":
            return ("a",) if self.real_coeffs else ("re", "im")
        return ("b",) if self.unit == "a" else ("a",)

    @property
    def field_vars(self) -> tuple:
        """Names of the symbolic per-site variables appearing in trace monomials."""
        if self.family == "cmv":
            return ("a", "abar", "rho")
        if self.is_inb:
            return self.site_vars
        if self.family == "antisym":
            return ("a", "s")  # s = sqrt(a) appears in traces of length >= N
        return ("a", "b")

    def site_domains(self) -> tuple:
        """Domain of each per-site coordinate: ``real``, ``positive``, ``interval`` or ``disk``."""
        if self.family == "jacobi":
            return ("real", "positive")
        if self.family == "gram":
            return ("positive", "positive")
        if self.family in ("antisym", "inb"):
            return ("positive",)
        return ("interval",) if self.real_coeffs else ("disk", "disk")

    def __str__(self):
        extra = []
        if self.r is not None:
            extra.append(f"r={self.r}")
        if self.is_inb:
            extra.append(f"unit={self.unit}")
        if self.real_coeffs:
            extra.append("real")
        return self.tag + (f"({', '.join(extra)})" if extra else "")

    def to_json(self):
        return {"tag": self.tag, "r": self.r, "unit": self.unit, "real_coeffs": self.real_coeffs}

    @classmethod
    def from_json(cls, data) -> "ModelKind":
        if isinstance(data, str):
            return cls.parse(data)
        return cls(data["tag"], r=data.get("r"), unit=data.get("unit"), real_coeffs=bool(data.get("real_coeffs", False)))


@dataclass(frozen=True)
class Coordinates:
    """Entry coordinates of a Lax matrix.

    ``a`` holds the diagonal (Jacobi), the bidiagonal factor diagonal (Gram),
    the antisymmetric off-diagonal values, the Verblunsky coefficients (CMV)
    or the INB super-diagonal.  ``b`` holds the second vector where one exists.
    For INB lattices the frozen diagonal may be ``None``.
    """

    a: np.ndarray | None
    b: np.ndarray | None = None
    N: int = field(default=0)

    def __post_init__(self):
        a = None if self.a is None else np.asarray(self.a)
        b = None if self.b is None else np.asarray(self.b)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if not self.N:
            n = len(a) if a is not None else len(b)
            object.__setattr__(self, "N", int(n))


@dataclass(frozen=True)
class LaxMatrix:
    kind: ModelKind
    dim: int
    entries: np.ndarray
    periodic: bool

    def dense(self) -> np.ndarray:
        return self.entries


def _require(cond, msg):
    if not cond:
        raise DomainError(msg)


def _check(kind: ModelKind, c: Coordinates):
    N = c.N
    fam = kind.family
    tail = 0 if kind.periodic else 1
    if fam in ("jacobi", "gram"):
        _require(c.a is not None and c.a.shape == (N,), "a must have length N")
        nb = N - tail
        b = np.zeros(0) if (c.b is None and nb == 0) else c.b
        _require(b is not None and np.shape(b) == (nb,), f"b must have length {nb}")
        _require(np.all(np.isreal(c.a)) and np.all(np.isreal(b)), "coordinates must be real")
        _require(np.all(np.real(b) > 0), "b entries must be positive")
        if fam == "gram":
            _require(np.all(np.real(c.a) > 0), "a entries must be positive")
        if kind.periodic:
            _require(N >= 3, "periodic models need N >= 3")
    elif fam == "antisym":
        _require(c.a is not None and c.a.shape == (N - tail,), f"a must have length {N - tail}")
        _require(np.all(np.isreal(c.a)) and np.all(np.real(c.a) > 0), "a entries must be positive")
        if kind.periodic:
            _require(N >= 3, "periodic models need N >= 3")
    elif fam == "cmv":
        a = c.a
        _require(a is not None and a.ndim == 1, "a must be a vector")
        if kind.real_coeffs:
            _require(np.all(np.isreal(a)), "Schur/Jacobi coefficients must be real")
        mod = np.abs(a)
        if kind.periodic:
            _require(N % 2 == 0 and N >= 2, "periodic CMV needs an even number of coefficients")
            _require(np.all(mod < 1), "Verblunsky coefficients must satisfy |a_j| < 1")
        else:
            _require(np.all(mod[:-1] < 1), "Verblunsky coefficients must satisfy |a_j| < 1")
            _require(abs(mod[-1] - 1) < 1e-12, "the last coefficient must lie on the unit circle")
    else:
        _require(N >= kind.r + 1 and N >= 2, "INB lattices need N >= r + 1")
        for name in ("a", "b"):
            v = getattr(c, name)
            if name == kind.unit:
                _require(v is None or np.allclose(v, 1), f"{name} is frozen to 1 for this INB variant")
            else:
                _require(v is not None and np.shape(v) == (N,), f"{name} must have length N")
                _require(np.all(np.isreal(v)) and np.all(np.real(v) > 0), f"{name} entries must be positive")


def site_array(kind: ModelKind, coords: Coordinates) -> np.ndarray:
    """Per-site coordinate array of shape ``(N, len(kind.site_vars))``."""
    N = coords.N
    fam = kind.family
    if fam in ("jacobi", "gram"):
        X = np.zeros((N, 2))
        X[:, 0] = np.real(coords.a)
        b = np.real(coords.b) if coords.b is not None else np.zeros(0)
        X[: len(b), 1] = b
        return X
    if fam == "antisym":
        X = np.zeros((N, 1))
        X[: len(coords.a), 0] = np.real(coords.a)
        return X
    if fam == "cmv":
        a = np.asarray(coords.a, dtype=complex)
        return a.real[:, None].copy() if kind.real_coeffs else np.stack([a.real, a.imag], axis=1)
    v = coords.b if kind.unit == "a" else coords.a
    return np.real(np.asarray(v, dtype=float))[:, None].copy()


def coords_from_sites(kind: ModelKind, X: np.ndarray) -> Coordinates:
    """Inverse of :func:`site_array`."""
    X = np.asarray(X, dtype=float)
    N = X.shape[0]
    fam = kind.family
    if fam in ("jacobi", "gram"):
        b = X[:, 1] if kind.periodic else X[: N - 1, 1]
        return Coordinates(X[:, 0].copy(), b.copy(), N=N)
    if fam == "antisym":
        a = X[:, 0] if kind.periodic else X[: N - 1, 0]
        return Coordinates(a.copy(), N=N)
    if fam == "cmv":
        a = X[:, 0].astype(complex) if kind.real_coeffs else X[:, 0] + 1j * X[:, 1]
        return Coordinates(a, N=N)
    v = X[:, 0].copy()
    return Coordinates(None, v, N=N) if kind.unit == "a" else Coordinates(v, None, N=N)


def site_fields(kind: ModelKind, X: np.ndarray) -> np.ndarray:
    """Symbolic per-site variables (``kind.field_vars``) evaluated on site arrays.

    ``X`` has shape ``(..., N, d)``; the result has shape ``(..., N, nf)``.
    """
    X = np.asarray(X, dtype=float)
    if kind.family == "antisym":
        a = X[..., 0] + 0j
        return np.stack([a, np.sqrt(np.clip(X[..., 0], 0.0, None)) + 0j], axis=-1)
    if kind.family != "cmv":
        return X.astype(complex)
    a = X[..., 0] + 0j if kind.real_coeffs else X[..., 0] + 1j * X[..., 1]
    rho = np.sqrt(np.clip(1.0 - np.abs(a) ** 2, 0.0, None))
    return np.stack([a, np.conj(a), rho + 0j], axis=-1)


def _xi(a):
    rho = np.sqrt(max(0.0, 1.0 - abs(a) ** 2))
    return np.array([[np.conj(a), rho], [rho, -a]], dtype=complex)


def _cmv(kind: ModelKind, a: np.ndarray) -> np.ndarray:
    n = len(a)
    odd = np.zeros((n, n), dtype=complex)  # blocks Xi_1, Xi_3, ... (1-based labels)
    even = np.zeros((n, n), dtype=complex)
    for j in range(1, n + 1):
        target = odd if j % 2 == 1 else even
        r0 = j - 1
        if r0 + 1 < n:
            target[r0:r0 + 2, r0:r0 + 2] = _xi(a[j - 1])
        elif kind.periodic:
            # the last block wraps onto rows (n-1, 0)
            x = _xi(a[j - 1])
            target[n - 1, n - 1] = x[0, 0]
            target[n - 1, 0] = x[0, 1]
            target[0, n - 1] = x[1, 0]
            target[0, 0] = x[1, 1]
        else:
            target[r0, r0] = np.conj(a[j - 1])
    if kind.periodic:
        return odd @ even
    even[0, 0] = 1.0
    return even @ odd


def build_matrix(kind: ModelKind, coords: Coordinates) -> LaxMatrix:
    """Assemble the dense Lax matrix of ``kind`` from ``coords``."""
    _check(kind, coords)
    N = coords.N
    fam = kind.family
    M = np.zeros((N, N), dtype=complex)
    idx = np.arange(N)
    if fam == "jacobi":
        M[idx, idx] = coords.a
        nb = N if kind.periodic else N - 1
        b = np.asarray(coords.b if nb else [], dtype=float)
        M[idx[:nb], (idx[:nb] + 1) % N] = b
        M[(idx[:nb] + 1) % N, idx[:nb]] = b
    elif fam == "gram":
        B = np.zeros((N, N))
        B[idx, idx] = coords.a
        nb = N if kind.periodic else N - 1
        B[idx[:nb], (idx[:nb] + 1) % N] = coords.b
        M[:] = B @ B.T
    elif fam == "antisym":
        s = np.sqrt(np.asarray(coords.a, dtype=float))
        n = len(s)
        M[idx[:n], (idx[:n] + 1) % N] = s
        M[(idx[:n] + 1) % N, idx[:n]] = -s
    elif fam == "cmv":
        M[:] = _cmv(kind, np.asarray(coords.a, dtype=complex))
    else:
        r = kind.r
        up = np.ones(N) if coords.a is None else np.asarray(coords.a, dtype=float)
        low = np.ones(N) if coords.b is None else np.asarray(coords.b, dtype=float)
        M[idx, (idx + 1) % N] += up
        M[(idx + r) % N, idx] += low
    return LaxMatrix(kind, N, M, kind.periodic)


def trace_power(M: LaxMatrix, m: int) -> complex:
    """Tr(M^m) by repeated sparse multiplication."""
    if m < 1 or m > MAX_POWER:
        raise ValueError(f"power must lie in [1, {MAX_POWER}]")
    A = sp.csr_matrix(M.entries)
    P = A
    for _ in range(m - 1):
        P = P @ A
    return complex(P.diagonal().sum())


def eigenvalues(M: LaxMatrix) -> np.ndarray:
    """Full spectrum of a dense Lax matrix (dimension up to 4096)."""
    if M.dim > 4096:
        raise ValueError("dense eigensolve limited to dim <= 4096")
    E = M.entries
    if M.kind.family in ("jacobi", "gram") and np.all(E.imag == 0):
        return scipy.linalg.eigvalsh(E.real).astype(complex)
    return scipy.linalg.eigvals(E)


def random_coordinates(kind: ModelKind, N: int, rng=None, scale: float = 1.0) -> Coordinates:
    """Random valid coordinates (used for checks and examples)."""
    rng = np.random.default_rng(rng)
    fam = kind.family
    if fam in ("jacobi", "gram"):
        a = rng.normal(size=N) * scale if fam == "jacobi" else rng.uniform(0.3, 1.5, N) * scale
        nb = N if kind.periodic else N - 1
        return Coordinates(a, rng.uniform(0.3, 1.5, nb) * scale, N=N)
    if fam == "antisym":
        n = N if kind.periodic else N - 1
        return Coordinates(rng.uniform(0.2, 1.5, n) * scale, N=N)
    if fam == "cmv":
        if kind.real_coeffs:
            a = rng.uniform(-0.9, 0.9, N).astype(complex)
            if not kind.periodic:
                a[-1] = -1.0
        else:
            a = np.sqrt(rng.uniform(0, 0.8, N)) * np.exp(2j * np.pi * rng.random(N))
            if not kind.periodic:
                a[-1] = np.exp(2j * np.pi * rng.random())
        return Coordinates(a, N=N)
    v = rng.uniform(0.3, 1.5, N) * scale
    return Coordinates(None, v, N=N) if kind.unit == "a" else Coordinates(v, None, N=N)
