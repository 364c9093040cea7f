"""Quasiprobability grids from normal-ordered moments.

The normal-ordered characteristic function ``chi_N(z) = <exp(z a^+) exp(-z* a)>``
is Fourier-inverted to the P function; multiplying by ``exp(-|z|^2/2)`` first
gives the Wigner function.  A Gaussian regularizer ``exp(-sigma^2 |z|^2)``
smooths singular P functions.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import signal, special

from .errors import SeriesDivergenceError
from .moments import (
    Cat, Coherent, Fock, Squeezed, SqueezedFock, SqueezedThermal, Thermal,
    _squeeze_pairs, coherent_overlap, convolved_table,
)

MAX_SERIES_ORDER = 16
OVERFLOW = 1e8
DEFAULT_SIGMA = 0.15
# exp(-|z|^2/2) drops below 1e-12 beyond this radius
WIGNER_WINDOW = math.sqrt(2.0 * math.log(1e12))
MAX_WINDOW = 30.0
SERIES_TAIL = 1e-8


# -- characteristic function ---------------------------------------------------

def moment_map(table: np.ndarray, order: int | None = None) -> dict[tuple[int, int], complex]:
    """``{(k, l): T[k, l]}`` for a square moment table, keeping ``k + l <= order``
    when ``order`` is given (entries above it are not known)."""
    n = table.shape[0]
    return {(k, l): complex(table[k, l]) for k in range(n) for l in range(n)
            if order is None or k + l <= order}


def _series_table(moments: Mapping[tuple[int, int], complex], M: int) -> np.ndarray:
    table = np.zeros((M + 1, M + 1), dtype=complex)
    for k in range(M + 1):
        for l in range(M + 1):
            if (k, l) not in moments:
                raise KeyError(f"moment <a^+{k} a^{l}> (k={k}, l={l}) missing for order M={M}")
            table[k, l] = moments[(k, l)]
    return table


def _series(table: np.ndarray, z: np.ndarray) -> np.ndarray:
    M = table.shape[0] - 1
    inv = np.array([1.0 / math.factorial(k) for k in range(M + 1)])
    z = np.asarray(z, dtype=complex)
    zk = z[..., None] ** np.arange(M + 1) * inv
    wl = (-np.conj(z))[..., None] ** np.arange(M + 1) * inv
    return np.einsum("...k,kl,...l->...", zk, table, wl)


def char_fn(moments: Mapping[tuple[int, int], complex], M: int, z) -> np.ndarray | complex:
    """Truncated series ``sum_{k,l<=M} z^k/k! (-z*)^l/l! <a^+k a^l>``."""
    out = _series(_series_table(moments, M), np.asarray(z))
    return complex(out) if np.ndim(out) == 0 else out


def _component_chi(comp, z: np.ndarray) -> np.ndarray:
    z2 = np.abs(z) ** 2
    if isinstance(comp, Coherent):
        a = comp.alpha
        return np.exp(z * np.conj(a) - np.conj(z) * a)
    if isinstance(comp, Thermal):
        return np.exp(-comp.n0 * z2)
    if isinstance(comp, Fock):
        return special.eval_laguerre(comp.l, z2).astype(complex)
    if isinstance(comp, (Squeezed, SqueezedThermal)):
        n0 = comp.n0 if isinstance(comp, SqueezedThermal) else 0.0
        n, m = _squeeze_pairs(comp.r, comp.phi, n0)
        return np.exp(-n * z2 + 0.5 * (np.conj(m) * z * z + m * np.conj(z) ** 2))
    if isinstance(comp, Cat):
        amps = ((comp.alpha1, 1.0), (comp.alpha2, comp.theta))
        out = np.zeros_like(z, dtype=complex)
        for ai, ci in amps:
            for aj, cj in amps:
                out += (np.conj(ci) * cj * coherent_overlap(ai, aj)
                        * np.exp(z * np.conj(ai) - np.conj(z) * aj))
        return out / comp.norm_sq()
    if isinstance(comp, SqueezedFock):
        return _squeezed_fock_chi(comp, z)
    raise TypeError(f"no characteristic function for {type(comp).__name__}")


def _squeezed_fock_chi(comp: SqueezedFock, z: np.ndarray) -> np.ndarray:
    # <l| S^+ D(z) S |l> e^{|z|^2/2}, with S^+ D(z) S = D(z cosh r + z* e^{i phi} sinh r)
    ch, sh = math.cosh(comp.r), math.sinh(comp.r)
    w = z * ch + np.conj(z) * np.exp(1j * comp.phi) * sh
    return special.eval_laguerre(comp.l, np.abs(w) ** 2) * np.exp(-0.5 * np.abs(w) ** 2 + 0.5 * np.abs(z) ** 2)


@dataclass(frozen=True)
class StateSpec:
    """Single-mode state given as a convolution of component states.

    The characteristic function of a convolution is the product of the
    components' characteristic functions, so it is available in closed form.
    """

    components: tuple
    name: str = "state"

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if not self.components:
            raise ValueError("state needs at least one component")

    def chi(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        out = np.ones_like(z)
        for comp in self.components:
            out = out * _component_chi(comp, z)
        return out

    def moments(self, order: int, max_order: int | None = None) -> dict[tuple[int, int], complex]:
        table = convolved_table(self.components, order, max_order or max(order, 16))
        return moment_map(table, order)

    def decay_rate(self) -> float:
        """Slowest Gaussian decay rate of ``|chi(z)|`` over directions of ``z``.

        Coherent, Fock and cat factors do not decay (they are bounded or grow
        polynomially) and contribute zero.
        """
        rate = 0.0
        for c in self.components:
            if isinstance(c, Thermal):
                rate += c.n0
            elif isinstance(c, (Squeezed, SqueezedThermal, SqueezedFock)):
                n0 = c.n0 if isinstance(c, SqueezedThermal) else 0.0
                n, m = _squeeze_pairs(c.r, c.phi, n0)
                rate += n - abs(m)
        return rate

    @property
    def smooth(self) -> bool:
        """True when a thermal factor with ``n0 > 0`` makes P a regular function."""
        return any(isinstance(c, (Thermal, SqueezedThermal)) and c.n0 > 0 for c in self.components)


# -- grids ---------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """Square grid of ``n x n`` points covering ``center +- extent`` in both directions."""

    extent: float = 4.0
    n: int = 81
    center: complex = 0j

    def __post_init__(self):
        if not self.extent > 0 or self.n < 2:
            raise ValueError("grid needs extent > 0 and at least two points per axis")

    @property
    def re(self) -> np.ndarray:
        return self.center.real + np.linspace(-self.extent, self.extent, self.n)

    @property
    def im(self) -> np.ndarray:
        return self.center.imag + np.linspace(-self.extent, self.extent, self.n)

    @property
    def spacing(self) -> float:
        return 2.0 * self.extent / (self.n - 1)


@dataclass
class PhaseGrid:
    """Real grid ``values[i, j]`` at ``alpha = re[i] + 1j * im[j]``."""

    kind: str
    re: np.ndarray
    im: np.ndarray
    values: np.ndarray
    M: int | None = None
    sigma: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.spacing <= 0:
            raise ValueError("grid spacing must be > 0")
        if not np.all(np.isfinite(self.values)):
            raise SeriesDivergenceError("grid contains non-finite values")

    @property
    def spacing(self) -> float:
        return float(self.re[1] - self.re[0])

    @property
    def area(self) -> float:
        return self.spacing * float(self.im[1] - self.im[0])

    def alpha(self) -> np.ndarray:
        return self.re[:, None] + 1j * self.im[None, :]

    def integral(self, weight=None) -> float | complex:
        vals = self.values if weight is None else self.values * weight
        out = np.sum(vals) * self.area
        return complex(out) if np.iscomplexobj(out) else float(out)

    def mean(self) -> complex:
        return complex(np.sum(self.values * self.alpha()) * self.area)

    def marginals(self) -> tuple[np.ndarray, np.ndarray]:
        """Distributions of ``Re alpha`` and ``Im alpha``."""
        return (self.values.sum(axis=1) * (self.im[1] - self.im[0]),
                self.values.sum(axis=0) * self.spacing)

    def quadrature_variances(self) -> tuple[float, float]:
        """Variances of ``x = sqrt(2) Re alpha`` and ``y = sqrt(2) Im alpha`` (vacuum: 1/2)."""
        norm = self.integral()
        x, y = self.re[:, None], self.im[None, :]
        mx = self.integral(x) / norm
        my = self.integral(y) / norm
        return (2.0 * self.integral((x - mx) ** 2) / norm, 2.0 * self.integral((y - my) ** 2) / norm)


def _window_default(table: np.ndarray | None, M: int | None) -> float:
    """Largest ``|z| <= 4`` where the order-``M`` terms of the series stay below
    :data:`SERIES_TAIL`, so the truncated series is trusted on the window."""
    if table is None:
        return 4.0
    k, l = np.indices(table.shape)
    edge = ((k == M) | (l == M)) & (np.abs(table) > 0)
    if not edge.any():
        return 4.0
    logc = np.log(np.abs(table[edge])) - np.array([math.lgamma(a + 1) + math.lgamma(b + 1)
                                                   for a, b in zip(k[edge], l[edge])])
    deg = (k + l)[edge]
    # max_n c_n R^{d_n} <= tail  <=>  R <= min_n (log tail - log c_n) / d_n
    logr = np.min((math.log(SERIES_TAIL) - logc) / np.maximum(deg, 1))
    return float(min(4.0, math.exp(logr)))


def _closed_window(state: "StateSpec", damping: float) -> float | None:
    rate = state.decay_rate() + damping
    if rate <= 0:
        return None
    return min(MAX_WINDOW, math.sqrt(math.log(1e12) / rate))


def _resolve(source, M: int | None):
    """Return ``(chi callable, moment table or None, M)``."""
    if isinstance(source, StateSpec):
        return source.chi, None, None
    if callable(source):
        return source, None, None
    if isinstance(source, np.ndarray):
        source = moment_map(source)
    if M is None:
        M = MAX_SERIES_ORDER
        while M > 0 and not all((k, l) in source for k in range(M + 1) for l in range(M + 1)):
            M -= 1
    table = _series_table(source, M)
    return (lambda z: _series(table, z)), table, M


def _invert(chi: Callable, grid: GridSpec, window: float, damping: float, nz: int | None):
    """``(1/pi^2) int_{|z|<=window} chi(z) exp(-damping |z|^2) exp(alpha z* - alpha* z) d^2 z``."""
    # the kernel oscillates as exp(2i(v x - u y)); resolve the largest |alpha|
    amax = grid.extent + max(abs(grid.center.real), abs(grid.center.imag))
    if nz is None:
        nz = int(np.ceil(window * amax * 8.0 / np.pi)) * 2 + 1
        nz = max(nz, 101)
    zs = np.linspace(-window, window, nz)
    dz = zs[1] - zs[0]
    zx, zy = np.meshgrid(zs, zs, indexing="ij")
    z = zx + 1j * zy
    with np.errstate(over="ignore", invalid="ignore"):
        vals = chi(z) * np.exp(-damping * np.abs(z) ** 2)
    inside = np.abs(z) <= window
    vals = np.where(inside, vals, 0.0)
    peak = float(np.max(np.abs(vals))) if np.all(np.isfinite(vals)) else np.inf
    if peak > OVERFLOW:
        raise SeriesDivergenceError(
            f"characteristic function reaches {peak:.3g} inside |z| <= {window:.3g}; "
            "increase the regularization width or shrink the window")
    u, v = grid.re, grid.im
    eu = np.exp(-2j * np.outer(u, zs))   # [iu, iy]
    ev = np.exp(2j * np.outer(v, zs))    # [iv, ix]
    out = eu @ vals.T @ ev.T * dz * dz / np.pi ** 2
    return out.real, {"window": float(window), "nz": int(nz), "chi_peak": peak,
                      "imag_residue": float(np.max(np.abs(out.imag)))}


def p_grid(source, M: int | None = None, grid: GridSpec = GridSpec(), sigma: float | None = None,
           window: float | None = None, nz: int | None = None) -> PhaseGrid:
    """Regularized P function on ``grid``.

    ``source`` is a moment mapping ``{(k, l): <a^+k a^l>}`` (or table), a
    :class:`StateSpec`, or a callable ``chi(z)``.  ``sigma`` defaults to 0 for
    smooth states and :data:`DEFAULT_SIGMA` otherwise.
    """
    chi, table, M = _resolve(source, M)
    if sigma is None:
        sigma = 0.0 if isinstance(source, StateSpec) and source.smooth else DEFAULT_SIGMA
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if window is None:
        window = None
        if isinstance(source, StateSpec):
            window = _closed_window(source, sigma ** 2)
        if window is None:
            window = _window_default(table, M)
    vals, meta = _invert(chi, grid, window, sigma ** 2, nz)
    return PhaseGrid("P", grid.re, grid.im, vals, M, float(sigma), meta)


def wigner_grid(source, M: int | None = None, grid: GridSpec = GridSpec(), *,
                path: str = "direct", sigma: float = 0.0, window: float | None = None,
                nz: int | None = None) -> PhaseGrid:
    """Wigner function on ``grid``.

    ``path="direct"`` inverts ``chi_N exp(-|z|^2/2)``.  ``path="convolution"``
    builds a P grid on a padded grid and smooths it with the kernel
    ``(2/pi) exp(-2|alpha|^2)``.  A ``sigma > 0`` applies the same regularizer in
    both paths, so their outputs agree.
    """
    if isinstance(source, PhaseGrid):
        return _wigner_from_p(source)
    if path == "convolution":
        pad = 4.0
        steps = int(np.ceil(pad / grid.spacing))
        big = GridSpec(grid.extent + steps * grid.spacing, grid.n + 2 * steps, grid.center)
        pg = p_grid(source, M, big, sigma, window, nz)
        w = _wigner_from_p(pg)
        sl = slice(steps, steps + grid.n)
        return PhaseGrid("W", grid.re, grid.im, w.values[sl, sl], w.M, w.sigma,
                         {**w.metadata, "path": "convolution"})
    if path != "direct":
        raise ValueError(f"unknown path {path!r}")
    chi, table, M = _resolve(source, M)
    if window is None:
        if isinstance(source, StateSpec):
            window = _closed_window(source, 0.5 + sigma ** 2) or MAX_WINDOW
        elif table is None:
            window = WIGNER_WINDOW
        else:
            window = min(WIGNER_WINDOW, 2.0 * _window_default(table, M))
    vals, meta = _invert(chi, grid, window, 0.5 + sigma ** 2, nz)
    return PhaseGrid("W", grid.re, grid.im, vals, M, float(sigma), {**meta, "path": "direct"})


def _wigner_from_p(pg: PhaseGrid) -> PhaseGrid:
    h = pg.spacing
    half = int(np.ceil(4.0 / h))
    t = np.arange(-half, half + 1) * h
    kernel = (2.0 / np.pi) * np.exp(-2.0 * (t[:, None] ** 2 + t[None, :] ** 2))
    vals = signal.fftconvolve(pg.values, kernel, mode="same") * pg.area
    return PhaseGrid("W", pg.re, pg.im, vals, pg.M, pg.sigma, {**pg.metadata, "path": "convolution"})


# -- gallery -------------------------------------------------------------------

def gallery_states() -> tuple[list[tuple[str, object]], list[tuple[str, object]]]:
    """Rows and columns of the convolution gallery (the ``None`` row is the identity).

    The squeezed row/column are squeezed vacua; the coherent displacement of a
    squeezed coherent state is carried by the coherent entries.
    """
    rows = [("identity", None), ("coherent", Coherent(1j)), ("squeezed", Squeezed(0.5, 0.0)),
            ("thermal", Thermal(0.1)), ("fock", Fock(1))]
    cols = [("coherent", Coherent(1.0)),
            ("squeezed", Squeezed(1.0, -math.pi / 2)), ("thermal", Thermal(1e-3)), ("fock", Fock(2))]
    return rows, cols


def gallery(grid: GridSpec = GridSpec(5.0, 101)) -> dict[str, PhaseGrid]:
    """Wigner grids for the 5 x 4 table of pairwise convolutions."""
    rows, cols = gallery_states()
    out = {}
    for rname, r in rows:
        for cname, c in cols:
            comps = tuple(x for x in (r, c) if x is not None)
            state = StateSpec(comps, f"{rname}-{cname}")
            out[state.name] = wigner_grid(state, grid=grid)
    return out


# -- output --------------------------------------------------------------------

def config_hash(config) -> str:
    blob = json.dumps(config, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def grid_filename(state: str, grid: PhaseGrid) -> str:
    m = "na" if grid.M is None else str(grid.M)
    return f"{state}_{grid.kind}_{m}_{grid.sigma:g}.csv"


def write_grid(grid: PhaseGrid, out_dir, state: str, chash: str = "", extra=None) -> Path:
    """CSV with header ``re_alpha,im_alpha,value`` plus a JSON sidecar."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / grid_filename(state, grid)
    rr, ii = np.meshgrid(grid.re, grid.im, indexing="ij")
    lines = ["re_alpha,im_alpha,value"]
    lines += [f"{a:.10g},{b:.10g},{v:.12e}" for a, b, v in
              zip(rr.ravel(), ii.ravel(), grid.values.ravel())]
    path.write_text("\n".join(lines) + "\n")
    meta = {"state": state, "kind": grid.kind, "M": grid.M, "sigma": grid.sigma,
            "extent": [float(grid.re[0]), float(grid.re[-1]), float(grid.im[0]), float(grid.im[-1])],
            "spacing": grid.spacing, "n": [len(grid.re), len(grid.im)],
            "config_hash": chash, **grid.metadata, **(extra or {})}
    path.with_suffix(".json").write_text(json.dumps(meta, sort_keys=True, indent=1) + "\n")
    return path


__all__ = [
    "GridSpec", "PhaseGrid", "StateSpec", "char_fn", "config_hash", "gallery", "moment_map",
    "p_grid", "gallery_states", "wigner_grid", "write_grid",
]
