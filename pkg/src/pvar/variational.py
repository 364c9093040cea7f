"""Variational steady states from the norm of the moment equations of motion.

For a parameterized ansatz every tracked expectation value ``<A_n>`` has a time
derivative ``F_n`` that is a polynomial in moments.  The steady state is
approximated by minimizing ``D = sum_n w_n |F_n|`` over the ansatz parameters
with a multi-start Nelder-Mead search.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import optimize

from .algebra import IDENTITY, EomSystem, ModelSpec, Monomial, SPIN_LABELS, eom_system
from .errors import ClosureError, MomentOrderError
from .moments import (
    DEFAULT_MAX_ORDER, Ansatz, Cat, Coherent, Fock, ModeAnsatz, SpinAnsatz, Squeezed,
    SqueezedFock, SqueezedThermal, Thermal, ansatz_moment, cluster_terms, convolved_table,
)

WEIGHT_MODES = ("adaptive", "uniform")


# -- tracked keys ------------------------------------------------------------------

def _preference(key: Monomial):
    creations = sum(p for _, p, _ in key.boson)
    raised = sum(1 for _, lab in key.spin if lab == "+")
    return (creations, raised, key)


def preferred(key: Monomial) -> Monomial:
    """Representative of ``{key, key^+}``: fewer creation operators, then sigma- over sigma+."""
    return min(key, key.dagger(), key=_preference)


def tracked_keys(n_modes: int, n_spins: int = 0, order: int = 2) -> list[Monomial]:
    """All moments of degree ``1..order`` up to Hermitian conjugation.

    Degree counts boson exponents plus one per spin factor, so ``order=1`` on the
    Jaynes-Cummings model gives ``<a>``, ``<sigma->``, ``<sigma_z>``.
    """
    if order < 1:
        raise ValueError("key order must be >= 1")
    boson_parts = [{}]
    for total in range(1, order + 1):
        for exps in itertools.product(range(total + 1), repeat=2 * n_modes):
            if sum(exps) != total:
                continue
            boson_parts.append({m: (exps[2 * m], exps[2 * m + 1]) for m in range(n_modes)})
    spin_parts = [{}]
    for n_on in range(1, min(order, n_spins) + 1):
        for sites in itertools.combinations(range(n_spins), n_on):
            for labels in itertools.product(SPIN_LABELS, repeat=n_on):
                spin_parts.append(dict(zip(sites, labels)))
    out = set()
    for b in boson_parts:
        for s in spin_parts:
            key = Monomial.make(b, s)
            if key.is_identity() or key.degree > order:
                continue
            out.add(preferred(key))
    return sorted(out, key=lambda k: (k.degree, _preference(k)))


# -- direct residuals -----------------------------------------------------------------

def _max_rhs_order(system: EomSystem) -> int:
    return max((m.order for m in system.monomials()), default=0)


def residuals(ansatz: Ansatz, system: EomSystem,
              max_order: int = DEFAULT_MAX_ORDER) -> dict[Monomial, complex]:
    """``d<A_n>/dt`` for every tracked key, each moment evaluated by the ansatz."""
    out = {}
    for key, rhs in system:
        total = 0j
        for mono, coef in rhs.items():
            try:
                total += coef * ansatz_moment(ansatz, mono, max_order)
            except MomentOrderError as exc:
                raise ClosureError(
                    f"monomial {mono} in the equation for {key} exceeds the closure order "
                    f"{max_order}", key=mono) from exc
        out[key] = total
    return out


@dataclass(frozen=True)
class CostReport:
    total: float
    residuals: Mapping[Monomial, complex]
    weights: Mapping[Monomial, float]
    evaluations: int = 1
    converged: bool = True

    def as_record(self) -> dict:
        return {
            "D": self.total,
            "evaluations": self.evaluations,
            "converged": self.converged,
            "residuals": {str(k): [v.real, v.imag] for k, v in self.residuals.items()},
        }


def key_weights(ansatz: Ansatz, keys: Sequence[Monomial], mode: str = "adaptive",
                values: Mapping[Monomial, complex] | None = None) -> dict[Monomial, float]:
    if mode not in WEIGHT_MODES:
        raise ValueError(f"weights must be one of {WEIGHT_MODES}")
    if mode == "uniform":
        return {k: 1.0 for k in keys}
    out = {}
    for k in keys:
        v = values[k] if values is not None else ansatz_moment(ansatz, k)
        out[k] = 1.0 / max(1.0, abs(v))
    return out


def cost(ansatz: Ansatz, system: EomSystem, weights: str | Mapping[Monomial, float] = "adaptive",
         scale: float = 1.0, max_order: int = DEFAULT_MAX_ORDER) -> CostReport:
    """``D = sum_n w_n |F_n|``.  ``weights`` is a mode name or an explicit map;
    ``scale`` multiplies every weight."""
    res = residuals(ansatz, system, max_order)
    if isinstance(weights, str):
        w = key_weights(ansatz, system.keys, weights)
    else:
        w = {k: float(weights[k]) for k in system.keys}
    w = {k: scale * v for k, v in w.items()}
    total = float(sum(w[k] * abs(res[k]) for k in system.keys))
    return CostReport(total, res, w)


# -- compiled residuals -----------------------------------------------------------------

_SPIN_INDEX = {None: 0, "+": 1, "-": 2, "z": 3}


class CompiledCost:
    """Vectorized evaluation of residuals for ansatzes sharing one structure.

    The structure (number of modes/spins, correlation keys, moment order) is
    fixed at construction; each call then needs only per-mode moment tables,
    spin expectations and correlation values.
    """

    def __init__(self, system: EomSystem, structure: Ansatz, max_order: int = DEFAULT_MAX_ORDER):
        self.system = system
        self.keys = system.keys
        self.n_modes = structure.n_modes
        self.n_spins = structure.n_spins
        self.max_order = max_order
        monos = sorted(set(system.monomials()) | set(self.keys))
        self.order = max((m.order for m in monos), default=0)
        for m in monos:
            m.check_space(self.n_modes, self.n_spins)
            if m.order > max_order:
                raise ClosureError(f"monomial {m} exceeds the closure order {max_order}", key=m)
        self.monomials = monos
        index = {m: i for i, m in enumerate(monos)}

        self.corr_keys = tuple(sorted(structure.correlations))
        blocks, block_src = [], []
        for j, canon in enumerate(self.corr_keys):
            blocks.append(canon)
            block_src.append((j, False))
            if canon.dagger() != canon:
                blocks.append(canon.dagger())
                block_src.append((j, True))
        self._block_src = block_src

        width = self.order + 1
        rows, weights, mode_idx, spin_idx, delta_lists = [], [], [], [], []
        for i, mono in enumerate(monos):
            boson = Monomial(mono.boson)
            sidx = [_SPIN_INDEX[mono.spin_label(s)] for s in range(self.n_spins)]
            use = tuple(b for b in blocks if set(b.modes) <= set(boson.modes)) \
                if len(boson.modes) >= 2 else ()
            terms = cluster_terms(boson, use) if use else ((1.0, (), boson),)
            for weight, counts, rem in terms:
                rows.append(i)
                weights.append(weight)
                mode_idx.append([rem.exponents(m)[0] * width + rem.exponents(m)[1]
                                 for m in range(self.n_modes)])
                spin_idx.append(sidx)
                dl = []
                for b, k in zip(use, counts):
                    dl.extend([blocks.index(b) + 1] * k)
                delta_lists.append(dl)
        n_terms = len(rows)
        depth = max((len(d) for d in delta_lists), default=0)
        self._rows = np.asarray(rows, dtype=np.intp)
        self._weights = np.asarray(weights, dtype=float)
        self._mode_idx = np.asarray(mode_idx, dtype=np.intp).reshape(n_terms, self.n_modes)
        self._spin_idx = np.asarray(spin_idx, dtype=np.intp).reshape(n_terms, self.n_spins)
        self._delta_idx = np.zeros((n_terms, depth), dtype=np.intp)
        for t, dl in enumerate(delta_lists):
            self._delta_idx[t, : len(dl)] = dl
        self._n_monos = len(monos)

        self._coef = np.zeros((len(self.keys), len(monos)), dtype=complex)
        for r, (key, rhs) in enumerate(system):
            for mono, c in rhs.items():
                self._coef[r, index[mono]] += c
        self._key_cols = np.array([index[k] for k in self.keys], dtype=np.intp)

    def moments(self, ansatz: Ansatz) -> np.ndarray:
        """Moments of every monomial in ``self.monomials``."""
        if tuple(sorted(ansatz.correlations)) != self.corr_keys and ansatz.correlations:
            raise ValueError("ansatz correlation keys differ from the compiled structure")
        vals = np.ones(len(self._rows), dtype=complex) * self._weights
        for m, mode in enumerate(ansatz.modes):
            table = convolved_table(mode.components, self.order, self.max_order)
            vals *= table.reshape(-1)[self._mode_idx[:, m]]
        for s, spin in enumerate(ansatz.spins):
            x, y, z = spin.bloch
            sv = np.array([1.0, complex(0.5 * x, 0.5 * y), complex(0.5 * x, -0.5 * y), z])
            vals *= sv[self._spin_idx[:, s]]
        if self._delta_idx.shape[1]:
            dv = np.ones(len(self._block_src) + 1, dtype=complex)
            for i, (j, conj) in enumerate(self._block_src):
                v = ansatz.correlations.get(self.corr_keys[j], 0j)
                dv[i + 1] = np.conj(v) if conj else v
            vals *= np.prod(dv[self._delta_idx], axis=1)
        out = np.zeros(self._n_monos, dtype=complex)
        np.add.at(out, self._rows, vals)
        return out

    def evaluate(self, ansatz: Ansatz, weights="adaptive"):
        """Return ``(D, residual vector, weight vector)``."""
        mom = self.moments(ansatz)
        res = self._coef @ mom
        if isinstance(weights, str):
            if weights == "uniform":
                w = np.ones(len(self.keys))
            elif weights == "adaptive":
                w = 1.0 / np.maximum(1.0, np.abs(mom[self._key_cols]))
            else:
                raise ValueError(f"weights must be one of {WEIGHT_MODES}")
        else:
            w = np.array([float(weights[k]) for k in self.keys])
        return float(np.sum(w * np.abs(res))), res, w

    def report(self, ansatz: Ansatz, weights="adaptive", evaluations=1, converged=True):
        total, res, w = self.evaluate(ansatz, weights)
        return CostReport(total, dict(zip(self.keys, res)), dict(zip(self.keys, w.tolist())),
                          evaluations, converged)


# -- parameter schema ---------------------------------------------------------------------

@dataclass(frozen=True)
class Slot:
    name: str
    kind: str   # "real" (identity), "sqrt" (value = u^2), "bloch"


def _component_slots(prefix: str, comp) -> list[Slot]:
    if isinstance(comp, Coherent):
        return [Slot(f"{prefix}.alpha.re", "real"), Slot(f"{prefix}.alpha.im", "real")]
    if isinstance(comp, Thermal):
        return [Slot(f"{prefix}.n0", "sqrt")]
    if isinstance(comp, Fock):
        return []
    if isinstance(comp, Squeezed):
        return [Slot(f"{prefix}.zeta.re", "real"), Slot(f"{prefix}.zeta.im", "real")]
    if isinstance(comp, SqueezedThermal):
        return [Slot(f"{prefix}.n0", "sqrt"), Slot(f"{prefix}.zeta.re", "real"),
                Slot(f"{prefix}.zeta.im", "real")]
    if isinstance(comp, SqueezedFock):
        return [Slot(f"{prefix}.zeta.re", "real"), Slot(f"{prefix}.zeta.im", "real")]
    if isinstance(comp, Cat):
        return [Slot(f"{prefix}.{n}.{part}", "real")
                for n in ("alpha1", "alpha2", "theta") for part in ("re", "im")]
    raise TypeError(f"unknown component {comp!r}")


def _component_values(comp) -> list[float]:
    if isinstance(comp, Coherent):
        return [comp.alpha.real, comp.alpha.imag]
    if isinstance(comp, Thermal):
        return [math.sqrt(comp.n0)]
    if isinstance(comp, Fock):
        return []
    zeta = None
    if isinstance(comp, (Squeezed, SqueezedThermal, SqueezedFock)):
        zeta = comp.r * complex(math.cos(comp.phi), math.sin(comp.phi))
    if isinstance(comp, Squeezed) or isinstance(comp, SqueezedFock):
        return [zeta.real, zeta.imag]
    if isinstance(comp, SqueezedThermal):
        return [math.sqrt(comp.n0), zeta.real, zeta.imag]
    if isinstance(comp, Cat):
        return [comp.alpha1.real, comp.alpha1.imag, comp.alpha2.real, comp.alpha2.imag,
                comp.theta.real, comp.theta.imag]
    raise TypeError(f"unknown component {comp!r}")


def _build_component(template, vals: list[float]):
    if isinstance(template, Coherent):
        return Coherent(complex(vals[0], vals[1]))
    if isinstance(template, Thermal):
        return Thermal(vals[0] ** 2)
    if isinstance(template, Fock):
        return template
    if isinstance(template, Squeezed):
        z = complex(vals[0], vals[1])
        return Squeezed(abs(z), math.atan2(z.imag, z.real))
    if isinstance(template, SqueezedThermal):
        z = complex(vals[1], vals[2])
        return SqueezedThermal(vals[0] ** 2, abs(z), math.atan2(z.imag, z.real))
    if isinstance(template, SqueezedFock):
        z = complex(vals[0], vals[1])
        return SqueezedFock(template.l, abs(z), math.atan2(z.imag, z.real))
    if isinstance(template, Cat):
        return Cat(complex(vals[0], vals[1]), complex(vals[2], vals[3]), complex(vals[4], vals[5]))
    raise TypeError(f"unknown component {template!r}")


class ParameterSchema:
    """Flat real parameter vector for an ansatz structure.

    Transforms: thermal occupations are squares (``n0 = u^2``), squeezing is the
    complex ``zeta = r e^{i phi}``, Bloch vectors are radially clamped to the
    unit ball.  Slots listed in ``frozen`` keep their template value.
    """

    def __init__(self, template: Ansatz, frozen: Iterable[str] = ()):
        self.template = template
        slots: list[Slot] = []
        for m, mode in enumerate(template.modes):
            for c, comp in enumerate(mode.components):
                slots.extend(_component_slots(f"mode{m}.comp{c}", comp))
        for s in range(template.n_spins):
            slots.extend(Slot(f"spin{s}.{ax}", "bloch") for ax in "xyz")
        for key in sorted(template.correlations):
            slots.append(Slot(f"corr[{key}].re", "real"))
            if key.dagger() != key:
                slots.append(Slot(f"corr[{key}].im", "real"))
        self.all_slots = slots
        frozen = set(frozen)
        unknown = frozen - {s.name for s in slots}
        if unknown:
            raise KeyError(f"unknown frozen slots: {sorted(unknown)}")
        self.free_mask = np.array([s.name not in frozen for s in slots], dtype=bool)
        self._full_template = self._pack_all(template)

    @property
    def names(self) -> list[str]:
        return [s.name for s, f in zip(self.all_slots, self.free_mask) if f]

    @property
    def size(self) -> int:
        return int(self.free_mask.sum())

    def _pack_all(self, ansatz: Ansatz) -> np.ndarray:
        vals: list[float] = []
        for mode in ansatz.modes:
            for comp in mode.components:
                vals.extend(_component_values(comp))
        for spin in ansatz.spins:
            vals.extend(spin.bloch)
        for key in sorted(self.template.correlations):
            d = ansatz.correlations.get(key, 0j)
            vals.append(d.real)
            if key.dagger() != key:
                vals.append(d.imag)
        return np.asarray(vals, dtype=float)

    def pack(self, ansatz: Ansatz) -> np.ndarray:
        return self._pack_all(ansatz)[self.free_mask]

    def unpack(self, vector) -> Ansatz:
        full = self._full_template.copy()
        full[self.free_mask] = np.asarray(vector, dtype=float)
        pos = 0
        modes = []
        for mode in self.template.modes:
            comps = []
            for comp in mode.components:
                n = len(_component_slots("", comp))
                comps.append(_build_component(comp, list(full[pos:pos + n])))
                pos += n
            modes.append(ModeAnsatz(tuple(comps)))
        spins = []
        for _ in self.template.spins:
            b = full[pos:pos + 3]
            norm = float(np.linalg.norm(b))
            if norm > 1.0:
                b = b / norm
            spins.append(SpinAnsatz(tuple(b)))
            pos += 3
        corr = {}
        for key in sorted(self.template.correlations):
            re = full[pos]
            pos += 1
            im = 0.0
            if key.dagger() != key:
                im = full[pos]
                pos += 1
            corr[key] = complex(re, im)
        return Ansatz(tuple(modes), tuple(spins), corr)


# -- minimization ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MinimizeOptions:
    order: int = 2
    weights: str = "adaptive"
    n_starts: int = 16
    seed: int = 0
    max_evals: int = 20000
    stall_iters: int = 50
    stall_tol: float = 1e-12
    start_spread: float = 0.5
    simplex_scale: float = 0.1
    simplex_floor: float = 0.05
    max_restarts: int = 20
    report_factor: float = 10.0
    max_order: int = DEFAULT_MAX_ORDER
    parallel: int = 1
    keys: tuple[Monomial, ...] | None = None

    def __post_init__(self):
        if self.weights not in WEIGHT_MODES:
            raise ValueError(f"weights must be one of {WEIGHT_MODES}")
        if self.n_starts < 1 or self.max_evals < 1:
            raise ValueError("n_starts and max_evals must be positive")


@dataclass(frozen=True)
class Candidate:
    seed_index: int
    ansatz: Ansatz
    report: CostReport
    vector: np.ndarray = field(repr=False, compare=False, default=None)


@dataclass(frozen=True)
class MinimizeResult:
    ansatz: Ansatz
    report: CostReport
    candidates: tuple[Candidate, ...]
    system: EomSystem = field(repr=False)

    @property
    def D(self) -> float:
        return self.report.total


class _Stall(Exception):
    pass


def _nelder_mead(fun, x0, opts: MinimizeOptions, budget: int):
    """Nelder-Mead with restarts; stops when the best value improves by less than
    ``stall_tol`` over ``stall_iters`` iterations or the budget is spent."""
    x_best = np.asarray(x0, dtype=float)
    f_best = fun(x_best)
    used = 1
    stalled = False
    for _ in range(opts.max_restarts + 1):
        if used >= budget:
            break
        n = x_best.size
        step = np.maximum(opts.simplex_scale * np.abs(x_best), opts.simplex_floor)
        simplex = np.vstack([x_best] + [x_best + step[i] * np.eye(n)[i] for i in range(n)])
        history = []

        def callback(intermediate_result):
            history.append(float(intermediate_result.fun))
            if len(history) > opts.stall_iters and \
                    history[-opts.stall_iters - 1] - history[-1] < opts.stall_tol:
                raise StopIteration

        res = optimize.minimize(
            fun, x_best, method="Nelder-Mead", callback=callback,
            options={"initial_simplex": simplex, "maxfev": budget - used, "xatol": 0.0,
                     "fatol": 0.0, "adaptive": n > 6},
        )
        used += int(res.nfev)
        improved = f_best - res.fun
        if res.fun < f_best:
            x_best, f_best = np.asarray(res.x, dtype=float), float(res.fun)
        if improved < opts.stall_tol or f_best < opts.stall_tol:
            stalled = True
            break
    return x_best, f_best, used, stalled and used < budget or f_best < opts.stall_tol


def default_keys(model: ModelSpec, order: int) -> list[Monomial]:
    return tracked_keys(model.n_modes, model.n_spins, order)


def minimize(model: ModelSpec, template: Ansatz, options: MinimizeOptions | None = None,
             frozen: Iterable[str] = (), starts: Sequence[Ansatz] = ()) -> MinimizeResult:
    """Multi-start Nelder-Mead search for the ansatz with the smallest residual norm.

    Start 0 is the template itself, followed by any explicit ``starts`` and then
    random perturbations of the template drawn from ``options.seed``.  All
    candidates within ``report_factor`` of the best norm are returned, sorted by
    norm then start index.
    """
    opts = options or MinimizeOptions()
    keys = list(opts.keys) if opts.keys is not None else default_keys(model, opts.order)
    system = eom_system(model, keys)
    compiled = CompiledCost(system, template, opts.max_order)
    schema = ParameterSchema(template, frozen)

    def fun(v):
        try:
            return compiled.evaluate(schema.unpack(v), opts.weights)[0]
        except (ValueError, OverflowError, FloatingPointError):
            return np.inf

    rng = np.random.default_rng(opts.seed)
    x_template = schema.pack(template)
    inits = [x_template] + [schema.pack(s) for s in starts]
    while len(inits) < opts.n_starts:
        spread = opts.start_spread * np.maximum(np.abs(x_template), 1.0)
        inits.append(x_template + spread * rng.standard_normal(x_template.size))

    def run(i):
        if schema.size == 0:
            return i, x_template, fun(x_template), 1, True
        x, f, used, conv = _nelder_mead(fun, inits[i], opts, opts.max_evals)
        return i, x, f, used, conv

    if opts.parallel > 1:
        with ThreadPoolExecutor(opts.parallel) as pool:
            outcomes = list(pool.map(run, range(len(inits))))
    else:
        outcomes = [run(i) for i in range(len(inits))]

    cands = []
    for i, x, f, used, conv in outcomes:
        ans = schema.unpack(x)
        rep = compiled.report(ans, opts.weights, used, bool(conv))
        cands.append(Candidate(i, ans, rep, x))
    cands.sort(key=lambda c: (c.report.total, c.seed_index))
    best = cands[0]
    limit = max(best.report.total * opts.report_factor, 1e-300)
    kept = tuple(c for c in cands if c.report.total <= limit)
    return MinimizeResult(best.ansatz, best.report, kept, system)


def with_correlations(ansatz: Ansatz, keys: Iterable[Monomial]) -> Ansatz:
    """Copy of ``ansatz`` with zero-initialized correlation entries for ``keys``."""
    corr = dict(ansatz.correlations)
    for k in keys:
        corr.setdefault(k.canonical(), 0j)
    return replace(ansatz, correlations=corr)


def pair_correlation_keys(n_modes: int) -> list[Monomial]:
    """Second-order cross-mode keys ``a_i a_j`` and ``a_i^+ a_j`` (``i < j``)."""
    out = []
    for i, j in itertools.combinations(range(n_modes), 2):
        out.append(Monomial.make({i: (0, 1), j: (0, 1)}))
        out.append(Monomial.make({i: (1, 0), j: (0, 1)}))
    return [k.canonical() for k in out]


def mean_field_starts(model: ModelSpec, n_starts: int = 8, seed: int = 0,
                      scale: float | None = None, tol: float = 1e-9) -> list[tuple[complex, ...]]:
    """Roots of the factorized first-order equations for a coherent product state.

    Boson-only models.  Root finding starts from the origin and from random
    amplitudes of size ``scale`` (default: drive strength over the smallest
    linear decay, a rough size of the linear response).  Distinct roots are
    returned sorted by total intensity.
    """
    if model.n_spins:
        raise ValueError("mean-field starts are implemented for boson-only models")
    n = model.n_modes
    keys = [Monomial.make({m: (0, 1)}) for m in range(n)]
    system = eom_system(model, keys)
    structure = Ansatz(tuple(ModeAnsatz((Coherent(0j),)) for _ in range(n)))
    compiled = CompiledCost(system, structure)

    def fun(v):
        amps = v[:n] + 1j * v[n:]
        ans = Ansatz(tuple(ModeAnsatz((Coherent(a),)) for a in amps))
        _, res, _ = compiled.evaluate(ans, "uniform")
        return np.concatenate([res.real, res.imag])

    if scale is None:
        lin = fun(np.zeros(2 * n))
        drive = float(np.max(np.abs(lin))) if lin.size else 0.0
        scale = max(1.0, 10.0 * drive)
    rng = np.random.default_rng(seed)
    x0s = [np.zeros(2 * n)] + [scale * rng.standard_normal(2 * n) for _ in range(n_starts - 1)]
    roots: list[np.ndarray] = []
    for x0 in x0s:
        sol = optimize.root(fun, x0, method="hybr", options={"xtol": 1e-13})
        if not sol.success or np.max(np.abs(fun(sol.x))) > tol * max(1.0, np.max(np.abs(sol.x))):
            continue
        if all(np.max(np.abs(sol.x - r)) > 1e-6 * max(1.0, np.max(np.abs(r))) for r in roots):
            roots.append(sol.x)
    roots.sort(key=lambda r: (float(np.sum(r ** 2)), tuple(np.round(r, 12))))
    return [tuple(complex(a) for a in r[:n] + 1j * r[n:]) for r in roots]


def seeded_template(template: Ansatz, amplitudes: Sequence[complex]) -> Ansatz:
    """Template with each mode's first coherent component set to ``amplitudes``."""
    modes = []
    for mode, amp in zip(template.modes, amplitudes):
        comps = list(mode.components)
        for i, c in enumerate(comps):
            if isinstance(c, Coherent):
                comps[i] = Coherent(amp)
                break
        modes.append(ModeAnsatz(tuple(comps)))
    return replace(template, modes=tuple(modes))


def least_squares_start(model: ModelSpec, template: Ansatz, options: MinimizeOptions | None = None,
                        frozen: Iterable[str] = (), max_nfev: int = 2000) -> Ansatz:
    """Start point from a smooth least-squares fit of the weighted residuals.

    The squared norm is differentiable where ``D`` is not, so a trust-region
    solver reaches the neighbourhood of a minimum cheaply; the simplex search
    then minimizes ``D`` itself from there.
    """
    opts = options or MinimizeOptions()
    keys = list(opts.keys) if opts.keys is not None else default_keys(model, opts.order)
    compiled = CompiledCost(eom_system(model, keys), template, opts.max_order)
    schema = ParameterSchema(template, frozen)
    if schema.size == 0:
        return template

    def fun(v):
        try:
            _, res, w = compiled.evaluate(schema.unpack(v), opts.weights)
        except (ValueError, OverflowError, FloatingPointError):
            return np.full(2 * len(keys), 1e6)
        out = np.concatenate([w * res.real, w * res.imag])
        return np.where(np.isfinite(out), out, 1e6)

    sol = optimize.least_squares(fun, schema.pack(template), method="trf", max_nfev=max_nfev,
                                 xtol=1e-14, ftol=1e-14, gtol=1e-14)
    return schema.unpack(sol.x)
