"""Command-line entry point: ``pvar <command> --config run.json``.

Exit codes: 0 success (records may be flagged non-converged), 2 configuration
error, 3 capacity error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, fields, replace
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import bistability, models, oracle, phase_space, variational
from .algebra import EomSystem, ModelSpec, Monomial, OperatorPolynomial, eom_system
from .errors import (
    CapacityError, ClosureError, ConfigError, PvarError, SeriesDivergenceError,
    SingularSystemError, TruncationError, UnphysicalMomentsError,
)
from .moments import (
    COMPONENT_TYPES, Ansatz, Coherent, ModeAnsatz, SpinAnsatz, Squeezed, ansatz_moment,
    mode_squeezing,
)

log = logging.getLogger("pvar")

EXIT_OK, EXIT_CONFIG, EXIT_CAPACITY, EXIT_NUMERICAL = 0, 2, 3, 4
DEFAULT_OUT = "pvar_out"
COMPLEX_FIELDS = {"alpha", "alpha1", "alpha2", "theta"}
DEFAULT_CUTOFF = {"jc": 30, "cavity": 30, "rydberg": [10, 3, 10], "custom": 10}


# -- configuration -------------------------------------------------------------

def _schema() -> dict:
    text = resources.files("pvar").joinpath("schema/config.schema.json").read_text()
    return json.loads(text)


def _as_complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


def _cplx(z: complex) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def validate_config(cfg: dict) -> dict:
    """Schema check plus the physical constraints of the referenced types."""
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(err.message, path)
    try:
        build_model(cfg)
        if "ansatz" in cfg:
            _parse_ansatz_section(cfg)
        for i, comp in enumerate(cfg.get("phase_space", {}).get("state", [])):
            parse_component(comp, f"phase_space/state/{i}")
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc), "model") from exc
    return cfg


def load_config(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}", "--config") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", "--config") from exc
    return validate_config(cfg)


def config_hash(cfg: dict) -> str:
    # the output location does not change results
    return phase_space.config_hash({k: v for k, v in cfg.items() if k != "output"})


def parse_component(spec: dict, path: str = "component"):
    kind = spec["type"]
    cls = COMPONENT_TYPES[kind]
    kwargs = {}
    for f in fields(cls):
        if f.name in spec:
            val = spec[f.name]
            kwargs[f.name] = _as_complex(val) if f.name in COMPLEX_FIELDS else val
    extra = set(spec) - {"type"} - set(kwargs)
    if extra:
        raise ConfigError(f"fields {sorted(extra)} do not apply to {kind}", path)
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc), path) from exc


def component_record(comp) -> dict:
    name = next(k for k, v in COMPONENT_TYPES.items() if isinstance(comp, v))
    out = {"type": name}
    for f in fields(comp):
        v = getattr(comp, f.name)
        out[f.name] = _cplx(v) if isinstance(v, complex) else v
    return out


# -- models --------------------------------------------------------------------

def _params(cfg: dict, cls, overrides: dict | None = None):
    params = dict(cfg["model"].get("params", {}))
    params.update(overrides or {})
    try:
        return cls(**params)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc), "model/params") from exc


def rydberg_params(cfg: dict, overrides: dict | None = None) -> models.RydbergParams:
    params = _params(cfg, models.RydbergParams, overrides)
    if "omega" not in cfg["model"].get("params", {}):
        # control coupling equal to the collective probe coupling: dark polariton
        # with equal photon and Rydberg weight
        params = params.replace(omega=2.0 * params.collective_g)
    return params


def _term_poly(terms: list, n_modes: int, n_spins: int, path: str) -> OperatorPolynomial:
    poly = OperatorPolynomial.zero(n_modes, n_spins)
    for i, t in enumerate(terms):
        boson = {int(m): tuple(pq) for m, pq in t.get("boson", {}).items()}
        spin = {int(s): lab for s, lab in t.get("spin", {}).items()}
        try:
            mono = Monomial.make(boson, spin)
            mono.check_space(n_modes, n_spins)
        except (ValueError, IndexError) as exc:
            raise ConfigError(str(exc), f"{path}/{i}") from exc
        poly = poly + OperatorPolynomial.from_monomial(mono, n_modes, n_spins, _as_complex(t["coef"]))
    return poly


def _custom_model(mcfg: dict) -> ModelSpec:
    n, s = mcfg["n_modes"], mcfg.get("n_spins", 0)
    h = _term_poly(mcfg.get("hamiltonian", []), n, s, "model/hamiltonian")
    jumps = []
    for i, j in enumerate(mcfg.get("jumps", [])):
        c = _term_poly(j["terms"], n, s, f"model/jumps/{i}/terms")
        jumps.append(c * math.sqrt(j.get("rate", 1.0)))
    names = tuple(mcfg.get("mode_names", [f"a{m}" for m in range(n)]))
    try:
        return ModelSpec(n, s, h, tuple(jumps), names)
    except ValueError as exc:
        raise ConfigError(str(exc), "model/hamiltonian") from exc


def build_model(cfg: dict, overrides: dict | None = None):
    """``(model used by the solver, lab-frame model, polariton basis or None)``."""
    mcfg = cfg["model"]
    kind = mcfg["type"]
    if kind == "jc":
        m = models.jaynes_cummings(_params(cfg, models.JcParams, overrides))
        return m, m, None
    if kind == "cavity":
        p = dict(mcfg.get("params", {}))
        p.update(overrides or {})
        unknown = set(p) - {"delta", "p", "kappa"}
        if unknown:
            raise ConfigError(f"unknown parameters {sorted(unknown)}", "model/params")
        if p.get("kappa", 0.0) < 0:
            raise ConfigError("kappa must be >= 0", "model/params/kappa")
        m = models.free_cavity(p.get("delta", 0.0), p.get("p", 0.0), p.get("kappa", 0.0))
        return m, m, None
    if kind == "rydberg":
        lab = models.rydberg_three_boson(rydberg_params(cfg, overrides))
        if mcfg.get("basis", "polariton") == "polariton":
            pol, basis = models.polariton_transform(lab)
            return pol, lab, basis
        return lab, lab, None
    if overrides:
        raise ConfigError("custom models cannot be swept", "sweep/parameter")
    m = _custom_model(mcfg)
    return m, m, None


def _model_params(cfg: dict, overrides: dict | None = None) -> dict:
    kind = cfg["model"]["type"]
    if kind == "jc":
        return asdict(_params(cfg, models.JcParams, overrides))
    if kind == "rydberg":
        return asdict(rydberg_params(cfg, overrides))
    if kind == "cavity":
        return {"delta": 0.0, "p": 0.0, "kappa": 0.0, **cfg["model"].get("params", {}), **(overrides or {})}
    return {}


# -- ansatz --------------------------------------------------------------------

def _parse_ansatz_section(cfg: dict):
    acfg = cfg.get("ansatz", {})
    modes = [tuple(parse_component(c, f"ansatz/modes/{m}/{i}") for i, c in enumerate(mode))
             for m, mode in enumerate(acfg.get("modes", []))]
    spins = [tuple(b) for b in acfg.get("spins", [])]
    for i, b in enumerate(spins):
        if np.linalg.norm(b) > 1.0 + 1e-12:
            raise ConfigError("Bloch vector longer than 1", f"ansatz/spins/{i}")
    return modes, spins


def default_template(cfg: dict, model: ModelSpec) -> Ansatz:
    modes, spins = _parse_ansatz_section(cfg)
    kind = cfg["model"]["type"]
    if not modes:
        if kind == "rydberg":
            modes = [(Coherent(0j), Squeezed(0.0, 0.0)) for _ in range(model.n_modes)]
        else:
            modes = [(Coherent(0j),) for _ in range(model.n_modes)]
    if not spins:
        spins = [(0.0, 0.0, -1.0) for _ in range(model.n_spins)]
    if len(modes) != model.n_modes or len(spins) != model.n_spins:
        raise ConfigError(f"ansatz declares {len(modes)} modes / {len(spins)} spins, model has "
                          f"{model.n_modes} / {model.n_spins}", "ansatz")
    try:
        ans = Ansatz(tuple(ModeAnsatz(m) for m in modes), tuple(SpinAnsatz(s) for s in spins))
    except ValueError as exc:
        raise ConfigError(str(exc), "ansatz") from exc
    default_order = 2 if kind == "rydberg" else 0
    if cfg.get("ansatz", {}).get("correlation_order", default_order) == 2 and model.n_modes > 1:
        ans = variational.with_correlations(ans, variational.pair_correlation_keys(model.n_modes))
    return ans


def ansatz_record(ans: Ansatz, mode_names=None) -> dict:
    return {
        "modes": [[component_record(c) for c in m.components] for m in ans.modes],
        "spins": [list(s.bloch) for s in ans.spins],
        "correlations": {k.label(mode_names): _cplx(v) for k, v in sorted(ans.correlations.items())},
    }


def ansatz_from_record(rec: dict) -> Ansatz:
    """Rebuild the single-mode parts and spins of a recorded ansatz."""
    modes = tuple(ModeAnsatz(tuple(parse_component(c) for c in m)) for m in rec["modes"])
    spins = tuple(SpinAnsatz(tuple(b)) for b in rec["spins"])
    return Ansatz(modes, spins)


def _solver_options(cfg: dict, seed: int | None, parallel: int) -> variational.MinimizeOptions:
    s = dict(cfg.get("solver", {}))
    s.pop("least_squares_start", None)
    if seed is not None:
        s["seed"] = seed
    return variational.MinimizeOptions(**s, parallel=parallel)


def _with_amplitudes(template: Ansatz, amps, bloch=None) -> Ansatz:
    ans = variational.seeded_template(template, amps)
    if bloch is not None and ans.spins:
        ans = replace(ans, spins=(SpinAnsatz(tuple(bloch)),) + ans.spins[1:])
    return ans


def _mean_field_starts(cfg: dict, model: ModelSpec, template: Ansatz, overrides, seed: int):
    """Mean-field fixed points as explicit starts, plus branch metadata."""
    kind = cfg["model"]["type"]
    if not cfg.get("ansatz", {}).get("mean_field_starts", True):
        return [], []
    if kind == "jc":
        params = _params(cfg, models.JcParams, overrides)
        pts = bistability.fixed_points(params)
        starts = [_with_amplitudes(template, [fp.a], np.asarray(fp.ansatz().spins[0].bloch))
                  for fp in pts]
        return starts, [fp.intensity for fp in pts]
    if model.n_spins:
        return [], []
    roots = variational.mean_field_starts(model, seed=seed)
    return [_with_amplitudes(template, r) for r in roots], [float(sum(abs(a) ** 2 for a in r)) for r in roots]


# -- solving -------------------------------------------------------------------

def _moments_record(ans: Ansatz, model: ModelSpec, order: int) -> dict:
    keys = variational.tracked_keys(model.n_modes, model.n_spins, order)
    return {k.label(model.mode_names): _cplx(ansatz_moment(ans, k)) for k in keys}


def _mode_summary(ans: Ansatz, model: ModelSpec):
    intens, squeeze = [], []
    for m in range(model.n_modes):
        intens.append(float(ansatz_moment(ans, Monomial.make({m: (1, 1)})).real))
        try:
            sq = mode_squeezing(ans, m)
            squeeze.append({"r": sq.r, "phi": sq.phi, "v_min": sq.v_min})
        except UnphysicalMomentsError:
            squeeze.append(None)
    return intens, squeeze


def solve_point(cfg: dict, overrides: dict, opts: variational.MinimizeOptions,
                warm: Ansatz | None = None) -> tuple[dict, Ansatz]:
    model, _, _ = build_model(cfg, overrides)
    template = default_template(cfg, model)
    frozen = cfg.get("ansatz", {}).get("frozen", [])
    starts, branches = _mean_field_starts(cfg, model, template, overrides, opts.seed)
    first = warm if warm is not None else template
    if cfg.get("solver", {}).get("least_squares_start", cfg["model"]["type"] == "rydberg"):
        starts = [variational.least_squares_start(model, s, opts, frozen) for s in starts]
        if warm is not None:
            first = variational.least_squares_start(model, warm, opts, frozen)
    opts_run = opts
    if opts.n_starts < 1 + len(starts):
        opts_run = replace(opts, n_starts=1 + len(starts))
    try:
        res = variational.minimize(model, first, opts_run, frozen=frozen, starts=starts)
    except KeyError as exc:
        raise ConfigError(str(exc), "ansatz/frozen") from exc
    intens, squeeze = _mode_summary(res.ansatz, model)
    record = {
        "parameters": _model_params(cfg, overrides),
        "mode_names": list(model.mode_names),
        "ansatz": ansatz_record(res.ansatz, model.mode_names),
        "D": res.D,
        "converged": bool(res.report.converged),
        "evaluations": int(res.report.evaluations),
        "moments": _moments_record(res.ansatz, model, opts.order),
        "intensity": intens,
        "squeezing": squeeze,
        "branches": {
            "mean_field_intensities": branches,
            "candidates": [{"start": c.seed_index, "D": c.report.total} for c in res.candidates],
        },
    }
    return record, res.ansatz


def _sweep_points(cfg: dict, require: bool) -> list[dict]:
    sweep = cfg.get("sweep")
    if sweep is None:
        if require:
            raise ConfigError("sweep section required", "sweep")
        return [{}]
    name = sweep["parameter"]
    allowed = set(_model_params(cfg))
    if name not in allowed:
        raise ConfigError(f"unknown sweep parameter {name!r}", "sweep/parameter")
    return [{name: float(v)} for v in sweep["values"]]


def run_solve(cfg: dict, seed=None, parallel: int = 1, require_sweep: bool = False) -> list[dict]:
    points = _sweep_points(cfg, require_sweep)
    opts = _solver_options(cfg, seed, parallel)
    warm_start = cfg.get("sweep", {}).get("warm_start", True)
    chash = config_hash(cfg)
    records: list[dict | None] = [None] * len(points)

    def finish(i, rec, elapsed):
        log.info("point %d/%d %s: D=%.3g (%.1fs)", i + 1, len(points), points[i], rec["D"], elapsed)
        rec = {"index": i, "config_hash": chash, "model": cfg["model"]["type"],
               "sweep": points[i] or None, **rec}
        records[i] = rec

    if warm_start or parallel <= 1 or len(points) == 1:
        prev = None
        for i, ov in enumerate(points):
            t0 = time.perf_counter()
            rec, best = solve_point(cfg, ov, opts, prev if warm_start else None)
            finish(i, rec, time.perf_counter() - t0)
            prev = best
    else:
        inner = replace(opts, parallel=1)

        def work(i):
            t0 = time.perf_counter()
            rec, _ = solve_point(cfg, points[i], inner)
            return i, rec, time.perf_counter() - t0

        with ThreadPoolExecutor(parallel) as pool:
            for i, rec, dt in pool.map(work, range(len(points))):
                finish(i, rec, dt)
    return records


# -- output helpers ------------------------------------------------------------

def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def write_records(records: list[dict], out: Path, stem: str, formats) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    if "jsonl" in formats:
        p = out / f"{stem}.jsonl"
        p.write_text("".join(_dumps(r) + "\n" for r in records))
        paths.append(p)
    if "csv" in formats:
        names = records[0]["mode_names"]
        sweep_name = next(iter(records[0]["sweep"] or {"value": 0}))
        cols = [sweep_name] + [f"I_{n}" for n in names] + [f"r_{n}" for n in names] + ["D", "converged"]
        lines = [",".join(cols)]
        for r in records:
            val = (r["sweep"] or {}).get(sweep_name, float("nan"))
            rs = [("" if s is None else f"{s['r']:.12g}") for s in r["squeezing"]]
            row = [f"{val:.12g}"] + [f"{x:.12g}" for x in r["intensity"]] + rs + \
                [f"{r['D']:.12g}", str(int(r["converged"]))]
            lines.append(",".join(row))
        p = out / f"{stem}.csv"
        p.write_text("\n".join(lines) + "\n")
        paths.append(p)
    failures = sum(not r["converged"] for r in records)
    side = {"config_hash": records[0]["config_hash"], "points": len(records), "non_converged": failures}
    (out / f"{stem}.summary.json").write_text(json.dumps(side, sort_keys=True, indent=1) + "\n")
    return paths


def _out_dir(args, cfg: dict) -> Path:
    if args.out:
        return Path(args.out)
    if "directory" in cfg.get("output", {}):
        return Path(cfg["output"]["directory"])
    return Path(os.environ.get("PVAR_OUT_DIR", DEFAULT_OUT))


def _formats(cfg: dict):
    return cfg.get("output", {}).get("formats", ["jsonl", "csv"])


# -- commands ------------------------------------------------------------------

def factorize(mono: Monomial) -> tuple[Monomial, ...]:
    """Single-site factors of a monomial (boson modes first, then spins)."""
    parts = [Monomial.make({m: (p, q)}) for m, p, q in mono.boson]
    parts += [Monomial.make(None, {s: lab}) for s, lab in mono.spin]
    return tuple(parts)


def eom_listing(system: EomSystem, names) -> list[dict]:
    out = []
    for key, rhs in system:
        terms = []
        closed: dict[tuple[str, ...], complex] = {}
        for mono, coef in rhs.items():
            terms.append({"monomial": mono.label(names), "coef": _cplx(coef)})
            fac = tuple(f.label(names) for f in factorize(mono)) or ("1",)
            closed[fac] = closed.get(fac, 0j) + coef
        out.append({
            "key": key.label(names),
            "terms": terms,
            "factorized": [{"factors": list(f), "coef": _cplx(c)} for f, c in sorted(closed.items())],
        })
    return out


def cmd_derive_eom(cfg: dict, args) -> int:
    model, _, _ = build_model(cfg)
    order = cfg.get("solver", {}).get("order", 2)
    system = eom_system(model, variational.tracked_keys(model.n_modes, model.n_spins, order))
    listing = eom_listing(system, model.mode_names)
    for eq in listing:
        rhs = " + ".join(
            "(" + " ".join(f"<{f}>" for f in t["factors"]) + f") * ({t['coef'][0]:.12g}{t['coef'][1]:+.12g}j)"
            for t in eq["factorized"]) or "0"
        print(f"d<{eq['key']}>/dt = {rhs}")
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    doc = {"config_hash": config_hash(cfg), "order": order, "equations": listing}
    (out / "eom.json").write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    return EXIT_OK


def cmd_solve(cfg: dict, args, sweep: bool = False) -> int:
    records = run_solve(cfg, args.seed, args.parallel, require_sweep=sweep)
    stem = "sweep" if sweep else "solve"
    paths = write_records(records, _out_dir(args, cfg), stem, _formats(cfg))
    failures = sum(not r["converged"] for r in records)
    print(f"{len(records)} point(s), {failures} not converged; wrote {', '.join(map(str, paths))}")
    return EXIT_OK


def _oracle_cutoff(cfg: dict, lab: ModelSpec):
    cut = cfg.get("oracle", {}).get("cutoff", DEFAULT_CUTOFF[cfg["model"]["type"]])
    if isinstance(cut, int):
        cut = [cut] * lab.n_modes
    if len(cut) != lab.n_modes:
        raise ConfigError(f"need {lab.n_modes} cutoffs", "oracle/cutoff")
    return list(cut)


def oracle_moments(cfg: dict, overrides: dict, strict: bool) -> dict:
    model, lab, basis = build_model(cfg, overrides)
    cut = _oracle_cutoff(cfg, lab)
    cap = cfg.get("oracle", {}).get("dim_cap", oracle.DEFAULT_DIM_CAP)
    order = cfg.get("solver", {}).get("order", 2)
    keys = variational.tracked_keys(model.n_modes, model.n_spins, order)

    def evaluate(cutoffs):
        trunc = oracle.TruncationSpec(tuple(cutoffs), lab.n_spins, cap)
        res = oracle.steady_state(oracle.build_liouvillian(lab, trunc), trunc, strict=strict)
        vals = {}
        for k in keys:
            op = models.lab_observable(k, basis) if basis is not None else \
                OperatorPolynomial.from_monomial(k, lab.n_modes, lab.n_spins)
            vals[k] = oracle.expectation(res, op)
        return vals, res

    vals, res = evaluate(cut)
    coarse, _ = evaluate([max(1, c - 2) for c in cut])
    drift = max((abs(vals[k] - coarse[k]) for k in keys), default=0.0)
    return {
        "model": model, "keys": keys, "values": vals,
        "diagnostics": {"cutoff": cut, "boundary_population": list(res.boundary_population),
                        "residual": res.residual, "cutoff_drift": drift,
                        "warnings": list(res.warnings)},
    }


def _oracle_record(cfg, ov, data, chash, index):
    names = data["model"].mode_names
    return {
        "index": index, "config_hash": chash, "sweep": ov or None,
        "parameters": _model_params(cfg, ov),
        "moments": {k.label(names): _cplx(v) for k, v in data["values"].items()},
        "diagnostics": data["diagnostics"],
    }


def cmd_oracle(cfg: dict, args) -> int:
    chash = config_hash(cfg)
    recs = []
    for i, ov in enumerate(_sweep_points(cfg, False)):
        recs.append(_oracle_record(cfg, ov, oracle_moments(cfg, ov, args.strict), chash, i))
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / "oracle.jsonl").write_text("".join(_dumps(r) + "\n" for r in recs))
    for r in recs:
        for k, v in r["moments"].items():
            print(f"{r['sweep'] or ''} <{k}> = {v[0]:.10g}{v[1]:+.10g}j")
    return EXIT_OK


def cmd_compare(cfg: dict, args) -> int:
    chash = config_hash(cfg)
    var_records = run_solve(cfg, args.seed, args.parallel)
    rows = ["value,key,var_re,var_im,oracle_re,oracle_im,abs_dev,rel_dev"]
    out_recs = []
    for ov, rec in zip(_sweep_points(cfg, False), var_records):
        data = oracle_moments(cfg, ov, args.strict)
        orc = _oracle_record(cfg, ov, data, chash, rec["index"])
        val = next(iter(ov.values()), None)
        tag = "" if val is None else f"{val:.6g} "
        table = []
        for label, (ore, oim) in orc["moments"].items():
            vre, vim = rec["moments"][label]
            dev = abs(complex(vre, vim) - complex(ore, oim))
            rel = dev / abs(complex(ore, oim)) if abs(complex(ore, oim)) > 1e-12 else (0.0 if dev < 1e-12 else math.inf)
            table.append({"key": label, "abs_dev": dev, "rel_dev": rel})
            rows.append(f"{'' if val is None else format(val, '.12g')},{label},{vre:.12g},{vim:.12g},{ore:.12g},{oim:.12g},{dev:.6e},{rel:.6e}")
            print(f"{tag}<{label}>: variational {vre:.6g}{vim:+.6g}j  oracle {ore:.6g}{oim:+.6g}j  "
                  f"rel {rel:.2e}")
        out_recs.append({"index": rec["index"], "config_hash": chash, "sweep": ov or None,
                         "D": rec["D"], "converged": rec["converged"],
                         "max_relative_deviation": max((t["rel_dev"] for t in table), default=0.0),
                         "deviations": table, "oracle": orc["diagnostics"]})
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / "compare.csv").write_text("\n".join(rows) + "\n")
    (out / "compare.json").write_text(json.dumps({"config_hash": chash, "points": out_recs,
                                                  "max_relative_deviation": max(
                                                      (p["max_relative_deviation"] for p in out_recs),
                                                      default=0.0)},
                                                 sort_keys=True, indent=1) + "\n")
    write_records(var_records, out, "compare_variational", ["jsonl"])
    return EXIT_OK


def _phase_state(cfg: dict, out_base: Path) -> tuple[phase_space.StateSpec, str]:
    ps = cfg.get("phase_space", {})
    if "state" in ps:
        comps = tuple(parse_component(c, f"phase_space/state/{i}") for i, c in enumerate(ps["state"]))
        return phase_space.StateSpec(comps, ps.get("name", "state")), ps.get("name", "state")
    if "record" in ps:
        path = Path(ps["record"])
        if not path.is_absolute() and not path.exists():
            path = out_base / path
        try:
            lines = path.read_text().splitlines()
        except FileNotFoundError as exc:
            raise ConfigError(f"record file not found: {path}", "phase_space/record") from exc
        idx = ps.get("record_index", 0)
        if idx >= len(lines):
            raise ConfigError(f"record index {idx} out of range", "phase_space/record_index")
        ans = ansatz_from_record(json.loads(lines[idx])["ansatz"])
        mode = ps.get("mode", 0)
        if mode >= len(ans.modes):
            raise ConfigError(f"mode {mode} out of range", "phase_space/mode")
        name = ps.get("name", f"record{idx}_mode{mode}")
        return phase_space.StateSpec(ans.modes[mode].components, name), name
    raise ConfigError("phase_space needs 'state' or 'record'", "phase_space")


def _grid_spec(gcfg: dict) -> phase_space.GridSpec:
    return phase_space.GridSpec(gcfg.get("extent", 4.0), gcfg.get("n", 81),
                                _as_complex(gcfg.get("center", 0.0)))


def cmd_phase_space(cfg: dict, args) -> int:
    out = _out_dir(args, cfg)
    state, name = _phase_state(cfg, out)
    ps = cfg.get("phase_space", {})
    grid = _grid_spec(ps.get("grid", {}))
    chash = config_hash(cfg)
    if ps.get("source", "closed_form") == "series":
        M = ps.get("M", phase_space.MAX_SERIES_ORDER)
        source = state.moments(2 * M, max(2 * M, 16))
    else:
        M, source = None, state
    sigma = ps.get("sigma")
    if sigma is None:
        sigma = 0.0 if state.smooth else phase_space.DEFAULT_SIGMA
    for kind in ps.get("kinds", ["P", "W"]):
        if kind == "P":
            g = phase_space.p_grid(source, M, grid, sigma, ps.get("window"))
        else:
            g = phase_space.wigner_grid(source, M, grid, window=ps.get("window"))
        path = phase_space.write_grid(g, out, name, chash)
        print(f"wrote {path} (min {g.values.min():.4g}, integral {g.integral():.4f})")
    return EXIT_OK


def cmd_gallery(cfg: dict, args) -> int:
    out = _out_dir(args, cfg)
    grid = _grid_spec(cfg.get("phase_space", {}).get("grid", {"extent": 5.0, "n": 101}))
    chash = config_hash(cfg)
    cells = phase_space.gallery(grid)
    for name, g in cells.items():
        phase_space.write_grid(g, out / "gallery", name, chash)
    print(f"wrote {len(cells)} Wigner grids to {out / 'gallery'}")
    return EXIT_OK


COMMANDS = {
    "derive-eom": cmd_derive_eom,
    "solve": cmd_solve,
    "sweep": lambda cfg, args: cmd_solve(cfg, args, sweep=True),
    "oracle": cmd_oracle,
    "compare": cmd_compare,
    "phase-space": cmd_phase_space,
    "gallery": cmd_gallery,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pvar", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=False, help="JSON run configuration")
    ap.add_argument("--seed", type=int, default=None, help="override solver.seed")
    ap.add_argument("--out", default=None, help="output directory (default: $PVAR_OUT_DIR)")
    ap.add_argument("--strict", action="store_true", help="treat truncation warnings as errors")
    ap.add_argument("--parallel", type=int, default=1, help="worker threads")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.parallel < 1:
            raise ConfigError("must be >= 1", "--parallel")
        if args.config is None:
            if args.command != "gallery":
                raise ConfigError("required", "--config")
            cfg = {"model": {"type": "custom", "n_modes": 1}}
        else:
            cfg = load_config(args.config)
        if args.seed is not None:
            cfg = copy.deepcopy(cfg)
            cfg.setdefault("solver", {})["seed"] = args.seed
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (SingularSystemError, SeriesDivergenceError, ClosureError, TruncationError,
            UnphysicalMomentsError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except PvarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
