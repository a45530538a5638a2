"""Command-line front end.

    accelkernel branch     --gamma 1 --alpha 5 --beta 4
    accelkernel xval       --omega1 2 --omega2 1 --json
    accelkernel lattice    --tau 1 --level 64 --level 128 --level 256 --csv
    accelkernel vacuum     --gamma 1 --alpha 2 --beta 4
    accelkernel propagator --grid-oracle --csv
    accelkernel multidof   --theta 0.7853981633974483 --mode 1,5,4 --mode 1,10,9

Exit codes: 0 every check passed, 2 some check failed, 3 bad configuration or
an internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

import numpy as np
import scipy

from . import __version__
from .classical import BoundaryData, action_matrix, kernel_closed_form, kernel_symmetry_map
from .errors import AccelKernelError, NotNormalizable
from .gaussian import GaussianForm, compose, integral
from .grid import convergence_ratios, grid_residuals, propagator_grid, vacuum_box
from .lattice import closed_form_ratio, extrapolate, log_kernel_ratio
from .multidof import build_system, ground_state_many, kernel_many, rotation
from .params import Branch, ModelParams
from .qoperator import (
    evolution_kernel_operator, large_tau_factor, propagator_g, similarity_residual,
    vacuum, vacuum_pairing, vacuum_via_q,
)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 2, 3

DEFAULT_TOLERANCES = {
    "kernel_agreement": 1e-10,
    "symmetry": 1e-12,
    "symmetry_operator": 1e-10,
    "semigroup": 1e-10,
    "large_tau": 1e-3,
    "vacuum_pairing": 1e-10,
    "vacuum_via_q": 1e-11,
    "similarity": 1e-8,
    "lattice": 1e-4,
    "propagator_oracle": 1e-3,
    "multidof": 1e-11,
    "multidof_norm": 1e-8,
}
LARGE_TAU = 8.0
MAX_WORKERS = min(4, os.cpu_count() or 1)


class ConfigError(Exception):
    pass


# -- reports -----------------------------------------------------------------

@dataclass
class CheckRecord:
    name: str
    backends: str
    max_residual: float | None
    tolerance: float | None
    status: str  # PASS / FAIL / SKIP
    note: str = ""

    @classmethod
    def compare(cls, name: str, backends: str, residual: float, tol: float, note: str = "") -> "CheckRecord":
        ok = bool(np.isfinite(residual)) and residual <= tol
        return cls(name, backends, float(residual), float(tol), "PASS" if ok else "FAIL", note)

    @classmethod
    def skip(cls, name: str, backends: str, reason: str) -> "CheckRecord":
        return cls(name, backends, None, None, "SKIP", reason)


@dataclass
class Report:
    command: str
    records: list[CheckRecord] = field(default_factory=list)
    data: list[dict[str, Any]] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)
    provenance: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.status != "FAIL" for r in self.records)

    def as_dict(self) -> dict[str, Any]:
        return {
            "command": self.command,
            "passed": self.passed,
            "records": [vars(r) for r in self.records],
            "data": self.data,
            "summary": self.summary,
            "provenance": self.provenance,
        }


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def _plain(obj):
    """numpy scalars and tuples to plain Python objects."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps(obj) -> str:
    """JSON with sorted keys and every float written with 17 significant digits."""
    obj = _plain(obj)

    def enc(o, indent: int) -> str:
        pad = "  " * (indent + 1)
        end = "  " * indent
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{pad}{json.dumps(k)}: {enc(o[k], indent + 1)}" for k in sorted(o)]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(o, list):
            if not o:
                return "[]"
            return "[\n" + ",\n".join(pad + enc(v, indent + 1) for v in o) + "\n" + end + "]"
        if isinstance(o, float):
            return _fmt_float(o)
        return json.dumps(o, ensure_ascii=False)

    return enc(obj, 0) + "\n"


def to_csv(rows: Sequence[dict[str, Any]]) -> str:
    if not rows:
        return ""
    cols = list(rows[0].keys())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(cols)
    for row in rows:
        w.writerow([_fmt_float(v) if isinstance(v, float) else ("" if v is None else v)
                    for v in (_plain(row.get(c)) for c in cols)])
    return buf.getvalue()


def to_table(report: Report) -> str:
    lines = [f"{report.command}: {'PASS' if report.passed else 'FAIL'}"]
    for k in sorted(report.summary):
        lines.append(f"  {k} = {_plain(report.summary[k])}")
    if report.records:
        lines.append(f"  {'check':32s} {'backends':22s} {'residual':>11s} {'tol':>9s}  status")
        for r in report.records:
            res = "-" if r.max_residual is None else f"{r.max_residual:.3e}"
            tol = "-" if r.tolerance is None else f"{r.tolerance:.1e}"
            extra = f"  ({r.note})" if r.note else ""
            lines.append(f"  {r.name:32s} {r.backends:22s} {res:>11s} {tol:>9s}  {r.status}{extra}")
    return "\n".join(lines) + "\n"


# -- configuration -----------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    command: str
    params: ModelParams
    taus: tuple[float, ...]
    fmt: str
    out: str | None
    tolerances: dict[str, float]
    seed: int
    options: dict[str, Any]


def read_config_file(path: str) -> dict[str, str]:
    """key=value lines; blank lines and '#' comments ignored."""
    out: dict[str, str] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value, got {raw.strip()!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _parse_tol(items: Iterable[str]) -> dict[str, float]:
    tol = dict(DEFAULT_TOLERANCES)
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--tol expects name=value, got {item!r}")
        k, v = item.split("=", 1)
        k = k.strip()
        if k not in DEFAULT_TOLERANCES:
            raise ConfigError(f"unknown tolerance {k!r}; known: {', '.join(sorted(DEFAULT_TOLERANCES))}")
        try:
            val = float(v)
        except ValueError as exc:
            raise ConfigError(f"tolerance {k} is not a number: {v!r}") from exc
        if not val > 0:
            raise ConfigError(f"tolerance {k} must be positive")
        tol[k] = val
    return tol


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(s) for s in text.replace(";", ",").split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"{what}: cannot parse {text!r}") from exc


def _merge(args: argparse.Namespace, file_vals: dict[str, str], key: str, conv: Callable[[str], Any], default=None):
    val = getattr(args, key, None)
    if val is not None and val != []:
        return val
    if key in file_vals:
        return conv(file_vals[key])
    return default


def build_config(args: argparse.Namespace) -> RunConfig:
    file_vals = read_config_file(args.config) if args.config else {}
    known = {"gamma", "alpha", "beta", "omega1", "omega2", "tau", "seed", "tol", "format", "out",
             "level", "bc_count", "theta", "mode", "grid_oracle", "grid_n", "tau_max", "tau_step",
             "inject_fault"}
    unknown = set(file_vals) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")

    g = _merge(args, file_vals, "gamma", float)
    a = _merge(args, file_vals, "alpha", float)
    b = _merge(args, file_vals, "beta", float)
    w1 = _merge(args, file_vals, "omega1", float)
    w2 = _merge(args, file_vals, "omega2", float)
    coupl = a is not None or b is not None
    freq = w1 is not None or w2 is not None
    if coupl and freq:
        raise ConfigError("give either --alpha/--beta or --omega1/--omega2, not both")
    g = 1.0 if g is None else g
    try:
        if coupl:
            if a is None or b is None:
                raise ConfigError("--alpha and --beta must be given together")
            params = ModelParams.from_couplings(g, a, b)
        elif freq:
            if w1 is None or w2 is None:
                raise ConfigError("--omega1 and --omega2 must be given together")
            params = ModelParams.from_frequencies(g, w1, w2)
        else:
            params = ModelParams.from_frequencies(g, 2.0, 1.0)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    taus = _merge(args, file_vals, "tau", lambda s: _floats(s, "tau"))
    taus = tuple(taus) if taus else ()
    if any(not (t > 0) for t in taus):
        raise ConfigError(f"tau values must be positive, got {taus}")

    tol_items = list(args.tol or [])
    if not tol_items and "tol" in file_vals:
        tol_items = [s for s in file_vals["tol"].split(",") if s.strip()]
    fmt = args.format or file_vals.get("format", "table")
    if fmt not in ("table", "json", "csv"):
        raise ConfigError(f"unknown format {fmt!r}")
    seed = _merge(args, file_vals, "seed", int, 0)
    if seed < 0:
        raise ConfigError("seed must be non-negative")

    opts: dict[str, Any] = {}
    opts["levels"] = _merge(args, file_vals, "level", lambda s: [int(v) for v in _floats(s, "level")],
                            [64, 128, 256, 512])
    opts["bc_count"] = _merge(args, file_vals, "bc_count", int, 10)
    opts["theta"] = _merge(args, file_vals, "theta", float, math.pi / 4)
    modes = _merge(args, file_vals, "mode", lambda s: s.split(";"), ["1,5,4", "1,10,9"])
    opts["modes"] = [tuple(_floats(m, "mode")) for m in modes]
    if any(len(m) != 3 for m in opts["modes"]):
        raise ConfigError("each --mode needs gamma,alpha,beta")
    opts["grid_oracle"] = bool(args.grid_oracle) or file_vals.get("grid_oracle", "").lower() in ("1", "true", "yes")
    opts["grid_n"] = _merge(args, file_vals, "grid_n", int, 128)
    opts["tau_max"] = _merge(args, file_vals, "tau_max", float, 5.0)
    opts["tau_step"] = _merge(args, file_vals, "tau_step", float, 0.25)
    opts["inject_fault"] = _merge(args, file_vals, "inject_fault", str)
    return RunConfig(args.command, params, taus, fmt, _merge(args, file_vals, "out", str),
                     _parse_tol(tol_items), int(seed), opts)


def provenance(cfg: RunConfig) -> dict[str, Any]:
    p = cfg.params
    return {
        "params": {
            "gamma": p.gamma, "alpha": p.alpha, "beta": p.beta, "branch": p.branch.value,
            "omega1": p.freqs.omega1, "omega2": p.freqs.omega2,
        },
        "seed": cfg.seed,
        "taus": list(cfg.taus),
        "tolerances": cfg.tolerances,
        "versions": {
            "accelkernel": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }


def _pool_map(fn, items):
    """Order-preserving map on a bounded thread pool."""
    items = list(items)
    with ThreadPoolExecutor(max_workers=MAX_WORKERS) as ex:
        return list(ex.map(fn, items))


# -- commands ----------------------------------------------------------------

def cmd_branch(cfg: RunConfig) -> Report:
    p = cfg.params
    f = p.freqs
    rep = Report("branch")
    rep.summary = {
        "branch": p.branch.value,
        "omega1": f.omega1,
        "omega2": f.omega2,
        "R": f.modulus,
        "phi": f.phase,
    }
    try:
        qp = p.qparams
        h0 = p.h0
        rep.summary.update({"a": qp.a, "b": qp.b, "A": qp.A, "B": qp.B, "C": qp.C})
        rep.summary.update({f"h0_{k}": v for k, v in vars(h0).items()})
    except AccelKernelError as exc:
        rep.summary["qparams"] = f"refused: {exc}"
    return rep


def _vacuum_scale(p: ModelParams) -> np.ndarray:
    f = p.freqs
    sx = 1.0 / math.sqrt(2.0 * p.gamma * f.total * f.product)
    sv = 1.0 / math.sqrt(2.0 * p.gamma * f.total)
    return np.array([sx, sv, sx, sv])


def _log_ratio_error(k1: GaussianForm, k2: GaussianForm, pts: np.ndarray) -> float:
    zero = np.zeros(k1.n)
    d = (k1.log_abs(pts) - k1.log_abs(zero)) - (k2.log_abs(pts) - k2.log_abs(zero))
    return float(np.max(np.abs(np.expm1(d))))


def _asymmetry(k: GaussianForm, pts: np.ndarray) -> float:
    t = kernel_symmetry_map()
    return float(np.max(np.abs(np.expm1(k.log_abs(pts) - k.log_abs(pts @ t.T)))))


def semigroup_residual(factory: Callable[[float], GaussianForm], t1: float, t2: float) -> float:
    c = compose(factory(t1), factory(t2))
    r = factory(t1 + t2)
    return max(abs(c.norm / r.norm - 1.0), float(np.max(np.abs(c.quad - r.quad)) / np.max(np.abs(r.quad))))


def l2_relative_error(a: GaussianForm, b: GaussianForm) -> float:
    """||a - b|| / ||b|| in L2 over all variables, by exact Gaussian integrals."""
    def inner(f, g):
        return integral(GaussianForm(np.conj(f.norm) * g.norm, np.conj(f.quad) + g.quad)).real

    aa, bb, ab = inner(a, a), inner(b, b), inner(a, b)
    return math.sqrt(max(aa + bb - 2.0 * ab, 0.0) / bb)


def large_tau_error(p: ModelParams, tau: float = LARGE_TAU) -> tuple[float, float]:
    """(L2 relative error, relative error at the origin) of e^{tau E} K vs Psi00 x Psi00^D."""
    k = kernel_closed_form(p, tau).scaled(math.exp(tau * p.ground_energy))
    f = large_tau_factor(p)
    return l2_relative_error(k, f), abs(k.norm / f.norm - 1.0)


def cmd_xval(cfg: RunConfig) -> Report:
    p = cfg.params
    tol = cfg.tolerances
    taus = cfg.taus or (0.3, 1.0, 3.0)
    rep = Report("xval")
    rng = np.random.default_rng(cfg.seed)
    real = p.branch is Branch.REAL
    why = f"operator route needs the real branch (branch={p.branch.value})"
    fault = cfg.options.get("inject_fault")

    def classical(t: float) -> GaussianForm:
        k = kernel_closed_form(p, t)
        if fault == "m12-sign":
            q = np.array(k.quad)
            q[0, 1] = -q[0, 1]
            # the form symmetrizes, so flip the mirrored entry too; M34 stays put
            q[1, 0] = -q[1, 0]
            k = GaussianForm(k.norm, q)
        return k

    grid = np.linspace(-1.0, 1.0, 5)
    pts = np.array(list(itertools.product(grid, repeat=4)))
    if real:
        err = max(_log_ratio_error(classical(t), evolution_kernel_operator(p, t), pts) for t in taus)
        rep.records.append(CheckRecord.compare("kernel_agreement", "classical/operator", err,
                                               tol["kernel_agreement"]))
    else:
        rep.records.append(CheckRecord.skip("kernel_agreement", "classical/operator", why))

    sample_t = rng.uniform(min(taus), max(taus), size=200)
    sample_z = rng.normal(size=(200, 4)) * _vacuum_scale(p)
    asym = max(_asymmetry(classical(t), z) for t, z in zip(sample_t, sample_z))
    rep.records.append(CheckRecord.compare("symmetry", "classical", asym, tol["symmetry"]))
    if real:
        asym_op = max(_asymmetry(evolution_kernel_operator(p, t), z) for t, z in zip(sample_t, sample_z))
        rep.records.append(CheckRecord.compare("symmetry", "operator", asym_op, tol["symmetry_operator"]))
    else:
        rep.records.append(CheckRecord.skip("symmetry", "operator", why))

    pairs = rng.uniform(0.2, 2.0, size=(20, 2))
    sg = max(semigroup_residual(classical, *pr) for pr in pairs)
    rep.records.append(CheckRecord.compare("semigroup", "classical", sg, tol["semigroup"]))
    if real:
        sg_op = max(semigroup_residual(lambda t: evolution_kernel_operator(p, t), *pr) for pr in pairs)
        rep.records.append(CheckRecord.compare("semigroup", "operator", sg_op, tol["semigroup"]))
    else:
        rep.records.append(CheckRecord.skip("semigroup", "operator", why))

    try:
        l2, origin = large_tau_error(p)
        rep.records.append(CheckRecord.compare("large_tau_factorization", "classical/vacuum",
                                               max(l2, origin), tol["large_tau"], f"tau={LARGE_TAU:g}"))
        rep.records.append(CheckRecord.compare("vacuum_pairing", "closed_form",
                                               abs(vacuum_pairing(p) - 1.0), tol["vacuum_pairing"]))
    except NotNormalizable as exc:
        rep.records.append(CheckRecord("vacuum", "closed_form", None, None, "FAIL", str(exc)))

    if real:
        via = vacuum_via_q(p)
        ref = vacuum(p)
        err = max(abs(via.form.norm / ref.form.norm - 1.0),
                  float(np.max(np.abs(via.form.quad - ref.form.quad)) / np.max(np.abs(ref.form.quad))))
        rep.records.append(CheckRecord.compare("vacuum_via_q", "operator/closed_form", err, tol["vacuum_via_q"]))
        qp = p.qparams
        for op in ("X", "DX", "V", "DV"):
            res = max(similarity_residual(qp, op, t) for t in (0.1, 0.3))
            rep.records.append(CheckRecord.compare(f"similarity_{op}", "operator", res, tol["similarity"]))
    else:
        rep.records.append(CheckRecord.skip("vacuum_via_q", "operator/closed_form", why))
        for op in ("X", "DX", "V", "DV"):
            rep.records.append(CheckRecord.skip(f"similarity_{op}", "operator", why))
    return rep


def _random_bcs(rng: np.random.Generator, n: int, p: ModelParams) -> list[BoundaryData]:
    scale = 2.0 * _vacuum_scale(p)
    return [BoundaryData(*(rng.normal(size=4) * scale)) for _ in range(n)]


def cmd_lattice(cfg: RunConfig) -> Report:
    p = cfg.params
    tau = cfg.taus[0] if cfg.taus else 1.0
    levels = sorted(cfg.options["levels"])
    rng = np.random.default_rng(cfg.seed)
    bcs = _random_bcs(rng, cfg.options["bc_count"], p)
    ref = BoundaryData(0.0, 0.0, 0.0, 0.0)
    jobs = [(k, n) for k in range(len(bcs)) for n in levels]
    logs = _pool_map(lambda job: log_kernel_ratio(p, bcs[job[0]], ref, tau, job[1]), jobs)
    table = dict(zip(jobs, logs))
    rep = Report("lattice")
    worst, orders = 0.0, []
    for k, bc in enumerate(bcs):
        exact = closed_form_ratio(p, bc, ref, tau)
        for n in levels:
            ratio = math.exp(table[(k, n)])
            rep.data.append({"bc": k, "x_f": bc.x_f, "v_f": bc.v_f, "x_i": bc.x_i, "v_i": bc.v_i,
                             "n": n, "eps": tau / n, "ratio": ratio, "closed_form": exact,
                             "rel_error": abs(ratio / exact - 1.0)})
        if len(levels) >= 3:
            ex = extrapolate([table[(k, n)] for n in levels])
            err = abs(math.exp(ex.limit) / exact - 1.0)
            worst = max(worst, err)
            orders.append(ex.order)
    if orders:
        rep.summary = {"tau": tau, "observed_order_min": min(orders), "observed_order_max": max(orders),
                       "extrapolated_max_rel_error": worst}
        rep.records.append(CheckRecord.compare("lattice_convergence", "lattice/classical", worst,
                                               cfg.tolerances["lattice"],
                                               f"order {min(orders):.3f}..{max(orders):.3f}"))
    return rep


def cmd_vacuum(cfg: RunConfig) -> Report:
    p = cfg.params
    rep = Report("vacuum")
    try:
        v = vacuum(p)
    except NotNormalizable as exc:
        rep.records.append(CheckRecord("normalizable", "closed_form", None, None, "FAIL", str(exc)))
        return rep
    q = v.form.quad
    rep.summary = {"energy": v.energy, "norm": v.form.norm.real, "quad_xx": q[0, 0], "quad_vv": q[1, 1],
                   "quad_xv": q[0, 1], "square_integrable": v.is_square_integrable}
    rep.records.append(CheckRecord.compare("vacuum_pairing", "closed_form", abs(vacuum_pairing(p) - 1.0),
                                           cfg.tolerances["vacuum_pairing"]))
    if p.branch is Branch.REAL:
        via = vacuum_via_q(p)
        rep.records.append(CheckRecord.compare("vacuum_via_q_norm", "operator/closed_form",
                                               abs(via.form.norm.real / v.form.norm.real - 1.0),
                                               cfg.tolerances["vacuum_via_q"]))
    if v.is_square_integrable:
        g = vacuum_box(p, 31)
        res = []
        for _ in range(3):
            r = grid_residuals(p, g)
            res.append(r)
            rep.data.append({"h_x": r.h_x, "h_v": r.h_v, "eigen": r.eigen, "dual_eigen": r.dual_eigen,
                             "commutator": r.commutator})
            g = g.refined()
        ratios = convergence_ratios([r.eigen for r in res])
        dev = max(abs(x - 4.0) for x in ratios)
        rep.records.append(CheckRecord.compare("grid_eigen_order", "grid", dev, 0.5,
                                               "ratios " + ", ".join(f"{x:.3f}" for x in ratios)))
    else:
        rep.records.append(CheckRecord.skip("grid_eigen_order", "grid", "vacuum alone is not square integrable"))
    return rep


def cmd_propagator(cfg: RunConfig) -> Report:
    p = cfg.params
    if cfg.taus:
        taus = sorted(set(cfg.taus) | {0.0})
    else:
        step, tmax = cfg.options["tau_step"], cfg.options["tau_max"]
        if not (step > 0 and tmax > 0):
            raise ConfigError("tau_step and tau_max must be positive")
        taus = [k * step for k in range(int(round(tmax / step)) + 1)]
    rep = Report("propagator")
    try:
        vals = _pool_map(lambda t: propagator_g(p, t), taus)
    except NotNormalizable as exc:
        rep.records.append(CheckRecord("normalizable", "closed_form", None, None, "FAIL", str(exc)))
        return rep
    oracle = None
    if cfg.options["grid_oracle"]:
        grid = vacuum_box(p, cfg.options["grid_n"])
        oracle = _pool_map(lambda t: propagator_grid(p, t, grid), taus)
    worst = 0.0
    for k, (t, gval) in enumerate(zip(taus, vals)):
        row = {"tau": float(t), "g_value": gval}
        if oracle is not None:
            row["grid_oracle_value"] = oracle[k]
            row["rel_diff"] = abs(oracle[k] / gval - 1.0)
            worst = max(worst, row["rel_diff"])
        rep.data.append(row)
    f = p.freqs
    g0 = 1.0 / (2.0 * p.gamma * f.total * f.product)
    rep.records.append(CheckRecord.compare("g_at_zero", "closed_form", abs(vals[0] / g0 - 1.0), 1e-13))
    if p.branch is Branch.REAL:
        rises = max((b - a for a, b in zip(vals, vals[1:])), default=-1.0)
        rep.records.append(CheckRecord("monotone", "closed_form", rises, 0.0, "PASS" if rises < 0 else "FAIL"))
    if oracle is not None:
        rep.records.append(CheckRecord.compare("grid_oracle", "operator/grid", worst,
                                               cfg.tolerances["propagator_oracle"]))
    return rep


def _leggauss_box(form: GaussianForm, half_widths: np.ndarray, nodes: int) -> float:
    """Tensor Gauss-Legendre integral of a real form over a box."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    axes = [hw * x for hw in half_widths]
    weights = [hw * w for hw in half_widths]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    wt = weights[0]
    for extra in weights[1:]:
        wt = np.multiply.outer(wt, extra)
    return float(np.sum(np.real(form.evaluate(mesh)) * wt))


def multidof_norm_quadrature(state_quad: np.ndarray, norm2: float, nodes: int = 40) -> float:
    """4-D quadrature of <Psi^D|Psi> given the summed quadratic form."""
    cov = np.linalg.inv(state_quad)
    half = 9.0 * np.sqrt(np.diag(cov))
    return _leggauss_box(GaussianForm(norm2, state_quad), half, nodes)


def cmd_multidof(cfg: RunConfig) -> Report:
    s = rotation(cfg.options["theta"])
    modes = cfg.options["modes"]
    if len(modes) != 2:
        raise ConfigError("the CLI builds a planar rotation, so exactly two --mode values are needed")
    system = build_system(s, modes)
    rep = Report("multidof")
    gs = ground_state_many(system)
    dual = ground_state_many(system, dual=True)
    rng = np.random.default_rng(cfg.seed)
    tol = cfg.tolerances["multidof"]

    pts = rng.normal(size=(50, 4)) * 0.5
    site = gs.form().evaluate(pts)
    modewise = np.ones(len(pts), dtype=complex)
    for k, m in enumerate(system.modes):
        z = pts[:, :2] @ s.T
        u = pts[:, 2:] @ s.T
        modewise *= vacuum(m)(z[:, k], u[:, k])
    rep.records.append(CheckRecord.compare("ground_state_modewise", "site/mode",
                                           float(np.max(np.abs(site / modewise - 1.0))), tol))
    taus = cfg.taus or (0.7,)
    if all(m.branch is Branch.REAL for m in system.modes):
        kerr = 0.0
        for t in taus:
            kz = rng.normal(size=(50, 8)) * 0.3
            ks = kernel_many(system, t).evaluate(kz)
            mw = np.ones(len(kz), dtype=complex)
            for k, m in enumerate(system.modes):
                blocks = [kz[:, 2 * j: 2 * j + 2] @ s.T for j in range(4)]
                mw *= evolution_kernel_operator(m, t).evaluate(np.stack([b[:, k] for b in blocks], axis=-1))
            kerr = max(kerr, float(np.max(np.abs(ks / mw - 1.0))))
        rep.records.append(CheckRecord.compare("kernel_modewise", "site/mode", kerr, tol))
    else:
        rep.records.append(CheckRecord.skip("kernel_modewise", "site/mode",
                                            "per-mode kernels need every mode on the real branch"))
    defect = max(gs.eigen_defect(system).values())
    rep.records.append(CheckRecord.compare("eigen_equation", "site", defect, tol))
    quad = gs.form().quad + dual.form().quad
    norm = multidof_norm_quadrature(quad, gs.norm * dual.norm)
    rep.records.append(CheckRecord.compare("pairing_norm_quadrature", "quadrature", abs(norm - 1.0),
                                           cfg.tolerances["multidof_norm"]))
    rep.summary = {"energy": gs.energy, "P": gs.P, "Q": gs.Q, "R": gs.R, "norm": gs.norm}
    return rep


COMMANDS: dict[str, Callable[[RunConfig], Report]] = {
    "branch": cmd_branch,
    "xval": cmd_xval,
    "lattice": cmd_lattice,
    "vacuum": cmd_vacuum,
    "propagator": cmd_propagator,
    "multidof": cmd_multidof,
}


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    grp = shared.add_argument_group("parameters")
    grp.add_argument("--gamma", type=float)
    grp.add_argument("--alpha", type=float)
    grp.add_argument("--beta", type=float)
    grp.add_argument("--omega1", type=float)
    grp.add_argument("--omega2", type=float)
    shared.add_argument("--tau", type=float, action="append", help="repeatable")
    shared.add_argument("--out", help="write output here instead of stdout")
    fmt = shared.add_mutually_exclusive_group()
    fmt.add_argument("--json", dest="format", action="store_const", const="json")
    fmt.add_argument("--csv", dest="format", action="store_const", const="csv")
    shared.add_argument("--tol", action="append", metavar="NAME=VALUE")
    shared.add_argument("--seed", type=int)
    shared.add_argument("--config", help="key=value file; flags override it")

    parser = argparse.ArgumentParser(prog="accelkernel", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("branch", parents=[shared], help="classify parameters")
    x = sub.add_parser("xval", parents=[shared], help="cross-validate the backends")
    x.add_argument("--inject-fault", choices=["m12-sign"], help=argparse.SUPPRESS)
    lat = sub.add_parser("lattice", parents=[shared], help="lattice continuum study")
    lat.add_argument("--level", type=int, action="append", help="number of steps (repeatable)")
    lat.add_argument("--bc-count", type=int)
    sub.add_parser("vacuum", parents=[shared], help="vacuum state checks")
    pr = sub.add_parser("propagator", parents=[shared], help="G(tau) table")
    pr.add_argument("--grid-oracle", action="store_true")
    pr.add_argument("--grid-n", type=int)
    pr.add_argument("--tau-max", type=float)
    pr.add_argument("--tau-step", type=float)
    md = sub.add_parser("multidof", parents=[shared], help="rotated two-mode system")
    md.add_argument("--theta", type=float)
    md.add_argument("--mode", action="append", help="gamma,alpha,beta (repeatable)")
    for name in ("inject_fault", "level", "bc_count", "grid_oracle", "grid_n", "tau_max", "tau_step",
                 "theta", "mode"):
        parser.set_defaults(**{name: None})
    return parser


def render(report: Report, fmt: str) -> str:
    if fmt == "json":
        return dumps(report.as_dict())
    if fmt == "csv":
        rows = report.data or [vars(r) for r in report.records] or [report.summary]
        return to_csv(rows)
    return to_table(report)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = build_config(args)
        report = COMMANDS[cfg.command](cfg)
        report.provenance = provenance(cfg)
        text = render(report, cfg.fmt)
        if cfg.out:
            with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except ConfigError as exc:
        print(f"accelkernel: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AccelKernelError, ValueError, ArithmeticError, OSError) as exc:
        print(f"accelkernel: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
