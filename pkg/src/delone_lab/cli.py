"""Command line entry point: validated experiment configs, result files and manifests.

    delone-lab run config.json
    delone-lab validate config.json
    delone-lab list-experiments

One config describes one experiment. Results and manifest.json land in output_dir;
identical configs give byte-identical files.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import __version__, _kernels
from .calculus import TlcFunction, comb_function, letter_indicator, mu_integral, sobolev_norm
from .diffusion import (TRUNCATION, equilibrium_distance, sample_path, semigroup_apply_mc,
                        semigroup_apply_quadrature, strong_feller_probe, ito_residual)
from .ergodic import FrequencyTable, cluster_frequency, word_cluster, word_frequencies
from .errors import DivergenceError, DomainError, InputError
from .golden import parse_golden
from .hodge import (disjoint_union, hodge_complement_dim, liouville_kernel, orbit_variance,
                    rauzy_space, torus_space)
from .hull import HullPoint, hull_metric, orbit_metric
from .profiles import cosine, poly_bump, sine_bump
from .sets import enumerate_clusters, spec_from_json
from .spectral import heat_evolve_spectral, koopman_eigen_search, local_laplacian, schrodinger_evolve

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_DIVERGED = 3

UINT64_MAX = 2 ** 64 - 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PointDoc(_Strict):
    address: Optional[list[str]] = None
    offset: str = "0"
    shift: float = 0.0


class FunctionDoc(_Strict):
    kind: Literal["cosine", "letter", "sine_comb", "poly_comb", "constant", "tlc"]
    omega: float = 2 * math.pi
    letter: str = "a"
    word: Optional[str] = None
    eps: float = 0.25
    m: int = 3
    value: float = 1.0
    doc: Optional[dict] = None


class GenerateParams(_Strict):
    window: tuple[float, float] = (-50.0, 50.0)
    point: PointDoc = PointDoc()
    cluster_radius: Optional[float] = Field(None, gt=0)
    scan_bound: float = Field(2.0e5, gt=0)


class MetricParams(_Strict):
    pairs: list[tuple[PointDoc, PointDoc]] = Field(min_length=1)
    tol: float = Field(1e-9, gt=0)


class FrequencyParams(_Strict):
    words: list[str] = Field(min_length=1)
    windows: list[float] = [1e2, 1e3, 1e4]


class DiffuseParams(_Strict):
    point: PointDoc = PointDoc()
    t_max: float = Field(1.0, gt=0)
    steps: int = Field(100, ge=1)
    n_paths: int = Field(4, ge=1)


class SemigroupParams(_Strict):
    function: FunctionDoc
    point: PointDoc = PointDoc()
    times: list[float] = Field([0.1], min_length=1)
    method: Literal["quadrature", "monte_carlo"] = "quadrature"
    n: int = Field(10000, ge=2)


class EquilibriumParams(_Strict):
    functions: list[FunctionDoc] = Field(min_length=1)
    point: PointDoc = PointDoc()
    times: list[float] = [0.5, 2.0, 8.0, 32.0]


class StrongFellerParams(_Strict):
    chart_word: str
    subcell_words: list[str] = Field(min_length=1)
    half_width: float = Field(0.25, gt=0)
    t_start: float = Field(1.0, gt=0)


class ItoParams(_Strict):
    function: FunctionDoc
    point: PointDoc = PointDoc()
    t: float = Field(0.1, gt=0)
    n_paths: int = Field(10000, ge=2)
    dt: float = Field(1e-3, gt=0)


class SpectrumParams(_Strict):
    level: int = Field(1, ge=0)
    eps: float = Field(0.5, gt=0)
    J: int = Field(8, ge=1)
    root: str = ""


class EvolveParams(SpectrumParams):
    kind: Literal["heat", "schrodinger"] = "schrodinger"
    times: list[float] = [0.1, 1.0, 10.0]
    coefficients: Optional[list[float]] = None


class KoopmanParams(_Strict):
    function: FunctionDoc
    alphas: list[float] = Field(min_length=1)
    window: float = Field(1e3, gt=0)
    point: PointDoc = PointDoc()


class HodgeParams(_Strict):
    level: int = Field(1, ge=0)
    J: int = Field(4, ge=1)
    finer: int = Field(1, ge=0)


class LiouvilleParams(_Strict):
    level: int = Field(1, ge=0)
    J: int = Field(4, ge=1)
    control: Literal["none", "disjoint", "torus2"] = "none"


class SobolevParams(_Strict):
    function: FunctionDoc
    orders: list[int] = [0, 1, 2]


PARAMS = {
    "generate": GenerateParams,
    "metric": MetricParams,
    "frequencies": FrequencyParams,
    "diffuse": DiffuseParams,
    "semigroup": SemigroupParams,
    "equilibrium": EquilibriumParams,
    "strongfeller": StrongFellerParams,
    "ito": ItoParams,
    "spectrum": SpectrumParams,
    "evolve": EvolveParams,
    "koopman-scan": KoopmanParams,
    "hodge": HodgeParams,
    "liouville": LiouvilleParams,
    "sobolev": SobolevParams,
}

ExperimentName = Literal["generate", "metric", "frequencies", "diffuse", "semigroup",
                         "equilibrium", "strongfeller", "ito", "spectrum", "evolve",
                         "koopman-scan", "hodge", "liouville", "sobolev"]


class ExperimentConfig(_Strict):
    spec: dict
    experiment: ExperimentName
    parameters: dict = {}
    seed: Optional[int] = Field(None, ge=0, le=UINT64_MAX)
    output_dir: str = "results"


def is_stochastic(experiment: str, params) -> bool:
    if experiment in ("diffuse", "ito"):
        return True
    if experiment == "semigroup":
        return params.method == "monte_carlo"
    if experiment == "evolve":
        return params.coefficients is None
    return False


class ConfigError(Exception):
    """Invalid config; carries printable diagnostics."""

    def __init__(self, lines):
        super().__init__("\n".join(lines))
        self.lines = list(lines)


def _diagnostics(path, exc: ValidationError, prefix: str) -> list:
    return [f"{path}: {prefix}{'.'.join(str(x) for x in e['loc'])}: {e['msg']}" for e in exc.errors()]


def load_config(path: Path):
    """Parse and validate; returns (raw dict, ExperimentConfig, params, spec)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror}"]) from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}"]) from None
    try:
        cfg = ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_diagnostics(path, exc, "")) from None
    try:
        params = PARAMS[cfg.experiment].model_validate(cfg.parameters)
    except ValidationError as exc:
        raise ConfigError(_diagnostics(path, exc, "parameters.")) from None
    try:
        spec = spec_from_json(cfg.spec)
    except (InputError, ValueError) as exc:
        raise ConfigError([f"{path}: spec: {exc}"]) from None
    if is_stochastic(cfg.experiment, params) and cfg.seed is None:
        raise ConfigError([f"{path}: seed: required for the stochastic experiment {cfg.experiment!r}"])
    return raw, cfg, params, spec


# ----------------------------------------------------------------------------
# serialisation


def fmt(x) -> str:
    return format(float(x), ".17g")


def dump_json(obj) -> str:
    """Deterministic JSON with sorted keys and every float written with 17 significant digits."""
    return _encode(obj, 0) + "\n"


def _encode(obj, indent: int) -> str:
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            return json.dumps(str(x))
        return fmt(x)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(obj[k], indent + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        return "[" + ", ".join(_encode(v, indent + 1) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_csv(header: list, rows) -> str:
    out = [",".join(header)]
    for r in rows:
        out.append(",".join(fmt(v) if isinstance(v, (float, np.floating)) else str(v) for v in r))
    return "\n".join(out) + "\n"


def config_hash(raw: dict) -> str:
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


# ----------------------------------------------------------------------------
# builders


def build_point(spec, doc: PointDoc) -> HullPoint:
    addr = tuple(doc.address) if doc.address is not None else None
    try:
        off = parse_golden(doc.offset)
    except ValueError as exc:
        raise InputError(f"bad offset {doc.offset!r}: {exc}") from None
    return HullPoint(spec, addr, off, doc.shift)


def build_function(spec, doc: FunctionDoc) -> TlcFunction:
    if doc.kind == "constant":
        return TlcFunction.constant(spec, doc.value)
    if doc.kind == "letter":
        return letter_indicator(spec, doc.letter)
    if doc.kind == "cosine":
        # tile-frame cosine on every letter; continuous when omega * length is a multiple of 2 pi
        prof = {w: cosine(doc.omega, doc.value) for w in spec.cells(0)}
        return TlcFunction(spec, 0, prof, "tile")
    if doc.kind == "sine_comb":
        return comb_function(spec, doc.eps, sine_bump(doc.eps, doc.value), doc.word)
    if doc.kind == "poly_comb":
        return comb_function(spec, doc.eps, poly_bump(doc.eps, doc.m, 0.0, doc.value), doc.word)
    if doc.doc is None:
        raise InputError("function kind 'tlc' needs a 'doc'")
    return TlcFunction.from_json(spec, doc.doc)


# ----------------------------------------------------------------------------
# experiments; each returns (files {name: text}, summary dict, truncation dict)


def _generate(spec, p: GenerateParams, seed):
    lo, hi = p.window
    if not lo < hi:
        raise InputError("window must satisfy lo < hi")
    pt = build_point(spec, p.point)
    orb = pt.orbit
    t0 = pt.position
    k0, k1 = orb.vertex_range(t0 + lo, t0 + hi)
    A, B, X = orb.coords(k0, k1)
    letters = spec.cells(0)
    codes = orb.tile_codes(k0, k1)
    rows = [(k0 + i, int(a) - pt.offset.a, int(b) - pt.offset.b, float(x - t0), letters[c])
            for i, (a, b, x, c) in enumerate(zip(A, B, X, codes))]
    files = {"points.csv": write_csv(["index", "a", "b", "x", "tile"], rows)}
    summary = {"count": len(rows)}
    if p.cluster_radius is not None:
        clusters = enumerate_clusters(spec, p.cluster_radius, p.scan_bound, pt.address)
        crow = [(i, len(c), " ".join(f"{a}:{b}" for a, b in c.points)) for i, c in enumerate(clusters)]
        files["clusters.csv"] = write_csv(["cluster", "size", "points"], crow)
        summary["clusters"] = len(clusters)
    return files, summary, {"window": [lo, hi], "scan_bound": p.scan_bound}


def _metric(spec, p: MetricParams, seed):
    rows = []
    for i, (d1, d2) in enumerate(p.pairs):
        a, b = build_point(spec, d1), build_point(spec, d2)
        rows.append((i, hull_metric(a, b, p.tol), orbit_metric(a, b)))
    csv = write_csv(["pair", "rho", "orbit_distance"], rows)
    return {"metric.csv": csv}, {"pairs": len(rows)}, {"tol": p.tol}


def _frequencies(spec, p: FrequencyParams, seed):
    table = FrequencyTable()
    exact = {}
    for w in p.words:
        table.add(w, cluster_frequency(word_cluster(spec, w), spec, p.windows))
        exact[w] = word_frequencies(spec, len(w)).get(w, 0.0)
    return {"frequencies.csv": table.to_csv()}, {"exact_per_tile": exact}, \
        {"windows": list(p.windows)}


def _diffuse(spec, p: DiffuseParams, seed):
    pt = build_point(spec, p.point)
    grid = np.linspace(0.0, p.t_max, p.steps + 1)
    rows = []
    for j in range(p.n_paths):
        path = sample_path(pt, grid, (seed + j) % (UINT64_MAX + 1))
        W = np.concatenate(([0.0], np.cumsum(path.increments)))
        rows.extend((j, float(t), float(w), float(s.position)) for t, w, s in zip(grid, W, path.states))
    csv = write_csv(["path", "t", "W", "position"], rows)
    return {"paths.csv": csv}, {"paths": p.n_paths}, {"steps": p.steps, "t_max": p.t_max}


def _semigroup(spec, p: SemigroupParams, seed):
    f = build_function(spec, p.function)
    pt = build_point(spec, p.point)
    rows = []
    for t in p.times:
        if p.method == "quadrature":
            est = semigroup_apply_quadrature(f, t, pt)
        else:
            est = semigroup_apply_mc(f, t, pt, p.n, seed)
        if not math.isfinite(est.value):
            raise DivergenceError(f"non-finite semigroup value at t={t}")
        rows.append((float(t), est.value, est.error, est.method, est.n))
    csv = write_csv(["t", "value", "error", "method", "n"], rows)
    return {"semigroup.csv": csv}, {"times": len(rows)}, \
        {"gauss_truncation_sigmas": TRUNCATION, "method": p.method, "n": p.n}


def _equilibrium(spec, p: EquilibriumParams, seed):
    tests = []
    for d in p.functions:
        f = build_function(spec, d)
        tests.append((f, mu_integral(f)))
    pt = build_point(spec, p.point)
    dist = [equilibrium_distance(pt, t, tests) for t in p.times]
    rows = list(zip([float(t) for t in p.times], dist))
    mono = all(b <= a for a, b in zip(dist, dist[1:]))
    return {"equilibrium.csv": write_csv(["t", "distance"], rows)}, {"nonincreasing": mono}, \
        {"gauss_truncation_sigmas": TRUNCATION}


def _strongfeller(spec, p: StrongFellerParams, seed):
    r = strong_feller_probe(spec, p.chart_word, p.subcell_words, p.half_width, p.t_start)
    doc = {"inside": r.inside, "outside": r.outside, "t": r.t, "delta": r.delta,
           "inside_point": r.inside_point.to_json(), "outside_point": r.outside_point.to_json(),
           "reproduced": r.inside > 1 / 3 and r.outside < 1 / 9}
    return {"strongfeller.json": dump_json(doc)}, {"reproduced": doc["reproduced"]}, \
        {"level": len(p.subcell_words[0]) - 1}


def _ito(spec, p: ItoParams, seed):
    f = build_function(spec, p.function)
    r = ito_residual(f, build_point(spec, p.point), p.t, p.n_paths, seed, p.dt)
    if not math.isfinite(r["residual"]):
        raise DivergenceError("non-finite Ito residual")
    return {"ito.json": dump_json(r)}, {"within_3se": r["within_3se"]}, \
        {"dt": p.dt, "n_paths": p.n_paths}


def _spectrum(spec, p: SpectrumParams, seed):
    op = local_laplacian(spec, p.level, p.eps, p.J, p.root)
    table = op.spectrum_table()
    closed = -0.5 * op.basis.ball.eigenvalues
    rows = [(j, mult, ev, float(closed[j - 1]) if j <= len(closed) else float("nan"))
            for j, mult, ev in table]
    csv = write_csv(["j", "multiplicity", "eigenvalue", "closed_form"], rows)
    return {"spectrum.csv": csv}, {"cantor_count": len(op.basis.cantor)}, \
        {"level": p.level, "J": p.J, "eps": p.eps}


def _evolve(spec, p: EvolveParams, seed):
    op = local_laplacian(spec, p.level, p.eps, p.J, p.root)
    n = len(op.basis)
    if p.coefficients is None:
        rng = np.random.Generator(np.random.Philox(key=seed))
        c = rng.standard_normal(n)
    else:
        c = np.asarray(p.coefficients, dtype=np.float64)
        if c.shape != (n,):
            raise InputError(f"expected {n} coefficients")
    norm0 = math.sqrt(math.fsum(c * c))
    rows = []
    for t in p.times:
        out = heat_evolve_spectral(op, c, t) if p.kind == "heat" else schrodinger_evolve(op, c, t)
        rows.append((float(t), math.sqrt(math.fsum(np.abs(out) ** 2)), norm0))
    csv = write_csv(["t", "norm", "initial_norm"], rows)
    return {"evolve.csv": csv}, {"kind": p.kind}, {"level": p.level, "J": p.J, "eps": p.eps}


def _koopman(spec, p: KoopmanParams, seed):
    f = build_function(spec, p.function)
    res = koopman_eigen_search(f, p.alphas, p.window, build_point(spec, p.point))
    rows = [(float(a), float(v)) for a, v in res.items()]
    return {"koopman.csv": write_csv(["alpha", "coefficient"], rows)}, {"alphas": len(rows)}, \
        {"window": p.window}


def _hodge(spec, p: HodgeParams, seed):
    h = hodge_complement_dim(spec, p.level, p.J, p.finer)
    doc = h.to_json()
    if h.dimension:
        g = h.form_space.form_function(h.complement[:, 0])
        doc["orbit_variance"] = orbit_variance(g, HullPoint(spec))
    return {"hodge.json": dump_json(doc)}, {"dimension": h.dimension}, \
        {"level": p.level, "J": p.J, "finer": p.finer}


def _liouville(spec, p: LiouvilleParams, seed):
    if p.control == "torus2":
        space = torus_space(p.J, 2)
    else:
        space = rauzy_space(spec, p.level, p.J)
        if p.control == "disjoint":
            space = disjoint_union(space, rauzy_space(spec, p.level, p.J))
    k = liouville_kernel(space)
    return {"liouville.json": dump_json(k.to_json())}, {"dimension": k.dimension}, \
        {"level": p.level, "J": p.J, "control": p.control}


def _sobolev(spec, p: SobolevParams, seed):
    f = build_function(spec, p.function)
    rows = []
    for k in p.orders:
        v = sobolev_norm(f, k)
        if not math.isfinite(v):
            raise DivergenceError(f"W^{k},2 norm is not finite")
        rows.append((k, v))
    return {"sobolev.csv": write_csv(["k", "norm"], rows)}, {"orders": len(rows)}, {}


RUNNERS = {
    "generate": _generate, "metric": _metric, "frequencies": _frequencies,
    "diffuse": _diffuse, "semigroup": _semigroup, "equilibrium": _equilibrium,
    "strongfeller": _strongfeller, "ito": _ito, "spectrum": _spectrum, "evolve": _evolve,
    "koopman-scan": _koopman, "hodge": _hodge, "liouville": _liouville, "sobolev": _sobolev,
}


# ----------------------------------------------------------------------------
# commands


def _manifest(raw, cfg, status, files, summary, truncation, diagnostics=None) -> dict:
    doc = {
        "config_sha256": config_hash(raw),
        "code_version": __version__,
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "truncation": truncation,
        "backend": _kernels.backend(),
        "status": status,
        "files": {name: hashlib.sha256(text.encode()).hexdigest() for name, text in files.items()},
        "summary": summary,
    }
    if diagnostics is not None:
        doc["diagnostics"] = diagnostics
    return doc


def run(path, out_dir=None) -> int:
    try:
        raw, cfg, params, spec = load_config(Path(path))
    except ConfigError as exc:
        for line in exc.lines:
            print(line, file=sys.stderr)
        return EXIT_INVALID
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        files, summary, trunc = RUNNERS[cfg.experiment](spec, params, cfg.seed)
    except DivergenceError as exc:
        man = _manifest(raw, cfg, "diverged", {}, {}, {}, str(exc))
        (out / "manifest.json").write_text(dump_json(man))
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (InputError, DomainError) as exc:
        print(f"{path}: parameters: {exc}", file=sys.stderr)
        return EXIT_INVALID
    for name, text in files.items():
        (out / name).write_text(text)
    (out / "manifest.json").write_text(dump_json(_manifest(raw, cfg, "complete", files, summary, trunc)))
    print(f"{cfg.experiment}: wrote {', '.join(sorted(files))} to {out}")
    return EXIT_OK


def validate(path) -> int:
    try:
        _, cfg, _, _ = load_config(Path(path))
    except ConfigError as exc:
        for line in exc.lines:
            print(line, file=sys.stderr)
        return EXIT_INVALID
    print(f"{path}: valid {cfg.experiment} config")
    return EXIT_OK


def list_experiments() -> int:
    for name in PARAMS:
        fields = ", ".join(PARAMS[name].model_fields)
        print(f"{name}: {fields}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="delone-lab", description="Diffusion on Delone hulls")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("config", type=Path)
    p_run.add_argument("--output-dir", type=Path, default=None, help="override output_dir")
    p_val = sub.add_parser("validate", help="check a config without computing")
    p_val.add_argument("config", type=Path)
    sub.add_parser("list-experiments", help="show experiments and their parameters")
    args = parser.parse_args(argv)
    if args.command == "run":
        return run(args.config, args.output_dir)
    if args.command == "validate":
        return validate(args.config)
    return list_experiments()


if __name__ == "__main__":
    sys.exit(main())
