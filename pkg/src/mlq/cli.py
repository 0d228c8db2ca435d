"""Batch front-end: `mlq generate|verify|closing|family --config cfg.json`.

Configs are versioned JSON (``schema: 1``).  All outputs are deterministic:
identical configs produce byte-identical CSV/JSON, and OBJ floats are
written with 17 significant digits.  Exit codes: 0 all checks pass,
1 checks failed, 2 usage/config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .closedform import cylinder_closing, trinoid_admissible, trinoid_closing_check, trinoid_monodromies
from .frames import GridSpec, SurfaceMap, sphere_pair
from .holonomy import EPS_POLE, IntegrationError, OdeOptions, unitarizing_gauge
from .iwasawa import ConvergenceError, FactorizationError
from .loops import DEFAULT_WINDOW_N
from .potentials import Potential, PotentialSpec, make_potential, spec_from_dict, spec_to_dict
from .verify import (
    CROSS,
    DeckTransform,
    cu_report,
    geometry_report,
    invariant_stencil,
    invariants_report,
    symmetry_check,
)

SCHEMA = 1

EXIT_OK = 0
EXIT_CHECKS_FAILED = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

#: residual keys a verify run gates on when the config lists a tolerance
GATEABLE = (
    "alpha_holomorphy",
    "beta_phase",
    "phi_norm",
    "quadric",
    "horizontality",
    "sinh_gordon",
    "metric_identity",
    "relation_e2u",
    "conformal",
    "lagrangian",
    "harmonic",
    "jacobian_sum",
    "gauss",
)


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


@dataclass
class RunConfig:
    spec: PotentialSpec
    grid: GridSpec
    lambda0: complex = 1.0 + 0.0j
    sweep: int | None = None
    truncation_n: int = DEFAULT_WINDOW_N
    ode: OdeOptions = field(default_factory=OdeOptions)
    fd_step: float = 1e-3
    tolerances: dict[str, float] = field(default_factory=dict)
    output_dir: Path = Path("out")
    raw: dict = field(default_factory=dict)


def load_config(path: str | Path) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if raw.get("schema") != SCHEMA:
        raise ConfigError(f"unsupported schema {raw.get('schema')!r} (expected {SCHEMA})")

    try:
        spec = spec_from_dict(raw["potential"])
    except KeyError:
        raise ConfigError("config needs a 'potential' object") from None
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad potential: {exc}") from exc

    g = raw.get("grid")
    if not isinstance(g, dict):
        raise ConfigError("config needs a 'grid' object")
    try:
        grid = GridSpec(
            re_min=float(g["re_min"]), re_max=float(g["re_max"]), n_re=int(g["n_re"]),
            im_min=float(g["im_min"]), im_max=float(g["im_max"]), n_im=int(g["n_im"]),
        )
    except KeyError as exc:
        raise ConfigError(f"grid is missing {exc}") from None
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad grid: {exc}") from exc
    if grid.n_re < 2 or grid.n_im < 2:
        raise ConfigError("grid counts must be at least 2 per axis")

    lam = 1.0 + 0.0j
    sweep = None
    if "sweep" in raw:
        sweep = int(raw["sweep"])
    elif "lambda0" in raw:
        l0 = raw["lambda0"]
        lam = complex(float(l0.get("re", 1.0)), float(l0.get("im", 0.0)))
        if abs(abs(lam) - 1.0) > 1e-12:
            raise ConfigError(f"|lambda0| must be 1 (got {abs(lam)!r})")

    ode_raw = raw.get("ode", {})
    try:
        ode = OdeOptions(**ode_raw) if ode_raw else OdeOptions()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad ode options: {exc}") from exc

    tol = raw.get("tolerances", {})
    if not isinstance(tol, dict):
        raise ConfigError("'tolerances' must be a map of residual name -> bound")

    return RunConfig(
        spec=spec,
        grid=grid,
        lambda0=lam,
        sweep=sweep,
        truncation_n=int(raw.get("truncation_N", DEFAULT_WINDOW_N)),
        ode=ode,
        fd_step=float(raw.get("fd_step", 1e-3)),
        tolerances={str(k): float(v) for k, v in tol.items()},
        output_dir=Path(raw.get("output_dir", "out")),
        raw=raw,
    )


def _n_jobs(cli_jobs: int | None) -> int:
    env = os.environ.get("MLQ_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"MLQ_JOBS must be an integer, got {env!r}") from None
    if cli_jobs is not None:
        return max(1, cli_jobs)
    return min(4, os.cpu_count() or 1)


def _map_nodes(fn, nodes, jobs: int) -> list:
    """Apply fn to nodes in a bounded pool; results in grid order."""
    if jobs <= 1:
        return [fn(z) for z in nodes]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, nodes))


# ---------------------------------------------------------------------------
# writers


def _fmt(x: float) -> str:
    return "%.17g" % float(x)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _write_obj(path: Path, verts: list, grid: GridSpec) -> None:
    """Triangulated graph over the grid; invalid vertices keep their slot."""
    lines = []
    ok = []
    for v in verts:
        if v is None:
            lines.append("v 0 0 0")
            ok.append(False)
        else:
            lines.append(f"v {_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}")
            ok.append(True)
    n_re = grid.n_re
    for j in range(grid.n_im - 1):
        for i in range(n_re - 1):
            a = j * n_re + i
            b = a + 1
            c = a + n_re
            d = c + 1
            if ok[a] and ok[b] and ok[c]:
                lines.append(f"f {a + 1} {b + 1} {c + 1}")
            if ok[b] and ok[d] and ok[c]:
                lines.append(f"f {b + 1} {d + 1} {c + 1}")
    path.write_text("\n".join(lines) + "\n")


_CSV_HEADER = (
    ["z_re", "z_im"]
    + [f"q2_{i}_{p}" for i in range(4) for p in ("re", "im")]
    + [f"s3f_{i}" for i in range(4)]
    + [f"s3n_{i}" for i in range(4)]
    + ["s2a_x", "s2a_y", "s2a_z", "s2b_x", "s2b_y", "s2b_z"]
)


def _csv_row(s) -> str:
    cells = [_fmt(s.z.real), _fmt(s.z.imag)]
    if s.valid:
        for v in s.q2_hom:
            cells += [_fmt(v.real), _fmt(v.imag)]
        cells += [_fmt(x) for x in s.s3_pair[0]]
        cells += [_fmt(x) for x in s.s3_pair[1]]
        cells += [_fmt(x) for x in s.s2_pair[0]]
        cells += [_fmt(x) for x in s.s2_pair[1]]
    else:
        cells += ["nan"] * 22
    return ",".join(cells)


def _write_csv(path: Path, samples: list) -> None:
    lines = [",".join(_CSV_HEADER)]
    lines += [_csv_row(s) for s in samples]
    path.write_text("\n".join(lines) + "\n")


def _grid_pole_check(pot: Potential, grid: GridSpec) -> None:
    for p in pot.singular_points:
        for z in grid.nodes():
            if abs(z - p) < EPS_POLE:
                raise ConfigError(
                    f"grid intersects singular set (node {z} near pole {p})"
                )


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(cfg: RunConfig, out_dir: Path, jobs: int) -> int:
    pot = make_potential(cfg.spec)
    _grid_pole_check(pot, cfg.grid)
    smap = SurfaceMap(pot, cfg.lambda0, window=cfg.truncation_n, ode=cfg.ode)
    nodes = cfg.grid.nodes()
    samples = _map_nodes(smap.sample, nodes, jobs)

    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / "surface.csv", samples)
    _write_obj(out_dir / "factor1.obj",
               [s.s2_pair[0] if s.valid else None for s in samples], cfg.grid)
    _write_obj(out_dir / "factor2.obj",
               [s.s2_pair[1] if s.valid else None for s in samples], cfg.grid)

    failures = [
        {"index": i, "z_re": s.z.real, "z_im": s.z.imag, "error": s.error}
        for i, s in enumerate(samples)
        if not s.valid
    ]
    tails = [s.diagnostics["tail_norm"] for s in samples if s.valid and s.diagnostics]
    meta = {
        "schema": SCHEMA,
        "version": __version__,
        "config": cfg.raw,
        "truncation_N": cfg.truncation_n,
        "n_nodes": len(samples),
        "n_failed": len(failures),
        "failures": failures,
        "max_tail_norm": max(tails) if tails else None,
        "max_iwasawa_residual": max(
            (s.diagnostics["iwasawa_residual"] for s in samples if s.valid and s.diagnostics),
            default=None,
        ),
    }
    _write_json(out_dir / "meta.json", meta)
    if failures and len(failures) == len(samples):
        print("all grid nodes failed; see meta.json", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"wrote {len(samples)} nodes to {out_dir} ({len(failures)} failed)")
    return EXIT_OK


def _histogram(values: list[float]) -> dict:
    """log10 histogram on fixed bins [-16, 0] (deterministic across runs)."""
    edges = list(range(-16, 1))
    counts = [0] * (len(edges) - 1)
    for v in values:
        if v <= 0 or not np.isfinite(v):
            continue
        b = int(np.floor(np.log10(v))) + 16
        counts[min(max(b, 0), len(counts) - 1)] += 1
    return {"log10_bin_edges": edges, "counts": counts}


def cmd_verify(cfg: RunConfig, out_dir: Path, jobs: int) -> int:
    pot = make_potential(cfg.spec)
    _grid_pole_check(pot, cfg.grid)
    smap = SurfaceMap(pot, cfg.lambda0, window=cfg.truncation_n, ode=cfg.ode,
                      iwasawa_tol=1e-12)
    h = cfg.fd_step

    def node_report(z: complex) -> dict:
        try:
            inv = invariant_stencil(smap, z, h)
            rep = inv[(0, 0)]
            geo = geometry_report(smap, z, h)
            s2 = {
                off: sphere_pair(smap.frame_pair(z + (off[0] + 1j * off[1]) * h, anchor=z))
                for off in CROSS
            }
            cu = cu_report(inv, h, s2=s2)
            residuals = dict(rep.residuals)
            residuals["conformal"] = geo.conformal_residual
            residuals["lagrangian"] = geo.lagrangian_residual
            residuals["harmonic"] = geo.harmonic_residual
            residuals["jacobian_sum"] = geo.jacobian_sum
            residuals["gauss"] = cu.gauss_residual
            return {
                "z_re": z.real,
                "z_im": z.imag,
                "valid": True,
                "u": rep.u,
                "u_hat": rep.u_hat,
                "alpha": [rep.alpha.real, rep.alpha.imag],
                "beta": [rep.beta.real, rep.beta.imag],
                "C": cu.C,
                "Theta": [cu.Theta.real, cu.Theta.imag],
                "theta_match": abs(cu.Theta - 2 * rep.alpha),
                "jacobian_match": cu.jacobian_match,
                "gauss_skipped": cu.gauss_skipped,
                "residuals": residuals,
            }
        except (ValueError, RuntimeError) as exc:
            return {"z_re": z.real, "z_im": z.imag, "valid": False, "error": str(exc)}

    nodes = cfg.grid.nodes()
    reports = _map_nodes(node_report, nodes, jobs)
    valid = [r for r in reports if r["valid"]]
    if not valid:
        print("no grid node produced a report", file=sys.stderr)
        return EXIT_NUMERICAL

    max_residuals = {
        k: max(r["residuals"][k] for r in valid) for k in valid[0]["residuals"]
    }
    histograms = {
        k: _histogram([r["residuals"][k] for r in valid]) for k in max_residuals
    }
    checks = {}
    for name, bound in cfg.tolerances.items():
        if name in max_residuals:
            checks[name] = {"max": max_residuals[name], "bound": bound,
                            "pass": bool(max_residuals[name] <= bound)}
    passed = all(c["pass"] for c in checks.values())

    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "report.json", {
        "schema": SCHEMA,
        "version": __version__,
        "config": cfg.raw,
        "nodes": reports,
        "n_failed": len(reports) - len(valid),
        "max_residuals": max_residuals,
        "histograms": histograms,
        "checks": checks,
        "pass": passed,
    })
    for name, c in sorted(checks.items()):
        print(f"{'PASS' if c['pass'] else 'FAIL'} {name}: max {c['max']:.3e} <= {c['bound']:.1e}")
    if not passed:
        return EXIT_CHECKS_FAILED
    print(f"verify: {len(valid)} nodes, all configured checks pass")
    return EXIT_OK


_CLOSING_SAMPLES = (0.8 + 0.2j, 1.1 - 0.4j, -0.6 + 0.9j)


def cmd_closing(cfg: RunConfig, out_dir: Path, jobs: int) -> int:
    if cfg.spec.variant == "equivariant":
        p = cfg.spec.params
        rep = cylinder_closing(p["a"], p["b"], p["c"], cfg.lambda0)
        # wound frames spread over more Laurent modes than single-sheet
        # ones, so widen the window and loosen the unitarity gate: a defect
        # of order 1e-5 cannot blur an O(1) non-closing residual
        window = max(cfg.truncation_n, 24)
        pot = make_potential(cfg.spec)
        smap = SurfaceMap(pot, cfg.lambda0, window=window, ode=cfg.ode,
                          iwasawa_tol=1e-12, frame_tol=1e-4)
        deck = symmetry_check(smap, DeckTransform(), _CLOSING_SAMPLES)
        payload = {
            "schema": SCHEMA,
            "version": __version__,
            "config": cfg.raw,
            "family": "equivariant",
            "closing": {
                "mu1": rep.mu1,
                "mu2": rep.mu2,
                "closes_q2": rep.closes_q2,
                "closes_s3": rep.closes_s3,
            },
            "deck_residual": deck,
        }
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_json(out_dir / "closing.json", payload)
        print(f"mu = ({rep.mu1:.12g}, {rep.mu2:.12g}) closes_q2={rep.closes_q2} "
              f"closes_s3={rep.closes_s3} deck residual {deck:.3e}")
        return EXIT_OK if rep.closes_q2 else EXIT_CHECKS_FAILED

    if cfg.spec.variant == "trinoid":
        p = cfg.spec.params
        lam0 = p["lambda0"]
        adm = trinoid_admissible(lam0, p["v0"], p["v1"], p["vinf"])
        pot = make_potential(cfg.spec)
        spectral = (lam0, -1j * lam0)
        mono = {lam: trinoid_monodromies(pot, lam, opts=cfg.ode) for lam in spectral}
        check = trinoid_closing_check(
            *(tuple(mono[lam][i] for lam in spectral) for i in range(3))
        )
        circle = [np.exp(1j * np.pi * (k / 4 + 0.07)) for k in range(8)]
        hol = [trinoid_monodromies(pot, lam, opts=cfg.ode) for lam in circle]
        plain_unit = max(
            float(np.linalg.norm(h @ h.conj().T - np.eye(2)))
            for hs in hol for h in hs
        )
        # the unitarizer varies with lam: dress each circle sample separately
        dressed_unit = 0.0
        try:
            for hs in hol:
                gauge = unitarizing_gauge(hs)
                ginv = np.linalg.inv(gauge)
                for h in hs:
                    d = gauge @ h @ ginv
                    dressed_unit = max(
                        dressed_unit,
                        float(np.linalg.norm(d @ d.conj().T - np.eye(2))),
                    )
        except ValueError:
            dressed_unit = None
        payload = {
            "schema": SCHEMA,
            "version": __version__,
            "config": cfg.raw,
            "family": "trinoid",
            "admissibility": {
                "admissible": adm.admissible,
                "n": list(adm.n),
                "m": list(adm.m),
                "violated": adm.violated,
            },
            "monodromy": {
                "product_residual": check.product_residual,
                "pm_id_deviation": [check.mu1, check.mu2],
                "closes_q2": check.closes_q2,
                "closes_s3": check.closes_s3,
                "plain_unitarity_max": plain_unit,
                "dressed_unitarity_max": dressed_unit,
            },
        }
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_json(out_dir / "closing.json", payload)
        n_str = ", ".join(f"{x:.6f}" for x in adm.n)
        m_str = ", ".join(f"{x:.6f}" for x in adm.m)
        print(f"admissible={adm.admissible} n=({n_str}) m=({m_str})")
        print(f"monodromy product residual {check.product_residual:.3e}; "
              f"dressed unitarity {dressed_unit if dressed_unit is None else f'{dressed_unit:.3e}'}")
        ok = adm.admissible and check.product_residual is not None \
            and check.product_residual <= cfg.tolerances.get("monodromy_product", 1e-6)
        return EXIT_OK if ok else EXIT_CHECKS_FAILED

    print(f"closing checks apply to equivariant/trinoid potentials, "
          f"not {cfg.spec.variant!r}", file=sys.stderr)
    return EXIT_USAGE


def cmd_family(cfg: RunConfig, out_dir: Path, jobs: int) -> int:
    if cfg.sweep is None or cfg.sweep < 2:
        print("family needs 'sweep' >= 2 in the config", file=sys.stderr)
        return EXIT_USAGE
    pot = make_potential(cfg.spec)
    _grid_pole_check(pot, cfg.grid)
    nodes = cfg.grid.nodes()
    h = cfg.fd_step
    lams = [np.exp(1j * np.pi * k / cfg.sweep) for k in range(cfg.sweep)]

    def run_member(lam: complex):
        smap = SurfaceMap(pot, lam, window=cfg.truncation_n, ode=cfg.ode, iwasawa_tol=1e-12)
        # raw lift phase: the lam0^-2 rotation is a statement about the
        # un-normalized alpha
        return [invariants_report(smap, z, h, phase=1.0 + 0.0j) for z in nodes]

    members = [run_member(lam) for lam in lams]
    ref = members[0]
    per_lambda = []
    for lam, member in zip(lams, members):
        u_dev = max(abs(r.u - r0.u) for r, r0 in zip(member, ref))
        a_dev = max(abs(r.alpha - lam**-2 * r0.alpha) for r, r0 in zip(member, ref))
        per_lambda.append({
            "lambda_re": float(lam.real),
            "lambda_im": float(lam.imag),
            "max_u_dev": u_dev,
            "max_alpha_dev": a_dev,
        })
    max_u = max(e["max_u_dev"] for e in per_lambda)
    max_a = max(e["max_alpha_dev"] for e in per_lambda)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "family.json", {
        "schema": SCHEMA,
        "version": __version__,
        "config": cfg.raw,
        "lambdas": [[float(l.real), float(l.imag)] for l in lams],
        "per_lambda": per_lambda,
        "max_u_dev": max_u,
        "max_alpha_dev": max_a,
    })
    print(f"family sweep ({cfg.sweep} samples): max |u - u(1)| = {max_u:.3e}, "
          f"max |alpha - lam^-2 alpha(1)| = {max_a:.3e}")
    bound = cfg.tolerances.get("family", None)
    if bound is not None and (max_u > bound or max_a > bound):
        return EXIT_CHECKS_FAILED
    return EXIT_OK


# ---------------------------------------------------------------------------


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="mlq",
        description="Minimal Lagrangian surfaces in the complex quadric via loop groups.",
    )
    parser.add_argument("command", choices=("generate", "verify", "closing", "family"))
    parser.add_argument("--config", required=True, help="path to a JSON run config")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("--jobs", type=int, default=None, help="worker threads (MLQ_JOBS overrides)")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        jobs = _n_jobs(args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out_dir = Path(args.out) if args.out else cfg.output_dir

    dispatch = {
        "generate": cmd_generate,
        "verify": cmd_verify,
        "closing": cmd_closing,
        "family": cmd_family,
    }
    try:
        return dispatch[args.command](cfg, out_dir, jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IntegrationError, ConvergenceError, FactorizationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
