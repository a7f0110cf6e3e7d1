"""Command-line front end: ``ftrcontact solve`` and ``ftrcontact audit``.

Exit codes: 0 success, 1 solver failure (restoration failure, iteration
exhaustion or an aborted run), 2 bad input (configuration, files).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import artifacts
from .benchmark import IroningBenchmark
from .config import ConfigError, load_config
from .gmsh import read_msh, write_msh
from .mesh import MeshError
from .mortar import BASES, ContactPair

log = logging.getLogger("ftrcontact")

EXIT_OK, EXIT_SOLVER, EXIT_INPUT = 0, 1, 2


def _build_benchmark(cfg) -> IroningBenchmark:
    coarse = read_msh(cfg.mesh_file, cfg.bindings) if cfg.benchmark == "mesh" else None
    return IroningBenchmark(refine=cfg.refine, press=cfg.press, sweep=cfg.sweep,
                            block=cfg.block, pipe=cfg.pipe, coarse=coarse,
                            basis=cfg.basis, zones=cfg.zones)


def solve(args) -> int:
    try:
        cfg = load_config(args.config)
        if args.refine is not None:
            if args.refine < 1:
                raise ConfigError("refine", "refinement level must be at least 1")
            cfg.refine = args.refine
        if args.phase is not None:
            cfg.phases = (1, 2) if args.phase == "all" else (int(args.phase),)
        if args.out is not None:
            cfg.out = Path(args.out)
        ftr = cfg.ftr_config(exact_hessian=args.exact_hessian)
        bench = _build_benchmark(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, MeshError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    variant = "exact" if not ftr.lumped else "lumped"
    print(f"ironing benchmark: refine={cfg.refine} dofs={bench.mesh.n_dofs} "
          f"phases={','.join(map(str, cfg.phases))} hessian={variant} basis={cfg.basis}")

    status = EXIT_OK
    for phase, prob, res in bench.run(cfg.phases, ftr):
        stem = f"phase{phase}"
        write_msh(prob.mesh, out / f"{stem}.msh")
        artifacts.write_vtk(out / f"{stem}.vtk", prob.mesh, res.z, f"ftrcontact phase {phase}")
        artifacts.write_csv(out / f"{stem}.csv", res.records)
        artifacts.convergence_plots(res.records, out, stem)
        c = prob.gap(res.z)
        print(f"phase {phase}: status={res.status} outer={res.outer_iterations} "
              f"mean_inner={res.mean_inner_iterations:.2f} restorations={res.restorations} "
              f"J={res.records[-1].J:.10g} theta={res.final_theta:.3e} chi={res.final_chi:.3e} "
              f"min_weak_gap={c.min():.3e} time={res.records[-1].wall_time:.1f}s")
        if not res.converged:
            print(f"phase {phase} failed: {res.status}", file=sys.stderr)
            status = EXIT_SOLVER
    return status


def audit_state(z, mesh, basis: str = "dual", samples: int = 16) -> dict:
    """Minimum pointwise gap over dense sampling and minimum weak gap of a state."""
    pair = ContactPair(mesh, basis=basis)
    g = pair.pointwise_gap(z, samples)
    g = g[np.isfinite(g)]
    c = pair.gap(z)
    return {"min_pointwise_gap": float(g.min()) if len(g) else float("inf"),
            "min_weak_gap": float(c.min()),
            "samples": int(len(g)),
            "constraints": int(len(c))}


def audit(args) -> int:
    try:
        mesh = read_msh(args.mesh)
        state = artifacts.read_vtk(args.state)
    except (OSError, MeshError, ValueError, IndexError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if state.points.shape != mesh.vertices.shape:
        print(f"input error: state has {len(state.points)} points, mesh has {mesh.n_vertices}",
              file=sys.stderr)
        return EXIT_INPUT
    rep = audit_state(state.z, mesh, args.basis, args.samples)
    print(f"min pointwise gap: {rep['min_pointwise_gap']:.6e} ({rep['samples']} samples)")
    print(f"min weak gap:      {rep['min_weak_gap']:.6e} ({rep['constraints']} constraints)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ftrcontact", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log every outer iteration")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="run the ironing benchmark from a config file")
    s.add_argument("config")
    s.add_argument("--refine", type=int, help="uniform refinements of the coarse mesh (>= 1)")
    s.add_argument("--phase", choices=("1", "2", "all"))
    s.add_argument("--out", help="output directory")
    s.add_argument("--exact-hessian", action="store_true",
                   help="use the exact non-mortar matrix in the Hessian transform")
    s.set_defaults(func=solve)

    a = sub.add_parser("audit", help="report gaps of a saved state")
    a.add_argument("state", help="VTK file written by solve")
    a.add_argument("mesh", help="MSH file with the contact markers of that state")
    a.add_argument("--basis", choices=BASES, default="dual")
    a.add_argument("--samples", type=int, default=16, help="sample intervals per segment")
    a.set_defaults(func=audit)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
