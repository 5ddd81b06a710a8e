"""Command-line pipeline: groundstate -> kernels -> configure -> assemble -> spectrum -> report."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

from . import io
from .configuration import build_configuration, solve_balancing, suggest_mn
from .errors import InvalidParams, NonConvergence, SpikeSpectraError
from .ground_state import ProblemParams, RadialProfile, SolverOptions, solve_ground_state, validate_profile
from .kernels import KernelTable, QuadratureOptions, SigmaConstants, sigma_constants, tabulate_kernels
from .matrices import assemble_H_alpha, assemble_M1, build_symmetry_kernels, reduce_H_alpha, reduce_M1
from .spectral import (
    GAP_RATIO,
    SpectralReport,
    gap_scaling_fit,
    gap_sweep,
    matrix_report,
    summarize,
    write_det_csv,
)

log = logging.getLogger("spike_spectra")

STAGES = ("groundstate", "kernels", "configure", "assemble", "spectrum", "report")
WHICH = ("M1", "Halpha")


@dataclass
class RunConfig:
    dim: int = 3
    exponent: float = 3.0
    k: int = 8
    m: int | None = None
    n: int | None = None
    ell_target: float | None = None
    max_m: int = 48
    smin: float = 6.0
    smax: float = 24.0
    quad_tol: float = 1e-9
    solver_tol: float = 1e-6
    gap_ratio: float = GAP_RATIO
    out_dir: str = "out"

    def validate(self) -> "RunConfig":
        if self.k < 7:
            raise InvalidParams(f"k = {self.k}: at least 7 sectors are required")
        if self.dim < 2:
            raise InvalidParams(f"dim = {self.dim}: the polygon needs at least two dimensions")
        ProblemParams(self.dim, self.exponent)
        if (self.m is None) != (self.n is None):
            raise InvalidParams("give both m and n, or neither")
        if self.m is None and self.ell_target is None:
            raise InvalidParams("give m and n, or ell_target")
        if self.gap_ratio <= 1:
            raise InvalidParams("gap_ratio must exceed 1")
        return self

    def hashed(self) -> dict:
        d = asdict(self)
        d.pop("out_dir")
        return d

    @property
    def digest(self) -> str:
        return io.content_hash(self.hashed())


# ----------------------------------------------------------------------------
# loaders

def load_profile(path) -> RadialProfile:
    return RadialProfile.from_dict(io.read_json(path, "profile")["profile"])


def load_table(path, profile_path=None) -> KernelTable:
    meta = io.read_json(io.sidecar(path), "kernel_table")
    table = KernelTable.from_csv(path, meta["table"])
    if profile_path is not None:
        opts = QuadratureOptions(quad_tol=table.quad_tol)
        table.attach(load_profile(profile_path), opts)
    return table


def _nan(x):
    return float("nan") if x is None else x


def load_configuration(path):
    doc = io.read_json(path, "configuration")
    cfg = build_configuration(doc["k"], doc["m"], doc["n"], doc["ell"], doc["ell_bar"], dim=doc["dim"])
    sig = SigmaConstants(**{k: _nan(v) for k, v in doc["sigmas"].items()})
    return cfg, sig, doc


# ----------------------------------------------------------------------------
# stage bodies (each writes its artifacts and returns nothing)

def do_groundstate(dim, p, out, step=1e-3, r_max=40.0, solver_tol=1e-6, config_hash=None, inputs_hash=None):
    opts = SolverOptions(step=step, r_max=r_max, residual_tol=solver_tol)
    prof = solve_ground_state(ProblemParams(dim, p), opts)
    diag = validate_profile(prof, opts)
    if not diag.ok:
        raise NonConvergence(f"profile failed validation: max residual {diag.max_residual:.3e}")
    io.write_json(out, {"profile": prof.to_dict(), "digest": prof.digest(),
                        "diagnostics": {"max_residual": diag.max_residual, "tail_match_error": diag.tail_match_error}},
                  "profile", config_hash, inputs_hash)


def do_kernels(profile_path, smin, smax, out, quad_tol=1e-9, config_hash=None, inputs_hash=None):
    prof = load_profile(profile_path)
    table = tabulate_kernels(prof, smin, smax, opts=QuadratureOptions(quad_tol=quad_tol))
    table.to_csv(out)
    io.write_json(io.sidecar(out), {"table": table.metadata(), "invariants": table.invariant_report(),
                                    "csv_hash": io.file_hash(out)},
                  "kernel_table", config_hash, inputs_hash)


def pick_mn(table, k, m, n, ell_target, max_m):
    if m is not None:
        return m, n, None
    cands = suggest_mn(k, ell_target, table, max_m=max_m)
    best = cands[0]
    return best.m, best.n, [asdict(c) for c in cands[:10]]


def do_configure(kernels_path, k, m, n, out, dim=2, ell_target=None, max_m=48, profile_path=None,
                 config_hash=None, inputs_hash=None):
    table = load_table(kernels_path, profile_path)
    m, n, cands = pick_mn(table, k, m, n, ell_target, max_m)
    bal = solve_balancing(table, k, m, n)
    cfg = build_configuration(k, m, n, bal.ell, bal.ell_bar, dim=dim)
    sig = sigma_constants(table, bal.ell, bal.ell_bar, k)
    io.write_json(out, {**cfg.to_dict(), "balance": asdict(bal), "sigmas": sig.to_dict(), "candidates": cands},
                  "configuration", config_hash, inputs_hash)


def _assemble(cfg, sig, which):
    if which == "M1":
        return assemble_M1(cfg, sig), build_symmetry_kernels(cfg).in_plane(), reduce_M1
    if which == "Halpha":
        return assemble_H_alpha(cfg, sig), build_symmetry_kernels(cfg).out_of_plane(), reduce_H_alpha
    raise InvalidParams(f"unknown matrix {which!r}")


def do_assemble(config_path, which, out, config_hash=None, inputs_hash=None):
    cfg, sig, _ = load_configuration(config_path)
    B, _, _ = _assemble(cfg, sig, which)
    io.write_matrix_csv(out, B.dense())
    io.write_json(io.sidecar(out), {"manifest": B.manifest(), "csv_hash": io.file_hash(out)},
                  "matrix", config_hash, inputs_hash)


def do_spectrum(config_path, which, out, det_csv=None, gap_ratio=GAP_RATIO, config_hash=None, inputs_hash=None):
    cfg, sig, _ = load_configuration(config_path)
    B, cand, reducer = _assemble(cfg, sig, which)
    params = {"k": cfg.k, "m": cfg.m, "n": cfg.n, "ell": cfg.ell, "ell_bar": cfg.ell_bar, "dim": cfg.dim}
    rep = matrix_report(B, cand, reducer, sig, gap_ratio, params)
    io.write_json(out, {"report": rep.to_dict(), "sigmas": sig.to_dict()}, "spectrum", config_hash, inputs_hash)
    if det_csv is not None:
        write_det_csv(rep.det_table, det_csv)
        io.write_json(io.sidecar(det_csv), {"csv_hash": io.file_hash(det_csv), "matrix": which},
                      "det_table", config_hash, inputs_hash)


def do_report(spectra, dim, out, gap_ratio=GAP_RATIO, config_hash=None, inputs_hash=None) -> bool:
    reports, sigmas, params = {}, {}, {}
    for path in spectra:
        doc = io.read_json(path, "spectrum")
        rep = SpectralReport.from_dict(doc["report"])
        reports[rep.matrix_id] = rep
        sigmas, params = doc["sigmas"], rep.params
    summary = summarize(reports, dim, sigmas, params, gap_ratio)
    io.write_json(out, summary.to_dict(), "nondegeneracy_report", config_hash, inputs_hash)
    return summary.passed


# ----------------------------------------------------------------------------
# pipeline

def _artifacts(out: Path, dim: int) -> dict:
    which = WHICH if dim >= 3 else WHICH[:1]
    return {
        "groundstate": [out / "profile.json"],
        "kernels": [out / "kernels.csv"],
        "configure": [out / "config.json"],
        "assemble": [out / f"matrix_{w}.csv" for w in which],
        "spectrum": [out / f"spectrum_{w}.json" for w in which],
        "report": [out / "spectral_report.json"],
    }


def _meta_path(p: Path) -> Path:
    return io.sidecar(p) if p.suffix == ".csv" else p


def _cached(paths, inputs_hash) -> bool:
    for p in paths:
        meta = _meta_path(p)
        if not (p.exists() and meta.exists()):
            return False
        try:
            if io.read_json(meta).get("inputs_hash") != inputs_hash:
                return False
        except ValueError:
            return False
    return True


def run_pipeline(cfg: RunConfig, start: str | None = None) -> int:
    """Run (or resume at ``start``) every stage; 0 iff the report passes."""
    cfg.validate()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    chash = cfg.digest
    arts = _artifacts(out, cfg.dim)
    first = STAGES.index(start) if start else 0
    io.write_json(out / "run_config.json", {"config": cfg.hashed()}, "run_config", chash)
    which = WHICH if cfg.dim >= 3 else WHICH[:1]

    def inputs_for(stage):
        # hash of the stage parameters and the bytes of its upstream artifacts
        up = {"groundstate": (), "kernels": ("groundstate",), "configure": ("kernels", "groundstate"),
              "assemble": ("configure",), "spectrum": ("configure",), "report": ("spectrum",)}[stage]
        files = {str(p.name): io.file_hash(p) for s in up for p in arts[s]}
        own = {"groundstate": (cfg.dim, cfg.exponent, cfg.solver_tol),
               "kernels": (cfg.smin, cfg.smax, cfg.quad_tol),
               "configure": (cfg.k, cfg.m, cfg.n, cfg.ell_target, cfg.max_m, cfg.dim),
               "assemble": (), "spectrum": (cfg.gap_ratio,), "report": (cfg.dim, cfg.gap_ratio)}[stage]
        return io.content_hash({"stage": stage, "own": own, "files": files})

    passed = False
    for idx, stage in enumerate(STAGES):
        try:
            if idx < first:
                missing = [str(p) for p in arts[stage] if not p.exists()]
                if missing:
                    raise InvalidParams(f"cannot resume at {start}: missing {', '.join(missing)}")
                continue
            h = inputs_for(stage)
            forced = start is not None and idx == first
            if not forced and stage != "report" and _cached(arts[stage], h):
                log.info("%s: cached", stage)
                continue
            log.info("%s: running", stage)
            if stage == "groundstate":
                do_groundstate(cfg.dim, cfg.exponent, arts[stage][0], solver_tol=cfg.solver_tol,
                               config_hash=chash, inputs_hash=h)
            elif stage == "kernels":
                do_kernels(arts["groundstate"][0], cfg.smin, cfg.smax, arts[stage][0], cfg.quad_tol, chash, h)
            elif stage == "configure":
                do_configure(arts["kernels"][0], cfg.k, cfg.m, cfg.n, arts[stage][0], cfg.dim, cfg.ell_target,
                             cfg.max_m, arts["groundstate"][0], chash, h)
            elif stage == "assemble":
                for w, p in zip(which, arts[stage]):
                    do_assemble(arts["configure"][0], w, p, chash, h)
            elif stage == "spectrum":
                for w, p in zip(which, arts[stage]):
                    do_spectrum(arts["configure"][0], w, p, out / f"det_{w}.csv", cfg.gap_ratio, chash, h)
            else:
                passed = do_report(arts["spectrum"], cfg.dim, arts[stage][0], cfg.gap_ratio, chash, h)
        except SpikeSpectraError as exc:
            exc.stage = stage
            raise
    return 0 if passed else 1


# ----------------------------------------------------------------------------
# argument parsing

def _add_run_flags(p: argparse.ArgumentParser) -> None:
    d = RunConfig()
    p.add_argument("--dim", type=int, default=d.dim)
    p.add_argument("--p", dest="exponent", type=float, default=d.exponent)
    p.add_argument("--k", type=int, default=d.k)
    p.add_argument("--m", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--ell-target", type=float)
    p.add_argument("--max-m", type=int, default=d.max_m)
    p.add_argument("--smin", type=float, default=d.smin)
    p.add_argument("--smax", type=float, default=d.smax)
    p.add_argument("--quad-tol", type=float, default=d.quad_tol)
    p.add_argument("--solver-tol", type=float, default=d.solver_tol)
    p.add_argument("--gap-ratio", type=float, default=d.gap_ratio)
    p.add_argument("--out-dir", default=d.out_dir)
    p.add_argument("--stage", choices=STAGES, help="resume at this stage using existing upstream artifacts")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spike-spectra", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("groundstate", help="solve for the radial ground state")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--r-max", type=float, default=40.0)
    p.add_argument("--solver-tol", type=float, default=1e-6)
    p.add_argument("--out", required=True)

    p = sub.add_parser("kernels", help="tabulate psi, psi1, psi2")
    p.add_argument("--profile", required=True)
    p.add_argument("--smin", type=float, default=6.0)
    p.add_argument("--smax", type=float, default=24.0)
    p.add_argument("--quad-tol", type=float, default=1e-9)
    p.add_argument("--out", required=True)

    p = sub.add_parser("configure", help="balance and build the spike configuration")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--m", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--ell-target", type=float)
    p.add_argument("--max-m", type=int, default=48)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--kernels", required=True)
    p.add_argument("--profile", help="attach the profile for direct-quadrature polishing")
    p.add_argument("--out", required=True)

    p = sub.add_parser("assemble", help="write M1 or Halpha as dense CSV with a block manifest")
    p.add_argument("--config", required=True)
    p.add_argument("--kernels", help="accepted for symmetry with the other stages; constants come from the config")
    p.add_argument("--which", choices=WHICH, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("spectrum", help="kernel count, gap and per-frequency determinants of one matrix")
    p.add_argument("--config", required=True)
    p.add_argument("--kernels")
    p.add_argument("--which", choices=WHICH, required=True)
    p.add_argument("--gap-ratio", type=float, default=GAP_RATIO)
    p.add_argument("--det-csv")
    p.add_argument("--out", required=True)

    p = sub.add_parser("report", help="aggregate spectra into the nondegeneracy verdict")
    p.add_argument("--spectra", nargs="+", required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--gap-ratio", type=float, default=GAP_RATIO)
    p.add_argument("--out", required=True)
    p.add_argument("--sweep", type=float, nargs="+", help="ell targets for a gap-vs-ell sweep")
    p.add_argument("--kernels", help="kernel table for --sweep")
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--sweep-out", default="gap_sweep.csv")

    p = sub.add_parser("run", help="run the whole pipeline")
    _add_run_flags(p)
    return ap


def _check_mn(m, n, ell_target):
    if m is None and ell_target is None:
        raise InvalidParams("give --m and --n, or --ell-target")
    if (m is None) != (n is None):
        raise InvalidParams("give both --m and --n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    cmd = args.command
    try:
        if cmd == "groundstate":
            do_groundstate(args.dim, args.p, args.out, args.step, args.r_max, args.solver_tol)
        elif cmd == "kernels":
            do_kernels(args.profile, args.smin, args.smax, args.out, args.quad_tol)
        elif cmd == "configure":
            if args.k < 7:
                raise InvalidParams(f"k = {args.k}: at least 7 sectors are required")
            _check_mn(args.m, args.n, args.ell_target)
            do_configure(args.kernels, args.k, args.m, args.n, args.out, args.dim, args.ell_target,
                         args.max_m, args.profile)
        elif cmd == "assemble":
            do_assemble(args.config, args.which, args.out)
        elif cmd == "spectrum":
            do_spectrum(args.config, args.which, args.out, args.det_csv, args.gap_ratio)
        elif cmd == "report":
            passed = do_report(args.spectra, args.dim, args.out, args.gap_ratio)
            if args.sweep:
                if not args.kernels:
                    raise InvalidParams("--sweep needs --kernels")
                rows = gap_sweep(load_table(args.kernels), args.k, args.sweep, args.dim, gap_ratio=args.gap_ratio)
                fit = {}
                if len(rows) >= 2:
                    for name in ("gap_M1", "gap_Halpha"):
                        gaps = [getattr(r, name) for r in rows]
                        if all(math.isfinite(g) and g > 0 for g in gaps):
                            fit[name] = gap_scaling_fit([r.ell for r in rows], gaps)
                io.write_rows_csv(args.sweep_out, ["ell_target", "m", "n", "ell", "gap_M1", "gap_Halpha", "passed"],
                                  [asdict(r).values() for r in rows])
                io.write_json(io.sidecar(args.sweep_out), {"fit_C_tau": fit}, "gap_sweep")
            print("PASS" if passed else "FAIL")
            return 0 if passed else 1
        else:
            cfg = RunConfig(args.dim, args.exponent, args.k, args.m, args.n, args.ell_target, args.max_m,
                            args.smin, args.smax, args.quad_tol, args.solver_tol, args.gap_ratio, args.out_dir)
            status = run_pipeline(cfg, args.stage)
            print("PASS" if status == 0 else "FAIL")
            return status
    except SpikeSpectraError as exc:
        where = f"{exc.stage or cmd}: "
        print(f"error: {where}{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
