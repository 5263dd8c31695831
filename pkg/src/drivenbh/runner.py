"""Task execution: sweeps, CSV serialization and the run manifest.

Output contract: identical configs produce byte-identical CSVs regardless
of worker count.  Floats are written with repr (shortest round-trip), rows
are ordered by grid index, and the manifest records the config hash, code
version, convergence statistics and any per-point failures.
"""

from __future__ import annotations

import json
import os

import numpy as np

from . import __version__
from .basis import ModelParams, seeded_mixed_state
from .config import RunConfig, config_hash, serialize_config
from .equilibrium import HardCoreParams, hc_bdg, hc_goldstone, sound_velocity
from .meanfield import (
    equilibrium_frequency,
    observables,
    phase_scan,
    propagate_to_ness,
)
from .response import build_response_map, default_omega_grid
from .spectrum import TrackingError, classify_branches, make_mode_set

__all__ = ["run", "RunOutcome"]


def _fmt(x) -> str:
    """Shortest round-trip decimal representation."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


class RunOutcome:
    def __init__(self, exit_code: int, manifest: dict, files: list[str]):
        self.exit_code = exit_code
        self.manifest = manifest
        self.files = files


def _grid_params(cfg: RunConfig):
    """Grid of model parameter sets plus the warm-start chains (inner axis)."""
    if not cfg.sweep:
        return [cfg.model], [[0]], [()]
    axes = [ax.values() for ax in cfg.sweep]
    names = [ax.param for ax in cfg.sweep]
    grid, coords = [], []
    if len(axes) == 1:
        for v in axes[0]:
            grid.append(cfg.model.with_(**{names[0]: float(v)}))
            coords.append((float(v),))
        chains = [list(range(len(grid)))]
    else:
        n_inner = len(axes[1])
        chains = []
        for i, v0 in enumerate(axes[0]):
            chain = []
            for j, v1 in enumerate(axes[1]):
                grid.append(cfg.model.with_(**{names[0]: float(v0),
                                               names[1]: float(v1)}))
                coords.append((float(v0), float(v1)))
                chain.append(i * n_inner + j)
            chains.append(chain)
    return grid, chains, coords


def _solve_single(cfg: RunConfig, p: ModelParams) -> NessResult:
    init = seeded_mixed_state(p.basis(cfg.n_max), cfg.seed_eps)
    return propagate_to_ness(init, p, cfg.integrator.opts())


def _task_ness(cfg: RunConfig, out_dir: str):
    p = cfg.model
    res = _solve_single(cfg, p)
    obs = observables(res.c0)
    rows = [
        ("n0", obs.n0), ("dn2", obs.dn2), ("Sz", obs.Sz),
        ("Re_Sminus", obs.Sminus.real), ("Im_Sminus", obs.Sminus.imag),
        ("purity", obs.purity), ("entropy", obs.entropy),
        ("rho_c", obs.rho_c),
        ("Re_psi0", res.psi0.real), ("Im_psi0", res.psi0.imag),
        ("abs_psi0", abs(res.psi0)), ("omega0", res.omega0),
        ("phase", res.phase), ("converged", res.converged),
        ("residual", res.residual), ("steps", res.steps),
    ]
    path = os.path.join(out_dir, "ness.csv")
    _write_csv(path, ["quantity", "value"], rows)
    stats = {"n_points": 1, "n_converged": int(res.converged)}
    failures = [] if res.converged else [
        {"point": 0, "error": f"not converged (residual {res.residual:g})"}]
    return [path], stats, failures


def _task_phase_diagram(cfg: RunConfig, out_dir: str, workers: int):
    grid, chains, _ = _grid_params(cfg)
    points = phase_scan(grid, cfg.integrator.opts(), warm_start=cfg.warm_start,
                        workers=workers, chains=chains, seed_eps=cfg.seed_eps,
                        n_max=cfg.n_max)
    rows, failures = [], []
    n_conv = 0
    for pt in points:
        if pt.error is not None:
            failures.append({"point": pt.index, "error": pt.error})
            continue
        res, obs = pt.result, pt.obs
        n_conv += int(res.converged)
        if not res.converged:
            failures.append({"point": pt.index,
                             "error": f"not converged (residual {res.residual:g})"})
        rows.append((pt.params.Omega, pt.params.J, obs.n0, abs(res.psi0),
                     res.omega0, obs.purity, obs.entropy, res.phase))
    path = os.path.join(out_dir, "phase_diagram.csv")
    _write_csv(path, ["Omega", "J", "n0", "abs_psi0", "omega0", "purity",
                      "entropy", "phase"], rows)
    n_warm = sum(1 for pt in points
                 if pt.result is not None and pt.result.warm_started)
    stats = {"n_points": len(grid), "n_converged": n_conv,
             "warm_start": cfg.warm_start, "n_warm_started": n_warm}
    # cold-start spot check: warm starting must not move the fixed point
    if cfg.warm_start and cfg.cold_check_fraction > 0 and len(grid) > 1:
        stride = max(1, round(1.0 / cfg.cold_check_fraction))
        dev = 0.0
        for pt in points[::stride]:
            if pt.error is not None or not pt.result.converged:
                continue
            cold = _solve_single(cfg, pt.params)
            if cold.converged:
                dev = max(dev, abs(abs(cold.psi0) - abs(pt.result.psi0)),
                          abs(observables(cold.c0).n0 - pt.obs.n0))
        stats["cold_check_max_deviation"] = dev
    return [path], stats, failures


def _task_spectrum(cfg: RunConfig, out_dir: str):
    p = cfg.model
    res = _solve_single(cfg, p)
    k_path = cfg.k_path.resolve(p.d)
    mode_sets = [make_mode_set(res, p, k) for k in k_path]
    failures = []
    try:
        bands = classify_branches(mode_sets, res, p)
    except TrackingError as exc:
        failures.append({"point": "tracking", "error": str(exc)})
        bands = None
    rows = []
    if bands is not None:
        for band in bands:
            for i, k in enumerate(k_path):
                w = band.omega[i]
                N, U, V = (band.weights[c][i] for c in "NUV")
                rows.append((i, *k, band.label, w.real, w.imag, N.real, N.imag,
                             U.real, U.imag, V.real, V.imag,
                             float(band.weights["C"][i].real)))
    else:
        for i, (k, ms) in enumerate(zip(k_path, mode_sets)):
            for a, w in enumerate(ms.eigenvalues):
                N, U, V = (ms.weights[c][a] for c in "NUV")
                label = "trace" if a == ms.trace_mode else "unlabeled"
                rows.append((i, *k, label, w.real, w.imag, N.real, N.imag,
                             U.real, U.imag, V.real, V.imag,
                             float(np.real(ms.weights["C"][a]))))
    d = p.d
    kcols = [f"k_{i}" for i in range(d)]
    path = os.path.join(out_dir, "spectrum.csv")
    _write_csv(path, ["k_index", *kcols, "branch_label", "Re_omega", "Im_omega",
                      "N_re", "N_im", "U_re", "U_im", "V_re", "V_im", "C"], rows)
    stats = {"n_points": len(k_path), "n_converged": int(res.converged),
             "phase": res.phase, "omega0": res.omega0}
    if not res.converged:
        failures.append({"point": "ness", "error": "not converged"})
    return [path], stats, failures


def _task_response(cfg: RunConfig, out_dir: str):
    p = cfg.model
    res = _solve_single(cfg, p)
    k_path = cfg.k_path.resolve(p.d)
    if cfg.omega_grid is not None:
        om = cfg.omega_grid.values()
    else:
        # rotating-frame frequencies: center at 0 in the broken phase, at
        # the effective chemical potential estimate in the normal phase
        center = 0.0 if res.phase == "SFP" else \
            equilibrium_frequency(p, observables(res.c0).n0)
        om = default_omega_grid(center, p.Gamma_p)
    rmap = build_response_map(res, p, k_path, om, cfg.eta_L, cfg.eta_R)
    rows = []
    for i in range(len(k_path)):
        for j, w in enumerate(om):
            rows.append((i, w, rmap.G_R[i, j].real, rmap.G_R[i, j].imag,
                         rmap.A[i, j], abs(rmap.T[i, j]) ** 2, rmap.absR2[i, j],
                         abs(rmap.F[i, j]) ** 2, rmap.sumrule_violation[i, j]))
    path = os.path.join(out_dir, "response.csv")
    _write_csv(path, ["k_index", "omega", "ReG", "ImG", "A", "absT2", "absR2",
                      "absF2", "sumrule_violation"], rows)
    stats = {"n_points": len(k_path) * om.size, "n_converged": int(res.converged),
             "phase": res.phase, "omega0": res.omega0,
             "dos_integral": rmap.dos_integral,
             "dos_deviation": rmap.dos_deviation}
    failures = [] if res.converged else [{"point": "ness", "error": "not converged"}]
    return [path], stats, failures


def _task_equilibrium(cfg: RunConfig, out_dir: str):
    eq = cfg.equilibrium
    hp = HardCoreParams(J=eq.J, omega_c=eq.omega_c, Ubar=eq.Ubar, z=eq.z)
    cs = sound_velocity(hp)
    rows, failures = [], []
    qs = np.linspace(0.0, eq.k_max, eq.k_count)
    for q in qs:
        k = tuple([float(q)] * hp.d)
        closed = hc_goldstone(hp, k)
        vals = hc_bdg(hp, k)
        numeric = float(np.max(vals.real))
        rows.append((float(q), closed, numeric, cs))
    path = os.path.join(out_dir, "equilibrium.csv")
    _write_csv(path, ["k", "omega_G_closed_form", "omega_G_numeric", "c_s"], rows)
    return [path], {"n_points": len(rows)}, failures


def run(cfg: RunConfig, out_dir: str | None = None,
        workers: int | None = None) -> RunOutcome:
    """Execute a configured task; writes CSV output plus manifest.json."""
    out_dir = cfg.output_dir if out_dir is None else out_dir
    if workers is None:
        env = os.environ.get("DRIVENBH_WORKERS")
        workers = cfg.workers or (int(env) if env else 1)
    os.makedirs(out_dir, exist_ok=True)
    if not os.access(out_dir, os.W_OK):
        raise OSError(f"output directory {out_dir!r} is not writable")

    if cfg.task == "ness":
        files, stats, failures = _task_ness(cfg, out_dir)
    elif cfg.task == "phase_diagram":
        files, stats, failures = _task_phase_diagram(cfg, out_dir, workers)
    elif cfg.task == "spectrum":
        files, stats, failures = _task_spectrum(cfg, out_dir)
    elif cfg.task == "response":
        files, stats, failures = _task_response(cfg, out_dir)
    elif cfg.task == "equilibrium":
        files, stats, failures = _task_equilibrium(cfg, out_dir)
    else:  # pragma: no cover - parse_config rejects unknown tasks
        raise ValueError(f"unknown task {cfg.task!r}")

    manifest = {
        "config_hash": config_hash(cfg),
        "code_version": __version__,
        "task": cfg.task,
        "stats": stats,
        "failures": failures,
        "outputs": [os.path.basename(f) for f in files],
    }
    mpath = os.path.join(out_dir, "manifest.json")
    with open(mpath, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    cpath = os.path.join(out_dir, "config.json")
    with open(cpath, "w", encoding="utf-8") as fh:
        fh.write(serialize_config(cfg) + "\n")
    return RunOutcome(1 if failures else 0, manifest, files + [mpath, cpath])
