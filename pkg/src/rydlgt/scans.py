"""Grid drivers: equilibrium phase diagrams and quench-resonance scans.

Scans are embarrassingly parallel over grid points.  Every point derives its
random stream from SeedSequence((seed, point_index)), and results are
assembled in grid order, so outputs are byte-identical for any worker count.
"""

from dataclasses import dataclass, field
import multiprocessing

import numpy as np
import scipy.optimize

from .errors import ConfigError, NumericalError
from .geometry import Geometry, interaction_graph
from .hamiltonian import HamiltonianParams, RydbergHamiltonian
from .hilbert import BLOCKADED, BasisSpace, QuantumState, enumerate_basis
from .dynamics import (PROBE_PHASE, QUENCH_SWEEP_PHASE, HamiltonianParams,
                       default_step, ground_state, prepare_by_sweep, quench)
from .lgt import (BROKEN, CHARGES, enumerate_strings, quench_pattern,
                  string_region, total_string_probability)
from .stats import (FilterRegion, clopper_pearson, sample_shots,
                    state_probabilities, string_probabilities)
from .units import c6_from_blockade_radius


@dataclass
class ScanResult:
    """Rectangular grid of observables plus metadata.

    ``points`` is row-major over the axes in declaration order; every row is
    a flat dict of floats.
    """

    axes: dict
    points: list
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([p.get(name, np.nan) for p in self.points])

    def grid(self, name: str) -> np.ndarray:
        shape = tuple(len(v) for v in self.axes.values())
        return self.column(name).reshape(shape)

    def validate(self):
        for p in self.points:
            for key, val in p.items():
                if key.startswith("p_") and not (-1e-12 <= val <= 1.0 + 1e-12):
                    raise NumericalError(f"probability {key}={val} outside [0, 1]")


def point_seed(seed: int, index: int) -> int:
    """Counter-based per-point seed; independent of worker scheduling."""
    return int(np.random.SeedSequence((seed, index)).generate_state(1)[0])


def _probability_row(state: QuantumState, configs, region: FilterRegion,
                     n_shots: int, seed: int) -> dict:
    row: dict[str, float] = {}
    if n_shots > 0:
        shots = sample_shots(state, n_shots, seed)
        table = string_probabilities(shots, configs, region)
        for label, (k, n, p) in table.items():
            lo, hi = clopper_pearson(k, n)
            row[f"p_{label}"] = p
            row[f"ci_low_{label}"] = lo
            row[f"ci_high_{label}"] = hi
        row["p_s"] = total_string_probability(table)
    else:
        table = state_probabilities(state, configs, region)
        for label, p in table.items():
            row[f"p_{label}"] = p
        row["p_s"] = total_string_probability(table)
    row["p_b"] = row.pop(f"p_{BROKEN}")
    if f"p_{CHARGES}" in row:
        row["p_c"] = row.pop(f"p_{CHARGES}")
    return row


# Module-level context inherited by forked workers; avoids re-pickling the
# heavy basis tables per task.
_CTX: dict = {}


def _phase_point(task):
    index, i_rb, i_delta = task
    ctx = _CTX
    geom: Geometry = ctx["geom"]
    basis: BasisSpace = ctx["basis"]
    r_b = ctx["rb_values"][i_rb]
    delta = ctx["delta_values"][i_delta] * ctx["omega"]
    ham = _ctx_ham(r_b)
    seed = point_seed(ctx["seed"], index)
    if ctx["method"] == "ground_state":
        energy, state = ground_state(ham, HamiltonianParams(ctx["omega"], delta), seed=seed)
    else:
        state = prepare_by_sweep(ham, ctx["omega"], delta, dt=ctx["dt"],
                                 t_total=ctx.get("t_total"), t_sweep=ctx.get("t_sweep"))
        energy = float(np.real(np.vdot(state.amplitudes,
                                       ham.apply(state.amplitudes, HamiltonianParams(ctx["omega"], delta)))))
    row = {"R_b": float(r_b), "delta_over_omega": float(ctx["delta_values"][i_delta]),
           "energy": energy}
    row.update(_probability_row(state, ctx["configs"], ctx["region"],
                                ctx["n_shots"], seed))
    return index, row


def _ctx_ham(r_b: float) -> RydbergHamiltonian:
    cache = _CTX.setdefault("_ham_cache", {})
    if r_b not in cache:
        geom = _CTX["geom"]
        c6 = c6_from_blockade_radius(r_b * geom.a, _CTX["omega"])
        couplings = interaction_graph(geom, c6, _CTX["cutoff_over_a"] * geom.a)
        cache[r_b] = RydbergHamiltonian(_CTX["basis"], couplings)
    return cache[r_b]


def _run_tasks(worker, tasks, workers: int):
    if workers <= 1:
        results = [worker(t) for t in tasks]
    else:
        with multiprocessing.get_context("fork").Pool(workers) as pool:
            results = pool.map(worker, tasks)
    return [row for _, row in sorted(results, key=lambda kv: kv[0])]


def scan_phase_diagram(geom: Geometry, rb_values, delta_over_omega_values,
                       method: str = "ground_state", omega: float = 1.0,
                       basis_mode: str = BLOCKADED, cutoff_over_a: float = 3.0,
                       n_shots: int = 0, seed: int = 0, workers: int = 1,
                       dt: float | None = None, t_total: float | None = None,
                       t_sweep: float | None = None) -> ScanResult:
    """p_s / p_b over an (R_b, delta/Omega) grid.

    ``method='ground_state'`` reproduces the theory panels from exact ground
    states; ``'sweep'`` emulates the quasi-adiabatic experimental protocol.
    With ``n_shots > 0`` probabilities come from sampled snapshots with
    Clopper-Pearson intervals, otherwise they are exact Born probabilities.
    """
    if method not in ("ground_state", "sweep"):
        raise ConfigError(f"unknown phase-scan method {method!r}")
    rb_values = np.atleast_1d(np.asarray(rb_values, dtype=float))
    delta_values = np.atleast_1d(np.asarray(delta_over_omega_values, dtype=float))
    basis = enumerate_basis(geom, basis_mode)
    configs = enumerate_strings(geom)
    region = FilterRegion(string_region(geom), name="string-support")

    _CTX.clear()
    _CTX.update(geom=geom, basis=basis, configs=configs, region=region,
                rb_values=rb_values, delta_values=delta_values, omega=omega,
                cutoff_over_a=cutoff_over_a, n_shots=n_shots, seed=seed,
                method=method, dt=dt if dt is not None else default_step(omega),
                t_total=t_total, t_sweep=t_sweep)
    tasks = [(k, i, j)
             for k, (i, j) in enumerate((i, j)
                                        for i in range(len(rb_values))
                                        for j in range(len(delta_values)))]
    rows = _run_tasks(_phase_point, tasks, workers)
    result = ScanResult(
        axes={"R_b": rb_values, "delta_over_omega": delta_values},
        points=rows,
        meta={"method": method, "basis_mode": basis_mode, "omega": omega,
              "n_shots": n_shots, "seed": seed, "geometry_atoms": geom.n_atoms,
              "basis_size": basis.size})
    result.validate()
    return result


def _resonance_point(task):
    index, i_d0 = task
    ctx = _CTX
    delta0 = ctx["delta0_values"][i_d0] * ctx["omega"]
    seed = point_seed(ctx["seed"], index)
    psi0 = QuantumState(ctx["basis"], ctx["prepared"])
    traj = quench(ctx["ham_pattern"], psi0, delta0, ctx["omega"], ctx["delta"],
                  [ctx["t_probe"]], dt=ctx["dt_quench"], keep_states=True)
    state = QuantumState(ctx["basis"], traj.states[-1])
    row = {"delta0_over_omega": float(ctx["delta0_values"][i_d0])}
    row.update(_probability_row(state, ctx["configs"], ctx["region"],
                                ctx["n_shots"], seed))
    return index, row


def gaussian_peak_fit(x: np.ndarray, y: np.ndarray, n_points: int | None = None) -> dict:
    """Nonlinear least-squares Gaussian (amplitude/center/width/offset).

    Follows the published analysis: the fit may be restricted to the first
    ``n_points`` grid points; the initial center guess is the argmax (ties
    resolve to the smallest x).  A maximum on the boundary of the fitted
    range is flagged unreliable.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if n_points is not None:
        x, y = x[:n_points], y[:n_points]
    if len(x) < 4:
        raise ConfigError(f"Gaussian fit needs >= 4 points, got {len(x)}")

    def model(t, amp, center, width, offset):
        return offset + amp * np.exp(-0.5 * ((t - center) / width) ** 2)

    k_max = int(np.argmax(y))
    p0 = [float(y.max() - y.min()), float(x[k_max]),
          float((x.max() - x.min()) / 4.0) or 1.0, float(y.min())]
    flags = []
    if k_max in (0, len(x) - 1):
        flags.append("peak_at_edge")
    try:
        popt, pcov = scipy.optimize.curve_fit(
            model, x, y, p0=p0,
            bounds=([0.0, x.min() - (x.max() - x.min()), 1e-9, -1.0],
                    [np.inf, x.max() + (x.max() - x.min()), np.inf, 1.0]),
            maxfev=20000)
        perr = np.sqrt(np.clip(np.diag(pcov), 0.0, np.inf))
        return {"ok": not flags, "flags": flags,
                "amplitude": float(popt[0]), "center": float(popt[1]),
                "width": float(abs(popt[2])), "offset": float(popt[3]),
                "amplitude_err": float(perr[0]), "center_err": float(perr[1]),
                "width_err": float(perr[2]), "offset_err": float(perr[3]),
                "n_points": len(x)}
    except RuntimeError as exc:
        flags.append("fit_failed")
        return {"ok": False, "flags": flags, "error": str(exc), "n_points": len(x)}


def scan_resonance(geom: Geometry, delta0_over_omega_values, r_b: float,
                   delta_over_omega: float, omega: float = 1.0,
                   t_probe: float | None = None, basis_mode: str = BLOCKADED,
                   cutoff_over_a: float = 3.0, n_shots: int = 0, seed: int = 0,
                   workers: int = 1, dt_prep: float | None = None,
                   dt_quench: float | None = None, fit_points: int | None = 6,
                   prepared: QuantumState | None = None,
                   t_sweep: float | None = None, t_total: float | None = None) -> tuple[ScanResult, dict]:
    """Many-body resonance spectroscopy: p_b and p_c at a fixed time after
    quenching to each local-detuning value.

    The initial state is prepared once by the (shortened) quasi-adiabatic
    sweep and shared across the grid; the quench pattern promotes the broken
    string.  Returns the scan and a Gaussian fit of the rising p_b points.
    """
    delta0_values = np.atleast_1d(np.asarray(delta0_over_omega_values, dtype=float))
    if t_probe is None:
        t_probe = PROBE_PHASE / omega
    basis = enumerate_basis(geom, basis_mode)
    configs = enumerate_strings(geom)
    region = FilterRegion(string_region(geom), name="string-support")
    pattern = quench_pattern(geom)
    c6 = c6_from_blockade_radius(r_b * geom.a, omega)
    couplings = interaction_graph(geom, c6, cutoff_over_a * geom.a)
    ham = RydbergHamiltonian(basis, couplings, pattern)
    delta = delta_over_omega * omega

    if prepared is None:
        if t_sweep is None:
            t_sweep = QUENCH_SWEEP_PHASE / omega
        prepared = prepare_by_sweep(ham, omega, delta, dt=dt_prep,
                                    t_sweep=t_sweep, t_total=t_total)

    _CTX.clear()
    _CTX.update(basis=basis, configs=configs, region=region, ham_pattern=ham,
                prepared=prepared.amplitudes, delta0_values=delta0_values,
                omega=omega, delta=delta, t_probe=t_probe,
                dt_quench=dt_quench, n_shots=n_shots, seed=seed)
    tasks = list(enumerate(range(len(delta0_values))))
    rows = _run_tasks(_resonance_point, tasks, workers)
    result = ScanResult(
        axes={"delta0_over_omega": delta0_values},
        points=rows,
        meta={"r_b": r_b, "delta_over_omega": delta_over_omega, "omega": omega,
              "t_probe": t_probe, "basis_mode": basis_mode, "seed": seed,
              "n_shots": n_shots, "geometry_atoms": geom.n_atoms,
              "basis_size": basis.size})
    result.validate()
    fit = gaussian_peak_fit(delta0_values, result.column("p_b"), n_points=fit_points)
    return result, fit
