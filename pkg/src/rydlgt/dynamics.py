"""Ground states, Krylov time evolution, and the experimental protocols.

Time-dependent evolution uses piecewise-constant steps with the schedule
sampled at the step midpoint; each step applies exp(-i H dt) through a
short Lanczos recurrence.  Protocol timings are stored as dimensionless
phases Omega_max * t so that the hardware values (3 us total sweep at
Omega/2pi = 2.5 MHz, etc.) are reproduced exactly at the physical drive
strength and rescale consistently in reduced units.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .errors import CapacityError, ConfigError, NumericalError
from .geometry import Geometry, interaction_graph
from .hamiltonian import (DriveSchedule, HamiltonianParams, PiecewiseLinear,
                          RydbergHamiltonian)
from .hilbert import BLOCKADED, BasisSpace, QuantumState, enumerate_basis
from .units import TWO_PI, c6_from_blockade_radius, mhz_to_rad

# Hardware protocol timings expressed as Omega_max * t [rad]; dividing by the
# actual Omega_max recovers the duration (3, 2.5, 1.5, 1.6, 0.4 us at
# Omega/2pi = 2.5 MHz).
OMEGA_MAX_REF = mhz_to_rad(2.5)
PREP_TOTAL_PHASE = 3.0 * OMEGA_MAX_REF
PREP_SWEEP_PHASE = 2.5 * OMEGA_MAX_REF
QUENCH_SWEEP_PHASE = 1.5 * OMEGA_MAX_REF
QUENCH_WINDOW_PHASE = 1.6 * OMEGA_MAX_REF
PROBE_PHASE = 0.4 * OMEGA_MAX_REF

DEFAULT_STEP_PHASE = 0.025       # Omega_max * dt per propagation step
DELTA_START_OVER_OMEGA = -2.5    # delta(0)/Omega of the detuning sweep

KRYLOV_TOL = 1e-12
KRYLOV_MAX_DIM = 40


def krylov_expm_apply(matvec, vec: np.ndarray, scale: complex,
                      tol: float = KRYLOV_TOL, m_max: int = KRYLOV_MAX_DIM):
    """exp(scale * H) @ vec for Hermitian H given through ``matvec``.

    Lanczos with full reorthogonalization; returns (result, residual, m).
    Raises NumericalError when m_max Krylov vectors cannot reach ``tol``.
    """
    beta0 = np.linalg.norm(vec)
    if beta0 == 0.0:
        return vec.copy(), 0.0, 0
    v = (vec / beta0).astype(np.complex128)
    basis = [v]
    alphas: list[float] = []
    betas: list[float] = []
    residual = np.inf
    y = None
    for m in range(1, m_max + 1):
        w = matvec(basis[-1])
        alpha = float(np.real(np.vdot(basis[-1], w)))
        w = w - alpha * basis[-1]
        if len(basis) > 1:
            w = w - betas[-1] * basis[-2]
        # full reorthogonalization keeps the tridiagonal honest
        for u in basis:
            w = w - np.vdot(u, w) * u
        alphas.append(alpha)
        beta = float(np.linalg.norm(w))
        t_mat = np.diag(alphas).astype(np.complex128)
        if len(alphas) > 1:
            off = np.array(betas)
            t_mat += np.diag(off, 1) + np.diag(off, -1)
        y = scipy.linalg.expm(scale * t_mat)[:, 0]
        residual = abs(beta * abs(scale) * y[-1])
        if residual < tol or beta < 1e-14:
            break
        betas.append(beta)
        basis.append(w / beta)
    else:
        raise NumericalError(
            f"Krylov exponential did not converge: residual {residual:.3e} > {tol:.1e} "
            f"after {m_max} vectors"
        )
    out = np.zeros_like(v)
    for coeff, u in zip(y, basis):
        out += coeff * u
    return beta0 * out, residual, len(alphas)


def ground_state(ham: RydbergHamiltonian, params: HamiltonianParams,
                 seed: int = 0, residual_tol: float = 1e-8,
                 maxiter: int | None = None) -> tuple[float, QuantumState]:
    """Lowest eigenpair of H at fixed drive values.

    Small bases go through dense diagonalization; larger ones use an
    implicitly restarted Lanczos iteration with a seeded start vector so
    degenerate ground spaces resolve deterministically.
    """
    dim = ham.dim
    real = params.phi == 0.0
    if dim <= 256:
        h = ham.dense(params, limit=max(dim, 256))
        vals, vecs = np.linalg.eigh(h)
        energy, psi = float(vals[0]), vecs[:, 0].astype(np.complex128)
    else:
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(dim)
        dtype = np.float64 if real else np.complex128
        op = scipy.sparse.linalg.LinearOperator(
            (dim, dim), matvec=ham.matvec(params), dtype=dtype)
        try:
            vals, vecs = scipy.sparse.linalg.eigsh(
                op, k=1, which="SA", v0=v0.astype(dtype),
                maxiter=maxiter or max(2000, 40 * dim // 100),
                tol=0.0)
        except scipy.sparse.linalg.ArpackNoConvergence as exc:
            raise NumericalError(f"ground-state Lanczos did not converge: {exc}") from exc
        energy, psi = float(vals[0]), vecs[:, 0].astype(np.complex128)
    psi = psi / np.linalg.norm(psi)
    residual = float(np.linalg.norm(ham.apply(psi, params) - energy * psi))
    if residual > residual_tol:
        raise NumericalError(
            f"ground-state residual {residual:.3e} exceeds tolerance {residual_tol:.1e}")
    # fix the global phase so runs are bit-reproducible
    k = int(np.argmax(np.abs(psi)))
    phase = psi[k] / abs(psi[k])
    psi = psi / phase
    return energy, QuantumState(ham.basis, psi)


@dataclass
class Trajectory:
    """Sampled time evolution: states and/or observable records per sample."""

    times: np.ndarray
    schedule: DriveSchedule
    basis_mode: str
    states: list[np.ndarray] | None = None
    records: list[dict] | None = None
    norm_drift: float = 0.0
    renorm_events: list[tuple[float, float]] = field(default_factory=list)
    seed: int | None = None

    def state(self, k: int, basis: BasisSpace) -> QuantumState:
        return QuantumState(basis, self.states[k])


def evolve(ham: RydbergHamiltonian, psi0: QuantumState, schedule: DriveSchedule,
           dt: float, sample_times, keep_states: bool = True, observer=None,
           krylov_tol: float = KRYLOV_TOL, m_max: int = KRYLOV_MAX_DIM) -> Trajectory:
    """Propagate under the schedule, sampling at the requested times.

    ``dt`` is the maximum step; the walk always lands exactly on sample
    times.  Norm drift beyond 1e-10 per step is recorded (renormalization is
    logged in the trajectory, never silent).
    """
    if psi0.basis is not ham.basis:
        raise ConfigError("initial state and Hamiltonian live on different bases")
    sample_times = np.atleast_1d(np.asarray(sample_times, dtype=float))
    if np.any(sample_times < 0) or np.any(sample_times > schedule.t_end + 1e-12):
        raise ConfigError("sample times must lie within [0, t_end]")
    if np.any(np.diff(sample_times) <= 0):
        raise ConfigError("sample times must be strictly increasing")
    if dt <= 0:
        raise ConfigError(f"step size must be positive, got {dt}")

    psi = psi0.amplitudes.astype(np.complex128).copy()
    t = 0.0
    drift = 0.0
    renorms: list[tuple[float, float]] = []
    states: list[np.ndarray] | None = [] if keep_states else None
    records: list[dict] | None = [] if observer else None

    def take_sample(t_now: float):
        if states is not None:
            states.append(psi.copy())
        if observer is not None:
            records.append(observer(t_now, psi))

    for target in sample_times:
        while t < target - 1e-12:
            step = min(dt, target - t)
            omega, delta, phi, delta0 = schedule.sample(t + 0.5 * step)
            params = HamiltonianParams(omega, delta, phi, delta0)
            psi, _, _ = krylov_expm_apply(
                lambda v: ham.apply(v, params), psi, -1j * step,
                tol=krylov_tol, m_max=m_max)
            norm = np.linalg.norm(psi)
            err = abs(norm - 1.0)
            drift += err
            if err > 1e-10:
                renorms.append((t + step, err))
            psi /= norm
            t += step
        take_sample(target)

    return Trajectory(times=sample_times, schedule=schedule, basis_mode=ham.basis.mode,
                      states=states, records=records, norm_drift=drift,
                      renorm_events=renorms)


def evolve_dense(ham: RydbergHamiltonian, psi0: QuantumState, schedule: DriveSchedule,
                 dt: float, sample_times) -> Trajectory:
    """Oracle propagator: same stepping, dense matrix exponential per step."""
    sample_times = np.atleast_1d(np.asarray(sample_times, dtype=float))
    psi = psi0.amplitudes.astype(np.complex128).copy()
    t = 0.0
    states = []
    for target in sample_times:
        while t < target - 1e-12:
            step = min(dt, target - t)
            omega, delta, phi, delta0 = schedule.sample(t + 0.5 * step)
            h = ham.dense(HamiltonianParams(omega, delta, phi, delta0))
            psi = scipy.linalg.expm(-1j * step * h) @ psi
            t += step
        states.append(psi.copy())
    return Trajectory(times=sample_times, schedule=schedule,
                      basis_mode=ham.basis.mode, states=states)


# -- experimental protocols -------------------------------------------------

def sweep_schedule(omega_max: float, delta_final: float,
                   delta_start: float | None = None,
                   t_total: float | None = None,
                   t_sweep: float | None = None) -> DriveSchedule:
    """Quasi-adiabatic preparation ramp: Omega up, then a linear delta sweep."""
    if delta_start is None:
        delta_start = DELTA_START_OVER_OMEGA * omega_max
    if t_total is None:
        t_total = PREP_TOTAL_PHASE / omega_max
    if t_sweep is None:
        t_sweep = PREP_SWEEP_PHASE / omega_max
    if not 0 < t_sweep < t_total:
        raise ConfigError(f"sweep time {t_sweep} must lie inside the total {t_total}")
    t_ramp = t_total - t_sweep
    omega = PiecewiseLinear([(0.0, 0.0), (t_ramp, omega_max), (t_total, omega_max)])
    delta = PiecewiseLinear([(0.0, delta_start), (t_ramp, delta_start), (t_total, delta_final)])
    return DriveSchedule(omega=omega, delta=delta, t_end=t_total)


def default_step(omega_max: float, step_phase: float = DEFAULT_STEP_PHASE) -> float:
    """The default propagation step dt = 0.025/Omega_max."""
    return step_phase / omega_max


def prepare_by_sweep(ham: RydbergHamiltonian, omega_max: float, delta_final: float,
                     delta_start: float | None = None, t_total: float | None = None,
                     t_sweep: float | None = None, dt: float | None = None) -> QuantumState:
    """Run the global detuning sweep from the all-ground state."""
    sched = sweep_schedule(omega_max, delta_final, delta_start, t_total, t_sweep)
    if dt is None:
        dt = default_step(omega_max)
    psi0 = QuantumState.basis_state(ham.basis, 0)
    traj = evolve(ham, psi0, sched, dt, [sched.t_end])
    return QuantumState(ham.basis, traj.states[-1])


def sweep_prepare(geom: Geometry, r_b: float, delta_final_over_omega: float,
                  omega_max: float = 1.0, basis_mode: str = BLOCKADED,
                  cutoff_over_a: float = 3.0, dt: float | None = None,
                  t_total: float | None = None, t_sweep: float | None = None) -> QuantumState:
    """Convenience wrapper building basis and couplings from (geom, R_b)."""
    basis = enumerate_basis(geom, basis_mode)
    c6 = c6_from_blockade_radius(r_b * geom.a, omega_max)
    ham = RydbergHamiltonian(basis, interaction_graph(geom, c6, cutoff_over_a * geom.a))
    return prepare_by_sweep(ham, omega_max, delta_final_over_omega * omega_max,
                            dt=dt, t_total=t_total, t_sweep=t_sweep)


def assisted_prepare(ham: RydbergHamiltonian, target_bits: str, omega_max: float,
                     delta_final: float, delta_start: float | None = None,
                     t_total: float | None = None, t_sweep: float | None = None,
                     dt: float | None = None) -> tuple[QuantumState, float]:
    """Sweep with a local-detuning pattern pinning the target's ground atoms.

    c_l = 1 on atoms that are |g> in the target; delta0(t) tracks the global
    sweep so the effective detuning of those atoms stays at its initial
    negative value, then returns abruptly to zero at the end.  Returns the
    prepared state and its fidelity |<target|psi>|^2.
    """
    basis = ham.basis
    n = basis.n_atoms
    if len(target_bits) != n:
        raise ConfigError(f"target length {len(target_bits)} != atom count {n}")
    code = int(target_bits, 2)
    if not basis.contains(code):
        raise ConfigError("target bitstring violates the blockade constraint")
    bits = np.frombuffer(target_bits.encode(), dtype=np.uint8) - ord("0")
    pattern = 1.0 - bits.astype(float)

    sched = sweep_schedule(omega_max, delta_final, delta_start, t_total, t_sweep)
    t_ramp = sched.t_end - (t_sweep if t_sweep is not None else PREP_SWEEP_PHASE / omega_max)
    d0_final = max(0.0, sched.delta(sched.t_end) - sched.delta(0.0))
    sched = DriveSchedule(
        omega=sched.omega, delta=sched.delta, t_end=sched.t_end,
        delta0=PiecewiseLinear([(0.0, 0.0), (max(t_ramp, 1e-9), 0.0), (sched.t_end, d0_final)]),
        pattern=pattern)

    ham_p = ham.with_pattern(pattern)
    if dt is None:
        dt = default_step(omega_max)
    psi0 = QuantumState.basis_state(basis, 0)
    traj = evolve(ham_p, psi0, sched, dt, [sched.t_end])
    psi = QuantumState(basis, traj.states[-1])
    fidelity = float(np.abs(psi.amplitudes[basis.index_of(code)]) ** 2)
    return psi, fidelity


def quench(ham_with_pattern: RydbergHamiltonian, psi0: QuantumState, delta0: float,
           omega_max: float, delta: float, sample_times, dt: float | None = None,
           observer=None, keep_states: bool = True,
           m_max: int = KRYLOV_MAX_DIM) -> Trajectory:
    """Constant-drive evolution after abruptly switching on the local pattern."""
    sample_times = np.atleast_1d(np.asarray(sample_times, dtype=float))
    t_end = float(sample_times[-1]) if sample_times[-1] > 0 else 1e-9
    sched = DriveSchedule(
        omega=PiecewiseLinear.constant(omega_max),
        delta=PiecewiseLinear.constant(delta),
        delta0=PiecewiseLinear.constant(delta0),
        pattern=ham_with_pattern.pattern,
        t_end=t_end)
    if dt is None:
        dt = default_step(omega_max)
    return evolve(ham_with_pattern, psi0, sched, dt, sample_times,
                  keep_states=keep_states, observer=observer, m_max=m_max)


def adiabaticity_metric(schedule: DriveSchedule) -> float:
    """Peak |d delta/dt| in units of the adiabatic criterion rate Omega^2/2pi."""
    omega_max = schedule.omega.max_value()
    if omega_max <= 0.0:
        raise ConfigError("schedule never turns the drive on")
    r0 = omega_max**2 / TWO_PI
    return schedule.delta.max_abs_slope() / r0
