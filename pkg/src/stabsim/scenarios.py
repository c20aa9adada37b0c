"""End-to-end stabilization scenarios, sweeps, fitting, and report output.

Scenario runs build the displaced-cavity dispersive model, integrate the
master equation over the configured window, and solve for the steady state.
Qubit-subspace quantities (basis populations, eigenstate populations, target
fidelity) are expectation values of qubit projectors tensored with the
resonator identity, which equals evaluating them on the resonator-traced
state.

A decoherence-free configuration has no unique physical steady state on
experimental timescales: population leaks into effectively dark states
(e.g. the doubly excited qubit state) only through very weak higher-order
processes, so the mathematical kernel of the generator is reached after
~1e4 us and is not what an experiment sees.  For such configs the reported
steady fidelity is the trajectory plateau (tail average of an extended
run), and the method is recorded as ``trajectory_plateau``.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.optimize import curve_fit

from .device import (
    ResonatorDrive, PumpDrive, ScenarioConfig, derive_rates,
    scenario_to_jsonable,
)
from .hamiltonian import (
    HamiltonianModel, build_collapse_set, build_dispersive,
    named_qubit_state, qubit_space, single_excitation_modes,
)
from .hilbert import (
    CompositeSpace, DensityMatrix, LinearOperator, basis_state,
    coherent_state, identity_op, lowering_op, partial_trace,
)
from .lindblad import build_liouvillian, evolve, steady_state

#: extension of the time window used to read off a plateau when the
#: configuration has no decoherence (us)
PLATEAU_WINDOW = 30.0


class DegenerateDataError(ValueError):
    """Fit input carries no usable signal (e.g. constant trace)."""


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExponentialFit:
    rate: float        # 1/tau, 1/us
    asymptote: float
    amplitude: float
    residual: float

    @property
    def tau(self) -> float:
        return 1.0 / self.rate


def fit_exponential(times, values) -> ExponentialFit:
    """Least-squares fit of a + b exp(-t/tau); returns the rate 1/tau."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size < 5:
        raise ValueError("at least 5 samples required")
    if np.ptp(values) < 1e-12:
        raise DegenerateDataError("constant trace cannot determine a rate")
    span = times[-1] - times[0]

    def model(t, a, b, tau):
        return a + b * np.exp(-t / tau)

    p0 = (values[-1], values[0] - values[-1], max(span / 5.0, 1e-3))
    try:
        popt, _ = curve_fit(model, times, values, p0=p0, maxfev=20000,
                            bounds=([-np.inf, -np.inf, 1e-6],
                                    [np.inf, np.inf, np.inf]))
    except RuntimeError as exc:
        raise FitError(f"exponential fit did not converge: {exc}") from exc
    a, b, tau = popt
    resid = float(np.sqrt(np.mean((model(times, *popt) - values) ** 2)))
    return ExponentialFit(rate=1.0 / tau, asymptote=float(a),
                          amplitude=float(b), residual=resid)


# -- readout mitigation --------------------------------------------------------

@dataclass(frozen=True)
class ReadoutMatrix:
    """Column-stochastic matrix of measured-given-prepared populations."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", m)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("readout matrix must be square")
        if (m < -1e-12).any() or (m > 1 + 1e-12).any():
            raise ValueError("entries must lie in [0, 1]")
        if np.abs(m.sum(axis=0) - 1.0).max() > 1e-6:
            raise ValueError("columns must sum to 1 within 1e-6")

    @property
    def condition_number(self) -> float:
        return float(np.linalg.cond(self.matrix))


def apply_readout_mitigation(m: ReadoutMatrix, measured) -> np.ndarray:
    """Recover prepared populations: M^-1 @ measured, clipped and renormalized.

    Negative entries produced by the inversion are unphysical statistical
    artifacts; they are clipped to zero and the vector renormalized.
    """
    measured = np.asarray(measured, dtype=float)
    if measured.shape != (m.matrix.shape[0],):
        raise ValueError("measured vector length does not match matrix")
    if m.condition_number > 1e12:
        raise np.linalg.LinAlgError("readout matrix is singular")
    raw = np.linalg.solve(m.matrix, measured)
    clipped = np.clip(raw, 0.0, None)
    total = clipped.sum()
    if total == 0:
        raise ValueError("mitigated vector vanished after clipping")
    return clipped / total


# -- scenario plumbing -----------------------------------------------------------

def _qubit_projector(full_space: CompositeSpace, qspace: CompositeSpace,
                     psi_q: np.ndarray) -> LinearOperator:
    """|psi><psi| on the qubit factor, identity on resonators."""
    proj = sp.csr_matrix(np.outer(psi_q, psi_q.conj()))
    res_dim = full_space.total_dim // qspace.total_dim
    mat = sp.kron(proj, sp.identity(res_dim, format="csr"), format="csr")
    return LinearOperator(full_space, mat)


def _lab_photon_operator(model: HamiltonianModel, res_index: int) -> LinearOperator:
    """Lab-frame photon number of resonator i, valid in the displaced frame."""
    space = model.space
    L = space.n_qubits
    c = lowering_op(space, L + res_index)
    n = c.dag() @ c
    if not model.displaced:
        return n
    a = model.alphas[res_index]
    return n + a * c.dag() + np.conj(a) * c + (abs(a) ** 2) * identity_op(space)


def _qubit_state_labels(n: int) -> list[str]:
    return ["".join("e" if (idx >> (n - 1 - k)) & 1 else "g" for k in range(n))
            for idx in range(2 ** n)]


def _eigenstate_labels(n: int) -> list[str]:
    return ["T", "S"] if n == 2 else (["W", "A", "B"] if n == 3 else [])


def _initial_qubit_vector(config: ScenarioConfig, qspace: CompositeSpace,
                          initial) -> np.ndarray:
    if initial is None:
        initial = config.initial_state
    if isinstance(initial, str):
        if initial == "ground":
            initial = "g" * config.n_qubits
        return named_qubit_state(qspace, initial)
    occ = tuple(initial)
    return basis_state(qspace, occ)


def initial_density(config: ScenarioConfig, model: HamiltonianModel,
                    initial=None) -> DensityMatrix:
    """Initial state: chosen qubit state, resonators empty in the lab frame.

    In the displaced frame an empty lab resonator is the coherent state at
    minus the classical drive amplitude.
    """
    qspace = qubit_space(config)
    psi_q = _initial_qubit_vector(config, qspace, initial)
    space = model.space
    res_factors = []
    for i in range(space.n_resonators):
        dim = space.modes[space.n_qubits + i].dim
        if model.displaced and model.alphas and model.alphas[i] != 0:
            res_factors.append(coherent_state(dim, -model.alphas[i]))
        else:
            res_factors.append(basis_state_1d(dim, 0))
    psi = psi_q
    for f in res_factors:
        psi = np.kron(psi, f)
    return DensityMatrix.from_state_vector(space, psi)


def basis_state_1d(dim: int, n: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[n] = 1.0
    return v


def _has_qubit_decoherence(config: ScenarioConfig) -> bool:
    for q in config.qubits:
        g1, gphi = derive_rates(q, config.dephasing_convention)
        if g1 > 0 or gphi > 0:
            return True
    return False


def _scenario_observables(config: ScenarioConfig, model: HamiltonianModel,
                          target: str) -> dict:
    qspace = qubit_space(config)
    space = model.space
    obs: dict = {}
    for label in _qubit_state_labels(config.n_qubits):
        obs[f"P_{label}"] = _qubit_projector(space, qspace,
                                             named_qubit_state(qspace, label))
    for label in _eigenstate_labels(config.n_qubits):
        obs[f"P_{label}"] = _qubit_projector(space, qspace,
                                             named_qubit_state(qspace, label))
    obs["F_target"] = _qubit_projector(space, qspace,
                                       named_qubit_state(qspace, target))
    for i, res in enumerate(config.resonators):
        obs[f"n_{res.label}"] = _lab_photon_operator(model, i)
    return obs


@dataclass
class ScenarioReport:
    scenario: str
    target: str
    config: dict
    times: np.ndarray
    traces: dict[str, np.ndarray]
    steady_fidelity: float
    steady_method: str
    steady_residual: float
    fitted_rate: float | None
    fitted_tau: float | None
    diagnostics: dict = field(default_factory=dict)

    def to_jsonable(self) -> dict:
        return {
            "scenario": self.scenario,
            "target": self.target,
            "steady_fidelity": self.steady_fidelity,
            "steady_method": self.steady_method,
            "steady_residual": self.steady_residual,
            "fitted_rate_per_us": self.fitted_rate,
            "fitted_tau_us": self.fitted_tau,
            "diagnostics": self.diagnostics,
            "config": self.config,
        }


def _run_scenario(config: ScenarioConfig, target: str, scenario_name: str,
                  initial=None) -> ScenarioReport:
    model = build_dispersive(config, displaced=True)
    collapse = build_collapse_set(config, space=model.space)
    liouv = build_liouvillian(model.H, collapse)
    rho0 = initial_density(config, model, initial)
    obs = _scenario_observables(config, model, target)

    decohering = _has_qubit_decoherence(config)
    t_end = config.t_final if decohering else max(config.t_final, PLATEAU_WINDOW)
    n_pts = int(round(t_end / config.t_step)) + 1
    t_grid = np.linspace(0.0, t_end, n_pts)
    result = evolve(liouv, rho0, t_grid, rtol=config.solver.rtol,
                    atol=config.solver.atol, observables=obs,
                    snapshot_times=[t_grid[-1]])

    fid = np.real(np.asarray(result.observables["F_target"], dtype=complex))
    if (fid < -1e-9).any() or (fid > 1 + 1e-9).any():
        raise RuntimeError("target fidelity left [0, 1]")

    if decohering:
        # final trajectory state warm-starts the long-time method
        last = result.snapshots[-1][1]
        steadym = steady_state(
            liouv, method=config.solver.steady_method,
            tol=config.solver.steady_tol,
            nullspace_max_dim=config.solver.nullspace_max_dim,
            rho0=last, max_time=config.solver.long_time_max,
            rtol=config.solver.rtol, atol=config.solver.atol)
        reduced = partial_trace(steadym.rho, range(config.n_qubits))
        qspace = reduced.space
        psi_t = named_qubit_state(qspace, target)
        steady_fid = float(np.real(np.vdot(psi_t, reduced.matrix @ psi_t)))
        steady_method = steadym.method
        steady_res = steadym.residual
    else:
        tail = fid[t_grid >= 0.8 * t_end]
        steady_fid = float(tail.mean())
        steady_method = "trajectory_plateau"
        steady_res = float(np.ptp(tail))

    window = t_grid <= config.t_final
    fitted_rate = fitted_tau = None
    try:
        f = fit_exponential(t_grid[window], fid[window])
        fitted_rate, fitted_tau = f.rate, f.tau
    except (DegenerateDataError, FitError):
        pass

    traces = {k: np.real(np.asarray(v, dtype=complex))
              for k, v in result.observables.items()}
    return ScenarioReport(
        scenario=scenario_name,
        target=target,
        config=scenario_to_jsonable(config),
        times=t_grid,
        traces=traces,
        steady_fidelity=steady_fid,
        steady_method=steady_method,
        steady_residual=steady_res,
        fitted_rate=fitted_rate,
        fitted_tau=fitted_tau,
        diagnostics=dict(result.diagnostics),
    )


CHANNEL_CHOICES = ("R1", "R2", "both")
PUMP_CHOICES = ("P1", "P1+P2")


def _select_channels(config: ScenarioConfig, channels: str) -> ScenarioConfig:
    if channels == "both":
        return config
    if channels not in CHANNEL_CHOICES:
        raise ValueError(f"channels must be one of {CHANNEL_CHOICES}")
    keep = int(channels[1:]) - 1
    raman = tuple(
        drv if i == keep else ResonatorDrive(detuning=drv.detuning, n_bar=0.0)
        for i, drv in enumerate(config.raman))
    return config.replace(raman=raman)


def _select_pumps(config: ScenarioConfig, pumps: str) -> ScenarioConfig:
    if pumps == "P1":
        return config.replace(pumps=config.pumps[:1])
    if pumps != "P1+P2":
        raise ValueError(f"pumps must be one of {PUMP_CHOICES}")
    if len(config.pumps) >= 2:
        return config.replace(pumps=config.pumps[:2])
    # synthesize the recovery pump: same amplitude pattern, resonant with the
    # gap between the doubly excited state and the pumped eigenstate
    p1 = config.pumps[0]
    vals, _ = single_excitation_modes(config)
    omega_ee = sum(q.working_freq for q in config.qubits)
    # pumped eigenstate = the one resonant with pump 1
    idx = int(np.argmin(np.abs(vals - p1.frequency)))
    p2 = PumpDrive(p1.amplitudes, omega_ee - vals[idx])
    return config.replace(pumps=(p1, p2))


def run_bell(config: ScenarioConfig, channels: str = "both",
             pumps: str = "P1", initial=None) -> ScenarioReport:
    """Two-qubit stabilization run; target is the symmetric eigenstate T."""
    if config.n_qubits != 2:
        raise ValueError("bell scenario requires a two-qubit config")
    cfg = _select_pumps(_select_channels(config, channels), pumps)
    return _run_scenario(cfg, "T", "bell", initial)


def run_w(config: ScenarioConfig, initial=None) -> ScenarioReport:
    """Three-qubit stabilization run; target is the symmetric eigenstate W."""
    if config.n_qubits != 3:
        raise ValueError("w scenario requires a three-qubit config")
    return _run_scenario(config, "W", "w", initial)


# -- spectroscopy -----------------------------------------------------------------

@dataclass
class SpectroscopyResult:
    frequencies: np.ndarray
    populations: dict[str, np.ndarray]
    total_excitation: np.ndarray


def run_spectroscopy(config: ScenarioConfig, drive_target: int,
                     freq_range, amplitude: float,
                     duration: float = 4.0) -> SpectroscopyResult:
    """Population response to a weak probe on one qubit, swept in frequency.

    The probe amplitude must stay well under the coupling J so the lines
    remain resolvable; resonators are omitted (they are undriven and stay
    empty).  Populations are time-averaged over the second half of the
    probe window.
    """
    j_min = min((j for j in config.couplings.j if j > 0), default=math.inf)
    if amplitude > j_min / 3.0:
        raise ValueError("probe amplitude must be well below the coupling J")
    if not 0 <= drive_target < config.n_qubits:
        raise IndexError("drive target out of range")

    freqs = np.asarray(freq_range, dtype=float)
    labels = _qubit_state_labels(config.n_qubits)
    sums: dict[str, list[float]] = {lab: [] for lab in labels}
    qspace = qubit_space(config)
    obs = {f"P_{lab}": np.asarray(named_qubit_state(qspace, lab))
           for lab in labels}
    amps = tuple(amplitude if i == drive_target else 0.0
                 for i in range(config.n_qubits))

    for f in freqs:
        probe_cfg = config.replace(
            pumps=(PumpDrive(amps, float(f)),),
            raman=tuple(ResonatorDrive(detuning=d.detuning, n_bar=0.0)
                        for d in config.raman))
        model = build_dispersive(probe_cfg, include_resonators=False)
        collapse = build_collapse_set(probe_cfg, include_resonators=False,
                                      space=model.space)
        liouv = build_liouvillian(model.H, collapse)
        rho0 = DensityMatrix.from_state_vector(
            model.space, named_qubit_state(model.space,
                                           "g" * config.n_qubits))
        t_grid = np.linspace(0.0, duration, 81)
        res = evolve(liouv, rho0, t_grid, observables=obs)
        sel = t_grid >= duration / 2.0
        for lab in labels:
            sums[lab].append(float(np.real(res.observables[f"P_{lab}"][sel]).mean()))

    pops = {lab: np.asarray(sums[lab]) for lab in labels}
    total = sum(pops[lab] * lab.count("e") for lab in labels)
    return SpectroscopyResult(freqs, pops, np.asarray(total))


# -- parameter sweeps ----------------------------------------------------------------

SWEEP_AXES = ("n_bar", "chi", "kappa", "T1", "T_phi")


@dataclass
class SweepResult:
    axis: str
    values: np.ndarray
    steady_fidelity: np.ndarray
    gamma_st: np.ndarray
    errors: list[str | None]


def _apply_axis(config: ScenarioConfig, axis: str, value: float) -> ScenarioConfig:
    if axis == "n_bar":
        raman = tuple(
            ResonatorDrive(detuning=d.detuning, n_bar=value) if d.active else d
            for d in config.raman)
        return config.replace(raman=raman)
    if axis == "chi":
        res = tuple(
            r if not config.raman[i].active else
            type(r)(r.label, r.omega_r, r.kappa, value, r.g)
            for i, r in enumerate(config.resonators))
        return config.replace(resonators=res)
    if axis == "kappa":
        res = tuple(
            r if not config.raman[i].active else
            type(r)(r.label, r.omega_r, value, r.chi, r.g)
            for i, r in enumerate(config.resonators))
        return config.replace(resonators=res)
    if axis == "T1":
        qubits = tuple(type(q)(q.label, q.omega_q, q.alpha,
                               None if math.isinf(value) else value,
                               q.t2e, q.working_freq)
                       for q in config.qubits)
        return config.replace(qubits=qubits)
    if axis == "T_phi":
        qubits = tuple(type(q)(q.label, q.omega_q, q.alpha, q.t1,
                               None if math.isinf(value) else value,
                               q.working_freq)
                       for q in config.qubits)
        return config.replace(qubits=qubits)
    raise ValueError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")


def measure_transfer_rate(config: ScenarioConfig, source: str = "S",
                          window: float | None = None) -> float:
    """Engineered transfer rate out of ``source``, isolated from decoherence.

    Pumps and qubit decoherence are switched off, the system starts in the
    source eigenstate (resonators in their driven steady field), and the
    source population decay is fitted to an exponential.
    """
    bare = config.replace(
        pumps=(),
        qubits=tuple(type(q)(q.label, q.omega_q, q.alpha, None, None,
                             q.working_freq) for q in config.qubits))
    model = build_dispersive(bare, displaced=True)
    collapse = build_collapse_set(bare, space=model.space)
    liouv = build_liouvillian(model.H, collapse)
    rho0 = initial_density(bare, model, source)
    qspace = qubit_space(bare)
    obs = {"P_src": _qubit_projector(model.space, qspace,
                                     named_qubit_state(qspace, source))}
    if window is None:
        window = 4.0
    t_grid = np.linspace(0.0, window, 121)
    res = evolve(liouv, rho0, t_grid, observables=obs)
    trace = np.real(res.observables["P_src"])
    fit = fit_exponential(t_grid, trace)
    # out-rate at t=0: |dP/dt| / P(0) for P = a + b exp(-rt)
    return abs(fit.rate * fit.amplitude / (fit.asymptote + fit.amplitude))


def _sweep_point(args) -> tuple[float, float, str | None]:
    config, axis, value = args
    try:
        cfg = _apply_axis(config, axis, value)
        model = build_dispersive(cfg, displaced=True)
        collapse = build_collapse_set(cfg, space=model.space)
        liouv = build_liouvillian(model.H, collapse)
        steadym = steady_state(liouv, tol=cfg.solver.steady_tol,
                               nullspace_max_dim=cfg.solver.nullspace_max_dim)
        reduced = partial_trace(steadym.rho, range(cfg.n_qubits))
        target = "T" if cfg.n_qubits == 2 else "W"
        psi = named_qubit_state(reduced.space, target)
        fid = float(np.real(np.vdot(psi, reduced.matrix @ psi)))
        gamma = measure_transfer_rate(cfg)
        return fid, gamma, None
    except Exception as exc:  # per-point failures recorded, sweep continues
        return math.nan, math.nan, f"{type(exc).__name__}: {exc}"


def run_sweep(config: ScenarioConfig, axis: str, values,
              workers: int = 1) -> SweepResult:
    """Steady fidelity and engineered rate across one parameter axis.

    Points run independently on immutable configs (optionally in a process
    pool); output rows follow the order of ``values`` regardless of
    completion order.  A failed point records its error and the sweep
    continues.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")
    values = np.asarray(list(values), dtype=float)
    jobs = [(config, axis, float(v)) for v in values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    fid = np.asarray([r[0] for r in rows])
    gam = np.asarray([r[1] for r in rows])
    errs = [r[2] for r in rows]
    return SweepResult(axis, values, fid, gam, errs)


# -- report output ----------------------------------------------------------------

def write_report(report: ScenarioReport, outdir: str | Path) -> Path:
    """Write report.json and traces.csv; returns the output directory."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.json", "w") as fh:
        json.dump(report.to_jsonable(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "traces.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        names = list(report.traces)
        writer.writerow(["t_us"] + names)
        for i, t in enumerate(report.times):
            writer.writerow([repr(float(t))]
                            + [repr(float(report.traces[n][i])) for n in names])
    return out


def write_sweep(result: SweepResult, outdir: str | Path) -> Path:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.json", "w") as fh:
        json.dump({
            "axis": result.axis,
            "values": [float(v) for v in result.values],
            "steady_fidelity": [None if math.isnan(v) else float(v)
                                for v in result.steady_fidelity],
            "gamma_st_per_us": [None if math.isnan(v) else float(v)
                                for v in result.gamma_st],
            "errors": result.errors,
        }, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "traces.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([result.axis, "steady_fidelity", "gamma_st_per_us",
                         "error"])
        for v, f, g, e in zip(result.values, result.steady_fidelity,
                              result.gamma_st, result.errors):
            writer.writerow([repr(float(v)), repr(float(f)), repr(float(g)),
                             e or ""])
    return out
