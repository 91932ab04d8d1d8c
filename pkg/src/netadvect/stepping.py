"""Time integration of the semi-discrete network transport system.

The flux operator is constant in time, so implicit stepping factorizes
M + tau*B once per run and back-substitutes every step.  The step size is
unrestricted (the system matrix is always invertible); small steps are an
accuracy choice enforced by the convergence harness, not a stability one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .meshing import Basis, Mesh, l2_project_initial
from .network import Network
from .operator import Diagnostics, OdeSystem, State, assemble, compute_diagnostics

__all__ = [
    "SolverError",
    "StepperConfig",
    "TimeSeries",
    "simulate",
    "step_implicit_euler",
]

_SCHEMES = ("implicit-euler", "crank-nicolson")


class SolverError(RuntimeError):
    """Linear solve failed; carries the index of the failing step."""

    def __init__(self, message: str, step_index: int):
        super().__init__(message)
        self.step_index = step_index


@dataclass(frozen=True)
class StepperConfig:
    tau: float
    t_final: float
    scheme: str = "implicit-euler"
    store_every: int = 1

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("step size must be positive")
        if self.t_final < 0:
            raise ValueError("final time must be nonnegative")
        if self.scheme not in _SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {_SCHEMES}")
        if self.store_every < 1:
            raise ValueError("store_every must be >= 1")


@dataclass
class TimeSeries:
    times: np.ndarray
    states: list[State]
    diagnostics: list[Diagnostics]

    def stacked_u(self) -> np.ndarray:
        return np.stack([s.u for s in self.states])


def _step_matrix(system: OdeSystem, tau: float, scheme: str) -> sp.csc_matrix:
    m = sp.diags(system.mass_diag)
    if scheme == "implicit-euler":
        return (m + tau * system.flux).tocsc()
    return (m + 0.5 * tau * system.flux).tocsc()


def _advance(system: OdeSystem, lu, state: State, tau: float, scheme: str,
             with_traces: bool = True) -> State:
    t_next = state.t + tau
    g_next = system.g_values(t_next)
    if scheme == "implicit-euler":
        rhs = system.mass_diag * state.u + tau * (system.inflow_load @ g_next)
    else:
        g_now = system.g_values(state.t)
        rhs = (system.mass_diag * state.u - 0.5 * tau * (system.flux @ state.u)
               + 0.5 * tau * (system.inflow_load @ (g_now + g_next)))
    u_next = lu.solve(rhs)
    if not np.all(np.isfinite(u_next)):
        raise RuntimeError("linear solve produced non-finite values")
    uhat_next = system.reconstruct(u_next, gvals=g_next) if with_traces else state.uhat
    return State(u=u_next, uhat=uhat_next, t=t_next)


def step_implicit_euler(system: OdeSystem, state: State, tau: float,
                        gvals_next: np.ndarray | None = None) -> State:
    """One implicit Euler step: (M + tau B) u' = M u + tau G g(t + tau).

    The new trace vector is rebuilt from the new element traces and the
    boundary values at the new time.
    """
    if gvals_next is None:
        gvals_next = system.g_values(state.t + tau)
    lu = spla.splu(_step_matrix(system, tau, "implicit-euler"))
    rhs = system.mass_diag * state.u + tau * (system.inflow_load @ gvals_next)
    u_next = lu.solve(rhs)
    uhat_next = system.reconstruct(u_next, gvals=gvals_next)
    return State(u=u_next, uhat=uhat_next, t=state.t + tau)


def simulate(network: Network, mesh: Mesh, basis: Basis, config: StepperConfig,
             system: OdeSystem | None = None) -> TimeSeries:
    """March the projected initial state to the final time.

    Every step is recorded by default (states and diagnostics); setting
    ``store_every`` keeps only every n-th step plus the final one, which
    bounds memory in long runs.  The last step is shortened to land exactly
    on the final time.
    """
    if system is None:
        system = assemble(network, mesh, basis)
    u0 = l2_project_initial(network, mesh, basis)
    state = State(u=u0, uhat=system.reconstruct(u0, t=0.0), t=0.0)

    times = [0.0]
    states = [state]
    diags = [compute_diagnostics(system, state)]

    lu_cache: dict[float, object] = {}
    t_end = config.t_final
    eps = 1e-12 * max(1.0, t_end)
    step_index = 0
    while state.t < t_end - eps:
        tau = min(config.tau, t_end - state.t)
        if tau not in lu_cache:
            lu_cache[tau] = spla.splu(_step_matrix(system, tau, config.scheme))
        step_index += 1
        try:
            state = _advance(system, lu_cache[tau], state, tau, config.scheme,
                             with_traces=False)
        except RuntimeError as exc:
            raise SolverError(f"step {step_index} failed: {exc}", step_index) from exc
        if step_index % config.store_every == 0 or state.t >= t_end - eps:
            state = State(u=state.u, uhat=system.reconstruct(state.u, t=state.t), t=state.t)
            times.append(state.t)
            states.append(state)
            diags.append(compute_diagnostics(system, state))

    return TimeSeries(times=np.array(times), states=states, diagnostics=diags)
