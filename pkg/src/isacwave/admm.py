"""Splitting solver for chirp-similar, PAPR-capped transmit blocks.

The design problem: find the block x (vectorized, unit total energy)
closest to the interference-free communication target

    x_comm = vec( H^H (H H^H)^-1 S ),

subject to staying within Euclidean distance epsilon of the radar
reference x0 and keeping the block PAPR at or below eta.  In the real
lifting x_bar = [Re(x); Im(x)] each complex sample n occupies the slot
pair (n, N*L + n); the per-sample energy cap |x_n|^2 <= eta/(N*L) is
equivalent to the block PAPR cap under unit energy and makes every
constraint a cheap Euclidean projection:

* alpha: the unit-energy sphere,
* beta:  the epsilon-ball around x0 (on x - x0),
* gamma: per-sample discs of radius sqrt(eta/(N*L)).

Consensus between x_bar and the three auxiliaries is enforced by scaled
dual vectors u, v, w with a single penalty weight rho.  One iteration
updates x_bar in closed form (the augmented objective is quadratic in
x_bar), projects the three auxiliaries, then ascends the duals.  The
iterate after the final x-update is returned as designed; it sits on
the constraint sets only up to the reported residuals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kpi
from .signal_model import (
    ChannelRealization,
    ReferenceWaveform,
    SymbolBlock,
    Waveform,
    lift,
    unlift,
    unvec,
    vec,
)


class SingularChannelError(ValueError):
    """Channel rows are linearly dependent; no interference-free target."""


class DegenerateProjectionError(ValueError):
    """Projection argument has no defined direction (zero vector)."""


@dataclass(frozen=True)
class ProblemSpec:
    """One waveform-design instance plus solver controls.

    epsilon = 0 pins the design to the reference block exactly; it is
    accepted only when the reference itself satisfies the PAPR cap.
    eta is linear and can never be active below 1 (PAPR >= 1 always) or
    above N*L (the maximum PAPR of a unit-energy block).
    """

    channel: ChannelRealization
    symbols: SymbolBlock
    reference: ReferenceWaveform
    epsilon: float
    eta: float
    rho: float = 1.0
    max_iterations: int = 2000
    feasibility_tolerance: float = 1e-3
    early_stop: bool = False

    def __post_init__(self) -> None:
        k, n = self.channel.k_users, self.channel.n_antennas
        if self.reference.n_antennas != n:
            raise ValueError(
                f"reference has {self.reference.n_antennas} antennas, channel has {n}"
            )
        if self.symbols.k_users != k:
            raise ValueError(
                f"symbols address {self.symbols.k_users} users, channel has {k}"
            )
        if self.symbols.n_samples != self.reference.n_samples:
            raise ValueError(
                f"symbols span {self.symbols.n_samples} samples, "
                f"reference spans {self.reference.n_samples}"
            )
        if k > n:
            raise ValueError(f"need k_users <= n_antennas, got K={k} > N={n}")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be >= 0")
        if not 1.0 <= self.eta <= self.n_total:
            raise ValueError(f"eta must lie in [1, N*L] = [1, {self.n_total}]")
        if not self.rho > 0:
            raise ValueError("rho must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.feasibility_tolerance > 0:
            raise ValueError("feasibility_tolerance must be > 0")
        if self.epsilon == 0 and kpi.papr(self.reference.vec) > self.eta:
            raise ValueError(
                "epsilon = 0 pins the design to the reference, "
                "but the reference violates the PAPR cap"
            )

    @property
    def n_total(self) -> int:
        """Samples per block, N*L."""
        return self.reference.n_antennas * self.reference.n_samples


@dataclass
class AdmmState:
    """Iterate of the splitting: primal block, auxiliaries, scaled duals.

    gamma and w hold one (Re, Im) pair per sample, shape (N*L, 2); the
    pair for sample n corresponds to slots (n, N*L + n) of x_bar.
    """

    x_bar: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    iteration: int = 0

    @classmethod
    def initial(cls, n_total: int) -> "AdmmState":
        """All-zero start."""
        dim = 2 * n_total
        return cls(
            x_bar=np.zeros(dim),
            alpha=np.zeros(dim),
            beta=np.zeros(dim),
            gamma=np.zeros((n_total, 2)),
            u=np.zeros(dim),
            v=np.zeros(dim),
            w=np.zeros((n_total, 2)),
        )


def coupling_pairs(x_bar: np.ndarray) -> np.ndarray:
    """Per-sample (Re, Im) pairs of a lifted vector, shape (N*L, 2)."""
    half = x_bar.size // 2
    return np.column_stack((x_bar[:half], x_bar[half:]))


def scatter_pairs(pairs: np.ndarray) -> np.ndarray:
    """Inverse of :func:`coupling_pairs`: place pairs back into slots."""
    return np.concatenate((pairs[:, 0], pairs[:, 1]))


def zero_forcing_target(
    channel: ChannelRealization, symbols: SymbolBlock
) -> np.ndarray:
    """Vectorized minimum-energy block with H X = S exactly.

    Computed as vec(H^H (H H^H)^-1 S).  Raises SingularChannelError when
    the Gram matrix H H^H is singular or numerically unusable.
    """
    h = channel.matrix
    s = symbols.symbols
    if channel.k_users > channel.n_antennas:
        raise ValueError("zero forcing needs k_users <= n_antennas")
    if h.shape[0] != s.shape[0]:
        raise ValueError(
            f"channel serves {h.shape[0]} users, symbols address {s.shape[0]}"
        )
    gram = h @ h.conj().T
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularChannelError(
            f"channel rows are (numerically) dependent, cond(H H^H) = {cond:.3e}"
        )
    target = h.conj().T @ np.linalg.solve(gram, s)
    return vec(target)


def x_update(
    state: AdmmState, rho: float, x_bar_comm: np.ndarray, x_bar_0: np.ndarray
) -> np.ndarray:
    """Closed-form minimizer of the augmented objective in x_bar.

    The objective is quadratic with Hessian (2 + 3*rho) * I because the
    per-sample selectors partition the lifted coordinates, so the
    minimizer is the weighted average of the communication pull and the
    three constraint pulls, shifted by the duals.
    """
    pull = (
        2.0 * x_bar_comm
        - state.u
        - state.v
        - scatter_pairs(state.w)
        + rho * (state.alpha + x_bar_0 + state.beta + scatter_pairs(state.gamma))
    )
    return pull / (2.0 + 3.0 * rho)


def alpha_update(
    x_bar_new: np.ndarray,
    u: np.ndarray,
    rho: float,
    fallback: np.ndarray | None = None,
) -> np.ndarray:
    """Project x_bar + u/rho onto the unit-energy sphere.

    A zero argument has no nearest point on the sphere; the previous
    auxiliary can be supplied as a fallback, otherwise this raises.
    """
    t = x_bar_new + u / rho
    norm = np.linalg.norm(t)
    if norm < 1e-12:
        if fallback is not None:
            return fallback.copy()
        raise DegenerateProjectionError(
            "cannot project the zero vector onto the unit sphere"
        )
    return t / norm


def beta_update(
    x_bar_new: np.ndarray,
    x_bar_0: np.ndarray,
    v: np.ndarray,
    rho: float,
    epsilon: float,
) -> np.ndarray:
    """Project (x_bar - x0_bar) + v/rho onto the epsilon-ball."""
    t = x_bar_new - x_bar_0 + v / rho
    norm = np.linalg.norm(t)
    if norm <= epsilon:
        return t
    return t * (epsilon / norm)


def gamma_update(
    x_bar_new: np.ndarray,
    w: np.ndarray,
    rho: float,
    eta: float,
    n_total: int,
) -> np.ndarray:
    """Project each per-sample pair onto its energy disc.

    Pair n of coupling_pairs(x_bar) + w/rho is kept when its squared
    norm is at most eta/(N*L) and radially shrunk onto the boundary
    otherwise.  Boundary points are members, not violations.
    """
    t = coupling_pairs(x_bar_new) + w / rho
    cap = eta / n_total
    sq = np.sum(t * t, axis=1)
    outside = sq > cap
    scale = np.ones_like(sq)
    scale[outside] = np.sqrt(cap / sq[outside])
    return t * scale[:, None]


def dual_updates(
    state: AdmmState,
    x_bar_new: np.ndarray,
    alpha_new: np.ndarray,
    beta_new: np.ndarray,
    gamma_new: np.ndarray,
    rho: float,
    x_bar_0: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Ascend the three scaled duals along their consensus residuals."""
    u = state.u + rho * (x_bar_new - alpha_new)
    v = state.v + rho * (x_bar_new - x_bar_0 - beta_new)
    w = state.w + rho * (coupling_pairs(x_bar_new) - gamma_new)
    return u, v, w


def augmented_lagrangian(
    x_bar: np.ndarray,
    alpha: np.ndarray,
    beta: np.ndarray,
    gamma: np.ndarray,
    u: np.ndarray,
    v: np.ndarray,
    w: np.ndarray,
    rho: float,
    x_bar_comm: np.ndarray,
    x_bar_0: np.ndarray,
) -> float:
    """Augmented objective whose x_bar-minimizer is :func:`x_update`.

    Quadratic communication cost plus linear dual terms and rho/2 times
    the squared consensus residuals of the three couplings.
    """
    r_energy = x_bar - alpha
    r_similarity = x_bar - x_bar_0 - beta
    r_papr = coupling_pairs(x_bar) - gamma
    value = (
        np.linalg.norm(x_bar - x_bar_comm) ** 2
        + u @ r_energy
        + v @ r_similarity
        + np.sum(w * r_papr)
        + 0.5
        * rho
        * (
            np.linalg.norm(r_energy) ** 2
            + np.linalg.norm(r_similarity) ** 2
            + np.sum(r_papr * r_papr)
        )
    )
    return float(value)


@dataclass(frozen=True)
class ConstraintViolations:
    """How far the returned block sits from each constraint set."""

    norm_gap: float
    similarity_excess: float
    papr_excess: float

    def max(self) -> float:
        return max(self.norm_gap, self.similarity_excess, self.papr_excess)

    def as_dict(self) -> dict:
        return {
            "norm_gap": self.norm_gap,
            "similarity_excess": self.similarity_excess,
            "papr_excess": self.papr_excess,
        }


@dataclass(frozen=True)
class ResidualHistory:
    """Per-iteration primal residual norms of the three couplings."""

    energy: np.ndarray
    similarity: np.ndarray
    papr: np.ndarray

    def as_dict(self) -> dict:
        return {
            "energy": [float(r) for r in self.energy],
            "similarity": [float(r) for r in self.similarity],
            "papr": [float(r) for r in self.papr],
        }


@dataclass(frozen=True)
class SolveResult:
    """Designed block plus diagnostics of the splitting run."""

    waveform: Waveform
    objective: float
    constraint_violations: ConstraintViolations
    residual_history: ResidualHistory
    iterations_run: int


def _violations(spec: ProblemSpec, x: np.ndarray) -> ConstraintViolations:
    norm_gap = abs(float(np.linalg.norm(x) ** 2) - 1.0)
    similarity = float(np.linalg.norm(x - spec.reference.vec))
    papr_lin = kpi.papr(x)
    return ConstraintViolations(
        norm_gap=norm_gap,
        similarity_excess=max(0.0, similarity - spec.epsilon),
        papr_excess=max(0.0, papr_lin - spec.eta),
    )


def solve(spec: ProblemSpec) -> SolveResult:
    """Run the splitting for max_iterations (optionally stopping early
    once all residual norms drop below feasibility_tolerance) and return
    the final primal block with its diagnostics.

    epsilon = 0 short-circuits to the reference block: the similarity
    ball is the single point x0, feasible by ProblemSpec validation.
    """
    x_comm = zero_forcing_target(spec.channel, spec.symbols)
    x_bar_comm = lift(x_comm)
    x_bar_0 = spec.reference.lifted
    empty = np.empty(0)

    if spec.epsilon == 0:
        x0 = spec.reference.vec
        return SolveResult(
            waveform=Waveform(spec.reference.entries.copy()),
            objective=float(np.linalg.norm(x_bar_0 - x_bar_comm) ** 2),
            constraint_violations=_violations(spec, x0),
            residual_history=ResidualHistory(empty, empty, empty),
            iterations_run=0,
        )

    n_total = spec.n_total
    rho = spec.rho
    state = AdmmState.initial(n_total)
    r_energy = np.empty(spec.max_iterations)
    r_similarity = np.empty(spec.max_iterations)
    r_papr = np.empty(spec.max_iterations)

    for m in range(spec.max_iterations):
        state.x_bar = x_update(state, rho, x_bar_comm, x_bar_0)
        state.alpha = alpha_update(state.x_bar, state.u, rho, fallback=state.alpha)
        state.beta = beta_update(state.x_bar, x_bar_0, state.v, rho, spec.epsilon)
        state.gamma = gamma_update(state.x_bar, state.w, rho, spec.eta, n_total)
        r_energy[m] = np.linalg.norm(state.x_bar - state.alpha)
        r_similarity[m] = np.linalg.norm(state.x_bar - x_bar_0 - state.beta)
        r_papr[m] = np.sqrt(
            np.sum((coupling_pairs(state.x_bar) - state.gamma) ** 2)
        )
        state.u, state.v, state.w = dual_updates(
            state, state.x_bar, state.alpha, state.beta, state.gamma, rho, x_bar_0
        )
        state.iteration = m + 1
        if spec.early_stop and max(r_energy[m], r_similarity[m], r_papr[m]) < (
            spec.feasibility_tolerance
        ):
            break

    ran = state.iteration
    x = unlift(state.x_bar)
    return SolveResult(
        waveform=Waveform(unvec(x, spec.reference.n_antennas)),
        objective=float(np.linalg.norm(state.x_bar - x_bar_comm) ** 2),
        constraint_violations=_violations(spec, x),
        residual_history=ResidualHistory(
            energy=r_energy[:ran].copy(),
            similarity=r_similarity[:ran].copy(),
            papr=r_papr[:ran].copy(),
        ),
        iterations_run=ran,
    )
