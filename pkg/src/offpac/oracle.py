"""
Exact computations on tabular MDPs.

Everything here is dense linear algebra over the explicit model in a TabularMDP:
the behavior stationary distribution, policy values, the Off-PAC objective with
its approximate and true gradients, MSPBE and TD fixed points, off-policy
lambda-returns, and the Monte-Carlo forward/backward-view comparison.

Policy weights ``u`` act on a dense state-action feature array ``phi`` of shape
(num_states, num_actions, d); when ``phi`` is omitted the one-hot tabular features
are used, so ``u`` has one entry per (state, action).
"""

import bisect
import logging
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .envs import TabularMDP, oracle_mdps
from .errors import OracleError
from .features import TabularEncoder


logger = logging.getLogger(__name__)

FINITE_DIFFERENCE_STEP = 1e-6
STATIONARY_TOLERANCE = 1e-12
BURN_IN_STEPS = 10 ** 4


@dataclass(frozen=True, eq=False)
class OracleSolution:
    d_b: np.ndarray
    pi: np.ndarray
    V: np.ndarray
    Q: np.ndarray
    J: float
    g: np.ndarray
    gradJ: np.ndarray


class LambdaStep(NamedTuple):
    """One trajectory step: from ``state`` take ``action``, receive ``reward``, land with gamma ``gamma_next``."""

    state: int
    action: int
    reward: float
    rho: float
    gamma_next: float


# ------------------------------------------------------------------ dynamics

def behavior_transition(m: TabularMDP) -> np.ndarray:
    """P_b[s, s'] = sum_a b(a|s) P(s'|s,a)."""
    return np.einsum('sa,sat->st', m.behavior, m.P)


def policy_transition(m: TabularMDP, pi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(P_pi, r_pi): state transition matrix and expected one-step reward under ``pi``."""
    P_pi = np.einsum('sa,sat->st', pi, m.P)
    r_pi = np.einsum('sa,sat,sat->s', pi, m.P, m.R)
    return P_pi, r_pi


def _is_irreducible(P: np.ndarray) -> bool:
    n = P.shape[0]
    reach = (P > 0.0) | np.eye(n, dtype=bool)
    for _ in range(max(1, int(np.ceil(np.log2(n))) + 1)):
        reach = reach | ((reach.astype(np.int64) @ reach.astype(np.int64)) > 0)
    return bool(reach.all())


def stationary_distribution(m: TabularMDP, max_iterations: int = 10 ** 6,
                            tol: float = STATIONARY_TOLERANCE) -> np.ndarray:
    """
    Limiting distribution of the behavior-induced chain by power iteration from state 0.

    Raises:
        OracleError: if the chain is reducible or the iteration does not settle
    """
    P_b = behavior_transition(m)
    if not _is_irreducible(P_b):
        raise OracleError("behavior chain is reducible; no unique stationary distribution")

    d = np.zeros(m.num_states)
    d[0] = 1.0
    for iteration in range(max_iterations):
        nxt = d @ P_b
        nxt /= nxt.sum()
        if np.max(np.abs(nxt @ P_b - nxt)) < tol:
            logger.debug(f"Stationary distribution converged after {iteration + 1} iterations")
            return nxt
        d = nxt
    raise OracleError(f"power iteration did not converge in {max_iterations} iterations "
                      "(behavior chain is likely periodic)")


# ------------------------------------------------------------------- values

def exact_values(m: TabularMDP, pi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Solve (I - P_pi Gamma) V = r_pi, then Q(s,a) = sum_s' P(s'|s,a)[R + gamma(s') V(s')].

    Raises:
        OracleError: when the discounted system is singular
    """
    P_pi, r_pi = policy_transition(m, pi)
    A = np.eye(m.num_states) - P_pi * m.gamma[None, :]
    try:
        V = np.linalg.solve(A, r_pi)
    except np.linalg.LinAlgError as e:
        raise OracleError(f"Bellman system is singular: {e}")
    if np.max(np.abs(A @ V - r_pi)) > 1e-12 * max(1.0, np.max(np.abs(V))):
        raise OracleError("Bellman system is ill-conditioned; termination may never occur")
    Q = np.einsum('sat,sat->sa', m.P, m.R + m.gamma[None, None, :] * V[None, None, :])
    return V, Q


def optimal_action_values(m: TabularMDP, tol: float = 1e-12, max_iterations: int = 10 ** 6) -> np.ndarray:
    """Q* by value iteration."""
    Q = np.zeros((m.num_states, m.num_actions))
    for _ in range(max_iterations):
        nxt = np.einsum('sat,sat->sa', m.P, m.R + m.gamma[None, None, :] * Q.max(axis=1)[None, None, :])
        if np.max(np.abs(nxt - Q)) < tol:
            return nxt
        Q = nxt
    raise OracleError(f"value iteration did not converge in {max_iterations} iterations")


# ---------------------------------------------------------- Gibbs policies

def tabular_phi(m: TabularMDP) -> np.ndarray:
    return TabularEncoder(m.num_states, m.num_actions).action_feature_matrix()


def gibbs_table(u: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """pi_u(a|s) for every state, shape (S, A)."""
    logits = phi @ u
    logits = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    return e / e.sum(axis=1, keepdims=True)


def gibbs_score_table(u: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """psi(s,a) = phi_{s,a} - sum_b pi(b|s) phi_{s,b}, shape (S, A, d)."""
    pi = gibbs_table(u, phi)
    return phi - np.einsum('sb,sbd->sd', pi, phi)[:, None, :]


def _phi_or_tabular(m: TabularMDP, phi: Optional[np.ndarray]) -> np.ndarray:
    return tabular_phi(m) if phi is None else phi


def objective(m: TabularMDP, u: np.ndarray, phi: Optional[np.ndarray] = None,
              d_b: Optional[np.ndarray] = None) -> float:
    """J(u) = sum_s d_b(s) V^{pi_u}(s)."""
    phi = _phi_or_tabular(m, phi)
    if d_b is None:
        d_b = stationary_distribution(m)
    V, _ = exact_values(m, gibbs_table(u, phi))
    return float(d_b @ V)


def approximate_gradient(m: TabularMDP, u: np.ndarray, phi: Optional[np.ndarray] = None,
                         d_b: Optional[np.ndarray] = None) -> np.ndarray:
    """g(u) = sum_s d_b(s) sum_a grad pi(a|s) Q(s,a), with grad pi = pi psi."""
    phi = _phi_or_tabular(m, phi)
    if d_b is None:
        d_b = stationary_distribution(m)
    pi = gibbs_table(u, phi)
    _, Q = exact_values(m, pi)
    psi = gibbs_score_table(u, phi)
    return np.einsum('s,sa,sad,sa->d', d_b, pi, psi, Q)


def finite_difference_gradient(m: TabularMDP, u: np.ndarray, phi: Optional[np.ndarray] = None,
                               d_b: Optional[np.ndarray] = None,
                               h: float = FINITE_DIFFERENCE_STEP) -> np.ndarray:
    """Central differences of J in every coordinate of u."""
    phi = _phi_or_tabular(m, phi)
    if d_b is None:
        d_b = stationary_distribution(m)
    grad = np.zeros(u.shape[0])
    for i in range(u.shape[0]):
        bump = np.zeros(u.shape[0])
        bump[i] = h
        grad[i] = (objective(m, u + bump, phi, d_b) - objective(m, u - bump, phi, d_b)) / (2.0 * h)
    return grad


def true_gradient(m: TabularMDP, u: np.ndarray, phi: Optional[np.ndarray] = None,
                  d_b: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Exact gradient of J by the policy-gradient theorem.

    The discounted visit weights are mu = d_b^T (I - P_pi Gamma)^-1; in the tabular
    case each component of this gradient dominates the matching component of g.
    """
    phi = _phi_or_tabular(m, phi)
    if d_b is None:
        d_b = stationary_distribution(m)
    pi = gibbs_table(u, phi)
    P_pi, _ = policy_transition(m, pi)
    A = np.eye(m.num_states) - P_pi * m.gamma[None, :]
    try:
        mu = np.linalg.solve(A.T, d_b)
    except np.linalg.LinAlgError as e:
        raise OracleError(f"Bellman system is singular: {e}")
    _, Q = exact_values(m, pi)
    psi = gibbs_score_table(u, phi)
    return np.einsum('s,sa,sad,sa->d', mu, pi, psi, Q)


def objective_and_gradients(m: TabularMDP, u: np.ndarray,
                            phi: Optional[np.ndarray] = None) -> OracleSolution:
    phi = _phi_or_tabular(m, phi)
    d_b = stationary_distribution(m)
    pi = gibbs_table(u, phi)
    V, Q = exact_values(m, pi)
    return OracleSolution(
        d_b=d_b,
        pi=pi,
        V=V,
        Q=Q,
        J=float(d_b @ V),
        g=approximate_gradient(m, u, phi, d_b),
        gradJ=finite_difference_gradient(m, u, phi, d_b),
    )


def ascend(m: TabularMDP, u0: np.ndarray, phi: Optional[np.ndarray] = None,
           direction: str = 'g', step_size: float = 0.5, tol: float = 1e-6,
           max_iterations: int = 10 ** 5) -> np.ndarray:
    """
    Normalized gradient ascent on J along g(u) (``direction='g'``) or the true gradient
    (``direction='true'``) until the followed direction's norm drops below ``tol``.

    A step that lowers J is rejected and the step size halved.
    """
    if direction not in ('g', 'true'):
        raise OracleError(f"unknown ascent direction '{direction}'")
    phi = _phi_or_tabular(m, phi)
    d_b = stationary_distribution(m)
    grad_fn = approximate_gradient if direction == 'g' else true_gradient

    u = np.array(u0, dtype=np.float64)
    J = objective(m, u, phi, d_b)
    for iteration in range(max_iterations):
        grad = grad_fn(m, u, phi, d_b)
        norm = float(np.linalg.norm(grad))
        if norm < tol:
            logger.debug(f"Ascent on {direction} converged after {iteration} iterations (J={J:.6f})")
            return u
        candidate = u + step_size * grad / norm
        J_candidate = objective(m, candidate, phi, d_b)
        if J_candidate >= J:
            u, J = candidate, J_candidate
        else:
            step_size *= 0.5
            if step_size < 1e-12:
                raise OracleError("ascent step size collapsed before convergence")
    raise OracleError(f"ascent did not converge in {max_iterations} iterations")


# ------------------------------------------------------- MSPBE / fixed point

def _lambda_operator_parts(m: TabularMDP, pi: np.ndarray, lam: float):
    P_pi, r_pi = policy_transition(m, pi)
    P_gamma = P_pi * m.gamma[None, :]
    M = np.linalg.inv(np.eye(m.num_states) - lam * P_gamma)
    return P_gamma, r_pi, M


def _check_rank(X: np.ndarray, d_b: np.ndarray) -> None:
    visited = X[d_b > 0.0]
    if np.linalg.matrix_rank(visited) < X.shape[1]:
        raise OracleError("feature matrix is rank-deficient on visited states")


def mspbe(m: TabularMDP, v: np.ndarray, X: np.ndarray, lam: float, pi: np.ndarray) -> float:
    """
    ||V - Pi T^lambda V||^2_D with V = X v, D = diag(d_b) and
    T^lambda V = (I - lambda P Gamma)^-1 [r + (1 - lambda) P Gamma V].
    """
    d_b = stationary_distribution(m)
    _check_rank(X, d_b)
    P_gamma, r_pi, M = _lambda_operator_parts(m, pi, lam)
    D = np.diag(d_b)
    V = X @ v
    TV = M @ (r_pi + (1.0 - lam) * P_gamma @ V)
    projection = X @ np.linalg.solve(X.T @ D @ X, X.T @ D)
    err = V - projection @ TV
    return float(err @ D @ err)


def td_fixed_point(m: TabularMDP, pi: np.ndarray, X: np.ndarray, lam: float) -> np.ndarray:
    """Weights v* with X v* = Pi T^lambda X v*."""
    d_b = stationary_distribution(m)
    _check_rank(X, d_b)
    P_gamma, r_pi, M = _lambda_operator_parts(m, pi, lam)
    D = np.diag(d_b)
    A = X.T @ D @ (X - (1.0 - lam) * M @ P_gamma @ X)
    b = X.T @ D @ M @ r_pi
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError as e:
        raise OracleError(f"TD fixed-point system is singular: {e}")


# --------------------------------------------------------- lambda-returns

def _require_terminated(steps: Sequence[LambdaStep]) -> None:
    if not steps:
        raise OracleError("trajectory is empty")
    if steps[-1].gamma_next != 0.0:
        raise OracleError("trajectory must end with a gamma=0 step")


def forward_lambda_return(steps: Sequence[LambdaStep], values: np.ndarray, lam: float) -> np.ndarray:
    """
    Off-policy lambda-returns by backward recursion:
    R_t = r_{t+1} + (1 - lambda) gamma_{t+1} V(s_{t+1}) + lambda gamma_{t+1} rho_{t+1} R_{t+1}.
    """
    _require_terminated(steps)
    returns = np.zeros(len(steps))
    nxt = 0.0
    for t in range(len(steps) - 1, -1, -1):
        step = steps[t]
        if t == len(steps) - 1:
            returns[t] = step.reward
        else:
            following = steps[t + 1]
            returns[t] = (step.reward + (1.0 - lam) * step.gamma_next * values[following.state]
                          + lam * step.gamma_next * following.rho * nxt)
        nxt = returns[t]
    return returns


def delta_lambda_recursion(steps: Sequence[LambdaStep], values: np.ndarray, lam: float) -> np.ndarray:
    """
    Forward-view TD errors R_t - V(s_t) by the TD-error form of the recursion:
    d_t = delta_t + lambda gamma_{t+1} (rho_{t+1} d_{t+1} - (1 - rho_{t+1}) V(s_{t+1})).
    """
    _require_terminated(steps)
    out = np.zeros(len(steps))
    nxt = 0.0
    for t in range(len(steps) - 1, -1, -1):
        step = steps[t]
        if t == len(steps) - 1:
            out[t] = step.reward - values[step.state]
        else:
            following = steps[t + 1]
            v_next = values[following.state]
            delta = step.reward + step.gamma_next * v_next - values[step.state]
            out[t] = delta + lam * step.gamma_next * (following.rho * nxt - (1.0 - following.rho) * v_next)
        nxt = out[t]
    return out


# ------------------------------------------------------- exact expectations

def _ratio_table(m: TabularMDP, pi: np.ndarray) -> np.ndarray:
    return pi / m.behavior


def eq9_expectation(m: TabularMDP, u: np.ndarray, values: np.ndarray,
                    phi: Optional[np.ndarray] = None) -> np.ndarray:
    """
    sum over (s, a, s') of d_b b rho psi gamma(s') (sum_a' b(a'|s')(1 - rho(s',a'))) V(s'),
    which vanishes for every V.
    """
    phi = _phi_or_tabular(m, phi)
    d_b = stationary_distribution(m)
    pi = gibbs_table(u, phi)
    rho = _ratio_table(m, pi)
    psi = gibbs_score_table(u, phi)
    correction = np.einsum('ta,ta->t', m.behavior, 1.0 - rho)
    next_term = m.gamma * correction * values
    return np.einsum('s,sa,sa,sad,sat,t->d', d_b, m.behavior, rho, psi, m.P, next_term)


def baseline_expectation(m: TabularMDP, u: np.ndarray, baseline: np.ndarray,
                         phi: Optional[np.ndarray] = None) -> np.ndarray:
    """E_{s~d_b, a~b}[rho psi c(s)]; zero for any state baseline c."""
    phi = _phi_or_tabular(m, phi)
    d_b = stationary_distribution(m)
    pi = gibbs_table(u, phi)
    rho = _ratio_table(m, pi)
    psi = gibbs_score_table(u, phi)
    return np.einsum('s,sa,sa,sad,s->d', d_b, m.behavior, rho, psi, baseline)


# ---------------------------------------------- forward/backward comparison

def _simulate_behavior(m: TabularMDP, num_steps: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """States s_0..s_N and actions a_0..a_{N-1} of one behavior stream from state 0."""
    cum_b = [list(np.cumsum(row)) for row in m.behavior]
    cum_p = [[list(np.cumsum(m.P[s, a])) for a in range(m.num_actions)] for s in range(m.num_states)]
    draws_a = rng.random(num_steps).tolist()
    draws_s = rng.random(num_steps).tolist()
    states = np.zeros(num_steps + 1, dtype=np.int64)
    actions = np.zeros(num_steps, dtype=np.int64)
    s = 0
    for t in range(num_steps):
        a = min(bisect.bisect_right(cum_b[s], draws_a[t]), m.num_actions - 1)
        sp = min(bisect.bisect_right(cum_p[s][a], draws_s[t]), m.num_states - 1)
        actions[t] = a
        states[t + 1] = sp
        s = sp
    return states, actions


def check_forward_backward(m: TabularMDP, u: np.ndarray, values: np.ndarray, lam: float,
                           num_steps: int, rng: np.random.Generator,
                           phi: Optional[np.ndarray] = None, burn_in: int = BURN_IN_STEPS,
                           num_batches: int = 100) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Compare the forward view rho_t psi_t (R_t - V(s_t)) with the backward view
    delta_t e_t over one behavior stream, with fixed u and V.

    Returns the component-wise means of both views and the batch-means standard
    error of their per-sample difference.
    """
    phi = _phi_or_tabular(m, phi)
    pi = gibbs_table(u, phi)
    rho_table = _ratio_table(m, pi)
    psi_table = gibbs_score_table(u, phi)

    total = burn_in + num_steps
    states, actions = _simulate_behavior(m, total, rng)
    s, a, sp = states[:-1], actions, states[1:]
    rewards = m.R[s, a, sp]
    gamma_next = m.gamma[sp]
    rho = rho_table[s, a]
    psi = psi_table[s, a]
    v_s = values[s]
    v_sp = values[sp]
    deltas = rewards + gamma_next * v_sp - v_s

    # Forward view; the lambda term of the final step is truncated.
    returns = np.zeros(total)
    nxt = 0.0
    r_list, g_list, vsp_list, rho_list = rewards.tolist(), gamma_next.tolist(), v_sp.tolist(), rho.tolist()
    for t in range(total - 1, -1, -1):
        rho_next = rho_list[t + 1] if t + 1 < total else 0.0
        nxt = r_list[t] + (1.0 - lam) * g_list[t] * vsp_list[t] + lam * g_list[t] * rho_next * nxt
        returns[t] = nxt
    forward = (returns - v_s)[:, None] * (rho[:, None] * psi)

    # Backward view.
    gamma_s = m.gamma[s]
    backward = np.zeros_like(psi)
    e = np.zeros(psi.shape[1])
    for t in range(total):
        e = rho[t] * (psi[t] + gamma_s[t] * lam * e)
        backward[t] = deltas[t] * e

    forward = forward[burn_in:]
    backward = backward[burn_in:]
    diff = forward - backward
    usable = (num_steps // num_batches) * num_batches
    batch_means = diff[:usable].reshape(num_batches, -1, diff.shape[1]).mean(axis=1)
    stderr = batch_means.std(axis=0, ddof=1) / np.sqrt(num_batches)
    return forward.mean(axis=0), backward.mean(axis=0), stderr


# ------------------------------------------------------- verification suite

@dataclass(frozen=True)
class VerificationResult:
    name: str
    passed: bool
    detail: str


def run_verification_suite(seed: int = 0, forward_backward_steps: int = 10 ** 5,
                           num_random_policies: int = 20) -> List[VerificationResult]:
    """Exact identities and tabular policy-gradient properties on the in-repo MDPs."""
    rng = np.random.default_rng(seed)
    results: List[VerificationResult] = []
    mdps: Dict[str, TabularMDP] = oracle_mdps()

    for name, m in mdps.items():
        u = rng.normal(0.0, 0.5, size=m.num_states * m.num_actions)
        sol = objective_and_gradients(m, u)
        consistency = float(np.max(np.abs(sol.V - np.sum(sol.pi * sol.Q, axis=1))))
        results.append(VerificationResult(f"{name}: V = sum pi Q", consistency < 1e-10,
                                          f"max error {consistency:.3e}"))
        values = rng.normal(size=m.num_states)
        zero9 = float(np.max(np.abs(eq9_expectation(m, u, values))))
        results.append(VerificationResult(f"{name}: next-state ratio correction vanishes", zero9 < 1e-12,
                                          f"max |E| {zero9:.3e}"))
        zero_b = float(np.max(np.abs(baseline_expectation(m, u, values))))
        results.append(VerificationResult(f"{name}: baseline invariance", zero_b < 1e-12,
                                          f"max |E| {zero_b:.3e}"))

    m = mdps['random_mdp']
    d_b = stationary_distribution(m)
    phi = tabular_phi(m)
    improved = 0
    for _ in range(num_random_policies):
        u = rng.normal(size=m.num_states * m.num_actions)
        g = approximate_gradient(m, u, phi, d_b)
        u_new = u + 1e-3 * g / np.linalg.norm(g)
        V_old, _ = exact_values(m, gibbs_table(u, phi))
        V_new, _ = exact_values(m, gibbs_table(u_new, phi))
        if d_b @ V_new >= d_b @ V_old - 1e-9 and np.all(V_new >= V_old - 1e-9):
            improved += 1
    results.append(VerificationResult("random_mdp: small step along g improves the policy",
                                      improved == num_random_policies,
                                      f"{improved}/{num_random_policies} policies improved"))

    u_star = ascend(m, rng.normal(size=m.num_states * m.num_actions), phi)
    grad_norm = float(np.linalg.norm(finite_difference_gradient(m, u_star, phi, d_b)))
    results.append(VerificationResult("random_mdp: stationary point of g is stationary for J",
                                      grad_norm < 1e-4, f"|grad J| {grad_norm:.3e}"))

    ring = mdps['three_state_ring']
    u = rng.normal(0.0, 0.5, size=ring.num_states * ring.num_actions)
    values = rng.normal(size=ring.num_states)
    for lam in (0.0, 0.5, 0.8):
        fwd, bwd, se = check_forward_backward(ring, u, values, lam, forward_backward_steps, rng)
        gap = np.abs(fwd - bwd)
        ok = bool(np.all(gap == 0.0)) if lam == 0.0 else bool(np.all(gap <= 3.0 * se + 1e-15))
        results.append(VerificationResult(f"three_state_ring: forward/backward views agree (lambda={lam})",
                                          ok, f"max gap {float(gap.max()):.3e}"))

    passed = sum(r.passed for r in results)
    logger.info(f"Oracle verification: {passed}/{len(results)} checks passed")
    return results
