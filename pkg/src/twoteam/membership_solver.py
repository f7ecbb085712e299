"""Nash solver for two-team zero-sum polymatrix games with independent adversaries.

The inner maximization over the adversary simplices is linear in each
adversary's strategy, so it collapses to a pointwise maximum over pure
actions (LP duality with one dual variable per adversary).  That leaves a
box-style quadratic minimization over the team-X simplices:

    min_x  -sum_{i<i'} x_i A^{i,i'} x_{i'} + sum_j gamma_j(x),
    gamma_j(x) = max_k sum_i e_k . A^{j,i} x_i.

A KKT point of this program, together with multipliers for the tight
constraints, reconstructs a Nash equilibrium directly: the adversaries play
their constraint multipliers.  The search runs projected gradient descent
with Armijo backtracking on the eliminated objective, then pins the final
active set down with an exact linear solve on the identified face.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .game_core import (
    NashReport,
    PolymatrixGame,
    StrategyProfile,
    TwoTeamStructure,
    validate_two_team,
    verify_epsilon_nash,
)
from .lp_solver import OPTIMAL, LinearProgram, find_feasible, solve_lp

DEFAULT_TOL = 1e-8
MAX_ITER = 1_000_000
ACTIVITY_THRESHOLD = 1e-7


class SolverError(RuntimeError):
    """A pipeline stage failed; the message carries stage attribution."""


class MultiplierExtractionError(SolverError):
    """The multiplier system is infeasible: the point is not close enough
    to a KKT point at the requested band."""


@dataclass
class DualMinProgram:
    """The eliminated minimization program for one game.

    ``coord[(a, b)]`` (a < b, team-X grid indices) holds the padded
    coordination matrix between X players a and b; ``cross[j][i]`` holds
    the padded A^{y_j, x_i} matrix or None when the edge is absent.  All
    players are padded to a common strategy count m by duplicating their
    last action; ``orig_counts`` remembers the true counts so solutions can
    be folded back.
    """

    game: PolymatrixGame
    structure: TwoTeamStructure
    xs: tuple[int, ...]
    ys: tuple[int, ...]
    m: int
    coord: dict
    cross: list
    bound_M: float
    orig_counts: dict

    # -- objective machinery -------------------------------------------------

    def adversary_payoffs(self, x: list) -> np.ndarray:
        """c[j, k] = sum_i e_k . A^{j,i} x_i for every adversary j and action k."""
        c = np.zeros((len(self.ys), self.m))
        for j in range(len(self.ys)):
            for i in range(len(self.xs)):
                mat = self.cross[j][i]
                if mat is not None:
                    c[j] += mat @ x[i]
        return c

    def gamma_of(self, x: list) -> np.ndarray:
        """Tight dual values: gamma_j = max_k c[j, k]."""
        c = self.adversary_payoffs(x)
        return c.max(axis=1) if len(self.ys) else np.zeros(0)

    def coordination_value(self, x: list) -> float:
        total = 0.0
        for (a, b), mat in self.coord.items():
            total += float(x[a] @ mat @ x[b])
        return total

    def objective(self, x: list) -> float:
        gam = self.gamma_of(x)
        return -self.coordination_value(x) + float(gam.sum())

    def linear_part(self, x: list) -> list:
        """b_a = -sum_{b != a} A^{a,b} x_b (gradient of the coordination term)."""
        out = [np.zeros(self.m) for _ in self.xs]
        for (a, b), mat in self.coord.items():
            out[a] -= mat @ x[b]
            out[b] -= mat.T @ x[a]
        return out

    def subgradient(self, x: list) -> list:
        """Gradient with the lowest-index maximizing action as the support."""
        c = self.adversary_payoffs(x)
        ks = np.argmax(c, axis=1) if len(self.ys) else np.zeros(0, dtype=int)
        g = self.linear_part(x)
        for j in range(len(self.ys)):
            for i in range(len(self.xs)):
                mat = self.cross[j][i]
                if mat is not None:
                    g[i] = g[i] + mat[ks[j], :]
        return g

    def payoff_scale(self) -> float:
        return 1.0 + self.game.max_abs_payoff()


@dataclass
class MultiplierCertificate:
    """(mu, lambda, nu) witnessing the KKT conditions of the dual program.

    mu[j] is adversary j's multiplier vector over actions (a probability
    distribution), lam[i] the simplex equality multiplier of X player i,
    nu[i] the nonnegativity multipliers of X player i's coordinates.
    """

    mu: np.ndarray
    lam: np.ndarray
    nu: np.ndarray


@dataclass
class KKTSearchResult:
    x: list
    gamma: np.ndarray
    residual: float
    converged: bool
    iterations: int
    objective: float


def _pad_matrix(mat: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Duplicate the last row/column up to the requested shape."""
    r_idx = np.minimum(np.arange(rows), mat.shape[0] - 1)
    c_idx = np.minimum(np.arange(cols), mat.shape[1] - 1)
    return mat[np.ix_(r_idx, c_idx)]


def build_dual_program(game: PolymatrixGame, structure: TwoTeamStructure) -> DualMinProgram:
    """Transcribe a validated independent-adversary game into the dual form.

    Rejects games with adversary-adversary edges: without independence the
    inner maximum does not separate per adversary and the elimination is
    unsound.
    """
    report = validate_two_team(game, structure)
    if not report.passed:
        raise SolverError(
            f"build_dual_program: game fails two-team validation "
            f"({len(report.violations)} entry violations)"
        )
    if not structure.independent_adversaries:
        raise SolverError(
            "build_dual_program: unsupported: adversary-adversary edges "
            "(only independent adversaries are handled)"
        )
    xs = tuple(structure.team_x)
    ys = tuple(structure.team_y)
    if not xs:
        raise SolverError("build_dual_program: team X is empty")
    m = max(game.strategy_counts[p] for p in xs + ys)

    coord = {}
    for a in range(len(xs)):
        for b in range(a + 1, len(xs)):
            if game.has_edge(xs[a], xs[b]):
                coord[(a, b)] = _pad_matrix(game.payoff(xs[a], xs[b]), m, m)
    cross = [
        [
            _pad_matrix(game.payoff(ys[j], xs[i]), m, m) if game.has_edge(ys[j], xs[i]) else None
            for i in range(len(xs))
        ]
        for j in range(len(ys))
    ]

    # Cap that can never be tight: one above the best any adversary row can
    # collect even with every X player conspiring.
    maxval = 0.0
    for j in range(len(ys)):
        for k in range(m):
            row_total = sum(
                float(cross[j][i][k, :].max()) for i in range(len(xs)) if cross[j][i] is not None
            )
            maxval = max(maxval, row_total)
    bound_M = maxval + 1.0

    return DualMinProgram(
        game=game,
        structure=structure,
        xs=xs,
        ys=ys,
        m=m,
        coord=coord,
        cross=cross,
        bound_M=bound_M,
        orig_counts={p: game.strategy_counts[p] for p in xs + ys},
    )


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort method)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, len(v) + 1)
    rho = idx[u - css / idx > 0][-1]
    tau = css[rho - 1] / rho
    return np.maximum(v - tau, 0.0)


def _active_sets(prog: DualMinProgram, x: list, band: float):
    c = prog.adversary_payoffs(x)
    gam = c.max(axis=1) if len(prog.ys) else np.zeros(0)
    acts = [np.nonzero(gam[j] - c[j] <= band)[0] for j in range(len(prog.ys))]
    zeros = [np.nonzero(x[a] <= band)[0] for a in range(len(prog.xs))]
    return zeros, acts


def stationarity_residual(prog: DualMinProgram, x: list, band: float = ACTIVITY_THRESHOLD):
    """Def 4.2-style residual against the current active set, via a small LP.

    Minimizes the sup-norm of the stationarity vector over admissible
    multipliers (mu supported on near-tight adversary constraints, nu on
    near-zero coordinates, lambda free).  Returns (residual, (mu, lam, nu))
    or (inf, None) when the LP solver stalls.
    """
    nx, ny, m = len(prog.xs), len(prog.ys), prog.m
    zeros, acts = _active_sets(prog, x, band)
    b = prog.linear_part(x)

    mu_slots = [(j, int(k)) for j in range(ny) for k in acts[j]]
    nu_slots = [(a, int(k)) for a in range(nx) for k in zeros[a]]
    n_mu, n_nu = len(mu_slots), len(nu_slots)
    nvars = 1 + n_mu + nx + n_nu  # t, mu, lambda, nu
    mu_at = {slot: 1 + s for s, slot in enumerate(mu_slots)}
    lam_at = lambda a: 1 + n_mu + a
    nu_at = {slot: 1 + n_mu + nx + s for s, slot in enumerate(nu_slots)}

    rows, rhs = [], []
    for a in range(nx):
        for k in range(m):
            coef = np.zeros(nvars)
            for j in range(ny):
                mat = prog.cross[j][a]
                if mat is None:
                    continue
                for kk in acts[j]:
                    coef[mu_at[(j, int(kk))]] += mat[int(kk), k]
            coef[lam_at(a)] += 1.0
            if (a, k) in nu_at:
                coef[nu_at[(a, k)]] -= 1.0
            # b_ak + coef.z in [-t, t]
            up = coef.copy()
            up[0] = -1.0
            rows.append(up)
            rhs.append(-b[a][k])
            dn = -coef
            dn[0] = -1.0
            rows.append(dn)
            rhs.append(b[a][k])
    eq_rows, eq_rhs = [], []
    for j in range(ny):
        coef = np.zeros(nvars)
        for k in acts[j]:
            coef[mu_at[(j, int(k))]] = 1.0
        eq_rows.append(coef)
        eq_rhs.append(1.0)

    bounds = [(0.0, None)] * (1 + n_mu) + [(None, None)] * nx + [(0.0, None)] * n_nu
    obj = np.zeros(nvars)
    obj[0] = -1.0
    lp = LinearProgram(
        objective=obj,
        ineq_matrix=np.array(rows).reshape(-1, nvars) if rows else None,
        ineq_rhs=np.array(rhs) if rows else None,
        eq_matrix=np.array(eq_rows).reshape(-1, nvars) if eq_rows else None,
        eq_rhs=np.array(eq_rhs) if eq_rows else None,
        bounds=bounds,
    )
    out = solve_lp(lp)
    if out.status != OPTIMAL:
        return np.inf, None
    z = out.solution
    mu = np.zeros((ny, m))
    for (j, k), col in mu_at.items():
        mu[j, k] = max(z[col], 0.0)
    lam = np.array([z[lam_at(a)] for a in range(nx)])
    nu = np.zeros((nx, m))
    for (a, k), col in nu_at.items():
        nu[a, k] = max(z[col], 0.0)
    return max(float(z[0]), 0.0), (mu, lam, nu)


def _face_system_solve(prog: DualMinProgram, zeros, acts):
    """Solve the KKT equations with complementarity pinned by the face.

    Unknowns are (x, gamma, mu on active slots, lambda); the system is
    linear because complementarity is pinned by the face.  Returns the raw
    (x, gamma) without primal validity checks, or None when the system is
    inconsistent.  Multiplier validity is never judged here: the system can
    be rank-deficient with an invalid least-norm representative even when
    valid multipliers exist, so callers score points with the stationarity
    LP instead.
    """
    nx, ny, m = len(prog.xs), len(prog.ys), prog.m
    if any(len(a) == 0 for a in acts):
        return None
    mu_slots = [(j, int(k)) for j in range(ny) for k in acts[j]]
    nvars = nx * m + ny + len(mu_slots) + nx
    x_at = lambda a, k: a * m + k
    g_at = lambda j: nx * m + j
    mu_at = {slot: nx * m + ny + s for s, slot in enumerate(mu_slots)}
    lam_at = lambda a: nx * m + ny + len(mu_slots) + a

    rows, rhs = [], []
    zero_sets = [set(int(k) for k in z) for z in zeros]
    for a in range(nx):
        for k in range(m):
            if k in zero_sets[a]:
                continue
            coef = np.zeros(nvars)
            for (p, q), mat in prog.coord.items():
                if p == a:
                    coef[x_at(q, 0) : x_at(q, 0) + m] -= mat[k, :]
                elif q == a:
                    coef[x_at(p, 0) : x_at(p, 0) + m] -= mat.T[k, :]
            for j in range(ny):
                mat = prog.cross[j][a]
                if mat is None:
                    continue
                for kk in acts[j]:
                    coef[mu_at[(j, int(kk))]] += mat[int(kk), k]
            coef[lam_at(a)] += 1.0
            rows.append(coef)
            rhs.append(0.0)
    for a in range(nx):
        coef = np.zeros(nvars)
        coef[x_at(a, 0) : x_at(a, 0) + m] = 1.0
        rows.append(coef)
        rhs.append(1.0)
        for k in zero_sets[a]:
            coef = np.zeros(nvars)
            coef[x_at(a, k)] = 1.0
            rows.append(coef)
            rhs.append(0.0)
    for j in range(ny):
        coef = np.zeros(nvars)
        for k in acts[j]:
            coef[mu_at[(j, int(k))]] = 1.0
        rows.append(coef)
        rhs.append(1.0)
        for k in acts[j]:
            coef = np.zeros(nvars)
            coef[g_at(j)] = 1.0
            for i in range(nx):
                mat = prog.cross[j][i]
                if mat is not None:
                    coef[x_at(i, 0) : x_at(i, 0) + m] -= mat[int(k), :]
            rows.append(coef)
            rhs.append(0.0)

    A = np.array(rows)
    bvec = np.array(rhs)
    try:
        # lstsq tolerates the rank-deficient faces that show up at ties; a
        # refinement step keeps residuals near machine precision even for
        # badly scaled payoffs.
        z, *_ = np.linalg.lstsq(A, bvec, rcond=None)
        corr, *_ = np.linalg.lstsq(A, bvec - A @ z, rcond=None)
        z = z + corr
    except np.linalg.LinAlgError:
        return None
    if not np.isfinite(z).all():
        return None
    # An inconsistent system means the face guess is wrong.
    if np.abs(A @ z - bvec).max() > 1e-7 * max(1.0, np.abs(bvec).max()):
        return None

    x = [z[x_at(a, 0) : x_at(a, 0) + m].copy() for a in range(nx)]
    gamma = np.array([z[g_at(j)] for j in range(ny)])
    return x, gamma


def _face_solve(prog: DualMinProgram, zeros, acts, max_pivots: int = 60):
    """Primal active-set walk starting from a guessed face.

    Solves the pinned KKT system; whenever the raw solution leaves the
    feasible region (a negative coordinate, or an assumed-inactive
    adversary constraint rising above gamma), the worst offender joins the
    working set and the system is re-solved.  When growing an adversary's
    support makes the system inconsistent, the new action is swapped for an
    existing one instead (a support change).  Returns a primal-valid
    (x, gamma) or None.
    """
    nx, ny, m = len(prog.xs), len(prog.ys), prog.m
    scale = prog.payoff_scale()
    tol_c = 1e-7 * scale
    zeros = [set(int(k) for k in z) for z in zeros]
    acts = [set(int(k) for k in a) for a in acts]

    def solve_current(zs, ac):
        return _face_system_solve(
            prog,
            [np.array(sorted(z), dtype=np.int64) for z in zs],
            [np.array(sorted(a), dtype=np.int64) for a in ac],
        )

    raw = solve_current(zeros, acts)
    for _ in range(max_pivots):
        if raw is None:
            return None
        x, gamma = raw
        worst_coord, worst_val = None, -tol_c
        for a in range(nx):
            if abs(x[a].sum() - 1.0) > tol_c:
                return None
            k = int(np.argmin(x[a]))
            if x[a][k] < worst_val and k not in zeros[a]:
                worst_coord, worst_val = (a, k), x[a][k]
        if worst_coord is not None:
            a, k = worst_coord
            if len(zeros[a]) + 1 >= m:
                return None
            zeros[a].add(k)
            raw = solve_current(zeros, acts)
            continue
        xc = []
        for a in range(nx):
            v = np.maximum(x[a], 0.0)
            for k in zeros[a]:
                v[k] = 0.0
            xc.append(v / v.sum())
        c = prog.adversary_payoffs(xc)
        worst_act, worst_gap = None, tol_c
        for j in range(ny):
            k = int(np.argmax(c[j]))
            gap = c[j][k] - gamma[j]
            if gap > worst_gap and k not in acts[j]:
                worst_act, worst_gap = (j, k), gap
        if worst_act is None:
            return xc, prog.gamma_of(xc)
        j, k = worst_act
        grown = [set(a) for a in acts]
        grown[j].add(k)
        raw = solve_current(zeros, grown)
        if raw is not None:
            acts = grown
            continue
        # Growing the support is inconsistent: swap the new action in for
        # one already assumed active.
        swapped = None
        for k_out in sorted(acts[j]):
            trial = [set(a) for a in acts]
            trial[j].discard(k_out)
            trial[j].add(k)
            raw = solve_current(zeros, trial)
            if raw is not None:
                swapped = trial
                break
        if swapped is None:
            return None
        acts = swapped
    return None


def _weighted_subgradient(prog: DualMinProgram, x: list, mu: np.ndarray) -> list:
    """Subgradient with the given per-adversary action weights."""
    g = prog.linear_part(x)
    for j in range(len(prog.ys)):
        for i in range(len(prog.xs)):
            mat = prog.cross[j][i]
            if mat is not None:
                g[i] = g[i] + mat.T @ mu[j]
    return g


def _descent_direction(prog: DualMinProgram, x: list, band: float):
    """Steepest feasible direction for the piecewise objective, via an LP.

    Minimizes the directional derivative max over near-active branches,
    over box-normalized tangent directions that respect the simplex and
    the zero coordinates.  Returns (slope, direction) or None; a slope
    near zero certifies first-order stationarity at this band.
    """
    nx, ny, m = len(prog.xs), len(prog.ys), prog.m
    zeros, acts = _active_sets(prog, x, band)
    L = prog.linear_part(x)
    nvars = nx * m + ny  # direction entries then one epigraph var per adversary
    d_at = lambda a, k: a * m + k

    obj = np.zeros(nvars)
    for a in range(nx):
        obj[a * m : a * m + m] = -np.asarray(L[a])
    obj[nx * m :] = -1.0

    rows, rhs = [], []
    for j in range(ny):
        for k in acts[j]:
            coef = np.zeros(nvars)
            for i in range(nx):
                mat = prog.cross[j][i]
                if mat is not None:
                    coef[i * m : i * m + m] += mat[int(k), :]
            coef[nx * m + j] -= 1.0
            rows.append(coef)
            rhs.append(0.0)
    eq_rows = []
    for a in range(nx):
        coef = np.zeros(nvars)
        coef[a * m : a * m + m] = 1.0
        eq_rows.append(coef)
    bounds = []
    zero_sets = [set(int(k) for k in z) for z in zeros]
    for a in range(nx):
        for k in range(m):
            bounds.append((0.0, 1.0) if k in zero_sets[a] else (-1.0, 1.0))
    bounds.extend([(None, None)] * ny)

    lp = LinearProgram(
        objective=obj,
        ineq_matrix=np.array(rows).reshape(-1, nvars) if rows else None,
        ineq_rhs=np.array(rhs) if rows else None,
        eq_matrix=np.array(eq_rows),
        eq_rhs=np.zeros(nx),
        bounds=bounds,
    )
    out = solve_lp(lp)
    if out.status != OPTIMAL:
        return None
    slope = -float(out.value)
    direction = [out.solution[a * m : a * m + m].copy() for a in range(nx)]
    return slope, direction


def _armijo_step(prog: DualMinProgram, x: list, g: list, val: float, step: float,
                 max_backtracks: int = 30):
    """Backtracking projected step; returns (new x, used step) or None."""
    s = step
    for _ in range(max_backtracks):
        cand = [project_simplex(x[a] - s * g[a]) for a in range(len(x))]
        move2 = sum(float(np.sum((cand[a] - x[a]) ** 2)) for a in range(len(x)))
        if move2 <= 1e-30:
            return None
        if prog.objective(cand) <= val - 1e-4 * move2 / s:
            return cand, s
        s *= 0.5
    return None


def find_kkt_point(
    prog: DualMinProgram,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    max_iter: int = MAX_ITER,
    num_starts: int = 12,
    trace: list | None = None,
) -> KKTSearchResult:
    """Projected gradient descent plus exact refinement on the guessed face.

    Descent uses the lowest-index subgradient.  When that stops making
    progress at a tie, the action weights switch to the optimal multipliers
    of the active-set stationarity residual, which point along the kink
    instead of across it.  Every stall (and periodically during descent)
    the current active set is frozen and the KKT system solved exactly on
    that face; success is measured by the active-set stationarity residual.
    A deterministic set of restarts runs to completion and the converged
    point with the lowest objective value wins.  If nothing converges
    within the iteration budget, the best point found is returned flagged
    not-converged.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    nx, m = len(prog.xs), prog.m
    rng = np.random.default_rng(seed)
    scale = prog.payoff_scale()
    step0 = 1.0 / scale
    face_bands = [1e-10, 1e-8, 1e-6, 1e-4, 1e-2, 1e-3 * scale]
    mu_bands = [1e-6 * scale, 1e-3 * scale, 1e-1 * scale]

    starts = [[np.full(m, 1.0 / m) for _ in range(nx)]]
    for _ in range(num_starts - 1):
        starts.append([rng.dirichlet(np.ones(m)) for _ in range(nx)])

    budget = max(min(max_iter // max(num_starts, 1), 4000), 50)
    global_it = 0
    candidates = []
    best_fallback = None  # (residual, x, gamma, objective)

    def try_faces(x):
        # Candidate zero sets come from the iterate's own small coordinates
        # (descent may still be far from pinning them to exactly 0).
        thresholds = [0.0]
        small = sorted({float(v) for xa in x for v in xa if 1e-12 < v < 0.3})
        thresholds.extend(small[:6])
        zero_cands = []
        seen = set()
        for t in thresholds:
            zeros = [np.nonzero(xa <= t + 1e-12)[0] for xa in x]
            if any(len(z) == len(xa) for z, xa in zip(zeros, x)):
                continue
            sig = tuple(tuple(int(v) for v in z) for z in zeros)
            if sig not in seen:
                seen.add(sig)
                zero_cands.append(zeros)
        act_cands = []
        seen = set()
        c = prog.adversary_payoffs(x)
        gam = c.max(axis=1) if len(prog.ys) else np.zeros(0)

        def push_acts(acts):
            sig = tuple(tuple(int(v) for v in a) for a in acts)
            if sig not in seen:
                seen.add(sig)
                act_cands.append(acts)

        for band in face_bands:
            push_acts([np.nonzero(gam[j] - c[j] <= band)[0] for j in range(len(prog.ys))])
        # Ties the iterate has not finished closing are invisible to the gap
        # bands; the residual LP's multiplier support sees them early.
        for band in (1e-2, 0.05 * scale, 0.2 * scale):
            _, mults = stationarity_residual(prog, x, band=band)
            if mults is None:
                continue
            acts = []
            for j in range(len(prog.ys)):
                support = np.nonzero(mults[0][j] > 1e-9)[0]
                if len(support) == 0:
                    support = np.array([int(np.argmax(c[j]))])
                acts.append(support)
            push_acts(acts)
        val = prog.objective(x)
        for zeros in zero_cands:
            for acts in act_cands:
                face = _face_solve(prog, zeros, acts)
                if face is None:
                    continue
                fx, fgamma = face
                # Descent never needs to jump upward onto a face; skipping
                # those avoids pricing garbage faces with the residual LP.
                if prog.objective(fx) > val + 1e-6 * scale:
                    continue
                residual, _ = stationarity_residual(prog, fx)
                if residual <= tol:
                    return fx, fgamma, residual
        return None

    def note_point(x):
        nonlocal best_fallback
        residual, _ = stationarity_residual(prog, x)
        gamma = prog.gamma_of(x)
        if residual <= tol:
            candidates.append((prog.objective(x), residual, x, gamma))
        elif best_fallback is None or residual < best_fallback[0]:
            best_fallback = (residual, x, gamma, prog.objective(x))

    for start in starts:
        x = [v.copy() for v in start]
        step = step0
        done = False
        window_val = np.inf
        cached_mu = None
        sub_useless = 0
        stuck_events = 0
        # Later starts only add basin diversity; once one has converged
        # they run on a short leash.
        start_budget = budget if not candidates else min(budget, 400)
        for it in range(start_budget):
            val = prog.objective(x)
            if it % 200 == 199:
                # Stagnation guard: zigzag progress can shrink geometrically.
                if window_val - val <= 1e-14 * scale:
                    hit = try_faces(x)
                    if hit is not None:
                        fx, fgamma, res = hit
                        candidates.append((prog.objective(fx), res, fx, fgamma))
                    else:
                        note_point(x)
                    done = True
                    break
                window_val = val
            moved = None
            if sub_useless < 3 or it % 8 == 0:
                moved = _armijo_step(prog, x, prog.subgradient(x), val, step)
                sub_useless = 0 if (moved and moved[1] >= step0 * 1e-3) else sub_useless + 1
            # A microscopic accepted step is a zigzag against a kink, not
            # progress; switch to multiplier-weighted descent along it.
            if moved is None or moved[1] < step0 * 1e-3:
                if cached_mu is not None:
                    alt = _armijo_step(
                        prog, x, _weighted_subgradient(prog, x, cached_mu), val, step0
                    )
                    if alt is not None and alt[1] >= step0 * 1e-3:
                        if moved is None or alt[1] > moved[1]:
                            moved = alt
                    else:
                        cached_mu = None
                if cached_mu is None:
                    for band in mu_bands:
                        _, mults = stationarity_residual(prog, x, band=band)
                        if mults is None:
                            continue
                        alt = _armijo_step(
                            prog, x, _weighted_subgradient(prog, x, mults[0]), val, step0
                        )
                        if alt is not None and (moved is None or alt[1] > moved[1]):
                            moved = alt
                            cached_mu = mults[0]
                        if alt is not None:
                            break
            if trace is not None:
                trace.append((global_it, val, 0.0 if moved is None else
                              abs(val - prog.objective(moved[0])) / max(moved[1], 1e-300)))
            global_it += 1
            stuck = moved is None
            if not stuck:
                x, used = moved
                step = max(min(used * 2.0, step0 * 64.0), step0 * 1e-4)
            if stuck or it % 8 == 7 or it == 0:
                hit = try_faces(x)
                if hit is not None:
                    fx, fgamma, res = hit
                    candidates.append((prog.objective(fx), res, fx, fgamma))
                    done = True
                    break
                if stuck:
                    stuck_events += 1
                    if stuck_events > 30:
                        note_point(x)
                        done = True
                        break
                    # Chosen subgradients can all point across a kink even
                    # when descent exists; ask the steepest-direction LP.
                    escaped = False
                    for band in (1e-9, 1e-6, 1e-4 * scale):
                        found = _descent_direction(prog, x, band)
                        if found is None:
                            continue
                        slope, direction = found
                        if slope >= -1e-11 * scale:
                            continue
                        mv = _armijo_step(
                            prog, x, [-d for d in direction], val, step0
                        )
                        if mv is not None:
                            x, _ = mv
                            step = step0
                            escaped = True
                            break
                    if not escaped:
                        for _ in range(6):
                            d = [rng.normal(size=m) for _ in range(nx)]
                            mv = _armijo_step(prog, x, d, val, step0)
                            if mv is not None and mv[1] >= step0 * 1e-6:
                                x, _ = mv
                                step = step0
                                escaped = True
                                break
                    if not escaped:
                        note_point(x)
                        done = True
                        break
        if not done:
            # Budget exhausted; give the face ladder a last chance.
            hit = try_faces(x)
            if hit is not None:
                fx, fgamma, res = hit
                candidates.append((prog.objective(fx), res, fx, fgamma))
            else:
                note_point(x)

    if candidates:
        candidates.sort(key=lambda c: c[0])
        obj, res, x, gamma = candidates[0]
        return KKTSearchResult(
            x=x, gamma=gamma, residual=res, converged=True,
            iterations=global_it, objective=obj,
        )
    residual, x, gamma, obj = best_fallback
    return KKTSearchResult(
        x=x, gamma=gamma, residual=residual, converged=False,
        iterations=global_it, objective=obj,
    )


def extract_multipliers(
    prog: DualMinProgram,
    x: list,
    gamma: np.ndarray,
    band: float = 1e-7,
) -> MultiplierCertificate:
    """Find (mu, lambda, nu) for a near-KKT point by LP feasibility.

    Stationarity is relaxed to a band around zero; complementarity is
    enforced structurally by restricting the multiplier supports to the
    active sets.  Raises MultiplierExtractionError when the system is
    infeasible, signalling that x is not close enough to a KKT point.
    """
    nx, ny, m = len(prog.xs), len(prog.ys), prog.m
    zeros, acts = _active_sets(prog, x, ACTIVITY_THRESHOLD)
    b = prog.linear_part(x)

    mu_slots = [(j, int(k)) for j in range(ny) for k in acts[j]]
    nu_slots = [(a, int(k)) for a in range(nx) for k in zeros[a]]
    nvars = len(mu_slots) + nx + len(nu_slots)
    mu_at = {slot: s for s, slot in enumerate(mu_slots)}
    lam_at = lambda a: len(mu_slots) + a
    nu_at = {slot: len(mu_slots) + nx + s for s, slot in enumerate(nu_slots)}

    rows, rhs = [], []
    for a in range(nx):
        for k in range(m):
            coef = np.zeros(nvars)
            for j in range(ny):
                mat = prog.cross[j][a]
                if mat is None:
                    continue
                for kk in acts[j]:
                    coef[mu_at[(j, int(kk))]] += mat[int(kk), k]
            coef[lam_at(a)] += 1.0
            if (a, k) in nu_at:
                coef[nu_at[(a, k)]] -= 1.0
            rows.append(coef)
            rhs.append(band - b[a][k])
            rows.append(-coef)
            rhs.append(band + b[a][k])
    eq_rows, eq_rhs = [], []
    for j in range(ny):
        coef = np.zeros(nvars)
        for k in acts[j]:
            coef[mu_at[(j, int(k))]] = 1.0
        eq_rows.append(coef)
        eq_rhs.append(1.0)

    bounds = [(0.0, None)] * len(mu_slots) + [(None, None)] * nx + [(0.0, None)] * len(nu_slots)
    lp = LinearProgram(
        objective=np.zeros(nvars),
        ineq_matrix=np.array(rows).reshape(-1, nvars) if rows else None,
        ineq_rhs=np.array(rhs) if rows else None,
        eq_matrix=np.array(eq_rows).reshape(-1, nvars) if eq_rows else None,
        eq_rhs=np.array(eq_rhs) if eq_rows else None,
        bounds=bounds,
    )
    out = find_feasible(lp)
    if out.status != OPTIMAL:
        raise MultiplierExtractionError(
            f"multiplier system infeasible at band {band}: "
            "point is not close enough to a KKT point"
        )
    z = out.solution
    mu = np.zeros((ny, m))
    for (j, k), col in mu_at.items():
        mu[j, k] = max(z[col], 0.0)
    for j in range(ny):
        if mu[j].sum() > 0:
            mu[j] /= mu[j].sum()
    lam = np.array([z[lam_at(a)] for a in range(nx)])
    nu = np.zeros((nx, m))
    for (a, k), col in nu_at.items():
        nu[a, k] = max(z[col], 0.0)
    return MultiplierCertificate(mu=mu, lam=lam, nu=nu)


def certificate_violation(
    prog: DualMinProgram, x: list, gamma: np.ndarray, cert: MultiplierCertificate
) -> float:
    """Worst violation of the three multiplier conditions (for checking)."""
    nx, ny, m = len(prog.xs), len(prog.ys), prog.m
    worst = 0.0
    b = prog.linear_part(x)
    for a in range(nx):
        r = b[a].copy()
        for j in range(ny):
            mat = prog.cross[j][a]
            if mat is not None:
                r += mat.T @ cert.mu[j]
        r += cert.lam[a]
        r -= cert.nu[a]
        worst = max(worst, float(np.abs(r).max()))
        for k in range(m):
            if cert.nu[a, k] > ACTIVITY_THRESHOLD:
                worst = max(worst, float(x[a][k]))
    c = prog.adversary_payoffs(x)
    for j in range(ny):
        worst = max(worst, abs(float(cert.mu[j].sum()) - 1.0))
        for k in range(m):
            if cert.mu[j, k] > ACTIVITY_THRESHOLD:
                worst = max(worst, abs(float(gamma[j] - c[j, k])))
    return worst


def _fold_padding(vec: np.ndarray, m_orig: int) -> np.ndarray:
    if len(vec) == m_orig:
        return vec
    out = vec[:m_orig].copy()
    out[m_orig - 1] += vec[m_orig:].sum()
    return out


def reconstruct_nash(prog: DualMinProgram, x: list, cert: MultiplierCertificate) -> StrategyProfile:
    """Assemble the full profile: X players play x, adversary j plays mu_j.

    Padded duplicate actions (identical payoffs) fold their mass back onto
    the original last action.
    """
    out = [None] * prog.game.num_players
    for a, pid in enumerate(prog.xs):
        out[pid] = _fold_padding(x[a], prog.orig_counts[pid])
    for j, pid in enumerate(prog.ys):
        out[pid] = _fold_padding(cert.mu[j], prog.orig_counts[pid])
    return StrategyProfile(out)


def solve(
    game: PolymatrixGame,
    structure: TwoTeamStructure,
    epsilon: float,
    seed: int = 0,
    trace_path: str | None = None,
):
    """Full pipeline: dual program, KKT search, multipliers, Nash profile.

    Returns (profile, NashReport); ``report.passed`` is the convergence
    flag.  The residual target is derived from the requested epsilon
    through the engineering bound eps ~ 10 * tol * (1 + max payoff); if a
    pass fails verification the target tightens and the pipeline retries.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    prog = build_dual_program(game, structure)
    scale = prog.payoff_scale()
    tol = min(DEFAULT_TOL, epsilon / (10.0 * scale))
    tol = max(tol, 1e-12)

    trace = [] if trace_path else None
    best = None  # (max_regret, profile, report)
    for attempt in range(3):
        result = find_kkt_point(prog, tol=tol, seed=seed + 1000 * attempt, trace=trace)
        try:
            cert = extract_multipliers(
                prog, result.x, result.gamma,
                band=max(1e-9, min(1e-7, 10.0 * result.residual + 1e-12)),
            )
        except MultiplierExtractionError:
            tol = max(tol * 1e-2, 1e-13)
            continue
        profile = reconstruct_nash(prog, result.x, cert)
        report = verify_epsilon_nash(game, profile, epsilon)
        if best is None or report.max_regret < best[0]:
            best = (report.max_regret, profile, report)
        if report.passed and result.converged:
            break
        tol = max(tol * 1e-2, 1e-13)

    if trace_path and trace is not None:
        with open(trace_path, "w", encoding="utf-8") as fh:
            for it, obj, res in trace:
                fh.write(f"{it},{obj:.17g},{res:.6e}\n")

    if best is None:
        raise SolverError("solve: no attempt produced a certificate")
    _, profile, report = best
    return profile, report
