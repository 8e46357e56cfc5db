"""Convex quadratic programs.

    minimize    1/2 x^T P x + q^T x
    subject to  G x <= h
                A x  = b

The reference backend is a primal-dual interior-point method with Mehrotra
predictor-corrector steps on a Ruiz-equilibrated problem.  ``G`` may be dense
or ``scipy.sparse``.  Each Newton system is solved through a sparse LU of the
slightly regularised augmented KKT matrix, followed by iterative refinement
against the unregularised system; this stays accurate when the barrier
weights span many orders of magnitude near the solution.  An adapter to the
Clarabel conic solver is available behind the same call when that package is
installed.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

OPTIMAL = "optimal"
MAX_ITER = "max_iterations"
FAILED = "failed"


@dataclass(eq=False)
class QpSubproblem:
    P: np.ndarray
    q: np.ndarray
    G: object
    h: np.ndarray
    A: object = None
    b: np.ndarray = None
    layout: dict = field(default_factory=dict)
    row_labels: list = None

    @property
    def n_vars(self):
        return self.q.size

    @property
    def n_ineq(self):
        return self.h.size


@dataclass
class QpResult:
    x: np.ndarray
    objective: float
    status: str
    iterations: int
    z: np.ndarray = None
    y: np.ndarray = None
    gap: float = np.nan
    primal_residual: float = np.nan
    dual_residual: float = np.nan


def _as_csr(M, ncols):
    if M is None:
        return sp.csr_matrix((0, ncols))
    return sp.csr_matrix(M)


def _ruiz(P, G, A, rounds=15):
    """Diagonal column (``D``) and inequality-row (``E``) scalings by Ruiz iteration."""
    n, m = P.shape[0], G.shape[0]
    D, E = np.ones(n), np.ones(m)
    absP = np.abs(P)
    absG = abs(G).tocsc()
    absA = abs(A).tocsc() if A is not None else None
    for _ in range(rounds):
        Gs = sp.diags(E) @ absG @ sp.diags(D)
        col = np.maximum(np.max(absP * np.outer(D, D), axis=0, initial=0.0),
                         Gs.max(axis=0).toarray().ravel() if m else 0.0)
        if absA is not None and absA.shape[0]:
            col = np.maximum(col, (absA @ sp.diags(D)).max(axis=0).toarray().ravel())
        col[col == 0] = 1.0
        row = Gs.max(axis=1).toarray().ravel() if m else np.ones(0)
        row[row == 0] = 1.0
        D = D / np.sqrt(col)
        E = E / np.sqrt(row)
        if np.all(np.abs(1 - col) < 1e-2) and np.all(np.abs(1 - row) < 1e-2):
            break
    return D, E


def _max_step(v, dv):
    neg = dv < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-v[neg] / dv[neg]))


class _Newton:
    """Factorisation of the reduced KKT system for one interior-point iterate."""

    def __init__(self, P, G, w, A):
        H = P + (G.T @ sp.diags(w) @ G).toarray()
        # try an exact factorisation first; regularise only if it breaks down
        reg = 0.0
        top = max(1.0, float(np.max(np.abs(np.diag(H)))))
        for attempt in range(8):
            try:
                self.chol = sla.cho_factor(H + reg * np.eye(H.shape[0]), lower=True,
                                           check_finite=False)
                break
            except np.linalg.LinAlgError:
                reg = 1e-15 * top * 100.0 ** attempt
        else:
            raise np.linalg.LinAlgError("reduced KKT matrix is not positive definite")
        self.regularised = reg > 0
        self.A = A
        if A is not None and A.shape[0]:
            Ad = A.toarray()
            HiAt = sla.cho_solve(self.chol, Ad.T, check_finite=False)
            self.Ad = Ad
            self.HiAt = HiAt
            self.schur = sla.cho_factor(Ad @ HiAt, lower=True, check_finite=False)
        else:
            self.Ad = None

    def _solve_once(self, r1, r2):
        dx = sla.cho_solve(self.chol, r1, check_finite=False)
        if self.Ad is None:
            return dx, np.zeros(0)
        dy = sla.cho_solve(self.schur, self.Ad @ dx - r2, check_finite=False)
        return dx - self.HiAt @ dy, dy

    def solve_full(self, P, G, GT, w, A, a, b, c, rounds=3):
        """Solve ``[P A' G'; A 0 0; G 0 -W^-1] (dx, dy, dz) = (a, b, c)``.

        The reduced factorisation is used as a preconditioner for a few rounds
        of iterative refinement on the full system, which recovers the accuracy
        lost when ``w`` spans many orders of magnitude.
        """
        dx = np.zeros(P.shape[0])
        dy = np.zeros(b.size)
        dz = np.zeros(c.size)
        ra, rb, rc = a, b, c
        sw = np.sqrt(w)
        best = np.inf
        for _ in range(rounds):
            ex, ey = self._solve_once(ra + GT @ (w * rc), rb)
            ez = w * (G @ ex - rc)
            nx, ny, nz = dx + ex, dy + ey, dz + ez
            na = a - P @ nx - GT @ nz
            nb = b
            if A is not None:
                na = na - A.T @ ny
                nb = b - A @ nx
            nc = c - G @ nx + nz / w
            err = max(np.max(np.abs(na), initial=0.0), np.max(np.abs(nb), initial=0.0),
                      np.max(np.abs(nc * sw), initial=0.0))
            if not err < best:
                break
            best = err
            dx, dy, dz, ra, rb, rc = nx, ny, nz, na, nb, nc
            if err < 1e-14:
                break
        return dx, dy, dz


class _Augmented:
    """Sparse LU of the regularised augmented system

        [ P + eps I    A^T      G^T          ]
        [ A            -eps I   0            ]
        [ G            0        -W^-1 - eps I ]

    used as a preconditioner for iterative refinement on the unregularised
    system.  Avoids forming ``G^T W G``, whose condition number squares that of
    the scaling ``W`` near the solution.
    """

    def __init__(self, P, G, w, A, eps=1e-11):
        n = P.shape[0]
        pA = 0 if A is None else A.shape[0]
        m = G.shape[0]
        blocks = [[sp.csr_matrix(P) + eps * sp.eye(n), None if A is None else A.T, G.T],
                  [A, -eps * sp.eye(pA) if pA else None, None],
                  [G, None, sp.diags(-1.0 / w - eps)]]
        if A is None:
            blocks = [[blocks[0][0], blocks[0][2]], [blocks[2][0], blocks[2][2]]]
        K = sp.bmat(blocks, format="csc")
        self.lu = spla.splu(K, permc_spec="COLAMD", diag_pivot_thresh=0.0,
                            options={"SymmetricMode": True})
        self.n, self.pA, self.m = n, pA, m

    def _solve(self, a, b, c):
        sol = self.lu.solve(np.concatenate([a, b, c]))
        n, pA = self.n, self.pA
        return sol[:n], sol[n:n + pA], sol[n + pA:]

    def solve_full(self, P, G, GT, w, A, a, b, c, rounds=5):
        dx = np.zeros(self.n)
        dy = np.zeros(self.pA)
        dz = np.zeros(self.m)
        ra, rb, rc = a, b, c
        best = np.inf
        scale = max(1.0, np.max(np.abs(a), initial=0.0), np.max(np.abs(b), initial=0.0),
                    np.max(np.abs(c), initial=0.0))
        for _ in range(rounds):
            ex, ey, ez = self._solve(ra, rb, rc)
            nx, ny, nz = dx + ex, dy + ey, dz + ez
            na = a - P @ nx - GT @ nz
            nb = b
            if A is not None:
                na = na - A.T @ ny
                nb = b - A @ nx
            nc = c - G @ nx + nz / w
            err = max(np.max(np.abs(na), initial=0.0), np.max(np.abs(nb), initial=0.0),
                      np.max(np.abs(nc), initial=0.0))
            if not err < best:
                break
            best = err
            dx, dy, dz, ra, rb, rc = nx, ny, nz, na, nb, nc
            if err < 1e-15 * scale:
                break
        return dx, dy, dz


def qp_solve(problem, tol=1e-9, max_iter=100, backend="ipm"):
    """Solve a :class:`QpSubproblem`; returns a :class:`QpResult`."""
    if backend == "clarabel":
        return _clarabel_solve(problem, tol)
    if backend != "ipm":
        raise ValueError(f"unknown QP backend {backend!r}")
    return _ipm_solve(problem, tol, max_iter)


def _ipm_solve(problem, tol, max_iter):
    P = np.asarray(problem.P, dtype=float)
    if sp.issparse(P):
        P = P.toarray()
    q = np.asarray(problem.q, dtype=float)
    n = q.size
    G = _as_csr(problem.G, n)
    h = np.asarray(problem.h, dtype=float) if problem.h is not None else np.zeros(0)
    A = _as_csr(problem.A, n) if problem.A is not None else None
    b = np.asarray(problem.b, dtype=float) if A is not None else np.zeros(0)
    m = h.size

    # Ruiz equilibration: x = D x_s, rows of G scaled by E
    D, E = _ruiz(P, G, A)
    P = P * np.outer(D, D)
    q = q * D
    G = sp.diags(E) @ G @ sp.diags(D)
    h = h * E
    if A is not None:
        A = A @ sp.diags(D)
    row_norm = 1.0 / E if m else np.ones(0)
    G = G.tocsr()
    GT = G.T.tocsr()

    # initial point: least-squares fit of the inequalities, then shift into the cone
    newton = _Newton(P, G, np.ones(m), A)
    x, _ = newton._solve_once(-q + GT @ h, b)
    r = G @ x - h
    s = -r.copy()
    z = r.copy()
    if m:
        a_s = -np.min(s)
        if a_s >= -1e-8:
            s += 1.0 + a_s
        a_z = -np.min(z)
        if a_z >= -1e-8:
            z += 1.0 + a_z
    y = np.zeros(b.size)

    h_scale = 1.0 + (np.max(np.abs(h)) if m else 0.0)
    q_scale = 1.0 + np.max(np.abs(q)) if n else 1.0
    status = MAX_ITER
    it = 0
    gap = pres = dres = np.inf
    for it in range(1, max_iter + 1):
        rd = P @ x + q + GT @ z
        if A is not None:
            rd = rd + A.T @ y
            re = A @ x - b
        else:
            re = np.zeros(0)
        rp = G @ x + s - h
        gap = float(s @ z)
        pobj = 0.5 * x @ P @ x + q @ x
        pres = max(np.max(np.abs(rp), initial=0.0), np.max(np.abs(re), initial=0.0)) / h_scale
        dual_scale = max(q_scale, np.max(np.abs(P @ x), initial=0.0),
                         np.max(np.abs(GT @ z), initial=0.0))
        dres = np.max(np.abs(rd), initial=0.0) / dual_scale
        if pres <= tol and dres <= tol and gap <= tol * max(1e-3, min(1.0, abs(pobj))):
            status = OPTIMAL
            break
        if m == 0:
            # equality-constrained or unconstrained QP: one Newton step is exact
            newton = _Newton(P, G, np.zeros(0), A)
            dx, dy = newton._solve_once(-rd, -re)
            x, y = x + dx, y + dy
            continue
        mu = gap / m
        w = z / s
        try:
            newton = _Augmented(P, G, w, A)
        except (np.linalg.LinAlgError, RuntimeError):
            status = FAILED
            break

        def direction(rc):
            dx, dy, dz = newton.solve_full(P, G, GT, w, A, -rd, -re, -rp + rc / z)
            ds = -rp - G @ dx
            return dx, dy, dz, ds

        # predictor
        dx, dy, dz, ds = direction(s * z)
        alpha = min(1.0, _max_step(s, ds), _max_step(z, dz))
        mu_aff = float((s + alpha * ds) @ (z + alpha * dz)) / m
        sigma = (mu_aff / mu) ** 3
        # corrector
        dx, dy, dz, ds = direction(s * z + ds * dz - sigma * mu)
        alpha = min(1.0, 0.99 * min(_max_step(s, ds), _max_step(z, dz)))
        x = x + alpha * dx
        y = y + alpha * dy
        z = z + alpha * dz
        s = s + alpha * ds
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
            status = FAILED
            break
    objective = float(0.5 * x @ P @ x + q @ x)
    x = D * x
    return QpResult(x, objective, status, it, z=z / row_norm if m else z, y=y,
                    gap=gap, primal_residual=pres, dual_residual=dres)


def _clarabel_solve(problem, tol):
    import clarabel

    q = np.asarray(problem.q, dtype=float)
    n = q.size
    P = sp.csc_matrix(np.triu(np.asarray(problem.P, dtype=float)))
    blocks, rhs, cones = [], [], []
    if problem.A is not None and sp.csr_matrix(problem.A).shape[0]:
        blocks.append(sp.csr_matrix(problem.A))
        rhs.append(np.asarray(problem.b, dtype=float))
        cones.append(clarabel.ZeroConeT(blocks[-1].shape[0]))
    G = _as_csr(problem.G, n)
    if G.shape[0]:
        blocks.append(G)
        rhs.append(np.asarray(problem.h, dtype=float))
        cones.append(clarabel.NonnegativeConeT(G.shape[0]))
    Aall = sp.vstack(blocks).tocsc() if blocks else sp.csc_matrix((0, n))
    ball = np.concatenate(rhs) if rhs else np.zeros(0)
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    sol = clarabel.DefaultSolver(P, q, Aall, ball, cones, settings).solve()
    x = np.array(sol.x)
    ok = str(sol.status) in ("Solved", "SolverStatus.Solved")
    return QpResult(x, float(0.5 * x @ problem.P @ x + q @ x), OPTIMAL if ok else FAILED,
                    int(sol.iterations))


def kkt_residuals(problem, result):
    """Stationarity, primal feasibility and complementarity residuals of a solution."""
    P = np.asarray(problem.P, dtype=float)
    q = np.asarray(problem.q, dtype=float)
    G = _as_csr(problem.G, q.size)
    x, z = result.x, result.z
    stat = P @ x + q + G.T @ z
    if problem.A is not None:
        stat = stat + sp.csr_matrix(problem.A).T @ result.y
    slack = problem.h - G @ x
    return {
        "stationarity": float(np.max(np.abs(stat), initial=0.0)),
        "primal": float(max(0.0, -np.min(slack, initial=0.0))),
        "dual": float(max(0.0, -np.min(z, initial=0.0))),
        "complementarity": float(np.max(np.abs(z * slack), initial=0.0)),
    }
