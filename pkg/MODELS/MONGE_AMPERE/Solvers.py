import time
import inspect
import logging
import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres
from LAB_HELPERS.LAB_constants import *
from LAB_HELPERS.LAB_errors import NonConvergenceError, ToleranceError
from MODELS.CALCULUS.complex_calculus import ScalarField, ddbar, entry_symbol, laplace_symbol
from MODELS.HELPERS.Utils import evaluate_metrics


# scipy renamed gmres(tol=...) to rtol=...
_GMRES_TOL_KEY = 'rtol' if 'rtol' in inspect.signature(gmres).parameters else 'tol'


class NewtonSolver(object):
    """
    Damped Newton iteration for log det(w_hat + ddbar f) - kappa - log_rhs = 0 on the periodic grid,
    with kappa = log K as an explicit unknown closed by the mean-zero gauge on f.
    One instance per solve; not shared across threads.
    """
    def __init__(
        self,
        background,
        args,
        verbose=None,
        name=None,
    ):
        super(NewtonSolver, self).__init__()
        self.background = background
        self.grid = background.grid
        self.args = args
        self.verbose = args.verbose if verbose is None else verbose
        self.name = name or "MA"
        self.trace = []
        self.linear_warnings = 0
        self.newton_iters = 0
        self.logger = logging.getLogger("MONGE-AMPERE")
        self._symbols = {}
        n = self.grid.complex_dim
        for j in range(n):
            for k in range(j, n):
                self._symbols[(j, k)] = entry_symbol(self.grid, j, k)


    def metric(self, f):
        return self.background + ddbar(ScalarField(self.grid, f))


    def evaluate(self, f, kappa, log_rhs):
        """Residual field, minimum eigenvalue and inverse metric at (f, kappa)."""
        coeff = np.ascontiguousarray(self.metric(f).coeff)
        min_eig = float(np.linalg.eigvalsh(coeff)[..., 0].min())
        if min_eig <= self.args.positivity_margin:
            return None, min_eig, None
        _, logdet = np.linalg.slogdet(coeff)
        residual = logdet - kappa - log_rhs
        return residual, min_eig, np.linalg.inv(coeff)


    def initial_constant(self, f, log_rhs):
        coeff = np.ascontiguousarray(self.metric(f).coeff)
        _, logdet = np.linalg.slogdet(coeff)
        return float(np.mean(logdet - log_rhs))


    #----------------------------------------------------------------
    # Linearization
    #----------------------------------------------------------------
    def _operator(self, ginv):
        grid = self.grid
        n = grid.complex_dim
        N = grid.num_points
        shape = grid.shape

        def apply_linearization(df):
            df_hat = np.fft.fftn(df)
            out = np.zeros(shape)
            for (j, k), symbol in self._symbols.items():
                entry = np.fft.ifftn(symbol * df_hat)
                if j == k:
                    out += np.real(ginv[..., j, j] * entry)
                else:
                    out += 2.0 * np.real(ginv[..., k, j] * entry)
            return out

        def matvec(x):
            x = np.asarray(x).ravel()
            df = x[:N].reshape(shape)
            top = apply_linearization(df) - x[N]
            return np.concatenate([top.ravel(), [df.mean()]])

        weights = np.mean(ginv.reshape(-1, n, n), axis=0)
        symbol = laplace_symbol(grid, weights)
        inverse_symbol = np.zeros(shape)
        nonzero = np.abs(symbol) > 0
        inverse_symbol[nonzero] = 1.0 / symbol[nonzero]
        inverse_symbol[(0,) * grid.real_dim] = 0.0

        def precondition(x):
            x = np.asarray(x).ravel()
            r = x[:N].reshape(shape)
            mean_r = r.mean()
            df_hat = np.fft.fftn(r - mean_r) * inverse_symbol
            df_hat[(0,) * grid.real_dim] = N * x[N]
            df = np.real(np.fft.ifftn(df_hat))
            return np.concatenate([df.ravel(), [-mean_r]])

        A = LinearOperator((N + 1, N + 1), matvec=matvec, dtype=float)
        M = LinearOperator((N + 1, N + 1), matvec=precondition, dtype=float)
        return A, M


    def newton_direction(self, f, residual, ginv):
        N = self.grid.num_points
        A, M = self._operator(ginv)
        b = np.concatenate([-residual.ravel(), [-f.mean()]])
        x0 = M.matvec(b)
        kwargs = {_GMRES_TOL_KEY: self.args.linear_rtol}
        x, info = gmres(A, b, x0=x0, M=M, restart=self.args.linear_restart,
                        maxiter=self.args.linear_maxiter, atol=0.0, **kwargs)
        if info != 0:
            self.linear_warnings += 1
            relative = np.linalg.norm(A.matvec(x) - b) / max(np.linalg.norm(b), 1e-300)
            self.logger.warning(f"{SOLVER_INFO_LINEAR} {self.name} GMRES info={info}, relative residual {relative:.3e}")
        return x[:N].reshape(self.grid.shape), float(x[N])


    #----------------------------------------------------------------
    # Main loop
    #----------------------------------------------------------------
    def solve(self, log_rhs, f0=None, kappa0=None, stage=0):
        """Newton iteration for one right-hand side. Returns (f, kappa, residual, min_eig)."""
        f = np.zeros(self.grid.shape) if f0 is None else np.array(f0, dtype=float)
        f = f - f.mean()
        kappa = self.initial_constant(f, log_rhs) if kappa0 is None else float(kappa0)
        start_time = time.time()

        residual, min_eig, ginv = self.evaluate(f, kappa, log_rhs)
        if residual is None:
            raise NonConvergenceError(
                f"initial iterate is not positive (min eigenvalue {min_eig:.3e})",
                diagnostics={"trace": list(self.trace), "stage": stage, "iteration": 0, "min_eigenvalue": min_eig},
            )
        step = 0.0
        for iteration in range(self.args.max_newton + 1):
            res_linf = float(np.max(np.abs(residual)))
            res_l2 = float(np.sqrt(np.mean(residual ** 2)))
            self.trace.append({
                "stage": stage,
                "iter": iteration,
                "residual": res_linf,
                "residual_l2": res_l2,
                "K": float(np.exp(kappa)),
                "positivity_margin": min_eig,
                "step": step,
            })
            if self.verbose > 1:
                print(f"{SOLVER_INFO_NEWTON} {self.name} stage {stage} iter {iteration}: residual {res_linf:.3e} - K {np.exp(kappa):.10g} - margin {min_eig:.3e} - step {step:g}")
            if res_linf <= self.args.tol:
                break
            if iteration == self.args.max_newton:
                raise ToleranceError(
                    f"residual {res_linf:.3e} above tol {self.args.tol:g} after {iteration} Newton iterations",
                    diagnostics={"trace": list(self.trace), "stage": stage, "iteration": iteration, "residual": res_linf,
                                 "K": float(np.exp(kappa)), "min_eigenvalue": min_eig},
                )

            df, dkappa = self.newton_direction(f, residual, ginv)
            self.newton_iters += 1

            # Backtracking: positivity first, then sufficient decrease of the L2 residual
            step = 1.0
            while True:
                f_new = f + step * df
                kappa_new = kappa + step * dkappa
                new_residual, new_min, new_ginv = self.evaluate(f_new, kappa_new, log_rhs)
                if new_residual is not None:
                    new_l2 = float(np.sqrt(np.mean(new_residual ** 2)))
                    if new_l2 <= (1.0 - self.args.armijo * step) * res_l2:
                        break
                step *= 0.5
                if step < self.args.damping_min:
                    raise NonConvergenceError(
                        f"line search failed at iteration {iteration} (step < {self.args.damping_min:g})",
                        diagnostics={"trace": list(self.trace), "stage": stage, "iteration": iteration, "residual": res_linf,
                                     "K": float(np.exp(kappa)), "min_eigenvalue": min_eig,
                                     "last_trial_min_eigenvalue": new_min},
                    )
            f, kappa, residual, min_eig, ginv = f_new, kappa_new, new_residual, new_min, new_ginv

        if self.verbose:
            print(f"{SOLVER_INFO_NEWTON} {self.name} stage {stage} converged: residual {np.max(np.abs(residual)):.3e} in {time.time() - start_time:.2f}s")
        return f, kappa, residual, min_eig


    def residual_metrics(self, f, kappa, log_rhs):
        coeff = np.ascontiguousarray(self.metric(f).coeff)
        _, logdet = np.linalg.slogdet(coeff)
        return evaluate_metrics(
            (kappa + log_rhs).reshape(1, -1),
            logdet.reshape(1, -1),
        )
