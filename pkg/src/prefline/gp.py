"""Gaussian-process preference model with a Laplace-approximated posterior.

The latent utility f over a finite set of candidate actions gets a
squared-exponential prior.  Pairwise preferences enter through a sigmoid
likelihood of the scaled utility difference; the posterior is
approximated at its mode (Newton's method) with covariance
(K^-1 + Lambda)^-1 where Lambda is the likelihood Hessian.

Two equivalent computations are provided: a dense path over all points,
and a low-rank path that solves the Newton problem only over the points
the likelihood actually touches and extends to the rest of the set
through the prior (representer form, Woodbury covariance, Matheron
sampling).  The low-rank path makes dense grids of ~10^4+ points
tractable; both produce the same posterior.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky
from scipy.special import expit

from .actions import Action

JITTERS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)

LOWRANK_MIN_POINTS = 1500  # auto-dispatch threshold on |V|


class SingularPrior(Exception):
    """Prior Gram matrix failed Cholesky even at maximum jitter."""


class SingularCovariance(Exception):
    """Posterior covariance failed Cholesky even at maximum jitter."""


class NoConvergence(Exception):
    """Newton iteration hit its cap before reaching the gradient tolerance."""

    def __init__(self, iterations: int, gradient_norm: float):
        self.iterations = iterations
        self.gradient_norm = gradient_norm
        super().__init__(
            f"mode finding stopped after {iterations} iterations, "
            f"gradient max-norm {gradient_norm:.3e}"
        )


class MissingAction(KeyError):
    """A preference record references an action outside the point set."""


@dataclass(frozen=True)
class GpConfig:
    lengthscale: float = 0.15
    signal_variance: float = 1e-4
    noise_variance: float = 1e-5
    preference_noise: float = 0.005  # c in the likelihood g((f_w - f_l)/c)
    newton_tol: float = 1e-6
    newton_max_iter: int = 100

    def __post_init__(self):
        for name in ("lengthscale", "signal_variance", "noise_variance",
                     "preference_noise", "newton_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be >= 1")


class FeedbackSource(enum.Enum):
    HUMAN = "human"
    COACTIVE = "coactive"
    SIMULATED = "simulated"


@dataclass(frozen=True)
class PreferenceRecord:
    winner: Action
    loser: Action
    source: FeedbackSource = FeedbackSource.SIMULATED

    def __post_init__(self):
        if self.winner.id == self.loser.id:
            raise ValueError("winner and loser must be distinct actions")


class PreferenceDataset:
    """Ordered preference records plus the set of actions they mention."""

    def __init__(self):
        self.records: list[PreferenceRecord] = []
        self._actions: dict[int, Action] = {}

    def __len__(self) -> int:
        return len(self.records)

    def add(self, winner: Action, loser: Action,
            source: FeedbackSource = FeedbackSource.SIMULATED) -> PreferenceRecord:
        rec = PreferenceRecord(winner, loser, source)
        self.records.append(rec)
        self._actions[winner.id] = winner
        self._actions[loser.id] = loser
        return rec

    def referenced_actions(self) -> list[Action]:
        """Actions any record mentions, ordered by id."""
        return [self._actions[k] for k in sorted(self._actions)]


def se_kernel(x: Action, y: Action, config: GpConfig) -> float:
    """Squared-exponential covariance; same-point pairs get the noise term."""
    dx = x.coords - y.coords
    value = config.signal_variance * float(
        np.exp(-0.5 * np.dot(dx, dx) / config.lengthscale**2))
    if x.id == y.id or np.max(np.abs(dx)) <= 1e-12:
        value += config.noise_variance
    return value


def kernel_matrix(coords: np.ndarray, config: GpConfig) -> np.ndarray:
    """Gram matrix of the SE kernel over rows of coords, noise on the diagonal."""
    coords = np.asarray(coords, dtype=float)
    sq = np.sum(coords**2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * coords @ coords.T
    np.maximum(d2, 0.0, out=d2)
    K = config.signal_variance * np.exp(-0.5 * d2 / config.lengthscale**2)
    K[np.diag_indices_from(K)] += config.noise_variance
    return K


def cross_kernel(a: np.ndarray, b: np.ndarray, config: GpConfig) -> np.ndarray:
    """Rectangular SE Gram block, no noise term (caller adds it where rows coincide)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d2 = (np.sum(a**2, axis=1)[:, None] + np.sum(b**2, axis=1)[None, :]
          - 2.0 * a @ b.T)
    np.maximum(d2, 0.0, out=d2)
    return config.signal_variance * np.exp(-0.5 * d2 / config.lengthscale**2)


def _stack_coords(points: list[Action]) -> np.ndarray:
    return np.stack([p.coords for p in points])


def _chol_with_jitter(matrix: np.ndarray, err_cls):
    """Lower Cholesky factor with escalating diagonal jitter."""
    for jitter in JITTERS:
        try:
            target = matrix if jitter == 0.0 else matrix + jitter * np.eye(len(matrix))
            return cholesky(target, lower=True), jitter
        except np.linalg.LinAlgError:
            continue
    raise err_cls(f"Cholesky failed at maximum jitter {JITTERS[-1]:g}")


def build_prior(points: list[Action], config: GpConfig) -> np.ndarray:
    """Prior covariance over the given points; checked factorizable."""
    if not points:
        raise ValueError("points must be nonempty")
    K = kernel_matrix(_stack_coords(points), config)
    _chol_with_jitter(K, SingularPrior)
    return K


@dataclass
class PriorFactor:
    """Precomputed prior Cholesky for a static point set (e.g. a full grid)."""

    chol: np.ndarray  # lower factor of K (+ jitter if needed)
    jitter: float

    @classmethod
    def from_coords(cls, coords: np.ndarray, config: GpConfig) -> "PriorFactor":
        K = kernel_matrix(coords, config)
        L, jitter = _chol_with_jitter(K, SingularPrior)
        return cls(L, jitter)


def sigmoid_link(x):
    """Numerically stable logistic function."""
    return expit(x)


def _comparison_indices(records: list[PreferenceRecord], index: dict[int, int]):
    win = np.empty(len(records), dtype=np.intp)
    lose = np.empty(len(records), dtype=np.intp)
    for k, rec in enumerate(records):
        try:
            win[k] = index[rec.winner.id]
            lose[k] = index[rec.loser.id]
        except KeyError as exc:
            raise MissingAction(
                f"record {k} references action id {exc.args[0]} "
                "outside the point set") from None
    return win, lose


def log_likelihood(f: np.ndarray, records: list[PreferenceRecord],
                   index: dict[int, int], config: GpConfig) -> float:
    """Sum of log g((f_winner - f_loser)/c) over the records."""
    if not records:
        return 0.0
    win, lose = _comparison_indices(records, index)
    z = (f[win] - f[lose]) / config.preference_noise
    # log g(z) = -log(1 + e^{-z})
    return float(np.sum(-np.logaddexp(0.0, -z)))


def _likelihood_terms(f, win, lose, c):
    """Per-record sigmoid values and curvature weights at f."""
    z = (f[win] - f[lose]) / c
    s = expit(z)
    weights = s * (1.0 - s) / c**2
    return s, weights


def _newton_mode(K_chol, win, lose, c, config):
    """Maximize log posterior over f; returns mode, weights, diagnostics."""
    n = K_chol.shape[0]
    f = np.zeros(n)

    def objective(fv):
        alpha = cho_solve((K_chol, True), fv)
        z = (fv[win] - fv[lose]) / c
        return -0.5 * float(fv @ alpha) + float(np.sum(-np.logaddexp(0.0, -z)))

    grad_norm = np.inf
    for iteration in range(config.newton_max_iter):
        s, weights = _likelihood_terms(f, win, lose, c)
        grad_lik = np.zeros(n)
        np.add.at(grad_lik, win, (1.0 - s) / c)
        np.add.at(grad_lik, lose, -(1.0 - s) / c)
        grad = -cho_solve((K_chol, True), f) + grad_lik
        grad_norm = float(np.max(np.abs(grad)))
        if grad_norm < config.newton_tol:
            return f, weights, iteration, grad_norm

        H = cho_solve((K_chol, True), np.eye(n))
        _add_lambda(H, win, lose, weights)
        H_chol, _ = _chol_with_jitter(H, SingularCovariance)
        step = cho_solve((H_chol, True), grad)

        base = objective(f)
        # near the mode the true improvement shrinks below the float
        # resolution of the objective; allow a few-ulp decrease so the
        # quadratic phase can finish instead of stalling
        slack = 1e-13 * (1.0 + abs(base)) * max(n, 100)
        scale = 1.0
        for _ in range(31):
            cand = f + scale * step
            if objective(cand) > base - slack:
                f = cand
                break
            scale *= 0.5
        else:
            raise NoConvergence(iteration, grad_norm)
    raise NoConvergence(config.newton_max_iter, grad_norm)


def _add_lambda(H: np.ndarray, win, lose, weights):
    """Accumulate the likelihood Hessian D^T diag(w) D into H in place."""
    np.add.at(H, (win, win), weights)
    np.add.at(H, (lose, lose), weights)
    np.add.at(H, (win, lose), -weights)
    np.add.at(H, (lose, win), -weights)


@dataclass
class _LowRankForm:
    """Exact posterior pieces for mean/covariance/sampling over a big set.

    mean = K[:,S] @ gamma;  covariance = K - B M^-1 B^T where
    B = K[:,S] D^T (scaled differences of prior columns) and
    M = D K_SS D^T + diag(1/w).
    """

    prior_chol: np.ndarray          # lower factor of full K, for sampling
    sub_positions: np.ndarray       # positions of involved points within V
    cross: np.ndarray               # K[:,S] including noise at coincident rows
    correction: np.ndarray | None   # B, shape (V, N); None when no records
    m_chol: np.ndarray | None       # lower factor of M
    win_local: np.ndarray | None
    lose_local: np.ndarray | None
    weights: np.ndarray | None


class UtilityPosterior:
    """Laplace posterior over a fixed point list.

    covariance is materialized lazily for the low-rank form; mean is
    always a dense vector.  Objects are read-only after construction
    apart from a cached covariance Cholesky used for sampling.
    """

    def __init__(self, points, mean, covariance=None, lowrank=None,
                 newton_iterations=0, gradient_norm=0.0, prior_jitter=0.0):
        self.points: list[Action] = list(points)
        self.mean: np.ndarray = np.asarray(mean, dtype=float)
        self._cov = covariance
        self._lowrank: _LowRankForm | None = lowrank
        self.newton_iterations = newton_iterations
        self.gradient_norm = gradient_norm
        self.prior_jitter = prior_jitter
        self._sample_chol = None
        if self.mean.shape != (len(self.points),):
            raise ValueError("mean length must match points")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def covariance(self) -> np.ndarray:
        if self._cov is None:
            lr = self._lowrank
            K = lr.prior_chol @ lr.prior_chol.T
            if lr.correction is not None:
                half = cho_solve((lr.m_chol, True), lr.correction.T)
                K = K - lr.correction @ half
            self._cov = 0.5 * (K + K.T)
        return self._cov

    def index_of(self, action: Action) -> int:
        for i, p in enumerate(self.points):
            if p.id == action.id:
                return i
        raise MissingAction(f"action id {action.id} not in posterior points")


def laplace_posterior(points: list[Action], dataset: PreferenceDataset,
                      config: GpConfig, *, method: str = "auto",
                      prior: PriorFactor | None = None) -> UtilityPosterior:
    """Posterior over `points` given the dataset's preference records.

    method: "dense" inverts over all points, "lowrank" restricts the
    Newton solve to record-referenced points, "auto" picks by size.
    An optional precomputed PriorFactor avoids refactoring a static
    prior (it must match `points` exactly).
    """
    if not points:
        raise ValueError("points must be nonempty")
    index = {p.id: i for i, p in enumerate(points)}
    if len(index) != len(points):
        raise ValueError("points contain duplicate action ids")
    records = dataset.records if dataset is not None else []
    win, lose = _comparison_indices(records, index)

    if method == "auto":
        involved = len(set(win.tolist()) | set(lose.tolist()))
        use_lowrank = (len(points) >= LOWRANK_MIN_POINTS
                       and involved <= len(points) // 4)
        method = "lowrank" if use_lowrank else "dense"
    if method not in ("dense", "lowrank"):
        raise ValueError(f"unknown method {method!r}")

    coords = _stack_coords(points)
    if method == "dense":
        return _laplace_dense(points, coords, win, lose, config, prior)
    return _laplace_lowrank(points, coords, win, lose, config, prior)


def _laplace_dense(points, coords, win, lose, config, prior):
    n = len(points)
    K = kernel_matrix(coords, config)
    if prior is not None:
        if prior.chol.shape[0] != n:
            raise ValueError("prior factor size does not match points")
        K_chol, jitter = prior.chol, prior.jitter
    else:
        K_chol, jitter = _chol_with_jitter(K, SingularPrior)

    if win.size == 0:
        # exact prior: mean zero, covariance the untouched Gram matrix
        return UtilityPosterior(points, np.zeros(n), covariance=K.copy(),
                                prior_jitter=jitter)

    c = config.preference_noise
    mode, weights, iters, gnorm = _newton_mode(K_chol, win, lose, c, config)
    precision = cho_solve((K_chol, True), np.eye(n))
    _add_lambda(precision, win, lose, weights)
    P_chol, _ = _chol_with_jitter(precision, SingularCovariance)
    cov = cho_solve((P_chol, True), np.eye(n))
    cov = 0.5 * (cov + cov.T)
    return UtilityPosterior(points, mode, covariance=cov,
                            newton_iterations=iters, gradient_norm=gnorm,
                            prior_jitter=jitter)


def _laplace_lowrank(points, coords, win, lose, config, prior):
    n = len(points)
    if prior is not None:
        if prior.chol.shape[0] != n:
            raise ValueError("prior factor size does not match points")
        K_chol, jitter = prior.chol, prior.jitter
    else:
        K = kernel_matrix(coords, config)
        K_chol, jitter = _chol_with_jitter(K, SingularPrior)

    if win.size == 0:
        lr = _LowRankForm(prior_chol=K_chol, sub_positions=np.empty(0, np.intp),
                          cross=np.empty((n, 0)), correction=None, m_chol=None,
                          win_local=None, lose_local=None, weights=None)
        return UtilityPosterior(points, np.zeros(n), lowrank=lr,
                                prior_jitter=jitter)

    sub_positions = np.array(sorted(set(win.tolist()) | set(lose.tolist())),
                             dtype=np.intp)
    local = {pos: i for i, pos in enumerate(sub_positions)}
    win_local = np.array([local[p] for p in win], dtype=np.intp)
    lose_local = np.array([local[p] for p in lose], dtype=np.intp)

    sub_coords = coords[sub_positions]
    K_ss = kernel_matrix(sub_coords, config)
    S_chol, _ = _chol_with_jitter(K_ss, SingularPrior)
    c = config.preference_noise
    mode_s, weights, iters, gnorm = _newton_mode(
        S_chol, win_local, lose_local, c, config)

    # representer extension: mean over V through the prior cross-covariance
    gamma = cho_solve((S_chol, True), mode_s)
    cross = cross_kernel(coords, sub_coords, config)
    cross[sub_positions, np.arange(len(sub_positions))] += config.noise_variance
    mean = cross @ gamma

    # Woodbury pieces with D = +/-1 rows (weights already carry 1/c^2):
    # B = K[:,S] D^T, M = D K_SS D^T + diag(1/w)
    B = cross[:, win_local] - cross[:, lose_local]
    DK = K_ss[win_local, :] - K_ss[lose_local, :]
    M = DK[:, win_local] - DK[:, lose_local]
    M[np.diag_indices_from(M)] += 1.0 / weights
    M_chol, _ = _chol_with_jitter(M, SingularCovariance)

    lr = _LowRankForm(prior_chol=K_chol, sub_positions=sub_positions,
                      cross=cross, correction=B, m_chol=M_chol,
                      win_local=win_local, lose_local=lose_local,
                      weights=weights)
    return UtilityPosterior(points, mean, lowrank=lr,
                            newton_iterations=iters, gradient_norm=gnorm,
                            prior_jitter=jitter)


def sample_utility(posterior: UtilityPosterior,
                   rng: np.random.Generator) -> np.ndarray:
    """One joint draw from the posterior; deterministic given the rng state."""
    n = len(posterior)
    lr = posterior._lowrank
    if lr is not None:
        # Matheron pathwise update: transform a prior draw instead of
        # factoring the dense posterior covariance.
        f0 = lr.prior_chol @ rng.standard_normal(n)
        if lr.correction is None:
            return posterior.mean + f0
        eps = rng.standard_normal(len(lr.weights)) / np.sqrt(lr.weights)
        f0_s = f0[lr.sub_positions]
        resid = f0_s[lr.win_local] - f0_s[lr.lose_local] + eps
        return (posterior.mean + f0
                - lr.correction @ cho_solve((lr.m_chol, True), resid))

    if posterior._sample_chol is None:
        cov = posterior.covariance
        if not cov.any():
            posterior._sample_chol = np.zeros_like(cov)
        else:
            L, _ = _chol_with_jitter(cov, SingularCovariance)
            posterior._sample_chol = L
    return posterior.mean + posterior._sample_chol @ rng.standard_normal(n)
