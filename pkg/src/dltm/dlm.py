"""Dynamic linear models for topic-level states.

Observation equation for one topic at slice t (D_t documents):

    eta_t = F_t alpha_t + eps_t,     eps_t ~ N(0, a^2 I)
    alpha_t = G alpha_{t-1} + xi_t,  xi_t ~ N(0, W)

with ``alpha_0 ~ N(m0, C0)``. ``forward_filter`` and ``backward_sample`` give
forward-filtering backward-sampling draws of ``alpha_{1:T}``.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

TREND_KINDS = ("random_walk", "linear", "quadratic", "harmonic")
_JITTER = 1e-10


@dataclass
class StateSpaceSpec:
    """Per-topic DLM structure.

    ``discount`` switches the state prior to ``R_t = G C_{t-1} G' / discount``
    instead of the additive ``G C_{t-1} G' + W``.
    """

    F_row: np.ndarray
    G: np.ndarray
    W: np.ndarray
    m0: np.ndarray
    C0: np.ndarray
    obs_var: float
    kind: str = "custom"
    omega: float | None = None
    discount: float | None = None

    def __post_init__(self):
        self.F_row = np.atleast_1d(np.asarray(self.F_row, dtype=float))
        p = self.F_row.size
        self.G = np.asarray(self.G, dtype=float).reshape(p, p)
        self.W = np.asarray(self.W, dtype=float).reshape(p, p)
        self.m0 = np.broadcast_to(np.asarray(self.m0, dtype=float), (p,)).copy()
        C0 = np.asarray(self.C0, dtype=float)
        self.C0 = C0 * np.eye(p) if C0.ndim == 0 else C0.reshape(p, p)
        if not self.obs_var > 0:
            raise ValueError("observation variance a^2 must be positive")
        for name in ("W", "C0"):
            M = getattr(self, name)
            if not np.allclose(M, M.T):
                raise ValueError(f"{name} must be symmetric")
            if np.linalg.eigvalsh(M).min() < -1e-12:
                raise ValueError(f"{name} must be positive semidefinite")
        if self.discount is not None and not 0 < self.discount <= 1:
            raise ValueError("discount factor must lie in (0, 1]")

    @property
    def p(self):
        return self.F_row.size

    def evolve_cov(self, C):
        GCG = self.G @ C @ self.G.T
        if self.discount is not None:
            return _sym(GCG / self.discount)
        return _sym(GCG + self.W)

    def design(self, n):
        """``n x p`` design matrix with every row equal to ``F_row``."""
        return np.broadcast_to(self.F_row, (n, self.p))


def system_matrix(kind, omega=np.pi / 2):
    if kind == "random_walk":
        return np.eye(1)
    if kind == "linear":
        return np.array([[1.0, 1.0], [0.0, 1.0]])
    if kind == "quadratic":
        return np.array([[1.0, 1.0, 1.0], [0.0, 1.0, 1.0], [0.0, 0.0, 1.0]])
    if kind == "harmonic":
        c, s = np.cos(omega), np.sin(omega)
        return np.array([[c, s], [-s, c]])
    raise ValueError(f"unknown trend kind {kind!r}; expected one of {TREND_KINDS}")


def trend_spec(kind, delta2, a2, m0=0.0, C0=0.1, omega=np.pi / 2, discount=None):
    """Build the state-space spec for a named trend.

    random_walk: p=1, F=G=1 (the DTM). linear/harmonic: p=2, F=[1,0].
    quadratic: p=3, F=[1,0,0]. Innovation covariance is ``delta2 * I``.
    """
    if not delta2 > 0 or not a2 > 0:
        raise ValueError("delta2 and a2 must be positive")
    G = system_matrix(kind, omega)
    p = G.shape[0]
    F_row = np.zeros(p)
    F_row[0] = 1.0
    return StateSpaceSpec(
        F_row=F_row,
        G=G,
        W=delta2 * np.eye(p),
        m0=m0,
        C0=C0,
        obs_var=a2,
        kind=kind,
        omega=omega if kind == "harmonic" else None,
        discount=discount,
    )


@dataclass
class FilteredMoments:
    """Forward-filter output, one entry per slice.

    ``Q`` and ``A`` (the D_t x D_t one-step forecast covariance and the gain) are
    only materialized when the filter runs with ``keep_obs_cov=True``.
    """

    a: np.ndarray  # (T, p)
    R: np.ndarray  # (T, p, p)
    m: np.ndarray  # (T, p)
    C: np.ndarray  # (T, p, p)
    f: list = field(default_factory=list)
    e: list = field(default_factory=list)
    Q: list = field(default_factory=list)
    A: list = field(default_factory=list)

    @property
    def T(self):
        return self.m.shape[0]


def _sym(M):
    return 0.5 * (M + M.T)


def _design_rows(spec, obs, F):
    if F is None:
        return [spec.design(len(y)) for y in obs]
    if len(F) != len(obs):
        raise ValueError("need one design matrix per slice")
    out = []
    for y, Ft in zip(obs, F):
        Ft = np.asarray(Ft, dtype=float).reshape(len(y), spec.p)
        out.append(Ft)
    return out


def forward_filter(spec, obs, F=None, keep_obs_cov=True):
    """Kalman filter over slices; ``obs[t]`` is the vector of D_t observations.

    Updates use the p x p push-through form
    ``m = a + R (a2 I + S R)^{-1} F' e`` and ``C = R - R (a2 I + S R)^{-1} S R``
    with ``S = F'F``, which equals the D_t x D_t Kalman form without factoring Q.
    """
    obs = [np.asarray(y, dtype=float).ravel() for y in obs]
    F = _design_rows(spec, obs, F)
    T, p, a2 = len(obs), spec.p, spec.obs_var
    out = FilteredMoments(np.empty((T, p)), np.empty((T, p, p)), np.empty((T, p)), np.empty((T, p, p)))
    m, C = spec.m0, spec.C0
    I = np.eye(p)
    for t, (y, Ft) in enumerate(zip(obs, F)):
        a = spec.G @ m
        R = spec.evolve_cov(C)
        f = Ft @ a
        e = y - f
        if y.size == 0:
            m, C = a, R
        else:
            S = Ft.T @ Ft
            M = a2 * I + S @ R
            m = a + R @ np.linalg.solve(M, Ft.T @ e)
            C = _sym(R - R @ np.linalg.solve(M, S @ R))
        out.a[t], out.R[t], out.m[t], out.C[t] = a, R, m, C
        out.f.append(f)
        out.e.append(e)
        if keep_obs_cov:
            Q = _sym(Ft @ R @ Ft.T + a2 * np.eye(y.size))
            if y.size:
                cf = sla.cho_factor(Q, lower=True)
                A = sla.cho_solve(cf, Ft @ R).T
            else:
                A = np.zeros((p, 0))
            out.Q.append(Q)
            out.A.append(A)
    return out


def _solve_psd(R, B):
    """``R^{-1} B`` for symmetric PSD ``R``; pseudo-inverse with jitter when singular."""
    try:
        return sla.cho_solve(sla.cho_factor(R, lower=True), B)
    except np.linalg.LinAlgError:
        p = R.shape[0]
        return np.linalg.pinv(R + _JITTER * np.eye(p), hermitian=True) @ B


def mvn_draw(rng, mean, cov):
    """One N(mean, cov) draw tolerant of singular ``cov``; consumes exactly p normals."""
    z = rng.standard_normal(mean.shape[0])
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, U = np.linalg.eigh(_sym(cov))
        L = U * np.sqrt(np.clip(w, 0.0, None))
    return mean + L @ z


def _smoothing_gain(fm, spec, t):
    # B_t = C_t G' R_{t+1}^{-1}
    return _solve_psd(fm.R[t + 1], spec.G @ fm.C[t]).T


def backward_sample(fm, spec, rng):
    """Draw ``alpha_{1:T}`` (shape ``(T, p)``) from its joint filtered posterior."""
    T, p = fm.m.shape
    path = np.empty((T, p))
    path[-1] = mvn_draw(rng, fm.m[-1], fm.C[-1])
    for t in range(T - 2, -1, -1):
        B = _smoothing_gain(fm, spec, t)
        h = fm.m[t] + B @ (path[t + 1] - fm.a[t + 1])
        H = _sym(fm.C[t] - B @ fm.R[t + 1] @ B.T)
        path[t] = mvn_draw(rng, h, H)
    return path


def smooth(fm, spec):
    """Rauch-Tung-Striebel smoothed means and covariances (the FFBS marginals)."""
    T, p = fm.m.shape
    ms = fm.m.copy()
    Cs = fm.C.copy()
    for t in range(T - 2, -1, -1):
        B = _smoothing_gain(fm, spec, t)
        ms[t] = fm.m[t] + B @ (ms[t + 1] - fm.a[t + 1])
        Cs[t] = _sym(fm.C[t] + B @ (Cs[t + 1] - fm.R[t + 1]) @ B.T)
    return ms, Cs


def forecast_state(spec, m_T, C_T, h):
    """Moments of ``alpha_{T+1..T+h}`` given ``alpha_T ~ N(m_T, C_T)``."""
    if h < 1:
        raise ValueError("horizon must be >= 1")
    mean = np.asarray(m_T, dtype=float)
    cov = np.asarray(C_T, dtype=float).reshape(spec.p, spec.p)
    out = []
    for _ in range(h):
        mean = spec.G @ mean
        cov = spec.evolve_cov(cov)
        out.append((mean, cov))
    return out


def simulate_states(spec, T, rng, inflate=1.0):
    """Prior draw of ``alpha_{1:T}``; ``inflate`` scales C0 and W."""
    alpha = mvn_draw(rng, spec.m0, inflate * spec.C0)
    path = np.empty((T, spec.p))
    for t in range(T):
        alpha = spec.G @ alpha + mvn_draw(rng, np.zeros(spec.p), inflate * spec.W)
        path[t] = alpha
    return path
