"""Generic drivers for the abstract AMP recursions.

Three shapes: symmetric (one matrix, one denoiser channel), asymmetric (a
rectangular matrix with alternating row/column channels), and matrix-valued
iterates (row-wise denoisers with Jacobian Onsager matrices). The Onsager
coefficient is either the empirical averaged derivative or a deterministic
value taken from a state-evolution path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .se import SEPath


@dataclass(frozen=True)
class OnsagerMode:
    """Empirical averaged-derivative coefficients, deterministic ones from a
    state-evolution path, or zeroed (for ablation runs)."""

    kind: str  # "empirical" | "deterministic" | "zero"
    se_path: SEPath | None = None

    def __post_init__(self):
        if self.kind == "deterministic" and self.se_path is None:
            raise ValueError("deterministic mode needs an SEPath")


EMPIRICAL = OnsagerMode(kind="empirical")
ZERO_ONSAGER = OnsagerMode(kind="zero")


def deterministic(se_path: SEPath) -> OnsagerMode:
    return OnsagerMode(kind="deterministic", se_path=se_path)


@dataclass
class AmpRun:
    """Recorded iterate history of one AMP run."""

    iterates: dict = field(default_factory=dict)
    onsager: dict = field(default_factory=dict)
    side_info: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)

    def record(self, name: str, value) -> None:
        self.iterates.setdefault(name, []).append(value)

    def record_onsager(self, name: str, value: float) -> None:
        self.onsager.setdefault(name, []).append(float(value))


def _check_finite(x: np.ndarray, k: int, name: str) -> None:
    if not np.all(np.isfinite(x)):
        raise FloatingPointError(f"non-finite iterate {name} at iteration {k}")


def _pairs(denoisers):
    out = []
    for d in denoisers:
        if isinstance(d, tuple):
            out.append(d)
        else:
            out.append((lambda x, g, d=d: d.eval(x), lambda x, g, d=d: d.deriv(x)))
    return out


def run_symmetric(W, gamma, m0, denoisers, K: int, mode: OnsagerMode = EMPIRICAL) -> AmpRun:
    """h^{k+1} = W m^k - b_k m^{k-1} with m^k = f_k(h^k, gamma).

    ``denoisers[k-1]`` is the pair (f_k, f_k') applied to h^k; ``m0`` is the
    initializer and m^{-1} = 0, so the first step is h^1 = W m^0.
    """
    A = W.entries if hasattr(W, "entries") else np.asarray(W)
    n = A.shape[0]
    gamma = np.asarray(gamma, dtype=float)
    m_prev = np.zeros(n)
    m_cur = np.asarray(m0, dtype=float)
    if K < 1:
        raise ValueError("K must be at least 1")
    pairs = _pairs(denoisers)
    run = AmpRun(side_info={"gamma": gamma})
    run.record("m", m_cur)
    b = 0.0
    for k in range(1, K + 1):
        h = A @ m_cur - b * m_prev
        _check_finite(h, k, "h")
        run.record("h", h)
        if k == K:
            break
        f, fp = pairs[k - 1]
        m_next = np.asarray(f(h, gamma), dtype=float)
        if mode.kind == "empirical":
            b = float(np.mean(fp(h, gamma)))
        elif mode.kind == "deterministic":
            b = float(mode.se_path.bbar[k])
        else:
            b = 0.0
        run.record("m", m_next)
        run.record_onsager("b", b)
        m_prev, m_cur = m_cur, m_next
    return run


def run_asymmetric(W, beta, gamma, g_seq, f_seq, m0, b0: float, K: int,
                   mode: OnsagerMode = EMPIRICAL) -> AmpRun:
    """Alternating recursion on a rectangular matrix:

      e^k = W m^k - b_k q^{k-1},   q^k = g_k(e^k, gamma),  c_k = <g_k'>_n
      h^{k+1} = W^T q^k - c_k m^k, m^{k+1} = f_{k+1}(h^{k+1}, beta),
      b_{k+1} = n^{-1} sum_j f_{k+1}'(h_j^{k+1}, beta_j)

    with q^{-1} = 0. Note both Onsager sums are divided by n.
    """
    X = W.entries if hasattr(W, "entries") else np.asarray(W)
    n, p = X.shape
    beta = np.asarray(beta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    g_pairs = _pairs(g_seq)
    f_pairs = _pairs(f_seq)
    run = AmpRun(side_info={"beta": beta, "gamma": gamma, "delta": n / p})
    m = np.asarray(m0, dtype=float)
    q_prev = np.zeros(n)
    b = b0
    run.record("m", m)
    for k in range(K):
        e = X @ m - b * q_prev
        _check_finite(e, k, "e")
        g, gp = g_pairs[k]
        qv = np.asarray(g(e, gamma), dtype=float)
        if mode.kind == "empirical":
            c = float(np.sum(gp(e, gamma)) / n)
        elif mode.kind == "deterministic":
            c = float(mode.se_path.extras["cbar"][k])
        else:
            c = 0.0
        h = X.T @ qv - c * m
        _check_finite(h, k, "h")
        f, fp = f_pairs[k]
        m_next = np.asarray(f(h, beta), dtype=float)
        if mode.kind == "empirical":
            b = float(np.sum(fp(h, beta)) / n)
        elif mode.kind == "deterministic":
            b = float(mode.se_path.bbar[k + 1])
        else:
            b = 0.0
        run.record("e", e)
        run.record("q", qv)
        run.record("h", h)
        run.record("m", m_next)
        run.record_onsager("c", c)
        run.record_onsager("b", b)
        m, q_prev = m_next, qv
    return run


def run_matrix(W, beta, gamma, g_seq, f_seq, M0, B0, K: int) -> AmpRun:
    """Matrix-iterate version of the asymmetric recursion:

      E^k = W M^k - Q^{k-1} B_k^T,   Q^k = g_k(E^k, gamma),
      C_k = n^{-1} sum_i g_k'(E_i^k, gamma_i)  (an l_H x l_E Jacobian average),
      H^{k+1} = W^T Q^k - M^k C_k^T, M^{k+1} = f_{k+1}(H^{k+1}, beta),
      B_{k+1} = n^{-1} sum_j f_{k+1}'(H_j^{k+1}, beta_j).

    ``g_seq[k]`` is (g, g_jac) with g(E, gamma) -> n x l_H and
    g_jac(E, gamma) -> n x l_H x l_E rowwise Jacobians; f analogous.
    """
    X = W.entries if hasattr(W, "entries") else np.asarray(W)
    n, p = X.shape
    beta = np.asarray(beta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    M = np.asarray(M0, dtype=float)
    l_E = M.shape[1]
    B = np.asarray(B0, dtype=float)
    l_H = B.shape[1]
    if B.shape != (l_E, l_H):
        raise ValueError("B0 must be l_E x l_H")
    Q_prev = np.zeros((n, l_H))
    run = AmpRun(side_info={"beta": beta, "gamma": gamma, "delta": n / p})
    run.record("M", M)
    for k in range(K):
        E = X @ M - Q_prev @ B.T
        _check_finite(E, k, "E")
        g, gjac = g_seq[k]
        Q = np.asarray(g(E, gamma), dtype=float)
        J = np.asarray(gjac(E, gamma), dtype=float)
        if J.shape != (n, l_H, l_E):
            raise ValueError(f"g Jacobian shape {J.shape} != {(n, l_H, l_E)}")
        C = J.sum(axis=0) / n
        H = X.T @ Q - M @ C.T
        _check_finite(H, k, "H")
        f, fjac = f_seq[k]
        M_next = np.asarray(f(H, beta), dtype=float)
        Jf = np.asarray(fjac(H, beta), dtype=float)
        if Jf.shape != (p, l_E, l_H):
            raise ValueError(f"f Jacobian shape {Jf.shape} != {(p, l_E, l_H)}")
        B = Jf.sum(axis=0) / n
        run.record("E", E)
        run.record("Q", Q)
        run.record("H", H)
        run.record("M", M_next)
        run.record("C", C)
        run.record("B", B)
        M, Q_prev = M_next, Q
    return run
