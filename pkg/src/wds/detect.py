"""Symbol detectors for ``R = C S + noise``.

MF, ZF and ID accept batches (``R`` of shape ``(..., N)``); SD and ML work on
one vector at a time (ML also takes batches, scanning the full candidate
set once per chunk).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .sefdm import Constellation

COND_LIMIT = 1e12
REGULARIZATION = 1e-8
ML_SEARCH_LIMIT = 2**24
SD_MAX_SUBCARRIERS = 32
SD_NODE_BUDGET = 1_000_000
# C - I has eigenvalues in [-1, 1] up to rounding; treat radius within this of 1 as non-contracting
CONTRACTION_MARGIN = 1e-9


class SingularCorrelationError(np.linalg.LinAlgError):
    def __init__(self, cond):
        super().__init__(f"correlation matrix is ill-conditioned (condition estimate {cond:.3g})")
        self.cond = cond


class DivergenceError(ArithmeticError):
    def __init__(self, radius, norm):
        super().__init__(
            f"iterative detection diverged (iterate norm {norm:.3g}); spectral radius of "
            f"C - I is {radius:.6f}, cancellation only contracts below 1"
        )
        self.spectral_radius = radius


class SearchBudgetError(RuntimeError):
    def __init__(self, budget, partial):
        super().__init__(f"sphere search exceeded its budget of {budget} nodes")
        self.partial = partial


@dataclass
class DetectorResult:
    indices: np.ndarray
    const: Constellation = field(repr=False)
    soft: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def symbols(self) -> np.ndarray:
        return self.const.points[self.indices]

    @property
    def bits(self) -> np.ndarray:
        return self.const.indices_to_bits(self.indices)


def slice_symbols(c: Constellation, v):
    """Nearest constellation point(s); exact ties go to the lowest point index."""
    return c.points[c.nearest(v)]


def detect_mf(R, c: Constellation) -> DetectorResult:
    R = np.asarray(R, dtype=complex)
    return DetectorResult(c.nearest(R), c, R)


def _check_cond(C):
    cond = np.linalg.cond(C)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularCorrelationError(cond)
    return cond


def detect_zf(C, R, c: Constellation) -> DetectorResult:
    cond = _check_cond(C)
    R = np.asarray(R, dtype=complex)
    z = np.linalg.solve(C, R.reshape(-1, R.shape[-1]).T).T.reshape(R.shape)
    return DetectorResult(c.nearest(z), c, z, {"cond": cond})


def spectral_radius(C) -> float:
    """Spectral radius of ``C - I``; cancellation contracts only when this is below 1."""
    ev = np.linalg.eigvalsh(C)
    return float(np.max(np.abs(ev - 1)))


def soft_map(c: Constellation, v, noise_var: float):
    """Posterior-mean symbol estimate under Gaussian noise for +/-a grid constellations (BPSK, QPSK)."""
    a_re = np.max(np.abs(c.points.real))
    a_im = np.max(np.abs(c.points.imag))
    if not (np.allclose(np.abs(c.points.real), a_re) and np.allclose(np.abs(c.points.imag), a_im)):
        raise ValueError(f"soft mapping needs a +/-a grid constellation, not {c.label}")
    v = np.asarray(v)
    return a_re * np.tanh(2 * a_re * v.real / noise_var) + 1j * a_im * np.tanh(2 * a_im * v.imag / noise_var)


def detect_id(C, R, c: Constellation, max_iter: int = 20, feedback: str = "hard",
              noise_var: float | None = None, tol: float = 1e-6,
              diverge_at: float = 1e6) -> DetectorResult:
    """Iterative interference cancellation ``S_k = R - (C - I) f(S_{k-1})`` from ``S_0 = R``.

    ``feedback`` selects ``f``: ``"hard"`` slices the previous iterate,
    ``"tanh"`` uses its posterior mean given ``noise_var`` (per-sub-carrier
    complex noise variance; falls back to hard when absent or zero), and
    ``"soft"`` is the identity, i.e. the linear recursion sliced once at the
    end. Stops early when successive iterates differ by less than ``tol`` in
    max-norm.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    if feedback == "tanh" and not noise_var:
        feedback = "hard"
    if feedback not in ("hard", "soft", "tanh"):
        raise ValueError(f"unknown feedback mode {feedback!r}")
    C = np.asarray(C, dtype=complex)
    R = np.asarray(R, dtype=complex)
    E = (C - np.eye(C.shape[0])).T
    s = R
    iters, converged = 0, False
    for iters in range(1, max_iter + 1):
        if feedback == "hard":
            fb = slice_symbols(c, s)
        elif feedback == "tanh":
            fb = soft_map(c, s, noise_var)
        else:
            fb = s
        nxt = R - fb @ E
        step = np.max(np.abs(nxt - s)) if nxt.size else 0.0
        s = nxt
        if feedback == "soft":
            norm = np.max(np.abs(s)) if s.size else 0.0
            if not np.isfinite(norm) or norm > diverge_at:
                raise DivergenceError(spectral_radius(C), norm)
        if step < tol:
            converged = True
            break
    idx = c.nearest(s)
    resid = R - c.points[idx] @ C.T
    radius = spectral_radius(C)
    meta = {"iterations": iters, "converged": converged, "feedback": feedback,
            "residual": float(np.max(np.abs(resid))) if resid.size else 0.0,
            "spectral_radius": radius, "contracting": radius < 1 - CONTRACTION_MARGIN}
    return DetectorResult(idx, c, s, meta)


def _qr_upper(C):
    # ||R - C S||^2 = ||Q^H R - U S||^2 exactly, because Q is unitary
    q, u = np.linalg.qr(C)
    return q, u


def _zf_start(C, R, c):
    try:
        z = np.linalg.solve(C, R)
    except np.linalg.LinAlgError:
        z = np.linalg.solve(C + REGULARIZATION * np.eye(len(C)), R)
    if not np.all(np.isfinite(z)):
        z = np.linalg.solve(C + REGULARIZATION * np.eye(len(C)), R)
    return c.nearest(z)


def _metric(C, R, s):
    d = R - C @ s
    return float(np.real(np.vdot(d, d)))


def _candidate_rank(idx, p):
    """Position of an index vector in lexicographic enumeration (first sub-carrier most significant)."""
    r = 0
    for i in idx:
        r = r * p + int(i)
    return r


def detect_sd(C, R, c: Constellation, node_budget: int = SD_NODE_BUDGET,
              max_subcarriers: int = SD_MAX_SUBCARRIERS) -> DetectorResult:
    """Exact ML by depth-first sphere search with Schnorr-Euchner child ordering.

    The initial squared radius is the metric of the sliced zero-forcing
    estimate and shrinks on every improving leaf. Equal-metric leaves resolve
    to the lexicographically lowest index vector, matching :func:`detect_ml`.
    """
    C = np.asarray(C, dtype=complex)
    R = np.asarray(R, dtype=complex)
    n = C.shape[0]
    if n > max_subcarriers:
        raise ValueError(f"sphere decoding is bounded to {max_subcarriers} sub-carriers, got {n}")
    pts = c.points
    p = len(pts)
    q, u = _qr_upper(C)
    y = q.conj().T @ R
    diag = np.diag(u)

    best_idx = _zf_start(C, R, c)
    best = _metric(C, R, pts[best_idx])
    best_rank = _candidate_rank(best_idx, p)
    eps = 1e-9 * max(1.0, best)

    idx = np.zeros(n, dtype=np.int64)
    sym = np.zeros(n, dtype=complex)
    nodes = 0

    # explicit stack of (level, partial metric, ordered children, position)
    def children(level):
        interf = u[level, level + 1 :] @ sym[level + 1 :]
        centre = y[level] - interf
        inc = np.abs(centre - diag[level] * pts) ** 2
        order = np.argsort(inc, kind="stable")
        return order, inc

    level = n - 1
    order, inc = children(level)
    stack = [(order, inc, 0, 0.0)]
    while stack:
        order, inc, pos, base = stack[-1]
        if pos >= p:
            stack.pop()
            level += 1
            continue
        stack[-1] = (order, inc, pos + 1, base)
        k = order[pos]
        m = base + inc[k]
        nodes += 1
        if nodes > node_budget:
            raise SearchBudgetError(node_budget, DetectorResult(best_idx, c, None, {"metric": best}))
        if m > best + eps:
            # children are sorted, so the rest of this level is worse too
            stack.pop()
            level += 1
            continue
        idx[level] = k
        sym[level] = pts[k]
        if level == 0:
            rank = _candidate_rank(idx, p)
            exact = _metric(C, R, sym)
            if exact < best - eps or (abs(exact - best) <= eps and rank < best_rank):
                best, best_idx, best_rank = min(exact, best), idx.copy(), rank
            continue
        level -= 1
        o, i2 = children(level)
        stack.append((o, i2, 0, m))
    return DetectorResult(best_idx, c, None, {"nodes": nodes, "metric": best})


def _all_candidates(c: Constellation, n: int) -> np.ndarray:
    return np.array(list(product(range(c.size), repeat=n)), dtype=np.int64)


def detect_ml(C, R, c: Constellation, chunk: int = 64) -> DetectorResult:
    """Exhaustive search over all ``P^N`` candidates; the first minimum in lexicographic order wins."""
    C = np.asarray(C, dtype=complex)
    R = np.asarray(R, dtype=complex)
    n = C.shape[0]
    if c.size**n > ML_SEARCH_LIMIT:
        raise ValueError(f"ML search space {c.size}^{n} exceeds the limit of {ML_SEARCH_LIMIT}")
    cand = _all_candidates(c, n)
    cs = c.points[cand] @ C.T  # (P^N, N)
    energy = np.sum(np.abs(cs) ** 2, axis=1)
    flat = R.reshape(-1, n)
    out = np.empty((len(flat), n), dtype=np.int64)
    metrics = np.empty(len(flat))
    for i in range(0, len(flat), chunk):
        r = flat[i : i + chunk]
        # ||r - cs||^2 = ||r||^2 - 2 Re<cs, r> + ||cs||^2
        m = energy[None, :] - 2 * np.real(r.conj() @ cs.T) + np.sum(np.abs(r) ** 2, axis=1)[:, None]
        j = np.argmin(m, axis=1)
        out[i : i + chunk] = cand[j]
        metrics[i : i + chunk] = m[np.arange(len(j)), j]
    return DetectorResult(out.reshape(R.shape), c, None,
                          {"metric": metrics.reshape(R.shape[:-1]) if R.ndim > 1 else float(metrics[0])})


DETECTORS = ("mf", "zf", "id", "sd", "ml")


def detect(name: str, C, R, c: Constellation, **params) -> DetectorResult:
    """Dispatch by detector name (``mf|zf|id|sd|ml``)."""
    name = name.lower()
    if name == "mf":
        return detect_mf(R, c)
    if name == "zf":
        return detect_zf(C, R, c)
    if name == "id":
        return detect_id(C, R, c, **params)
    if name == "sd":
        R = np.asarray(R)
        if R.ndim == 1:
            return detect_sd(C, R, c, **params)
        res = [detect_sd(C, r, c, **params) for r in R.reshape(-1, R.shape[-1])]
        return DetectorResult(np.stack([r.indices for r in res]).reshape(R.shape), c, None,
                              {"nodes": sum(r.meta["nodes"] for r in res)})
    if name == "ml":
        return detect_ml(C, R, c)
    raise ValueError(f"unknown detector {name!r}; choose from {DETECTORS}")
