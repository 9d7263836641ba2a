"""Dense vectors and matrices over the quaternions.

Everything here follows the left-module convention: scalars multiply vectors
from the left, and a matrix acts on a vector through

    apply(M, u)[j] = sum_k u[k] * M[k, j]

which is the one dense convention under which apply(M, q*u) == q*apply(M, u)
holds literally.  Composition induced by apply reads left to right:
apply(matmul(P, Q), u) == apply(Q, apply(P, u)).

Storage uses the complex split q = alpha + beta*j with alpha, beta in the
complex i-plane, so a quaternion matrix is a pair (A, B) of complex arrays.
The symplectic embedding

    embed(M) = [[A, B], [-conj(B), conj(A)]]

is a multiplicative homomorphism for matmul, sends adjoints to conjugate
transposes, and turns quaternion spectral problems into complex ones:
row eigenvectors of M are transposed right eigenvectors of embed(M).T.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .quaternion import (
    Quaternion,
    canonical_complex_representative,
    similarity_unit_to_upper_complex,
)


class EigensolverError(RuntimeError):
    """Spectral decomposition failed to meet its residual contract."""


# ---------------------------------------------------------------------------
# Complex-pair kernels shared by vectors, matrices and the eigensolvers.
# A pair (a, b) encodes entries a + b*j; the formulas below are the Hamilton
# product rewritten through j*z = conj(z)*j.

def _pair_mul(a1, b1, a2, b2):
    return a1 * a2 - b1 * np.conj(b2), a1 * b2 + b1 * np.conj(a2)


def _pair_matmul(a1, b1, a2, b2):
    return a1 @ a2 - b1 @ np.conj(b2), a1 @ b2 + b1 @ np.conj(a2)


def _pair_conj(a, b):
    return np.conj(a), -b


def _pair_scale_left(alpha, beta, a, b):
    # scalar (alpha + beta j) times every entry of (a, b), scalar on the left
    return alpha * a - beta * np.conj(b), alpha * b + beta * np.conj(a)


def _pair_norm(a, b):
    return float(np.sqrt(np.sum(np.abs(a) ** 2 + np.abs(b) ** 2)))


def _pair_inner_rows(ua, ub, va, vb):
    """inner(u, v_r) = sum_k u_k conj(v_r[k]) for every row r of (va, vb)."""
    alpha = np.conj(va) @ ua + np.conj(vb) @ ub
    beta = va @ ub - vb @ ua
    return alpha, beta


def _wxyz_to_pair(arr):
    arr = np.asarray(arr, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1], arr[..., 2] + 1j * arr[..., 3]


def _pair_to_wxyz(a, b):
    return np.stack([a.real, a.imag, b.real, b.imag], axis=-1)


class QVector:
    """Dense quaternion vector; immutable once built."""

    __slots__ = ("a", "b")

    def __init__(self, entries):
        arr = np.array([q.to_array() for q in entries], dtype=float)
        if arr.ndim != 2:
            raise ValueError("QVector expects a flat sequence of quaternions")
        self.a, self.b = _wxyz_to_pair(arr)

    @classmethod
    def from_pair(cls, a, b):
        v = cls.__new__(cls)
        v.a = np.asarray(a, dtype=complex)
        v.b = np.asarray(b, dtype=complex)
        return v

    @classmethod
    def from_wxyz(cls, arr):
        a, b = _wxyz_to_pair(arr)
        return cls.from_pair(a, b)

    def __len__(self):
        return self.a.shape[0]

    def __getitem__(self, k):
        return Quaternion(self.a[k].real, self.a[k].imag, self.b[k].real, self.b[k].imag)

    def to_wxyz(self):
        return _pair_to_wxyz(self.a, self.b)

    def norm(self):
        return _pair_norm(self.a, self.b)

    def __add__(self, other):
        return QVector.from_pair(self.a + other.a, self.b + other.b)

    def __sub__(self, other):
        return QVector.from_pair(self.a - other.a, self.b - other.b)

    def __rmul__(self, scalar):
        if isinstance(scalar, (int, float)):
            return QVector.from_pair(self.a * float(scalar), self.b * float(scalar))
        if isinstance(scalar, Quaternion):
            alpha = complex(scalar.w, scalar.x)
            beta = complex(scalar.y, scalar.z)
            a, b = _pair_scale_left(alpha, beta, self.a, self.b)
            return QVector.from_pair(a, b)
        return NotImplemented

    def __repr__(self):
        return f"QVector(n={len(self)})"


class QMatrix:
    """Dense quaternion matrix; rows act on vectors via `apply`."""

    __slots__ = ("a", "b")

    def __init__(self, rows):
        arr = np.array([[q.to_array() for q in row] for row in rows], dtype=float)
        if arr.ndim != 3:
            raise ValueError("QMatrix expects a rectangular nest of quaternions")
        self.a, self.b = _wxyz_to_pair(arr)

    @classmethod
    def from_pair(cls, a, b):
        m = cls.__new__(cls)
        m.a = np.asarray(a, dtype=complex)
        m.b = np.asarray(b, dtype=complex)
        return m

    @classmethod
    def from_wxyz(cls, arr):
        a, b = _wxyz_to_pair(arr)
        return cls.from_pair(a, b)

    @classmethod
    def identity(cls, n):
        return cls.from_pair(np.eye(n, dtype=complex), np.zeros((n, n), dtype=complex))

    @classmethod
    def zeros(cls, rows, cols):
        return cls.from_pair(
            np.zeros((rows, cols), dtype=complex), np.zeros((rows, cols), dtype=complex)
        )

    @classmethod
    def diag(cls, entries):
        n = len(entries)
        a = np.zeros((n, n), dtype=complex)
        b = np.zeros((n, n), dtype=complex)
        for k, q in enumerate(entries):
            a[k, k] = complex(q.w, q.x)
            b[k, k] = complex(q.y, q.z)
        return cls.from_pair(a, b)

    @property
    def shape(self):
        return self.a.shape

    def __getitem__(self, key):
        i, j = key
        return Quaternion(
            self.a[i, j].real, self.a[i, j].imag, self.b[i, j].real, self.b[i, j].imag
        )

    def to_wxyz(self):
        return _pair_to_wxyz(self.a, self.b)

    def adjoint(self):
        return QMatrix.from_pair(np.conj(self.a).T, -self.b.T)

    def frobenius_norm(self):
        return _pair_norm(self.a, self.b)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"QMatrix(shape={self.shape})"


def inner(u, v):
    """sum_k u_k * conj(v_k); linear on the left, conjugate-linear on the right."""
    if len(u) != len(v):
        raise ValueError(f"length mismatch: {len(u)} vs {len(v)}")
    alpha = np.sum(u.a * np.conj(v.a) + u.b * np.conj(v.b))
    beta = np.sum(u.b * v.a - u.a * v.b)
    return Quaternion(alpha.real, alpha.imag, beta.real, beta.imag)


def apply(m, u):
    """Row action (Mu)_j = sum_k u_k M[k, j]; left scalars pass through."""
    if m.shape[0] != len(u):
        raise ValueError(f"dimension mismatch: matrix {m.shape} applied to length {len(u)}")
    a, b = _pair_matmul(u.a, u.b, m.a, m.b)
    return QVector.from_pair(a, b)


def adjoint(m):
    return m.adjoint()


def matmul(p, q):
    if p.shape[1] != q.shape[0]:
        raise ValueError(f"dimension mismatch: {p.shape} @ {q.shape}")
    a, b = _pair_matmul(p.a, p.b, q.a, q.b)
    return QMatrix.from_pair(a, b)


def embed(m):
    """Complex 2n x 2n image [[A, B], [-conj(B), conj(A)]] of a square matrix."""
    if m.shape[0] != m.shape[1]:
        raise ValueError("embed requires a square matrix")
    return np.block([[m.a, m.b], [-np.conj(m.b), np.conj(m.a)]])


def _rows_from_embedded_columns(z):
    """Row quaternion vectors corresponding to right eigenvector columns of C.T."""
    n = z.shape[0] // 2
    return z[:n].T.copy(), z[n:].T.copy()


def _stack_apply(m, va, vb):
    """apply() for a stack of row vectors, one per row of (va, vb)."""
    return _pair_matmul(va, vb, m.a, m.b)


def _stack_residuals(m, lam, va, vb):
    """Backward errors |apply(M, v_k) - lam_k v_k| for stacked rows, lam in C_i."""
    wa, wb = _stack_apply(m, va, vb)
    ra = wa - lam[:, None] * va
    rb = wb - lam[:, None] * vb
    return np.sqrt(np.sum(np.abs(ra) ** 2 + np.abs(rb) ** 2, axis=1))


def _orthonormal_select(cand_a, cand_b, expected=None, drop_tol=1e-6):
    """Rank-revealing left-module Gram-Schmidt over a candidate stack.

    The embedded eigenproblem hands back twice as many complex eigenvectors
    as the quaternionic eigenspace dimension.  Candidates are consumed
    greedily by largest residual norm (column pivoting); with `expected` set
    exactly that many survive, which stays correct even when roundoff blurs
    the kept/dropped dichotomy inside noise-level eigenvalue clusters.
    Returns (kept_a, kept_b, source_indices).
    """
    n_cand, dim = cand_a.shape
    work_a = cand_a.astype(complex, copy=True)
    work_b = cand_b.astype(complex, copy=True)
    target = n_cand if expected is None else int(expected)
    out_a = np.zeros((target, dim), dtype=complex)
    out_b = np.zeros((target, dim), dtype=complex)
    sources = []
    # residual norms are downdated as directions are projected out; the pick
    # itself gets an exact second orthogonalization pass, so drift in the
    # estimates can only affect pivot order, never orthonormality
    norms_sq = np.sum(np.abs(work_a) ** 2 + np.abs(work_b) ** 2, axis=1)
    alive = np.ones(n_cand, dtype=bool)
    k = 0
    while k < target:
        est = np.where(alive, norms_sq, -1.0)
        pick = int(np.argmax(est))
        if est[pick] < 0.0:
            break
        a = work_a[pick].copy()
        b = work_b[pick].copy()
        if k:
            alpha, beta = _pair_inner_rows(a, b, out_a[:k], out_b[:k])
            a -= alpha @ out_a[:k] - beta @ np.conj(out_b[:k])
            b -= alpha @ out_b[:k] + beta @ np.conj(out_a[:k])
        nrm = np.sqrt(np.sum(np.abs(a) ** 2 + np.abs(b) ** 2))
        if nrm <= 0.0 or (expected is None and nrm < drop_tol):
            alive[pick] = False
            norms_sq[pick] = 0.0
            if expected is None:
                break
            continue
        a /= nrm
        b /= nrm
        out_a[k] = a
        out_b[k] = b
        sources.append(pick)
        alive[pick] = False
        k += 1
        rows = np.nonzero(alive)[0]
        if rows.size:
            alpha = work_a[rows] @ np.conj(a) + work_b[rows] @ np.conj(b)
            beta = work_b[rows] @ a - work_a[rows] @ b
            work_a[rows] -= alpha[:, None] * a[None, :] - beta[:, None] * np.conj(b)[None, :]
            work_b[rows] -= alpha[:, None] * b[None, :] + beta[:, None] * np.conj(a)[None, :]
            norms_sq[rows] = np.maximum(norms_sq[rows] - (np.abs(alpha) ** 2 + np.abs(beta) ** 2), 0.0)
    return out_a[:k], out_b[:k], sources


def gram_schmidt(vectors, rank_tol=1e-12):
    """Orthonormalize with left coefficients; raises on rank deficiency."""
    out = []
    kept_a, kept_b = [], []
    for v in vectors:
        a, b = v.a.copy(), v.b.copy()
        original = np.sqrt(np.sum(np.abs(a) ** 2 + np.abs(b) ** 2))
        for _ in range(2):
            if kept_a:
                ka = np.vstack(kept_a)
                kb = np.vstack(kept_b)
                alpha, beta = _pair_inner_rows(a, b, ka, kb)
                a = a - (alpha @ ka - beta @ np.conj(kb))
                b = b - (alpha @ kb + beta @ np.conj(ka))
        nrm = np.sqrt(np.sum(np.abs(a) ** 2 + np.abs(b) ** 2))
        if nrm <= rank_tol * max(original, 1.0):
            raise ValueError("rank deficiency: vector collapses under projection")
        kept_a.append(a / nrm)
        kept_b.append(b / nrm)
        out.append(QVector.from_pair(kept_a[-1], kept_b[-1]))
    return out


@dataclass
class SpectralDecomposition:
    """Eigenpairs sorted by |lambda| descending, eigenvalues in C_i+ form.

    Ties in |lambda| break by canonical representative, real part first and
    then imaginary part, both descending, so output order is reproducible.
    """

    lam: np.ndarray  # (k,) complex canonical representatives
    vec_a: np.ndarray  # (k, n) complex
    vec_b: np.ndarray  # (k, n) complex
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def eigenvalues(self):
        return [Quaternion(l.real, l.imag, 0.0, 0.0) for l in self.lam]

    @property
    def eigenvectors(self):
        return [QVector.from_pair(self.vec_a[k], self.vec_b[k]) for k in range(len(self.lam))]

    @property
    def mu(self):
        return np.abs(self.lam) ** 2

    def __len__(self):
        return len(self.lam)

    def to_records(self):
        recs = []
        for k, l in enumerate(self.lam):
            recs.append(
                {
                    "lambda": [float(l.real), float(l.imag), 0.0, 0.0],
                    "mu": float(abs(l) ** 2),
                    "residual": float(self.residuals[k]),
                }
            )
        return recs


def _sort_eigenpairs(lam, va, vb, residuals):
    order = sorted(
        range(len(lam)),
        key=lambda k: (-abs(lam[k]), -lam[k].real, -lam[k].imag),
    )
    idx = np.array(order, dtype=int)
    return lam[idx], va[idx], vb[idx], residuals[idx]


def _cluster_spans(values, gap):
    """Consecutive index spans over a sorted 1-D array, split at gaps > gap."""
    spans = []
    start = 0
    for i in range(1, len(values) + 1):
        if i == len(values) or abs(values[i] - values[i - 1]) > gap:
            spans.append((start, i))
            start = i
    return spans


def eig_selfadjoint(m, selfadjoint_rtol=1e-9, cluster_gap=None):
    """Spectral decomposition of a self-adjoint quaternion matrix.

    Eigenvalues are real; positive semidefinite input yields a nonnegative
    spectrum up to roundoff.  The embedded Hermitian problem carries every
    eigenvalue twice, so each degenerate group is thinned to a quaternionic
    orthonormal basis of half the size.
    """
    n = m.shape[0]
    if m.shape[0] != m.shape[1]:
        raise ValueError("eig_selfadjoint requires a square matrix")
    scale = m.frobenius_norm()
    dev = QMatrix.from_pair(m.a - np.conj(m.a).T, m.b + m.b.T).frobenius_norm()
    if dev > max(selfadjoint_rtol * scale, 1e-300):
        raise ValueError(f"matrix is not self-adjoint: deviation {dev:.3e} vs scale {scale:.3e}")

    h = embed(m)
    h = 0.5 * (h + np.conj(h).T)
    w, v = np.linalg.eigh(h)  # ascending

    if cluster_gap is None:
        # tight: merges only the embedded Kramers pairs and exact degeneracies
        cluster_gap = max(64.0 * 2 * n * np.finfo(float).eps * (abs(w).max() if n else 1.0), 1e-300)

    lam_out, va_out, vb_out = [], [], []
    for lo, hi in _cluster_spans(w, cluster_gap):
        if (hi - lo) % 2:
            raise EigensolverError(
                f"embedded eigenvalue group of odd size {hi - lo}; cluster gap too tight"
            )
        cols = np.conj(v[:, lo:hi])  # row eigenvectors of the embedded matrix
        ca, cb = cols[:n].T, cols[n:].T
        ka, kb, src = _orthonormal_select(ca, cb, expected=(hi - lo) // 2)
        for r in range(len(ka)):
            lam_out.append(complex(w[lo + src[r]]))
            va_out.append(ka[r])
            vb_out.append(kb[r])
    if len(lam_out) != n:
        raise EigensolverError(f"recovered {len(lam_out)} eigenpairs for dimension {n}")

    lam = np.array(lam_out)
    va = np.vstack(va_out)
    vb = np.vstack(vb_out)
    residuals = _stack_residuals(m, lam, va, vb) / max(scale, 1e-300)
    lam, va, vb, residuals = _sort_eigenpairs(lam, va, vb, residuals)
    return SpectralDecomposition(lam, va, vb, residuals)


def _canonicalize_candidates(lam, ca, cb):
    """Flip eigenpairs into C_i+:  (lam, u) -> (conj(lam), j*u) when Im < 0."""
    flip = lam.imag < 0.0
    lam = np.where(flip, np.conj(lam), lam)
    fa = np.where(flip[:, None], -np.conj(cb), ca)
    fb = np.where(flip[:, None], np.conj(ca), cb)
    return lam, fa, fb


def _diagonalize_normal_restriction(m, phi_a, phi_b):
    """Eigenpairs of M restricted to the span of the orthonormal rows (phi_a, phi_b).

    The restriction R[r, s] = inner(apply(M, phi_r), phi_s) is a small normal
    quaternion matrix; its embedded transpose is diagonalized by a complex
    Schur factorization and the coefficient rows are mapped back to the full
    space.  Returns stacked eigenvectors with eigenvalues in C_i+.
    """
    mdim = phi_a.shape[0]
    wa, wb = _stack_apply(m, phi_a, phi_b)
    # R entries via batched inner products of W rows against Phi rows
    ra = wa @ np.conj(phi_a).T + wb @ np.conj(phi_b).T
    rb = wb @ phi_a.T - wa @ phi_b.T
    r = QMatrix.from_pair(ra, rb)

    if mdim == 1:
        q = r[0, 0]
        s = similarity_unit_to_upper_complex(q)
        a, b = canonical_complex_representative(q)
        lam = np.array([complex(a, b)])
        alpha, beta = complex(s.w, s.x), complex(s.y, s.z)
        xa, xb = _pair_scale_left(alpha, beta, phi_a, phi_b)
        return lam, xa, xb

    ct = embed(r).T
    tri, z = scipy.linalg.schur(ct, output="complex")
    ev = np.diag(tri).copy()
    cand_a, cand_b = _rows_from_embedded_columns(z)
    ev, cand_a, cand_b = _canonicalize_candidates(ev, cand_a, cand_b)

    # deterministic candidate order, then rank-revealing thinning; pivoting
    # never mixes candidates, so each survivor keeps its own eigenvalue label
    order = sorted(range(len(ev)), key=lambda k: (-ev[k].real, -ev[k].imag))
    ev = ev[order]
    cand_a = cand_a[order]
    cand_b = cand_b[order]
    ca, cb, src = _orthonormal_select(cand_a, cand_b, expected=mdim)
    if len(ca) != mdim:
        raise EigensolverError(f"normal restriction of size {mdim} produced {len(ca)} eigenpairs")
    lam_out = ev[src]

    # coefficient rows act on the Phi rows exactly like a matrix product
    xa, xb = _pair_matmul(ca, cb, phi_a, phi_b)
    return np.array(lam_out), xa, xb


def eig_normal(
    m,
    normal_rtol=1e-8,
    cluster_rel_gap=1e-6,
    residual_rtol=1e-8,
    selfadjoint_rtol=1e-9,
):
    """Spectral decomposition of a normal quaternion matrix.

    Mirrors the compact-normal construction: eigendecompose K = M M* (real
    spectrum), group eigenvectors into mu-clusters, then diagonalize the
    restriction of M on each cluster.  |lambda_k|^2 equals the cluster mu.
    """
    n = m.shape[0]
    if m.shape[0] != m.shape[1]:
        raise ValueError("eig_normal requires a square matrix")
    scale = m.frobenius_norm()
    k_left = matmul(m, m.adjoint())
    k_right = matmul(m.adjoint(), m)
    dev = QMatrix.from_pair(k_left.a - k_right.a, k_left.b - k_right.b).frobenius_norm()
    if dev > max(normal_rtol * scale**2, 1e-300):
        raise ValueError(f"matrix is not normal: commutator {dev:.3e} vs scale^2 {scale**2:.3e}")

    dec = eig_selfadjoint(k_left, selfadjoint_rtol=selfadjoint_rtol)
    mu = dec.lam.real  # descending
    gap = max(cluster_rel_gap * max(mu[0], 0.0), 1e-300)

    lam_all = np.zeros(n, dtype=complex)
    va_all = np.zeros((n, n), dtype=complex)
    vb_all = np.zeros((n, n), dtype=complex)
    pos = 0
    for lo, hi in _cluster_spans(mu, gap):
        lam, xa, xb = _diagonalize_normal_restriction(m, dec.vec_a[lo:hi], dec.vec_b[lo:hi])
        res = _stack_residuals(m, lam, xa, xb) / max(scale, 1e-300)
        if np.any(res > residual_rtol):
            # retry once: re-orthonormalize within the cluster, take Rayleigh
            # quotients and rotate each vector to its canonical representative
            xa, xb, _ = _orthonormal_select(xa, xb, expected=hi - lo)
            if len(xa) != hi - lo:
                raise EigensolverError("cluster re-orthonormalization lost vectors")
            wa, wb = _stack_apply(m, xa, xb)
            alpha = np.sum(wa * np.conj(xa) + wb * np.conj(xb), axis=1)
            beta = np.sum(wb * xa - wa * xb, axis=1)
            lam_list = []
            for r in range(len(xa)):
                q = Quaternion(alpha[r].real, alpha[r].imag, beta[r].real, beta[r].imag)
                s = similarity_unit_to_upper_complex(q)
                sa, sb = complex(s.w, s.x), complex(s.y, s.z)
                xa[r], xb[r] = _pair_scale_left(sa, sb, xa[r], xb[r])
                ca, cb = canonical_complex_representative(q)
                lam_list.append(complex(ca, cb))
            lam = np.array(lam_list)
            res = _stack_residuals(m, lam, xa, xb) / max(scale, 1e-300)
            if np.any(res > residual_rtol):
                raise EigensolverError(
                    f"eigenpair residual {res.max():.3e} above {residual_rtol:.1e} after retry"
                )
        count = hi - lo
        lam_all[pos : pos + count] = lam
        va_all[pos : pos + count] = xa
        vb_all[pos : pos + count] = xb
        pos += count

    residuals = _stack_residuals(m, lam_all, va_all, vb_all) / max(scale, 1e-300)
    lam_all, va_all, vb_all, residuals = _sort_eigenpairs(lam_all, va_all, vb_all, residuals)
    return SpectralDecomposition(lam_all, va_all, vb_all, residuals)


# ---------------------------------------------------------------------------
# Random generators used by the verification suites and tests.

def random_quaternion(rng, scale=1.0):
    w, x, y, z = rng.uniform(-scale, scale, size=4)
    return Quaternion(w, x, y, z)


def random_qvector(rng, n, scale=1.0):
    return QVector.from_wxyz(rng.uniform(-scale, scale, size=(n, 4)))


def random_qmatrix(rng, rows, cols, scale=1.0):
    return QMatrix.from_wxyz(rng.uniform(-scale, scale, size=(rows, cols, 4)))


def random_unitary_qmatrix(rng, n):
    """Matrix whose rows are an orthonormal basis of H^n."""
    rows = gram_schmidt([random_qvector(rng, n) for _ in range(n)])
    a = np.vstack([v.a for v in rows])
    b = np.vstack([v.b for v in rows])
    return QMatrix.from_pair(a, b)


def planted_normal_qmatrix(rng, eigenvalues):
    """Normal matrix with prescribed spectrum: rows of a random unitary are
    eigenvectors, so M = U* D U satisfies apply(M, row_k) = lam_k row_k."""
    n = len(eigenvalues)
    u = random_unitary_qmatrix(rng, n)
    d = QMatrix.diag(eigenvalues)
    return matmul(matmul(u.adjoint(), d), u), u
