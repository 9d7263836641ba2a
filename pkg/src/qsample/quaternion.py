"""Quaternion scalar arithmetic.

A value is an immutable (w, x, y, z) quadruple of doubles under Hamilton
multiplication, with w the scalar part and (x, y, z) the i, j, k parts.
Component order is fixed to (w, x, y, z) everywhere, including serialization.
"""

import math

import numpy as np

# Inversion refuses anything with norm below this floor; reciprocals of
# near-zero eigenvalues must fail loudly instead of propagating inf/NaN.
INVERSION_FLOOR = 1e-300

_PURE_UNIT_TOL = 1e-9


class Quaternion:
    """Immutable quaternion w + x*i + y*j + z*k."""

    __slots__ = ("w", "x", "y", "z")

    def __init__(self, w=0.0, x=0.0, y=0.0, z=0.0):
        self.w = float(w)
        self.x = float(x)
        self.y = float(y)
        self.z = float(z)

    @classmethod
    def from_array(cls, arr):
        w, x, y, z = arr
        return cls(w, x, y, z)

    def to_array(self):
        return np.array([self.w, self.x, self.y, self.z])

    def __repr__(self):
        return f"Quaternion({self.w!r}, {self.x!r}, {self.y!r}, {self.z!r})"

    def __eq__(self, other):
        if not isinstance(other, Quaternion):
            return NotImplemented
        return (self.w, self.x, self.y, self.z) == (other.w, other.x, other.y, other.z)

    def __hash__(self):
        return hash((self.w, self.x, self.y, self.z))

    def isclose(self, other, atol=1e-12):
        """Componentwise closeness; numerical code never compares bitwise."""
        return (
            abs(self.w - other.w) <= atol
            and abs(self.x - other.x) <= atol
            and abs(self.y - other.y) <= atol
            and abs(self.z - other.z) <= atol
        )

    def __add__(self, other):
        other = _coerce(other)
        if other is None:
            return NotImplemented
        return Quaternion(self.w + other.w, self.x + other.x, self.y + other.y, self.z + other.z)

    __radd__ = __add__

    def __sub__(self, other):
        other = _coerce(other)
        if other is None:
            return NotImplemented
        return Quaternion(self.w - other.w, self.x - other.x, self.y - other.y, self.z - other.z)

    def __rsub__(self, other):
        other = _coerce(other)
        if other is None:
            return NotImplemented
        return other - self

    def __neg__(self):
        return Quaternion(-self.w, -self.x, -self.y, -self.z)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            s = float(other)
            return Quaternion(self.w * s, self.x * s, self.y * s, self.z * s)
        if not isinstance(other, Quaternion):
            return NotImplemented
        p, q = self, other
        return Quaternion(
            p.w * q.w - p.x * q.x - p.y * q.y - p.z * q.z,
            p.w * q.x + p.x * q.w + p.y * q.z - p.z * q.y,
            p.w * q.y - p.x * q.z + p.y * q.w + p.z * q.x,
            p.w * q.z + p.x * q.y - p.y * q.x + p.z * q.w,
        )

    def __rmul__(self, other):
        if isinstance(other, (int, float)):
            return self * float(other)
        return NotImplemented

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return self * (1.0 / float(other))
        if isinstance(other, Quaternion):
            return self * other.inverse()
        return NotImplemented

    def __abs__(self):
        return self.norm()

    def conj(self):
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def norm_sq(self):
        return self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z

    def norm(self):
        return math.sqrt(self.norm_sq())

    def scalar_part(self):
        return self.w

    def vector_part(self):
        return Quaternion(0.0, self.x, self.y, self.z)

    def vector_norm(self):
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def inverse(self):
        n2 = self.norm_sq()
        if self.norm() < INVERSION_FLOOR:
            raise ZeroDivisionError("quaternion inverse of a (near-)zero value")
        return Quaternion(self.w / n2, -self.x / n2, -self.y / n2, -self.z / n2)

    def is_finite(self):
        return all(map(math.isfinite, (self.w, self.x, self.y, self.z)))


def _coerce(value):
    if isinstance(value, Quaternion):
        return value
    if isinstance(value, (int, float)):
        return Quaternion(float(value))
    return None


ONE = Quaternion(1.0)
QI = Quaternion(0.0, 1.0, 0.0, 0.0)
QJ = Quaternion(0.0, 0.0, 1.0, 0.0)
QK = Quaternion(0.0, 0.0, 0.0, 1.0)


def mul(p, q):
    """Hamilton product; noncommutative."""
    return p * q


def conj(q):
    return q.conj()


def inverse(q):
    return q.inverse()


def canonical_complex_representative(q):
    """Representative (a, b), b >= 0, of the similarity orbit of q.

    Every orbit {s q s^-1} meets the closed upper half of the complex
    i-plane in exactly one point a + b*i with a = Sc(q), b = |Vec(q)|;
    real quaternions are their own singleton orbit.
    """
    return q.scalar_part(), q.vector_norm()


def similarity_unit_to_upper_complex(q):
    """Unit s with s q s^-1 = Sc(q) + |Vec(q)|*i.

    For pure unit p and target e the rotation unit is (1 - e p) normalized;
    the antipodal case Vec(q) ~ -|Vec(q)|*i needs any unit orthogonal to i,
    and k works.
    """
    b = q.vector_norm()
    if b == 0.0:
        return ONE
    vhat = Quaternion(0.0, q.x / b, q.y / b, q.z / b)
    d = ONE - QI * vhat
    dn = d.norm()
    if dn < 1e-6:
        return QK
    return d / dn


def cis(axis, angle):
    """cos(angle) + axis*sin(angle) for a unit pure axis; unit norm result."""
    if abs(axis.scalar_part()) > _PURE_UNIT_TOL:
        raise ValueError("cis axis must be a pure quaternion")
    if abs(axis.norm() - 1.0) > _PURE_UNIT_TOL:
        raise ValueError("cis axis must have unit norm")
    c, s = math.cos(angle), math.sin(angle)
    return Quaternion(c, axis.x * s, axis.y * s, axis.z * s)


# ---------------------------------------------------------------------------
# Array helpers: components stacked on a trailing axis of length 4 in
# (w, x, y, z) order.  These back the randomized algebra suites, where a
# per-object loop over 1e4 trials would dominate the runtime.

def quat_mul_array(p, q):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    pw, px, py, pz = p[..., 0], p[..., 1], p[..., 2], p[..., 3]
    qw, qx, qy, qz = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return np.stack(
        [
            pw * qw - px * qx - py * qy - pz * qz,
            pw * qx + px * qw + py * qz - pz * qy,
            pw * qy - px * qz + py * qw + pz * qx,
            pw * qz + px * qy - py * qx + pz * qw,
        ],
        axis=-1,
    )


def quat_conj_array(q):
    q = np.asarray(q, dtype=float)
    out = q.copy()
    out[..., 1:] *= -1.0
    return out


def quat_norm_array(q):
    q = np.asarray(q, dtype=float)
    return np.sqrt(np.sum(q * q, axis=-1))


def quat_inverse_array(q):
    q = np.asarray(q, dtype=float)
    n2 = np.sum(q * q, axis=-1, keepdims=True)
    if np.any(np.sqrt(n2) < INVERSION_FLOOR):
        raise ZeroDivisionError("quaternion inverse of a (near-)zero value")
    return quat_conj_array(q) / n2
