"""
Single-qubit unitaries.

``Unitary1`` wraps a validated 2x2 complex matrix. Rotations follow the
physics convention R_n(angle) = exp(-i angle/2 n.sigma), so the free syndrome
rotation exp(-i sigma_x pi/8) is ``Unitary1.from_axis_angle((1, 0, 0), pi/4)``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import schur

from globalctl.constants import UNITARY_TOL
from globalctl.exceptions import InvalidInstruction, NonUnitaryError

_I2 = np.eye(2, dtype=complex)
_SX = np.array([[0, 1], [1, 0]], dtype=complex)
_SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SZ = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True, eq=False)
class Unitary1:
    """A 2x2 unitary. Construct through the classmethods, which validate."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise NonUnitaryError(f"Expected a 2x2 matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise NonUnitaryError("Matrix has non-finite entries")
        if np.max(np.abs(m @ m.conj().T - _I2)) > UNITARY_TOL * 10:
            raise NonUnitaryError("Matrix is not unitary within tolerance")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    # ------------------------------------------------------------------
    # constructors
    # ------------------------------------------------------------------

    @classmethod
    def from_matrix(cls, matrix) -> Unitary1:
        return cls(np.array(matrix, dtype=complex))

    @classmethod
    def from_rows(cls, rows) -> Unitary1:
        """
        Build from explicit entries.

        Args:
            rows: Four [re, im] pairs in row-major order, or a 2x2 nested list
                of [re, im] pairs

        Returns:
            Validated unitary
        """
        flat = list(rows)
        if len(flat) == 2 and all(len(r) == 2 and not _is_number(r[0]) for r in flat):
            flat = [flat[0][0], flat[0][1], flat[1][0], flat[1][1]]
        if len(flat) != 4:
            raise InvalidInstruction("rows must hold four [re, im] pairs")
        entries = []
        for pair in flat:
            if len(pair) != 2 or not all(_is_number(x) for x in pair):
                raise InvalidInstruction(f"Malformed matrix entry {pair!r}")
            entries.append(complex(float(pair[0]), float(pair[1])))
        return cls(np.array(entries, dtype=complex).reshape(2, 2))

    @classmethod
    def from_axis_angle(cls, axis, angle: float) -> Unitary1:
        """
        Rotation exp(-i angle/2 n.sigma) about a (normalized) axis.

        Args:
            axis: 3-vector; normalized here, must be non-zero
            angle: Rotation angle in radians

        Returns:
            Rotation unitary
        """
        n = np.asarray(axis, dtype=float)
        if n.shape != (3,):
            raise InvalidInstruction(f"axis must have 3 components, got {n.shape}")
        norm = float(np.linalg.norm(n))
        if norm < 1e-15:
            raise InvalidInstruction("axis must be non-zero")
        n = n / norm
        generator = n[0] * _SX + n[1] * _SY + n[2] * _SZ
        half = angle / 2.0
        return cls(math.cos(half) * _I2 - 1j * math.sin(half) * generator)

    @classmethod
    def rz(cls, angle: float) -> Unitary1:
        return cls.from_axis_angle((0, 0, 1), angle)

    @classmethod
    def ry(cls, angle: float) -> Unitary1:
        return cls.from_axis_angle((0, 1, 0), angle)

    @classmethod
    def from_zyz(cls, beta: float, gamma: float, delta: float) -> Unitary1:
        """Rz(beta) Ry(gamma) Rz(delta)."""
        return cls.rz(beta) @ cls.ry(gamma) @ cls.rz(delta)

    @classmethod
    def phase(cls, theta: float) -> Unitary1:
        """diag(1, e^{i theta})."""
        return cls(np.diag([1.0, cmath.exp(1j * theta)]))

    # ------------------------------------------------------------------
    # algebra
    # ------------------------------------------------------------------

    def __matmul__(self, other: Unitary1) -> Unitary1:
        return Unitary1(self.matrix @ other.matrix)

    def dagger(self) -> Unitary1:
        return Unitary1(self.matrix.conj().T)

    def power(self, k: int) -> Unitary1:
        return Unitary1(np.linalg.matrix_power(self.matrix, k))

    def allclose(self, other: Unitary1, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.matrix - other.matrix)) <= tol)

    def __repr__(self) -> str:
        return f"Unitary1({np.array2string(self.matrix, precision=6)})"

    # ------------------------------------------------------------------
    # classification
    # ------------------------------------------------------------------

    def classical_action(self, bit: int, tol: float = UNITARY_TOL):
        """
        Image of a basis state when U is a permutation times phases.

        Args:
            bit: Input basis value
            tol: Tolerance on the vanishing entries

        Returns:
            (new_bit, phase) if U maps |bit> to a basis state, else None
        """
        m = self.matrix
        if abs(m[0, 1]) <= tol and abs(m[1, 0]) <= tol:
            return bit, complex(m[bit, bit])
        if abs(m[0, 0]) <= tol and abs(m[1, 1]) <= tol:
            return 1 - bit, complex(m[1 - bit, bit])
        return None

    def is_diagonal(self, tol: float = UNITARY_TOL) -> bool:
        return abs(self.matrix[0, 1]) <= tol and abs(self.matrix[1, 0]) <= tol

    # ------------------------------------------------------------------
    # decompositions
    # ------------------------------------------------------------------

    def zyz_angles(self) -> tuple[float, float, float, float]:
        """
        Angles (alpha, beta, gamma, delta) with U = e^{i alpha} Rz(beta) Ry(gamma) Rz(delta).
        """
        m = self.matrix
        alpha = cmath.phase(np.linalg.det(m)) / 2.0
        v = m * cmath.exp(-1j * alpha)
        a, b = v[0, 0], v[1, 0]
        gamma = 2.0 * math.atan2(abs(b), abs(a))
        if abs(b) < 1e-14:
            beta, delta = -2.0 * cmath.phase(a), 0.0
        elif abs(a) < 1e-14:
            beta, delta = 2.0 * cmath.phase(b), 0.0
        else:
            pa, pb = cmath.phase(a), cmath.phase(b)
            beta, delta = pb - pa, -pa - pb
        # det fixes alpha only up to pi; pick the branch that reproduces U
        rebuilt = cmath.exp(1j * alpha) * Unitary1.from_zyz(beta, gamma, delta).matrix
        if np.max(np.abs(rebuilt - m)) > 1e-9:
            alpha += math.pi
        return alpha, beta, gamma, delta

    def abc_cz_factors(self) -> tuple[float, Unitary1, Unitary1, Unitary1]:
        """
        Controlled-U factors for a CZ-based construction.

        Returns (alpha, A, B, C) with A B C = 1 and U = e^{i alpha} A Z B Z C,
        so applying C, CZ, B, CZ, A to the target and the phase diag(1, e^{i alpha})
        to the control yields controlled-U.
        """
        alpha, beta, gamma, delta = self.zyz_angles()
        a = Unitary1.rz(beta) @ Unitary1.ry(gamma / 2.0)
        b = Unitary1.ry(-gamma / 2.0) @ Unitary1.rz(-(delta + beta) / 2.0)
        c = Unitary1.rz((delta - beta) / 2.0)
        # X = H Z H moves the standard X-based factors onto CZ
        return alpha, a @ HADAMARD, HADAMARD @ b @ HADAMARD, HADAMARD @ c

    def schur_phases(self) -> tuple[Unitary1, complex, complex]:
        """
        Eigen-decomposition U = W diag(d0, d1) W^dagger with unitary W.
        """
        t, z = schur(self.matrix, output="complex")
        return Unitary1(z), complex(t[0, 0]), complex(t[1, 1])

    # ------------------------------------------------------------------
    # serialization
    # ------------------------------------------------------------------

    def to_dict(self) -> dict:
        """Explicit-entries form used by the pulse-program format."""
        return {
            "rows": [[float(z.real), float(z.imag)] for z in self.matrix.reshape(4)]
        }

    @classmethod
    def from_dict(cls, document: dict) -> Unitary1:
        """Parse either {"axis": [...], "angle": x} or {"rows": [...]}."""
        if not isinstance(document, dict):
            raise InvalidInstruction("unitary must be an object")
        if "rows" in document:
            return cls.from_rows(document["rows"])
        if "axis" in document and "angle" in document:
            if not _is_number(document["angle"]):
                raise InvalidInstruction("angle must be a number")
            return cls.from_axis_angle(document["axis"], float(document["angle"]))
        raise InvalidInstruction("unitary needs 'rows' or 'axis' and 'angle'")

    def __eq__(self, other) -> bool:
        if not isinstance(other, Unitary1):
            return NotImplemented
        return bool(np.array_equal(self.matrix, other.matrix))

    def __hash__(self) -> int:
        return hash(self.matrix.tobytes())


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def phase_distance(u: Unitary1, v: Unitary1) -> float:
    """Operator distance up to global phase: 1 - |tr(U^dagger V)| / 2."""
    return float(1.0 - abs(np.trace(u.matrix.conj().T @ v.matrix)) / 2.0)


def random_unitary(rng: np.random.Generator) -> Unitary1:
    """Haar-random single-qubit unitary."""
    z = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return Unitary1(q * (d / np.abs(d)))


IDENTITY = Unitary1(_I2)
PAULI_X = Unitary1(_SX)
PAULI_Y = Unitary1(_SY)
PAULI_Z = Unitary1(_SZ)
HADAMARD = Unitary1(np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2.0))
