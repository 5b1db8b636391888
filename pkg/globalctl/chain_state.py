"""
Hybrid simulation kernel for a globally controlled chain.

Every cell is in one of three variants:

* classical: a definite bit
* product: a local 2-vector, not entangled with anything
* quantum: an axis of the single shared register

The register is a tensor of shape (2,)*k whose axes follow the member list,
which is kept in ascending chain order. Exported vectors are little-endian:
ascending chain index maps to ascending significance of the basis index.

Product cells merge into the register only when an entangling action needs
them. Cells whose weight sits on one basis value are demoted eagerly (phase
folded into ``global_phase``), so classical protocols stay classical and the
register stays small.
"""

from __future__ import annotations

import cmath
import logging

import numpy as np

from globalctl.constants import (
    DEMOTION_TOL,
    DENSE_MAX_QUBITS,
    DETERMINISTIC_TOL,
    NAMED_PATTERNS,
    ROLE_PAYLOAD,
)
from globalctl.exceptions import (
    InvalidInstruction,
    LengthMismatch,
    PatternError,
    StateTooLarge,
)
from globalctl.unitary import PAULI_X, Unitary1

logger = logging.getLogger(__name__)

CLASSICAL = "classical"
PRODUCT = "product"
QUANTUM = "quantum"

# Squared-amplitude threshold below which a basis component is dropped
_WEIGHT_TOL = DEMOTION_TOL**2

_BASIS = (
    np.array([1.0 + 0j, 0.0 + 0j]),
    np.array([0.0 + 0j, 1.0 + 0j]),
)


def draw_outcome(p1: float, rng: np.random.Generator | None) -> int:
    """
    Outcome of a Z measurement with P(1) = p1.

    Outcomes within DETERMINISTIC_TOL of certain consume no random draw;
    otherwise one uniform u in [0, 1) is drawn and the outcome is 1 iff u < p1.
    Shared with the dense oracle so both simulators consume identical streams.
    """
    if p1 <= DETERMINISTIC_TOL:
        return 0
    if p1 >= 1.0 - DETERMINISTIC_TOL:
        return 1
    if rng is None:
        raise ValueError("A random generator is required for a non-deterministic outcome")
    return 1 if rng.random() < p1 else 0


class ChainState:
    """
    Hybrid state of an n-cell chain.

    Args:
        n: Number of cells
        bits: Optional initial classical bits (default all zero)
    """

    def __init__(self, n: int, bits: list[int] | None = None):
        if n < 1:
            raise LengthMismatch("A chain needs at least one cell")
        if bits is None:
            bits = [0] * n
        if len(bits) != n:
            raise LengthMismatch(f"Pattern of length {len(bits)} on a chain of {n}")
        if any(b not in (0, 1) for b in bits):
            raise PatternError("Pattern values must be 0 or 1")
        self.n = n
        self._kind = [CLASSICAL] * n
        self._bits = [int(b) for b in bits]
        self._local: dict[int, np.ndarray] = {}
        self.members: list[int] = []
        self.register = np.array(1.0 + 0j)
        self.global_phase = 1.0 + 0j
        self.step_counter = 0

    # ------------------------------------------------------------------
    # inspection
    # ------------------------------------------------------------------

    def kind(self, idx: int) -> str:
        self._check(idx)
        return self._kind[idx]

    def classical_bit(self, idx: int) -> int | None:
        """The bit of a classical cell, or None for product and quantum cells."""
        self._check(idx)
        return self._bits[idx] if self._kind[idx] == CLASSICAL else None

    def classical_bits(self) -> list[int | None]:
        return [
            self._bits[i] if self._kind[i] == CLASSICAL else None for i in range(self.n)
        ]

    def quantum_cells(self) -> list[int]:
        """Cells that are not classical (product or register members)."""
        return [i for i in range(self.n) if self._kind[i] != CLASSICAL]

    def probability_one(self, idx: int) -> float:
        """Marginal probability of reading 1 on cell idx."""
        self._check(idx)
        kind = self._kind[idx]
        if kind == CLASSICAL:
            return float(self._bits[idx])
        if kind == PRODUCT:
            v = self._local[idx]
            return float(abs(v[1]) ** 2 / (abs(v[0]) ** 2 + abs(v[1]) ** 2))
        moved = np.moveaxis(self.register, self.members.index(idx), 0)
        p0 = float(np.sum(np.abs(moved[0]) ** 2))
        p1 = float(np.sum(np.abs(moved[1]) ** 2))
        return p1 / (p0 + p1)

    def register_vector(self) -> np.ndarray:
        """Register amplitudes as a little-endian vector over the members."""
        k = len(self.members)
        if k == 0:
            return np.array([complex(self.register)])
        return self.register.transpose(list(range(k - 1, -1, -1))).reshape(-1).copy()

    def norm(self) -> float:
        return float(np.linalg.norm(self.register))

    def _check(self, idx: int):
        if not 0 <= idx < self.n:
            raise InvalidInstruction(f"Cell {idx} outside chain of {self.n}")

    # ------------------------------------------------------------------
    # kernel actions
    # ------------------------------------------------------------------

    def apply_unitary1(self, idx: int, u: Unitary1):
        """
        Apply a single-cell unitary.

        A classical cell stays classical when U is a permutation times phases;
        otherwise it becomes a product cell carrying U|bit>.
        """
        self._check(idx)
        kind = self._kind[idx]
        m = u.matrix
        if kind == CLASSICAL:
            action = u.classical_action(self._bits[idx])
            if action is not None:
                self._bits[idx], phase = action
                self._fold_phase(phase)
                return
            self._local[idx] = m[:, self._bits[idx]].copy()
            self._kind[idx] = PRODUCT
            self._settle_product(idx)
        elif kind == PRODUCT:
            self._local[idx] = m @ self._local[idx]
            self._settle_product(idx)
        else:
            axis = self.members.index(idx)
            self.register = np.moveaxis(
                np.tensordot(m, self.register, axes=([1], [axis])), 0, axis
            )
            self._settle_members([idx])

    def apply_cphase(self, i: int, j: int, theta: float):
        """Symmetric controlled phase diag(1, 1, 1, e^{i theta}) on cells i and j."""
        self._check(i)
        self._check(j)
        if i == j:
            raise InvalidInstruction(f"Controlled phase needs two distinct cells, got {i}")
        bi, bj = self.classical_bit(i), self.classical_bit(j)
        if bi == 0 or bj == 0:
            return
        phase = cmath.exp(1j * theta)
        if bi == 1 and bj == 1:
            self._fold_phase(phase)
        elif bi == 1:
            self._apply_phase_on_one(j, phase)
        elif bj == 1:
            self._apply_phase_on_one(i, phase)
        else:
            self._promote(i)
            self._promote(j)
            index = [slice(None)] * len(self.members)
            index[self.members.index(i)] = 1
            index[self.members.index(j)] = 1
            self.register[tuple(index)] *= phase

    def apply_controlled(self, controls: list[int], target: int, u: Unitary1):
        """
        Apply U to ``target`` conditioned on every control cell being 1.

        Classical controls are resolved without touching the register; a
        classical 0 control makes the call an exact no-op.
        """
        self._check(target)
        live = []
        for c in controls:
            self._check(c)
            if c == target:
                raise InvalidInstruction(f"Cell {c} cannot control itself")
            bit = self.classical_bit(c)
            if bit == 0:
                return
            if bit is None:
                live.append(c)
        if not live:
            self.apply_unitary1(target, u)
            return
        for c in live + [target]:
            self._promote(c)
        control_axes = {self.members.index(c) for c in live}
        target_axis = self.members.index(target)
        index = tuple(
            1 if a in control_axes else slice(None) for a in range(len(self.members))
        )
        sub = self.register[index]
        position = target_axis - sum(1 for a in control_axes if a < target_axis)
        self.register[index] = np.moveaxis(
            np.tensordot(u.matrix, sub, axes=([1], [position])), 0, position
        )
        self._settle_members(live + [target])

    def measure_qubit(self, idx: int, rng: np.random.Generator | None) -> int:
        """
        Z measurement of one cell; the cell ends classical.

        Returns:
            The outcome bit
        """
        self._check(idx)
        kind = self._kind[idx]
        if kind == CLASSICAL:
            return self._bits[idx]
        outcome = draw_outcome(self.probability_one(idx), rng)
        if kind == PRODUCT:
            kept = self._local.pop(idx)[outcome]
            self._fold_phase(kept / abs(kept))
            self._kind[idx] = CLASSICAL
            self._bits[idx] = outcome
        else:
            self._release(idx, outcome)
            self._settle_members(list(self.members))
        return outcome

    def reset_qubit(self, idx: int, rng: np.random.Generator | None) -> int:
        """Measure, then flip a 1 back to 0. Returns the measured bit."""
        outcome = self.measure_qubit(idx, rng)
        self._bits[idx] = 0
        return outcome

    def toggle_bit(self, idx: int):
        """Classical XOR write; a non-classical cell gets a coherent X instead."""
        self._check(idx)
        if self._kind[idx] == CLASSICAL:
            self._bits[idx] ^= 1
        else:
            self.apply_unitary1(idx, PAULI_X)

    def permute(self, mapping: dict[int, int]):
        """
        Move cell contents: the content of cell ``old`` goes to cell ``mapping[old]``.

        The mapping must be a bijection on its key set.
        """
        if set(mapping.keys()) != set(mapping.values()):
            raise InvalidInstruction("Cell permutation must be a bijection on its cells")
        for idx in mapping:
            self._check(idx)
        kinds, bits = list(self._kind), list(self._bits)
        local = {}
        for old, vec in self._local.items():
            local[mapping.get(old, old)] = vec
        for old, new in mapping.items():
            kinds[new] = self._kind[old]
            bits[new] = self._bits[old]
        self._kind, self._bits, self._local = kinds, bits, local
        if self.members:
            renamed = [mapping.get(m, m) for m in self.members]
            order = sorted(range(len(renamed)), key=renamed.__getitem__)
            self.register = self.register.transpose(order)
            self.members = [renamed[o] for o in order]

    # ------------------------------------------------------------------
    # whole-state views
    # ------------------------------------------------------------------

    def reduced_density(self, indices: list[int]) -> np.ndarray:
        """
        Reduced density matrix of the given cells.

        Args:
            indices: Cells to keep

        Returns:
            2^m x 2^m matrix, little-endian over the sorted cells
        """
        cells = sorted(set(indices))
        for idx in cells:
            self._check(idx)
        tensor = self.register
        ids = list(self.members)
        for c in cells:
            if c not in ids:
                tensor = np.multiply.outer(tensor, self._vector_of(c))
                ids.append(c)
        traced = [a for a, c in enumerate(ids) if c not in cells]
        kept = [c for c in ids if c in cells]
        rho = np.tensordot(tensor, tensor.conj(), axes=(traced, traced))
        m = len(kept)
        perm = [kept.index(c) for c in reversed(cells)]
        rho = rho.transpose(perm + [p + m for p in perm])
        return rho.reshape(2**m, 2**m)

    def to_dense(self) -> np.ndarray:
        """
        Full little-endian state vector with global phase applied.

        Raises:
            StateTooLarge: If n exceeds the dense limit
        """
        if self.n > DENSE_MAX_QUBITS:
            raise StateTooLarge(f"Cannot expand {self.n} cells densely")
        tensor = self.register
        ids = list(self.members)
        for c in range(self.n):
            if c not in ids:
                tensor = np.multiply.outer(tensor, self._vector_of(c))
                ids.append(c)
        perm = [ids.index(c) for c in range(self.n - 1, -1, -1)]
        return tensor.transpose(perm).reshape(-1) * self.global_phase

    def copy(self) -> ChainState:
        other = ChainState.__new__(ChainState)
        other.n = self.n
        other._kind = list(self._kind)
        other._bits = list(self._bits)
        other._local = {k: v.copy() for k, v in self._local.items()}
        other.members = list(self.members)
        other.register = self.register.copy()
        other.global_phase = self.global_phase
        other.step_counter = self.step_counter
        return other

    def __repr__(self) -> str:
        text = "".join(
            str(self._bits[i]) if self._kind[i] == CLASSICAL else "q"
            for i in range(self.n)
        )
        return f"ChainState(n={self.n}, cells={text}, register={len(self.members)})"

    # ------------------------------------------------------------------
    # variant bookkeeping
    # ------------------------------------------------------------------

    def _vector_of(self, idx: int) -> np.ndarray:
        if self._kind[idx] == CLASSICAL:
            return _BASIS[self._bits[idx]]
        return self._local[idx]

    def _fold_phase(self, phase: complex):
        z = self.global_phase * phase
        self.global_phase = z / abs(z)

    def _apply_phase_on_one(self, idx: int, phase: complex):
        kind = self._kind[idx]
        if kind == PRODUCT:
            self._local[idx] = self._local[idx] * np.array([1.0, phase])
        else:
            index = [slice(None)] * len(self.members)
            index[self.members.index(idx)] = 1
            self.register[tuple(index)] *= phase

    def _promote(self, idx: int):
        if self._kind[idx] == QUANTUM:
            return
        vec = self._vector_of(idx)
        self._local.pop(idx, None)
        self.register = np.multiply.outer(self.register, vec)
        self.members.append(idx)
        order = sorted(range(len(self.members)), key=self.members.__getitem__)
        self.register = self.register.transpose(order)
        self.members = [self.members[o] for o in order]
        self._kind[idx] = QUANTUM

    def _release(self, idx: int, bit: int):
        """Project register member idx onto |bit> and make it classical."""
        axis = self.members.index(idx)
        kept = np.asarray(np.take(self.register, bit, axis=axis))
        self.members.pop(axis)
        if kept.ndim == 0:
            z = complex(kept)
            self._fold_phase(z / abs(z))
            kept = np.array(1.0 + 0j)
        else:
            kept = kept / np.linalg.norm(kept)
        self.register = np.ascontiguousarray(kept)
        self._kind[idx] = CLASSICAL
        self._bits[idx] = bit

    def _settle_product(self, idx: int):
        v = self._local[idx]
        w0, w1 = abs(v[0]) ** 2, abs(v[1]) ** 2
        for bit, stray in ((0, w1), (1, w0)):
            if stray <= _WEIGHT_TOL * (w0 + w1):
                self._local.pop(idx)
                self._fold_phase(v[bit] / abs(v[bit]))
                self._kind[idx] = CLASSICAL
                self._bits[idx] = bit
                return

    def _settle_members(self, cells: list[int]):
        """Split out register members whose marginal is deterministic."""
        for idx in cells:
            if self._kind[idx] != QUANTUM:
                continue
            moved = np.moveaxis(self.register, self.members.index(idx), 0)
            w0 = float(np.sum(np.abs(moved[0]) ** 2))
            w1 = float(np.sum(np.abs(moved[1]) ** 2))
            if w1 <= _WEIGHT_TOL * (w0 + w1):
                self._release(idx, 0)
            elif w0 <= _WEIGHT_TOL * (w0 + w1):
                self._release(idx, 1)


def init(layout, pattern, allow_payload: bool = False) -> ChainState:
    """
    Fresh all-classical state for a layout.

    Args:
        layout: Chain layout
        pattern: Pattern name (see NAMED_PATTERNS) or explicit bit list
        allow_payload: Accept ones on payload cells in an explicit bit list

    Returns:
        ChainState with every cell classical and global_phase 1

    Raises:
        LengthMismatch: If an explicit pattern does not cover the chain
        PatternError: If a bit is not 0/1 or lands on a payload cell
    """
    if isinstance(pattern, str):
        if pattern not in NAMED_PATTERNS:
            raise PatternError(f"Unknown pattern {pattern!r}")
        bits = layout.canonical_pattern(pattern)
    else:
        bits = list(pattern)
        if len(bits) != layout.n:
            raise LengthMismatch(
                f"Pattern of length {len(bits)} on a chain of {layout.n}"
            )
        if not allow_payload:
            for i, bit in enumerate(bits):
                if bit == 1 and layout.cell_role(i) == ROLE_PAYLOAD:
                    raise PatternError(f"Pattern sets payload cell {i}")
    state = ChainState(layout.n, bits)
    logger.debug(f"initialized {state!r}")
    return state
