"""Gibbs states on a finite F-cyclic orbit and the matrix model of the
crossed product restricted to it.

Model index ``j = 1..p`` stands for the orbit point ``phi^{j-1}(x)``; the
Hamiltonian is diagonal with ``H_jj = -sum_{k<j} F_k``, so the Gibbs weight
of ``j`` is proportional to ``exp(beta S_{j-1}(F)(x))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .birkhoff import logsumexp
from .dynsys import DynSystem
from .potential import Potential, Table

CYCLIC_TOL = 1e-12


class NotFCyclic(ValueError):
    pass


def check_f_cyclic(F_values: Sequence) -> tuple[bool, float]:
    """``(sum is zero, sum)``; exact for Fractions, tolerance 1e-12 otherwise."""
    if all(isinstance(v, (Fraction, int)) for v in F_values):
        d = sum((Fraction(v) for v in F_values), Fraction(0))
        return d == 0, float(d)
    d = math.fsum(float(v) for v in F_values)
    return abs(d) <= CYCLIC_TOL, d


@dataclass(frozen=True)
class FiniteOrbitModel:
    F_values: tuple

    @classmethod
    def from_orbit(cls, s: DynSystem, F: Potential, x, p: int) -> "FiniteOrbitModel":
        """``F(phi^{j-1} x)`` for ``j = 1..p``; exact for rational tables."""
        pts = s.orbit(x, 0, p - 1)
        if isinstance(F, Table):
            return cls(tuple(F.exact_value(s, int(q)) for q in pts))
        return cls(tuple(float(v) for v in F.values_at(s, x, np.arange(p))))

    @property
    def p(self) -> int:
        return len(self.F_values)

    @property
    def exact(self) -> bool:
        return all(isinstance(v, (Fraction, int)) for v in self.F_values)

    def hamiltonian_diagonal(self) -> tuple:
        """``(H_11, ..., H_pp)`` with ``H_11 = 0`` and ``H_jj = -sum_{k<j} F_k``."""
        out, acc = [], (Fraction(0) if self.exact else 0.0)
        for v in self.F_values:
            out.append(-acc)
            acc = acc + v
        return tuple(out)

    def hamiltonian(self) -> np.ndarray:
        return np.diag([float(h) for h in self.hamiltonian_diagonal()])

    def unitary(self, z: complex, n: int = 1) -> np.ndarray:
        """``(z e_{1,p} + sum_j e_{j+1,j})^n``."""
        p = self.p
        U = np.zeros((p, p), dtype=complex)
        for j in range(p - 1):
            U[j + 1, j] = 1.0
        U[0, p - 1] += z
        if n >= 0:
            return np.linalg.matrix_power(U, n)
        return np.linalg.matrix_power(U.conj().T, -n)

    def as_dict(self):
        return {"p": self.p, "F": [str(v) if isinstance(v, Fraction) else v for v in self.F_values],
                "H_diagonal": [str(h) if isinstance(h, Fraction) else h
                               for h in self.hamiltonian_diagonal()]}


@dataclass(frozen=True)
class GibbsState:
    beta: float
    weights: np.ndarray

    def __call__(self, a: np.ndarray) -> complex:
        return complex(np.sum(self.weights * np.diag(np.asarray(a))))

    def as_dict(self):
        return {"beta": self.beta, "weights": self.weights.tolist()}


def gibbs_state(model: FiniteOrbitModel, beta: float) -> GibbsState:
    ok, d = check_f_cyclic(model.F_values)
    if not ok:
        raise NotFCyclic(f"orbit sum {d} is not zero")
    lw = np.array([-beta * float(h) for h in model.hamiltonian_diagonal()])
    return GibbsState(float(beta), np.exp(lw - logsumexp(lw)))


def _evolved(model, beta, a):
    h = np.array([float(x) for x in model.hamiltonian_diagonal()])
    # e^{-beta H} a e^{beta H}: entry (i, j) scaled by exp(-beta (h_i - h_j))
    return a * np.exp(-beta * (h[:, None] - h[None, :]))


def kms_residual(model: FiniteOrbitModel, beta: float, a, b, state=None) -> float:
    """``|tau(ab) - tau(b e^{-beta H} a e^{beta H})|`` (``tau`` defaults to Gibbs)."""
    tau = gibbs_state(model, beta) if state is None else state
    a, b = np.asarray(a, dtype=complex), np.asarray(b, dtype=complex)
    return abs(tau(a @ b) - tau(b @ _evolved(model, beta, a)))


def matrix_unit(p, i, j):
    e = np.zeros((p, p), dtype=complex)
    e[i, j] = 1.0
    return e


def non_gibbs_witness(model: FiniteOrbitModel, beta: float):
    """Matrix units on which the uniform state violates the KMS condition."""
    p = model.p
    uniform = GibbsState(beta, np.full(p, 1.0 / p))
    best = (0.0, None)
    for i in range(p):
        for j in range(p):
            r = kms_residual(model, beta, matrix_unit(p, i, j), matrix_unit(p, j, i), uniform)
            if r > best[0]:
                best = (r, (i + 1, j + 1))
    return {"residual": best[0], "units": best[1]}


def diagonal_state_eval(m, f: Callable, n: int) -> complex:
    """``int E(f U^n) dm``: the integral of ``f`` for ``n = 0``, else 0."""
    if n != 0:
        return 0j
    return complex(m.integrate(f))


@dataclass(frozen=True)
class CircleFaceState:
    """``tau_beta`` tensored with an atomic probability measure on the circle."""

    model: FiniteOrbitModel
    beta: float
    z_atoms: tuple          # points of the unit circle (complex)
    z_weights: tuple

    def __post_init__(self):
        if abs(math.fsum(self.z_weights) - 1) > 1e-12 or min(self.z_weights) < 0:
            raise ValueError("circle weights must form a probability vector")
        if any(abs(abs(z) - 1) > 1e-12 for z in self.z_atoms):
            raise ValueError("circle atoms must have modulus 1")

    @classmethod
    def dirac(cls, model, beta, z=1.0 + 0j):
        return cls(model, beta, (complex(z),), (1.0,))


def face_state_eval(face: CircleFaceState, f_values, n: int) -> complex:
    """State value on ``f U^n``: ``sum_z w_z tau(diag(f) (pi(U)(z))^n)``.

    ``f_values[j-1]`` is ``f`` at the orbit point of model index ``j``.
    """
    tau = gibbs_state(face.model, face.beta)
    D = np.diag(np.asarray(f_values, dtype=complex))
    return complex(sum(w * tau(D @ face.model.unitary(z, n))
                       for z, w in zip(face.z_atoms, face.z_weights)))


def non_injectivity_witness(model: FiniteOrbitModel, beta: float) -> dict:
    """Two Dirac circle measures giving distinct states with the same diagonal part."""
    p = model.p
    a = CircleFaceState.dirac(model, beta, 1.0)
    b = CircleFaceState.dirac(model, beta, -1.0)
    ones = np.ones(p)
    diag_a = [face_state_eval(a, e, 0) for e in np.eye(p)]
    diag_b = [face_state_eval(b, e, 0) for e in np.eye(p)]
    off_a, off_b = face_state_eval(a, ones, p), face_state_eval(b, ones, p)
    return {"p": p, "beta": beta,
            "diagonal_equal": bool(np.allclose(diag_a, diag_b, atol=1e-14)),
            "value_at_U^p": [[off_a.real, off_a.imag], [off_b.real, off_b.imag]],
            "states_differ": abs(off_a - off_b) > 1e-12}
