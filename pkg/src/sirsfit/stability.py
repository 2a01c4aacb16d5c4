"""Mode-by-mode linear stability of the reaction-diffusion equilibria.

A perturbation ``s_l(t) phi_l(x)`` along the Neumann eigenfunction ``phi_l``
evolves with ``A_l = -lambda_l D + dF/dY(Y^S)``. The Jacobian is taken with
the total population held fixed.
"""
from __future__ import annotations

import csv
import enum
import io
import itertools
from dataclasses import dataclass

import numpy as np

from .data.io import atomic_write_text
from .grid import neumann_eigenpair, neumann_modes
from .model import (
    Equilibrium,
    EquilibriumKind,
    Params,
    basic_reproductive_number,
    disease_free_equilibrium,
    endemic_equilibrium,
    reaction_jacobian,
)

MARGINAL_TOL = 1e-9


class Verdict(enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    MARGINAL = "marginal"


def classify(max_real: float, tol: float = MARGINAL_TOL) -> Verdict:
    if abs(max_real) <= tol:
        return Verdict.MARGINAL
    return Verdict.STABLE if max_real < 0 else Verdict.UNSTABLE


def characteristic_coefficients(A) -> tuple[float, float, float]:
    """``(a1, a2, a3)`` with ``det(eta I - A) = eta^3 + a1 eta^2 + a2 eta + a3``."""
    A = np.asarray(A, dtype=float)
    minors = (
        A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
        + A[0, 0] * A[2, 2] - A[0, 2] * A[2, 0]
        + A[1, 1] * A[2, 2] - A[1, 2] * A[2, 1]
    )
    return float(-np.trace(A)), float(minors), float(-np.linalg.det(A))


def routh_hurwitz_3(coeffs) -> bool:
    """All roots of ``eta^3 + a1 eta^2 + a2 eta + a3`` have negative real part."""
    a1, a2, a3 = coeffs
    return bool(a1 > 0 and a3 > 0 and a1 * a2 > a3)


@dataclass(frozen=True)
class ModeAnalysis:
    mode: tuple[int, int]
    lambda_l: float
    matrix: np.ndarray
    eigenvalues: np.ndarray
    coefficients: tuple[float, float, float]

    @property
    def max_real(self) -> float:
        return float(np.max(self.eigenvalues.real))

    @property
    def stable(self) -> bool:
        return self.max_real < 0

    @property
    def verdict(self) -> Verdict:
        return classify(self.max_real)

    @property
    def routh_hurwitz(self) -> bool:
        return routh_hurwitz_3(self.coefficients)

    @property
    def positive_coefficients(self) -> bool:
        return all(c > 0 for c in self.coefficients)


def equilibrium_of(params: Params, beta: float, y0: float, which) -> Equilibrium:
    kind = EquilibriumKind(which) if not isinstance(which, EquilibriumKind) else which
    if kind is EquilibriumKind.DISEASE_FREE:
        return disease_free_equilibrium(params, beta, y0)
    return endemic_equilibrium(params, beta, y0)


def mode_matrix(params: Params, beta: float, state, lambda_l: float) -> np.ndarray:
    J = reaction_jacobian(state, beta, params, frozen_total=True)
    return J - lambda_l * np.diag(params.diffusion)


def analyze_equilibrium(params: Params, beta: float, y0: float, which="endemic", n_modes: int = 50,
                        a: float = 1.0, b: float = 1.0) -> list[ModeAnalysis]:
    """Eigen-analysis of ``A_l`` for the first ``n_modes`` Neumann modes of ``(0,a) x (0,b)``.

    ``which`` is ``"disease-free"`` or ``"endemic"`` (or an
    :class:`EquilibriumKind`); the endemic state needs ``r0 > 1``.
    """
    eq = equilibrium_of(params, beta, y0, which)
    out = []
    for j, k, _ in neumann_modes(n_modes, a, b):
        lam, _ = neumann_eigenpair(j, k, a, b)
        A = mode_matrix(params, beta, eq.state, lam)
        out.append(ModeAnalysis((j, k), lam, A, np.linalg.eigvals(A), characteristic_coefficients(A)))
    return out


def dfe_analytic_eigenvalues(params: Params, beta: float, lambda_l: float) -> np.ndarray:
    p = params
    return np.array([
        -lambda_l * p.d1 - p.mu,
        beta - p.gamma - p.mu - lambda_l * p.d2,
        -p.kappa - p.mu - lambda_l * p.d3,
    ])


def overall_verdict(modes: list[ModeAnalysis]) -> Verdict:
    return classify(max(m.max_real for m in modes))


SWEEP_FLAGS = ("r0", "dfe_verdict", "endemic_exists", "endemic_verdict", "endemic_routh_hurwitz",
               "endemic_positive_coefficients")


def stability_sweep(params: Params, ranges: dict, y0: float = 1.0, n_modes: int = 50,
                    a: float = 1.0, b: float = 1.0) -> list[dict]:
    """Classify both equilibria on the Cartesian grid of ``ranges``.

    ``ranges`` maps ``"beta"`` and any :class:`Params` field to a sequence of
    values; ``"beta"`` is required. Each row echoes the swept values and adds
    ``r0``, the disease-free verdict, whether an endemic state exists, its
    verdict, and whether every endemic mode passes Routh-Hurwitz and has
    positive coefficients. Endemic fields are empty when ``r0 <= 1``.
    """
    if "beta" not in ranges:
        raise ValueError("ranges must include beta")
    names = list(ranges)
    rows = []
    for values in itertools.product(*(np.asarray(ranges[n], dtype=float).ravel() for n in names)):
        point = dict(zip(names, values))
        beta = point["beta"]
        p = params.replace(**{n: v for n, v in point.items() if n != "beta"})
        r0 = basic_reproductive_number(p, beta)
        row = dict(point)
        row["r0"] = r0
        row["dfe_verdict"] = overall_verdict(analyze_equilibrium(p, beta, y0, "disease-free", n_modes, a, b)).value
        row["endemic_exists"] = r0 > 1
        if r0 > 1:
            modes = analyze_equilibrium(p, beta, y0, "endemic", n_modes, a, b)
            row["endemic_verdict"] = overall_verdict(modes).value
            row["endemic_routh_hurwitz"] = all(m.routh_hurwitz for m in modes)
            row["endemic_positive_coefficients"] = all(m.positive_coefficients for m in modes)
        else:
            row["endemic_verdict"] = row["endemic_routh_hurwitz"] = row["endemic_positive_coefficients"] = ""
        rows.append(row)
    return rows


def sweep_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(float(v)) if isinstance(v, (float, np.floating)) else v for k, v in row.items()})
    return buf.getvalue()


def write_sweep_csv(path, rows: list[dict]) -> None:
    atomic_write_text(path, sweep_csv(rows))


def mode_report(modes: list[ModeAnalysis]) -> str:
    """Plain-text table, one line per mode."""
    lines = [f"{'j':>3} {'k':>3} {'lambda':>12} {'max Re':>13} {'verdict':>9} {'RH':>3}  eigenvalues"]
    for m in modes:
        eig = "  ".join(f"{z.real:+.6g}{z.imag:+.6g}j" for z in m.eigenvalues)
        lines.append(
            f"{m.mode[0]:>3} {m.mode[1]:>3} {m.lambda_l:>12.6g} {m.max_real:>13.6g} "
            f"{m.verdict.value:>9} {'yes' if m.routh_hurwitz else 'no':>3}  {eig}"
        )
    return "\n".join(lines) + "\n"
