"""Single-current reconstruction systems and their solvers.

The primary path recovers the magnetic surface current on a closed
equivalent surface from tangential electric-field tests taken on a
remote measurement surface.  The electric current never enters the
linear system: the interior zero-field identity pins it to the
magnetic one, so the pseudo-inverted operator keeps one unknown per
edge while the recovered pair still radiates nothing into the
interior.  A scaled variant rebalances the operator against
low-frequency breakdown, and the conventional two-current system with
weighted interior constraints is kept as a baseline.

Sign bookkeeping lives in exactly one place: the solved coefficient
vector ``m`` expands the magnetic current itself, the recovery step
returns ``j`` with the matching sign, and the stack ``(-m, j)`` is
what the interior identity map annihilates.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla

from .operators import (ETA0, assemble_blocks, assemble_double_layer,
                        assemble_efie, assemble_radiation_blocks)
from .projectors import build_projectors
from .spaces import build_loop_star, gram_matrix
from .tsvd import SolveReport, tsvd_solve

__all__ = [
    "CurrentSolution",
    "SPSystem",
    "StabilizedSystem",
    "assemble_calderon_interior",
    "build_sp_system",
    "build_stabilized",
    "interior_coupling",
    "load_solution",
    "recover_electric_current",
    "save_solution",
    "solve_baseline_love",
    "solve_sp",
    "solve_stabilized",
]

_STATIC_WAVENUMBER = 1e-30
_SINGULAR_CONDITION = 1e12


def _wavenumber(ctx) -> float:
    k = float(getattr(ctx, "wavenumber", ctx))
    if not (math.isfinite(k) and k > 0.0):
        raise ValueError("wavenumber must be positive and finite")
    return k


def interior_coupling(rwg, bc, ctx, options=None, projectors=None,
                      dynamic_double=None, corrected=True):
    """Dual-tested interior trace block, cleaned for static decoupling.

    The block is half the rotated mixed Gram plus the primal-dual
    double layer.  On a closed surface its static limit cannot couple
    charge-carrying inputs to circulation test rows, but the near-pair
    quadrature leaks a small such coupling, and that leak freezes the
    low-frequency decay of the inverse around the quadrature error.
    Subtracting the star-to-loop part of the statically assembled block
    removes the leak while changing the matrix only within quadrature
    error, since the subtracted term is exactly zero in exact
    arithmetic.

    ``corrected=False`` skips that subtraction and returns the block
    exactly as assembled.  Systems built on the uncorrected block show
    the conditioning breakdown of the naive discretization at low
    frequency, which the sweep diagnostics report next to the scaled
    path.

    ``dynamic_double`` accepts a preassembled double-layer block for
    the working wavenumber so system builders do not pay for it twice.
    """
    k = _wavenumber(ctx)
    dynamic = dynamic_double
    if dynamic is None:
        dynamic = assemble_double_layer(rwg, bc, k, options)
    half_gram = 0.5 * gram_matrix(rwg, bc, rotated=True).toarray()
    if not corrected:
        return half_gram + dynamic
    static = assemble_double_layer(rwg, bc, _STATIC_WAVENUMBER, options)
    ps = projectors
    if ps is None:
        ps = build_projectors(*build_loop_star(rwg.mesh))
    leak = ps.onto_loops(ps.onto_stars((half_gram + static).T).T)
    return half_gram + dynamic - leak


class SPSystem:
    """Discrete map from a magnetic surface current to remote field tests.

    Holds the radiation rows, the self-surface trace block and one
    factorization of the interior coupling shared by every solve and
    recovery.  ``apply`` composes the three factors on a coefficient
    vector; ``dense`` materializes the composition for
    pseudo-inversion.
    """

    def __init__(self, wavenumber, field_double, field_efie, trace_efie,
                 coupling, materialize: bool = True):
        self.wavenumber = float(wavenumber)
        self.field_double = np.asarray(field_double)
        self.field_efie = np.asarray(field_efie)
        self.trace_efie = np.asarray(trace_efie)
        self.coupling = np.asarray(coupling)
        n = self.coupling.shape[0]
        if self.coupling.ndim != 2 or self.coupling.shape != (n, n):
            raise ValueError("interior coupling block must be square")
        if self.trace_efie.shape != (n, n):
            raise ValueError("trace block does not match the coupling size")
        if (self.field_double.shape != self.field_efie.shape
                or self.field_double.shape[1] != n):
            raise ValueError("radiation rows disagree with the unknown count")
        self.coupling_condition = float(np.linalg.cond(self.coupling))
        if not self.coupling_condition < _SINGULAR_CONDITION:
            raise ValueError(
                "interior coupling is numerically singular (condition "
                f"{self.coupling_condition:.2e}); the surface mesh is broken "
                "or sits on an interior resonance")
        self._lu = sla.lu_factor(self.coupling)
        self.matrix = None
        if materialize:
            self.matrix = self.dense()

    @property
    def n_unknowns(self) -> int:
        return self.trace_efie.shape[0]

    @property
    def n_tests(self) -> int:
        return self.field_double.shape[0]

    def inner_solve(self, rhs):
        """Solve the interior coupling block for one or many right sides."""
        return sla.lu_solve(self._lu, np.asarray(rhs))

    def apply(self, coeffs):
        """Field-test response of magnetic current coefficients."""
        coeffs = np.asarray(coeffs)
        recovered = self.inner_solve(self.trace_efie @ coeffs)
        return -self.field_double @ coeffs - self.field_efie @ recovered

    def dense(self):
        """Materialized system matrix, cached after the first call."""
        if self.matrix is None:
            recovered = self.inner_solve(self.trace_efie)
            self.matrix = -self.field_double - self.field_efie @ recovered
        return self.matrix


def build_sp_system(rwg, bc, bc_probe, ctx, options=None, projectors=None,
                    materialize: bool = True) -> SPSystem:
    """Assemble the single-current system for one working point.

    ``rwg`` and ``bc`` live on the radiating surface, ``bc_probe`` on
    the measurement surface.  Set ``materialize=False`` to keep the
    system in apply-only form when only matrix-vector products are
    needed.
    """
    k = _wavenumber(ctx)
    blocks = assemble_radiation_blocks(rwg, bc, bc_probe, k, options)
    coupling = interior_coupling(
        rwg, bc, k, options=options, projectors=projectors,
        dynamic_double=blocks["trace_double"])
    return SPSystem(k, blocks["field_double"], blocks["field_efie"],
                    blocks["trace_efie"], coupling, materialize=materialize)


@dataclass(frozen=True)
class CurrentSolution:
    """Recovered surface currents with their solve provenance.

    ``m`` holds RWG coefficients of the magnetic current; ``j`` holds
    BC coefficients of the impedance-scaled electric current once the
    recovery step has run, and is ``None`` before that.
    """

    m: np.ndarray
    j: np.ndarray | None
    wavenumber: float
    formulation: str
    report: SolveReport


def solve_sp(system: SPSystem, e, policy) -> CurrentSolution:
    """Pseudo-invert the system for the magnetic current coefficients.

    ``e`` holds plain dual tests of the measured electric field on the
    probe surface, e_i = <g_i, E>.  The system rows produce rotated
    field traces, so the right side is the negated test vector; the
    sign lives here and nowhere else.
    """
    e = np.asarray(e)
    if e.shape != (system.n_tests,):
        raise ValueError(
            "measurement vector length does not match the test count")
    x, report = tsvd_solve(system.dense(), -e, policy)
    return CurrentSolution(m=x, j=None, wavenumber=system.wavenumber,
                           formulation="single-current", report=report)


def recover_electric_current(system: SPSystem,
                             solution: CurrentSolution) -> CurrentSolution:
    """Attach the electric current pinned by the interior identity.

    Reuses the factorization made at build time, so recovering twice
    from the same coefficients is bit-identical.
    """
    if solution.m.shape != (system.n_unknowns,):
        raise ValueError("solution does not match the system size")
    j = system.inner_solve(system.trace_efie @ solution.m)
    return replace(solution, j=j)


class StabilizedSystem:
    """Scaled system whose conditioning survives the static limit.

    The unknown map rebalances the current coefficients and the test
    map the measurement rows; solving the scaled system and mapping
    back reproduces the plain solution whenever both paths are well
    conditioned.
    """

    def __init__(self, base: SPSystem, unknown_map, test_map):
        if unknown_map.projectors.n_edges != base.n_unknowns:
            raise ValueError("unknown-side scaling lives on the wrong mesh")
        if test_map.projectors.n_edges != base.n_tests:
            raise ValueError("test-side scaling lives on the wrong mesh")
        self.base = base
        self.unknown_map = unknown_map
        self.test_map = test_map
        self._matrix = None

    def matrix(self):
        """Materialized scaled system, cached after the first call."""
        if self._matrix is None:
            scaled_cols = self.unknown_map.apply(self.base.dense().T).T
            self._matrix = self.test_map.apply(scaled_cols)
        return self._matrix


def build_stabilized(system: SPSystem, unknown_map,
                     test_map) -> StabilizedSystem:
    """Wrap a system with its low-frequency scaling pair."""
    return StabilizedSystem(system, unknown_map, test_map)


def solve_stabilized(stabilized: StabilizedSystem, e,
                     policy) -> CurrentSolution:
    """Solve the scaled system and map the unknown back.

    ``e`` uses the same plain-test convention as ``solve_sp``.
    """
    e = np.asarray(e)
    if e.shape != (stabilized.base.n_tests,):
        raise ValueError(
            "measurement vector length does not match the test count")
    rhs = stabilized.test_map.apply(-e)
    x, report = tsvd_solve(stabilized.matrix(), rhs, policy)
    m = stabilized.unknown_map.apply(x)
    return CurrentSolution(m=m, j=None, wavenumber=stabilized.base.wavenumber,
                           formulation="single-current scaled", report=report)


def assemble_calderon_interior(rwg, bc, ctx, options=None, projectors=None,
                               coupling=None, trace_efie=None):
    """Interior field-identity map on stacked current coefficients.

    Acting on the stack ``(-m, j)`` of a radiating pair, the map
    returns coefficient residuals that vanish up to discretization
    error exactly when the pair radiates nothing into the interior.
    Rows are Gram-normalized so the output lives in the same
    coefficient space as the input and the map can be iterated.

    ``coupling`` and ``trace_efie`` accept preassembled self-surface
    blocks; everything else is assembled here.
    """
    k = _wavenumber(ctx)
    w = coupling
    if w is None:
        w = interior_coupling(rwg, bc, k, options=options,
                              projectors=projectors)
    t = trace_efie
    if t is None:
        t = assemble_efie(rwg, rwg, k, options)
    dual_pass = assemble_blocks(
        bc, [(rwg, ("double",)), (bc, ("single", "hyper"))], k, options)
    double_primal = dual_pass[0]["double"]
    efie_dual = k * dual_pass[1]["single"] + dual_pass[1]["hyper"] / k
    gram = gram_matrix(rwg, bc, rotated=True).toarray()
    gram_dual = -gram.T
    top = np.hstack([0.5 * gram_dual + double_primal, -efie_dual])
    bottom = np.hstack([t, w])
    top = sla.solve(gram_dual, top)
    bottom = sla.solve(gram, bottom)
    return np.vstack([top, bottom])


def solve_baseline_love(rwg, bc, bc_probe, ctx, e, h, policy,
                        love_weight=None, options=None,
                        projectors=None) -> CurrentSolution:
    """Two-current reconstruction with weighted interior constraints.

    Solves the stacked radiation system for both currents at once,
    appending the interior identity rows scaled by ``love_weight`` so
    the pseudo-inverse prefers pairs that radiate nothing inward.
    ``e`` and ``h`` hold plain dual tests of the measured fields,
    <g_i, E> and <g_i, H>; the impedance scaling of ``h`` is applied
    here.  ``love_weight=None`` balances the spectral norms of the two
    stacks, zero disables the constraint.
    """
    k = _wavenumber(ctx)
    e = np.asarray(e)
    h = np.asarray(h)
    n_tests = bc_probe.n_dofs
    if e.shape != (n_tests,) or h.shape != (n_tests,):
        raise ValueError("measurement vectors do not match the probe space")
    rad = assemble_blocks(
        bc_probe, [(rwg, ("double", "single", "hyper")),
                   (bc, ("double", "single", "hyper"))], k, options)
    double_primal = rad[0]["double"]
    efie_primal = k * rad[0]["single"] + rad[0]["hyper"] / k
    double_dual = rad[1]["double"]
    efie_dual = k * rad[1]["single"] + rad[1]["hyper"] / k
    radiation = np.block([[-double_primal, efie_dual],
                          [-efie_primal, -double_dual]])
    identity_map = assemble_calderon_interior(
        rwg, bc, k, options=options, projectors=projectors)
    weight = love_weight
    if weight is None:
        weight = (np.linalg.norm(radiation, 2)
                  / np.linalg.norm(identity_map, 2))
    weight = float(weight)
    if not (math.isfinite(weight) and weight >= 0.0):
        raise ValueError("love_weight must be a finite nonnegative scalar")
    stacked = np.vstack([radiation, weight * identity_map])
    rhs = np.concatenate([e, ETA0 * h, np.zeros(2 * rwg.n_dofs)])
    x, report = tsvd_solve(stacked, rhs, policy)
    n = rwg.n_dofs
    return CurrentSolution(m=-x[:n], j=x[n:], wavenumber=k,
                           formulation="two-current", report=report)


def save_solution(solution: CurrentSolution, path, extra=None) -> None:
    """Write a solution as CSV with a JSON provenance comment line.

    ``extra`` merges additional provenance keys into the header; the
    loader ignores keys it does not know.
    """
    meta = {
        "wavenumber": solution.wavenumber,
        "formulation": solution.formulation,
        "sigma_max": solution.report.sigma_max,
        "sigma_cut": solution.report.sigma_cut,
        "rank": solution.report.rank,
        "condition": solution.report.condition,
        "residual": solution.report.residual,
    }
    if extra:
        meta.update(extra)
    with open(path, "w", newline="") as handle:
        handle.write("# " + json.dumps(meta) + "\n")
        writer = csv.writer(handle)
        if solution.j is None:
            writer.writerow(["edge", "re_m", "im_m"])
            for i, val in enumerate(solution.m):
                writer.writerow(
                    [i, repr(float(val.real)), repr(float(val.imag))])
        else:
            writer.writerow(["edge", "re_m", "im_m", "re_j", "im_j"])
            for i, (mv, jv) in enumerate(zip(solution.m, solution.j)):
                writer.writerow(
                    [i, repr(float(mv.real)), repr(float(mv.imag)),
                     repr(float(jv.real)), repr(float(jv.imag))])


def load_solution(path) -> CurrentSolution:
    """Read back a saved solution, provenance included."""
    with open(path) as handle:
        header = handle.readline()
        if not header.startswith("# "):
            raise ValueError("missing provenance header")
        meta = json.loads(header[2:])
        rows = list(csv.reader(handle))
    wide = len(rows[0]) == 5
    data = np.array([[float(cell) for cell in row[1:]] for row in rows[1:]])
    m = data[:, 0] + 1j * data[:, 1]
    j = data[:, 2] + 1j * data[:, 3] if wide else None
    report = SolveReport(
        sigma_max=float(meta["sigma_max"]), sigma_cut=float(meta["sigma_cut"]),
        rank=int(meta["rank"]), condition=float(meta["condition"]),
        residual=float(meta["residual"]))
    return CurrentSolution(m=m, j=j, wavenumber=float(meta["wavenumber"]),
                           formulation=str(meta["formulation"]), report=report)
