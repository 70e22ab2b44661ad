"""Error norms, convergence-rate studies and table/CSV reporting."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import mesh as meshmod
from .lifting import LiftedField, lift, energy_of_lift
from .localops import get_mesh_ops
from .mesh import PolytopalMesh
from .polybasis import WgFunction
from .solver import assemble, solve

__all__ = [
    "ExactSolution", "SOLUTIONS", "StudyConfig", "ConvergenceReport",
    "LevelResult", "InteriorField", "error_l2", "error_h1_broken",
    "error_l2_interior", "error_triple_bar", "triple_bar_norm", "run_study",
    "ERROR_NAMES",
]

ERROR_NAMES = ("l2_u_uh", "l2_Qhu_uh", "l2_u_lift",
               "h1_u_uh", "tb_Qhu_uh", "h1_u_lift")

MESH_FAMILIES = {
    "quad": meshmod.generate_quad_mesh,
    "mixed": meshmod.generate_mixed_polygon_mesh,
    "wedge": meshmod.generate_wedge_mesh,
}
FAMILY_DIM = {"quad": 2, "mixed": 2, "wedge": 3}


@dataclass(frozen=True)
class ExactSolution:
    name: str
    dim: int
    u: callable
    grad: callable
    f: callable


def _sine2d_u(x):
    return np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])


def _sine2d_grad(x):
    sx, cx = np.sin(np.pi * x[:, 0]), np.cos(np.pi * x[:, 0])
    sy, cy = np.sin(np.pi * x[:, 1]), np.cos(np.pi * x[:, 1])
    return np.pi * np.stack([cx * sy, sx * cy], axis=1)


def _sine3d_u(x):
    return (np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])
            * np.sin(np.pi * x[:, 2]))


def _sine3d_grad(x):
    s = np.sin(np.pi * x)
    c = np.cos(np.pi * x)
    return np.pi * np.stack([c[:, 0] * s[:, 1] * s[:, 2],
                             s[:, 0] * c[:, 1] * s[:, 2],
                             s[:, 0] * s[:, 1] * c[:, 2]], axis=1)


SOLUTIONS = {
    "sine2d": ExactSolution("sine2d", 2, _sine2d_u, _sine2d_grad,
                            lambda x: 2.0 * np.pi ** 2 * _sine2d_u(x)),
    "sine3d": ExactSolution("sine3d", 3, _sine3d_u, _sine3d_grad,
                            lambda x: 3.0 * np.pi ** 2 * _sine3d_u(x)),
}


@dataclass
class InteriorField:
    """The interior (P_k per cell) part of a WG function as a piecewise field."""

    mesh: PolytopalMesh
    uh: WgFunction

    def eval_cell(self, cell_id: int, points: np.ndarray) -> np.ndarray:
        ops = get_mesh_ops(self.mesh, self.uh.k).cell_ops(cell_id)
        E = ops.space_k.eval(points - self.mesh.cells[cell_id].centroid)
        return E @ self.uh.cell_coeffs[cell_id]

    def grad_cell(self, cell_id: int, points: np.ndarray) -> np.ndarray:
        ops = get_mesh_ops(self.mesh, self.uh.k).cell_ops(cell_id)
        Eg = ops.space_k.eval_grad(points - self.mesh.cells[cell_id].centroid)
        return np.einsum("pid,i->pd", Eg, self.uh.cell_coeffs[cell_id])


def _field_data(field, mesh, cid):
    """(basis values, grad values, coefficients) on the cell quadrature."""
    k = field.uh.k if isinstance(field, InteriorField) else field.k
    ops = get_mesh_ops(mesh, k).cell_ops(cid)
    if isinstance(field, InteriorField):
        return ops.Ek, ops.Ekg, field.uh.cell_coeffs[cid]
    return ops.E2, ops.E2g, field.cell_coeffs[cid]


def _field_k(field):
    return field.uh.k if isinstance(field, InteriorField) else field.k


def error_l2(u_exact, field, mesh: PolytopalMesh) -> float:
    """L2 norm of (u_exact - field) by cellwise quadrature."""
    mops = get_mesh_ops(mesh, _field_k(field))
    total = 0.0
    for cid in range(mesh.n_cells):
        E, _, c = _field_data(field, mesh, cid)
        w = mops.cell_ops(cid).vol_rule.weights
        diff = u_exact(mops.cell_points(cid)) - E @ c
        total += w @ diff ** 2
    return float(np.sqrt(total))


def error_h1_broken(grad_exact, field, mesh: PolytopalMesh) -> float:
    """Broken H1 seminorm of (u_exact - field)."""
    mops = get_mesh_ops(mesh, _field_k(field))
    total = 0.0
    for cid in range(mesh.n_cells):
        _, Eg, c = _field_data(field, mesh, cid)
        w = mops.cell_ops(cid).vol_rule.weights
        diff = grad_exact(mops.cell_points(cid)) - np.einsum("pid,i->pd", Eg, c)
        total += w @ (diff ** 2).sum(axis=1)
    return float(np.sqrt(total))


def error_l2_interior(a: WgFunction, b: WgFunction, mesh: PolytopalMesh) -> float:
    """L2 norm of the difference of interior parts, via the cell Grams."""
    mops = get_mesh_ops(mesh, a.k)
    total = 0.0
    for cid in range(mesh.n_cells):
        d = a.cell_coeffs[cid] - b.cell_coeffs[cid]
        total += d @ mops.cell_ops(cid).space_k.gram @ d
    return float(np.sqrt(total))


def triple_bar_norm(mesh: PolytopalMesh, v: WgFunction) -> float:
    """Energy norm (grad_w v, grad_w v)^(1/2)."""
    mops = get_mesh_ops(mesh, v.k)
    total = 0.0
    for cid in range(mesh.n_cells):
        u_loc = mops.gather_local(v, cid)
        total += u_loc @ mops.cell_ops(cid).stiffness @ u_loc
    return float(np.sqrt(max(total, 0.0)))


def error_triple_bar(a: WgFunction, b: WgFunction, mesh: PolytopalMesh) -> float:
    return triple_bar_norm(mesh, a - b)


@dataclass(frozen=True)
class StudyConfig:
    family: str = "quad"
    k: int = 1
    levels: tuple = (3, 4, 5)
    solution: str = ""
    csv_out: str = ""
    dump_mesh: str = ""
    dump_lambda_dims: bool = False
    dump_certificates: bool = False
    solver_tol: float = 1e-11

    def resolved_solution(self) -> str:
        if self.solution:
            return self.solution
        return "sine2d" if FAMILY_DIM[self.family] == 2 else "sine3d"

    def validate(self) -> None:
        if self.family not in MESH_FAMILIES:
            raise ValueError(f"unknown mesh family {self.family!r}")
        if self.k < 1:
            raise ValueError("polynomial degree k must be >= 1")
        if not self.levels:
            raise ValueError("empty level range")
        if any(l < 1 for l in self.levels):
            raise ValueError("levels must be >= 1")
        sol = self.resolved_solution()
        if sol not in SOLUTIONS:
            raise ValueError(f"unknown solution {sol!r}")
        if SOLUTIONS[sol].dim != FAMILY_DIM[self.family]:
            raise ValueError(f"solution {sol!r} has dimension "
                             f"{SOLUTIONS[sol].dim} but family "
                             f"{self.family!r} is {FAMILY_DIM[self.family]}D")


@dataclass
class LevelResult:
    level: int
    h: float
    n_dofs: int
    errors: dict


@dataclass
class ConvergenceReport:
    config: StudyConfig
    levels: list = field(default_factory=list)
    lambda_dims: list = field(default_factory=list)
    certificates: list = field(default_factory=list)

    def rates(self) -> list:
        """Per consecutive level pair: dict of log2(e_l / e_{l+1})."""
        out = []
        for prev, cur in zip(self.levels, self.levels[1:]):
            out.append({n: np.log2(prev.errors[n] / cur.errors[n])
                        for n in ERROR_NAMES})
        return out

    def table_str(self) -> str:
        heads = ["level", "h", "dofs"]
        for n in ERROR_NAMES:
            heads += [n, "rate"]
        rows = [heads]
        rates = self.rates()
        for i, lv in enumerate(self.levels):
            row = [str(lv.level), f"{lv.h:.4e}", str(lv.n_dofs)]
            for n in ERROR_NAMES:
                row.append(_sci(lv.errors[n]))
                row.append("  -- " if i == 0 else f"{rates[i - 1][n]:5.2f}")
            rows.append(row)
        widths = [max(len(r[c]) for r in rows) for c in range(len(heads))]
        return "\n".join(" ".join(f"{v:>{w}}" for v, w in zip(row, widths))
                         for row in rows)

    def csv_str(self) -> str:
        lines = ["level,h," + ",".join(f"{n},rate_{n}" for n in ERROR_NAMES)]
        rates = self.rates()
        for i, lv in enumerate(self.levels):
            cells = [str(lv.level), f"{lv.h:.16e}"]
            for n in ERROR_NAMES:
                cells.append(f"{lv.errors[n]:.16e}")
                cells.append("" if i == 0 else f"{rates[i - 1][n]:.6f}")
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def _sci(x: float) -> str:
    """Paper-style scientific notation, e.g. 0.4595E-04."""
    if x == 0.0:
        return "0.0000E+00"
    exp = int(np.floor(np.log10(abs(x)))) + 1
    mant = x / 10.0 ** exp
    return f"{mant:.4f}E{exp:+03d}".replace("0.", "0.", 1)


def run_level(config: StudyConfig, level: int) -> tuple:
    """Solve one refinement level; returns (LevelResult, mesh, extras)."""
    sol = SOLUTIONS[config.resolved_solution()]
    mesh = MESH_FAMILIES[config.family](level)
    mops = get_mesh_ops(mesh, config.k)
    system = assemble(mesh, config.k, sol.f)
    uh = solve(system, tol=config.solver_tol)
    qhu = mops.project_qh(sol.u)
    lifted = lift(mesh, uh)
    errors = {
        "l2_u_uh": error_l2(sol.u, InteriorField(mesh, uh), mesh),
        "l2_Qhu_uh": error_l2_interior(qhu, uh, mesh),
        "l2_u_lift": error_l2(sol.u, lifted, mesh),
        "h1_u_uh": error_h1_broken(sol.grad, InteriorField(mesh, uh), mesh),
        "tb_Qhu_uh": error_triple_bar(qhu, uh, mesh),
        "h1_u_lift": error_h1_broken(sol.grad, lifted, mesh),
    }
    h = 1.0 / 2 ** level
    return LevelResult(level, h, mops.n_dofs, errors), mesh, mops


def run_study(config: StudyConfig) -> ConvergenceReport:
    """Generate, solve and post-process every level of the configured study."""
    config.validate()
    report = ConvergenceReport(config)
    for level in config.levels:
        result, mesh, mops = run_level(config, level)
        report.levels.append(result)
        if config.dump_lambda_dims:
            report.lambda_dims.append(
                [mops.cell_ops(c).n_basis for c in range(mesh.n_cells)])
        if config.dump_certificates:
            report.certificates.append(
                [mops.cell_ops(c).sigma_min / mops.cell_ops(c).sigma_max
                 for c in range(mesh.n_cells)])
        if config.dump_mesh:
            meshmod.export_mesh(mesh, f"{config.dump_mesh}.L{level}.txt")
    return report
