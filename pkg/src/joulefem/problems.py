"""Problem definitions: materials, conductivity laws, benchmark presets.

A ProblemSpec bundles everything one experiment needs: the material data
(viscosity A, elasticity B, thermal-expansion stress matrix M, conductivity
law, physical coefficients), initial data, the boundary potential, forcing
terms and the final time.  With unit coefficients the model reduces to

    dtheta/dt = div(grad theta) + sigma(theta)|grad phi|^2 - M : eps(du/dt)
            0 = div(sigma(theta) grad phi)
    d2u/dt2   = div(A eps(du/dt) + B eps(u) - M theta) + f

on the unit square with theta = 0, u = 0 and phi = phi_b on the boundary;
the general coefficients (rho, c, k, Theta0) cover the dimensional variant
rho*c*dtheta/dt = div(k grad theta) + sigma|grad phi|^2 - Theta0*M:eps(du/dt)
and rho*d2u/dt2 = ... with one code path.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .assembly import lame_from_youngs, lame_voigt


class AssumptionError(ValueError):
    """A model requirement needed by the discretization is violated."""


# Viscosity/elasticity Voigt matrix of the two unit-square benchmarks.
# Note the 2x2 normal block is singular (eigenvector (1, -1, 0)): solvability
# of the displacement system then leans on the mass and viscosity terms.
BENCHMARK_VOIGT = np.array([
    [1.0, 1.0, 0.0],
    [1.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
])


@dataclass(frozen=True)
class Conductivity:
    """Closed-form conductivity law with declared bounds.

    func must accept numpy arrays.  The bounds are declared, not enforced at
    evaluation time; validate_assumptions samples against them.
    """

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    sigma_min: float
    sigma_max: float
    dsigma_max: float

    def __call__(self, theta):
        return self.func(theta)


def sigma_problem1() -> Conductivity:
    """Arctan law 2.5 - atan(5*theta - 10): steep near theta = 2, bounds 2.5 -+ pi/2."""
    return Conductivity(
        name="arctan(2.5,1,5,10)",
        func=lambda th: 2.5 - np.arctan(5.0 * np.asarray(th, dtype=float) - 10.0),
        sigma_min=2.5 - np.pi / 2.0,
        sigma_max=2.5 + np.pi / 2.0,
        dsigma_max=5.0,
    )


def sigma_arctan(offset: float, scale: float, slope: float, shift: float) -> Conductivity:
    """General decreasing arctan law offset - scale*atan(slope*theta - shift)."""
    if offset - scale * np.pi / 2.0 <= 0.0:
        raise AssumptionError(
            "arctan conductivity admits nonpositive values; "
            "lower bound offset - scale*pi/2 must be positive"
        )
    return Conductivity(
        name=f"arctan({offset:g},{scale:g},{slope:g},{shift:g})",
        func=lambda th: offset - scale * np.arctan(slope * np.asarray(th, dtype=float) - shift),
        sigma_min=offset - scale * np.pi / 2.0,
        sigma_max=offset + scale * np.pi / 2.0,
        dsigma_max=abs(scale * slope),
    )


def sigma_constant(value: float = 1.0) -> Conductivity:
    if value <= 0.0:
        raise AssumptionError(f"conductivity must be positive, got {value:g}")
    return Conductivity(
        name=f"constant({value:g})",
        func=lambda th: np.full_like(np.asarray(th, dtype=float), value),
        sigma_min=value,
        sigma_max=value,
        dsigma_max=0.0,
    )


def sigma_silicon(ambient: float = 293.15) -> Conductivity:
    """Silicon-like law in S/m with theta measured relative to the ambient level."""
    pref = 38e6 / 27.0

    def func(th):
        t1 = ambient + np.asarray(th, dtype=float)
        return pref / (3000.0 + 550.0 * (np.pi / 2.0 + np.arctan((t1 - 250.0) / 250.0)))

    lo = pref / (3000.0 + 550.0 * np.pi)
    hi = pref / 3000.0
    # slope bound from a dense sample; used only in validation reports
    grid = np.linspace(-ambient - 1e4, 1e4, 20001)
    dmax = float(np.max(np.abs(np.gradient(func(grid), grid))))
    return Conductivity("silicon", func, lo, hi, dmax)


@dataclass(frozen=True)
class MaterialModel:
    """Constant material data; defaults give the unit-coefficient model."""

    A: np.ndarray                      # viscosity, Voigt 3x3
    B: np.ndarray                      # elasticity, Voigt 3x3
    M: np.ndarray                      # thermal-expansion stress, 2x2
    sigma: Conductivity
    rho: float = 1.0                   # density
    c: float = 1.0                     # specific heat
    k: float = 1.0                     # thermal conductivity (isotropic)
    theta_ref: float = 1.0             # scaling of the M:eps(du/dt) heat sink


@dataclass(frozen=True)
class ProblemSpec:
    """One experiment: material, initial/boundary data, forcing, final time.

    All Dirichlet: theta = 0 and u = 0 on the whole boundary, phi = phi_b.
    phi_b(t, x, y) must be defined on the closed square (it is sampled only
    on the boundary).  f and heat_source may be None for zero forcing.
    """

    name: str
    material: MaterialModel
    theta0: Callable                   # (x, y) -> scalar
    u0: Callable                       # (x, y) -> (u_x, u_y)
    v0: Callable                       # (x, y) -> (v_x, v_y)
    phi_b: Callable                    # (t, x, y) -> scalar
    f: Callable | None = None          # (t, x, y) -> (f_x, f_y)
    heat_source: Callable | None = None  # (t, x, y) -> scalar
    t_final: float = 1.0


def _zero_scalar(x, y):
    return np.zeros_like(np.asarray(x, dtype=float))


def _zero_vector(x, y):
    z = np.zeros_like(np.asarray(x, dtype=float))
    return (z, z)


def make_problem1() -> ProblemSpec:
    """Unit-square Joule heating benchmark.

    M = I, f = 0, A = B = BENCHMARK_VOIGT, sigma = 2.5 - atan(5*theta - 10),
    zero initial data, phi_b = 5*(1 - x), T = 1.
    """
    material = MaterialModel(
        A=BENCHMARK_VOIGT.copy(),
        B=BENCHMARK_VOIGT.copy(),
        M=np.eye(2),
        sigma=sigma_problem1(),
    )
    return ProblemSpec(
        name="problem1",
        material=material,
        theta0=_zero_scalar,
        u0=_zero_vector,
        v0=_zero_vector,
        phi_b=lambda t, x, y: 5.0 * (1.0 - np.asarray(x, dtype=float)),
        t_final=1.0,
    )


def make_problem2(gamma: float) -> ProblemSpec:
    """Problem 1 with the viscosity scaled by gamma >= 0 (gamma = 0 allowed)."""
    if gamma < 0.0:
        raise ValueError(f"viscosity scale must be nonnegative, got {gamma:g}")
    base = make_problem1()
    material = dataclasses.replace(base.material, A=gamma * BENCHMARK_VOIGT)
    return dataclasses.replace(base, name=f"problem2(gamma={gamma:g})", material=material)


@dataclass(frozen=True)
class ManufacturedSolution:
    """Closed-form fields for convergence tests against a known solution."""

    theta: Callable | None = None      # (t, x, y)
    u: Callable | None = None          # (x, y) -> (u_x, u_y), static


def make_manufactured(kind: str) -> tuple[ProblemSpec, ManufacturedSolution]:
    """Decoupled test problems with known exact solutions.

    "heat": theta = exp(-t) sin(pi x) sin(pi y) with matching source;
    conduction only (constant sigma, zero potential, M = 0).
    "elasticity": static u = (sin(pi x) sin(pi y), 0) with matching body
    force under B = lame_voigt(1, 1); the time-dependent problem is not
    driven; the returned problem is consumed by a single static solve.
    """
    if kind == "heat":
        def theta_exact(t, x, y):
            return np.exp(-t) * np.sin(np.pi * x) * np.sin(np.pi * y)

        def source(t, x, y):
            # substitute theta_exact into dtheta/dt - lap(theta)
            return (2.0 * np.pi**2 - 1.0) * theta_exact(t, x, y)

        material = MaterialModel(
            A=BENCHMARK_VOIGT.copy(),
            B=BENCHMARK_VOIGT.copy(),
            M=np.zeros((2, 2)),
            sigma=sigma_constant(1.0),
        )
        spec = ProblemSpec(
            name="manufactured-heat",
            material=material,
            theta0=lambda x, y: theta_exact(0.0, x, y),
            u0=_zero_vector,
            v0=_zero_vector,
            phi_b=lambda t, x, y: _zero_scalar(x, y),
            heat_source=source,
            t_final=1.0,
        )
        return spec, ManufacturedSolution(theta=theta_exact)

    if kind == "elasticity":
        def u_exact(x, y):
            return (np.sin(np.pi * x) * np.sin(np.pi * y), np.zeros_like(np.asarray(x, dtype=float)))

        def force(t, x, y):
            # f = -div(B eps(u_exact)) for B = lame_voigt(1, 1)
            s, c = np.sin(np.pi * x), np.cos(np.pi * x)
            sy, cy = np.sin(np.pi * y), np.cos(np.pi * y)
            return (4.0 * np.pi**2 * s * sy, -2.0 * np.pi**2 * c * cy)

        material = MaterialModel(
            A=np.zeros((3, 3)),
            B=lame_voigt(1.0, 1.0),
            M=np.zeros((2, 2)),
            sigma=sigma_constant(1.0),
        )
        spec = ProblemSpec(
            name="manufactured-elasticity",
            material=material,
            theta0=_zero_scalar,
            u0=u_exact,
            v0=_zero_vector,
            phi_b=lambda t, x, y: _zero_scalar(x, y),
            f=force,
            t_final=1.0,
        )
        return spec, ManufacturedSolution(u=u_exact)

    raise ValueError(f"unknown manufactured problem kind: {kind!r}")


PRESETS = {
    "p1": lambda gamma=None: make_problem1(),
    "p2": lambda gamma=1.0: make_problem2(1.0 if gamma is None else gamma),
    "heat": lambda gamma=None: make_manufactured("heat")[0],
    "elastic": lambda gamma=None: make_manufactured("elasticity")[0],
}


def make_preset(name: str, gamma: float | None = None) -> ProblemSpec:
    if name not in PRESETS:
        raise ValueError(f"unknown problem preset {name!r}; choose from {sorted(PRESETS)}")
    return PRESETS[name](gamma)


@dataclass
class ValidationReport:
    """Outcome of the model checks: eigenvalue info plus warnings."""

    problem: str
    a_min_eig: float
    b_min_eig: float
    sigma_range: tuple[float, float]
    warnings: list[str]
    checks: list[str]

    def __str__(self):
        lines = [f"validation report for {self.problem}"]
        lines += [f"  ok: {c}" for c in self.checks]
        lines += [f"  warning: {w}" for w in self.warnings]
        return "\n".join(lines)


def validate_assumptions(
    spec: ProblemSpec,
    theta_samples: np.ndarray | None = None,
) -> ValidationReport:
    """Check symmetry, coercivity and conductivity bounds of a problem spec.

    Asymmetric tensors and conductivity values outside the declared bounds
    (or a nonpositive lower bound) raise AssumptionError.  Semidefinite
    viscosity/elasticity matrices only produce a warning, since the
    benchmark tensors themselves have a zero eigenvalue.
    """
    mat = spec.material
    checks, warnings = [], []

    for label, T in (("viscosity", mat.A), ("elasticity", mat.B)):
        T = np.asarray(T, dtype=float)
        if not np.allclose(T, T.T, rtol=0.0, atol=1e-12):
            raise AssumptionError(f"{label} Voigt matrix is not symmetric")
        checks.append(f"{label} matrix symmetric")
    M = np.asarray(mat.M, dtype=float)
    if not np.allclose(M, M.T, rtol=0.0, atol=1e-12):
        raise AssumptionError("thermal-expansion matrix is not symmetric")
    checks.append("thermal-expansion matrix symmetric")

    a_min = float(np.linalg.eigvalsh(np.asarray(mat.A, dtype=float)).min())
    b_min = float(np.linalg.eigvalsh(np.asarray(mat.B, dtype=float)).min())
    for label, eig in (("viscosity", a_min), ("elasticity", b_min)):
        if eig < -1e-12:
            raise AssumptionError(f"{label} Voigt matrix is indefinite (min eigenvalue {eig:g})")
        if eig <= 1e-12:
            warnings.append(
                f"{label} Voigt matrix is only positive semidefinite "
                f"(min eigenvalue {eig:g}); solvability relies on the mass term"
            )
        else:
            checks.append(f"{label} matrix positive definite (min eigenvalue {eig:g})")

    if mat.sigma.sigma_min <= 0.0:
        raise AssumptionError(
            f"conductivity lower bound must be positive, got {mat.sigma.sigma_min:g}"
        )
    if theta_samples is None:
        theta_samples = np.concatenate([
            np.linspace(-1e6, 1e6, 4001),
            np.linspace(-10.0, 10.0, 2001),
        ])
    vals = np.asarray(mat.sigma(theta_samples), dtype=float)
    lo, hi = float(vals.min()), float(vals.max())
    tol = 1e-12 * max(1.0, abs(mat.sigma.sigma_max))
    if lo < mat.sigma.sigma_min - tol or hi > mat.sigma.sigma_max + tol:
        raise AssumptionError(
            f"sampled conductivity range [{lo:g}, {hi:g}] violates declared "
            f"bounds [{mat.sigma.sigma_min:g}, {mat.sigma.sigma_max:g}]"
        )
    checks.append(
        f"conductivity within [{mat.sigma.sigma_min:g}, {mat.sigma.sigma_max:g}] "
        f"on {theta_samples.size} samples"
    )

    for coeff, label in ((mat.rho, "density"), (mat.c, "specific heat"), (mat.k, "thermal conductivity")):
        if coeff <= 0.0:
            raise AssumptionError(f"{label} must be positive, got {coeff:g}")
    checks.append("physical coefficients positive")

    # initial temperature must satisfy its homogeneous boundary condition
    edge = np.linspace(0.0, 1.0, 101)
    zeros, ones = np.zeros_like(edge), np.ones_like(edge)
    for bx, by in ((edge, zeros), (edge, ones), (zeros, edge), (ones, edge)):
        if np.max(np.abs(spec.theta0(bx, by))) > 1e-12:
            raise AssumptionError("initial temperature does not vanish on the boundary")
    checks.append("initial temperature vanishes on the boundary")

    return ValidationReport(
        problem=spec.name,
        a_min_eig=a_min,
        b_min_eig=b_min,
        sigma_range=(lo, hi),
        warnings=warnings,
        checks=checks,
    )


def _parse_voigt(text: str) -> np.ndarray:
    vals = [float(tok) for tok in text.replace(",", " ").split()]
    if len(vals) != 6:
        raise ValueError("Voigt entry list must contain 6 numbers: t11 t12 t13 t22 t23 t33")
    t11, t12, t13, t22, t23, t33 = vals
    return np.array([[t11, t12, t13], [t12, t22, t23], [t13, t23, t33]])


def load_problem_config(path: str, gamma: float | None = None) -> ProblemSpec:
    """Build a ProblemSpec from an INI-style config file.

    If [problem] preset is set the preset wins and the remaining file values
    are ignored.  Custom problems reuse the benchmark data (zero initial
    data, phi_b = 5(1-x), f = 0) and customize the material, the
    conductivity law, gamma and the final time.  See README for the schema.
    """
    cp = configparser.ConfigParser()
    with open(path) as fh:
        cp.read_file(fh)

    problem = cp["problem"] if cp.has_section("problem") else {}
    preset = problem.get("preset")
    if gamma is None and "gamma" in problem:
        gamma = float(problem["gamma"])
    if preset:
        return make_preset(preset, gamma)

    cond = cp["conductivity"] if cp.has_section("conductivity") else {}
    law = cond.get("law", "arctan")
    if law == "arctan":
        sigma = sigma_arctan(
            float(cond.get("offset", 2.5)),
            float(cond.get("scale", 1.0)),
            float(cond.get("slope", 5.0)),
            float(cond.get("shift", 10.0)),
        )
    elif law == "constant":
        sigma = sigma_constant(float(cond.get("value", 1.0)))
    elif law == "silicon":
        sigma = sigma_silicon(float(cond.get("ambient", 293.15)))
    else:
        raise ValueError(f"unknown conductivity law {law!r}")

    matsec = cp["material"] if cp.has_section("material") else {}
    if "a_voigt" in matsec:
        A = _parse_voigt(matsec["a_voigt"])
    elif "eta1" in matsec or "eta2" in matsec:
        A = lame_voigt(float(matsec.get("eta1", 1.0)), float(matsec.get("eta2", 0.0)))
    else:
        A = BENCHMARK_VOIGT.copy()
    if "b_voigt" in matsec:
        B = _parse_voigt(matsec["b_voigt"])
    elif "e" in matsec and "nu" in matsec:
        mu, lam = lame_from_youngs(float(matsec["e"]), float(matsec["nu"]))
        B = lame_voigt(mu, lam)
    elif "mu" in matsec or "lambda" in matsec:
        B = lame_voigt(float(matsec.get("mu", 1.0)), float(matsec.get("lambda", 0.0)))
    else:
        B = BENCHMARK_VOIGT.copy()
    if gamma is not None:
        A = gamma * A

    m_entry = matsec.get("m", "1.0")
    m_vals = [float(tok) for tok in m_entry.replace(",", " ").split()]
    if len(m_vals) == 1:
        M = m_vals[0] * np.eye(2)
    elif len(m_vals) == 3:
        M = np.array([[m_vals[0], m_vals[2]], [m_vals[2], m_vals[1]]])
    else:
        raise ValueError("material m must be a scalar or three numbers m11 m22 m12")

    material = MaterialModel(
        A=A, B=B, M=M, sigma=sigma,
        rho=float(matsec.get("rho", 1.0)),
        c=float(matsec.get("c", 1.0)),
        k=float(matsec.get("k", 1.0)),
        theta_ref=float(matsec.get("theta0", 1.0)),
    )
    base = make_problem1()
    return dataclasses.replace(
        base,
        name=f"custom({path})",
        material=material,
        t_final=float(problem.get("t_final", 1.0)),
    )
