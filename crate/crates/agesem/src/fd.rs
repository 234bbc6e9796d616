//! Independent finite-difference solver of the age-structured diffusion
//! problem, used as the cross-validation oracle.
//!
//! Transport is exact along characteristics (`delta_t = delta_a`); diffusion
//! advances by Crank-Nicolson on the moved row with Neumann ghost nodes
//! carrying the flux data. The outward-normal convention fixes the ghost
//! values: at `x = 0` the flux datum is `-u_x`, so `u_{-1} = u_1 + 2 dx h0`;
//! at `x = 1` it is `u_x`, so `u_{n+1} = u_{n-1} + 2 dx h1`.

use crate::error::{Error, Result};
use crate::mild::{DataField, ScenarioData, SolutionGrid};
use crate::quad;

/// Spatial/temporal mesh of the finite-difference solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdGrid {
    pub n_x: usize,
    pub delta_x: f64,
    pub delta_t: f64,
}

impl FdGrid {
    pub fn new(n_x: usize, delta_t: f64) -> Result<Self> {
        if n_x < 4 || delta_t <= 0.0 {
            return Err(Error::argument("fd grid needs n_x >= 4 and delta_t > 0"));
        }
        Ok(FdGrid { n_x, delta_x: 1.0 / n_x as f64, delta_t })
    }

    /// Grid sharing the scenario's characteristic step.
    pub fn for_scenario(s: &ScenarioData) -> Result<Self> {
        FdGrid::new(s.n_x, s.delta())
    }
}

/// Nodal solution values `[time][age][x]`.
#[derive(Debug, Clone)]
pub struct FdSolution {
    pub times: Vec<f64>,
    pub ages: Vec<f64>,
    pub x_nodes: Vec<f64>,
    pub values: Vec<Vec<Vec<f64>>>,
}

impl FdSolution {
    /// Pointwise max error against a closed-form solution.
    pub fn max_error_vs(&self, exact: &DataField) -> Result<f64> {
        let mut worst = 0.0f64;
        for (i, &t) in self.times.iter().enumerate() {
            for (j, &a) in self.ages.iter().enumerate() {
                for (l, &x) in self.x_nodes.iter().enumerate() {
                    worst = worst.max((self.values[i][j][l] - exact.eval(t, a, x)?).abs());
                }
            }
        }
        Ok(worst)
    }

    /// Trapezoid integral over `x` of one row.
    pub fn row_mass(&self, i: usize, j: usize) -> f64 {
        let w = quad::trapezoid_weights(self.x_nodes.len() - 1, self.x_nodes[1] - self.x_nodes[0]);
        self.values[i][j].iter().zip(w.iter()).map(|(v, wi)| v * wi).sum()
    }
}

/// Prefactored Thomas solver for a fixed tridiagonal matrix.
struct Tridiag {
    sub: Vec<f64>,
    sup_prime: Vec<f64>,
    denom: Vec<f64>,
}

impl Tridiag {
    fn new(sub: Vec<f64>, diag: Vec<f64>, sup: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        let mut sup_prime = vec![0.0; n];
        let mut denom = vec![0.0; n];
        let mut d = diag[0];
        if d == 0.0 {
            return Err(Error::Numerical("singular tridiagonal system".into()));
        }
        denom[0] = d;
        sup_prime[0] = sup[0] / d;
        for i in 1..n {
            d = diag[i] - sub[i] * sup_prime[i - 1];
            if d == 0.0 {
                return Err(Error::Numerical("singular tridiagonal system".into()));
            }
            denom[i] = d;
            if i < n - 1 {
                sup_prime[i] = sup[i] / d;
            }
        }
        Ok(Tridiag { sub, sup_prime, denom })
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let mut g = vec![0.0; n];
        g[0] = rhs[0] / self.denom[0];
        for i in 1..n {
            g[i] = (rhs[i] - self.sub[i] * g[i - 1]) / self.denom[i];
        }
        for i in (0..n - 1).rev() {
            g[i] -= self.sup_prime[i] * g[i + 1];
        }
        g
    }
}

/// Homogeneous part of the reflected Neumann Laplacian stencil applied to a
/// row; the flux loads are added separately.
fn laplacian_row(u: &[f64], dx: f64) -> Vec<f64> {
    let n = u.len() - 1;
    let c = 1.0 / (dx * dx);
    let mut out = vec![0.0; n + 1];
    out[0] = c * (2.0 * u[1] - 2.0 * u[0]);
    for i in 1..n {
        out[i] = c * (u[i - 1] - 2.0 * u[i] + u[i + 1]);
    }
    out[n] = c * (2.0 * u[n - 1] - 2.0 * u[n]);
    out
}

/// Crank-Nicolson system matrices `I -+ (dt/2) L` for the reflected stencil.
fn cn_matrices(n_x: usize, dx: f64, dt: f64) -> Result<Tridiag> {
    let n = n_x + 1;
    let r = dt / (2.0 * dx * dx);
    let mut sub = vec![-r; n];
    let mut sup = vec![-r; n];
    let diag = vec![1.0 + 2.0 * r; n];
    sub[0] = 0.0;
    sup[0] = -2.0 * r;
    sub[n - 1] = -2.0 * r;
    sup[n - 1] = 0.0;
    Tridiag::new(sub, diag, sup)
}

/// One Crank-Nicolson step of the Neumann heat flow with flux and forcing
/// loads evaluated at the half step.
fn cn_step(
    solver: &Tridiag,
    u_old: &[f64],
    dx: f64,
    dt: f64,
    h0_mid: f64,
    h1_mid: f64,
    f_mid: &[f64],
) -> Vec<f64> {
    let n = u_old.len() - 1;
    let lap = laplacian_row(u_old, dx);
    let mut rhs: Vec<f64> = u_old
        .iter()
        .zip(lap.iter())
        .zip(f_mid.iter())
        .map(|((u, l), f)| u + 0.5 * dt * l + dt * f)
        .collect();
    rhs[0] += dt * 2.0 * h0_mid / dx;
    rhs[n] += dt * 2.0 * h1_mid / dx;
    solver.solve(&rhs)
}

/// Direct finite-difference solve of the full problem on `grid`.
pub fn fd_solve(s: &ScenarioData, grid: &FdGrid) -> Result<FdSolution> {
    s.validate()?;
    let dt = grid.delta_t;
    let steps = s.t_horizon / dt;
    let rows = s.a_max / dt;
    for (label, v) in [("T", steps), ("a_max", rows)] {
        if (v - v.round()).abs() > 1e-9 * v.max(1.0) {
            return Err(Error::scenario(format!(
                "fd grid requires {label} to be a multiple of delta_t = {dt}"
            )));
        }
    }
    let n_t = steps.round() as usize;
    let n_a = rows.round() as usize;
    let dx = grid.delta_x;
    let x_nodes: Vec<f64> = (0..=grid.n_x).map(|i| i as f64 * dx).collect();
    let times: Vec<f64> = (0..=n_t).map(|i| i as f64 * dt).collect();
    let ages: Vec<f64> = (0..=n_a).map(|j| j as f64 * dt).collect();

    let solver = cn_matrices(grid.n_x, dx, dt)?;
    let mut values = vec![vec![vec![0.0; grid.n_x + 1]; n_a + 1]; n_t + 1];
    for (j, &a) in ages.iter().enumerate() {
        for (l, &x) in x_nodes.iter().enumerate() {
            values[0][j][l] = s.u0.eval(0.0, a, x)?;
        }
    }
    for (i, &t) in times.iter().enumerate().skip(1) {
        for (l, &x) in x_nodes.iter().enumerate() {
            values[i][0][l] = s.g.eval(t, 0.0, x)?;
        }
    }
    for n in 0..n_t {
        let t_mid = times[n] + 0.5 * dt;
        for j in 1..=n_a {
            let a_mid = ages[j] - 0.5 * dt;
            let h0 = s.h0.eval(t_mid, a_mid, 0.0)?;
            let h1 = s.h1.eval(t_mid, a_mid, 1.0)?;
            let mut f_mid = vec![0.0; grid.n_x + 1];
            if !s.f.is_zero() {
                for (l, &x) in x_nodes.iter().enumerate() {
                    f_mid[l] = s.f.eval(t_mid, a_mid, x)?;
                }
            }
            values[n + 1][j] = cn_step(&solver, &values[n][j - 1], dx, dt, h0, h1, &f_mid);
        }
    }
    Ok(FdSolution { times, ages, x_nodes, values })
}

/// Errors at successive mesh halvings plus the fitted convergence order.
#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub rows: Vec<(f64, f64)>,
    pub order: f64,
    /// False when the error sequence failed to decrease monotonically
    /// (diagnostic, not a failure).
    pub monotone: bool,
}

pub fn convergence_study(
    s: &ScenarioData,
    exact: &DataField,
    levels: usize,
) -> Result<ConvergenceStudy> {
    if levels < 3 {
        return Err(Error::argument("convergence study needs at least 3 levels"));
    }
    let mut rows = Vec::with_capacity(levels);
    for level in 0..levels {
        let refine = 1usize << level;
        let mut sl = s.clone();
        sl.n_a = s.n_a * refine;
        sl.n_x = s.n_x * refine;
        let grid = FdGrid::for_scenario(&sl)?;
        let sol = fd_solve(&sl, &grid)?;
        rows.push((sl.delta(), sol.max_error_vs(exact)?));
    }
    let xs: Vec<f64> = rows.iter().map(|(h, _)| h.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|(_, e)| e.max(1e-300).ln()).collect();
    let (order, _) = quad::least_squares_line(&xs, &ys);
    let monotone = rows.windows(2).all(|w| w[1].1 <= w[0].1);
    Ok(ConvergenceStudy { rows, order, monotone })
}

/// Discrepancy between the spectral grid solution and the nodal oracle,
/// evaluated at shared `(t, a)` nodes and the oracle's x-nodes.
#[derive(Debug, Clone, Copy)]
pub struct CompareReport {
    pub max_abs: f64,
    pub l2: f64,
    pub nodes: usize,
}

pub fn compare_solutions(mild: &SolutionGrid, fd: &FdSolution) -> Result<CompareReport> {
    if mild.times.len() != fd.times.len() || mild.ages.len() != fd.ages.len() {
        return Err(Error::argument(
            "solutions must share the characteristic grid for comparison",
        ));
    }
    let mut max_abs = 0.0f64;
    let mut sq = 0.0f64;
    let mut count = 0usize;
    for i in 0..mild.times.len() {
        for j in 0..mild.ages.len() {
            let field = &mild.fields[i][j];
            for (l, &x) in fd.x_nodes.iter().enumerate() {
                let d = (field.eval_at(x) - fd.values[i][j][l]).abs();
                max_abs = max_abs.max(d);
                sq += d * d;
                count += 1;
            }
        }
    }
    Ok(CompareReport { max_abs, l2: (sq / count as f64).sqrt(), nodes: count })
}

/// Second-order solve of the two-point boundary problem
/// `lambda w - w'' = psi` with flux data `(y0, y1)`; the independent oracle
/// for the spectral resolvent.
pub fn two_point_bvp(
    lambda: f64,
    y0: f64,
    y1: f64,
    psi: impl Fn(f64) -> f64,
    n_x: usize,
) -> Result<Vec<f64>> {
    if lambda <= 0.0 || n_x < 4 {
        return Err(Error::argument("bvp oracle needs lambda > 0 and n_x >= 4"));
    }
    let dx = 1.0 / n_x as f64;
    let c = 1.0 / (dx * dx);
    let n = n_x + 1;
    let mut sub = vec![-c; n];
    let mut sup = vec![-c; n];
    let diag = vec![lambda + 2.0 * c; n];
    sub[0] = 0.0;
    sup[0] = -2.0 * c;
    sub[n - 1] = -2.0 * c;
    sup[n - 1] = 0.0;
    let solver = Tridiag::new(sub, diag, sup)?;
    let mut rhs: Vec<f64> = (0..=n_x).map(|i| psi(i as f64 * dx)).collect();
    rhs[0] += 2.0 * y0 / dx;
    rhs[n_x] += 2.0 * y1 / dx;
    Ok(solver.solve(&rhs))
}

/// Crank-Nicolson heat solve on the interval with time-dependent flux data;
/// the independent oracle for the singular convolution.
pub fn heat_neumann(
    u0: impl Fn(f64) -> f64,
    h0: impl Fn(f64) -> f64,
    h1: impl Fn(f64) -> f64,
    forcing: impl Fn(f64, f64) -> f64,
    t_final: f64,
    n_x: usize,
    n_steps: usize,
) -> Result<Vec<f64>> {
    if n_x < 4 || n_steps == 0 || t_final <= 0.0 {
        return Err(Error::argument("heat oracle needs n_x >= 4, n_steps >= 1, t > 0"));
    }
    let dx = 1.0 / n_x as f64;
    let dt = t_final / n_steps as f64;
    let solver = cn_matrices(n_x, dx, dt)?;
    let mut u: Vec<f64> = (0..=n_x).map(|i| u0(i as f64 * dx)).collect();
    for n in 0..n_steps {
        let t_mid = (n as f64 + 0.5) * dt;
        let f_mid: Vec<f64> = (0..=n_x).map(|i| forcing(t_mid, i as f64 * dx)).collect();
        u = cn_step(&solver, &u, dx, dt, h0(t_mid), h1(t_mid), &f_mid);
    }
    Ok(u)
}
