//! Mild solution of the age-structured diffusion problem with inflow data
//! at age zero and flux data on the spatial boundary.
//!
//! The solution at a grid node comes from the two-branch characteristic
//! formula: transport the initial slice (ages beyond the elapsed time) or
//! the inflow slice (ages below it) through the homogeneous heat flow, and
//! add the singular convolution of the flux/forcing data picked up along
//! the characteristic.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expr::{self, ExprAst};
use crate::neumann::{
    b0_semigroup, eigenvalue, sb_diamond, Grading, InteriorField, TracePair, YElement,
};
use crate::quad;

/// Scenario data field: absent, a closed-form expression in `t`, `a`, `x`,
/// or a sampled grid interpolated linearly.
#[derive(Debug, Clone)]
pub enum DataField {
    Zero,
    Expr(ExprAst),
    Grid(GridData),
}

impl DataField {
    pub fn parse(src: &str) -> Result<Self> {
        let trimmed = src.trim();
        if trimmed == "0" || trimmed.is_empty() {
            return Ok(DataField::Zero);
        }
        Ok(DataField::Expr(expr::parse(trimmed)?))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, DataField::Zero)
    }

    pub fn eval(&self, t: f64, a: f64, x: f64) -> Result<f64> {
        match self {
            DataField::Zero => Ok(0.0),
            DataField::Expr(ast) => expr::evaluate(ast, t, a, x),
            DataField::Grid(g) => Ok(g.interpolate(t, a, x)),
        }
    }
}

/// Rectilinear samples over any subset of the `(t, a, x)` axes with
/// multilinear interpolation; coordinates clamp to the sampled range.
#[derive(Debug, Clone)]
pub struct GridData {
    pub t_axis: Option<Vec<f64>>,
    pub a_axis: Option<Vec<f64>>,
    pub x_axis: Option<Vec<f64>>,
    /// Row-major over the present axes in `(t, a, x)` order.
    pub values: Vec<f64>,
}

impl GridData {
    pub fn interpolate(&self, t: f64, a: f64, x: f64) -> f64 {
        let axes: Vec<(&Vec<f64>, f64)> = [(&self.t_axis, t), (&self.a_axis, a), (&self.x_axis, x)]
            .into_iter()
            .filter_map(|(ax, v)| ax.as_ref().map(|ax| (ax, v)))
            .collect();
        // locate cell and weight per axis
        let locs: Vec<(usize, f64)> = axes
            .iter()
            .map(|(ax, v)| {
                if ax.len() == 1 || *v <= ax[0] {
                    return (0, 0.0);
                }
                if *v >= *ax.last().unwrap() {
                    return (ax.len() - 2, 1.0);
                }
                let i = ax.partition_point(|c| *c <= *v) - 1;
                let w = (*v - ax[i]) / (ax[i + 1] - ax[i]);
                (i.min(ax.len() - 2), w)
            })
            .collect();
        let dims: Vec<usize> = axes.iter().map(|(ax, _)| ax.len()).collect();
        let mut acc = 0.0;
        let corners = 1usize << locs.len();
        for corner in 0..corners {
            let mut idx = 0usize;
            let mut weight = 1.0;
            for (d, (i, w)) in locs.iter().enumerate() {
                let hi = (corner >> d) & 1 == 1;
                let off = if hi { i + 1 } else { *i };
                let off = off.min(dims[d] - 1);
                idx = idx * dims[d] + off;
                weight *= if hi { *w } else { 1.0 - *w };
            }
            acc += weight * self.values[idx];
        }
        acc
    }
}

/// Problem data and discretization for one solver run.
#[derive(Debug, Clone)]
pub struct ScenarioData {
    pub u0: DataField,
    pub f: DataField,
    pub g: DataField,
    pub h0: DataField,
    pub h1: DataField,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub t_horizon: f64,
    pub a_max: f64,
    /// Age cells; the shared step is `a_max / n_a` for both age and time.
    pub n_a: usize,
    /// Spatial cells of the finite-difference oracle.
    pub n_x: usize,
    /// Highest retained cosine mode.
    pub k_max: usize,
    pub grading_kappa: f64,
    pub n_cells: usize,
}

impl ScenarioData {
    /// Shared characteristic step `delta_t = delta_a`.
    pub fn delta(&self) -> f64 {
        self.a_max / self.n_a as f64
    }

    pub fn modes(&self) -> usize {
        self.k_max + 1
    }

    pub fn grading(&self) -> Grading {
        Grading { kappa: self.grading_kappa, n_cells: self.n_cells }
    }

    /// Validate the exponent coupling and grid compatibility; messages name
    /// the violated rule.
    pub fn validate(&self) -> Result<()> {
        if self.p <= 1.0 || self.q <= 1.0 {
            return Err(Error::scenario(format!(
                "exponents must satisfy p > 1 and q > 1 (got p = {}, q = {})",
                self.p, self.q
            )));
        }
        let coupling = (1.0 + self.q) / (2.0 * self.q) + 1.0 / self.p;
        if coupling <= 1.0 {
            return Err(Error::scenario(format!(
                "condition 1 < (1+q)/(2q) + 1/p violated: (1+q)/(2q) + 1/p = {coupling}"
            )));
        }
        if 1.0 + 1.0 / self.r >= coupling {
            return Err(Error::scenario(format!(
                "condition 1 + 1/r < (1+q)/(2q) + 1/p violated: 1 + 1/r = {} vs {coupling}",
                1.0 + 1.0 / self.r
            )));
        }
        if self.t_horizon <= 0.0 || self.a_max <= 0.0 || self.n_a == 0 {
            return Err(Error::scenario("horizon, age cut and cell counts must be positive"));
        }
        let steps = self.t_horizon / self.delta();
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::scenario(format!(
                "characteristic alignment requires the horizon T = {} to be a multiple of \
                 delta_t = delta_a = {}",
                self.t_horizon,
                self.delta()
            )));
        }
        if self.n_x < 4 {
            return Err(Error::scenario("n_x must be at least 4"));
        }
        if self.k_max == 0 {
            return Err(Error::scenario("mode cutoff K must be at least 1"));
        }
        if self.grading_kappa < 1.0 || self.n_cells < 8 {
            return Err(Error::scenario("grading requires kappa >= 1 and n_cells >= 8"));
        }
        // surface expression errors early
        for (name, field, t, a, x) in [
            ("u0", &self.u0, 0.0, 0.5 * self.a_max, 0.5),
            ("f", &self.f, 0.5 * self.t_horizon, 0.5 * self.a_max, 0.5),
            ("g", &self.g, 0.5 * self.t_horizon, 0.0, 0.5),
            ("h0", &self.h0, 0.5 * self.t_horizon, 0.5 * self.a_max, 0.0),
            ("h1", &self.h1, 0.5 * self.t_horizon, 0.5 * self.a_max, 1.0),
        ] {
            field.eval(t, a, x).map_err(|e| {
                Error::scenario(format!("data field `{name}` failed to evaluate: {e}"))
            })?;
        }
        Ok(())
    }

    fn project_u0(&self, age: f64) -> Result<InteriorField> {
        self.project_slice(&self.u0, 0.0, age)
    }

    fn project_g(&self, time: f64) -> Result<InteriorField> {
        self.project_slice(&self.g, time, 0.0)
    }

    fn project_slice(&self, field: &DataField, t: f64, a: f64) -> Result<InteriorField> {
        let modes = self.modes();
        if field.is_zero() {
            return Ok(InteriorField::zeros(modes));
        }
        let m = InteriorField::projection_cells(modes);
        let mut samples = Vec::with_capacity(m + 1);
        for i in 0..=m {
            samples.push(field.eval(t, a, i as f64 / m as f64)?);
        }
        Ok(InteriorField::project_from_samples(&samples, modes))
    }

    /// The forcing element picked up at convolution parameter `s` along the
    /// characteristic through the node; `(time, age) = (s, s + offset)` on
    /// the initial-data side and `(s + offset, s)` on the inflow side.
    fn characteristic_element(&self, source: CharSource, offset: f64, s: f64) -> Result<YElement> {
        let (time, age) = match source {
            CharSource::Initial => (s, s + offset),
            CharSource::AgeBoundary => (s + offset, s),
        };
        let trace = TracePair::new(self.h0.eval(time, age, 0.0)?, self.h1.eval(time, age, 1.0)?);
        let field = self.project_slice(&self.f, time, age)?;
        Ok(YElement { trace, field })
    }
}

/// Which data slice feeds the node: the initial slice (`t < a`, including
/// the diagonal) or the age-boundary inflow slice (`t > a`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CharSource {
    Initial,
    AgeBoundary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharDecomp {
    /// Elapsed time along the characteristic, `min(t, a)`.
    pub tau: f64,
    pub source: CharSource,
    /// `|a - t|`, the shift entering the data arguments.
    pub offset: f64,
}

/// Split a node into its characteristic data: `tau = min(t, a)`, the source
/// slice, and the offset `|a - t|`. The diagonal `t = a` uses the initial
/// branch.
pub fn characteristic_decompose(t: f64, a: f64) -> Result<CharDecomp> {
    if t < 0.0 || a < 0.0 {
        return Err(Error::argument(format!("need t, a >= 0, got ({t}, {a})")));
    }
    let source = if t <= a { CharSource::Initial } else { CharSource::AgeBoundary };
    Ok(CharDecomp { tau: t.min(a), source, offset: (a - t).abs() })
}

/// Convention note recorded in run metadata.
pub const DIAGONAL_BRANCH: &str = "t = a evaluated by the initial-data (t < a) branch";

/// Mild solution at one grid-aligned node.
pub fn mild_solution_at(s: &ScenarioData, t: f64, a: f64) -> Result<InteriorField> {
    let delta = s.delta();
    for (label, v) in [("t", t), ("a", a)] {
        let m = v / delta;
        if (m - m.round()).abs() > 1e-9 * m.abs().max(1.0) {
            let _ = label;
            return Err(Error::Alignment { value: v, step: delta });
        }
    }
    if t > s.t_horizon + 1e-12 || a > s.a_max + 1e-12 {
        return Err(Error::argument(format!(
            "node ({t}, {a}) outside the grid [0, {}] x [0, {}]",
            s.t_horizon, s.a_max
        )));
    }
    let d = characteristic_decompose(t, a)?;
    let mut out = match d.source {
        CharSource::Initial => b0_semigroup(t, &s.project_u0(a - t)?),
        CharSource::AgeBoundary => b0_semigroup(a, &s.project_g(t - a)?),
    };
    if d.tau > 0.0 && !(s.f.is_zero() && s.h0.is_zero() && s.h1.is_zero()) {
        let (source, offset) = (d.source, d.offset);
        s.characteristic_element(source, offset, 0.5 * d.tau)?;
        let (conv, _est) = sb_diamond(
            |sigma| {
                s.characteristic_element(source, offset, sigma)
                    .unwrap_or_else(|_| YElement::zeros(s.modes()))
            },
            d.tau,
            s.grading(),
        )?;
        for (o, c) in out.coeffs.iter_mut().zip(conv.coeffs.iter()) {
            *o += c;
        }
    }
    Ok(out)
}

/// The solved grid: one interior field per `(t_i, a_j)` node.
#[derive(Debug, Clone)]
pub struct SolutionGrid {
    pub times: Vec<f64>,
    pub ages: Vec<f64>,
    /// `fields[i][j]` at `(times[i], ages[j])`.
    pub fields: Vec<Vec<InteriorField>>,
    pub delta: f64,
    pub modes: usize,
    /// Convention applied on the characteristic diagonal.
    pub diagonal_branch: &'static str,
}

impl SolutionGrid {
    pub fn node(&self, i: usize, j: usize) -> &InteriorField {
        &self.fields[i][j]
    }

    /// Max over nodes of the `L^2(0,1)` distance to a closed-form solution.
    pub fn max_l2_error_vs(&self, exact: &DataField, modes: usize) -> Result<f64> {
        let mut worst = 0.0f64;
        for (i, &t) in self.times.iter().enumerate() {
            for (j, &a) in self.ages.iter().enumerate() {
                let ex = exact.clone();
                ex.eval(t, a, 0.5)?;
                let proj =
                    InteriorField::project(move |x| ex.eval(t, a, x).unwrap_or(f64::NAN), modes);
                let d: f64 = self.fields[i][j]
                    .coeffs
                    .iter()
                    .zip(proj.coeffs.iter())
                    .enumerate()
                    .map(|(k, (u, v))| {
                        let w = if k == 0 { 1.0 } else { 0.5 };
                        w * (u - v) * (u - v)
                    })
                    .sum();
                worst = worst.max(d.sqrt());
            }
        }
        Ok(worst)
    }

    /// Max over nodes of the `L^2` distance to another grid (same layout).
    pub fn max_l2_diff(&self, other: &SolutionGrid) -> f64 {
        let mut worst = 0.0f64;
        for (row_a, row_b) in self.fields.iter().zip(other.fields.iter()) {
            for (fa, fb) in row_a.iter().zip(row_b.iter()) {
                let d: f64 = fa
                    .coeffs
                    .iter()
                    .zip(fb.coeffs.iter())
                    .enumerate()
                    .map(|(k, (u, v))| {
                        let w = if k == 0 { 1.0 } else { 0.5 };
                        w * (u - v) * (u - v)
                    })
                    .sum();
                worst = worst.max(d.sqrt());
            }
        }
        worst
    }

    /// `L^p(age; L^2(x))` norm of the time slice `i` (trapezoid in age).
    pub fn slice_norm(&self, i: usize, p: f64) -> f64 {
        let w = quad::trapezoid_weights(self.ages.len() - 1, self.delta);
        self.fields[i]
            .iter()
            .zip(w.iter())
            .map(|(f, wi)| wi * f.l2_norm().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }
}

/// Solve every grid node. Characteristics are independent and marched in
/// parallel; per characteristic the data slices are projected once and the
/// convolution advances by one exact-kernel cell per node.
pub fn solve_grid(s: &ScenarioData) -> Result<SolutionGrid> {
    s.validate()?;
    let delta = s.delta();
    let n_t = (s.t_horizon / delta).round() as usize;
    let n_a = s.n_a;
    let times: Vec<f64> = (0..=n_t).map(|i| i as f64 * delta).collect();
    let ages: Vec<f64> = (0..=n_a).map(|j| j as f64 * delta).collect();
    let modes = s.modes();

    // offsets >= 0: initial-data characteristics starting at (0, offset);
    // offsets < 0 encode inflow characteristics starting at (offset, 0).
    let mut charval: Vec<(CharSource, usize)> = Vec::new();
    for j in 0..=n_a {
        charval.push((CharSource::Initial, j));
    }
    for i in 1..=n_t {
        charval.push((CharSource::AgeBoundary, i));
    }

    let results: Result<Vec<Vec<(usize, usize, InteriorField)>>> = charval
        .par_iter()
        .map(|&(source, start)| march_characteristic(s, source, start, n_t, n_a, modes))
        .collect();

    let mut fields = vec![vec![InteriorField::zeros(modes); n_a + 1]; n_t + 1];
    for chunk in results? {
        for (i, j, f) in chunk {
            fields[i][j] = f;
        }
    }
    Ok(SolutionGrid {
        times,
        ages,
        fields,
        delta,
        modes,
        diagonal_branch: DIAGONAL_BRANCH,
    })
}

fn march_characteristic(
    s: &ScenarioData,
    source: CharSource,
    start: usize,
    n_t: usize,
    n_a: usize,
    modes: usize,
) -> Result<Vec<(usize, usize, InteriorField)>> {
    let delta = s.delta();
    let offset = start as f64 * delta;
    let steps = match source {
        CharSource::Initial => (n_a - start).min(n_t),
        CharSource::AgeBoundary => (n_t - start).min(n_a),
    };
    let with_node = |m: usize| match source {
        CharSource::Initial => (m, start + m),
        CharSource::AgeBoundary => (start + m, m),
    };
    let at = |m: usize| {
        let (i, j) = with_node(m);
        (i as f64 * delta, j as f64 * delta)
    };
    let context = |e: Error, m: usize| {
        let (t, a) = at(m);
        Error::Numerical(format!("solver failed at node (t = {t}, a = {a}): {e}"))
    };

    // transported slice, projected once per characteristic
    let p1 = match source {
        CharSource::Initial => s.project_u0(offset).map_err(|e| context(e, 0))?,
        CharSource::AgeBoundary => s.project_g(offset).map_err(|e| context(e, 0))?,
    };
    let homogeneous = s.f.is_zero() && s.h0.is_zero() && s.h1.is_zero();

    let mut out = Vec::with_capacity(steps + 1);
    let mut decayed = p1.clone();
    let mut conv = vec![0.0; modes];
    let step_decay: Vec<f64> = (0..modes).map(|k| (-eigenvalue(k) * delta).exp()).collect();
    let mut load_prev = if homogeneous {
        vec![0.0; modes]
    } else {
        element_load(&s.characteristic_element(source, offset, 0.0).map_err(|e| context(e, 0))?)
    };
    for m in 0..=steps {
        let sigma = m as f64 * delta;
        if m > 0 {
            // advance part 1 by one decay step and the convolution by one cell
            for (k, c) in decayed.coeffs.iter_mut().enumerate() {
                *c *= step_decay[k];
            }
            if !homogeneous {
                let load_cur = element_load(
                    &s.characteristic_element(source, offset, sigma).map_err(|e| context(e, m))?,
                );
                for (k, c) in conv.iter_mut().enumerate() {
                    *c = step_decay[k] * *c
                        + quad::exp_linear_moment(
                            eigenvalue(k),
                            sigma,
                            sigma - delta,
                            sigma,
                            load_prev[k],
                            load_cur[k],
                        );
                }
                load_prev = load_cur;
            }
        }
        let (i, j) = with_node(m);
        let mut field = decayed.clone();
        if !homogeneous {
            for (c, v) in field.coeffs.iter_mut().zip(conv.iter()) {
                *c += v;
            }
        }
        out.push((i, j, field));
    }
    Ok(out)
}

fn element_load(e: &YElement) -> Vec<f64> {
    let l = crate::neumann::neumann_load(&e.trace, e.field.modes());
    e.field.coeffs.iter().zip(l.iter()).map(|(a, b)| a + b).collect()
}

/// Max-norm of `u - (u1 + u2 + u3)` where the sub-solutions split the data
/// into initial+forcing, inflow-only and flux-only problems.
pub fn superposition_residual(s: &ScenarioData) -> Result<f64> {
    let full = solve_grid(s)?;
    let mut s1 = s.clone();
    s1.g = DataField::Zero;
    s1.h0 = DataField::Zero;
    s1.h1 = DataField::Zero;
    let mut s2 = s.clone();
    s2.u0 = DataField::Zero;
    s2.f = DataField::Zero;
    s2.h0 = DataField::Zero;
    s2.h1 = DataField::Zero;
    let mut s3 = s.clone();
    s3.u0 = DataField::Zero;
    s3.f = DataField::Zero;
    s3.g = DataField::Zero;
    let (u1, u2, u3) = (solve_grid(&s1)?, solve_grid(&s2)?, solve_grid(&s3)?);
    let mut worst = 0.0f64;
    for i in 0..full.times.len() {
        for j in 0..full.ages.len() {
            let d: f64 = (0..full.modes)
                .map(|k| {
                    let w = if k == 0 { 1.0 } else { 0.5 };
                    let diff = full.fields[i][j].coeffs[k]
                        - u1.fields[i][j].coeffs[k]
                        - u2.fields[i][j].coeffs[k]
                        - u3.fields[i][j].coeffs[k];
                    w * diff * diff
                })
                .sum();
            worst = worst.max(d.sqrt());
        }
    }
    Ok(worst)
}

/// Reference scenario: smooth interior forcing with homogeneous flux, exact
/// solution `e^{-(t+a)} (1 + cos(pi x))`.
pub fn manufactured_interior(n_a: usize, k_max: usize) -> (ScenarioData, DataField) {
    let s = ScenarioData {
        u0: DataField::parse("exp(-a)*(1+cos(pi*x))").unwrap(),
        f: DataField::parse("exp(-(t+a))*(-2+(pi^2-2)*cos(pi*x))").unwrap(),
        g: DataField::parse("exp(-t)*(1+cos(pi*x))").unwrap(),
        h0: DataField::Zero,
        h1: DataField::Zero,
        p: 2.0,
        q: 2.0,
        r: 5.0,
        t_horizon: 0.5,
        a_max: 1.0,
        n_a,
        n_x: 200,
        k_max,
        grading_kappa: 2.0,
        n_cells: 64,
    };
    (s, DataField::parse("exp(-(t+a))*(1+cos(pi*x))").unwrap())
}

/// Reference scenario with boundary flux: exact solution `e^{-(t+a)} x^2`.
pub fn manufactured_flux(n_a: usize, k_max: usize) -> (ScenarioData, DataField) {
    let s = ScenarioData {
        u0: DataField::parse("exp(-a)*x^2").unwrap(),
        f: DataField::parse("-2*exp(-(t+a))*(x^2+1)").unwrap(),
        g: DataField::parse("exp(-t)*x^2").unwrap(),
        h0: DataField::Zero,
        h1: DataField::parse("2*exp(-(t+a))").unwrap(),
        p: 2.0,
        q: 2.0,
        r: 5.0,
        t_horizon: 0.5,
        a_max: 1.0,
        n_a,
        n_x: 200,
        k_max,
        grading_kappa: 2.0,
        n_cells: 64,
    };
    (s, DataField::parse("exp(-(t+a))*x^2").unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn decompose_branches() {
        let d = characteristic_decompose(1.0, 3.0).unwrap();
        assert_eq!(d.tau, 1.0);
        assert_eq!(d.source, CharSource::Initial);
        assert_eq!(d.offset, 2.0);
        let d = characteristic_decompose(3.0, 1.0).unwrap();
        assert_eq!(d.tau, 1.0);
        assert_eq!(d.source, CharSource::AgeBoundary);
        assert_eq!(d.offset, 2.0);
        let d = characteristic_decompose(1.0, 1.0).unwrap();
        assert_eq!(d.source, CharSource::Initial);
        assert!(characteristic_decompose(-0.1, 0.0).is_err());
    }

    #[test]
    fn scenario_validation_names_the_rule() {
        let (mut s, _) = manufactured_interior(64, 16);
        s.p = 4.0;
        s.q = 8.0;
        match s.validate() {
            Err(Error::Scenario(msg)) => assert!(msg.contains("(1+q)/(2q) + 1/p")),
            other => panic!("expected scenario error, got {other:?}"),
        }
        let (mut s, _) = manufactured_interior(64, 16);
        s.r = 4.0;
        assert!(s.validate().is_err());
        let (mut s, _) = manufactured_interior(64, 16);
        s.t_horizon = 0.503; // not a multiple of 1/64
        assert!(matches!(s.validate(), Err(Error::Scenario(m)) if m.contains("alignment")));
    }

    #[test]
    fn pure_transport_with_diffusion_decay() {
        // f = g = h = 0, u0 = e^{-a}(1 + cos pi x):
        // u(t, a) = e^{-(a-t)}(1 + e^{-pi^2 t} cos pi x) for t < a, 0 for t > a.
        let (mut s, _) = manufactured_interior(64, 16);
        s.f = DataField::Zero;
        s.g = DataField::Zero;
        let grid = solve_grid(&s).unwrap();
        let delta = s.delta();
        // node t = 16 delta, a = 48 delta (t < a)
        let (i, j) = (16usize, 48usize);
        let (t, a) = (i as f64 * delta, j as f64 * delta);
        let f = grid.node(i, j);
        assert_abs_diff_eq!(f.coeffs[0], (-(a - t)).exp(), epsilon = 1e-10);
        assert_abs_diff_eq!(
            f.coeffs[1],
            (-(a - t)).exp() * (-PI * PI * t).exp(),
            epsilon = 1e-10
        );
        // t > a: nothing flows in (g = 0)
        let f = grid.node(32, 16);
        assert!(f.l2_norm() < 1e-14);
    }

    #[test]
    fn grid_solution_matches_pointwise_formula() {
        let (s, _) = manufactured_interior(128, 12);
        let grid = solve_grid(&s).unwrap();
        let delta = s.delta();
        for (i, j) in [(16usize, 80usize), (48, 48), (64, 16), (0, 28), (36, 0)] {
            let node = mild_solution_at(&s, i as f64 * delta, j as f64 * delta).unwrap();
            let d: f64 = node
                .coeffs
                .iter()
                .zip(grid.node(i, j).coeffs.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            // the graded convolution and the characteristic march are
            // independent quadratures; they agree within the coarser error
            assert!(d < 2e-5, "node ({i}, {j}) mismatch {d}");
        }
        // misaligned node rejected
        assert!(matches!(
            mild_solution_at(&s, 0.51 * delta, 0.0),
            Err(Error::Alignment { .. })
        ));
    }

    #[test]
    fn manufactured_interior_case_converges() {
        let (s, exact) = manufactured_interior(256, 64);
        let grid = solve_grid(&s).unwrap();
        let err = grid.max_l2_error_vs(&exact, s.modes()).unwrap();
        assert!(err < 1e-3, "interior manufactured error {err}");
    }

    #[test]
    fn manufactured_flux_case_converges() {
        let (s, exact) = manufactured_flux(256, 64);
        let grid = solve_grid(&s).unwrap();
        let err = grid.max_l2_error_vs(&exact, s.modes()).unwrap();
        assert!(err < 3e-3, "flux manufactured error {err}");
    }

    #[test]
    fn refinement_shrinks_the_error() {
        let (s0, exact) = manufactured_flux(64, 16);
        let e0 = solve_grid(&s0).unwrap().max_l2_error_vs(&exact, s0.modes()).unwrap();
        let (s1, _) = manufactured_flux(128, 32);
        let e1 = solve_grid(&s1).unwrap().max_l2_error_vs(&exact, s1.modes()).unwrap();
        assert!(e1 <= 0.5 * e0, "errors {e0} -> {e1}");
    }

    #[test]
    fn superposition_is_exact_to_rounding() {
        let (s, _) = manufactured_flux(64, 24);
        let r = superposition_residual(&s).unwrap();
        assert!(r < 1e-10, "superposition residual {r}");
        // zero scenario: identically zero
        let mut z = s.clone();
        z.u0 = DataField::Zero;
        z.f = DataField::Zero;
        z.g = DataField::Zero;
        z.h1 = DataField::Zero;
        assert_eq!(superposition_residual(&z).unwrap(), 0.0);
    }

    #[test]
    fn continuity_across_the_diagonal_under_compatibility() {
        // g(0, x) = u0(0, x) makes both branches agree at t = a.
        let (s, _) = manufactured_interior(64, 24);
        let delta = s.delta();
        for m in [8usize, 16, 28] {
            let tau = m as f64 * delta;
            let diag = mild_solution_at(&s, tau, tau).unwrap();
            // approach from the inflow side: a = tau - delta
            let below = mild_solution_at(&s, tau, tau - delta).unwrap();
            let d: f64 = diag
                .coeffs
                .iter()
                .zip(below.coeffs.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            // one characteristic step of a smooth solution
            assert!(d < 5e-2, "diagonal jump {d}");
        }
    }

    #[test]
    fn slice_norms_are_continuous_in_time() {
        let (s, _) = manufactured_interior(128, 24);
        let grid = solve_grid(&s).unwrap();
        let mut max_jump = 0.0f64;
        for i in 1..grid.times.len() {
            max_jump = max_jump.max((grid.slice_norm(i, 2.0) - grid.slice_norm(i - 1, 2.0)).abs());
        }
        let (s2, _) = manufactured_interior(256, 24);
        let grid2 = solve_grid(&s2).unwrap();
        let mut max_jump2 = 0.0f64;
        for i in 1..grid2.times.len() {
            max_jump2 =
                max_jump2.max((grid2.slice_norm(i, 2.0) - grid2.slice_norm(i - 1, 2.0)).abs());
        }
        assert!(max_jump2 < 0.75 * max_jump, "slice jumps {max_jump} -> {max_jump2}");
    }

    #[test]
    fn grid_data_interpolation() {
        let g = GridData {
            t_axis: None,
            a_axis: Some(vec![0.0, 1.0]),
            x_axis: Some(vec![0.0, 0.5, 1.0]),
            values: vec![0.0, 1.0, 2.0, 10.0, 11.0, 12.0],
        };
        assert_abs_diff_eq!(g.interpolate(0.0, 0.0, 0.25), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(g.interpolate(0.0, 0.5, 0.5), 6.0, epsilon = 1e-14);
        // clamped outside
        assert_abs_diff_eq!(g.interpolate(0.0, 2.0, 1.5), 12.0, epsilon = 1e-14);
        let df = DataField::Grid(g);
        assert!(df.eval(0.0, 1.0, 1.0).unwrap() == 12.0);
    }
}
