//! Commutative operator sums as first-class handles.
//!
//! The sum handle realizes the closed sum of two resolvent-commuting
//! operators: its domain-part semigroup is the product of the two
//! semigroups, its resolvent comes from the limit construction
//! `R(lambda, A, B) x = K_A(e^{-lambda ·} T_B(·) x)`, and its convolutions
//! reduce to A-convolutions of `T_B`-transported paths.
//!
//! For the concrete age-transport x diffusion pair the limit collapses to a
//! causal integral along age characteristics with per-mode exponential
//! kernels, which is evaluated exactly (in the kernel) instead of iterating
//! the limit.

use std::any::Any;
use std::sync::Arc;

use crate::age::AgeTransport;
use crate::error::{Error, Result};
use crate::linop::{Backend, LinearOperator, QuadOpts};
use crate::neumann::{self, eigenvalue, InteriorField, NeumannX, XLayout, YElement};
use crate::params::OperatorParams;
use crate::path::TimeSampledPath;
use crate::quad;
use crate::semigroup::{self, ArcOp};
use crate::vecs;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Route {
    Generic,
    AgeNeumann,
}

/// Handle for the closed sum `A + B` of a resolvent-commuting pair.
pub struct SumOperator {
    a: ArcOp,
    b: ArcOp,
    params: OperatorParams,
    route: Route,
    resolvent_tol: f64,
}

impl SumOperator {
    pub fn new(a: ArcOp, b: ArcOp) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::argument("sum operands must share a state space"));
        }
        let route = match (age_of(&a), neumann_of(&b)) {
            (Some(age), Some(neu)) if age.layout() == neu.layout() => Route::AgeNeumann,
            _ => Route::Generic,
        };
        let pa = a.params();
        let pb = b.params();
        let omega = pa.omega_a + pb.omega_b.max(pb.omega_a);
        let mut params = OperatorParams::reference(omega, pa.m_a * pb.m_a.max(1.0), pb.omega_b);
        params.p = pa.p;
        params.p_star = pb.p_star;
        params.q_star = pb.q_star;
        params.alpha = pb.alpha;
        params.eta = pa.eta.max(omega.max(0.0) + 0.5);
        params.lambda0 = pa.eta + pb.omega_b;
        params.r = pa.r;
        Ok(SumOperator { a, b, params, route, resolvent_tol: semigroup::DEFAULT_KAPPA_TOL })
    }

    pub fn operand_a(&self) -> &ArcOp {
        &self.a
    }

    pub fn operand_b(&self) -> &ArcOp {
        &self.b
    }

    fn age_neumann(&self) -> (&AgeTransport, &NeumannX) {
        (age_of(&self.a).unwrap(), neumann_of(&self.b).unwrap())
    }

    /// Exact sum resolvent on the age x diffusion pair:
    /// zero inflow slot, and per age node
    /// `tail(a) = e^{-lambda a} T_{B0}(a) head
    ///            + int_0^a e^{-lambda s} T_B(s) tail(a - s) ds`,
    /// with the age grid as the quadrature mesh and per-mode exact kernels.
    fn resolvent_age_neumann(&self, lambda: f64, x: &[f64]) -> Result<Vec<f64>> {
        let (age, _) = self.age_neumann();
        let lay = *age.layout();
        let h = lay.delta_a;
        let head = lay.head(x);
        // loads of the tail data at every age node
        let loads: Vec<Vec<f64>> = (0..=lay.n_a)
            .map(|j| {
                let e = lay.tail_element(x, j);
                let l = neumann::neumann_load(&e.trace, lay.modes);
                e.field.coeffs.iter().zip(l.iter()).map(|(a, b)| a + b).collect()
            })
            .collect();
        let mut out = vecs::zeros(lay.dim());
        for j in 0..=lay.n_a {
            let a_j = lay.age_node(j);
            let mut coeffs = vec![0.0; lay.modes];
            for (k, c) in coeffs.iter_mut().enumerate() {
                *c = (-(lambda + eigenvalue(k)) * a_j).exp() * head[k];
            }
            for i in 0..j {
                let (s0, s1) = (i as f64 * h, (i + 1) as f64 * h);
                // data along the characteristic: tail(a_j - s)
                let l0 = &loads[j - i];
                let l1 = &loads[j - i - 1];
                for (k, c) in coeffs.iter_mut().enumerate() {
                    *c += quad::exp_decay_linear_moment(
                        lambda + eigenvalue(k),
                        s0,
                        s1,
                        l0[k],
                        l1[k],
                    );
                }
            }
            lay.set_tail_element(
                &mut out,
                j,
                &YElement::from_field(InteriorField::from_coeffs(coeffs)),
            );
        }
        Ok(out)
    }

    /// Exact convolution accumulation on the age x diffusion pair:
    /// `(S_{A+B} ◇ f(t-·))(t)` increments, realized as the A-accumulation of
    /// the `T_B`-transported path with per-mode exponential kernels.
    fn conv_accumulate_age_neumann(
        &self,
        f: &TimeSampledPath,
        t0: f64,
        t1: f64,
        opts: &QuadOpts,
    ) -> Result<Vec<f64>> {
        let (age, _) = self.age_neumann();
        let lay = *age.layout();
        let mut out = vecs::zeros(lay.dim());
        if t1 == t0 {
            return Ok(out);
        }
        let cpu = opts.cells_per_unit.max(128) as f64;
        for j in 0..=lay.n_a {
            let a_j = lay.age_node(j);
            // inflow injection: head of T_B(a_j) f(a_j) = heat flow of the
            // path's inflow slot, on the swept diagonal
            let mut coeffs = vec![0.0; lay.modes];
            if a_j >= t0 && a_j < t1 {
                let v = f.value_at(a_j);
                for (k, c) in coeffs.iter_mut().enumerate() {
                    *c = (-eigenvalue(k) * a_j).exp() * lay.head(&v)[k];
                }
            }
            // transported tail: int over s in [t0, min(t1, a_j)]
            let top = t1.min(a_j);
            if top > t0 {
                let cells = (((top - t0) * cpu).ceil() as usize).max(2);
                let mesh = quad::uniform_mesh(t0, top, cells);
                let loads: Vec<Vec<f64>> = mesh
                    .iter()
                    .map(|&s| {
                        let v = f.value_at(s);
                        let e = lay.tail_element_at_age(&v, a_j - s);
                        let l = neumann::neumann_load(&e.trace, lay.modes);
                        e.field.coeffs.iter().zip(l.iter()).map(|(p, q)| p + q).collect()
                    })
                    .collect();
                for w in 0..cells {
                    let (s0, s1) = (mesh[w], mesh[w + 1]);
                    for (k, c) in coeffs.iter_mut().enumerate() {
                        *c += quad::exp_decay_linear_moment(
                            eigenvalue(k),
                            s0,
                            s1,
                            loads[w][k],
                            loads[w + 1][k],
                        );
                    }
                }
            }
            let prev = lay.tail_element(&out, j);
            let merged: Vec<f64> =
                prev.field.coeffs.iter().zip(coeffs.iter()).map(|(p, q)| p + q).collect();
            lay.set_tail_element(
                &mut out,
                j,
                &YElement::from_field(InteriorField::from_coeffs(merged)),
            );
        }
        Ok(out)
    }
}

fn age_of(op: &ArcOp) -> Option<&AgeTransport> {
    op.as_ref().as_any().downcast_ref::<AgeTransport>()
}

fn neumann_of(op: &ArcOp) -> Option<&NeumannX> {
    op.as_ref().as_any().downcast_ref::<NeumannX>()
}

impl LinearOperator for SumOperator {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn backend(&self) -> Backend {
        Backend::Sum
    }

    fn params(&self) -> &OperatorParams {
        &self.params
    }

    fn resolvent(&self, lambda: f64, x: &[f64]) -> Result<Vec<f64>> {
        semigroup::validate_sum_lambda(self.a.as_ref(), self.b.as_ref(), lambda)?;
        match self.route {
            Route::AgeNeumann => self.resolvent_age_neumann(lambda, x),
            Route::Generic => semigroup::sum_resolvent_generic(
                &self.a,
                &self.b,
                lambda,
                x,
                self.resolvent_tol,
            ),
        }
    }

    /// Product form of the domain-part semigroup.
    fn semigroup(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        self.a.semigroup(t, &self.b.semigroup(t, x)?)
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.a.apply(x)?;
        vecs::axpy(&mut out, 1.0, &self.b.apply(x)?);
        Ok(out)
    }

    fn norm(&self, x: &[f64]) -> f64 {
        self.a.norm(x)
    }

    fn conv_accumulate(
        &self,
        f: &TimeSampledPath,
        t0: f64,
        t1: f64,
        opts: &QuadOpts,
    ) -> Result<Vec<f64>> {
        if !(0.0 <= t0 && t0 <= t1) {
            return Err(Error::argument(format!("bad accumulation window [{t0}, {t1}]")));
        }
        match self.route {
            Route::AgeNeumann => self.conv_accumulate_age_neumann(f, t0, t1, opts),
            Route::Generic => {
                if t1 == t0 {
                    return Ok(vecs::zeros(self.dim()));
                }
                // transported path g(s) = T_B(s) f(s), then accumulate over A
                let b = Arc::clone(&self.b);
                let ff = f.clone();
                let dim = self.dim();
                let g = TimeSampledPath::from_fn(
                    move |s| {
                        b.derivative_semigroup(s, &ff.value_at(s))
                            .unwrap_or_else(|_| vecs::zeros(dim))
                    },
                    t1.max(f.t_max()),
                    (((t1.max(f.t_max())) * 16.0).ceil() as usize).max(4),
                );
                self.a.conv_accumulate(&g, t0, t1, opts)
            }
        }
    }

    /// `S_{A+B}(t) x = (S_A ◇ T_B(t-·) x)(t)`.
    fn integrated_semigroup(&self, t: f64, x: &[f64], mu: f64) -> Result<Vec<f64>> {
        if mu <= self.params.omega_a {
            return Err(Error::argument(format!(
                "mu = {mu} must exceed the growth bound {}",
                self.params.omega_a
            )));
        }
        if t < 0.0 {
            return Err(Error::argument("integrated semigroup requires t >= 0"));
        }
        if t == 0.0 {
            return Ok(vecs::zeros(self.dim()));
        }
        let path = TimeSampledPath::constant(x.to_vec(), t);
        self.conv_accumulate(&path, 0.0, t, &QuadOpts::default())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// `R(lambda, A, B) x`: dispatches to the exact route for the concrete age
/// x diffusion pair, otherwise runs the generic limit construction.
pub fn sum_resolvent(a: &ArcOp, b: &ArcOp, lambda: f64, x: &[f64], tol: f64) -> Result<Vec<f64>> {
    match (age_of(a), neumann_of(b)) {
        (Some(age), Some(neu)) if age.layout() == neu.layout() => {
            semigroup::validate_sum_lambda(a.as_ref(), b.as_ref(), lambda)?;
            let sum = SumOperator::new(Arc::clone(a), Arc::clone(b))?;
            sum.resolvent_age_neumann(lambda, x)
        }
        _ => semigroup::sum_resolvent_generic(a, b, lambda, x, tol),
    }
}

/// One probe of the regularity bound: `|(S_{A+B} ◇ f)(t)|` against
/// `|f|_{L^r(0,t)}`; the harness tracks the ratio envelope in `t`.
#[derive(Debug, Clone, Copy)]
pub struct RegularityProbe {
    pub lhs: f64,
    pub rhs_norm: f64,
}

pub fn regularity_bound_probe(
    sum: &SumOperator,
    f: &TimeSampledPath,
    t: f64,
    r: f64,
) -> Result<RegularityProbe> {
    let p = sum.operand_a().params().p;
    let p_star = sum.operand_b().params().p_star;
    if 1.0 / r >= 1.0 / p + 1.0 / p_star - 1.0 {
        return Err(Error::argument(format!(
            "regularity exponent r = {r} violates 1/r < 1/p + 1/p* - 1 = {}",
            1.0 / p + 1.0 / p_star - 1.0
        )));
    }
    let rev = f.reversed_at(t);
    let value = sum.conv_accumulate(&rev, 0.0, t, &QuadOpts::default())?;
    let norm = |v: &[f64]| sum.norm(v);
    Ok(RegularityProbe { lhs: sum.norm(&value), rhs_norm: f.lp_norm_upto(r, t, &norm) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::age::{AgeGrid, XVector};
    use crate::linop::MatrixOperator;
    use crate::neumann::TracePair;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn pair_4(n_a: usize, a_max: f64, modes: usize) -> (ArcOp, ArcOp, SumOperator) {
        let age = AgeTransport::new(AgeGrid::new(a_max, n_a).unwrap(), modes);
        let lay = *age.layout();
        let a: ArcOp = Arc::new(age);
        let b: ArcOp = Arc::new(NeumannX::new(lay));
        let sum = SumOperator::new(Arc::clone(&a), Arc::clone(&b)).unwrap();
        (a, b, sum)
    }

    #[test]
    fn matrix_pair_takes_generic_route() {
        let a: ArcOp = Arc::new(
            MatrixOperator::from_matrix(DMatrix::from_row_slice(1, 1, &[-1.0])).unwrap(),
        );
        let b: ArcOp = Arc::new(
            MatrixOperator::from_matrix(DMatrix::from_row_slice(1, 1, &[-2.0])).unwrap(),
        );
        let sum = SumOperator::new(Arc::clone(&a), Arc::clone(&b)).unwrap();
        let v = sum.resolvent(0.0, &[1.0]).unwrap();
        assert_abs_diff_eq!(v[0], 1.0 / 3.0, epsilon = 1e-9);
        // product semigroup
        let s = sum.semigroup(0.5, &[1.0]).unwrap();
        assert_abs_diff_eq!(s[0], (-1.5f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn age_neumann_sum_resolvent_solves_the_equation() {
        // x in D(B) (zero traces, smooth fields): check
        // (lambda - A - B) R x = x through the forward applications.
        let (a, b, sum) = pair_4(256, 2.0, 12);
        let age = age_of(&a).unwrap();
        let lay = *age.layout();
        let mut x = XVector::zeros(&lay);
        x.head = InteriorField::project(|xx| 0.5 + 0.4 * (std::f64::consts::PI * xx).cos(), 12);
        for j in 0..=lay.n_a {
            let aa = lay.age_node(j);
            let amp = (-aa).exp();
            x.tail[j] = YElement::from_field(InteriorField::project(
                move |xx| amp * (1.0 + 0.5 * (std::f64::consts::PI * xx).cos()),
                12,
            ));
        }
        let flat = x.flatten(&lay);
        let lambda = 5.0;
        let u = sum.resolvent(lambda, &flat).unwrap();
        // residual via forward operators
        let mut res = vecs::scale(lambda, &u);
        vecs::axpy(&mut res, -1.0, &a.apply(&u).unwrap());
        vecs::axpy(&mut res, -1.0, &b.apply(&u).unwrap());
        vecs::axpy(&mut res, -1.0, &flat);
        let err = lay.norm(&res);
        assert!(err < 1e-4, "sum equation residual {err}");
        // the inflow slot of the output is empty and u(0) = head datum
        let uv = XVector::from_flat(&lay, &u);
        assert!(uv.head.coeffs.iter().all(|c| c.abs() < 1e-14));
        for k in 0..12 {
            assert_abs_diff_eq!(uv.tail[0].field.coeffs[k], x.head.coeffs[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn age_neumann_resolvent_decays_no_slower_than_the_bound() {
        // lambda^{0.2} |R(lambda)| stays bounded over [10, 1e4].
        let (_, _, sum) = pair_4(96, 1.2, 48);
        let lay = XLayout::new(96, 48, 1.2 / 96.0);
        // probes with decaying tails carrying trace data
        let mut probes = Vec::new();
        for (w0, w1, famp) in [(1.0, 0.0, 0.3), (0.0, -1.0, 0.0), (0.5, 0.5, 1.0)] {
            let mut x = XVector::zeros(&lay);
            for j in 0..=lay.n_a {
                let aa = lay.age_node(j);
                let damp = (-3.0 * aa).exp();
                x.tail[j] = YElement {
                    trace: TracePair::new(w0 * damp, w1 * damp),
                    field: InteriorField::project(move |xx| famp * damp * (1.0 - xx), 48),
                };
            }
            probes.push(x.flatten(&lay));
        }
        let grid = quad::log_grid(10.0, 1e4, 7);
        let mut scaled = Vec::new();
        for &l in &grid {
            let gain = crate::linop::probe_norm_estimate(
                |x| sum.resolvent(l, x),
                &|v| lay.norm(v),
                &probes,
            )
            .unwrap();
            scaled.push(l.powf(0.2) * gain);
        }
        let early = scaled[0].max(scaled[1]);
        for (i, s) in scaled.iter().enumerate() {
            assert!(*s <= early * 1.05, "lambda = {}: scaled norm {s} vs early {early}", grid[i]);
        }
    }

    #[test]
    fn sum_integrated_semigroup_of_pure_heat_mode() {
        // x tail = cos(pi x) profile with no age variation, head = 0:
        // on ages a >= t the transported integral yields
        // int_0^t e^{-d1 s} ds = (1 - e^{-d1 t})/d1.
        let (_, _, sum) = pair_4(64, 1.0, 4);
        let lay = XLayout::new(64, 4, 1.0 / 64.0);
        let mut x = XVector::zeros(&lay);
        for j in 0..=lay.n_a {
            let mut f = InteriorField::zeros(4);
            f.coeffs[1] = 1.0;
            x.tail[j] = YElement::from_field(f);
        }
        let flat = x.flatten(&lay);
        let t = 0.5;
        let v = sum.integrated_semigroup(t, &flat, 1.0).unwrap();
        let vv = XVector::from_flat(&lay, &v);
        let d1 = eigenvalue(1);
        let exact = (1.0 - (-d1 * t).exp()) / d1;
        for j in [40usize, 52, 64] {
            assert!(
                (vv.tail[j].field.coeffs[1] - exact).abs() < 1e-6,
                "node {j}: {} vs {exact}",
                vv.tail[j].field.coeffs[1]
            );
        }
        // t = 0 gives zero
        let z = sum.integrated_semigroup(0.0, &flat, 1.0).unwrap();
        assert!(z.iter().all(|c| *c == 0.0));
    }

    #[test]
    fn regularity_probe_matrix_ratio_bounded_and_vanishing() {
        let a: ArcOp = Arc::new(
            MatrixOperator::from_matrix(DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]))
                .unwrap(),
        );
        let b: ArcOp = Arc::new(
            MatrixOperator::from_matrix(DMatrix::from_row_slice(2, 2, &[-0.5, 0.0, 0.0, -1.5]))
                .unwrap(),
        );
        let sum = SumOperator::new(a, b).unwrap();
        let f = TimeSampledPath::from_fn(|s| vec![(1.0 + s).sin(), (-s).exp()], 1.0, 16);
        let mut prev = f64::INFINITY;
        for &t in &[0.4, 0.2, 0.1, 0.05] {
            let probe = regularity_bound_probe(&sum, &f, t, 5.0).unwrap();
            let ratio = probe.lhs / probe.rhs_norm;
            assert!(ratio.is_finite() && ratio < prev, "t = {t}: ratio {ratio} vs {prev}");
            prev = ratio;
        }
        // invalid exponent rejected: 1/r >= 1/p + 1/p* - 1
        assert!(regularity_bound_probe(&sum, &f, 0.2, 3.0).is_err());
        // zero forcing
        let z = TimeSampledPath::constant(vec![0.0, 0.0], 1.0);
        let probe = regularity_bound_probe(&sum, &z, 0.2, 5.0).unwrap();
        assert_eq!(probe.lhs, 0.0);
    }
}
