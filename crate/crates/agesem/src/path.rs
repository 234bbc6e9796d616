//! Time-indexed paths of state vectors.
//!
//! A path is defined on `[0, t_max]` and extended by zero beyond. Paths built
//! from samples interpolate between them; paths built from a function keep
//! the function, so quadratures can evaluate them exactly off the sample
//! mesh (the mesh still fixes the default quadrature cells).

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interp {
    PiecewiseConstant,
    PiecewiseLinear,
}

type PathFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// A time-sampled path of vectors on `[0, t_max]`, zero afterwards.
#[derive(Clone)]
pub struct TimeSampledPath {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
    interp: Interp,
    exact: Option<PathFn>,
}

impl std::fmt::Debug for TimeSampledPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TimeSampledPath")
            .field("samples", &self.times.len())
            .field("t_max", &self.t_max())
            .field("dim", &self.dim())
            .field("interp", &self.interp)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

impl TimeSampledPath {
    /// Build from explicit samples. `times` must start at 0 and increase
    /// strictly; all values must share one dimension.
    pub fn from_samples(times: Vec<f64>, values: Vec<Vec<f64>>, interp: Interp) -> Result<Self> {
        if times.is_empty() || times[0] != 0.0 {
            return Err(Error::argument("path samples must start at time 0"));
        }
        if times.len() != values.len() {
            return Err(Error::argument("times and values must have equal length"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::argument("path times must be strictly increasing"));
        }
        let dim = values[0].len();
        if values.iter().any(|v| v.len() != dim) {
            return Err(Error::argument("path values must have identical dimension"));
        }
        Ok(TimeSampledPath { times, values, interp, exact: None })
    }

    /// Sample `f` on `n_cells` uniform cells of `[0, t_max]` and keep `f`
    /// for exact off-mesh evaluation.
    pub fn from_fn<F>(f: F, t_max: f64, n_cells: usize) -> Self
    where
        F: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    {
        assert!(t_max > 0.0 && n_cells >= 1);
        let times = quad::uniform_mesh(0.0, t_max, n_cells);
        let values: Vec<Vec<f64>> = times.iter().map(|&s| f(s)).collect();
        TimeSampledPath {
            times,
            values,
            interp: Interp::PiecewiseLinear,
            exact: Some(Arc::new(f)),
        }
    }

    /// Constant path `s -> x` on `[0, t_max]`.
    pub fn constant(x: Vec<f64>, t_max: f64) -> Self {
        let x2 = x.clone();
        TimeSampledPath {
            times: vec![0.0, t_max],
            values: vec![x.clone(), x],
            interp: Interp::PiecewiseLinear,
            exact: Some(Arc::new(move |_| x2.clone())),
        }
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn t_max(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// Value at `s`; zero outside `[0, t_max]`.
    pub fn value_at(&self, s: f64) -> Vec<f64> {
        if s < 0.0 || s > self.t_max() {
            return vec![0.0; self.dim()];
        }
        if let Some(f) = &self.exact {
            return f(s);
        }
        // locate the cell containing s
        let idx = match self.times.binary_search_by(|t| t.partial_cmp(&s).unwrap()) {
            Ok(i) => return self.values[i].clone(),
            Err(i) => i - 1, // s > times[0] here since s >= 0 = times[0]
        };
        match self.interp {
            Interp::PiecewiseConstant => self.values[idx].clone(),
            Interp::PiecewiseLinear => {
                let (t0, t1) = (self.times[idx], self.times[idx + 1]);
                let w = (s - t0) / (t1 - t0);
                self.values[idx]
                    .iter()
                    .zip(self.values[idx + 1].iter())
                    .map(|(a, b)| a + w * (b - a))
                    .collect()
            }
        }
    }

    /// The reversed path `s -> f(t - s)` on `[0, t]`.
    pub fn reversed_at(&self, t: f64) -> Self {
        assert!(t >= 0.0);
        let mut times: Vec<f64> = self
            .times
            .iter()
            .filter_map(|&s| {
                let r = t - s;
                if r > 0.0 && r < t {
                    Some(r)
                } else {
                    None
                }
            })
            .collect();
        times.push(0.0);
        times.push(t);
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        times.dedup_by(|a, b| (*a - *b).abs() < 1e-15 * (1.0 + t));
        let values: Vec<Vec<f64>> = times.iter().map(|&s| self.value_at(t - s)).collect();
        let exact: Option<PathFn> = self.exact.clone().map(|f| {
            let g: PathFn = Arc::new(move |s: f64| f(t - s));
            g
        });
        // Preserve exact zero-extension semantics: a sampled reversed path
        // interpolates the original's samples restricted to [0, t].
        TimeSampledPath { times, values, interp: self.interp, exact }
    }

    /// The shifted path `s -> f(s + delta)` on `[0, t_max - delta]`.
    pub fn shifted(&self, delta: f64) -> Result<Self> {
        if delta < 0.0 || delta >= self.t_max() {
            return Err(Error::argument(format!(
                "shift {delta} outside [0, t_max = {})",
                self.t_max()
            )));
        }
        let mut times: Vec<f64> = self
            .times
            .iter()
            .filter_map(|&s| {
                let r = s - delta;
                if r > 0.0 {
                    Some(r)
                } else {
                    None
                }
            })
            .collect();
        times.insert(0, 0.0);
        times.dedup_by(|a, b| (*a - *b).abs() < 1e-15 * (1.0 + self.t_max()));
        let values: Vec<Vec<f64>> = times.iter().map(|&s| self.value_at(s + delta)).collect();
        let exact: Option<PathFn> = self.exact.clone().map(|f| {
            let g: PathFn = Arc::new(move |s: f64| f(s + delta));
            g
        });
        TimeSampledPath::from_samples(times, values, self.interp).map(|mut p| {
            p.exact = exact;
            p
        })
    }

    /// The exponentially damped path `s -> e^{-delta s} f(s)`.
    pub fn damped(&self, delta: f64) -> Self {
        let values: Vec<Vec<f64>> = self
            .times
            .iter()
            .zip(self.values.iter())
            .map(|(&s, v)| {
                let w = (-delta * s).exp();
                v.iter().map(|c| w * c).collect()
            })
            .collect();
        let exact: Option<PathFn> = self.exact.clone().map(|f| {
            let g: PathFn = Arc::new(move |s: f64| {
                let w = (-delta * s).exp();
                f(s).into_iter().map(|c| w * c).collect()
            });
            g
        });
        TimeSampledPath { times: self.times.clone(), values, interp: self.interp, exact }
    }

    /// Weighted norm `(int_0^{t_max} e^{p eta s} |f(s)|^p ds)^{1/p}` with the
    /// spatial norm supplied by the caller; composite Gauss on the sample mesh.
    pub fn lp_eta_norm(&self, p: f64, eta: f64, space_norm: &dyn Fn(&[f64]) -> f64) -> f64 {
        let integrand = |s: f64| vec![(p * eta * s).exp() * space_norm(&self.value_at(s)).powf(p)];
        let total = quad::gauss8_mesh(&self.times, &integrand)[0];
        total.powf(1.0 / p)
    }

    /// Unweighted `L^p(0, t)` norm with the supplied spatial norm.
    pub fn lp_norm_upto(&self, p: f64, t: f64, space_norm: &dyn Fn(&[f64]) -> f64) -> f64 {
        let t = t.min(self.t_max());
        if t <= 0.0 {
            return 0.0;
        }
        let mut mesh: Vec<f64> = self.times.iter().cloned().filter(|&s| s < t).collect();
        mesh.push(t);
        let integrand = |s: f64| vec![space_norm(&self.value_at(s)).powf(p)];
        quad::gauss8_mesh(&mesh, &integrand)[0].powf(1.0 / p)
    }

    /// Check that the weighted samples decay toward the end of the support:
    /// used as the membership test for weighted Lebesgue classes.
    pub fn tail_decays(&self, eta: f64, space_norm: &dyn Fn(&[f64]) -> f64) -> bool {
        let weighted: Vec<f64> = self
            .times
            .iter()
            .zip(self.values.iter())
            .map(|(&s, v)| (eta * s).exp() * space_norm(v))
            .collect();
        let peak = weighted.iter().cloned().fold(0.0, f64::max);
        if peak == 0.0 {
            return true;
        }
        let last = *weighted.last().unwrap();
        last <= 0.5 * peak || last <= 1e-10 * peak + 1e-300
    }
}
