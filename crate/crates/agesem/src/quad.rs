//! Quadrature kernels: composite Gauss rules, aligned Simpson rules,
//! exponentially weighted cell moments and graded meshes.
//!
//! The exponential moments integrate kernels of the form `e^{-d (t - s)}`
//! against piecewise-linear data exactly per cell, in a form that stays
//! stable when `d * cell` is large (only decayed exponentials are formed).

/// 8-point Gauss-Legendre nodes on [-1, 1] (positive half; rule is symmetric).
const GL8_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Integrate a vector-valued function over a single cell with 8-point Gauss.
pub fn gauss8_cell<F>(a: f64, b: f64, f: &F) -> Vec<f64>
where
    F: Fn(f64) -> Vec<f64>,
{
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc: Option<Vec<f64>> = None;
    for i in 0..4 {
        let (x1, x2) = (mid - half * GL8_NODES[i], mid + half * GL8_NODES[i]);
        let w = GL8_WEIGHTS[i] * half;
        for x in [x1, x2] {
            let v = f(x);
            match acc.as_mut() {
                None => {
                    let mut v0 = v;
                    for e in v0.iter_mut() {
                        *e *= w;
                    }
                    acc = Some(v0);
                }
                Some(s) => {
                    for (si, vi) in s.iter_mut().zip(v.iter()) {
                        *si += w * vi;
                    }
                }
            }
        }
    }
    acc.unwrap_or_default()
}

/// Composite 8-point Gauss over the cells of `mesh` (increasing node list).
pub fn gauss8_mesh<F>(mesh: &[f64], f: &F) -> Vec<f64>
where
    F: Fn(f64) -> Vec<f64>,
{
    assert!(mesh.len() >= 2, "mesh needs at least two nodes");
    let mut acc = gauss8_cell(mesh[0], mesh[1], f);
    for w in mesh.windows(2).skip(1) {
        let cell = gauss8_cell(w[0], w[1], f);
        for (a, c) in acc.iter_mut().zip(cell.iter()) {
            *a += c;
        }
    }
    acc
}

/// Uniform mesh with `n` cells on [a, b].
pub fn uniform_mesh(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 1);
    (0..=n)
        .map(|j| a + (b - a) * (j as f64) / (n as f64))
        .collect()
}

/// Mesh on [0, t] geometrically graded toward `s = t`: nodes
/// `t * (1 - (1 - j/n)^kappa)`. `kappa = 1` gives the uniform mesh.
pub fn graded_mesh(t: f64, kappa: f64, n: usize) -> Vec<f64> {
    assert!(n >= 1 && kappa >= 1.0);
    let mut mesh: Vec<f64> = (0..=n)
        .map(|j| t * (1.0 - (1.0 - j as f64 / n as f64).powf(kappa)))
        .collect();
    mesh[0] = 0.0;
    mesh[n] = t;
    mesh
}

/// Composite Simpson weights for `n + 1` equidistant samples spanning step `h`.
///
/// Falls back to the 3/8 rule on the trailing three cells when the cell count
/// is odd, and to the trapezoid rule for a single cell.
pub fn simpson_weights(n_cells: usize, h: f64) -> Vec<f64> {
    assert!(n_cells >= 1);
    let mut w = vec![0.0; n_cells + 1];
    if n_cells == 1 {
        w[0] = 0.5 * h;
        w[1] = 0.5 * h;
        return w;
    }
    let simpson_cells = if n_cells % 2 == 0 { n_cells } else { n_cells - 3 };
    let mut j = 0;
    while j + 2 <= simpson_cells {
        w[j] += h / 3.0;
        w[j + 1] += 4.0 * h / 3.0;
        w[j + 2] += h / 3.0;
        j += 2;
    }
    if simpson_cells < n_cells {
        // 3/8 rule on the last three cells (n_cells odd and >= 3).
        let b = n_cells - 3;
        w[b] += 3.0 * h / 8.0;
        w[b + 1] += 9.0 * h / 8.0;
        w[b + 2] += 9.0 * h / 8.0;
        w[b + 3] += 3.0 * h / 8.0;
    }
    w
}

/// Trapezoid weights for `n_cells + 1` equidistant samples with step `h`.
pub fn trapezoid_weights(n_cells: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n_cells + 1];
    w[0] = 0.5 * h;
    w[n_cells] = 0.5 * h;
    w
}

/// `phi1(z) = (1 - e^{-z}) / z`, continuous at 0.
pub fn phi1(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        -f64::exp_m1(-z) / z
    }
}

/// `phi2(z) = (e^{-z} - 1 + z) / z^2`, continuous at 0 with value 1/2.
pub fn phi2(z: f64) -> f64 {
    if z < 1e-3 {
        0.5 - z * (1.0 / 6.0 - z * (1.0 / 24.0 - z / 120.0))
    } else {
        (z + f64::exp_m1(-z)) / (z * z)
    }
}

/// Exact integral of `e^{-d (t - s)} * L(s)` over `s in [s0, s1]` where `L`
/// is linear with `L(s0) = f0`, `L(s1) = f1`. Requires `t >= s1 >= s0` and
/// `d >= 0`; stable for arbitrarily large `d * (s1 - s0)`.
pub fn exp_linear_moment(d: f64, t: f64, s0: f64, s1: f64, f0: f64, f1: f64) -> f64 {
    let h = s1 - s0;
    if h == 0.0 {
        return 0.0;
    }
    debug_assert!(h > 0.0 && d >= 0.0 && t >= s1 - 1e-12 * (1.0 + t.abs()));
    let c = d * h;
    let e0 = (-d * (t - s0)).exp();
    if c < 1e-3 {
        // Series for g0 = int_0^1 e^{cu} du and g1 = int_0^1 u e^{cu} du.
        let g0 = 1.0 + c * (0.5 + c * (1.0 / 6.0 + c / 24.0));
        let g1 = 0.5 + c * (1.0 / 3.0 + c * (0.125 + c / 30.0));
        h * e0 * (f0 * g0 + (f1 - f0) * g1)
    } else {
        // e1 >= e0 and both are <= 1; the difference loses at most ~3 digits
        // at the series threshold and is exact when e0 has underflowed.
        let e1 = (-d * (t - s1)).exp();
        let em = e1 - e0;
        let g0 = em / c;
        let g1 = (em * (c - 1.0) + e0 * c) / (c * c);
        h * (f0 * g0 + (f1 - f0) * g1)
    }
}

/// Integral of `(1 - e^{-d (t - s)})/d * L(s)` over `s in [s0, s1]` with
/// linear `L`; continuous limit `int (t-s) L(s) ds` as `d -> 0`.
pub fn exp_complement_linear_moment(d: f64, t: f64, s0: f64, s1: f64, f0: f64, f1: f64) -> f64 {
    let h = s1 - s0;
    if h == 0.0 {
        return 0.0;
    }
    let z = d * (t - s0);
    if z < 1e-4 {
        // series in d; the integrand is then a low-degree polynomial
        let lin = |s: f64| f0 + (f1 - f0) * (s - s0) / h;
        gauss8_cell(s0, s1, &|s: f64| {
            let v = t - s;
            vec![v * (1.0 - d * v / 2.0 + d * d * v * v / 6.0) * lin(s)]
        })[0]
    } else {
        let plain = 0.5 * h * (f0 + f1);
        (plain - exp_linear_moment(d, t, s0, s1, f0, f1)) / d
    }
}

/// Exact integral of `e^{-d s} * L(s)` over `s in [s0, s1]` where `L` is
/// linear with `L(s0) = f0`, `L(s1) = f1`; `d >= 0`, `s1 >= s0 >= 0`.
pub fn exp_decay_linear_moment(d: f64, s0: f64, s1: f64, f0: f64, f1: f64) -> f64 {
    let h = s1 - s0;
    if h == 0.0 {
        return 0.0;
    }
    debug_assert!(h > 0.0 && d >= 0.0 && s0 >= 0.0);
    let c = d * h;
    let e0 = (-d * s0).exp();
    if c < 1e-3 {
        let g0 = 1.0 - c * (0.5 - c * (1.0 / 6.0 - c / 24.0));
        let g1 = 0.5 - c * (1.0 / 3.0 - c * (0.125 - c / 30.0));
        h * e0 * (f0 * g0 + (f1 - f0) * g1)
    } else {
        let ec = (-c).exp();
        let g0 = (1.0 - ec) / c;
        let g1 = (1.0 - (1.0 + c) * ec) / (c * c);
        h * e0 * (f0 * g0 + (f1 - f0) * g1)
    }
}

/// Least-squares line fit through `(x, y)` points; returns `(slope, intercept)`.
pub fn least_squares_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    assert!(n >= 2.0, "need at least two points for a line fit");
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys.iter()) {
        sxx += (x - xm) * (x - xm);
        sxy += (x - xm) * (y - ym);
    }
    let slope = sxy / sxx;
    (slope, ym - slope * xm)
}

/// Log-spaced grid of `n` points between `a` and `b` (both > 0, inclusive).
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(a > 0.0 && b > a && n >= 2);
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
