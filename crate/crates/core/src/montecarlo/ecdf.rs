use crate::error::{domain, Result};

/// Sorted sample with a mass of `+∞` values (uncrossed paths).
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    values: Vec<f64>,
    n_total: usize,
}

impl EmpiricalCdf {
    /// Infinite entries count towards the defect; NaN is rejected.
    pub fn new(samples: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut values = Vec::new();
        let mut n_total = 0usize;
        for v in samples {
            n_total += 1;
            if v.is_nan() || v == f64::NEG_INFINITY {
                return Err(domain("samples must be finite or +inf"));
            }
            if v.is_finite() {
                values.push(v);
            }
        }
        if n_total == 0 {
            return Err(domain("empty sample"));
        }
        values.sort_unstable_by(f64::total_cmp);
        Ok(Self { values, n_total })
    }

    pub fn len(&self) -> usize {
        self.n_total
    }

    pub fn is_empty(&self) -> bool {
        self.n_total == 0
    }

    pub fn finite_values(&self) -> &[f64] {
        &self.values
    }

    /// Fraction of `+∞` entries.
    pub fn defect(&self) -> f64 {
        (self.n_total - self.values.len()) as f64 / self.n_total as f64
    }

    /// `F(x)`, right-continuous.
    pub fn eval(&self, x: f64) -> f64 {
        if x == f64::INFINITY {
            return self.values.len() as f64 / self.n_total as f64;
        }
        self.values.partition_point(|v| *v <= x) as f64 / self.n_total as f64
    }

    /// `F(x−)`.
    pub fn eval_left(&self, x: f64) -> f64 {
        self.values.partition_point(|v| *v < x) as f64 / self.n_total as f64
    }

    /// Empirical quantile of the finite part, `p ∈ [0, 1]`.
    pub fn finite_quantile(&self, p: f64) -> Option<f64> {
        if self.values.is_empty() {
            return None;
        }
        let i = ((p.clamp(0.0, 1.0) * (self.values.len() - 1) as f64).round()) as usize;
        Some(self.values[i])
    }

    /// `k` points at evenly spaced quantiles of the finite part.
    pub fn quantile_grid(&self, k: usize) -> Vec<f64> {
        let mut g: Vec<f64> = (0..k)
            .filter_map(|i| self.finite_quantile(i as f64 / (k.max(2) - 1) as f64))
            .collect();
        g.dedup();
        g
    }

    /// Distinct jump points.
    fn jumps(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().enumerate().filter(|(i, v)| *i == 0 || self.values[i - 1] != **v).map(|(_, v)| *v)
    }
}

/// Two-sample Kolmogorov distance, exact for samples with ties or atoms.
pub fn ks_distance(a: &EmpiricalCdf, b: &EmpiricalCdf) -> f64 {
    let mut d = (a.defect() - b.defect()).abs();
    for &x in a.finite_values().iter().chain(b.finite_values()) {
        d = d.max((a.eval(x) - b.eval(x)).abs());
    }
    d
}

/// `sup_x |F_n(x) − f(x)|` over every jump of `F_n` (both one-sided limits), the
/// extra `grid` points and `+∞`, where `f(∞)` is read as `f(f64::INFINITY)`.
pub fn sup_distance<F: Fn(f64) -> f64>(e: &EmpiricalCdf, f: F, grid: &[f64]) -> Result<f64> {
    if e.is_empty() {
        return Err(domain("empty sample"));
    }
    let mut d = (e.eval(f64::INFINITY) - f(f64::INFINITY)).abs();
    for v in e.jumps() {
        let fv = f(v);
        d = d.max((e.eval(v) - fv).abs()).max((e.eval_left(v) - fv).abs());
    }
    for &g in grid {
        let fg = f(g);
        d = d.max((e.eval(g) - fg).abs()).max((e.eval_left(g) - fg).abs());
    }
    Ok(d)
}

/// Lower and upper bounds on `sup_x |F_n(x) − f(x)|` for a non-decreasing `f`
/// evaluated only on `grid` and at `+∞`.
///
/// Between consecutive grid points both functions are monotone, so the gap is
/// bounded by the larger of `F_n(g_{j+1}−) − f(g_j)` and `f(g_{j+1}) − F_n(g_j)`.
pub fn sup_distance_bounds<F: Fn(f64) -> f64>(e: &EmpiricalCdf, f: F, grid: &[f64]) -> Result<(f64, f64)> {
    if e.is_empty() || grid.is_empty() {
        return Err(domain("empty sample or grid"));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(domain("grid must be strictly increasing"));
    }
    let fg: Vec<f64> = grid.iter().map(|&g| f(g)).collect();
    let f_inf = f(f64::INFINITY);
    let e_inf = e.eval(f64::INFINITY);
    let mut lower = (e_inf - f_inf).abs();
    for (&g, &v) in grid.iter().zip(&fg) {
        lower = lower.max((e.eval(g) - v).abs()).max((e.eval_left(g) - v).abs());
    }
    let mut upper = lower.max(e.eval_left(grid[0])).max(fg[0]);
    for j in 0..grid.len() - 1 {
        let gap = (e.eval_left(grid[j + 1]) - fg[j]).max(fg[j + 1] - e.eval(grid[j]));
        upper = upper.max(gap);
    }
    let last = grid.len() - 1;
    upper = upper.max(e_inf - fg[last]).max(f_inf - e.eval(grid[last]));
    Ok((lower, upper))
}
