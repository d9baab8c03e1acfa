//! Gibbs stationary densities of the sphere diffusion and their validation on
//! the circle (`n = 2`).
//!
//! For drift `¼∇F̃` and noise `ε`, detailed balance gives the density
//! `exp(F̃/(2ε²))` with respect to surface measure. The exponent scale is a
//! parameter; `8` gives the steeper alternative.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{
    circle_potential, circle_potential_derivative, quadratic_form, sphere_potential, PayoffMatrix, SimplexPoint,
    SpherePoint,
};
use crate::sde::{fmt_full, simulate, Control, IntegratorConfig, TrajectoryRecord};
use crate::tridiag::Tridiagonal;

/// Denominator `c` in the Gibbs exponent `F̃/(c ε²)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(into = "u8", try_from = "u8")]
pub enum ExponentScale {
    /// `c = 2`, from detailed balance of drift `¼∇F̃` against noise `ε`.
    #[default]
    Balanced,
    /// `c = 8`.
    Steep,
}

impl ExponentScale {
    pub const ALL: [ExponentScale; 2] = [ExponentScale::Balanced, ExponentScale::Steep];

    pub fn value(self) -> f64 {
        match self {
            ExponentScale::Balanced => 2.0,
            ExponentScale::Steep => 8.0,
        }
    }
}

impl From<ExponentScale> for u8 {
    fn from(s: ExponentScale) -> u8 {
        s.value() as u8
    }
}

impl TryFrom<u8> for ExponentScale {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            2 => Ok(ExponentScale::Balanced),
            8 => Ok(ExponentScale::Steep),
            _ => Err(Error::InvalidParameter(format!("exponent scale must be 2 or 8, got {v}"))),
        }
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    Ok(())
}

/// Unnormalized log-density `F̃(y)/(c ε²)` on the sphere.
pub fn gibbs_log_density_sphere(m: &PayoffMatrix, eps: f64, y: &SpherePoint, scale: ExponentScale) -> Result<f64> {
    check_eps(eps)?;
    Ok(sphere_potential(m, y)? / (scale.value() * eps * eps))
}

/// Unnormalized log-density `−½ Σ log x_m + F(x)/(c ε²)` on the simplex.
/// Returns `+∞` on the boundary.
pub fn gibbs_log_density_simplex(m: &PayoffMatrix, eps: f64, x: &SimplexPoint, scale: ExponentScale) -> Result<f64> {
    check_eps(eps)?;
    if x.dim() != m.n() {
        return Err(Error::DimensionMismatch { expected: m.n(), got: x.dim() });
    }
    if x.coords().iter().any(|&v| v <= 0.0) {
        return Ok(f64::INFINITY);
    }
    let jac: f64 = x.coords().iter().map(|v| v.ln()).sum();
    Ok(-0.5 * jac + quadratic_form(m, x.coords()) / (scale.value() * eps * eps))
}

/// Density on a uniform periodic grid `θ_i = i·2π/N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityOnCircle {
    pub thetas: Vec<f64>,
    pub values: Vec<f64>,
    pub normalized: bool,
}

impl DensityOnCircle {
    pub fn spacing(&self) -> f64 {
        TAU / self.values.len() as f64
    }

    /// Periodic trapezoid rule.
    pub fn integral(&self) -> f64 {
        self.spacing() * self.values.iter().sum::<f64>()
    }

    fn normalize(&mut self) {
        let z = self.integral();
        self.values.iter_mut().for_each(|v| *v /= z);
        self.normalized = true;
    }

    /// Mass of each of `bins` equal arcs of `[0, 2π)`, by the trapezoid rule on
    /// the piecewise-linear interpolant. `bins` must divide the grid size.
    pub fn bin_masses(&self, bins: usize) -> Result<Vec<f64>> {
        let n = self.values.len();
        if bins == 0 || n % bins != 0 {
            return Err(Error::InvalidParameter(format!("{bins} bins do not divide a grid of {n}")));
        }
        let per = n / bins;
        let h = self.spacing();
        Ok((0..bins)
            .map(|b| {
                (b * per..(b + 1) * per)
                    .map(|i| 0.5 * h * (self.values[i] + self.values[(i + 1) % n]))
                    .sum()
            })
            .collect())
    }

    /// `theta,density`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("theta,density\n");
        for (t, v) in self.thetas.iter().zip(&self.values) {
            s.push_str(&format!("{},{}\n", fmt_full(*t), fmt_full(*v)));
        }
        s
    }
}

fn check_circle(m: &PayoffMatrix, grid_size: usize) -> Result<()> {
    if m.n() != 2 {
        return Err(Error::Unsupported(format!("circle densities need n = 2, got n = {}", m.n())));
    }
    if grid_size < 8 {
        return Err(Error::InvalidParameter(format!("grid size {grid_size} is too small")));
    }
    Ok(())
}

fn circle_grid(grid_size: usize) -> Vec<f64> {
    let h = TAU / grid_size as f64;
    (0..grid_size).map(|i| i as f64 * h).collect()
}

/// Closed-form normalized Gibbs density `exp(F̃(θ)/(c ε²))/Z` on the circle.
pub fn circle_gibbs_density(m: &PayoffMatrix, eps: f64, grid_size: usize, scale: ExponentScale) -> Result<DensityOnCircle> {
    check_circle(m, grid_size)?;
    check_eps(eps)?;
    let thetas = circle_grid(grid_size);
    let c = scale.value() * eps * eps;
    let fmax = thetas.iter().map(|&t| circle_potential(m, t)).fold(f64::MIN, f64::max);
    let values = thetas.iter().map(|&t| ((circle_potential(m, t) - fmax) / c).exp()).collect();
    let mut d = DensityOnCircle { thetas, values, normalized: false };
    d.normalize();
    Ok(d)
}

/// Stationary Fokker–Planck solution for `dθ = ¼F̃′(θ)dt + ε dW` on the
/// periodic grid.
///
/// The flux `J = b p − (ε²/2) p′` is discretized at cell faces with the
/// drift evaluated there and `p` averaged across the face. Stationarity
/// makes the face fluxes equal; the zero-flux solution is obtained by fixing
/// `p_0 = 1`, dropping the redundant balance at node 0 and solving the
/// remaining tridiagonal system.
pub fn circle_stationary_oracle(m: &PayoffMatrix, eps: f64, grid_size: usize) -> Result<DensityOnCircle> {
    check_circle(m, grid_size)?;
    check_eps(eps)?;
    let n = grid_size;
    let h = TAU / n as f64;
    let diff = 0.5 * eps * eps / h;
    // face_drift[i] is b at θ_{i+½}.
    let face_drift: Vec<f64> = (0..n).map(|i| 0.25 * circle_potential_derivative(m, (i as f64 + 0.5) * h)).collect();
    // Row i: −(b⁻/2 + D/h) p_{i−1} + (b⁺/2 − b⁻/2 + 2D/h) p_i + (b⁺/2 − D/h) p_{i+1} = 0.
    let k = n - 1;
    let mut lower = Vec::with_capacity(k - 1);
    let mut diag = Vec::with_capacity(k);
    let mut upper = Vec::with_capacity(k - 1);
    let mut rhs = vec![0.0; k];
    for i in 1..n {
        let bp = face_drift[i];
        let bm = face_drift[i - 1];
        let a_lo = -(0.5 * bm + diff);
        let a_di = 0.5 * bp - 0.5 * bm + 2.0 * diff;
        let a_up = 0.5 * bp - diff;
        diag.push(a_di);
        if i == 1 {
            rhs[0] -= a_lo;
        } else {
            lower.push(a_lo);
        }
        if i == n - 1 {
            rhs[k - 1] -= a_up;
        } else {
            upper.push(a_up);
        }
    }
    let sol = Tridiagonal::new(lower, diag, upper)?
        .solve(&rhs)
        .map_err(|e| Error::Numeric(format!("{e}; try a finer grid")))?;
    let mut values = Vec::with_capacity(n);
    values.push(1.0);
    values.extend(sol);
    if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Numeric("non-positive stationary density; try a finer grid".into()));
    }
    let mut d = DensityOnCircle { thetas: circle_grid(n), values, normalized: false };
    d.normalize();
    Ok(d)
}

/// Normalized histogram of angles in `[0, 2π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub mass: Vec<f64>,
    pub count: u64,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.mass.len()
    }

    /// `bin_left,bin_right,mass`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_left,bin_right,mass\n");
        for (i, m) in self.mass.iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", fmt_full(self.edges[i]), fmt_full(self.edges[i + 1]), fmt_full(*m)));
        }
        s
    }
}

/// Streaming counter of angles on `[lo, hi)`.
#[derive(Debug, Clone)]
pub struct HistogramAccumulator {
    lo: f64,
    hi: f64,
    counts: Vec<u64>,
    total: u64,
}

impl HistogramAccumulator {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        HistogramAccumulator { lo, hi, counts: vec![0; bins.max(1)], total: 0 }
    }

    pub fn circle(bins: usize) -> Self {
        Self::new(0.0, TAU, bins)
    }

    /// Values outside `[lo, hi)` are ignored.
    #[inline]
    pub fn add(&mut self, v: f64) {
        if v >= self.lo && v < self.hi {
            let bins = self.counts.len();
            let b = ((v - self.lo) / (self.hi - self.lo) * bins as f64) as usize;
            self.counts[b.min(bins - 1)] += 1;
            self.total += 1;
        }
    }

    pub fn merge(&mut self, other: &HistogramAccumulator) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
    }

    pub fn finish(&self) -> Result<Histogram> {
        if self.total == 0 {
            return Err(Error::InvalidParameter("histogram is empty".into()));
        }
        let bins = self.counts.len();
        let w = (self.hi - self.lo) / bins as f64;
        Ok(Histogram {
            edges: (0..=bins).map(|i| self.lo + i as f64 * w).collect(),
            mass: self.counts.iter().map(|&c| c as f64 / self.total as f64).collect(),
            count: self.total,
        })
    }
}

/// Histogram of `atan2(y₁, y₀)` over the recorded sphere states of an `n = 2` run.
pub fn empirical_density(traj: &TrajectoryRecord, bins: usize) -> Result<Histogram> {
    let states = traj
        .sphere_states
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("trajectory has no sphere states".into()))?;
    if states.is_empty() {
        return Err(Error::InvalidParameter("trajectory is empty".into()));
    }
    if states[0].dim() != 2 {
        return Err(Error::Unsupported(format!("angle histograms need n = 2, got n = {}", states[0].dim())));
    }
    let mut acc = HistogramAccumulator::circle(bins);
    for y in states {
        acc.add(y.angle());
    }
    acc.finish()
}

/// `½ Σ |p − q|` between a histogram and the bin masses of a circle density.
pub fn tv_distance(h: &Histogram, d: &DensityOnCircle) -> Result<f64> {
    let q = d.bin_masses(h.bins())?;
    Ok(tv_between(&h.mass, &q))
}

pub fn tv_between(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Largest pointwise relative deviation between two densities on the same grid.
pub fn max_relative_error(a: &DensityOnCircle, b: &DensityOnCircle) -> f64 {
    a.values.iter().zip(&b.values).map(|(x, y)| ((x - y) / y).abs()).fold(0.0, f64::max)
}

/// Settings for [`validate_gibbs_circle`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GibbsValidationConfig {
    pub eps: f64,
    pub dt: f64,
    pub steps: u64,
    pub seed: u64,
    pub bins: usize,
    pub grid_size: usize,
}

impl Default for GibbsValidationConfig {
    fn default() -> Self {
        GibbsValidationConfig { eps: 0.3, dt: 0.01, steps: 5_000_000, seed: 0, bins: 64, grid_size: 2048 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleComparison {
    pub scale: ExponentScale,
    /// Max relative deviation of the Fokker–Planck oracle from the closed form.
    pub oracle_rel_error: f64,
    /// TV distance of the simulated histogram from the closed form.
    pub histogram_tv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsReport {
    pub config: GibbsValidationConfig,
    /// TV distance between the simulated histogram and the Fokker–Planck oracle.
    pub tv_oracle: f64,
    pub comparisons: Vec<ScaleComparison>,
    pub scale_by_oracle: ExponentScale,
    pub scale_by_histogram: ExponentScale,
    pub histogram: Histogram,
}

impl GibbsReport {
    pub fn consistent(&self) -> bool {
        self.scale_by_oracle == self.scale_by_histogram
    }
}

/// Long-run angle histogram of the sphere scheme at `n = 2`, compared with the
/// Fokker–Planck oracle and with the closed-form Gibbs density at each exponent scale.
pub fn validate_gibbs_circle(m: &PayoffMatrix, cfg: &GibbsValidationConfig) -> Result<GibbsReport> {
    check_circle(m, cfg.grid_size)?;
    let oracle = circle_stationary_oracle(m, cfg.eps, cfg.grid_size)?;
    let sim_cfg = IntegratorConfig { dt: cfg.dt, eps: cfg.eps, seed: cfg.seed, max_steps: cfg.steps, ..Default::default() };
    let mut acc = HistogramAccumulator::circle(cfg.bins);
    let mut obs = |k: u64, y: &[f64], _: &[f64]| {
        if k > 0 {
            acc.add(y[1].atan2(y[0]).rem_euclid(TAU));
        }
        Control::Continue
    };
    simulate(&SpherePoint::from_angle(0.0), m, &sim_cfg, &mut obs)?;
    let histogram = acc.finish()?;
    let tv_oracle = tv_distance(&histogram, &oracle)?;
    let comparisons = ExponentScale::ALL
        .iter()
        .map(|&scale| {
            let closed = circle_gibbs_density(m, cfg.eps, cfg.grid_size, scale)?;
            Ok(ScaleComparison {
                scale,
                oracle_rel_error: max_relative_error(&oracle, &closed),
                histogram_tv: tv_distance(&histogram, &closed)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pick = |key: fn(&ScaleComparison) -> f64| {
        comparisons.iter().min_by(|a, b| key(a).total_cmp(&key(b))).map(|c| c.scale).expect("two scales")
    };
    Ok(GibbsReport {
        config: *cfg,
        tv_oracle,
        scale_by_oracle: pick(|c| c.oracle_rel_error),
        scale_by_histogram: pick(|c| c.histogram_tv),
        comparisons,
        histogram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn half() -> PayoffMatrix {
        PayoffMatrix::scaled_identity(2, 0.5).unwrap()
    }

    #[test]
    fn symmetric_maxima_share_density() {
        let m = PayoffMatrix::two_edge();
        let s = 0.5f64.sqrt();
        let a = SpherePoint::new(vec![s, s, 0.0]).unwrap();
        let b = SpherePoint::new(vec![0.0, s, s]).unwrap();
        for scale in ExponentScale::ALL {
            let la = gibbs_log_density_sphere(&m, 0.1, &a, scale).unwrap();
            let lb = gibbs_log_density_sphere(&m, 0.1, &b, scale).unwrap();
            assert!((la - lb).abs() < 1e-12);
        }
        assert!(gibbs_log_density_sphere(&m, 0.0, &a, ExponentScale::Balanced).is_err());
    }

    #[test]
    fn density_ratio_depends_only_on_potential_gap() {
        let m = PayoffMatrix::two_edge();
        let y1 = SpherePoint::normalize(vec![0.3, 0.9, 0.2]).unwrap();
        let y2 = SpherePoint::normalize(vec![0.7, 0.1, 0.5]).unwrap();
        let eps = 0.2;
        let gap = sphere_potential(&m, &y1).unwrap() - sphere_potential(&m, &y2).unwrap();
        let d = gibbs_log_density_sphere(&m, eps, &y1, ExponentScale::Balanced).unwrap()
            - gibbs_log_density_sphere(&m, eps, &y2, ExponentScale::Balanced).unwrap();
        assert!((d - gap / (2.0 * eps * eps)).abs() < 1e-12);
    }

    #[test]
    fn circle_maxima_at_axes() {
        let d = circle_gibbs_density(&half(), 0.3, 1024, ExponentScale::Balanced).unwrap();
        let peak = d.values.iter().cloned().fold(f64::MIN, f64::max);
        for k in 0..4 {
            let idx = k * 256;
            assert!((d.values[idx] - peak).abs() < 1e-12, "θ = {}", d.thetas[idx]);
        }
        assert!(d.values[128] < peak);
        assert!((FRAC_PI_2 - d.thetas[256]).abs() < 1e-12);
    }

    #[test]
    fn simplex_density_jacobian() {
        let m = PayoffMatrix::two_edge();
        let eps = 0.15;
        let y = SpherePoint::normalize(vec![0.4, 0.8, 0.3]).unwrap();
        let x = crate::sde::to_simplex(&y);
        for scale in ExponentScale::ALL {
            let ls = gibbs_log_density_sphere(&m, eps, &y, scale).unwrap();
            let lx = gibbs_log_density_simplex(&m, eps, &x, scale).unwrap();
            let jac: f64 = y.coords().iter().map(|v| (v * v).ln()).sum();
            assert!((lx - (ls - 0.5 * jac)).abs() < 1e-12);
        }
        let edge = SimplexPoint::new(vec![0.5, 0.5, 0.0]).unwrap();
        assert_eq!(gibbs_log_density_simplex(&m, eps, &edge, ExponentScale::Balanced).unwrap(), f64::INFINITY);
    }

    #[test]
    fn simplex_density_uniform_vs_clique() {
        let m = PayoffMatrix::two_edge();
        let eps = 0.1;
        let third = 1.0 / 3.0;
        let u = SimplexPoint::new(vec![third; 3]).unwrap();
        let near = SimplexPoint::new(vec![0.49, 0.49, 0.02]).unwrap();
        let lu = gibbs_log_density_simplex(&m, eps, &u, ExponentScale::Balanced).unwrap();
        let ln = gibbs_log_density_simplex(&m, eps, &near, ExponentScale::Balanced).unwrap();
        let f_near = quadratic_form(&m, near.coords());
        let expected = (11.0 / 36.0 - f_near) / (2.0 * eps * eps) - 0.5 * (3.0 * third.ln())
            + 0.5 * (2.0 * 0.49f64.ln() + 0.02f64.ln());
        assert!((lu - ln - expected).abs() < 1e-12);
    }

    #[test]
    fn concentration_as_noise_vanishes() {
        let m = PayoffMatrix::two_edge();
        let top = SimplexPoint::new(vec![0.499, 0.499, 0.002]).unwrap();
        let other = SimplexPoint::new(vec![0.2, 0.6, 0.2]).unwrap();
        let ratio = |eps: f64| {
            gibbs_log_density_simplex(&m, eps, &top, ExponentScale::Balanced).unwrap()
                - gibbs_log_density_simplex(&m, eps, &other, ExponentScale::Balanced).unwrap()
        };
        assert!(ratio(0.01) > ratio(0.05) && ratio(0.05) > ratio(0.1));
        assert!(ratio(0.005) > 100.0);
    }

    #[test]
    fn oracle_without_drift_is_uniform() {
        let ones = PayoffMatrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        let d = circle_stationary_oracle(&ones, 0.3, 256).unwrap();
        for v in &d.values {
            assert!((v - 1.0 / TAU).abs() < 1e-12);
        }
        assert!((d.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_matches_closed_form_with_balanced_scale() {
        let d = circle_stationary_oracle(&half(), 0.3, 2048).unwrap();
        assert!((d.integral() - 1.0).abs() < 1e-8);
        let closed = circle_gibbs_density(&half(), 0.3, 2048, ExponentScale::Balanced).unwrap();
        assert!(max_relative_error(&d, &closed) < 1e-4);
        let steep = circle_gibbs_density(&half(), 0.3, 2048, ExponentScale::Steep).unwrap();
        assert!(max_relative_error(&d, &steep) > 0.1);
    }

    #[test]
    fn tv_extremes() {
        let d = circle_gibbs_density(&half(), 0.3, 1024, ExponentScale::Balanced).unwrap();
        let q = d.bin_masses(64).unwrap();
        let h = Histogram { edges: (0..=64).map(|i| i as f64 * TAU / 64.0).collect(), mass: q, count: 1 };
        assert!(tv_distance(&h, &d).unwrap() < 1e-15);

        let sharp = circle_gibbs_density(&half(), 0.02, 1024, ExponentScale::Balanced).unwrap();
        let uniform = Histogram { edges: h.edges.clone(), mass: vec![1.0 / 64.0; 64], count: 64 };
        assert!(tv_distance(&uniform, &sharp).unwrap() > 0.8);
        assert!(tv_distance(&uniform, &d).unwrap() < 1.0);
        assert!(d.bin_masses(7).is_err());
    }

    #[test]
    fn empirical_density_requires_sphere_states() {
        let traj = TrajectoryRecord::default();
        assert!(empirical_density(&traj, 8).is_err());
        let y = SpherePoint::from_angle(PI + 0.1);
        let traj = TrajectoryRecord {
            times: vec![0.0],
            states: vec![crate::sde::to_simplex(&y)],
            sphere_states: Some(vec![y]),
        };
        let h = empirical_density(&traj, 8).unwrap();
        assert_eq!(h.mass[4], 1.0);
        assert!(h.to_csv().starts_with("bin_left,bin_right,mass\n"));
    }

    #[test]
    fn non_circle_inputs_are_unsupported() {
        let m = PayoffMatrix::two_edge();
        assert!(matches!(circle_stationary_oracle(&m, 0.3, 64), Err(Error::Unsupported(_))));
        assert!(matches!(
            validate_gibbs_circle(&m, &GibbsValidationConfig::default()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn scale_serializes_as_number() {
        assert_eq!(serde_json::to_string(&ExponentScale::Steep).unwrap(), "8");
        assert_eq!(serde_json::from_str::<ExponentScale>("2").unwrap(), ExponentScale::Balanced);
        assert!(serde_json::from_str::<ExponentScale>("4").is_err());
    }
}
