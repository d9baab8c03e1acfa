//! Quasi-stationary behaviour on the circle (`n = 2`).
//!
//! With `y = (cos θ, sin θ)` the sphere diffusion becomes
//! `dθ = b(θ) dt + ε dW`, `b = ¼ dF̃/dθ`, with generator
//! `L = b ∂θ + (ε²/2) ∂²θ`. On an interval `(a, b)` with absorbing ends, the
//! principal Dirichlet eigenpair `(λ₀, φ)` of `−L` gives the process
//! conditioned never to exit: its drift is `b + ε² (log φ)′`.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{circle_potential, circle_potential_derivative, PayoffMatrix};
use crate::rng::{rng_from_seed, stream_seed};
use crate::sde::fmt_full;
use crate::stationary::{tv_between, ExponentScale, HistogramAccumulator};
use crate::tridiag::Tridiagonal;

/// Minimum number of grid intervals accepted by [`reduce_to_circle`].
pub const MIN_GRID: usize = 64;
/// Minimum number of interior nodes accepted by [`dirichlet_generator`].
pub const MIN_INTERIOR: usize = 16;

/// `F̃` and the drift `b` sampled on `θ_i = a + i h`, `i = 0..=N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleReduction {
    pub matrix: PayoffMatrix,
    pub lo: f64,
    pub hi: f64,
    pub h: f64,
    pub thetas: Vec<f64>,
    pub f_tilde: Vec<f64>,
    pub drift: Vec<f64>,
}

impl CircleReduction {
    pub fn intervals(&self) -> usize {
        self.thetas.len() - 1
    }

    /// Drift at an arbitrary angle, from the closed form.
    pub fn drift_at(&self, theta: f64) -> f64 {
        0.25 * circle_potential_derivative(&self.matrix, theta)
    }
}

pub fn reduce_to_circle(m: &PayoffMatrix, interval: (f64, f64), grid_size: usize) -> Result<CircleReduction> {
    if m.n() != 2 {
        return Err(Error::Unsupported(format!("circle reduction needs n = 2, got n = {}", m.n())));
    }
    let (lo, hi) = interval;
    if !(lo.is_finite() && hi.is_finite() && lo < hi && hi - lo <= std::f64::consts::TAU) {
        return Err(Error::InvalidParameter(format!("degenerate interval ({lo}, {hi})")));
    }
    if grid_size < MIN_GRID {
        return Err(Error::InvalidParameter(format!("grid size must be at least {MIN_GRID}, got {grid_size}")));
    }
    let h = (hi - lo) / grid_size as f64;
    let thetas: Vec<f64> = (0..=grid_size).map(|i| lo + i as f64 * h).collect();
    Ok(CircleReduction {
        matrix: m.clone(),
        lo,
        hi,
        h,
        f_tilde: thetas.iter().map(|&t| circle_potential(m, t)).collect(),
        drift: thetas.iter().map(|&t| 0.25 * circle_potential_derivative(m, t)).collect(),
        thetas,
    })
}

/// Central-difference stencil `(lower, diag, upper)` of `L_h` at every interior node,
/// including the coefficients that couple to the boundary nodes.
pub fn generator_stencil(red: &CircleReduction, eps: f64) -> Result<Vec<[f64; 3]>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let n = red.intervals();
    let d = 0.5 * eps * eps / (red.h * red.h);
    Ok((1..n)
        .map(|i| {
            let c = red.drift[i] / (2.0 * red.h);
            [d - c, -2.0 * d, d + c]
        })
        .collect())
}

/// `L_h` restricted to interior nodes (Dirichlet rows and columns removed).
pub fn dirichlet_generator(red: &CircleReduction, eps: f64) -> Result<Tridiagonal> {
    let st = generator_stencil(red, eps)?;
    if st.len() < MIN_INTERIOR {
        return Err(Error::InvalidParameter(format!(
            "grid too coarse: {} interior nodes, need {MIN_INTERIOR}",
            st.len()
        )));
    }
    Tridiagonal::new(
        st[1..].iter().map(|s| s[0]).collect(),
        st.iter().map(|s| s[1]).collect(),
        st[..st.len() - 1].iter().map(|s| s[2]).collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub lambda0: f64,
    /// On all `N + 1` nodes, zero at both ends, maximum 1.
    pub phi: Vec<f64>,
    pub iterations: usize,
    /// `‖(−L_h)φ − λ₀φ‖∞ / λ₀`.
    pub residual: f64,
}

impl EigenPair {
    /// `theta,phi`.
    pub fn to_csv(&self, red: &CircleReduction) -> String {
        let mut s = String::from("theta,phi\n");
        for (t, p) in red.thetas.iter().zip(&self.phi) {
            s.push_str(&format!("{},{}\n", fmt_full(*t), fmt_full(*p)));
        }
        s
    }

    pub fn argmax(&self) -> usize {
        self.phi
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

const MAX_INVERSE_ITERATIONS: usize = 10_000;

/// Smallest eigenvalue of `−L_h` and its positive eigenvector, by inverse
/// iteration with zero shift. Stops when successive eigenvalue estimates
/// agree to `tol` (relative).
pub fn principal_eigenpair(op: &Tridiagonal, tol: f64) -> Result<EigenPair> {
    let a = op.neg();
    let n = a.dim();
    let mut v = vec![1.0; n];
    let mut lambda = f64::NAN;
    for it in 1..=MAX_INVERSE_ITERATIONS {
        let w = a.solve(&v)?;
        let wmax = w.iter().cloned().fold(0.0f64, |m, x| m.max(x.abs()));
        if !(wmax > 0.0 && wmax.is_finite()) {
            return Err(Error::Numeric("inverse iteration collapsed".into()));
        }
        // v has max-norm 1, so ‖A⁻¹v‖∞ → 1/λ₀.
        let next = 1.0 / wmax;
        v = w.into_iter().map(|x| x / wmax).collect();
        let converged = (next - lambda).abs() <= tol * next.abs();
        lambda = next;
        if converged {
            if v.iter().any(|&x| x <= 0.0) {
                return Err(Error::Numeric("principal eigenvector is not positive".into()));
            }
            let av = a.mul_vec(&v);
            let residual = av.iter().zip(&v).map(|(p, q)| (p - lambda * q).abs()).fold(0.0, f64::max) / lambda;
            let mut phi = Vec::with_capacity(n + 2);
            phi.push(0.0);
            phi.extend_from_slice(&v);
            phi.push(0.0);
            return Ok(EigenPair { lambda0: lambda, phi, iterations: it, residual });
        }
    }
    Err(Error::Numeric(format!("inverse iteration did not converge in {MAX_INVERSE_ITERATIONS} iterations")))
}

/// Mean exit time `u` from `(lo, hi)`: solves `L_h u = −1` with `u = 0` at both ends.
/// Returned on all nodes.
pub fn mean_exit_time_profile(red: &CircleReduction, eps: f64) -> Result<Vec<f64>> {
    let a = dirichlet_generator(red, eps)?.neg();
    let u = a.solve(&vec![1.0; a.dim()])?;
    let mut out = Vec::with_capacity(u.len() + 2);
    out.push(0.0);
    out.extend(u);
    out.push(0.0);
    Ok(out)
}

/// Linear interpolation of nodal values at `theta`.
pub fn interpolate(red: &CircleReduction, values: &[f64], theta: f64) -> f64 {
    let s = ((theta - red.lo) / red.h).clamp(0.0, red.intervals() as f64);
    let i = (s.floor() as usize).min(red.intervals() - 1);
    let w = s - i as f64;
    values[i] * (1.0 - w) + values[i + 1] * w
}

/// Drift of the conditioned process, tabulated for repeated evaluation.
#[derive(Debug, Clone)]
pub struct QDrift {
    red_lo: f64,
    red_hi: f64,
    h: f64,
    eps2: f64,
    matrix: PayoffMatrix,
    /// `(log φ)′` at nodes `2..=N−2`, by central differences.
    dlog: Vec<f64>,
}

impl QDrift {
    pub fn new(red: &CircleReduction, eig: &EigenPair, eps: f64) -> Result<Self> {
        let n = red.intervals();
        if eig.phi.len() != n + 1 {
            return Err(Error::DimensionMismatch { expected: n + 1, got: eig.phi.len() });
        }
        if n < 5 {
            return Err(Error::InvalidParameter("grid too coarse for the conditioned drift".into()));
        }
        let lp: Vec<f64> = eig.phi.iter().map(|p| p.ln()).collect();
        let dlog = (2..=n - 2).map(|i| (lp[i + 1] - lp[i - 1]) / (2.0 * red.h)).collect();
        Ok(QDrift { red_lo: red.lo, red_hi: red.hi, h: red.h, eps2: eps * eps, matrix: red.matrix.clone(), dlog })
    }

    /// `(log φ)′(θ)`. Inside the guard band of two cells at each end the
    /// value at the nearest tabulated node is used.
    pub fn log_phi_slope(&self, theta: f64) -> f64 {
        let s = (theta - self.red_lo) / self.h - 2.0;
        let last = (self.dlog.len() - 1) as f64;
        if s <= 0.0 {
            return self.dlog[0];
        }
        if s >= last {
            return self.dlog[self.dlog.len() - 1];
        }
        let i = s.floor() as usize;
        let w = s - i as f64;
        self.dlog[i] * (1.0 - w) + self.dlog[i + 1] * w
    }

    #[inline]
    pub fn eval(&self, theta: f64) -> f64 {
        0.25 * circle_potential_derivative(&self.matrix, theta) + self.eps2 * self.log_phi_slope(theta)
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta > self.red_lo && theta < self.red_hi
    }
}

/// `b(θ) + ε² (log φ)′(θ)` for `θ` strictly inside the interval.
pub fn qprocess_drift(red: &CircleReduction, eig: &EigenPair, eps: f64, theta: f64) -> Result<f64> {
    let q = QDrift::new(red, eig, eps)?;
    if !q.contains(theta) {
        return Err(Error::InvalidParameter(format!(
            "θ = {theta} is not inside ({}, {})",
            red.lo, red.hi
        )));
    }
    Ok(q.eval(theta))
}

/// Stationary density of the conditioned process on the nodes,
/// `∝ φ² exp(F̃/(c ε²))`, normalized by the trapezoid rule.
pub fn qprocess_density(red: &CircleReduction, eig: &EigenPair, eps: f64, scale: ExponentScale) -> Vec<f64> {
    let c = scale.value() * eps * eps;
    let fmax = red.f_tilde.iter().cloned().fold(f64::MIN, f64::max);
    let raw: Vec<f64> = eig.phi.iter().zip(&red.f_tilde).map(|(p, f)| p * p * ((f - fmax) / c).exp()).collect();
    let z: f64 = raw.windows(2).map(|w| 0.5 * red.h * (w[0] + w[1])).sum();
    raw.into_iter().map(|v| v / z).collect()
}

/// Masses of `bins` equal sub-intervals; `bins` must divide the grid.
pub fn interval_bin_masses(red: &CircleReduction, density: &[f64], bins: usize) -> Result<Vec<f64>> {
    let n = red.intervals();
    if bins == 0 || n % bins != 0 {
        return Err(Error::InvalidParameter(format!("{bins} bins do not divide a grid of {n}")));
    }
    let per = n / bins;
    Ok((0..bins)
        .map(|b| (b * per..(b + 1) * per).map(|i| 0.5 * red.h * (density[i] + density[i + 1])).sum())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QValidationConfig {
    pub dt: f64,
    pub steps: u64,
    pub seeds: u64,
    pub master_seed: u64,
    pub bins: usize,
    pub exit_runs: u64,
    pub exit_dt: f64,
    pub scale: ExponentScale,
    pub max_tv: f64,
    pub max_exit_rel_error: f64,
}

impl Default for QValidationConfig {
    fn default() -> Self {
        QValidationConfig {
            dt: 1e-3,
            steps: 1_000_000,
            seeds: 20,
            master_seed: 0,
            bins: 64,
            exit_runs: 500,
            exit_dt: 1e-3,
            scale: ExponentScale::Balanced,
            max_tv: 0.1,
            max_exit_rel_error: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QProcessReport {
    pub eps: f64,
    pub lambda0: f64,
    pub inverse_lambda0: f64,
    pub eigen_residual: f64,
    /// Conditioned runs that left the interval.
    pub escaped_runs: u64,
    pub total_runs: u64,
    pub tv_distance: f64,
    pub mean_exit_time: f64,
    pub mean_exit_std_err: f64,
    pub exit_rel_error: f64,
    pub failures: Vec<String>,
}

impl QProcessReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks the conditioned process against its eigenpair:
/// (i) every simulated path stays inside the interval,
/// (ii) the pooled histogram matches `φ² · Gibbs` in total variation,
/// (iii) `1/λ₀` matches the Monte Carlo mean exit time of the unconditioned
/// diffusion started at the maximum of `φ`.
pub fn validate_qprocess(red: &CircleReduction, eig: &EigenPair, eps: f64, cfg: &QValidationConfig) -> Result<QProcessReport> {
    if !(cfg.dt > 0.0 && cfg.exit_dt > 0.0) || cfg.seeds == 0 || cfg.exit_runs == 0 || cfg.steps == 0 {
        return Err(Error::InvalidParameter(format!("invalid validation configuration {cfg:?}")));
    }
    let q = QDrift::new(red, eig, eps)?;
    let start = red.thetas[eig.argmax()];
    let sd = eps * cfg.dt.sqrt();

    let runs: Vec<(bool, HistogramAccumulator)> = (0..cfg.seeds)
        .into_par_iter()
        .map(|run| {
            let mut rng = rng_from_seed(stream_seed(cfg.master_seed, run));
            let mut acc = HistogramAccumulator::new(red.lo, red.hi, cfg.bins);
            let mut theta = start;
            for _ in 0..cfg.steps {
                let xi: f64 = StandardNormal.sample(&mut rng);
                theta += q.eval(theta) * cfg.dt + sd * xi;
                if !q.contains(theta) {
                    return (false, acc);
                }
                acc.add(theta);
            }
            (true, acc)
        })
        .collect();
    let escaped = runs.iter().filter(|r| !r.0).count() as u64;
    let mut pooled = HistogramAccumulator::new(red.lo, red.hi, cfg.bins);
    for (_, acc) in &runs {
        pooled.merge(acc);
    }
    let hist = pooled.finish()?;
    let target = interval_bin_masses(red, &qprocess_density(red, eig, eps, cfg.scale), cfg.bins)?;
    let tv = tv_between(&hist.mass, &target);

    let exit_sd = eps * cfg.exit_dt.sqrt();
    let exit_seed = stream_seed(cfg.master_seed, u64::MAX);
    let taus: Vec<f64> = (0..cfg.exit_runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = rng_from_seed(stream_seed(exit_seed, run));
            let mut theta = start;
            let mut k = 0u64;
            while theta > red.lo && theta < red.hi {
                let xi: f64 = StandardNormal.sample(&mut rng);
                theta += red.drift_at(theta) * cfg.exit_dt + exit_sd * xi;
                k += 1;
            }
            k as f64 * cfg.exit_dt
        })
        .collect();
    let k = taus.len() as f64;
    let mean = taus.iter().sum::<f64>() / k;
    let var = taus.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
    let inv = 1.0 / eig.lambda0;
    let rel = (mean - inv).abs() / inv;

    let mut failures = Vec::new();
    if escaped > 0 {
        failures.push(format!("{escaped} of {} conditioned runs left the interval", cfg.seeds));
    }
    if !(tv < cfg.max_tv) {
        failures.push(format!("TV distance {tv:.4} exceeds {}", cfg.max_tv));
    }
    if !(rel < cfg.max_exit_rel_error) {
        failures.push(format!("1/λ₀ = {inv:.4} vs mean exit time {mean:.4}: relative error {rel:.4}"));
    }
    Ok(QProcessReport {
        eps,
        lambda0: eig.lambda0,
        inverse_lambda0: inv,
        eigen_residual: eig.residual,
        escaped_runs: escaped,
        total_runs: cfg.seeds,
        tv_distance: tv,
        mean_exit_time: mean,
        mean_exit_std_err: (var / k).sqrt(),
        exit_rel_error: rel,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{sphere_potential, SpherePoint};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn half() -> PayoffMatrix {
        PayoffMatrix::scaled_identity(2, 0.5).unwrap()
    }

    fn flat() -> PayoffMatrix {
        PayoffMatrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap()
    }

    #[test]
    fn reduction_of_half_identity() {
        let red = reduce_to_circle(&half(), (0.0, FRAC_PI_2), 256).unwrap();
        assert!((red.f_tilde[0] - 0.25).abs() < 1e-15);
        assert!((red.f_tilde[256] - 0.25).abs() < 1e-15);
        assert!((red.f_tilde[128] - 0.125).abs() < 1e-15);
        for i in [0, 128, 256] {
            assert!(red.drift[i].abs() < 1e-15);
        }
        for (t, f) in red.thetas.iter().zip(&red.f_tilde) {
            let direct = sphere_potential(&half(), &SpherePoint::from_angle(*t)).unwrap();
            assert!((f - direct).abs() < 1e-12);
        }
        // Drift against centred differences of F̃/4: O(h²).
        for i in 1..256 {
            let fd = (red.f_tilde[i + 1] - red.f_tilde[i - 1]) / (8.0 * red.h);
            assert!((fd - red.drift[i]).abs() < red.h * red.h);
        }
    }

    #[test]
    fn reduction_rejects_bad_input() {
        assert!(reduce_to_circle(&half(), (1.0, 1.0), 256).is_err());
        assert!(reduce_to_circle(&half(), (0.0, 1.0), 32).is_err());
        assert!(reduce_to_circle(&PayoffMatrix::two_edge(), (0.0, 1.0), 256).is_err());
    }

    #[test]
    fn generator_structure() {
        let red = reduce_to_circle(&half(), (FRAC_PI_4, 3.0 * FRAC_PI_4), 128).unwrap();
        let eps = 0.2;
        for s in generator_stencil(&red, eps).unwrap() {
            assert!((s[0] + s[1] + s[2]).abs() < 1e-9 * s[1].abs());
            assert!(s[0] > 0.0 && s[2] > 0.0, "h|b| < ε² should keep off-diagonals positive");
        }
        let op = dirichlet_generator(&red, eps).unwrap();
        assert_eq!(op.dim(), 127);
        let coarse = CircleReduction {
            thetas: red.thetas[..17].to_vec(),
            f_tilde: red.f_tilde[..17].to_vec(),
            drift: red.drift[..17].to_vec(),
            ..red.clone()
        };
        assert!(dirichlet_generator(&coarse, eps).is_err());
        assert!(generator_stencil(&red, 0.0).is_err());
    }

    #[test]
    fn zero_drift_spectrum() {
        let eps = 0.3;
        let red = reduce_to_circle(&flat(), (0.0, FRAC_PI_2), 1024).unwrap();
        let eig = principal_eigenpair(&dirichlet_generator(&red, eps).unwrap(), 1e-13).unwrap();
        let exact = 2.0 * eps * eps;
        assert!((eig.lambda0 - exact).abs() / exact < 5e-3);
        assert!(eig.residual < 1e-6);
        // Sine profile, unimodal.
        for (t, p) in red.thetas.iter().zip(&eig.phi) {
            assert!((p - (2.0 * t).sin()).abs() < 1e-4);
        }
        let top = eig.argmax();
        assert!(eig.phi[..=top].windows(2).all(|w| w[0] <= w[1]));
        assert!(eig.phi[top..].windows(2).all(|w| w[0] >= w[1]));
        assert_eq!((eig.phi[0], eig.phi[1024]), (0.0, 0.0));
    }

    #[test]
    fn eigenvalue_converges_at_second_order() {
        let eps = 0.3;
        let lam = |n: usize| {
            let red = reduce_to_circle(&half(), (FRAC_PI_4, 3.0 * FRAC_PI_4), n).unwrap();
            principal_eigenpair(&dirichlet_generator(&red, eps).unwrap(), 1e-14).unwrap().lambda0
        };
        let (a, b, c) = (lam(64), lam(128), lam(256));
        let ratio = (a - b) / (b - c);
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn exit_profile_without_drift_is_parabolic() {
        // L u = −1 with L = (ε²/2)∂² gives u = (θ−a)(b−θ)/ε².
        let eps = 0.25;
        let red = reduce_to_circle(&flat(), (0.0, 1.0), 200).unwrap();
        let u = mean_exit_time_profile(&red, eps).unwrap();
        for (t, v) in red.thetas.iter().zip(&u) {
            assert!((v - t * (1.0 - t) / (eps * eps)).abs() < 1e-9);
        }
    }

    #[test]
    fn conditioned_drift_properties() {
        let eps = 0.2;
        let red = reduce_to_circle(&half(), (FRAC_PI_4, 3.0 * FRAC_PI_4), 1024).unwrap();
        let eig = principal_eigenpair(&dirichlet_generator(&red, eps).unwrap(), 1e-13).unwrap();
        let q = QDrift::new(&red, &eig, eps).unwrap();
        let top = red.thetas[eig.argmax()];
        assert!((top - FRAC_PI_2).abs() < 2.0 * red.h);
        assert!(q.log_phi_slope(FRAC_PI_2).abs() < 1e-6);
        // Inward near both ends.
        let near_lo = red.lo + 0.02;
        let near_hi = red.hi - 0.02;
        assert!(q.log_phi_slope(near_lo) > 0.0 && q.log_phi_slope(near_hi) < 0.0);
        assert!(qprocess_drift(&red, &eig, eps, near_lo).unwrap() > red.drift_at(near_lo));
        // Scaling the noise down with φ fixed recovers the bare drift.
        let small = qprocess_drift(&red, &eig, 1e-6, 1.0).unwrap();
        assert!((small - red.drift_at(1.0)).abs() < 1e-9);
        assert!(qprocess_drift(&red, &eig, eps, red.lo).is_err());
        assert!(qprocess_drift(&red, &eig, eps, PI).is_err());
    }

    #[test]
    fn zero_drift_qprocess_density_is_sine_squared() {
        let eps = 0.3;
        let red = reduce_to_circle(&flat(), (0.0, FRAC_PI_2), 512).unwrap();
        let eig = principal_eigenpair(&dirichlet_generator(&red, eps).unwrap(), 1e-13).unwrap();
        let d = qprocess_density(&red, &eig, eps, ExponentScale::Balanced);
        // ∫₀^{π/2} sin²(2θ) dθ = π/4.
        for (t, v) in red.thetas.iter().zip(&d) {
            assert!((v - (2.0 * t).sin().powi(2) / FRAC_PI_4).abs() < 1e-4);
        }
        let masses = interval_bin_masses(&red, &d, 64).unwrap();
        assert!((masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_validation_run() {
        let eps = 0.3;
        let red = reduce_to_circle(&flat(), (0.0, FRAC_PI_2), 512).unwrap();
        let eig = principal_eigenpair(&dirichlet_generator(&red, eps).unwrap(), 1e-13).unwrap();
        let cfg = QValidationConfig { steps: 100_000, seeds: 4, exit_runs: 200, ..Default::default() };
        let rep = validate_qprocess(&red, &eig, eps, &cfg).unwrap();
        assert_eq!(rep.escaped_runs, 0);
        assert!(rep.tv_distance < 0.1, "{rep:?}");
        let again = validate_qprocess(&red, &eig, eps, &cfg).unwrap();
        assert_eq!(rep, again);
    }
}
