//! Euler–Maruyama discretization of the sphere Langevin equation
//! `dy = ¼ ∇*F̃(y) dt + ε (I − yyᵀ) dW`, followed by renormalization onto the
//! sphere, and the squared map back to the simplex.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{norm, projected_gradient_into, PayoffMatrix, SimplexPoint, SpherePoint};
use crate::rng::{fill_gaussian, rng_from_seed};

/// Default time step.
pub const DEFAULT_DT: f64 = 0.05;
/// Default recording stride for long runs.
pub const DEFAULT_STRIDE: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DriftSign {
    /// `+Δ/4 ∇*F̃`: gradient ascent on `F̃`, which drives the process to clique maxima.
    #[default]
    Ascent,
    /// `−Δ/4 ∇*F̃`: descent, which drives the process away from clique maxima.
    Descent,
}

impl DriftSign {
    fn factor(self) -> f64 {
        match self {
            DriftSign::Ascent => 1.0,
            DriftSign::Descent => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub eps: f64,
    pub seed: u64,
    pub max_steps: u64,
    #[serde(default)]
    pub drift: DriftSign,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { dt: DEFAULT_DT, eps: 0.0, seed: 0, max_steps: 1_000_000, drift: DriftSign::Ascent }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("eps must be nonnegative, got {}", self.eps)));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParameter("max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// Reusable buffers for repeated steps on one matrix.
pub struct Stepper<'a> {
    m: &'a PayoffMatrix,
    dt: f64,
    eps: f64,
    drift: f64,
    scratch: Vec<f64>,
    grad: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(m: &'a PayoffMatrix, dt: f64, eps: f64, drift: DriftSign) -> Self {
        let n = m.n();
        Stepper { m, dt, eps, drift: drift.factor(), scratch: vec![0.0; n], grad: vec![0.0; n] }
    }

    /// Projected gradient at `y`; valid until the next call.
    pub fn projected_gradient(&mut self, y: &[f64]) -> &[f64] {
        projected_gradient_into(self.m, y, &mut self.scratch, &mut self.grad);
        &self.grad
    }

    /// One step in place. `noise` holds the raw `N(0,1)` draws, or is `None` for the noiseless flow.
    pub fn advance(&mut self, y: &mut [f64], noise: Option<&[f64]>) -> Result<()> {
        projected_gradient_into(self.m, y, &mut self.scratch, &mut self.grad);
        self.advance_with_gradient(y, noise)
    }

    /// As [`advance`](Self::advance) but reuses the gradient from the last
    /// [`projected_gradient`](Self::projected_gradient) call at this same `y`.
    fn advance_with_gradient(&mut self, y: &mut [f64], noise: Option<&[f64]>) -> Result<()> {
        let h = self.drift * self.dt / 4.0;
        match noise {
            Some(xi) if self.eps > 0.0 => {
                // Tangential projection uses the pre-step y.
                let radial: f64 = xi.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
                let s = self.eps * self.dt.sqrt();
                for ((yi, gi), xi) in y.iter_mut().zip(&self.grad).zip(xi) {
                    let y0 = *yi;
                    *yi = y0 + h * gi + s * (xi - radial * y0);
                }
            }
            _ => {
                for (yi, gi) in y.iter_mut().zip(&self.grad) {
                    *yi += h * gi;
                }
            }
        }
        let r = norm(y);
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Numeric(format!("renormalization failed: pre-step norm {r}")));
        }
        y.iter_mut().for_each(|v| *v /= r);
        Ok(())
    }
}

/// One scheme step: `ŷ = y + (dt/4)∇*F̃(y) + ε√dt (I − yyᵀ) ξ`, then `ŷ/‖ŷ‖`.
pub fn step(y: &SpherePoint, m: &PayoffMatrix, dt: f64, eps: f64, noise: &[f64]) -> Result<SpherePoint> {
    step_signed(y, m, dt, eps, noise, DriftSign::Ascent)
}

pub fn step_signed(
    y: &SpherePoint,
    m: &PayoffMatrix,
    dt: f64,
    eps: f64,
    noise: &[f64],
    drift: DriftSign,
) -> Result<SpherePoint> {
    if y.dim() != m.n() {
        return Err(Error::DimensionMismatch { expected: m.n(), got: y.dim() });
    }
    if noise.len() != m.n() {
        return Err(Error::DimensionMismatch { expected: m.n(), got: noise.len() });
    }
    let mut out = y.coords().to_vec();
    Stepper::new(m, dt, eps, drift).advance(&mut out, Some(noise))?;
    Ok(SpherePoint::from_vec_unchecked(out))
}

/// `x_i = y_i²`.
pub fn to_simplex(y: &SpherePoint) -> SimplexPoint {
    SimplexPoint::from_vec_unchecked(y.coords().iter().map(|v| v * v).collect())
}

/// `y_i = √x_i`, in the positive orthant.
pub fn sqrt_lift(x: &SimplexPoint) -> SpherePoint {
    SpherePoint::from_vec_unchecked(x.coords().iter().map(|v| v.sqrt()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// Called with `(step, y, x)` at step 0 and after every step.
pub trait Observer {
    fn observe(&mut self, step: u64, y: &[f64], x: &[f64]) -> Control;
}

impl<F: FnMut(u64, &[f64], &[f64]) -> Control> Observer for F {
    fn observe(&mut self, step: u64, y: &[f64], x: &[f64]) -> Control {
        self(step, y, x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub final_state: SpherePoint,
    /// Number of steps taken.
    pub steps: u64,
    pub stopped_early: bool,
}

/// Iterates the scheme from `y0` for `cfg.max_steps` steps or until the observer stops it.
pub fn simulate<O: Observer + ?Sized>(
    y0: &SpherePoint,
    m: &PayoffMatrix,
    cfg: &IntegratorConfig,
    observer: &mut O,
) -> Result<RunSummary> {
    cfg.validate()?;
    let n = m.n();
    if y0.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y0.dim() });
    }
    let mut rng = rng_from_seed(cfg.seed);
    let mut stepper = Stepper::new(m, cfg.dt, cfg.eps, cfg.drift);
    let mut y = y0.coords().to_vec();
    let mut x: Vec<f64> = y.iter().map(|v| v * v).collect();
    let mut noise = vec![0.0; n];
    let noisy = cfg.eps > 0.0;

    if observer.observe(0, &y, &x) == Control::Stop {
        return Ok(RunSummary { final_state: y0.clone(), steps: 0, stopped_early: true });
    }
    for k in 1..=cfg.max_steps {
        if noisy {
            fill_gaussian(&mut rng, &mut noise);
            stepper.advance(&mut y, Some(&noise))?;
        } else {
            stepper.advance(&mut y, None)?;
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi * yi;
        }
        if observer.observe(k, &y, &x) == Control::Stop {
            return Ok(RunSummary { final_state: SpherePoint::from_vec_unchecked(y), steps: k, stopped_early: true });
        }
    }
    Ok(RunSummary { final_state: SpherePoint::from_vec_unchecked(y), steps: cfg.max_steps, stopped_early: false })
}

/// Recorded trajectory; `times[k] = step_k · dt`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<SimplexPoint>,
    pub sphere_states: Option<Vec<SpherePoint>>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV with header `t,x_1,...,x_n`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(0, SimplexPoint::dim);
        let mut s = String::from("t");
        for i in 1..=n {
            write!(s, ",x_{i}").unwrap();
        }
        s.push('\n');
        for (t, x) in self.times.iter().zip(&self.states) {
            s.push_str(&fmt_full(*t));
            for v in x.coords() {
                s.push(',');
                s.push_str(&fmt_full(*v));
            }
            s.push('\n');
        }
        s
    }
}

/// Formats with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_full(v: f64) -> String {
    format!("{v:.16e}")
}

/// Records every `stride`-th step (including step 0).
pub struct StrideRecorder {
    stride: u64,
    dt: f64,
    keep_sphere: bool,
    record: TrajectoryRecord,
}

impl StrideRecorder {
    pub fn new(stride: u64, dt: f64, keep_sphere: bool) -> Self {
        StrideRecorder {
            stride: stride.max(1),
            dt,
            keep_sphere,
            record: TrajectoryRecord { sphere_states: keep_sphere.then(Vec::new), ..Default::default() },
        }
    }

    pub fn into_record(self) -> TrajectoryRecord {
        self.record
    }
}

impl Observer for StrideRecorder {
    fn observe(&mut self, step: u64, y: &[f64], x: &[f64]) -> Control {
        if step % self.stride == 0 {
            self.record.times.push(step as f64 * self.dt);
            self.record.states.push(SimplexPoint::from_vec_unchecked(x.to_vec()));
            if self.keep_sphere {
                if let Some(s) = self.record.sphere_states.as_mut() {
                    s.push(SpherePoint::from_vec_unchecked(y.to_vec()));
                }
            }
        }
        Control::Continue
    }
}

/// Runs [`simulate`] with a [`StrideRecorder`].
pub fn simulate_trajectory(
    y0: &SpherePoint,
    m: &PayoffMatrix,
    cfg: &IntegratorConfig,
    stride: u64,
    keep_sphere: bool,
) -> Result<TrajectoryRecord> {
    let mut rec = StrideRecorder::new(stride, cfg.dt, keep_sphere);
    simulate(y0, m, cfg, &mut rec)?;
    Ok(rec.into_record())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult {
    pub point: SpherePoint,
    pub converged: bool,
    pub steps: u64,
    pub grad_norm: f64,
}

/// Noiseless ascent from `y0` until `‖∇*F̃‖ < grad_tol` or `max_steps` steps.
pub fn deterministic_flow(
    y0: &SpherePoint,
    m: &PayoffMatrix,
    dt: f64,
    grad_tol: f64,
    max_steps: u64,
) -> Result<FlowResult> {
    if !(grad_tol > 0.0) {
        return Err(Error::InvalidParameter(format!("grad_tol must be positive, got {grad_tol}")));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if y0.dim() != m.n() {
        return Err(Error::DimensionMismatch { expected: m.n(), got: y0.dim() });
    }
    let mut stepper = Stepper::new(m, dt, 0.0, DriftSign::Ascent);
    let mut y = y0.coords().to_vec();
    let mut steps = 0;
    loop {
        let g = norm(stepper.projected_gradient(&y));
        if g < grad_tol || steps >= max_steps {
            return Ok(FlowResult {
                point: SpherePoint::from_vec_unchecked(y),
                converged: g < grad_tol,
                steps,
                grad_norm: g,
            });
        }
        stepper.advance_with_gradient(&mut y, None)?;
        steps += 1;
    }
}
