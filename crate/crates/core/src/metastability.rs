//! Basins of attraction, first-exit times and their statistics.
//!
//! A point belongs to the basin of a clique when the noiseless flow started
//! there converges to the clique's characteristic vector. Exit experiments
//! classify the noisy state every `check_stride` steps and stop at the first
//! change of label.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{members_label, CliqueVector};
use crate::potential::{norm, quadratic_form, PayoffMatrix, SimplexPoint};
use crate::rng::{fill_gaussian, rng_from_seed, stream_seed};
use crate::sde::{sqrt_lift, DriftSign, Stepper};
use crate::tolerance::{FLOW_GRAD_TOL, SNAP_TOL};

/// Parameters of the noiseless flow used for basin classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    pub dt: f64,
    pub grad_tol: f64,
    pub max_steps: u64,
    pub tol_snap: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams { dt: 0.5, grad_tol: FLOW_GRAD_TOL, max_steps: 200_000, tol_snap: SNAP_TOL }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasinKind {
    Clique(Vec<usize>),
    Unclassified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinLabel {
    pub kind: BasinKind,
    /// L1 distance from the flow limit to the nearest characteristic vector.
    pub snap_distance: f64,
    /// False when the flow hit its step budget before converging.
    pub converged: bool,
}

impl BasinLabel {
    pub fn same_basin(&self, other: &BasinLabel) -> bool {
        self.kind == other.kind
    }

    /// `0-1` style member list, or `unclassified`.
    pub fn name(&self) -> String {
        match &self.kind {
            BasinKind::Clique(m) => members_label(m),
            BasinKind::Unclassified => "unclassified".into(),
        }
    }
}

/// Flow-limit classifier with reusable buffers.
pub struct BasinClassifier<'a> {
    m: &'a PayoffMatrix,
    cliques: &'a [CliqueVector],
    params: FlowParams,
    stepper: Stepper<'a>,
    y: Vec<f64>,
}

/// Outcome of one classification: index into the clique list, or `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub clique: Option<usize>,
    pub snap_distance: f64,
    pub converged: bool,
}

impl<'a> BasinClassifier<'a> {
    pub fn new(m: &'a PayoffMatrix, cliques: &'a [CliqueVector], params: FlowParams) -> Result<Self> {
        if cliques.is_empty() {
            return Err(Error::InvalidParameter("at least one clique is required".into()));
        }
        if let Some(c) = cliques.iter().find(|c| c.n() != m.n()) {
            return Err(Error::DimensionMismatch { expected: m.n(), got: c.n() });
        }
        if !(params.dt > 0.0 && params.grad_tol > 0.0 && params.tol_snap > 0.0) {
            return Err(Error::InvalidParameter(format!("invalid flow parameters {params:?}")));
        }
        Ok(BasinClassifier {
            m,
            cliques,
            params,
            stepper: Stepper::new(m, params.dt, 0.0, DriftSign::Ascent),
            y: vec![0.0; m.n()],
        })
    }

    /// Classifies the sphere point `y` (any orthant) by its flow limit.
    pub fn classify_sphere(&mut self, y: &[f64]) -> Result<Classification> {
        self.y.copy_from_slice(y);
        let mut converged = false;
        for _ in 0..=self.params.max_steps {
            let g = norm(self.stepper.projected_gradient(&self.y));
            if g < self.params.grad_tol {
                converged = true;
                break;
            }
            self.stepper.advance(&mut self.y, None)?;
        }
        let (best, dist) = self
            .cliques
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let d: f64 = c.point.coords().iter().zip(&self.y).map(|(p, v)| (p - v * v).abs()).sum();
                (i, d)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("cliques nonempty");
        let clique = (converged && dist < self.params.tol_snap).then_some(best);
        Ok(Classification { clique, snap_distance: dist, converged })
    }

    pub fn classify(&mut self, x: &SimplexPoint) -> Result<BasinLabel> {
        if x.dim() != self.m.n() {
            return Err(Error::DimensionMismatch { expected: self.m.n(), got: x.dim() });
        }
        let c = self.classify_sphere(sqrt_lift(x).coords())?;
        Ok(self.label(&c))
    }

    pub fn label(&self, c: &Classification) -> BasinLabel {
        BasinLabel {
            kind: match c.clique {
                Some(i) => BasinKind::Clique(self.cliques[i].members.clone()),
                None => BasinKind::Unclassified,
            },
            snap_distance: c.snap_distance,
            converged: c.converged,
        }
    }
}

/// Basin of `x`: the clique whose characteristic vector lies within
/// `tol_snap` (L1) of the noiseless-flow limit from `√x`, else unclassified.
///
/// Points on a separatrix flow to the saddle they lie on and come back
/// unclassified. For the path graph, the saddle `[1/5, 3/5, 1/5]` is such a point.
pub fn classify_basin(x: &SimplexPoint, m: &PayoffMatrix, cliques: &[CliqueVector], params: FlowParams) -> Result<BasinLabel> {
    BasinClassifier::new(m, cliques, params)?.classify(x)
}

/// Settings shared by exit-time runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitConfig {
    pub dt: f64,
    pub eps: f64,
    pub seed: u64,
    /// Censoring cap.
    pub max_steps: u64,
    pub check_stride: u64,
    pub flow: FlowParams,
}

impl Default for ExitConfig {
    fn default() -> Self {
        ExitConfig {
            dt: crate::sde::DEFAULT_DT,
            eps: 0.1,
            seed: 0,
            max_steps: 10_000_000,
            check_stride: 100,
            flow: FlowParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitTimeSample {
    pub run: u64,
    pub seed: u64,
    pub eps: f64,
    /// Model time `steps · dt` at the first classification outside the start basin.
    pub tau: f64,
    pub steps: u64,
    pub start_label: BasinLabel,
    /// `None` when censored.
    pub end_label: Option<BasinLabel>,
    pub censored: bool,
}

/// Simulates from `√(start.point)` and reports the first check at which the
/// basin label differs from the start's. The resolution is `check_stride · dt`.
pub fn measure_exit_time(
    m: &PayoffMatrix,
    start: &CliqueVector,
    cliques: &[CliqueVector],
    cfg: &ExitConfig,
) -> Result<ExitTimeSample> {
    measure_exit_time_run(m, start, cliques, cfg, 0)
}

fn measure_exit_time_run(
    m: &PayoffMatrix,
    start: &CliqueVector,
    cliques: &[CliqueVector],
    cfg: &ExitConfig,
    run: u64,
) -> Result<ExitTimeSample> {
    if !(cfg.dt > 0.0 && cfg.eps >= 0.0) || cfg.check_stride == 0 || cfg.max_steps == 0 {
        return Err(Error::InvalidParameter(format!("invalid exit configuration {cfg:?}")));
    }
    let mut classifier = BasinClassifier::new(m, cliques, cfg.flow)?;
    let y0 = sqrt_lift(&start.point);
    let first = classifier.classify_sphere(y0.coords())?;
    let start_idx = match first.clique {
        Some(i) if cliques[i].members == start.members => i,
        _ => {
            return Err(Error::InvalidParameter(format!(
                "start clique {} is not a stable equilibrium of the flow",
                start.label()
            )))
        }
    };
    let start_label = classifier.label(&first);

    let n = m.n();
    let mut stepper = Stepper::new(m, cfg.dt, cfg.eps, DriftSign::Ascent);
    let mut rng = rng_from_seed(cfg.seed);
    let mut y = y0.coords().to_vec();
    let mut noise = vec![0.0; n];
    let mut k = 0u64;
    while k < cfg.max_steps {
        let chunk = cfg.check_stride.min(cfg.max_steps - k);
        for _ in 0..chunk {
            if cfg.eps > 0.0 {
                fill_gaussian(&mut rng, &mut noise);
                stepper.advance(&mut y, Some(&noise))?;
            } else {
                stepper.advance(&mut y, None)?;
            }
        }
        k += chunk;
        let c = classifier.classify_sphere(&y)?;
        if c.clique != Some(start_idx) {
            return Ok(ExitTimeSample {
                run,
                seed: cfg.seed,
                eps: cfg.eps,
                tau: k as f64 * cfg.dt,
                steps: k,
                start_label,
                end_label: Some(classifier.label(&c)),
                censored: false,
            });
        }
    }
    Ok(ExitTimeSample {
        run,
        seed: cfg.seed,
        eps: cfg.eps,
        tau: cfg.max_steps as f64 * cfg.dt,
        steps: cfg.max_steps,
        start_label,
        end_label: None,
        censored: true,
    })
}

/// Independent exit-time runs at one noise level. Run `i` uses seed
/// `stream_seed(cfg.seed, i)`; results are ordered by run index.
pub fn exit_time_runs(
    m: &PayoffMatrix,
    start: &CliqueVector,
    cliques: &[CliqueVector],
    cfg: &ExitConfig,
    runs: u64,
) -> Result<Vec<ExitTimeSample>> {
    (0..runs)
        .into_par_iter()
        .map(|run| {
            let run_cfg = ExitConfig { seed: stream_seed(cfg.seed, run), ..*cfg };
            measure_exit_time_run(m, start, cliques, &run_cfg, run)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    /// Mean over uncensored runs; `None` when every run was censored.
    pub mean_tau: Option<f64>,
    pub std_err: Option<f64>,
    /// `ε² log(mean τ)`.
    pub scaled_log_mean: Option<f64>,
    pub samples: usize,
    pub censored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub samples: Vec<ExitTimeSample>,
}

impl SweepResult {
    /// `run,seed,eps,tau,steps,start,end,censored`.
    pub fn samples_csv(&self) -> String {
        samples_csv(&self.samples)
    }
}

pub fn samples_csv(samples: &[ExitTimeSample]) -> String {
    let mut s = String::from("run,seed,eps,tau,steps,start,end,censored\n");
    for x in samples {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            x.run,
            x.seed,
            x.eps,
            crate::sde::fmt_full(x.tau),
            x.steps,
            x.start_label.name(),
            x.end_label.as_ref().map_or_else(String::new, BasinLabel::name),
            x.censored
        ));
    }
    s
}

/// Summary of one noise level.
pub fn summarize(eps: f64, samples: &[ExitTimeSample]) -> SweepRow {
    let taus: Vec<f64> = samples.iter().filter(|s| !s.censored).map(|s| s.tau).collect();
    let censored = samples.len() - taus.len();
    let (mean, se) = if taus.is_empty() {
        (None, None)
    } else {
        let k = taus.len() as f64;
        let mean = taus.iter().sum::<f64>() / k;
        let se = if taus.len() > 1 {
            let var = taus.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (k - 1.0);
            Some((var / k).sqrt())
        } else {
            None
        };
        (Some(mean), se)
    };
    SweepRow {
        eps,
        mean_tau: mean,
        std_err: se,
        scaled_log_mean: mean.map(|t| eps * eps * t.ln()),
        samples: taus.len(),
        censored,
    }
}

/// `runs` exit experiments at each `ε`. Noise level `i` uses master seed
/// `stream_seed(cfg.seed, i)`.
pub fn exit_time_sweep(
    m: &PayoffMatrix,
    start: &CliqueVector,
    cliques: &[CliqueVector],
    eps_list: &[f64],
    runs: u64,
    cfg: &ExitConfig,
) -> Result<SweepResult> {
    if runs == 0 {
        return Err(Error::InvalidParameter("runs must be at least 1".into()));
    }
    if eps_list.is_empty() {
        return Err(Error::InvalidParameter("noise level list is empty".into()));
    }
    let mut rows = Vec::with_capacity(eps_list.len());
    let mut all = Vec::new();
    for (i, &eps) in eps_list.iter().enumerate() {
        let level_cfg = ExitConfig { eps, seed: stream_seed(cfg.seed, i as u64), ..*cfg };
        let samples = exit_time_runs(m, start, cliques, &level_cfg, runs)?;
        rows.push(summarize(eps, &samples));
        all.extend(samples);
    }
    Ok(SweepResult { rows, samples: all })
}

/// `½ (F(x*) − F(z))`, the limit of `ε² log E τ` for barrier `F(x*) − F(z)`.
pub fn theoretical_exit_rate(f_star: f64, f_saddle: f64) -> Result<f64> {
    if f_star < f_saddle {
        return Err(Error::InvalidParameter(format!(
            "negative barrier: F* = {f_star} < F_saddle = {f_saddle}"
        )));
    }
    Ok(0.5 * (f_star - f_saddle))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatrixEstimate {
    pub value: f64,
    pub point: SimplexPoint,
}

/// Largest `F` over interior grid nodes of the simplex (spacing
/// `1/resolution`) that have an interior lattice neighbour with a different
/// basin label. `Ok(None)` means every node shares one label. Supports `n ≤ 3`.
///
/// Faces of the simplex are invariant under the noiseless flow, so boundary
/// nodes never reach interior maxima; they are left out of the grid.
pub fn estimate_separatrix_max(
    m: &PayoffMatrix,
    cliques: &[CliqueVector],
    resolution: usize,
    params: FlowParams,
) -> Result<Option<SeparatrixEstimate>> {
    let n = m.n();
    if n > 3 {
        return Err(Error::Unsupported(format!("separatrix grid search needs n <= 3, got {n}")));
    }
    if resolution < 2 {
        return Err(Error::InvalidParameter("resolution must be at least 2".into()));
    }
    BasinClassifier::new(m, cliques, params)?;
    let r = resolution;
    let nodes: Vec<[usize; 3]> = match n {
        2 => (1..r).map(|i| [i, r - i, 0]).collect(),
        _ => (1..r).flat_map(|i| (1..(r - i)).map(move |j| [i, j, r - i - j])).collect(),
    };
    let point = |node: &[usize; 3]| -> Vec<f64> { node[..n].iter().map(|&c| c as f64 / r as f64).collect() };
    let labels: Vec<Option<usize>> = nodes
        .par_iter()
        .map_init(
            || BasinClassifier::new(m, cliques, params).expect("validated"),
            |cls, node| {
                let y: Vec<f64> = point(node).iter().map(|v| v.sqrt()).collect();
                cls.classify_sphere(&y).map(|c| c.clique)
            },
        )
        .collect::<Result<_>>()?;

    let index = |node: [usize; 3]| -> Option<usize> {
        if node[..n].iter().any(|&c| c == 0) {
            return None;
        }
        match n {
            2 => Some(node[0] - 1),
            _ => {
                // Position of (i, j) in the triangular enumeration above.
                let (i, j) = (node[0], node[1]);
                let before: usize = (1..i).map(|a| r - a - 1).sum();
                Some(before + j - 1)
            }
        }
    };
    let offsets: &[[isize; 3]] = match n {
        2 => &[[1, -1, 0], [-1, 1, 0]],
        _ => &[[1, -1, 0], [-1, 1, 0], [1, 0, -1], [-1, 0, 1], [0, 1, -1], [0, -1, 1]],
    };
    let mut best: Option<(f64, usize)> = None;
    for (k, node) in nodes.iter().enumerate() {
        let boundary = offsets.iter().any(|off| {
            let nb: Option<[usize; 3]> = (0..3)
                .map(|d| node[d].checked_add_signed(off[d]).filter(|&c| c <= r))
                .collect::<Option<Vec<_>>>()
                .map(|v| [v[0], v[1], v[2]]);
            nb.and_then(index).is_some_and(|nk| labels[nk] != labels[k])
        });
        if boundary {
            let f = quadratic_form(m, &point(node));
            if best.is_none_or(|(bf, _)| f > bf) {
                best = Some((f, k));
            }
        }
    }
    Ok(best.map(|(value, k)| SeparatrixEstimate { value, point: SimplexPoint::from_vec_unchecked(point(&nodes[k])) }))
}

/// Empirical exit-time distribution and its log-linear fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitStats {
    pub taus: Vec<f64>,
    pub mean: f64,
    pub rate: f64,
    /// `(t, fraction of samples > t)` at each sorted sample.
    pub ccdf: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r2_loglinear: f64,
    /// Set when the samples have no spread and the fit is meaningless.
    pub degenerate: bool,
}

impl ExitStats {
    /// `t,ccdf`.
    pub fn ccdf_csv(&self) -> String {
        let mut s = String::from("t,ccdf\n");
        for (t, c) in &self.ccdf {
            s.push_str(&format!("{},{}\n", crate::sde::fmt_full(*t), crate::sde::fmt_full(*c)));
        }
        s
    }
}

/// Minimum number of samples accepted by [`ccdf_and_fit`].
pub const MIN_FIT_SAMPLES: usize = 10;

/// Empirical CCDF of the uncensored samples and a least-squares line through
/// `(t, log CCDF)`, dropping the final point where the CCDF is zero.
pub fn ccdf_and_fit(samples: &[ExitTimeSample]) -> Result<ExitStats> {
    let taus: Vec<f64> = samples.iter().filter(|s| !s.censored).map(|s| s.tau).collect();
    ccdf_fit_taus(&taus)
}

pub fn ccdf_fit_taus(taus: &[f64]) -> Result<ExitStats> {
    if taus.len() < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples { need: MIN_FIT_SAMPLES, have: taus.len() });
    }
    let mut sorted = taus.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let ccdf: Vec<(f64, f64)> = sorted.iter().enumerate().map(|(i, &t)| (t, (n - (i + 1) as f64) / n)).collect();
    let mean = sorted.iter().sum::<f64>() / n;

    let pts: Vec<(f64, f64)> = ccdf.iter().filter(|(_, c)| *c > 0.0).map(|&(t, c)| (t, c.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let degenerate = !(sxx > 1e-12 * mx.abs().max(1.0).powi(2) * k) || !(syy > 0.0);
    let (slope, intercept, r2) = if degenerate {
        (0.0, my, 0.0)
    } else {
        let slope = sxy / sxx;
        (slope, my - slope * mx, (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0))
    };
    Ok(ExitStats {
        taus: taus.to_vec(),
        mean,
        rate: 1.0 / mean,
        ccdf,
        slope,
        intercept,
        r2_loglinear: r2,
        degenerate,
    })
}
