//! Experiment configuration and command runners behind the `repsphere` binary.
//!
//! A config is a flat JSON object; every key is optional. Keys left unset are
//! filled by [`ExperimentConfig::resolve`] with per-command defaults, and the
//! resolved config is written to `config.json` next to the outputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    bomze_lower_bound, clique_potential, exit_bound, exit_bound_consistent, gnp, gnp_clique_estimate, gnp_exit_bound,
    maximal_clique_vectors, maximal_cliques, members_label, payoff_from_graph, plant_first_k, CliqueVector, Graph,
    DEFAULT_CLIQUE_CAP,
};
use crate::metastability::{
    ccdf_and_fit, estimate_separatrix_max, exit_time_sweep, theoretical_exit_rate, BasinClassifier, ExitConfig,
    FlowParams, SweepRow,
};
use crate::potential::{dot, potential, PayoffMatrix, SimplexPoint};
use crate::qprocess::{dirichlet_generator, principal_eigenpair, qprocess_density, reduce_to_circle, QValidationConfig};
use crate::rng::stream_seed;
use crate::sde::{fmt_full, simulate, sqrt_lift, Control, DriftSign, IntegratorConfig, StrideRecorder};
use crate::stationary::{circle_gibbs_density, circle_stationary_oracle, validate_gibbs_circle, ExponentScale, GibbsValidationConfig};
use crate::tolerance::{FLOW_GRAD_TOL, SNAP_TOL};

/// Planted-clique mass at or above which a run counts as concentrated.
pub const PLANTED_MASS_THRESHOLD: f64 = 0.9;
/// TV bound between the simulated angle histogram and the stationary oracle.
pub const STATIONARY_MAX_TV: f64 = 0.05;
const EIGEN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Simulate,
    ExitSweep,
    Stationary,
    Qprocess,
    Bounds,
    Cliques,
    GenGraph,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::ExitSweep => "exit-sweep",
            Experiment::Stationary => "stationary",
            Experiment::Qprocess => "qprocess",
            Experiment::Bounds => "bounds",
            Experiment::Cliques => "cliques",
            Experiment::GenGraph => "gen-graph",
        }
    }
}

/// Where the payoff matrix comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphSource {
    /// Path `0 – 1 – 2`.
    TwoEdge,
    /// `n` isolated vertices, so `M = ½I`.
    Edgeless,
    /// `G(n, p)` drawn with `graph_seed`.
    Gnp,
    /// Edge list (`i j` per line) or graph JSON at `graph_file`.
    File,
    /// Symmetric matrix given inline in `matrix`.
    Matrix,
}

/// Flat experiment configuration. `None` means "use the command default".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    pub graph: Option<GraphSource>,
    pub matrix: Option<Vec<Vec<f64>>>,
    pub graph_file: Option<PathBuf>,
    pub n: Option<usize>,
    pub p: f64,
    pub graph_seed: u64,
    /// Plant a clique on the first `plant` vertices; 0 plants nothing.
    pub plant: usize,

    pub dt: Option<f64>,
    pub eps: Option<f64>,
    pub eps_list: Vec<f64>,
    /// Steps per trajectory (simulate, stationary, qprocess).
    pub steps: Option<u64>,
    /// Censoring cap for exit runs.
    pub max_steps: u64,
    pub seed: Option<u64>,
    pub drift: DriftSign,
    pub runs: Option<u64>,
    pub check_stride: u64,
    /// Recording stride for trajectory output.
    pub stride: u64,
    /// Initial simplex point for `simulate`; the barycenter by default.
    pub start: Option<Vec<f64>>,
    /// Starting clique for exit runs; the first maximal clique by default.
    pub start_clique: Option<Vec<usize>>,

    pub flow_dt: f64,
    pub grad_tol: f64,
    pub flow_max_steps: u64,
    pub tol_snap: f64,
    pub clique_cap: usize,

    pub bins: usize,
    pub grid_size: Option<usize>,
    pub scale: ExponentScale,
    /// Absorbing interval `[a, b]` in angle for `qprocess`.
    pub interval: Option<[f64; 2]>,
    pub exit_runs: u64,
    pub exit_dt: f64,

    /// Separatrix grid resolution for `bounds`.
    pub resolution: usize,
    /// Saddle value used by `bounds` instead of a grid search.
    pub saddle: Option<f64>,

    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let flow = FlowParams::default();
        ExperimentConfig {
            experiment: None,
            graph: None,
            matrix: None,
            graph_file: None,
            n: None,
            p: 0.25,
            graph_seed: 1,
            plant: 0,
            dt: None,
            eps: None,
            eps_list: vec![0.10, 0.09, 0.08, 0.07],
            steps: None,
            max_steps: 10_000_000,
            seed: None,
            drift: DriftSign::Ascent,
            runs: None,
            check_stride: 100,
            stride: 100,
            start: None,
            start_clique: None,
            flow_dt: flow.dt,
            grad_tol: FLOW_GRAD_TOL,
            flow_max_steps: flow.max_steps,
            tol_snap: SNAP_TOL,
            clique_cap: DEFAULT_CLIQUE_CAP,
            bins: 64,
            grid_size: None,
            scale: ExponentScale::Balanced,
            interval: None,
            exit_runs: 500,
            exit_dt: 1e-3,
            resolution: 400,
            saddle: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Fills every command-dependent default. Requires a seed.
    pub fn resolve(&self, exp: Experiment) -> Result<Self> {
        let mut c = self.clone();
        c.experiment = Some(exp);
        if c.seed.is_none() {
            return Err(Error::InvalidParameter("a seed is required".into()));
        }
        let circle = matches!(exp, Experiment::Stationary | Experiment::Qprocess);
        let graph = *c.graph.get_or_insert(match exp {
            Experiment::Stationary | Experiment::Qprocess => GraphSource::Edgeless,
            Experiment::GenGraph => GraphSource::Gnp,
            _ => GraphSource::TwoEdge,
        });
        if c.n.is_none() {
            c.n = match graph {
                GraphSource::Edgeless if circle => Some(2),
                GraphSource::Edgeless | GraphSource::Gnp => Some(100),
                _ => None,
            };
        }
        let (dt, eps, steps, runs, grid) = match exp {
            Experiment::Stationary => (0.01, 0.3, 5_000_000, 1, 2048),
            Experiment::Qprocess => (1e-3, 0.15, 1_000_000, 20, 1024),
            Experiment::ExitSweep => (0.05, 0.1, 0, 200, 0),
            _ => (0.05, 0.05, 10_000, 1, 0),
        };
        c.dt.get_or_insert(dt);
        c.eps.get_or_insert(eps);
        if steps > 0 {
            c.steps.get_or_insert(steps);
        }
        c.runs.get_or_insert(runs);
        if grid > 0 {
            c.grid_size.get_or_insert(grid);
        }
        if exp == Experiment::Qprocess {
            use std::f64::consts::FRAC_PI_4;
            c.interval.get_or_insert([FRAC_PI_4, 3.0 * FRAC_PI_4]);
        }
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad(format!("dt must be positive, got {dt}"));
            }
        }
        if let Some(eps) = self.eps {
            if !(eps >= 0.0 && eps.is_finite()) {
                return bad(format!("eps must be nonnegative, got {eps}"));
            }
        }
        if self.runs == Some(0) {
            return bad("runs must be at least 1".into());
        }
        if self.stride == 0 || self.check_stride == 0 {
            return bad("strides must be at least 1".into());
        }
        if self.experiment == Some(Experiment::ExitSweep) {
            if self.eps_list.is_empty() {
                return bad("eps_list is empty".into());
            }
            if let Some(e) = self.eps_list.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
                return bad(format!("eps_list entries must be positive, got {e}"));
            }
        }
        Ok(())
    }

    fn flow(&self) -> FlowParams {
        FlowParams { dt: self.flow_dt, grad_tol: self.grad_tol, max_steps: self.flow_max_steps, tol_snap: self.tol_snap }
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

/// Payoff matrix together with the graph it came from, when there is one.
#[derive(Debug, Clone)]
pub struct Problem {
    pub matrix: PayoffMatrix,
    pub graph: Option<Graph>,
}

impl Problem {
    pub fn clique_vectors(&self, cap: usize) -> Result<Vec<CliqueVector>> {
        match &self.graph {
            Some(g) => maximal_clique_vectors(g, cap),
            None => Err(Error::Unsupported("cliques need a graph-derived payoff matrix (A + ½I)".into())),
        }
    }
}

/// Reads `M` as `A + ½I` when it has that form.
fn graph_of_matrix(m: &PayoffMatrix) -> Option<Graph> {
    let n = m.n();
    let mut edges = Vec::new();
    for i in 0..n {
        if m.get(i, i) != 0.5 {
            return None;
        }
        for j in i + 1..n {
            match m.get(i, j) {
                v if v == 1.0 => edges.push((i, j)),
                v if v == 0.0 => {}
                _ => return None,
            }
        }
    }
    Graph::from_edges(n, edges).ok()
}

pub fn build_problem(c: &ExperimentConfig) -> Result<Problem> {
    let need_n = || c.n.ok_or_else(|| Error::InvalidParameter("n is required for this graph source".into()));
    let graph = match c.graph.unwrap_or(GraphSource::TwoEdge) {
        GraphSource::TwoEdge => Some(Graph::path(3)?),
        GraphSource::Edgeless => Some(Graph::empty(need_n()?)?),
        GraphSource::Gnp => Some(gnp(need_n()?, c.p, c.graph_seed)?),
        GraphSource::File => {
            let path = c.graph_file.as_ref().ok_or_else(|| Error::InvalidParameter("graph_file is not set".into()))?;
            let text = fs::read_to_string(path)?;
            if path.extension().is_some_and(|e| e == "json") {
                Some(serde_json::from_str(&text).map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })?)
            } else {
                Some(Graph::parse_edge_list(&text, c.n)?)
            }
        }
        GraphSource::Matrix => {
            let rows = c.matrix.as_ref().ok_or_else(|| Error::InvalidParameter("matrix is not set".into()))?;
            let m = PayoffMatrix::from_rows(rows)?;
            let mut g = graph_of_matrix(&m);
            if c.plant > 0 {
                g = Some(plant_first_k(g.as_ref().ok_or_else(|| {
                    Error::Unsupported("planting needs a graph-derived payoff matrix".into())
                })?, c.plant)?);
                let g = g.as_ref().unwrap();
                return Ok(Problem { matrix: payoff_from_graph(g)?, graph: Some(g.clone()) });
            }
            return Ok(Problem { matrix: m, graph: g });
        }
    };
    let mut g = graph.expect("graph sources produce a graph");
    if c.plant > 0 {
        g = plant_first_k(&g, c.plant)?;
    }
    Ok(Problem { matrix: payoff_from_graph(&g)?, graph: Some(g) })
}

/// Files written by a command and whether its built-in checks passed.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub files: Vec<PathBuf>,
    pub passed: bool,
    pub message: String,
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Writer { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn put(&mut self, name: &str, contents: &str) -> Result<()> {
        let p = self.dir.join(name);
        fs::write(&p, contents)?;
        self.files.push(p);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(v)?;
        s.push('\n');
        self.put(name, &s)
    }

    fn done(self, passed: bool, message: String) -> CommandOutput {
        CommandOutput { files: self.files, passed, message }
    }
}

/// Resolves the config for `exp`, writes `config.json`, and runs the command.
pub fn run(exp: Experiment, cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let c = cfg.resolve(exp)?;
    let mut w = Writer::new(&c.out_dir)?;
    w.put("config.json", &c.to_json())?;
    match exp {
        Experiment::Simulate => cmd_simulate(&c, w),
        Experiment::ExitSweep => cmd_exit_sweep(&c, w),
        Experiment::Stationary => cmd_stationary(&c, w),
        Experiment::Qprocess => cmd_qprocess(&c, w),
        Experiment::Bounds => cmd_bounds(&c, w),
        Experiment::Cliques => cmd_cliques(&c, w),
        Experiment::GenGraph => cmd_gen_graph(&c, w),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFinal {
    pub run: u64,
    pub seed: u64,
    pub final_x: Vec<f64>,
    pub f_final: f64,
    pub f_min: f64,
    pub f_max: f64,
    /// Basin of the final state; `None` without a graph.
    pub label: Option<String>,
    pub planted_mass: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub n: usize,
    pub steps: u64,
    pub dt: f64,
    pub eps: f64,
    pub planted: Option<Vec<usize>>,
    /// Fraction of runs whose final planted mass is at least [`PLANTED_MASS_THRESHOLD`].
    pub planted_concentrated_fraction: Option<f64>,
    pub runs: Vec<RunFinal>,
}

fn cmd_simulate(c: &ExperimentConfig, mut w: Writer) -> Result<CommandOutput> {
    use rayon::prelude::*;
    let prob = build_problem(c)?;
    let m = &prob.matrix;
    let n = m.n();
    let x0 = match &c.start {
        Some(v) => SimplexPoint::new(v.clone())?,
        None => SimplexPoint::uniform(n),
    };
    if x0.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x0.dim() });
    }
    let y0 = sqrt_lift(&x0);
    let cliques = prob.graph.as_ref().map(|g| maximal_clique_vectors(g, c.clique_cap)).transpose()?;
    let planted: Option<Vec<usize>> = prob.graph.as_ref().and_then(|g| g.planted().map(<[usize]>::to_vec));
    let steps = c.steps.unwrap_or(0);
    let runs = c.runs.unwrap_or(1);
    let master = c.seed();

    let results: Vec<Result<(RunFinal, Option<String>)>> = (0..runs)
        .into_par_iter()
        .map(|run| {
            let seed = stream_seed(master, run);
            let icfg = IntegratorConfig { dt: c.dt.unwrap(), eps: c.eps.unwrap(), seed, max_steps: steps, drift: c.drift };
            let mut rec = (run == 0).then(|| StrideRecorder::new(c.stride, icfg.dt, false));
            let (mut f_min, mut f_max) = (f64::INFINITY, f64::NEG_INFINITY);
            let mut mx = vec![0.0; n];
            let mut obs = |k: u64, y: &[f64], x: &[f64]| {
                m.mul_vec_into(x, &mut mx);
                let f = 0.5 * dot(x, &mx);
                f_min = f_min.min(f);
                f_max = f_max.max(f);
                if let Some(r) = rec.as_mut() {
                    crate::sde::Observer::observe(r, k, y, x);
                }
                Control::Continue
            };
            let summary = simulate(&y0, m, &icfg, &mut obs)?;
            let xf: Vec<f64> = summary.final_state.coords().iter().map(|v| v * v).collect();
            let label = match &cliques {
                Some(cl) => {
                    let mut clf = BasinClassifier::new(m, cl, c.flow())?;
                    let cls = clf.classify_sphere(summary.final_state.coords())?;
                    Some(clf.label(&cls).name())
                }
                None => None,
            };
            let planted_mass = planted.as_ref().map(|p| p.iter().map(|&i| xf[i]).sum());
            let fin = RunFinal {
                run,
                seed,
                f_final: potential(m, &SimplexPoint::from_vec_unchecked(xf.clone()))?,
                final_x: xf,
                f_min,
                f_max,
                label,
                planted_mass,
            };
            Ok((fin, rec.map(|r| r.into_record().to_csv())))
        })
        .collect();
    let mut finals = Vec::with_capacity(results.len());
    for r in results {
        let (fin, csv) = r?;
        if let Some(csv) = csv {
            w.put("trajectory.csv", &csv)?;
        }
        finals.push(fin);
    }
    let concentrated = planted.as_ref().map(|_| {
        finals.iter().filter(|f| f.planted_mass.is_some_and(|p| p >= PLANTED_MASS_THRESHOLD)).count() as f64
            / finals.len() as f64
    });
    let summary = SimulateSummary {
        n,
        steps,
        dt: c.dt.unwrap(),
        eps: c.eps.unwrap(),
        planted,
        planted_concentrated_fraction: concentrated,
        runs: finals,
    };
    w.json("summary.json", &summary)?;
    let msg = match (&summary.runs[0].label, concentrated) {
        (_, Some(frac)) => format!("planted mass >= {PLANTED_MASS_THRESHOLD} in {:.0}% of runs", 100.0 * frac),
        (Some(l), None) => format!("final basin {l}"),
        (None, None) => "done".into(),
    };
    Ok(w.done(true, msg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelFit {
    pub eps: f64,
    pub mean: f64,
    pub rate: f64,
    pub slope: f64,
    pub r2_loglinear: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub start: String,
    pub runs: u64,
    pub dt: f64,
    pub rows: Vec<SweepRow>,
    /// Exponential fit per level; `None` with too few uncensored samples.
    pub fits: Vec<Option<LevelFit>>,
}

fn start_clique(c: &ExperimentConfig, prob: &Problem, cliques: &[CliqueVector]) -> Result<CliqueVector> {
    match &c.start_clique {
        Some(members) => {
            let g = prob.graph.as_ref().ok_or_else(|| Error::Unsupported("start_clique needs a graph".into()))?;
            let mut s = members.clone();
            s.sort_unstable();
            let cv = g.clique_vector(&s)?;
            if !cliques.iter().any(|q| q.members == cv.members) {
                return Err(Error::InvalidParameter(format!("{} is not a maximal clique", members_label(&s))));
            }
            Ok(cv)
        }
        None => cliques.first().cloned().ok_or_else(|| Error::InvalidGraph("graph has no cliques".into())),
    }
}

fn cmd_exit_sweep(c: &ExperimentConfig, mut w: Writer) -> Result<CommandOutput> {
    let prob = build_problem(c)?;
    let cliques = prob.clique_vectors(c.clique_cap)?;
    let start = start_clique(c, &prob, &cliques)?;
    let runs = c.runs.unwrap();
    let ecfg = ExitConfig {
        dt: c.dt.unwrap(),
        eps: c.eps_list[0],
        seed: c.seed(),
        max_steps: c.max_steps,
        check_stride: c.check_stride,
        flow: c.flow(),
    };
    let sweep = exit_time_sweep(&prob.matrix, &start, &cliques, &c.eps_list, runs, &ecfg)?;
    w.put("samples.csv", &sweep.samples_csv())?;

    // `ccdf.csv` holds the first level; with several levels each also gets `ccdf_eps<ε>.csv`.
    let mut fits = Vec::new();
    for (i, &eps) in c.eps_list.iter().enumerate() {
        let level: Vec<_> = sweep.samples.iter().filter(|s| s.eps == eps).cloned().collect();
        match ccdf_and_fit(&level) {
            Ok(st) => {
                let csv = st.ccdf_csv();
                if i == 0 {
                    w.put("ccdf.csv", &csv)?;
                }
                if c.eps_list.len() > 1 {
                    w.put(&format!("ccdf_eps{eps}.csv"), &csv)?;
                }
                fits.push(Some(LevelFit {
                    eps,
                    mean: st.mean,
                    rate: st.rate,
                    slope: st.slope,
                    r2_loglinear: st.r2_loglinear,
                    degenerate: st.degenerate,
                }));
            }
            Err(Error::TooFewSamples { .. }) => fits.push(None),
            Err(e) => return Err(e),
        }
    }
    let report = SweepReport { start: start.label(), runs, dt: ecfg.dt, rows: sweep.rows, fits };
    w.json("sweep.json", &report)?;
    let censored: usize = report.rows.iter().map(|r| r.censored).sum();
    Ok(w.done(true, format!("{} levels, {censored} censored runs", report.rows.len())))
}

fn require_circle(m: &PayoffMatrix, what: &str) -> Result<()> {
    if m.n() != 2 {
        return Err(Error::Unsupported(format!("{what} validation needs n = 2, got n = {}", m.n())));
    }
    Ok(())
}

fn cmd_stationary(c: &ExperimentConfig, mut w: Writer) -> Result<CommandOutput> {
    let prob = build_problem(c)?;
    require_circle(&prob.matrix, "stationary")?;
    let gcfg = GibbsValidationConfig {
        eps: c.eps.unwrap(),
        dt: c.dt.unwrap(),
        steps: c.steps.unwrap(),
        seed: c.seed(),
        bins: c.bins,
        grid_size: c.grid_size.unwrap(),
    };
    let report = validate_gibbs_circle(&prob.matrix, &gcfg)?;
    w.put("histogram.csv", &report.histogram.to_csv())?;
    w.put("oracle.csv", &circle_stationary_oracle(&prob.matrix, gcfg.eps, gcfg.grid_size)?.to_csv())?;
    w.put("gibbs.csv", &circle_gibbs_density(&prob.matrix, gcfg.eps, gcfg.grid_size, c.scale)?.to_csv())?;
    w.json("report.json", &report)?;
    let passed = report.tv_oracle < STATIONARY_MAX_TV && report.consistent();
    let msg = format!(
        "TV to oracle {:.4}; exponent scale {} (oracle) / {} (histogram)",
        report.tv_oracle,
        report.scale_by_oracle.value(),
        report.scale_by_histogram.value()
    );
    Ok(w.done(passed, msg))
}

fn cmd_qprocess(c: &ExperimentConfig, mut w: Writer) -> Result<CommandOutput> {
    let prob = build_problem(c)?;
    require_circle(&prob.matrix, "Q-process")?;
    let eps = c.eps.unwrap();
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter("eps must be positive".into()));
    }
    let [a, b] = c.interval.unwrap();
    let red = reduce_to_circle(&prob.matrix, (a, b), c.grid_size.unwrap())?;
    let eig = principal_eigenpair(&dirichlet_generator(&red, eps)?, EIGEN_TOL)?;
    w.put("eigenpair.csv", &eig.to_csv(&red))?;
    let dens = qprocess_density(&red, &eig, eps, c.scale);
    let mut s = String::from("theta,density\n");
    for (t, d) in red.thetas.iter().zip(&dens) {
        s.push_str(&format!("{},{}\n", fmt_full(*t), fmt_full(*d)));
    }
    w.put("qdensity.csv", &s)?;
    let vcfg = QValidationConfig {
        dt: c.dt.unwrap(),
        steps: c.steps.unwrap(),
        seeds: c.runs.unwrap(),
        master_seed: c.seed(),
        bins: c.bins,
        exit_runs: c.exit_runs,
        exit_dt: c.exit_dt,
        scale: c.scale,
        ..QValidationConfig::default()
    };
    let report = crate::qprocess::validate_qprocess(&red, &eig, eps, &vcfg)?;
    w.json("report.json", &report)?;
    let msg = if report.passed() {
        format!("λ₀ = {:.6}, all checks passed", report.lambda0)
    } else {
        report.failures.join("; ")
    };
    Ok(w.done(report.passed(), msg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnpBounds {
    pub n: usize,
    pub p: f64,
    pub clique_estimate: usize,
    pub exit_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleInfo {
    pub value: f64,
    /// `None` when the value was supplied in the config.
    pub point: Option<SimplexPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub n: usize,
    pub edges: usize,
    pub maximal_cliques: usize,
    pub max_clique_size: usize,
    pub clique_potential: f64,
    pub bomze_lower_bound: f64,
    pub exit_bound: f64,
    pub exit_bound_consistent: f64,
    pub gnp: Option<GnpBounds>,
    pub start: String,
    pub f_start: f64,
    pub saddle: Option<SaddleInfo>,
    pub theoretical_exit_rate: Option<f64>,
}

fn cmd_bounds(c: &ExperimentConfig, mut w: Writer) -> Result<CommandOutput> {
    let prob = build_problem(c)?;
    let g = prob.graph.as_ref().ok_or_else(|| Error::Unsupported("bounds need a graph".into()))?;
    let cliques = maximal_clique_vectors(g, c.clique_cap)?;
    let n = g.n();
    let k = cliques.iter().map(CliqueVector::size).max().unwrap_or(1);
    let start = start_clique(c, &prob, &cliques)?;
    let f_start = clique_potential(start.size())?;
    let saddle = match c.saddle {
        Some(v) => Some(SaddleInfo { value: v, point: None }),
        None if n <= 3 => estimate_separatrix_max(&prob.matrix, &cliques, c.resolution, c.flow())?
            .map(|e| SaddleInfo { value: e.value, point: Some(e.point) }),
        None => None,
    };
    let gnp_info = if c.graph == Some(GraphSource::Gnp) {
        let n = c.n.unwrap();
        Some(GnpBounds { n, p: c.p, clique_estimate: gnp_clique_estimate(n, c.p)?, exit_bound: gnp_exit_bound(n, c.p)? })
    } else {
        None
    };
    let report = BoundsReport {
        n,
        edges: g.edge_count(),
        maximal_cliques: cliques.len(),
        max_clique_size: k,
        clique_potential: clique_potential(k)?,
        bomze_lower_bound: bomze_lower_bound(&prob.matrix)?,
        exit_bound: exit_bound(n, k)?,
        exit_bound_consistent: exit_bound_consistent(n, k)?,
        gnp: gnp_info,
        start: start.label(),
        f_start,
        theoretical_exit_rate: saddle.as_ref().map(|s| theoretical_exit_rate(f_start, s.value)).transpose()?,
        saddle,
    };
    w.json("bounds.json", &report)?;
    let msg = match report.theoretical_exit_rate {
        Some(r) => format!("max clique {k}, theoretical exit rate {r}"),
        None => format!("max clique {k}"),
    };
    Ok(w.done(true, msg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CliqueEntry {
    pub members: Vec<usize>,
    pub size: usize,
    pub potential: f64,
}

fn cmd_cliques(c: &ExperimentConfig, mut w: Writer) -> Result<CommandOutput> {
    let prob = build_problem(c)?;
    let g = prob.graph.as_ref().ok_or_else(|| Error::Unsupported("cliques need a graph".into()))?;
    let list: Vec<CliqueEntry> = maximal_cliques(g, c.clique_cap)?
        .into_iter()
        .map(|members| Ok(CliqueEntry { size: members.len(), potential: clique_potential(members.len())?, members }))
        .collect::<Result<_>>()?;
    w.json("cliques.json", &list)?;
    Ok(w.done(true, format!("{} maximal cliques", list.len())))
}

fn cmd_gen_graph(c: &ExperimentConfig, mut w: Writer) -> Result<CommandOutput> {
    let prob = build_problem(c)?;
    let g = prob.graph.as_ref().ok_or_else(|| Error::Unsupported("gen-graph needs a graph source".into()))?;
    w.json("graph.json", g)?;
    w.put("graph.txt", &g.to_edge_list())?;
    Ok(w.done(true, format!("n = {}, {} edges", g.n(), g.edge_count())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seeded() -> ExperimentConfig {
        ExperimentConfig { seed: Some(7), ..Default::default() }
    }

    #[test]
    fn empty_json_is_a_full_config() {
        let c = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        let r = ExperimentConfig { seed: Some(1), ..c }.resolve(Experiment::Simulate).unwrap();
        let back = ExperimentConfig::from_json(&r.to_json()).unwrap();
        assert_eq!(r, back);
        assert_eq!(back.graph, Some(GraphSource::TwoEdge));
    }

    #[test]
    fn unknown_keys_and_bad_json_report_lines() {
        match ExperimentConfig::from_json("{\n  \"eps\": 0.1,\n  \"bogus\": 1\n}") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn resolve_defaults_per_command() {
        let s = seeded().resolve(Experiment::Stationary).unwrap();
        assert_eq!((s.graph, s.n, s.eps, s.dt, s.steps), (Some(GraphSource::Edgeless), Some(2), Some(0.3), Some(0.01), Some(5_000_000)));
        let q = seeded().resolve(Experiment::Qprocess).unwrap();
        assert_eq!((q.eps, q.runs, q.grid_size), (Some(0.15), Some(20), Some(1024)));
        let e = seeded().resolve(Experiment::ExitSweep).unwrap();
        assert_eq!(e.runs, Some(200));
        assert!(ExperimentConfig::default().resolve(Experiment::Simulate).is_err());
        let empty = ExperimentConfig { eps_list: vec![], ..seeded() };
        assert!(matches!(empty.resolve(Experiment::ExitSweep), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn matrix_source_recovers_graph() {
        let c = ExperimentConfig {
            graph: Some(GraphSource::Matrix),
            matrix: Some(vec![vec![0.5, 1.0, 0.0], vec![1.0, 0.5, 1.0], vec![0.0, 1.0, 0.5]]),
            ..seeded()
        };
        let p = build_problem(&c).unwrap();
        assert_eq!(p.matrix, PayoffMatrix::two_edge());
        assert_eq!(p.graph.unwrap(), Graph::path(3).unwrap());
        let c = ExperimentConfig { matrix: Some(vec![vec![1.0, 0.3], vec![0.3, 2.0]]), ..c };
        let p = build_problem(&c).unwrap();
        assert!(p.graph.is_none());
        assert!(p.clique_vectors(10).is_err());
    }

    #[test]
    fn planted_gnp_problem() {
        let c = ExperimentConfig { graph: Some(GraphSource::Gnp), n: Some(30), plant: 5, ..seeded() };
        let p = build_problem(&c).unwrap();
        let g = p.graph.unwrap();
        assert_eq!(g.planted(), Some(&[0, 1, 2, 3, 4][..]));
        assert!(g.is_clique(&[0, 1, 2, 3, 4]));
    }
}
