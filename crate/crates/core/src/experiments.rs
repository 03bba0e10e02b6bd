//! Reproducible experiments: data generators, the experiment objectives,
//! and a harness that sweeps a step-size grid and writes text artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Result, TopoError};
use crate::filtrations::{vr_filtration, PointCloud, VietorisRips};
use crate::losses::{DiagramLoss, LossTerm, Objective, Regularizer};
use crate::optimizer::{descend, DescentConfig, DescentOutcome, LossEval, Method, StopReason, DEFAULT_MAX_REJECTIONS};
use crate::persistence::{diagram, persistence_pairs};
use crate::schemes::bigstep::BigStepConfig;
use crate::schemes::diffeo::diffeo_gradient;
use crate::schemes::distributed::distributed_gradient;
use crate::schemes::stratified::StratifiedConfig;
use crate::validation::rng;

/// Learning rates of the default grid.
pub const GRID_LR: [f64; 3] = [0.064, 0.128, 0.256];
/// Decay rates of the default grid.
pub const GRID_DECAY: [f64; 4] = [1.0, 0.9, 0.8, 0.7];
/// Steps at which point clouds are written.
pub const SNAPSHOT_STEPS: [usize; 5] = [0, 1, 5, 10, 20];
/// Half-width of the confinement box.
pub const BOX_HALF_WIDTH: f64 = 2.0;

/// The default (η, γ) grid, row-major in η.
pub fn default_grid() -> Vec<(f64, f64)> {
    GRID_LR.iter().flat_map(|&lr| GRID_DECAY.iter().map(move |&g| (lr, g))).collect()
}

/// `n` points near the unit circle (uniform angles, Gaussian radial noise),
/// plus optionally one outlier at the origin with small jitter.
pub fn gen_circle(n: usize, noise_std: f64, outlier: bool, seed: u64) -> Result<PointCloud> {
    if n < 3 {
        return Err(TopoError::InvalidParameter(format!("circle needs at least 3 points, got {n}")));
    }
    if !(noise_std >= 0.0) {
        return Err(TopoError::InvalidParameter(format!("noise must be non-negative, got {noise_std}")));
    }
    let mut r = rng(seed);
    let mut data = Vec::with_capacity(2 * (n + 1));
    for _ in 0..n {
        let a: f64 = r.random_range(0.0..std::f64::consts::TAU);
        let rad = 1.0 + noise_std * r.sample::<f64, _>(StandardNormal);
        data.push(rad * a.cos());
        data.push(rad * a.sin());
    }
    if outlier {
        let jitter = Normal::new(0.0, 0.01).expect("valid normal");
        data.push(jitter.sample(&mut r));
        data.push(jitter.sample(&mut r));
    }
    PointCloud::new(data.len() / 2, 2, data)
}

/// `n` points near the unit sphere in R³ with Gaussian radial noise.
pub fn gen_sphere(n: usize, noise_std: f64, seed: u64) -> Result<PointCloud> {
    if n < 4 {
        return Err(TopoError::InvalidParameter(format!("sphere needs at least 4 points, got {n}")));
    }
    let mut r = rng(seed);
    let mut data = Vec::with_capacity(3 * n);
    for _ in 0..n {
        let v: [f64; 3] = [r.sample(StandardNormal), r.sample(StandardNormal), r.sample(StandardNormal)];
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt().max(1e-300);
        let rad = 1.0 + noise_std * r.sample::<f64, _>(StandardNormal);
        data.extend(v.iter().map(|x| rad * x / norm));
    }
    PointCloud::new(n, 3, data)
}

/// −FG₂(Dgm¹, ∅) + Σ (|x| − 2)₊² + (|y| − 2)₊² on a cloud of `n` planar points.
pub fn circle_objective(n: usize) -> Result<Objective> {
    let fam = Arc::new(VietorisRips::new(n, 2, 2)?);
    Ok(Objective::new(
        fam,
        vec![LossTerm { dim: 1, loss: DiagramLoss::NegDistanceToEmpty, weight: 1.0 }],
        Regularizer::Box { half_width: BOX_HALF_WIDTH },
    ))
}

/// Value of the circle objective at a planar cloud.
pub fn circle_loss(x: &PointCloud) -> Result<f64> {
    circle_objective(x.len())?.value(x.as_slice())
}

/// Which experiment to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentName {
    /// 100 points near a circle plus an outlier; −FG₂ of H1 with confinement.
    CircleOutlier,
    /// 2000 points near a circle, gradients from 50-point subsamples;
    /// FG₂² of H1 (shrinks the loop).
    CircleSubsample,
    /// 500 points near a sphere, subsampled; −FG₂² of H2 with confinement.
    SphereH2,
}

impl FromStr for ExperimentName {
    type Err = TopoError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "circle_outlier" => Ok(ExperimentName::CircleOutlier),
            "circle_subsample" => Ok(ExperimentName::CircleSubsample),
            "sphere_h2" => Ok(ExperimentName::SphereH2),
            other => Err(TopoError::InvalidParameter(format!(
                "unknown experiment {other:?} (expected circle_outlier, circle_subsample or sphere_h2)"
            ))),
        }
    }
}

impl ExperimentName {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentName::CircleOutlier => "circle_outlier",
            ExperimentName::CircleSubsample => "circle_subsample",
            ExperimentName::SphereH2 => "sphere_h2",
        }
    }

    /// Methods run by default.
    pub fn default_methods(&self) -> Vec<String> {
        let m: &[&str] = match self {
            ExperimentName::CircleOutlier => &["vanilla", "stratified", "big_step", "continuation", "diffeo"],
            _ => &["vanilla", "distributed", "diffeo"],
        };
        m.iter().map(|s| s.to_string()).collect()
    }

    /// Methods this experiment can run.
    pub fn supported_methods(&self) -> &'static [&'static str] {
        match self {
            ExperimentName::CircleOutlier => &["vanilla", "stratified", "big_step", "continuation", "distributed", "diffeo"],
            _ => &["vanilla", "distributed", "diffeo"],
        }
    }
}

/// Full description of an experiment run.
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub name: ExperimentName,
    pub methods: Vec<String>,
    /// (η, γ) cells.
    pub grid: Vec<(f64, f64)>,
    pub steps: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub n_points: usize,
    pub noise: f64,
    pub outlier: bool,
    /// Subsample size for distributed / subsampled gradients.
    pub subsample: usize,
    /// Subsamples averaged per distributed gradient.
    pub repetitions: usize,
    /// Kernel width of the diffeomorphic interpolation.
    pub sigma: f64,
    /// Strata sampled per stratified step.
    pub strata_samples: usize,
    /// Worker threads for grid cells.
    pub threads: usize,
}

impl ExperimentSpec {
    /// The standard setting of each experiment.
    pub fn preset(name: ExperimentName, out: impl Into<PathBuf>) -> Self {
        let base = ExperimentSpec {
            name,
            methods: name.default_methods(),
            grid: default_grid(),
            steps: 20,
            seed: 0,
            out: out.into(),
            n_points: 100,
            noise: 0.05,
            outlier: true,
            subsample: 50,
            repetitions: 10,
            sigma: 0.1,
            strata_samples: 4,
            threads: 1,
        };
        match name {
            ExperimentName::CircleOutlier => base,
            ExperimentName::CircleSubsample => ExperimentSpec { n_points: 2000, outlier: false, sigma: 0.05, ..base },
            ExperimentName::SphereH2 => ExperimentSpec { n_points: 500, outlier: false, subsample: 30, sigma: 0.2, ..base },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(TopoError::InvalidParameter(m));
        for m in &self.methods {
            if !self.name.supported_methods().contains(&m.as_str()) {
                return bad(format!("method {m:?} is not available for {}", self.name.as_str()));
            }
        }
        if self.methods.is_empty() || self.grid.is_empty() {
            return bad("at least one method and one grid cell are required".into());
        }
        if self.steps == 0 {
            return bad("at least one step is required".into());
        }
        let subsampled = !self.full_complex() || self.methods.iter().any(|m| m == "distributed");
        if subsampled && (self.subsample == 0 || self.subsample > self.total_points()) {
            return bad(format!("subsample size {} out of range", self.subsample));
        }
        if self.repetitions == 0 {
            return bad("at least one repetition is required".into());
        }
        if !(self.sigma > 0.0) {
            return bad(format!("kernel width must be positive, got {}", self.sigma));
        }
        Ok(())
    }

    pub fn total_points(&self) -> usize {
        self.n_points + usize::from(self.outlier && self.name == ExperimentName::CircleOutlier)
    }

    /// Initial point cloud.
    pub fn initial_cloud(&self) -> Result<PointCloud> {
        match self.name {
            ExperimentName::CircleOutlier | ExperimentName::CircleSubsample => {
                gen_circle(self.n_points, self.noise, self.outlier && self.name == ExperimentName::CircleOutlier, self.seed)
            }
            ExperimentName::SphereH2 => gen_sphere(self.n_points, self.noise, self.seed),
        }
    }

    fn ambient(&self) -> usize {
        if self.name == ExperimentName::SphereH2 { 3 } else { 2 }
    }

    fn loss_dim(&self) -> usize {
        if self.name == ExperimentName::SphereH2 { 2 } else { 1 }
    }

    fn term(&self) -> LossTerm {
        let loss = match self.name {
            ExperimentName::CircleOutlier => DiagramLoss::NegDistanceToEmpty,
            // FG₂² to the empty diagram is ½ Σ (d − b)²
            ExperimentName::CircleSubsample => DiagramLoss::TotalPersistence { sign: 1.0, exponent: 2.0, death_only: false },
            ExperimentName::SphereH2 => DiagramLoss::TotalPersistence { sign: -1.0, exponent: 2.0, death_only: false },
        };
        LossTerm { dim: self.loss_dim(), loss, weight: 1.0 }
    }

    fn regularizer(&self) -> Regularizer {
        match self.name {
            ExperimentName::CircleSubsample => Regularizer::None,
            _ => Regularizer::Box { half_width: BOX_HALF_WIDTH },
        }
    }

    /// Whether a Rips complex on the whole cloud is affordable.
    pub fn full_complex(&self) -> bool {
        self.name == ExperimentName::CircleOutlier
    }

    /// Objective on the whole cloud; for subsampled experiments its family
    /// only carries the parameter shape and it holds the regularizer alone.
    pub fn objective(&self) -> Result<Objective> {
        let n = self.total_points();
        if self.full_complex() {
            let fam = Arc::new(VietorisRips::new(n, self.ambient(), self.loss_dim() + 1)?);
            Ok(Objective::new(fam, vec![self.term()], self.regularizer()))
        } else {
            let fam = Arc::new(VietorisRips::new(n, self.ambient(), 0)?);
            Ok(Objective::new(fam, Vec::new(), self.regularizer()))
        }
    }

    /// Topological objective on `subsample` points.
    pub fn sub_objective(&self) -> Result<Objective> {
        let fam = Arc::new(VietorisRips::new(self.subsample, self.ambient(), self.loss_dim() + 1)?);
        Ok(Objective::new(fam, vec![self.term()], Regularizer::None))
    }

    /// Descent configuration of one method and grid cell.
    pub fn descent_config(&self, method: &str, lr: f64, decay: f64) -> Result<DescentConfig> {
        let sub = || self.sub_objective();
        let full = self.full_complex();
        let m = match method {
            "vanilla" if full => Method::Vanilla,
            "vanilla" => Method::Distributed { sub_objective: sub()?, repetitions: 1 },
            "stratified" if full => Method::Stratified {
                cfg: StratifiedConfig { samples: self.strata_samples, ..StratifiedConfig::default() },
                estimate_lipschitz: true,
                constant_time: false,
                max_rejections: DEFAULT_MAX_REJECTIONS,
            },
            "big_step" if full => Method::BigStep(BigStepConfig::default()),
            "continuation" if full => Method::Continuation,
            "distributed" => Method::Distributed { sub_objective: sub()?, repetitions: self.repetitions },
            "diffeo" => Method::Diffeo {
                sigma: self.sigma,
                ridge: 0.0,
                sub_objective: if full { None } else { Some(sub()?) },
            },
            other => {
                return Err(TopoError::InvalidParameter(format!(
                    "method {other:?} is not available for {}",
                    self.name.as_str()
                )))
            }
        };
        let mut cfg = DescentConfig::new(m, self.steps, lr, decay, self.seed);
        cfg.snapshot_steps = SNAPSHOT_STEPS.to_vec();
        if !full {
            cfg.loss_eval = LossEval::Subsampled { sub_objective: sub()?, draws: 10 };
        }
        Ok(cfg)
    }
}

/// Outcome of one (method, η, γ) cell.
#[derive(Clone, Debug)]
pub struct CellResult {
    pub method: String,
    pub lr: f64,
    pub decay: f64,
    pub outcome: DescentOutcome,
}

impl CellResult {
    pub fn initial_loss(&self) -> f64 {
        self.outcome.trace.rows[0].loss
    }

    pub fn final_loss(&self) -> f64 {
        self.outcome.trace.final_loss()
    }

    pub fn total_ms(&self) -> f64 {
        self.outcome.trace.total_ms()
    }
}

/// All cells of a run, and the best cell per method.
#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub cells: Vec<CellResult>,
    /// (method, index into `cells`) in method order.
    pub best: Vec<(String, usize)>,
}

impl ExperimentReport {
    pub fn best_cell(&self, method: &str) -> Option<&CellResult> {
        self.best.iter().find(|(m, _)| m == method).map(|&(_, i)| &self.cells[i])
    }
}

fn cell_dir(out: &Path, method: &str, lr: f64, decay: f64) -> PathBuf {
    out.join(method).join(format!("lr_{lr}_decay_{decay}"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Runs every method over every grid cell and writes, under `spec.out`:
/// per cell a trace, snapshot clouds and (when affordable) their diagrams;
/// `timing.csv` with the wall time per cell; `manifest.txt` naming the
/// best cell per method.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    fs::create_dir_all(&spec.out)?;
    let x0 = spec.initial_cloud()?;
    let obj = spec.objective()?;
    let jobs: Vec<(String, f64, f64)> = spec
        .methods
        .iter()
        .flat_map(|m| spec.grid.iter().map(move |&(lr, g)| (m.clone(), lr, g)))
        .collect();
    let run = |job: &(String, f64, f64)| -> Result<CellResult> {
        let (method, lr, decay) = job;
        log::info!("running {method} lr {lr} decay {decay}");
        let cfg = spec.descent_config(method, *lr, *decay)?;
        let outcome = descend(x0.as_slice(), &obj, &cfg)?;
        Ok(CellResult { method: method.clone(), lr: *lr, decay: *decay, outcome })
    };
    let cells: Vec<CellResult> = if spec.threads > 1 {
        let chunk = jobs.len().div_ceil(spec.threads);
        std::thread::scope(|s| {
            let handles: Vec<_> = jobs.chunks(chunk).map(|c| s.spawn(move || c.iter().map(run).collect::<Vec<_>>())).collect();
            handles.into_iter().flat_map(|h| h.join().expect("worker thread panicked")).collect::<Result<Vec<_>>>()
        })?
    } else {
        jobs.iter().map(run).collect::<Result<_>>()?
    };

    for c in &cells {
        let dir = cell_dir(&spec.out, &c.method, c.lr, c.decay);
        fs::create_dir_all(&dir)?;
        c.outcome.trace.write_text(create(&dir.join("trace.csv"))?)?;
        for (step, theta) in &c.outcome.trace.snapshots {
            let cloud = PointCloud::new(x0.len(), x0.dim(), theta.clone())?;
            cloud.write_text(create(&dir.join(format!("snapshot_{step:02}.csv")))?)?;
            if spec.full_complex() {
                let f = vr_filtration(&cloud, spec.loss_dim() + 1)?;
                let dgm = diagram(&f, &persistence_pairs(&f), true);
                dgm.write_text(create(&dir.join(format!("diagram_{step:02}.csv")))?)?;
            }
        }
    }

    let mut best = Vec::new();
    for m in &spec.methods {
        let idx = (0..cells.len())
            .filter(|&i| &cells[i].method == m)
            .min_by(|&a, &b| cells[a].final_loss().total_cmp(&cells[b].final_loss()))
            .expect("every method has cells");
        best.push((m.clone(), idx));
    }

    let mut timing = create(&spec.out.join("timing.csv"))?;
    writeln!(timing, "method,lr,decay,steps,total_ms")?;
    for c in &cells {
        writeln!(timing, "{},{},{},{},{:.3}", c.method, c.lr, c.decay, c.outcome.trace.rows.len() - 1, c.total_ms())?;
    }
    timing.flush()?;

    let mut man = create(&spec.out.join("manifest.txt"))?;
    writeln!(man, "experiment = {}", spec.name.as_str())?;
    writeln!(man, "seed = {}", spec.seed)?;
    writeln!(man, "points = {}", x0.len())?;
    writeln!(man, "steps = {}", spec.steps)?;
    writeln!(man, "methods = {}", spec.methods.join(","))?;
    for (m, i) in &best {
        let c = &cells[*i];
        writeln!(man, "{m}.best_lr = {}", c.lr)?;
        writeln!(man, "{m}.best_decay = {}", c.decay)?;
        writeln!(man, "{m}.initial_loss = {:.16e}", c.initial_loss())?;
        writeln!(man, "{m}.final_loss = {:.16e}", c.final_loss())?;
        let stop = match &c.outcome.stop {
            StopReason::Budget => "budget".to_string(),
            StopReason::Stationary { step } => format!("stationary_at_{step}"),
            StopReason::NonFinite { step, .. } => format!("non_finite_at_{step}"),
        };
        writeln!(man, "{m}.stop = {stop}")?;
        writeln!(man, "{m}.dir = {}", cell_dir(Path::new(""), m, c.lr, c.decay).display())?;
    }
    man.flush()?;
    Ok(ExperimentReport { cells, best })
}

/// Gradient supports (in points) on a large circle: one subsample's vanilla
/// gradient, its kernel interpolation, and the distributed average.
#[derive(Clone, Copy, Debug)]
pub struct SupportComparison {
    pub vanilla: usize,
    pub diffeo: usize,
    pub distributed: usize,
}

/// Compares gradient supports for the subsampling experiment at its
/// initial cloud, using `repetitions` subsamples for the distributed
/// gradient.
pub fn subsample_supports(spec: &ExperimentSpec, repetitions: usize) -> Result<SupportComparison> {
    let x = spec.initial_cloud()?;
    let sub = spec.sub_objective()?;
    let d = x.dim();
    let mut r = rng(spec.seed ^ 0x0b5e_55ed);
    let vanilla = distributed_gradient(&sub, x.as_slice(), d, 1, Regularizer::None, &mut r)?;
    let diffeo = diffeo_gradient(x.as_slice(), &vanilla, spec.sigma, 0.0)?;
    let distributed = distributed_gradient(&sub, x.as_slice(), d, repetitions, Regularizer::None, &mut r)?;
    Ok(SupportComparison {
        vanilla: vanilla.support().len(),
        diffeo: diffeo.support().len(),
        distributed: distributed.support().len(),
    })
}
