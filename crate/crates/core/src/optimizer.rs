//! The descent loop: step-size schedules, optional gradient noise, and a
//! driver per gradient scheme.

use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Result, TopoError};
use crate::losses::{Objective, ObjectiveEval};
use crate::schemes::bigstep::{big_step_gradient_with, BigStepConfig};
use crate::schemes::continuation::continuation_direction_with;
use crate::schemes::diffeo::diffeo_gradient;
use crate::schemes::distributed::distributed_gradient;
use crate::schemes::stratified::{estimate_lipschitz, stratified_gradient, stratified_gradient_const, StratifiedConfig};
use crate::schemes::ParamGradient;

/// Step-size schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Schedule {
    /// η·γ^k at step k (0-based).
    Geometric,
    /// η/(k + 1) at step k (0-based).
    Harmonic,
}

/// How the loss reported in the trace is computed.
#[derive(Clone)]
pub enum LossEval {
    /// The objective itself.
    Full,
    /// Regularizer of the objective plus the mean loss of `sub_objective`
    /// over `draws` subsamples fixed for the whole run (for clouds too
    /// large for a full complex).
    Subsampled { sub_objective: Objective, draws: usize },
}

/// Stratified retries before a point is declared numerically stationary:
/// after this many halvings the attempted step is below 1/256 of the first.
pub const DEFAULT_MAX_REJECTIONS: usize = 8;

/// Scheme-specific settings.
#[derive(Clone)]
pub enum Method {
    Vanilla,
    Stratified {
        cfg: StratifiedConfig,
        /// Estimate the Lipschitz constant at θ₀ instead of using `cfg.lipschitz`.
        estimate_lipschitz: bool,
        /// Single-shrink variant.
        constant_time: bool,
        /// Retries (with a smaller radius) when a step fails the decrease test.
        max_rejections: usize,
    },
    BigStep(BigStepConfig),
    Continuation,
    /// Average of gradients over `repetitions` subsamples; `sub_objective`
    /// lives on the subsample size.
    Distributed { sub_objective: Objective, repetitions: usize },
    /// Kernel interpolation of the vanilla gradient, computed on the full
    /// cloud or, with `sub_objective`, on one random subsample per step.
    Diffeo { sigma: f64, ridge: f64, sub_objective: Option<Objective> },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Vanilla => "vanilla",
            Method::Stratified { .. } => "stratified",
            Method::BigStep(_) => "big_step",
            Method::Continuation => "continuation",
            Method::Distributed { .. } => "distributed",
            Method::Diffeo { .. } => "diffeo",
        }
    }

    pub fn stratified_default() -> Self {
        Method::Stratified {
            cfg: StratifiedConfig::default(),
            estimate_lipschitz: true,
            constant_time: false,
            max_rejections: DEFAULT_MAX_REJECTIONS,
        }
    }
}

#[derive(Clone)]
pub struct DescentConfig {
    pub method: Method,
    pub steps: usize,
    pub lr: f64,
    pub decay: f64,
    pub schedule: Schedule,
    pub noise_std: f64,
    pub seed: u64,
    /// Steps (0 = initial) at which θ is recorded.
    pub snapshot_steps: Vec<usize>,
    pub loss_eval: LossEval,
}

impl DescentConfig {
    pub fn new(method: Method, steps: usize, lr: f64, decay: f64, seed: u64) -> Self {
        DescentConfig {
            method,
            steps,
            lr,
            decay,
            schedule: Schedule::Geometric,
            noise_std: 0.0,
            seed,
            snapshot_steps: Vec::new(),
            loss_eval: LossEval::Full,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(TopoError::InvalidParameter(m));
        if self.steps == 0 {
            return bad("at least one step is required".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return bad(format!("decay must lie in (0, 1], got {}", self.decay));
        }
        if !(self.noise_std >= 0.0) {
            return bad(format!("noise level must be non-negative, got {}", self.noise_std));
        }
        if let Method::Stratified { cfg, .. } = &self.method {
            cfg.validate()?;
        }
        Ok(())
    }

    /// Step size at step k (0-based).
    pub fn step_size(&self, k: usize) -> f64 {
        match self.schedule {
            Schedule::Geometric => self.lr * self.decay.powi(k as i32),
            Schedule::Harmonic => self.lr / (k as f64 + 1.0),
        }
    }
}

/// One row of a trace: the state after `step` steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub loss: f64,
    /// Norm of the update direction that produced this state (0 at step 0).
    pub grad_norm: f64,
    /// Wall time since the start of the run.
    pub time_ms: f64,
}

/// One checked stratified step: L(θ − α g) against L(θ) − β α ‖g‖².
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecreaseCheck {
    pub step: usize,
    pub before: f64,
    pub after: f64,
    pub bound: f64,
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StopReason {
    Budget,
    /// Stratified stationarity signal (α = 0).
    Stationary { step: usize },
    NonFinite { step: usize, detail: String },
}

#[derive(Clone, Debug, Default)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
    pub snapshots: Vec<(usize, Vec<f64>)>,
    pub decrease_checks: Vec<DecreaseCheck>,
    /// Gradient support (rows) per step, first entry for step 1.
    pub supports: Vec<usize>,
}

impl Trace {
    /// Table `step,loss,grad_norm,time_ms`.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "step,loss,grad_norm,time_ms")?;
        for r in &self.rows {
            writeln!(w, "{},{:.16e},{:.16e},{:.3}", r.step, r.loss, r.grad_norm, r.time_ms)?;
        }
        Ok(())
    }

    /// Equality of everything but wall times.
    pub fn same_values(&self, other: &Trace) -> bool {
        self.rows.len() == other.rows.len()
            && self.rows.iter().zip(&other.rows).all(|(a, b)| {
                a.step == b.step && a.loss.to_bits() == b.loss.to_bits() && a.grad_norm.to_bits() == b.grad_norm.to_bits()
            })
            && self.snapshots == other.snapshots
            && self.decrease_checks == other.decrease_checks
            && self.supports == other.supports
    }

    pub fn final_loss(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.loss)
    }

    pub fn total_ms(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.time_ms)
    }
}

#[derive(Clone, Debug)]
pub struct DescentOutcome {
    pub theta: Vec<f64>,
    pub trace: Trace,
    pub stop: StopReason,
}

/// Loss as configured by `cfg.loss_eval`; `draws` are the fixed
/// subsamples (ignored for the full loss).
fn logged_loss(obj: &Objective, cfg: &DescentConfig, draws: &[Vec<usize>], theta: &[f64]) -> Result<(f64, Option<ObjectiveEval>)> {
    match &cfg.loss_eval {
        LossEval::Full => {
            let ev = obj.evaluate(theta)?;
            Ok((ev.loss, Some(ev)))
        }
        LossEval::Subsampled { sub_objective, .. } => {
            let w = obj.family.row_width();
            let mut total = 0.0;
            for idx in draws {
                let sub: Vec<f64> = idx.iter().flat_map(|&i| theta[i * w..(i + 1) * w].iter().copied()).collect();
                total += sub_objective.evaluate(&sub)?.topo_loss;
            }
            Ok((obj.regularizer.value(theta) + total / draws.len().max(1) as f64, None))
        }
    }
}

fn non_finite(e: &TopoError) -> bool {
    matches!(e, TopoError::NonFinite(_) | TopoError::NonFiniteLoss { .. })
}

/// Runs the configured scheme from θ₀. A non-finite loss or parameter ends
/// the run early with the trace so far.
pub fn descend(theta0: &[f64], obj: &Objective, cfg: &DescentConfig) -> Result<DescentOutcome> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut theta = theta0.to_vec();
    let mut trace = Trace::default();
    let start = Instant::now();
    let elapsed = |s: &Instant| s.elapsed().as_secs_f64() * 1e3;

    let draws: Vec<Vec<usize>> = match &cfg.loss_eval {
        LossEval::Full => Vec::new(),
        LossEval::Subsampled { sub_objective, draws } => {
            let w = obj.family.row_width();
            let (n, s) = (theta.len() / w, sub_objective.family.num_params() / w);
            if s > n {
                return Err(TopoError::InvalidParameter(format!("evaluation subsample of {s} points exceeds {n} points")));
            }
            let mut r = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_1055);
            (0..*draws).map(|_| rand::seq::index::sample(&mut r, n, s).into_vec()).collect()
        }
    };
    let (mut loss, mut cached) = logged_loss(obj, cfg, &draws, &theta)?;
    if !loss.is_finite() {
        return Err(TopoError::NonFiniteLoss { step: 0 });
    }
    trace.rows.push(TraceRow { step: 0, loss, grad_norm: 0.0, time_ms: elapsed(&start) });
    if cfg.snapshot_steps.contains(&0) {
        trace.snapshots.push((0, theta.clone()));
    }

    let mut strat_cfg = None;
    if let Method::Stratified { cfg: sc, estimate_lipschitz: est, .. } = &cfg.method {
        let mut sc = sc.clone();
        if *est {
            sc.lipschitz = estimate_lipschitz(obj, &theta, cfg.lr, 4, &mut rng)?;
            log::info!("stratified Lipschitz estimate {}", sc.lipschitz);
        }
        strat_cfg = Some(sc);
    }
    let noise = Normal::new(0.0, cfg.noise_std.max(f64::MIN_POSITIVE)).expect("valid normal");

    let mut stop = StopReason::Budget;
    for k in 0..cfg.steps {
        let lr = cfg.step_size(k);
        let step_result: Result<Option<(f64, usize)>> = (|| {
            // returns (norm of applied direction, support) or None when stationary
            match &cfg.method {
                Method::Stratified { constant_time, max_rejections, .. } => {
                    let sc = strat_cfg.as_ref().expect("prepared above");
                    let mut eps = lr;
                    for _ in 0..=*max_rejections {
                        let st = if *constant_time {
                            stratified_gradient_const(obj, &theta, eps, sc, &mut rng)?
                        } else {
                            stratified_gradient(obj, &theta, eps, sc, &mut rng)?
                        };
                        if st.stationary || st.alpha == 0.0 {
                            return Ok(None);
                        }
                        let g = &st.direction;
                        let cand: Vec<f64> = theta.iter().zip(&g.values).map(|(t, d)| t - st.alpha * d).collect();
                        let after = obj.value(&cand)?;
                        let gn = g.norm();
                        let bound = loss - sc.beta * st.alpha * gn * gn;
                        let accepted = after <= bound;
                        trace.decrease_checks.push(DecreaseCheck { step: k + 1, before: loss, after, bound, accepted });
                        if accepted {
                            theta = cand;
                            loss = after;
                            cached = None;
                            return Ok(Some((gn, g.support().len())));
                        }
                        eps = st.epsilon * sc.gamma;
                    }
                    log::info!("stratified step {} rejected {} times; treating as stationary", k + 1, max_rejections + 1);
                    Ok(None)
                }
                other => {
                    // evaluation at the current θ, reused from the loss computation
                    let mut current = || -> Result<ObjectiveEval> {
                        match cached.take() {
                            Some(ev) => Ok(ev),
                            None => obj.evaluate(&theta),
                        }
                    };
                    let dir: ParamGradient = match other {
                        Method::Vanilla => {
                            let ev = current()?;
                            ParamGradient::new(obj.gradient(&theta, &ev)?, obj.family.row_width())
                        }
                        Method::BigStep(bc) => big_step_gradient_with(obj, &theta, current()?, lr, bc)?.gradient,
                        Method::Continuation => {
                            // the update adds the direction; store its negative
                            let mut d = continuation_direction_with(obj, &theta, current()?)?.direction;
                            d.values.iter_mut().for_each(|x| *x = -*x);
                            d
                        }
                        Method::Distributed { sub_objective, repetitions } => {
                            let w = obj.family.row_width();
                            distributed_gradient(sub_objective, &theta, w, *repetitions, obj.regularizer, &mut rng)?
                        }
                        Method::Diffeo { sigma, ridge, sub_objective } => {
                            let g = match sub_objective {
                                None => {
                                    let ev = current()?;
                                    ParamGradient::new(obj.gradient(&theta, &ev)?, obj.family.row_width())
                                }
                                Some(sub) => {
                                    let w = obj.family.row_width();
                                    distributed_gradient(sub, &theta, w, 1, obj.regularizer, &mut rng)?
                                }
                            };
                            diffeo_gradient(&theta, &g, *sigma, *ridge)?
                        }
                        Method::Stratified { .. } => unreachable!(),
                    };
                    let support = dir.support().len();
                    let mut step: Vec<f64> = dir.values;
                    if cfg.noise_std > 0.0 {
                        for x in &mut step {
                            *x += noise.sample(&mut rng);
                        }
                    }
                    for (t, d) in theta.iter_mut().zip(&step) {
                        *t -= lr * d;
                    }
                    (loss, cached) = logged_loss(obj, cfg, &draws, &theta)?;
                    Ok(Some((crate::schemes::norm(&step), support)))
                }
            }
        })();
        match step_result {
            Ok(Some((gn, support))) => {
                if !loss.is_finite() {
                    stop = StopReason::NonFinite { step: k + 1, detail: format!("loss {loss}") };
                    break;
                }
                trace.supports.push(support);
                trace.rows.push(TraceRow { step: k + 1, loss, grad_norm: gn, time_ms: elapsed(&start) });
                if cfg.snapshot_steps.contains(&(k + 1)) {
                    trace.snapshots.push((k + 1, theta.clone()));
                }
            }
            Ok(None) => {
                stop = StopReason::Stationary { step: k };
                break;
            }
            Err(e) if non_finite(&e) => {
                stop = StopReason::NonFinite { step: k + 1, detail: e.to_string() };
                break;
            }
            Err(e) => return Err(e),
        }
    }
    if stop != StopReason::Budget {
        log::info!("descent stopped early: {stop:?}");
    }
    Ok(DescentOutcome { theta, trace, stop })
}
