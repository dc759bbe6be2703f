//! The fixed-point problem `v = K(v, sigma)` on the strip, solved by damped
//! Picard iteration with Anderson mixing, and continuation in `sigma` from the
//! small-data regime towards `sigma = 1`.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::field::StripField;
use crate::forcing::{quadratic_force, Nonlinearity};
use crate::grid::StripGrid;
use crate::initial_data::DssInitialData;
use crate::lattice::{bracket, LatticeField};
use crate::semigroup::HeatSemigroup;
use crate::stokes::{QuadratureSpec, StokesOperator};
use crate::vec3::norm;
use crate::{Error, Result};

/// One evaluation of a fixed-point map.
#[derive(Debug, Clone)]
pub struct MapOutput {
    pub field: StripField,
    /// Estimated relative quadrature error of the evaluation.
    pub error_estimate: f64,
    pub warnings: Vec<String>,
}

/// A map `v -> K(v, sigma)` on strip fields together with its a priori
/// monitor. Implemented by [`Problem`]; the abstraction lets the iteration
/// and continuation logic run on synthetic maps as well.
pub trait FixedPointMap: Sync {
    fn grid(&self) -> &Arc<StripGrid>;
    /// Decay exponent `gamma` of the weighted space.
    fn gamma(&self) -> f64;
    fn apply(&self, v: &StripField, sigma: f64) -> Result<MapOutput>;
    /// Fitted a priori constants of the assembled solution `sigma U + E v`.
    fn monitor(&self, v: &StripField, sigma: f64) -> AprioriReport {
        let _ = sigma;
        apriori_monitor(v, &v.field)
    }
}

/// The mild fixed-point problem for DSS data `u0`:
/// `K(v, sigma) = -Phi[(sigma U + E v) (x) (sigma U + E v)]` restricted to the strip.
#[derive(Debug, Clone)]
pub struct Problem {
    semigroup: Arc<HeatSemigroup>,
    u_lattice: LatticeField<3>,
    operator: StokesOperator,
    gamma: f64,
}

impl Problem {
    pub fn new(data: Arc<DssInitialData>, grid: Arc<StripGrid>, gamma: f64, spec: QuadratureSpec) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::Argument(format!("gamma must lie in (0, 1), got {gamma}")));
        }
        if (data.lambda - grid.lambda).abs() > 1e-12 * grid.lambda {
            return Err(Error::Argument(format!(
                "data scaling factor {} differs from the lattice factor {}",
                data.lambda, grid.lambda
            )));
        }
        let semigroup = Arc::new(HeatSemigroup::new(data));
        let u_lattice = semigroup.on_lattice(grid.clone());
        let operator = StokesOperator::new(grid, spec)?;
        Ok(Self { semigroup, u_lattice, operator, gamma })
    }

    pub fn semigroup(&self) -> &Arc<HeatSemigroup> {
        &self.semigroup
    }

    /// `U = e^{t Delta} u0` at the lattice nodes.
    pub fn heat_part(&self) -> &LatticeField<3> {
        &self.u_lattice
    }

    pub fn operator(&self) -> &StokesOperator {
        &self.operator
    }

    /// `K(v, sigma)`.
    pub fn k_map(&self, v: &StripField, sigma: f64) -> Result<MapOutput> {
        if !sigma.is_finite() || !(0.0..=1.0).contains(&sigma) {
            return Err(Error::Argument(format!("continuation parameter must lie in [0, 1], got {sigma}")));
        }
        if v.grid().spec() != self.operator.grid().spec() {
            return Err(Error::Argument("unknown lives on a different lattice".into()));
        }
        if !v.x_norm().is_finite() {
            return Err(Error::Domain("unknown has infinite weighted norm".into()));
        }
        let force = quadratic_force(&self.u_lattice, v, sigma);
        let res = self.operator.apply(&force)?;
        Ok(MapOutput {
            field: StripField::new(res.field, self.gamma),
            error_estimate: res.error_estimate,
            warnings: res.warnings,
        })
    }

    /// The assembled solution `u = sigma U + E v` as a pointwise evaluator.
    pub fn solution(&self, v: &StripField, sigma: f64) -> Result<Nonlinearity> {
        Nonlinearity::new(self.semigroup.clone(), v.clone(), sigma)
    }

    /// `sigma U + v` at the lattice nodes.
    pub fn assembled_on_lattice(&self, v: &StripField, sigma: f64) -> LatticeField<3> {
        self.u_lattice.combine(sigma, &v.field, 1.0)
    }
}

impl FixedPointMap for Problem {
    fn grid(&self) -> &Arc<StripGrid> {
        self.operator.grid()
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn apply(&self, v: &StripField, sigma: f64) -> Result<MapOutput> {
        self.k_map(v, sigma)
    }

    fn monitor(&self, v: &StripField, sigma: f64) -> AprioriReport {
        apriori_monitor(v, &self.assembled_on_lattice(v, sigma))
    }
}

/// Fitted constants of the a priori bounds over the strip lattice:
/// `sup |u| (|x| + sqrt t)`, `sup |v| sqrt t <x/sqrt t>^2` and
/// `sup |v| sqrt t <x/sqrt t>^{1+gamma}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AprioriReport {
    pub c_u: f64,
    pub c_v_quadratic: f64,
    pub c_v_gamma: f64,
    /// All three constants are finite.
    pub finite: bool,
}

/// A priori monitor for the unknown `v` and the assembled velocity `u`
/// sampled on the same lattice.
pub fn apriori_monitor(v: &StripField, u: &LatticeField<3>) -> AprioriReport {
    let g = v.grid();
    assert_eq!(u.samples.len(), g.len(), "u and v must share a lattice");
    let (mut c_u, mut c_q, mut c_g) = (0.0f64, 0.0f64, 0.0f64);
    for (idx, (vv, uu)) in v.samples().iter().zip(&u.samples).enumerate() {
        let (i, _, j) = g.unindex(idx);
        let (r, t) = (g.radius(i as isize), g.time(j as isize));
        let st = t.sqrt();
        let b = bracket(&[r / st]);
        let nv = norm(vv);
        c_u = c_u.max(norm(uu) * (r + st));
        c_q = c_q.max(nv * st * b * b);
        c_g = c_g.max(nv * st * b.powf(1.0 + v.gamma));
        if !(nv.is_finite() && norm(uu).is_finite()) {
            return AprioriReport { c_u: f64::NAN, c_v_quadratic: f64::NAN, c_v_gamma: f64::NAN, finite: false };
        }
    }
    AprioriReport { c_u, c_v_quadratic: c_q, c_v_gamma: c_g, finite: true }
}

/// Parameters of the Picard iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardParams {
    /// Absolute tolerance on `||K(v) - v||_X`.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial damping in `(0, 1]`; falls back to `0.5` on residual growth.
    pub damping: f64,
    /// Number of previous residuals used by Anderson mixing; 0 disables it.
    pub anderson_depth: usize,
}

impl Default for PicardParams {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 40, damping: 1.0, anderson_depth: 3 }
    }
}

impl PicardParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::Argument(format!("tolerance must be positive, got {}", self.tol)));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Argument(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if self.max_iter == 0 {
            return Err(Error::Argument("iteration budget must be positive".into()));
        }
        Ok(())
    }
}

/// Damping used after the first residual growth.
const FALLBACK_DAMPING: f64 = 0.5;
/// The iteration is declared divergent when the residual grows by this
/// factor over [`DIVERGENCE_WINDOW`] iterations.
const DIVERGENCE_GROWTH: f64 = 10.0;
const DIVERGENCE_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    Diverged,
    IterationBudget,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::Diverged => "diverged",
            SolveStatus::IterationBudget => "iteration_budget",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    /// The last iterate whose residual was evaluated.
    pub v: StripField,
    pub sigma: f64,
    /// `||K(v_n) - v_n||_X` for every evaluated iterate `v_n`; with unit
    /// damping and no mixing this is `||v_{n+1} - v_n||_X`.
    pub residual_history: Vec<f64>,
    /// `||v - K(v, sigma)||_X` of the returned `v`.
    pub final_residual: f64,
    /// Number of map evaluations.
    pub iterations: usize,
    pub converged: bool,
    pub status: SolveStatus,
    pub apriori: AprioriReport,
    /// Largest quadrature error estimate seen during the iteration.
    pub error_estimate: f64,
    pub warnings: Vec<String>,
}

impl SolveResult {
    /// Ratios `r_{n+1} / r_n` of consecutive residuals.
    pub fn contraction_factors(&self) -> Vec<f64> {
        self.residual_history.windows(2).map(|w| w[1] / w[0]).collect()
    }

    /// Residual history as CSV `iteration,residual` after a `# key=value` header.
    pub fn write_history_csv<W: Write>(&self, mut w: W, meta: &[(String, String)]) -> Result<()> {
        write_meta(&mut w, meta)?;
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["iteration", "residual"]).map_err(csv_err)?;
        for (n, r) in self.residual_history.iter().enumerate() {
            csv.write_record([n.to_string(), r.to_string()]).map_err(csv_err)?;
        }
        csv.flush()?;
        Ok(())
    }

    /// `key=value` summary of the solve.
    pub fn write_summary<W: Write>(&self, mut w: W, meta: &[(String, String)]) -> Result<()> {
        write_meta(&mut w, meta)?;
        writeln!(w, "sigma={}", self.sigma)?;
        writeln!(w, "status={}", self.status.as_str())?;
        writeln!(w, "converged={}", self.converged)?;
        writeln!(w, "iterations={}", self.iterations)?;
        writeln!(w, "final_residual={}", self.final_residual)?;
        writeln!(w, "x_norm={}", self.v.x_norm())?;
        writeln!(w, "error_estimate={}", self.error_estimate)?;
        writeln!(w, "apriori_c_u={}", self.apriori.c_u)?;
        writeln!(w, "apriori_c_v_quadratic={}", self.apriori.c_v_quadratic)?;
        writeln!(w, "apriori_c_v_gamma={}", self.apriori.c_v_gamma)?;
        writeln!(w, "apriori_finite={}", self.apriori.finite)?;
        writeln!(w, "warnings={}", self.warnings.len())?;
        Ok(())
    }
}

pub(crate) fn write_meta<W: Write>(w: &mut W, meta: &[(String, String)]) -> Result<()> {
    for (k, v) in meta {
        writeln!(w, "# {k}={v}")?;
    }
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Flattened samples weighted like the X-norm, so that Euclidean least
/// squares in the mixing step respect the problem's topology.
fn weighted(v: &StripField) -> DVector<f64> {
    let g = v.grid();
    let mut out = DVector::zeros(3 * g.len());
    for (idx, s) in v.samples().iter().enumerate() {
        let (i, _, _) = g.unindex(idx);
        let w = bracket(&[g.radius(i as isize)]).powf(1.0 + v.gamma);
        for c in 0..3 {
            out[3 * idx + c] = w * s[c];
        }
    }
    out
}

fn unweighted(x: &DVector<f64>, like: &StripField) -> StripField {
    let g = like.grid();
    let mut f = like.field.clone();
    for (idx, s) in f.samples.iter_mut().enumerate() {
        let (i, _, _) = g.unindex(idx);
        let w = bracket(&[g.radius(i as isize)]).powf(1.0 + like.gamma);
        for c in 0..3 {
            s[c] = x[3 * idx + c] / w;
        }
    }
    StripField::new(f, like.gamma)
}

/// Anderson mixing over the last `depth` iterates in weighted coordinates.
struct Mixer {
    depth: usize,
    xs: Vec<DVector<f64>>,
    rs: Vec<DVector<f64>>,
}

impl Mixer {
    fn new(depth: usize) -> Self {
        Self { depth, xs: Vec::new(), rs: Vec::new() }
    }

    fn reset(&mut self) {
        self.xs.clear();
        self.rs.clear();
    }

    /// Next iterate from the current `x` and residual `r = K(x) - x`.
    fn next(&mut self, x: DVector<f64>, r: DVector<f64>, beta: f64) -> DVector<f64> {
        let plain = &x + &r * beta;
        if self.depth == 0 {
            return plain;
        }
        self.xs.push(x.clone());
        self.rs.push(r.clone());
        if self.xs.len() > self.depth + 1 {
            self.xs.remove(0);
            self.rs.remove(0);
        }
        let m = self.xs.len() - 1;
        if m == 0 {
            return plain;
        }
        let n = x.len();
        let mut dr = DMatrix::zeros(n, m);
        let mut dx = DMatrix::zeros(n, m);
        for k in 0..m {
            dr.set_column(k, &(&self.rs[k + 1] - &self.rs[k]));
            dx.set_column(k, &(&self.xs[k + 1] - &self.xs[k]));
        }
        let svd = dr.clone().svd(true, true);
        let cutoff = 1e-12 * svd.singular_values.max();
        let coef = match svd.solve(&r, cutoff) {
            Ok(c) if c.iter().all(|v| v.is_finite()) => c,
            _ => {
                self.reset();
                return plain;
            }
        };
        plain - (dx + dr * beta) * coef
    }
}

/// Picard iteration `v <- (1 - d) v + d K(v, sigma)` with Anderson mixing.
pub fn picard_solve<M: FixedPointMap + ?Sized>(
    map: &M,
    sigma: f64,
    v_init: &StripField,
    params: &PicardParams,
) -> Result<SolveResult> {
    picard_solve_observed(map, sigma, v_init, params, |_, _| {})
}

/// As [`picard_solve`], calling `observe(n, v_n)` on every evaluated iterate.
pub fn picard_solve_observed<M, O>(
    map: &M,
    sigma: f64,
    v_init: &StripField,
    params: &PicardParams,
    mut observe: O,
) -> Result<SolveResult>
where
    M: FixedPointMap + ?Sized,
    O: FnMut(usize, &StripField),
{
    params.validate()?;
    if v_init.grid().spec() != map.grid().spec() {
        return Err(Error::Argument("initial iterate lives on a different lattice".into()));
    }
    let gamma = map.gamma();
    let mut v = StripField::new(v_init.field.clone(), gamma);
    let mut beta = params.damping;
    let mut mixer = Mixer::new(params.anderson_depth);
    let mut history = Vec::new();
    let mut warnings = Vec::new();
    let mut error_estimate: f64 = 0.0;
    let mut status = SolveStatus::IterationBudget;
    // the best evaluated iterate, returned when the budget runs out
    let mut best: Option<(StripField, f64)> = None;
    for n in 0..params.max_iter {
        observe(n, &v);
        let out = map.apply(&v, sigma)?;
        error_estimate = error_estimate.max(out.error_estimate);
        warnings.extend(out.warnings);
        let res = out.field.combine(1.0, &v, -1.0);
        let r = res.x_norm();
        history.push(r);
        if !r.is_finite() {
            status = SolveStatus::Diverged;
            break;
        }
        if best.as_ref().map_or(true, |(_, b)| r < *b) {
            best = Some((v.clone(), r));
        }
        if r <= params.tol {
            status = SolveStatus::Converged;
            break;
        }
        if n >= DIVERGENCE_WINDOW && r > DIVERGENCE_GROWTH * history[n - DIVERGENCE_WINDOW] {
            status = SolveStatus::Diverged;
            break;
        }
        if n > 0 && r > history[n - 1] && beta > FALLBACK_DAMPING {
            log::info!("residual grew at iteration {n}; damping falls back to {FALLBACK_DAMPING}");
            beta = FALLBACK_DAMPING;
            mixer.reset();
        }
        let next = mixer.next(weighted(&v), weighted(&res), beta);
        v = unweighted(&next, &v);
    }
    let final_residual = *history.last().expect("at least one iteration");
    let converged = status == SolveStatus::Converged;
    let (v, final_residual) = match (converged, best) {
        (false, Some((b, rb))) if rb.is_finite() => (b, rb),
        _ => (v, final_residual),
    };
    let apriori = map.monitor(&v, sigma);
    Ok(SolveResult {
        v,
        sigma,
        iterations: history.len(),
        residual_history: history,
        final_residual,
        converged,
        status,
        apriori,
        error_estimate,
        warnings,
    })
}

/// Adaptive schedule for the continuation parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationSpec {
    pub sigma0: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    /// Step growth factor after an accepted step.
    pub growth: f64,
    /// Maximum number of Picard solves, including rejected attempts.
    pub max_solves: usize,
    /// End point of the path in `(0, 1]`.
    pub target: f64,
}

impl Default for ContinuationSpec {
    fn default() -> Self {
        Self { sigma0: 0.05, initial_step: 0.1, min_step: 1e-3, max_step: 0.25, growth: 1.5, max_solves: 60, target: 1.0 }
    }
}

impl ContinuationSpec {
    /// Default schedule with `sigma0 C_* <= 0.05`.
    pub fn for_data_size(c_star: f64) -> Self {
        let mut s = Self::default();
        if c_star > 1.0 {
            s.sigma0 = (0.05 / c_star).max(s.min_step);
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.min_step > 0.0
            && self.min_step <= self.initial_step
            && self.initial_step <= self.max_step
            && self.sigma0 >= self.min_step
            && self.sigma0 <= 1.0
            && self.growth >= 1.0
            && self.max_solves > 0
            && self.target > 0.0
            && self.target <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Argument(format!("inconsistent continuation schedule {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceStatus {
    ReachedSigma1,
    /// Reached a target below 1.
    ReachedTarget,
    StepUnderflow,
    IterationBudget,
}

impl TraceStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            TraceStatus::ReachedSigma1 => "reached_sigma_1",
            TraceStatus::ReachedTarget => "reached_sigma_target",
            TraceStatus::StepUnderflow => "step_underflow",
            TraceStatus::IterationBudget => "iteration_budget",
        }
    }
}

/// One Picard solve along the path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub sigma: f64,
    pub x_norm: f64,
    pub converged: bool,
    /// Distance in `sigma` from the last accepted point (`sigma0` for the first).
    pub step: f64,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct ContinuationTrace {
    /// Accepted steps, with strictly increasing `sigma`.
    pub steps: Vec<TraceEntry>,
    /// Every attempt in order, including rejected ones.
    pub attempts: Vec<TraceEntry>,
    pub status: TraceStatus,
}

impl ContinuationTrace {
    /// Accepted steps as CSV after a `# key=value` header; the terminal
    /// status is repeated in the last column.
    pub fn write_csv<W: Write>(&self, w: W, meta: &[(String, String)]) -> Result<()> {
        write_entries(w, meta, &self.steps, self.status)
    }

    /// Every attempt, accepted or not.
    pub fn write_attempts_csv<W: Write>(&self, w: W, meta: &[(String, String)]) -> Result<()> {
        write_entries(w, meta, &self.attempts, self.status)
    }

    pub fn write_summary<W: Write>(&self, mut w: W, meta: &[(String, String)]) -> Result<()> {
        write_meta(&mut w, meta)?;
        writeln!(w, "status={}", self.status.as_str())?;
        writeln!(w, "accepted_steps={}", self.steps.len())?;
        writeln!(w, "attempts={}", self.attempts.len())?;
        let last = self.steps.last();
        writeln!(w, "final_sigma={}", last.map_or(0.0, |e| e.sigma))?;
        writeln!(w, "final_x_norm={}", last.map_or(0.0, |e| e.x_norm))?;
        Ok(())
    }
}

fn write_entries<W: Write>(mut w: W, meta: &[(String, String)], entries: &[TraceEntry], status: TraceStatus) -> Result<()> {
    write_meta(&mut w, meta)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["sigma", "x_norm", "converged", "step", "iterations", "residual", "status"])
        .map_err(csv_err)?;
    for e in entries {
        csv.write_record([
            e.sigma.to_string(),
            e.x_norm.to_string(),
            e.converged.to_string(),
            e.step.to_string(),
            e.iterations.to_string(),
            e.residual.to_string(),
            status.as_str().to_string(),
        ])
        .map_err(csv_err)?;
    }
    csv.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ContinuationOutcome {
    pub trace: ContinuationTrace,
    /// Solve results of the accepted steps.
    pub results: Vec<SolveResult>,
}

impl ContinuationOutcome {
    pub fn last(&self) -> &SolveResult {
        self.results.last().expect("the first step is always accepted")
    }
}

/// Path-following in `sigma` from `sigma0` to the target, warm-starting every step
/// from the last accepted solution and halving the step on failure.
pub fn continuation<M: FixedPointMap + ?Sized>(
    map: &M,
    schedule: &ContinuationSpec,
    params: &PicardParams,
) -> Result<ContinuationOutcome> {
    continuation_observed(map, schedule, params, |_, _, _| {})
}

/// As [`continuation`], calling `observe(sigma, n, v_n)` on every iterate.
pub fn continuation_observed<M, O>(
    map: &M,
    schedule: &ContinuationSpec,
    params: &PicardParams,
    mut observe: O,
) -> Result<ContinuationOutcome>
where
    M: FixedPointMap + ?Sized,
    O: FnMut(f64, usize, &StripField),
{
    schedule.validate()?;
    params.validate()?;
    let zero = StripField::zeros(map.grid().clone(), map.gamma());
    let end = schedule.target;
    let sigma0 = schedule.sigma0.min(end);
    let first = picard_solve_observed(map, sigma0, &zero, params, |n, v| observe(sigma0, n, v))?;
    let entry = |r: &SolveResult, step: f64| TraceEntry {
        sigma: r.sigma,
        x_norm: r.v.x_norm(),
        converged: r.converged,
        step,
        iterations: r.iterations,
        residual: r.final_residual,
    };
    if !first.converged {
        return Err(Error::Solver(format!(
            "Picard iteration at sigma0 = {sigma0} ended with status {} (residual {:e}); \
             use a smaller sigma0 or smaller data",
            first.status.as_str(),
            first.final_residual
        )));
    }
    let mut attempts = vec![entry(&first, sigma0)];
    let mut steps = attempts.clone();
    let mut results = vec![first];
    let mut h = schedule.initial_step;
    let mut solves = 1;
    let status = loop {
        let current = results.last().expect("nonempty");
        let sigma = current.sigma;
        if sigma >= end {
            break if end == 1.0 { TraceStatus::ReachedSigma1 } else { TraceStatus::ReachedTarget };
        }
        if h < schedule.min_step {
            break TraceStatus::StepUnderflow;
        }
        if solves >= schedule.max_solves {
            break TraceStatus::IterationBudget;
        }
        // never leave a remainder shorter than the minimum step
        let target = if end - (sigma + h) < schedule.min_step { end } else { sigma + h };
        let step = target - sigma;
        let res = picard_solve_observed(map, target, &current.v, params, |n, v| observe(target, n, v))?;
        solves += 1;
        attempts.push(entry(&res, step));
        if res.converged {
            steps.push(entry(&res, step));
            results.push(res);
            h = (h * schedule.growth).min(schedule.max_step);
        } else {
            log::info!("continuation step to sigma = {target} failed ({}); halving", res.status.as_str());
            h = step / 2.0;
        }
    };
    Ok(ContinuationOutcome { trace: ContinuationTrace { steps, attempts, status }, results })
}
