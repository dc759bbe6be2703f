//! Pipelines behind the subcommands. Every artifact starts with
//! `# config_hash=<sha256>`.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use dss_core::estimates::{
    cal_radius_sweep, kernel_audit, phi_cal_bound_check, phi_holder_check, stokes_decay_check, CalSpec,
    EstimateReport,
};
use dss_core::field::StripField;
use dss_core::grid::StripGrid;
use dss_core::initial_data::{make_axisym_noswirl, make_initial_data, DssInitialData, Family, ProfileSpec};
use dss_core::solver::{continuation, ContinuationOutcome, Problem, TraceStatus};

use crate::config::RunConfig;

/// Failure classes with their process exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Invalid configuration or input (exit 2).
    Config(String),
    /// The continuation did not reach its target (exit 3).
    Stall(String),
    /// At least one audit verdict failed (exit 4).
    Audit(String),
    /// Anything else, e.g. I/O (exit 1).
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Config(_) => 2,
            Failure::Stall(_) => 3,
            Failure::Audit(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Stall(m) | Failure::Audit(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<dss_core::Error> for Failure {
    fn from(e: dss_core::Error) -> Self {
        match e {
            dss_core::Error::Argument(_) | dss_core::Error::Parse(_) => Failure::Config(e.to_string()),
            dss_core::Error::Solver(_) => Failure::Stall(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

pub type Outcome = Result<(), Failure>;

/// Output location and the header shared by every artifact of a run.
pub struct Artifacts {
    dir: PathBuf,
    meta: Vec<(String, String)>,
}

impl Artifacts {
    pub fn new(dir: &Path, config: &RunConfig) -> Result<Self, Failure> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), meta: vec![("config_hash".into(), config.hash())] })
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>, Failure> {
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn write<F>(&self, name: &str, body: F) -> Outcome
    where
        F: FnOnce(&mut BufWriter<File>, &[(String, String)]) -> dss_core::Result<()>,
    {
        let mut w = self.create(name)?;
        body(&mut w, &self.meta).map_err(|e| Failure::Runtime(format!("{name}: {e}")))?;
        w.flush()?;
        Ok(())
    }

    fn header(&self, w: &mut impl Write) -> std::io::Result<()> {
        for (k, v) in &self.meta {
            writeln!(w, "# {k}={v}")?;
        }
        Ok(())
    }

    /// Writes `<name>.csv` and `<name>.verdict` for a report.
    fn report(&self, rep: &EstimateReport) -> Outcome {
        self.write(&format!("{}.csv", rep.name), |w, m| rep.write_csv(w, m))?;
        self.write(&format!("{}.verdict", rep.name), |w, m| rep.write_verdict(w, m))
    }
}

/// The initial datum described by the configuration; `n_terms = 0` or
/// `c_star = 0` give the zero datum.
pub fn build_data(config: &RunConfig) -> Result<DssInitialData, Failure> {
    let holder = config.holder_class();
    if config.data.n_terms == 0 || config.c_star == 0.0 {
        return Ok(make_initial_data(ProfileSpec::zero(holder), config.lambda, 1.0)?);
    }
    let d = &config.data;
    let spec = ProfileSpec::random(d.seed, d.family, holder, d.n_terms, d.max_frequency);
    Ok(match d.family {
        Family::Generic => make_initial_data(spec, config.lambda, config.c_star)?,
        Family::AxisymNoSwirl => make_axisym_noswirl(spec, config.lambda, config.c_star)?,
    })
}

pub fn build_problem(config: &RunConfig) -> Result<Problem, Failure> {
    let grid = Arc::new(StripGrid::new(&config.grid)?);
    let data = Arc::new(build_data(config)?);
    Ok(Problem::new(data, grid, config.gamma, config.quadrature)?)
}

/// Builds the datum, follows the path to `sigma_target` and persists the
/// solution, its history, the trace, the a priori monitor and a summary.
pub fn run_solve(config: &RunConfig, out: &Path) -> Outcome {
    let art = Artifacts::new(out, config)?;
    let problem = build_problem(config)?;
    let outcome = match continuation(&problem, &config.continuation, &config.solver) {
        Ok(o) => o,
        Err(e @ dss_core::Error::Solver(_)) => {
            let mut w = art.create("continuation_summary.txt")?;
            art.header(&mut w)?;
            writeln!(w, "status=first_step_failed")?;
            writeln!(w, "message={e}")?;
            w.flush()?;
            return Err(Failure::Stall(e.to_string()));
        }
        Err(e) => return Err(e.into()),
    };
    persist_solve(&art, config, &problem, &outcome)?;
    let last = outcome.last();
    let reached = matches!(outcome.trace.status, TraceStatus::ReachedSigma1 | TraceStatus::ReachedTarget);
    if reached && last.converged && last.sigma == config.sigma_target {
        Ok(())
    } else {
        Err(Failure::Stall(format!(
            "continuation ended with status {} at sigma = {}",
            outcome.trace.status.as_str(),
            last.sigma
        )))
    }
}

fn persist_solve(art: &Artifacts, config: &RunConfig, problem: &Problem, outcome: &ContinuationOutcome) -> Outcome {
    let last = outcome.last();
    art.write("continuation_trace.csv", |w, m| outcome.trace.write_csv(w, m))?;
    art.write("continuation_attempts.csv", |w, m| outcome.trace.write_attempts_csv(w, m))?;
    art.write("continuation_summary.txt", |w, m| outcome.trace.write_summary(w, m))?;
    art.write("solve_history.csv", |w, m| last.write_history_csv(w, m))?;
    art.write("solve_summary.txt", |w, m| last.write_summary(w, m))?;
    art.write("v_snapshot.txt", |w, m| last.v.write_snapshot(w, m))?;
    let u = StripField::new(problem.assembled_on_lattice(&last.v, last.sigma), config.gamma);
    art.write("u_snapshot.txt", |w, m| u.write_snapshot(w, m))?;

    let a = &last.apriori;
    let mut w = art.create("apriori.txt")?;
    art.header(&mut w)?;
    writeln!(w, "c_u={}", a.c_u)?;
    writeln!(w, "c_v_quadratic={}", a.c_v_quadratic)?;
    writeln!(w, "c_v_gamma={}", a.c_v_gamma)?;
    writeln!(w, "finite={}", a.finite)?;
    w.flush()?;

    let monotone = outcome.trace.steps.windows(2).all(|p| p[1].sigma > p[0].sigma);
    let mismatch = last.v.boundary_mismatch();
    let ok = last.converged && a.finite && monotone;
    let mut w = art.create("audit_summary.txt")?;
    art.header(&mut w)?;
    writeln!(w, "continuation_status={}", outcome.trace.status.as_str())?;
    writeln!(w, "sigma_reached={}", last.sigma)?;
    writeln!(w, "sigma_target={}", config.sigma_target)?;
    writeln!(w, "final_converged={}", last.converged)?;
    writeln!(w, "final_residual={}", last.final_residual)?;
    writeln!(w, "x_norm={}", last.v.x_norm())?;
    writeln!(w, "quadrature_error_estimate={}", last.error_estimate)?;
    writeln!(w, "strip_boundary_mismatch={mismatch}")?;
    writeln!(w, "apriori_finite={}", a.finite)?;
    writeln!(w, "trace_monotone={monotone}")?;
    writeln!(w, "verdict={}", if ok { "pass" } else { "fail" })?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Kernels,
    Estimates,
    All,
}

impl std::str::FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "kernels" => Ok(Suite::Kernels),
            "estimates" => Ok(Suite::Estimates),
            "all" => Ok(Suite::All),
            _ => Err(format!("unknown suite `{s}` (kernels, estimates, all)")),
        }
    }
}

/// Runs an audit suite, persisting every report; fails with exit 4 when any
/// verdict fails.
pub fn run_verify(config: &RunConfig, suite: Suite, out: &Path) -> Outcome {
    let art = Artifacts::new(out, config)?;
    let mut reports = Vec::new();
    if matches!(suite, Suite::Kernels | Suite::All) {
        reports.extend(kernel_audit(config.verify.kernel_seed, config.verify.kernel_points)?);
    }
    if matches!(suite, Suite::Estimates | Suite::All) {
        let v = &config.verify;
        let radii = cal_radius_sweep(v.cal_per_decade);
        for &(a, b) in &v.cal_pairs {
            let mut rep = phi_cal_bound_check(a, b, &radii, &CalSpec::default())?;
            rep.name = format!("phi_cal_bound_a{a}_b{b}");
            reports.push(rep);
        }
        let grid = Arc::new(StripGrid::new(&config.grid)?);
        for &m in &v.stokes_m {
            let mut rep = stokes_decay_check(m, grid.clone(), &config.quadrature)?;
            rep.name = format!("stokes_decay_m{m}");
            reports.push(rep);
        }
        for &theta in &v.holder_theta {
            let mut rep = phi_holder_check(theta, grid.clone(), &config.quadrature)?;
            rep.name = format!("phi_holder_theta{theta}");
            reports.push(rep);
        }
    }
    for rep in &reports {
        art.report(rep)?;
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed()).map(|r| r.name.as_str()).collect();
    let mut w = art.create("verify_summary.txt")?;
    art.header(&mut w)?;
    for r in &reports {
        writeln!(w, "{}={}", r.name, r.verdict.as_str())?;
    }
    writeln!(w, "verdict={}", if failed.is_empty() { "pass" } else { "fail" })?;
    w.flush()?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Audit(format!("failed audits: {}", failed.join(", "))))
    }
}

/// Evaluates the DSS extension of a snapshot at the points of a CSV file
/// with columns `x1,x2,x3,t`; rows with `t <= 0` are skipped and counted.
pub fn run_extend(config: &RunConfig, snapshot: &Path, points: &Path, out: &Path) -> Outcome {
    let art = Artifacts::new(out, config)?;
    let file = File::open(snapshot).map_err(|e| Failure::Config(format!("{}: {e}", snapshot.display())))?;
    let v = StripField::read_snapshot(BufReader::new(file))?;
    let file = File::open(points).map_err(|e| Failure::Config(format!("{}: {e}", points.display())))?;
    let mut rows = Vec::new();
    let mut skipped = 0usize;
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('x') {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| Failure::Config(format!("{} line {}: {e}", points.display(), n + 1)))?;
        if vals.len() != 4 {
            return Err(Failure::Config(format!("{} line {}: expected x1,x2,x3,t", points.display(), n + 1)));
        }
        if !(vals[3] > 0.0) {
            skipped += 1;
            continue;
        }
        let x = [vals[0], vals[1], vals[2]];
        let (k, e) = v.extend_with_epoch(&x, vals[3])?;
        rows.push((x, vals[3], k, e));
    }
    let mut w = art.create("extend.csv")?;
    art.header(&mut w)?;
    writeln!(w, "# skipped_rows={skipped}")?;
    writeln!(w, "x1,x2,x3,t,k,Ev1,Ev2,Ev3")?;
    for (x, t, k, e) in rows {
        writeln!(w, "{},{},{},{t},{k},{},{},{}", x[0], x[1], x[2], e[0], e[1], e[2])?;
    }
    w.flush()?;
    if skipped > 0 {
        eprintln!("extend: skipped {skipped} rows with t <= 0");
    }
    Ok(())
}

/// Aggregates the verdict files of an output directory into `report.txt`;
/// fails with exit 4 when any recorded verdict failed.
pub fn run_report(config: &RunConfig, out: &Path) -> Outcome {
    let mut entries = Vec::new();
    let mut names: Vec<PathBuf> = fs::read_dir(out)
        .map_err(|e| Failure::Config(format!("{}: {e}", out.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.ends_with(".verdict") || name == "audit_summary.txt"
        })
        .collect();
    names.sort();
    for path in names {
        let text = fs::read_to_string(&path)?;
        let verdict = text
            .lines()
            .rev()
            .find_map(|l| l.strip_prefix("verdict="))
            .unwrap_or("missing")
            .to_string();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("").to_string();
        entries.push((name, verdict));
    }
    let art = Artifacts::new(out, config)?;
    let failed = entries.iter().filter(|e| e.1 != "pass").count();
    let mut w = art.create("report.txt")?;
    art.header(&mut w)?;
    for (name, verdict) in &entries {
        writeln!(w, "{name}={verdict}")?;
    }
    writeln!(w, "artifacts={}", entries.len())?;
    writeln!(w, "failed={failed}")?;
    writeln!(w, "verdict={}", if failed == 0 { "pass" } else { "fail" })?;
    w.flush()?;
    for (name, verdict) in &entries {
        println!("{verdict:>4}  {name}");
    }
    if entries.is_empty() {
        return Err(Failure::Config(format!("no verdicts found in {}", out.display())));
    }
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Audit(format!("{failed} failed verdicts")))
    }
}
