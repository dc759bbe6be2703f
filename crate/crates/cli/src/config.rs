//! Run configuration: `key = value` text grouped under `[section]` headers.
//!
//! ```text
//! [run]
//! lambda = 2
//! gamma = 0.5
//! c_star = 0.05
//! [grid]
//! rho_min = -1
//! ```
//!
//! Every key has a default; unknown sections or keys are rejected. The
//! canonical form lists every resolved value in a fixed order and its
//! SHA-256 digest identifies the run in every artifact header.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use dss_core::grid::GridSpec;
use dss_core::initial_data::{Family, HolderClass};
use dss_core::solver::{ContinuationSpec, PicardParams};
use dss_core::stokes::QuadratureSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub family: Family,
    pub seed: u64,
    /// Number of potential terms; 0 gives the zero datum.
    pub n_terms: usize,
    /// Highest log-periodic frequency of the potential.
    pub max_frequency: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub kernel_seed: u64,
    pub kernel_points: usize,
    /// `(a, b)` exponent pairs of the convolution-integral audit.
    pub cal_pairs: Vec<(f64, f64)>,
    /// Radii per decade of the convolution-integral sweep.
    pub cal_per_decade: usize,
    /// Decay parameters `m` of the Stokes potential audit.
    pub stokes_m: Vec<f64>,
    /// Hoelder exponents of the Stokes potential audit.
    pub holder_theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub lambda: f64,
    pub gamma: f64,
    /// Present for `C^{1,beta}` data; `C^gamma` data otherwise.
    pub beta: Option<f64>,
    pub c_star: f64,
    pub sigma_target: f64,
    pub data: DataConfig,
    /// Grid parameters; `grid.lambda` always equals `lambda`.
    pub grid: GridSpec,
    pub quadrature: QuadratureSpec,
    pub solver: PicardParams,
    pub continuation: ContinuationSpec,
    pub verify: VerifyConfig,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let c_star = 0.05;
        Self {
            lambda: 2.0,
            gamma: 0.5,
            beta: None,
            c_star,
            sigma_target: 1.0,
            data: DataConfig { family: Family::Generic, seed: 1, n_terms: 3, max_frequency: 0 },
            grid: GridSpec::default(),
            quadrature: QuadratureSpec::default(),
            solver: PicardParams::default(),
            continuation: ContinuationSpec::for_data_size(c_star),
            verify: VerifyConfig {
                kernel_seed: 1,
                kernel_points: 100,
                cal_pairs: vec![(4.0, 2.0), (4.0, 3.0), (3.0, 3.0), (4.0, 2.5)],
                cal_per_decade: 3,
                stokes_m: vec![0.0, 0.5],
                holder_theta: vec![0.3, 0.7],
            },
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

type Table = BTreeMap<(String, String), (usize, String)>;

fn parse_table(text: &str) -> Result<Table, ConfigError> {
    let mut table = Table::new();
    let mut section = "run".to_string();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            section = name
                .strip_suffix(']')
                .ok_or_else(|| ConfigError(format!("line {}: unterminated section header", n + 1)))?
                .trim()
                .to_string();
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("line {}: expected `key = value`", n + 1)))?;
        let key = (section.clone(), k.trim().to_string());
        if table.insert(key.clone(), (n + 1, v.trim().to_string())).is_some() {
            return Err(ConfigError(format!("line {}: duplicate key {}.{}", n + 1, key.0, key.1)));
        }
    }
    Ok(table)
}

struct Reader {
    table: Table,
}

impl Reader {
    fn take<T: FromStr>(&mut self, section: &str, key: &str, slot: &mut T) -> Result<(), ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        if let Some((line, v)) = self.table.remove(&(section.to_string(), key.to_string())) {
            *slot = v
                .parse()
                .map_err(|e| ConfigError(format!("line {line}: {section}.{key} = `{v}`: {e}")))?;
        }
        Ok(())
    }

    fn take_with<T>(
        &mut self,
        section: &str,
        key: &str,
        slot: &mut T,
        parse: impl Fn(&str) -> Option<T>,
    ) -> Result<(), ConfigError> {
        if let Some((line, v)) = self.table.remove(&(section.to_string(), key.to_string())) {
            *slot = parse(&v).ok_or_else(|| ConfigError(format!("line {line}: {section}.{key} = `{v}` is invalid")))?;
        }
        Ok(())
    }
}

fn parse_family(s: &str) -> Option<Family> {
    match s {
        "generic" => Some(Family::Generic),
        "axisym-noswirl" => Some(Family::AxisymNoSwirl),
        _ => None,
    }
}

fn family_name(f: Family) -> &'static str {
    match f {
        Family::Generic => "generic",
        Family::AxisymNoSwirl => "axisym-noswirl",
    }
}

fn parse_list(s: &str) -> Option<Vec<f64>> {
    if s.is_empty() {
        return Some(Vec::new());
    }
    s.split(',').map(|x| x.trim().parse().ok()).collect()
}

fn parse_pairs(s: &str) -> Option<Vec<(f64, f64)>> {
    if s.is_empty() {
        return Some(Vec::new());
    }
    s.split(',')
        .map(|p| {
            let (a, b) = p.split_once(':')?;
            Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
        })
        .collect()
}

fn list(xs: &[f64]) -> String {
    xs.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut r = Reader { table: parse_table(text)? };
        let mut c = RunConfig::default();
        r.take("run", "lambda", &mut c.lambda)?;
        r.take("run", "gamma", &mut c.gamma)?;
        r.take_with("run", "beta", &mut c.beta, |v| match v {
            "none" => Some(None),
            _ => v.parse().ok().map(Some),
        })?;
        r.take("run", "c_star", &mut c.c_star)?;
        r.take("run", "sigma_target", &mut c.sigma_target)?;
        let mut out = c.output_dir.display().to_string();
        r.take("run", "output_dir", &mut out)?;
        c.output_dir = PathBuf::from(out);

        r.take_with("data", "family", &mut c.data.family, parse_family)?;
        r.take("data", "seed", &mut c.data.seed)?;
        r.take("data", "n_terms", &mut c.data.n_terms)?;
        r.take("data", "max_frequency", &mut c.data.max_frequency)?;

        let g = &mut c.grid;
        r.take("grid", "shells_per_period", &mut g.shells_per_period)?;
        r.take("grid", "rho_min", &mut g.rho_min)?;
        r.take("grid", "rho_max", &mut g.rho_max)?;
        r.take("grid", "n_theta", &mut g.n_theta)?;
        r.take("grid", "n_phi", &mut g.n_phi)?;
        r.take("grid", "n_time", &mut g.n_time)?;
        c.grid.lambda = c.lambda;

        let q = &mut c.quadrature;
        r.take("quadrature", "near_radius_factor", &mut q.near_radius_factor)?;
        r.take("quadrature", "k_min_offset", &mut q.k_min_offset)?;
        r.take("quadrature", "shell_resolution", &mut q.shell_resolution)?;
        r.take("quadrature", "radial_order", &mut q.radial_order)?;
        r.take("quadrature", "angle_resolution", &mut q.angle_resolution)?;
        r.take("quadrature", "time_resolution", &mut q.time_resolution)?;
        r.take("quadrature", "target_tol", &mut q.target_tol)?;

        let s = &mut c.solver;
        r.take("solver", "tol", &mut s.tol)?;
        r.take("solver", "max_iter", &mut s.max_iter)?;
        r.take("solver", "damping", &mut s.damping)?;
        r.take("solver", "anderson_depth", &mut s.anderson_depth)?;

        c.continuation = ContinuationSpec::for_data_size(c.c_star);
        let k = &mut c.continuation;
        r.take("continuation", "sigma0", &mut k.sigma0)?;
        r.take("continuation", "initial_step", &mut k.initial_step)?;
        r.take("continuation", "min_step", &mut k.min_step)?;
        r.take("continuation", "max_step", &mut k.max_step)?;
        r.take("continuation", "growth", &mut k.growth)?;
        r.take("continuation", "max_solves", &mut k.max_solves)?;
        c.continuation.target = c.sigma_target;

        let v = &mut c.verify;
        r.take("verify", "kernel_seed", &mut v.kernel_seed)?;
        r.take("verify", "kernel_points", &mut v.kernel_points)?;
        r.take_with("verify", "cal_pairs", &mut v.cal_pairs, parse_pairs)?;
        r.take("verify", "cal_per_decade", &mut v.cal_per_decade)?;
        r.take_with("verify", "stokes_m", &mut v.stokes_m, parse_list)?;
        r.take_with("verify", "holder_theta", &mut v.holder_theta, parse_list)?;

        if let Some(((section, key), (line, _))) = r.table.into_iter().next() {
            return Err(ConfigError(format!("line {line}: unknown key {section}.{key}")));
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn holder_class(&self) -> HolderClass {
        match self.beta {
            Some(b) => HolderClass::OneBeta(b),
            None => HolderClass::Gamma(self.gamma),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: String| Err(ConfigError(m));
        if !(self.lambda > 1.0) || !self.lambda.is_finite() {
            return fail(format!("lambda must exceed 1, got {}", self.lambda));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return fail(format!("gamma must lie in (0,1), got {}", self.gamma));
        }
        if let Some(b) = self.beta {
            if !(b > 0.0 && b < 1.0) {
                return fail(format!("beta must lie in (0,1), got {b}"));
            }
        }
        if !(self.c_star >= 0.0) || !self.c_star.is_finite() {
            return fail(format!("c_star must be non-negative, got {}", self.c_star));
        }
        if !(self.sigma_target > 0.0 && self.sigma_target <= 1.0) {
            return fail(format!("sigma_target must lie in (0,1], got {}", self.sigma_target));
        }
        if !(self.quadrature.target_tol > 0.0) {
            return fail("quadrature.target_tol must be positive".into());
        }
        self.quadrature.validate().map_err(|e| ConfigError(e.to_string()))?;
        self.solver.validate().map_err(|e| ConfigError(e.to_string()))?;
        self.continuation.validate().map_err(|e| ConfigError(e.to_string()))?;
        dss_core::grid::StripGrid::new(&self.grid).map_err(|e| ConfigError(e.to_string()))?;
        if self.verify.kernel_points == 0 || self.verify.cal_per_decade == 0 {
            return fail("verify sweeps need at least one point".into());
        }
        if self.verify.stokes_m.iter().any(|m| !(*m >= 0.0 && *m < 1.0)) {
            return fail("verify.stokes_m values must lie in [0,1)".into());
        }
        if self.verify.holder_theta.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return fail("verify.holder_theta values must lie in (0,1)".into());
        }
        Ok(())
    }

    /// Every computational parameter in a fixed order. The output directory
    /// is excluded: it does not affect any computed value.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let c = self;
        let _ = writeln!(s, "[run]");
        let _ = writeln!(s, "lambda={}", c.lambda);
        let _ = writeln!(s, "gamma={}", c.gamma);
        let _ = writeln!(s, "beta={}", c.beta.map_or("none".to_string(), |b| b.to_string()));
        let _ = writeln!(s, "c_star={}", c.c_star);
        let _ = writeln!(s, "sigma_target={}", c.sigma_target);
        let _ = writeln!(s, "[data]");
        let _ = writeln!(s, "family={}", family_name(c.data.family));
        let _ = writeln!(s, "seed={}", c.data.seed);
        let _ = writeln!(s, "n_terms={}", c.data.n_terms);
        let _ = writeln!(s, "max_frequency={}", c.data.max_frequency);
        let g = &c.grid;
        let _ = writeln!(s, "[grid]");
        let _ = writeln!(s, "shells_per_period={}", g.shells_per_period);
        let _ = writeln!(s, "rho_min={}", g.rho_min);
        let _ = writeln!(s, "rho_max={}", g.rho_max);
        let _ = writeln!(s, "n_theta={}", g.n_theta);
        let _ = writeln!(s, "n_phi={}", g.n_phi);
        let _ = writeln!(s, "n_time={}", g.n_time);
        let q = &c.quadrature;
        let _ = writeln!(s, "[quadrature]");
        let _ = writeln!(s, "near_radius_factor={}", q.near_radius_factor);
        let _ = writeln!(s, "k_min_offset={}", q.k_min_offset);
        let _ = writeln!(s, "shell_resolution={}", q.shell_resolution);
        let _ = writeln!(s, "radial_order={}", q.radial_order);
        let _ = writeln!(s, "angle_resolution={}", q.angle_resolution);
        let _ = writeln!(s, "time_resolution={}", q.time_resolution);
        let _ = writeln!(s, "target_tol={}", q.target_tol);
        let p = &c.solver;
        let _ = writeln!(s, "[solver]");
        let _ = writeln!(s, "tol={}", p.tol);
        let _ = writeln!(s, "max_iter={}", p.max_iter);
        let _ = writeln!(s, "damping={}", p.damping);
        let _ = writeln!(s, "anderson_depth={}", p.anderson_depth);
        let k = &c.continuation;
        let _ = writeln!(s, "[continuation]");
        let _ = writeln!(s, "sigma0={}", k.sigma0);
        let _ = writeln!(s, "initial_step={}", k.initial_step);
        let _ = writeln!(s, "min_step={}", k.min_step);
        let _ = writeln!(s, "max_step={}", k.max_step);
        let _ = writeln!(s, "growth={}", k.growth);
        let _ = writeln!(s, "max_solves={}", k.max_solves);
        let v = &c.verify;
        let _ = writeln!(s, "[verify]");
        let _ = writeln!(s, "kernel_seed={}", v.kernel_seed);
        let _ = writeln!(s, "kernel_points={}", v.kernel_points);
        let pairs: Vec<String> = v.cal_pairs.iter().map(|(a, b)| format!("{a}:{b}")).collect();
        let _ = writeln!(s, "cal_pairs={}", pairs.join(","));
        let _ = writeln!(s, "cal_per_decade={}", v.cal_per_decade);
        let _ = writeln!(s, "stokes_m={}", list(&v.stokes_m));
        let _ = writeln!(s, "holder_theta={}", list(&v.holder_theta));
        s
    }

    /// Hex SHA-256 of [`RunConfig::canonical`].
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
