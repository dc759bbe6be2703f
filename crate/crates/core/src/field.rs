//! Velocity fields on the fundamental strip: the unknown `v` of the fixed
//! point problem, its weighted norm, DSS extension and snapshot format.

use std::io::{BufRead, Write};
use std::sync::{Arc, OnceLock};

use crate::grid::{epoch_of, GridSpec, StripGrid};
use crate::lattice::{bracket, cubic_weights, Interpolator, LatticeField};
use crate::vec3::{norm, Vec3};
use crate::{Error, Result};

/// A velocity field sampled on the strip, in the weighted space with decay
/// exponent `gamma`.
#[derive(Debug, Clone)]
pub struct StripField {
    pub field: LatticeField<3>,
    pub gamma: f64,
    interp: OnceLock<Arc<Interpolator<3>>>,
}

impl StripField {
    pub fn new(field: LatticeField<3>, gamma: f64) -> Self {
        assert_eq!(field.degree, 1, "velocity fields have homogeneity degree 1");
        Self {
            field,
            gamma,
            interp: OnceLock::new(),
        }
    }

    pub fn zeros(grid: Arc<StripGrid>, gamma: f64) -> Self {
        Self::new(LatticeField::zeros(grid, 1), gamma)
    }

    pub fn from_fn<F>(grid: Arc<StripGrid>, gamma: f64, f: F) -> Self
    where
        F: Fn(&Vec3, f64) -> [f64; 3] + Sync,
    {
        Self::new(LatticeField::from_fn(grid, 1, f), gamma)
    }

    pub fn grid(&self) -> &Arc<StripGrid> {
        &self.field.grid
    }

    pub fn samples(&self) -> &[[f64; 3]] {
        &self.field.samples
    }

    pub fn interpolator(&self) -> Arc<Interpolator<3>> {
        self.interp
            .get_or_init(|| Arc::new(self.field.interpolator(1.0 + self.gamma)))
            .clone()
    }

    /// `sup <x>^{1+gamma} |v(x,t)|` over the lattice. The far-field model
    /// decays at least like `<x>^{-(1+gamma)}`, so its weighted supremum is
    /// attained on the outermost shell and is already included.
    pub fn x_norm(&self) -> f64 {
        let g = self.grid();
        let mut sup: f64 = 0.0;
        for (idx, v) in self.samples().iter().enumerate() {
            let (i, _, _) = g.unindex(idx);
            let w = bracket(&[g.radius(i as isize)]).powf(1.0 + self.gamma);
            sup = sup.max(w * norm(v));
        }
        sup
    }

    /// Weighted distance `||self - other||_X`.
    pub fn x_distance(&self, other: &StripField) -> f64 {
        self.combine(1.0, other, -1.0).x_norm()
    }

    pub fn combine(&self, a: f64, other: &StripField, b: f64) -> StripField {
        StripField::new(self.field.combine(a, &other.field, b), self.gamma)
    }

    pub fn scaled(&self, a: f64) -> StripField {
        StripField::new(self.field.scaled(a), self.gamma)
    }

    /// DSS extension `E v(x,t) = lambda^k v(lambda^k x, lambda^{2k} t)`.
    pub fn extend(&self, x: &Vec3, t: f64) -> Result<Vec3> {
        Ok(self.extend_with_epoch(x, t)?.1)
    }

    /// DSS extension together with the epoch `k` used.
    pub fn extend_with_epoch(&self, x: &Vec3, t: f64) -> Result<(i32, Vec3)> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Domain(format!("extension needs t > 0, got {t}")));
        }
        Ok((epoch_of(self.grid().lambda, t), self.interpolator().eval(x, t)))
    }

    /// Mismatch of the strip ends: `v(x, 1)` against `lambda v(lambda x, lambda^2)`
    /// extrapolated cubically in `ln t` from the last four slices, weighted
    /// like the X-norm. Only shells whose image stays on the lattice count.
    pub fn boundary_mismatch(&self) -> f64 {
        let g = self.grid();
        let nt = g.n_time;
        if nt < 4 {
            return 0.0;
        }
        let p = g.shells_per_period;
        // Extrapolate to slice index nt from slices nt-4..nt-1: offset f = 2
        // relative to a stencil starting at nt-3 (offsets -1, 0, 1, 2 -> nt-4.. nt-1)
        // gives the value at nt-1; shift by one more slice.
        let w = cubic_weights(3.0);
        let mut sup: f64 = 0.0;
        for i in 0..g.n_rho.saturating_sub(p) {
            let wgt = bracket(&[g.radius(i as isize)]).powf(1.0 + self.gamma);
            for a in 0..g.n_ang() {
                let v1 = self.field.get(i, a, 0);
                let mut ext = [0.0; 3];
                for (b, wb) in w.iter().enumerate() {
                    let s = self.field.get(i + p, a, nt - 4 + b);
                    for c in 0..3 {
                        ext[c] += wb * s[c];
                    }
                }
                let d = [v1[0] - g.lambda * ext[0], v1[1] - g.lambda * ext[1], v1[2] - g.lambda * ext[2]];
                sup = sup.max(wgt * norm(&d));
            }
        }
        sup
    }

    /// Writes the snapshot: `# key=value` lines for `extra`, a `key=value`
    /// grid header, a column line, then one record per node in lattice order
    /// with round-trip precision.
    pub fn write_snapshot<W: Write>(&self, mut w: W, extra: &[(String, String)]) -> Result<()> {
        let s = self.grid().spec();
        for (k, v) in extra {
            writeln!(w, "# {k}={v}")?;
        }
        writeln!(w, "# dss strip field snapshot")?;
        writeln!(w, "lambda={}", s.lambda)?;
        writeln!(w, "gamma={}", self.gamma)?;
        writeln!(w, "shells_per_period={}", s.shells_per_period)?;
        writeln!(w, "n_rho={}", self.grid().n_rho)?;
        writeln!(w, "rho_min={}", s.rho_min)?;
        writeln!(w, "rho_max={}", s.rho_max)?;
        writeln!(w, "n_theta={}", s.n_theta)?;
        writeln!(w, "n_phi={}", s.n_phi)?;
        writeln!(w, "n_time={}", s.n_time)?;
        writeln!(w, "columns=shell,angle,time,v1,v2,v3")?;
        let g = self.grid();
        for j in 0..g.n_time {
            for i in 0..g.n_rho {
                for a in 0..g.n_ang() {
                    let v = self.field.get(i, a, j);
                    writeln!(w, "{i} {a} {j} {} {} {}", v[0], v[1], v[2])?;
                }
            }
        }
        Ok(())
    }

    pub fn read_snapshot<R: BufRead>(r: R) -> Result<Self> {
        let mut header = std::collections::BTreeMap::new();
        let mut lines = r.lines();
        for line in lines.by_ref() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad header line `{line}`")))?;
            if k == "columns" {
                break;
            }
            header.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| -> Result<&String> {
            header.get(k).ok_or_else(|| Error::Parse(format!("snapshot header lacks `{k}`")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?.parse::<f64>().map_err(|e| Error::Parse(format!("{k}: {e}")))
        };
        let int = |k: &str| -> Result<usize> {
            get(k)?.parse::<usize>().map_err(|e| Error::Parse(format!("{k}: {e}")))
        };
        let spec = GridSpec {
            lambda: num("lambda")?,
            shells_per_period: int("shells_per_period")?,
            rho_min: num("rho_min")?,
            rho_max: num("rho_max")?,
            n_theta: int("n_theta")?,
            n_phi: int("n_phi")?,
            n_time: int("n_time")?,
        };
        let grid = Arc::new(StripGrid::new(&spec)?);
        if grid.n_rho != int("n_rho")? {
            return Err(Error::Parse("n_rho inconsistent with rho bounds".into()));
        }
        let mut field = LatticeField::<3>::zeros(grid.clone(), 1);
        let mut seen = 0usize;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 6 {
                return Err(Error::Parse(format!("bad record `{line}`")));
            }
            let p = |k: usize| -> Result<usize> {
                parts[k].parse().map_err(|e| Error::Parse(format!("{e}")))
            };
            let f = |k: usize| -> Result<f64> {
                parts[k].parse().map_err(|e| Error::Parse(format!("{e}")))
            };
            let (i, a, j) = (p(0)?, p(1)?, p(2)?);
            if i >= grid.n_rho || a >= grid.n_ang() || j >= grid.n_time {
                return Err(Error::Parse(format!("record index out of range `{line}`")));
            }
            field.samples[grid.index(i, a, j)] = [f(3)?, f(4)?, f(5)?];
            seen += 1;
        }
        if seen != grid.len() {
            return Err(Error::Parse(format!("expected {} records, found {seen}", grid.len())));
        }
        Ok(StripField::new(field, num("gamma")?))
    }
}
