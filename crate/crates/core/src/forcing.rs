//! The quadratic forcing `f = -(sigma U + E v) (x) (sigma U + E v)` of the
//! fixed-point map, where `U` is the heat evolution of the data and `E v` the
//! DSS extension of the strip unknown.

use std::sync::Arc;

use crate::field::StripField;
use crate::lattice::LatticeField;
use crate::semigroup::HeatSemigroup;
use crate::stokes::Force;
use crate::vec3::{outer_sym, Sym3, Vec3};
use crate::{Error, Result};

/// Far-field decay exponent of a quadratic force built from velocities that
/// decay like `1/|y|`.
pub const QUADRATIC_DECAY: f64 = 2.0;

/// Pointwise evaluator of the forcing on all of space-time.
#[derive(Debug, Clone)]
pub struct Nonlinearity {
    semigroup: Arc<HeatSemigroup>,
    v: StripField,
    sigma: f64,
}

impl Nonlinearity {
    pub fn new(semigroup: Arc<HeatSemigroup>, v: StripField, sigma: f64) -> Result<Self> {
        if !sigma.is_finite() || !(0.0..=1.0).contains(&sigma) {
            return Err(Error::Argument(format!("continuation parameter must lie in [0, 1], got {sigma}")));
        }
        Ok(Self { semigroup, v, sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// The transported velocity `sigma U + E v` at `(y, s)`.
    pub fn velocity(&self, y: &Vec3, s: f64) -> Result<Vec3> {
        let u = if self.sigma == 0.0 { [0.0; 3] } else { self.semigroup.eval(y, s)? };
        let v = self.v.extend(y, s)?;
        Ok([0, 1, 2].map(|c| self.sigma * u[c] + v[c]))
    }

    /// `f(y, s)`, symmetric by construction.
    pub fn eval(&self, y: &Vec3, s: f64) -> Result<Sym3> {
        let w = self.velocity(y, s)?;
        Ok(outer_sym(&w).map(|c| -c))
    }

    /// The forcing at every node of the unknown's lattice.
    pub fn on_lattice(&self) -> Force {
        let u = self.semigroup.on_lattice(self.v.grid().clone());
        quadratic_force(&u, &self.v, self.sigma)
    }
}

/// Forcing at the lattice nodes from precomputed samples of `U` on the same
/// lattice; at nodes the extension of `v` is its sample.
pub fn quadratic_force(u: &LatticeField<3>, v: &StripField, sigma: f64) -> Force {
    assert_eq!(u.samples.len(), v.samples().len(), "U and v must share a lattice");
    let samples = u
        .samples
        .iter()
        .zip(v.samples())
        .map(|(a, b)| {
            let w = [sigma * a[0] + b[0], sigma * a[1] + b[1], sigma * a[2] + b[2]];
            outer_sym(&w).map(|c| -c)
        })
        .collect();
    Force::new(
        LatticeField { grid: v.grid().clone(), degree: 2, samples },
        QUADRATIC_DECAY,
    )
}
