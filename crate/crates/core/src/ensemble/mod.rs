//! Gaussian band-limited fields on the model geometries.
//!
//! Every field is a finite closed-form sum of eigenfunctions with i.i.d.
//! standard Gaussian coefficients, so it can be evaluated exactly anywhere and
//! serialized for replay.

mod circle;
mod grid;
mod params;
mod planar;
mod sphere;
mod torus;

pub use circle::{sample_circle, CircleField};
pub use grid::{Geometry, Geometry3, Resolution, ScalarGrid, ScalarGrid3, Window};
pub use params::BandParams;
pub use planar::{sample_planar, PlaneWaveField};
pub use sphere::{legendre_table, sample_sphere, sphere_degrees, SphericalField};
pub use torus::{sample_torus, sample_torus3, torus_frequencies, TorusField};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Default number of plane waves in a planar realization.
pub const DEFAULT_PLANE_WAVES: usize = 4096;
/// Smallest accepted plane-wave count.
pub const MIN_PLANE_WAVES: usize = 64;

/// Any sampled field, tagged for JSON replay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum AnyField {
    Planar(PlaneWaveField),
    Sphere(SphericalField),
    Torus(TorusField),
    Circle(CircleField),
}

impl AnyField {
    /// Evaluates the field at each point. Point layout depends on geometry:
    /// `[x, y]` (or `[x, y, z]`) for planar and torus fields, `[theta, phi]`
    /// for the sphere and `[x]` for the circle.
    pub fn evaluate(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        points
            .iter()
            .map(|p| match self {
                AnyField::Planar(f) => f.value(p),
                AnyField::Sphere(f) => f.value(p),
                AnyField::Torus(f) => f.value(p),
                AnyField::Circle(f) => f.value(p),
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub(crate) fn check_point(p: &[f64], dim: usize) -> Result<()> {
    if p.len() != dim {
        return Err(crate::Error::Domain(format!(
            "expected a {dim}-dimensional point, got {} coordinates",
            p.len()
        )));
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(crate::Error::Domain("non-finite coordinate".into()));
    }
    Ok(())
}
