use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometry of a 2-D sample grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Geometry {
    /// Rectangular window of the plane; no wrap.
    PlanarRect,
    /// Flat torus; both axes wrap.
    FlatTorus,
    /// Equiangular colatitude/longitude grid. Row 0 is the north pole and the
    /// last row the south pole; each polar row repeats the pole value.
    /// Columns wrap.
    SphereLonLat,
}

impl Geometry {
    pub fn wraps_cols(self) -> bool {
        !matches!(self, Geometry::PlanarRect)
    }

    pub fn wraps_rows(self) -> bool {
        matches!(self, Geometry::FlatTorus)
    }

    pub fn is_closed(self) -> bool {
        !matches!(self, Geometry::PlanarRect)
    }
}

/// Geometry of a 3-D sample grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Geometry3 {
    Torus3,
    Box,
}

/// Row-major field samples on a structured 2-D grid.
///
/// Sample `(i, j)` sits at `(origin.0 + i * spacing.0, origin.1 + j * spacing.1)`
/// in (row, column) coordinates: `(y, x)` for planar and torus grids,
/// `(theta, phi)` for the sphere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarGrid {
    pub geometry: Geometry,
    pub rows: usize,
    pub cols: usize,
    pub spacing: (f64, f64),
    pub origin: (f64, f64),
    pub values: Vec<f64>,
    /// Optional field values at cell centres, used to disambiguate saddle
    /// cells. Indexed like `values`; cell `(i, j)` spans samples `i..=i+1`,
    /// `j..=j+1`.
    pub centers: Option<Vec<f64>>,
}

impl ScalarGrid {
    pub fn new(
        geometry: Geometry,
        rows: usize,
        cols: usize,
        spacing: (f64, f64),
        origin: (f64, f64),
        values: Vec<f64>,
    ) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(Error::Parameter(format!("grid {rows}x{cols} is too small")));
        }
        if values.len() != rows * cols {
            return Err(Error::Parameter(format!(
                "grid {rows}x{cols} needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("grid contains non-finite values".into()));
        }
        Ok(ScalarGrid { geometry, rows, cols, spacing, origin, values, centers: None })
    }

    /// Samples `f(y, x)` on a planar window.
    pub fn from_fn_planar(window: Window, rows: usize, cols: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let dy = window.height / (rows - 1) as f64;
        let dx = window.width / (cols - 1) as f64;
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(f(window.y0 + i as f64 * dy, window.x0 + j as f64 * dx));
            }
        }
        Self::new(Geometry::PlanarRect, rows, cols, (dy, dx), (window.y0, window.x0), values)
    }

    /// Samples `f(y, x)` on the flat torus `[0, period)^2` with `n` samples
    /// per side.
    pub fn from_fn_torus(period: f64, n: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let h = period / n as f64;
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(f(i as f64 * h, j as f64 * h));
            }
        }
        Self::new(Geometry::FlatTorus, n, n, (h, h), (0.0, 0.0), values)
    }

    /// Attaches cell-centre samples of the same field.
    pub fn with_centers(mut self, f: impl Fn(f64, f64) -> f64) -> Self {
        let (ncr, ncc) = self.cell_shape();
        let mut centers = vec![0.0; self.rows * self.cols];
        for i in 0..ncr {
            for j in 0..ncc {
                let y = self.origin.0 + (i as f64 + 0.5) * self.spacing.0;
                let x = self.origin.1 + (j as f64 + 0.5) * self.spacing.1;
                centers[i * self.cols + j] = f(y, x);
            }
        }
        self.centers = Some(centers);
        self
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.cols + j
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    /// Number of cell rows and columns, accounting for wrap.
    pub fn cell_shape(&self) -> (usize, usize) {
        let r = if self.geometry.wraps_rows() { self.rows } else { self.rows - 1 };
        let c = if self.geometry.wraps_cols() { self.cols } else { self.cols - 1 };
        (r, c)
    }

    /// Largest physical sample spacing; on the sphere the longitude spacing is
    /// measured on the equator.
    pub fn max_spacing(&self) -> f64 {
        self.spacing.0.abs().max(self.spacing.1.abs())
    }
}

/// Row-major (`x` fastest, then `y`, then `z`) samples on a 3-D grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarGrid3 {
    pub geometry: Geometry3,
    pub shape: [usize; 3],
    pub spacing: f64,
    pub origin: [f64; 3],
    pub values: Vec<f64>,
}

impl ScalarGrid3 {
    pub fn new(geometry: Geometry3, shape: [usize; 3], spacing: f64, origin: [f64; 3], values: Vec<f64>) -> Result<Self> {
        let n = shape[0] * shape[1] * shape[2];
        if shape.iter().any(|&s| s < 2) || values.len() != n {
            return Err(Error::Parameter(format!("bad 3-D grid shape {shape:?} for {} values", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("grid contains non-finite values".into()));
        }
        Ok(ScalarGrid3 { geometry, shape, spacing, origin, values })
    }

    /// Samples `f` on an axis-aligned box with `n` samples per side, spanning
    /// `[lo, hi]^3`.
    pub fn from_fn_box(lo: f64, hi: f64, n: usize, f: impl Fn(f64, f64, f64) -> f64) -> Result<Self> {
        let h = (hi - lo) / (n - 1) as f64;
        let mut values = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    values.push(f(lo + i as f64 * h, lo + j as f64 * h, lo + k as f64 * h));
                }
            }
        }
        Self::new(Geometry3::Box, [n, n, n], h, [lo; 3], values)
    }

    /// Samples `f` on the 3-torus `[0, period)^3`.
    pub fn from_fn_torus(period: f64, n: usize, f: impl Fn(f64, f64, f64) -> f64) -> Result<Self> {
        let h = period / n as f64;
        let mut values = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    values.push(f(i as f64 * h, j as f64 * h, k as f64 * h));
                }
            }
        }
        Self::new(Geometry3::Torus3, [n, n, n], h, [0.0; 3], values)
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.shape[1] + j) * self.shape[0] + i
    }
}

/// Axis-aligned planar window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub x0: f64,
    pub y0: f64,
    pub width: f64,
    pub height: f64,
}

impl Window {
    pub fn square(x0: f64, y0: f64, side: f64) -> Self {
        Window { x0, y0, width: side, height: side }
    }
}

/// Sampling density requirement, in samples per wavelength `2 pi / T`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub per_wavelength: f64,
    /// Accept grids below the minimum density.
    pub allow_under: bool,
}

impl Resolution {
    pub const MIN_PER_WAVELENGTH: f64 = 10.0;
    pub const DEFAULT_PER_WAVELENGTH: f64 = 12.0;

    pub fn new(per_wavelength: f64) -> Self {
        Resolution { per_wavelength, allow_under: false }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.per_wavelength > 0.0) {
            return Err(Error::Resolution("samples per wavelength must be positive".into()));
        }
        if self.per_wavelength < Self::MIN_PER_WAVELENGTH && !self.allow_under {
            return Err(Error::Resolution(format!(
                "{} samples per wavelength is below the minimum of {}",
                self.per_wavelength,
                Self::MIN_PER_WAVELENGTH
            )));
        }
        Ok(())
    }

    /// Checks that `spacing` resolves `wavelength` at the minimum density.
    pub fn check_spacing(&self, spacing: f64, wavelength: f64) -> Result<()> {
        if spacing > wavelength / Self::MIN_PER_WAVELENGTH * (1.0 + 1e-12) && !self.allow_under {
            return Err(Error::Resolution(format!(
                "spacing {spacing:.4e} exceeds wavelength/{} = {:.4e}",
                Self::MIN_PER_WAVELENGTH,
                wavelength / Self::MIN_PER_WAVELENGTH
            )));
        }
        Ok(())
    }
}

impl Default for Resolution {
    fn default() -> Self {
        Self::new(Self::DEFAULT_PER_WAVELENGTH)
    }
}
