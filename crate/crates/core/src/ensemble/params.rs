use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

/// Band `[alpha T, T]` of the spectral parameter, or `[T - eta, T]` when
/// `alpha = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandParams {
    pub alpha: f64,
    pub t: f64,
    pub eta: f64,
}

impl BandParams {
    /// Monochromatic window width used when none is given. Consecutive sphere
    /// eigenvalue roots `sqrt(l(l+1))` are about 1 apart, so this isolates a
    /// single degree.
    pub const DEFAULT_ETA: f64 = 0.5;

    pub fn new(alpha: f64, t: f64) -> Result<Self> {
        Self::with_eta(alpha, t, Self::DEFAULT_ETA)
    }

    pub fn with_eta(alpha: f64, t: f64, eta: f64) -> Result<Self> {
        let p = BandParams { alpha, t, eta };
        p.validate()?;
        Ok(p)
    }

    /// Monochromatic random spherical harmonic of degree `ell`.
    pub fn spherical_harmonic(ell: u32) -> Result<Self> {
        let l = ell as f64;
        Self::new(1.0, (l * (l + 1.0)).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return param(format!("alpha = {} must lie in [0, 1]", self.alpha));
        }
        if !(self.t.is_finite() && self.t > 0.0) {
            return param(format!("T = {} must be positive", self.t));
        }
        if self.alpha == 1.0 && !(self.eta > 0.0 && self.eta < self.t) {
            return param(format!("eta = {} must lie in (0, T)", self.eta));
        }
        Ok(())
    }

    /// Closed interval of admissible eigenvalue roots `t_j`.
    pub fn window(&self) -> (f64, f64) {
        if self.alpha == 1.0 {
            (self.t - self.eta, self.t)
        } else {
            (self.alpha * self.t, self.t)
        }
    }

    /// Whether `t_j` lies in the band, with a relative slack for roots that
    /// land on an endpoint up to rounding.
    pub fn contains(&self, tj: f64) -> bool {
        let (lo, hi) = self.window();
        let slack = 1e-10 * self.t.max(1.0);
        tj >= lo - slack && tj <= hi + slack
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_params() {
        assert!(BandParams::new(1.5, 10.0).is_err());
        assert!(BandParams::new(-0.1, 10.0).is_err());
        assert!(BandParams::new(0.5, 0.0).is_err());
        assert!(BandParams::with_eta(1.0, 10.0, 10.0).is_err());
        assert!(BandParams::with_eta(1.0, 10.0, 0.0).is_err());
        assert!(BandParams::with_eta(0.3, 10.0, 0.0).is_ok());
    }

    #[test]
    fn window_matches_mode() {
        assert_eq!(BandParams::new(0.5, 10.0).unwrap().window(), (5.0, 10.0));
        assert_eq!(BandParams::with_eta(1.0, 100.0, 10.0).unwrap().window(), (90.0, 100.0));
    }
}
