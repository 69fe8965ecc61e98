//! Flat 2-torus geometry: model parameters and minimum-image arithmetic.

use crate::error::{OkError, Result};

/// Model constants fixed throughout a computation: torus side `ell`,
/// screening constant `kappa`, rescaled background parameter `delta_bar`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusParams {
    pub ell: f64,
    pub kappa: f64,
    pub delta_bar: f64,
}

impl TorusParams {
    pub fn new(ell: f64, kappa: f64, delta_bar: f64) -> Result<Self> {
        if !(ell > 0.0) || !ell.is_finite() {
            return Err(OkError::Parameter(format!("ell must be positive, got {ell}")));
        }
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(OkError::Parameter(format!("kappa must be positive, got {kappa}")));
        }
        if !(delta_bar > 0.0) || !delta_bar.is_finite() {
            return Err(OkError::Parameter(format!(
                "delta_bar must be positive, got {delta_bar}"
            )));
        }
        Ok(Self { ell, kappa, delta_bar })
    }

    /// Critical background parameter separating the empty minimizer
    /// from the constant-density one.
    pub fn delta_c(&self) -> f64 {
        0.5 * 3f64.cbrt().powi(2) * self.kappa * self.kappa
    }

    /// Reduce a coordinate difference to the minimum image in [-ell/2, ell/2).
    #[inline]
    pub fn min_image_1d(&self, d: f64) -> f64 {
        let l = self.ell;
        let mut r = d.rem_euclid(l);
        if r >= 0.5 * l {
            r -= l;
        }
        r
    }

    /// Minimum-image displacement vector.
    #[inline]
    pub fn min_image(&self, d: [f64; 2]) -> [f64; 2] {
        [self.min_image_1d(d[0]), self.min_image_1d(d[1])]
    }

    /// Torus distance between two points.
    #[inline]
    pub fn distance(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let d = self.min_image([a[0] - b[0], a[1] - b[1]]);
        d[0].hypot(d[1])
    }

    /// Wrap a point into the fundamental cell [0, ell)^2.
    #[inline]
    pub fn wrap(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0].rem_euclid(self.ell), p[1].rem_euclid(self.ell)]
    }
}

/// Validate that `eps` lies in the admissible interface range (0, 1/e).
pub fn check_epsilon(eps: f64) -> Result<f64> {
    if !(eps > 0.0) || !(eps < (-1f64).exp()) {
        return Err(OkError::Parameter(format!(
            "epsilon must lie in (0, e^-1), got {eps}"
        )));
    }
    Ok(eps)
}

/// |ln eps| for eps in (0, 1).
#[inline]
pub fn abs_ln_eps(eps: f64) -> f64 {
    -eps.ln()
}

/// Rescaled-area factor eps^{-2/3} |ln eps|^{2/3}.
#[inline]
pub fn area_scale(eps: f64) -> f64 {
    let l = abs_ln_eps(eps);
    (l / eps).powf(2.0 / 3.0)
}

/// Rescaled-perimeter factor eps^{-1/3} |ln eps|^{1/3}.
#[inline]
pub fn perimeter_scale(eps: f64) -> f64 {
    let l = abs_ln_eps(eps);
    (l / eps).cbrt()
}

/// Density normalization eps^{-2/3} |ln eps|^{-1/3}.
#[inline]
pub fn measure_scale(eps: f64) -> f64 {
    let l = abs_ln_eps(eps);
    eps.powf(-2.0 / 3.0) * l.powf(-1.0 / 3.0)
}

/// Optimal droplet radius 3^{1/3} eps^{1/3} |ln eps|^{-1/3}.
#[inline]
pub fn optimal_radius(eps: f64) -> f64 {
    3f64.cbrt() * (eps / abs_ln_eps(eps)).cbrt()
}

/// Optimal rescaled droplet area 3^{2/3} pi.
#[inline]
pub fn optimal_area() -> f64 {
    3f64.cbrt().powi(2) * std::f64::consts::PI
}

/// Optimal rescaled droplet perimeter 2 * 3^{1/3} pi.
#[inline]
pub fn optimal_perimeter() -> f64 {
    2.0 * 3f64.cbrt() * std::f64::consts::PI
}
