//! The quadratic limit functional of the droplet density: screened
//! potential solves, Coulomb energy via two algebraic routes, the
//! closed-form constant-density minimizer and the droplet profile function.

use rustfft::num_complex::Complex;

use crate::droplet_model::DensityMeasure;
use crate::error::{OkError, Result};
use crate::grid::{fft2_forward, fft2_inverse, Grid2};
use crate::torus::TorusParams;

/// Screened potential v solving  -Δv + κ²v = μ  on the torus.
#[derive(Debug, Clone)]
pub struct PotentialField {
    pub grid: Grid2,
    pub params: TorusParams,
    /// true when atoms were smeared into single grid cells before solving
    pub atoms_smeared: bool,
}

/// Density samples with atoms folded into their containing cells.
fn effective_density(mu: &DensityMeasure) -> (Grid2, bool) {
    let mut g = mu.grid.clone();
    let n = g.n;
    let h = g.h();
    let mut smeared = false;
    for &(w, p) in &mu.atoms {
        let i = ((p[0] / h).floor() as i64).rem_euclid(n as i64) as usize;
        let j = ((p[1] / h).floor() as i64).rem_euclid(n as i64) as usize;
        *g.at_mut(i, j) += w / (h * h);
        smeared = true;
    }
    (g, smeared)
}

/// Spectral solve of the screened equation: v̂(k) = μ̂(k)/(κ² + |k|²).
pub fn solve_potential(mu: &DensityMeasure, params: &TorusParams) -> Result<PotentialField> {
    if (mu.grid.ell - params.ell).abs() > 1e-12 * params.ell {
        return Err(OkError::Parameter(
            "density grid and torus have different side lengths".into(),
        ));
    }
    let (g, atoms_smeared) = effective_density(mu);
    let n = g.n;
    let mut f = fft2_forward(&g);
    for i in 0..n {
        let k1 = g.wavenumber(i);
        for j in 0..n {
            let k2 = g.wavenumber(j);
            f[i * n + j] /= params.kappa * params.kappa + k1 * k1 + k2 * k2;
        }
    }
    let v = fft2_inverse(f, n);
    let grid = Grid2 {
        n,
        ell: g.ell,
        data: v.into_iter().map(|c| c.re).collect(),
    };
    let field = PotentialField { grid, params: *params, atoms_smeared };
    // κ² ∫v = ∫dμ within 1e-8 relative
    let lhs = params.kappa * params.kappa * field.grid.integral();
    let rhs = mu.total_mass;
    if rhs.abs() > 0.0 && ((lhs - rhs) / rhs.abs().max(1e-300)).abs() > 1e-8 {
        return Err(OkError::Consistency(format!(
            "potential mass identity violated: {lhs} vs {rhs}"
        )));
    }
    Ok(field)
}

/// Screened Coulomb energy ∬ G dμ dμ, computed spectrally (primary) and
/// as ∫(|∇v|² + κ²v²) (check); the two must agree to 1e-6 relative.
pub fn coulomb_energy(mu: &DensityMeasure, params: &TorusParams) -> Result<f64> {
    let (primary, check) = coulomb_energy_routes(mu, params)?;
    let scale = primary.abs().max(1e-300);
    if ((primary - check) / scale).abs() > 1e-6 {
        return Err(OkError::Consistency(format!(
            "coulomb energy routes disagree: spectral {primary} vs potential {check}"
        )));
    }
    Ok(primary)
}

/// Both algebraic routes to the Coulomb energy: the spectral sum
/// Σ|μ̂|²/(κ²+|k|²) and the potential-space integral ∫(|∇v|² + κ²v²).
pub fn coulomb_energy_routes(mu: &DensityMeasure, params: &TorusParams) -> Result<(f64, f64)> {
    let (g, _) = effective_density(mu);
    let n = g.n;
    let f = fft2_forward(&g);
    let norm = (g.h() * g.h()).powi(2) / (params.ell * params.ell);
    let mut primary = 0.0;
    for i in 0..n {
        let k1 = g.wavenumber(i);
        for j in 0..n {
            let k2 = g.wavenumber(j);
            let k2sum = k1 * k1 + k2 * k2;
            primary += f[i * n + j].norm_sqr() * norm / (params.kappa * params.kappa + k2sum);
        }
    }

    // check route through the real-space potential with spectral gradient
    let field = solve_potential(mu, params)?;
    let vf = fft2_forward(&field.grid);
    let mut gx: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); n * n];
    let mut gy: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); n * n];
    for i in 0..n {
        let k1 = field.grid.wavenumber(i);
        for j in 0..n {
            let k2 = field.grid.wavenumber(j);
            let idx = i * n + j;
            gx[idx] = vf[idx] * Complex::new(0.0, k1);
            gy[idx] = vf[idx] * Complex::new(0.0, k2);
        }
    }
    let gxr = fft2_inverse(gx, n);
    let gyr = fft2_inverse(gy, n);
    let h2 = field.grid.h() * field.grid.h();
    let mut check = 0.0;
    for idx in 0..n * n {
        let v = field.grid.data[idx];
        check += (gxr[idx].re * gxr[idx].re
            + gyr[idx].re * gyr[idx].re
            + params.kappa * params.kappa * v * v)
            * h2;
    }
    Ok((primary, check))
}

/// The limit functional over densities:
/// background + (3^{2/3} - 2 δ̄/κ²) ∫dμ + 2 ∬G dμ dμ.
/// The equivalent local form through the potential is evaluated as a check.
pub fn limit_energy(mu: &DensityMeasure, params: &TorusParams) -> Result<f64> {
    if mu.grid.data.iter().any(|&v| v < -1e-12) {
        return Err(OkError::Domain("negative density samples".into()));
    }
    let bg = crate::sharp_energy::background_term(params);
    let a_coeff = 3f64.cbrt().powi(2) - 2.0 * params.delta_bar / (params.kappa * params.kappa);
    let coulomb = coulomb_energy(mu, params)?;
    let nonlocal = bg + a_coeff * mu.total_mass + 2.0 * coulomb;

    // local form: bg + (3^{2/3} κ² - 2 δ̄) ∫v + 2 ∫(|∇v|² + κ² v²)
    let field = solve_potential(mu, params)?;
    let vint = field.grid.integral();
    let local = bg
        + (3f64.cbrt().powi(2) * params.kappa * params.kappa - 2.0 * params.delta_bar) * vint
        + 2.0 * coulomb;
    let scale = nonlocal.abs().max(1e-300);
    if ((nonlocal - local) / scale).abs() > 1e-8 {
        return Err(OkError::Consistency(format!(
            "limit energy forms disagree: {nonlocal} vs {local}"
        )));
    }
    Ok(nonlocal)
}

/// Closed-form minimizer over constant densities:
/// δ̄_c = 3^{2/3} κ²/2; μ̄ = 0 below it, (δ̄-δ̄_c)/2 above; the minimal
/// energy density per unit area follows.
pub fn optimal_constant_density(params: &TorusParams) -> (f64, f64, f64) {
    let delta_c = params.delta_c();
    let db = params.delta_bar;
    let k2 = params.kappa * params.kappa;
    if db <= delta_c {
        (0.0, db * db / (2.0 * k2), delta_c)
    } else {
        (
            0.5 * (db - delta_c),
            delta_c * (2.0 * db - delta_c) / (2.0 * k2),
            delta_c,
        )
    }
}

/// Limit energy restricted to constant densities, in closed form
/// (∬G dμdμ = m² ℓ²/κ² for μ ≡ m).
pub fn limit_energy_constant(m: f64, params: &TorusParams) -> f64 {
    let ell2 = params.ell * params.ell;
    let k2 = params.kappa * params.kappa;
    let bg = crate::sharp_energy::background_term(params);
    let a_coeff = 3f64.cbrt().powi(2) - 2.0 * params.delta_bar / k2;
    bg + a_coeff * m * ell2 + 2.0 * m * m * ell2 / k2
}

/// Per-droplet profile function f(x) = 2√π/√x + x/(3π), its second
/// derivative, and the exact minimizer data.
pub fn droplet_profile_f(x: f64) -> Result<(f64, f64, f64, f64)> {
    if !(x > 0.0) {
        return Err(OkError::Domain(format!("profile argument must be positive, got {x}")));
    }
    let pi = std::f64::consts::PI;
    let f = 2.0 * pi.sqrt() / x.sqrt() + x / (3.0 * pi);
    let fpp = 3.0 * pi.sqrt() / (2.0 * x.powf(2.5));
    let argmin = 3f64.cbrt().powi(2) * pi;
    let min_value = 3f64.cbrt().powi(2);
    Ok((f, fpp, argmin, min_value))
}
