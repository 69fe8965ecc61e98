//! Diffuse-interface (phase-field) energy on a periodic grid: the
//! normalized quartic well, spectral evaluation with the unscreened
//! inverse Laplacian on mean-zero data, lifting of sharp configurations,
//! sign truncation, and a mass-projected semi-implicit gradient flow.

use std::io::{Read as IoRead, Write as IoWrite};

use rustfft::num_complex::Complex;

use crate::droplet_model::{DensityMeasure, DropletConfig, Shape};
use crate::error::{OkError, Result};
use crate::grid::{fft2_forward, fft2_inverse, Grid2};
use crate::sharp_energy::background_density;
use crate::torus::{abs_ln_eps, measure_scale, TorusParams};

/// Normalized double well W(u) = (9/32)(1 - u²)².
#[inline]
pub fn double_well(u: f64) -> f64 {
    let q = 1.0 - u * u;
    9.0 / 32.0 * q * q
}

/// W'(u) = -(9/8) u (1 - u²).
#[inline]
pub fn double_well_prime(u: f64) -> f64 {
    -9.0 / 8.0 * u * (1.0 - u * u)
}

/// Report of the well-normalizing rescaling W = λ² W̃, ℓ = λ ℓ̃, ε = λ² ε̃.
#[derive(Debug, Clone)]
pub struct WellNormalization {
    pub lambda: f64,
    /// quartic coefficient λ²/4 of the rescaled well
    pub well_coefficient: f64,
    pub ell_scale: f64,
    pub eps_scale: f64,
    /// W''(1) = 2 λ²
    pub w_second_at_one: f64,
    /// numerically evaluated ∫_{-1}^{1} sqrt(2 W) du
    pub modica_integral: f64,
}

/// Constants of the rescaling that maps the quartic well (1-u²)²/4 onto
/// the normalized triple W(1) = 0, W''(1) = 1/κ², ∫√(2W) = 1.
pub fn normalize_double_well(lambda: f64) -> Result<WellNormalization> {
    if !(lambda > 0.0) {
        return Err(OkError::Parameter(format!("lambda must be positive, got {lambda}")));
    }
    let well_coefficient = lambda * lambda / 4.0;
    let (xs, ws) = crate::special::gauss_legendre_on(64, -1.0, 1.0);
    let modica_integral: f64 = xs
        .iter()
        .zip(&ws)
        .map(|(&u, &w)| {
            let well = well_coefficient * (1.0 - u * u) * (1.0 - u * u);
            w * (2.0 * well).sqrt()
        })
        .sum();
    Ok(WellNormalization {
        lambda,
        well_coefficient,
        ell_scale: lambda,
        eps_scale: lambda * lambda,
        w_second_at_one: 2.0 * lambda * lambda,
        modica_integral,
    })
}

/// Order parameter sampled on a periodic grid.
#[derive(Debug, Clone)]
pub struct PhaseField {
    pub grid: Grid2,
    pub epsilon: f64,
    pub params: TorusParams,
    pub mass_constrained: bool,
}

impl PhaseField {
    pub fn new(grid: Grid2, epsilon: f64, params: TorusParams) -> Result<Self> {
        crate::torus::check_epsilon(epsilon)?;
        let target = background_density(epsilon, &params)?;
        let mass_constrained = (grid.mean() - target).abs() < 1e-10;
        Ok(Self { grid, epsilon, params, mass_constrained })
    }

    pub fn sup_norm(&self) -> f64 {
        self.grid.data.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.grid.mean()
    }

    /// Cells across the tanh interface core (width 4ε/3 on either side).
    pub fn interface_cells(&self) -> f64 {
        8.0 * self.epsilon / (3.0 * self.grid.h())
    }
}

/// Diffuse energy value: the physical total and its rescaled version.
#[derive(Debug, Clone, Copy)]
pub struct DiffuseEnergy {
    pub physical: f64,
    pub rescaled: f64,
    pub gradient_part: f64,
    pub well_part: f64,
    pub nonlocal_part: f64,
    pub resolution_warning: bool,
}

/// Spectral evaluation of the phase-field energy.  The nonlocal term uses
/// the unscreened inverse Laplacian on the mean-zero fluctuation, with the
/// zero mode dropped — legal only under the mass constraint, which is
/// enforced.
pub fn diffuse_energy(field: &PhaseField) -> Result<DiffuseEnergy> {
    if !field.mass_constrained {
        return Err(OkError::Constraint(
            "field mean does not match the background density".into(),
        ));
    }
    let g = &field.grid;
    let n = g.n;
    let eps = field.epsilon;
    let f = fft2_forward(g);
    let inv_n2 = 1.0 / (n * n) as f64;
    let ell2 = g.ell * g.ell;
    let mut grad_sum = 0.0;
    let mut nonlocal_sum = 0.0;
    for i in 0..n {
        let k1 = g.wavenumber(i);
        for j in 0..n {
            if i == 0 && j == 0 {
                continue;
            }
            let k2 = g.wavenumber(j);
            let ksq = k1 * k1 + k2 * k2;
            let amp = (f[i * n + j] * inv_n2).norm_sqr();
            grad_sum += ksq * amp;
            nonlocal_sum += amp / ksq;
        }
    }
    let gradient_part = 0.5 * eps * eps * ell2 * grad_sum;
    let well_part = g.h() * g.h() * g.data.iter().map(|&u| double_well(u)).sum::<f64>();
    let nonlocal_part = 0.5 * ell2 * nonlocal_sum;
    let physical = gradient_part + well_part + nonlocal_part;
    let l = abs_ln_eps(eps);
    let rescaled = physical / (eps.powf(4.0 / 3.0) * l.powf(2.0 / 3.0));
    Ok(DiffuseEnergy {
        physical,
        rescaled,
        gradient_part,
        well_part,
        nonlocal_part,
        resolution_warning: field.interface_cells() < 2.0,
    })
}

/// Signed torus distance to the droplet boundary union, positive inside.
fn signed_distance(config: &DropletConfig, x: [f64; 2]) -> f64 {
    let params = config.params;
    let mut d = f64::NEG_INFINITY;
    for drop in &config.droplets {
        let rel = params.min_image([x[0] - drop.center[0], x[1] - drop.center[1]]);
        let di = match &drop.shape {
            Shape::Disk { radius } => radius - rel[0].hypot(rel[1]),
            Shape::Polygon { vertices } => crate::geometry::polygon_signed_distance(vertices, rel),
        };
        d = d.max(di);
    }
    if d == f64::NEG_INFINITY {
        // empty configuration: deep majority phase everywhere
        -config.params.ell
    } else {
        d
    }
}

/// Lift a sharp configuration to the phase-field class: the tanh(3d/4ε)
/// heteroclinic across each interface, then a smooth additive shift
/// supported deep in the majority phase to meet the mass constraint.
pub fn lift_config(config: &DropletConfig, grid_n: usize) -> Result<PhaseField> {
    let params = config.params;
    let eps = config.epsilon;
    // interfaces must be separated by >= 8 eps for the profiles not to clash
    for i in 0..config.droplets.len() {
        for j in (i + 1)..config.droplets.len() {
            let gap = params.distance(config.droplets[i].center, config.droplets[j].center)
                - config.droplets[i].circumradius()
                - config.droplets[j].circumradius();
            if gap < 8.0 * eps {
                return Err(OkError::Lifting(format!(
                    "droplets {i} and {j} closer than 8 eps (gap {gap:.3e})"
                )));
            }
        }
    }
    let mut grid = Grid2::from_fn(grid_n, params.ell, |x, y| {
        let d = signed_distance(config, [x, y]);
        (3.0 * d / (4.0 * eps)).tanh()
    });
    // additive shift on the deep majority plateau, blended smoothly
    let target = background_density(eps, &params)?;
    let mask: Vec<f64> = grid
        .data
        .iter()
        .map(|&u| crate::special::smoothstep(0.9, 0.95, -u))
        .collect();
    let mask_sum: f64 = mask.iter().sum();
    if mask_sum == 0.0 {
        return Err(OkError::Lifting("no majority plateau to absorb the shift".into()));
    }
    let mean = grid.mean();
    let c = (target - mean) * (grid_n * grid_n) as f64 / mask_sum;
    for (u, m) in grid.data.iter_mut().zip(&mask) {
        *u += c * m;
    }
    // exact projection of the residual float error
    let residual = target - grid.mean();
    for u in grid.data.iter_mut() {
        *u += residual;
    }
    PhaseField::new(grid, eps, params)
}

/// Sign truncation at zero and the measure carried by the positive phase.
pub fn truncate_field(field: &PhaseField) -> (Vec<bool>, DensityMeasure) {
    let n = field.grid.n;
    let binary: Vec<bool> = field.grid.data.iter().map(|&u| u > 0.0).collect();
    let scale = measure_scale(field.epsilon);
    let data: Vec<f64> = binary.iter().map(|&b| if b { scale } else { 0.0 }).collect();
    let grid = Grid2 { n, ell: field.grid.ell, data };
    let mu = DensityMeasure::from_grid(grid).expect("indicator density is nonnegative");
    (binary, mu)
}

/// Semi-implicit, mass-projected L² gradient flow of the diffuse energy:
/// linear terms implicit, W' explicit, zero mode frozen.  Errors out with
/// a suggested step size if a step increases the energy.
pub fn relax_field(field: &PhaseField, steps: usize, dt: f64) -> Result<PhaseField> {
    if !field.mass_constrained {
        return Err(OkError::Constraint("gradient flow requires the mass constraint".into()));
    }
    if !(dt > 0.0) {
        return Err(OkError::Parameter(format!("dt must be positive, got {dt}")));
    }
    let n = field.grid.n;
    let eps = field.epsilon;
    let mut current = field.clone();
    let mut energy = diffuse_energy(&current)?.physical;
    for _ in 0..steps {
        let mut f = fft2_forward(&current.grid);
        let wp: Vec<f64> = current.grid.data.iter().map(|&u| double_well_prime(u)).collect();
        let wp_grid = Grid2 { n, ell: current.grid.ell, data: wp };
        let wf = fft2_forward(&wp_grid);
        for i in 0..n {
            let k1 = current.grid.wavenumber(i);
            for j in 0..n {
                if i == 0 && j == 0 {
                    continue; // zero mode frozen: the mean is conserved
                }
                let k2 = current.grid.wavenumber(j);
                let ksq = k1 * k1 + k2 * k2;
                let idx = i * n + j;
                let denom = 1.0 + dt * (eps * eps * ksq + 1.0 / ksq);
                f[idx] = (f[idx] - wf[idx] * dt) / denom;
            }
        }
        let back = fft2_inverse(f, n);
        let grid = Grid2 {
            n,
            ell: current.grid.ell,
            data: back.into_iter().map(|c: Complex<f64>| c.re).collect(),
        };
        let next = PhaseField {
            grid,
            epsilon: eps,
            params: current.params,
            mass_constrained: true,
        };
        let e_next = diffuse_energy(&next)?.physical;
        if e_next > energy * (1.0 + 1e-13) + 1e-300 {
            return Err(OkError::StepSize { suggested_dt: 0.5 * dt });
        }
        energy = e_next;
        current = next;
    }
    // the zero mode was untouched, but assert the constraint anyway
    let target = background_density(eps, &current.params)?;
    if (current.grid.mean() - target).abs() > 1e-10 {
        return Err(OkError::Constraint("gradient flow drifted off the mass constraint".into()));
    }
    Ok(current)
}

/// Sharp-vs-diffuse comparison for one configuration.
#[derive(Debug, Clone, Copy)]
pub struct CompareReport {
    pub e_sharp_physical: f64,
    pub e_diffuse_lifted: f64,
    pub ratio_lifted: f64,
    pub e_diffuse_polished: f64,
    pub ratio_polished: f64,
}

/// Ratio of the diffuse energy of the lifted field to the sharp energy,
/// before and after a short gradient-flow polish.
pub fn compare_energies(
    config: &DropletConfig,
    green: &crate::torus_green::GreenEvaluator,
    grid_n: usize,
) -> Result<CompareReport> {
    let field = lift_config(config, grid_n)?;
    let de = diffuse_energy(&field)?;
    if de.resolution_warning {
        return Err(OkError::Resolution(format!(
            "interface resolved by {:.2} cells; refine the grid",
            field.interface_cells()
        )));
    }
    let e_sharp = crate::sharp_energy::sharp_energy(config, green)?.total_physical;
    // short polish with an adaptive step
    let mut dt = 0.1;
    let mut polished = field.clone();
    let mut remaining = 30usize;
    while remaining > 0 {
        match relax_field(&polished, remaining.min(10), dt) {
            Ok(next) => {
                polished = next;
                remaining -= remaining.min(10);
            }
            Err(OkError::StepSize { suggested_dt }) => {
                dt = suggested_dt;
                if dt < 1e-6 {
                    break;
                }
            }
            Err(e) => return Err(e),
        }
    }
    let dp = diffuse_energy(&polished)?;
    Ok(CompareReport {
        e_sharp_physical: e_sharp,
        e_diffuse_lifted: de.physical,
        ratio_lifted: de.physical / e_sharp,
        e_diffuse_polished: dp.physical,
        ratio_polished: dp.physical / e_sharp,
    })
}

// ── Binary dump ─────────────────────────────────────────────────────────
//
// Text header `n ell epsilon delta_bar mass_flag`, then n*n row-major
// little-endian f64 samples.

pub fn save_phase_field<W: IoWrite>(field: &PhaseField, mut w: W) -> Result<()> {
    writeln!(
        w,
        "{} {} {} {} {}",
        field.grid.n,
        crate::droplet_model::format_g17(field.grid.ell),
        crate::droplet_model::format_g17(field.epsilon),
        crate::droplet_model::format_g17(field.params.delta_bar),
        u8::from(field.mass_constrained)
    )?;
    for &v in &field.grid.data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn load_phase_field<R: IoRead>(mut r: R, kappa: f64) -> Result<PhaseField> {
    let mut header = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        r.read_exact(&mut byte)?;
        if byte[0] == b'\n' {
            break;
        }
        header.push(byte[0]);
    }
    let header = String::from_utf8(header).map_err(|e| OkError::Parse(e.to_string()))?;
    let tok: Vec<&str> = header.split_whitespace().collect();
    if tok.len() != 5 {
        return Err(OkError::Parse(format!("bad phase-field header: {header}")));
    }
    let n: usize = tok[0].parse().map_err(|e| OkError::Parse(format!("{e}")))?;
    let ell: f64 = tok[1].parse().map_err(|e| OkError::Parse(format!("{e}")))?;
    let epsilon: f64 = tok[2].parse().map_err(|e| OkError::Parse(format!("{e}")))?;
    let delta_bar: f64 = tok[3].parse().map_err(|e| OkError::Parse(format!("{e}")))?;
    let mut data = vec![0.0f64; n * n];
    let mut buf = [0u8; 8];
    for v in data.iter_mut() {
        r.read_exact(&mut buf)?;
        *v = f64::from_le_bytes(buf);
    }
    let params = TorusParams::new(ell, kappa, delta_bar)?;
    PhaseField::new(Grid2 { n, ell, data }, epsilon, params)
}
