//! Deterministic recovery construction: partition the torus into cells,
//! assign droplet counts from the cell masses, and place equal optimal
//! disks on jittered sub-grids with a guaranteed minimum spacing.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::droplet_model::{DensityMeasure, Droplet, DropletConfig};
use crate::error::{OkError, Result};
use crate::geometry::P2;
use crate::torus::{abs_ln_eps, check_epsilon, optimal_radius, TorusParams};

/// Placement plan: cell partition with target masses and droplet counts.
#[derive(Debug, Clone)]
pub struct RecoveryPlan {
    pub params: TorusParams,
    pub epsilon: f64,
    /// cell side length
    pub eta: f64,
    /// cells per axis
    pub cells_per_axis: usize,
    /// (cell index, cell mass, droplet count)
    pub cells: Vec<(usize, f64, usize)>,
    pub radius: f64,
    pub min_spacing: f64,
    pub seed: u64,
    /// set when the density is not bounded away from zero on the torus
    /// (the feasibility guarantee of the placement then does not apply)
    pub density_warning: bool,
}

impl RecoveryPlan {
    pub fn total_count(&self) -> usize {
        self.cells.iter().map(|c| c.2).sum()
    }
}

/// Cell side: the quarter power of |ln eps| balances count quantization
/// against intra-cell density variation, rounded so cells tile exactly.
fn cell_side(params: &TorusParams, epsilon: f64) -> (f64, usize) {
    let l = abs_ln_eps(epsilon);
    let per_axis = (params.ell * l.powf(0.25)).ceil().max(2.0) as usize;
    (params.ell / per_axis as f64, per_axis)
}

/// Partition the torus and compute per-cell droplet counts
/// N_K = floor(3^{-2/3} |ln eps| μ(K) / π).
pub fn partition_counts(
    mu: &DensityMeasure,
    epsilon: f64,
    params: &TorusParams,
    seed: u64,
) -> Result<RecoveryPlan> {
    check_epsilon(epsilon)?;
    let l = abs_ln_eps(epsilon);
    let (eta, per_axis) = cell_side(params, epsilon);
    // the admissible window for the cell side, enforced strictly
    if !(eta > l.powf(-0.5) && eta < 1.0) {
        return Err(OkError::Parameter(format!(
            "cell side {eta} outside the admissible window ({}, 1)",
            l.powf(-0.5)
        )));
    }
    let coeff = l / (3f64.cbrt().powi(2) * std::f64::consts::PI);
    let mut cells = Vec::with_capacity(per_axis * per_axis);
    for ci in 0..per_axis {
        for cj in 0..per_axis {
            let x0 = ci as f64 * eta;
            let y0 = cj as f64 * eta;
            let mass = mu.mass_in_box(x0, x0 + eta, y0, y0 + eta);
            let count = (coeff * mass).floor().max(0.0) as usize;
            cells.push((ci * per_axis + cj, mass, count));
        }
    }
    let total: usize = cells.iter().map(|c| c.2).sum();
    let min_spacing = if total > 0 {
        0.5 / (total as f64).sqrt()
    } else {
        0.0
    };
    // flag densities that vanish somewhere while carrying mass elsewhere
    let density_warning = total > 0
        && (mu.grid.min() <= 0.0
            || cells.iter().any(|&(_, mass, _)| mass <= 0.0));
    Ok(RecoveryPlan {
        params: *params,
        epsilon,
        eta,
        cells_per_axis: per_axis,
        cells,
        radius: optimal_radius(epsilon),
        min_spacing,
        seed,
        density_warning,
    })
}

/// Place centers on jittered sub-grids, one independent generator per cell
/// so parallel and serial traversals agree.  Count-1 cells place at the
/// cell midpoint.
pub fn place_droplets(plan: &RecoveryPlan) -> Result<Vec<P2>> {
    let eta = plan.eta;
    let per_axis = plan.cells_per_axis;
    let d_min = plan.min_spacing;
    let mut centers = Vec::with_capacity(plan.total_count());
    for &(cell_idx, _, count) in &plan.cells {
        if count == 0 {
            continue;
        }
        let ci = cell_idx / per_axis;
        let cj = cell_idx % per_axis;
        let x0 = ci as f64 * eta;
        let y0 = cj as f64 * eta;
        if count == 1 {
            centers.push([x0 + 0.5 * eta, y0 + 0.5 * eta]);
            continue;
        }
        let g = (count as f64).sqrt().ceil() as usize;
        let pitch = eta / g as f64;
        // jitter must respect the in-cell spacing and the boundary margin
        let margin = 0.5 * d_min;
        let beta_spacing = 0.5 * (pitch - d_min);
        let beta_margin = 0.5 * pitch - margin;
        let beta = (0.25 * pitch).min(beta_spacing).min(beta_margin);
        if beta < 0.0 || pitch <= d_min {
            return Err(OkError::Construction {
                cell: cell_idx,
                msg: format!(
                    "cannot place {count} droplets with spacing {d_min:.3e} in a cell of side {eta:.3e}"
                ),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(
            plan.seed ^ (cell_idx as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
        );
        // deterministic site selection when the sub-grid has spare sites
        let mut sites: Vec<usize> = (0..g * g).collect();
        for i in (1..sites.len()).rev() {
            let j = rng.random_range(0..=i);
            sites.swap(i, j);
        }
        sites.truncate(count);
        sites.sort_unstable();
        for site in sites {
            let si = site / g;
            let sj = site % g;
            let jx: f64 = rng.random_range(-beta..=beta);
            let jy: f64 = rng.random_range(-beta..=beta);
            centers.push([
                x0 + (si as f64 + 0.5) * pitch + jx,
                y0 + (sj as f64 + 0.5) * pitch + jy,
            ]);
        }
    }
    // the sub-grid margins guarantee the spacing; verify defensively
    for i in 0..centers.len() {
        for j in (i + 1)..centers.len() {
            let d = plan.params.distance(centers[i], centers[j]);
            if d < d_min - 1e-12 {
                return Err(OkError::Construction {
                    cell: 0,
                    msg: format!("spacing violation: centers {i},{j} at distance {d:.3e}"),
                });
            }
        }
    }
    Ok(centers)
}

/// Full recovery configuration: equal disks of the optimal radius at the
/// placed centers.
pub fn build_recovery(
    mu: &DensityMeasure,
    epsilon: f64,
    params: &TorusParams,
    seed: u64,
) -> Result<DropletConfig> {
    let plan = partition_counts(mu, epsilon, params, seed)?;
    let centers = place_droplets(&plan)?;
    let droplets = centers
        .into_iter()
        .map(|c| Droplet::disk(c, plan.radius))
        .collect();
    DropletConfig::new(*params, epsilon, droplets)
}
