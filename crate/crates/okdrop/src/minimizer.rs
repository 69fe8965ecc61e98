//! Gradient-descent relaxation of droplet ensembles under the rescaled
//! sharp-interface energy, the lower-bound defect functional, and the
//! window statistics of almost minimizers.

use rayon::prelude::*;

use crate::droplet_model::{rescaled_stats, Droplet, DropletConfig, Shape};
use crate::error::{OkError, Result};
use crate::geometry;
use crate::sharp_energy::{shape_quadrature, sharp_energy_with_order};
use crate::special::{gauss_legendre_on, smoothstep};
use crate::torus::{measure_scale, optimal_area, optimal_radius};
use crate::torus_green::GreenEvaluator;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// One row of the relaxation trace.
#[derive(Debug, Clone, Copy)]
pub struct TraceRow {
    pub step: usize,
    pub e_bar: f64,
    pub max_gradient: f64,
    pub min_pair_distance: f64,
    pub area_mean: f64,
    pub area_std: f64,
}

/// Relaxation output: the relaxed configuration plus its descent trace.
#[derive(Debug, Clone)]
pub struct Relaxed {
    pub config: DropletConfig,
    pub trace: Vec<TraceRow>,
}

/// Window statistics of a droplet ensemble at window parameter gamma.
#[derive(Debug, Clone)]
pub struct EnsembleStats {
    pub gamma: f64,
    pub in_window_count: usize,
    pub area_mean: f64,
    pub area_variance: f64,
    pub out_window_mass: f64,
    pub deficit_sum: f64,
    pub count_density: f64,
}

fn quad_order_for_relaxation() -> usize {
    // the relaxed ensembles carry near-point-like disks, where a light
    // tensor rule already resolves the smooth interaction kernel
    4
}

fn trace_row(
    config: &DropletConfig,
    step: usize,
    e_bar: f64,
    max_gradient: f64,
) -> TraceRow {
    let stats = rescaled_stats(config).expect("valid config");
    let n = stats.areas.len().max(1) as f64;
    let mean = stats.areas.iter().sum::<f64>() / n;
    let var = stats.areas.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let mut min_dist = f64::INFINITY;
    for i in 0..config.droplets.len() {
        for j in (i + 1)..config.droplets.len() {
            min_dist = min_dist.min(
                config
                    .params
                    .distance(config.droplets[i].center, config.droplets[j].center),
            );
        }
    }
    TraceRow {
        step,
        e_bar,
        max_gradient,
        min_pair_distance: min_dist,
        area_mean: mean,
        area_std: var.sqrt(),
    }
}

/// Analytic gradient of the rescaled energy with respect to the droplet
/// centers.  Only the pairwise interaction depends on them:
/// ∇_i Ē = Σ_{j≠i} 4 s² ∬ ∇G(x-y) dx dy over Ω_i × Ω_j.
pub fn center_gradients(
    config: &DropletConfig,
    green: &GreenEvaluator,
    quad_order: usize,
) -> Vec<[f64; 2]> {
    let n = config.droplets.len();
    let params = config.params;
    let s2 = measure_scale(config.epsilon).powi(2);
    let nodes: Vec<_> = config
        .droplets
        .iter()
        .map(|d| shape_quadrature(&d.shape, quad_order))
        .collect();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let pair_grads: Vec<[f64; 2]> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let dc = params.min_image([
                config.droplets[i].center[0] - config.droplets[j].center[0],
                config.droplets[i].center[1] - config.droplets[j].center[1],
            ]);
            let (pi, wi) = &nodes[i];
            let (pj, wj) = &nodes[j];
            let mut g = [0.0, 0.0];
            for (a, wa) in pi.iter().zip(wi) {
                for (b, wb) in pj.iter().zip(wj) {
                    let x = [dc[0] + a[0] - b[0], dc[1] + a[1] - b[1]];
                    if let Ok((_, grad)) = green.green_at(x) {
                        g[0] += wa * wb * grad[0];
                        g[1] += wa * wb * grad[1];
                    }
                }
            }
            [4.0 * s2 * g[0], 4.0 * s2 * g[1]]
        })
        .collect();
    let mut grads = vec![[0.0, 0.0]; n];
    for (k, &(i, j)) in pairs.iter().enumerate() {
        grads[i][0] += pair_grads[k][0];
        grads[i][1] += pair_grads[k][1];
        grads[j][0] -= pair_grads[k][0];
        grads[j][1] -= pair_grads[k][1];
    }
    grads
}

fn disks_only(config: &DropletConfig) -> Result<()> {
    if config
        .droplets
        .iter()
        .any(|d| !matches!(d.shape, Shape::Disk { .. }))
    {
        return Err(OkError::Parameter(
            "relaxation supports disk droplets only".into(),
        ));
    }
    Ok(())
}

/// Backtracking gradient descent on the droplet centers; shapes fixed.
pub fn relax_centers(
    config: &DropletConfig,
    green: &GreenEvaluator,
    max_steps: usize,
    step: f64,
) -> Result<Relaxed> {
    disks_only(config)?;
    let order = quad_order_for_relaxation();
    let mut current = config.clone();
    let mut energy = sharp_energy_with_order(&current, green, order)?.total_rescaled;
    let mut trace = vec![trace_row(&current, 0, energy, f64::NAN)];
    for it in 1..=max_steps {
        let grads = center_gradients(&current, green, order);
        let gmax = grads
            .iter()
            .map(|g| g[0].hypot(g[1]))
            .fold(0.0f64, f64::max);
        if gmax < 1e-8 {
            break;
        }
        let mut dt = step;
        let mut accepted = false;
        for _ in 0..40 {
            let moved: Vec<Droplet> = current
                .droplets
                .iter()
                .zip(&grads)
                .map(|(d, g)| {
                    let c = current
                        .params
                        .wrap([d.center[0] - dt * g[0], d.center[1] - dt * g[1]]);
                    Droplet { center: c, shape: d.shape.clone() }
                })
                .collect();
            match DropletConfig::new(current.params, current.epsilon, moved) {
                Ok(candidate) => {
                    let e_new =
                        sharp_energy_with_order(&candidate, green, order)?.total_rescaled;
                    if e_new <= energy {
                        current = candidate;
                        energy = e_new;
                        accepted = true;
                        break;
                    }
                }
                Err(_) => {} // overlap: halve the step
            }
            dt *= 0.5;
        }
        if !accepted {
            // no admissible descent direction at any step size: either
            // converged to float resolution or blocked by contact
            if gmax > 1e-3 && trace.len() == 1 {
                return Err(OkError::Relaxation(
                    "backtracking could not resolve droplet overlap".into(),
                ));
            }
            break;
        }
        trace.push(trace_row(&current, it, energy, gmax));
    }
    Ok(Relaxed { config: current, trace })
}

/// Analytic derivative of the rescaled energy with respect to each disk
/// radius: perimeter and area terms in closed form, interaction terms by
/// rim integrals d/dr ∬ = ∮_{∂D} (∫ G).
pub fn radius_gradients(
    config: &DropletConfig,
    green: &GreenEvaluator,
    quad_order: usize,
) -> Result<Vec<f64>> {
    disks_only(config)?;
    let n = config.droplets.len();
    let params = config.params;
    let eps = config.epsilon;
    let l = config.abs_ln_eps();
    let s2 = measure_scale(eps).powi(2);
    let sa = crate::torus::area_scale(eps);
    let sp = crate::torus::perimeter_scale(eps);
    let nodes: Vec<_> = config
        .droplets
        .iter()
        .map(|d| shape_quadrature(&d.shape, quad_order))
        .collect();
    let ntheta = 4 * quad_order;

    let grads: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ri = match config.droplets[i].shape {
                Shape::Disk { radius } => radius,
                _ => unreachable!(),
            };
            // linear terms
            let mut g = sp * TWO_PI / l
                - 2.0 * params.delta_bar / (params.kappa * params.kappa) * sa * TWO_PI * ri / l;
            // self term: d/dr 2s² ∬ G = 4 s² ∮ (∫_D G); by symmetry one rim
            // point suffices: log part has the closed rim value π r² ln r
            let rim_log = -(std::f64::consts::PI * ri * ri * ri.ln()) / TWO_PI;
            let (rpts, rwts) = &nodes[i];
            let rim_point = [ri, 0.0];
            let mut rim_rem = 0.0;
            for (p, w) in rpts.iter().zip(rwts) {
                rim_rem += w * green.remainder_at([rim_point[0] - p[0], rim_point[1] - p[1]]);
            }
            g += 4.0 * s2 * TWO_PI * ri * (rim_log + rim_rem);
            // pair terms: 2 × d/dr_i M_ij = 4 s² r_i ∮ (∫_{D_j} G)
            for j in 0..n {
                if j == i {
                    continue;
                }
                let dc = params.min_image([
                    config.droplets[i].center[0] - config.droplets[j].center[0],
                    config.droplets[i].center[1] - config.droplets[j].center[1],
                ]);
                let (pj, wj) = &nodes[j];
                let mut rim = 0.0;
                for t in 0..ntheta {
                    let th = TWO_PI * (t as f64 + 0.5) / ntheta as f64;
                    let x = [dc[0] + ri * th.cos(), dc[1] + ri * th.sin()];
                    let mut inner = 0.0;
                    for (p, w) in pj.iter().zip(wj) {
                        inner += w * green.value([x[0] - p[0], x[1] - p[1]]);
                    }
                    rim += inner * TWO_PI / ntheta as f64;
                }
                g += 4.0 * s2 * ri * rim;
            }
            g
        })
        .collect();
    Ok(grads)
}

/// Backtracking descent on the disk radii; centers fixed.  Radii are
/// floored at 1e-3 of the optimal radius so the droplet count stays fixed.
pub fn relax_areas(
    config: &DropletConfig,
    green: &GreenEvaluator,
    max_steps: usize,
) -> Result<Relaxed> {
    disks_only(config)?;
    let order = quad_order_for_relaxation();
    let floor = 1e-3 * optimal_radius(config.epsilon);
    let mut current = config.clone();
    let mut energy = sharp_energy_with_order(&current, green, order)?.total_rescaled;
    let mut trace = vec![trace_row(&current, 0, energy, f64::NAN)];
    // radius step scale: a small fraction of the optimal radius per unit
    // gradient, refined by backtracking
    let base_step = 0.05 * optimal_radius(config.epsilon);
    for it in 1..=max_steps {
        let grads = radius_gradients(&current, green, order)?;
        let gmax = grads.iter().map(|g| g.abs()).fold(0.0f64, f64::max);
        if gmax < 1e-8 {
            break;
        }
        let mut dt = base_step / gmax;
        let mut accepted = false;
        for _ in 0..40 {
            let moved: Vec<Droplet> = current
                .droplets
                .iter()
                .zip(&grads)
                .map(|(d, g)| {
                    let r = match d.shape {
                        Shape::Disk { radius } => (radius - dt * g).max(floor),
                        _ => unreachable!(),
                    };
                    Droplet::disk(d.center, r)
                })
                .collect();
            match DropletConfig::new(current.params, current.epsilon, moved) {
                Ok(candidate) => {
                    let e_new =
                        sharp_energy_with_order(&candidate, green, order)?.total_rescaled;
                    if e_new <= energy {
                        current = candidate;
                        energy = e_new;
                        accepted = true;
                        break;
                    }
                }
                Err(_) => {}
            }
            dt *= 0.5;
        }
        if !accepted {
            break;
        }
        trace.push(trace_row(&current, it, energy, gmax));
    }
    Ok(Relaxed { config: current, trace })
}

/// Alternating block descent: centers, then radii, for `rounds` passes.
pub fn relax_alternating(
    config: &DropletConfig,
    green: &GreenEvaluator,
    rounds: usize,
    steps_per_round: usize,
    center_step: f64,
) -> Result<Relaxed> {
    let mut current = config.clone();
    let mut trace = Vec::new();
    let mut offset = 0;
    for _ in 0..rounds {
        let r1 = relax_centers(&current, green, steps_per_round, center_step)?;
        for mut row in r1.trace {
            row.step += offset;
            offset = row.step;
            trace.push(row);
        }
        offset += 1;
        current = r1.config;
        let r2 = relax_areas(&current, green, steps_per_round)?;
        for mut row in r2.trace {
            row.step += offset;
            offset = row.step;
            trace.push(row);
        }
        offset += 1;
        current = r2.config;
    }
    Ok(Relaxed { config: current, trace })
}

/// Lower-bound defect functional: the rescaled energy minus the linear
/// area term at slope (3^{2/3} - 2δ̄/κ² - η) and minus the short-range
/// truncated interaction built from G_ρ = G · smoothstep(ρ/2, ρ).
pub fn defect_m(
    config: &DropletConfig,
    green: &GreenEvaluator,
    gamma: f64,
    eta: f64,
    rho: f64,
) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0 / 3.0) {
        return Err(OkError::Parameter(format!(
            "gamma must lie in (0, 1/3), got {gamma}"
        )));
    }
    if !(eta > 0.0) {
        return Err(OkError::Parameter(format!("eta must be positive, got {eta}")));
    }
    if !(rho > 0.0 && rho < 0.25 * config.params.ell) {
        return Err(OkError::Parameter(format!(
            "rho must lie in (0, ell/4), got {rho}"
        )));
    }
    let quad_order = 8;
    let e = sharp_energy_with_order(config, green, quad_order)?;
    let stats = rescaled_stats(config)?;
    let l = config.abs_ln_eps();
    let k2 = config.params.kappa * config.params.kappa;
    let slope = 3f64.cbrt().powi(2) - 2.0 * config.params.delta_bar / k2 - eta;
    let g_rho_term = truncated_interaction(config, green, rho, quad_order)?;
    Ok(e.total_rescaled - slope * stats.total_area() / l - g_rho_term)
}

/// 2 ∬ G_ρ dμ^ε dμ^ε over the droplet union.
fn truncated_interaction(
    config: &DropletConfig,
    green: &GreenEvaluator,
    rho: f64,
    quad_order: usize,
) -> Result<f64> {
    let n = config.droplets.len();
    let params = config.params;
    let s2 = measure_scale(config.epsilon).powi(2);
    let phi = |t: f64| smoothstep(0.5 * rho, rho, t);
    let nodes: Vec<_> = config
        .droplets
        .iter()
        .map(|d| shape_quadrature(&d.shape, quad_order))
        .collect();
    let mut total = 0.0;
    // pair terms (both orders via factor 2)
    for i in 0..n {
        for j in (i + 1)..n {
            let dc = params.min_image([
                config.droplets[i].center[0] - config.droplets[j].center[0],
                config.droplets[i].center[1] - config.droplets[j].center[1],
            ]);
            let gap = dc[0].hypot(dc[1])
                - config.droplets[i].circumradius()
                - config.droplets[j].circumradius();
            if gap > rho {
                // φ ≡ 1 over the supports: plain pair entry
                let (pi, wi) = &nodes[i];
                let (pj, wj) = &nodes[j];
                let mut sum = 0.0;
                for (a, wa) in pi.iter().zip(wi) {
                    for (b, wb) in pj.iter().zip(wj) {
                        sum += wa * wb * green.value([dc[0] + a[0] - b[0], dc[1] + a[1] - b[1]]);
                    }
                }
                total += 2.0 * 2.0 * s2 * sum;
            } else {
                let (pi, wi) = &nodes[i];
                let (pj, wj) = &nodes[j];
                let mut sum = 0.0;
                for (a, wa) in pi.iter().zip(wi) {
                    for (b, wb) in pj.iter().zip(wj) {
                        let x = [dc[0] + a[0] - b[0], dc[1] + a[1] - b[1]];
                        let t = x[0].hypot(x[1]);
                        if t > 0.5 * rho {
                            sum += wa * wb * green.value(x) * phi(t);
                        }
                    }
                }
                total += 2.0 * 2.0 * s2 * sum;
            }
        }
    }
    // self terms via the equal-disk overlap reduction for disks, plain
    // quadrature with the cutoff for polygons
    for i in 0..n {
        match &config.droplets[i].shape {
            Shape::Disk { radius } => {
                let a = *radius;
                if 2.0 * a <= 0.5 * rho {
                    continue; // φ vanishes on the whole support
                }
                let (ts, tw) = gauss_legendre_on(8 * quad_order, 0.5 * rho, 2.0 * a);
                let ntheta = 2 * quad_order;
                let mut sum = 0.0;
                for (&t, &wt) in ts.iter().zip(&tw) {
                    let aov = geometry::equal_disk_overlap(a, t);
                    let mut ang = 0.0;
                    for k in 0..ntheta {
                        let th = TWO_PI * (k as f64 + 0.5) / ntheta as f64;
                        ang += green.value([t * th.cos(), t * th.sin()]);
                    }
                    sum += wt * aov * t * phi(t) * ang * TWO_PI / ntheta as f64;
                }
                total += 2.0 * s2 * sum;
            }
            Shape::Polygon { .. } => {
                let (pts, wts) = &nodes[i];
                let mut sum = 0.0;
                for (x, wx) in pts.iter().zip(wts) {
                    for (y, wy) in pts.iter().zip(wts) {
                        let d = [x[0] - y[0], x[1] - y[1]];
                        let t = d[0].hypot(d[1]);
                        if t > 0.5 * rho {
                            sum += wx * wy * green.value(d) * phi(t);
                        }
                    }
                }
                total += 2.0 * s2 * sum;
            }
        }
    }
    Ok(total)
}

/// Window statistics over the ensemble.
pub fn ensemble_stats(config: &DropletConfig, gamma: f64) -> Result<EnsembleStats> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(OkError::Parameter(format!(
            "gamma must lie in (0,1), got {gamma}"
        )));
    }
    let stats = rescaled_stats(config)?;
    let l = config.abs_ln_eps();
    let lo = optimal_area() * gamma;
    let hi = optimal_area() / gamma;
    let mut in_window = Vec::new();
    let mut out_mass = 0.0;
    for &a in &stats.areas {
        if a >= lo && a <= hi {
            in_window.push(a);
        } else {
            out_mass += a;
        }
    }
    let count = in_window.len();
    let mean = if count > 0 {
        in_window.iter().sum::<f64>() / count as f64
    } else {
        0.0
    };
    let var = if count > 0 {
        in_window.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / count as f64
    } else {
        0.0
    };
    let mut deficit_sum = 0.0;
    for (&a, &p) in stats.areas.iter().zip(&stats.perimeters) {
        deficit_sum += p - (4.0 * std::f64::consts::PI * a).sqrt();
    }
    Ok(EnsembleStats {
        gamma,
        in_window_count: count,
        area_mean: mean,
        area_variance: var,
        out_window_mass: out_mass / l,
        deficit_sum: deficit_sum / l,
        count_density: optimal_area() * count as f64 / l,
    })
}
