//! Sharp-interface energy of droplet configurations: perimeter and area
//! terms plus the screened Coulomb interaction, with the log singularity
//! of the self-interaction handled in closed form.

use rayon::prelude::*;

use crate::droplet_model::{DropletConfig, Shape};
use crate::error::{OkError, Result};
use crate::geometry::{self, P2};
use crate::special::gauss_legendre_on;
use crate::torus::{abs_ln_eps, check_epsilon, measure_scale, TorusParams};
use crate::torus_green::GreenEvaluator;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Term-by-term decomposition of the rescaled energy, plus the physical
/// total at the given eps.
#[derive(Debug, Clone)]
pub struct EnergyBreakdown {
    pub background: f64,
    pub perimeter_term: f64,
    pub area_term: f64,
    pub self_interaction: f64,
    pub pair_interaction: f64,
    pub total_rescaled: f64,
    pub total_physical: f64,
}

impl EnergyBreakdown {
    /// Named-field record with 17-significant-digit decimals.
    pub fn to_record(&self) -> String {
        let g = crate::droplet_model::format_g17;
        format!(
            "{{\"background\": {}, \"perimeter_term\": {}, \"area_term\": {}, \
             \"self_interaction\": {}, \"pair_interaction\": {}, \
             \"total_rescaled\": {}, \"total_physical\": {}}}",
            g(self.background),
            g(self.perimeter_term),
            g(self.area_term),
            g(self.self_interaction),
            g(self.pair_interaction),
            g(self.total_rescaled),
            g(self.total_physical)
        )
    }
}

/// Background order parameter at eps: -1 + eps^{2/3} |ln eps|^{1/3} delta_bar.
pub fn background_density(epsilon: f64, params: &TorusParams) -> Result<f64> {
    check_epsilon(epsilon)?;
    let l = abs_ln_eps(epsilon);
    Ok(-1.0 + epsilon.powf(2.0 / 3.0) * l.cbrt() * params.delta_bar)
}

/// Rescaled background energy density term: delta_bar^2 ell^2 / (2 kappa^2).
pub fn background_term(params: &TorusParams) -> f64 {
    params.delta_bar * params.delta_bar * params.ell * params.ell
        / (2.0 * params.kappa * params.kappa)
}

/// Quadrature nodes and weights covering one droplet, in coordinates
/// relative to its center.  Disks map polarly (Gauss radially, uniform in
/// angle); polygons fan into triangles with a collapsed tensor rule.
pub fn shape_quadrature(shape: &Shape, order: usize) -> (Vec<P2>, Vec<f64>) {
    match shape {
        Shape::Disk { radius } => {
            let (rs, rw) = gauss_legendre_on(order, 0.0, *radius);
            let ntheta = 2 * order;
            let dtheta = TWO_PI / ntheta as f64;
            let mut pts = Vec::with_capacity(order * ntheta);
            let mut wts = Vec::with_capacity(order * ntheta);
            for (&r, &wr) in rs.iter().zip(&rw) {
                for t in 0..ntheta {
                    let th = (t as f64 + 0.5) * dtheta;
                    pts.push([r * th.cos(), r * th.sin()]);
                    wts.push(wr * r * dtheta);
                }
            }
            (pts, wts)
        }
        Shape::Polygon { vertices } => {
            let tris = geometry::triangulate(vertices);
            let (gx, gw) = gauss_legendre_on(order, 0.0, 1.0);
            let mut pts = Vec::new();
            let mut wts = Vec::new();
            for t in tris {
                let (a, b, c) = (t[0], t[1], t[2]);
                let jac = geometry::cross(geometry::sub(b, a), geometry::sub(c, a)).abs();
                // collapsed square-to-triangle map (u, v) -> a + u(b-a) + uv(c-b)
                for (&u, &wu) in gx.iter().zip(&gw) {
                    for (&v, &wv) in gx.iter().zip(&gw) {
                        let p = [
                            a[0] + u * (b[0] - a[0]) + u * v * (c[0] - b[0]),
                            a[1] + u * (b[1] - a[1]) + u * v * (c[1] - b[1]),
                        ];
                        pts.push(p);
                        wts.push(wu * wv * u * jac);
                    }
                }
            }
            (pts, wts)
        }
    }
}

/// Symmetric matrix with entries 2 ∬ G dmu_i dmu_j.  Off-diagonal entries
/// integrate the smooth kernel with tensor quadrature; diagonals split off
/// the -ln/2π part (closed form for disks, analytic inner integral for
/// polygons) and quadrate the smooth remainder.
pub fn interaction_matrix(
    config: &DropletConfig,
    green: &GreenEvaluator,
    quad_order: usize,
) -> Result<Vec<Vec<f64>>> {
    if quad_order < 4 {
        return Err(OkError::Parameter(format!(
            "quad_order must be >= 4, got {quad_order}"
        )));
    }
    let n = config.droplets.len();
    let params = config.params;
    let s2 = measure_scale(config.epsilon).powi(2);

    let nodes: Vec<(Vec<P2>, Vec<f64>)> = config
        .droplets
        .iter()
        .map(|d| shape_quadrature(&d.shape, quad_order))
        .collect();

    // off-diagonal pairs in parallel with a fixed reduction order
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let pair_vals: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let ci = config.droplets[i].center;
            let cj = config.droplets[j].center;
            let dc = params.min_image([ci[0] - cj[0], ci[1] - cj[1]]);
            let (pi, wi) = &nodes[i];
            let (pj, wj) = &nodes[j];
            let mut sum = 0.0;
            for (a, wa) in pi.iter().zip(wi) {
                for (b, wb) in pj.iter().zip(wj) {
                    let x = [dc[0] + a[0] - b[0], dc[1] + a[1] - b[1]];
                    sum += wa * wb * green.value(x);
                }
            }
            2.0 * s2 * sum
        })
        .collect();

    let diag: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| self_interaction_entry(config, green, i, quad_order))
        .collect::<Result<Vec<f64>>>()?;

    let mut m = vec![vec![0.0; n]; n];
    for (k, &(i, j)) in pairs.iter().enumerate() {
        m[i][j] = pair_vals[k];
        m[j][i] = pair_vals[k];
    }
    for (i, &v) in diag.iter().enumerate() {
        m[i][i] = v;
    }
    Ok(m)
}

/// Diagonal entry 2 ∬_{Ω×Ω} G(x-y) dmu dmu with the log part analytic.
fn self_interaction_entry(
    config: &DropletConfig,
    green: &GreenEvaluator,
    i: usize,
    quad_order: usize,
) -> Result<f64> {
    let s2 = measure_scale(config.epsilon).powi(2);
    let d = &config.droplets[i];
    match &d.shape {
        Shape::Disk { radius } => {
            let a = *radius;
            // log part: ∬ ln|x-y| over the disk pair has a closed form
            let log_part = -geometry::disk_pair_log_integral(a) / TWO_PI;
            // remainder by the overlap-area radial reduction:
            // ∬ R(x-y) = ∫_0^{2a} A_ov(t) t ∫ R(t e^{iθ}) dθ dt
            let (ts, tw) = gauss_legendre_on(4 * quad_order, 0.0, 2.0 * a);
            let ntheta = 2 * quad_order;
            let mut rem = 0.0;
            for (&t, &wt) in ts.iter().zip(&tw) {
                let aov = geometry::equal_disk_overlap(a, t);
                let mut ang = 0.0;
                for k in 0..ntheta {
                    let th = TWO_PI * (k as f64 + 0.5) / ntheta as f64;
                    ang += green.remainder_at([t * th.cos(), t * th.sin()]);
                }
                rem += wt * aov * t * ang * TWO_PI / ntheta as f64;
            }
            Ok(2.0 * s2 * (log_part + rem))
        }
        Shape::Polygon { vertices } => {
            // outer Gauss over the polygon; inner log integral analytic,
            // inner remainder by quadrature
            let (pts, wts) = shape_quadrature(&d.shape, quad_order);
            let (rpts, rwts) = shape_quadrature(&d.shape, quad_order);
            let mut total = 0.0;
            for (x, wx) in pts.iter().zip(&wts) {
                let log_inner = geometry::polygon_log_potential(vertices, *x);
                let mut rem_inner = 0.0;
                for (y, wy) in rpts.iter().zip(&rwts) {
                    rem_inner += wy * green.remainder_at([x[0] - y[0], x[1] - y[1]]);
                }
                total += wx * (-log_inner / TWO_PI + rem_inner);
            }
            Ok(2.0 * s2 * total)
        }
    }
}

/// Full sharp-interface energy breakdown of a configuration.
pub fn sharp_energy(config: &DropletConfig, green: &GreenEvaluator) -> Result<EnergyBreakdown> {
    sharp_energy_with_order(config, green, 8)
}

pub fn sharp_energy_with_order(
    config: &DropletConfig,
    green: &GreenEvaluator,
    quad_order: usize,
) -> Result<EnergyBreakdown> {
    let params = config.params;
    let stats = crate::droplet_model::rescaled_stats(config)?;
    let l = config.abs_ln_eps();
    let perimeter_term = stats.total_perimeter() / l;
    let area_term =
        -2.0 * params.delta_bar / (params.kappa * params.kappa) * stats.total_area() / l;
    let m = interaction_matrix(config, green, quad_order)?;
    let n = config.droplets.len();
    let mut self_interaction = 0.0;
    let mut pair_interaction = 0.0;
    for i in 0..n {
        self_interaction += m[i][i];
        for j in 0..n {
            if j != i {
                pair_interaction += m[i][j];
            }
        }
    }
    let background = background_term(&params);
    let total_rescaled = perimeter_term + area_term + self_interaction + pair_interaction;
    let eps = config.epsilon;
    let total_physical =
        eps.powf(4.0 / 3.0) * l.powf(2.0 / 3.0) * (background + total_rescaled);
    Ok(EnergyBreakdown {
        background,
        perimeter_term,
        area_term,
        self_interaction,
        pair_interaction,
        total_rescaled,
        total_physical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::droplet_model::Droplet;
    use crate::torus::{optimal_area, optimal_perimeter, optimal_radius};
    use crate::torus_green::build_green;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> TorusParams {
        TorusParams::new(1.0, 2.0 / 3.0, 1.0).unwrap()
    }

    #[test]
    fn background_density_values() {
        let p = params();
        // eps -> 0 along a decreasing sequence: strictly approaches -1
        let mut last = background_density(1e-4, &p).unwrap();
        for &eps in &[1e-6, 1e-8] {
            let v = background_density(eps, &p).unwrap();
            assert!(v > -1.0 && v < last);
            last = v;
        }
        // eps = e^{-10}, delta_bar = 1 -> -1 + e^{-20/3} 10^{1/3}
        let eps = (-10.0f64).exp();
        let expect = -1.0 + (-20.0f64 / 3.0).exp() * 10f64.cbrt();
        assert_relative_eq!(
            background_density(eps, &p).unwrap(),
            expect,
            max_relative = 1e-14
        );
        // doubling delta_bar doubles the deviation from -1
        let p2 = TorusParams::new(1.0, 2.0 / 3.0, 2.0).unwrap();
        let d1 = background_density(1e-5, &p).unwrap() + 1.0;
        let d2 = background_density(1e-5, &p2).unwrap() + 1.0;
        assert_relative_eq!(d2, 2.0 * d1, max_relative = 1e-13);
        assert!(background_density(0.9, &p).is_err());
    }

    #[test]
    fn breakdown_record_format() {
        let p = params();
        let g = build_green(p, 64).unwrap();
        let config = DropletConfig::new(p, 1e-5, vec![]).unwrap();
        let e = sharp_energy(&config, &g).unwrap();
        let rec = e.to_record();
        assert!(rec.starts_with('{') && rec.ends_with('}'));
        assert!(rec.contains("\"total_physical\": "));
        // 17 significant digits survive
        assert!(rec.contains(&crate::droplet_model::format_g17(e.background)));
    }

    #[test]
    fn empty_config_energy() {
        let p = params();
        let g = build_green(p, 64).unwrap();
        let eps = 1e-5;
        let config = DropletConfig::new(p, eps, vec![]).unwrap();
        let e = sharp_energy(&config, &g).unwrap();
        assert_eq!(e.total_rescaled, 0.0);
        let l = abs_ln_eps(eps);
        let expect = eps.powf(4.0 / 3.0) * l.powf(2.0 / 3.0) * background_term(&p);
        assert_relative_eq!(e.total_physical, expect, max_relative = 1e-14);
    }

    #[test]
    fn single_optimal_disk_linear_terms() {
        let p = params();
        let g = build_green(p, 64).unwrap();
        let eps = 1e-8;
        let r = optimal_radius(eps);
        let config = DropletConfig::new(p, eps, vec![Droplet::disk([0.5, 0.5], r)]).unwrap();
        let e = sharp_energy(&config, &g).unwrap();
        let l = abs_ln_eps(eps);
        assert_relative_eq!(e.perimeter_term, optimal_perimeter() / l, max_relative = 1e-12);
        assert_relative_eq!(
            e.area_term,
            -2.0 * p.delta_bar / (p.kappa * p.kappa) * optimal_area() / l,
            max_relative = 1e-12
        );
    }

    #[test]
    fn doubling_ell_changes_only_background() {
        let eps = 1e-6;
        let r = optimal_radius(eps);
        let p1 = params();
        let p2 = TorusParams::new(2.0, 2.0 / 3.0, 1.0).unwrap();
        let g1 = build_green(p1, 64).unwrap();
        let g2 = build_green(p2, 64).unwrap();
        let c1 = DropletConfig::new(p1, eps, vec![Droplet::disk([0.5, 0.5], r)]).unwrap();
        let c2 = DropletConfig::new(p2, eps, vec![Droplet::disk([0.5, 0.5], r)]).unwrap();
        let e1 = sharp_energy(&c1, &g1).unwrap();
        let e2 = sharp_energy(&c2, &g2).unwrap();
        assert_relative_eq!(e2.background, 4.0 * e1.background, max_relative = 1e-14);
        assert_relative_eq!(e1.perimeter_term, e2.perimeter_term, max_relative = 1e-14);
        assert_relative_eq!(e1.area_term, e2.area_term, max_relative = 1e-14);
        // interaction changes (different torus Green's function), but the
        // breakdown identity holds in both
        for e in [&e1, &e2] {
            assert_relative_eq!(
                e.total_rescaled,
                e.perimeter_term + e.area_term + e.self_interaction + e.pair_interaction,
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn far_pair_matches_point_mass() {
        let p = params();
        let g = build_green(p, 128).unwrap();
        let eps = 1e-6;
        let r = optimal_radius(eps);
        // centers half a torus apart: distance = l/2 >> 10 r
        let c = DropletConfig::new(
            p,
            eps,
            vec![Droplet::disk([0.25, 0.25], r), Droplet::disk([0.75, 0.75], r)],
        )
        .unwrap();
        let m = interaction_matrix(&c, &g, 8).unwrap();
        let stats = crate::droplet_model::rescaled_stats(&c).unwrap();
        let l = abs_ln_eps(eps);
        let gval = g.value([0.5, 0.5]);
        let point_mass = 2.0 * stats.areas[0] * stats.areas[1] / (l * l) * gval;
        assert_relative_eq!(m[0][1], point_mass, max_relative = 0.01);
        assert_eq!(m[0][1], m[1][0]);
        assert!(m[0][1] > 0.0 && m[0][0] > 0.0);
    }

    #[test]
    fn disk_self_entry_leading_coefficient() {
        // coefficient A^2/(3 pi |ln eps|) with ln|ln eps|/|ln eps| corrections;
        // a screening length well inside the cell keeps the torus remainder
        // from inflating the finite-eps correction
        let p = TorusParams::new(4.0, 2.0, 1.0).unwrap();
        let g = build_green(p, 128).unwrap();
        let eps = 1e-6;
        let r = optimal_radius(eps);
        let c = DropletConfig::new(p, eps, vec![Droplet::disk([2.0, 2.0], r)]).unwrap();
        let m = interaction_matrix(&c, &g, 8).unwrap();
        let a = optimal_area();
        let l = abs_ln_eps(eps);
        let leading = a * a / (3.0 * std::f64::consts::PI * l);
        let ratio = m[0][0] / leading;
        assert!(
            (ratio - 1.0).abs() < 0.35,
            "self-entry ratio to leading term: {ratio}"
        );
    }

    #[test]
    fn disk_log_closed_form_vs_monte_carlo() {
        // validate ∬_{D_a x D_a} ln|x-y| = pi^2 a^4 (ln a - 1/4) by MC
        let a = 0.83;
        let exact = geometry::disk_pair_log_integral(a);
        let mut rng = ChaCha8Rng::seed_from_u64(12345);
        let n = 10_000_000u64;
        let mut sum = 0.0;
        let mut count = 0u64;
        while count < n {
            let x = [rng.random_range(-a..a), rng.random_range(-a..a)];
            let y = [rng.random_range(-a..a), rng.random_range(-a..a)];
            if x[0].hypot(x[1]) <= a && y[0].hypot(y[1]) <= a {
                let d = (x[0] - y[0]).hypot(x[1] - y[1]);
                if d > 0.0 {
                    sum += d.ln();
                }
                count += 1;
            }
        }
        let area = std::f64::consts::PI * a * a;
        let mc = sum / n as f64 * area * area;
        assert!(
            ((mc - exact) / exact).abs() < 1e-3,
            "mc {mc} vs exact {exact}"
        );
    }

    #[test]
    fn translation_invariance() {
        let p = params();
        let g = build_green(p, 64).unwrap();
        let eps = 1e-5;
        let r = optimal_radius(eps);
        let mk = |shift: P2| {
            DropletConfig::new(
                p,
                eps,
                vec![
                    Droplet::disk(p.wrap([0.2 + shift[0], 0.3 + shift[1]]), r),
                    Droplet::disk(p.wrap([0.7 + shift[0], 0.6 + shift[1]]), 0.8 * r),
                ],
            )
            .unwrap()
        };
        let e0 = sharp_energy(&mk([0.0, 0.0]), &g).unwrap();
        let e1 = sharp_energy(&mk([0.371, 0.824]), &g).unwrap();
        assert!(
            (e0.total_rescaled - e1.total_rescaled).abs() < 1e-8,
            "shift changed energy by {}",
            (e0.total_rescaled - e1.total_rescaled).abs()
        );
    }

    #[test]
    fn lower_bound_with_min_g_holds() {
        let p = params();
        let g = build_green(p, 64).unwrap();
        // min of G over a sample grid
        let mut g_min = f64::INFINITY;
        let n = 128;
        for i in 0..n {
            for j in 0..n {
                let x = p.min_image_1d((i as f64 + 0.5) / n as f64);
                let y = p.min_image_1d((j as f64 + 0.5) / n as f64);
                if x.hypot(y) > 1e-9 {
                    g_min = g_min.min(g.value([x, y]));
                }
            }
        }
        assert!(g_min > 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4242);
        for _ in 0..50 {
            let eps = 10f64.powf(rng.random_range(-8.0..-3.0));
            let mut droplets = Vec::new();
            let k = rng.random_range(1..4);
            for idx in 0..k {
                let r = optimal_radius(eps) * rng.random_range(0.5..1.5);
                let cx = 0.17 + 0.33 * (idx % 3) as f64;
                let cy = 0.2 + 0.5 * (idx / 3) as f64;
                droplets.push(Droplet::disk([cx, cy], r));
            }
            let config = DropletConfig::new(p, eps, droplets).unwrap();
            let e = sharp_energy_with_order(&config, &g, 6).unwrap();
            let stats = crate::droplet_model::rescaled_stats(&config).unwrap();
            let l = abs_ln_eps(eps);
            let mass = stats.total_area() / l;
            let linear: f64 = stats.total_perimeter() / l
                - 2.0 * p.delta_bar / (p.kappa * p.kappa) * stats.total_area() / l;
            let bound = linear + 2.0 * g_min * mass * mass;
            assert!(
                e.total_rescaled >= bound - 1e-9,
                "energy {} below bound {}",
                e.total_rescaled,
                bound
            );
        }
    }

    #[test]
    fn adding_far_droplet_increases_interaction() {
        let p = params();
        let g = build_green(p, 64).unwrap();
        let eps = 1e-5;
        let r = optimal_radius(eps);
        let base = DropletConfig::new(p, eps, vec![Droplet::disk([0.2, 0.2], r)]).unwrap();
        let more = DropletConfig::new(
            p,
            eps,
            vec![Droplet::disk([0.2, 0.2], r), Droplet::disk([0.7, 0.7], r)],
        )
        .unwrap();
        let e0 = sharp_energy(&base, &g).unwrap();
        let e1 = sharp_energy(&more, &g).unwrap();
        assert!(
            e1.self_interaction + e1.pair_interaction
                > e0.self_interaction + e0.pair_interaction
        );
    }

    #[test]
    fn polygon_self_entry_matches_monte_carlo() {
        // square droplet: 2 s^2 ∬ G over the square, MC oracle on G itself
        let p = params();
        let g = build_green(p, 64).unwrap();
        let eps = 1e-4;
        let s = 0.03;
        let verts = vec![
            [-s / 2.0, -s / 2.0],
            [s / 2.0, -s / 2.0],
            [s / 2.0, s / 2.0],
            [-s / 2.0, s / 2.0],
        ];
        let config =
            DropletConfig::new(p, eps, vec![Droplet::polygon([0.5, 0.5], verts)]).unwrap();
        let m = interaction_matrix(&config, &g, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(777);
        let nmc = 400_000u64;
        let mut sum = 0.0;
        for _ in 0..nmc {
            let x = [
                rng.random_range(-s / 2.0..s / 2.0),
                rng.random_range(-s / 2.0..s / 2.0),
            ];
            let y = [
                rng.random_range(-s / 2.0..s / 2.0),
                rng.random_range(-s / 2.0..s / 2.0),
            ];
            let d = [x[0] - y[0], x[1] - y[1]];
            if d[0].hypot(d[1]) > 0.0 {
                sum += g.value(d);
            }
        }
        let s2 = measure_scale(eps).powi(2);
        let mc = 2.0 * s2 * sum / nmc as f64 * (s * s) * (s * s);
        assert_relative_eq!(m[0][0], mc, max_relative = 5e-3);
    }
}
