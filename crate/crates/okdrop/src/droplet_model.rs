//! Droplet configurations on the torus: geometry, rescaled statistics,
//! shape metrics, rasterized densities and periodic component labeling.

use crate::error::{OkError, Result};
use crate::geometry::{self, P2};
use crate::grid::Grid2;
use crate::special::golden_section;
use crate::torus::{
    abs_ln_eps, area_scale, check_epsilon, measure_scale, perimeter_scale, TorusParams,
};

/// Droplet shape: a disk, or a simple positively-oriented polygon stored
/// relative to the droplet center.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Disk { radius: f64 },
    Polygon { vertices: Vec<P2> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Droplet {
    pub center: P2,
    pub shape: Shape,
}

impl Droplet {
    pub fn disk(center: P2, radius: f64) -> Self {
        Self { center, shape: Shape::Disk { radius } }
    }

    pub fn polygon(center: P2, vertices: Vec<P2>) -> Self {
        Self { center, shape: Shape::Polygon { vertices } }
    }

    /// Physical area.
    pub fn area(&self) -> f64 {
        match &self.shape {
            Shape::Disk { radius } => std::f64::consts::PI * radius * radius,
            Shape::Polygon { vertices } => geometry::polygon_signed_area(vertices),
        }
    }

    /// Physical perimeter.
    pub fn perimeter(&self) -> f64 {
        match &self.shape {
            Shape::Disk { radius } => 2.0 * std::f64::consts::PI * radius,
            Shape::Polygon { vertices } => geometry::polygon_perimeter(vertices),
        }
    }

    /// Radius of the smallest origin-centered disk containing the shape.
    pub fn circumradius(&self) -> f64 {
        match &self.shape {
            Shape::Disk { radius } => *radius,
            Shape::Polygon { vertices } => vertices
                .iter()
                .map(|v| geometry::norm(*v))
                .fold(0.0, f64::max),
        }
    }

    pub fn diameter(&self) -> f64 {
        match &self.shape {
            Shape::Disk { radius } => 2.0 * radius,
            Shape::Polygon { vertices } => geometry::polygon_diameter(vertices),
        }
    }

    fn validate(&self, params: &TorusParams) -> Result<()> {
        match &self.shape {
            Shape::Disk { radius } => {
                if !(*radius > 0.0) {
                    return Err(OkError::Geometry(format!("disk radius {radius} <= 0")));
                }
                if *radius >= 0.25 * params.ell {
                    return Err(OkError::Geometry(format!(
                        "disk radius {radius} exceeds ell/4"
                    )));
                }
            }
            Shape::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(OkError::Geometry("polygon needs >= 3 vertices".into()));
                }
                let area = geometry::polygon_signed_area(vertices);
                if area <= 0.0 {
                    return Err(OkError::Geometry(format!(
                        "polygon must be positively oriented with positive area, got {area}"
                    )));
                }
                if !geometry::polygon_is_simple(vertices) {
                    return Err(OkError::Geometry("polygon is self-intersecting".into()));
                }
                if geometry::polygon_diameter(vertices) >= 0.25 * params.ell {
                    return Err(OkError::Geometry("polygon diameter exceeds ell/4".into()));
                }
            }
        }
        Ok(())
    }
}

/// A validated droplet configuration: pairwise disjoint droplets, each
/// fitting in a quarter cell, with the interface parameter eps.
#[derive(Debug, Clone)]
pub struct DropletConfig {
    pub params: TorusParams,
    pub epsilon: f64,
    pub droplets: Vec<Droplet>,
}

impl DropletConfig {
    pub fn new(params: TorusParams, epsilon: f64, droplets: Vec<Droplet>) -> Result<Self> {
        check_epsilon(epsilon)?;
        for d in &droplets {
            d.validate(&params)?;
        }
        // disjointness via circumradius separation (conservative for
        // polygons, exact for disks)
        for i in 0..droplets.len() {
            for j in (i + 1)..droplets.len() {
                let dist = params.distance(droplets[i].center, droplets[j].center);
                if dist <= droplets[i].circumradius() + droplets[j].circumradius() {
                    return Err(OkError::Geometry(format!(
                        "droplets {i} and {j} overlap or touch (distance {dist:.4e})"
                    )));
                }
            }
        }
        Ok(Self { params, epsilon, droplets })
    }

    pub fn abs_ln_eps(&self) -> f64 {
        abs_ln_eps(self.epsilon)
    }
}

/// Rescaled droplet areas and perimeters.
#[derive(Debug, Clone)]
pub struct RescaledStats {
    pub areas: Vec<f64>,
    pub perimeters: Vec<f64>,
}

impl RescaledStats {
    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }
    pub fn total_perimeter(&self) -> f64 {
        self.perimeters.iter().sum()
    }
}

/// Rescaled areas A_i and perimeters P_i of every droplet.
pub fn rescaled_stats(config: &DropletConfig) -> Result<RescaledStats> {
    let sa = area_scale(config.epsilon);
    let sp = perimeter_scale(config.epsilon);
    let mut areas = Vec::with_capacity(config.droplets.len());
    let mut perimeters = Vec::with_capacity(config.droplets.len());
    for d in &config.droplets {
        let a = d.area();
        if a <= 0.0 {
            return Err(OkError::Geometry("degenerate droplet with zero area".into()));
        }
        areas.push(sa * a);
        perimeters.push(sp * d.perimeter());
    }
    Ok(RescaledStats { areas, perimeters })
}

/// Nonnegative density on the torus: grid samples plus optional atoms.
#[derive(Debug, Clone)]
pub struct DensityMeasure {
    pub grid: Grid2,
    pub atoms: Vec<(f64, P2)>,
    pub total_mass: f64,
}

impl DensityMeasure {
    pub fn from_grid(grid: Grid2) -> Result<Self> {
        if grid.data.iter().any(|&v| v < -1e-12) {
            return Err(OkError::Domain("density has negative samples".into()));
        }
        let total_mass = grid.integral();
        Ok(Self { grid, atoms: Vec::new(), total_mass })
    }

    pub fn with_atoms(mut self, atoms: Vec<(f64, P2)>) -> Result<Self> {
        if atoms.iter().any(|&(w, _)| w < 0.0) {
            return Err(OkError::Domain("atom with negative weight".into()));
        }
        self.total_mass = self.grid.integral() + atoms.iter().map(|a| a.0).sum::<f64>();
        self.atoms = atoms;
        Ok(self)
    }

    pub fn uniform(value: f64, n: usize, ell: f64) -> Result<Self> {
        if value < 0.0 {
            return Err(OkError::Domain("negative uniform density".into()));
        }
        let grid = Grid2 { n, ell, data: vec![value; n * n] };
        Self::from_grid(grid)
    }

    /// Mass inside an axis box [x0,x1) x [y0,y1) (grid cells weighted by
    /// their overlap fraction, atoms by containment).
    pub fn mass_in_box(&self, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
        let n = self.grid.n;
        let h = self.grid.h();
        let mut mass = 0.0;
        for i in 0..n {
            let cx0 = i as f64 * h;
            let cx1 = cx0 + h;
            let wx = (cx1.min(x1) - cx0.max(x0)).max(0.0);
            if wx == 0.0 {
                continue;
            }
            for j in 0..n {
                let cy0 = j as f64 * h;
                let cy1 = cy0 + h;
                let wy = (cy1.min(y1) - cy0.max(y0)).max(0.0);
                if wy > 0.0 {
                    mass += self.grid.at(i, j) * wx * wy;
                }
            }
        }
        for &(w, p) in &self.atoms {
            if p[0] >= x0 && p[0] < x1 && p[1] >= y0 && p[1] < y1 {
                mass += w;
            }
        }
        mass
    }
}

/// Rasterize the normalized droplet indicator measure.  Disks use exact
/// circle-cell coverage; polygons use 4x4 supersampling per cell.
pub fn droplet_measure(config: &DropletConfig, grid_n: usize) -> Result<DensityMeasure> {
    if grid_n < 128 {
        return Err(OkError::Parameter(format!("grid_n must be >= 128, got {grid_n}")));
    }
    let params = config.params;
    let ell = params.ell;
    let n = grid_n;
    let h = ell / n as f64;
    let scale = measure_scale(config.epsilon);
    let mut grid = Grid2::zeros(n, ell);
    for d in &config.droplets {
        let rad = d.circumradius();
        let c = d.center;
        // cell index window covering the droplet (with wrap)
        let i0 = ((c[0] - rad) / h).floor() as i64 - 1;
        let i1 = ((c[0] + rad) / h).ceil() as i64 + 1;
        let j0 = ((c[1] - rad) / h).floor() as i64 - 1;
        let j1 = ((c[1] + rad) / h).ceil() as i64 + 1;
        for bi in i0..=i1 {
            let iw = bi.rem_euclid(n as i64) as usize;
            let x0 = bi as f64 * h;
            for bj in j0..=j1 {
                let jw = bj.rem_euclid(n as i64) as usize;
                let y0 = bj as f64 * h;
                let frac = match &d.shape {
                    Shape::Disk { radius } => {
                        geometry::circle_box_overlap(c, *radius, x0, x0 + h, y0, y0 + h)
                            / (h * h)
                    }
                    Shape::Polygon { vertices } => {
                        // 4x supersampling
                        let mut hits = 0usize;
                        for si in 0..4 {
                            let px = x0 + (si as f64 + 0.5) * h / 4.0 - c[0];
                            for sj in 0..4 {
                                let py = y0 + (sj as f64 + 0.5) * h / 4.0 - c[1];
                                if geometry::point_in_polygon(vertices, [px, py]) {
                                    hits += 1;
                                }
                            }
                        }
                        hits as f64 / 16.0
                    }
                };
                if frac > 0.0 {
                    *grid.at_mut(iw, jw) += scale * frac;
                }
            }
        }
    }
    DensityMeasure::from_grid(grid)
}

/// Isoperimetric deficit (rescaled units) and Fraenkel asymmetry of one
/// droplet.  Disks give (0, 0) exactly; for polygons the asymmetry is
/// minimized over centers of the equal-area disk by coordinate descent
/// seeded at the centroid, refined through a coarse grid scan.
pub fn shape_metrics(config: &DropletConfig, idx: usize) -> Result<(f64, f64)> {
    let d = &config.droplets[idx];
    let a_phys = d.area();
    if a_phys <= 0.0 {
        return Err(OkError::Geometry("degenerate droplet".into()));
    }
    let sa = area_scale(config.epsilon);
    let sp = perimeter_scale(config.epsilon);
    let a = sa * a_phys;
    let p = sp * d.perimeter();
    let deficit = p - (4.0 * std::f64::consts::PI * a).sqrt();
    let fraenkel = match &d.shape {
        Shape::Disk { .. } => 0.0,
        Shape::Polygon { vertices } => {
            let r_ball = (a_phys / std::f64::consts::PI).sqrt();
            // alpha = 2 (1 - |E ∩ B(c)| / |E|) for equal areas
            let overlap = |c: P2| geometry::polygon_circle_overlap(vertices, c, r_ball);
            let mut best = geometry::polygon_centroid(vertices);
            let mut best_ov = overlap(best);
            // coarse 5x5 scan around the centroid
            let span = 0.25 * geometry::polygon_diameter(vertices);
            for i in -2..=2 {
                for j in -2..=2 {
                    let c = [
                        best[0] + i as f64 * span / 2.0,
                        best[1] + j as f64 * span / 2.0,
                    ];
                    let ov = overlap(c);
                    if ov > best_ov {
                        best_ov = ov;
                        best = c;
                    }
                }
            }
            // coordinate descent with golden section, a few sweeps
            let mut c = best;
            for _ in 0..4 {
                let cy = c[1];
                c[0] = golden_section(
                    |x| -overlap([x, cy]),
                    c[0] - span,
                    c[0] + span,
                    1e-10 * r_ball.max(1e-12),
                );
                let cx = c[0];
                c[1] = golden_section(
                    |y| -overlap([cx, y]),
                    c[1] - span,
                    c[1] + span,
                    1e-10 * r_ball.max(1e-12),
                );
            }
            let ov = overlap(c).max(best_ov);
            (2.0 * (1.0 - ov / a_phys)).clamp(0.0, 2.0)
        }
    };
    Ok((fraenkel, deficit))
}

/// Truncated rescaled area: A below the window cap, square-root growth
/// above it.
pub fn truncated_area(a: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(OkError::Parameter(format!("gamma must be in (0,1), got {gamma}")));
    }
    if !(a > 0.0) {
        return Err(OkError::Parameter(format!("area must be positive, got {a}")));
    }
    let cap = crate::torus::optimal_area() / gamma;
    if a < cap {
        Ok(a)
    } else {
        Ok((cap * a).sqrt())
    }
}

/// One periodic connected component of a binary grid.
#[derive(Debug, Clone)]
pub struct Component {
    pub cells: usize,
    /// physical area: cells * h^2
    pub area: f64,
    /// physical boundary length: true/false edge count * h
    pub perimeter: f64,
    /// component was merged across the x (row) seam
    pub wraps_x: bool,
    pub wraps_y: bool,
    /// one representative cell (row, col)
    pub seed: (usize, usize),
}

/// 4-connected component labeling with periodic wraparound (union-find).
pub fn label_components(binary: &[bool], n: usize, ell: f64) -> Vec<Component> {
    assert!(n >= 16, "grid too small for labeling");
    assert_eq!(binary.len(), n * n);
    let h = ell / n as f64;
    let mut parent: Vec<u32> = (0..(n * n) as u32).collect();
    let mut wrap_x = vec![false; n * n];
    let mut wrap_y = vec![false; n * n];

    fn find(parent: &mut [u32], mut i: u32) -> u32 {
        while parent[i as usize] != i {
            parent[i as usize] = parent[parent[i as usize] as usize];
            i = parent[i as usize];
        }
        i
    }
    let union = |parent: &mut Vec<u32>,
                     wrap_x: &mut Vec<bool>,
                     wrap_y: &mut Vec<bool>,
                     a: u32,
                     b: u32,
                     seam_x: bool,
                     seam_y: bool| {
        let ra = find(parent, a);
        let rb = find(parent, b);
        if ra != rb {
            parent[rb as usize] = ra;
            let w = wrap_x[rb as usize] || wrap_x[ra as usize] || seam_x;
            wrap_x[ra as usize] = w;
            let w = wrap_y[rb as usize] || wrap_y[ra as usize] || seam_y;
            wrap_y[ra as usize] = w;
        } else {
            if seam_x {
                wrap_x[ra as usize] = true;
            }
            if seam_y {
                wrap_y[ra as usize] = true;
            }
        }
    };

    for i in 0..n {
        for j in 0..n {
            if !binary[i * n + j] {
                continue;
            }
            let idx = (i * n + j) as u32;
            let right = i * n + (j + 1) % n;
            if binary[right] {
                union(
                    &mut parent,
                    &mut wrap_x,
                    &mut wrap_y,
                    idx,
                    right as u32,
                    false,
                    j + 1 == n,
                );
            }
            let down = ((i + 1) % n) * n + j;
            if binary[down] {
                union(
                    &mut parent,
                    &mut wrap_x,
                    &mut wrap_y,
                    idx,
                    down as u32,
                    i + 1 == n,
                    false,
                );
            }
        }
    }

    // gather components and count boundary edges
    use std::collections::HashMap;
    let mut comps: HashMap<u32, Component> = HashMap::new();
    for i in 0..n {
        for j in 0..n {
            if !binary[i * n + j] {
                continue;
            }
            let root = find(&mut parent, (i * n + j) as u32);
            let mut edges = 0usize;
            for (ni, nj) in [
                ((i + 1) % n, j),
                ((i + n - 1) % n, j),
                (i, (j + 1) % n),
                (i, (j + n - 1) % n),
            ] {
                if !binary[ni * n + nj] {
                    edges += 1;
                }
            }
            let e = comps.entry(root).or_insert(Component {
                cells: 0,
                area: 0.0,
                perimeter: 0.0,
                wraps_x: false,
                wraps_y: false,
                seed: (i, j),
            });
            e.cells += 1;
            e.perimeter += edges as f64 * h;
        }
    }
    let mut out: Vec<Component> = comps
        .into_iter()
        .map(|(root, mut c)| {
            c.area = c.cells as f64 * h * h;
            c.wraps_x = wrap_x[root as usize];
            c.wraps_y = wrap_y[root as usize];
            c
        })
        .collect();
    out.sort_by(|a, b| b.cells.cmp(&a.cells).then(a.seed.cmp(&b.seed)));
    out
}

// ── Text serialization ─────────────────────────────────────────────────
//
// One header line `ell kappa delta_bar epsilon count`, then one record per
// droplet: `disk cx cy r` or `poly cx cy k x1 y1 ... xk yk`, all decimals
// with 17 significant digits.

pub fn format_g17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn config_to_text(config: &DropletConfig) -> String {
    let mut s = String::new();
    let p = config.params;
    s.push_str(&format!(
        "{} {} {} {} {}\n",
        format_g17(p.ell),
        format_g17(p.kappa),
        format_g17(p.delta_bar),
        format_g17(config.epsilon),
        config.droplets.len()
    ));
    for d in &config.droplets {
        match &d.shape {
            Shape::Disk { radius } => {
                s.push_str(&format!(
                    "disk {} {} {}\n",
                    format_g17(d.center[0]),
                    format_g17(d.center[1]),
                    format_g17(*radius)
                ));
            }
            Shape::Polygon { vertices } => {
                s.push_str(&format!(
                    "poly {} {} {}",
                    format_g17(d.center[0]),
                    format_g17(d.center[1]),
                    vertices.len()
                ));
                for v in vertices {
                    s.push_str(&format!(" {} {}", format_g17(v[0]), format_g17(v[1])));
                }
                s.push('\n');
            }
        }
    }
    s
}

pub fn config_from_text(text: &str) -> Result<DropletConfig> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| OkError::Parse("empty config text".into()))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 5 {
        return Err(OkError::Parse(format!("bad header: {header}")));
    }
    let pf = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|e| OkError::Parse(format!("bad number {s}: {e}")))
    };
    let params = TorusParams::new(pf(head[0])?, pf(head[1])?, pf(head[2])?)?;
    let epsilon = pf(head[3])?;
    let count: usize = head[4]
        .parse()
        .map_err(|e| OkError::Parse(format!("bad count: {e}")))?;
    let mut droplets = Vec::with_capacity(count);
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.first() {
            Some(&"disk") if tok.len() == 4 => {
                droplets.push(Droplet::disk([pf(tok[1])?, pf(tok[2])?], pf(tok[3])?));
            }
            Some(&"poly") if tok.len() >= 4 => {
                let k: usize = tok[3]
                    .parse()
                    .map_err(|e| OkError::Parse(format!("bad vertex count: {e}")))?;
                if tok.len() != 4 + 2 * k {
                    return Err(OkError::Parse(format!("poly record length mismatch: {line}")));
                }
                let mut verts = Vec::with_capacity(k);
                for i in 0..k {
                    verts.push([pf(tok[4 + 2 * i])?, pf(tok[5 + 2 * i])?]);
                }
                droplets.push(Droplet::polygon([pf(tok[1])?, pf(tok[2])?], verts));
            }
            _ => return Err(OkError::Parse(format!("bad droplet record: {line}"))),
        }
    }
    if droplets.len() != count {
        return Err(OkError::Parse(format!(
            "expected {count} droplets, found {}",
            droplets.len()
        )));
    }
    DropletConfig::new(params, epsilon, droplets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{optimal_area, optimal_perimeter, optimal_radius};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> TorusParams {
        TorusParams::new(1.0, 2.0 / 3.0, 1.0).unwrap()
    }

    #[test]
    fn optimal_disk_hits_closed_form_stats() {
        let eps = 1e-6;
        let r = optimal_radius(eps);
        let config =
            DropletConfig::new(params(), eps, vec![Droplet::disk([0.5, 0.5], r)]).unwrap();
        let stats = rescaled_stats(&config).unwrap();
        assert_relative_eq!(stats.areas[0], optimal_area(), max_relative = 1e-12);
        assert_relative_eq!(stats.perimeters[0], optimal_perimeter(), max_relative = 1e-12);
    }

    #[test]
    fn square_polygon_stats_definition() {
        let eps = 1e-4;
        let s = 0.04;
        let half = s / 2.0;
        let verts = vec![[-half, -half], [half, -half], [half, half], [-half, half]];
        let config =
            DropletConfig::new(params(), eps, vec![Droplet::polygon([0.5, 0.5], verts)]).unwrap();
        let stats = rescaled_stats(&config).unwrap();
        assert_relative_eq!(stats.areas[0], area_scale(eps) * s * s, max_relative = 1e-13);
        assert_relative_eq!(
            stats.perimeters[0],
            perimeter_scale(eps) * 4.0 * s,
            max_relative = 1e-13
        );
    }

    #[test]
    fn random_convex_polygon_area_perimeter_oracle() {
        // Monte-Carlo point-in-polygon check of the shoelace area (at the
        // statistical tolerance MC can reach), and the perimeter defined by
        // summed edges.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let nv = rng.random_range(5..12);
            let mut angles: Vec<f64> = (0..nv)
                .map(|_| rng.random_range(0.0..(2.0 * std::f64::consts::PI)))
                .collect();
            angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let rad = 0.05;
            let verts: Vec<P2> = angles
                .iter()
                .map(|&t| [rad * t.cos(), rad * t.sin()])
                .collect();
            if geometry::polygon_signed_area(&verts) <= 0.0 {
                continue;
            }
            let area = geometry::polygon_signed_area(&verts);
            let n_mc = 2_000_000u64;
            let mut hits = 0u64;
            for _ in 0..n_mc {
                let p = [rng.random_range(-rad..rad), rng.random_range(-rad..rad)];
                if geometry::point_in_polygon(&verts, p) {
                    hits += 1;
                }
            }
            let box_area = (2.0 * rad) * (2.0 * rad);
            let mc = box_area * hits as f64 / n_mc as f64;
            let sigma = box_area * 0.5 / (n_mc as f64).sqrt();
            assert!((area - mc).abs() < 6.0 * sigma, "area {area} mc {mc}");
        }
    }

    #[test]
    fn measure_mass_identity_one_disk() {
        let eps = 1e-6;
        let r = optimal_radius(eps);
        let config =
            DropletConfig::new(params(), eps, vec![Droplet::disk([0.43, 0.61], r)]).unwrap();
        let mu = droplet_measure(&config, 256).unwrap();
        let expected = optimal_area() / abs_ln_eps(eps);
        assert_relative_eq!(mu.total_mass, expected, max_relative = 1e-3);
        // exact coverage makes it much tighter than the rasterization bound
        assert_relative_eq!(mu.total_mass, expected, max_relative = 1e-9);
    }

    #[test]
    fn measure_empty_and_additive() {
        let eps = 1e-5;
        let config = DropletConfig::new(params(), eps, vec![]).unwrap();
        let mu = droplet_measure(&config, 128).unwrap();
        assert_eq!(mu.total_mass, 0.0);

        let r = 0.02;
        let one = DropletConfig::new(params(), eps, vec![Droplet::disk([0.2, 0.2], r)]).unwrap();
        let other =
            DropletConfig::new(params(), eps, vec![Droplet::disk([0.7, 0.7], r)]).unwrap();
        let both = DropletConfig::new(
            params(),
            eps,
            vec![Droplet::disk([0.2, 0.2], r), Droplet::disk([0.7, 0.7], r)],
        )
        .unwrap();
        let m1 = droplet_measure(&one, 256).unwrap().total_mass;
        let m2 = droplet_measure(&other, 256).unwrap().total_mass;
        let m12 = droplet_measure(&both, 256).unwrap().total_mass;
        assert_relative_eq!(m12, m1 + m2, epsilon = 1e-12);
    }

    #[test]
    fn mass_identity_against_rescaled_stats() {
        // |(1/|ln eps|) sum A_i - total_mass| under the perimeter-resolution
        // bound for a mixed config
        let eps = 1e-5;
        let hexa: Vec<P2> = (0..6)
            .map(|i| {
                let t = std::f64::consts::PI / 3.0 * i as f64 + 0.2;
                [0.03 * t.cos(), 0.03 * t.sin()]
            })
            .collect();
        let config = DropletConfig::new(
            params(),
            eps,
            vec![
                Droplet::disk([0.25, 0.3], 0.02),
                Droplet::polygon([0.7, 0.65], hexa),
            ],
        )
        .unwrap();
        let n = 512;
        let mu = droplet_measure(&config, n).unwrap();
        let stats = rescaled_stats(&config).unwrap();
        let lhs = stats.total_area() / config.abs_ln_eps();
        let h = config.params.ell / n as f64;
        let phys_per: f64 = config.droplets.iter().map(|d| d.perimeter()).sum();
        let bound = 2.0 * measure_scale(eps) * phys_per * h;
        assert!(
            (lhs - mu.total_mass).abs() < bound,
            "gap {} vs bound {}",
            (lhs - mu.total_mass).abs(),
            bound
        );
    }

    #[test]
    fn disk_metrics_are_zero() {
        let config =
            DropletConfig::new(params(), 1e-4, vec![Droplet::disk([0.5, 0.5], 0.03)]).unwrap();
        let (alpha, deficit) = shape_metrics(&config, 0).unwrap();
        assert_eq!(alpha, 0.0);
        assert!(deficit.abs() < 1e-10);
    }

    #[test]
    fn rectangle_metrics_positive_and_match_grid_oracle() {
        // 2:1 rectangle; oracle = dense center grid + pixel-counted overlap
        let (w, h) = (0.04, 0.02);
        let verts = vec![
            [-w / 2.0, -h / 2.0],
            [w / 2.0, -h / 2.0],
            [w / 2.0, h / 2.0],
            [-w / 2.0, h / 2.0],
        ];
        let config =
            DropletConfig::new(params(), 1e-4, vec![Droplet::polygon([0.5, 0.5], verts.clone())])
                .unwrap();
        let (alpha, deficit) = shape_metrics(&config, 0).unwrap();
        assert!(alpha > 0.0 && deficit > 0.0);

        // oracle: scan ball centers on a grid, count pixels of symmetric diff
        let area = w * h;
        let r = (area / std::f64::consts::PI).sqrt();
        let mut best_ov = 0.0f64;
        let npix = 200;
        for ci in 0..21 {
            for cj in 0..21 {
                let c = [
                    (ci as f64 - 10.0) * w / 40.0,
                    (cj as f64 - 10.0) * h / 40.0,
                ];
                let mut hits = 0usize;
                // pixel grid over the rectangle bounding box union ball
                let span = w.max(2.0 * r) * 1.2;
                for pi in 0..npix {
                    for pj in 0..npix {
                        let p = [
                            (pi as f64 + 0.5) / npix as f64 * span - span / 2.0,
                            (pj as f64 + 0.5) / npix as f64 * span - span / 2.0,
                        ];
                        let in_rect =
                            p[0].abs() <= w / 2.0 && p[1].abs() <= h / 2.0;
                        let in_ball = geometry::norm(geometry::sub(p, c)) <= r;
                        if in_rect && in_ball {
                            hits += 1;
                        }
                    }
                }
                let pix = (span / npix as f64).powi(2);
                best_ov = best_ov.max(hits as f64 * pix);
            }
        }
        let alpha_oracle = 2.0 * (1.0 - best_ov / area);
        assert!(
            (alpha - alpha_oracle).abs() < 0.02,
            "alpha {alpha} oracle {alpha_oracle}"
        );
    }

    #[test]
    fn truncated_area_branches() {
        let cap = optimal_area() * 2.0; // gamma = 1/2
        assert_relative_eq!(truncated_area(1.0, 0.5).unwrap(), 1.0);
        // continuity at the branch point
        let at_cap = truncated_area(cap, 0.5).unwrap();
        assert_relative_eq!(at_cap, cap, max_relative = 1e-12);
        // square-root branch
        assert_relative_eq!(
            truncated_area(4.0 * cap, 0.5).unwrap(),
            2.0 * cap,
            max_relative = 1e-12
        );
        assert!(truncated_area(1.0, 1.5).is_err());
        assert!(truncated_area(-1.0, 0.5).is_err());
    }

    #[test]
    fn labeling_basic_and_seam() {
        let n = 16;
        let mut grid = vec![false; n * n];
        // 3x3 block
        for i in 2..5 {
            for j in 2..5 {
                grid[i * n + j] = true;
            }
        }
        let comps = label_components(&grid, n, 1.0);
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].cells, 9);
        assert!(!comps[0].wraps_x && !comps[0].wraps_y);
        let h = 1.0 / n as f64;
        assert_relative_eq!(comps[0].perimeter, 12.0 * h);

        // block straddling the right/left seam: one component, wrap flag set
        let mut grid = vec![false; n * n];
        for i in 6..9 {
            for j in [n - 1, 0, 1] {
                grid[i * n + j] = true;
            }
        }
        let comps = label_components(&grid, n, 1.0);
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].cells, 9);
        assert!(comps[0].wraps_y);
    }

    /// Independent flood-fill oracle for component counting.
    fn flood_fill_count(grid: &[bool], n: usize) -> usize {
        let mut seen = vec![false; n * n];
        let mut count = 0;
        for start in 0..n * n {
            if !grid[start] || seen[start] {
                continue;
            }
            count += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(idx) = stack.pop() {
                let (i, j) = (idx / n, idx % n);
                for (ni, nj) in [
                    ((i + 1) % n, j),
                    ((i + n - 1) % n, j),
                    (i, (j + 1) % n),
                    (i, (j + n - 1) % n),
                ] {
                    let nidx = ni * n + nj;
                    if grid[nidx] && !seen[nidx] {
                        seen[nidx] = true;
                        stack.push(nidx);
                    }
                }
            }
        }
        count
    }

    #[test]
    fn labeling_matches_flood_fill_on_random_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let n = 32;
            let mut grid = vec![false; n * n];
            for _ in 0..rng.random_range(3..12) {
                let ci = rng.random_range(0..n);
                let cj = rng.random_range(0..n);
                let r = rng.random_range(1..4) as i64;
                for di in -r..=r {
                    for dj in -r..=r {
                        if di * di + dj * dj <= r * r {
                            let i = (ci as i64 + di).rem_euclid(n as i64) as usize;
                            let j = (cj as i64 + dj).rem_euclid(n as i64) as usize;
                            grid[i * n + j] = true;
                        }
                    }
                }
            }
            let comps = label_components(&grid, n, 1.0);
            assert_eq!(comps.len(), flood_fill_count(&grid, n));
        }
    }

    #[test]
    fn config_text_roundtrip() {
        let eps = 1e-5;
        let tri = vec![[-0.02, -0.01], [0.02, -0.015], [0.0, 0.02]];
        let config = DropletConfig::new(
            params(),
            eps,
            vec![
                Droplet::disk([0.125, 0.875], 0.0123456789012345),
                Droplet::polygon([0.6, 0.4], tri),
            ],
        )
        .unwrap();
        let text = config_to_text(&config);
        let back = config_from_text(&text).unwrap();
        assert_eq!(back.droplets.len(), 2);
        assert_eq!(config.droplets, back.droplets);
        assert_eq!(config_to_text(&back), text);
    }

    #[test]
    fn invariants_rejected() {
        // overlap
        assert!(DropletConfig::new(
            params(),
            1e-4,
            vec![
                Droplet::disk([0.5, 0.5], 0.05),
                Droplet::disk([0.55, 0.5], 0.05)
            ]
        )
        .is_err());
        // too large
        assert!(
            DropletConfig::new(params(), 1e-4, vec![Droplet::disk([0.5, 0.5], 0.3)]).is_err()
        );
        // bad epsilon
        assert!(DropletConfig::new(params(), 0.5, vec![]).is_err());
        // bowtie polygon
        let bow = vec![[0.0, 0.0], [0.02, 0.02], [0.02, 0.0], [0.0, 0.02]];
        assert!(
            DropletConfig::new(params(), 1e-4, vec![Droplet::polygon([0.5, 0.5], bow)]).is_err()
        );
    }
}
