//! Planar geometry kernels: polygon measures, circle overlaps, and the
//! closed-form logarithmic potentials used by the interaction integrals.
//!
//! Everything here works in flat (non-periodic) coordinates; the torus
//! wrapping is handled by the callers, which guarantee that each shape
//! fits well inside a quarter cell.

pub type P2 = [f64; 2];

#[inline]
pub fn sub(a: P2, b: P2) -> P2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn cross(a: P2, b: P2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn dot(a: P2, b: P2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm(a: P2) -> f64 {
    a[0].hypot(a[1])
}

/// Signed area by the shoelace formula; positive for counter-clockwise.
pub fn polygon_signed_area(v: &[P2]) -> f64 {
    let n = v.len();
    let mut s = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        s += cross(v[i], v[j]);
    }
    0.5 * s
}

pub fn polygon_perimeter(v: &[P2]) -> f64 {
    let n = v.len();
    (0..n).map(|i| norm(sub(v[(i + 1) % n], v[i]))).sum()
}

/// Maximum vertex-to-vertex distance (attained at vertices for polygons).
pub fn polygon_diameter(v: &[P2]) -> f64 {
    let mut d = 0.0f64;
    for i in 0..v.len() {
        for j in (i + 1)..v.len() {
            d = d.max(norm(sub(v[i], v[j])));
        }
    }
    d
}

/// Area centroid.
pub fn polygon_centroid(v: &[P2]) -> P2 {
    let n = v.len();
    let mut a = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        let w = cross(v[i], v[j]);
        a += w;
        cx += (v[i][0] + v[j][0]) * w;
        cy += (v[i][1] + v[j][1]) * w;
    }
    a *= 0.5;
    [cx / (6.0 * a), cy / (6.0 * a)]
}

fn segments_properly_intersect(a: P2, b: P2, c: P2, d: P2) -> bool {
    let d1 = cross(sub(b, a), sub(c, a));
    let d2 = cross(sub(b, a), sub(d, a));
    let d3 = cross(sub(d, c), sub(a, c));
    let d4 = cross(sub(d, c), sub(b, c));
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

/// True when no two non-adjacent edges intersect.
pub fn polygon_is_simple(v: &[P2]) -> bool {
    let n = v.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        for j in (i + 1)..n {
            // skip adjacent edges (sharing a vertex)
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (c, d) = (v[j], v[(j + 1) % n]);
            if segments_properly_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// Even-odd crossing test.
pub fn point_in_polygon(v: &[P2], p: P2) -> bool {
    let n = v.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (vi, vj) = (v[i], v[j]);
        if ((vi[1] > p[1]) != (vj[1] > p[1]))
            && (p[0] < (vj[0] - vi[0]) * (p[1] - vi[1]) / (vj[1] - vi[1]) + vi[0])
        {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Distance from a point to a segment.
pub fn point_segment_distance(p: P2, a: P2, b: P2) -> f64 {
    let ab = sub(b, a);
    let t = (dot(sub(p, a), ab) / dot(ab, ab)).clamp(0.0, 1.0);
    norm(sub(p, [a[0] + t * ab[0], a[1] + t * ab[1]]))
}

/// Signed distance, positive inside the polygon.
pub fn polygon_signed_distance(v: &[P2], p: P2) -> f64 {
    let n = v.len();
    let mut d = f64::INFINITY;
    for i in 0..n {
        d = d.min(point_segment_distance(p, v[i], v[(i + 1) % n]));
    }
    if point_in_polygon(v, p) {
        d
    } else {
        -d
    }
}

/// Ear-clipping triangulation of a simple CCW polygon.
pub fn triangulate(v: &[P2]) -> Vec<[P2; 3]> {
    let n = v.len();
    assert!(n >= 3);
    let mut idx: Vec<usize> = (0..n).collect();
    let mut tris = Vec::with_capacity(n - 2);
    let mut guard = 0usize;
    while idx.len() > 3 {
        let m = idx.len();
        let mut clipped = false;
        for k in 0..m {
            let ia = idx[(k + m - 1) % m];
            let ib = idx[k];
            let ic = idx[(k + 1) % m];
            let (a, b, c) = (v[ia], v[ib], v[ic]);
            if cross(sub(b, a), sub(c, a)) <= 0.0 {
                continue; // reflex corner
            }
            let mut ear = true;
            for &other in &idx {
                if other == ia || other == ib || other == ic {
                    continue;
                }
                if point_in_triangle(v[other], a, b, c) {
                    ear = false;
                    break;
                }
            }
            if ear {
                tris.push([a, b, c]);
                idx.remove(k);
                clipped = true;
                break;
            }
        }
        guard += 1;
        if !clipped || guard > 4 * n {
            // fallback: fan from the first vertex (valid for convex remainders)
            for k in 1..idx.len() - 1 {
                tris.push([v[idx[0]], v[idx[k]], v[idx[k + 1]]]);
            }
            return tris;
        }
    }
    tris.push([v[idx[0]], v[idx[1]], v[idx[2]]]);
    tris
}

fn point_in_triangle(p: P2, a: P2, b: P2, c: P2) -> bool {
    let d1 = cross(sub(b, a), sub(p, a));
    let d2 = cross(sub(c, b), sub(p, b));
    let d3 = cross(sub(a, c), sub(p, c));
    (d1 >= 0.0 && d2 >= 0.0 && d3 >= 0.0) || (d1 <= 0.0 && d2 <= 0.0 && d3 <= 0.0)
}

// ── Circle overlaps ─────────────────────────────────────────────────────

/// Area of disk(center c, radius r) ∩ axis box [x0,x1] x [y0,y1].
pub fn circle_box_overlap(c: P2, r: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    // shift to circle frame
    let (x0, x1) = (x0 - c[0], x1 - c[0]);
    let (y0, y1) = (y0 - c[1], y1 - c[1]);
    let a = x0.max(-r);
    let b = x1.min(r);
    if a >= b {
        return 0.0;
    }
    // breakpoints where sqrt(r^2 - x^2) crosses y0 or y1
    let mut cuts = vec![a, b];
    for &y in &[y0.abs(), y1.abs()] {
        if y < r {
            let xb = (r * r - y * y).sqrt();
            for &s in &[-xb, xb] {
                if s > a && s < b {
                    cuts.push(s);
                }
            }
        }
    }
    cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let half_circle = |x: f64| 0.5 * (x * (r * r - x * x).max(0.0).sqrt() + r * r * (x / r).clamp(-1.0, 1.0).asin());
    let mut area = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi - lo < 1e-300 {
            continue;
        }
        let xm = 0.5 * (lo + hi);
        let s = (r * r - xm * xm).max(0.0).sqrt();
        let upper_is_circle = s < y1;
        let lower_is_circle = -s > y0;
        let upper = if upper_is_circle {
            half_circle(hi) - half_circle(lo)
        } else {
            y1 * (hi - lo)
        };
        let lower = if lower_is_circle {
            -(half_circle(hi) - half_circle(lo))
        } else {
            y0 * (hi - lo)
        };
        let piece = upper - lower;
        if piece > 0.0 {
            area += piece;
        }
    }
    area
}

/// Overlap area of two equal disks of radius `a` at center distance `t`.
pub fn equal_disk_overlap(a: f64, t: f64) -> f64 {
    if t >= 2.0 * a {
        return 0.0;
    }
    if t <= 0.0 {
        return std::f64::consts::PI * a * a;
    }
    2.0 * a * a * (t / (2.0 * a)).acos() - 0.5 * t * (4.0 * a * a - t * t).sqrt()
}

/// Area of intersection of a simple polygon with a disk.
pub fn polygon_circle_overlap(v: &[P2], c: P2, r: f64) -> f64 {
    let n = v.len();
    let mut area = 0.0;
    for i in 0..n {
        let p = sub(v[i], c);
        let q = sub(v[(i + 1) % n], c);
        area += circle_triangle_signed(p, q, r);
    }
    area.abs()
}

/// Signed area of disk(0, r) ∩ triangle (0, p, q), sign of cross(p, q).
fn circle_triangle_signed(p: P2, q: P2, r: f64) -> f64 {
    let d = sub(q, p);
    let aa = dot(d, d);
    if aa == 0.0 {
        return 0.0;
    }
    // |p + t d|^2 = r^2
    let bb = 2.0 * dot(p, d);
    let cc = dot(p, p) - r * r;
    let disc = bb * bb - 4.0 * aa * cc;
    let mut ts = vec![0.0];
    if disc > 0.0 {
        let sq = disc.sqrt();
        for t in [(-bb - sq) / (2.0 * aa), (-bb + sq) / (2.0 * aa)] {
            if t > 0.0 && t < 1.0 {
                ts.push(t);
            }
        }
    }
    ts.push(1.0);
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let point_at = |t: f64| -> P2 { [p[0] + t * d[0], p[1] + t * d[1]] };
    let mut area = 0.0;
    for w in ts.windows(2) {
        let a = point_at(w[0]);
        let b = point_at(w[1]);
        let mid = point_at(0.5 * (w[0] + w[1]));
        if dot(mid, mid) <= r * r {
            area += 0.5 * cross(a, b);
        } else {
            // circular sector between directions a and b
            let ang = (cross(a, b)).atan2(dot(a, b));
            area += 0.5 * r * r * ang;
        }
    }
    area
}

// ── Logarithmic potentials ──────────────────────────────────────────────

/// Newtonian log potential of a uniform disk: F(x) = ∫_{D_a(0)} ln|x-y| dy.
pub fn disk_log_potential(a: f64, rho: f64) -> f64 {
    let pi = std::f64::consts::PI;
    if rho >= a {
        pi * a * a * rho.ln()
    } else {
        pi * (0.5 * (rho * rho - a * a) + a * a * a.ln())
    }
}

/// F(x) = ∫_P ln|x-y| dy for a simple CCW polygon, via the divergence
/// theorem: ∫_P (2 ln|y-x| + 1) dy = ∮ (y-x)·n ln|y-x| ds.
pub fn polygon_log_potential(v: &[P2], x: P2) -> f64 {
    let n = v.len();
    let area = polygon_signed_area(v);
    let mut boundary = 0.0;
    for i in 0..n {
        let a = sub(v[i], x);
        let b = sub(v[(i + 1) % n], x);
        let d = sub(b, a);
        let len = norm(d);
        if len == 0.0 {
            continue;
        }
        let e = [d[0] / len, d[1] / len];
        // (y - x)·n is constant along the edge; n = (e_y, -e_x) is the
        // outward normal for a CCW polygon
        let nrm = [e[1], -e[0]];
        let perp = dot(a, nrm);
        let ua = dot(a, e);
        let ub = ua + len;
        boundary += perp * log_edge_integral(ua, ub, perp);
    }
    0.5 * (boundary - area)
}

/// ∫_{ua}^{ub} ln sqrt(rho^2 + u^2) du
fn log_edge_integral(ua: f64, ub: f64, rho: f64) -> f64 {
    let f = |u: f64| -> f64 {
        let r2 = rho * rho + u * u;
        let mut s = -u;
        if r2 > 0.0 {
            s += 0.5 * u * r2.ln();
        }
        if rho != 0.0 {
            s += rho * (u / rho).atan();
        }
        s
    };
    f(ub) - f(ua)
}

/// Closed form ∬_{D_a × D_a} ln|x-y| dx dy = pi^2 a^4 (ln a - 1/4).
pub fn disk_pair_log_integral(a: f64) -> f64 {
    let pi = std::f64::consts::PI;
    pi * pi * a.powi(4) * (a.ln() - 0.25)
}
