//! Scalar special functions and small numerical utilities.
//!
//! Modified Bessel functions are implemented from their power series for
//! small arguments and the standard asymptotic expansions for large ones;
//! both are cross-checked in tests against integral representations.

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Modified Bessel function of the second kind, order 0.
///
/// Three regimes: ascending series for z <= 4 (cancellation stays below
/// two digits there), Gauss quadrature of the cosh integral representation
/// in the middle, and the asymptotic expansion for z >= 16 where its
/// smallest term is below 1e-14.
pub fn bessel_k0(z: f64) -> f64 {
    assert!(z > 0.0, "bessel_k0 requires z > 0");
    if z > 4.0 && z < 16.0 {
        return k_nu_integral(0.0, z);
    }
    if z <= 4.0 {
        // K0 = -(ln(z/2) + gamma) I0(z) + sum_{j>=1} H_j (z^2/4)^j / (j!)^2
        let q = 0.25 * z * z;
        let mut term = 1.0; // (z^2/4)^j / (j!)^2 at j = 0
        let mut i0 = 1.0;
        let mut sum = 0.0;
        let mut h = 0.0;
        for j in 1..64 {
            term *= q / ((j * j) as f64);
            i0 += term;
            h += 1.0 / j as f64;
            sum += term * h;
            if term < 1e-18 * i0 {
                break;
            }
        }
        -((0.5 * z).ln() + EULER_GAMMA) * i0 + sum
    } else {
        // K0(z) ~ sqrt(pi/2z) e^{-z} [1 - 1/(8z) + 9/(2(8z)^2) - ...]
        let mut s = 1.0;
        let mut term = 1.0;
        let x8 = 8.0 * z;
        for k in 1..32 {
            let num = -(2.0 * k as f64 - 1.0) * (2.0 * k as f64 - 1.0);
            term *= num / (k as f64 * x8);
            if term.abs() < 1e-17 {
                break;
            }
            s += term;
        }
        (std::f64::consts::PI / (2.0 * z)).sqrt() * (-z).exp() * s
    }
}

/// K_nu(z) = ∫_0^∞ e^{-z cosh t} cosh(nu t) dt by Gauss-Legendre on the
/// effective support; used for moderate z where neither series converges
/// cleanly.
fn k_nu_integral(nu: f64, z: f64) -> f64 {
    let tmax = (1.0 + 42.0 / z).acosh();
    let (xs, ws) = gauss_legendre_on(64, 0.0, tmax);
    xs.iter()
        .zip(&ws)
        .map(|(&t, &w)| w * (-z * t.cosh()).exp() * (nu * t).cosh())
        .sum()
}

/// Modified Bessel function of the second kind, order 1.
pub fn bessel_k1(z: f64) -> f64 {
    assert!(z > 0.0, "bessel_k1 requires z > 0");
    if z > 4.0 && z < 16.0 {
        return k_nu_integral(1.0, z);
    }
    if z <= 4.0 {
        // K1 = 1/z + ln(z/2) I1(z) - (z/4) sum_k [psi(k+1)+psi(k+2)] (z^2/4)^k /(k!(k+1)!)
        let q = 0.25 * z * z;
        let i1 = bessel_i(1, z);
        let mut term = 1.0; // (z^2/4)^k / (k! (k+1)!) at k = 0
        let mut psi_a = -EULER_GAMMA; // psi(1)
        let mut psi_b = 1.0 - EULER_GAMMA; // psi(2)
        let mut sum = term * (psi_a + psi_b);
        for k in 1..64 {
            term *= q / ((k * (k + 1)) as f64);
            psi_a += 1.0 / k as f64;
            psi_b += 1.0 / (k + 1) as f64;
            let add = term * (psi_a + psi_b);
            sum += add;
            if add.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        1.0 / z + (0.5 * z).ln() * i1 - 0.25 * z * sum
    } else {
        // K1(z) ~ sqrt(pi/2z) e^{-z} [1 + 3/(8z) - 15/(2(8z)^2) + ...]
        let mut s = 1.0;
        let mut term = 1.0;
        let x8 = 8.0 * z;
        for k in 1..32 {
            let num = 4.0 - (2.0 * k as f64 - 1.0) * (2.0 * k as f64 - 1.0);
            term *= num / (k as f64 * x8);
            if term.abs() < 1e-17 {
                break;
            }
            s += term;
        }
        (std::f64::consts::PI / (2.0 * z)).sqrt() * (-z).exp() * s
    }
}

/// Modified Bessel function of the first kind, integer order n >= 0.
/// Power series; adequate for the moderate arguments used here.
pub fn bessel_i(n: usize, z: f64) -> f64 {
    let half = 0.5 * z;
    // t0 = (z/2)^n / n!
    let mut t = 1.0;
    for j in 1..=n {
        t *= half / j as f64;
    }
    let q = half * half;
    let mut sum = t;
    for j in 1..200 {
        t *= q / (j as f64 * (n + j) as f64);
        sum += t;
        if t.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// d/dz I_n(z) = (I_{n-1}(z) + I_{n+1}(z)) / 2, with I_{-1} = I_1.
pub fn bessel_i_prime(n: usize, z: f64) -> f64 {
    if n == 0 {
        bessel_i(1, z)
    } else {
        0.5 * (bessel_i(n - 1, z) + bessel_i(n + 1, z))
    }
}

/// The entire part K0(z) + ln(z): finite at z = 0 with value ln 2 - gamma.
pub fn bessel_k0_plus_ln(z: f64) -> f64 {
    assert!(z >= 0.0);
    if z == 0.0 {
        return 2f64.ln() - EULER_GAMMA;
    }
    if z <= 4.0 {
        // K0 + ln z = (ln 2 - gamma) I0 + (1 - I0) ln z ... computed stably via series:
        // K0 = -(ln(z/2)+gamma) I0 + S  =>  K0 + ln z = (ln2 - gamma) I0 + S + (1 - I0) ln z
        let q = 0.25 * z * z;
        let mut term = 1.0;
        let mut i0 = 1.0;
        let mut s = 0.0;
        let mut h = 0.0;
        for j in 1..64 {
            term *= q / ((j * j) as f64);
            i0 += term;
            h += 1.0 / j as f64;
            s += term * h;
            if term < 1e-18 * i0 {
                break;
            }
        }
        (2f64.ln() - EULER_GAMMA) * i0 + s + (1.0 - i0) * z.ln()
    } else {
        bessel_k0(z) + z.ln()
    }
}

/// Cubic smoothstep: 0 for t <= a, 1 for t >= b, 3u^2 - 2u^3 between.
#[inline]
pub fn smoothstep(a: f64, b: f64, t: f64) -> f64 {
    if t <= a {
        0.0
    } else if t >= b {
        1.0
    } else {
        let u = (t - a) / (b - a);
        u * u * (3.0 - 2.0 * u)
    }
}

/// Golden-section minimization followed by one parabolic-vertex polish.
/// The polish recovers the accuracy lost to flat-valley float comparisons
/// (raw golden section cannot localize a quadratic minimum better than
/// ~sqrt(machine eps)).
pub fn golden_section_refined<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
) -> f64 {
    let xm = golden_section(&mut f, a, b, tol.max(1e-10));
    let d = 1e-5 * xm.abs().max(1.0);
    let (fm, f0, fp) = (f(xm - d), f(xm), f(xm + d));
    let denom = fp - 2.0 * f0 + fm;
    if denom > 0.0 {
        let shift = 0.5 * d * (fm - fp) / denom;
        if shift.abs() < d {
            return xm + shift;
        }
    }
    xm
}

/// Golden-section minimization of a unimodal scalar function on [a, b].
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev initial guess
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        loop {
            // Legendre recurrence
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            let dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p0 / dp;
            if (z - z1).abs() < 1e-15 {
                let dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
                x[i] = -z;
                x[n - 1 - i] = z;
                let wi = 2.0 / ((1.0 - z * z) * dp * dp);
                w[i] = wi;
                w[n - 1 - i] = wi;
                break;
            }
        }
    }
    (x, w)
}

/// Gauss-Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        x.iter().map(|&t| mid + half * t).collect(),
        w.iter().map(|&wi| wi * half).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Independent oracle: K_nu(z) = int_0^infty e^{-z cosh t} cosh(nu t) dt.
    fn k_nu_quadrature(nu: f64, z: f64) -> f64 {
        // integrand decays like e^{-z e^t / 2}; t up to ~ ln(80/z) is plenty
        let tmax = (2.0 * (40.0 / z).max(4.0)).ln().max(8.0);
        let (xs, ws) = gauss_legendre_on(400, 0.0, tmax);
        xs.iter()
            .zip(&ws)
            .map(|(&t, &w)| w * (-z * t.cosh()).exp() * (nu * t).cosh())
            .sum()
    }

    #[test]
    fn k0_matches_integral_representation() {
        for &z in &[0.1, 0.5, 1.0, 2.0, 3.9, 5.0, 7.9, 10.9, 12.0, 30.0] {
            let exact = k_nu_quadrature(0.0, z);
            assert_relative_eq!(bessel_k0(z), exact, max_relative = 1e-10);
        }
    }

    #[test]
    fn k1_matches_integral_representation() {
        for &z in &[0.1, 0.5, 1.0, 2.0, 3.9, 5.0, 7.9, 10.9, 12.0, 30.0] {
            let exact = k_nu_quadrature(1.0, z);
            assert_relative_eq!(bessel_k1(z), exact, max_relative = 1e-10);
        }
    }

    #[test]
    fn k_branches_continuous() {
        // across each branch switch, the jump must be explained by the
        // derivative (K0' = -K1) up to 1e-11 relative
        for &z in &[4.0f64, 16.0] {
            let d = 1e-6;
            let step = bessel_k0(z - d) - bessel_k0(z + d);
            let expect = 2.0 * d * bessel_k1(z);
            assert_relative_eq!(step, expect, max_relative = 1e-4, epsilon = 1e-11 * bessel_k0(z));
        }
    }

    #[test]
    fn k0_reference_values() {
        assert_relative_eq!(bessel_k0(1.0), 0.421_024_438_240_708_3, max_relative = 1e-12);
        assert_relative_eq!(bessel_k1(1.0), 0.601_907_230_197_234_6, max_relative = 1e-12);
    }

    #[test]
    fn i_series_reference() {
        assert_relative_eq!(bessel_i(0, 1.0), 1.266_065_877_752_008_4, max_relative = 1e-13);
        assert_relative_eq!(bessel_i(4, 1.0), 2.737_120_221_046_866e-3, max_relative = 1e-12);
    }

    #[test]
    fn i_prime_is_derivative() {
        for &(n, z) in &[(0usize, 0.7), (3, 1.3), (8, 2.1)] {
            let h = 1e-6;
            let fd = (bessel_i(n, z + h) - bessel_i(n, z - h)) / (2.0 * h);
            assert_relative_eq!(bessel_i_prime(n, z), fd, max_relative = 1e-8);
        }
    }

    #[test]
    fn k0_plus_ln_is_entire_at_zero() {
        assert_relative_eq!(
            bessel_k0_plus_ln(0.0),
            2f64.ln() - 0.577_215_664_901_532_9,
            epsilon = 1e-15
        );
        // continuity against direct evaluation
        for &z in &[1e-8, 1e-4, 0.3, 2.0] {
            assert_relative_eq!(
                bessel_k0_plus_ln(z),
                bessel_k0(z) + z.ln(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre_on(8, 0.0, 2.0);
        // integral of x^7 on [0,2] = 2^8/8 = 32
        let s: f64 = x.iter().zip(&w).map(|(&t, &wi)| wi * t.powi(7)).sum();
        assert_relative_eq!(s, 32.0, max_relative = 1e-13);
    }

    #[test]
    fn golden_section_finds_min() {
        // raw golden section is noise-limited near sqrt(machine eps)
        let xm = golden_section(|x| (x - 1.7).powi(2) + 0.3, -5.0, 5.0, 1e-12);
        assert_relative_eq!(xm, 1.7, epsilon = 1e-7);
        // the parabolic polish recovers the extra digits
        let xr = golden_section_refined(|x| (x - 1.7).powi(2) + 0.3, -5.0, 5.0, 1e-10);
        assert_relative_eq!(xr, 1.7, epsilon = 1e-10);
    }
}
