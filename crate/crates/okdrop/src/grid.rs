//! Periodic n x n scalar grids and spectral helpers built on rustfft.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{OkError, Result};

/// Real scalar field sampled at cell centers x_i = (i + 1/2) h of the
/// fundamental cell [0, ell)^2, row-major with index i * n + j for
/// x = (i + 1/2) h, y = (j + 1/2) h.
#[derive(Debug, Clone)]
pub struct Grid2 {
    pub n: usize,
    pub ell: f64,
    pub data: Vec<f64>,
}

impl Grid2 {
    pub fn zeros(n: usize, ell: f64) -> Self {
        Self { n, ell, data: vec![0.0; n * n] }
    }

    pub fn from_fn<F: FnMut(f64, f64) -> f64>(n: usize, ell: f64, mut f: F) -> Self {
        let h = ell / n as f64;
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            let x = (i as f64 + 0.5) * h;
            for j in 0..n {
                let y = (j as f64 + 0.5) * h;
                data.push(f(x, y));
            }
        }
        Self { n, ell, data }
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.ell / self.n as f64
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }

    /// Cell-center coordinate of row/column index.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h()
    }

    /// Trapezoid-free periodic quadrature: h^2 * sum of samples.
    pub fn integral(&self) -> f64 {
        let h2 = self.h() * self.h();
        h2 * self.data.iter().sum::<f64>()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / (self.n * self.n) as f64
    }

    pub fn min(&self) -> f64 {
        self.data.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Signed dual wavenumber for index m on an n-grid: k = 2 pi m' / ell
    /// with m' in [-n/2, n/2).
    #[inline]
    pub fn wavenumber(&self, m: usize) -> f64 {
        let n = self.n as i64;
        let mut mm = m as i64;
        if mm >= n / 2 {
            mm -= n;
        }
        2.0 * std::f64::consts::PI * mm as f64 / self.ell
    }
}

/// Forward 2-D FFT of real samples. Returns unnormalized coefficients
/// F[m] = sum_x f(x) e^{-i k_m . x_index}; divide by n^2 for Fourier-series
/// coefficients of the sampled function.
pub fn fft2_forward(g: &Grid2) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> = g.data.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft2_in_place(&mut buf, g.n, false);
    buf
}

/// Inverse 2-D FFT; input is consumed. Output scaled by 1/n^2 so that
/// ifft(fft(f)) = f.
pub fn fft2_inverse(mut buf: Vec<Complex<f64>>, n: usize) -> Vec<Complex<f64>> {
    fft2_in_place(&mut buf, n, true);
    let scale = 1.0 / (n * n) as f64;
    for v in &mut buf {
        *v *= scale;
    }
    buf
}

fn fft2_in_place(buf: &mut [Complex<f64>], n: usize, inverse: bool) {
    assert_eq!(buf.len(), n * n);
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    // rows
    for row in buf.chunks_exact_mut(n) {
        fft.process(row);
    }
    // columns via transpose
    let mut col = vec![Complex::new(0.0, 0.0); n];
    for j in 0..n {
        for i in 0..n {
            col[i] = buf[i * n + j];
        }
        fft.process(&mut col);
        for i in 0..n {
            buf[i * n + j] = col[i];
        }
    }
}

/// Check that n is a power of two not below `min`.
pub fn check_grid_n(n: usize, min: usize) -> Result<usize> {
    if n < min || !n.is_power_of_two() {
        return Err(OkError::Parameter(format!(
            "grid_n must be a power of two >= {min}, got {n}"
        )));
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fft_roundtrip() {
        let g = Grid2::from_fn(32, 2.0, |x, y| (x * 1.3).sin() + (y - 0.7).cos());
        let f = fft2_forward(&g);
        let back = fft2_inverse(f, 32);
        for (a, b) in g.data.iter().zip(&back) {
            assert_relative_eq!(*a, b.re, epsilon = 1e-12);
            assert!(b.im.abs() < 1e-12);
        }
    }

    #[test]
    fn fft_of_plane_wave_is_delta() {
        let n = 16;
        let ell = 1.0;
        let g = Grid2::from_fn(n, ell, |x, _| (2.0 * std::f64::consts::PI * 3.0 * x / ell).cos());
        let f = fft2_forward(&g);
        // cos splits into modes (3,0) and (n-3,0), each with coefficient n^2/2
        let c = f[3 * n] / (n * n) as f64;
        assert_relative_eq!(c.re, 0.5 * (2.0 * std::f64::consts::PI * 3.0 * 0.5 / n as f64).cos(), epsilon = 1e-10);
    }

    #[test]
    fn wavenumber_signs() {
        let g = Grid2::zeros(8, 2.0);
        assert_relative_eq!(g.wavenumber(0), 0.0);
        assert_relative_eq!(g.wavenumber(1), std::f64::consts::PI, epsilon = 1e-12);
        assert_relative_eq!(g.wavenumber(7), -std::f64::consts::PI, epsilon = 1e-12);
        assert_relative_eq!(g.wavenumber(4), -4.0 * std::f64::consts::PI, epsilon = 1e-12);
    }
}
