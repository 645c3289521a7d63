//! Radix-2 complex FFT and its multidimensional extension over row-major grids.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::error::{invalid, Result};

fn bit_reverse(buf: &mut [Complex64]) {
    let n = buf.len();
    let mut j = 0;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            buf.swap(i, j);
        }
    }
}

/// Twiddle table `exp(-2 pi i j / n)` for `j < n / 2`.
pub struct Plan {
    n: usize,
    twiddles: Vec<Complex64>,
}

impl Plan {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(invalid("FFT length must be a power of two"));
        }
        let twiddles = (0..n / 2)
            .map(|j| {
                let a = -core::f64::consts::TAU * j as f64 / n as f64;
                Complex64::new(libm::cos(a), libm::sin(a))
            })
            .collect();
        Ok(Self { n, twiddles })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In place: forward `X_j = sum_m x_m e^{-2 pi i j m / n}`; inverse uses the
    /// conjugate kernel and divides by `n`.
    pub fn run(&self, buf: &mut [Complex64], inverse: bool) {
        debug_assert_eq!(buf.len(), self.n);
        let n = self.n;
        bit_reverse(buf);
        let mut len = 2;
        while len <= n {
            let step = n / len;
            for start in (0..n).step_by(len) {
                for j in 0..len / 2 {
                    let mut w = self.twiddles[j * step];
                    if inverse {
                        w = w.conj();
                    }
                    let a = buf[start + j];
                    let b = buf[start + j + len / 2] * w;
                    buf[start + j] = a + b;
                    buf[start + j + len / 2] = a - b;
                }
            }
            len <<= 1;
        }
        if inverse {
            let s = 1.0 / n as f64;
            for v in buf.iter_mut() {
                *v *= s;
            }
        }
    }
}

/// One-dimensional transform of a power-of-two length buffer.
pub fn fft(buf: &mut [Complex64], inverse: bool) -> Result<()> {
    Plan::new(buf.len())?.run(buf, inverse);
    Ok(())
}

/// Direct `O(n^2)` DFT with the same conventions as [`fft`].
pub fn dft_naive(x: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let n = x.len();
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut out: Vec<Complex64> = (0..n)
        .map(|j| {
            x.iter()
                .enumerate()
                .map(|(m, v)| {
                    let a = sign * core::f64::consts::TAU * ((j * m) % n) as f64 / n as f64;
                    v * Complex64::new(libm::cos(a), libm::sin(a))
                })
                .sum()
        })
        .collect();
    if inverse {
        for v in out.iter_mut() {
            *v /= n as f64;
        }
    }
    out
}

/// Transform along every axis of a row-major grid with `dims` axes of length `m`.
pub fn fft_nd(data: &mut [Complex64], m: usize, dims: usize, inverse: bool) -> Result<()> {
    if data.len() != m.pow(dims as u32) {
        return Err(invalid("grid length does not match m^dims"));
    }
    let plan = Plan::new(m)?;
    let mut line = vec![Complex64::new(0.0, 0.0); m];
    for axis in 0..dims {
        let stride = m.pow((dims - 1 - axis) as u32);
        let block = stride * m;
        for outer in (0..data.len()).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (i, v) in line.iter_mut().enumerate() {
                    *v = data[base + i * stride];
                }
                plan.run(&mut line, inverse);
                for (i, v) in line.iter().enumerate() {
                    data[base + i * stride] = *v;
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    fn random(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = stream(seed, 0);
        (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn matches_naive_dft() {
        for n in [1, 2, 8, 64] {
            let x = random(n, n as u64);
            for inverse in [false, true] {
                let mut y = x.clone();
                fft(&mut y, inverse).unwrap();
                assert!(max_diff(&y, &dft_naive(&x, inverse)) < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(Plan::new(12).is_err());
        assert!(Plan::new(0).is_err());
    }

    #[test]
    fn nd_round_trip_and_axis_order() {
        let m = 8;
        let x = random(m * m * m, 3);
        let mut y = x.clone();
        fft_nd(&mut y, m, 3, false).unwrap();
        // Oracle: the 3-D DFT as a direct triple sum at a few frequencies.
        for &(a, b, c) in &[(0, 0, 0), (1, 2, 3), (7, 0, 5)] {
            let mut s = Complex64::new(0.0, 0.0);
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        let ph = -core::f64::consts::TAU * ((a * i + b * j + c * k) % m) as f64
                            / m as f64;
                        s += x[(i * m + j) * m + k] * Complex64::new(libm::cos(ph), libm::sin(ph));
                    }
                }
            }
            assert!((s - y[(a * m + b) * m + c]).norm() < 1e-10);
        }
        fft_nd(&mut y, m, 3, true).unwrap();
        assert!(max_diff(&x, &y) < 1e-12);
    }
}
