//! Radix-2 FFT.
//!
//! Power-of-two lengths go through the iterative Cooley–Tukey kernel directly.
//! Other lengths are handled exactly with Bluestein's chirp-z reformulation,
//! which itself runs on power-of-two transforms.

use std::f64::consts::PI;

use num_complex::Complex64;

/// In-place forward transform, `X[j] = Σ x[t]·e^{−2πi·jt/N}`. `buf.len()` must be a power of two.
pub fn fft_pow2(buf: &mut [Complex64]) {
    transform_pow2(buf, false);
}

fn transform_pow2(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "radix-2 FFT needs a power-of-two length, got {n}");
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if i < j {
            buf.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        // twiddles from the exact angle rather than by repeated multiplication
        let twiddles: Vec<Complex64> = (0..half)
            .map(|k| Complex64::from_polar(1.0, sign * 2.0 * PI * k as f64 / len as f64))
            .collect();
        for chunk in buf.chunks_exact_mut(len) {
            let (lo, hi) = chunk.split_at_mut(half);
            for ((a, b), w) in lo.iter_mut().zip(hi.iter_mut()).zip(&twiddles) {
                let t = *b * w;
                *b = *a - t;
                *a += t;
            }
        }
        len <<= 1;
    }
}

/// Full complex spectrum of a real signal of any length.
pub fn dft_real(input: &[f64]) -> Vec<Complex64> {
    let n = input.len();
    if n.is_power_of_two() || n == 0 {
        let mut buf: Vec<Complex64> = input.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        fft_pow2(&mut buf);
        return buf;
    }
    bluestein(input)
}

fn bluestein(input: &[f64]) -> Vec<Complex64> {
    let n = input.len();
    let m = (2 * n - 1).next_power_of_two();
    // chirp[k] = e^{−iπk²/N}; k² is reduced mod 2N to keep the angle small
    let two_n = 2 * n as u128;
    let chirp: Vec<Complex64> = (0..n)
        .map(|k| {
            let k2 = (k as u128 * k as u128) % two_n;
            Complex64::from_polar(1.0, -PI * k2 as f64 / n as f64)
        })
        .collect();

    let mut a = vec![Complex64::new(0.0, 0.0); m];
    for ((slot, &x), c) in a.iter_mut().zip(input).zip(&chirp) {
        *slot = c * x;
    }
    let mut b = vec![Complex64::new(0.0, 0.0); m];
    b[0] = chirp[0].conj();
    for k in 1..n {
        b[k] = chirp[k].conj();
        b[m - k] = chirp[k].conj();
    }
    transform_pow2(&mut a, false);
    transform_pow2(&mut b, false);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    transform_pow2(&mut a, true);
    let scale = 1.0 / m as f64;
    (0..n).map(|k| a[k] * scale * chirp[k]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct(x: &[f64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|j| {
                x.iter()
                    .enumerate()
                    .map(|(t, &v)| Complex64::from_polar(v, -2.0 * PI * (j * t % n) as f64 / n as f64))
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matches_direct_sum() {
        for n in [1usize, 2, 3, 5, 8, 12, 17, 64, 100] {
            let x: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
            let fast = dft_real(&x);
            let slow = direct(&x);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).norm() < 1e-9, "n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn impulse_is_flat() {
        let mut x = vec![0.0; 16];
        x[0] = 1.0;
        assert!(dft_real(&x).iter().all(|c| (c - Complex64::new(1.0, 0.0)).norm() < 1e-15));
    }
}
