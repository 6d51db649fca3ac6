//! FFT-based linear convolution and deterministic summation helpers.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Full linear convolution of `a` and `b` (length `a.len() + b.len() - 1`).
///
/// Both inputs are zero-padded to a power of two at least as long as the
/// full result, so no circular wrap-around occurs.
pub fn linear_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);

    let mut fa: Vec<Complex<f64>> = a.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fa.resize(n, Complex::new(0.0, 0.0));
    let mut fb: Vec<Complex<f64>> = b.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fb.resize(n, Complex::new(0.0, 0.0));
    forward.process(&mut fa);
    forward.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= *y;
    }
    inverse.process(&mut fa);
    let scale = 1.0 / n as f64;
    fa.truncate(out_len);
    fa.into_iter().map(|c| c.re * scale).collect()
}

/// Pairwise (tree) summation; the rounding pattern depends only on the length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Element-wise pairwise reduction of equally long term arrays.
pub fn pairwise_sum_arrays(terms: &[Vec<f64>]) -> Vec<f64> {
    match terms.len() {
        0 => Vec::new(),
        1 => terms[0].clone(),
        n => {
            let (l, r) = terms.split_at(n / 2);
            let mut left = pairwise_sum_arrays(l);
            let right = pairwise_sum_arrays(r);
            left.iter_mut().zip(&right).for_each(|(a, b)| *a += b);
            left
        }
    }
}
