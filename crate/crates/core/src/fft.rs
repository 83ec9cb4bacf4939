//! Square 2D FFT by rows then columns.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct Fft2 {
    pub n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    /// Unnormalized; the inverse transform uses `e^{+2πi jk/n}`.
    pub fn apply(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        let f = if inverse { &self.inv } else { &self.fwd };
        f.process(data);
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = data[i * n + j];
            }
            f.process(&mut col);
            for i in 0..n {
                data[i * n + j] = col[i];
            }
        }
    }
}

/// Array position of the signed mode `k` on an `n`-point axis.
pub(crate) fn wrap(k: i32, n: usize) -> usize {
    k.rem_euclid(n as i32) as usize
}

/// Signed mode at array position `i`, in `(−n/2, n/2]`.
pub(crate) fn unwrap(i: usize, n: usize) -> i32 {
    if i > n / 2 {
        i as i32 - n as i32
    } else {
        i as i32
    }
}
