//! Multi-dimensional FFT and DST-I on x-fastest arrays, built on `rustfft`.

use crate::field::{C64, ZERO};
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Smallest `m >= n` whose prime factors are all in {2, 3, 5, 7}.
pub fn smooth_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5, 7] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Signed angular frequency of FFT bin `j` for `n` samples spaced `d`.
pub fn angular_frequency(j: usize, n: usize, d: f64) -> f64 {
    let s = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
    2.0 * std::f64::consts::PI * s / (n as f64 * d)
}

/// Apply `line_op` to every line along `axis` of an x-fastest array.
///
/// Lines are gathered slab by slab into a contiguous buffer so the 1D
/// transforms always see unit stride.
fn for_each_line(data: &mut [C64], dims: [usize; 3], axis: usize, mut block_op: impl FnMut(&mut [C64], usize)) {
    let [n0, n1, n2] = dims;
    match axis {
        0 => block_op(data, n0),
        1 => {
            let mut buf = vec![ZERO; n0 * n1];
            for k in 0..n2 {
                let slab = &mut data[k * n0 * n1..(k + 1) * n0 * n1];
                for j in 0..n1 {
                    for i in 0..n0 {
                        buf[i * n1 + j] = slab[j * n0 + i];
                    }
                }
                block_op(&mut buf, n1);
                for j in 0..n1 {
                    for i in 0..n0 {
                        slab[j * n0 + i] = buf[i * n1 + j];
                    }
                }
            }
        }
        _ => {
            let mut buf = vec![ZERO; n0 * n2];
            for j in 0..n1 {
                for k in 0..n2 {
                    let row = (k * n1 + j) * n0;
                    for i in 0..n0 {
                        buf[i * n2 + k] = data[row + i];
                    }
                }
                block_op(&mut buf, n2);
                for k in 0..n2 {
                    let row = (k * n1 + j) * n0;
                    for i in 0..n0 {
                        data[row + i] = buf[i * n2 + k];
                    }
                }
            }
        }
    }
}

/// Planned forward/inverse transforms for a fixed 3D shape (axes of length 1
/// are skipped, so 2D arrays use `[n0, n1, 1]`).
pub struct Fft3 {
    dims: [usize; 3],
    fwd: [Arc<dyn Fft<f64>>; 3],
    inv: [Arc<dyn Fft<f64>>; 3],
}

impl Fft3 {
    pub fn new(dims: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = dims.map(|n| planner.plan_fft_forward(n));
        let inv = dims.map(|n| planner.plan_fft_inverse(n));
        Self { dims, fwd, inv }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn run(&self, data: &mut [C64], plans: &[Arc<dyn Fft<f64>>; 3]) {
        assert_eq!(data.len(), self.len(), "FFT buffer size mismatch");
        for axis in 0..3 {
            if self.dims[axis] == 1 {
                continue;
            }
            let plan = &plans[axis];
            let mut scratch = vec![ZERO; plan.get_inplace_scratch_len()];
            for_each_line(data, self.dims, axis, |block, _| plan.process_with_scratch(block, &mut scratch));
        }
    }

    /// Unnormalised forward transform, `sum x_n exp(-i w n)`.
    pub fn forward(&self, data: &mut [C64]) {
        self.run(data, &self.fwd);
    }

    /// Inverse transform including the `1/N` normalisation.
    pub fn inverse(&self, data: &mut [C64]) {
        self.run(data, &self.inv);
        let s = 1.0 / self.len() as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }
}

/// Type-I discrete sine transform along every axis of a 3D array, computed
/// through an odd extension of length `2(n+1)`.
///
/// `S_k = sum_{j=1..n} x_j sin(pi j k / (n+1))`; applying it twice returns the
/// input scaled by `prod (n+1)/2`.
pub struct Dst3 {
    dims: [usize; 3],
    plans: [Arc<dyn Fft<f64>>; 3],
}

impl Dst3 {
    pub fn new(dims: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        let plans = dims.map(|n| planner.plan_fft_forward(2 * (n + 1)));
        Self { dims, plans }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn transform(&self, data: &mut [C64]) {
        assert_eq!(data.len(), self.dims.iter().product::<usize>(), "DST buffer size mismatch");
        for axis in 0..3 {
            let n = self.dims[axis];
            let plan = &self.plans[axis];
            let m = 2 * (n + 1);
            let mut ext = vec![ZERO; m];
            let mut scratch = vec![ZERO; plan.get_inplace_scratch_len()];
            let half_i = C64::new(0.0, 0.5);
            for_each_line(data, self.dims, axis, |block, len| {
                for line in block.chunks_exact_mut(len) {
                    ext[0] = ZERO;
                    ext[n + 1] = ZERO;
                    for j in 0..n {
                        ext[j + 1] = line[j];
                        ext[m - 1 - j] = -line[j];
                    }
                    plan.process_with_scratch(&mut ext, &mut scratch);
                    for k in 0..n {
                        line[k] = half_i * ext[k + 1];
                    }
                }
            });
        }
    }

    /// Scale factor so that `transform` followed by `transform` and a multiply
    /// by this value is the identity.
    pub fn inverse_scale(&self) -> f64 {
        self.dims.iter().map(|&n| 2.0 / (n + 1) as f64).product()
    }
}
