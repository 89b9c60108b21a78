//! Unnormalized n-dimensional FFTs over row-major complex arrays.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub(crate) struct FftNd {
    shape: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl FftNd {
    pub fn new(shape: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        FftNd {
            shape: shape.to_vec(),
            forward: shape.iter().map(|&n| planner.plan_fft_forward(n)).collect(),
            inverse: shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    /// `X[k] = sum_x x[s] exp(-i 2 pi k.s / n)`.
    pub fn forward(&self, data: &mut [C64]) {
        self.run(data, true)
    }

    /// `x[s] = sum_k X[k] exp(+i 2 pi k.s / n)`, no 1/n factor.
    pub fn inverse(&self, data: &mut [C64]) {
        self.run(data, false)
    }

    fn run(&self, data: &mut [C64], forward: bool) {
        assert_eq!(data.len(), self.len());
        let d = self.shape.len();
        let mut line = Vec::new();
        for axis in 0..d {
            let n = self.shape[axis];
            let stride: usize = self.shape[axis + 1..].iter().product();
            let outer: usize = self.shape[..axis].iter().product();
            let plan = if forward {
                &self.forward[axis]
            } else {
                &self.inverse[axis]
            };
            if stride == 1 {
                plan.process(data);
                continue;
            }
            line.resize(n, C64::new(0.0, 0.0));
            for o in 0..outer {
                for inner in 0..stride {
                    let base = o * n * stride + inner;
                    for (j, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + j * stride];
                    }
                    plan.process(&mut line);
                    for (j, v) in line.iter().enumerate() {
                        data[base + j * stride] = *v;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_dimensional_transform_matches_direct_sum() {
        let shape = [4usize, 6];
        let fft = FftNd::new(&shape);
        let data: Vec<C64> = (0..24)
            .map(|k| C64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos()))
            .collect();
        let mut out = data.clone();
        fft.forward(&mut out);
        for k0 in 0..4 {
            for k1 in 0..6 {
                let mut acc = C64::new(0.0, 0.0);
                for s0 in 0..4 {
                    for s1 in 0..6 {
                        let phase = -2.0
                            * std::f64::consts::PI
                            * (k0 as f64 * s0 as f64 / 4.0 + k1 as f64 * s1 as f64 / 6.0);
                        acc += data[s0 * 6 + s1] * C64::from_polar(1.0, phase);
                    }
                }
                assert!((acc - out[k0 * 6 + k1]).norm() < 1e-12);
            }
        }
        fft.inverse(&mut out);
        for (a, b) in out.iter().zip(&data) {
            assert!((a / 24.0 - b).norm() < 1e-14);
        }
    }
}
