use crate::code::{BinaryVector, DendriticCode};

use super::mask::binomial;
use super::{Centering, LearningParams};

/// Weight rows held explicitly over all `2^m` code positions.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct DenseStore {
    pub(crate) input_bits: usize,
    pub(crate) label_bits: usize,
    /// `label_bits` rows of `2^m` weights, row-major.
    pub(crate) d: Vec<f64>,
    pub(crate) c: Vec<f64>,
    pub(crate) code_center: Vec<f64>,
    pub(crate) label_center: Vec<f64>,
}

impl DenseStore {
    pub(crate) fn new(input_bits: usize, label_bits: usize, params: &LearningParams) -> Self {
        let n = 1usize << input_bits;
        let (u, v) = match params.centering {
            Centering::Fixed { label, code } => (label, code),
            Centering::RunningMean { .. } => (0.5, 0.5),
        };
        Self {
            input_bits,
            label_bits,
            d: vec![0.0; label_bits * n],
            c: vec![0.0; n],
            code_center: vec![v; n],
            label_center: vec![u; label_bits],
        }
    }

    fn width(&self) -> usize {
        1 << self.input_bits
    }

    pub(crate) fn learn(&mut self, code: &DendriticCode, label: &BinaryVector, params: &LearningParams) {
        let n = self.width();
        let lambda = params.forgetting;
        let gain = params.gain;
        let label_terms: Vec<f64> = (0..self.label_bits)
            .map(|k| gain * (f64::from(label.get(k)) - self.label_center[k]))
            .collect();
        for j in 0..n {
            let x = f64::from(code.get(j)) - self.code_center[j];
            self.c[j] = lambda * self.c[j] + 0.5 * gain * x;
            for (k, a) in label_terms.iter().enumerate() {
                let w = &mut self.d[k * n + j];
                *w = lambda * *w + a * x;
            }
        }
        if let Centering::RunningMean { rate } = params.centering {
            for j in 0..n {
                self.code_center[j] += rate * (f64::from(code.get(j)) - self.code_center[j]);
            }
            for k in 0..self.label_bits {
                self.label_center[k] += rate * (f64::from(label.get(k)) - self.label_center[k]);
            }
        }
    }

    /// `d_k = sum_j D_kj w_j (code_j - center_j)`, `c = sum_j C_j w_j (code_j - center_j)`.
    fn accumulate(&self, code: &DendriticCode, weight: impl Fn(usize) -> f64) -> (Vec<f64>, f64) {
        let n = self.width();
        let mut d = vec![0.0; self.label_bits];
        let mut c = 0.0;
        for j in 0..n {
            let w = weight(j);
            if w == 0.0 {
                continue;
            }
            let y = w * (f64::from(code.get(j)) - self.code_center[j]);
            c += self.c[j] * y;
            for (k, dk) in d.iter_mut().enumerate() {
                *dk += self.d[k * n + j] * y;
            }
        }
        (d, c)
    }

    pub(crate) fn retrieve_masked(&self, code: &DendriticCode, ignored: u64) -> (Vec<f64>, f64) {
        self.accumulate(code, |j| if j as u64 & ignored == 0 { 1.0 } else { 0.0 })
    }

    /// Sum over all masks ignoring exactly `order` bits. Position `j` survives in
    /// `C(m - |subset(j)|, order)` of them.
    pub(crate) fn retrieve_tier(&self, code: &DendriticCode, order: usize) -> (Vec<f64>, f64) {
        let m = self.input_bits;
        let multiplicity: Vec<f64> = (0..=m).map(|size| binomial(m - size, order) as f64).collect();
        self.accumulate(code, |j| multiplicity[j.count_ones() as usize])
    }
}
