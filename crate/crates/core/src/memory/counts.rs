//! Pattern-count realization of the synaptic weights.
//!
//! Every learned example adds `x_t = centered code of v_t` times a scalar to
//! each weight row. Because centered codes are orthogonal, the rows are fully
//! described by the per-pattern sums of those scalars, and a masked
//! retrieval reduces to `2^(m - |S| - 2)` times the sums over stored patterns
//! that agree with the query outside the masked set `S`.

use rustc_hash::FxHashMap;

use crate::code::BinaryVector;

use super::mask::{binomial, k_subsets};
use super::LearningParams;

/// Below this the lazy forgetting scale is folded into the stored weights.
const RESCALE_FLOOR: f64 = 1e-200;

#[derive(Clone, Debug)]
pub(crate) struct CountStore {
    pub(crate) input_bits: usize,
    pub(crate) label_bits: usize,
    pub(crate) label_center: f64,
    index: FxHashMap<u64, u32>,
    /// Patterns in first-learned order.
    pub(crate) patterns: Vec<u64>,
    /// `1 + label_bits` values per pattern: the accumulation weight, then one
    /// covariance weight per label bit. True values are these times `scale`.
    pub(crate) weights: Vec<f64>,
    pub(crate) scale: f64,
}

impl PartialEq for CountStore {
    fn eq(&self, other: &Self) -> bool {
        self.input_bits == other.input_bits
            && self.label_bits == other.label_bits
            && self.label_center == other.label_center
            && self.patterns == other.patterns
            && self.weights == other.weights
            && self.scale == other.scale
    }
}

impl CountStore {
    pub(crate) fn new(input_bits: usize, label_bits: usize, label_center: f64) -> Self {
        Self {
            input_bits,
            label_bits,
            label_center,
            index: FxHashMap::default(),
            patterns: Vec::new(),
            weights: Vec::new(),
            scale: 1.0,
        }
    }

    pub(crate) fn from_parts(
        input_bits: usize,
        label_bits: usize,
        label_center: f64,
        patterns: Vec<u64>,
        weights: Vec<f64>,
        scale: f64,
    ) -> Self {
        let index = patterns.iter().enumerate().map(|(i, &p)| (p, i as u32)).collect();
        Self {
            input_bits,
            label_bits,
            label_center,
            index,
            patterns,
            weights,
            scale,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.patterns.len()
    }

    fn stride(&self) -> usize {
        1 + self.label_bits
    }

    fn entry(&self, slot: u32) -> &[f64] {
        let s = self.stride();
        let at = slot as usize * s;
        &self.weights[at..at + s]
    }

    pub(crate) fn learn(&mut self, pattern: u64, label: &BinaryVector, params: &LearningParams) {
        if params.forgetting < 1.0 {
            self.scale *= params.forgetting;
            if self.scale < RESCALE_FLOOR {
                let s = self.scale;
                self.weights.iter_mut().for_each(|w| *w *= s);
                self.scale = 1.0;
            }
        }
        let stride = self.stride();
        let slot = match self.index.get(&pattern) {
            Some(&slot) => slot as usize,
            None => {
                let slot = self.patterns.len();
                self.index.insert(pattern, slot as u32);
                self.patterns.push(pattern);
                self.weights.extend(std::iter::repeat_n(0.0, stride));
                slot
            }
        };
        let inv = 1.0 / self.scale;
        let gain = params.gain;
        let e = &mut self.weights[slot * stride..(slot + 1) * stride];
        e[0] += 0.5 * gain * inv;
        for k in 0..self.label_bits {
            e[1 + k] += gain * (f64::from(label.get(k)) - self.label_center) * inv;
        }
    }

    /// True (scaled) per-pattern weights, without the code-norm factor.
    pub(crate) fn stored(&self, pattern: u64) -> Option<Vec<f64>> {
        self.index
            .get(&pattern)
            .map(|&slot| self.entry(slot).iter().map(|w| w * self.scale).collect())
    }

    fn norm_factor(&self, masked: usize) -> f64 {
        2f64.powi(self.input_bits as i32 - masked as i32 - 2) * self.scale
    }

    fn add_entry(&self, slot: u32, weight: f64, d: &mut [f64], c: &mut f64) {
        let e = self.entry(slot);
        *c += weight * e[0];
        for (dk, w) in d.iter_mut().zip(&e[1..]) {
            *dk += weight * w;
        }
    }

    pub(crate) fn retrieve_masked(&self, query: u64, ignored: u64) -> (Vec<f64>, f64) {
        let mut d = vec![0.0; self.label_bits];
        let mut c = 0.0;
        let masked = ignored.count_ones() as usize;
        let keep = !ignored;
        if masked < 63 && (1usize << masked) < self.len() {
            // Enumerate every pattern that agrees with the query outside the mask.
            let mut sub = 0u64;
            loop {
                if let Some(&slot) = self.index.get(&((query & keep) | sub)) {
                    self.add_entry(slot, 1.0, &mut d, &mut c);
                }
                if sub == ignored {
                    break;
                }
                sub = (sub.wrapping_sub(ignored)) & ignored;
            }
        } else {
            for (slot, &p) in self.patterns.iter().enumerate() {
                if (p ^ query) & keep == 0 {
                    self.add_entry(slot as u32, 1.0, &mut d, &mut c);
                }
            }
        }
        let f = self.norm_factor(masked);
        d.iter_mut().for_each(|x| *x *= f);
        (d, c * f)
    }

    /// Sum over all masks ignoring `order` bits. A stored pattern at Hamming
    /// distance `h <= order` from the query survives `C(m - h, order - h)` masks.
    pub(crate) fn retrieve_tier(&self, query: u64, order: usize) -> (Vec<f64>, f64) {
        let m = self.input_bits;
        let mut d = vec![0.0; self.label_bits];
        let mut c = 0.0;
        let neighbours: u64 = (0..=order).map(|h| binomial(m, h)).sum();
        if neighbours < self.len() as u64 {
            for h in 0..=order {
                let w = binomial(m - h, order - h) as f64;
                for flips in k_subsets(m, h) {
                    if let Some(&slot) = self.index.get(&(query ^ flips)) {
                        self.add_entry(slot, w, &mut d, &mut c);
                    }
                }
            }
        } else {
            for (slot, &p) in self.patterns.iter().enumerate() {
                let h = (p ^ query).count_ones() as usize;
                if h <= order {
                    let w = binomial(m - h, order - h) as f64;
                    self.add_entry(slot as u32, w, &mut d, &mut c);
                }
            }
        }
        let f = self.norm_factor(order);
        d.iter_mut().for_each(|x| *x *= f);
        (d, c * f)
    }
}
