//! Somas: turn retrieved evidence into label probabilities and spikes.

use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::code::BinaryVector;
use crate::error::{LomError, Result};
use crate::memory::{RetrievalResult, EVIDENCE_EPSILON};
use crate::rng::SpikeRng;

/// Subjective probability that each label bit is 1.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if let Some(i) = p.iter().position(|x| !(0.0..=1.0).contains(x)) {
            return Err(LomError::config(format!("probability {} at {i} outside [0, 1]", p[i])));
        }
        Ok(Self(p))
    }

    pub fn uniform(len: usize) -> Self {
        Self(vec![0.5; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Largest entry.
    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// True when every entry is exactly 0 or 1.
    pub fn is_degenerate(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0 || x == 1.0)
    }
}

impl Index<usize> for ProbabilityVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// `p_k = (d_k / c + 1) / 2`, clamped into [0, 1]; all 1/2 when `c` carries no evidence.
/// Evaluated as `(c + d_k) / 2c`, which rounds once, so exact counts give exact frequencies.
pub fn probability(result: &RetrievalResult) -> ProbabilityVector {
    if result.c <= EVIDENCE_EPSILON {
        return ProbabilityVector::uniform(result.d.len());
    }
    ProbabilityVector(
        result
            .d
            .iter()
            .map(|&d| ((result.c + d) / (2.0 * result.c)).clamp(0.0, 1.0))
            .collect(),
    )
}

/// Draws bit `k` as 1 with probability `p_k`. Consumes exactly one draw per bit.
pub fn spike(p: &ProbabilityVector, rng: &mut SpikeRng) -> BinaryVector {
    BinaryVector::from_bools(p.0.iter().map(|&pk| rng.bernoulli(pk) == 1))
        .expect("probability vector width fits a binary vector")
}

/// How a probability vector becomes a point estimate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decode {
    /// Independent Bernoulli draw per bit.
    #[default]
    Spike,
    /// `p > 1/2 -> 1`, `p < 1/2 -> 0`, ties drawn. Still consumes one draw per bit.
    MaxProbability,
}

pub fn decode(p: &ProbabilityVector, mode: Decode, rng: &mut SpikeRng) -> BinaryVector {
    match mode {
        Decode::Spike => spike(p, rng),
        Decode::MaxProbability => BinaryVector::from_bools(p.0.iter().map(|&pk| {
            let draw = rng.bernoulli(pk) == 1;
            if pk > 0.5 {
                true
            } else if pk < 0.5 {
                false
            } else {
                draw
            }
        }))
        .expect("probability vector width fits a binary vector"),
    }
}
