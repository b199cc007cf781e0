//! Synaptic memory: covariance-rule weight rows `D`, accumulation-rule row
//! `C`, and masked retrieval with tiered generalization.
//!
//! Learning applies, for every label bit `k` and code position `j`,
//!
//! ```text
//! D_kj <- lambda * D_kj + gain * (u_k - <u>) * (code_j - <code>)
//! C_j  <- lambda * C_j  + gain / 2 * (code_j - <code>)
//! ```
//!
//! and retrieval under a 0/1 mask `M` returns
//! `d_k = sum_j D_kj M_jj (q_j - <q>)` and `c = sum_j C_j M_jj (q_j - <q>)`.
//! Supervised and unsupervised learning differ only in where the label comes from.

mod counts;
mod dense;
pub mod mask;

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::code::{BinaryVector, DendriticCode, Encoder};
use crate::error::{LomError, Result};

pub use mask::{check_max_tier, make_mask_tiers, InputMask, MaskTier};

pub(crate) use counts::CountStore;
pub(crate) use dense::DenseStore;

/// Evidence below this counts as "nothing retrieved".
pub const EVIDENCE_EPSILON: f64 = 1e-9;

/// Widest input the dense layout will allocate for.
pub const MAX_DENSE_INPUT_BITS: usize = 20;

/// How the presynaptic and postsynaptic averages are taken.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Centering {
    /// Constant averages.
    Fixed { label: f64, code: f64 },
    /// Exponential running means, starting at 1/2 and moving by `rate` per
    /// learned example. Dense layout only.
    RunningMean { rate: f64 },
}

impl Default for Centering {
    fn default() -> Self {
        Centering::Fixed { label: 0.5, code: 0.5 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearningParams {
    /// Forgetting factor `lambda`, in (0, 1].
    pub forgetting: f64,
    /// Proportionality constant `Lambda`, > 0.
    pub gain: f64,
    pub centering: Centering,
}

impl Default for LearningParams {
    fn default() -> Self {
        Self {
            forgetting: 1.0,
            gain: 1.0,
            centering: Centering::default(),
        }
    }
}

impl LearningParams {
    pub fn new(forgetting: f64, gain: f64) -> Result<Self> {
        let p = Self {
            forgetting,
            gain,
            ..Self::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.forgetting > 0.0 && self.forgetting <= 1.0) {
            return Err(LomError::config(format!(
                "forgetting factor must lie in (0, 1], got {}",
                self.forgetting
            )));
        }
        if !(self.gain > 0.0 && self.gain.is_finite()) {
            return Err(LomError::config(format!(
                "gain must be positive and finite, got {}",
                self.gain
            )));
        }
        match self.centering {
            Centering::Fixed { label, code } if label.is_finite() && code.is_finite() => Ok(()),
            Centering::RunningMean { rate } if rate > 0.0 && rate <= 1.0 => Ok(()),
            other => Err(LomError::config(format!("invalid centering {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    /// Explicit `2^m`-wide rows. Needed for non-1/2 code centering.
    Dense,
    /// Per-pattern weight sums; scales to wide inputs.
    #[default]
    Counts,
}

/// How per-tier retrievals are combined.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generalization {
    /// Use the first tier (fewest masked bits) with any evidence.
    #[default]
    Tiered,
    /// Weighted sum of all tiers up to `weights.len() - 1`.
    Weighted { weights: Vec<f64> },
}

impl Generalization {
    /// Weights `2^(-k(m+1))`, which keep any lower tier's evidence dominant.
    pub fn default_weights(input_bits: usize, max_tier: usize) -> Vec<f64> {
        (0..=max_tier)
            .map(|k| 2f64.powi(-((k * (input_bits + 1)) as i32)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RetrievalResult {
    pub d: Vec<f64>,
    pub c: f64,
    /// Number of masked bits in the tier that answered, if any did.
    pub tier_used: Option<usize>,
}

impl RetrievalResult {
    pub fn empty(label_bits: usize) -> Self {
        Self {
            d: vec![0.0; label_bits],
            c: 0.0,
            tier_used: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Store {
    Dense(DenseStore),
    Counts(CountStore),
}

/// One PU's synapses: `label_bits` covariance rows and one accumulation row.
#[derive(Clone, Debug, PartialEq)]
pub struct SynapticMemory {
    input_bits: usize,
    label_bits: usize,
    params: LearningParams,
    learn_count: u64,
    pub(crate) store: Store,
}

/// A query either as a materialized code or as its source input.
enum Query<'a> {
    Code(&'a DendriticCode),
    Input(BinaryVector),
}

impl Query<'_> {
    fn input(&self) -> BinaryVector {
        match self {
            Query::Code(c) => *c.source(),
            Query::Input(v) => *v,
        }
    }

    fn code(&self) -> Result<Cow<'_, DendriticCode>> {
        match self {
            Query::Code(c) => Ok(Cow::Borrowed(*c)),
            Query::Input(v) => Encoder {
                max_input_bits: MAX_DENSE_INPUT_BITS,
            }
            .encode(v)
            .map(Cow::Owned),
        }
    }
}

impl SynapticMemory {
    pub fn new(
        input_bits: usize,
        label_bits: usize,
        params: LearningParams,
        representation: Representation,
    ) -> Result<Self> {
        params.validate()?;
        if input_bits == 0 || label_bits == 0 || label_bits > crate::code::MAX_VECTOR_BITS {
            return Err(LomError::config(format!(
                "memory needs input and label widths in 1..=64, got {input_bits} and {label_bits}"
            )));
        }
        let store = match representation {
            Representation::Dense => {
                if input_bits > MAX_DENSE_INPUT_BITS {
                    return Err(LomError::Capacity {
                        what: "dense memory input width",
                        value: input_bits,
                        limit: MAX_DENSE_INPUT_BITS,
                    });
                }
                Store::Dense(DenseStore::new(input_bits, label_bits, &params))
            }
            Representation::Counts => {
                if input_bits > crate::code::MAX_VECTOR_BITS {
                    return Err(LomError::Capacity {
                        what: "count memory input width",
                        value: input_bits,
                        limit: crate::code::MAX_VECTOR_BITS,
                    });
                }
                let label_center = match params.centering {
                    Centering::Fixed { label, code: 0.5 } => label,
                    other => {
                        return Err(LomError::config(format!(
                            "count memory needs fixed code centering at 1/2, got {other:?}"
                        )))
                    }
                };
                Store::Counts(CountStore::new(input_bits, label_bits, label_center))
            }
        };
        Ok(Self {
            input_bits,
            label_bits,
            params,
            learn_count: 0,
            store,
        })
    }

    pub(crate) fn from_parts(
        input_bits: usize,
        label_bits: usize,
        params: LearningParams,
        learn_count: u64,
        store: Store,
    ) -> Self {
        Self {
            input_bits,
            label_bits,
            params,
            learn_count,
            store,
        }
    }

    pub fn input_bits(&self) -> usize {
        self.input_bits
    }

    pub fn label_bits(&self) -> usize {
        self.label_bits
    }

    pub fn params(&self) -> &LearningParams {
        &self.params
    }

    pub fn learn_count(&self) -> u64 {
        self.learn_count
    }

    pub fn representation(&self) -> Representation {
        match self.store {
            Store::Dense(_) => Representation::Dense,
            Store::Counts(_) => Representation::Counts,
        }
    }

    /// Distinct input patterns with nonzero weight. Only tracked by the count layout.
    pub fn stored_patterns(&self) -> Option<Vec<BinaryVector>> {
        match &self.store {
            Store::Dense(_) => None,
            Store::Counts(s) => Some(
                s.patterns
                    .iter()
                    .map(|&p| BinaryVector::from_packed(p, self.input_bits).expect("stored pattern width"))
                    .collect(),
            ),
        }
    }

    fn check_input(&self, v: &BinaryVector) -> Result<()> {
        if v.len() != self.input_bits {
            return Err(LomError::dim("memory input", self.input_bits, v.len()));
        }
        Ok(())
    }

    fn check_label(&self, label: &BinaryVector) -> Result<()> {
        if label.len() != self.label_bits {
            return Err(LomError::dim("memory label", self.label_bits, label.len()));
        }
        Ok(())
    }

    fn check_mask(&self, mask: &InputMask) -> Result<()> {
        if mask.input_bits() != self.input_bits {
            return Err(LomError::dim("mask", self.input_bits, mask.input_bits()));
        }
        Ok(())
    }

    fn learn_query(&mut self, q: Query<'_>, label: &BinaryVector) -> Result<()> {
        self.check_input(&q.input())?;
        self.check_label(label)?;
        match &mut self.store {
            Store::Dense(s) => {
                let code = q.code()?;
                s.learn(&code, label, &self.params);
            }
            Store::Counts(s) => s.learn(q.input().packed(), label, &self.params),
        }
        self.learn_count += 1;
        Ok(())
    }

    /// Covariance update of `D` and accumulation update of `C` for one example.
    pub fn learn(&mut self, code: &DendriticCode, label: &BinaryVector) -> Result<()> {
        self.learn_query(Query::Code(code), label)
    }

    /// As [`learn`](Self::learn), encoding `input` only if the layout needs the code.
    pub fn learn_input(&mut self, input: &BinaryVector, label: &BinaryVector) -> Result<()> {
        self.learn_query(Query::Input(*input), label)
    }

    fn raw_query(&self, q: Query<'_>, mask: &InputMask) -> Result<(Vec<f64>, f64)> {
        self.check_input(&q.input())?;
        self.check_mask(mask)?;
        Ok(match &self.store {
            Store::Dense(s) => s.retrieve_masked(&*q.code()?, mask.ignored_bits()),
            Store::Counts(s) => s.retrieve_masked(q.input().packed(), mask.ignored_bits()),
        })
    }

    /// `(d, c)` under a single mask.
    pub fn retrieve_raw(&self, code: &DendriticCode, mask: &InputMask) -> Result<(Vec<f64>, f64)> {
        self.raw_query(Query::Code(code), mask)
    }

    pub fn retrieve_raw_input(&self, input: &BinaryVector, mask: &InputMask) -> Result<(Vec<f64>, f64)> {
        self.raw_query(Query::Input(*input), mask)
    }

    fn tier_query(&self, q: &Query<'_>, order: usize) -> Result<(Vec<f64>, f64)> {
        Ok(match &self.store {
            Store::Dense(s) => s.retrieve_tier(&*q.code()?, order),
            Store::Counts(s) => s.retrieve_tier(q.input().packed(), order),
        })
    }

    /// `(d, c)` summed over every mask ignoring exactly `order` input bits.
    pub fn retrieve_tier(&self, code: &DendriticCode, order: usize) -> Result<(Vec<f64>, f64)> {
        self.check_input(code.source())?;
        check_max_tier(self.input_bits, order)?;
        self.tier_query(&Query::Code(code), order)
    }

    fn generalized_query(&self, q: Query<'_>, max_tier: usize) -> Result<RetrievalResult> {
        self.check_input(&q.input())?;
        check_max_tier(self.input_bits, max_tier)?;
        for order in 0..=max_tier {
            let (d, c) = self.tier_query(&q, order)?;
            if c > EVIDENCE_EPSILON {
                return Ok(RetrievalResult {
                    d,
                    c,
                    tier_used: Some(order),
                });
            }
        }
        Ok(RetrievalResult::empty(self.label_bits))
    }

    /// Answers from the lowest tier `0..=max_tier` that holds any evidence.
    pub fn retrieve_generalized(&self, code: &DendriticCode, max_tier: usize) -> Result<RetrievalResult> {
        self.generalized_query(Query::Code(code), max_tier)
    }

    pub fn retrieve_generalized_input(&self, input: &BinaryVector, max_tier: usize) -> Result<RetrievalResult> {
        self.generalized_query(Query::Input(*input), max_tier)
    }

    fn weighted_query(&self, q: Query<'_>, weights: &[f64]) -> Result<RetrievalResult> {
        self.check_input(&q.input())?;
        if weights.is_empty() {
            return Err(LomError::config("weighted generalization needs at least one weight"));
        }
        check_max_tier(self.input_bits, weights.len() - 1)?;
        let mut out = RetrievalResult::empty(self.label_bits);
        for (order, &w) in weights.iter().enumerate() {
            let (d, c) = self.tier_query(&q, order)?;
            if out.tier_used.is_none() && c > EVIDENCE_EPSILON {
                out.tier_used = Some(order);
            }
            out.c += w * c;
            for (acc, x) in out.d.iter_mut().zip(d) {
                *acc += w * x;
            }
        }
        Ok(out)
    }

    /// `sum_k w_k (d^(k), c^(k))` over tiers `0..weights.len()`.
    pub fn retrieve_weighted(&self, code: &DendriticCode, weights: &[f64]) -> Result<RetrievalResult> {
        self.weighted_query(Query::Code(code), weights)
    }

    pub fn retrieve_weighted_input(&self, input: &BinaryVector, weights: &[f64]) -> Result<RetrievalResult> {
        self.weighted_query(Query::Input(*input), weights)
    }

    /// Retrieval by the configured combination rule.
    pub fn retrieve_with(
        &self,
        input: &BinaryVector,
        max_tier: usize,
        generalization: &Generalization,
    ) -> Result<RetrievalResult> {
        match generalization {
            Generalization::Tiered => self.retrieve_generalized_input(input, max_tier),
            Generalization::Weighted { weights } => self.retrieve_weighted_input(input, weights),
        }
    }

    /// Per-pattern `(c, d)` weights of a stored pattern, excluding the `2^(m-2)`
    /// code-norm factor. Count layout only.
    pub fn pattern_weights(&self, input: &BinaryVector) -> Option<(f64, Vec<f64>)> {
        match &self.store {
            Store::Counts(s) => s.stored(input.packed()).map(|w| (w[0], w[1..].to_vec())),
            Store::Dense(_) => None,
        }
    }
}
