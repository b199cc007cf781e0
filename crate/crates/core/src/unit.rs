//! Processing units: an encoder, a synaptic memory and `R` somas.

use serde::{Deserialize, Serialize};

use crate::code::BinaryVector;
use crate::error::{LomError, Result};
use crate::memory::{
    check_max_tier, Generalization, LearningParams, Representation, RetrievalResult, SynapticMemory, EVIDENCE_EPSILON,
};
use crate::rng::SpikeRng;
use crate::soma::{decode, probability, Decode, ProbabilityVector};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnPolicy {
    #[default]
    Always,
    /// Skip examples whose input already has exact-match evidence.
    IfUnseen,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnMode {
    /// Labels come from outside (SPU).
    #[default]
    Supervised,
    /// Labels are the unit's own point estimates (UPU).
    Unsupervised,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnitConfig {
    pub input_bits: usize,
    pub label_bits: usize,
    pub params: LearningParams,
    pub max_tier: usize,
    pub learn_policy: LearnPolicy,
    pub mode: LearnMode,
    pub generalization: Generalization,
    pub representation: Representation,
    /// Unique within a network; names the unit's spike stream.
    pub id: u64,
}

impl UnitConfig {
    pub fn new(input_bits: usize, label_bits: usize) -> Self {
        Self {
            input_bits,
            label_bits,
            params: LearningParams::default(),
            max_tier: 0,
            learn_policy: LearnPolicy::Always,
            mode: LearnMode::Supervised,
            generalization: Generalization::Tiered,
            representation: Representation::Counts,
            id: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnitOutput {
    pub p: ProbabilityVector,
    pub estimate: BinaryVector,
    pub tier_used: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProcessingUnit {
    config: UnitConfig,
    memory: SynapticMemory,
}

impl ProcessingUnit {
    pub fn new(config: UnitConfig) -> Result<Self> {
        check_max_tier(config.input_bits, config.max_tier)?;
        if let Generalization::Weighted { weights } = &config.generalization {
            if weights.is_empty() {
                return Err(LomError::config("weighted generalization needs weights"));
            }
            check_max_tier(config.input_bits, weights.len() - 1)?;
        }
        let memory = SynapticMemory::new(
            config.input_bits,
            config.label_bits,
            config.params,
            config.representation,
        )?;
        Ok(Self { config, memory })
    }

    pub(crate) fn from_parts(config: UnitConfig, memory: SynapticMemory) -> Self {
        Self { config, memory }
    }

    pub fn config(&self) -> &UnitConfig {
        &self.config
    }

    pub fn memory(&self) -> &SynapticMemory {
        &self.memory
    }

    pub fn id(&self) -> u64 {
        self.config.id
    }

    /// The unit's own spike stream under a global seed.
    pub fn stream(&self, seed: u64) -> SpikeRng {
        SpikeRng::new(seed, &format!("pu:{}", self.config.id))
    }

    /// Generalized retrieval and the resulting probabilities, without drawing.
    pub fn evaluate(&self, v: &BinaryVector) -> Result<(RetrievalResult, ProbabilityVector)> {
        let r = self
            .memory
            .retrieve_with(v, self.config.max_tier, &self.config.generalization)?;
        let p = probability(&r);
        Ok((r, p))
    }

    /// Retrieval followed by spiking.
    pub fn retrieve(&self, v: &BinaryVector, rng: &mut SpikeRng) -> Result<UnitOutput> {
        self.retrieve_decoded(v, Decode::Spike, rng)
    }

    pub fn retrieve_decoded(&self, v: &BinaryVector, mode: Decode, rng: &mut SpikeRng) -> Result<UnitOutput> {
        let (r, p) = self.evaluate(v)?;
        let estimate = decode(&p, mode, rng);
        Ok(UnitOutput {
            p,
            estimate,
            tier_used: r.tier_used,
        })
    }

    /// Whether `v` has exact-match (tier 0) evidence.
    pub fn has_seen(&self, v: &BinaryVector) -> Result<bool> {
        Ok(self.memory.retrieve_generalized_input(v, 0)?.c > EVIDENCE_EPSILON)
    }

    /// Mean over stored patterns of the summed binary entropy, in bits, of
    /// their exact-match probabilities. `None` for dense memories.
    pub fn label_entropy(&self) -> Option<f64> {
        let patterns = self.memory.stored_patterns()?;
        if patterns.is_empty() {
            return Some(0.0);
        }
        let h = |p: f64| {
            if p <= 0.0 || p >= 1.0 {
                0.0
            } else {
                -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
            }
        };
        let mut total = 0.0;
        for v in &patterns {
            let r = self.memory.retrieve_generalized_input(v, 0).ok()?;
            total += probability(&r).as_slice().iter().map(|&p| h(p)).sum::<f64>();
        }
        Some(total / patterns.len() as f64)
    }

    /// Learns `(v, r)` under the unit's policy. Returns whether the memory changed.
    pub fn learn_supervised(&mut self, v: &BinaryVector, r: &BinaryVector) -> Result<bool> {
        if r.len() != self.config.label_bits {
            return Err(LomError::dim("unit label", self.config.label_bits, r.len()));
        }
        if self.config.learn_policy == LearnPolicy::IfUnseen && self.has_seen(v)? {
            return Ok(false);
        }
        self.memory.learn_input(v, r)?;
        Ok(true)
    }

    /// Learns `v` with the unit's own spiked estimate as the label.
    /// Unlearned inputs get a fresh random label from the stream.
    pub fn learn_unsupervised(&mut self, v: &BinaryVector, rng: &mut SpikeRng) -> Result<UnitOutput> {
        let out = self.retrieve(v, rng)?;
        if self.config.learn_policy == LearnPolicy::IfUnseen && self.has_seen(v)? {
            return Ok(out);
        }
        self.memory.learn_input(v, &out.estimate)?;
        Ok(out)
    }

    /// Dispatches on the configured mode. Supervised units need `label`.
    pub fn learn(&mut self, v: &BinaryVector, label: Option<&BinaryVector>, rng: &mut SpikeRng) -> Result<bool> {
        match (self.config.mode, label) {
            (LearnMode::Supervised, Some(r)) => self.learn_supervised(v, r),
            (LearnMode::Supervised, None) => Err(LomError::config("supervised unit needs a label")),
            (LearnMode::Unsupervised, _) => {
                let before = self.memory.learn_count();
                self.learn_unsupervised(v, rng)?;
                Ok(self.memory.learn_count() != before)
            }
        }
    }
}
