//! Two hidden layers of supervised units on a fixed grid, plus a voting output.
//!
//! The first layer is a `rows x cols` grid of units, each watching one image
//! window. The second layer tiles that grid with non-overlapping
//! `block x block` squares; each of its units reads the concatenated point
//! estimates of one square. The output stage sums the second layer's
//! probability vectors that are confident enough and takes the argmax.

use serde::{Deserialize, Serialize};

use crate::code::{BinaryVector, MAX_VECTOR_BITS};
use crate::error::{LomError, Result};
use crate::memory::{Generalization, LearningParams, Representation};
use crate::mnist::{digit_to_4bit, digit_to_onehot};
use crate::rng::{stream_id, SpikeRng};
use crate::soma::{decode, Decode, ProbabilityVector};
use crate::unit::{LearnMode, LearnPolicy, ProcessingUnit, UnitConfig};

/// Learning and retrieval settings shared by every unit of a layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayerSettings {
    pub params: LearningParams,
    pub max_tier: usize,
    pub policy: LearnPolicy,
    pub generalization: Generalization,
}

impl Default for LayerSettings {
    fn default() -> Self {
        Self {
            params: LearningParams::default(),
            max_tier: 0,
            policy: LearnPolicy::Always,
            generalization: Generalization::Tiered,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopologyConfig {
    pub grid_rows: usize,
    pub grid_cols: usize,
    /// Side of the square of first-layer units feeding one second-layer unit.
    pub block: usize,
    /// Input width of a first-layer unit.
    pub window_bits: usize,
    /// Label width of a first-layer unit.
    pub hidden_label_bits: usize,
    pub classes: usize,
    pub hidden: LayerSettings,
    pub output: LayerSettings,
    /// A second-layer vector votes when its largest entry exceeds this.
    pub vote_threshold: f64,
    pub representation: Representation,
    /// Decoding of first-layer estimates that train the second layer.
    pub train_decode: Decode,
    /// Decoding of first-layer estimates during evaluation.
    pub eval_decode: Decode,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            grid_rows: 22,
            grid_cols: 22,
            block: 2,
            window_bits: 16,
            hidden_label_bits: 4,
            classes: 10,
            hidden: LayerSettings {
                policy: LearnPolicy::IfUnseen,
                max_tier: 2,
                ..LayerSettings::default()
            },
            output: LayerSettings {
                policy: LearnPolicy::Always,
                max_tier: 2,
                ..LayerSettings::default()
            },
            vote_threshold: 0.85,
            representation: Representation::Counts,
            train_decode: Decode::MaxProbability,
            eval_decode: Decode::Spike,
        }
    }
}

impl TopologyConfig {
    pub fn output_rows(&self) -> usize {
        self.grid_rows / self.block
    }

    pub fn output_cols(&self) -> usize {
        self.grid_cols / self.block
    }

    pub fn hidden_units(&self) -> usize {
        self.grid_rows * self.grid_cols
    }

    pub fn output_units(&self) -> usize {
        self.output_rows() * self.output_cols()
    }

    /// Input width of a second-layer unit.
    pub fn output_input_bits(&self) -> usize {
        self.block * self.block * self.hidden_label_bits
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_rows == 0 || self.grid_cols == 0 || self.block == 0 {
            return Err(LomError::config("grid and block sizes must be positive"));
        }
        if !self.grid_rows.is_multiple_of(self.block) || !self.grid_cols.is_multiple_of(self.block) {
            return Err(LomError::config(format!(
                "a {}x{} grid cannot be tiled by {}x{} blocks",
                self.grid_rows, self.grid_cols, self.block, self.block
            )));
        }
        if self.output_input_bits() > MAX_VECTOR_BITS {
            return Err(LomError::Capacity {
                what: "second-layer input width",
                value: self.output_input_bits(),
                limit: MAX_VECTOR_BITS,
            });
        }
        if self.classes == 0 || self.classes > MAX_VECTOR_BITS {
            return Err(LomError::config(format!("unsupported class count {}", self.classes)));
        }
        if self.hidden_label_bits == 0 || (1usize << self.hidden_label_bits) < self.classes {
            return Err(LomError::config(format!(
                "{} hidden label bits cannot name {} classes",
                self.hidden_label_bits, self.classes
            )));
        }
        if !(0.0..=1.0).contains(&self.vote_threshold) {
            return Err(LomError::config(format!(
                "vote threshold {} outside [0, 1]",
                self.vote_threshold
            )));
        }
        Ok(())
    }
}

/// Which part of the protocol a draw belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    Train,
    Eval,
}

/// Locates the draws one example uses: every unit reads its own stream for
/// `(seed, phase)` at position `example * label_bits`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DrawKey {
    pub seed: u64,
    pub phase: Phase,
    pub example: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardPass {
    pub hidden: Vec<BinaryVector>,
    pub hidden_tiers: Vec<Option<usize>>,
    pub output: Vec<ProbabilityVector>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub digit: usize,
    pub vote_sum: Vec<f64>,
    /// Vectors that passed the threshold; 0 means every vector was summed.
    pub voters: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    config: TopologyConfig,
    hidden: Vec<ProcessingUnit>,
    output: Vec<ProcessingUnit>,
    train_streams: Vec<u64>,
    eval_streams: Vec<u64>,
}

fn unit_config(
    id: u64,
    input_bits: usize,
    label_bits: usize,
    layer: &LayerSettings,
    representation: Representation,
) -> UnitConfig {
    UnitConfig {
        input_bits,
        label_bits,
        params: layer.params,
        max_tier: layer.max_tier,
        learn_policy: layer.policy,
        mode: LearnMode::Supervised,
        generalization: layer.generalization.clone(),
        representation,
        id,
    }
}

fn phase_streams(units: usize, phase: &str) -> Vec<u64> {
    (0..units).map(|id| stream_id(&format!("pu:{id}:{phase}"))).collect()
}

impl Network {
    /// Units are numbered row-major, first layer before second.
    pub fn build(config: TopologyConfig) -> Result<Self> {
        config.validate()?;
        let n_hidden = config.hidden_units();
        let hidden = (0..n_hidden)
            .map(|i| {
                ProcessingUnit::new(unit_config(
                    i as u64,
                    config.window_bits,
                    config.hidden_label_bits,
                    &config.hidden,
                    config.representation,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let output = (0..config.output_units())
            .map(|i| {
                ProcessingUnit::new(unit_config(
                    (n_hidden + i) as u64,
                    config.output_input_bits(),
                    config.classes,
                    &config.output,
                    config.representation,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::assemble(config, hidden, output))
    }

    pub(crate) fn assemble(config: TopologyConfig, hidden: Vec<ProcessingUnit>, output: Vec<ProcessingUnit>) -> Self {
        let total = hidden.len() + output.len();
        Self {
            config,
            hidden,
            output,
            train_streams: phase_streams(total, "train"),
            eval_streams: phase_streams(total, "eval"),
        }
    }

    pub fn config(&self) -> &TopologyConfig {
        &self.config
    }

    pub fn hidden_units(&self) -> &[ProcessingUnit] {
        &self.hidden
    }

    pub fn output_units(&self) -> &[ProcessingUnit] {
        &self.output
    }

    pub fn set_vote_threshold(&mut self, threshold: f64) -> Result<()> {
        let mut cfg = self.config.clone();
        cfg.vote_threshold = threshold;
        cfg.validate()?;
        self.config = cfg;
        Ok(())
    }

    /// First-layer indices read by second-layer unit `index`, in concatenation order.
    pub fn receptive_field(&self, index: usize) -> Vec<usize> {
        let b = self.config.block;
        let (r, c) = (index / self.config.output_cols(), index % self.config.output_cols());
        let mut out = Vec::with_capacity(b * b);
        for i in 0..b {
            for j in 0..b {
                out.push((r * b + i) * self.config.grid_cols + c * b + j);
            }
        }
        out
    }

    fn rng_for(&self, unit: usize, label_bits: usize, key: DrawKey) -> SpikeRng {
        let streams = match key.phase {
            Phase::Train => &self.train_streams,
            Phase::Eval => &self.eval_streams,
        };
        let mut rng = SpikeRng::with_stream(key.seed, streams[unit]);
        rng.seek(key.example * label_bits as u64);
        rng
    }

    fn check_windows(&self, windows: &[BinaryVector]) -> Result<()> {
        if windows.len() != self.hidden.len() {
            return Err(LomError::dim("window count", self.hidden.len(), windows.len()));
        }
        if let Some(w) = windows.iter().find(|w| w.len() != self.config.window_bits) {
            return Err(LomError::dim("window width", self.config.window_bits, w.len()));
        }
        Ok(())
    }

    fn hidden_estimates(
        &self,
        windows: &[BinaryVector],
        key: DrawKey,
    ) -> Result<(Vec<BinaryVector>, Vec<Option<usize>>)> {
        let mode = match key.phase {
            Phase::Train => self.config.train_decode,
            Phase::Eval => self.config.eval_decode,
        };
        let r = self.config.hidden_label_bits;
        let mut estimates = Vec::with_capacity(self.hidden.len());
        let mut tiers = Vec::with_capacity(self.hidden.len());
        for (i, (unit, w)) in self.hidden.iter().zip(windows).enumerate() {
            let (res, p) = unit.evaluate(w)?;
            let mut rng = self.rng_for(i, r, key);
            estimates.push(decode(&p, mode, &mut rng));
            tiers.push(res.tier_used);
        }
        Ok((estimates, tiers))
    }

    fn output_input(&self, index: usize, hidden: &[BinaryVector]) -> Result<BinaryVector> {
        BinaryVector::concat(self.receptive_field(index).into_iter().map(|i| &hidden[i]))
    }

    /// Layer-by-layer retrieval. Never touches the synaptic memories.
    pub fn forward(&self, windows: &[BinaryVector], key: DrawKey) -> Result<ForwardPass> {
        self.check_windows(windows)?;
        let (hidden, hidden_tiers) = self.hidden_estimates(windows, key)?;
        let output = (0..self.output.len())
            .map(|i| {
                let input = self.output_input(i, &hidden)?;
                Ok(self.output[i].evaluate(&input)?.1)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ForwardPass {
            hidden,
            hidden_tiers,
            output,
        })
    }

    pub fn predict(&self, windows: &[BinaryVector], key: DrawKey) -> Result<Prediction> {
        let pass = self.forward(windows, key)?;
        Ok(vote(&pass.output, self.config.vote_threshold))
    }

    /// One online step. Returns how many first-layer units learned.
    pub fn train_example(&mut self, windows: &[BinaryVector], digit: u8, key: DrawKey) -> Result<usize> {
        self.check_windows(windows)?;
        if usize::from(digit) >= self.config.classes {
            return Err(LomError::OutOfRange {
                what: "digit",
                value: usize::from(digit),
                limit: self.config.classes,
            });
        }
        let hidden_label = if self.config.hidden_label_bits == 4 {
            digit_to_4bit(digit)?
        } else {
            BinaryVector::from_packed(
                msb_first(u64::from(digit), self.config.hidden_label_bits),
                self.config.hidden_label_bits,
            )?
        };
        let output_label = if self.config.classes == 10 {
            digit_to_onehot(digit)?
        } else {
            BinaryVector::from_packed(1 << digit, self.config.classes)?
        };

        let mut learned = 0;
        for (unit, w) in self.hidden.iter_mut().zip(windows) {
            if unit.learn_supervised(w, &hidden_label)? {
                learned += 1;
            }
        }
        let (hidden, _) = self.hidden_estimates(windows, key)?;
        for i in 0..self.output.len() {
            let input = self.output_input(i, &hidden)?;
            self.output[i].learn_supervised(&input, &output_label)?;
        }
        Ok(learned)
    }
}

/// Bit-reverses the low `bits` bits so the most significant digit lands at position 1.
fn msb_first(value: u64, bits: usize) -> u64 {
    (0..bits).fold(0, |acc, i| acc | ((value >> (bits - 1 - i)) & 1) << i)
}

/// Sums the vectors whose largest entry exceeds `threshold` (all vectors if
/// none do) and picks the largest sum; ties go to the smaller class.
pub fn vote(outputs: &[ProbabilityVector], threshold: f64) -> Prediction {
    let classes = outputs.first().map_or(0, ProbabilityVector::len);
    let mut vote_sum = vec![0.0; classes];
    let mut voters = 0;
    for p in outputs.iter().filter(|p| p.max() > threshold) {
        voters += 1;
        for (s, x) in vote_sum.iter_mut().zip(p.as_slice()) {
            *s += x;
        }
    }
    if voters == 0 {
        for p in outputs {
            for (s, x) in vote_sum.iter_mut().zip(p.as_slice()) {
                *s += x;
            }
        }
    }
    let mut digit = 0;
    for (k, &s) in vote_sum.iter().enumerate() {
        if s > vote_sum[digit] {
            digit = k;
        }
    }
    Prediction {
        digit,
        vote_sum,
        voters,
    }
}
