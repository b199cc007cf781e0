//! Binary checkpoints.
//!
//! Every file starts with the magic `LOM1`, a `u16` format version and a
//! `u8` record kind (1 = single memory, 2 = network). All integers and floats
//! are little-endian. Count-layout patterns are written in first-learned
//! order so a reloaded memory is structurally identical to the original.

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::error::{LomError, Result};
use crate::memory::{
    Centering, CountStore, DenseStore, Generalization, LearningParams, Representation, Store, SynapticMemory,
};
use crate::mnist::{InputConfig, SelectionPattern, WindowGeometry};
use crate::network::{LayerSettings, Network, TopologyConfig};
use crate::soma::Decode;
use crate::unit::{LearnPolicy, ProcessingUnit};

pub const MAGIC: &[u8; 4] = b"LOM1";
pub const FORMAT_VERSION: u16 = 1;

const KIND_MEMORY: u8 = 1;
const KIND_NETWORK: u8 = 2;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint: magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u16),
    #[error("checkpoint truncated at byte {0}")]
    Truncated(usize),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

fn corrupt(msg: impl Into<String>) -> LomError {
    CheckpointError::Corrupt(msg.into()).into()
}

#[derive(Default)]
struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    fn u8(&mut self, x: u8) {
        self.buf.push(x);
    }
    fn u16(&mut self, x: u16) {
        self.buf.extend_from_slice(&x.to_le_bytes());
    }
    fn u32(&mut self, x: usize) {
        self.buf.extend_from_slice(&(x as u32).to_le_bytes());
    }
    fn u64(&mut self, x: u64) {
        self.buf.extend_from_slice(&x.to_le_bytes());
    }
    fn f64(&mut self, x: f64) {
        self.buf.extend_from_slice(&x.to_le_bytes());
    }
    fn f64s(&mut self, xs: &[f64]) {
        self.buf.reserve(xs.len() * 8);
        xs.iter().for_each(|&x| self.f64(x));
    }
}

struct Decoder<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Decoder<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.at < n {
            return Err(CheckpointError::Truncated(self.bytes.len()).into());
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| corrupt("length overflow"))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
    fn finish(&self) -> Result<()> {
        if self.at != self.bytes.len() {
            return Err(corrupt(format!("{} trailing bytes", self.bytes.len() - self.at)));
        }
        Ok(())
    }
}

fn write_header(e: &mut Encoder, kind: u8) {
    e.buf.extend_from_slice(MAGIC);
    e.u16(FORMAT_VERSION);
    e.u8(kind);
}

fn read_header(d: &mut Decoder<'_>, kind: u8) -> Result<()> {
    if d.bytes.len() < 4 {
        return Err(CheckpointError::Truncated(d.bytes.len()).into());
    }
    let magic: [u8; 4] = d.take(4)?.try_into().unwrap();
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic(magic).into());
    }
    let version = d.u16()?;
    if version != FORMAT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version).into());
    }
    let found = d.u8()?;
    if found != kind {
        return Err(corrupt(format!("record kind {found}, expected {kind}")));
    }
    Ok(())
}

fn write_params(e: &mut Encoder, p: &LearningParams) {
    e.f64(p.forgetting);
    e.f64(p.gain);
    match p.centering {
        Centering::Fixed { label, code } => {
            e.u8(0);
            e.f64(label);
            e.f64(code);
        }
        Centering::RunningMean { rate } => {
            e.u8(1);
            e.f64(rate);
        }
    }
}

fn read_params(d: &mut Decoder<'_>) -> Result<LearningParams> {
    let forgetting = d.f64()?;
    let gain = d.f64()?;
    let centering = match d.u8()? {
        0 => Centering::Fixed {
            label: d.f64()?,
            code: d.f64()?,
        },
        1 => Centering::RunningMean { rate: d.f64()? },
        k => return Err(corrupt(format!("centering kind {k}"))),
    };
    let p = LearningParams {
        forgetting,
        gain,
        centering,
    };
    p.validate().map_err(|e| corrupt(e.to_string()))?;
    Ok(p)
}

fn write_memory(e: &mut Encoder, mem: &SynapticMemory) {
    e.u32(mem.input_bits());
    e.u32(mem.label_bits());
    write_params(e, mem.params());
    e.u64(mem.learn_count());
    match &mem.store {
        Store::Dense(s) => {
            e.u8(0);
            e.f64s(&s.d);
            e.f64s(&s.c);
            e.f64s(&s.code_center);
            e.f64s(&s.label_center);
        }
        Store::Counts(s) => {
            e.u8(1);
            e.f64(s.label_center);
            e.f64(s.scale);
            e.u64(s.patterns.len() as u64);
            s.patterns.iter().for_each(|&p| e.u64(p));
            e.f64s(&s.weights);
        }
    }
}

fn read_memory(d: &mut Decoder<'_>) -> Result<SynapticMemory> {
    let input_bits = d.u32()?;
    let label_bits = d.u32()?;
    let params = read_params(d)?;
    let learn_count = d.u64()?;
    let kind = d.u8()?;
    let representation = match kind {
        0 => Representation::Dense,
        1 => Representation::Counts,
        k => return Err(corrupt(format!("representation kind {k}"))),
    };
    // Validates widths and parameters against the layout.
    let empty =
        SynapticMemory::new(input_bits, label_bits, params, representation).map_err(|e| corrupt(e.to_string()))?;
    let store = match empty.store {
        Store::Dense(_) => {
            let n = 1usize << input_bits;
            Store::Dense(DenseStore {
                input_bits,
                label_bits,
                d: d.f64s(label_bits * n)?,
                c: d.f64s(n)?,
                code_center: d.f64s(n)?,
                label_center: d.f64s(label_bits)?,
            })
        }
        Store::Counts(_) => {
            let label_center = d.f64()?;
            let scale = d.f64()?;
            let n = usize::try_from(d.u64()?).map_err(|_| corrupt("pattern count"))?;
            if n > d.bytes.len() {
                return Err(CheckpointError::Truncated(d.bytes.len()).into());
            }
            let patterns = (0..n).map(|_| d.u64()).collect::<Result<Vec<_>>>()?;
            if input_bits < 64 && patterns.iter().any(|p| p >> input_bits != 0) {
                return Err(corrupt("pattern wider than input"));
            }
            let weights = d.f64s(n * (1 + label_bits))?;
            Store::Counts(CountStore::from_parts(
                input_bits,
                label_bits,
                label_center,
                patterns,
                weights,
                scale,
            ))
        }
    };
    Ok(SynapticMemory::from_parts(
        input_bits,
        label_bits,
        params,
        learn_count,
        store,
    ))
}

pub fn memory_to_bytes(mem: &SynapticMemory) -> Vec<u8> {
    let mut e = Encoder::default();
    write_header(&mut e, KIND_MEMORY);
    write_memory(&mut e, mem);
    e.buf
}

pub fn memory_from_bytes(bytes: &[u8]) -> Result<SynapticMemory> {
    let mut d = Decoder { bytes, at: 0 };
    read_header(&mut d, KIND_MEMORY)?;
    let mem = read_memory(&mut d)?;
    d.finish()?;
    Ok(mem)
}

fn decode_tag(x: Decode) -> u8 {
    match x {
        Decode::Spike => 0,
        Decode::MaxProbability => 1,
    }
}

fn read_decode(d: &mut Decoder<'_>) -> Result<Decode> {
    match d.u8()? {
        0 => Ok(Decode::Spike),
        1 => Ok(Decode::MaxProbability),
        k => Err(corrupt(format!("decode kind {k}"))),
    }
}

fn write_layer(e: &mut Encoder, l: &LayerSettings) {
    write_params(e, &l.params);
    e.u32(l.max_tier);
    e.u8(match l.policy {
        LearnPolicy::Always => 0,
        LearnPolicy::IfUnseen => 1,
    });
    match &l.generalization {
        Generalization::Tiered => e.u8(0),
        Generalization::Weighted { weights } => {
            e.u8(1);
            e.u32(weights.len());
            e.f64s(weights);
        }
    }
}

fn read_layer(d: &mut Decoder<'_>) -> Result<LayerSettings> {
    let params = read_params(d)?;
    let max_tier = d.u32()?;
    let policy = match d.u8()? {
        0 => LearnPolicy::Always,
        1 => LearnPolicy::IfUnseen,
        k => return Err(corrupt(format!("policy kind {k}"))),
    };
    let generalization = match d.u8()? {
        0 => Generalization::Tiered,
        1 => {
            let n = d.u32()?;
            Generalization::Weighted { weights: d.f64s(n)? }
        }
        k => return Err(corrupt(format!("generalization kind {k}"))),
    };
    Ok(LayerSettings {
        params,
        max_tier,
        policy,
        generalization,
    })
}

fn write_topology(e: &mut Encoder, t: &TopologyConfig) {
    for x in [
        t.grid_rows,
        t.grid_cols,
        t.block,
        t.window_bits,
        t.hidden_label_bits,
        t.classes,
    ] {
        e.u32(x);
    }
    e.f64(t.vote_threshold);
    e.u8(match t.representation {
        Representation::Dense => 0,
        Representation::Counts => 1,
    });
    e.u8(decode_tag(t.train_decode));
    e.u8(decode_tag(t.eval_decode));
    write_layer(e, &t.hidden);
    write_layer(e, &t.output);
}

fn read_topology(d: &mut Decoder<'_>) -> Result<TopologyConfig> {
    let mut dims = [0usize; 6];
    for x in &mut dims {
        *x = d.u32()?;
    }
    let [grid_rows, grid_cols, block, window_bits, hidden_label_bits, classes] = dims;
    let vote_threshold = d.f64()?;
    let representation = match d.u8()? {
        0 => Representation::Dense,
        1 => Representation::Counts,
        k => return Err(corrupt(format!("representation kind {k}"))),
    };
    Ok(TopologyConfig {
        grid_rows,
        grid_cols,
        block,
        window_bits,
        hidden_label_bits,
        classes,
        vote_threshold,
        representation,
        train_decode: read_decode(d)?,
        eval_decode: read_decode(d)?,
        hidden: read_layer(d)?,
        output: read_layer(d)?,
    })
}

fn write_input(e: &mut Encoder, input: &InputConfig) {
    e.u8(input.threshold);
    e.u32(input.geometry.window);
    e.u32(input.geometry.pad);
    e.u32(input.selection.len());
    for &(r, c) in input.selection.offsets() {
        e.u8(r);
        e.u8(c);
    }
    e.u64(input.selection.fingerprint());
}

fn read_input(d: &mut Decoder<'_>) -> Result<InputConfig> {
    let threshold = d.u8()?;
    let geometry = WindowGeometry {
        window: d.u32()?,
        pad: d.u32()?,
    };
    let n = d.u32()?;
    let offsets = (0..n).map(|_| Ok((d.u8()?, d.u8()?))).collect::<Result<Vec<_>>>()?;
    let selection = SelectionPattern::new(offsets).map_err(|e| corrupt(e.to_string()))?;
    let fingerprint = d.u64()?;
    if fingerprint != selection.fingerprint() {
        return Err(corrupt("selection pattern fingerprint mismatch"));
    }
    Ok(InputConfig {
        threshold,
        geometry,
        selection,
    })
}

/// A trained network together with everything needed to feed and replay it.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    /// Training examples consumed so far.
    pub examples_seen: u64,
    pub input: InputConfig,
    pub network: Network,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::default();
        write_header(&mut e, KIND_NETWORK);
        e.u64(self.seed);
        e.u64(self.examples_seen);
        write_input(&mut e, &self.input);
        write_topology(&mut e, self.network.config());
        let units: Vec<&ProcessingUnit> = self
            .network
            .hidden_units()
            .iter()
            .chain(self.network.output_units())
            .collect();
        e.u32(units.len());
        for u in units {
            write_memory(&mut e, u.memory());
        }
        e.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut d = Decoder { bytes, at: 0 };
        read_header(&mut d, KIND_NETWORK)?;
        let seed = d.u64()?;
        let examples_seen = d.u64()?;
        let input = read_input(&mut d)?;
        let topology = read_topology(&mut d)?;
        let fresh = Network::build(topology.clone()).map_err(|e| corrupt(e.to_string()))?;
        let n = d.u32()?;
        let expected = fresh.hidden_units().len() + fresh.output_units().len();
        if n != expected {
            return Err(corrupt(format!("{n} units stored, topology has {expected}")));
        }
        let mut rebuild = |units: &[ProcessingUnit]| -> Result<Vec<ProcessingUnit>> {
            units
                .iter()
                .map(|u| {
                    let mem = read_memory(&mut d)?;
                    let cfg = u.config();
                    if mem.input_bits() != cfg.input_bits
                        || mem.label_bits() != cfg.label_bits
                        || mem.representation() != cfg.representation
                        || *mem.params() != cfg.params
                    {
                        return Err(corrupt(format!("unit {} does not match the topology", u.id())));
                    }
                    Ok(ProcessingUnit::from_parts(cfg.clone(), mem))
                })
                .collect()
        };
        let hidden = rebuild(fresh.hidden_units())?;
        let output = rebuild(fresh.output_units())?;
        d.finish()?;
        Ok(Self {
            seed,
            examples_seen,
            input,
            network: Network::assemble(topology, hidden, output),
        })
    }

    /// Writes to a sibling temporary file, then renames over `path`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = fs::read(path.as_ref())?;
        Self::from_bytes(&bytes)
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
