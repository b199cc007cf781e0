//! MNIST ingestion and first-layer feature extraction.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::code::BinaryVector;
use crate::error::{LomError, Result};

pub const IMAGE_MAGIC: u32 = 2051;
pub const LABEL_MAGIC: u32 = 2049;
pub const DEFAULT_BINARIZE_THRESHOLD: u8 = 35;

#[derive(Debug, Error)]
pub enum IdxError {
    #[error("{}: bad IDX magic {found:#010x}", path.display())]
    BadMagic { path: PathBuf, found: u32 },

    #[error("{}: truncated IDX file ({found} bytes, need {expected})", path.display())]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("{}: label {value} at index {index} is not a digit", path.display())]
    LabelOutOfRange { path: PathBuf, index: usize, value: u8 },

    #[error("{}: expected {expected}, found {found}", path.display())]
    WrongKind {
        path: PathBuf,
        expected: &'static str,
        found: &'static str,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Grayscale images stored back to back, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageSet {
    pub rows: usize,
    pub cols: usize,
    pixels: Vec<u8>,
}

impl ImageSet {
    pub fn new(rows: usize, cols: usize, pixels: Vec<u8>) -> Result<Self> {
        let size = rows * cols;
        if size == 0 || !pixels.len().is_multiple_of(size) {
            return Err(LomError::dim("image set", size, pixels.len()));
        }
        Ok(Self { rows, cols, pixels })
    }

    pub fn len(&self) -> usize {
        self.pixels.len() / (self.rows * self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let size = self.rows * self.cols;
        &self.pixels[i * size..(i + 1) * size]
    }

    /// First `n` images.
    pub fn truncated(&self, n: usize) -> ImageSet {
        let n = n.min(self.len());
        ImageSet {
            rows: self.rows,
            cols: self.cols,
            pixels: self.pixels[..n * self.rows * self.cols].to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IdxData {
    Images(ImageSet),
    Labels(Vec<u8>),
}

impl IdxData {
    fn kind(&self) -> &'static str {
        match self {
            IdxData::Images(_) => "images",
            IdxData::Labels(_) => "labels",
        }
    }
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

/// Parses an IDX container held in memory. `path` only labels errors.
pub fn parse_idx(bytes: &[u8], path: &Path) -> Result<IdxData, IdxError> {
    let truncated = |expected: usize| IdxError::Truncated {
        path: path.to_path_buf(),
        expected,
        found: bytes.len(),
    };
    if bytes.len() < 8 {
        return Err(truncated(8));
    }
    let magic = be_u32(bytes, 0);
    let count = be_u32(bytes, 4) as usize;
    match magic {
        IMAGE_MAGIC => {
            if bytes.len() < 16 {
                return Err(truncated(16));
            }
            let rows = be_u32(bytes, 8) as usize;
            let cols = be_u32(bytes, 12) as usize;
            let need = count
                .checked_mul(rows)
                .and_then(|n| n.checked_mul(cols))
                .and_then(|n| n.checked_add(16))
                .unwrap_or(usize::MAX);
            if rows == 0 || cols == 0 {
                return Err(IdxError::WrongKind {
                    path: path.to_path_buf(),
                    expected: "images with nonzero size",
                    found: "empty images",
                });
            }
            if bytes.len() < need {
                return Err(truncated(need));
            }
            Ok(IdxData::Images(ImageSet {
                rows,
                cols,
                pixels: bytes[16..need].to_vec(),
            }))
        }
        LABEL_MAGIC => {
            let need = 8 + count;
            if bytes.len() < need {
                return Err(truncated(need));
            }
            let labels = bytes[8..need].to_vec();
            if let Some((index, &value)) = labels.iter().enumerate().find(|(_, &v)| v > 9) {
                return Err(IdxError::LabelOutOfRange {
                    path: path.to_path_buf(),
                    index,
                    value,
                });
            }
            Ok(IdxData::Labels(labels))
        }
        found => Err(IdxError::BadMagic {
            path: path.to_path_buf(),
            found,
        }),
    }
}

pub fn load_idx(path: impl AsRef<Path>) -> Result<IdxData, IdxError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| IdxError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_idx(&bytes, path)
}

pub fn load_images(path: impl AsRef<Path>) -> Result<ImageSet, IdxError> {
    match load_idx(path.as_ref())? {
        IdxData::Images(set) => Ok(set),
        other => Err(IdxError::WrongKind {
            path: path.as_ref().to_path_buf(),
            expected: "images",
            found: other.kind(),
        }),
    }
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<u8>, IdxError> {
    match load_idx(path.as_ref())? {
        IdxData::Labels(labels) => Ok(labels),
        other => Err(IdxError::WrongKind {
            path: path.as_ref().to_path_buf(),
            expected: "labels",
            found: other.kind(),
        }),
    }
}

/// The four standard MNIST files.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub train_images: ImageSet,
    pub train_labels: Vec<u8>,
    pub test_images: ImageSet,
    pub test_labels: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetPaths {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
}

impl DatasetPaths {
    /// Standard file names inside `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            train_images: dir.join("train-images-idx3-ubyte"),
            train_labels: dir.join("train-labels-idx1-ubyte"),
            test_images: dir.join("t10k-images-idx3-ubyte"),
            test_labels: dir.join("t10k-labels-idx1-ubyte"),
        }
    }

    pub fn all(&self) -> [&Path; 4] {
        [
            &self.train_images,
            &self.train_labels,
            &self.test_images,
            &self.test_labels,
        ]
    }

    /// First missing file, if any.
    pub fn check_exist(&self) -> Result<()> {
        match self.all().into_iter().find(|p| !p.exists()) {
            Some(p) => Err(LomError::MissingPath(p.to_path_buf())),
            None => Ok(()),
        }
    }
}

impl Dataset {
    pub fn load(paths: &DatasetPaths) -> Result<Self> {
        paths.check_exist()?;
        let ds = Self {
            train_images: load_images(&paths.train_images)?,
            train_labels: load_labels(&paths.train_labels)?,
            test_images: load_images(&paths.test_images)?,
            test_labels: load_labels(&paths.test_labels)?,
        };
        if ds.train_images.len() != ds.train_labels.len() {
            return Err(LomError::dim(
                "training labels",
                ds.train_images.len(),
                ds.train_labels.len(),
            ));
        }
        if ds.test_images.len() != ds.test_labels.len() {
            return Err(LomError::dim("test labels", ds.test_images.len(), ds.test_labels.len()));
        }
        Ok(ds)
    }
}

/// A black/white image, one byte (0 or 1) per pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryImage {
    pub rows: usize,
    pub cols: usize,
    pub bits: Vec<u8>,
}

impl BinaryImage {
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        if row < self.rows && col < self.cols {
            self.bits[row * self.cols + col]
        } else {
            0
        }
    }
}

/// Pixels at or above `threshold` become 1.
pub fn binarize(pixels: &[u8], rows: usize, cols: usize, threshold: u8) -> BinaryImage {
    debug_assert_eq!(pixels.len(), rows * cols);
    BinaryImage {
        rows,
        cols,
        bits: pixels.iter().map(|&p| u8::from(p >= threshold)).collect(),
    }
}

/// Which pixels of a window feed a first-layer unit, in input-bit order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(u8, u8)>", into = "Vec<(u8, u8)>")]
pub struct SelectionPattern {
    offsets: Vec<(u8, u8)>,
}

impl SelectionPattern {
    pub fn new(offsets: Vec<(u8, u8)>) -> Result<Self> {
        if offsets.is_empty() || offsets.len() > crate::code::MAX_VECTOR_BITS {
            return Err(LomError::config(format!(
                "selection pattern needs 1..=64 offsets, got {}",
                offsets.len()
            )));
        }
        let mut seen = offsets.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != offsets.len() {
            return Err(LomError::config("selection pattern offsets must be distinct"));
        }
        Ok(Self { offsets })
    }

    /// Every (row, col) pair drawn from `lines`, row-major.
    pub fn grid(lines: &[u8]) -> Result<Self> {
        Self::new(lines.iter().flat_map(|&r| lines.iter().map(move |&c| (r, c))).collect())
    }

    /// The 16 pixels at even row and column offsets of an 8x8 window.
    pub fn even_grid() -> Self {
        Self::grid(&[0, 2, 4, 6]).expect("valid grid")
    }

    pub fn offsets(&self) -> &[(u8, u8)] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Smallest window side that contains every offset.
    pub fn extent(&self) -> usize {
        self.offsets
            .iter()
            .map(|&(r, c)| usize::from(r.max(c)) + 1)
            .max()
            .unwrap_or(0)
    }

    /// FNV-1a over the offsets, stored in checkpoints.
    pub fn fingerprint(&self) -> u64 {
        let bytes: Vec<u8> = self.offsets.iter().flat_map(|&(r, c)| [r, c]).collect();
        crate::rng::fnv1a(&bytes)
    }
}

/// Rows and columns 0, 2, 5, 7: a mirror-symmetric grid reaching the window
/// edges. Scored best on the full MNIST run among the grids tried.
impl Default for SelectionPattern {
    fn default() -> Self {
        Self::grid(&[0, 2, 5, 7]).expect("valid grid")
    }
}

impl TryFrom<Vec<(u8, u8)>> for SelectionPattern {
    type Error = LomError;

    fn try_from(v: Vec<(u8, u8)>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SelectionPattern> for Vec<(u8, u8)> {
    fn from(s: SelectionPattern) -> Self {
        s.offsets
    }
}

/// Sliding-window layout: `window`-sided square, stride 1, zero padding
/// added on the bottom and right.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowGeometry {
    pub window: usize,
    pub pad: usize,
}

impl Default for WindowGeometry {
    /// 8x8 windows over a 29x29 padded image: 22x22 positions.
    fn default() -> Self {
        Self { window: 8, pad: 1 }
    }
}

impl WindowGeometry {
    /// Window positions along a side of length `side`.
    pub fn positions(&self, side: usize) -> usize {
        (side + self.pad + 1).saturating_sub(self.window)
    }

    pub fn validate(&self, selection: &SelectionPattern) -> Result<()> {
        if self.window == 0 || selection.extent() > self.window {
            return Err(LomError::config(format!(
                "selection pattern spans {} pixels, window is {}",
                selection.extent(),
                self.window
            )));
        }
        Ok(())
    }
}

/// Everything that turns raw pixels into first-layer inputs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct InputConfig {
    pub threshold: u8,
    pub geometry: WindowGeometry,
    pub selection: SelectionPattern,
}

impl Default for InputConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_BINARIZE_THRESHOLD,
            geometry: WindowGeometry::default(),
            selection: SelectionPattern::default(),
        }
    }
}

impl InputConfig {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate(&self.selection)
    }

    pub fn windows(&self, pixels: &[u8], rows: usize, cols: usize) -> Vec<BinaryVector> {
        extract_windows(
            &binarize(pixels, rows, cols, self.threshold),
            &self.selection,
            &self.geometry,
        )
    }
}

/// Row-major windows; bit `i` of each vector is the pixel at selection offset `i`.
pub fn extract_windows(
    img: &BinaryImage,
    selection: &SelectionPattern,
    geometry: &WindowGeometry,
) -> Vec<BinaryVector> {
    let rows = geometry.positions(img.rows);
    let cols = geometry.positions(img.cols);
    let mut out = Vec::with_capacity(rows * cols);
    for wr in 0..rows {
        for wc in 0..cols {
            let mut bits = 0u64;
            for (i, &(r, c)) in selection.offsets.iter().enumerate() {
                bits |= u64::from(img.get(wr + usize::from(r), wc + usize::from(c))) << i;
            }
            out.push(BinaryVector::from_packed(bits, selection.len()).expect("selection fits"));
        }
    }
    out
}

/// MSB-first 4-bit binary code of a digit.
pub fn digit_to_4bit(digit: u8) -> Result<BinaryVector> {
    check_digit(digit)?;
    BinaryVector::new(&[(digit >> 3) & 1, (digit >> 2) & 1, (digit >> 1) & 1, digit & 1])
}

pub fn digit_to_onehot(digit: u8) -> Result<BinaryVector> {
    check_digit(digit)?;
    BinaryVector::from_packed(1 << digit, 10)
}

fn check_digit(digit: u8) -> Result<()> {
    if digit > 9 {
        return Err(LomError::OutOfRange {
            what: "digit",
            value: usize::from(digit),
            limit: 10,
        });
    }
    Ok(())
}
