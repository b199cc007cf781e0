//! Masking matrices over code positions.
//!
//! Ignoring a set `S` of input bits zeroes every code component whose subset
//! touches `S`. The surviving components are exactly the dendritic code of
//! the input with `S` removed, which is what makes masked retrieval answer
//! queries on subvectors.

use crate::error::{LomError, Result};

/// Diagonal 0/1 mask induced by a set of ignored input positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct InputMask {
    input_bits: usize,
    ignored: u64,
}

impl InputMask {
    pub fn identity(input_bits: usize) -> Self {
        Self { input_bits, ignored: 0 }
    }

    /// Mask ignoring the given one-based input positions.
    pub fn ignoring(input_bits: usize, positions: &[usize]) -> Result<Self> {
        let mut ignored = 0u64;
        for &p in positions {
            if p == 0 || p > input_bits {
                return Err(LomError::OutOfRange {
                    what: "masked input position",
                    value: p,
                    limit: input_bits + 1,
                });
            }
            ignored |= 1 << (p - 1);
        }
        Ok(Self { input_bits, ignored })
    }

    pub(crate) fn from_bits(input_bits: usize, ignored: u64) -> Self {
        Self { input_bits, ignored }
    }

    pub fn input_bits(&self) -> usize {
        self.input_bits
    }

    /// Ignored input positions as a packed word (bit `i` is position `i + 1`).
    pub fn ignored_bits(&self) -> u64 {
        self.ignored
    }

    /// Number of ignored input bits.
    pub fn order(&self) -> usize {
        self.ignored.count_ones() as usize
    }

    #[inline]
    pub fn survives(&self, code_position: usize) -> bool {
        code_position as u64 & self.ignored == 0
    }

    /// The diagonal of the masking matrix, one entry per code position.
    pub fn diagonal(&self) -> Vec<u8> {
        (0..1usize << self.input_bits)
            .map(|j| u8::from(self.survives(j)))
            .collect()
    }

    pub fn surviving_positions(&self) -> impl Iterator<Item = usize> + '_ {
        (0..1usize << self.input_bits).filter(move |&j| self.survives(j))
    }
}

/// All masks that ignore exactly `order` input bits.
#[derive(Clone, Debug)]
pub struct MaskTier {
    pub order: usize,
    pub masks: Vec<InputMask>,
}

/// Tiers `0..=max_tier` for an `input_bits`-wide input.
pub fn make_mask_tiers(input_bits: usize, max_tier: usize) -> Result<Vec<MaskTier>> {
    check_max_tier(input_bits, max_tier)?;
    Ok((0..=max_tier)
        .map(|order| MaskTier {
            order,
            masks: k_subsets(input_bits, order)
                .map(|s| InputMask::from_bits(input_bits, s))
                .collect(),
        })
        .collect())
}

/// Largest tier must leave at least two input bits unmasked. Tier 0 is always allowed.
pub fn check_max_tier(input_bits: usize, max_tier: usize) -> Result<()> {
    if max_tier > 0 && max_tier + 2 > input_bits {
        return Err(LomError::Capacity {
            what: "generalization tier",
            value: max_tier,
            limit: input_bits.saturating_sub(2),
        });
    }
    Ok(())
}

/// All `k`-element subsets of `{0..n}` as bit masks, in increasing numeric order.
pub fn k_subsets(n: usize, k: usize) -> impl Iterator<Item = u64> {
    debug_assert!(n <= 64);
    let mut next = if k > n {
        None
    } else if k == 0 {
        Some(0u64)
    } else if k == 64 {
        Some(u64::MAX)
    } else {
        Some((1u64 << k) - 1)
    };
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == 0 || cur == u64::MAX {
            None
        } else {
            // Gosper's hack; stop once the next subset spills past bit n.
            let c = cur & cur.wrapping_neg();
            let r = cur.checked_add(c);
            match r {
                Some(r) => {
                    let n2 = (((r ^ cur) >> 2) / c) | r;
                    if n < 64 && n2 >> n != 0 {
                        None
                    } else {
                        Some(n2)
                    }
                }
                None => None,
            }
        };
        Some(cur)
    })
}

/// Binomial coefficient, exact for the sizes used here.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}
