//! Counter-based spike generator.
//!
//! Draws come from Philox4x32-10 (Salmon et al., "Parallel random numbers:
//! as easy as 1, 2, 3", SC'11; reference implementation in Random123). The
//! 64-bit global seed is the Philox key. The 128-bit counter holds the draw
//! block in its low half and the stream identifier in its high half, so any
//! `(seed, stream, position)` triple maps to one fixed draw regardless of
//! what other streams have consumed.

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    ((p >> 32) as u32, p as u32)
}

/// One Philox4x32 block with 10 rounds.
pub fn philox4x32_10(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut ctr = counter;
    let mut key = key;
    for round in 0..10 {
        if round > 0 {
            key[0] = key[0].wrapping_add(PHILOX_W0);
            key[1] = key[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, ctr[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, ctr[2]);
        ctr = [hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0];
    }
    ctr
}

/// Maps stream labels such as `"pu:0"` to stream identifiers.
pub fn stream_id(label: &str) -> u64 {
    fnv1a(label.as_bytes())
}

/// FNV-1a, 64-bit.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// A seekable stream of 32-bit draws.
#[derive(Clone, Debug)]
pub struct SpikeRng {
    key: [u32; 2],
    stream: u64,
    position: u64,
    cached_block: u64,
    cache: [u32; 4],
}

impl SpikeRng {
    pub fn new(seed: u64, label: &str) -> Self {
        Self::with_stream(seed, stream_id(label))
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let key = [seed as u32, (seed >> 32) as u32];
        Self {
            key,
            stream,
            position: 0,
            cached_block: u64::MAX,
            cache: [0; 4],
        }
    }

    pub fn seed(&self) -> u64 {
        u64::from(self.key[0]) | u64::from(self.key[1]) << 32
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Number of 32-bit draws consumed so far.
    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn seek(&mut self, position: u64) {
        self.position = position;
    }

    fn refill(&mut self, block: u64) {
        let ctr = [
            block as u32,
            (block >> 32) as u32,
            self.stream as u32,
            (self.stream >> 32) as u32,
        ];
        self.cache = philox4x32_10(ctr, self.key);
        self.cached_block = block;
    }

    pub fn next_u32(&mut self) -> u32 {
        let block = self.position >> 2;
        if block != self.cached_block {
            self.refill(block);
        }
        let out = self.cache[(self.position & 3) as usize];
        self.position += 1;
        out
    }

    /// Uniform draw in `[0, 1)` with 32-bit resolution.
    pub fn next_unit(&mut self) -> f64 {
        f64::from(self.next_u32()) * (1.0 / 4_294_967_296.0)
    }

    /// 1 with probability `p`, else 0. Always consumes one draw.
    pub fn bernoulli(&mut self, p: f64) -> u8 {
        u8::from(self.next_unit() < p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Known-answer vectors shipped with Random123 (kat_vectors, philox4x32 10 rounds).
    #[test]
    fn philox_known_answers() {
        assert_eq!(
            philox4x32_10([0, 0, 0, 0], [0, 0]),
            [0x6627_e8d5, 0xe169_c58d, 0xbc57_ac4c, 0x9b00_dbd8]
        );
        assert_eq!(
            philox4x32_10([u32::MAX; 4], [u32::MAX; 2]),
            [0x408f_276d, 0x41c8_3b0e, 0xa20b_c7c6, 0x6d54_51fd]
        );
        assert_eq!(
            philox4x32_10(
                [0x243f_6a88, 0x85a3_08d3, 0x1319_8a2e, 0x0370_7344],
                [0xa409_3822, 0x299f_31d0]
            ),
            [0xd16c_fe09, 0x94fd_cceb, 0x5001_e420, 0x2412_6ea1]
        );
    }

    #[test]
    fn seeking_reproduces_draws() {
        let mut a = SpikeRng::new(42, "pu:0");
        let first: Vec<u32> = (0..11).map(|_| a.next_u32()).collect();
        let mut b = SpikeRng::new(42, "pu:0");
        b.seek(5);
        assert_eq!(b.next_u32(), first[5]);
        b.seek(2);
        assert_eq!(b.next_u32(), first[2]);
        assert_eq!(a.position(), 11);
    }

    #[test]
    fn streams_differ() {
        let mut a = SpikeRng::new(42, "pu:0");
        let mut b = SpikeRng::new(42, "pu:1");
        let xa: Vec<u32> = (0..8).map(|_| a.next_u32()).collect();
        let xb: Vec<u32> = (0..8).map(|_| b.next_u32()).collect();
        assert_ne!(xa, xb);
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(stream_id(""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(stream_id("a"), 0xaf63_dc4c_8601_ec8c);
    }

    #[test]
    fn degenerate_bernoulli() {
        let mut r = SpikeRng::new(7, "x");
        for _ in 0..1000 {
            assert_eq!(r.bernoulli(1.0), 1);
            assert_eq!(r.bernoulli(0.0), 0);
        }
    }
}
