//! Reference implementations used as test oracles. Nothing here calls into
//! the library's encoder or memory code.

#![allow(dead_code, clippy::needless_range_loop)]

/// Component `j` of the dendritic code of `v`: the parity of the input bits
/// named by the set bits of `j` (bit `b` of `j` is input position `b + 1`).
pub fn code_bit(v: u64, j: usize) -> u8 {
    ((v & j as u64).count_ones() & 1) as u8
}

pub fn code(v: u64, m: usize) -> Vec<u8> {
    (0..1usize << m).map(|j| code_bit(v, j)).collect()
}

/// Weight matrices updated literally by the covariance and accumulation
/// rules, with both centers fixed at 1/2.
#[derive(Clone, Debug)]
pub struct RuleMemory {
    pub m: usize,
    pub r: usize,
    pub forgetting: f64,
    pub gain: f64,
    pub d: Vec<Vec<f64>>,
    pub c: Vec<f64>,
}

impl RuleMemory {
    pub fn new(m: usize, r: usize, forgetting: f64, gain: f64) -> Self {
        Self {
            m,
            r,
            forgetting,
            gain,
            d: vec![vec![0.0; 1 << m]; r],
            c: vec![0.0; 1 << m],
        }
    }

    pub fn learn(&mut self, v: u64, label: &[u8]) {
        for j in 0..1usize << self.m {
            let x = f64::from(code_bit(v, j)) - 0.5;
            for k in 0..self.r {
                let u = f64::from(label[k]) - 0.5;
                self.d[k][j] = self.forgetting * self.d[k][j] + self.gain * u * x;
            }
            self.c[j] = self.forgetting * self.c[j] + self.gain / 2.0 * x;
        }
    }

    /// Retrieval through the diagonal mask that zeroes every component
    /// involving an input bit in `ignored`.
    pub fn retrieve(&self, v: u64, ignored: u64) -> (Vec<f64>, f64) {
        let mut d = vec![0.0; self.r];
        let mut c = 0.0;
        for j in 0..1usize << self.m {
            if j as u64 & ignored != 0 {
                continue;
            }
            let x = f64::from(code_bit(v, j)) - 0.5;
            for k in 0..self.r {
                d[k] += self.d[k][j] * x;
            }
            c += self.c[j] * x;
        }
        (d, c)
    }

    /// Sums retrieval over every mask ignoring exactly `order` bits and
    /// returns the first order with evidence, as `(order, d, c)`.
    pub fn retrieve_tiered(&self, v: u64, max_tier: usize) -> Option<(usize, Vec<f64>, f64)> {
        for order in 0..=max_tier {
            let mut d = vec![0.0; self.r];
            let mut c = 0.0;
            for s in 0..1u64 << self.m {
                if s.count_ones() as usize != order {
                    continue;
                }
                let (ds, cs) = self.retrieve(v, s);
                for k in 0..self.r {
                    d[k] += ds[k];
                }
                c += cs;
            }
            if c > 1e-9 {
                return Some((order, d, c));
            }
        }
        None
    }
}

/// Closed-form retrieval from the list of learned examples: each example
/// agreeing with the query outside `ignored` contributes
/// `(gain / 2) * 2^(m - |ignored| - 2) * forgetting^age`, signed by the label bit for `d`.
pub fn count_oracle(
    m: usize,
    r: usize,
    forgetting: f64,
    gain: f64,
    history: &[(u64, Vec<u8>)],
    query: u64,
    ignored: u64,
) -> (Vec<f64>, f64) {
    let unit = gain / 2.0 * 2f64.powi(m as i32 - ignored.count_ones() as i32 - 2);
    let mut d = vec![0.0; r];
    let mut c = 0.0;
    let t_end = history.len();
    for (t, (v, label)) in history.iter().enumerate() {
        if (v ^ query) & !ignored & ((1u64 << m) - 1) != 0 {
            continue;
        }
        let w = unit * forgetting.powi((t_end - 1 - t) as i32);
        c += w;
        for k in 0..r {
            d[k] += if label[k] == 1 { w } else { -w };
        }
    }
    (d, c)
}

/// `(d / c + 1) / 2` per bit as `(c + d) / 2c`, clamped; 1/2 without evidence.
pub fn probability(d: &[f64], c: f64) -> Vec<f64> {
    if c <= 1e-9 {
        return vec![0.5; d.len()];
    }
    d.iter().map(|&dk| ((c + dk) / (2.0 * c)).clamp(0.0, 1.0)).collect()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// xorshift64*, for generating test cases without touching the library RNG.
pub struct Xorshift(pub u64);

impl Xorshift {
    pub fn next(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(0x2545_f491_4f6c_dd1d)
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }

    pub fn unit(&mut self) -> f64 {
        (self.next() >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Naive window extraction: pad, slide, read the selected pixels.
pub fn naive_windows(
    pixels: &[u8],
    rows: usize,
    cols: usize,
    threshold: u8,
    window: usize,
    pad: usize,
    offsets: &[(u8, u8)],
) -> Vec<Vec<u8>> {
    let pr = rows + pad;
    let pc = cols + pad;
    let mut padded = vec![vec![0u8; pc]; pr];
    for r in 0..rows {
        for c in 0..cols {
            padded[r][c] = u8::from(pixels[r * cols + c] >= threshold);
        }
    }
    let mut out = Vec::new();
    for wr in 0..=pr - window {
        for wc in 0..=pc - window {
            out.push(
                offsets
                    .iter()
                    .map(|&(r, c)| padded[wr + r as usize][wc + c as usize])
                    .collect(),
            );
        }
    }
    out
}
