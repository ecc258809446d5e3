//! Quenched Bernoulli label fields over ℕ and ℕ².
//!
//! Labels are drawn once, bit-packed (least significant bit first, row-major
//! with the first axis fastest) and never change afterwards. Generation is a
//! pure function of `(seed, p0, extent)`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{substream, RNG_ID};
use crate::Rational;

pub const MAGIC: &str = "QWENV1";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    magic: String,
    dim: usize,
    extent: Vec<usize>,
    p0_num: u64,
    p0_den: u64,
    seed: u64,
    rng_id: String,
}

/// A frozen environment `ω`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Environment {
    dim: usize,
    extent: Vec<usize>,
    bits: Vec<u8>,
    p0_num: u64,
    p0_den: u64,
    seed: u64,
    rng_id: String,
}

fn check_shape(dim: usize, extent: &[usize]) -> Result<usize> {
    if dim != 1 && dim != 2 {
        return invalid(format!("dimension must be 1 or 2, got {dim}"));
    }
    if extent.len() != dim {
        return invalid(format!("{dim}D environment needs {dim} extents, got {}", extent.len()));
    }
    if extent.contains(&0) {
        return invalid("extent must be at least 1 along every axis");
    }
    extent
        .iter()
        .try_fold(1usize, |acc, &e| acc.checked_mul(e))
        .ok_or_else(|| Error::InvalidInput("environment too large".into()))
}

/// Splits a probability in the open interval (0,1) into a `u64` fraction.
pub(crate) fn probability_parts(p: &Rational) -> Result<(u64, u64)> {
    if !p.is_positive() || *p >= Rational::one() {
        return invalid(format!("p0 must lie strictly between 0 and 1, got {p}"));
    }
    match (p.numer().to_u64(), p.denom().to_u64()) {
        (Some(n), Some(d)) => Ok((n, d)),
        _ => invalid(format!("p0 = {p} does not fit in 64-bit numerator/denominator")),
    }
}

impl Environment {
    /// Draws i.i.d. labels: tile `k` gets label 0 iff `u_k < p0`, where `u_k`
    /// is the k-th 64-bit output of stream 0 of `seed`, read as a fraction of 2⁶⁴.
    pub fn generate(seed: u64, p0: &Rational, dim: usize, extent: &[usize]) -> Result<Self> {
        let (p0_num, p0_den) = probability_parts(p0)?;
        let total = check_shape(dim, extent)?;
        let mut rng = substream(seed, 0);
        let threshold = (p0_num as u128) << 64;
        let mut bits = vec![0u8; total.div_ceil(8)];
        for k in 0..total {
            let u = rng.next_u64() as u128;
            if u * p0_den as u128 >= threshold {
                bits[k / 8] |= 1 << (k % 8);
            }
        }
        Ok(Self {
            dim,
            extent: extent.to_vec(),
            bits,
            p0_num,
            p0_den,
            seed,
            rng_id: RNG_ID.to_string(),
        })
    }

    /// Builds an environment from explicit labels (each 0 or 1), in storage order.
    pub fn from_labels(dim: usize, extent: &[usize], labels: &[u8], p0: &Rational) -> Result<Self> {
        let total = check_shape(dim, extent)?;
        if labels.len() != total {
            return invalid(format!("expected {total} labels, got {}", labels.len()));
        }
        let (p0_num, p0_den) = probability_parts(p0)?;
        let mut bits = vec![0u8; total.div_ceil(8)];
        for (k, &l) in labels.iter().enumerate() {
            match l {
                0 => {}
                1 => bits[k / 8] |= 1 << (k % 8),
                _ => return invalid(format!("label {l} at index {k} is not 0 or 1")),
            }
        }
        Ok(Self {
            dim,
            extent: extent.to_vec(),
            bits,
            p0_num,
            p0_den,
            seed: 0,
            rng_id: "explicit".to_string(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extent(&self) -> &[usize] {
        &self.extent
    }

    /// Total number of tiles.
    pub fn len(&self) -> usize {
        self.extent.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn p0(&self) -> Rational {
        Rational::new(BigInt::from(self.p0_num), BigInt::from(self.p0_den))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rng_id(&self) -> &str {
        &self.rng_id
    }

    #[inline]
    fn bit(&self, idx: usize) -> u8 {
        (self.bits[idx / 8] >> (idx % 8)) & 1
    }

    /// `ω(k)` for a 1D environment.
    #[inline]
    pub fn label_at(&self, k: usize) -> Result<u8> {
        debug_assert_eq!(self.dim, 1);
        if k >= self.extent[0] {
            return Err(Error::EnvironmentExhausted {
                tile: k.to_string(),
                extent: self.extent[0].to_string(),
            });
        }
        Ok(self.bit(k))
    }

    /// `ω(k₁, k₂)` for a 2D environment.
    #[inline]
    pub fn label_at_2d(&self, k: [usize; 2]) -> Result<u8> {
        debug_assert_eq!(self.dim, 2);
        if k[0] >= self.extent[0] || k[1] >= self.extent[1] {
            return Err(Error::EnvironmentExhausted {
                tile: format!("({}, {})", k[0], k[1]),
                extent: format!("{}x{}", self.extent[0], self.extent[1]),
            });
        }
        Ok(self.bit(k[1] * self.extent[0] + k[0]))
    }

    /// Labels in storage order.
    pub fn labels(&self) -> impl Iterator<Item = u8> + '_ {
        (0..self.len()).map(|k| self.bit(k))
    }

    pub fn count_zeros(&self) -> u64 {
        let ones: u64 = self.bits.iter().map(|b| b.count_ones() as u64).sum();
        self.len() as u64 - ones
    }

    /// Exact fraction of tiles labeled 0.
    pub fn label_fraction(&self) -> Rational {
        Rational::new(BigInt::from(self.count_zeros()), BigInt::from(self.len()))
    }

    /// Counts of consecutive label pairs `(ω(k), ω(k+1))` along the first axis.
    pub fn pair_counts(&self) -> [[u64; 2]; 2] {
        let mut counts = [[0u64; 2]; 2];
        let row = self.extent[0];
        for r in 0..self.len() / row {
            for k in 0..row.saturating_sub(1) {
                let idx = r * row + k;
                counts[self.bit(idx) as usize][self.bit(idx + 1) as usize] += 1;
            }
        }
        counts
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = Header {
            magic: MAGIC.to_string(),
            dim: self.dim,
            extent: self.extent.clone(),
            p0_num: self.p0_num,
            p0_den: self.p0_den,
            seed: self.seed,
            rng_id: self.rng_id.clone(),
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        w.write_all(&self.bits)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(mut r: R) -> Result<Self> {
        let mut line = String::new();
        r.read_line(&mut line)?;
        let header: Header = serde_json::from_str(line.trim_end())
            .map_err(|e| Error::Format(format!("bad header: {e}")))?;
        if header.magic != MAGIC {
            return Err(Error::Format(format!("magic {:?} is not {MAGIC}", header.magic)));
        }
        let total = check_shape(header.dim, &header.extent)
            .map_err(|e| Error::Format(e.to_string()))?;
        let mut bits = Vec::with_capacity(total.div_ceil(8));
        r.read_to_end(&mut bits)?;
        if bits.len() != total.div_ceil(8) {
            return Err(Error::Format(format!(
                "expected {} label bytes, found {}",
                total.div_ceil(8),
                bits.len()
            )));
        }
        if header.p0_den == 0 || header.p0_num == 0 || header.p0_num >= header.p0_den {
            return Err(Error::Format(format!(
                "p0 = {}/{} is not in (0,1)",
                header.p0_num, header.p0_den
            )));
        }
        Ok(Self {
            dim: header.dim,
            extent: header.extent,
            bits,
            p0_num: header.p0_num,
            p0_den: header.p0_den,
            seed: header.seed,
            rng_id: header.rng_id,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

/// Half-width of a `z`-sigma binomial band for a fraction estimated from `n` draws.
pub fn binomial_band(p: f64, n: usize, z: f64) -> f64 {
    z * (p * (1.0 - p) / n as f64).sqrt()
}
