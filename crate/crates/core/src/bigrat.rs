//! Fixed-denominator exact points on the circle and the torus.
//!
//! An integer matrix acting modulo 1 maps the lattice `(1/q)·Zᵈ` into itself,
//! so a point `a/q` never needs more than the bits of `q`. Every step is a
//! handful of big-integer multiply-adds whose size does not depend on how
//! long the trajectory already is.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::RngCore;

use crate::error::{invalid, Result};

/// Largest safe prime below 2¹²⁸ (`2¹²⁸ − 15449`). Coprime to every map
/// multiplier, and every unit other than ±1 has multiplicative order at
/// least `(q−1)/2`, so expanding circle maps never collapse a sampled point
/// onto 0.
pub fn safe_prime_128() -> BigUint {
    (BigUint::one() << 128u32) - BigUint::from(15449u32)
}

/// `2¹²⁸`, the default denominator for torus points. Unimodular matrices are
/// invertible modulo any power of two, so the orbit never degenerates.
pub fn pow2_128() -> BigUint {
    BigUint::one() << 128u32
}

/// Square nonnegative integer matrix, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    dim: usize,
    entries: Vec<u64>,
}

impl IntMatrix {
    pub fn new(dim: usize, entries: Vec<u64>) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return invalid(format!(
                "matrix of dimension {dim} needs {} entries, got {}",
                dim * dim,
                entries.len()
            ));
        }
        Ok(Self { dim, entries })
    }

    /// The 1×1 matrix `[a]`.
    pub fn scalar(a: u64) -> Self {
        Self {
            dim: 1,
            entries: vec![a],
        }
    }

    pub fn from_rows2(rows: [[u64; 2]; 2]) -> Self {
        Self {
            dim: 2,
            entries: vec![rows[0][0], rows[0][1], rows[1][0], rows[1][1]],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> u64 {
        self.entries[row * self.dim + col]
    }

    pub fn row_sum(&self, row: usize) -> u64 {
        self.entries[row * self.dim..(row + 1) * self.dim]
            .iter()
            .sum()
    }

    pub fn max_row_sum(&self) -> u64 {
        (0..self.dim).map(|r| self.row_sum(r)).max().unwrap_or(0)
    }

    /// Determinant as a signed integer (dimensions 1 and 2 only).
    pub fn det(&self) -> i128 {
        match self.dim {
            1 => self.entries[0] as i128,
            2 => {
                self.entries[0] as i128 * self.entries[3] as i128
                    - self.entries[1] as i128 * self.entries[2] as i128
            }
            _ => unimplemented!("determinant only needed for d ≤ 2"),
        }
    }
}

/// A point of `[0,1)ᵈ` with rational coordinates over one shared denominator.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExactPoint {
    numerators: Vec<BigUint>,
    denominator: BigUint,
}

impl ExactPoint {
    /// Builds `(numerators[i] / denominator)ᵢ`; each numerator must lie in
    /// `[0, denominator)` and the denominator must be at least 2.
    pub fn new(numerators: Vec<BigUint>, denominator: BigUint) -> Result<Self> {
        if denominator < BigUint::from(2u32) {
            return invalid(format!("denominator must be ≥ 2, got {denominator}"));
        }
        if numerators.is_empty() {
            return invalid("a point needs at least one coordinate");
        }
        if let Some(bad) = numerators.iter().find(|a| **a >= denominator) {
            return invalid(format!(
                "numerator {bad} is outside [0, {denominator})"
            ));
        }
        Ok(Self {
            numerators,
            denominator,
        })
    }

    pub fn from_u64(numerators: &[u64], denominator: u64) -> Result<Self> {
        Self::new(
            numerators.iter().map(|&a| BigUint::from(a)).collect(),
            BigUint::from(denominator),
        )
    }

    /// Uniform draw from the interior grid `{1,…,q−1}ᵈ / q`.
    pub fn sample_interior<R: RngCore + ?Sized>(
        rng: &mut R,
        dim: usize,
        denominator: &BigUint,
    ) -> Result<Self> {
        if *denominator < BigUint::from(2u32) {
            return invalid(format!("denominator must be ≥ 2, got {denominator}"));
        }
        let upper = denominator - BigUint::one();
        let numerators = (0..dim)
            .map(|_| uniform_below(rng, &upper) + BigUint::one())
            .collect();
        Ok(Self {
            numerators,
            denominator: denominator.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.numerators.len()
    }

    pub fn numerators(&self) -> &[BigUint] {
        &self.numerators
    }

    pub fn denominator(&self) -> &BigUint {
        &self.denominator
    }

    /// True when some coordinate is exactly 0.
    pub fn touches_boundary(&self) -> bool {
        self.numerators.iter().any(Zero::is_zero)
    }

    pub fn coordinate_f64(&self, i: usize) -> f64 {
        ratio_to_f64(&self.numerators[i], &self.denominator)
    }

    /// Replaces `x` by the fractional part of `Mx` and writes the integer part
    /// into `jump`.
    pub fn apply(&mut self, m: &IntMatrix, jump: &mut [u64]) -> Result<()> {
        let d = self.dim();
        if m.dim() != d || jump.len() != d {
            return invalid(format!(
                "dimension mismatch: point {d}, matrix {}, jump buffer {}",
                m.dim(),
                jump.len()
            ));
        }
        let images: Vec<BigUint> = (0..d)
            .map(|r| {
                let mut acc = BigUint::zero();
                for (c, a) in self.numerators.iter().enumerate() {
                    let w = m.get(r, c);
                    if w != 0 {
                        acc += a * w;
                    }
                }
                acc
            })
            .collect();
        for (r, mut y) in images.into_iter().enumerate() {
            // y < row_sum · q, so the quotient is small.
            if m.row_sum(r) <= 8 {
                let mut k = 0u64;
                while y >= self.denominator {
                    y -= &self.denominator;
                    k += 1;
                }
                jump[r] = k;
            } else {
                let (k, rem) = y.div_rem(&self.denominator);
                jump[r] = k.to_u64().expect("jump bounded by matrix row sum");
                y = rem;
            }
            self.numerators[r] = y;
        }
        Ok(())
    }
}

/// Pure form of [`ExactPoint::apply`]: returns `(⌊Mx⌋, Mx mod 1)`.
pub fn affine_step(m: &IntMatrix, x: &ExactPoint) -> Result<(Vec<u64>, ExactPoint)> {
    let mut frac = x.clone();
    let mut jump = vec![0; x.dim()];
    frac.apply(m, &mut jump)?;
    Ok((jump, frac))
}

/// Round-half-even decimal rendering with `digits` fractional digits.
/// Coordinates of a multi-dimensional point are joined with `,`.
pub fn to_decimal(x: &ExactPoint, digits: usize) -> String {
    x.numerators
        .iter()
        .map(|a| ratio_to_decimal(a, &x.denominator, digits))
        .collect::<Vec<_>>()
        .join(",")
}

/// Round-half-even decimal rendering of `num / den` for nonnegative values.
pub fn ratio_to_decimal(num: &BigUint, den: &BigUint, digits: usize) -> String {
    let scale = BigUint::from(10u32).pow(digits as u32);
    let (mut q, r) = (num * &scale).div_rem(den);
    let twice = r << 1u32;
    if twice > *den || (twice == *den && q.is_odd()) {
        q += 1u32;
    }
    let (int_part, frac_part) = q.div_rem(&scale);
    if digits == 0 {
        return int_part.to_string();
    }
    format!("{int_part}.{:0>width$}", frac_part.to_string(), width = digits)
}

pub(crate) fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    // Align so that the denominator keeps 64 significant bits; the quotient is
    // then accurate to a couple of ulps.
    let shift = den.bits().saturating_sub(64);
    let n = (num >> shift).to_f64().unwrap_or(f64::INFINITY);
    let d = (den >> shift).to_f64().unwrap_or(f64::INFINITY);
    n / d
}

/// Uniform integer in `[0, bound)` by rejection on the bit length of `bound`.
pub(crate) fn uniform_below<R: RngCore + ?Sized>(rng: &mut R, bound: &BigUint) -> BigUint {
    assert!(!bound.is_zero(), "empty range");
    let bits = bound.bits();
    let words = bits.div_ceil(64) as usize;
    let top_mask = if bits % 64 == 0 {
        u64::MAX
    } else {
        (1u64 << (bits % 64)) - 1
    };
    loop {
        let mut digits: Vec<u64> = (0..words).map(|_| rng.next_u64()).collect();
        if let Some(last) = digits.last_mut() {
            *last &= top_mask;
        }
        let v = BigUint::from_slice(
            &digits
                .iter()
                .flat_map(|w| [*w as u32, (*w >> 32) as u32])
                .collect::<Vec<_>>(),
        );
        if v < *bound {
            return v;
        }
    }
}
