//! Flag value parsers.

use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Signed};
use qwalk_core::model2d::Mat2;
use qwalk_core::Rational;

use crate::error::{usage, CliResult};

/// `"3/7"`, `"2"` or a finite decimal such as `"0.25"`, read exactly.
pub fn rational(s: &str) -> CliResult<Rational> {
    let s = s.trim();
    if let Ok(r) = Rational::from_str(s) {
        return Ok(r);
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let Some((int, frac)) = body.split_once('.') else {
        return usage(format!("cannot read {s:?} as a fraction or decimal"));
    };
    let digits_ok = |t: &str| t.chars().all(|c| c.is_ascii_digit());
    if (int.is_empty() && frac.is_empty()) || !digits_ok(int) || !digits_ok(frac) {
        return usage(format!("cannot read {s:?} as a fraction or decimal"));
    }
    let num = BigInt::from_str(&format!("{int}{frac}")).expect("validated digits");
    let den = BigInt::from(10u8).pow(frac.len() as u32);
    let r = Rational::new(num, den);
    Ok(if neg { -r } else { r })
}

/// A probability strictly inside (0, 1).
pub fn probability(s: &str) -> CliResult<Rational> {
    let p = rational(s)?;
    if !p.is_positive() || p >= Rational::one() {
        return usage(format!("p0 must lie strictly between 0 and 1, got {s}"));
    }
    Ok(p)
}

/// `"a,b;c,d"` with nonnegative integer entries.
pub fn matrix2(s: &str) -> CliResult<Mat2> {
    let rows: Vec<&str> = s.split(';').collect();
    if rows.len() != 2 {
        return usage(format!("matrix {s:?} must have the form a,b;c,d"));
    }
    let mut m = [[0u64; 2]; 2];
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<&str> = row.split(',').collect();
        if cells.len() != 2 {
            return usage(format!("matrix {s:?} must have the form a,b;c,d"));
        }
        for (j, c) in cells.iter().enumerate() {
            m[i][j] = c
                .trim()
                .parse()
                .map_err(|_| crate::error::CliError::Usage(format!("matrix entry {c:?} is not a nonnegative integer")))?;
        }
    }
    Ok(m)
}

pub fn multiplier(s: &str) -> CliResult<u64> {
    s.trim()
        .parse()
        .map_err(|_| crate::error::CliError::Usage(format!("1D map multiplier {s:?} must be an integer")))
}

/// `"N"` or `"N,M"`; a single value is repeated for every axis.
pub fn extent(s: &str, dim: usize) -> CliResult<Vec<usize>> {
    let parts: Result<Vec<usize>, _> = s.split(',').map(|p| p.trim().parse::<usize>()).collect();
    let Ok(parts) = parts else {
        return usage(format!("extent {s:?} must be a positive integer or a comma list"));
    };
    match parts.len() {
        1 => Ok(vec![parts[0]; dim]),
        n if n == dim => Ok(parts),
        _ => usage(format!("extent {s:?} does not match dimension {dim}")),
    }
}
