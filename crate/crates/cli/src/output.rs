//! Writers for the JSON and CSV artifacts.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_traits::ToPrimitive;
use qwalk_core::Rational;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliResult;

/// Lowest-terms fraction, `"p/q"` or an integer.
pub fn frac(r: &Rational) -> String {
    r.to_string()
}

pub fn fracs(rs: &[Rational]) -> Vec<String> {
    rs.iter().map(frac).collect()
}

pub fn dec(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn decs(rs: &[Rational]) -> Vec<f64> {
    rs.iter().map(dec).collect()
}

/// Pretty JSON with a trailing newline.
pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json(path: &Path) -> CliResult<serde_json::Value> {
    Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
}

/// CSV writer; the header row is written up front and the csv crate ends
/// every record with a newline.
pub fn csv_writer(path: &Path, header: &[&str]) -> CliResult<csv::Writer<BufWriter<File>>> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(header)?;
    Ok(w)
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let mut hasher = Sha256::new();
    let mut f = File::open(path)?;
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let k = f.read(&mut buf)?;
        if k == 0 {
            break;
        }
        hasher.update(&buf[..k]);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

/// `PREFIX.suffix`, keeping any dots already in the prefix.
pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

pub fn file_name(path: &Path) -> String {
    path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default()
}
