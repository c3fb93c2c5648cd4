//! Sample files: CSV with a header row, and a raw binary form.
//!
//! Binary layout: `"SBPT"`, row count (u32 LE), column count (u32 LE), four
//! zero bytes, then the values as little-endian f64, row-major.

use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::bridge::Trajectory;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const SAMPLE_MAGIC: &[u8; 4] = b"SBPT";

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

/// Header `x0,x1,...` then one row per sample, full round-trip precision.
pub fn write_samples_csv(w: impl Write, x: &Matrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record((0..x.cols()).map(|j| format!("x{j}")))?;
    for row in x.iter_rows() {
        w.write_record(row.iter().map(|v| format!("{v:e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Read a sample CSV. The header fixes the column count; every data row must
/// match it and hold finite numbers. Errors carry the 1-based line number.
pub fn read_samples_csv(r: impl Read) -> Result<Matrix> {
    let mut rd = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(r);
    let d = rd.headers()?.len();
    if d == 0 || rd.headers()?.iter().all(str::is_empty) {
        return Err(parse_err(1, "expected a header row"));
    }
    let mut data = Vec::new();
    let mut n = 0;
    for rec in rd.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != d {
            return Err(parse_err(line, format!("expected {d} fields, found {}", rec.len())));
        }
        for c in rec.iter() {
            let v: f64 = c.parse().map_err(|_| parse_err(line, format!("not a number: {c:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("non-finite value {v}")));
            }
            data.push(v);
        }
        n += 1;
    }
    Matrix::new(n, d, data)
}

pub fn write_samples_bin(w: impl Write, x: &Matrix) -> Result<()> {
    let n = u32::try_from(x.rows()).map_err(|_| Error::Format("too many rows for the binary format".into()))?;
    let d = u32::try_from(x.cols()).map_err(|_| Error::Format("too many columns for the binary format".into()))?;
    let mut w = BufWriter::new(w);
    w.write_all(SAMPLE_MAGIC)?;
    w.write_all(&n.to_le_bytes())?;
    w.write_all(&d.to_le_bytes())?;
    w.write_all(&[0u8; 4])?;
    for v in x.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples_bin(mut r: impl Read) -> Result<Matrix> {
    let mut head = [0u8; 16];
    r.read_exact(&mut head).map_err(|_| Error::Format("sample file shorter than its 16-byte header".into()))?;
    if &head[..4] != SAMPLE_MAGIC {
        return Err(Error::Format("missing SBPT magic".into()));
    }
    let n = u32::from_le_bytes(head[4..8].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != n * d * 8 {
        return Err(Error::Format(format!(
            "header promises {n} x {d} values, file holds {} bytes of data",
            bytes.len()
        )));
    }
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Matrix::new(n, d, data)
}

/// Write `<stem>.csv` and `<stem>.bin` side by side.
pub fn save_samples(stem: &Path, x: &Matrix) -> Result<()> {
    write_samples_csv(std::fs::File::create(stem.with_extension("csv"))?, x)?;
    write_samples_bin(std::fs::File::create(stem.with_extension("bin"))?, x)
}

/// Load samples, choosing the format by magic bytes.
pub fn load_samples(path: &Path) -> Result<Matrix> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(SAMPLE_MAGIC) {
        read_samples_bin(&bytes[..])
    } else {
        read_samples_csv(&bytes[..])
    }
}

/// Long-format trajectory dump: `stage,step,particle,x0,...`.
pub fn write_trajectory_csv(w: impl Write, traj: &Trajectory) -> Result<()> {
    let mut w = BufWriter::new(w);
    let d = traj.frames.first().map_or(0, |f| f.2.cols());
    let mut header = vec!["stage".to_string(), "step".into(), "particle".into()];
    header.extend((0..d).map(|j| format!("x{j}")));
    writeln!(w, "{}", header.join(","))?;
    for (stage, step, x) in &traj.frames {
        for (p, row) in x.iter_rows().enumerate() {
            write!(w, "{stage},{step},{p}")?;
            for v in row {
                write!(w, ",{v:e}")?;
            }
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}
