//! Tensor files.
//!
//! Binary layout: the magic bytes `TTEN1\0`, the order `d` as a little-endian
//! `u32`, `d` little-endian `u64` dimensions, then the entries as little-endian
//! `f64` in colexicographic order. The text layout is a `dims: n1 n2 ..` line
//! followed by whitespace-separated entries in the same order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Result, TubalError};
use crate::tensor::DenseTensor;

pub const MAGIC: &[u8; 6] = b"TTEN1\0";

pub fn write_binary<W: Write>(x: &DenseTensor, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(x.order() as u32).to_le_bytes())?;
    for &n in x.dims() {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for &v in x.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn bad(message: impl Into<String>) -> TubalError {
    TubalError::Parse {
        line: 0,
        message: message.into(),
    }
}

pub fn read_binary<R: Read>(mut r: R) -> Result<DenseTensor> {
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("missing TTEN1 magic"));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let d = u32::from_le_bytes(b4) as usize;
    if d > 64 {
        return Err(bad(format!("implausible order {d}")));
    }
    let mut b8 = [0u8; 8];
    let mut dims = Vec::with_capacity(d);
    for _ in 0..d {
        r.read_exact(&mut b8)?;
        dims.push(usize::try_from(u64::from_le_bytes(b8)).map_err(|_| bad("dimension overflow"))?);
    }
    let len = dims
        .iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .ok_or_else(|| bad("dimension product overflows"))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != len * 8 {
        return Err(bad(format!(
            "payload holds {} bytes, expected {}",
            bytes.len(),
            len * 8
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    DenseTensor::new(dims, data)
}

pub fn write_text<W: Write>(x: &DenseTensor, mut w: W) -> Result<()> {
    let dims: Vec<String> = x.dims().iter().map(|n| n.to_string()).collect();
    writeln!(w, "dims: {}", dims.join(" "))?;
    for row in x.data().chunks(x.n1()) {
        let vals: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", vals.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_text(src: &str) -> Result<DenseTensor> {
    let mut lines = src
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let (hline, header) = lines.next().ok_or_else(|| bad("empty tensor file"))?;
    let rest = header
        .trim()
        .strip_prefix("dims:")
        .ok_or(TubalError::Parse {
            line: hline + 1,
            message: "expected `dims:` header".into(),
        })?;
    let dims = rest
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>().map_err(|e| TubalError::Parse {
                line: hline + 1,
                message: format!("bad dimension `{t}`: {e}"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut data = Vec::new();
    for (ln, line) in lines {
        for tok in line.split_whitespace() {
            data.push(tok.parse::<f64>().map_err(|e| TubalError::Parse {
                line: ln + 1,
                message: format!("bad value `{tok}`: {e}"),
            })?);
        }
    }
    DenseTensor::new(dims, data)
}

pub fn read_text<R: Read>(mut r: R) -> Result<DenseTensor> {
    let mut s = String::new();
    r.read_to_string(&mut s)?;
    parse_text(&s)
}

/// Reads either layout, detected from the leading bytes.
pub fn load_tensor(path: impl AsRef<Path>) -> Result<DenseTensor> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.starts_with(MAGIC) {
        read_binary(bytes.as_slice())
    } else {
        let s = String::from_utf8(bytes).map_err(|_| bad("neither binary nor UTF-8 text"))?;
        parse_text(&s)
    }
}

/// Writes the binary layout, or the text layout when the extension is `.txt`.
pub fn save_tensor(x: &DenseTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let w = BufWriter::new(File::create(path)?);
    if path.extension().is_some_and(|e| e == "txt") {
        write_text(x, w)
    } else {
        write_binary(x, w)
    }
}

pub fn load_binary(path: impl AsRef<Path>) -> Result<DenseTensor> {
    read_binary(BufReader::new(File::open(path)?))
}
