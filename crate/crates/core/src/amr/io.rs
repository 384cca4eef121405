//! Dataset files.
//!
//! # IVLA binary layout (version 1, all little-endian)
//!
//! | bytes            | content                                              |
//! |------------------|------------------------------------------------------|
//! | 4                | magic `b"IVLA"`                                      |
//! | 4                | version `u32` (= 1)                                  |
//! | 12               | logical grid extent, 3 × `u32`                       |
//! | 4                | Hilbert bits `u32`                                   |
//! | 8                | cell count `n`, `u64`                                |
//! | 4                | field count `M`, `u32`                               |
//! | per field        | name length `u16`, UTF-8 name, raw `min` `f32`, raw `max` `f32` |
//! | 13 × n           | cell records: `lower.x`, `lower.y`, `lower.z` `u32`, `level` `u8` |
//! | 4 × n × M        | M arrays of `n` `f32` values, one per field          |
//!
//! Writers emit cells in Hilbert order; readers re-validate and accept any order.
//!
//! # JSON fixtures
//!
//! ```json
//! { "extent": [4, 4, 4],
//!   "cells": [[0, 0, 0, 0], [1, 0, 0, 0]],
//!   "fields": [{ "name": "density", "values": [0.5, 1.0] }] }
//! ```
//!
//! `cells` entries are `[x, y, z, level]`; `extent` is optional and defaults to
//! the cells' bounding box.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{bits_for_extent, Cell, Dataset, ScalarField};
use crate::error::{IvlError, Result};

pub const MAGIC: &[u8; 4] = b"IVLA";
pub const VERSION: u32 = 1;

fn format_err(msg: impl Into<String>) -> IvlError {
    IvlError::Format(msg.into())
}

/// Maps an early EOF onto a readable diagnostic; other IO errors pass through.
fn section<T>(what: &str, r: io::Result<T>) -> Result<T> {
    r.map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            format_err(what)
        } else {
            IvlError::Io(e)
        }
    })
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32(r: &mut impl Read) -> io::Result<f32> {
    Ok(f32::from_bits(read_u32(r)?))
}

struct Header {
    extent: [u32; 3],
    bits: u32,
    n: u64,
    fields: Vec<(String, f32, f32)>,
}

fn read_header(r: &mut impl Read) -> Result<Header> {
    const SHORT: &str = "header too short";
    let mut magic = [0u8; 4];
    section(SHORT, r.read_exact(&mut magic))?;
    if &magic != MAGIC {
        return Err(format_err(format!("bad magic {magic:?}, expected \"IVLA\"")));
    }
    let version = section(SHORT, read_u32(r))?;
    if version != VERSION {
        return Err(format_err(format!("unsupported IVLA version {version}")));
    }
    let mut extent = [0u32; 3];
    for e in &mut extent {
        *e = section(SHORT, read_u32(r))?;
    }
    let bits = section(SHORT, read_u32(r))?;
    let mut nb = [0u8; 8];
    section(SHORT, r.read_exact(&mut nb))?;
    let n = u64::from_le_bytes(nb);
    let m = section(SHORT, read_u32(r))?;
    if m == 0 {
        return Err(format_err("header declares zero fields"));
    }
    let mut fields = Vec::with_capacity(m.min(1024) as usize);
    for _ in 0..m {
        let mut lb = [0u8; 2];
        section(SHORT, r.read_exact(&mut lb))?;
        let mut name = vec![0u8; u16::from_le_bytes(lb) as usize];
        section(SHORT, r.read_exact(&mut name))?;
        let name =
            String::from_utf8(name).map_err(|_| format_err("field name is not valid UTF-8"))?;
        let lo = section(SHORT, read_f32(r))?;
        let hi = section(SHORT, read_f32(r))?;
        fields.push((name, lo, hi));
    }
    Ok(Header {
        extent,
        bits,
        n,
        fields,
    })
}

/// Reads an IVLA stream.
pub fn read_ivla(r: &mut impl Read) -> Result<Dataset> {
    let header = read_header(r)?;
    let expected_bits = bits_for_extent(header.extent).map_err(|e| format_err(e.to_string()))?;
    if header.bits != expected_bits {
        return Err(format_err(format!(
            "header bits {} inconsistent with extent {:?} (expected {expected_bits})",
            header.bits, header.extent
        )));
    }
    let n = usize::try_from(header.n).map_err(|_| format_err("cell count too large"))?;

    let mut cells = Vec::with_capacity(n);
    let mut rec = [0u8; 13];
    for i in 0..n {
        section(
            &format!("cell records truncated at record {i} of {n}"),
            r.read_exact(&mut rec),
        )?;
        let c = |k: usize| u32::from_le_bytes([rec[k], rec[k + 1], rec[k + 2], rec[k + 3]]);
        cells.push(Cell::new([c(0), c(4), c(8)], rec[12]));
    }

    let mut fields = Vec::with_capacity(header.fields.len());
    let mut buf = vec![0u8; 4 * n];
    for (name, lo, hi) in header.fields {
        section(
            &format!("values for field '{name}' truncated"),
            r.read_exact(&mut buf),
        )?;
        let values = buf
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        let field = ScalarField::new(name, values)?;
        if field.range() != (lo, hi) {
            return Err(format_err(format!(
                "field '{}' header range ({lo}, {hi}) differs from data range {:?}",
                field.name(),
                field.range()
            )));
        }
        fields.push(field);
    }

    Dataset::with_extent(header.extent, cells, fields)
}

/// Writes a dataset as IVLA.
pub fn write_ivla(ds: &Dataset, w: &mut impl Write) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for e in ds.extent() {
        w.write_all(&e.to_le_bytes())?;
    }
    w.write_all(&ds.bits().to_le_bytes())?;
    w.write_all(&(ds.len() as u64).to_le_bytes())?;
    w.write_all(&(ds.fields().len() as u32).to_le_bytes())?;
    for f in ds.fields() {
        let name = f.name().as_bytes();
        let len = u16::try_from(name.len())
            .map_err(|_| format_err(format!("field name '{}' too long", f.name())))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(name)?;
        w.write_all(&f.range().0.to_le_bytes())?;
        w.write_all(&f.range().1.to_le_bytes())?;
    }
    for c in ds.cells() {
        for v in c.lower {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&[c.level])?;
    }
    for f in ds.fields() {
        for v in f.values() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonDataset {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    extent: Option<[u32; 3]>,
    cells: Vec<[u32; 4]>,
    fields: Vec<JsonField>,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonField {
    name: String,
    values: Vec<f32>,
}

pub fn from_json(text: &str) -> Result<Dataset> {
    let doc: JsonDataset = serde_json::from_str(text)?;
    let cells = doc
        .cells
        .iter()
        .map(|c| {
            u8::try_from(c[3])
                .map(|level| Cell::new([c[0], c[1], c[2]], level))
                .map_err(|_| format_err(format!("cell level {} does not fit a byte", c[3])))
        })
        .collect::<Result<Vec<_>>>()?;
    let fields = doc
        .fields
        .into_iter()
        .map(|f| ScalarField::new(f.name, f.values))
        .collect::<Result<Vec<_>>>()?;
    match doc.extent {
        Some(extent) => Dataset::with_extent(extent, cells, fields),
        None => Dataset::new(cells, fields),
    }
}

pub fn to_json(ds: &Dataset) -> Result<String> {
    let doc = JsonDataset {
        extent: Some(ds.extent()),
        cells: ds
            .cells()
            .iter()
            .map(|c| [c.lower[0], c.lower[1], c.lower[2], u32::from(c.level)])
            .collect(),
        fields: ds
            .fields()
            .iter()
            .map(|f| JsonField {
                name: f.name().to_owned(),
                values: f.values().to_vec(),
            })
            .collect(),
    };
    Ok(serde_json::to_string(&doc)?)
}

/// Decodes an in-memory IVLA or JSON payload, sniffing the format.
pub fn from_bytes(bytes: &[u8]) -> Result<Dataset> {
    let first = bytes.iter().copied().find(|b| !b.is_ascii_whitespace());
    if first == Some(b'{') {
        let text =
            std::str::from_utf8(bytes).map_err(|_| format_err("JSON dataset is not UTF-8"))?;
        return from_json(text);
    }
    if bytes.len() < MAGIC.len() && MAGIC.starts_with(bytes) {
        return Err(format_err("header too short"));
    }
    if bytes.starts_with(MAGIC) {
        return read_ivla(&mut &bytes[..]);
    }
    Err(format_err("unrecognised dataset format (expected IVLA or JSON)"))
}

pub fn load(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e == "json") {
        return from_json(&std::fs::read_to_string(path)?);
    }
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    let got = r.read(&mut magic)?;
    if got > 0 && magic[0] == b'{' {
        return from_json(&std::fs::read_to_string(path)?);
    }
    read_ivla(&mut magic[..got].chain(r))
}

pub fn save(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e == "json") {
        std::fs::write(path, to_json(ds)?)?;
        return Ok(());
    }
    let mut w = BufWriter::new(File::create(path)?);
    write_ivla(ds, &mut w)
}
