//! Line-delimited record files and content hashing.
//!
//! Every JSONL artifact may start with one header object keyed by
//! [`HEADER_KEY`]; readers skip it.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const HEADER_KEY: &str = "#header";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the canonical JSON form of a value.
pub fn json_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable value");
    sha256_hex(&bytes)
}

pub fn write_header<W: Write, H: Serialize>(out: &mut W, header: &H) -> Result<()> {
    let mut map = serde_json::Map::new();
    map.insert(HEADER_KEY.to_owned(), serde_json::to_value(header)?);
    serde_json::to_writer(&mut *out, &map)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn write_jsonl<W: Write, T: Serialize>(out: &mut W, records: &[T]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn is_header(line: &str) -> bool {
    line.trim_start().starts_with(&format!("{{\"{HEADER_KEY}\""))
}

pub fn read_jsonl<R: BufRead, T: DeserializeOwned>(input: R, path: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || (i == 0 && is_header(&line)) {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Record {
            path: path.to_owned(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Returns the header object of a JSONL artifact, if it has one.
pub fn read_header<R: BufRead>(mut input: R) -> Result<Option<serde_json::Value>> {
    let mut first = String::new();
    input.read_line(&mut first)?;
    if !is_header(&first) {
        return Ok(None);
    }
    let mut v: serde_json::Value = serde_json::from_str(&first)?;
    Ok(v.get_mut(HEADER_KEY).map(serde_json::Value::take))
}
