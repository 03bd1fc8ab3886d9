//! Line-delimited JSON helpers shared by every dump format.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

pub fn write<T: Serialize, W: Write>(items: &[T], mut out: W) -> io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read<T: DeserializeOwned, R: BufRead>(reader: R) -> io::Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1)))?;
        out.push(item);
    }
    Ok(out)
}

pub fn write_file<T: Serialize>(path: &Path, items: &[T]) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    write(items, BufWriter::new(File::create(path)?))
}

pub fn read_file<T: DeserializeOwned>(path: &Path) -> io::Result<Vec<T>> {
    read(BufReader::new(File::open(path)?))
}
