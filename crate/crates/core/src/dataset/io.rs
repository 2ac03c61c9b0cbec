//! Embedding files.
//!
//! Binary layout (little-endian): magic `FDME`, `u32` version (1), `u64` n,
//! `u64` d, `u8` label flag, `n·d` `f64` values row-major, then `n` `u32`
//! labels when the flag is 1.
//!
//! CSV layout: a header row, one row per vector, and an optional trailing
//! column named `label`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::EmbeddingSet;
use crate::error::{Error, Result};
use crate::kernel::Matrix;

const MAGIC: &[u8; 4] = b"FDME";
const VERSION: u32 = 1;

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Reads a `.csv` file as CSV and anything else as the binary format.
pub fn read_embeddings(path: &Path) -> Result<EmbeddingSet> {
    let file = BufReader::new(File::open(path)?);
    let set = if is_csv(path) {
        read_csv(file)?
    } else {
        read_binary(file)?
    };
    Ok(set.with_name(stem(path)))
}

/// Writes CSV for a `.csv` path, the binary format otherwise.
pub fn write_embeddings(set: &EmbeddingSet, path: &Path) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    if is_csv(path) {
        write_csv(set, &mut file)?;
    } else {
        write_binary(set, &mut file)?;
    }
    file.flush()?;
    Ok(())
}

fn read_exact_or_truncated<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Truncated(what.to_string()),
        _ => Error::Io(e),
    })
}

pub fn read_binary<R: Read>(mut r: R) -> Result<EmbeddingSet> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| Error::NotEmbeddingFile)?;
    if &magic != MAGIC {
        return Err(Error::NotEmbeddingFile);
    }
    let mut header = [0u8; 21];
    read_exact_or_truncated(&mut r, &mut header, "header")?;
    let version = u32::from_le_bytes(header[0..4].try_into().unwrap());
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let n = u64::from_le_bytes(header[4..12].try_into().unwrap());
    let d = u64::from_le_bytes(header[12..20].try_into().unwrap());
    let labeled = match header[20] {
        0 => false,
        1 => true,
        f => return Err(Error::InvalidArgument(format!("bad label flag {f}"))),
    };
    let count = n
        .checked_mul(d)
        .and_then(|c| usize::try_from(c).ok())
        .filter(|c| c.checked_mul(8).is_some())
        .ok_or_else(|| Error::InvalidArgument(format!("implausible shape {n}x{d}")))?;
    let (n, d) = (n as usize, d as usize);

    // read in chunks so a lying header cannot force a huge allocation up front
    let mut data = Vec::new();
    let mut chunk = vec![0u8; 8 * 4096];
    let mut remaining = count;
    while remaining > 0 {
        let take = remaining.min(4096);
        read_exact_or_truncated(&mut r, &mut chunk[..take * 8], "values")?;
        data.extend(
            chunk[..take * 8]
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap())),
        );
        remaining -= take;
    }
    let labels = if labeled {
        let mut labels = Vec::new();
        let mut buf = [0u8; 4];
        for _ in 0..n {
            read_exact_or_truncated(&mut r, &mut buf, "labels")?;
            labels.push(u32::from_le_bytes(buf));
        }
        Some(labels)
    } else {
        None
    };
    EmbeddingSet::new(Matrix::from_vec(n, d, data)?, labels, "")
}

pub fn write_binary<W: Write>(set: &EmbeddingSet, w: &mut W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(set.len() as u64).to_le_bytes())?;
    w.write_all(&(set.dim() as u64).to_le_bytes())?;
    w.write_all(&[u8::from(set.labels().is_some())])?;
    for v in set.vectors().as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    if let Some(labels) = set.labels() {
        for l in labels {
            w.write_all(&l.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<EmbeddingSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(r);
    let headers = reader.headers().map_err(|e| Error::Csv(e.to_string()))?.clone();
    if headers.is_empty() {
        return Err(Error::Csv("missing header row".into()));
    }
    let labeled = headers.iter().next_back() == Some("label");
    let width = headers.len();
    let d = width - usize::from(labeled);
    if d == 0 {
        return Err(Error::Csv("no value columns".into()));
    }
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
        if rec.len() != width {
            return Err(Error::RaggedCsv {
                row: row + 1,
                expected: width,
                found: rec.len(),
            });
        }
        for (col, field) in rec.iter().take(d).enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Csv(format!("row {}, column {col}: not a number: '{field}'", row + 1)))?;
            data.push(v);
        }
        if labeled {
            let field = rec.get(d).unwrap_or_default().trim();
            labels.push(
                field
                    .parse::<u32>()
                    .map_err(|_| Error::Csv(format!("row {}: bad label '{field}'", row + 1)))?,
            );
        }
    }
    let n = data.len() / d;
    EmbeddingSet::new(Matrix::from_vec(n, d, data)?, labeled.then_some(labels), "")
}

/// Values are written with shortest round-trip formatting, so a read-back is
/// exact.
pub fn write_csv<W: Write>(set: &EmbeddingSet, w: &mut W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    let mut header: Vec<String> = (0..set.dim()).map(|j| format!("x{j}")).collect();
    if set.labels().is_some() {
        header.push("label".into());
    }
    writer.write_record(&header).map_err(|e| Error::Csv(e.to_string()))?;
    let mut rec: Vec<String> = Vec::with_capacity(header.len());
    for (i, row) in set.vectors().row_iter().enumerate() {
        rec.clear();
        rec.extend(row.iter().map(f64::to_string));
        if let Some(labels) = set.labels() {
            rec.push(labels[i].to_string());
        }
        writer.write_record(&rec).map_err(|e| Error::Csv(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labeled() -> EmbeddingSet {
        let m = Matrix::from_rows(&[[0.1, -2.5e-9, 3.0], [1e300, 0.0, -7.25]]).unwrap();
        EmbeddingSet::new(m, Some(vec![4, 0]), "").unwrap()
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let set = labeled();
        let mut buf = Vec::new();
        write_binary(&set, &mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 21 + 6 * 8 + 2 * 4);
        assert_eq!(read_binary(&buf[..]).unwrap(), set);
    }

    #[test]
    fn binary_rejects_bad_input() {
        assert!(matches!(read_binary(&b"NOPE"[..]), Err(Error::NotEmbeddingFile)));
        assert!(matches!(read_binary(&b""[..]), Err(Error::NotEmbeddingFile)));
        let mut buf = Vec::new();
        write_binary(&labeled(), &mut buf).unwrap();
        assert!(matches!(read_binary(&buf[..buf.len() - 3]), Err(Error::Truncated(_))));
        buf[4] = 9;
        assert!(matches!(read_binary(&buf[..]), Err(Error::UnsupportedVersion(9))));
    }

    #[test]
    fn csv_round_trip() {
        let set = labeled();
        let mut buf = Vec::new();
        write_csv(&set, &mut buf).unwrap();
        assert!(buf.starts_with(b"x0,x1,x2,label\n"));
        assert_eq!(read_csv(&buf[..]).unwrap(), set);
    }

    #[test]
    fn csv_without_labels_and_ragged() {
        let set = read_csv(&b"a,b\n1,2\n3,4\n"[..]).unwrap();
        assert_eq!(set.vectors().shape(), (2, 2));
        assert!(set.labels().is_none());
        let err = read_csv(&b"a,b\n1,2\n3\n"[..]).unwrap_err();
        assert!(matches!(
            err,
            Error::RaggedCsv {
                row: 2,
                expected: 2,
                found: 1
            }
        ));
        assert!(read_csv(&b"a,b\n1,x\n"[..]).is_err());
    }
}
