//! CSV output: UTF-8, header row, LF line endings, `.` decimals.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Shortest decimal that reads back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub struct CsvOut {
    path: PathBuf,
    inner: csv::Writer<BufWriter<File>>,
}

impl CsvOut {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let inner = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(BufWriter::new(file));
        Ok(Self {
            path: path.to_path_buf(),
            inner,
        })
    }

    pub fn row<S: AsRef<[u8]>>(&mut self, fields: &[S]) -> Result<()> {
        self.inner.write_record(fields).map_err(|e| self.fail(e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::io(&self.path, e))
    }

    fn fail(&self, e: csv::Error) -> Error {
        let source = match e.into_kind() {
            csv::ErrorKind::Io(io) => io,
            other => std::io::Error::new(std::io::ErrorKind::Other, format!("{other:?}")),
        };
        Error::io(&self.path, source)
    }
}

/// Reads a CSV with a header into `(header, rows)`.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let to_err = |e: csv::Error| {
        let offset = e.position().map_or(0, |p| p.byte());
        Error::Format {
            path: path.to_path_buf(),
            offset,
            reason: e.to_string(),
        }
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let header = reader.headers().map_err(to_err)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        rows.push(rec.map_err(to_err)?.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_use_point_and_round_trip() {
        for v in [0.1, 96.5, 1e-6, 1.0 / 3.0, 0.0] {
            let s = fmt_f64(v);
            assert!(!s.contains(','));
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn written_files_use_lf_and_read_back() {
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("x.csv");
        let mut out = CsvOut::create(&p).unwrap();
        out.row(&["a", "b"]).unwrap();
        out.row(&["1", "x,y"]).unwrap();
        out.finish().unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "a,b\n1,\"x,y\"\n");
        let (h, rows) = read_csv(&p).unwrap();
        assert_eq!(h, vec!["a", "b"]);
        assert_eq!(rows, vec![vec!["1".to_string(), "x,y".to_string()]]);
        assert!(matches!(read_csv(&tmp.path().join("missing.csv")), Err(Error::Io { .. })));
    }
}
