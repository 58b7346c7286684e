//! Artifact files: CSV tables, sorted-key JSON, legacy ASCII VTK grids,
//! binary f64 blobs, and the run manifest recording a hash of each.
//!
//! Floats in CSV are written as `{:.16e}` (17 significant digits), so two
//! runs from the same config produce identical bytes.

mod blob;
mod manifest;
pub mod runs;
mod vtk;

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

pub use blob::{read_blob, write_blob, Blob};
pub use manifest::RunManifest;
pub use vtk::{VtkField, VtkGrid};

use crate::error::{Error, Result};
use crate::geometry::spec::sha256_hex;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub enum CsvValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl CsvValue {
    fn render(&self) -> String {
        match self {
            CsvValue::Int(i) => i.to_string(),
            CsvValue::Float(x) => fmt_f64(*x),
            CsvValue::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for CsvValue {
    fn from(x: f64) -> Self {
        CsvValue::Float(x)
    }
}

impl From<usize> for CsvValue {
    fn from(i: usize) -> Self {
        CsvValue::Int(i as i64)
    }
}

impl From<&str> for CsvValue {
    fn from(s: &str) -> Self {
        CsvValue::Text(s.to_string())
    }
}

impl From<String> for CsvValue {
    fn from(s: String) -> Self {
        CsvValue::Text(s)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<CsvValue>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<CsvValue>) {
        assert_eq!(row.len(), self.header.len(), "row width does not match header");
        self.rows.push(row);
    }

    /// RFC 4180: CRLF line ends, quoting only where needed.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.iter().map(CsvValue::render)).expect("in-memory write");
        }
        w.into_inner().expect("in-memory write")
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().from_reader(bytes);
        let header = r
            .headers()
            .map_err(|e| Error::parse("csv header", e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::parse("csv record", e.to_string()))?;
            rows.push(
                rec.iter()
                    .map(|f| {
                        if let Ok(i) = f.parse::<i64>() {
                            CsvValue::Int(i)
                        } else if let Ok(x) = f.parse::<f64>() {
                            CsvValue::Float(x)
                        } else {
                            CsvValue::Text(f.to_string())
                        }
                    })
                    .collect(),
            );
        }
        Ok(Self { header, rows })
    }
}

/// Pretty JSON with a trailing newline. Object keys come out sorted since
/// `serde_json::Map` is ordered by key.
pub fn json_bytes(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable value");
    s.push('\n');
    s.into_bytes()
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::parse(format!("{} line {} column {}", path.display(), e.line(), e.column()), e.to_string()))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes files below one directory and records each in the manifest.
#[derive(Debug)]
pub struct ArtifactWriter {
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

impl ArtifactWriter {
    pub fn create(dir: &Path, manifest: RunManifest) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        write_file(&path, bytes)?;
        self.manifest.outputs.insert(name.to_string(), sha256_hex(bytes));
        Ok(path)
    }

    pub fn json(&mut self, name: &str, v: &Value) -> Result<PathBuf> {
        self.bytes(name, &json_bytes(v))
    }

    pub fn csv(&mut self, name: &str, t: &CsvTable) -> Result<PathBuf> {
        self.bytes(name, &t.to_bytes())
    }

    pub fn vtk(&mut self, name: &str, g: &VtkGrid) -> Result<PathBuf> {
        self.bytes(name, g.to_string().as_bytes())
    }

    pub fn blob(&mut self, name: &str, b: &Blob) -> Result<PathBuf> {
        self.bytes(name, &b.to_bytes())
    }

    /// Writes the manifest next to the outputs and returns it.
    pub fn finish(self) -> Result<RunManifest> {
        let path = self.dir.join(self.manifest.file_name());
        write_file(&path, &json_bytes(&self.manifest.to_json()))?;
        Ok(self.manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_have_seventeen_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.5), "-2.5000000000000000e0");
        for x in [1.0 / 3.0, 6.02e23, -1e-300, 0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_is_rfc4180() {
        let mut t = CsvTable::new(&["step", "name", "value"]);
        t.push(vec![1usize.into(), "a,b".into(), 0.5.into()]);
        t.push(vec![2usize.into(), "q\"t".into(), (-1.0).into()]);
        let text = String::from_utf8(t.to_bytes()).unwrap();
        assert_eq!(
            text,
            "step,name,value\r\n1,\"a,b\",5.0000000000000000e-1\r\n2,\"q\"\"t\",-1.0000000000000000e0\r\n"
        );
        assert_eq!(CsvTable::parse(text.as_bytes()).unwrap(), t);
    }

    #[test]
    fn json_keys_are_sorted() {
        let v = json!({"zeta": 1, "alpha": {"y": 2, "b": 3}});
        let text = String::from_utf8(json_bytes(&v)).unwrap();
        let a = text.find("alpha").unwrap();
        assert!(a < text.find("zeta").unwrap());
        assert!(text.find("\"b\"").unwrap() < text.find("\"y\"").unwrap());
        assert!(text.ends_with("}\n"));
    }

    #[test]
    fn writer_records_hashes_and_empty_set_is_manifest_only() {
        let dir = tempfile::tempdir().unwrap();
        let w = ArtifactWriter::create(dir.path(), RunManifest::new("test", &[], dir.path(), "h")).unwrap();
        let m = w.finish().unwrap();
        assert!(m.outputs.is_empty());
        let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names, vec![std::ffi::OsString::from("test.manifest.json")]);

        let mut w = ArtifactWriter::create(dir.path(), RunManifest::new("test", &[], dir.path(), "h")).unwrap();
        w.json("a.json", &json!({"x": 1})).unwrap();
        let m = w.finish().unwrap();
        assert_eq!(m.outputs["a.json"], sha256_hex(&fs::read(dir.path().join("a.json")).unwrap()));
    }
}
