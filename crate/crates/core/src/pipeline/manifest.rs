use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::with_capacity(1 << 20, file);
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    loop {
        let n = reader.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// What a stage consumed and produced. Written as `<stage>.manifest` in the
/// work directory, one `key value...` record per line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub stage: String,
    /// Digest of this stage's settings chained with its upstream stages'.
    pub config_digest: String,
    pub inputs: Vec<(String, String)>,
    pub outputs: Vec<(String, String)>,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "stage {}", self.stage);
        let _ = writeln!(out, "config {}", self.config_digest);
        for (name, digest) in &self.inputs {
            let _ = writeln!(out, "input {name} {digest}");
        }
        for (name, digest) in &self.outputs {
            let _ = writeln!(out, "output {name} {digest}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = Manifest {
            stage: String::new(),
            config_digest: String::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        };
        for line in text.lines() {
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts.as_slice() {
                ["stage", s] => m.stage = s.to_string(),
                ["config", d] => m.config_digest = d.to_string(),
                ["input", n, d] => m.inputs.push((n.to_string(), d.to_string())),
                ["output", n, d] => m.outputs.push((n.to_string(), d.to_string())),
                [] => {}
                _ => return Err(Error::Config(format!("malformed manifest line `{line}`"))),
            }
        }
        if m.stage.is_empty() || m.config_digest.is_empty() {
            return Err(Error::Config("manifest lacks stage or config digest".into()));
        }
        Ok(m)
    }

    pub fn output_digest(&self, name: &str) -> Option<&str> {
        self.outputs.iter().find(|(n, _)| n == name).map(|(_, d)| d.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let m = Manifest {
            stage: "features".into(),
            config_digest: "ab".into(),
            inputs: vec![("derived.csv".into(), "01".into())],
            outputs: vec![("features.csv".into(), "02".into()), ("registry.txt".into(), "03".into())],
        };
        assert_eq!(Manifest::parse(&m.to_text()).unwrap(), m);
        assert_eq!(m.output_digest("registry.txt"), Some("03"));
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
