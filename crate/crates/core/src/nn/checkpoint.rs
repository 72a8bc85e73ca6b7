//! Versioned text container of named tensors.
//!
//! ```text
//! evood-checkpoint 1
//! meta <key> <value to end of line>
//! tensor <name> <rank> <dim_0> ... <dim_{rank-1}>
//! <values separated by single spaces>
//! end
//! ```
//!
//! Values use Rust's shortest round-trip `f64` formatting, so a write/read
//! cycle is bit-exact. Keys and names contain no whitespace. Lines end in LF.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::params::ModelParams;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &str = "evood-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub meta: BTreeMap<String, String>,
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        self.meta.insert(key.to_string(), value.to_string());
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.get(key).map(String::as_str)
    }

    /// Adds every tensor of `params` as `<prefix>/<name>`, plus the init seed.
    pub fn insert_params(&mut self, prefix: &str, params: &ModelParams) {
        self.set_meta(&format!("{prefix}.seed"), params.seed());
        for (name, t) in params.iter() {
            self.tensors
                .push((format!("{prefix}/{name}"), t.detached()));
        }
    }

    pub fn has_params(&self, prefix: &str) -> bool {
        let p = format!("{prefix}/");
        self.tensors.iter().any(|(n, _)| n.starts_with(&p))
    }

    /// Rebuilds the parameter set stored under `prefix`, in stored order.
    pub fn extract_params(&self, prefix: &str) -> Result<ModelParams> {
        let seed = self
            .meta(&format!("{prefix}.seed"))
            .and_then(|s| s.parse().ok())
            .unwrap_or(0);
        let p = format!("{prefix}/");
        let mut params = ModelParams::new(seed);
        for (name, t) in &self.tensors {
            if let Some(rest) = name.strip_prefix(&p) {
                params.register(rest, t.clone())?;
            }
        }
        if params.is_empty() {
            return Err(Error::Config(format!(
                "checkpoint has no parameters under `{prefix}`"
            )));
        }
        Ok(params)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{MAGIC} {VERSION}\n");
        for (k, v) in &self.meta {
            let _ = writeln!(s, "meta {k} {v}");
        }
        for (name, t) in &self.tensors {
            let _ = write!(s, "tensor {name} {}", t.shape().len());
            for d in t.shape() {
                let _ = write!(s, " {d}");
            }
            s.push('\n');
            let mut first = true;
            for v in t.values() {
                if !first {
                    s.push(' ');
                }
                first = false;
                let _ = write!(s, "{v:?}");
            }
            s.push('\n');
        }
        s.push_str("end\n");
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (ln, header) = lines
            .next()
            .ok_or_else(|| err(1, "empty checkpoint".into()))?;
        let mut h = header.split_whitespace();
        if h.next() != Some(MAGIC) {
            return Err(err(ln, format!("not a checkpoint (expected `{MAGIC}`)")));
        }
        match h.next().and_then(|v| v.parse::<u32>().ok()) {
            Some(VERSION) => {}
            other => return Err(err(ln, format!("unsupported version {other:?}"))),
        }
        let mut ck = Checkpoint::new();
        let mut ended = false;
        while let Some((ln, line)) = lines.next() {
            if line == "end" {
                ended = true;
                break;
            }
            if let Some(rest) = line.strip_prefix("meta ") {
                let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                ck.meta.insert(k.to_string(), v.to_string());
            } else if let Some(rest) = line.strip_prefix("tensor ") {
                let mut parts = rest.split_whitespace();
                let name = parts
                    .next()
                    .ok_or_else(|| err(ln, "tensor without name".into()))?;
                let nums: Vec<usize> = parts
                    .map(|p| {
                        p.parse()
                            .map_err(|_| err(ln, format!("bad dimension `{p}`")))
                    })
                    .collect::<Result<_>>()?;
                let (rank, dims) = nums
                    .split_first()
                    .ok_or_else(|| err(ln, "tensor without rank".into()))?;
                if *rank != dims.len() {
                    return Err(err(ln, format!("rank {rank} but {} dims", dims.len())));
                }
                let (vln, vline) = lines
                    .next()
                    .ok_or_else(|| err(ln, format!("tensor `{name}` has no value line")))?;
                let values: Vec<f64> = vline
                    .split(' ')
                    .filter(|s| !s.is_empty())
                    .map(|v| v.parse().map_err(|_| err(vln, format!("bad value `{v}`"))))
                    .collect::<Result<_>>()?;
                let t = Tensor::new(dims.to_vec(), values).map_err(|e| err(vln, e.to_string()))?;
                ck.tensors.push((name.to_string(), t));
            } else {
                return Err(err(ln, format!("unexpected line `{line}`")));
            }
        }
        if !ended {
            return Err(err(
                text.lines().count(),
                "missing `end` marker (truncated file?)".into(),
            ));
        }
        Ok(ck)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}
