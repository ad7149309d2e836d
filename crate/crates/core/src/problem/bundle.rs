//! On-disk problem bundles.
//!
//! A bundle is a directory holding `A.mtx`, `b.txt`, optional `x_star.txt`
//! and `r.txt` (one value per line), and `meta.json`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mtx::{read_matrix_market, write_matrix_market};
use super::{LsProblem, ProblemError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub label: String,
    pub seed: Option<u64>,
    pub generator: String,
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ProblemError + '_ {
    move |source| ProblemError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_vector(path: &Path, v: &[f64]) -> Result<(), ProblemError> {
    let mut text = String::with_capacity(v.len() * 24);
    for x in v {
        text.push_str(&format!("{x:.16e}\n"));
    }
    fs::write(path, text).map_err(io_err(path))
}

fn read_vector(path: &Path) -> Result<Vec<f64>, ProblemError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| ProblemError::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                msg: format!("not a number: {tok:?}"),
            })?;
            out.push(v);
        }
    }
    Ok(out)
}

pub fn save_bundle(problem: &LsProblem, meta: &BundleMeta, dir: impl AsRef<Path>) -> Result<(), ProblemError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_matrix_market(&problem.a, dir.join("A.mtx"))?;
    write_vector(&dir.join("b.txt"), &problem.b)?;
    for (name, v) in [("x_star.txt", &problem.x_star), ("r.txt", &problem.r)] {
        let path = dir.join(name);
        match v {
            Some(v) => write_vector(&path, v)?,
            None if path.exists() => fs::remove_file(&path).map_err(io_err(&path))?,
            None => {}
        }
    }
    let meta_path = dir.join("meta.json");
    let json = serde_json::to_string_pretty(meta).expect("metadata serializes");
    fs::write(&meta_path, json + "\n").map_err(io_err(&meta_path))
}

/// Loads a bundle and checks its invariants.
pub fn load_bundle(dir: impl AsRef<Path>) -> Result<(LsProblem, BundleMeta), ProblemError> {
    let dir = dir.as_ref();
    let meta_path = dir.join("meta.json");
    let meta_text = fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
    let meta: BundleMeta = serde_json::from_str(&meta_text).map_err(|e| ProblemError::Parse {
        path: meta_path.display().to_string(),
        line: e.line(),
        msg: e.to_string(),
    })?;
    let a = read_matrix_market(dir.join("A.mtx"))?;
    let b = read_vector(&dir.join("b.txt"))?;
    let mut problem = LsProblem::new(a, b, meta.label.clone())?;
    for (name, slot) in [("x_star.txt", &mut problem.x_star), ("r.txt", &mut problem.r)] {
        let path = dir.join(name);
        if path.exists() {
            *slot = Some(read_vector(&path)?);
        }
    }
    problem.check_invariants()?;
    Ok((problem, meta))
}
