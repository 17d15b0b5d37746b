use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gksl_core::MomentTensor;
use serde_json::Value;

use crate::error::CliError;

/// `t,re[m1_1],im[m1_1],...` followed by one row per time, shortest
/// round-trip float formatting.
pub fn trajectory_csv(times: &[f64], trajectory: &[MomentTensor]) -> String {
    let mut out = String::from("t");
    if let Some(first) = trajectory.first() {
        for flat in 0..first.len() {
            let label = first.label(flat);
            write!(out, ",re[{label}],im[{label}]").unwrap();
        }
    }
    out.push('\n');
    for (t, y) in times.iter().zip(trajectory) {
        write!(out, "{t:?}").unwrap();
        for z in y.values().iter() {
            write!(out, ",{:?},{:?}", z.re, z.im).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn json_text(value: &Value) -> String {
    serde_json::to_string_pretty(value).expect("reports hold finite numbers") + "\n"
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|source| CliError::Io { context: format!("creating {}", dir.display()), source })?;
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|source| CliError::Io { context: format!("writing {}", path.display()), source })?;
    Ok(path)
}
