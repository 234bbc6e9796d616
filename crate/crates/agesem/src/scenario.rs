//! Flat sectioned key/value scenario files.
//!
//! ```text
//! [problem]
//! p = 2
//! q = 2
//! r = 5
//! T = 0.5
//! a_max = 1
//!
//! [grids]
//! n_a = 256
//! n_x = 200
//! K = 64
//! grading = 2
//! n_cells = 64
//!
//! [data]
//! u0 = exp(-a)*(1+cos(pi*x))
//! f = 0
//! g = exp(-t)*(1+cos(pi*x))
//! h0 = 0
//! h1 = 0
//!
//! [output]
//! directory = out
//! slices = 0.25, 0.5
//! compare_tol = 2e-2
//! ```
//!
//! Unset data fields default to zero; `#` starts a comment. All scenario
//! invariants are re-validated on load with messages naming the violated
//! rule.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::mild::{DataField, ScenarioData};

#[derive(Debug, Clone)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Times at which solution slices are written.
    pub slices: Vec<f64>,
    /// Declared bound for the mild-vs-oracle comparison.
    pub compare_tol: f64,
}

#[derive(Debug, Clone)]
pub struct ScenarioFile {
    pub data: ScenarioData,
    pub output: OutputConfig,
}

pub fn load_scenario(path: &Path) -> Result<ScenarioFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::scenario(format!("cannot read {}: {e}", path.display())))?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<ScenarioFile> {
    let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            let name = name.trim().to_string();
            if !matches!(name.as_str(), "problem" | "grids" | "data" | "output") {
                return Err(Error::scenario(format!(
                    "line {}: unknown section [{name}]",
                    lineno + 1
                )));
            }
            sections.entry(name.clone()).or_default();
            current = Some(name);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::scenario(format!(
                "line {}: expected `key = value`, got `{line}`",
                lineno + 1
            )));
        };
        let Some(section) = &current else {
            return Err(Error::scenario(format!(
                "line {}: key outside any section",
                lineno + 1
            )));
        };
        sections
            .get_mut(section)
            .unwrap()
            .insert(key.trim().to_string(), value.trim().to_string());
    }

    let problem = sections
        .get("problem")
        .ok_or_else(|| Error::scenario("missing [problem] section"))?;
    let grids = sections
        .get("grids")
        .ok_or_else(|| Error::scenario("missing [grids] section"))?;
    let empty = BTreeMap::new();
    let data = sections.get("data").unwrap_or(&empty);
    let output = sections.get("output").unwrap_or(&empty);

    let known = |section: &BTreeMap<String, String>, keys: &[&str], name: &str| -> Result<()> {
        for k in section.keys() {
            if !keys.contains(&k.as_str()) {
                return Err(Error::scenario(format!("unknown key `{k}` in [{name}]")));
            }
        }
        Ok(())
    };
    known(problem, &["p", "q", "r", "T", "a_max"], "problem")?;
    known(grids, &["n_a", "n_x", "K", "grading", "n_cells"], "grids")?;
    known(data, &["u0", "f", "g", "h0", "h1"], "data")?;
    known(output, &["directory", "slices", "compare_tol"], "output")?;

    let num = |section: &BTreeMap<String, String>, key: &str, name: &str| -> Result<f64> {
        let v = section
            .get(key)
            .ok_or_else(|| Error::scenario(format!("missing `{key}` in [{name}]")))?;
        v.parse::<f64>()
            .map_err(|_| Error::scenario(format!("`{key}` in [{name}] is not a number: `{v}`")))
    };
    let int = |section: &BTreeMap<String, String>, key: &str, name: &str| -> Result<usize> {
        let v = num(section, key, name)?;
        if v < 0.0 || v.fract() != 0.0 {
            return Err(Error::scenario(format!("`{key}` in [{name}] must be a nonnegative integer")));
        }
        Ok(v as usize)
    };
    let field = |key: &str| -> Result<DataField> {
        match data.get(key) {
            None => Ok(DataField::Zero),
            Some(src) => DataField::parse(src)
                .map_err(|e| Error::scenario(format!("data field `{key}`: {e}"))),
        }
    };

    let scenario = ScenarioData {
        u0: field("u0")?,
        f: field("f")?,
        g: field("g")?,
        h0: field("h0")?,
        h1: field("h1")?,
        p: num(problem, "p", "problem")?,
        q: num(problem, "q", "problem")?,
        r: num(problem, "r", "problem")?,
        t_horizon: num(problem, "T", "problem")?,
        a_max: num(problem, "a_max", "problem")?,
        n_a: int(grids, "n_a", "grids")?,
        n_x: int(grids, "n_x", "grids")?,
        k_max: int(grids, "K", "grids")?,
        grading_kappa: grids.get("grading").map_or(Ok(2.0), |v| {
            v.parse::<f64>()
                .map_err(|_| Error::scenario(format!("`grading` is not a number: `{v}`")))
        })?,
        n_cells: grids
            .get("n_cells")
            .map_or(Ok(64), |v| {
                v.parse::<usize>()
                    .map_err(|_| Error::scenario(format!("`n_cells` is not an integer: `{v}`")))
            })?,
    };
    scenario.validate()?;

    let slices: Vec<f64> = match output.get("slices") {
        None => vec![scenario.t_horizon],
        Some(list) => {
            let mut out = Vec::new();
            for part in list.split(',') {
                let v: f64 = part.trim().parse().map_err(|_| {
                    Error::scenario(format!("bad slice entry `{}` in [output]", part.trim()))
                })?;
                out.push(v);
            }
            out
        }
    };
    let delta = scenario.delta();
    for &t in &slices {
        let m = t / delta;
        if t < 0.0 || t > scenario.t_horizon + 1e-12 || (m - m.round()).abs() > 1e-9 * m.max(1.0) {
            return Err(Error::scenario(format!(
                "slice t = {t} is not a grid time (step {delta}, horizon {})",
                scenario.t_horizon
            )));
        }
    }
    let compare_tol = match output.get("compare_tol") {
        None => 2e-2,
        Some(v) => v
            .parse::<f64>()
            .map_err(|_| Error::scenario(format!("`compare_tol` is not a number: `{v}`")))?,
    };

    Ok(ScenarioFile {
        data: scenario,
        output: OutputConfig {
            directory: PathBuf::from(
                output.get("directory").cloned().unwrap_or_else(|| "out".to_string()),
            ),
            slices,
            compare_tol,
        },
    })
}
