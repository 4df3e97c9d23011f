use std::path::Path;

use blowup::duals::MetricSpace;
use blowup::exponents::{Problem, SearchConfig};
use blowup::ot::CostMatrix;
use blowup::prob::Distribution;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    alphabet_x: Option<Vec<String>>,
    alphabet_y: Option<Vec<String>>,
    p_x: Vec<f64>,
    p_y: Option<Vec<f64>>,
    cost: Vec<Vec<f64>>,
    metric: Option<bool>,
    p_exponent: Option<f64>,
    search: Option<RawSearch>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSearch {
    grid_step: Option<f64>,
    multistarts: Option<usize>,
    ccp_iters: Option<usize>,
    tol: Option<f64>,
    seed: Option<u64>,
}

/// A validated problem file.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub p_x: Distribution<f64>,
    pub p_y: Distribution<f64>,
    pub cost: CostMatrix<f64>,
    pub metric: bool,
    pub p_exponent: Option<f64>,
    pub search: SearchConfig,
    /// SHA-256 of the file bytes.
    pub sha256: String,
}

impl ProblemSpec {
    pub fn problem(&self) -> CliResult<Problem> {
        Ok(Problem::new(&self.p_x, &self.p_y, &self.cost)?)
    }

    /// `(𝒳, c, P_X)` as a metric probability space.
    pub fn metric_space(&self) -> CliResult<MetricSpace> {
        if !self.metric {
            return Err(CliError::Input(format!("{}: this quantity needs `metric = true`", self.name)));
        }
        Ok(MetricSpace::new(self.cost.clone(), self.p_x.clone())?)
    }
}

fn field(name: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("field `{name}`: {e}"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn parse_problem(path: &Path) -> CliResult<ProblemSpec> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut spec = parse_problem_str(&text, &path.display().to_string())?;
    spec.sha256 = sha256_hex(&bytes);
    Ok(spec)
}

pub fn parse_problem_str(text: &str, name: &str) -> CliResult<ProblemSpec> {
    let raw: RawSpec = toml::from_str(text).map_err(|e| CliError::Input(format!("{name}: {e}")))?;
    let labels = |given: Option<Vec<String>>, len: usize, which: &str| -> CliResult<Vec<String>> {
        match given {
            Some(l) if l.len() != len => Err(field(which, format!("{} labels for {len} masses", l.len()))),
            Some(l) => Ok(l),
            None => Ok((0..len).map(|i| i.to_string()).collect()),
        }
    };
    let lx = labels(raw.alphabet_x, raw.p_x.len(), "alphabet_x")?;
    let p_x = Distribution::with_labels(lx.clone(), raw.p_x.clone()).map_err(|e| field("p_x", e))?;
    let (py_mass, ly_given) = match raw.p_y {
        Some(m) => (m, raw.alphabet_y),
        None => (raw.p_x.clone(), raw.alphabet_y.or(Some(lx))),
    };
    let ly = labels(ly_given, py_mass.len(), "alphabet_y")?;
    let p_y = Distribution::with_labels(ly, py_mass).map_err(|e| field("p_y", e))?;
    let mut cost = CostMatrix::new(raw.cost).map_err(|e| field("cost", e))?;
    if cost.rows() != p_x.len() || cost.cols() != p_y.len() {
        return Err(field(
            "cost",
            format!("{}×{} matrix for |X| = {}, |Y| = {}", cost.rows(), cost.cols(), p_x.len(), p_y.len()),
        ));
    }
    let metric = raw.metric.unwrap_or(false);
    if metric {
        cost = cost.into_metric().map_err(|e| field("metric", e))?;
    }
    if let Some(p) = raw.p_exponent {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(field("p_exponent", format!("{p} must be a finite real ≥ 1")));
        }
    }
    let s = raw.search.unwrap_or_default();
    let d = SearchConfig::default();
    let search = SearchConfig {
        grid_step: s.grid_step.unwrap_or(d.grid_step),
        multistarts: s.multistarts.unwrap_or(d.multistarts),
        ccp_iters: s.ccp_iters.unwrap_or(d.ccp_iters),
        tol: s.tol.unwrap_or(d.tol),
        seed: s.seed.unwrap_or(d.seed),
    };
    search.validate().map_err(|e| field("search", e))?;
    Ok(ProblemSpec {
        name: name.to_string(),
        p_x,
        p_y,
        cost,
        metric,
        p_exponent: raw.p_exponent,
        search,
        sha256: sha256_hex(text.as_bytes()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BINARY: &str = r#"
alphabet_x = ["0", "1"]
p_x = [0.5, 0.5]
cost = [[0.0, 1.0], [1.0, 0.0]]
metric = true
"#;

    #[test]
    fn minimal_binary() {
        let s = parse_problem_str(BINARY, "binary").unwrap();
        assert_eq!(s.p_y.mass(), &[0.5, 0.5]);
        assert_eq!(s.p_y.labels(), &["0", "1"]);
        assert!(s.metric && s.cost.is_metric());
        assert_eq!(s.search, SearchConfig::default());
    }

    #[test]
    fn rejections_name_the_field() {
        let bad = BINARY.replace("[0.5, 0.5]", "[0.5, 0.4]");
        let e = parse_problem_str(&bad, "x").unwrap_err().to_string();
        assert!(e.contains("p_x"), "{e}");
        let asym = BINARY.replace("[1.0, 0.0]]", "[2.0, 0.0]]");
        let e = parse_problem_str(&asym, "x").unwrap_err().to_string();
        assert!(e.contains("metric"), "{e}");
        let e = parse_problem_str("p_x = [1.0]\ncost = [[0.0]]\nbogus = 1\n", "x").unwrap_err().to_string();
        assert!(e.contains("bogus") && e.contains("line 3"), "{e}");
        let e = parse_problem_str("p_x = [0.5, 0.5]\ncost = [[0.0]]\n", "x").unwrap_err().to_string();
        assert!(e.contains("cost"), "{e}");
        let e = parse_problem_str(&format!("{BINARY}p_exponent = 0.5\n"), "x").unwrap_err().to_string();
        assert!(e.contains("p_exponent"), "{e}");
    }
}
