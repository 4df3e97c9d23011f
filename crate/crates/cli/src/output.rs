use std::path::{Path, PathBuf};

use blowup::envelope::ExponentCurve;
use blowup::exponents::Method;
use blowup::ext::ExtReal;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::problem::sha256_hex;

/// Shortest round-trip decimal; `inf` / `-inf` for the infinities.
pub fn fmt_f64(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:?}")
    }
}

pub fn fmt_ext(v: ExtReal<f64>) -> String {
    fmt_f64(v.to_float())
}

pub fn parse_ext(s: &str) -> CliResult<ExtReal<f64>> {
    match s.trim() {
        "inf" | "+inf" => Ok(ExtReal::PosInf),
        "-inf" => Ok(ExtReal::NegInf),
        t => t
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(ExtReal::Finite)
            .ok_or_else(|| CliError::Input(format!("not a number: {t:?}"))),
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn to_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<(Vec<u8>, usize)> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    let mut n = 0;
    for r in rows {
        w.write_record(&r)?;
        n += 1;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Input(e.to_string()))?;
    Ok((bytes, n))
}

/// `alpha,tau,value,method`, one row per cell in grid order.
pub fn curve_csv(curve: &ExponentCurve) -> CliResult<(Vec<u8>, usize)> {
    to_bytes(
        &["alpha", "tau", "value", "method"],
        curve
            .cells()
            .map(|(a, t, v, m)| vec![fmt_f64(a), fmt_f64(t), fmt_ext(v), m.as_str().to_string()]),
    )
}

/// Envelope evaluations in the curve layout; `method` names the envelope.
pub fn points_csv(rows: &[(f64, f64, ExtReal<f64>, &str)]) -> CliResult<(Vec<u8>, usize)> {
    to_bytes(
        &["alpha", "tau", "value", "method"],
        rows.iter().map(|&(a, t, v, m)| vec![fmt_f64(a), fmt_f64(t), fmt_ext(v), m.to_string()]),
    )
}

pub fn emit_curve(curve: &ExponentCurve, path: &Path) -> CliResult<()> {
    std::fs::write(path, curve_csv(curve)?.0)?;
    Ok(())
}

/// Inverse of [`curve_csv`]; the grids are read back from the row order.
pub fn parse_curve(bytes: &[u8]) -> CliResult<ExponentCurve> {
    let mut r = csv::Reader::from_reader(bytes);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != ["alpha", "tau", "value", "method"] {
        return Err(CliError::Input(format!("unexpected curve header {header:?}")));
    }
    let (mut alphas, mut taus, mut values, mut methods) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        let a = parse_ext(&rec[0])?.to_float();
        let t = parse_ext(&rec[1])?.to_float();
        if alphas.last() != Some(&a) {
            alphas.push(a);
        }
        if alphas.len() == 1 {
            taus.push(t);
        }
        values.push(parse_ext(&rec[2])?);
        // Envelope output reads back as grid samples, so envelopes compose.
        let method = match &rec[3] {
            "lce1d" | "lce2d" => Some(Method::Grid),
            tag => Method::parse(tag),
        };
        methods.push(method.ok_or_else(|| CliError::Input(format!("unknown method {:?}", &rec[3])))?);
    }
    Ok(ExponentCurve::new(alphas, taus, values, methods)?)
}

pub fn read_curve(path: &Path) -> CliResult<ExponentCurve> {
    parse_curve(&std::fs::read(path)?)
}

/// One computed quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub quantity: String,
    pub alpha: Option<f64>,
    pub tau: Option<f64>,
    pub lambda: Option<f64>,
    pub n: Option<usize>,
    pub value: ExtReal<f64>,
    /// Provenance; `+inf:<reason>` for infinite values.
    pub method: String,
    pub certificate: String,
}

impl ResultRow {
    pub fn new(quantity: &str, value: ExtReal<f64>, method: impl Into<String>) -> Self {
        Self {
            quantity: quantity.into(),
            alpha: None,
            tau: None,
            lambda: None,
            n: None,
            value,
            method: method.into(),
            certificate: String::new(),
        }
    }

    pub fn alpha(mut self, a: f64) -> Self {
        self.alpha = Some(a);
        self
    }

    pub fn tau(mut self, t: f64) -> Self {
        self.tau = Some(t);
        self
    }

    pub fn lambda(mut self, l: f64) -> Self {
        self.lambda = Some(l);
        self
    }

    pub fn n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    pub fn certificate(mut self, c: impl Into<String>) -> Self {
        self.certificate = c.into();
        self
    }
}

pub fn results_csv(rows: &[ResultRow]) -> CliResult<(Vec<u8>, usize)> {
    to_bytes(
        &["quantity", "alpha", "tau", "lambda", "n", "value", "method", "certificate"],
        rows.iter().map(|r| {
            let method = if r.value.is_pos_inf() && !r.method.starts_with("+inf") {
                format!("+inf:{}", r.method)
            } else {
                r.method.clone()
            };
            vec![
                r.quantity.clone(),
                opt(r.alpha),
                opt(r.tau),
                opt(r.lambda),
                r.n.map(|n| n.to_string()).unwrap_or_default(),
                fmt_ext(r.value),
                method,
                r.certificate.clone(),
            ]
        }),
    )
}

/// One finite-n sweep row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub alpha: f64,
    pub tau: f64,
    pub gamma: Option<f64>,
    pub e0: Option<ExtReal<f64>>,
    pub e1: Option<ExtReal<f64>>,
    pub bound: Option<ExtReal<f64>>,
    pub slack: Option<f64>,
    pub witness: String,
}

pub fn sweep_csv(rows: &[SweepRow]) -> CliResult<(Vec<u8>, usize)> {
    to_bytes(
        &["n", "alpha", "tau", "gamma", "E0", "E1", "bound", "slack", "witness"],
        rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                // NaN: no witness set (every set vacuous or skipped).
                opt(Some(r.alpha).filter(|a| !a.is_nan())),
                fmt_f64(r.tau),
                opt(r.gamma),
                r.e0.map(fmt_ext).unwrap_or_default(),
                r.e1.map(fmt_ext).unwrap_or_default(),
                r.bound.map(fmt_ext).unwrap_or_default(),
                opt(r.slack),
                r.witness.clone(),
            ]
        }),
    )
}

#[derive(Debug, Serialize)]
struct RunInfo {
    command: String,
    seed: u64,
    threads: usize,
    blowup_version: &'static str,
    cli_version: &'static str,
    wall_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub rows: usize,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest {
    run: RunInfo,
    inputs: Vec<InputEntry>,
    files: Vec<FileEntry>,
}

/// Single owner of an output directory; everything written through it is
/// listed, with its hash, in `manifest.toml`.
#[derive(Debug)]
pub struct OutDir {
    dir: PathBuf,
    inputs: Vec<InputEntry>,
    files: Vec<FileEntry>,
}

impl OutDir {
    pub fn create(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            inputs: Vec::new(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn input(&mut self, path: &str, sha256: &str) {
        self.inputs.push(InputEntry {
            path: path.into(),
            sha256: sha256.into(),
        });
    }

    pub fn write(&mut self, name: &str, bytes: &[u8], rows: usize, wall_seconds: f64) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes)?;
        self.files.push(FileEntry {
            path: name.into(),
            sha256: sha256_hex(bytes),
            rows,
            wall_seconds,
        });
        Ok(path)
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    pub fn finish(self, command: &str, seed: u64, wall_seconds: f64) -> CliResult<PathBuf> {
        let m = Manifest {
            run: RunInfo {
                command: command.into(),
                seed,
                threads: rayon::current_num_threads(),
                blowup_version: blowup::VERSION,
                cli_version: env!("CARGO_PKG_VERSION"),
                wall_seconds,
            },
            inputs: self.inputs,
            files: self.files,
        };
        let text = toml::to_string(&m).map_err(|e| CliError::Input(e.to_string()))?;
        let path = self.dir.join("manifest.toml");
        std::fs::write(&path, text)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_round_trip() {
        let c = ExponentCurve::new(
            vec![0.0, 0.1],
            vec![0.0, 1.0 / 3.0, 0.7],
            vec![
                ExtReal::Finite(0.0),
                ExtReal::Finite(0.1 + 0.2),
                ExtReal::PosInf,
                ExtReal::Finite(1e-300),
                ExtReal::Finite(std::f64::consts::LN_2),
                ExtReal::PosInf,
            ],
            vec![Method::Trivial, Method::Vertex, Method::Empty, Method::Grid, Method::Ccp, Method::Dom],
        )
        .unwrap();
        let (bytes, rows) = curve_csv(&c).unwrap();
        assert_eq!(rows, 6);
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("alpha,tau,value,method\n"));
        assert!(text.contains(",inf,+inf:empty"));
        assert_eq!(parse_curve(&bytes).unwrap(), c);
    }

    #[test]
    fn single_cell() {
        let c = ExponentCurve::new(vec![0.5], vec![0.25], vec![ExtReal::Finite(1.0)], vec![Method::Vertex]).unwrap();
        let (bytes, rows) = curve_csv(&c).unwrap();
        assert_eq!(rows, 1);
        assert_eq!(String::from_utf8(bytes).unwrap(), "alpha,tau,value,method\n0.5,0.25,1.0,vertex\n");
    }

    #[test]
    fn infinite_results_are_tagged() {
        let rows = [ResultRow::new("phi", ExtReal::PosInf, "empty").alpha(0.1).tau(1.0)];
        let text = String::from_utf8(results_csv(&rows).unwrap().0).unwrap();
        assert!(text.ends_with("phi,0.1,1.0,,,inf,+inf:empty,\n"), "{text}");
    }
}
