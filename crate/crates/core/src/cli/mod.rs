//! Run configuration, result tables and the subcommands behind `hlab`.
//!
//! Configuration comes from `key=value` pairs: first the optional config
//! file, then command-line flags, both applied through [`RunConfig::apply`].

mod commands;
mod table;
mod verify;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

pub use commands::{cmd_dim, cmd_measure, cmd_operator, cmd_sweep};
pub use table::{Cell, ResultTable};
pub use verify::{cmd_verify, Check, VerifyReport};

use crate::density::Family;
use crate::error::{Error, Result};
use crate::ifs::SystemKind;
use crate::spectral::Truncation;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::domain(format!("unknown output format '{other}'"))),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub kind: SystemKind,
    pub n: Vec<Truncation>,
    pub t: Vec<f64>,
    pub grid: usize,
    pub depth: usize,
    pub image_depth: usize,
    pub eps: Vec<f64>,
    /// `None` selects the default families for each `n`.
    pub families: Option<Vec<Family>>,
    pub budget: usize,
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub jobs: usize,
    pub explain: bool,
    /// Multiplies every verify tolerance.
    pub tol_scale: f64,
    /// Added to every dimension before building conformal measures in verify.
    pub inject_h_offset: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kind: SystemKind::Gauss,
            n: vec![Truncation::Finite(16)],
            t: vec![1.0],
            grid: 48,
            depth: 3,
            image_depth: 3,
            eps: vec![0.1, 0.3, 0.5, 0.7],
            families: None,
            budget: crate::density::DEFAULT_BUDGET,
            format: OutputFormat::Csv,
            out: None,
            seed: 0,
            jobs: 0,
            explain: false,
            tol_scale: 1.0,
            inject_h_offset: 0.0,
        }
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| Error::domain(format!("bad value '{s}' for {key}"))))
        .collect()
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| Error::domain(format!("bad value '{value}' for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "" | "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::domain(format!("bad value '{value}' for {key}"))),
    }
}

fn parse_truncation(s: &str) -> Result<Truncation> {
    match s.trim() {
        "inf" | "∞" => Ok(Truncation::Infinite),
        v => match v.parse::<u64>() {
            Ok(0) | Err(_) => Err(Error::domain(format!("bad value '{v}' for n"))),
            Ok(n) => Ok(Truncation::Finite(n)),
        },
    }
}

/// `"5"`, `"2,4,inf"`, or a range `"a..b"`: every integer, or powers-of-two
/// multiples of `a` when `geometric` is set.
pub fn parse_n_spec(spec: &str, geometric: bool) -> Result<Vec<Truncation>> {
    let spec = spec.trim();
    if let Some((a, b)) = spec.split_once("..") {
        let a: u64 = parse_one("n", a)?;
        let b: u64 = parse_one("n", b.trim_start_matches('='))?;
        if a == 0 || a > b {
            return Err(Error::domain(format!("bad range '{spec}' for n")));
        }
        let mut out = Vec::new();
        let mut k = a;
        while k <= b {
            out.push(Truncation::Finite(k));
            k = if geometric { k.checked_mul(2).unwrap_or(u64::MAX) } else { k + 1 };
            if k == u64::MAX {
                break;
            }
        }
        return Ok(out);
    }
    let list: Vec<Truncation> = spec.split(',').map(parse_truncation).collect::<Result<_>>()?;
    if list.is_empty() {
        return Err(Error::domain("n list is empty"));
    }
    Ok(list)
}

impl RunConfig {
    /// Applies `key=value` pairs in order; `geometric` is read first so it
    /// affects the `n` pair regardless of position.
    pub fn apply(&mut self, pairs: &[(String, String)]) -> Result<()> {
        let geometric = pairs
            .iter()
            .filter(|(k, _)| k == "geometric")
            .map(|(k, v)| parse_bool(k, v))
            .last()
            .transpose()?
            .unwrap_or(false);
        for (key, value) in pairs {
            let v = value.as_str();
            match key.as_str() {
                "kind" => self.kind = parse_one(key, v)?,
                "n" => self.n = parse_n_spec(v, geometric)?,
                "geometric" => {}
                "t" => self.t = parse_list(key, v)?,
                "grid" => self.grid = parse_one(key, v)?,
                "depth" => self.depth = parse_one(key, v)?,
                "image_depth" => self.image_depth = parse_one(key, v)?,
                "eps" => self.eps = parse_list(key, v)?,
                "families" => {
                    self.families = match v.trim() {
                        "default" => None,
                        _ => Some(parse_list(key, v)?),
                    }
                }
                "budget" => self.budget = parse_one(key, v)?,
                "format" => self.format = parse_one(key, v)?,
                "out" => self.out = if v.trim().is_empty() { None } else { Some(PathBuf::from(v.trim())) },
                "seed" => self.seed = parse_one(key, v)?,
                "jobs" => self.jobs = parse_one(key, v)?,
                "explain" => self.explain = parse_bool(key, v)?,
                "tol_scale" => self.tol_scale = parse_one(key, v)?,
                "inject_h_offset" => self.inject_h_offset = parse_one(key, v)?,
                other => return Err(Error::domain(format!("unknown configuration key '{other}'"))),
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid < 16 {
            return Err(Error::domain("grid must be at least 16"));
        }
        if !(self.tol_scale > 0.0) {
            return Err(Error::domain("tol_scale must be positive"));
        }
        if self.eps.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return Err(Error::domain("every eps must lie in (0,1)"));
        }
        if !self.inject_h_offset.is_finite() {
            return Err(Error::domain("inject_h_offset must be finite"));
        }
        Ok(())
    }

    /// Parses a config file body: `key = value` lines, `#` comments.
    pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::domain(format!("line {}: expected key=value", lineno + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(pairs)
    }

    /// Every field as `key=value` pairs, readable back through [`RunConfig::apply`].
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let n = self.n.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(",");
        let families = match &self.families {
            None => "default".to_string(),
            Some(f) => f.iter().map(|x| x.tag()).collect::<Vec<_>>().join(","),
        };
        vec![
            ("kind".into(), self.kind.to_string()),
            ("n".into(), n),
            ("t".into(), join(&self.t)),
            ("grid".into(), self.grid.to_string()),
            ("depth".into(), self.depth.to_string()),
            ("image_depth".into(), self.image_depth.to_string()),
            ("eps".into(), join(&self.eps)),
            ("families".into(), families),
            ("budget".into(), self.budget.to_string()),
            ("format".into(), self.format.to_string()),
            ("out".into(), self.out.as_ref().map(|p| p.display().to_string()).unwrap_or_default()),
            ("seed".into(), self.seed.to_string()),
            ("jobs".into(), self.jobs.to_string()),
            ("explain".into(), self.explain.to_string()),
            ("tol_scale".into(), self.tol_scale.to_string()),
            ("inject_h_offset".into(), self.inject_h_offset.to_string()),
        ]
    }

    pub fn finite_n(&self) -> Result<Vec<u64>> {
        self.n
            .iter()
            .map(|t| t.finite().ok_or_else(|| Error::domain("n = inf is only accepted by the operator command")))
            .collect()
    }

    pub fn family_spec(&self, kind: SystemKind, n: u64) -> crate::density::FamilySpec {
        let mut spec = crate::density::FamilySpec::default_for(kind, n);
        if let Some(f) = &self.families {
            spec.families = f.clone();
        }
        spec.eps = self.eps.clone();
        spec.depth = self.depth;
        spec.image_depth = self.image_depth;
        spec.budget = self.budget;
        spec
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(v: &[(&str, &str)]) -> Vec<(String, String)> {
        v.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn n_specs() {
        let g = parse_n_spec("2..256", true).unwrap();
        assert_eq!(g.len(), 8);
        assert_eq!(g[7], Truncation::Finite(256));
        assert_eq!(parse_n_spec("3..5", false).unwrap().len(), 3);
        assert_eq!(parse_n_spec("4,inf", false).unwrap()[1], Truncation::Infinite);
        assert!(parse_n_spec("0", false).is_err());
        assert!(parse_n_spec("9..3", false).is_err());
    }

    #[test]
    fn flags_override_file() {
        let mut c = RunConfig::default();
        let file = RunConfig::parse_pairs("# comment\nkind = linear\ngrid=32\n").unwrap();
        c.apply(&file).unwrap();
        c.apply(&pairs(&[("grid", "64"), ("n", "2..16"), ("geometric", "true")])).unwrap();
        assert_eq!(c.kind, SystemKind::LinearGauss);
        assert_eq!(c.grid, 64);
        assert_eq!(c.n.len(), 4);
        assert!(c.apply(&pairs(&[("colour", "red")])).is_err());
        assert!(RunConfig::parse_pairs("novalue").is_err());
    }

    #[test]
    fn echo_round_trips() {
        let mut c = RunConfig::default();
        c.apply(&pairs(&[
            ("kind", "linear"),
            ("n", "64,128,inf"),
            ("families", "a,c"),
            ("eps", "0.25,0.5"),
            ("out", "x.csv"),
            ("tol_scale", "0.1"),
        ]))
        .unwrap();
        let mut back = RunConfig::default();
        back.apply(&c.to_pairs()).unwrap();
        assert_eq!(back, c);
        let mut empty = RunConfig::default();
        empty.apply(&pairs(&[("families", "")])).unwrap();
        assert_eq!(empty.families, Some(vec![]));
        let mut again = RunConfig::default();
        again.apply(&empty.to_pairs()).unwrap();
        assert_eq!(again, empty);
    }
}
