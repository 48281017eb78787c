//! Run configuration: JSON text, validated at load time. Every rejection
//! names the offending field path and, when it can be located, its line.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::model::{Mode, Substrate};
use crate::quadrature::Quadrature;
use crate::tuning::{RootSearch, TabulatedConstraint};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "config error at `{}` (line {line}): {}", self.path, self.message),
            None => write!(f, "config error at `{}`: {}", self.path, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Chi,
    K,
    A,
    L,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubstrateBlock {
    pub epsilon_r: f64,
    pub mu_r: f64,
    pub omega: f64,
    pub a: f64,
}

/// `j` types and an inclusive `[lo, hi]` range of orders.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModesBlock {
    pub j: Vec<u8>,
    pub l: [u32; 2],
}

/// Either `lo, hi, n` (evenly spaced, endpoints included) or `values`.
/// `chi0` is the reference multiplier for minimality margins.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChiBlock {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub n: Option<usize>,
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub chi0: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XiSearchBlock {
    pub lo: f64,
    pub hi: f64,
    pub grid_n: usize,
    pub tol: f64,
    /// `(chi, g(chi))` pairs, linearly interpolated.
    pub table: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceEntry {
    pub j: u8,
    pub l: u32,
    pub m: i32,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub quad_rel: f64,
    pub margin: f64,
    pub f1: f64,
    pub f1_fd: f64,
    pub f2: f64,
    pub max_panels: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            quad_rel: 1e-12,
            margin: 1e-9,
            f1: 1e-8,
            f1_fd: 1e-6,
            f2: 1e-4,
            max_panels: 50_000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub format: Option<Format>,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub axis: Axis,
    pub values: Vec<f64>,
    /// For `axis = "a"`: scale `k` (and `chi`) so that `k a` stays at its
    /// configured value.
    #[serde(default)]
    pub hold_ka: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub substrate: SubstrateBlock,
    pub modes: Option<ModesBlock>,
    pub chi: Option<ChiBlock>,
    pub xi_search: Option<XiSearchBlock>,
    #[serde(default)]
    pub sources: Vec<SourceEntry>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputBlock,
    pub sweep: Option<SweepBlock>,
}

/// A loaded config plus the source text, kept for locating fields.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    text: String,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: "<file>".into(),
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(text)
    }

    pub fn parse(text: String) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(&text);
        let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            ConfigError {
                path,
                line: Some(inner.line()),
                message: inner.to_string(),
            }
        })?;
        let loaded = LoadedConfig { config, text };
        loaded.validate()?;
        Ok(loaded)
    }

    pub fn error(&self, path: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            path: path.to_string(),
            line: locate(&self.text, path),
            message: message.into(),
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let c = &self.config;
        self.substrate()?;
        if let Some(modes) = &c.modes {
            for (i, &j) in modes.j.iter().enumerate() {
                if j != 1 && j != 2 {
                    return Err(self.error(&format!("modes.j[{i}]"), format!("j must be 1 or 2, got {j}")));
                }
            }
            if modes.j.is_empty() {
                return Err(self.error("modes.j", "at least one multipole type is required"));
            }
            let [lo, hi] = modes.l;
            if lo == 0 || lo > hi {
                return Err(self.error("modes.l", format!("need 1 <= lo <= hi, got [{lo}, {hi}]")));
            }
        }
        if let Some(chi) = &c.chi {
            self.chi_values(chi)?;
            if !chi.chi0.is_finite() {
                return Err(self.error("chi.chi0", "must be finite"));
            }
        }
        if let Some(xi) = &c.xi_search {
            self.xi_search(xi)?;
        }
        for (i, s) in c.sources.iter().enumerate() {
            let path = format!("sources[{i}]");
            Mode::new(s.j, s.l, s.m).map_err(|e| self.error(&path, e.to_string()))?;
            if !(s.re.is_finite() && s.im.is_finite()) {
                return Err(self.error(&path, "amplitude must be finite"));
            }
        }
        let t = &c.tolerances;
        Quadrature::new(t.quad_rel).map_err(|e| self.error("tolerances.quad_rel", e.to_string()))?;
        for (name, v) in [("margin", t.margin), ("f1", t.f1), ("f1_fd", t.f1_fd), ("f2", t.f2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(self.error(&format!("tolerances.{name}"), format!("must be positive, got {v}")));
            }
        }
        if t.max_panels == 0 {
            return Err(self.error("tolerances.max_panels", "must be >= 1"));
        }
        if let Some(sweep) = &c.sweep {
            if sweep.values.is_empty() {
                return Err(self.error("sweep.values", "at least one value is required"));
            }
            for (i, &v) in sweep.values.iter().enumerate() {
                let path = format!("sweep.values[{i}]");
                let ok = match sweep.axis {
                    Axis::Chi => v.is_finite(),
                    Axis::K => v.is_finite() && v != 0.0,
                    Axis::A => v.is_finite() && v > 0.0,
                    Axis::L => v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64,
                };
                if !ok {
                    return Err(self.error(&path, format!("{v} is not a valid value for this axis")));
                }
            }
            if sweep.hold_ka && sweep.axis != Axis::A {
                return Err(self.error("sweep.hold_ka", "only meaningful for axis \"a\""));
            }
        }
        Ok(())
    }

    pub fn substrate(&self) -> Result<Substrate, ConfigError> {
        let s = &self.config.substrate;
        for (name, v) in [("epsilon_r", s.epsilon_r), ("mu_r", s.mu_r), ("omega", s.omega), ("a", s.a)] {
            if !v.is_finite() {
                return Err(self.error(&format!("substrate.{name}"), "must be finite"));
            }
        }
        Substrate::new(s.epsilon_r, s.mu_r, s.omega, s.a).map_err(|e| {
            let field = if !(s.omega > 0.0) {
                "omega"
            } else if !(s.a > 0.0) {
                "a"
            } else {
                "mu_r"
            };
            self.error(&format!("substrate.{field}"), e.to_string())
        })
    }

    pub fn chi_values(&self, chi: &ChiBlock) -> Result<Vec<f64>, ConfigError> {
        match (&chi.values, chi.lo, chi.hi, chi.n) {
            (Some(values), None, None, None) => {
                if values.is_empty() {
                    return Err(self.error("chi.values", "at least one value is required"));
                }
                if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                    return Err(self.error(&format!("chi.values[{i}]"), "must be finite"));
                }
                Ok(values.clone())
            }
            (None, Some(lo), Some(hi), Some(n)) => {
                if !(lo.is_finite() && hi.is_finite()) {
                    return Err(self.error("chi.lo", "grid bounds must be finite"));
                }
                if n == 0 {
                    return Err(self.error("chi.n", "must be >= 1"));
                }
                if n == 1 {
                    return if lo == hi {
                        Ok(vec![lo])
                    } else {
                        Err(self.error("chi.n", "a single point needs lo == hi"))
                    };
                }
                if !(lo < hi) {
                    return Err(self.error("chi.hi", format!("need lo < hi, got [{lo}, {hi}]")));
                }
                let steps = (n - 1) as f64;
                Ok((0..n)
                    .map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * (i as f64 / steps) })
                    .collect())
            }
            _ => Err(self.error("chi", "give either `values` or all of `lo`, `hi`, `n`")),
        }
    }

    pub fn xi_search(&self, xi: &XiSearchBlock) -> Result<(RootSearch, TabulatedConstraint), ConfigError> {
        let search = RootSearch {
            lo: xi.lo,
            hi: xi.hi,
            grid_n: xi.grid_n,
            tol: xi.tol,
        };
        search.validate().map_err(|e| self.error("xi_search", e.to_string()))?;
        let table = TabulatedConstraint::new(xi.table.iter().map(|p| (p[0], p[1])).collect())
            .map_err(|e| self.error("xi_search.table", e.to_string()))?;
        let (lo, hi) = table.domain();
        if lo > xi.lo || hi < xi.hi {
            return Err(self.error(
                "xi_search.table",
                format!("table covers [{lo}, {hi}] but the search interval is [{}, {}]", xi.lo, xi.hi),
            ));
        }
        Ok((search, table))
    }

    pub fn quadrature(&self) -> Quadrature {
        let t = &self.config.tolerances;
        Quadrature::new(t.quad_rel)
            .expect("validated at load")
            .with_max_panels(t.max_panels)
    }

    /// Mode list in `(j, l)` order with `m = 0`; coefficients do not depend on `m`.
    pub fn modes(&self) -> Result<Vec<Mode>, ConfigError> {
        let modes = self
            .config
            .modes
            .as_ref()
            .ok_or_else(|| self.error("modes", "this command needs a `modes` block"))?;
        let mut js = modes.j.clone();
        js.sort_unstable();
        js.dedup();
        let mut out = Vec::new();
        for j in js {
            for l in modes.l[0]..=modes.l[1] {
                out.push(Mode::new(j, l, 0).map_err(|e| self.error("modes", e.to_string()))?);
            }
        }
        Ok(out)
    }
}

/// Line of the last key in a dotted path such as `substrate.mu_r` or
/// `sources[2]`, searching each key after the previous one.
fn locate(text: &str, path: &str) -> Option<usize> {
    let mut pos = 0;
    let mut found = false;
    for part in path.split('.') {
        let key = part.split('[').next().unwrap_or(part);
        if key.is_empty() {
            continue;
        }
        let needle = format!("\"{key}\"");
        let mut from = pos;
        loop {
            let at = from + text[from..].find(&needle)?;
            let after = text[at + needle.len()..].trim_start();
            if after.starts_with(':') {
                pos = at;
                found = true;
                break;
            }
            from = at + needle.len();
        }
    }
    found.then(|| text[..pos].matches('\n').count() + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
  "substrate": {
    "epsilon_r": 1.0,
    "mu_r": 1.0,
    "omega": 1.0,
    "a": 2.0
  },
  "modes": { "j": [1, 2], "l": [1, 3] },
  "chi": { "lo": -0.1, "hi": 0.1, "n": 5 }
}"#;

    #[test]
    fn loads_base() {
        let c = LoadedConfig::parse(BASE.into()).unwrap();
        assert_eq!(c.modes().unwrap().len(), 6);
        let chi = c.chi_values(c.config.chi.as_ref().unwrap()).unwrap();
        assert_eq!(chi.len(), 5);
        for (got, want) in chi.iter().zip([-0.1, -0.05, 0.0, 0.05, 0.1]) {
            assert!((got - want).abs() < 1e-16);
        }
        assert_eq!(chi[2], 0.0);
        assert_eq!(c.config.tolerances, Tolerances::default());
    }

    #[test]
    fn negative_product_names_field_and_line() {
        let text = BASE.replace("\"mu_r\": 1.0", "\"mu_r\": -1.0");
        let e = LoadedConfig::parse(text).unwrap_err();
        assert_eq!(e.path, "substrate.mu_r");
        assert_eq!(e.line, Some(4));
        assert!(e.message.contains("epsilon_r * mu_r"));
    }

    #[test]
    fn syntax_and_type_errors_carry_lines() {
        let e = LoadedConfig::parse(BASE.replace("\"a\": 2.0", "\"a\": \"two\"")).unwrap_err();
        assert_eq!(e.path, "substrate.a");
        assert_eq!(e.line, Some(6));
        let e = LoadedConfig::parse(BASE.replace("\"n\": 5 }", "\"n\": 5 ")).unwrap_err();
        assert!(e.line.is_some());
        let e = LoadedConfig::parse(BASE.replace("\"n\": 5", "\"n\": 5, \"bogus\": 1")).unwrap_err();
        assert!(e.message.contains("bogus"));
    }

    #[test]
    fn semantic_errors() {
        let e = LoadedConfig::parse(BASE.replace("\"j\": [1, 2]", "\"j\": [1, 3]")).unwrap_err();
        assert_eq!(e.path, "modes.j[1]");
        assert_eq!(e.line, Some(8));
        let e = LoadedConfig::parse(BASE.replace("\"l\": [1, 3]", "\"l\": [0, 3]")).unwrap_err();
        assert_eq!(e.path, "modes.l");
        let e = LoadedConfig::parse(BASE.replace("\"n\": 5", "\"n\": 5, \"values\": [0.0]")).unwrap_err();
        assert_eq!(e.path, "chi");
    }

    #[test]
    fn locate_skips_values_that_look_like_keys() {
        let text = "{\n \"a\": \"b\",\n \"b\": 1\n}";
        assert_eq!(locate(text, "b"), Some(3));
        assert_eq!(locate(text, "missing"), None);
    }
}
