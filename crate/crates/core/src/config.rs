//! Run configuration: flat `key = value` text with optional `[section]`
//! headers, merged with command-line overrides.

use std::collections::BTreeMap;
use std::path::PathBuf;

use thiserror::Error;

use crate::nonlinearity::{make_custom, make_exponential, make_power, Nonlinearity, NonlinearityError, TailModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}`: {message}")]
    Value { key: String, message: String },
    #[error("missing key `{0}`")]
    Missing(String),
    #[error(transparent)]
    Nonlinearity(#[from] NonlinearityError),
}

/// Known keys and the section each belongs to.
const KEYS: &[(&str, &str)] = &[
    ("nonlinearity", "family"),
    ("nonlinearity", "p"),
    ("nonlinearity", "expr"),
    ("nonlinearity", "a"),
    ("nonlinearity", "tail"),
    ("nonlinearity", "tail_amplitude"),
    ("nonlinearity", "tail_exponent"),
    ("nonlinearity", "tail_cutoff"),
    ("problem", "N"),
    ("problem", "radii"),
    ("problem", "distances"),
    ("problem", "lower_limit"),
    ("solver", "tol_radius"),
    ("picard", "rho"),
    ("picard", "sup_tol"),
    ("picard", "max_iters"),
    ("picard", "density"),
    ("picard", "k"),
    ("expansion", "order"),
    ("run", "seed"),
    ("run", "out"),
];

fn section_of(key: &str) -> Option<&'static str> {
    KEYS.iter().find(|(_, k)| *k == key).map(|(s, _)| *s)
}

/// Raw `key → value` pairs; later insertions override earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    /// Parses `key = value` lines. `#` and `;` start comments; `[name]`
    /// opens a section, which must match the key's home section.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut raw = Self::default();
        let mut section: Option<String> = None;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let body = line.split(['#', ';']).next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(name) = body.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                    line: line_no,
                    message: format!("unterminated section header `{body}`"),
                })?;
                let name = name.trim();
                if !KEYS.iter().any(|(s, _)| *s == name) {
                    return Err(ConfigError::Syntax { line: line_no, message: format!("unknown section `{name}`") });
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: line_no,
                message: format!("expected `key = value`, found `{body}`"),
            })?;
            let key = key.trim();
            let home = section_of(key).ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
            if let Some(s) = &section {
                if s != home {
                    return Err(ConfigError::Syntax {
                        line: line_no,
                        message: format!("key `{key}` belongs in [{home}], not [{s}]"),
                    });
                }
            }
            raw.entries.insert(key.to_string(), value.trim().to_string());
        }
        Ok(raw)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), ConfigError> {
        if section_of(key).is_none() {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        self.entries.insert(key.to_string(), value.into());
        Ok(())
    }

    /// `other` wins on conflicts.
    pub fn merged(mut self, other: &RawConfig) -> Self {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FamilySpec {
    Power { p: f64 },
    Exponential,
    Expression { expr: String, a: f64, tail: TailModel },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub family: FamilySpec,
    pub dim: usize,
    /// Radii `r` in `(0, 1)` at which tables are produced.
    pub radii: Vec<f64>,
    pub lower_limit: Option<f64>,
    pub tol_radius: f64,
    pub rho: f64,
    pub sup_tol: f64,
    pub max_iters: usize,
    pub density: f64,
    pub k: usize,
    pub order: Option<usize>,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

fn parse_num<T: std::str::FromStr>(raw: &RawConfig, key: &str) -> Result<Option<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    raw.get(key)
        .map(|v| {
            v.parse::<T>().map_err(|e| ConfigError::Value {
                key: key.to_string(),
                message: format!("`{v}`: {e}"),
            })
        })
        .transpose()
}

fn parse_list(raw: &RawConfig, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
    raw.get(key)
        .map(|v| {
            v.split([',', ' '])
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<f64>().map_err(|e| ConfigError::Value {
                        key: key.to_string(),
                        message: format!("`{s}`: {e}"),
                    })
                })
                .collect()
        })
        .transpose()
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let bad = |key: &str, message: String| ConfigError::Value { key: key.to_string(), message };
        let family = match raw.get("family").unwrap_or("power") {
            "power" => FamilySpec::Power {
                p: parse_num(raw, "p")?.ok_or_else(|| ConfigError::Missing("p".into()))?,
            },
            "exponential" | "exp" => FamilySpec::Exponential,
            "expression" | "expr" => {
                let expr = raw.get("expr").ok_or_else(|| ConfigError::Missing("expr".into()))?.to_string();
                let a = parse_num(raw, "a")?.unwrap_or(0.0);
                let cutoff = parse_num(raw, "tail_cutoff")?.unwrap_or(1e3);
                let amplitude = parse_num(raw, "tail_amplitude")?.unwrap_or(1.0);
                let tail = match raw.get("tail").unwrap_or("numeric") {
                    "power" => TailModel::power_law(
                        amplitude,
                        parse_num(raw, "tail_exponent")?.ok_or_else(|| ConfigError::Missing("tail_exponent".into()))?,
                        cutoff,
                    ),
                    "exponential" => TailModel::exponential(
                        amplitude,
                        parse_num(raw, "tail_exponent")?.ok_or_else(|| ConfigError::Missing("tail_exponent".into()))?,
                        cutoff,
                    ),
                    "numeric" => TailModel::numeric_only(cutoff),
                    other => return Err(bad("tail", format!("`{other}` is not power, exponential or numeric"))),
                };
                FamilySpec::Expression { expr, a, tail }
            }
            other => return Err(bad("family", format!("`{other}` is not power, exponential or expression"))),
        };
        let dim = parse_num(raw, "N")?.unwrap_or(3usize);
        if dim == 0 {
            return Err(bad("N", "dimension must be at least 1".into()));
        }
        let radii = match (parse_list(raw, "radii")?, parse_list(raw, "distances")?) {
            (Some(_), Some(_)) => return Err(bad("radii", "give either radii or distances, not both".into())),
            (Some(r), None) => r,
            (None, Some(d)) => d.iter().map(|d| 1.0 - d).collect(),
            (None, None) => vec![0.99, 0.999, 0.9999],
        };
        if let Some(r) = radii.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
            return Err(bad("radii", format!("{r} outside (0, 1)")));
        }
        let cfg = Self {
            family,
            dim,
            radii,
            lower_limit: parse_num(raw, "lower_limit")?,
            tol_radius: parse_num(raw, "tol_radius")?.unwrap_or(1e-8),
            rho: parse_num(raw, "rho")?.unwrap_or(0.2),
            sup_tol: parse_num(raw, "sup_tol")?.unwrap_or(1e-10),
            max_iters: parse_num(raw, "max_iters")?.unwrap_or(50),
            density: parse_num(raw, "density")?.unwrap_or(50.0),
            k: parse_num(raw, "k")?.unwrap_or(1),
            order: parse_num(raw, "order")?,
            seed: parse_num(raw, "seed")?.unwrap_or(0),
            out: raw.get("out").map(PathBuf::from),
        };
        if !(cfg.tol_radius > 0.0) {
            return Err(bad("tol_radius", "must be positive".into()));
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_raw(&RawConfig::parse(text)?)
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity, ConfigError> {
        Ok(match &self.family {
            FamilySpec::Power { p } => make_power(*p)?,
            FamilySpec::Exponential => make_exponential(),
            FamilySpec::Expression { expr, a, tail } => make_custom(expr, *a, *tail)?,
        })
    }

    /// Every resolved setting in the file format, sections in fixed order.
    /// Parsing the result gives back an equal configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::from("[nonlinearity]\n");
        match &self.family {
            FamilySpec::Power { p } => s += &format!("family = power\np = {p}\n"),
            FamilySpec::Exponential => s += "family = exponential\n",
            FamilySpec::Expression { expr, a, tail } => {
                s += &format!("family = expression\nexpr = {expr}\na = {a}\n");
                use crate::nonlinearity::TailKind;
                let kind = match tail.kind {
                    TailKind::PowerLaw => "power",
                    TailKind::Exponential => "exponential",
                    TailKind::Bounded | TailKind::NumericOnly => "numeric",
                };
                s += &format!("tail = {kind}\n");
                if kind != "numeric" {
                    s += &format!(
                        "tail_amplitude = {}\ntail_exponent = {}\n",
                        tail.amplitude, tail.exponent_or_rate
                    );
                }
                s += &format!("tail_cutoff = {}\n", tail.cutoff);
            }
        }
        s += &format!("[problem]\nN = {}\nradii = {}\n", self.dim, join(&self.radii));
        if let Some(l) = self.lower_limit {
            s += &format!("lower_limit = {l}\n");
        }
        s += &format!("[solver]\ntol_radius = {:e}\n", self.tol_radius);
        s += &format!(
            "[picard]\nrho = {}\nsup_tol = {:e}\nmax_iters = {}\ndensity = {}\nk = {}\n",
            self.rho, self.sup_tol, self.max_iters, self.density, self.k
        );
        if let Some(o) = self.order {
            s += &format!("[expansion]\norder = {o}\n");
        }
        s += &format!("[run]\nseed = {}\n", self.seed);
        if let Some(o) = &self.out {
            s += &format!("out = {}\n", o.display());
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_overrides() {
        let text = "# comment\n[nonlinearity]\nfamily = power\np = 3\n[problem]\nN = 2 ; inline\ndistances = 1e-2, 1e-3\n";
        let mut over = RawConfig::default();
        over.set("N", "3").unwrap();
        let raw = RawConfig::parse(text).unwrap().merged(&over);
        let cfg = RunConfig::from_raw(&raw).unwrap();
        assert_eq!(cfg.family, FamilySpec::Power { p: 3.0 });
        assert_eq!(cfg.dim, 3);
        assert_eq!(cfg.radii, vec![0.99, 0.999]);
    }

    #[test]
    fn errors() {
        assert!(matches!(RawConfig::parse("bogus = 1"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(RawConfig::parse("[picard]\np = 2"), Err(ConfigError::Syntax { line: 2, .. })));
        assert!(matches!(RawConfig::parse("[nonlinearity"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(RunConfig::parse("family = power"), Err(ConfigError::Missing(_))));
        assert!(RunConfig::parse("p = 3\nradii = 1.5").is_err());
        assert!(RunConfig::parse("p = x").is_err());
    }

    #[test]
    fn text_round_trip() {
        let cfg = RunConfig::parse(
            "family = expression\nexpr = u^3 + u\na = 0.5\ntail = power\ntail_exponent = 4\ntail_amplitude = 0.25\nN = 2\norder = 4\nout = x.csv",
        )
        .unwrap();
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }
}
