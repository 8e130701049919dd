//! Experiment configuration: document parsing, validation and sweep expansion.
//!
//! A config is a single JSON or TOML document:
//!
//! ```toml
//! experiment = "duality"
//! seed = 7
//!
//! [body]
//! type = "random_polytope"
//! n = 4
//! m = 8
//! seed = 3
//!
//! [params]
//! k = [1, 2, 3]
//! epsilon = [0.25, 0.5, 0.75]
//! method = "grassmann-oracle"
//! ```
//!
//! Sweepable parameters accept a scalar or a list; the run covers the
//! cartesian product in key order.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use polywidth::bodies::BodySpec;
use polywidth::estimators::{default_lipschitz_bound, lipschitz_polytope, uniform_grid};
use polywidth::widths::WidthMethod;
use polywidth::{Body, PolytopeH, SeedSpec};
use serde_json::{Map, Value};

/// A rejected config, with the offending field path and source line when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    pub fn at(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            path: path.into(),
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.path.is_empty()) {
            (Some(l), true) => write!(f, "line {l}: {}", self.message),
            (Some(l), false) => write!(f, "line {l}, field `{}`: {}", self.path, self.message),
            (None, true) => write!(f, "{}", self.message),
            (None, false) => write!(f, "field `{}`: {}", self.path, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Widths,
    Estimate,
    Lowerbound,
    Duality,
    Theorem4,
    Ratio,
    LipschitzDemo,
    LpTightness,
    Facts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BodyUse {
    Required,
    Forbidden,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Widths,
        Experiment::Estimate,
        Experiment::Lowerbound,
        Experiment::Duality,
        Experiment::Theorem4,
        Experiment::Ratio,
        Experiment::LipschitzDemo,
        Experiment::LpTightness,
        Experiment::Facts,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Widths => "widths",
            Experiment::Estimate => "estimate",
            Experiment::Lowerbound => "lowerbound",
            Experiment::Duality => "duality",
            Experiment::Theorem4 => "theorem4",
            Experiment::Ratio => "ratio",
            Experiment::LipschitzDemo => "lipschitz-demo",
            Experiment::LpTightness => "lp-tightness",
            Experiment::Facts => "facts",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Experiment::ALL.into_iter().find(|e| e.name() == s)
    }

    fn body_use(self) -> BodyUse {
        match self {
            Experiment::LipschitzDemo | Experiment::LpTightness | Experiment::Facts => BodyUse::Forbidden,
            _ => BodyUse::Required,
        }
    }

    /// Parameter keys accepted by this experiment.
    pub fn allowed_params(self) -> &'static [&'static str] {
        const SEARCH: [&str; 3] = ["restarts", "iterations", "candidates"];
        match self {
            Experiment::Widths => &["method", SEARCH[0], SEARCH[1], SEARCH[2]],
            Experiment::Estimate => &["sigma", "trials", "method", SEARCH[0], SEARCH[1], SEARCH[2]],
            Experiment::Lowerbound => &["sigma", "c_star", "k", "samples", "search_samples", "restarts", "iterations"],
            Experiment::Duality => &["k", "epsilon", "method", SEARCH[0], SEARCH[1], SEARCH[2]],
            Experiment::Theorem4 => &["k", "c_star", "samples", "search_samples", SEARCH[0], SEARCH[1], SEARCH[2]],
            Experiment::Ratio => &[
                "sigma",
                "c_star",
                "method",
                "samples",
                "search_samples",
                SEARCH[0],
                SEARCH[1],
                SEARCH[2],
            ],
            Experiment::LipschitzDemo => &[
                "n",
                "L",
                "sigma",
                "c_star",
                "samples",
                "search_samples",
                "restarts",
                "iterations",
            ],
            Experiment::LpTightness => &["n", "p", "k", "c_star", "samples", "search_samples", "restarts", "iterations"],
            Experiment::Facts => &["c_star", "k", "samples"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Integer,
    Real,
}

struct Rule {
    name: &'static str,
    kind: Kind,
    sweepable: bool,
    /// Inclusive lower bound, or exclusive when `open_low`.
    low: f64,
    open_low: bool,
    high: f64,
    open_high: bool,
}

const fn rule(name: &'static str, kind: Kind, sweepable: bool, low: f64, open_low: bool, high: f64, open_high: bool) -> Rule {
    Rule {
        name,
        kind,
        sweepable,
        low,
        open_low,
        high,
        open_high,
    }
}

const RULES: [Rule; 13] = [
    rule("sigma", Kind::Real, true, 0.0, true, 1e12, false),
    rule("k", Kind::Integer, true, 0.0, false, 64.0, false),
    rule("epsilon", Kind::Real, true, 0.0, true, 1.0, true),
    rule("c_star", Kind::Real, true, 0.0, true, 0.2, false),
    rule("L", Kind::Real, true, 0.0, true, 1e12, false),
    rule("n", Kind::Integer, true, 1.0, false, 64.0, false),
    rule("p", Kind::Real, true, 1.0, false, 2.0, false),
    rule("samples", Kind::Integer, false, 1.0, false, 1e8, false),
    rule("search_samples", Kind::Integer, false, 1.0, false, 1e7, false),
    rule("restarts", Kind::Integer, false, 1.0, false, 1e4, false),
    rule("iterations", Kind::Integer, false, 1.0, false, 1e6, false),
    rule("candidates", Kind::Integer, false, 1.0, false, 1e8, false),
    rule("trials", Kind::Integer, false, 100.0, false, 1e8, false),
];

impl Rule {
    fn describe_range(&self) -> String {
        format!(
            "{}{}, {}{}",
            if self.open_low { "(" } else { "[" },
            self.low,
            self.high,
            if self.open_high { ")" } else { "]" }
        )
    }

    fn check(&self, path: &str, v: &Value) -> Result<f64, ConfigError> {
        let x = v
            .as_f64()
            .ok_or_else(|| ConfigError::at(path, format!("expected a number, got {v}")))?;
        if self.kind == Kind::Integer && (x.fract() != 0.0 || !x.is_finite()) {
            return Err(ConfigError::at(path, format!("expected an integer, got {x}")));
        }
        let below = if self.open_low { x <= self.low } else { x < self.low };
        let above = if self.open_high { x >= self.high } else { x > self.high };
        if !x.is_finite() || below || above {
            return Err(ConfigError::at(
                path,
                format!("{} = {x} is outside {}", self.name, self.describe_range()),
            ));
        }
        Ok(x)
    }
}

/// Validated parameters: numeric values (lists for sweeps) and the optional width method.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params {
    pub values: BTreeMap<String, Vec<f64>>,
    pub method: Option<WidthMethod>,
}

impl Params {
    pub fn list(&self, key: &str) -> Option<&[f64]> {
        self.values.get(key).map(Vec::as_slice)
    }

    /// A single-valued parameter.
    pub fn scalar(&self, key: &str) -> Option<f64> {
        self.values.get(key).and_then(|v| v.first().copied())
    }

    pub fn usize_or(&self, key: &str, default: usize) -> usize {
        self.scalar(key).map_or(default, |v| v as usize)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> f64 {
        self.scalar(key).unwrap_or(default)
    }
}

/// Where the body comes from: a literal serialization or a named generator.
#[derive(Debug, Clone, PartialEq)]
pub enum BodySource {
    Spec(BodySpec),
    Cube { n: usize },
    CrossPolytope { n: usize },
    RandomPolytope { n: usize, m: usize, seed: u64 },
    Lipschitz { n: usize, lipschitz: f64, bound: Option<f64> },
}

impl BodySource {
    pub fn build(&self) -> polywidth::Result<Body> {
        match self {
            BodySource::Spec(spec) => spec.to_body(),
            BodySource::Cube { n } => Ok(Body::cube(*n)),
            BodySource::CrossPolytope { n } => Ok(Body::PolytopeH(PolytopeH::cross_polytope(*n))),
            BodySource::RandomPolytope { n, m, seed } => {
                Ok(Body::PolytopeH(PolytopeH::random(*n, *m, &SeedSpec::new(*seed))?))
            }
            BodySource::Lipschitz { n, lipschitz, bound } => {
                let t = uniform_grid(*n);
                let b = bound.unwrap_or_else(|| default_lipschitz_bound(&t, *lipschitz));
                Ok(Body::PolytopeH(lipschitz_polytope(&t, *lipschitz, b)?))
            }
        }
    }

    fn from_value(v: &Value) -> Result<Self, ConfigError> {
        let obj = v
            .as_object()
            .ok_or_else(|| ConfigError::at("body", "expected a table/object"))?;
        let kind = obj
            .get("type")
            .and_then(Value::as_str)
            .ok_or_else(|| ConfigError::at("body.type", "missing or not a string"))?;
        let only = |keys: &[&str]| -> Result<(), ConfigError> {
            for k in obj.keys() {
                if k != "type" && !keys.contains(&k.as_str()) {
                    return Err(ConfigError::at(
                        format!("body.{k}"),
                        format!("unknown key for body type `{kind}` (allowed: {})", keys.join(", ")),
                    ));
                }
            }
            Ok(())
        };
        let int = |key: &str, low: u64| -> Result<u64, ConfigError> {
            let path = format!("body.{key}");
            let x = obj
                .get(key)
                .ok_or_else(|| ConfigError::at(&path, "missing"))?
                .as_u64()
                .ok_or_else(|| ConfigError::at(&path, "expected a non-negative integer"))?;
            if x < low {
                return Err(ConfigError::at(&path, format!("must be at least {low}, got {x}")));
            }
            Ok(x)
        };
        match kind {
            "cube" | "cross_polytope" => {
                only(&["n"])?;
                let n = int("n", 1)? as usize;
                if kind == "cross_polytope" && n > 16 {
                    return Err(ConfigError::at("body.n", "cross_polytope needs n <= 16 (2^{n-1} rows)"));
                }
                Ok(if kind == "cube" {
                    BodySource::Cube { n }
                } else {
                    BodySource::CrossPolytope { n }
                })
            }
            "random_polytope" => {
                only(&["n", "m", "seed"])?;
                let n = int("n", 1)? as usize;
                let m = int("m", n as u64)? as usize;
                let seed = obj.get("seed").map_or(Ok(0), |_| int("seed", 0))?;
                Ok(BodySource::RandomPolytope { n, m, seed })
            }
            "lipschitz" => {
                only(&["n", "L", "bound"])?;
                let n = int("n", 2)? as usize;
                let real = |key: &str, default: Option<f64>| -> Result<Option<f64>, ConfigError> {
                    match obj.get(key) {
                        None => Ok(default),
                        Some(x) => match x.as_f64() {
                            Some(v) if v > 0.0 && v.is_finite() => Ok(Some(v)),
                            _ => Err(ConfigError::at(format!("body.{key}"), "expected a positive number")),
                        },
                    }
                };
                Ok(BodySource::Lipschitz {
                    n,
                    lipschitz: real("L", Some(1.0))?.unwrap_or(1.0),
                    bound: real("bound", None)?,
                })
            }
            _ => {
                let spec: BodySpec =
                    serde_json::from_value(v.clone()).map_err(|e| ConfigError::at("body", e.to_string()))?;
                Ok(BodySource::Spec(spec))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub body: Option<BodySource>,
    pub params: Params,
    pub seed: u64,
    pub output: Option<PathBuf>,
    /// The document as read, echoed into reports.
    pub echo: Value,
}

const TOP_LEVEL: [&str; 5] = ["experiment", "body", "params", "seed", "output"];

/// Parses a JSON or TOML document into a generic value.
///
/// `.toml` files are read as TOML and `.json` as JSON; other extensions try
/// JSON first.
pub fn read_document(text: &str, path: Option<&Path>) -> Result<Value, ConfigError> {
    let ext = path.and_then(|p| p.extension()).and_then(|e| e.to_str());
    let json = |text: &str| {
        serde_json::from_str::<Value>(text).map_err(|e| ConfigError {
            path: String::new(),
            line: Some(e.line()),
            message: format!("invalid JSON: {e}"),
        })
    };
    let toml_doc = |text: &str| {
        toml::from_str::<Value>(text).map_err(|e| ConfigError {
            path: String::new(),
            line: e.span().map(|s| text[..s.start].matches('\n').count() + 1),
            message: format!("invalid TOML: {}", e.message()),
        })
    };
    match ext {
        Some("toml") => toml_doc(text),
        Some("json") => json(text),
        _ => json(text).or_else(|je| toml_doc(text).map_err(|_| je)),
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, crate::CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| crate::CliError::Io(format!("reading {}: {e}", path.display())))?;
        let doc = read_document(&text, Some(path)).map_err(|e| locate(e, &text))?;
        ExperimentConfig::from_value(&doc).map_err(|e| locate(e, &text).into())
    }

    pub fn from_value(doc: &Value) -> Result<Self, ConfigError> {
        let obj = doc
            .as_object()
            .ok_or_else(|| ConfigError::at("", "config must be a table/object"))?;
        for k in obj.keys() {
            if !TOP_LEVEL.contains(&k.as_str()) {
                return Err(ConfigError::at(
                    k.clone(),
                    format!("unknown key (allowed: {})", TOP_LEVEL.join(", ")),
                ));
            }
        }
        let name = obj
            .get("experiment")
            .ok_or_else(|| ConfigError::at("experiment", "missing"))?
            .as_str()
            .ok_or_else(|| ConfigError::at("experiment", "expected a string"))?;
        let experiment = Experiment::parse(name).ok_or_else(|| {
            let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
            ConfigError::at("experiment", format!("unknown experiment `{name}` (one of {})", names.join(", ")))
        })?;
        let seed = match obj.get("seed") {
            None => 0,
            Some(v) => v
                .as_u64()
                .ok_or_else(|| ConfigError::at("seed", format!("expected a 64-bit unsigned integer, got {v}")))?,
        };
        let output = match obj.get("output") {
            None => None,
            Some(Value::String(s)) if !s.is_empty() => Some(PathBuf::from(s)),
            Some(v) => return Err(ConfigError::at("output", format!("expected a non-empty path string, got {v}"))),
        };
        let body = match (experiment.body_use(), obj.get("body")) {
            (BodyUse::Required, None) => {
                return Err(ConfigError::at("body", format!("experiment `{name}` needs a body")))
            }
            (BodyUse::Forbidden, Some(_)) => {
                return Err(ConfigError::at(
                    "body",
                    format!("experiment `{name}` builds its own bodies; configure it through params"),
                ))
            }
            (_, Some(v)) => Some(BodySource::from_value(v)?),
            (_, None) => None,
        };
        let params = parse_params(experiment, obj.get("params"))?;
        Ok(ExperimentConfig {
            experiment,
            body,
            params,
            seed,
            output,
            echo: doc.clone(),
        })
    }
}

fn parse_params(experiment: Experiment, v: Option<&Value>) -> Result<Params, ConfigError> {
    let mut params = Params::default();
    let empty = Map::new();
    let obj = match v {
        None => &empty,
        Some(Value::Object(o)) => o,
        Some(other) => return Err(ConfigError::at("params", format!("expected a table/object, got {other}"))),
    };
    let allowed = experiment.allowed_params();
    for (key, value) in obj {
        let path = format!("params.{key}");
        if !allowed.contains(&key.as_str()) {
            return Err(ConfigError::at(
                path,
                format!("not a parameter of `{}` (allowed: {})", experiment.name(), allowed.join(", ")),
            ));
        }
        if key == "method" {
            let s = value
                .as_str()
                .ok_or_else(|| ConfigError::at(&path, "expected a method name string"))?;
            params.method = Some(WidthMethod::parse(s).ok_or_else(|| {
                ConfigError::at(
                    &path,
                    format!("unknown method `{s}` (ellipsoid-spectral, vertex-search, coordinate-only, grassmann-oracle)"),
                )
            })?);
            continue;
        }
        let rule = RULES.iter().find(|r| r.name == key).expect("every allowed numeric key has a rule");
        let values = match value {
            Value::Array(items) => {
                if !rule.sweepable {
                    return Err(ConfigError::at(path, format!("`{key}` takes a single value, not a list")));
                }
                if items.is_empty() {
                    return Err(ConfigError::at(path, "sweep list is empty"));
                }
                items
                    .iter()
                    .enumerate()
                    .map(|(i, x)| rule.check(&format!("{path}[{i}]"), x))
                    .collect::<Result<Vec<_>, _>>()?
            }
            x => vec![rule.check(&path, x)?],
        };
        params.values.insert(key.clone(), values);
    }
    Ok(params)
}

/// Attaches a source line to a field diagnostic by finding the key in the text.
fn locate(mut e: ConfigError, text: &str) -> ConfigError {
    if e.line.is_none() && !e.path.is_empty() {
        let leaf = e
            .path
            .rsplit('.')
            .next()
            .unwrap_or(&e.path)
            .split('[')
            .next()
            .unwrap_or("");
        if !leaf.is_empty() {
            e.line = text.lines().position(|l| {
                let t = l.trim_start().trim_start_matches('"');
                t.starts_with(leaf) && t[leaf.len()..].trim_start_matches('"').trim_start().starts_with(['=', ':'])
            });
            e.line = e.line.map(|l| l + 1);
        }
    }
    e
}

/// Cartesian product of the sweep lists for `keys`, with defaults for missing keys.
///
/// The first key varies slowest.
pub fn sweep(params: &Params, keys: &[(&str, Vec<f64>)]) -> Vec<BTreeMap<String, f64>> {
    let lists: Vec<(&str, Vec<f64>)> = keys
        .iter()
        .map(|(k, default)| (*k, params.list(k).map_or_else(|| default.clone(), <[f64]>::to_vec)))
        .collect();
    let mut out = vec![BTreeMap::new()];
    for (key, values) in &lists {
        out = out
            .into_iter()
            .flat_map(|combo| {
                values.iter().map(move |v| {
                    let mut c = combo.clone();
                    c.insert(key.to_string(), *v);
                    c
                })
            })
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn parse(v: Value) -> Result<ExperimentConfig, ConfigError> {
        ExperimentConfig::from_value(&v)
    }

    #[test]
    fn accepts_minimal_widths() {
        let cfg = parse(json!({"experiment": "widths", "body": {"type": "cube", "n": 3}})).unwrap();
        assert_eq!(cfg.experiment, Experiment::Widths);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.body, Some(BodySource::Cube { n: 3 }));
    }

    #[test]
    fn rejects_unknown_keys() {
        let e = parse(json!({"experiment": "widths", "body": {"type": "cube", "n": 3}, "colour": 1})).unwrap_err();
        assert_eq!(e.path, "colour");
        let e = parse(json!({"experiment": "widths", "body": {"type": "cube", "n": 3}, "params": {"sigma": 1}}))
            .unwrap_err();
        assert_eq!(e.path, "params.sigma");
        let e = parse(json!({"experiment": "widths", "body": {"type": "cube", "n": 3, "m": 2}})).unwrap_err();
        assert_eq!(e.path, "body.m");
    }

    #[test]
    fn range_diagnostics_name_the_field() {
        let base = |params: Value| json!({"experiment": "ratio", "body": {"type": "cube", "n": 2}, "params": params});
        for (params, path) in [
            (json!({"sigma": 0}), "params.sigma"),
            (json!({"c_star": 0.3}), "params.c_star"),
            (json!({"sigma": [1, -2]}), "params.sigma[1]"),
            (json!({"samples": 1.5}), "params.samples"),
            (json!({"samples": [10, 20]}), "params.samples"),
            (json!({"method": "magic"}), "params.method"),
        ] {
            assert_eq!(parse(base(params)).unwrap_err().path, path);
        }
    }

    #[test]
    fn body_rules() {
        assert_eq!(parse(json!({"experiment": "facts", "body": {"type": "cube", "n": 2}})).unwrap_err().path, "body");
        assert_eq!(parse(json!({"experiment": "duality"})).unwrap_err().path, "body");
        let e = parse(json!({"experiment": "widths", "body": {"type": "random_polytope", "n": 4, "m": 2}})).unwrap_err();
        assert_eq!(e.path, "body.m");
    }

    #[test]
    fn sweep_is_cartesian() {
        let cfg = parse(json!({
            "experiment": "duality",
            "body": {"type": "cube", "n": 4},
            "params": {"k": [1, 2, 3], "epsilon": [0.25, 0.5]}
        }))
        .unwrap();
        let combos = sweep(&cfg.params, &[("k", vec![1.0]), ("epsilon", vec![0.5])]);
        assert_eq!(combos.len(), 6);
        assert_eq!(combos[1]["k"], 1.0);
        assert_eq!(combos[1]["epsilon"], 0.5);
        let defaults = sweep(&Params::default(), &[("k", vec![1.0, 2.0])]);
        assert_eq!(defaults.len(), 2);
    }

    #[test]
    fn toml_and_json_agree() {
        let t = "experiment = \"facts\"\nseed = 4\n[params]\nc_star = [0.1, 0.2]\n";
        let j = r#"{"experiment": "facts", "seed": 4, "params": {"c_star": [0.1, 0.2]}}"#;
        let a = ExperimentConfig::from_value(&read_document(t, Some(Path::new("x.toml"))).unwrap()).unwrap();
        let b = ExperimentConfig::from_value(&read_document(j, None).unwrap()).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.seed, 4);
    }

    #[test]
    fn syntax_errors_carry_lines() {
        let e = read_document("experiment = \"facts\"\nseed = = 3\n", Some(Path::new("c.toml"))).unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = read_document("{\n\"a\": 1,\n}", Some(Path::new("c.json"))).unwrap_err();
        assert_eq!(e.line, Some(3));
    }

    #[test]
    fn locate_finds_field_line() {
        let text = "experiment = \"ratio\"\n[params]\nsigma = -1\n";
        let e = locate(ConfigError::at("params.sigma", "bad"), text);
        assert_eq!(e.line, Some(3));
    }
}
