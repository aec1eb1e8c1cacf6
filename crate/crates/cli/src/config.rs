//! Flat `key=value` configuration with section prefixes.
//!
//! Sources, in increasing precedence: a config file (`--config PATH`),
//! command-line pairs (`--key value`, `--key=value`, `key=value`). A key may
//! be abbreviated to its last segment when that is unambiguous for the
//! subcommand (`--R 100` for `barrier.R`).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::CliError;

#[derive(Debug, Clone, Copy)]
pub enum Kind {
    Float(f64, f64),
    Int(u64, u64),
    Choice(&'static [&'static str]),
    Floats(f64, f64),
    Ints(u64, u64),
    Choices(&'static [&'static str]),
    Text,
    Bool,
}

#[derive(Debug, Clone, Copy)]
pub struct KeySpec {
    pub key: &'static str,
    pub kind: Kind,
    pub default: Option<&'static str>,
}

const fn key(key: &'static str, kind: Kind, default: Option<&'static str>) -> KeySpec {
    KeySpec { key, kind, default }
}

const BIG: f64 = 1e12;
const VARIANTS: &[&str] = &["G", "RHO"];

const OUTPUT: &[KeySpec] = &[
    key("output.dir", Kind::Text, Some(".")),
    key("output.name", Kind::Text, None),
];

const POTENTIAL: KeySpec = key("potential", Kind::Text, Some("quartic"));

pub fn keys_for(sub: &str) -> Option<Vec<KeySpec>> {
    let own: &[KeySpec] = match sub {
        "profile" => &[
            POTENTIAL,
            key("profile.t_min", Kind::Float(-1e3, 1e3), Some("-8")),
            key("profile.t_max", Kind::Float(-1e3, 1e3), Some("8")),
            key("profile.steps", Kind::Int(1, 10_000_000), Some("1600")),
        ],
        "barrier" => &[
            POTENTIAL,
            key("barrier.R", Kind::Float(1.0, BIG), None),
            key("barrier.n", Kind::Int(1, 8), Some("2")),
            key("barrier.variant", Kind::Choice(VARIANTS), Some("G")),
            key("barrier.t_min", Kind::Float(-1e6, 1e6), Some("-20")),
            key("barrier.t_max", Kind::Float(-1e6, 1e6), Some("20")),
            key("barrier.steps", Kind::Int(1, 10_000_000), Some("4000")),
        ],
        "verify-barrier" => &[
            POTENTIAL,
            key("barrier.R", Kind::Floats(1.0, BIG), Some("50,100,200,400")),
            key("barrier.n", Kind::Ints(1, 8), Some("1,2,3")),
            key("barrier.variant", Kind::Choices(VARIANTS), Some("G,RHO")),
            key("radial.dimensions", Kind::Ints(2, 8), Some("2,3")),
            key("radial.radii", Kind::Floats(1.0, 1e4), Some("50,100")),
            key("radial.step", Kind::Float(1e-4, 1.0), Some("0.01")),
            key("ordering.n", Kind::Ints(1, 8), Some("1,2,3")),
        ],
        "minimize" => &[
            POTENTIAL,
            key("grid.n", Kind::Int(2, 3), Some("2")),
            key("grid.half_width", Kind::Floats(1e-3, 1e6), None),
            key("grid.h", Kind::Float(1e-6, 1e3), None),
            key("grid.max_nodes", Kind::Int(1, 1 << 40), Some("20000000")),
            key("boundary.kind", Kind::Choice(&["flat", "tilt", "sine", "sphere", "constant"]), Some("flat")),
            key("boundary.shift", Kind::Float(-1e6, 1e6), Some("0")),
            key("boundary.degrees", Kind::Float(-90.0, 90.0), None),
            key("boundary.amplitude", Kind::Float(-1e6, 1e6), None),
            key("boundary.radius", Kind::Float(0.0, 1e6), None),
            key("boundary.value", Kind::Float(-1.0, 1.0), None),
            key("solver.tol", Kind::Float(1e-15, 1.0), Some("1e-6")),
            key("solver.tau", Kind::Float(0.0, 1e6), None),
            key("solver.max_sweeps", Kind::Int(1, 1 << 40), Some("1000000")),
            key("solver.record_every", Kind::Int(1, 1 << 40), Some("50")),
            key("check.window", Kind::Float(0.0, 1e6), None),
        ],
        "flatness" => &[
            key("input.field", Kind::Text, None),
            key("flatness.xi", Kind::Floats(-1e6, 1e6), None),
            key("harnack.l", Kind::Float(0.0, 1e6), None),
            key("harnack.min_delta", Kind::Float(0.0, 1.0), Some("0.05")),
        ],
        "cascade" => &[
            key("input.field", Kind::Text, None),
            key("cascade.l0", Kind::Float(0.0, 1e6), None),
            key("cascade.levels", Kind::Int(1, 64), Some("3")),
        ],
        "energy" => &[
            POTENTIAL,
            key("input.field", Kind::Text, None),
            key("energy.eps", Kind::Float(1e-12, 1e12), Some("1")),
            key("energy.lo", Kind::Floats(-1e12, 1e12), None),
            key("energy.hi", Kind::Floats(-1e12, 1e12), None),
            key("energy.area", Kind::Float(0.0, 1e12), None),
        ],
        "contact" => &[
            key("surface.kind", Kind::Choice(&["file", "flat", "paraboloid", "bumps", "peaked"]), None),
            key("input.surface", Kind::Text, None),
            key("surface.n", Kind::Int(1, 2), Some("2")),
            key("surface.m", Kind::Int(3, 4097), Some("129")),
            key("surface.value", Kind::Float(-1e12, 1e12), Some("0")),
            key("surface.b", Kind::Float(-1e12, 1e12), Some("1")),
            key("surface.offset", Kind::Float(-1e12, 1e12), Some("0")),
            key("surface.count", Kind::Int(1, 10_000), Some("8")),
            key("surface.hessian", Kind::Float(0.0, 1e12), None),
            key("surface.seed", Kind::Int(0, u64::MAX), None),
            key("surface.bowl", Kind::Float(0.0, 1e12), Some("0.01")),
            key("surface.lift", Kind::Float(-1e12, 1e12), None),
            key("peak.centre", Kind::Floats(-1.0, 1.0), Some("0.3,0")),
            key("peak.slope", Kind::Float(0.0, 1e6), Some("0.04")),
            key("peak.radius", Kind::Float(0.0, 2.0), Some("0.25")),
            key("peak.tip", Kind::Float(1e-9, 1.0), Some("0.02")),
            key("peak.rim", Kind::Float(1e-9, 1.0), Some("0.02")),
            key("contact.params", Kind::Text, None),
            key("contact.mode", Kind::Choice(&["set", "abp", "covering", "weak-harnack", "opposite"]), Some("set")),
            key("contact.a", Kind::Float(0.0, 1e12), None),
            key("contact.I", Kind::Floats(0.0, 1e12), None),
            key("contact.lambda", Kind::Float(0.0, 1e12), None),
            key("contact.M", Kind::Float(1.0, 1e12), None),
            key("contact.mu", Kind::Float(0.0, 1.0), None),
            key("contact.theta", Kind::Float(0.0, 1e12), None),
            key("contact.sense", Kind::Choice(&["below", "above"]), Some("below")),
            key("contact.centers", Kind::Float(0.0, 1.0), None),
            key("contact.c_open", Kind::Float(1.0, 1e6), Some("2")),
            key("contact.k_max", Kind::Int(0, 60), Some("8")),
            key("contact.nonnegative", Kind::Bool, Some("false")),
        ],
        _ => return None,
    };
    Some(own.iter().chain(OUTPUT).copied().collect())
}

/// JSON parameter-block names accepted by `contact.params`.
const CONTACT_JSON: &[(&str, &str)] = &[
    ("a", "contact.a"),
    ("I", "contact.I"),
    ("M", "contact.M"),
    ("mu", "contact.mu"),
    ("μ", "contact.mu"),
    ("theta", "contact.theta"),
    ("θ", "contact.theta"),
    ("sense", "contact.sense"),
    ("centers", "contact.centers"),
    ("lambda", "contact.lambda"),
    ("Λ", "contact.lambda"),
    ("mode", "contact.mode"),
    ("seed", "surface.seed"),
];

#[derive(Debug, Clone)]
pub struct Config {
    pub subcommand: String,
    specs: Vec<KeySpec>,
    /// Supplied values (after alias resolution), no defaults.
    given: BTreeMap<String, String>,
}

impl Config {
    /// Builds a configuration from a file and command-line pairs.
    pub fn load(subcommand: &str, args: &[String]) -> Result<Self, CliError> {
        let specs = keys_for(subcommand)
            .ok_or_else(|| CliError::config("unknown_subcommand", format!("unknown subcommand {subcommand:?}")))?;
        let pairs = split_args(args)?;
        let mut file_path: Option<PathBuf> = None;
        let mut cli = Vec::new();
        for (k, v) in pairs {
            if k == "config" {
                if file_path.replace(PathBuf::from(&v)).is_some() {
                    return Err(CliError::config("duplicate_key", "--config given twice"));
                }
            } else {
                cli.push((k, v));
            }
        }
        let mut cfg = Config {
            subcommand: subcommand.to_string(),
            specs,
            given: BTreeMap::new(),
        };
        if let Some(path) = &file_path {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::config("unreadable_config", format!("cannot read {}: {e}", path.display())))?;
            let mut seen = BTreeMap::new();
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    CliError::config("malformed_config", format!("{}:{}: expected key=value", path.display(), lineno + 1))
                })?;
                let (k, v) = (k.trim(), v.trim());
                if k == "command" {
                    if v != subcommand {
                        return Err(CliError::config(
                            "subcommand_mismatch",
                            format!("config file is for {v:?}, invoked as {subcommand:?}"),
                        ));
                    }
                    continue;
                }
                let k = cfg.resolve(k)?;
                if seen.insert(k.clone(), ()).is_some() {
                    return Err(CliError::config("duplicate_key", format!("{k} set twice in {}", path.display())));
                }
                cfg.given.insert(k, v.to_string());
            }
        }
        let mut seen = BTreeMap::new();
        for (k, v) in cli {
            let k = cfg.resolve(&k)?;
            if seen.insert(k.clone(), ()).is_some() {
                return Err(CliError::config("duplicate_key", format!("{k} given twice on the command line")));
            }
            cfg.given.insert(k, v);
        }
        if cfg.given.is_empty() {
            return Err(CliError::config("empty_config", "empty configuration"));
        }
        if let Some(path) = cfg.given.get("contact.params").cloned() {
            cfg.merge_json(Path::new(&path))?;
        }
        for (k, v) in &cfg.given {
            let spec = cfg.spec(k).expect("resolved key");
            validate(spec, v)?;
        }
        Ok(cfg)
    }

    fn spec(&self, key: &str) -> Option<&KeySpec> {
        self.specs.iter().find(|s| s.key == key)
    }

    fn resolve(&self, key: &str) -> Result<String, CliError> {
        let key = match key {
            "out" => "output.dir",
            "name" => "output.name",
            k => k,
        };
        if self.spec(key).is_some() {
            return Ok(key.to_string());
        }
        let hits: Vec<&str> = self
            .specs
            .iter()
            .map(|s| s.key)
            .filter(|k| k.rsplit('.').next() == Some(key))
            .collect();
        match hits.as_slice() {
            [one] => Ok(one.to_string()),
            [] => Err(CliError::config(
                "unknown_key",
                format!("unknown key {key:?} for {}", self.subcommand),
            )),
            many => Err(CliError::config(
                "ambiguous_key",
                format!("{key:?} could be any of {}", many.join(", ")),
            )),
        }
    }

    fn merge_json(&mut self, path: &Path) -> Result<(), CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config("unreadable_config", format!("cannot read {}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::config("malformed_config", format!("{}: {e}", path.display())))?;
        let obj = value
            .as_object()
            .ok_or_else(|| CliError::config("malformed_config", format!("{} is not a JSON object", path.display())))?;
        for (name, v) in obj {
            let target = CONTACT_JSON
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, k)| *k)
                .ok_or_else(|| CliError::config("unknown_key", format!("unknown parameter {name:?} in {}", path.display())))?;
            let text = match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Number(x) => x.to_string(),
                serde_json::Value::Bool(b) => b.to_string(),
                serde_json::Value::Array(items) => items
                    .iter()
                    .map(|x| match x {
                        serde_json::Value::Number(x) => Ok(x.to_string()),
                        _ => Err(CliError::config("malformed_config", format!("{name}: list entries must be numbers"))),
                    })
                    .collect::<Result<Vec<_>, _>>()?
                    .join(","),
                _ => return Err(CliError::config("malformed_config", format!("{name}: unsupported value {v}"))),
            };
            if self.given.contains_key(target) {
                return Err(CliError::config(
                    "duplicate_key",
                    format!("{target} set both directly and in {}", path.display()),
                ));
            }
            self.given.insert(target.to_string(), text);
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        debug_assert!(self.spec(key).is_some(), "undeclared key {key}");
        self.given
            .get(key)
            .map(String::as_str)
            .or_else(|| self.spec(key).and_then(|s| s.default))
    }

    fn require(&self, key: &str) -> Result<&str, CliError> {
        self.get(key)
            .ok_or_else(|| CliError::config("missing_key", format!("{key} is required for {}", self.subcommand)))
    }

    pub fn text(&self, key: &str) -> Result<String, CliError> {
        self.require(key).map(str::to_string)
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        Ok(self.require(key)?.parse().expect("validated"))
    }

    pub fn opt_f64(&self, key: &str) -> Option<f64> {
        self.get(key).map(|v| v.parse().expect("validated"))
    }

    pub fn usize(&self, key: &str) -> Result<usize, CliError> {
        let v: u64 = self.require(key)?.parse().expect("validated");
        usize::try_from(v).map_err(|_| CliError::config("out_of_range", format!("{key} = {v} too large")))
    }

    pub fn u64(&self, key: &str) -> Result<u64, CliError> {
        Ok(self.require(key)?.parse().expect("validated"))
    }

    pub fn bool(&self, key: &str) -> Result<bool, CliError> {
        Ok(self.require(key)? == "true")
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        Ok(split_list(self.require(key)?).map(|v| v.parse().expect("validated")).collect())
    }

    pub fn opt_f64_list(&self, key: &str) -> Option<Vec<f64>> {
        self.get(key).map(|s| split_list(s).map(|v| v.parse().expect("validated")).collect())
    }

    pub fn usize_list(&self, key: &str) -> Result<Vec<usize>, CliError> {
        Ok(split_list(self.require(key)?).map(|v| v.parse().expect("validated")).collect())
    }

    pub fn text_list(&self, key: &str) -> Result<Vec<String>, CliError> {
        Ok(split_list(self.require(key)?).map(str::to_string).collect())
    }

    /// Every key with a value (supplied or default), sorted.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut out: BTreeMap<String, String> = self
            .specs
            .iter()
            .filter_map(|s| s.default.map(|d| (s.key.to_string(), d.to_string())))
            .collect();
        out.extend(self.given.clone());
        out.entry("output.name".into()).or_insert_with(|| self.subcommand.clone());
        out
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(self.get("output.dir").unwrap_or("."))
    }

    pub fn output_name(&self) -> String {
        self.get("output.name").unwrap_or(&self.subcommand).to_string()
    }
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim)
}

fn split_args(args: &[String]) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(tok) = it.next() {
        if let Some(flag) = tok.strip_prefix("--") {
            if let Some((k, v)) = flag.split_once('=') {
                out.push((k.to_string(), v.to_string()));
            } else {
                let v = it
                    .next()
                    .ok_or_else(|| CliError::config("malformed_config", format!("--{flag} needs a value")))?;
                out.push((flag.to_string(), v.clone()));
            }
        } else if let Some((k, v)) = tok.split_once('=') {
            out.push((k.to_string(), v.to_string()));
        } else {
            return Err(CliError::config("malformed_config", format!("unexpected argument {tok:?}")));
        }
    }
    Ok(out)
}

fn validate(spec: &KeySpec, value: &str) -> Result<(), CliError> {
    let bad = |why: String| CliError::config("out_of_range", format!("{} = {value:?}: {why}", spec.key));
    let float = |v: &str, lo: f64, hi: f64| -> Result<(), CliError> {
        let x: f64 = v.parse().map_err(|_| bad(format!("{v:?} is not a number")))?;
        if !(lo..=hi).contains(&x) {
            return Err(bad(format!("must lie in [{lo}, {hi}]")));
        }
        Ok(())
    };
    let int = |v: &str, lo: u64, hi: u64| -> Result<(), CliError> {
        let x: u64 = v.parse().map_err(|_| bad(format!("{v:?} is not a nonnegative integer")))?;
        if !(lo..=hi).contains(&x) {
            return Err(bad(format!("must lie in [{lo}, {hi}]")));
        }
        Ok(())
    };
    let choice = |v: &str, set: &[&str]| -> Result<(), CliError> {
        if set.contains(&v) {
            Ok(())
        } else {
            Err(bad(format!("expected one of {}", set.join("|"))))
        }
    };
    match spec.kind {
        Kind::Float(lo, hi) => float(value, lo, hi),
        Kind::Int(lo, hi) => int(value, lo, hi),
        Kind::Choice(set) => choice(value, set),
        Kind::Floats(lo, hi) => split_list(value).try_for_each(|v| float(v, lo, hi)),
        Kind::Ints(lo, hi) => split_list(value).try_for_each(|v| int(v, lo, hi)),
        Kind::Choices(set) => split_list(value).try_for_each(|v| choice(v, set)),
        Kind::Text => {
            if value.is_empty() {
                Err(bad("empty value".into()))
            } else {
                Ok(())
            }
        }
        Kind::Bool => choice(value, &["true", "false"]),
    }
}
