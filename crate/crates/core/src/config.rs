//! Experiment configuration: TOML text with `[model]`, `[run]` and
//! `[tolerances]` sections, `section.key=value` overrides and validation.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::cadlag::fmt_f64;
use crate::error::{Error, Result};
use crate::models::{GarchSpec, ModelSpec, RegVarSpec};

pub const DEFAULT_SEED: u64 = 1;

/// Verdict thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    pub ks_fidi: f64,
    pub ks_selfnorm: f64,
    pub ks_selfnorm_clustered: f64,
    pub karamata_rel: f64,
    pub slutsky_se_mult: f64,
    pub contrast_order_frac: f64,
    pub theta_abs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub limit_draws: usize,
    pub t_grid: Vec<f64>,
    /// Quantile level of `|X|` defining exceedance thresholds.
    pub u_level: f64,
    /// Block length `r_n = ceil(n^kappa)`.
    pub kappa: f64,
    pub seed: u64,
    pub n_pts: usize,
    pub mc_size: usize,
    pub contrast_replicates: usize,
    /// Sample sizes of the J1/M1 contrast.
    pub contrast_n_grid: Vec<usize>,
    pub resolution: usize,
    pub karamata_n: usize,
    pub karamata_draws: usize,
    pub karamata_u: Vec<f64>,
    pub slutsky_n: usize,
    pub slutsky_replicates: usize,
    pub slutsky_u: Vec<f64>,
    pub slutsky_eps: Vec<f64>,
    pub theta_n: usize,
    pub theta_replicates: usize,
    pub tolerances: Tolerances,
    /// Keys filled from defaults, as `section.key`.
    pub defaulted: Vec<String>,
}

const MODEL_KEYS: &[&str] = &["variant", "alpha", "p", "scale", "coeffs", "omega", "a1", "b1"];
const RUN_KEYS: &[&str] = &[
    "n_grid",
    "replicates",
    "limit_draws",
    "t_grid",
    "u_level",
    "kappa",
    "seed",
    "n_pts",
    "mc_size",
    "contrast_replicates",
    "contrast_n_grid",
    "resolution",
    "karamata_n",
    "karamata_draws",
    "karamata_u",
    "slutsky_n",
    "slutsky_replicates",
    "slutsky_u",
    "slutsky_eps",
    "theta_n",
    "theta_replicates",
];
const TOL_KEYS: &[&str] = &[
    "ks_fidi",
    "ks_selfnorm",
    "ks_selfnorm_clustered",
    "karamata_rel",
    "slutsky_se_mult",
    "contrast_order_frac",
    "theta_abs",
];

/// Line (1-based) of `key` inside `[section]`, or 0 when absent.
fn line_of(text: &str, section: &str, key: &str) -> usize {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = h.trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return i + 1;
                }
            }
        }
    }
    0
}

struct Reader<'a> {
    text: &'a str,
    table: &'a Table,
    defaulted: Vec<String>,
}

impl<'a> Reader<'a> {
    fn err(&self, section: &str, key: &str, msg: impl Into<String>) -> Error {
        Error::Config {
            key: format!("{section}.{key}"),
            line: line_of(self.text, section, key),
            msg: msg.into(),
        }
    }

    fn get(&self, section: &str, key: &str) -> Option<&'a Value> {
        self.table.get(section).and_then(|s| s.get(key))
    }

    fn float(&mut self, section: &str, key: &str, default: Option<f64>) -> Result<f64> {
        match self.get(section, key) {
            Some(Value::Float(f)) => Ok(*f),
            Some(Value::Integer(i)) => Ok(*i as f64),
            Some(other) => Err(self.err(section, key, format!("expected a number, got {other}"))),
            None => match default {
                Some(d) => {
                    self.defaulted.push(format!("{section}.{key}"));
                    Ok(d)
                }
                None => Err(self.err(section, key, "required key is missing")),
            },
        }
    }

    fn count(&mut self, section: &str, key: &str, default: usize) -> Result<usize> {
        match self.get(section, key) {
            Some(Value::Integer(i)) if *i >= 0 => Ok(*i as usize),
            Some(Value::Float(f)) if *f >= 0.0 && f.fract() == 0.0 => Ok(*f as usize),
            Some(other) => Err(self.err(
                section,
                key,
                format!("expected a nonnegative integer, got {other}"),
            )),
            None => {
                self.defaulted.push(format!("{section}.{key}"));
                Ok(default)
            }
        }
    }

    fn floats(&mut self, section: &str, key: &str, default: Option<&[f64]>) -> Result<Vec<f64>> {
        match self.get(section, key) {
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    Value::Float(f) => Ok(*f),
                    Value::Integer(i) => Ok(*i as f64),
                    other => Err(self.err(section, key, format!("expected numbers, got {other}"))),
                })
                .collect(),
            Some(other) => Err(self.err(section, key, format!("expected a list, got {other}"))),
            None => match default {
                Some(d) => {
                    self.defaulted.push(format!("{section}.{key}"));
                    Ok(d.to_vec())
                }
                None => Err(self.err(section, key, "required key is missing")),
            },
        }
    }

    fn counts(&mut self, section: &str, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        let as_f: Vec<f64> = default.iter().map(|&v| v as f64).collect();
        let v = self.floats(section, key, Some(&as_f))?;
        v.iter()
            .map(|x| {
                if *x >= 1.0 && x.fract() == 0.0 {
                    Ok(*x as usize)
                } else {
                    Err(self.err(section, key, format!("{x} is not a positive integer")))
                }
            })
            .collect()
    }
}

fn check(cond: bool, r: &Reader, section: &str, key: &str, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(r.err(section, key, msg))
    }
}

/// Parses and validates a configuration, applying `section.key=value`
/// overrides (later ones win) on top of the file.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    parse_config_with_env_seed(text, overrides, std::env::var("SEED").ok().as_deref())
}

/// As [`parse_config`], with the lowest-precedence seed given explicitly.
pub fn parse_config_with_env_seed(
    text: &str,
    overrides: &[String],
    env_seed: Option<&str>,
) -> Result<ExperimentConfig> {
    let mut table: Table = text.parse().map_err(|e: toml::de::Error| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].lines().count().max(1))
            .unwrap_or(0);
        Error::Config {
            key: "<syntax>".into(),
            line,
            msg: e.message().to_string(),
        }
    })?;
    for (section, value) in &table {
        let known: &[&str] = match section.as_str() {
            "model" => MODEL_KEYS,
            "run" => RUN_KEYS,
            "tolerances" => TOL_KEYS,
            _ => {
                return Err(Error::Config {
                    key: section.clone(),
                    line: text
                        .lines()
                        .position(|l| l.trim() == format!("[{section}]"))
                        .map_or(0, |i| i + 1),
                    msg: "unknown section".into(),
                })
            }
        };
        let Value::Table(inner) = value else {
            return Err(Error::Config {
                key: section.clone(),
                line: 0,
                msg: "expected a section".into(),
            });
        };
        for key in inner.keys() {
            if !known.contains(&key.as_str()) {
                return Err(Error::Config {
                    key: format!("{section}.{key}"),
                    line: line_of(text, section, key),
                    msg: "unknown key".into(),
                });
            }
        }
    }
    for ov in overrides {
        apply_override(&mut table, ov)?;
    }
    let mut r = Reader {
        text,
        table: &table,
        defaulted: Vec::new(),
    };
    let model = read_model(&mut r)?;
    let n_grid = r.counts("run", "n_grid", &[100, 1000, 10_000])?;
    check(
        !n_grid.is_empty() && n_grid.windows(2).all(|w| w[0] < w[1]),
        &r,
        "run",
        "n_grid",
        "must be a nonempty increasing list",
    )?;
    let replicates = r.count("run", "replicates", 2000)?;
    check(replicates >= 1, &r, "run", "replicates", "must be at least 1")?;
    let limit_draws = r.count("run", "limit_draws", replicates)?;
    let t_grid = r.floats("run", "t_grid", Some(&[0.25, 0.5, 0.75, 1.0]))?;
    check(
        t_grid.windows(2).all(|w| w[0] < w[1])
            && t_grid.iter().all(|t| (0.0..=1.0).contains(t))
            && t_grid.last() == Some(&1.0),
        &r,
        "run",
        "t_grid",
        "must be increasing within [0, 1] and end at 1",
    )?;
    let u_level = r.float("run", "u_level", Some(0.99))?;
    check(
        u_level > 0.9 && u_level < 1.0,
        &r,
        "run",
        "u_level",
        "quantile level must lie in (0.9, 1)",
    )?;
    let kappa = r.float("run", "kappa", Some(0.5))?;
    check(kappa > 0.0 && kappa < 1.0, &r, "run", "kappa", "must lie in (0, 1)")?;
    let seed = match r.get("run", "seed") {
        Some(Value::Integer(i)) if *i >= 0 => *i as u64,
        Some(other) => {
            return Err(r.err("run", "seed", format!("expected a nonnegative integer, got {other}")))
        }
        None => {
            r.defaulted.push("run.seed".into());
            match env_seed {
                Some(s) => s.trim().parse().map_err(|_| Error::Config {
                    key: "SEED".into(),
                    line: 0,
                    msg: format!("environment seed `{s}` is not an integer"),
                })?,
                None => DEFAULT_SEED,
            }
        }
    };
    let n_pts = r.count("run", "n_pts", 10_000)?;
    check(n_pts >= 1000, &r, "run", "n_pts", "must be at least 1000")?;
    let mc_size = r.count("run", "mc_size", 100_000)?;
    check(mc_size >= 10_000, &r, "run", "mc_size", "must be at least 10000")?;
    let contrast_replicates = r.count("run", "contrast_replicates", 200)?;
    let contrast_n_grid = r.counts("run", "contrast_n_grid", &[100, 1000, 10_000])?;
    check(
        !contrast_n_grid.is_empty() && contrast_n_grid.windows(2).all(|w| w[0] < w[1]),
        &r,
        "run",
        "contrast_n_grid",
        "must be a nonempty increasing list",
    )?;
    let resolution = r.count("run", "resolution", 8)?;
    check(resolution >= 2, &r, "run", "resolution", "must be at least 2")?;
    let karamata_n = r.count("run", "karamata_n", 1_000_000)?;
    let karamata_draws = r.count("run", "karamata_draws", 1_000_000)?;
    let karamata_u = r.floats("run", "karamata_u", Some(&[0.05, 0.1, 0.5]))?;
    check(
        karamata_u.iter().all(|u| *u > 0.0),
        &r,
        "run",
        "karamata_u",
        "levels must be positive",
    )?;
    let slutsky_n = r.count("run", "slutsky_n", 10_000)?;
    let slutsky_replicates = r.count("run", "slutsky_replicates", 500)?;
    let slutsky_u = r.floats("run", "slutsky_u", Some(&[0.01, 0.05, 0.1]))?;
    let slutsky_eps = r.floats("run", "slutsky_eps", Some(&[0.5, 1.0, 2.0]))?;
    check(
        slutsky_u.iter().chain(&slutsky_eps).all(|v| *v > 0.0),
        &r,
        "run",
        "slutsky_u",
        "levels must be positive",
    )?;
    let theta_n = r.count("run", "theta_n", 100_000)?;
    let theta_replicates = r.count("run", "theta_replicates", 50)?;
    let tolerances = Tolerances {
        ks_fidi: r.float("tolerances", "ks_fidi", Some(0.06))?,
        ks_selfnorm: r.float("tolerances", "ks_selfnorm", Some(0.07))?,
        ks_selfnorm_clustered: r.float("tolerances", "ks_selfnorm_clustered", Some(0.09))?,
        karamata_rel: r.float("tolerances", "karamata_rel", Some(0.05))?,
        slutsky_se_mult: r.float("tolerances", "slutsky_se_mult", Some(3.0))?,
        contrast_order_frac: r.float("tolerances", "contrast_order_frac", Some(0.95))?,
        theta_abs: r.float("tolerances", "theta_abs", Some(0.08))?,
    };
    let defaulted = std::mem::take(&mut r.defaulted);
    Ok(ExperimentConfig {
        model,
        n_grid,
        replicates,
        limit_draws,
        t_grid,
        u_level,
        kappa,
        seed,
        n_pts,
        mc_size,
        contrast_replicates,
        contrast_n_grid,
        resolution,
        karamata_n,
        karamata_draws,
        karamata_u,
        slutsky_n,
        slutsky_replicates,
        slutsky_u,
        slutsky_eps,
        theta_n,
        theta_replicates,
        tolerances,
        defaulted,
    })
}

fn read_model(r: &mut Reader) -> Result<ModelSpec> {
    let variant = match r.get("model", "variant") {
        Some(Value::String(s)) => s.clone(),
        Some(other) => return Err(r.err("model", "variant", format!("expected a string, got {other}"))),
        None => return Err(r.err("model", "variant", "required key is missing")),
    };
    let regvar = |r: &mut Reader| -> Result<RegVarSpec> {
        let alpha = r.float("model", "alpha", None)?;
        check(
            alpha > 0.0 && alpha < 2.0,
            r,
            "model",
            "alpha",
            &format!("alpha = {alpha} out of range: alpha must lie in (0,2)"),
        )?;
        let p = r.float("model", "p", Some(1.0))?;
        check((0.0..=1.0).contains(&p), r, "model", "p", "p must lie in [0, 1]")?;
        let scale = r.float("model", "scale", Some(1.0))?;
        check(scale > 0.0, r, "model", "scale", "scale must be positive")?;
        RegVarSpec::new(alpha, p, scale)
    };
    let garch = |r: &mut Reader| -> Result<GarchSpec> {
        let g = GarchSpec {
            omega: r.float("model", "omega", Some(1.0))?,
            a1: r.float("model", "a1", Some(0.5))?,
            b1: r.float("model", "b1", Some(0.3))?,
        };
        check(g.omega > 0.0, r, "model", "omega", "omega must be positive")?;
        check(g.a1 >= 0.0, r, "model", "a1", "a1 must be nonnegative")?;
        check(g.b1 >= 0.0, r, "model", "b1", "b1 must be nonnegative")?;
        Ok(g)
    };
    let spec = match variant.as_str() {
        "iid" => ModelSpec::Iid(regvar(r)?),
        "linear" => {
            let innovation = regvar(r)?;
            let coeffs = r.floats("model", "coeffs", None)?;
            check(
                coeffs.iter().any(|c| *c != 0.0),
                r,
                "model",
                "coeffs",
                "coefficients must not all be zero",
            )?;
            ModelSpec::Linear { coeffs, innovation }
        }
        "garch" => ModelSpec::Garch(garch(r)?),
        "squared_garch" => ModelSpec::SquaredGarch(garch(r)?),
        other => {
            return Err(r.err(
                "model",
                "variant",
                format!("unknown variant `{other}` (iid, linear, garch, squared_garch)"),
            ))
        }
    };
    spec.validate()?;
    Ok(spec)
}

/// Applies one `section.key=value` override; the value is read as TOML,
/// falling back to a bare string.
pub fn apply_override(table: &mut Table, ov: &str) -> Result<()> {
    let bad = |msg: &str| Error::Config {
        key: ov.to_string(),
        line: 0,
        msg: msg.to_string(),
    };
    let (path, raw) = ov.split_once('=').ok_or_else(|| bad("override must be key=value"))?;
    let (section, key) = path
        .trim()
        .split_once('.')
        .ok_or_else(|| bad("override key must be section.key"))?;
    let known: &[&str] = match section {
        "model" => MODEL_KEYS,
        "run" => RUN_KEYS,
        "tolerances" => TOL_KEYS,
        _ => return Err(bad("unknown section")),
    };
    if !known.contains(&key) {
        return Err(bad("unknown key"));
    }
    let value = match format!("v = {}", raw.trim()).parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => Value::String(raw.trim().to_string()),
    };
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| Value::Table(Table::new()));
    match entry {
        Value::Table(t) => {
            t.insert(key.to_string(), value);
            Ok(())
        }
        _ => Err(bad("section is not a table")),
    }
}

fn list_f(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| fmt_f64(*x)).collect();
    format!("[{}]", items.join(", "))
}

fn list_u(v: &[usize]) -> String {
    let items: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("[{}]", items.join(", "))
}

impl ExperimentConfig {
    /// Canonical text of the effective configuration, with defaulted keys
    /// marked. Parsing it back yields the same configuration.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let d = |k: &str| {
            if self.defaulted.iter().any(|x| x == k) {
                "  # default"
            } else {
                ""
            }
        };
        let _ = writeln!(out, "[model]");
        let _ = writeln!(out, "variant = \"{}\"", self.model.name());
        match &self.model {
            ModelSpec::Iid(rv) | ModelSpec::Linear { innovation: rv, .. } => {
                let _ = writeln!(out, "alpha = {}", fmt_f64(rv.alpha));
                let _ = writeln!(out, "p = {}{}", fmt_f64(rv.p), d("model.p"));
                let _ = writeln!(out, "scale = {}{}", fmt_f64(rv.scale), d("model.scale"));
                if let ModelSpec::Linear { coeffs, .. } = &self.model {
                    let _ = writeln!(out, "coeffs = {}", list_f(coeffs));
                }
            }
            ModelSpec::Garch(g) | ModelSpec::SquaredGarch(g) => {
                let _ = writeln!(out, "omega = {}{}", fmt_f64(g.omega), d("model.omega"));
                let _ = writeln!(out, "a1 = {}{}", fmt_f64(g.a1), d("model.a1"));
                let _ = writeln!(out, "b1 = {}{}", fmt_f64(g.b1), d("model.b1"));
            }
        }
        let _ = writeln!(out, "\n[run]");
        let counts: [(&str, usize); 14] = [
            ("replicates", self.replicates),
            ("limit_draws", self.limit_draws),
            ("seed", self.seed as usize),
            ("n_pts", self.n_pts),
            ("mc_size", self.mc_size),
            ("contrast_replicates", self.contrast_replicates),
            ("resolution", self.resolution),
            ("karamata_n", self.karamata_n),
            ("karamata_draws", self.karamata_draws),
            ("slutsky_n", self.slutsky_n),
            ("slutsky_replicates", self.slutsky_replicates),
            ("theta_n", self.theta_n),
            ("theta_replicates", self.theta_replicates),
            ("", 0),
        ];
        let _ = writeln!(out, "n_grid = {}{}", list_u(&self.n_grid), d("run.n_grid"));
        let _ = writeln!(
            out,
            "contrast_n_grid = {}{}",
            list_u(&self.contrast_n_grid),
            d("run.contrast_n_grid")
        );
        for (k, v) in counts.iter().filter(|c| !c.0.is_empty()) {
            let _ = writeln!(out, "{k} = {v}{}", d(&format!("run.{k}")));
        }
        let floats: [(&str, &[f64]); 5] = [
            ("t_grid", &self.t_grid),
            ("karamata_u", &self.karamata_u),
            ("slutsky_u", &self.slutsky_u),
            ("slutsky_eps", &self.slutsky_eps),
            ("", &[]),
        ];
        for (k, v) in floats.iter().filter(|c| !c.0.is_empty()) {
            let _ = writeln!(out, "{k} = {}{}", list_f(v), d(&format!("run.{k}")));
        }
        let _ = writeln!(out, "u_level = {}{}", fmt_f64(self.u_level), d("run.u_level"));
        let _ = writeln!(out, "kappa = {}{}", fmt_f64(self.kappa), d("run.kappa"));
        let _ = writeln!(out, "\n[tolerances]");
        let t = &self.tolerances;
        for (k, v) in [
            ("ks_fidi", t.ks_fidi),
            ("ks_selfnorm", t.ks_selfnorm),
            ("ks_selfnorm_clustered", t.ks_selfnorm_clustered),
            ("karamata_rel", t.karamata_rel),
            ("slutsky_se_mult", t.slutsky_se_mult),
            ("contrast_order_frac", t.contrast_order_frac),
            ("theta_abs", t.theta_abs),
        ] {
            let _ = writeln!(out, "{k} = {}{}", fmt_f64(v), d(&format!("tolerances.{k}")));
        }
        out
    }

    /// SHA-256 of the canonical configuration text, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.echo().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config_with_env_seed("[model]\nvariant = \"iid\"\nalpha = 0.8\n", &[], None)
            .unwrap();
        assert_eq!(c.n_grid, vec![100, 1000, 10_000]);
        assert_eq!(c.t_grid, vec![0.25, 0.5, 0.75, 1.0]);
        assert_eq!(c.seed, DEFAULT_SEED);
        assert!(c.defaulted.contains(&"run.n_grid".to_string()));
        assert!(c.echo().contains("# default"));
    }

    #[test]
    fn range_and_key_errors_name_key_and_line() {
        let err = parse_config_with_env_seed("[model]\nvariant = \"iid\"\nalpha = 2.5\n", &[], None)
            .unwrap_err();
        let Error::Config { key, line, msg } = err else { panic!() };
        assert_eq!((key.as_str(), line), ("model.alpha", 3));
        assert!(msg.contains("(0,2)"));
        let err = parse_config_with_env_seed(
            "[model]\nvariant = \"iid\"\nalpha = 0.5\n[run]\nbogus = 1\n",
            &[],
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config { line: 5, .. }), "{err}");
        let err = parse_config_with_env_seed("[model]\nvariant = \"iid\"\nalpha = 0.5x\n", &[], None)
            .unwrap_err();
        assert!(matches!(err, Error::Config { line: 3, .. }), "{err}");
    }

    #[test]
    fn seed_precedence() {
        let text = "[model]\nvariant = \"iid\"\nalpha = 0.8\n[run]\nseed = 3\n";
        let c = parse_config_with_env_seed(text, &["run.seed=7".into()], Some("9")).unwrap();
        assert_eq!(c.seed, 7);
        let c = parse_config_with_env_seed(text, &[], Some("9")).unwrap();
        assert_eq!(c.seed, 3);
        let bare = "[model]\nvariant = \"iid\"\nalpha = 0.8\n";
        assert_eq!(parse_config_with_env_seed(bare, &[], Some("9")).unwrap().seed, 9);
        assert!(parse_config_with_env_seed(bare, &["run.nope=1".into()], None).is_err());
    }

    #[test]
    fn echo_round_trips() {
        let text = "[model]\nvariant = \"linear\"\nalpha = 1.2\np = 0.7\ncoeffs = [1, 0.5]\n[run]\nn_grid = [50, 500]\n";
        let c = parse_config_with_env_seed(text, &["model.variant=linear".into()], None).unwrap();
        let back = parse_config_with_env_seed(&c.echo(), &[], None).unwrap();
        assert_eq!(back.model, c.model);
        assert_eq!(back.n_grid, c.n_grid);
        assert_eq!(back.hash().len(), 64);
    }
}
