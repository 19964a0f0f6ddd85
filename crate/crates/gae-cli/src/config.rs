//! Flat key-value run configuration.
//!
//! The on-disk format is one `key = value` per line with `#` comments.
//! Vectors are comma-separated, problem parameters are namespaced as
//! `param.<name>`. Serialization uses the shortest round-trippable float
//! form, so `parse(serialize(c)) == c` for every valid config.

use std::collections::BTreeMap;
use std::path::PathBuf;

use gae::hyper::Preset;
use gae::oracle::{ParamValue, ProblemParams};
use gae::{GaeError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: String,
    pub params: ProblemParams,
    pub eps: f64,
    pub sigma: f64,
    pub preset: Preset,
    pub seed: u64,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub trace: Option<PathBuf>,
    pub mc_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: "constant".into(),
            params: ProblemParams::new(),
            eps: 0.1,
            sigma: 0.1,
            preset: Preset::Practical,
            seed: 0,
            x0: vec![],
            y0: vec![],
            trace: None,
            mc_samples: 100_000,
        }
    }
}

pub fn format_vec(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

pub fn parse_vec(s: &str) -> Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Ok(vec![]);
    }
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| GaeError::Validation(format!("bad number `{t}`: {e}")))
        })
        .collect()
}

pub fn parse_preset(s: &str) -> Result<Preset> {
    match s.trim() {
        "theoretical" => Ok(Preset::Theoretical),
        "practical" => Ok(Preset::Practical),
        "custom" => Ok(Preset::Custom),
        other => Err(GaeError::Validation(format!("unknown preset `{other}`"))),
    }
}

impl RunConfig {
    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("problem = {}\n", self.problem));
        out.push_str(&format!("eps = {}\n", self.eps));
        out.push_str(&format!("sigma = {}\n", self.sigma));
        out.push_str(&format!("preset = {}\n", self.preset));
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str(&format!("x0 = {}\n", format_vec(&self.x0)));
        out.push_str(&format!("y0 = {}\n", format_vec(&self.y0)));
        if let Some(t) = &self.trace {
            out.push_str(&format!("trace = {}\n", t.display()));
        }
        out.push_str(&format!("mc_samples = {}\n", self.mc_samples));
        for (k, v) in self.params.entries() {
            match v {
                ParamValue::Scalar(s) => out.push_str(&format!("param.{k} = {s}\n")),
                ParamValue::Vector(vv) => {
                    out.push_str(&format!("param.{k} = {}\n", format_vec(vv)))
                }
            }
        }
        out
    }

    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                GaeError::Validation(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let mut cfg = RunConfig::default();
        let mut take = |key: &str| kv.remove(key);
        if let Some(v) = take("problem") {
            cfg.problem = v;
        }
        if let Some(v) = take("eps") {
            cfg.eps = parse_f64("eps", &v)?;
        }
        if let Some(v) = take("sigma") {
            cfg.sigma = parse_f64("sigma", &v)?;
        }
        if let Some(v) = take("preset") {
            cfg.preset = parse_preset(&v)?;
        }
        if let Some(v) = take("seed") {
            cfg.seed = v
                .parse()
                .map_err(|e| GaeError::Validation(format!("bad seed `{v}`: {e}")))?;
        }
        if let Some(v) = take("x0") {
            cfg.x0 = parse_vec(&v)?;
        }
        if let Some(v) = take("y0") {
            cfg.y0 = parse_vec(&v)?;
        }
        if let Some(v) = take("trace") {
            cfg.trace = Some(PathBuf::from(v));
        }
        if let Some(v) = take("mc_samples") {
            cfg.mc_samples = v
                .parse()
                .map_err(|e| GaeError::Validation(format!("bad mc_samples `{v}`: {e}")))?;
        }
        for (k, v) in kv {
            let name = k.strip_prefix("param.").ok_or_else(|| {
                GaeError::Validation(format!("unknown config key `{k}`"))
            })?;
            set_param(&mut cfg.params, name, &v)?;
        }
        for v in cfg.x0.iter().chain(cfg.y0.iter()) {
            if !v.is_finite() {
                return Err(GaeError::Validation("x0/y0 must be finite".into()));
            }
        }
        if !cfg.eps.is_finite() || !cfg.sigma.is_finite() {
            return Err(GaeError::Validation("eps/sigma must be finite".into()));
        }
        Ok(cfg)
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse()
        .map_err(|e| GaeError::Validation(format!("bad {key} `{v}`: {e}")))
}

pub fn set_param(params: &mut ProblemParams, name: &str, value: &str) -> Result<()> {
    if value.contains(',') {
        params.set_vector(name, parse_vec(value)?);
    } else {
        params.set_scalar(name, parse_f64(name, value)?);
    }
    Ok(())
}
