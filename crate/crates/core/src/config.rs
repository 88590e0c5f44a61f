//! Pipeline settings read from a sectioned `key = value` file.
//!
//! ```text
//! [tsne]
//! perplexity = 30
//! seed = 7
//!
//! [superpoint]
//! d_e = 2
//!
//! [features]
//! radii = [4, 5, 6]
//! ```
//!
//! Unknown sections or keys are rejected. Any key can be overridden with
//! `section.key=value`.

use std::fmt::Write as _;
use std::path::Path;

use toml::{Table, Value};

use crate::cluster::LaplacianKind;
use crate::error::{Error, Result};
use crate::io::{ClassMap, CloudFormat};
use crate::segment::{InstanceParams, SemanticParams, SvmParams};

/// Input handling options.
#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    /// `None` picks the format from the file extension.
    pub format: Option<CloudFormat>,
    pub class_map: ClassMap,
    /// Length unit of the input coordinates. Voxel sizes and radii are taken
    /// in this unit; the pipeline never rescales.
    pub unit: String,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            format: None,
            class_map: ClassMap::default(),
            unit: "native".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineConfig {
    pub data: DataConfig,
    pub semantic: SemanticParams,
    pub svm: SvmParams,
    pub instance: InstanceParams,
    /// Set when `superpoint.r_e` was given; otherwise it follows `2 * d_e`.
    r_e_explicit: bool,
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("data", &["format", "class_map", "unit"]),
    ("voxel", &["v", "min_points"]),
    (
        "tsne",
        &[
            "perplexity",
            "n_iter",
            "learning_rate",
            "early_exaggeration",
            "early_exaggeration_iters",
            "momentum_initial",
            "momentum_final",
            "momentum_switch_iter",
            "seed",
            "perplexity_tolerance",
            "max_bisection_steps",
            "init_std",
            "adaptive_gains",
            "min_gain",
        ],
    ),
    (
        "superpoint",
        &["d_e", "r_e", "t_e", "s_e", "t_s", "laplacian", "kmeans_restarts", "max_rounds", "seed"],
    ),
    ("features", &["radii"]),
    ("svm", &["c", "tolerance", "max_iter"]),
    ("instance", &["v", "min_points", "perplexity", "d_e"]),
];

fn as_f64(v: &Value) -> std::result::Result<f64, String> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        other => Err(format!("expected a number, found {}", other.type_str())),
    }
}

fn as_usize(v: &Value) -> std::result::Result<usize, String> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        other => Err(format!("expected a non-negative integer, found {other}")),
    }
}

fn as_str(v: &Value) -> std::result::Result<&str, String> {
    v.as_str().ok_or_else(|| format!("expected a string, found {}", v.type_str()))
}

/// Line of `key` inside `[section]`, or 0 when it cannot be found.
fn locate(text: &str, section: &str, key: Option<&str>) -> usize {
    let mut current = String::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            if key.is_none() && current == section {
                return no + 1;
            }
            continue;
        }
        if let Some(k) = key {
            if current == section && line.split('=').next().map(str::trim) == Some(k) {
                return no + 1;
            }
        }
    }
    0
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses config text; `origin` names the source in error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::Config {
                path: origin.into(),
                line,
                message: e.message().to_string(),
            }
        })?;
        let mut cfg = PipelineConfig::default();
        for (section, body) in &table {
            let err = |key: Option<&str>, message: String| Error::Config {
                path: origin.into(),
                line: locate(text, section, key),
                message,
            };
            let Value::Table(body) = body else {
                return Err(err(None, format!("`{section}` must be a [section]")));
            };
            for (key, value) in body {
                cfg.set(section, key, value)
                    .map_err(|m| err(Some(key), format!("{section}.{key}: {m}")))?;
            }
        }
        cfg.finish().map_err(|e| Error::Config {
            path: origin.into(),
            line: 0,
            message: e.to_string(),
        })?;
        Ok(cfg)
    }

    /// Applies `section.key=value`. Values use the config-file syntax; bare
    /// words are taken as strings.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let err = |message: String| Error::Config {
            path: "<override>".into(),
            line: 0,
            message,
        };
        let (path, raw) = assignment
            .split_once('=')
            .ok_or_else(|| err(format!("expected section.key=value, found {assignment:?}")))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| err(format!("expected section.key, found {path:?}")))?;
        let value = format!("v = {}", raw.trim())
            .parse::<Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(raw.trim().to_string()));
        self.set(section, key, &value)
            .map_err(|m| err(format!("{section}.{key}: {m}")))?;
        self.finish().map_err(|e| err(e.to_string()))
    }

    fn set(&mut self, section: &str, key: &str, v: &Value) -> std::result::Result<(), String> {
        let known = SECTIONS
            .iter()
            .find(|(s, _)| *s == section)
            .ok_or_else(|| format!("unknown section [{section}]"))?;
        if !known.1.contains(&key) {
            return Err(format!("unknown key; expected one of {}", known.1.join(", ")));
        }
        let sem = &mut self.semantic;
        match (section, key) {
            ("data", "format") => {
                self.data.format = match as_str(v)? {
                    "auto" => None,
                    "pheno4d" | "txt" => Some(CloudFormat::Pheno4dTxt),
                    "xyz" => Some(CloudFormat::Xyz),
                    other => return Err(format!("unknown format {other:?}")),
                }
            }
            ("data", "class_map") => {
                self.data.class_map = match as_str(v)? {
                    "pheno4d" => ClassMap::pheno4d(),
                    "pheno4d-instances" => ClassMap::pheno4d_instances(),
                    spec => ClassMap::parse(spec).map_err(|e| e.to_string())?,
                }
            }
            ("data", "unit") => self.data.unit = as_str(v)?.to_string(),
            ("voxel", "v") => sem.voxel.v = as_f64(v)?,
            ("voxel", "min_points") => sem.voxel.min_points = as_usize(v)?,
            ("tsne", "perplexity") => sem.tsne.perplexity = as_f64(v)?,
            ("tsne", "n_iter") => sem.tsne.n_iter = as_usize(v)?,
            ("tsne", "learning_rate") => sem.tsne.learning_rate = as_f64(v)?,
            ("tsne", "early_exaggeration") => sem.tsne.early_exaggeration_factor = as_f64(v)?,
            ("tsne", "early_exaggeration_iters") => sem.tsne.early_exaggeration_iters = as_usize(v)?,
            ("tsne", "momentum_initial") => sem.tsne.momentum_initial = as_f64(v)?,
            ("tsne", "momentum_final") => sem.tsne.momentum_final = as_f64(v)?,
            ("tsne", "momentum_switch_iter") => sem.tsne.momentum_switch_iter = as_usize(v)?,
            ("tsne", "seed") => sem.tsne.seed = as_usize(v)? as u64,
            ("tsne", "perplexity_tolerance") => sem.tsne.perplexity_tolerance = as_f64(v)?,
            ("tsne", "max_bisection_steps") => sem.tsne.max_bisection_steps = as_usize(v)?,
            ("tsne", "init_std") => sem.tsne.init_std = as_f64(v)?,
            ("tsne", "adaptive_gains") => {
                sem.tsne.adaptive_gains = v.as_bool().ok_or("expected true or false")?
            }
            ("tsne", "min_gain") => sem.tsne.min_gain = as_f64(v)?,
            ("superpoint", "d_e") => sem.cluster.d_e = as_f64(v)?,
            ("superpoint", "r_e") => {
                sem.cluster.r_e = as_f64(v)?;
                self.r_e_explicit = true;
            }
            ("superpoint", "t_e") => sem.cluster.t_e = as_f64(v)?,
            ("superpoint", "s_e") => sem.cluster.s_e = as_f64(v)?,
            ("superpoint", "t_s") => sem.cluster.t_s = as_f64(v)?,
            ("superpoint", "laplacian") => {
                sem.cluster.laplacian = match as_str(v)? {
                    "symmetric" | "normalized" => LaplacianKind::SymmetricNormalized,
                    "unnormalized" => LaplacianKind::Unnormalized,
                    other => return Err(format!("unknown Laplacian {other:?}")),
                }
            }
            ("superpoint", "kmeans_restarts") => sem.cluster.kmeans_restarts = as_usize(v)?,
            ("superpoint", "max_rounds") => sem.max_rounds = as_usize(v)?,
            ("superpoint", "seed") => sem.cluster.seed = as_usize(v)? as u64,
            ("features", "radii") => {
                let arr = v.as_array().ok_or("expected an array of three radii")?;
                if arr.len() != 3 {
                    return Err(format!("expected three radii, found {}", arr.len()));
                }
                for (slot, item) in sem.radii.iter_mut().zip(arr) {
                    *slot = as_f64(item)?;
                }
            }
            ("svm", "c") => self.svm.c = as_f64(v)?,
            ("svm", "tolerance") => self.svm.tolerance = as_f64(v)?,
            ("svm", "max_iter") => self.svm.max_iter = as_usize(v)?,
            ("instance", "v") => self.instance.v = as_f64(v)?,
            ("instance", "min_points") => self.instance.min_points = as_usize(v)?,
            ("instance", "perplexity") => self.instance.perplexity = as_f64(v)?,
            ("instance", "d_e") => self.instance.d_e = as_f64(v)?,
            _ => unreachable!("key table and match arms disagree on {section}.{key}"),
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<()> {
        if !self.r_e_explicit {
            self.semantic.cluster.r_e = 2.0 * self.semantic.cluster.d_e;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        self.semantic.voxel.validate()?;
        self.semantic.tsne.validate()?;
        self.semantic.cluster.validate()?;
        self.instance.validate()?;
        if self.semantic.radii.iter().any(|r| !(*r > 0.0))
            || self.semantic.radii.windows(2).any(|w| w[0] > w[1])
        {
            return Err(Error::param("radii", "must be positive and ascending"));
        }
        if !(self.svm.c > 0.0) || !(self.svm.tolerance > 0.0) {
            return Err(Error::param("svm", "c and tolerance must be positive"));
        }
        Ok(())
    }

    /// Sets perplexity and `d_e` together, keeping `r_e = 2 d_e` unless it was pinned.
    pub fn with_semantic_scale(mut self, perplexity: f64, d_e: f64) -> Self {
        self.semantic.tsne.perplexity = perplexity;
        self.semantic.cluster.d_e = d_e;
        if !self.r_e_explicit {
            self.semantic.cluster.r_e = 2.0 * d_e;
        }
        self
    }

    /// Format to use for `path`.
    pub fn format_for(&self, path: &Path) -> CloudFormat {
        self.data.format.unwrap_or_else(|| CloudFormat::from_path(path))
    }

    /// The effective settings in config-file syntax.
    pub fn to_text(&self) -> String {
        let s = &self.semantic;
        let t = &s.tsne;
        let c = &s.cluster;
        let mut out = String::new();
        let fmt = match self.data.format {
            None => "auto",
            Some(CloudFormat::Pheno4dTxt) => "pheno4d",
            Some(CloudFormat::Xyz) => "xyz",
        };
        let _ = writeln!(out, "[data]\nformat = \"{fmt}\"\nunit = \"{}\"\n", self.data.unit);
        let _ = writeln!(out, "[voxel]\nv = {:?}\nmin_points = {}\n", s.voxel.v, s.voxel.min_points);
        let _ = writeln!(
            out,
            "[tsne]\nperplexity = {:?}\nn_iter = {}\nlearning_rate = {:?}\nearly_exaggeration = {:?}\n\
             early_exaggeration_iters = {}\nmomentum_initial = {:?}\nmomentum_final = {:?}\n\
             momentum_switch_iter = {}\nseed = {}\nperplexity_tolerance = {:?}\n\
             max_bisection_steps = {}\ninit_std = {:?}\nadaptive_gains = {}\nmin_gain = {:?}\n",
            t.perplexity,
            t.n_iter,
            t.learning_rate,
            t.early_exaggeration_factor,
            t.early_exaggeration_iters,
            t.momentum_initial,
            t.momentum_final,
            t.momentum_switch_iter,
            t.seed,
            t.perplexity_tolerance,
            t.max_bisection_steps,
            t.init_std,
            t.adaptive_gains,
            t.min_gain
        );
        let lap = match c.laplacian {
            LaplacianKind::SymmetricNormalized => "symmetric",
            LaplacianKind::Unnormalized => "unnormalized",
        };
        let _ = writeln!(
            out,
            "[superpoint]\nd_e = {:?}\nr_e = {:?}\nt_e = {:?}\ns_e = {:?}\nt_s = {:?}\n\
             laplacian = \"{lap}\"\nkmeans_restarts = {}\nmax_rounds = {}\nseed = {}\n",
            c.d_e, c.r_e, c.t_e, c.s_e, c.t_s, c.kmeans_restarts, s.max_rounds, c.seed
        );
        let _ = writeln!(
            out,
            "[features]\nradii = [{:?}, {:?}, {:?}]\n",
            s.radii[0], s.radii[1], s.radii[2]
        );
        let _ = writeln!(
            out,
            "[svm]\nc = {:?}\ntolerance = {:?}\nmax_iter = {}\n",
            self.svm.c, self.svm.tolerance, self.svm.max_iter
        );
        let i = &self.instance;
        let _ = write!(
            out,
            "[instance]\nv = {:?}\nmin_points = {}\nperplexity = {:?}\nd_e = {:?}\n",
            i.v, i.min_points, i.perplexity, i.d_e
        );
        out
    }
}
