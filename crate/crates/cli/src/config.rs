use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;
use symspinor::geometry::ModelPreset;
use symspinor::{Error, Result};

/// Flags shared by every subcommand. Any flag given on the command line
/// overrides the same key in the `--config` file.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML file with the same keys as the flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Model preset: cp1, sphere, torus, twisted, sampled-sphere, sampled-torus.
    #[arg(long, global = true)]
    pub model: Option<String>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub l: Option<usize>,
    /// Fiber cutoff L.
    #[arg(long, global = true)]
    pub cutoff: Option<usize>,
    /// Log-spaced grid `a:b:steps`.
    #[arg(long = "t-grid", global = true)]
    pub t_grid: Option<String>,
    /// Mesh resolution N.
    #[arg(long, global = true)]
    pub mesh: Option<usize>,
    /// Point pair `x1,y1;x2,y2` in chart coordinates.
    #[arg(long, global = true)]
    pub points: Option<String>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ModelEntry {
    Name(String),
    Preset(ModelPreset),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    model: Option<ModelEntry>,
    n: Option<usize>,
    l: Option<usize>,
    cutoff: Option<usize>,
    #[serde(alias = "t_grid")]
    t_grid: Option<String>,
    mesh: Option<usize>,
    points: Option<String>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    tol: Option<f64>,
}

/// Fully merged settings for one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: Option<ModelPreset>,
    pub n: Option<usize>,
    pub l: Option<usize>,
    pub cutoff: Option<usize>,
    pub t_grid: Option<Vec<f64>>,
    pub mesh: Option<usize>,
    pub points: Option<[[f64; 2]; 2]>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub tol: Option<f64>,
}

impl RunConfig {
    pub fn resolve(flags: &Flags) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => read_file(path)?,
            None => FileConfig::default(),
        };
        let model = match (&flags.model, file.model) {
            (Some(name), _) => Some(ModelPreset::named(name)?),
            (None, Some(ModelEntry::Name(name))) => Some(ModelPreset::named(&name)?),
            (None, Some(ModelEntry::Preset(p))) => Some(p),
            (None, None) => None,
        };
        let t_grid = flags
            .t_grid
            .clone()
            .or(file.t_grid)
            .map(|s| parse_t_grid(&s))
            .transpose()?;
        let points = flags
            .points
            .clone()
            .or(file.points)
            .map(|s| parse_points(&s))
            .transpose()?;
        let cfg = Self {
            model,
            n: flags.n.or(file.n),
            l: flags.l.or(file.l),
            cutoff: flags.cutoff.or(file.cutoff),
            t_grid,
            mesh: flags.mesh.or(file.mesh),
            points,
            out: flags.out.clone().or(file.out),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            tol: flags.tol.or(file.tol),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.n == Some(0) {
            return Err(Error::Config("n must be positive".into()));
        }
        if self.cutoff == Some(0) {
            return Err(Error::Config("cutoff must be positive".into()));
        }
        if let Some(tol) = self.tol {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
            }
        }
        Ok(())
    }

    /// Model preset with `n` from the flags applied.
    pub fn preset(&self, default: &str) -> Result<ModelPreset> {
        let mut preset = match &self.model {
            Some(p) => p.clone(),
            None => ModelPreset::named(default)?,
        };
        if self.n.is_some() {
            preset.n = self.n;
        }
        Ok(preset)
    }
}

fn read_file(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// `a:b:steps`, geometric between `a` and `b`, all inside `(0, 0.1]`.
pub fn parse_t_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("t-grid '{s}' is not of the form a:b:steps"));
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, steps] = parts.as_slice() else {
        return Err(bad());
    };
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    let steps: usize = steps.trim().parse().map_err(|_| bad())?;
    if !(a > 0.0 && a <= b && b <= 0.1) {
        return Err(Error::Config(format!(
            "t-grid must satisfy 0 < a <= b <= 0.1, got {a}:{b}"
        )));
    }
    if steps == 0 || (steps == 1 && a != b) {
        return Err(Error::Config(format!(
            "t-grid needs at least two steps, got {steps}"
        )));
    }
    Ok(symspinor::spectrum::geometric_grid(a, b, steps))
}

pub fn parse_points(s: &str) -> Result<[[f64; 2]; 2]> {
    let bad = || Error::Config(format!("points '{s}' are not of the form x1,y1;x2,y2"));
    let pts = s
        .split(';')
        .map(|p| {
            let c: Vec<f64> = p
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad())?;
            match c.as_slice() {
                [x, y] if x.is_finite() && y.is_finite() => Ok([*x, *y]),
                _ => Err(bad()),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    match pts.as_slice() {
        [p, q] => Ok([*p, *q]),
        _ => Err(bad()),
    }
}
