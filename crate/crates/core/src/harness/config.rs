//! Run configuration files.
//!
//! A configuration is a small TOML document with the sections `[params]`,
//! `[grid]`, `[initial]`, `[controls]` and `[outputs]`:
//!
//! ```toml
//! [params]
//! lambda = 1.0
//! alpha = 2.0
//! Gamma = -2.0
//!
//! [grid]
//! n_nodes = 4096          # auto-sized unless xi_min/xi_max are given
//!
//! [initial]
//! kind = "peakon"         # "peakon" | "gaussian" | "samples"
//! p = [0.5]
//! q = [1.0]
//!
//! [controls]
//! dt = 1e-3
//! t_end = 2.0
//! output_every = 100
//! ```
//!
//! Omitted coefficients default to zero and omitted sections to their
//! defaults; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{HarnessError, HarnessResult};
use crate::evolve::StepControls;
use crate::model::{LagrangianGrid, ModelParams};
use crate::transform::InitialData;

/// Default padding (in units of the kernel length) added around the region
/// the solution can reach.
pub const DEFAULT_PAD: f64 = 12.0;

#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    /// Sized from the data, the parameters and `t_end`.
    Auto {
        n_nodes: usize,
        pad: f64,
        align_tips: bool,
    },
    Fixed(LagrangianGrid),
}

impl GridSpec {
    pub fn n_nodes(&self) -> usize {
        match self {
            GridSpec::Auto { n_nodes, .. } => *n_nodes,
            GridSpec::Fixed(g) => g.n_nodes,
        }
    }

    pub fn with_n_nodes(&self, n_nodes: usize) -> HarnessResult<Self> {
        Ok(match self {
            GridSpec::Auto {
                pad, align_tips, ..
            } => GridSpec::Auto {
                n_nodes,
                pad: *pad,
                align_tips: *align_tips,
            },
            GridSpec::Fixed(g) => {
                GridSpec::Fixed(LagrangianGrid::new(g.xi_min, g.xi_max, n_nodes)?)
            }
        })
    }
}

/// Uniform Eulerian grid for snapshot files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
}

impl SnapshotGrid {
    pub fn points(&self) -> Vec<f64> {
        let h = (self.x_max - self.x_min) / (self.n_x - 1) as f64;
        (0..self.n_x).map(|i| self.x_min + i as f64 * h).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    /// `None`: derived from the grid coverage at run time.
    pub snapshot_grid: Option<SnapshotGrid>,
    pub snapshots: bool,
    pub lagrangian: bool,
    pub weak_form: bool,
    /// Label ξ of the characteristic followed by the β diagnostic.
    pub beta_probe: Option<f64>,
    /// Extra randomly placed bumps added to the weak-form bank (needs a seed).
    pub random_bumps: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: None,
            snapshot_grid: None,
            snapshots: true,
            lagrangian: false,
            weak_form: false,
            beta_probe: None,
            random_bumps: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub grid: GridSpec,
    pub initial: InitialData,
    pub controls: StepControls,
    pub outputs: OutputSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    params: RawParams,
    grid: RawGrid,
    initial: RawInitial,
    controls: RawControls,
    #[serde(default)]
    outputs: RawOutputs,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    #[serde(default)]
    lambda: f64,
    #[serde(default)]
    alpha: f64,
    #[serde(default)]
    beta: f64,
    #[serde(default)]
    gamma: f64,
    #[serde(default, rename = "Gamma")]
    transport: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    n_nodes: usize,
    auto: Option<bool>,
    pad: Option<f64>,
    align_tips: Option<bool>,
    xi_min: Option<f64>,
    xi_max: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    kind: String,
    p: Option<Vec<f64>>,
    q: Option<Vec<f64>>,
    amplitude: Option<f64>,
    center: Option<f64>,
    width: Option<f64>,
    file: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawControls {
    dt: f64,
    t_end: f64,
    #[serde(default = "one")]
    output_every: usize,
    #[serde(default)]
    renormalize_alg: bool,
}

fn one() -> usize {
    1
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutputs {
    dir: Option<PathBuf>,
    x_min: Option<f64>,
    x_max: Option<f64>,
    n_x: Option<usize>,
    snapshots: Option<bool>,
    lagrangian: Option<bool>,
    weak_form: Option<bool>,
    beta_probe: Option<f64>,
    random_bumps: Option<usize>,
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl RunConfig {
    /// Reads and validates a configuration file. Relative paths inside it
    /// (sample files, output directory) resolve against its directory.
    pub fn load(path: &Path) -> HarnessResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base).map_err(|e| match e {
            HarnessError::Config(msg) => config_err(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str, base_dir: &Path) -> HarnessResult<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;

        let rp = raw.params;
        let params = ModelParams::new(rp.lambda, rp.alpha, rp.beta, rp.gamma, rp.transport)
            .map_err(|e| config_err(format!("[params] {e}")))?;

        let initial = parse_initial(raw.initial, base_dir)?;
        initial
            .validate()
            .map_err(|e| config_err(format!("[initial] {e}")))?;

        let rc = raw.controls;
        let controls = StepControls {
            dt: rc.dt,
            t_end: rc.t_end,
            renormalize_alg: rc.renormalize_alg,
            output_every: rc.output_every,
        };
        controls
            .validate()
            .map_err(|e| config_err(format!("[controls] {e}")))?;

        let grid = parse_grid(raw.grid)?;
        let outputs = parse_outputs(raw.outputs, base_dir)?;
        Ok(Self {
            params,
            grid,
            initial,
            controls,
            outputs,
        })
    }

    /// Copy with `n_nodes` and `dt` replaced, for refinement studies.
    pub fn refined_to(&self, n_nodes: usize, dt: f64, output_every: usize) -> HarnessResult<Self> {
        let mut out = self.clone();
        out.grid = self.grid.with_n_nodes(n_nodes)?;
        out.controls.dt = dt;
        out.controls.output_every = output_every;
        out.controls.validate()?;
        Ok(out)
    }
}

fn parse_grid(raw: RawGrid) -> HarnessResult<GridSpec> {
    if raw.n_nodes < 4 {
        return Err(config_err(format!(
            "[grid] n_nodes must be at least 4, got {}",
            raw.n_nodes
        )));
    }
    let explicit = raw.xi_min.is_some() || raw.xi_max.is_some();
    let auto = raw.auto.unwrap_or(!explicit);
    if auto {
        if explicit {
            return Err(config_err(
                "[grid] xi_min/xi_max cannot be combined with auto = true",
            ));
        }
        let pad = raw.pad.unwrap_or(DEFAULT_PAD);
        if !(pad.is_finite() && pad > 0.0) {
            return Err(config_err(format!(
                "[grid] pad must be positive, got {pad}"
            )));
        }
        return Ok(GridSpec::Auto {
            n_nodes: raw.n_nodes,
            pad,
            align_tips: raw.align_tips.unwrap_or(true),
        });
    }
    let (Some(lo), Some(hi)) = (raw.xi_min, raw.xi_max) else {
        return Err(config_err(
            "[grid] auto = false needs both xi_min and xi_max",
        ));
    };
    Ok(GridSpec::Fixed(
        LagrangianGrid::new(lo, hi, raw.n_nodes).map_err(|e| config_err(format!("[grid] {e}")))?,
    ))
}

fn parse_initial(raw: RawInitial, base_dir: &Path) -> HarnessResult<InitialData> {
    let need = |v: Option<f64>, key: &str| {
        v.ok_or_else(|| config_err(format!("[initial] missing `{key}`")))
    };
    match raw.kind.as_str() {
        "peakon" | "peakon_sum" => {
            let p = raw.p.ok_or_else(|| config_err("[initial] missing `p`"))?;
            let q = raw.q.ok_or_else(|| config_err("[initial] missing `q`"))?;
            Ok(InitialData::PeakonSum { p, q })
        }
        "gaussian" => Ok(InitialData::Gaussian {
            amplitude: need(raw.amplitude, "amplitude")?,
            center: raw.center.unwrap_or(0.0),
            width: need(raw.width, "width")?,
        }),
        "samples" => {
            let file = raw
                .file
                .ok_or_else(|| config_err("[initial] missing `file`"))?;
            let path = if file.is_absolute() {
                file
            } else {
                base_dir.join(file)
            };
            read_samples(&path)
        }
        other => Err(config_err(format!(
            "[initial] unknown kind `{other}` (expected peakon, gaussian or samples)"
        ))),
    }
}

/// Reads a two-column CSV (`x,k`, header row) of initial samples.
pub fn read_samples(path: &Path) -> HarnessResult<InitialData> {
    let mut reader =
        csv::Reader::from_path(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let mut x = Vec::new();
    let mut k = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let field = |i: usize| -> HarnessResult<f64> {
            record
                .get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| {
                    config_err(format!(
                        "{}: bad number in data row {}",
                        path.display(),
                        line + 1
                    ))
                })
        };
        x.push(field(0)?);
        k.push(field(1)?);
    }
    Ok(InitialData::Samples { x, k })
}

fn parse_outputs(raw: RawOutputs, base_dir: &Path) -> HarnessResult<OutputSpec> {
    let snapshot_grid = match (raw.x_min, raw.x_max, raw.n_x) {
        (None, None, None) => None,
        (Some(x_min), Some(x_max), n_x) => {
            let n_x = n_x.unwrap_or(1001);
            if !(x_min < x_max) || n_x < 2 {
                return Err(config_err("[outputs] need x_min < x_max and n_x ≥ 2"));
            }
            Some(SnapshotGrid { x_min, x_max, n_x })
        }
        _ => {
            return Err(config_err(
                "[outputs] x_min and x_max must be given together",
            ))
        }
    };
    let defaults = OutputSpec::default();
    Ok(OutputSpec {
        dir: raw
            .dir
            .map(|d| if d.is_absolute() { d } else { base_dir.join(d) }),
        snapshot_grid,
        snapshots: raw.snapshots.unwrap_or(defaults.snapshots),
        lagrangian: raw.lagrangian.unwrap_or(defaults.lagrangian),
        weak_form: raw.weak_form.unwrap_or(defaults.weak_form),
        beta_probe: raw.beta_probe,
        random_bumps: raw.random_bumps.unwrap_or(0),
    })
}
