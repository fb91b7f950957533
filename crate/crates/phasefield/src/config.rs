//! Strict JSON run configuration: every section rejects unknown keys, so
//! typos fail fast instead of silently running with defaults.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::energy::PhaseFieldParams;
use crate::error::{Error, Result};
use crate::grid::{DomainMask, GridSpec};
use crate::inner::InnerSolverConfig;
use crate::outer::OuterSolverConfig;
use crate::scalar::CutoffParams;
use crate::shapes::{Primitive, ShapeSpec};

/// The seven run modes the binary dispatches on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Sample the optimal-profile identity residuals.
    ProfileCheck,
    /// Build the recovery field for a shape and write it out.
    Recover,
    /// One full energy evaluation (with the nested detector solve).
    Energy,
    /// The detector minimization alone.
    Inner,
    /// Constrained gradient flow.
    Flow,
    /// Sharp-interface-limit sweep over decreasing interface widths.
    Sweep,
    /// Interface-band component count.
    Components,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::ProfileCheck => "profile-check",
            Command::Recover => "recover",
            Command::Energy => "energy",
            Command::Inner => "inner",
            Command::Flow => "flow",
            Command::Sweep => "sweep",
            Command::Components => "components",
        }
    }
}

impl FromStr for Command {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "profile-check" => Ok(Command::ProfileCheck),
            "recover" => Ok(Command::Recover),
            "energy" => Ok(Command::Energy),
            "inner" => Ok(Command::Inner),
            "flow" => Ok(Command::Flow),
            "sweep" => Ok(Command::Sweep),
            "components" => Ok(Command::Components),
            other => Err(Error::Config(format!(
                "unknown command {other:?}; expected one of profile-check, recover, energy, \
                 inner, flow, sweep, components"
            ))),
        }
    }
}

/// The container Ω: an axis-aligned box or a ball, rasterized to the
/// cell-center mask.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Box {
        extent: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        origin: Option<Vec<f64>>,
    },
    Ball {
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
    },
}

impl DomainSpec {
    pub fn dim(&self) -> Result<usize> {
        let d = match self {
            DomainSpec::Box { extent, .. } => extent.len(),
            DomainSpec::Ball { radius: _, center } => center.as_ref().map_or(0, |c| c.len()),
        };
        match self {
            DomainSpec::Ball { center: None, .. } => Err(Error::Config(
                "ball domain needs an explicit center to fix the dimension".into(),
            )),
            _ if d == 2 || d == 3 => Ok(d),
            _ => Err(Error::Config(format!(
                "domain must be 2D or 3D, got {d} axes"
            ))),
        }
    }

    /// Rasterizes the domain onto a uniform grid with the given cell
    /// counts. Box extents must all yield the same spacing; a ball gets
    /// its bounding box and needs equal counts per axis.
    pub fn build(&self, cells: &[usize]) -> Result<(GridSpec, DomainMask)> {
        let dim = self.dim()?;
        if cells.len() != dim {
            return Err(Error::Config(format!(
                "grid lists {} cell counts for a {dim}-dimensional domain",
                cells.len()
            )));
        }
        match self {
            DomainSpec::Box { extent, origin } => {
                if extent.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
                    return Err(Error::Config("box extents must be positive".into()));
                }
                let org = match origin {
                    Some(o) => {
                        if o.len() != dim {
                            return Err(Error::Config(
                                "origin and extent must have the same dimension".into(),
                            ));
                        }
                        o.clone()
                    }
                    None => vec![0.0; dim],
                };
                let h = extent[0] / cells[0] as f64;
                for a in 1..dim {
                    let ha = extent[a] / cells[a] as f64;
                    if (ha - h).abs() > 1e-9 * h {
                        return Err(Error::Config(format!(
                            "cells_per_axis must give one uniform spacing; axis 0 gives {h}, \
                             axis {a} gives {ha}"
                        )));
                    }
                }
                let grid = GridSpec::new(cells, &org, h)?;
                Ok((grid.clone(), DomainMask::full(&grid)))
            }
            DomainSpec::Ball { radius, center } => {
                if !(*radius > 0.0) || !radius.is_finite() {
                    return Err(Error::Config("ball radius must be positive".into()));
                }
                let c = center.as_ref().expect("dim() checked the center");
                if cells.iter().any(|&n| n != cells[0]) {
                    return Err(Error::Config(
                        "a ball domain needs equal cell counts per axis".into(),
                    ));
                }
                let h = 2.0 * radius / cells[0] as f64;
                let org: Vec<f64> = c.iter().map(|x| x - radius).collect();
                let grid = GridSpec::new(cells, &org, h)?;
                let r2 = radius * radius;
                let mask = DomainMask::from_fn(&grid, |x| {
                    x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() < r2
                })?;
                Ok((grid, mask))
            }
        }
    }
}

/// Cell counts, one per axis.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub cells_per_axis: Vec<usize>,
}

/// Phase-field parameters. `target_area` may be omitted; commands that
/// need it then use the diffuse area of the initial state, so the area
/// penalty starts at zero.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub epsilon: f64,
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_area: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<CutoffParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeff_well: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeff_grad: Option<f64>,
}

impl ParamsSection {
    /// Builds validated parameters with the target area filled in.
    pub fn with_target(&self, target_area: f64) -> Result<PhaseFieldParams> {
        let p = PhaseFieldParams {
            epsilon: self.epsilon,
            sigma: self.sigma,
            target_area,
            cutoff: self.cutoff.unwrap_or_default(),
            coeff_well: self.coeff_well.unwrap_or(9.0),
            coeff_grad: self.coeff_grad.unwrap_or(8.0),
        };
        p.validate()?;
        Ok(p)
    }
}

/// Recovery-field construction knobs.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoverySection {
    /// Blend band half-geometry; omitted means the geometric default
    /// derived from the shape and container.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

/// Interface-width list for the sweep command.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Strictly decreasing, at least 3 entries.
    pub epsilons: Vec<f64>,
}

/// One run: a command plus the sections it needs. Unknown keys anywhere
/// are rejected. The `command` key is optional — the CLI positional wins,
/// and a mismatch between the two is an error.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsSection>,
    /// Solid primitives whose union is the initial shape.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<Vec<Primitive>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recovery: Option<RecoverySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<InnerSolverConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer: Option<OuterSolverConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 picks the machine default.
    #[serde(default)]
    pub threads: usize,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)?;
        Ok(cfg)
    }

    fn require<'a, T>(section: &'a Option<T>, name: &str, cmd: Command) -> Result<&'a T> {
        section.as_ref().ok_or_else(|| {
            Error::Config(format!(
                "the {} command needs a {name:?} section",
                cmd.name()
            ))
        })
    }

    pub fn domain_for(&self, cmd: Command) -> Result<&DomainSpec> {
        Self::require(&self.domain, "domain", cmd)
    }

    pub fn grid_for(&self, cmd: Command) -> Result<&GridSection> {
        Self::require(&self.grid, "grid", cmd)
    }

    pub fn params_for(&self, cmd: Command) -> Result<&ParamsSection> {
        Self::require(&self.params, "params", cmd)
    }

    pub fn shape_for(&self, cmd: Command) -> Result<ShapeSpec> {
        let prims = Self::require(&self.shape, "shape", cmd)?;
        ShapeSpec::new(prims.clone()).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn sweep_for(&self, cmd: Command) -> Result<&SweepSection> {
        Self::require(&self.sweep, "sweep", cmd)
    }

    pub fn inner_config(&self) -> Result<InnerSolverConfig> {
        let cfg = self.inner.clone().unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn outer_config(&self) -> Result<OuterSolverConfig> {
        let cfg = self.outer.clone().unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn recovery_delta(&self) -> Option<f64> {
        self.recovery.as_ref().and_then(|r| r.delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flow_json() -> &'static str {
        r#"{
            "command": "flow",
            "domain": {"type": "box", "extent": [1.0, 1.0]},
            "grid": {"cells_per_axis": [200, 200]},
            "params": {"epsilon": 0.02, "sigma": 0.1},
            "shape": [{"type": "ball", "center": [0.5, 0.5], "radius": 0.3}],
            "inner": {"max_iters": 100},
            "outer": {"max_steps": 10, "scheme": "semi_implicit"},
            "seed": 7
        }"#
    }

    #[test]
    fn full_config_round_trips() {
        let cfg: RunConfig = serde_json::from_str(flow_json()).unwrap();
        assert_eq!(cfg.command, Some(Command::Flow));
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.threads, 0);
        let (grid, mask) = cfg
            .domain_for(Command::Flow)
            .unwrap()
            .build(&cfg.grid_for(Command::Flow).unwrap().cells_per_axis)
            .unwrap();
        assert_eq!(grid.h(), 1.0 / 200.0);
        assert_eq!(mask.n_inside(), 200 * 200);
        let text = serde_json::to_string(&cfg).unwrap();
        let again: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(again.params.unwrap().epsilon, 0.02);
    }

    #[test]
    fn unknown_keys_are_rejected_everywhere() {
        let top = r#"{"comand": "flow"}"#;
        assert!(serde_json::from_str::<RunConfig>(top).is_err());
        let nested = r#"{"params": {"epsilon": 0.02, "sigma": 0.1, "epsilonn": 1}}"#;
        assert!(serde_json::from_str::<RunConfig>(nested).is_err());
        let inner = r#"{"inner": {"max_itres": 3}}"#;
        assert!(serde_json::from_str::<RunConfig>(inner).is_err());
    }

    #[test]
    fn command_names_round_trip() {
        for name in [
            "profile-check",
            "recover",
            "energy",
            "inner",
            "flow",
            "sweep",
            "components",
        ] {
            let cmd: Command = name.parse().unwrap();
            assert_eq!(cmd.name(), name);
            let json = serde_json::to_string(&cmd).unwrap();
            assert_eq!(json, format!("{name:?}"));
        }
        assert!("florb".parse::<Command>().is_err());
    }

    #[test]
    fn sigma_out_of_range_gives_the_exact_message() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"params": {"epsilon": 0.02, "sigma": 1.5}}"#).unwrap();
        let err = cfg
            .params_for(Command::Energy)
            .unwrap()
            .with_target(1.0)
            .unwrap_err();
        assert_eq!(err.to_string(), "sigma must lie in (0,1)");
        assert!(err.is_config());
    }

    #[test]
    fn ball_domain_rasterizes_to_a_connected_disc() {
        let dom: DomainSpec = serde_json::from_str(
            r#"{"type": "ball", "radius": 0.5, "center": [0.0, 0.0]}"#,
        )
        .unwrap();
        let (grid, mask) = dom.build(&[64, 64]).unwrap();
        assert_eq!(grid.h(), 1.0 / 64.0);
        assert!(mask.n_inside() < 64 * 64);
        // Area of the disc to a couple of cells' accuracy.
        let area = mask.n_inside() as f64 * grid.volume_element();
        assert!((area - std::f64::consts::PI * 0.25).abs() < 0.01);
        let err = dom.build(&[64, 32]).unwrap_err();
        assert!(err.to_string().contains("equal cell counts"));
    }

    #[test]
    fn box_spacing_must_be_uniform() {
        let dom: DomainSpec =
            serde_json::from_str(r#"{"type": "box", "extent": [1.0, 2.0]}"#).unwrap();
        assert!(dom.build(&[50, 100]).is_ok());
        let err = dom.build(&[50, 80]).unwrap_err();
        assert!(err.to_string().contains("uniform spacing"));
    }

    #[test]
    fn missing_sections_name_the_command() {
        let cfg: RunConfig = serde_json::from_str(r#"{}"#).unwrap();
        let err = cfg.domain_for(Command::Flow).unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains("flow"));
        assert!(err.to_string().contains("domain"));
    }
}
