//! Command dispatch: builds the objects a command needs from the
//! validated configuration, runs the corresponding library operation,
//! and writes the artifacts into the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{Command, DomainSpec, ParamsSection, RunConfig};
use crate::diagnostics::{count_components, gamma_sweep};
use crate::energy::{
    area_energy, connectedness_baseline, total_energy, PhaseFieldParams,
};
use crate::error::{Error, Result};
use crate::grid::{DomainMask, ScalarField};
use crate::inner::minimize_connectedness;
use crate::io;
use crate::outer::evolve;
use crate::scalar::profile_residuals;
use crate::shapes::{build_recovery, default_delta, RecoveryParams};

/// Runs `cmd` with `cfg`, writing all artifacts (plus `run.json`, an echo
/// of the resolved configuration) under `out_dir`. The directory is
/// created if missing.
pub fn run(cmd: Command, cfg: &RunConfig, out_dir: &Path) -> Result<()> {
    if let Some(declared) = cfg.command {
        if declared != cmd {
            return Err(Error::Config(format!(
                "config declares command {:?} but {:?} was requested",
                declared.name(),
                cmd.name()
            )));
        }
    }
    fs::create_dir_all(out_dir)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", out_dir.display())))?;

    let mut echo = cfg.clone();
    echo.command = Some(cmd);
    echo.output_dir = Some(out_dir.to_path_buf());
    let mut echo_text = serde_json::to_string_pretty(&echo)?;
    echo_text.push('\n');
    fs::write(out_dir.join("run.json"), echo_text)?;

    match cmd {
        Command::ProfileCheck => run_profile_check(out_dir),
        Command::Recover => run_recover(cfg, out_dir),
        Command::Energy => run_energy(cfg, out_dir),
        Command::Inner => run_inner(cfg, out_dir),
        Command::Flow => run_flow(cfg, out_dir),
        Command::Sweep => run_sweep(cfg, out_dir),
        Command::Components => run_components(cfg, out_dir),
    }
}

fn run_profile_check(out: &Path) -> Result<()> {
    let rows: Vec<(f64, f64, f64)> = (0..1000)
        .map(|k| {
            let r = -10.0 + 20.0 * k as f64 / 999.0;
            let (ode, equi) = profile_residuals(r);
            (r, ode, equi)
        })
        .collect();
    let worst = rows
        .iter()
        .map(|(_, a, b)| a.abs().max(b.abs()))
        .fold(0.0f64, f64::max);
    log::info!("profile-check: worst residual {worst:.3e} over {} samples", rows.len());
    io::write_profile_residuals_csv(&out.join("profile_residuals.csv"), &rows)
}

/// Everything the field-building commands share: container, shape, and
/// the recovery field rasterized on the grid.
struct Prepared {
    mask: DomainMask,
    u: ScalarField,
    delta: f64,
}

fn prepare(cfg: &RunConfig, cmd: Command) -> Result<Prepared> {
    let domain = cfg.domain_for(cmd)?;
    let grid_section = cfg.grid_for(cmd)?;
    let (grid, mask) = domain.build(&grid_section.cells_per_axis)?;
    let shape = cfg.shape_for(cmd)?;
    let params = cfg.params_for(cmd)?;
    // Reject bad parameters before any work, even for commands that only
    // need epsilon from this section.
    params.with_target(params.target_area.unwrap_or(1.0))?;
    let eps = params.epsilon;
    if grid.h() > eps / 4.0 {
        log::warn!(
            "grid spacing h = {} exceeds eps/4 = {}; the interface layer is under-resolved",
            grid.h(),
            eps / 4.0
        );
    }
    let delta = match cfg.recovery_delta() {
        Some(d) => d,
        None => default_delta(&shape, &mask)?,
    };
    let rp = RecoveryParams::new(eps, delta)?;
    let u = build_recovery(&shape, &mask, &rp)?;
    Ok(Prepared { mask, u, delta })
}

/// Fills the target area: an explicit value wins, otherwise the diffuse
/// area of the initial state (so the area penalty starts at zero).
fn resolve_params(
    params: &ParamsSection,
    u0: &ScalarField,
    mask: &DomainMask,
) -> Result<PhaseFieldParams> {
    match params.target_area {
        Some(t) => params.with_target(t),
        None => {
            let provisional = params.with_target(1.0)?;
            let s0 = area_energy(u0, mask, &provisional)?;
            params.with_target(s0)
        }
    }
}

fn run_recover(cfg: &RunConfig, out: &Path) -> Result<()> {
    let prep = prepare(cfg, Command::Recover)?;
    log::info!(
        "recover: {} cells inside, blend width {}",
        prep.mask.n_inside(),
        prep.delta
    );
    io::write_field_vtk(&out.join("u.vtk"), "u", &prep.u)?;
    io::write_field_csv(&out.join("u.csv"), &prep.u)
}

fn run_energy(cfg: &RunConfig, out: &Path) -> Result<()> {
    let prep = prepare(cfg, Command::Energy)?;
    let p = resolve_params(cfg.params_for(Command::Energy)?, &prep.u, &prep.mask)?;
    let inner_cfg = cfg.inner_config()?;
    let sol = minimize_connectedness(&prep.u, &prep.mask, &p, &inner_cfg, cfg.seed)?;
    let breakdown = total_energy(&prep.u, &prep.mask, &p, sol.value)?;
    log::info!(
        "energy: willmore {}, area {}, total {}",
        breakdown.willmore,
        breakdown.area,
        breakdown.total
    );
    io::write_trace_csv(&out.join("trace.csv"), std::slice::from_ref(&breakdown))?;
    io::write_field_vtk(&out.join("u.vtk"), "u", &prep.u)?;
    io::write_field_vtk(&out.join("phi.vtk"), "phi", &sol.phi_star)
}

fn run_inner(cfg: &RunConfig, out: &Path) -> Result<()> {
    let prep = prepare(cfg, Command::Inner)?;
    let p = resolve_params(cfg.params_for(Command::Inner)?, &prep.u, &prep.mask)?;
    let inner_cfg = cfg.inner_config()?;
    let baseline = connectedness_baseline(&prep.u, &prep.mask, &p)?;
    let sol = minimize_connectedness(&prep.u, &prep.mask, &p, &inner_cfg, cfg.seed)?;
    log::info!(
        "inner: value {} against baseline {} ({})",
        sol.value,
        baseline,
        sol.report.termination
    );
    io::write_report_csv(&out.join("report.csv"), &sol.report)?;
    io::write_field_vtk(&out.join("u.vtk"), "u", &prep.u)?;
    io::write_field_vtk(&out.join("phi.vtk"), "phi", &sol.phi_star)
}

fn run_flow(cfg: &RunConfig, out: &Path) -> Result<()> {
    let prep = prepare(cfg, Command::Flow)?;
    let p = resolve_params(cfg.params_for(Command::Flow)?, &prep.u, &prep.mask)?;
    let inner_cfg = cfg.inner_config()?;
    let outer_cfg = cfg.outer_config()?;
    let result = evolve(&prep.u, &prep.mask, &p, &outer_cfg, &inner_cfg, cfg.seed)?;
    log::info!(
        "flow: {} accepted steps, total {} -> {} ({})",
        result.trace.len() - 1,
        result.trace.first().map(|b| b.total).unwrap_or(f64::NAN),
        result.trace.last().map(|b| b.total).unwrap_or(f64::NAN),
        result.report.termination
    );
    io::write_trace_csv(&out.join("trace.csv"), &result.trace)?;
    io::write_report_csv(&out.join("report.csv"), &result.report)?;
    io::write_field_vtk(&out.join("u_final.vtk"), "u", &result.u_star)?;
    io::write_field_vtk(&out.join("phi.vtk"), "phi", &result.phi_star)?;
    for (step, field) in &result.checkpoints {
        let name = format!("u_step_{step}.vtk");
        io::write_field_vtk(&out.join(name), "u", field)?;
    }
    Ok(())
}

fn run_sweep(cfg: &RunConfig, out: &Path) -> Result<()> {
    let domain = cfg.domain_for(Command::Sweep)?;
    let (origin, extent) = match domain {
        DomainSpec::Box { extent, origin } => (
            origin.clone().unwrap_or_else(|| vec![0.0; extent.len()]),
            extent.clone(),
        ),
        DomainSpec::Ball { .. } => {
            return Err(Error::Config(
                "the sweep command needs a box domain".into(),
            ))
        }
    };
    let shape = cfg.shape_for(Command::Sweep)?;
    let params = cfg.params_for(Command::Sweep)?;
    let sweep = cfg.sweep_for(Command::Sweep)?;
    let inner_cfg = cfg.inner_config()?;
    let result = gamma_sweep(
        &shape,
        &origin,
        &extent,
        &sweep.epsilons,
        params.sigma,
        cfg.recovery_delta(),
        &inner_cfg,
        cfg.seed,
    )?;
    for (name, order) in &result.fitted_orders {
        log::info!("sweep: fitted {name} order {order}");
    }
    for note in &result.notes {
        log::info!("sweep: {note}");
    }
    io::write_sweep_csv(&out.join("sweep.csv"), &result)
}

fn run_components(cfg: &RunConfig, out: &Path) -> Result<()> {
    let prep = prepare(cfg, Command::Components)?;
    let p = resolve_params(cfg.params_for(Command::Components)?, &prep.u, &prep.mask)?;
    let count = count_components(&prep.u, &prep.mask, &p)?;
    let baseline = connectedness_baseline(&prep.u, &prep.mask, &p)?;
    log::info!("components: {count} interface component(s), baseline {baseline}");
    io::write_components_csv(&out.join("components.csv"), count, baseline)?;
    io::write_field_vtk(&out.join("u.vtk"), "u", &prep.u)
}

/// Resolves the worker-thread count: a CLI value wins over the config
/// key; 0 means "let the runtime decide".
pub fn resolve_threads(cli: Option<usize>, cfg: &RunConfig) -> usize {
    cli.unwrap_or(cfg.threads)
}

/// Builds the global worker pool when a positive count is requested.
/// Must run before any parallel work.
pub fn install_thread_pool(threads: usize) -> Result<()> {
    if threads == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot size the worker pool: {e}")))
}

/// Convenience used by the binary and the end-to-end tests: load, pick
/// the output directory, dispatch.
pub fn run_config_file(
    cmd: Command,
    config_path: &Path,
    output_override: Option<PathBuf>,
) -> Result<PathBuf> {
    let cfg = RunConfig::load(config_path)?;
    let out_dir = output_override
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| {
            Error::Config("no output directory: pass --output or set output_dir".into())
        })?;
    run(cmd, &cfg, &out_dir)?;
    Ok(out_dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_config(dir: &Path, text: &str) -> PathBuf {
        let path = dir.join("config.json");
        fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn profile_check_writes_small_residuals() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path(), r#"{"seed": 1}"#);
        let out = run_config_file(
            Command::ProfileCheck,
            &cfg,
            Some(dir.path().join("out")),
        )
        .unwrap();
        let text = fs::read_to_string(out.join("profile_residuals.csv")).unwrap();
        let mut worst = 0.0f64;
        for line in text.lines().skip(1) {
            let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
            assert_eq!(cols.len(), 3);
            worst = worst.max(cols[1].abs()).max(cols[2].abs());
        }
        assert!(worst < 1e-10, "worst residual {worst:.3e}");
        assert_eq!(text.lines().count(), 1001);
        assert!(out.join("run.json").exists());
    }

    #[test]
    fn recover_writes_field_artifacts_and_echoes_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(
            dir.path(),
            r#"{
                "command": "recover",
                "domain": {"type": "box", "extent": [1.0, 1.0]},
                "grid": {"cells_per_axis": [64, 64]},
                "params": {"epsilon": 0.05, "sigma": 0.1},
                "shape": [{"type": "ball", "center": [0.5, 0.5], "radius": 0.3}]
            }"#,
        );
        let out = run_config_file(Command::Recover, &cfg, Some(dir.path().join("out"))).unwrap();
        let vtk = fs::read_to_string(out.join("u.vtk")).unwrap();
        assert!(vtk.starts_with("# vtk DataFile Version 3.0"));
        assert!(vtk.contains("DIMENSIONS 64 64 1"));
        let echo: RunConfig =
            serde_json::from_str(&fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
        assert_eq!(echo.command, Some(Command::Recover));
        assert_eq!(echo.output_dir, Some(out.clone()));
    }

    #[test]
    fn command_mismatch_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path(), r#"{"command": "flow"}"#);
        let err =
            run_config_file(Command::Recover, &cfg, Some(dir.path().join("out"))).unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains("declares command"));
    }

    #[test]
    fn components_pipeline_counts_two_balls() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(
            dir.path(),
            r#"{
                "domain": {"type": "box", "extent": [1.5, 1.5], "origin": [-0.75, -0.75]},
                "grid": {"cells_per_axis": [96, 96]},
                "params": {"epsilon": 0.04, "sigma": 0.1},
                "shape": [
                    {"type": "ball", "center": [-0.45, 0.0], "radius": 0.2},
                    {"type": "ball", "center": [0.45, 0.0], "radius": 0.2}
                ],
                "recovery": {"delta": 0.05}
            }"#,
        );
        let out =
            run_config_file(Command::Components, &cfg, Some(dir.path().join("out"))).unwrap();
        let text = fs::read_to_string(out.join("components.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("component_count,baseline"));
        let row = lines.next().unwrap();
        assert!(row.starts_with("2,"), "row {row}");
    }

    #[test]
    fn missing_output_dir_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path(), r#"{}"#);
        let err = run_config_file(Command::ProfileCheck, &cfg, None).unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains("output"));
    }
}
