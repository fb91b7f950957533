//! Artifact writers: flat CSV tables and legacy-ASCII VTK structured
//! points. All numbers use Rust's shortest round-trip float formatting,
//! and nothing here embeds timestamps or hostnames, so a run writes
//! byte-identical files given the same inputs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::diagnostics::SweepResult;
use crate::energy::EnergyBreakdown;
use crate::error::Result;
use crate::grid::ScalarField;
use crate::inner::SolverReport;

/// Renders a field as a legacy-ASCII VTK STRUCTURED_POINTS dataset with
/// one SCALARS block. Points sit at cell centers; the value order is x
/// fastest, matching the field's own storage.
pub fn field_vtk_string(name: &str, f: &ScalarField) -> String {
    let g = f.grid();
    let mut cells = [1usize; 3];
    let mut org = [0.0f64; 3];
    cells[..g.dim()].copy_from_slice(g.cells());
    for a in 0..g.dim() {
        org[a] = g.origin()[a] + 0.5 * g.h();
    }
    let h = g.h();
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(s, "{name}");
    s.push_str("ASCII\nDATASET STRUCTURED_POINTS\n");
    let _ = writeln!(s, "DIMENSIONS {} {} {}", cells[0], cells[1], cells[2]);
    let _ = writeln!(s, "ORIGIN {} {} {}", org[0], org[1], org[2]);
    let _ = writeln!(s, "SPACING {h} {h} {h}");
    let _ = writeln!(s, "POINT_DATA {}", f.values().len());
    let _ = writeln!(s, "SCALARS {name} double 1");
    s.push_str("LOOKUP_TABLE default\n");
    for v in f.values() {
        let _ = writeln!(s, "{v}");
    }
    s
}

pub fn write_field_vtk(path: &Path, name: &str, f: &ScalarField) -> Result<()> {
    fs::write(path, field_vtk_string(name, f))?;
    Ok(())
}

/// Flat CSV dump of a field: index, cell-center coordinates, value.
pub fn field_csv_string(f: &ScalarField) -> String {
    let g = f.grid();
    let mut s = String::new();
    s.push_str(match g.dim() {
        2 => "index,x,y,value\n",
        _ => "index,x,y,z,value\n",
    });
    for (i, v) in f.values().iter().enumerate() {
        let c = g.center(i);
        match g.dim() {
            2 => {
                let _ = writeln!(s, "{i},{},{},{v}", c[0], c[1]);
            }
            _ => {
                let _ = writeln!(s, "{i},{},{},{},{v}", c[0], c[1], c[2]);
            }
        }
    }
    s
}

pub fn write_field_csv(path: &Path, f: &ScalarField) -> Result<()> {
    fs::write(path, field_csv_string(f))?;
    Ok(())
}

/// Energy trace table, one row per accepted outer step (row 0 is the
/// initial state).
pub fn trace_csv_string(trace: &[EnergyBreakdown]) -> String {
    let mut s = String::from(
        "step,willmore,area,area_penalty,baseline,inner_value,connect_penalty,total\n",
    );
    for (k, b) in trace.iter().enumerate() {
        let _ = writeln!(
            s,
            "{k},{},{},{},{},{},{},{}",
            b.willmore, b.area, b.area_penalty, b.baseline, b.inner_value, b.connect_penalty, b.total
        );
    }
    s
}

pub fn write_trace_csv(path: &Path, trace: &[EnergyBreakdown]) -> Result<()> {
    fs::write(path, trace_csv_string(trace))?;
    Ok(())
}

/// Iteration report table; the termination reason rides in a trailing
/// comment line so the numeric block stays machine-readable.
pub fn report_csv_string(report: &SolverReport) -> String {
    let mut s = String::from("iter,gamma,energy,grad_norm,step\n");
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.iter, r.gamma, r.energy, r.grad_norm, r.step
        );
    }
    let _ = writeln!(s, "# termination: {}", report.termination);
    s
}

pub fn write_report_csv(path: &Path, report: &SolverReport) -> Result<()> {
    fs::write(path, report_csv_string(report))?;
    Ok(())
}

/// Sweep table: one row per surviving resolution, then `fitted_order`
/// summary rows, then notes as comment lines.
pub fn sweep_csv_string(result: &SweepResult) -> String {
    let mut s = String::from(
        "epsilon,h,delta,willmore,area,area_penalty,baseline,inner_value,connect_penalty,total,component_count\n",
    );
    for r in &result.rows {
        let b = &r.breakdown;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.epsilon,
            r.h,
            r.delta,
            b.willmore,
            b.area,
            b.area_penalty,
            b.baseline,
            b.inner_value,
            b.connect_penalty,
            b.total,
            r.component_count
        );
    }
    for (name, order) in &result.fitted_orders {
        let _ = writeln!(s, "fitted_order,{name},{order}");
    }
    for note in &result.notes {
        let _ = writeln!(s, "# {note}");
    }
    s
}

pub fn write_sweep_csv(path: &Path, result: &SweepResult) -> Result<()> {
    fs::write(path, sweep_csv_string(result))?;
    Ok(())
}

/// Profile identity residuals sampled over a symmetric range of the
/// stretched coordinate.
pub fn profile_residuals_csv_string(rows: &[(f64, f64, f64)]) -> String {
    let mut s = String::from("r,ode_residual,equipartition_residual\n");
    for (r, ode, equi) in rows {
        let _ = writeln!(s, "{r},{ode},{equi}");
    }
    s
}

pub fn write_profile_residuals_csv(path: &Path, rows: &[(f64, f64, f64)]) -> Result<()> {
    fs::write(path, profile_residuals_csv_string(rows))?;
    Ok(())
}

/// Component-count summary for the `components` command.
pub fn components_csv_string(count: usize, baseline: f64) -> String {
    let mut s = String::from("component_count,baseline\n");
    let _ = writeln!(s, "{count},{baseline}");
    s
}

pub fn write_components_csv(path: &Path, count: usize, baseline: f64) -> Result<()> {
    fs::write(path, components_csv_string(count, baseline))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn small_field() -> ScalarField {
        let g = GridSpec::new(&[4, 4], &[0.0, -1.0], 0.5).unwrap();
        let vals = (0..16).map(|i| i as f64 / 2.0).collect();
        ScalarField::from_values(&g, vals).unwrap()
    }

    #[test]
    fn vtk_output_has_the_legacy_header_and_cell_centers() {
        let s = field_vtk_string("u", &small_field());
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# vtk DataFile Version 3.0");
        assert_eq!(lines[1], "u");
        assert_eq!(lines[2], "ASCII");
        assert_eq!(lines[3], "DATASET STRUCTURED_POINTS");
        assert_eq!(lines[4], "DIMENSIONS 4 4 1");
        assert_eq!(lines[5], "ORIGIN 0.25 -0.75 0");
        assert_eq!(lines[6], "SPACING 0.5 0.5 0.5");
        assert_eq!(lines[7], "POINT_DATA 16");
        assert_eq!(lines[8], "SCALARS u double 1");
        assert_eq!(lines[9], "LOOKUP_TABLE default");
        assert_eq!(lines[10], "0");
        assert_eq!(lines[11], "0.5");
        assert_eq!(lines.len(), 26);
    }

    #[test]
    fn field_csv_lists_centers_x_fastest() {
        let s = field_csv_string(&small_field());
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "index,x,y,value");
        assert_eq!(lines[1], "0,0.25,-0.75,0");
        assert_eq!(lines[2], "1,0.75,-0.75,0.5");
        assert_eq!(lines[5], "4,0.25,-0.25,2");
        assert_eq!(lines.len(), 17);
    }

    #[test]
    fn float_formatting_round_trips() {
        // Shortest round-trip formatting is what makes byte-identical
        // reruns meaningful: parse(print(x)) == x bit-for-bit.
        for &x in &[
            0.1,
            2.0 / 3.0,
            six_sevenths(),
            1e-17,
            123456.789,
            f64::MIN_POSITIVE,
        ] {
            let printed = format!("{x}");
            assert_eq!(printed.parse::<f64>().unwrap(), x);
        }
    }

    fn six_sevenths() -> f64 {
        6.0 / 7.0
    }
}
