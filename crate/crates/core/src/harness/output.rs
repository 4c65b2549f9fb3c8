//! CSV and JSON writers. Every file is written to a temporary sibling and
//! renamed into place, so readers never observe a partial file.

use crate::diagnostics::StepReport;
use crate::grid::PhaseField;
use serde::Serialize;
use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

/// Writes `bytes` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// `x,phi` (1D) or `x,y,phi` (2D, row-major) with 17 significant digits.
pub fn snapshot_csv(field: &PhaseField) -> String {
    let g = field.grid;
    let mut s = String::with_capacity(field.values.len() * 48);
    if g.dim == 1 {
        s.push_str("x,phi\n");
        for i in 0..g.nx {
            let (x, _) = g.cell_center(i, 0);
            let _ = writeln!(s, "{:.16e},{:.16e}", x, field.get(i, 0));
        }
    } else {
        s.push_str("x,y,phi\n");
        for j in 0..g.ny {
            for i in 0..g.nx {
                let (x, y) = g.cell_center(i, j);
                let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", x, y, field.get(i, j));
            }
        }
    }
    s
}

pub const SERIES_HEADER: &str =
    "t,mass,phi_min,phi_max,energy_total,energy_bulk,energy_grad,energy_wall,newton_iters,residual";

/// One row per step report.
pub fn series_csv(reports: &[StepReport]) -> String {
    let mut s = String::with_capacity(reports.len() * 200);
    s.push_str(SERIES_HEADER);
    s.push('\n');
    for r in reports {
        let e = &r.energy;
        let _ = writeln!(
            s,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e}",
            r.t,
            r.mass,
            r.phi_min,
            r.phi_max,
            e.total,
            e.bulk(),
            e.gradient(),
            e.wall,
            r.newton_iters,
            r.residual_norm
        );
    }
    s
}

pub fn json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("summary types serialize infallibly");
    s.push('\n');
    s
}
