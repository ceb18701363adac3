//! Long-format CSV export of snapshots.

use std::io::{self, Write};

use super::grid::GridSpec;

/// `<run_id>_t<time>.csv`
pub fn snapshot_file_name(run_id: &str, t: f64) -> String {
    format!("{run_id}_t{t:.6}.csv")
}

/// Header `x,y,value`, 17 significant digits, rows ordered by `y` then `x`.
pub fn write_bulk_csv<W: Write>(mut w: W, grid: &GridSpec, values: &[f64]) -> io::Result<()> {
    writeln!(w, "x,y,value")?;
    let nx = grid.nx();
    for (k, v) in values.iter().enumerate() {
        writeln!(w, "{:.16e},{:.16e},{:.16e}", grid.x(k % nx), grid.y(k / nx), v)?;
    }
    Ok(())
}

/// Header `x,value`.
pub fn write_road_csv<W: Write>(mut w: W, grid: &GridSpec, values: &[f64]) -> io::Result<()> {
    writeln!(w, "x,value")?;
    for (i, v) in values.iter().enumerate() {
        writeln!(w, "{:.16e},{:.16e}", grid.x(i), v)?;
    }
    Ok(())
}
