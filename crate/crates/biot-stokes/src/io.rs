//! Output writers: energy CSV, structured-grid field dumps and study
//! tables, all in full double precision so downstream checks can be made
//! from the files alone. Writers build the whole file in memory and remove
//! the target on a failed write, so no partial files are left behind.

use crate::diagnostics::EnergyReport;
use crate::error::ConfigError;
use crate::scenarios::{ErrorTable, StorageRow};
use crate::spaces::Discretization;
use crate::timestepper::StateVector;
use std::path::Path;

/// Formats with 17 significant digits, enough to reproduce any f64 exactly.
fn full(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_atomic(path: &Path, content: String) -> Result<(), ConfigError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    match std::fs::write(path, content) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = std::fs::remove_file(path);
            Err(e.into())
        }
    }
}

pub const ENERGY_HEADER: &str =
    "step,t,e_kin_b,e_el,e_sto,e_kin_f,d_darcy,d_visc,d_slip,balance_residual";

/// Writes one row per time level with the exact header the format
/// specifies.
pub fn write_energy_csv(reports: &[EnergyReport], path: &Path) -> Result<(), ConfigError> {
    let mut out = String::with_capacity(reports.len() * 200);
    out.push_str(ENERGY_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.step,
            full(r.t),
            full(r.e_kin_b),
            full(r.e_el),
            full(r.e_sto),
            full(r.e_kin_f),
            full(r.d_darcy),
            full(r.d_visc),
            full(r.d_slip),
            full(r.balance_residual),
        ));
    }
    write_atomic(path, out)
}

/// Reads an energy CSV back; used by round-trip checks.
pub fn read_energy_csv(path: &Path) -> Result<Vec<EnergyReport>, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header != ENERGY_HEADER {
        return Err(ConfigError::Validation(format!("unexpected energy header {header:?}")));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 10 {
            return Err(ConfigError::Parse { line: i + 2, msg: "expected 10 columns".into() });
        }
        let f = |j: usize| -> Result<f64, ConfigError> {
            cells[j].parse::<f64>().map_err(|_| ConfigError::Parse {
                line: i + 2,
                msg: format!("bad number {:?}", cells[j]),
            })
        };
        out.push(EnergyReport {
            step: cells[0].parse().map_err(|_| ConfigError::Parse {
                line: i + 2,
                msg: "bad step".into(),
            })?,
            t: f(1)?,
            e_kin_b: f(2)?,
            e_el: f(3)?,
            e_sto: f(4)?,
            e_kin_f: f(5)?,
            d_darcy: f(6)?,
            d_visc: f(7)?,
            d_slip: f(8)?,
            balance_residual: f(9)?,
        });
    }
    Ok(out)
}

/// Plain-text structured-grid dump at the mesh vertices, in lexicographic
/// order. Biot fields are written where `x_d >= 0`, fluid fields where
/// `x_d <= 0`, zeros elsewhere; periodic slave nodes carry master values
/// because the dump evaluates the constrained fields.
pub fn write_fields(
    disc: &Discretization,
    state: &StateVector,
    path: &Path,
) -> Result<(), ConfigError> {
    let mesh = &disc.mesh;
    let dim = mesh.spec.dim;
    let mut out = String::new();
    out.push_str(&format!("dim {dim}\n"));
    out.push_str(&format!("n {}\n", mesh.spec.n));
    out.push_str(&format!("t {}\n", full(state.t)));
    let mut cols: Vec<String> = (1..=dim).map(|d| format!("x{d}")).collect();
    for f in ["u", "w"] {
        for d in 1..=dim {
            cols.push(format!("{f}{d}"));
        }
    }
    cols.push("p".into());
    for d in 1..=dim {
        cols.push(format!("v{d}"));
    }
    cols.push("pf".into());
    out.push_str(&format!("fields {}\n", cols.join(" ")));

    let zax = dim - 1;
    for vx in &mesh.vertices {
        let mut row: Vec<String> = (0..dim).map(|d| full(vx[d])).collect();
        let in_biot = vx[zax] >= 0.0;
        let in_fluid = vx[zax] <= 0.0;
        let maps = &disc.maps;
        let push_vec = |row: &mut Vec<String>, vals: Option<Vec<f64>>| {
            match vals {
                Some(v) => {
                    for c in 0..dim {
                        row.push(full(v[c]));
                    }
                }
                None => {
                    for _ in 0..dim {
                        row.push(full(0.0));
                    }
                }
            }
        };
        push_vec(&mut row, if in_biot { Some(maps.u.eval(&state.u, vx).unwrap()) } else { None });
        push_vec(&mut row, if in_biot { Some(maps.u.eval(&state.w, vx).unwrap()) } else { None });
        row.push(full(if in_biot { maps.p.eval(&state.p, vx).unwrap()[0] } else { 0.0 }));
        push_vec(&mut row, if in_fluid { Some(maps.v.eval(&state.v, vx).unwrap()) } else { None });
        row.push(full(if in_fluid { maps.pf.eval(&state.pf, vx).unwrap()[0] } else { 0.0 }));
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    write_atomic(path, out)
}

/// Parsed field dump: header plus one row of numbers per vertex.
pub struct FieldDump {
    pub dim: usize,
    pub n: usize,
    pub t: f64,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_fields(path: &Path) -> Result<FieldDump, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let mut expect = |prefix: &str| -> Result<String, ConfigError> {
        let (i, line) = lines
            .next()
            .ok_or_else(|| ConfigError::Validation(format!("missing {prefix} header")))?;
        line.strip_prefix(prefix)
            .map(|s| s.trim().to_string())
            .ok_or(ConfigError::Parse { line: i + 1, msg: format!("expected {prefix}") })
    };
    let dim: usize = expect("dim ")?.parse().map_err(|_| ConfigError::Validation("bad dim".into()))?;
    let n: usize = expect("n ")?.parse().map_err(|_| ConfigError::Validation("bad n".into()))?;
    let t: f64 = expect("t ")?.parse().map_err(|_| ConfigError::Validation("bad t".into()))?;
    let columns: Vec<String> = expect("fields ")?.split_whitespace().map(|s| s.into()).collect();
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split_whitespace().map(|v| v.parse::<f64>()).collect();
        let row = row.map_err(|_| ConfigError::Parse { line: i + 1, msg: "bad number".into() })?;
        if row.len() != columns.len() {
            return Err(ConfigError::Parse { line: i + 1, msg: "wrong column count".into() });
        }
        rows.push(row);
    }
    Ok(FieldDump { dim, n, t, columns, rows })
}

/// Convergence table CSV with observed-order columns (first row has no
/// predecessor, written as nan).
pub fn write_convergence_csv(table: &ErrorTable, path: &Path) -> Result<(), ConfigError> {
    let mut out = String::from("level,n,h,err_u,err_w,err_p,err_v,order_u,order_w,order_p,order_v\n");
    for (i, row) in table.rows.iter().enumerate() {
        let orders = if i == 0 { [f64::NAN; 4] } else { table.orders[i - 1] };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            i,
            row.n,
            full(row.h),
            full(row.errors[0]),
            full(row.errors[1]),
            full(row.errors[2]),
            full(row.errors[3]),
            full(orders[0]),
            full(orders[1]),
            full(orders[2]),
            full(orders[3]),
        ));
    }
    write_atomic(path, out)
}

/// Vanishing-storage study CSV.
pub fn write_storage_csv(rows: &[StorageRow], path: &Path) -> Result<(), ConfigError> {
    let mut out = String::from("c0,distance,p_distance\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", full(r.c0), full(r.distance), full(r.p_distance)));
    }
    write_atomic(path, out)
}
