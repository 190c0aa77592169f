//! End-to-end checks of the command-line interface: exit-code contract,
//! output schemas and the degenerate-storage guard.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_biot-stokes"))
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("biot_stokes_cli_{name}"));
    std::fs::remove_dir_all(&dir).ok();
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn usage_errors_exit_2() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["run", "/no/such/config"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_zero_data_writes_zero_energy_csv() {
    let dir = workdir("zero");
    let cfg = dir.join("run.cfg");
    std::fs::write(
        &cfg,
        format!(
            "mesh.dim = 2\nmesh.n = 2\nscenario.kind = zero\nscheme.dt = 0.1\nscheme.steps = 4\noutput.dir = {}\n",
            dir.display()
        ),
    )
    .unwrap();
    let out = bin().args(["run", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("energy.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "step,t,e_kin_b,e_el,e_sto,e_kin_f,d_darcy,d_visc,d_slip,balance_residual"
    );
    let rows: Vec<&str> = lines.filter(|l| !l.trim().is_empty()).collect();
    assert_eq!(rows.len(), 5);
    for row in rows {
        for cell in row.split(',').skip(2) {
            assert_eq!(cell.parse::<f64>().unwrap(), 0.0);
        }
    }
}

#[test]
fn verify_adjoint_rejects_degenerate_storage() {
    let dir = workdir("degen");
    let cfg = dir.join("degen.cfg");
    std::fs::write(&cfg, "mesh.dim = 2\nmesh.n = 1\nparams.c0 = 0\n").unwrap();
    let out = bin().args(["verify", "adjoint", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("degenerate storage"), "stderr: {err}");
    assert!(err.contains("\"command\":\"verify adjoint\""), "stderr: {err}");
}

#[test]
fn verify_subcommands_pass_on_small_case() {
    let dir = workdir("verify");
    let cfg = dir.join("case.cfg");
    std::fs::write(
        &cfg,
        "mesh.dim = 2\nmesh.n = 2\nscheme.dt = 0.1\nscheme.steps = 10\nscenario.kind = decay\n",
    )
    .unwrap();
    for sub in [["verify", "adjoint"], ["verify", "energy"], ["probe", "uniqueness"]] {
        let out = bin().args([sub[0], sub[1], cfg.to_str().unwrap()]).output().unwrap();
        assert_eq!(
            out.status.code(),
            Some(0),
            "{sub:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let stdout = String::from_utf8_lossy(&out.stdout);
        assert!(stdout.contains("PASS"), "{sub:?}: {stdout}");
    }
}

#[test]
fn study_storage_emits_table_and_passes() {
    let dir = workdir("storage");
    let cfg = dir.join("s.cfg");
    std::fs::write(
        &cfg,
        format!(
            "mesh.dim = 2\nmesh.n = 2\nscheme.theta = 1\nscheme.dt = 0.1\nscheme.steps = 10\noutput.dir = {}\n",
            dir.display()
        ),
    )
    .unwrap();
    let out = bin().args(["study", "storage", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("storage.csv")).unwrap();
    assert!(csv.starts_with("c0,distance,p_distance\n"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn study_converge_emits_table_with_order_column() {
    // Coarse 3D pair keeps this end-to-end check cheap.
    let dir = workdir("converge");
    let cfg = dir.join("c.cfg");
    std::fs::write(&cfg, format!("mesh.dim = 3\noutput.dir = {}\n", dir.display())).unwrap();
    let out = bin().args(["study", "converge", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("convergence.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.contains("order_u") && header.contains("order_p"), "{header}");
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn malformed_config_reports_line_number_and_exits_2() {
    let dir = workdir("badcfg");
    let cfg = dir.join("bad.cfg");
    std::fs::write(&cfg, "mesh.n = 2\nmesh.n = 4\n").unwrap();
    let out = bin().args(["run", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "stderr: {err}");
}
