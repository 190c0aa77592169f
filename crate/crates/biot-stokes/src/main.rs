//! Command-line entry points.
//!
//! ```text
//! biot-stokes run <config>              time integration + energy/field output
//! biot-stokes verify adjoint <config>   generator/adjoint transpose, dissipativity, resolvent
//! biot-stokes verify energy <config>    discrete energy identity and decay inequality
//! biot-stokes study converge <config>   manufactured-solution refinement table
//! biot-stokes study storage <config>    vanishing-storage limit distances
//! biot-stokes probe uniqueness <config> zero-data and permuted-assembly probes
//! ```
//!
//! Exit code 0 when every asserted property passes, 1 on a failed property
//! or error (with a machine-readable summary on stderr), 2 on usage errors.

use biot_stokes::config::{parse_config, RunConfig};
use biot_stokes::forms::assemble;
use biot_stokes::io;
use biot_stokes::operator_lab::{
    build_adjoint_system, build_divfree_basis, build_generator, check_dissipativity,
    solve_resolvent,
};
use biot_stokes::scenarios::{
    convergence_study, run_scenario, uniqueness_probe, vanishing_storage_study, ScenarioConfig,
};
use biot_stokes::spaces::Discretization;
use biot_stokes::timestepper::SchemeConfig;
use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::process::ExitCode;

struct Failure {
    command: String,
    error: String,
}

fn fail(command: &str, error: impl std::fmt::Display) -> Failure {
    Failure { command: command.into(), error: error.to_string() }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let usage = || {
        eprintln!(
            "usage: biot-stokes <run|verify adjoint|verify energy|study converge|study storage|probe uniqueness> <config>"
        );
        ExitCode::from(2)
    };
    let (command, config_path): (String, &str) = match args.as_slice() {
        [c, path] if c == "run" => (c.clone(), path),
        [a, b, path] => (format!("{a} {b}"), path),
        _ => return usage(),
    };
    let known = [
        "run",
        "verify adjoint",
        "verify energy",
        "study converge",
        "study storage",
        "probe uniqueness",
    ];
    if !known.contains(&command.as_str()) {
        return usage();
    }

    let text = match std::fs::read_to_string(config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{{\"command\":\"{command}\",\"error\":\"cannot read {config_path}: {e}\"}}");
            return ExitCode::from(2);
        }
    };
    let cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{{\"command\":\"{command}\",\"error\":\"{e}\"}}");
            return ExitCode::from(2);
        }
    };

    let result = match command.as_str() {
        "run" => cmd_run(&cfg),
        "verify adjoint" => cmd_verify_adjoint(&cfg),
        "verify energy" => cmd_verify_energy(&cfg),
        "study converge" => cmd_study_converge(&cfg),
        "study storage" => cmd_study_storage(&cfg),
        "probe uniqueness" => cmd_probe_uniqueness(&cfg),
        _ => unreachable!(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!(
                "{{\"command\":\"{}\",\"error\":\"{}\"}}",
                f.command,
                f.error.replace('"', "'")
            );
            ExitCode::from(1)
        }
    }
}

fn scenario_config(cfg: &RunConfig) -> ScenarioConfig {
    ScenarioConfig { grid: cfg.grid, params: cfg.params, scheme: cfg.scheme, kind: cfg.kind }
}

fn cmd_run(cfg: &RunConfig) -> Result<(), Failure> {
    let run = run_scenario(&scenario_config(cfg)).map_err(|e| fail("run", e))?;
    let out = Path::new(&cfg.output_dir);
    io::write_energy_csv(&run.reports, &out.join("energy.csv")).map_err(|e| fail("run", e))?;
    if cfg.field_stride > 0 {
        for (i, state) in run.trajectory.states.iter().enumerate() {
            if i % cfg.field_stride == 0 || i == run.trajectory.states.len() - 1 {
                io::write_fields(&run.disc, state, &out.join(format!("fields_{i:05}.txt")))
                    .map_err(|e| fail("run", e))?;
            }
        }
    }
    let last = run.reports.last().unwrap();
    println!(
        "run: {} steps to t = {:.6}; e(T) = {:.6e}, dissipated = {:.6e}, balance residual = {:.3e}",
        cfg.scheme.steps,
        last.t,
        last.energy(),
        last.dissipation(),
        last.balance_residual
    );
    println!("run: v0 projection defect = {:.3e}", run.projection_defect);
    println!("run: output in {}", cfg.output_dir);
    Ok(())
}

fn cmd_verify_adjoint(cfg: &RunConfig) -> Result<(), Failure> {
    let cmd = "verify adjoint";
    let disc = Discretization::build(cfg.grid).map_err(|e| fail(cmd, e))?;
    let sys = assemble(&cfg.params, &disc);
    let basis = build_divfree_basis(&sys, &disc).map_err(|e| fail(cmd, e))?;
    let bundle = build_generator(&cfg.params, &sys, &basis, &disc).map_err(|e| fail(cmd, e))?;
    let jt = build_adjoint_system(&cfg.params, &sys, &basis, &disc).map_err(|e| fail(cmd, e))?;

    let scale = bundle.j.amax();
    let err = (&jt - bundle.j.transpose()).amax();
    let ok = err <= 1e-12 * scale;
    println!(
        "adjoint transpose identity: {} (max entry error {:.3e}, bound {:.3e})",
        if ok { "PASS" } else { "FAIL" },
        err,
        1e-12 * scale
    );
    if !ok {
        return Err(fail(cmd, format!("adjoint transpose error {err:e} > {:e}", 1e-12 * scale)));
    }

    let rep = check_dissipativity(&bundle, &sys, 100, 7_772_024).map_err(|e| fail(cmd, e))?;
    println!(
        "dissipativity (100 random states): PASS (max y^T J y = {:.3e}, identity error {:.3e})",
        rep.max_quadform, rep.max_identity_error
    );

    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for i in 0..20 {
        let ystar = DVector::from_fn(bundle.dim(), |_, _| rng.gen_range(-1.0..1.0));
        solve_resolvent(&bundle, &ystar, 1e-10)
            .map_err(|e| fail(cmd, format!("resolvent sample {i}: {e}")))?;
    }
    println!("resolvent solvability (20 random right-hand sides): PASS");
    Ok(())
}

fn cmd_verify_energy(cfg: &RunConfig) -> Result<(), Failure> {
    let cmd = "verify energy";
    let base = scenario_config(cfg);

    // Crank-Nicolson identity.
    let mut cn = base;
    cn.scheme = SchemeConfig::new(0.5, cfg.scheme.dt, cfg.scheme.steps, cfg.scheme.tol)
        .map_err(|e| fail(cmd, e))?;
    let run = run_scenario(&cn).map_err(|e| fail(cmd, e))?;
    let scale = run.reports.iter().map(|r| r.energy()).fold(0.0f64, f64::max).max(1e-30);
    let worst = run
        .reports
        .iter()
        .map(|r| r.balance_residual.abs())
        .fold(0.0f64, f64::max);
    let ok = worst <= 1e-8 * scale;
    println!(
        "energy identity (theta = 1/2): {} (max |residual| / scale = {:.3e})",
        if ok { "PASS" } else { "FAIL" },
        worst / scale
    );
    if !ok {
        return Err(fail(cmd, format!("CN balance residual {worst:e} > 1e-8 * {scale:e}")));
    }

    // Backward Euler inequality.
    let mut be = base;
    be.scheme = SchemeConfig::new(1.0, cfg.scheme.dt, cfg.scheme.steps, cfg.scheme.tol)
        .map_err(|e| fail(cmd, e))?;
    let run = run_scenario(&be).map_err(|e| fail(cmd, e))?;
    let e0 = run.reports[0].energy();
    let scale = e0.max(1e-30);
    let mut ok = true;
    let mut prev = f64::INFINITY;
    let mut worst = f64::NEG_INFINITY;
    let zero_sources = run.exact.is_none();
    for r in &run.reports {
        worst = worst.max(r.balance_residual);
        if r.balance_residual > 1e-10 * scale {
            ok = false;
        }
        if zero_sources && r.energy() > prev + 1e-12 * scale {
            ok = false;
        }
        prev = r.energy();
    }
    println!(
        "energy inequality (theta = 1): {} (max residual / e(0) = {:.3e})",
        if ok { "PASS" } else { "FAIL" },
        worst / scale
    );
    if !ok {
        return Err(fail(cmd, format!("BE energy inequality violated: residual {worst:e}")));
    }
    Ok(())
}

fn cmd_study_converge(cfg: &RunConfig) -> Result<(), Failure> {
    let cmd = "study converge";
    let levels: &[usize] = if cfg.grid.dim == 2 { &[4, 8, 16] } else { &[2, 4] };
    let t_final = 0.25;
    let table =
        convergence_study(cfg.grid.dim, levels, &cfg.params, t_final).map_err(|e| fail(cmd, e))?;
    let out = Path::new(&cfg.output_dir);
    io::write_convergence_csv(&table, &out.join("convergence.csv")).map_err(|e| fail(cmd, e))?;
    println!("level      n          err_u        err_w        err_p        err_v   order(u w p v)");
    for (i, row) in table.rows.iter().enumerate() {
        let o = if i == 0 { [f64::NAN; 4] } else { table.orders[i - 1] };
        println!(
            "{i:>5} {n:>6} {eu:>12.4e} {ew:>12.4e} {ep:>12.4e} {ev:>12.4e}   {o0:>5.2} {o1:>5.2} {o2:>5.2} {o3:>5.2}",
            n = row.n,
            eu = row.errors[0],
            ew = row.errors[1],
            ep = row.errors[2],
            ev = row.errors[3],
            o0 = o[0],
            o1 = o[1],
            o2 = o[2],
            o3 = o[3],
        );
    }
    let last = table.orders.last().ok_or_else(|| fail(cmd, "need at least two levels"))?;
    if cfg.grid.dim == 2 {
        let ok = last[0] >= 2.5 && last[3] >= 2.5 && last[2] >= 1.75;
        println!(
            "observed orders on finest pair: u {:.2}, v {:.2}, p {:.2} -> {}",
            last[0],
            last[3],
            last[2],
            if ok { "PASS" } else { "FAIL" }
        );
        if !ok {
            return Err(fail(cmd, format!("orders below threshold: {last:?}")));
        }
    } else {
        let rows = &table.rows;
        let factor = rows[0].errors[2] / rows[1].errors[2];
        let ok = factor >= 3.0;
        println!("pressure error reduction factor: {factor:.2} -> {}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            return Err(fail(cmd, format!("3D pressure error reduction {factor} < 3")));
        }
    }
    println!("study converge: table written to {}/convergence.csv", cfg.output_dir);
    Ok(())
}

fn cmd_study_storage(cfg: &RunConfig) -> Result<(), Failure> {
    let cmd = "study storage";
    let c0_list = [1e-1, 1e-2, 1e-3, 1e-4];
    let rows = vanishing_storage_study(cfg.grid, &cfg.params, cfg.scheme, &c0_list)
        .map_err(|e| fail(cmd, e))?;
    let out = Path::new(&cfg.output_dir);
    io::write_storage_csv(&rows, &out.join("storage.csv")).map_err(|e| fail(cmd, e))?;
    println!("        c0       distance     p_distance");
    for r in &rows {
        println!("{:>10.1e} {:>14.6e} {:>14.6e}", r.c0, r.distance, r.p_distance);
    }
    for pair in rows.windows(2) {
        if !(pair[1].distance < pair[0].distance) {
            return Err(fail(
                cmd,
                format!(
                    "distance not decreasing from c0 = {} to {}: {} vs {}",
                    pair[0].c0, pair[1].c0, pair[0].distance, pair[1].distance
                ),
            ));
        }
    }
    println!("vanishing-storage distances decrease monotonically: PASS");
    Ok(())
}

fn cmd_probe_uniqueness(cfg: &RunConfig) -> Result<(), Failure> {
    let cmd = "probe uniqueness";
    let rep = uniqueness_probe(&scenario_config(cfg), 20_240_601).map_err(|e| fail(cmd, e))?;
    let zero_ok = rep.max_zero_norm <= 1e-12;
    println!(
        "zero-data trajectory stays zero: {} (max X-norm {:.3e})",
        if zero_ok { "PASS" } else { "FAIL" },
        rep.max_zero_norm
    );
    let perm_ok = rep.max_permutation_diff <= 1e-10;
    println!(
        "permuted-assembly agreement: {} (max state diff {:.3e})",
        if perm_ok { "PASS" } else { "FAIL" },
        rep.max_permutation_diff
    );
    // Identical-data rerun, compared bitwise on the final state.
    let r1 = run_scenario(&scenario_config(cfg)).map_err(|e| fail(cmd, e))?;
    let r2 = run_scenario(&scenario_config(cfg)).map_err(|e| fail(cmd, e))?;
    let s1 = r1.trajectory.states.last().unwrap();
    let s2 = r2.trajectory.states.last().unwrap();
    let bit_ok = s1.u == s2.u && s1.w == s2.w && s1.p == s2.p && s1.v == s2.v && s1.pf == s2.pf;
    println!("identical-data rerun bit-for-bit: {}", if bit_ok { "PASS" } else { "FAIL" });
    if !(zero_ok && perm_ok && bit_ok) {
        return Err(fail(cmd, "uniqueness probe failed"));
    }
    Ok(())
}
