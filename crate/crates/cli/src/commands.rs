//! Command implementations: each subcommand reads one scenario, runs the
//! corresponding library routine and writes its artifacts into the output
//! directory. All emitted numbers are deterministic functions of the
//! configuration: files carry no timestamps, durations or machine data,
//! so rerunning a command reproduces every artifact byte for byte.

use crate::config::Scenario;
use crate::error::{config_error, CliError};
use crate::io::{field_text, write_json, write_string, write_trajectory};
use ripvisc_core::{
    bochner_norms, continuation_solve, control_inner, evaluate, kkt_report, objective_value,
    rate_study, solve_adjoint, solve_rate_independent, solve_regularized, BochnerNorms,
    KktReport, RateStudy, VerifyOptions,
};
use serde::Serialize;
use std::path::{Path, PathBuf};

/// Largest acceptable best relative error of the difference-quotient
/// check; beyond it the reduced gradient cannot be trusted.
const GRADCHECK_TOL: f64 = 1e-5;

/// Largest acceptable residual of the very weak adjoint identity on a
/// converged bundle, where it holds by construction up to quadrature.
const ADJOINT_IDENTITY_TOL: f64 = 1e-8;

/// Denominator floor of relative errors, guarding exact zeros.
const REL_FLOOR: f64 = 1e-14;

/// Flags shared by every command.
pub struct CommonArgs {
    pub scenario: Scenario,
    pub out_dir: PathBuf,
    pub rho_override: Option<f64>,
    pub quiet: bool,
}

impl CommonArgs {
    fn say(&self, line: &str) {
        if !self.quiet {
            println!("{line}");
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

fn norms_csv(norms: &BochnerNorms) -> String {
    format!(
        "l2_h10,linf_h10,h1_l2,w11_hm1\n{:.16e},{:.16e},{:.16e},{:.16e}\n",
        norms.l2_h10, norms.linf_h10, norms.h1_l2, norms.w11_hm1
    )
}

#[derive(Serialize)]
struct StateReport {
    solver: &'static str,
    rho: Option<f64>,
    norms: BochnerNorms,
}

/// `solve-state`: one forward solve, written as a trajectory file plus a
/// norm summary. `reference` selects the exact active-set solver; the
/// default is the smoothed solver at the scenario's single viscosity.
pub fn solve_state(args: &CommonArgs, reference: bool) -> Result<(), CliError> {
    let sc = &args.scenario;
    if reference && args.rho_override.is_some() {
        return Err(config_error(
            "--rho has no meaning for the reference solver (it has no viscosity)",
        ));
    }
    let grid = sc.grid();
    let tg = sc.time_grid();
    let g = sc.initial_load(&grid, &tg)?;

    let (z, solver, rho) = if reference {
        let sol = solve_rate_independent(&sc.ri_problem(), &g)?;
        (sol.z, "reference", None)
    } else {
        let rho = sc.single_rho(args.rho_override)?;
        let sol = solve_regularized(&sc.reg_problem(rho), &g)?;
        (sol.z, "regularized", Some(rho))
    };

    let norms = bochner_norms(&grid, &tg, &z);
    write_trajectory(&args.path("state.txt"), &grid, &tg, "state", &z)?;
    // The terminal field doubles as a manufactured target: point
    // objective.z_t at this file to track a reachable final state.
    write_string(
        &args.path("final_state.txt"),
        &field_text(&grid, "final_state", z.last()),
    )?;
    if sc.formats.csv {
        write_string(&args.path("norms.csv"), &norms_csv(&norms))?;
    }
    if sc.formats.json {
        write_json(&args.path("report.json"), &StateReport { solver, rho, norms })?;
    }
    args.say(&format!(
        "{solver} solve: |z|_C(I;H10) = {:.6e}, |z|_H1(I;L2) = {:.6e}",
        norms.linf_h10, norms.h1_l2
    ));
    args.say(&format!("wrote {}", args.path("state.txt").display()));
    Ok(())
}

#[derive(Serialize)]
struct AdjointReport {
    rho: f64,
    objective: f64,
    gradient_norm: f64,
    state_norms: BochnerNorms,
    q_norms: BochnerNorms,
    xi_norms: BochnerNorms,
}

/// `solve-adjoint`: forward solve, backward sweep and reduced gradient at
/// the configured control, all written as trajectory files.
pub fn solve_adjoint_cmd(args: &CommonArgs) -> Result<(), CliError> {
    let sc = &args.scenario;
    let grid = sc.grid();
    let tg = sc.time_grid();
    let rho = sc.single_rho(args.rho_override)?;
    let prob = sc.reg_problem(rho);
    let spec = sc.objective(&grid, &tg)?;
    let g = sc.initial_load(&grid, &tg)?;
    let anchor = sc.anchor_load(&grid, &tg)?;

    let ev = evaluate(&prob, &spec, &g, anchor.as_ref(), sc.prox_weight)?;
    write_trajectory(&args.path("state.txt"), &grid, &tg, "state", &ev.state.z)?;
    write_trajectory(&args.path("adjoint_q.txt"), &grid, &tg, "adjoint_q", &ev.adjoint.q)?;
    write_trajectory(&args.path("adjoint_xi.txt"), &grid, &tg, "adjoint_xi", &ev.adjoint.xi)?;
    write_trajectory(&args.path("gradient.txt"), &grid, &tg, "gradient", &ev.gradient)?;
    let report = AdjointReport {
        rho,
        objective: ev.objective,
        gradient_norm: ev.gradient_norm,
        state_norms: bochner_norms(&grid, &tg, &ev.state.z),
        q_norms: bochner_norms(&grid, &tg, &ev.adjoint.q),
        xi_norms: bochner_norms(&grid, &tg, &ev.adjoint.xi),
    };
    if sc.formats.json {
        write_json(&args.path("report.json"), &report)?;
    }
    args.say(&format!(
        "rho = {rho:.3e}: J = {:.9e}, |J'|_H1(I;L2) = {:.6e}",
        ev.objective, ev.gradient_norm
    ));
    Ok(())
}

#[derive(Serialize)]
struct GradCheckRow {
    eps: f64,
    central_difference: f64,
    rel_error: f64,
}

#[derive(Serialize)]
struct GradCheckReport {
    rho: f64,
    predicted: f64,
    rows: Vec<GradCheckRow>,
    best_rel_error: f64,
    pass: bool,
}

/// `grad-check`: compares the adjoint-based directional derivative with
/// central difference quotients of the objective along the configured
/// direction. Artifacts are written before the pass verdict is applied,
/// so a failing run still leaves its evidence behind.
pub fn grad_check(args: &CommonArgs, eps_override: Option<Vec<f64>>) -> Result<(), CliError> {
    let sc = &args.scenario;
    let grid = sc.grid();
    let tg = sc.time_grid();
    let rho = sc.single_rho(args.rho_override)?;
    let prob = sc.reg_problem(rho);
    let spec = sc.objective(&grid, &tg)?;
    let g = sc.initial_load(&grid, &tg)?;
    let anchor = sc.anchor_load(&grid, &tg)?;

    let eps_list = match eps_override {
        Some(list) if !list.is_empty() => {
            if list.iter().any(|&e| !(e > 0.0)) {
                return Err(config_error("--eps entries must be positive"));
            }
            list
        }
        _ => sc.gradcheck_eps.clone(),
    };
    let dir = sc.gradcheck_direction.eval(sc, &grid, &tg)?;
    if dir.field(0).norm_sup() != 0.0 {
        return Err(config_error(
            "gradcheck.direction must vanish at t = 0 (admissible controls share g(0))",
        ));
    }

    let ev = evaluate(&prob, &spec, &g, anchor.as_ref(), sc.prox_weight)?;
    let predicted = control_inner(&grid, &tg, &ev.gradient, &dir);

    let mut rows = Vec::with_capacity(eps_list.len());
    let mut best = f64::INFINITY;
    args.say(&format!(
        "rho = {rho:.3e}, predicted dJ = {predicted:.12e}"
    ));
    args.say("        eps   central difference      rel error");
    for &eps in &eps_list {
        let mut plus = g.clone();
        plus.axpy(eps, &dir);
        let mut minus = g.clone();
        minus.axpy(-eps, &dir);
        let j_plus = {
            let sol = solve_regularized(&prob, &plus)?;
            objective_value(&grid, &tg, &spec, &sol.z, &plus, anchor.as_ref(), sc.prox_weight)
        };
        let j_minus = {
            let sol = solve_regularized(&prob, &minus)?;
            objective_value(&grid, &tg, &spec, &sol.z, &minus, anchor.as_ref(), sc.prox_weight)
        };
        let fd = (j_plus - j_minus) / (2.0 * eps);
        let rel = (fd - predicted).abs() / predicted.abs().max(REL_FLOOR);
        best = best.min(rel);
        args.say(&format!("  {eps:>9.3e}   {fd:>18.12e}   {rel:>12.6e}"));
        rows.push(GradCheckRow {
            eps,
            central_difference: fd,
            rel_error: rel,
        });
    }
    let pass = best <= GRADCHECK_TOL;

    if sc.formats.csv {
        let mut csv = String::from("eps,central_difference,predicted,rel_error\n");
        for r in &rows {
            csv.push_str(&format!(
                "{:.16e},{:.16e},{predicted:.16e},{:.16e}\n",
                r.eps, r.central_difference, r.rel_error
            ));
        }
        write_string(&args.path("gradcheck.csv"), &csv)?;
    }
    if sc.formats.json {
        write_json(
            &args.path("report.json"),
            &GradCheckReport {
                rho,
                predicted,
                rows,
                best_rel_error: best,
                pass,
            },
        )?;
    }
    if !pass {
        return Err(CliError::Check(format!(
            "gradient check failed: best relative error {best:.3e} exceeds {GRADCHECK_TOL:.0e}"
        )));
    }
    args.say(&format!("gradient check passed: best rel error {best:.3e}"));
    Ok(())
}

#[derive(Serialize)]
struct OptimizeFinal {
    rho: f64,
    objective: f64,
    gradient_norm: f64,
    iterations: usize,
    converged: bool,
    forward_solves: usize,
}

#[derive(Serialize)]
struct OptimizeReportFile<'a> {
    schedule: &'a ripvisc_core::ContinuationSchedule,
    levels: &'a [ripvisc_core::LevelRecord],
    #[serde(rename = "final")]
    final_level: OptimizeFinal,
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

/// `optimize`: warm-started continuation over the viscosity schedule.
/// Writes a self-contained bundle (scenario echo, final control, state,
/// adjoint pair, gradient, per-level table) that `verify-kkt --bundle`
/// can audit without the original configuration file.
pub fn optimize(args: &CommonArgs) -> Result<(), CliError> {
    let sc = &args.scenario;
    let grid = sc.grid();
    let tg = sc.time_grid();
    let sched = sc.schedule(args.rho_override)?;
    let spec = sc.objective(&grid, &tg)?;
    let g0 = sc.initial_load(&grid, &tg)?;
    let anchor = sc.anchor_load(&grid, &tg)?;

    let report = continuation_solve(&sc.reg_problem(sched.rho_init), &spec, &sched, &g0, anchor.as_ref(), sc.prox_weight)?;
    for lvl in &report.levels {
        args.say(&format!(
            "rho = {:.3e}: J = {:.9e}, |J'| = {:.3e}, iterations = {}{}",
            lvl.rho,
            lvl.objective,
            lvl.gradient_norm,
            lvl.iterations,
            if lvl.converged { "" } else { " (cap hit)" }
        ));
    }

    let out = &report.outcome;
    let ev = &out.evaluation;
    write_string(&args.path("scenario.cfg"), &sc.to_config_text())?;
    write_trajectory(&args.path("control.txt"), &grid, &tg, "control", &out.control)?;
    write_trajectory(&args.path("state.txt"), &grid, &tg, "state", &ev.state.z)?;
    write_trajectory(&args.path("adjoint_q.txt"), &grid, &tg, "adjoint_q", &ev.adjoint.q)?;
    write_trajectory(&args.path("adjoint_xi.txt"), &grid, &tg, "adjoint_xi", &ev.adjoint.xi)?;
    write_trajectory(&args.path("gradient.txt"), &grid, &tg, "gradient", &ev.gradient)?;

    if sc.formats.csv {
        let mut csv = String::from(
            "rho,iterations,objective,gradient_norm,anchor_distance,drift,delta_exceeded,converged\n",
        );
        for lvl in &report.levels {
            csv.push_str(&format!(
                "{:.16e},{},{:.16e},{:.16e},{},{},{},{}\n",
                lvl.rho,
                lvl.iterations,
                lvl.objective,
                lvl.gradient_norm,
                opt_cell(lvl.anchor_distance),
                opt_cell(lvl.drift),
                lvl.delta_exceeded,
                lvl.converged
            ));
        }
        write_string(&args.path("levels.csv"), &csv)?;
    }
    if sc.formats.json {
        let final_rho = report.levels.last().map(|l| l.rho).unwrap_or(sched.rho_init);
        write_json(
            &args.path("report.json"),
            &OptimizeReportFile {
                schedule: &sched,
                levels: &report.levels,
                final_level: OptimizeFinal {
                    rho: final_rho,
                    objective: ev.objective,
                    gradient_norm: ev.gradient_norm,
                    iterations: out.iterations,
                    converged: out.converged,
                    forward_solves: out.forward_solves,
                },
            },
        )?;
    }
    args.say(&format!(
        "final control written to {}",
        args.path("control.txt").display()
    ));
    Ok(())
}

/// `rate-study`: sweeps the configured viscosities at the fixed initial
/// load and measures the distance to a refined exact-solver reference.
pub fn rate_study_cmd(args: &CommonArgs) -> Result<(), CliError> {
    let sc = &args.scenario;
    if args.rho_override.is_some() {
        return Err(config_error(
            "rate-study sweeps study.rho_list; --rho does not apply",
        ));
    }
    let grid = sc.grid();
    let tg = sc.time_grid();
    let g = sc.initial_load(&grid, &tg)?;

    let study: RateStudy = rate_study(&grid, &tg, &g, &sc.rho_list, sc.refine);
    args.say("         rho            error        order");
    for row in &study.rows {
        args.say(&format!(
            "  {:>10.3e}   {:>14.8e}   {}",
            row.rho,
            row.error,
            row.order.map(|o| format!("{o:>8.4}")).unwrap_or_default()
        ));
    }
    args.say(&format!(
        "least-squares slope {:.4}, fitted constant {:.6e}",
        study.ls_slope, study.fitted_c
    ));

    if sc.formats.csv {
        let mut csv = String::from("rho,error,order\n");
        for row in &study.rows {
            csv.push_str(&format!(
                "{:.16e},{:.16e},{}\n",
                row.rho,
                row.error,
                opt_cell(row.order)
            ));
        }
        write_string(&args.path("rate_study.csv"), &csv)?;
    }
    if sc.formats.json {
        write_json(&args.path("report.json"), &study)?;
    }
    Ok(())
}

/// `verify-kkt`: audits an optimality-system bundle. In config mode the
/// bundle is computed from the scenario's control; in bundle mode the
/// control and viscosity are read back from an `optimize` output
/// directory and only the audit reruns.
pub fn verify_kkt(args: &CommonArgs, bundle: Option<&Path>) -> Result<(), CliError> {
    let (sc, rho, out_dir) = match bundle {
        None => {
            let rho = args.scenario.single_rho(args.rho_override)?;
            (args.scenario.clone(), rho, args.out_dir.clone())
        }
        Some(dir) => {
            if args.rho_override.is_some() {
                return Err(config_error(
                    "--rho cannot override the viscosity stored in a bundle",
                ));
            }
            let cfg_path = dir.join("scenario.cfg");
            let text = std::fs::read_to_string(&cfg_path).map_err(|e| {
                config_error(format!("cannot read {}: {e}", cfg_path.display()))
            })?;
            let mut sc = crate::config::parse_scenario(&text, dir)?;
            let control = dir.join("control.txt");
            sc.initial = crate::config::LoadSpec::File(control.to_string_lossy().into_owned());
            let report_path = dir.join("report.json");
            let report_text = std::fs::read_to_string(&report_path).map_err(|e| {
                config_error(format!("cannot read {}: {e}", report_path.display()))
            })?;
            let report: serde_json::Value = serde_json::from_str(&report_text)
                .map_err(|e| config_error(format!("{}: {e}", report_path.display())))?;
            let rho = report["final"]["rho"].as_f64().ok_or_else(|| {
                config_error(format!(
                    "{}: missing final.rho (not an optimize bundle?)",
                    report_path.display()
                ))
            })?;
            (sc, rho, dir.to_path_buf())
        }
    };

    let grid = sc.grid();
    let tg = sc.time_grid();
    let prob = sc.reg_problem(rho);
    let spec = sc.objective(&grid, &tg)?;
    let g = sc.initial_load(&grid, &tg)?;
    let anchor = sc.anchor_load(&grid, &tg)?;

    let sol = solve_regularized(&prob, &g)?;
    let adj = solve_adjoint(&prob, &spec, &sol);
    let opts = VerifyOptions {
        refine: sc.refine,
        ..VerifyOptions::default()
    };
    let report: KktReport = kkt_report(
        &prob,
        &spec,
        &g,
        anchor.as_ref(),
        sc.prox_weight,
        &sol,
        &adj,
        &opts,
    );

    args.say(&format!("rho = {rho:.3e}"));
    args.say(&format!(
        "complementarity residual {:.6e}, stationarity {:.6e}, adjoint identity {:.6e}",
        report.complementarity_q, report.stationarity, report.very_weak_adjoint
    ));
    args.say("estimate checks:");
    for c in &report.estimate_checks {
        args.say(&format!(
            "  {:<28} lhs {:>12.5e}  rhs {:>12.5e}  margin {:>9.2e}  {}",
            c.name,
            c.lhs,
            c.rhs,
            c.margin,
            if c.pass { "pass" } else { "FAIL" }
        ));
    }

    if sc.formats.csv {
        let mut csv = String::from("name,lhs,rhs,margin,pass\n");
        for c in &report.estimate_checks {
            csv.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{}\n",
                c.name, c.lhs, c.rhs, c.margin, c.pass
            ));
        }
        write_string(&out_dir.join("estimates.csv"), &csv)?;
    }
    if sc.formats.json {
        write_json(&out_dir.join("kkt.json"), &report)?;
    }

    let failed: Vec<&str> = report
        .estimate_checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| c.name.as_str())
        .collect();
    if !failed.is_empty() {
        return Err(CliError::Check(format!(
            "estimate check(s) failed: {}",
            failed.join(", ")
        )));
    }
    if report.very_weak_adjoint > ADJOINT_IDENTITY_TOL {
        return Err(CliError::Check(format!(
            "very weak adjoint identity residual {:.3e} exceeds {ADJOINT_IDENTITY_TOL:.0e}",
            report.very_weak_adjoint
        )));
    }
    args.say("all checks passed");
    Ok(())
}

