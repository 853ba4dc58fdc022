//! `ucm` — driver for the radial viscoelastic flow laboratory.
//!
//! Exit codes: 0 ok, 1 internal error, 2 bad configuration, 3 initial-data
//! construction failure, 4 solver breakdown before the requested end time,
//! 5 verification failure.

use clap::{Parser, Subcommand};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use ucm::config::{AutoOr, RunConfig};
use ucm::diagnostics;
use ucm::initial_data::{build_initial_state, choose_l_r, ProfileSpec, SearchCaps};
use ucm::io;
use ucm::model::{char_speed_bound_radial, Parameters};
use ucm::riccati;
use ucm::solver::radial::{run, RunOutcome, RunSetup, SchemeConfig};
use ucm::{InitialData64, Scalar};

#[derive(Parser)]
#[command(name = "ucm", version, about = "radial viscoelastic flow laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Construct initial data from a config and write it to <out>/ic.json
    MakeIc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evolve stored initial data; writes series.csv and outcome.json
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run and check the analytical guarantees; writes verify.json
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the breakdown criterion and lifespan bound for stored data
    Bound {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bundle the artifacts in <out> into report.json
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_CONSTRUCTION: u8 = 3;
const EXIT_BREAKDOWN: u8 = 4;
const EXIT_VERIFICATION: u8 = 5;

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn init_threads() -> Result<(), String> {
    if let Ok(v) = std::env::var("UCM_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| format!("UCM_THREADS must be a positive integer, got `{v}`"))?;
        if n == 0 {
            return Err("UCM_THREADS must be a positive integer".into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    if let Err(msg) = init_threads() {
        return fail(EXIT_CONFIG, msg);
    }
    let cli = Cli::parse();
    match cli.command {
        Command::MakeIc { config, out } => make_ic(&config, &out),
        Command::Run { config, data, out } => cmd_run(&config, &data, &out),
        Command::Verify { config, data, out } => cmd_verify(&config, &data, &out),
        Command::Bound { config, data, out } => cmd_bound(&config, &data, &out),
        Command::Report { out } => cmd_report(&out),
    }
}

fn load_config(path: &Path) -> Result<RunConfig<Scalar>, String> {
    RunConfig::load(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn ensure_out(out: &Path) -> Result<(), String> {
    std::fs::create_dir_all(out).map_err(|e| format!("{}: {e}", out.display()))
}

/// sigma_est fallback: twice the largest initial characteristic speed
/// bound, so the support estimate survives the numerical diffusion tail.
fn auto_sigma(data: &InitialData64, params: &Parameters<Scalar>) -> Scalar {
    let max_bound = (0..data.grid.n_cells)
        .map(|i| char_speed_bound_radial(&data.point(i), params))
        .fold(0.0, Scalar::max);
    2.0 * max_bound
}

fn resolve_profile(
    cfg: &RunConfig<Scalar>,
    params: &Parameters<Scalar>,
) -> Result<ProfileSpec<Scalar>, String> {
    match (cfg.l, cfg.r_support) {
        (AutoOr::Fixed(l), AutoOr::Fixed(r_support)) => Ok(ProfileSpec {
            l,
            r_support,
            mollifier_width: cfg.mollifier_width,
            rho0_amplitude: cfg.rho0_amplitude,
            delta_a: cfg.delta_a,
        }),
        (AutoOr::Auto, AutoOr::Auto) => {
            let AutoOr::Fixed(sigma) = cfg.sigma_est else {
                return Err(
                    "profile.l = auto requires a fixed solver.sigma_est (the search \
                     depends on the propagation speed estimate)"
                        .into(),
                );
            };
            choose_l_r(
                params,
                sigma,
                cfg.rho0_amplitude,
                cfg.delta_a,
                cfg.mollifier_width,
                SearchCaps::default(),
            )
            .map_err(|e| e.to_string())
        }
        _ => Err("profile.l and profile.r_support must both be fixed or both auto".into()),
    }
}

fn make_ic(config: &Path, out: &Path) -> ExitCode {
    let cfg = match load_config(config) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    if let Err(e) = ensure_out(out) {
        return fail(EXIT_CONFIG, e);
    }
    let params = cfg.parameters().expect("validated");
    let profile = match resolve_profile(&cfg, &params) {
        Ok(p) => p,
        Err(e) => return fail(EXIT_CONSTRUCTION, e),
    };
    // grid must hold the support plus the propagation cone
    let sigma_hint = match cfg.sigma_est {
        AutoOr::Fixed(s) => s,
        AutoOr::Auto => 2.0 * (params.a * params.gamma + 2.0 * params.g).sqrt(),
    };
    let r_max = profile.r_support + sigma_hint * cfg.t_end + cfg.domain_margin;
    let dr = r_max / cfg.n_cells as Scalar;
    let grid = ucm::RadialGrid64::new(cfg.n_cells, dr);
    let data = match build_initial_state(&profile, &params, &grid) {
        Ok(d) => d,
        Err(e) => return fail(EXIT_CONSTRUCTION, e),
    };
    let path = out.join("ic.json");
    if let Err(e) = io::save_initial_data(&path, &data, &params, &profile) {
        return fail(1, e);
    }
    println!(
        "wrote {} (L = {}, R = {}, {} cells, dr = {:.6e})",
        path.display(),
        profile.l,
        profile.r_support,
        cfg.n_cells,
        dr
    );
    ExitCode::SUCCESS
}

struct LoadedRun {
    cfg: RunConfig<Scalar>,
    params: Parameters<Scalar>,
    data: InitialData64,
    sigma_est: Scalar,
    setup: RunSetup<Scalar>,
}

fn load_run(config: &Path, data_path: &Path) -> Result<LoadedRun, (u8, String)> {
    let cfg = load_config(config).map_err(|e| (EXIT_CONFIG, e))?;
    let file = io::load_initial_data::<Scalar>(data_path)
        .map_err(|e| (EXIT_CONFIG, format!("{}: {e}", data_path.display())))?;
    let params = file.parameters;
    let data = file.data;
    let sigma_est = match cfg.sigma_est {
        AutoOr::Fixed(s) => s,
        AutoOr::Auto => auto_sigma(&data, &params),
    };
    let setup = RunSetup {
        scheme: SchemeConfig {
            cfl: cfg.cfl,
            max_dt: cfg.max_dt,
            pin_velocity: cfg.pin_velocity,
            grad_threshold_factor: cfg.grad_threshold_factor,
            ..SchemeConfig::default()
        },
        t_end: cfg.t_end,
        output_interval: cfg.output_interval,
        sigma_est,
    };
    Ok(LoadedRun { cfg, params, data, sigma_est, setup })
}

#[derive(Serialize)]
struct OutcomeFile {
    format_version: u32,
    outcome: RunOutcome<Scalar>,
    steps: usize,
    sigma_est: Scalar,
    t_final: Scalar,
    sup_grad_u_final: Scalar,
}

fn cmd_run(config: &Path, data_path: &Path, out: &Path) -> ExitCode {
    let loaded = match load_run(config, data_path) {
        Ok(l) => l,
        Err((code, e)) => return fail(code, e),
    };
    if let Err(e) = ensure_out(out) {
        return fail(EXIT_CONFIG, e);
    }
    let mut result = match run(&loaded.data, &loaded.params, &loaded.setup) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    diagnostics::finalize_series(
        &mut result.records,
        &loaded.params,
        &loaded.data,
        loaded.sigma_est,
    );
    let csv_path = out.join("series.csv");
    let file = match std::fs::File::create(&csv_path) {
        Ok(f) => f,
        Err(e) => return fail(1, format!("{}: {e}", csv_path.display())),
    };
    if let Err(e) = diagnostics::write_csv(&result.records, std::io::BufWriter::new(file)) {
        return fail(1, e);
    }
    let outcome = OutcomeFile {
        format_version: io::FORMAT_VERSION,
        outcome: result.outcome.clone(),
        steps: result.steps,
        sigma_est: loaded.sigma_est,
        t_final: result.final_state.t,
        sup_grad_u_final: result.final_state.sup_grad_u(),
    };
    if let Err(e) = io::save_json(&out.join("outcome.json"), &outcome) {
        return fail(1, e);
    }
    match result.outcome {
        RunOutcome::Completed { t } => {
            println!("completed at t = {t} in {} steps", result.steps);
            ExitCode::SUCCESS
        }
        RunOutcome::Breakdown { reason, time } => {
            println!("breakdown ({reason}) at t = {time} after {} steps", result.steps);
            ExitCode::from(EXIT_BREAKDOWN)
        }
    }
}

#[derive(Serialize)]
struct VerifyFile {
    format_version: u32,
    sigma_est: Scalar,
    max_energy_residual: Scalar,
    max_rel_mass_drift: Scalar,
    min_jensen_margin: Scalar,
    min_tr_t_slack: Scalar,
    min_w_residual: Scalar,
    max_support_excess: Scalar,
    oracle: Option<ucm::solver::cart3d::CompareReport<Scalar>>,
    passed: bool,
    failures: Vec<String>,
}

fn cmd_verify(config: &Path, data_path: &Path, out: &Path) -> ExitCode {
    let loaded = match load_run(config, data_path) {
        Ok(l) => l,
        Err((code, e)) => return fail(code, e),
    };
    if let Err(e) = ensure_out(out) {
        return fail(EXIT_CONFIG, e);
    }
    let mut result = match run(&loaded.data, &loaded.params, &loaded.setup) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    if let RunOutcome::Breakdown { reason, time } = &result.outcome {
        return fail(
            EXIT_BREAKDOWN,
            format!("breakdown ({reason}) at t = {time}; verification needs a full run"),
        );
    }
    diagnostics::finalize_series(
        &mut result.records,
        &loaded.params,
        &loaded.data,
        loaded.sigma_est,
    );
    let records = &result.records;
    let mut failures = Vec::new();

    let max_energy_residual = match diagnostics::check_energy_identity(records) {
        Ok(v) => v,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    // the residual carries an O(output_interval^2) central-difference error
    // on top of the scheme error, so gate it relative to the size of the
    // dissipation term it balances
    let diss_scale = records
        .iter()
        .map(|r| (r.int_tr_t / (2.0 * loaded.params.lambda)).abs())
        .fold(0.0, Scalar::max)
        .max(1e-300);
    if max_energy_residual / diss_scale > 0.05 {
        failures.push(format!(
            "energy residual {max_energy_residual:e} above 5% of the dissipation scale {diss_scale:e}"
        ));
    }

    let m0 = records[0].m;
    let scale = m0.abs().max(1e-300);
    let max_rel_mass_drift = records
        .iter()
        .map(|r| ((r.m - m0) / scale).abs())
        .fold(0.0, Scalar::max);
    if max_rel_mass_drift > 1e-10 {
        failures.push(format!("relative mass drift {max_rel_mass_drift:e} > 1e-10"));
    }

    let min_jensen_margin = records
        .iter()
        .map(|r| r.jensen_margin)
        .fold(Scalar::INFINITY, Scalar::min);
    if min_jensen_margin < -1e-8 {
        failures.push(format!("convexity margin {min_jensen_margin:e} < -1e-8"));
    }

    let (trt_ok, min_tr_t_slack) = diagnostics::check_tr_t_bound(records, 1e-6);
    if !trt_ok {
        failures.push(format!("stress-trace budget violated by {min_tr_t_slack:e}"));
    }

    let min_w_residual = match diagnostics::check_w_inequality(records) {
        Ok(v) => v,
        Err(e) => return fail(EXIT_CONFIG, e),
    };

    let max_support_excess = {
        let mut worst: Scalar = 0.0;
        for r in records {
            let allowed = loaded.data.r_support + loaded.sigma_est * r.t;
            worst = worst.max(r.support_radius - allowed);
        }
        worst
    };
    if max_support_excess > 0.0 {
        failures.push(format!(
            "support escaped the propagation cone by {max_support_excess:e}"
        ));
    }

    let oracle = if loaded.cfg.oracle_n > 0 {
        match ucm::solver::cart3d::run_compare(
            &loaded.data,
            &loaded.params,
            loaded.cfg.oracle_n,
            loaded.cfg.oracle_t_short,
            loaded.sigma_est,
        ) {
            Ok(rep) => {
                if rep.discrepancy > 0.05 {
                    failures.push(format!(
                        "cross-solver discrepancy {:.4} > 0.05",
                        rep.discrepancy
                    ));
                }
                Some(rep)
            }
            Err(e) => return fail(1, e),
        }
    } else {
        None
    };

    let passed = failures.is_empty();
    let file = VerifyFile {
        format_version: io::FORMAT_VERSION,
        sigma_est: loaded.sigma_est,
        max_energy_residual,
        max_rel_mass_drift,
        min_jensen_margin,
        min_tr_t_slack,
        min_w_residual,
        max_support_excess,
        oracle,
        passed,
        failures: failures.clone(),
    };
    if let Err(e) = io::save_json(&out.join("verify.json"), &file) {
        return fail(1, e);
    }
    if passed {
        println!("verify: all checks passed");
        ExitCode::SUCCESS
    } else {
        for f in &failures {
            eprintln!("verify: {f}");
        }
        ExitCode::from(EXIT_VERIFICATION)
    }
}

fn cmd_bound(config: &Path, data_path: &Path, out: &Path) -> ExitCode {
    let loaded = match load_run(config, data_path) {
        Ok(l) => l,
        Err((code, e)) => return fail(code, e),
    };
    if let Err(e) = ensure_out(out) {
        return fail(EXIT_CONFIG, e);
    }
    let report = riccati::blowup_report(&loaded.data, &loaded.params, loaded.sigma_est);
    if let Err(e) = io::save_json(&out.join("bound.json"), &report) {
        return fail(1, e);
    }
    match report.t_star {
        Some(t_star) => println!(
            "criterion satisfied: breakdown no later than t = {t_star}"
        ),
        None => println!(
            "criterion not satisfied (U0 = {}, threshold = {})",
            report.u0, report.threshold
        ),
    }
    ExitCode::SUCCESS
}

fn cmd_report(out: &Path) -> ExitCode {
    let mut bundle = serde_json::Map::new();
    bundle.insert(
        "format_version".into(),
        serde_json::Value::from(io::FORMAT_VERSION),
    );
    let mut found = 0;
    for name in ["ic.json", "outcome.json", "verify.json", "bound.json"] {
        let path = out.join(name);
        if !path.exists() {
            continue;
        }
        match io::load_json::<serde_json::Value>(&path) {
            Ok(v) => {
                bundle.insert(name.trim_end_matches(".json").into(), v);
                found += 1;
            }
            Err(e) => return fail(EXIT_CONFIG, e),
        }
    }
    let csv = out.join("series.csv");
    if csv.exists() {
        match std::fs::read_to_string(&csv) {
            Ok(text) => {
                let rows = text.lines().count().saturating_sub(1);
                bundle.insert("series_rows".into(), serde_json::Value::from(rows));
                found += 1;
            }
            Err(e) => return fail(1, format!("{}: {e}", csv.display())),
        }
    }
    if found == 0 {
        return fail(EXIT_CONFIG, format!("no artifacts found in {}", out.display()));
    }
    if let Err(e) = io::save_json(&out.join("report.json"), &serde_json::Value::Object(bundle)) {
        return fail(1, e);
    }
    println!("wrote {}", out.join("report.json").display());
    ExitCode::SUCCESS
}
