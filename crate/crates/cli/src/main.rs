use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Arg, ArgMatches, Command};
use log::info;

use evplan_core::pipeline::{
    build_supply_model, configured_threads, emit_outputs, evaluate_plan, plan_artifacts, project_curves, run_pipeline,
    Artifacts, CONFIG_KEYS,
};
use evplan_core::{Error, RunConfig};

const SUBCOMMANDS: [(&str, &str); 5] = [
    (
        "calibrate",
        "Fit or load the diffusion and supply model and print it as JSON",
    ),
    ("curves", "Write demand/supply curves and sensitivity sweeps"),
    ("plan", "Site stations on the path network and write the plan"),
    (
        "evaluate",
        "Route flow through a fixed stations.csv plan and report delay",
    ),
    ("pipeline", "Calibrate, project, plan and evaluate in one run"),
];

/// One `--key value` flag per config key; underscores become dashes.
fn config_args() -> Vec<Arg> {
    let mut args = vec![Arg::new("config")
        .long("config")
        .value_name("FILE")
        .value_parser(clap::value_parser!(PathBuf))
        .help("Config file of `key = value` lines; individual flags override it")];
    for &key in CONFIG_KEYS {
        let long: &'static str = Box::leak(key.replace('_', "-").into_boxed_str());
        let mut arg = Arg::new(key)
            .long(long)
            .value_name("VALUE")
            .allow_hyphen_values(true)
            .help_heading("Config keys");
        if long != key {
            arg = arg.alias(key);
        }
        args.push(arg);
    }
    args
}

fn cli() -> Command {
    let mut cmd = Command::new("evplan")
        .version(env!("CARGO_PKG_VERSION"))
        .about("EV charging demand projection and station siting")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for (name, about) in SUBCOMMANDS {
        cmd = cmd.subcommand(Command::new(name).about(about).args(config_args()));
    }
    cmd
}

fn load_config(m: &ArgMatches) -> evplan_core::Result<RunConfig> {
    let mut cfg = match m.get_one::<PathBuf>("config") {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    let cwd = std::env::current_dir().map_err(|e| Error::Input(format!("cannot read working directory: {e}")))?;
    for &key in CONFIG_KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v, &cwd)?;
        }
    }
    Ok(cfg)
}

fn emit(art: &Artifacts, out_dir: &Path) -> evplan_core::Result<()> {
    emit_outputs(art, out_dir)?;
    info!("outputs written to {}", out_dir.display());
    Ok(())
}

fn run(name: &str, cfg: &RunConfig) -> evplan_core::Result<()> {
    match name {
        "calibrate" => {
            let (_, report) = build_supply_model(cfg)?.ok_or_else(|| {
                Error::InvalidParameter("no demand data: give demand_csv or bass_p/q/m and t_origin".into())
            })?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        "curves" => {
            let (model, _) = build_supply_model(cfg)?.ok_or_else(|| {
                Error::InvalidParameter("no demand data: give demand_csv or bass_p/q/m and t_origin".into())
            })?;
            let (curves, sweeps, scenario) = project_curves(cfg, &model)?;
            emit(
                &Artifacts {
                    curves,
                    sweeps,
                    ..Artifacts::default()
                },
                &cfg.out_dir,
            )?;
            println!("{}", serde_json::to_string_pretty(&scenario)?);
        }
        "plan" | "pipeline" | "evaluate" => {
            let report = match name {
                "pipeline" => run_pipeline(cfg)?,
                _ => {
                    let mut art = if name == "plan" {
                        plan_artifacts(cfg)?
                    } else {
                        evaluate_plan(cfg)?
                    };
                    // curves belong to the `curves` and `pipeline` commands
                    art.curves.clear();
                    art.sweeps.clear();
                    emit(&art, &cfg.out_dir)?;
                    art.report.expect("planning run yields a report")
                }
            };
            let open: Vec<&str> = report
                .stations
                .iter()
                .filter(|s| s.open)
                .map(|s| s.candidate_id.as_str())
                .collect();
            println!("objective {}", report.objective);
            println!("augmented_objective {}", report.augmented_objective);
            println!("open_stations {} [{}]", open.len(), open.join(" "));
            if let Some(s) = &report.suggestion {
                println!("suggestion {s}");
            }
        }
        other => unreachable!("unknown subcommand {other}"),
    }
    Ok(())
}

/// 2 infeasible, 3 bad input, 4 non-convergence, 1 anything else.
fn exit_code(err: &Error) -> u8 {
    match err.root() {
        Error::Infeasible(_) | Error::BudgetInfeasible { .. } => 2,
        Error::InvalidParameter(_)
        | Error::InsufficientData { .. }
        | Error::NoInteriorPeak { .. }
        | Error::NoInconvenienceEpisode
        | Error::Parse { .. }
        | Error::Input(_)
        | Error::Io { .. }
        | Error::Csv(_)
        | Error::Json(_) => 3,
        Error::NonConvergence(_) | Error::NonFiniteResidual => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(n) = configured_threads() {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    let matches = cli().get_matches();
    let (name, sub) = matches.subcommand().expect("a subcommand is required");
    let result = load_config(sub).and_then(|cfg| run(name, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
