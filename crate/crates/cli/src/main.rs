//! `infoagg`: reproducible runs of the worked examples, diagnostics over a
//! configured space, and the noisy-forecaster simulation.

mod diagnose;
mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use infoagg_core::aggregators::{AggregatorSpec, HullPosition};
use infoagg_core::diagnostics::{
    check_calibration, check_extremizing, SubsetBudget, VIOLATION_TOL,
};
use infoagg_core::experiments::example2;
use infoagg_core::experiments::{
    jamison_check, run_corollary1, run_example1, run_example3, Corollary1Config, Example1Config,
    Example3Config, SequenceChoice,
};
use infoagg_core::forecasters::calibrate;

use crate::diagnose::{DiagnoseConfig, Rule};
use crate::output::{digest, num, CheckEntry, Table, Writer};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] infoagg_core::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(infoagg_core::Error::JamisonViolation(_)) => 3,
            _ => 2,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "infoagg",
    version,
    about = "Calibrated forecasters, mean aggregators and the efficient aggregate"
)]
struct Cli {
    /// Directory for tables, summaries and manifests.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Master seed; overrides any seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Only report errors and failed checks.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Which {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Reproduce a worked example.
    Example {
        which: Which,
        /// TOML configuration (examples 1 and 3).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        v1: Option<f64>,
        #[arg(long)]
        v2: Option<f64>,
        #[arg(long)]
        v12: Option<f64>,
        /// Support points per signal in example 1.
        #[arg(long)]
        atoms: Option<usize>,
        #[arg(long)]
        omega: Option<f64>,
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Diagnose aggregators over a configured space and forecasters.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
    },
    /// Simulate many noisy forecasters with information drawn from a menu.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn entries(checks: &[(String, bool)], anchor: &str) -> Vec<CheckEntry> {
    checks
        .iter()
        .map(|(name, pass)| CheckEntry {
            name: name.clone(),
            pass: *pass,
            anchor: anchor.to_string(),
        })
        .collect()
}

/// Reports failed checks on stderr and turns them into an exit code.
fn verdict(command: &str, checks: &[CheckEntry]) -> i32 {
    let mut code = 0;
    for c in checks.iter().filter(|c| !c.pass) {
        eprintln!("check failed: {command}: {} ({})", c.name, c.anchor);
        code = 1;
    }
    code
}

fn hull_name(h: HullPosition) -> &'static str {
    match h {
        HullPosition::Unanimous => "unanimous",
        HullPosition::Interior => "interior",
        HullPosition::AtMin => "at_min",
        HullPosition::AtMax => "at_max",
        HullPosition::Outside => "outside",
    }
}

#[derive(Serialize)]
struct NoConfig {
    example: u8,
}

fn example1(
    cli: &Cli,
    config: Option<&Path>,
    v1: Option<f64>,
    v2: Option<f64>,
    v12: Option<f64>,
    atoms: Option<usize>,
) -> Result<(PathBuf, i32), CliError> {
    let mut cfg: Example1Config = match config {
        Some(p) => load(p)?,
        None => Example1Config::default(),
    };
    if let Some(v) = v1 {
        cfg.v1 = v;
    }
    if let Some(v) = v2 {
        cfg.v2 = v;
    }
    if let Some(v) = v12 {
        cfg.v12 = v;
    }
    if let Some(a) = atoms {
        cfg.atoms_per_signal = a;
    }
    let report = run_example1(&cfg)?;
    let mut w = Writer::new(&cli.out, "example1")?;
    let mut t = Table::new(&[
        "v1",
        "v2",
        "v12",
        "beta1",
        "beta2",
        "beta1_closed_form",
        "beta2_closed_form",
        "shared_weight",
        "var_weighted",
        "var_linear_pool",
        "var_efficient",
        "prob_weighted_ne_pool",
        "prob_weighted_ne_efficient",
    ]);
    t.row(&[
        num(cfg.v1),
        num(cfg.v2),
        num(cfg.v12),
        num(report.beta[0]),
        num(report.beta[1]),
        num(report.beta_closed_form[0]),
        num(report.beta_closed_form[1]),
        num(report.shared_weight),
        num(report.var_weighted),
        num(report.var_linear_pool),
        num(report.var_efficient),
        num(report.prob_weighted_ne_pool),
        num(report.prob_weighted_ne_efficient),
    ]);
    w.table(".csv", t)?;
    w.json("_summary.json", &report)?;
    let checks = entries(&report.checks, "Example 1");
    let code = verdict("example 1", &checks);
    let path = w.finish(
        "example 1",
        digest(&cfg)?,
        cli.seed.unwrap_or(0),
        checks,
        code,
    )?;
    Ok((path, code))
}

fn example2(cli: &Cli, config: Option<&Path>) -> Result<(PathBuf, i32), CliError> {
    if config.is_some() {
        return Err(CliError::Config("example 2 takes no configuration".into()));
    }
    let rows = example2::run_example2()?;
    let setup = example2::setup()?;
    let predictions = setup
        .infos
        .iter()
        .map(|g| calibrate(&setup.space, &setup.y, g).map(|f| f.into_prediction()))
        .collect::<Result<Vec<_>, _>>()?;
    let efficient = setup
        .space
        .variable(rows.iter().map(|r| r.efficient).collect())?;
    let calibration = check_calibration(&setup.space, &setup.y, &efficient, VIOLATION_TOL)?;
    let violations = check_extremizing(
        &setup.space,
        &setup.y,
        &predictions,
        &efficient,
        SubsetBudget::default(),
    )?;
    let within_hull = rows.iter().all(|r| r.hull != HullPosition::Outside);

    let mut w = Writer::new(&cli.out, "example2")?;
    let mut t = Table::new(&["face", "y", "x1", "x2", "efficient", "hull"]);
    for r in &rows {
        t.row(&[
            r.face.to_string(),
            num(r.y),
            num(r.x1),
            num(r.x2),
            num(r.efficient),
            hull_name(r.hull).to_string(),
        ]);
    }
    w.table(".csv", t)?;
    w.json("_summary.json", &rows)?;
    let checks = vec![
        CheckEntry {
            name: "efficient_calibrated".into(),
            pass: calibration.pass,
            anchor: "Theorem 1".into(),
        },
        CheckEntry {
            name: "efficient_extremizing".into(),
            pass: violations.is_empty(),
            anchor: "Theorem 1".into(),
        },
        CheckEntry {
            name: "efficient_within_hull".into(),
            pass: within_hull,
            anchor: "Example 2".into(),
        },
    ];
    let code = verdict("example 2", &checks);
    let path = w.finish(
        "example 2",
        digest(&NoConfig { example: 2 })?,
        cli.seed.unwrap_or(0),
        checks,
        code,
    )?;
    Ok((path, code))
}

fn example3(
    cli: &Cli,
    config: Option<&Path>,
    omega: Option<f64>,
    depth: Option<usize>,
) -> Result<(PathBuf, i32), CliError> {
    let mut cfg: Example3Config = match config {
        Some(p) => load(p)?,
        None => Example3Config {
            depth: 5,
            sequence_choice: SequenceChoice::HalfPowers,
            omega: 0.6,
        },
    };
    if let Some(o) = omega {
        cfg.omega = o;
    }
    if let Some(d) = depth {
        cfg.depth = d;
    }
    let report = run_example3(&cfg)?;
    let mut w = Writer::new(&cli.out, "example3")?;
    let mut t = Table::new(&[
        "omega",
        "depth",
        "x1",
        "x2",
        "efficient",
        "closed_form",
        "branch",
        "interior",
    ]);
    t.row(&[
        num(report.omega),
        report.depth.to_string(),
        num(report.x1),
        num(report.x2),
        num(report.efficient),
        num(report.closed_form),
        format!("{:?}", report.branch).to_lowercase(),
        report.interior.to_string(),
    ]);
    w.table(".csv", t)?;
    w.json("_summary.json", &report)?;
    let checks = entries(&report.checks, "Example 3");
    let code = verdict("example 3", &checks);
    let path = w.finish(
        "example 3",
        digest(&cfg)?,
        cli.seed.unwrap_or(0),
        checks,
        code,
    )?;
    Ok((path, code))
}

fn run_diagnose(cli: &Cli, config: &Path) -> Result<(PathBuf, i32), CliError> {
    let mut cfg: DiagnoseConfig = load(config)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let (prepared, outcomes) = diagnose::run(&cfg)?;

    let mut w = Writer::new(&cli.out, "diagnose")?;
    let mut t = Table::new(&[
        "aggregator",
        "marginal_gap",
        "calibration_gap",
        "extremizing_violations",
        "inefficiency_prob",
        "var_x",
        "var_recalibrated",
        "var_efficient",
        "max_individual_var",
        "marginally_consistent",
        "calibrated",
        "extremizing",
        "efficient",
    ]);
    for o in &outcomes {
        let r = &o.report;
        t.row(&[
            o.name.clone(),
            num(r.marginal_gap),
            num(r.calibration_gap),
            r.extremizing_violations.len().to_string(),
            num(r.inefficiency_prob),
            num(r.var_x),
            num(r.var_recalibrated),
            num(r.var_efficient),
            num(r.max_individual_var),
            r.marginally_consistent.to_string(),
            r.calibrated.to_string(),
            r.extremizing.to_string(),
            r.efficient.to_string(),
        ]);
    }
    w.table(".csv", t)?;

    let mut header = vec!["outcome".to_string(), "weight".into(), "y".into()];
    header.extend(prepared.names.iter().cloned());
    header.extend(outcomes.iter().map(|o| o.name.clone()));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut values = Table::new(&header);
    for i in 0..prepared.space.n_outcomes() {
        let mut row = vec![
            i.to_string(),
            num(prepared.space.weight(i)),
            num(prepared.y.value(i)),
        ];
        row.extend(prepared.predictions.iter().map(|p| num(p.value(i))));
        row.extend(outcomes.iter().map(|o| num(o.values.value(i))));
        values.row(&row);
    }
    w.table("_values.csv", values)?;

    let summary: Vec<_> = outcomes
        .iter()
        .map(|o| serde_json::json!({ "aggregator": o.name, "report": o.report }))
        .collect();
    w.json("_summary.json", &summary)?;

    let mut checks = Vec::new();
    for o in &outcomes {
        let (efficiency_anchor, own_anchor) = match &o.rule {
            Rule::Efficient => ("Theorem 1", "Theorem 1"),
            r if r.is_arithmetic() => ("Theorem 2", "Theorem 2"),
            Rule::Spec(AggregatorSpec::QuasiArithmetic { .. }) => ("Theorem 3", "Theorem 3"),
            Rule::Spec(_) => ("Theorem 3", "Theorem 3 remark"),
        };
        let r = &o.report;
        for (name, pass, anchor) in [
            ("marginally_consistent", r.marginally_consistent, own_anchor),
            ("calibrated", r.calibrated, "Theorem 1"),
            ("extremizing", r.extremizing, "Theorem 1"),
            ("efficient", r.efficient, efficiency_anchor),
        ] {
            checks.push(CheckEntry {
                name: format!("{}:{name}", o.name),
                pass,
                anchor: anchor.to_string(),
            });
        }
    }
    if !cli.quiet {
        for c in checks.iter().filter(|c| !c.pass) {
            eprintln!("diagnose: {} does not hold ({})", c.name, c.anchor);
        }
    }
    // Failed checks are findings about the aggregators, not run failures.
    let path = w.finish("diagnose", digest(&cfg)?, cfg.seed, checks, 0)?;
    Ok((path, 0))
}

fn run_simulate(cli: &Cli, config: &Path) -> Result<(PathBuf, i32), CliError> {
    let mut cfg: Corollary1Config = load(config)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let config_digest = digest(&cfg)?;
    let mut w = Writer::new(&cli.out, "simulate")?;

    let jamison = jamison_check(&cfg.weight_rule, cfg.t_max)?;
    let mut jt = Table::new(&["t", "gamma", "ratio"]);
    for e in &jamison.ratio_estimates {
        jt.row(&[num(e.t), e.gamma.to_string(), num(e.ratio)]);
    }
    w.table("_jamison.csv", jt)?;
    if !jamison.passes() {
        eprintln!(
            "check failed: simulate: weight rule violates the Jamison condition within t_max = {} (Corollary 1)",
            cfg.t_max
        );
        let checks = vec![CheckEntry {
            name: "jamison_condition".into(),
            pass: false,
            anchor: "Corollary 1".into(),
        }];
        let path = w.finish("simulate", config_digest, cfg.seed, checks, 3)?;
        return Ok((path, 3));
    }

    let run = run_corollary1(&cfg)?;
    let mut t = Table::new(&[
        "n",
        "aggregate",
        "dist_target",
        "dist_efficient",
        "standard_error",
    ]);
    for r in &run.trace {
        t.row(&[
            r.n.to_string(),
            num(r.aggregate),
            num(r.dist_target),
            num(r.dist_efficient),
            num(r.standard_error),
        ]);
    }
    w.table("_trace.csv", t)?;
    w.json("_summary.json", &run.summary)?;
    let mut checks = vec![CheckEntry {
        name: "jamison_condition".into(),
        pass: true,
        anchor: "Corollary 1".into(),
    }];
    checks.extend(entries(&run.summary.checks, "Corollary 1"));
    let code = verdict("simulate", &checks);
    let path = w.finish("simulate", config_digest, cfg.seed, checks, code)?;
    Ok((path, code))
}

fn dispatch(cli: &Cli) -> Result<(PathBuf, i32), CliError> {
    match &cli.command {
        Command::Example {
            which,
            config,
            v1,
            v2,
            v12,
            atoms,
            omega,
            depth,
        } => {
            let config = config.as_deref();
            let example1_flags = v1.is_some() || v2.is_some() || v12.is_some() || atoms.is_some();
            let example3_flags = omega.is_some() || depth.is_some();
            match which {
                Which::One if !example3_flags => example1(cli, config, *v1, *v2, *v12, *atoms),
                Which::Two if !example1_flags && !example3_flags => example2(cli, config),
                Which::Three if !example1_flags => example3(cli, config, *omega, *depth),
                _ => Err(CliError::Config(
                    "flag does not apply to this example".into(),
                )),
            }
        }
        Command::Diagnose { config } => run_diagnose(cli, config),
        Command::Simulate { config } => run_simulate(cli, config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet {
        tracing_subscriber::filter::LevelFilter::ERROR
    } else {
        tracing_subscriber::filter::LevelFilter::WARN
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(level)
        .without_time()
        .init();

    match dispatch(&cli) {
        Ok((manifest, code)) => {
            println!("{}", manifest.display());
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
