//! `acquimech` command-line interface.
//!
//! Exit codes: 0 success, 1 a check failed (or a solver gave up), 2 bad
//! input, 3 the LP would exceed the size budget. Results go to stdout as JSON
//! or CSV; diagnostics go to stderr.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use acquimech::analysis::{
    acquiring_rate, check_ic, check_monotone, expected_reward, multi_acquiring_rate,
    multi_check_ic, multi_check_monotone, multi_expected_reward, DEFAULT_IC_TOL,
    DEFAULT_MONOTONE_TOL,
};
use acquimech::experiments::{run_sweep, write_csv, Family, SweepConfig};
use acquimech::generate::{generate, rng_from_seed, GenOptions};
use acquimech::io::{
    instance_to_json, parse_instance, parse_mechanism, MatrixFile, MechanismDocument,
};
use acquimech::model::{Mechanism, MultiInstance, MultiPolicy};
use acquimech::multi_item::{
    ranking_mechanism, rm_ic_audit, solve_omk_with, solve_umopt_with, union_policy_with,
    OmkOptions, UnionInputs, DEFAULT_SIZE_BUDGET,
};
use acquimech::reproduce::{reproduce, reproduce_all, write_csv as write_reproductions};
use acquimech::single_item::{menu_size, solve_om1, solve_som, tmm_optimal, MENU_TOL};
use acquimech::Error;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

const BUDGET_VAR: &str = "ACQUIMECH_SIZE_BUDGET";

#[derive(Debug, Parser)]
#[command(
    name = "acquimech",
    version,
    about = "Truthful item-acquiring mechanisms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a mechanism and summarize it.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum)]
        mechanism: MechanismName,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a mechanism for incentive compatibility and monotonicity.
    Verify {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        matrix: PathBuf,
    },
    /// Recompute a published worked instance (or `all`) against its printed values.
    Paper { name: String },
    /// Run a variance sweep and write CSV.
    Sweep {
        #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// Seven-level grid, t = 0.25, N(0.3, 0.25), k = 2, every mechanism.
        #[arg(long, value_enum)]
        preset: Option<FamilyArg>,
        /// Variance step for `--preset`.
        #[arg(long, default_value_t = 0.05, requires = "preset")]
        step: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-quality and overall acquiring rates of a mechanism.
    Rate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        matrix: PathBuf,
    },
    /// Write a random instance.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        m: usize,
        #[arg(long)]
        k: Option<usize>,
        /// Resample until the score model is consistent with the bar.
        #[arg(long)]
        consistent: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MechanismName {
    Som,
    Tmm,
    Om1,
    Omk,
    UmTmm,
    UmOm1,
    Umopt,
    Rm,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FamilyArg {
    Normal,
    Lognormal,
}

/// A failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::SizeBudgetExceeded { .. } => 3,
            Error::Lp(_) | Error::LpStatus(_) | Error::Output(_) => 1,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure {
        code: 2,
        message: format!("reading {}: {e}", path.display()),
    })
}

fn output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    let result = match path {
        Some(p) => fs::write(p, text),
        None => io::stdout().lock().write_all(text.as_bytes()),
    };
    result.map_err(|e| Failure {
        code: 1,
        message: format!("writing output: {e}"),
    })
}

fn size_budget() -> Result<Option<usize>, Failure> {
    match std::env::var(BUDGET_VAR) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| Failure {
            code: 2,
            message: format!("{BUDGET_VAR} must be a non-negative integer, got {v:?}"),
        }),
        Err(_) => Ok(None),
    }
}

fn pretty(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values serialize");
    s.push('\n');
    s
}

fn single_summary(instance: &MultiInstance, mechanism: &Mechanism) -> Result<Value, Failure> {
    let base = instance.base();
    Ok(json!({
        "reward": expected_reward(base, mechanism)?,
        "menu_size": menu_size(mechanism, MENU_TOL),
        "ic": check_ic(base, mechanism, DEFAULT_IC_TOL)?.passed,
        "monotone": check_monotone(mechanism, DEFAULT_MONOTONE_TOL).passed,
    }))
}

fn multi_summary(instance: &MultiInstance, policy: &MultiPolicy) -> Result<Value, Failure> {
    let reward = multi_expected_reward(instance, policy)?;
    Ok(json!({
        "reward": reward,
        "per_item_reward": reward / instance.item_count() as f64,
        "ic": multi_check_ic(instance, policy, DEFAULT_IC_TOL)?.passed,
        "monotone": multi_check_monotone(instance, policy, DEFAULT_MONOTONE_TOL)?.passed,
    }))
}

fn solve(instance: &Path, name: MechanismName, out: Option<&Path>) -> Result<(), Failure> {
    let inst = parse_instance(&input(instance)?)?;
    let budget = size_budget()?.unwrap_or(DEFAULT_SIZE_BUDGET);
    let base = inst.base();
    let single = |m: Mechanism| -> Result<Value, Failure> {
        let summary = single_summary(&inst, &m)?;
        Ok(json!({ "label": m.label(), "matrix": MatrixFile::from(&m).matrix, "summary": summary }))
    };
    let multi = |p: MultiPolicy, label: &str| -> Result<Value, Failure> {
        let summary = multi_summary(&inst, &p)?;
        Ok(json!({ "label": label, "policy": p, "summary": summary }))
    };
    let union = |component: &Mechanism, label: &str| -> Result<Value, Failure> {
        let inputs = UnionInputs::copies(component, inst.item_count());
        multi(union_policy_with(&inst, &inputs, budget)?, label)
    };
    let doc = match name {
        MechanismName::Som => single(solve_som(base))?,
        MechanismName::Tmm => {
            let (params, m, _) = tmm_optimal(base);
            let mut doc = single(m)?;
            doc["params"] = json!(params);
            doc
        }
        MechanismName::Om1 => single(solve_om1(base)?)?,
        MechanismName::Omk => {
            let options = OmkOptions {
                size_budget: budget,
                ..OmkOptions::default()
            };
            multi(solve_omk_with(&inst, &options)?, "OMk")?
        }
        MechanismName::UmTmm => union(&tmm_optimal(base).1, "UM_TMM")?,
        MechanismName::UmOm1 => union(&solve_om1(base)?, "UM_OM1")?,
        MechanismName::Umopt => multi(solve_umopt_with(&inst, budget)?.1, "UMOPT")?,
        MechanismName::Rm => {
            let policy = ranking_mechanism(&inst)?;
            let violations = rm_ic_audit(&policy);
            json!({
                "label": "RM",
                "rank_policy": policy,
                "summary": { "ic": violations.is_empty(), "violations": violations },
            })
        }
    };
    output(out, &pretty(&doc))
}

fn verify(instance: &Path, matrix: &Path) -> Result<bool, Failure> {
    let inst = parse_instance(&input(instance)?)?;
    let (ic, monotone) = match parse_mechanism(&input(matrix)?)? {
        MechanismDocument::Single(m) => (
            check_ic(inst.base(), &m, DEFAULT_IC_TOL)?,
            check_monotone(&m, DEFAULT_MONOTONE_TOL),
        ),
        MechanismDocument::Multi(p) => (
            multi_check_ic(&inst, &p, DEFAULT_IC_TOL)?,
            multi_check_monotone(&inst, &p, DEFAULT_MONOTONE_TOL)?,
        ),
    };
    let passed = ic.passed && monotone.passed;
    output(None, &pretty(&json!({ "ic": ic, "monotone": monotone })))?;
    Ok(passed)
}

fn paper(name: &str) -> Result<bool, Failure> {
    let reports = if name == "all" {
        reproduce_all()?
    } else {
        vec![reproduce(name)?]
    };
    let mut buf = Vec::new();
    write_reproductions(&mut buf, &reports)?;
    output(None, &String::from_utf8(buf).expect("CSV is UTF-8"))?;
    for r in &reports {
        for note in &r.notes {
            eprintln!("{}: {note}", r.name);
        }
    }
    Ok(reports.iter().all(|r| r.passed()))
}

fn sweep(
    config: Option<&Path>,
    preset: Option<FamilyArg>,
    step: f64,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let mut config: SweepConfig = match (config, preset) {
        (Some(path), _) => serde_json::from_str(&input(path)?).map_err(|e| Failure {
            code: 2,
            message: format!("malformed sweep config: {e}"),
        })?,
        (None, Some(family)) => {
            if !(step > 0.0 && step <= 0.6) {
                return Err(Failure {
                    code: 2,
                    message: format!("--step must be in (0, 0.6], got {step}"),
                });
            }
            let family = match family {
                FamilyArg::Normal => Family::Normal,
                FamilyArg::Lognormal => Family::Lognormal,
            };
            SweepConfig::standard(family, step)
        }
        (None, None) => unreachable!("clap requires --config or --preset"),
    };
    if let Some(budget) = size_budget()? {
        config.size_budget = Some(budget);
    }
    let points = config.variance_grid.len();
    eprintln!("sweeping {points} variance points");
    let records = run_sweep(&config)?;
    let mut buf = Vec::new();
    write_csv(&mut buf, config.grid.n(), &records)?;
    output(out, &String::from_utf8(buf).expect("CSV is UTF-8"))
}

fn rate(instance: &Path, matrix: &Path) -> Result<(), Failure> {
    let inst = parse_instance(&input(instance)?)?;
    let doc = match parse_mechanism(&input(matrix)?)? {
        MechanismDocument::Single(m) => json!(acquiring_rate(inst.base(), &m)?),
        MechanismDocument::Multi(p) => json!(multi_acquiring_rate(&inst, &p)?),
    };
    output(None, &pretty(&doc))
}

fn gen(seed: u64, n: usize, m: usize, k: Option<usize>, consistent: bool) -> Result<(), Failure> {
    if n == 0 || m == 0 || k == Some(0) {
        return Err(Failure {
            code: 2,
            message: "--n, --m and --k must be at least 1".into(),
        });
    }
    let options = GenOptions { n, m, consistent };
    let instance = generate(&mut rng_from_seed(seed), &options)?;
    output(None, &(instance_to_json(&instance, k) + "\n"))
}

fn run(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::Solve {
            instance,
            mechanism,
            out,
        } => solve(&instance, mechanism, out.as_deref()).map(|()| true),
        Command::Verify { instance, matrix } => verify(&instance, &matrix),
        Command::Paper { name } => paper(&name),
        Command::Sweep {
            config,
            preset,
            step,
            out,
        } => sweep(config.as_deref(), preset, step, out.as_deref()).map(|()| true),
        Command::Rate { instance, matrix } => rate(&instance, &matrix).map(|()| true),
        Command::Gen {
            seed,
            n,
            m,
            k,
            consistent,
        } => gen(seed, n, m, k, consistent).map(|()| true),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
