mod output;

use std::fs;
use std::io::{self, Read};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use phantom_forge::cutoffs::CutoffKind;
use phantom_forge::phantoms::solve;
use phantom_forge::verify::{
    best_manipulation, check_anonymity, check_neutrality, check_unanimity, continuity_probe,
    fairness, manipulation_search, phantom_family_consistent, phantom_representable, rng_from_seed,
    run_scenario, ScenarioConfig, SearchConfig, VerificationReport, DEFAULT_SEED, SCENARIO_NAMES,
    SEED_ENV,
};
use phantom_forge::{
    median_trace, registry_list, resolve_mechanism, Allocation, Error, Mechanism, MechanismSpec,
    Profile, Tolerance,
};

use output::{csv_pairs, csv_vector, json_string, number, pretty_vector};

const EXIT_FAIL: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_DIMENSION: u8 = 3;
const EXIT_UNKNOWN: u8 = 4;

const CHECKS: [&str; 8] = [
    "anonymity",
    "neutrality",
    "unanimity",
    "continuity",
    "truthfulness",
    "fairness",
    "representability",
    "family-consistency",
];

#[derive(Parser)]
#[command(
    name = "phantom-forge",
    version,
    about = "Budget aggregation with moving phantoms"
)]
struct Cli {
    /// Seed for every randomized procedure.
    #[arg(long, global = true, env = SEED_ENV, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Smallest manipulation gain reported as a violation.
    #[arg(long, global = true)]
    eps_gain: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Pretty)]
    format: Format,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Pretty,
}

#[derive(Subcommand)]
enum Command {
    /// Apply a mechanism to a profile.
    Aggregate {
        #[command(flatten)]
        mech: MechArg,
        #[command(flatten)]
        input: InputArgs,
    },
    /// Run one verification check.
    Check(CheckArgs),
    /// Re-run a named scenario, or `all` of them.
    Repro {
        name: String,
        /// Random profiles per mechanism in the fuzzing scenarios.
        #[arg(long, default_value_t = 20)]
        fuzz_profiles: usize,
    },
    /// Medians and their sum on a time grid, plus the normalization time.
    Trace {
        #[command(flatten)]
        mech: MechArg,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 101)]
        grid: usize,
    },
    /// Show the built-in mechanisms.
    ListMechanisms,
}

#[derive(Args)]
struct MechArg {
    /// Registry id, alias, or inline JSON specification.
    #[arg(long = "mech", alias = "mechanism")]
    mech: String,
}

#[derive(Args, Default)]
struct InputArgs {
    /// Profile JSON file, or `-` for stdin.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Inline votes as a JSON array of rows.
    #[arg(long, conflicts_with = "profile")]
    votes: Option<String>,
}

#[derive(Args)]
struct CheckArgs {
    check: String,
    #[command(flatten)]
    mech: MechArg,
    #[command(flatten)]
    input: InputArgs,
    /// Second profile for family-consistency.
    #[arg(long)]
    profile2: Option<PathBuf>,
    /// Vote repeated by every voter in the unanimity check.
    #[arg(long)]
    vote: Option<String>,
    /// Number of voters for the unanimity check.
    #[arg(long, default_value_t = 3)]
    voters: usize,
    /// Restrict the truthfulness search to one voter.
    #[arg(long)]
    voter: Option<usize>,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Succeed only if the check finds a violation.
    #[arg(long)]
    expect_violation: bool,
}

struct Exit(u8);

impl std::fmt::Debug for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "exit {}", self.0)
    }
}

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "exit {}", self.0)
    }
}

impl std::error::Error for Exit {}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    if let Some(Exit(code)) = err.downcast_ref::<Exit>() {
        return *code;
    }
    if err.downcast_ref::<io::Error>().is_some() {
        return EXIT_PARSE;
    }
    match err.downcast_ref::<Error>() {
        Some(
            Error::Parse(_)
            | Error::SumOutOfRange { .. }
            | Error::NegativeEntry { .. }
            | Error::NonFinite { .. }
            | Error::TooFewAlternatives { .. }
            | Error::DimensionMismatch { .. }
            | Error::EmptyProfile
            | Error::InvalidThreshold(_)
            | Error::InvalidTolerance(_)
            | Error::InvalidSystem(_),
        ) => EXIT_PARSE,
        Some(Error::DimensionConstraint(_) | Error::UnsupportedDimension { .. }) => EXIT_DIMENSION,
        Some(Error::UnknownMechanism(_) | Error::UnknownScenario(_) | Error::UnknownSystem(_)) => {
            EXIT_UNKNOWN
        }
        _ => EXIT_FAIL,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(err) => {
            if err.downcast_ref::<Exit>().is_none() {
                eprintln!("error: {err:#}");
            }
            ExitCode::from(exit_code_for(&err))
        }
    }
}

struct Ctx<'a> {
    cli: &'a Cli,
    tol: Tolerance,
}

impl Ctx<'_> {
    fn emit(&self, text: &str) -> Result<()> {
        match &self.cli.out {
            Some(path) => fs::write(path, text)
                .with_context(|| format!("writing {}", path.display()))
                .map_err(|e| anyhow!(Exit(EXIT_FAIL)).context(e)),
            None => {
                print!("{text}");
                if !text.ends_with('\n') {
                    println!();
                }
                Ok(())
            }
        }
    }
}

/// Returns whether the command succeeded.
fn run(cli: &Cli) -> Result<bool> {
    let mut tol = Tolerance::default();
    if let Some(eps) = cli.eps_gain {
        tol = tol.with_eps_gain(eps)?;
    }
    let ctx = Ctx { cli, tol };
    match &cli.command {
        Command::Aggregate { mech, input } => cmd_aggregate(&ctx, &mech.mech, input),
        Command::Check(args) => cmd_check(&ctx, args),
        Command::Repro {
            name,
            fuzz_profiles,
        } => cmd_repro(&ctx, name, *fuzz_profiles),
        Command::Trace { mech, input, grid } => cmd_trace(&ctx, &mech.mech, input, *grid),
        Command::ListMechanisms => cmd_list(&ctx),
    }
}

fn read_text(path: &PathBuf) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut text = String::new();
        io::stdin().read_to_string(&mut text)?;
        return Ok(text);
    }
    Ok(fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?)
}

fn parse_votes(text: &str) -> Result<Profile> {
    let rows: Vec<Vec<f64>> =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("--votes: {e}")))?;
    let m = rows.first().map_or(0, Vec::len);
    Ok(Profile::from_rows(m, &rows, &Tolerance::default())?)
}

fn load_profile(input: &InputArgs) -> Result<Profile> {
    match (&input.profile, &input.votes) {
        (Some(path), None) => Ok(Profile::from_json(&read_text(path)?)?),
        (None, Some(votes)) => parse_votes(votes),
        _ => Err(Error::Parse("give exactly one of --profile or --votes".into()).into()),
    }
}

fn load_mechanism(text: &str) -> Result<MechanismSpec> {
    Ok(resolve_mechanism(text)?)
}

fn warn_dimensions(spec: &MechanismSpec, profile: &Profile) {
    for w in spec.warnings(profile.n(), profile.m()) {
        eprintln!("warning: {w}");
    }
}

fn cmd_aggregate(ctx: &Ctx, mech: &str, input: &InputArgs) -> Result<bool> {
    let spec = load_mechanism(mech)?;
    let profile = load_profile(input)?;
    warn_dimensions(&spec, &profile);
    let out = spec.apply(&profile, &ctx.tol)?;
    let text = match ctx.cli.format {
        Format::Json => json_string(json!(out.values())),
        Format::Csv => csv_vector(out.values()),
        Format::Pretty => pretty_vector(out.values()),
    };
    ctx.emit(&text)?;
    Ok(true)
}

fn render_report(ctx: &Ctx, report: &VerificationReport) -> String {
    let value = serde_json::to_value(report).expect("reports serialize");
    match ctx.cli.format {
        Format::Json => json_string(value),
        Format::Csv => csv_pairs(&value),
        Format::Pretty => {
            let mut lines = vec![format!(
                "{} / {}: {}",
                report.check,
                report.mechanism,
                if report.passed() { "PASS" } else { "FAIL" }
            )];
            if let Value::Object(map) = &report.result {
                for (k, v) in map.iter().filter(|(k, _)| *k != "passed") {
                    lines.push(format!("  {k}: {}", pretty_value(v)));
                }
            }
            if !report.witness.is_null() {
                lines.push(format!("  witness: {}", pretty_value(&report.witness)));
            }
            lines.push(format!("  seed: {}", report.seed));
            lines.join("\n")
        }
    }
}

fn pretty_value(v: &Value) -> String {
    match v {
        Value::Number(n) => n
            .as_f64()
            .map_or_else(|| n.to_string(), output::pretty_number),
        Value::Array(items) if items.iter().all(Value::is_number) => {
            let nums: Vec<f64> = items.iter().filter_map(Value::as_f64).collect();
            pretty_vector(&nums)
        }
        Value::String(s) => s.clone(),
        other => {
            let mut other = other.clone();
            output::round_json(&mut other);
            other.to_string()
        }
    }
}

fn cmd_check(ctx: &Ctx, args: &CheckArgs) -> Result<bool> {
    if !CHECKS.contains(&args.check.as_str()) {
        eprintln!(
            "error: unknown check `{}` (expected one of: {})",
            args.check,
            CHECKS.join(", ")
        );
        return Err(Exit(EXIT_UNKNOWN).into());
    }
    let spec = load_mechanism(&args.mech.mech)?;
    let seed = ctx.cli.seed;
    let tol = &ctx.tol;
    let needs_profile = args.check != "unanimity";
    let profile = if needs_profile {
        let p = load_profile(&args.input)?;
        spec.check_dimensions(p.n(), p.m())?;
        warn_dimensions(&spec, &p);
        Some(p)
    } else {
        None
    };
    let mut rng = rng_from_seed(seed);
    let name = spec.name().to_string();
    let report = match args.check.as_str() {
        "anonymity" | "neutrality" => {
            let p = profile.as_ref().expect("profile loaded");
            let outcome = if args.check == "anonymity" {
                check_anonymity(&spec, p, args.trials, &mut rng, tol)?
            } else {
                check_neutrality(&spec, p, args.trials, &mut rng, tol)?
            };
            VerificationReport::new(&args.check, &name, seed, outcome.holds)
                .with_profile(p)
                .with_result("max_deviation", outcome.max_deviation)
                .with_witness(&outcome.counterexample)
                .with_stats(json!({ "trials": outcome.trials }))
        }
        "unanimity" => {
            let text = args
                .vote
                .as_deref()
                .ok_or_else(|| Error::Parse("unanimity needs --vote".into()))?;
            let values: Vec<f64> =
                serde_json::from_str(text).map_err(|e| Error::Parse(format!("--vote: {e}")))?;
            let vote = Allocation::new(&values, &Tolerance::default())?;
            let p = Profile::unanimous(&vote, args.voters)?;
            spec.check_dimensions(p.n(), p.m())?;
            let outcome = check_unanimity(&spec, &vote, args.voters, tol)?;
            VerificationReport::new("unanimity", &name, seed, outcome.holds)
                .with_profile(&p)
                .with_result("output", outcome.output.values())
                .with_result("deviation", outcome.deviation)
        }
        "continuity" => {
            let p = profile.as_ref().expect("profile loaded");
            let deltas = [1e-2, 1e-3, 1e-4, 1e-5];
            let trials = args.trials.max(1);
            let r = continuity_probe(&spec, p, &deltas, trials, &mut rng, tol)?;
            VerificationReport::new("continuity", &name, seed, !r.diverging)
                .with_profile(p)
                .with_result("diverging", r.diverging)
                .with_stats(&r.scales)
        }
        "truthfulness" => {
            let p = profile.as_ref().expect("profile loaded");
            let search = SearchConfig::for_dimension(p.m()).with_seed(seed);
            let r = match args.voter {
                Some(i) => manipulation_search(&spec, p, i, &search, tol)?,
                None => best_manipulation(&spec, p, &search, tol)?,
            };
            let violation = r.is_violation(tol);
            let verdict = if violation {
                "violation found".to_string()
            } else {
                format!(
                    "no violation found (search budget {} evaluations)",
                    r.search_stats.candidates_evaluated
                )
            };
            VerificationReport::new("truthfulness", &name, seed, !violation)
                .with_profile(p)
                .with_result("verdict", verdict)
                .with_result("voter", r.voter)
                .with_result("gain", r.gain)
                .with_result("truthful_disutility", r.truthful_disutility)
                .with_result("best_disutility", r.best_disutility)
                .with_witness(r.best_misreport.values())
                .with_stats(&r.search_stats)
        }
        "fairness" => {
            let p = profile.as_ref().expect("profile loaded");
            let f = fairness(&spec, p, tol)?;
            VerificationReport::new("fairness", &name, seed, true)
                .with_profile(p)
                .with_result("l1", f.l1)
                .with_result("linf", f.linf)
                .with_result("profile_digest", &f.profile_digest)
        }
        "representability" => {
            let p = profile.as_ref().expect("profile loaded");
            let out = spec.apply(p, tol)?;
            let r = phantom_representable(p, &out)?;
            VerificationReport::new("representability", &name, seed, r.feasible)
                .with_profile(p)
                .with_result("output", out.values())
                .with_result("explanation", &r.blocking_explanation)
                .with_witness(&r.witness)
                .with_stats(json!({ "candidates": r.candidate_set.len() }))
        }
        "family-consistency" => {
            let p1 = profile.as_ref().expect("profile loaded");
            let path = args
                .profile2
                .as_ref()
                .ok_or_else(|| Error::Parse("family-consistency needs --profile2".into()))?;
            let p2 = Profile::from_json(&read_text(path)?)?;
            spec.check_dimensions(p2.n(), p2.m())?;
            let (a1, a2) = (spec.apply(p1, tol)?, spec.apply(&p2, tol)?);
            let r = phantom_family_consistent(p1, &a1, &p2, &a2)?;
            VerificationReport::new("family-consistency", &name, seed, r.consistent)
                .with_profile(p1)
                .with_result("outputs", [a1.values(), a2.values()])
                .with_result("explanation", &r.explanation)
                .with_result("truncated", r.truncated)
                .with_witness(&r.witness)
        }
        _ => unreachable!("check names validated above"),
    };
    let holds = report.passed();
    let expected = holds != args.expect_violation;
    let report = report
        .with_result("passed", expected)
        .with_result("property_holds", holds)
        .with_result("expect_violation", args.expect_violation);
    ctx.emit(&render_report(ctx, &report))?;
    Ok(expected)
}

fn cmd_repro(ctx: &Ctx, name: &str, fuzz_profiles: usize) -> Result<bool> {
    let names: Vec<&str> = if name == "all" {
        SCENARIO_NAMES.to_vec()
    } else if SCENARIO_NAMES.contains(&name) {
        vec![name]
    } else {
        bail!(Error::UnknownScenario(name.to_string()));
    };
    let cfg = ScenarioConfig {
        fuzz_profiles,
        ..ScenarioConfig::new(ctx.cli.seed, ctx.tol.clone())
    };
    let mut outcomes = Vec::new();
    for n in names {
        outcomes.push(run_scenario(n, &cfg)?);
    }
    let all_passed = outcomes.iter().all(|o| o.passed);
    let text = match ctx.cli.format {
        Format::Json => json_string(serde_json::to_value(&outcomes)?),
        Format::Csv => {
            let mut s = String::from("scenario,passed\n");
            for o in &outcomes {
                s.push_str(&format!("{},{}\n", o.name, o.passed));
            }
            s
        }
        Format::Pretty => {
            let width = outcomes.iter().map(|o| o.name.len()).max().unwrap_or(0);
            let mut s = String::new();
            for o in &outcomes {
                let mark = if o.passed { "PASS" } else { "FAIL" };
                s.push_str(&format!("{:<width$}  {mark}\n", o.name));
                for f in &o.findings {
                    s.push_str(&format!("    {f}\n"));
                }
            }
            let passed = outcomes.iter().filter(|o| o.passed).count();
            s.push_str(&format!("{passed}/{} scenarios passed\n", outcomes.len()));
            s
        }
    };
    ctx.emit(&text)?;
    Ok(all_passed)
}

fn cmd_trace(ctx: &Ctx, mech: &str, input: &InputArgs, grid: usize) -> Result<bool> {
    let spec = load_mechanism(mech)?;
    let profile = load_profile(input)?;
    spec.check_dimensions(profile.n(), profile.m())?;
    let Some(system) = spec.base.phantom_system(profile.n())? else {
        eprintln!("error: {} has no phantom system to trace", spec.id);
        return Err(Exit(EXIT_DIMENSION).into());
    };
    if !matches!(spec.cutoff, CutoffKind::None | CutoffKind::Aggregate { .. }) {
        eprintln!("note: tracing the base rule on the vote-cut profile");
    }
    let input_profile = spec.preprocess(&profile)?;
    let mut trace = median_trace(&system, &input_profile, grid)?;
    let run = solve(&system, &input_profile, &ctx.tol)?;

    // Insert the normalization time as its own row, keeping t sorted.
    let pos = trace.t_grid.partition_point(|&t| t < run.t_star);
    let on_grid = trace
        .t_grid
        .get(pos)
        .is_some_and(|&t| (t - run.t_star).abs() <= 1e-9);
    if !on_grid {
        trace.t_grid.insert(pos, run.t_star);
        trace.sums.insert(pos, run.medians.iter().sum());
        trace.medians.insert(pos, run.medians.clone());
    }

    let text = match ctx.cli.format {
        Format::Json => json_string(json!({
            "mechanism": spec.id,
            "t_star": run.t_star,
            "t": trace.t_grid,
            "medians": trace.medians,
            "sums": trace.sums,
        })),
        Format::Csv | Format::Pretty => trace.to_csv(number),
    };
    if ctx.cli.format != Format::Json {
        eprintln!("t_star = {}", number(run.t_star));
    }
    ctx.emit(&text)?;
    Ok(true)
}

fn cmd_list(ctx: &Ctx) -> Result<bool> {
    let specs = registry_list();
    let text = match ctx.cli.format {
        Format::Json => json_string(serde_json::to_value(&specs)?),
        Format::Csv => {
            let mut s = String::from("id,flags,spec\n");
            for spec in &specs {
                s.push_str(&format!(
                    "{},{},\"{}\"\n",
                    spec.id,
                    spec.flags.join(";"),
                    spec.to_json().replace('"', "\"\"")
                ));
            }
            s
        }
        Format::Pretty => {
            let width = specs.iter().map(|s| s.id.len()).max().unwrap_or(0);
            specs
                .iter()
                .map(|s| format!("{:<width$}  {}", s.id, s.flags.join(", ")))
                .collect::<Vec<_>>()
                .join("\n")
        }
    };
    ctx.emit(&text)?;
    Ok(true)
}
