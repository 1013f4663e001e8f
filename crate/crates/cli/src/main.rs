//! `slmbatch`: validate instances, evaluate and compare plans, solve small
//! and realistic instances, and exchange models with external MILP solvers.
//!
//! Exit codes: 0 success, 2 input error, 3 infeasible plan.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use slmbatch::energy::{compare_plans, reconcile};
use slmbatch::files::{InstanceFile, ModelMetadata, PlanContent, PlanFile, Provenance, SCHEMA_VERSION};
use slmbatch::milp::{
    batch_count_trial, build_model, decode_plan, emit_lp, initial_batch_count, parse_solution, ModelOptions, TrialStep,
};
use slmbatch::packing::check_plan_geometry;
use slmbatch::report::{self, EnergyReport};
use slmbatch::solver::{brute_force_optimal, solve_heuristic, BruteForceHook, BruteForceLimits, SearchBudget};
use slmbatch::{validate_instance, Instance, Plan, Subprocess};

/// Relative gap between a solver's objective and the re-evaluated energy
/// above which `import-solution` warns.
const OBJECTIVE_WARN_TOLERANCE: f64 = 1e-4;

/// Relative tolerance when reconciling against published savings.
const RECONCILE_TOLERANCE: f64 = 0.03;

#[derive(Parser)]
#[command(name = "slmbatch", version, about = "Energy-aware batching, orientation and nesting for SLM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an instance file.
    Validate { instance: PathBuf },
    /// Evaluate the energy of a plan.
    Evaluate {
        instance: PathBuf,
        plan: PathBuf,
        #[command(flatten)]
        out: ReportArgs,
    },
    /// Find a plan.
    Solve {
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Heuristic)]
        mode: Mode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Local search iterations.
        #[arg(long, default_value_t = 2000)]
        budget: u64,
        /// Local search wall-clock limit, s.
        #[arg(long, default_value_t = 60.0)]
        time_limit: f64,
        /// Batch ratio: start with ceil(eta · parts) available batches.
        #[arg(long)]
        eta: Option<f64>,
        /// Where to write the plan file.
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[command(flatten)]
        out: ReportArgs,
    },
    /// Write the mixed-integer model in LP format plus a metadata sidecar.
    ExportMilp {
        instance: PathBuf,
        #[arg(long, required_unless_present = "eta", conflicts_with = "eta")]
        n_batches: Option<usize>,
        #[arg(long)]
        eta: Option<f64>,
        /// Drop the constraints ordering opened batches first.
        #[arg(long)]
        no_symmetry: bool,
        /// One global big-M instead of per-family values.
        #[arg(long)]
        loose_bigm: bool,
        /// Charge preheat and cooling to every available batch, opened or not.
        #[arg(long = "paper-faithful-phco")]
        ungated_ph_co: bool,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Read a solver's solution for an exported model back into a plan.
    ImportSolution {
        instance: PathBuf,
        metadata: PathBuf,
        solution: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[command(flatten)]
        out: ReportArgs,
    },
    /// Energy savings of a plan against a reference plan.
    Compare {
        instance: PathBuf,
        plan: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        /// Published per-subprocess savings (MJ) to reconcile against.
        #[arg(long)]
        published: Option<PathBuf>,
        /// Directory for the savings CSV files.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ReportArgs {
    /// Directory for the CSV tables and the JSON report.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Print the JSON report instead of the summary.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Brute,
    Heuristic,
}

enum Failure {
    Input(anyhow::Error),
    Infeasible(Vec<String>),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Input(e.into())
    }
}

type CmdResult = Result<(), Failure>;

macro_rules! input {
    ($($arg:tt)*) => {
        Failure::Input(anyhow!($($arg)*))
    };
}

struct LoadedInstance {
    instance: Instance,
    checksum: String,
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn load_instance(path: &Path) -> anyhow::Result<LoadedInstance> {
    let file = InstanceFile::from_json(&read(path)?).with_context(|| format!("{}", path.display()))?;
    let checksum = file.checksum()?;
    let instance = file.to_instance().with_context(|| format!("{}", path.display()))?;
    Ok(LoadedInstance { instance, checksum })
}

fn require_valid(instance: &Instance) -> anyhow::Result<()> {
    let report = validate_instance(instance);
    if report.is_valid() {
        return Ok(());
    }
    let lines: Vec<String> = report.violations.iter().map(|v| format!("{}: {}", v.subject, v.message)).collect();
    Err(anyhow!("invalid instance:\n  {}", lines.join("\n  ")))
}

fn geometry_gate(plan: &Plan, instance: &Instance) -> CmdResult {
    plan.check_membership(instance)?;
    let violations = check_plan_geometry(plan, instance);
    if violations.is_empty() {
        return Ok(());
    }
    Err(Failure::Infeasible(
        violations
            .iter()
            .map(|v| {
                format!(
                    "batch {}: {:?} violation by {:.6} mm ({})",
                    v.batch + 1,
                    v.kind,
                    v.magnitude,
                    v.instance_ids.join(", ")
                )
            })
            .collect(),
    ))
}

/// Evaluates a plan file; placement plans must match the instance and be
/// geometrically feasible.
fn evaluate_plan_file(loaded: &LoadedInstance, path: &Path) -> Result<EnergyReport, Failure> {
    let file = PlanFile::from_json(&read(path)?).with_context(|| format!("{}", path.display()))?;
    file.verify_checksum(&loaded.checksum).with_context(|| format!("{}", path.display()))?;
    let inst = &loaded.instance;
    match file.content()? {
        PlanContent::Placed(plan) => {
            geometry_gate(&plan, inst)?;
            Ok(report::report_for_plan(&plan, inst)?)
        }
        PlanContent::Aggregates(aggs) => Ok(report::report_for_aggregates(&aggs, &inst.machine, &inst.process)?),
    }
}

fn print_summary(r: &EnergyReport) {
    println!("batches: {}", r.batches.len());
    for b in &r.batches {
        println!(
            "  batch {}: {} parts, {} slices, {:.2} s, {:.6} MJ",
            b.batch,
            b.parts,
            b.slices,
            b.processing_time_s,
            b.energy_j / 1e6
        );
    }
    println!("EC: {:.6} MJ", r.ec_mj);
    println!("EC without preheat and cooling: {:.6} MJ", r.ec_without_ph_co_mj);
    println!("EV: {:.6} J/mm3", r.ev_j_per_mm3);
    println!("total processing time: {:.2} s", r.total_processing_time_s);
}

fn emit_report(r: &EnergyReport, args: &ReportArgs) -> anyhow::Result<()> {
    if args.json {
        println!("{}", serde_json::to_string_pretty(r)?);
    } else {
        print_summary(r);
    }
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        write(&dir.join("batches.csv"), &r.batches_csv()?)?;
        write(&dir.join("subsystems.csv"), &r.subsystems_csv()?)?;
        write(&dir.join("subprocesses.csv"), &r.subprocesses_csv()?)?;
        write(&dir.join("report.json"), &(serde_json::to_string_pretty(r)? + "\n"))?;
    }
    Ok(())
}

fn print_steps(steps: &[TrialStep]) {
    for s in steps {
        let opened = s.opened_batches.map_or("-".to_string(), |n| n.to_string());
        eprintln!("trial: {} available, {} opened, {:?}", s.available_batches, opened, s.verdict);
    }
}

fn cmd_validate(path: &Path) -> CmdResult {
    let loaded = load_instance(path)?;
    require_valid(&loaded.instance)?;
    println!(
        "valid: {} parts of {} part types, checksum {}",
        loaded.instance.parts.len(),
        loaded.instance.part_types.len(),
        loaded.checksum
    );
    Ok(())
}

fn cmd_evaluate(instance: &Path, plan: &Path, out: &ReportArgs) -> CmdResult {
    let loaded = load_instance(instance)?;
    require_valid(&loaded.instance)?;
    let r = evaluate_plan_file(&loaded, plan)?;
    emit_report(&r, out)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(
    instance: &Path,
    mode: Mode,
    seed: u64,
    budget: u64,
    time_limit: f64,
    eta: Option<f64>,
    output: Option<&Path>,
    out: &ReportArgs,
) -> CmdResult {
    let loaded = load_instance(instance)?;
    let inst = &loaded.instance;
    require_valid(inst)?;
    let (plan, solver) = match mode {
        Mode::Brute => {
            let limits = BruteForceLimits::default();
            let plan = match eta {
                Some(eta) => {
                    let mut hook = BruteForceHook { instance: inst, limits };
                    let r = batch_count_trial(inst, eta, ModelOptions::default(), &mut hook)?;
                    print_steps(&r.steps);
                    r.plan
                }
                None => brute_force_optimal(inst, limits)?,
            };
            (plan, "brute-force")
        }
        Mode::Heuristic => {
            let outcome = solve_heuristic(inst, eta, SearchBudget::new(budget, time_limit, seed)?)?;
            print_steps(&outcome.steps);
            (outcome.plan, "local-search")
        }
    };
    geometry_gate(&plan, inst)?;
    let r = report::report_for_plan(&plan, inst)?;
    if let Some(path) = output {
        let provenance = Provenance {
            solver: Some(solver.into()),
            seed: matches!(mode, Mode::Heuristic).then_some(seed),
            ..Provenance::default()
        };
        let file = PlanFile::from_plan(&plan, Some(loaded.checksum.clone()), Some(provenance));
        write(path, &file.to_json()?)?;
    }
    emit_report(&r, out)?;
    Ok(())
}

struct ExportArgs<'a> {
    instance: &'a Path,
    n_batches: Option<usize>,
    eta: Option<f64>,
    options: ModelOptions,
    output: &'a Path,
}

fn metadata_path(lp: &Path) -> PathBuf {
    let mut name = lp.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn cmd_export(a: ExportArgs) -> CmdResult {
    let loaded = load_instance(a.instance)?;
    let inst = &loaded.instance;
    require_valid(inst)?;
    let n_batches = match (a.n_batches, a.eta) {
        (Some(n), _) => n,
        (None, Some(eta)) if eta > 0.0 && eta < 1.0 => initial_batch_count(eta, inst.parts.len()).min(inst.parts.len()),
        (None, Some(eta)) => return Err(input!("eta must lie in (0, 1), got {eta}")),
        (None, None) => return Err(input!("either --n-batches or --eta is required")),
    };
    let model = build_model(inst, n_batches, a.options)?;
    write(a.output, &emit_lp(&model)?)?;
    let meta = ModelMetadata {
        schema_version: SCHEMA_VERSION,
        instance_checksum: loaded.checksum.clone(),
        n_batches,
        options: a.options,
        variables: model.num_variables(),
        constraints: model.num_constraints(),
    };
    let meta_path = metadata_path(a.output);
    write(&meta_path, &meta.to_json()?)?;
    println!("batches: {n_batches}");
    println!("variables: {}", model.num_variables());
    println!("constraints: {}", model.num_constraints());
    println!("wrote {} and {}", a.output.display(), meta_path.display());
    Ok(())
}

fn cmd_import(instance: &Path, metadata: &Path, solution: &Path, output: Option<&Path>, out: &ReportArgs) -> CmdResult {
    let loaded = load_instance(instance)?;
    let inst = &loaded.instance;
    require_valid(inst)?;
    let meta = ModelMetadata::from_json(&read(metadata)?).with_context(|| format!("{}", metadata.display()))?;
    if meta.instance_checksum != loaded.checksum {
        return Err(input!(
            "checksum mismatch: model was exported for instance {}, not {}",
            meta.instance_checksum,
            loaded.checksum
        ));
    }
    let model = build_model(inst, meta.n_batches, meta.options)?;
    if model.num_variables() != meta.variables || model.num_constraints() != meta.constraints {
        return Err(input!(
            "model registry mismatch: rebuilt {} variables and {} constraints, metadata lists {} and {}",
            model.num_variables(),
            model.num_constraints(),
            meta.variables,
            meta.constraints
        ));
    }
    let assignment = parse_solution(&read(solution)?, &model).with_context(|| format!("{}", solution.display()))?;
    for w in &assignment.warnings {
        eprintln!("warning: {w}");
    }
    let plan = decode_plan(&assignment.values, &model, inst)?;
    geometry_gate(&plan, inst)?;
    let r = report::report_for_plan(&plan, inst)?;
    let objective = assignment.stated_objective.unwrap_or_else(|| model.objective_value(&assignment.values));
    let gap = (objective - r.breakdown.total).abs() / r.breakdown.total.abs().max(1.0);
    if gap > OBJECTIVE_WARN_TOLERANCE {
        eprintln!(
            "warning: solver objective {objective} J differs from re-evaluated energy {} J by {:.4}%",
            r.breakdown.total,
            gap * 100.0
        );
    }
    if let Some(path) = output {
        let provenance = Provenance { solver: Some("external".into()), ..Provenance::default() };
        write(path, &PlanFile::from_plan(&plan, Some(loaded.checksum.clone()), Some(provenance)).to_json()?)?;
    }
    emit_report(&r, out)?;
    Ok(())
}

fn cmd_compare(
    instance: &Path,
    plan: &Path,
    reference: &Path,
    published: Option<&Path>,
    out_dir: Option<&Path>,
) -> CmdResult {
    let loaded = load_instance(instance)?;
    require_valid(&loaded.instance)?;
    let candidate = evaluate_plan_file(&loaded, plan)?;
    let baseline = evaluate_plan_file(&loaded, reference)?;
    let s = compare_plans(&baseline.breakdown, &candidate.breakdown)?;
    println!(
        "total: reference {:.2} MJ, plan {:.2} MJ, saving {:.2} MJ ({:.2}%)",
        s.baseline_total_j / 1e6,
        s.candidate_total_j / 1e6,
        s.total_saving_j / 1e6,
        s.relative_saving_pct
    );
    for row in &s.by_subprocess {
        println!("  {:<3} {:>10.2} MJ", row.key.code(), row.saving_j / 1e6);
    }
    let rows = match published {
        Some(path) => {
            let published: BTreeMap<Subprocess, f64> =
                serde_json::from_str(&read(path)?).with_context(|| format!("{}", path.display()))?;
            let rows = reconcile(&s, &published, RECONCILE_TOLERANCE);
            for r in rows.iter().filter(|r| r.discrepancy) {
                println!(
                    "discrepancy: {} computed {:.2} MJ, published {:.2} MJ, residual {:+.2} MJ",
                    r.subprocess.code(),
                    r.computed_mj,
                    r.published_mj,
                    r.residual_mj
                );
            }
            Some(rows)
        }
        None => None,
    };
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        write(&dir.join("subsystem_savings.csv"), &report::subsystem_savings_csv(&s)?)?;
        write(&dir.join("subprocess_savings.csv"), &report::subprocess_savings_csv(&s)?)?;
        if let Some(rows) = &rows {
            write(&dir.join("reconciliation.csv"), &report::reconciliation_csv(rows)?)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Validate { instance } => cmd_validate(&instance),
        Command::Evaluate { instance, plan, out } => cmd_evaluate(&instance, &plan, &out),
        Command::Solve { instance, mode, seed, budget, time_limit, eta, output, out } => {
            cmd_solve(&instance, mode, seed, budget, time_limit, eta, output.as_deref(), &out)
        }
        Command::ExportMilp { instance, n_batches, eta, no_symmetry, loose_bigm, ungated_ph_co, output } => {
            cmd_export(ExportArgs {
                instance: &instance,
                n_batches,
                eta,
                options: ModelOptions {
                    symmetry_break: !no_symmetry,
                    tight_big_m: !loose_bigm,
                    gate_ph_co: !ungated_ph_co,
                },
                output: &output,
            })
        }
        Command::ImportSolution { instance, metadata, solution, output, out } => {
            cmd_import(&instance, &metadata, &solution, output.as_deref(), &out)
        }
        Command::Compare { instance, plan, reference, published, out_dir } => {
            cmd_compare(&instance, &plan, &reference, published.as_deref(), out_dir.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Infeasible(violations)) => {
            eprintln!("error: infeasible plan");
            for v in violations {
                eprintln!("  {v}");
            }
            ExitCode::from(3)
        }
    }
}
