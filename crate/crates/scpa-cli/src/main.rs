//! Command-line front end: scenario generation, the individual pipeline
//! stages, the full solve, schedule simulation, and the three-case sweep.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use scpa::experiment::{run_experiment, to_csv, ExperimentConfig};
use scpa::grouping::{self, DcConfig};
use scpa::model::{source_label, HomogeneousSchedule, Instance};
use scpa::offsets::OffsetProblem;
use scpa::pipeline::{solve_scpa, SolveConfig};
use scpa::render::render_table;
use scpa::scenario::{CoverageShape, FusionCase, GridScenario};
use scpa::{activation, lower_bound, sim};

#[derive(Parser)]
#[command(name = "scpa", version, about = "Channel-minimal periodic scheduling with hard age-of-information guarantees")]
struct Cli {
    /// Write the primary output to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format, where a subcommand supports more than one.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Seed for the randomized subcommands.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DcMode {
    /// Search every base combination.
    Full,
    /// At most two groups, two-group bases fixed to {2, 3}.
    Restricted,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a grid scenario instance as JSON.
    Gen {
        #[arg(long, default_value_t = 3)]
        width: u32,
        #[arg(long, default_value_t = 3)]
        height: u32,
        /// Regions covered per source (1, 2 or 3).
        #[arg(long, default_value_t = 2)]
        coverage: u8,
        /// Tolerance case: 1 = deadline minus one, 2 = single slot, 3 = no fusion.
        #[arg(long, default_value_t = 2)]
        case: u8,
        #[arg(long, default_value_t = 2)]
        dlo: u64,
        #[arg(long, default_value_t = 10)]
        dhi: u64,
    },
    /// Compute the channel lower bound of an instance.
    Lb { instance: PathBuf },
    /// Choose active sources and their maximum intervals.
    Activate { instance: PathBuf },
    /// Group active sources and derive chain intervals.
    Group {
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = DcMode::Full)]
        dc: DcMode,
    },
    /// Solve offsets for a fixed-interval problem file.
    Offsets {
        problem: PathBuf,
        /// Slots to render in the channel table.
        #[arg(long, default_value_t = 12)]
        slots: u64,
    },
    /// Run the full pipeline on an instance.
    Solve {
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = DcMode::Full)]
        dc: DcMode,
        /// Slots to render in the channel table.
        #[arg(long, default_value_t = 12)]
        slots: u64,
    },
    /// Simulate a schedule against an instance and report ages.
    Simulate {
        instance: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
        /// Simulation horizon; defaults to the verification horizon.
        #[arg(long)]
        horizon: Option<u64>,
    },
    /// Run the three-case sweep and emit CSV.
    Experiment {
        #[arg(long, default_value_t = 6)]
        width: u32,
        #[arg(long, default_value_t = 6)]
        height: u32,
        #[arg(long, default_value_t = 50)]
        trials: u32,
        /// Coverages to sweep.
        #[arg(long, value_delimiter = ',', default_values_t = vec![1u8, 2, 3])]
        coverage: Vec<u8>,
        /// Cases to solve per trial.
        #[arg(long, value_delimiter = ',', default_values_t = vec![1u8, 2, 3])]
        cases: Vec<u8>,
        #[arg(long, default_value_t = 2)]
        dlo: u64,
        #[arg(long, default_value_t = 10)]
        dhi: u64,
        #[arg(long, value_enum, default_value_t = DcMode::Restricted)]
        dc: DcMode,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => Ok(()),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { width, height, coverage, case, dlo, dhi } => {
            if !(1..=3).contains(&coverage) {
                bail!("coverage must be 1, 2 or 3");
            }
            let case = FusionCase::from_number(case).context("case must be 1, 2 or 3")?;
            if dlo < 2 || dhi < dlo {
                bail!("deadline range must satisfy 2 <= dlo <= dhi");
            }
            let scenario = GridScenario {
                width,
                height,
                coverage,
                shape: CoverageShape::Straight,
                d_lo: dlo,
                d_hi: dhi,
                case,
                seed: cli.seed,
            };
            emit(&cli.out, &scenario.generate().to_json_string())
        }
        Command::Lb { instance } => {
            let inst = load_instance(&instance)?;
            let lb = lower_bound::solve_lb(&inst)?;
            let text = match cli.format.unwrap_or(Format::Csv) {
                Format::Json => serde_json::to_string_pretty(&serde_json::json!({
                    "rate_sum": lb.rate_sum,
                    "channels": lb.channels,
                    "rates": lb.rates,
                }))?,
                _ => {
                    let mut out = String::from("source,rate\n");
                    for (m, rate) in &lb.rates {
                        out.push_str(&format!("{m},{rate:.9}\n"));
                    }
                    out.push_str(&format!("sum,{:.9}\n", lb.rate_sum));
                    out.push_str(&format!("channels,{}\n", lb.channels));
                    out
                }
            };
            emit(&cli.out, &text)
        }
        Command::Activate { instance } => {
            let inst = load_instance(&instance)?;
            validate(&inst)?;
            let act = activation::solve_activation(&inst);
            let text = match cli.format.unwrap_or(Format::Table) {
                Format::Json => serde_json::to_string_pretty(&act)?,
                _ => {
                    let mut out = String::new();
                    for chosen in &act.chosen {
                        let members: Vec<String> =
                            chosen.members.iter().map(|&m| source_label(m)).collect();
                        out.push_str(&format!(
                            "region {}: option {} -> {{{}}}\n",
                            chosen.region,
                            chosen.option_index + 1,
                            members.join(", ")
                        ));
                    }
                    out.push_str("source,rate,max_interval\n");
                    for (m, c) in &act.max_interval {
                        out.push_str(&format!(
                            "{},{:.9},{}\n",
                            source_label(*m),
                            1.0 / *c as f64,
                            c
                        ));
                    }
                    out.push_str(&format!(
                        "objective,{:.9},certified={}\n",
                        act.objective, act.certified
                    ));
                    out
                }
            };
            emit(&cli.out, &text)
        }
        Command::Group { instance, dc } => {
            let inst = load_instance(&instance)?;
            validate(&inst)?;
            let act = activation::solve_activation(&inst);
            let graph = grouping::build_graph(&act);
            let plan = grouping::run_dc(&act, &graph, &dc_config(dc));
            let text = match cli.format.unwrap_or(Format::Table) {
                Format::Json => serde_json::to_string_pretty(&plan)?,
                _ => {
                    let mut out = String::new();
                    for (i, component) in graph.components.iter().enumerate() {
                        let members: Vec<String> =
                            component.iter().map(|&m| source_label(m)).collect();
                        out.push_str(&format!("component {}: {{{}}}\n", i + 1, members.join(", ")));
                    }
                    for group in &plan.groups {
                        let members: Vec<String> = group
                            .intervals
                            .iter()
                            .map(|(&m, &c)| format!("{}:{}", source_label(m), c))
                            .collect();
                        out.push_str(&format!(
                            "group base {}: {}\n",
                            group.base,
                            members.join(" ")
                        ));
                    }
                    out.push_str(&format!("objective,{}\n", plan.objective));
                    out
                }
            };
            emit(&cli.out, &text)
        }
        Command::Offsets { problem, slots } => {
            let text = fs::read_to_string(&problem)
                .with_context(|| format!("reading {}", problem.display()))?;
            let problem = OffsetProblem::from_json_str(&text)?;
            let solution = scpa::offsets::solve_offsets(&problem)?;
            let schedule = HomogeneousSchedule::from_pairs(
                problem.intervals.iter().map(|(&m, &c)| (m, c, solution.offsets[&m])),
            );
            let text = match cli.format.unwrap_or(Format::Table) {
                Format::Json => serde_json::to_string_pretty(&solution)?,
                _ => {
                    let mut out = String::new();
                    for (m, o) in &solution.offsets {
                        out.push_str(&format!("{}: offset {}\n", source_label(*m), o));
                    }
                    out.push_str(&format!("channels {}\n", solution.channels));
                    out.push_str(&render_table(&schedule, slots)?);
                    out
                }
            };
            emit(&cli.out, &text)
        }
        Command::Solve { instance, dc, slots } => {
            let inst = load_instance(&instance)?;
            let config = SolveConfig { dc: dc_config(dc), ..SolveConfig::default() };
            let report = solve_scpa(&inst, &config)?;
            let table = render_table(&report.schedule, slots)?;
            match &cli.out {
                Some(path) => {
                    write_file(path, &report.to_json_string())?;
                    print!("{table}");
                }
                None => {
                    println!("{}", report.to_json_string());
                    print!("{table}");
                }
            }
            Ok(())
        }
        Command::Simulate { instance, schedule, horizon } => {
            let inst = load_instance(&instance)?;
            let text = fs::read_to_string(&schedule)
                .with_context(|| format!("reading {}", schedule.display()))?;
            let sched = HomogeneousSchedule::from_json_str(&text)?;
            let report = sched.validate();
            if !report.is_ok() {
                bail!("invalid schedule: {}", report.violations.join("; "));
            }
            let horizon = match horizon {
                Some(h) => h,
                None => sim::default_horizon(&inst, &sched)?,
            };
            let trace = sim::simulate(&inst, &sched, horizon);
            let text = match cli.format.unwrap_or(Format::Csv) {
                Format::Json => serde_json::to_string_pretty(&trace)?,
                Format::Csv => trace.to_csv(),
                Format::Table => {
                    let mut out = String::new();
                    out.push_str(&format!(
                        "horizon {horizon}, violations {}\n",
                        trace.violations.len()
                    ));
                    for (region, slot) in trace.violations.iter().take(20) {
                        out.push_str(&format!("violation: region {region} at slot {slot}\n"));
                    }
                    out
                }
            };
            emit(&cli.out, &text)
        }
        Command::Experiment { width, height, trials, coverage, cases, dlo, dhi, dc } => {
            let cfg = ExperimentConfig {
                width,
                height,
                coverages: coverage,
                cases,
                trials,
                d_lo: dlo,
                d_hi: dhi,
                seed: cli.seed,
                dc: dc_config(dc),
                parallel: true,
            };
            let output = run_experiment(&cfg);
            emit(&cli.out, &to_csv(&output))
        }
    }
}

fn dc_config(mode: DcMode) -> DcConfig {
    match mode {
        DcMode::Full => DcConfig::unrestricted(),
        DcMode::Restricted => DcConfig::experiment_preset(),
    }
}

fn load_instance(path: &Path) -> Result<Instance> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Instance::from_json_str(&text)?)
}

fn validate(inst: &Instance) -> Result<()> {
    let report = inst.validate();
    if !report.is_ok() {
        bail!("invalid instance: {}", report.violations.join("; "));
    }
    Ok(())
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => write_file(path, content),
        None => {
            print!("{content}");
            if !content.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
