use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand, ValueEnum};

use visitsim::config::{load_config, validate_config_file, CONFIG_SCHEMA};
use visitsim::output::{emit_epicurve, read_global_observables, render_epicurve_svg, EPICURVE_FILE, EPICURVE_SVG_FILE};
use visitsim::population::{generate_random_population, generate_smallville, write_persons, write_visits};
use visitsim::runner::run_config;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LogLevel {
    Critical,
    Error,
    Warning,
    Info,
    Debug,
}

impl LogLevel {
    fn filter(self) -> log::LevelFilter {
        match self {
            LogLevel::Critical | LogLevel::Error => log::LevelFilter::Error,
            LogLevel::Warning => log::LevelFilter::Warn,
            LogLevel::Info => log::LevelFilter::Info,
            LogLevel::Debug => log::LevelFilter::Debug,
        }
    }
}

/// Agent-based epidemic simulation over weekly visit schedules.
///
/// `visitsim -c CONFIG -s SCHEMA` is shorthand for `visitsim run -c CONFIG -s SCHEMA`.
#[derive(Debug, Parser)]
#[command(name = "visitsim", version)]
struct Cli {
    /// Configuration file (JSON)
    #[arg(short = 'c', long = "config", global = true)]
    config: Option<PathBuf>,
    /// Schema file used to validate the configuration
    #[arg(short = 's', long = "schema", global = true)]
    schema: Option<PathBuf>,
    /// Log level; log lines go to standard error
    #[arg(short = 'l', long = "log-level", global = true, value_enum, default_value = "warning")]
    log_level: LogLevel,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate the configuration, run the simulation and write the output files
    Run {
        /// Also render epicurve.svg in the output directory
        #[arg(long)]
        svg: bool,
    },
    /// Check a configuration against a schema and print the report
    Validate,
    /// Write a test population (persons.csv, visits.csv)
    GeneratePopulation {
        #[arg(value_enum)]
        kind: PopulationKind,
        /// Directory for the CSV files
        #[arg(short = 'o', long)]
        output_dir: PathBuf,
        /// Number of persons (random only)
        #[arg(long, default_value_t = 1000)]
        people: usize,
        /// Number of activity locations (random only)
        #[arg(long, default_value_t = 50)]
        locations: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Rebuild epicurve.csv from an existing global observables file
    Epicurve {
        /// global_observables.csv of a finished run
        global_observables: PathBuf,
        /// Output file, default epicurve.csv next to the input
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
        /// Also render an SVG next to the output file
        #[arg(long)]
        svg: bool,
    },
    /// Print the bundled configuration schema
    Schema,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PopulationKind {
    Smallville,
    Random,
}

fn fail(category: &str, err: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {category}: {err}");
    ExitCode::from(1)
}

fn require(value: Option<PathBuf>, flag: &str, what: &str) -> PathBuf {
    value.unwrap_or_else(|| {
        Cli::command()
            .error(
                clap::error::ErrorKind::MissingRequiredArgument,
                format!("the {what} file is required ({flag})"),
            )
            .exit()
    })
}

/// Validates and prints problems to standard error; true when valid.
fn check(config: &Path, schema: &Path) -> Result<bool, ExitCode> {
    match validate_config_file(config, schema) {
        Ok(report) if report.is_valid() => Ok(true),
        Ok(report) => {
            eprint!("{report}");
            Ok(false)
        }
        Err(e) => Err(fail("configuration", e)),
    }
}

fn run(config: PathBuf, schema: PathBuf, svg: bool) -> ExitCode {
    match check(&config, &schema) {
        Ok(true) => {}
        Ok(false) => {
            eprintln!("error: validation: {} does not match {}", config.display(), schema.display());
            return ExitCode::from(1);
        }
        Err(code) => return code,
    }
    let cfg = match load_config(&config) {
        Ok(c) => c,
        Err(e) => return fail("configuration", e),
    };
    if !cfg.legacy_keys.is_empty() {
        let keys: Vec<&str> = cfg.legacy_keys.keys().map(String::as_str).collect();
        log::info!("ignoring keys: {}", keys.join(", "));
    }
    match run_config(&cfg, svg) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => fail("run", e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(cli.log_level.filter())
        .target(env_logger::Target::Stderr)
        .init();

    match cli.command {
        None if cli.config.is_none() && cli.schema.is_none() => {
            let _ = Cli::command().print_help();
            ExitCode::from(2)
        }
        None => run(
            require(cli.config, "-c", "configuration"),
            require(cli.schema, "-s", "schema"),
            false,
        ),
        Some(Command::Run { svg }) => run(
            require(cli.config, "-c", "configuration"),
            require(cli.schema, "-s", "schema"),
            svg,
        ),
        Some(Command::Validate) => {
            let config = require(cli.config, "-c", "configuration");
            let schema = require(cli.schema, "-s", "schema");
            match check(&config, &schema) {
                Ok(true) => match load_config(&config) {
                    Ok(_) => {
                        println!("valid");
                        ExitCode::SUCCESS
                    }
                    Err(e) => fail("configuration", e),
                },
                Ok(false) => ExitCode::from(1),
                Err(code) => code,
            }
        }
        Some(Command::GeneratePopulation {
            kind,
            output_dir,
            people,
            locations,
            seed,
        }) => {
            let pop = match kind {
                PopulationKind::Smallville => generate_smallville(),
                PopulationKind::Random => generate_random_population(people, locations, seed),
            };
            if let Err(e) = std::fs::create_dir_all(&output_dir) {
                return fail("output", format!("{}: {e}", output_dir.display()));
            }
            let persons = output_dir.join("persons.csv");
            let visits = output_dir.join("visits.csv");
            if let Err(e) = write_persons(&persons, pop.persons()).and_then(|_| write_visits(&visits, &pop)) {
                return fail("output", e);
            }
            println!("{}", persons.display());
            println!("{}", visits.display());
            ExitCode::SUCCESS
        }
        Some(Command::Epicurve {
            global_observables,
            output,
            svg,
        }) => {
            let history = match read_global_observables(&global_observables) {
                Ok(h) => h,
                Err(e) => return fail("input", e),
            };
            let dir = global_observables.parent().unwrap_or(Path::new("."));
            let out = output.unwrap_or_else(|| dir.join(EPICURVE_FILE));
            if let Err(e) = emit_epicurve(&history, &out) {
                return fail("output", e);
            }
            println!("{}", out.display());
            if svg {
                let path = out.with_file_name(EPICURVE_SVG_FILE);
                if let Err(e) = render_epicurve_svg(&history, &path) {
                    return fail("output", e);
                }
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Some(Command::Schema) => {
            print!("{CONFIG_SCHEMA}");
            ExitCode::SUCCESS
        }
    }
}
