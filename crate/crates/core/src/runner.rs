//! Config-driven run: load inputs, step the engine, stream outputs to disk.

use std::path::Path;
use std::time::Instant;

use thiserror::Error;

use crate::behavior::{builtin, BehaviorError};
use crate::config::{Config, ConfigError};
use crate::disease::{DiseaseError, HealthState};
use crate::engine::{EngineError, EngineOptions, Simulation};
use crate::output::{render_epicurve_svg, OutputError, OutputFiles, OutputWriter};
use crate::population::{load_location_weights, load_persons, load_visits, Population, PopulationError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Population(#[from] PopulationError),
    #[error("disease model: {0}")]
    Disease(#[from] DiseaseError),
    #[error("behavior model: {0}")]
    Behavior(#[from] BehaviorError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Output(#[from] OutputError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub iterations: u32,
    pub population: usize,
    pub final_counts: [u64; 5],
    /// Fraction of persons that ever left S, initial exposures included.
    pub attack_rate: f64,
    pub files: OutputFiles,
}

impl std::fmt::Display for RunSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "iterations: {}", self.iterations)?;
        writeln!(f, "population: {}", self.population)?;
        let counts: Vec<String> = HealthState::ALL
            .iter()
            .map(|s| format!("{}={}", s.name(), self.final_counts[s.index()]))
            .collect();
        writeln!(f, "final counts: {}", counts.join(" "))?;
        writeln!(f, "attack rate: {:.4}", self.attack_rate)?;
        write!(f, "outputs: {}", self.files.transitions.parent().unwrap_or(Path::new(".")).display())
    }
}

pub fn load_population(config: &Config) -> Result<Population, PopulationError> {
    let persons = load_persons(&config.person_file)?;
    let mut pop = load_visits(&config.visit_file, persons)?;
    if let Some(w) = &config.location_weight_file {
        pop.set_location_weights(&load_location_weights(w)?);
    }
    Ok(pop)
}

pub fn engine_options(config: &Config) -> EngineOptions {
    EngineOptions {
        num_workers: config.num_workers.max(1),
        contact_probability: config.contact_probability,
        seed: config.seed,
        scales: config.scales,
        record_local_observables: config.write_local_observables,
        trace_propensities: false,
    }
}

/// Runs `config` on an already loaded population, writing each step as it completes.
pub fn run_population(config: &Config, population: &Population, render_svg: bool) -> Result<RunSummary, RunError> {
    let disease = config.disease_model()?;
    let behavior = builtin(&config.behavior_model.name, &config.behavior_model.params, config.seed)?;
    let mut sim = Simulation::new(
        population,
        &disease,
        behavior.as_ref(),
        config.initial_exposed,
        engine_options(config),
    )?;
    let pids: Vec<u64> = population.persons().iter().map(|p| p.pid).collect();
    let mut writer = OutputWriter::create(
        &config.output_directory,
        &pids,
        sim.model_classes(),
        config.write_local_observables,
    )?;
    let mut left_s = vec![false; population.len()];
    let mut mark = |records: &[crate::engine::TransitionRecord]| {
        for r in records {
            if let Some(i) = population.index_of(r.p1_pid) {
                left_s[i] |= r.state != HealthState::S;
            }
        }
    };
    mark(sim.initial_transitions());
    writer.write_transitions(sim.initial_transitions())?;

    let mut history = Vec::with_capacity(config.iterations as usize);
    for _ in 0..config.iterations {
        let clock = Instant::now();
        let step = sim.step();
        mark(&step.transitions);
        writer.write_step(&step)?;
        history.push(step.global);
        log::info!(
            "iteration {} done in {:?}: {} contacts, {} transitions",
            step.iteration,
            clock.elapsed(),
            step.contacts,
            step.transitions.len()
        );
    }
    let files = writer.finish()?;
    if render_svg && !history.is_empty() {
        let svg = config.output_directory.join(crate::output::EPICURVE_SVG_FILE);
        render_epicurve_svg(&history, &svg)?;
    }
    let n = population.len();
    Ok(RunSummary {
        iterations: config.iterations,
        population: n,
        final_counts: sim.state().counts(),
        attack_rate: if n == 0 {
            0.0
        } else {
            left_s.iter().filter(|&&b| b).count() as f64 / n as f64
        },
        files,
    })
}

pub fn run_config(config: &Config, render_svg: bool) -> Result<RunSummary, RunError> {
    let population = load_population(config)?;
    log::info!(
        "loaded {} persons, {} locations",
        population.len(),
        population.locations().len()
    );
    run_population(config, &population, render_svg)
}
