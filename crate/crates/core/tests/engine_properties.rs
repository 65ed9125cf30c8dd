use std::collections::{BTreeMap, HashMap};

use proptest::prelude::*;

use visitsim::behavior::builtin;
use visitsim::config::Config;
use visitsim::disease::{default_seir_model, HealthState};
use visitsim::engine::{initialize, run, EngineError, EngineOptions, SimulationOutputs};
use visitsim::output::write_outputs;
use visitsim::population::{generate_random_population, write_persons, write_visits, ActivityType, Population};
use visitsim::runner::{run_config, RunError};

fn simulate(pop: &Population, model: &str, tau: f64, exposed: u64, steps: u32, opts: EngineOptions) -> SimulationOutputs {
    let disease = default_seir_model(tau);
    let behavior = builtin(model, &BTreeMap::new(), opts.seed).unwrap();
    run(pop, &disease, behavior.as_ref(), exposed, steps, opts).unwrap()
}

/// Replays the transition log: state of every pid at the start of each step.
fn states_at_start(out: &SimulationOutputs) -> Vec<HashMap<u64, HealthState>> {
    let mut current: HashMap<u64, HealthState> = out.pids.iter().map(|&p| (p, HealthState::S)).collect();
    for r in &out.initial_transitions {
        current.insert(r.p1_pid, r.state);
    }
    let mut per_step = Vec::new();
    for s in &out.steps {
        per_step.push(current.clone());
        for r in &s.transitions {
            current.insert(r.p1_pid, r.state);
        }
    }
    per_step
}

fn overlapped(pop: &Population, a: u64, b: u64, day: usize) -> bool {
    let (ia, ib) = (pop.index_of(a).unwrap(), pop.index_of(b).unwrap());
    pop.day_visits(ia, day).iter().any(|u| {
        u.activity_type != ActivityType::Transit
            && pop.day_visits(ib, day).iter().any(|v| {
                v.activity_type != ActivityType::Transit
                    && u.lid == v.lid
                    && u.start_time.max(v.start_time) < u.end_time.min(v.end_time)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn worker_count_does_not_change_results(
        n in 20usize..120,
        locs in 2u64..10,
        seed in 0u64..1000,
        workers in 2usize..5,
        p in 0.2f64..1.0,
    ) {
        let pop = generate_random_population(n, locs, seed);
        let one = EngineOptions { seed, contact_probability: p, ..Default::default() };
        let many = EngineOptions { num_workers: workers, ..one };
        let a = simulate(&pop, "visit_drop_observed", 2e-5, 3, 25, one);
        let b = simulate(&pop, "visit_drop_observed", 2e-5, 3, 25, many);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn counts_are_conserved_and_transmissions_follow_contacts(
        n in 20usize..150,
        locs in 2u64..10,
        seed in 0u64..1000,
    ) {
        let pop = generate_random_population(n, locs, seed);
        let out = simulate(&pop, "base", 3e-5, 4, 40, EngineOptions { seed, ..Default::default() });
        let starts = states_at_start(&out);
        for (k, s) in out.steps.iter().enumerate() {
            prop_assert_eq!(s.global.counts.iter().sum::<u64>(), n as u64);
            prop_assert_eq!(s.iteration, k as i64);
            let day = k % 7;
            for r in s.transitions.iter().filter(|r| r.p2_pid.is_some()) {
                let infector = r.p2_pid.unwrap();
                prop_assert_eq!(starts[k][&r.p1_pid], HealthState::S);
                prop_assert!(matches!(starts[k][&infector], HealthState::Is | HealthState::Ia));
                prop_assert!(overlapped(&pop, r.p1_pid, infector, day));
            }
        }
    }

    #[test]
    fn zero_contact_probability_blocks_transmission(n in 10usize..80, seed in 0u64..100) {
        let pop = generate_random_population(n, 5, seed);
        let opts = EngineOptions { seed, contact_probability: 0.0, ..Default::default() };
        let out = simulate(&pop, "base", 1e-3, 3, 20, opts);
        prop_assert!(out.transitions().all(|r| r.p2_pid.is_none()));
        prop_assert!(out.steps.iter().all(|s| s.contacts == 0));
    }
}

#[test]
fn runs_are_reproducible_and_seed_sensitive() {
    let pop = generate_random_population(300, 15, 3);
    let opts = EngineOptions { seed: 3, ..Default::default() };
    let a = simulate(&pop, "mask_distancing_random", 1e-5, 5, 30, opts);
    let b = simulate(&pop, "mask_distancing_random", 1e-5, 5, 30, opts);
    assert_eq!(a, b);
    let c = simulate(&pop, "mask_distancing_random", 1e-5, 5, 30, EngineOptions { seed: 4, ..opts });
    assert_ne!(a.steps.last().unwrap().actions, c.steps.last().unwrap().actions);
}

#[test]
fn infector_counts_match_exposures() {
    let pop = generate_random_population(500, 25, 8);
    let out = simulate(&pop, "base", 5e-6, 10, 60, EngineOptions { seed: 8, ..Default::default() });
    let with_infector = out.transitions().filter(|r| r.p2_pid.is_some()).count();
    let into_e = out.transitions().filter(|r| r.state == HealthState::E).count();
    assert_eq!(with_infector, into_e - 10);
    assert!(with_infector > 0);
}

#[test]
fn attack_rate_matches_final_recovered_after_burnout() {
    let pop = generate_random_population(400, 20, 12);
    let out = simulate(&pop, "base", 5e-6, 5, 200, EngineOptions { seed: 12, ..Default::default() });
    let last = out.final_counts().unwrap();
    assert_eq!(last[HealthState::E.index()] + last[HealthState::Is.index()] + last[HealthState::Ia.index()], 0);
    let recovered = last[HealthState::R.index()] as f64 / 400.0;
    assert!((out.attack_rate() - recovered).abs() < 1e-12);
}

#[test]
fn too_many_exposed_is_reported() {
    let pop = generate_random_population(10, 2, 1);
    let d = default_seir_model(0.0);
    assert_eq!(
        initialize(&pop, &d, 11, 1).unwrap_err(),
        EngineError::TooManyExposed { requested: 11, population: 10 }
    );

    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.csv");
    let v = dir.path().join("v.csv");
    write_persons(&p, pop.persons()).unwrap();
    write_visits(&v, &pop).unwrap();
    let mut cfg = Config::new(p, v, dir.path().join("out"));
    cfg.initial_exposed = 11;
    assert!(matches!(run_config(&cfg, false), Err(RunError::Engine(EngineError::TooManyExposed { .. }))));
}

#[test]
fn streaming_and_batch_writers_agree() {
    let dir = tempfile::tempdir().unwrap();
    let pop = generate_random_population(150, 8, 21);
    let p = dir.path().join("p.csv");
    let v = dir.path().join("v.csv");
    write_persons(&p, pop.persons()).unwrap();
    write_visits(&v, &pop).unwrap();

    let mut cfg = Config::new(p, v, dir.path().join("streamed"));
    cfg.iterations = 15;
    cfg.initial_exposed = 4;
    cfg.tau = 2e-5;
    cfg.seed = 21;
    cfg.behavior_model.name = "visit_drop_mandated_random".into();
    let streamed = run_config(&cfg, false).unwrap();

    let out = simulate(&pop, "visit_drop_mandated_random", 2e-5, 4, 15, EngineOptions { seed: 21, ..Default::default() });
    let batch = write_outputs(&out, &dir.path().join("batch"), true).unwrap();
    for (a, b) in streamed.files.all().iter().zip(batch.all()) {
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap(), "{}", a.display());
    }
    assert!((streamed.attack_rate - out.attack_rate()).abs() < 1e-15);
}

#[test]
fn disabling_local_observables_leaves_a_header_only_file() {
    let dir = tempfile::tempdir().unwrap();
    let pop = generate_random_population(40, 4, 2);
    let opts = EngineOptions { seed: 2, record_local_observables: false, ..Default::default() };
    let out = simulate(&pop, "base", 1e-5, 2, 5, opts);
    let files = write_outputs(&out, dir.path(), false).unwrap();
    let text = std::fs::read_to_string(files.local_observables).unwrap();
    assert_eq!(text.lines().count(), 1);
}

#[test]
fn local_observables_track_latest_visit_per_type() {
    let pop = generate_random_population(120, 6, 17);
    let out = simulate(&pop, "base", 0.0, 0, 3, EngineOptions { seed: 17, ..Default::default() });
    for s in &out.steps {
        let day = s.iteration as usize % 7;
        for (i, slots) in s.local.iter().enumerate() {
            for o in slots {
                let latest = pop
                    .day_visits(i, day)
                    .iter()
                    .filter(|v| v.activity_type == o.activity_type)
                    .max_by_key(|v| v.start_time);
                match latest {
                    Some(v) => {
                        assert_eq!(o.obs_step, s.iteration);
                        assert_eq!(o.lid, v.lid);
                        assert!(o.n_total >= 1);
                    }
                    None => assert!(o.obs_step < s.iteration),
                }
            }
        }
    }
}
