//! Time-stepped simulation driver.
//!
//! One step is one day. Phases per step:
//!
//! 1. every person selects an action; β multipliers follow from it
//! 2. the weekday's visits are remapped by the actions
//! 3. per location, in parallel over location partitions: contacts,
//!    observable snapshots, Gillespie transmission draws
//! 4. candidates are merged per susceptible person and one infector chosen
//! 5. transmissions, then due progressions, are applied at the end of the step
//! 6. observables and the global row are recorded
//!
//! All randomness comes from keyed streams, and every merge sorts by person
//! and location ids, so results do not depend on the number of workers.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::behavior::{
    action_scales, apply_action_to_day, observable_slot, unobserved_slots, Action,
    BehaviorContext, BehaviorModel, GlobalObservables, LocalObservable, ScaleFactors,
};
use crate::disease::{
    sample_location_transmission, sample_progression, select_cumulative, transmission_triples,
    ContactTerm, DiseaseModel, HealthState, ScheduledTransition, SusceptibleVisitor,
    TransmissionCandidate,
};
use crate::population::{ActivityType, Population, DAYS_PER_WEEK};
use crate::rng::{stream, Purpose};

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("initial_exposed = {requested} exceeds the population size {population}")]
    TooManyExposed { requested: u64, population: usize },
    #[error("cannot start worker pool: {0}")]
    WorkerPool(String),
}

/// One line of the health-state trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransitionRecord {
    /// `-1` for initialization.
    pub iteration: i64,
    pub state: HealthState,
    pub p1_pid: u64,
    /// Infector for transmissions, `None` for progression and initialization.
    pub p2_pid: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineOptions {
    pub num_workers: usize,
    pub contact_probability: f64,
    pub seed: u64,
    pub scales: ScaleFactors,
    /// Keep a copy of every person's local observables in each [`StepRecord`].
    pub record_local_observables: bool,
    /// Log the propensity of every applicable transmission triple.
    pub trace_propensities: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            num_workers: 1,
            contact_probability: 1.0,
            seed: 0,
            scales: ScaleFactors::default(),
            record_local_observables: true,
            trace_propensities: false,
        }
    }
}

/// A visit after action remapping, as seen by the location workers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EffectiveVisit {
    pub person: usize,
    pub pid: u64,
    pub lid: u64,
    pub activity_type: ActivityType,
    pub start: u32,
    pub end: u32,
}

impl EffectiveVisit {
    fn sort_key(&self) -> (u32, u64, u32, u8) {
        (self.start, self.pid, self.end, self.activity_type.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub person_a: usize,
    pub person_b: usize,
    pub pid_a: u64,
    pub pid_b: u64,
    pub lid: u64,
    pub day: usize,
    /// Overlap in seconds, always positive.
    pub duration: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropensityRecord {
    pub iteration: i64,
    pub susceptible_pid: u64,
    pub infector_pid: u64,
    pub lid: u64,
    pub exit: HealthState,
    pub propensity: f64,
}

/// Location to worker assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub num_workers: usize,
    pub assignment: HashMap<u64, usize>,
}

impl Partition {
    pub fn worker_of(&self, lid: u64) -> usize {
        self.assignment
            .get(&lid)
            .copied()
            .unwrap_or_else(|| (crate::rng::splitmix(lid) % self.num_workers as u64) as usize)
    }

    pub fn loads(&self, loads: &BTreeMap<u64, u64>) -> Vec<u64> {
        let mut out = vec![0; self.num_workers];
        for (lid, l) in loads {
            out[self.worker_of(*lid)] += l;
        }
        out
    }
}

/// Greedy longest-processing-time assignment of locations to workers,
/// heaviest first, ties broken by lid and then by worker index.
pub fn partition_locations(loads: &BTreeMap<u64, u64>, num_workers: usize) -> Partition {
    let num_workers = num_workers.max(1);
    let mut order: Vec<(u64, u64)> = loads.iter().map(|(&l, &w)| (l, w)).collect();
    order.sort_by_key(|&(lid, w)| (Reverse(w), lid));
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> =
        (0..num_workers).map(|w| Reverse((0, w))).collect();
    let mut assignment = HashMap::with_capacity(order.len());
    for (lid, w) in order {
        let Reverse((load, worker)) = heap.pop().expect("at least one worker");
        assignment.insert(lid, worker);
        heap.push(Reverse((load + w, worker)));
    }
    Partition {
        num_workers,
        assignment,
    }
}

/// All overlapping visit pairs at one location, each kept with probability
/// `contact_probability`. `visits` must be sorted by start time. One
/// Bernoulli is drawn per overlapping pair, in (first, second) sorted order.
pub fn compute_contacts(
    lid: u64,
    day: usize,
    visits: &[EffectiveVisit],
    contact_probability: f64,
    rng: &mut crate::rng::KeyedRng,
) -> Vec<Contact> {
    debug_assert!(visits.windows(2).all(|w| w[0].start <= w[1].start));
    let mut out = Vec::new();
    for (i, a) in visits.iter().enumerate() {
        for b in &visits[i + 1..] {
            if b.start >= a.end {
                break;
            }
            let overlap = a.end.min(b.end).saturating_sub(b.start);
            if overlap == 0 || a.person == b.person {
                continue;
            }
            if rng.bernoulli(contact_probability) {
                out.push(Contact {
                    person_a: a.person,
                    person_b: b.person,
                    pid_a: a.pid,
                    pid_b: b.pid,
                    lid,
                    day,
                    duration: overlap,
                });
            }
        }
    }
    out
}

/// Snapshot at the start of each visit: everyone `u` with
/// `u.start <= v.start < u.end`, plus `v` itself when it has zero length.
/// Output is aligned with `visits`, which must be sorted by start time.
pub fn snapshot_observables(
    step: i64,
    lid: u64,
    visits: &[EffectiveVisit],
    states: &[HealthState],
    actions: &[Action],
) -> Vec<LocalObservable> {
    #[derive(Default, Clone, Copy)]
    struct Counts {
        n: u32,
        symp: u32,
        mask: u32,
        dist: u32,
    }
    impl Counts {
        fn apply(&mut self, person: usize, states: &[HealthState], actions: &[Action], sign: i32) {
            let d = |flag: bool| if flag { sign } else { 0 };
            let add = |x: &mut u32, by: i32| *x = (*x as i32 + by) as u32;
            add(&mut self.n, sign);
            add(&mut self.symp, d(states[person] == HealthState::Is));
            add(&mut self.mask, d(actions[person].mask));
            add(&mut self.dist, d(actions[person].distancing));
        }
    }

    let mut out = Vec::with_capacity(visits.len());
    let mut active: BinaryHeap<Reverse<(u32, usize)>> = BinaryHeap::new();
    let mut counts = Counts::default();
    let mut i = 0;
    while i < visits.len() {
        let s = visits[i].start;
        while let Some(&Reverse((end, k))) = active.peek() {
            if end > s {
                break;
            }
            active.pop();
            counts.apply(visits[k].person, states, actions, -1);
        }
        let mut j = i;
        while j < visits.len() && visits[j].start == s {
            if visits[j].end > s {
                active.push(Reverse((visits[j].end, j)));
                counts.apply(visits[j].person, states, actions, 1);
            }
            j += 1;
        }
        for v in &visits[i..j] {
            let mut c = counts;
            if v.end == v.start {
                c.apply(v.person, states, actions, 1);
            }
            out.push(LocalObservable::from_counts(
                step,
                v.pid,
                lid,
                v.activity_type,
                c.n,
                c.symp,
                c.mask,
                c.dist,
            ));
        }
        i = j;
    }
    out
}

/// Per-person simulation state.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState {
    /// The step about to be executed.
    pub step: i64,
    pub states: Vec<HealthState>,
    pub scheduled: Vec<Option<ScheduledTransition>>,
    pub susceptibility_scale: Vec<f64>,
    pub infectivity_scale: Vec<f64>,
    pub local: Vec<[LocalObservable; 7]>,
    pub global_history: Vec<GlobalObservables>,
}

impl SimulationState {
    pub fn counts(&self) -> [u64; 5] {
        let mut c = [0u64; 5];
        for s in &self.states {
            c[s.index()] += 1;
        }
        c
    }
}

/// Output of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub iteration: i64,
    /// Dense person order.
    pub actions: Vec<Action>,
    /// Sorted by pid; a person may appear more than once when a zero dwell cascades.
    pub transitions: Vec<TransitionRecord>,
    /// Dense person order; empty unless recording is enabled.
    pub local: Vec<[LocalObservable; 7]>,
    pub global: GlobalObservables,
    pub propensities: Vec<PropensityRecord>,
    pub contacts: usize,
}

#[allow(clippy::too_many_arguments)]
fn enter_state(
    person: usize,
    pid: u64,
    target: HealthState,
    infector: Option<u64>,
    step: i64,
    seed: u64,
    disease: &DiseaseModel,
    st: &mut SimulationState,
    entries: &mut HashMap<usize, u64>,
    log: &mut Vec<TransitionRecord>,
) {
    let mut next = Some((target, infector));
    while let Some((state, by)) = next.take() {
        st.states[person] = state;
        log.push(TransitionRecord {
            iteration: step,
            state,
            p1_pid: pid,
            p2_pid: by,
        });
        let k = entries.entry(person).or_insert(0);
        let mut rng = stream(seed, Purpose::Progression, step, pid, *k);
        *k += 1;
        st.scheduled[person] = sample_progression(state, disease, &mut rng, step);
        if let Some(s) = st.scheduled[person] {
            if s.due_step <= step {
                st.scheduled[person] = None;
                next = Some((s.target, None));
            }
        }
    }
}

/// Seeds `initial_exposed` uniformly chosen persons into E; everyone else is S.
pub fn initialize(
    population: &Population,
    disease: &DiseaseModel,
    initial_exposed: u64,
    seed: u64,
) -> Result<(SimulationState, Vec<TransitionRecord>), EngineError> {
    let n = population.len();
    if initial_exposed > n as u64 {
        return Err(EngineError::TooManyExposed {
            requested: initial_exposed,
            population: n,
        });
    }
    let mut st = SimulationState {
        step: 0,
        states: vec![HealthState::S; n],
        scheduled: vec![None; n],
        susceptibility_scale: vec![1.0; n],
        infectivity_scale: vec![1.0; n],
        local: population
            .persons()
            .iter()
            .map(|p| unobserved_slots(p.pid))
            .collect(),
        global_history: Vec::new(),
    };
    let mut rng = stream(seed, Purpose::Initialization, -1, 0, 0);
    let mut chosen = rand::seq::index::sample(&mut rng, n, initial_exposed as usize).into_vec();
    chosen.sort_unstable();
    let mut log = Vec::with_capacity(chosen.len());
    let mut entries = HashMap::new();
    for i in chosen {
        let pid = population.persons()[i].pid;
        enter_state(i, pid, HealthState::E, None, -1, seed, disease, &mut st, &mut entries, &mut log);
    }
    log.sort_by_key(|r| r.p1_pid);
    Ok((st, log))
}

struct LocationBatch {
    candidates: Vec<TransmissionCandidate>,
    snapshots: Vec<(usize, u32, usize, LocalObservable)>,
    propensities: Vec<PropensityRecord>,
    contacts: usize,
}

pub struct Simulation<'a> {
    population: &'a Population,
    disease: &'a DiseaseModel,
    behavior: &'a dyn BehaviorModel,
    options: EngineOptions,
    partition: Partition,
    pool: Option<rayon::ThreadPool>,
    state: SimulationState,
    model_classes: Vec<i64>,
    init_log: Vec<TransitionRecord>,
}

impl<'a> Simulation<'a> {
    pub fn new(
        population: &'a Population,
        disease: &'a DiseaseModel,
        behavior: &'a dyn BehaviorModel,
        initial_exposed: u64,
        options: EngineOptions,
    ) -> Result<Self, EngineError> {
        let (state, init_log) = initialize(population, disease, initial_exposed, options.seed)?;
        let partition = partition_locations(&population.location_loads(), options.num_workers);
        let pool = if options.num_workers > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(options.num_workers)
                    .build()
                    .map_err(|e| EngineError::WorkerPool(e.to_string()))?,
            )
        } else {
            None
        };
        let model_classes = population
            .persons()
            .iter()
            .map(|p| behavior.assign_class(p))
            .collect();
        Ok(Self {
            population,
            disease,
            behavior,
            options,
            partition,
            pool,
            state,
            model_classes,
            init_log,
        })
    }

    pub fn state(&self) -> &SimulationState {
        &self.state
    }

    /// Direct access for seeding scenarios, e.g. starting someone infectious.
    /// Keep `states` and `scheduled` consistent when editing.
    pub fn state_mut(&mut self) -> &mut SimulationState {
        &mut self.state
    }

    pub fn model_classes(&self) -> &[i64] {
        &self.model_classes
    }

    pub fn initial_transitions(&self) -> &[TransitionRecord] {
        &self.init_log
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    fn select_actions(&self) -> Vec<Action> {
        let t = self.state.step;
        let weekday = t.rem_euclid(DAYS_PER_WEEK as i64) as usize;
        let current = GlobalObservables::from_states(t, &self.state.states);
        let pick = |i: usize| {
            let person = &self.population.persons()[i];
            let ctx = BehaviorContext {
                time_step: t,
                weekday,
                person,
                state: self.state.states[i],
                local: &self.state.local[i],
                global_history: &self.state.global_history,
                current_global: &current,
                model_class: self.model_classes[i],
                day_visits: self.population.day_visits(i, weekday),
            };
            let mut rng = stream(self.options.seed, Purpose::Behavior, t, person.pid, 0);
            self.behavior.select_action(&ctx, &mut rng)
        };
        let n = self.population.len();
        match &self.pool {
            None => (0..n).map(pick).collect(),
            Some(pool) => pool.install(|| (0..n).into_par_iter().map(pick).collect()),
        }
    }

    /// Remapped visits bucketed by worker, then by location; each list sorted.
    fn bucket_visits(&self, actions: &[Action], weekday: usize) -> Vec<Vec<(u64, Vec<EffectiveVisit>)>> {
        let mut by_lid: HashMap<u64, Vec<EffectiveVisit>> = HashMap::new();
        for (i, person) in self.population.persons().iter().enumerate() {
            let day = self.population.day_visits(i, weekday);
            for v in apply_action_to_day(&actions[i], person, day) {
                if v.activity_type == ActivityType::Transit {
                    continue;
                }
                by_lid.entry(v.lid).or_default().push(EffectiveVisit {
                    person: i,
                    pid: v.pid,
                    lid: v.lid,
                    activity_type: v.activity_type,
                    start: v.start_time,
                    end: v.end_time,
                });
            }
        }
        let mut parts: Vec<Vec<(u64, Vec<EffectiveVisit>)>> =
            vec![Vec::new(); self.partition.num_workers];
        for (lid, mut list) in by_lid {
            list.sort_by_key(EffectiveVisit::sort_key);
            parts[self.partition.worker_of(lid)].push((lid, list));
        }
        parts
    }

    fn process_location(&self, lid: u64, weekday: usize, visits: &[EffectiveVisit], actions: &[Action]) -> LocationBatch {
        let t = self.state.step;
        let seed = self.options.seed;
        let mut crng = stream(seed, Purpose::Contact, t, lid, 0);
        let contacts = compute_contacts(lid, weekday, visits, self.options.contact_probability, &mut crng);
        let snaps = snapshot_observables(t, lid, visits, &self.state.states, actions);
        let snapshots = visits
            .iter()
            .zip(snaps)
            .filter_map(|(v, o)| observable_slot(v.activity_type).map(|slot| (v.person, v.start, slot, o)))
            .collect();

        // susceptible person -> other person -> summed overlap
        let mut exposure: BTreeMap<usize, BTreeMap<usize, u64>> = BTreeMap::new();
        for c in &contacts {
            for (me, other) in [(c.person_a, c.person_b), (c.person_b, c.person_a)] {
                if self.disease.is_susceptible_state(self.state.states[me]) {
                    *exposure.entry(me).or_default().entry(other).or_default() += u64::from(c.duration);
                }
            }
        }

        let weight = self.population.location_weight(lid);
        let persons = self.population.persons();
        let mut candidates = Vec::new();
        let mut propensities = Vec::new();
        for (me, others) in exposure {
            let sus = SusceptibleVisitor {
                index: me,
                pid: persons[me].pid,
                state: self.state.states[me],
                susceptibility_scale: self.state.susceptibility_scale[me],
            };
            let terms: Vec<ContactTerm> = others
                .into_iter()
                .map(|(o, secs)| ContactTerm {
                    index: o,
                    pid: persons[o].pid,
                    state: self.state.states[o],
                    infectivity_scale: self.state.infectivity_scale[o],
                    duration_secs: secs as f64,
                })
                .collect();
            if self.options.trace_propensities {
                for tr in transmission_triples(&sus, weight, &terms, self.disease) {
                    propensities.push(PropensityRecord {
                        iteration: t,
                        susceptible_pid: sus.pid,
                        infector_pid: terms[tr.contact].pid,
                        lid,
                        exit: tr.exit,
                        propensity: tr.propensity,
                    });
                }
            }
            let mut rng = stream(seed, Purpose::Transmission, t, sus.pid, lid);
            if let Some(c) = sample_location_transmission(&sus, lid, weight, &terms, self.disease, &mut rng) {
                candidates.push(c);
            }
        }
        LocationBatch {
            candidates,
            snapshots,
            propensities,
            contacts: contacts.len(),
        }
    }

    fn process_partition(&self, part: &[(u64, Vec<EffectiveVisit>)], weekday: usize, actions: &[Action]) -> LocationBatch {
        let mut out = LocationBatch {
            candidates: Vec::new(),
            snapshots: Vec::new(),
            propensities: Vec::new(),
            contacts: 0,
        };
        for (lid, visits) in part {
            let b = self.process_location(*lid, weekday, visits, actions);
            out.candidates.extend(b.candidates);
            out.snapshots.extend(b.snapshots);
            out.propensities.extend(b.propensities);
            out.contacts += b.contacts;
        }
        out
    }

    /// One infector per susceptible person, drawn proportionally to the
    /// per-location candidate propensities.
    fn merge_candidates(&self, mut candidates: Vec<TransmissionCandidate>) -> Vec<TransmissionCandidate> {
        candidates.sort_by(|a, b| {
            (a.susceptible_pid, a.lid).cmp(&(b.susceptible_pid, b.lid))
        });
        let mut chosen = Vec::new();
        for group in candidates.chunk_by(|a, b| a.susceptible_pid == b.susceptible_pid) {
            if group.len() == 1 {
                chosen.push(group[0]);
                continue;
            }
            let pid = group[0].susceptible_pid;
            let mut rng = stream(self.options.seed, Purpose::InfectorMerge, self.state.step, pid, 0);
            let total: f64 = group.iter().map(|c| c.propensity).sum();
            let alpha = rng.uniform_open_closed() * total;
            let k = select_cumulative(group.iter().map(|c| c.propensity), alpha).unwrap_or(0);
            chosen.push(group[k]);
        }
        chosen
    }

    /// Executes the current step and advances the clock.
    pub fn step(&mut self) -> StepRecord {
        let t = self.state.step;
        let weekday = t.rem_euclid(DAYS_PER_WEEK as i64) as usize;
        let clock = Instant::now();

        let actions = self.select_actions();
        for (i, a) in actions.iter().enumerate() {
            let (susc, inf) = action_scales(a, &self.options.scales);
            self.state.susceptibility_scale[i] = susc;
            self.state.infectivity_scale[i] = inf;
        }
        let t_actions = clock.elapsed();

        let parts = self.bucket_visits(&actions, weekday);
        let t_remap = clock.elapsed();

        let batches: Vec<LocationBatch> = match &self.pool {
            None => parts
                .iter()
                .map(|p| self.process_partition(p, weekday, &actions))
                .collect(),
            Some(pool) => pool.install(|| {
                parts
                    .par_iter()
                    .map(|p| self.process_partition(p, weekday, &actions))
                    .collect()
            }),
        };
        let t_locations = clock.elapsed();

        let mut candidates = Vec::new();
        let mut snapshots = Vec::new();
        let mut propensities = Vec::new();
        let mut contacts = 0;
        for b in batches {
            candidates.extend(b.candidates);
            snapshots.extend(b.snapshots);
            propensities.extend(b.propensities);
            contacts += b.contacts;
        }
        let infections = self.merge_candidates(candidates);

        let n = self.population.len();
        let persons = self.population.persons();
        let mut log = Vec::new();
        let mut entries = HashMap::new();
        let mut just_infected = vec![false; n];
        for c in &infections {
            just_infected[c.susceptible] = true;
            self.state.scheduled[c.susceptible] = None;
            enter_state(
                c.susceptible,
                c.susceptible_pid,
                c.exit,
                Some(c.infector_pid),
                t,
                self.options.seed,
                self.disease,
                &mut self.state,
                &mut entries,
                &mut log,
            );
        }
        for i in 0..n {
            if just_infected[i] {
                continue;
            }
            if let Some(s) = self.state.scheduled[i] {
                debug_assert!(s.due_step >= t, "missed progression");
                if s.due_step <= t {
                    self.state.scheduled[i] = None;
                    enter_state(
                        i,
                        persons[i].pid,
                        s.target,
                        None,
                        t,
                        self.options.seed,
                        self.disease,
                        &mut self.state,
                        &mut entries,
                        &mut log,
                    );
                }
            }
        }
        log.sort_by_key(|r| r.p1_pid);

        // Latest snapshot per (person, activity type) wins.
        snapshots.sort_by_key(|&(person, start, slot, _)| (person, slot, start));
        for (person, _, slot, obs) in snapshots {
            self.state.local[person][slot] = obs;
        }
        let global = GlobalObservables::from_states(t, &self.state.states);
        self.state.global_history.push(global);
        propensities.sort_by(|a: &PropensityRecord, b| {
            (a.susceptible_pid, a.lid, a.infector_pid).cmp(&(b.susceptible_pid, b.lid, b.infector_pid))
        });
        let t_apply = clock.elapsed();
        log::debug!(
            "step {t}: actions {:?}, remap {:?}, locations {:?}, merge+apply {:?}; {contacts} contacts, {} infections",
            t_actions,
            t_remap - t_actions,
            t_locations - t_remap,
            t_apply - t_locations,
            infections.len()
        );

        self.state.step += 1;
        StepRecord {
            iteration: t,
            actions,
            transitions: log,
            local: if self.options.record_local_observables {
                self.state.local.clone()
            } else {
                Vec::new()
            },
            global,
            propensities,
            contacts,
        }
    }
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutputs {
    pub pids: Vec<u64>,
    pub model_classes: Vec<i64>,
    pub initial_transitions: Vec<TransitionRecord>,
    pub steps: Vec<StepRecord>,
}

impl SimulationOutputs {
    pub fn population_size(&self) -> usize {
        self.pids.len()
    }

    pub fn transitions(&self) -> impl Iterator<Item = &TransitionRecord> {
        self.initial_transitions
            .iter()
            .chain(self.steps.iter().flat_map(|s| s.transitions.iter()))
    }

    pub fn global_history(&self) -> impl Iterator<Item = &GlobalObservables> {
        self.steps.iter().map(|s| &s.global)
    }

    /// Fraction of persons that ever left S.
    pub fn attack_rate(&self) -> f64 {
        if self.pids.is_empty() {
            return 0.0;
        }
        let mut left: std::collections::HashSet<u64> = std::collections::HashSet::new();
        for r in self.transitions() {
            if r.state != HealthState::S {
                left.insert(r.p1_pid);
            }
        }
        left.len() as f64 / self.pids.len() as f64
    }

    pub fn final_counts(&self) -> Option<[u64; 5]> {
        self.steps.last().map(|s| s.global.counts)
    }
}

/// Initializes and runs `iterations` steps, keeping everything in memory.
pub fn run(
    population: &Population,
    disease: &DiseaseModel,
    behavior: &dyn BehaviorModel,
    initial_exposed: u64,
    iterations: u32,
    options: EngineOptions,
) -> Result<SimulationOutputs, EngineError> {
    let mut sim = Simulation::new(population, disease, behavior, initial_exposed, options)?;
    let steps = (0..iterations).map(|_| sim.step()).collect();
    Ok(SimulationOutputs {
        pids: population.persons().iter().map(|p| p.pid).collect(),
        model_classes: sim.model_classes().to_vec(),
        initial_transitions: sim.initial_transitions().to_vec(),
        steps,
    })
}
