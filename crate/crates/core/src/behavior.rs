//! Daily protective actions and the models that choose them.
//!
//! At the start of every step each person picks an [`Action`]: mask,
//! distancing, and six "stay home instead" flags, one per droppable activity
//! type. Models see a read-only [`BehaviorContext`] and a keyed random stream
//! and must not keep state between calls.

use std::collections::BTreeMap;

use serde_json::Value;
use thiserror::Error;

use crate::disease::HealthState;
use crate::population::{ActivityType, Person, Visit};
use crate::rng::{hash_str, stream, KeyedRng, Purpose};

#[derive(Debug, Error, PartialEq)]
pub enum BehaviorError {
    #[error("unknown behavior model '{0}'")]
    UnknownModel(String),
    #[error("bad parameter '{name}' for model '{model}': {reason}")]
    BadParameter {
        model: String,
        name: String,
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Action {
    pub mask: bool,
    pub distancing: bool,
    pub no_other: bool,
    pub no_college: bool,
    pub no_shopping: bool,
    pub no_religion: bool,
    pub no_school: bool,
    pub no_work: bool,
}

impl Action {
    pub const COLUMNS: [&'static str; 8] = [
        "mask",
        "distancing",
        "no_other",
        "no_college",
        "no_shopping",
        "no_religion",
        "no_school",
        "no_work",
    ];

    pub fn bits(&self) -> [bool; 8] {
        [
            self.mask,
            self.distancing,
            self.no_other,
            self.no_college,
            self.no_shopping,
            self.no_religion,
            self.no_school,
            self.no_work,
        ]
    }

    pub fn from_bits(b: [bool; 8]) -> Self {
        Self {
            mask: b[0],
            distancing: b[1],
            no_other: b[2],
            no_college: b[3],
            no_shopping: b[4],
            no_religion: b[5],
            no_school: b[6],
            no_work: b[7],
        }
    }

    /// Whether visits of this type are replaced by staying home. Home and
    /// transit are never dropped.
    pub fn drops(&self, t: ActivityType) -> bool {
        match t {
            ActivityType::Other => self.no_other,
            ActivityType::College => self.no_college,
            ActivityType::Shopping => self.no_shopping,
            ActivityType::Religion => self.no_religion,
            ActivityType::School => self.no_school,
            ActivityType::Work => self.no_work,
            ActivityType::Home | ActivityType::Transit => false,
        }
    }

    pub fn set_drop(&mut self, t: ActivityType, value: bool) {
        match t {
            ActivityType::Other => self.no_other = value,
            ActivityType::College => self.no_college = value,
            ActivityType::Shopping => self.no_shopping = value,
            ActivityType::Religion => self.no_religion = value,
            ActivityType::School => self.no_school = value,
            ActivityType::Work => self.no_work = value,
            ActivityType::Home | ActivityType::Transit => {}
        }
    }
}

/// Activity types with a local-observable slot, in slot order.
pub const OBSERVED_TYPES: [ActivityType; 7] = [
    ActivityType::Home,
    ActivityType::Work,
    ActivityType::Shopping,
    ActivityType::Other,
    ActivityType::School,
    ActivityType::College,
    ActivityType::Religion,
];

pub fn observable_slot(t: ActivityType) -> Option<usize> {
    OBSERVED_TYPES.iter().position(|&o| o == t)
}

/// Snapshot taken at the start of a visit. `obs_step == -1` means never observed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalObservable {
    pub obs_step: i64,
    pub pid: u64,
    pub lid: u64,
    pub activity_type: ActivityType,
    pub n_total: u32,
    pub symp_abs: u32,
    pub symp_rel: f64,
    pub mask_abs: u32,
    pub mask_rel: f64,
    pub distancing_abs: u32,
    pub distancing_rel: f64,
}

impl LocalObservable {
    pub fn unobserved(pid: u64, activity_type: ActivityType) -> Self {
        Self {
            obs_step: -1,
            pid,
            lid: 0,
            activity_type,
            n_total: 0,
            symp_abs: 0,
            symp_rel: 0.0,
            mask_abs: 0,
            mask_rel: 0.0,
            distancing_abs: 0,
            distancing_rel: 0.0,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_counts(
        obs_step: i64,
        pid: u64,
        lid: u64,
        activity_type: ActivityType,
        n_total: u32,
        symp_abs: u32,
        mask_abs: u32,
        distancing_abs: u32,
    ) -> Self {
        let rel = |x: u32| stored_ratio(u64::from(x), u64::from(n_total));
        Self {
            obs_step,
            pid,
            lid,
            activity_type,
            n_total,
            symp_abs,
            symp_rel: rel(symp_abs),
            mask_abs,
            mask_rel: rel(mask_abs),
            distancing_abs,
            distancing_rel: rel(distancing_abs),
        }
    }

    pub fn is_observed(&self) -> bool {
        self.obs_step >= 0
    }
}

pub fn unobserved_slots(pid: u64) -> [LocalObservable; 7] {
    OBSERVED_TYPES.map(|t| LocalObservable::unobserved(pid, t))
}

/// `num / den` stored at single precision, the way observable ratios are
/// recorded in the output files; `0.0` when `den` is zero.
pub fn stored_ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        return 0.0;
    }
    f64::from((num as f64 / den as f64) as f32)
}

/// Population-wide counts and fractions per health state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalObservables {
    pub iteration: i64,
    pub counts: [u64; 5],
    pub fractions: [f64; 5],
}

impl GlobalObservables {
    pub fn from_counts(iteration: i64, counts: [u64; 5]) -> Self {
        let n: u64 = counts.iter().sum();
        let fractions = counts.map(|c| stored_ratio(c, n));
        Self {
            iteration,
            counts,
            fractions,
        }
    }

    pub fn from_states(iteration: i64, states: &[HealthState]) -> Self {
        let mut counts = [0u64; 5];
        for s in states {
            counts[s.index()] += 1;
        }
        Self::from_counts(iteration, counts)
    }

    pub fn count(&self, s: HealthState) -> u64 {
        self.counts[s.index()]
    }

    pub fn fraction(&self, s: HealthState) -> f64 {
        self.fractions[s.index()]
    }
}

/// Everything a model may look at when choosing a person's action.
#[derive(Debug, Clone, Copy)]
pub struct BehaviorContext<'a> {
    pub time_step: i64,
    /// Monday is 0.
    pub weekday: usize,
    pub person: &'a Person,
    pub state: HealthState,
    /// One slot per entry of [`OBSERVED_TYPES`].
    pub local: &'a [LocalObservable; 7],
    /// Rows of completed steps, `0..time_step`.
    pub global_history: &'a [GlobalObservables],
    /// Counts at the start of this step.
    pub current_global: &'a GlobalObservables,
    pub model_class: i64,
    /// The person's baseline visits for today.
    pub day_visits: &'a [Visit],
}

impl BehaviorContext<'_> {
    pub fn observable(&self, t: ActivityType) -> Option<&LocalObservable> {
        observable_slot(t).map(|i| &self.local[i])
    }
}

pub trait BehaviorModel: Send + Sync {
    fn name(&self) -> &str;

    /// Integer class per person, written to the model class file and passed back in the context.
    fn assign_class(&self, person: &Person) -> i64;

    /// Must depend only on the context and the stream.
    fn select_action(&self, ctx: &BehaviorContext<'_>, rng: &mut KeyedRng) -> Action;
}

/// Multipliers applied to β_σ and β_ι by mask and distancing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleFactors {
    pub mask_inf: f64,
    pub mask_susc: f64,
    pub distancing_inf: f64,
    pub distancing_susc: f64,
}

pub const DEFAULT_SCALE: f64 = 0.8;

impl Default for ScaleFactors {
    fn default() -> Self {
        Self {
            mask_inf: DEFAULT_SCALE,
            mask_susc: DEFAULT_SCALE,
            distancing_inf: DEFAULT_SCALE,
            distancing_susc: DEFAULT_SCALE,
        }
    }
}

/// `(susceptibility multiplier, infectivity multiplier)` for one step.
pub fn action_scales(action: &Action, scales: &ScaleFactors) -> (f64, f64) {
    let mut susc = 1.0;
    let mut inf = 1.0;
    if action.mask {
        susc *= scales.mask_susc;
        inf *= scales.mask_inf;
    }
    if action.distancing {
        susc *= scales.distancing_susc;
        inf *= scales.distancing_inf;
    }
    (susc, inf)
}

/// Dropped visits keep their interval and type but move to the residence.
pub fn apply_action_to_day(action: &Action, person: &Person, visits: &[Visit]) -> Vec<Visit> {
    visits
        .iter()
        .map(|v| {
            if action.drops(v.activity_type) {
                Visit {
                    lid: person.residence_lid,
                    ..*v
                }
            } else {
                *v
            }
        })
        .collect()
}

pub const BUILTIN_MODELS: [&str; 7] = [
    "default",
    "base",
    "mask_distancing_random",
    "mask_distancing_fixed",
    "visit_drop_mandated_random",
    "visit_drop_mandated_fixed",
    "visit_drop_observed",
];

pub const DEFAULT_MASK_FRACTION: f64 = 0.70;
pub const DEFAULT_DROP_FRACTION: f64 = 0.75;
pub const DEFAULT_START_DAY: i64 = 8;
pub const DEFAULT_INCOME_THRESHOLD: f64 = 100_000.0;
pub const DEFAULT_WINDOW_DAYS: i64 = 7;

/// Activity types dropped by the mandated and observation-driven models.
const NON_ESSENTIAL: [ActivityType; 5] = [
    ActivityType::Other,
    ActivityType::College,
    ActivityType::Shopping,
    ActivityType::Religion,
    ActivityType::School,
];

#[derive(Debug, Clone, Copy, PartialEq)]
struct Params {
    fraction: f64,
    start_day: i64,
    income_threshold: f64,
    window_days: i64,
}

fn parse_params(
    model: &str,
    default_fraction: f64,
    raw: &BTreeMap<String, Value>,
) -> Result<Params, BehaviorError> {
    let bad = |name: &str, reason: String| BehaviorError::BadParameter {
        model: model.to_string(),
        name: name.to_string(),
        reason,
    };
    let mut p = Params {
        fraction: default_fraction,
        start_day: DEFAULT_START_DAY,
        income_threshold: DEFAULT_INCOME_THRESHOLD,
        window_days: DEFAULT_WINDOW_DAYS,
    };
    for (k, v) in raw {
        match k.as_str() {
            "fraction" => {
                let f = v.as_f64().ok_or_else(|| bad(k, "expected a number".into()))?;
                if !(0.0..=1.0).contains(&f) {
                    return Err(bad(k, format!("{f} not in [0, 1]")));
                }
                p.fraction = f;
            }
            "start_day" => {
                let d = v.as_i64().ok_or_else(|| bad(k, "expected an integer".into()))?;
                if d < 0 {
                    return Err(bad(k, format!("{d} < 0")));
                }
                p.start_day = d;
            }
            "income_threshold" => {
                p.income_threshold = v.as_f64().ok_or_else(|| bad(k, "expected a number".into()))?;
            }
            "window_days" => {
                let d = v.as_i64().ok_or_else(|| bad(k, "expected an integer".into()))?;
                if d < 1 {
                    return Err(bad(k, format!("{d} < 1")));
                }
                p.window_days = d;
            }
            _ => return Err(bad(k, "unknown parameter".into())),
        }
    }
    Ok(p)
}

/// Builds a built-in model. `seed` is the run seed; fixed-membership models
/// derive membership from it.
pub fn builtin(
    identifier: &str,
    params: &BTreeMap<String, Value>,
    seed: u64,
) -> Result<Box<dyn BehaviorModel>, BehaviorError> {
    let model: Box<dyn BehaviorModel> = match identifier {
        "default" | "base" => {
            if let Some(k) = params.keys().next() {
                return Err(BehaviorError::BadParameter {
                    model: identifier.into(),
                    name: k.clone(),
                    reason: "model takes no parameters".into(),
                });
            }
            Box::new(NoAction {
                name: identifier.to_string(),
            })
        }
        "mask_distancing_random" | "mask_distancing_fixed" => {
            let p = parse_params(identifier, DEFAULT_MASK_FRACTION, params)?;
            Box::new(MaskDistancing {
                name: identifier.to_string(),
                fixed: identifier.ends_with("fixed"),
                fraction: p.fraction,
                seed,
            })
        }
        "visit_drop_mandated_random" | "visit_drop_mandated_fixed" => {
            let p = parse_params(identifier, DEFAULT_DROP_FRACTION, params)?;
            Box::new(VisitDropMandated {
                name: identifier.to_string(),
                fixed: identifier.ends_with("fixed"),
                fraction: p.fraction,
                start_day: p.start_day,
                income_threshold: p.income_threshold,
                seed,
            })
        }
        "visit_drop_observed" => {
            let p = parse_params(identifier, DEFAULT_DROP_FRACTION, params)?;
            Box::new(VisitDropObserved {
                income_threshold: p.income_threshold,
                window_days: p.window_days,
            })
        }
        other => return Err(BehaviorError::UnknownModel(other.to_string())),
    };
    Ok(model)
}

/// Membership in a "fixed random subset": a keyed draw per (seed, model, pid).
pub fn fixed_member(seed: u64, model: &str, pid: u64, fraction: f64) -> bool {
    stream(seed, Purpose::Membership, 0, hash_str(model), pid).uniform() < fraction
}

/// Nobody does anything.
#[derive(Debug)]
struct NoAction {
    name: String,
}

impl BehaviorModel for NoAction {
    fn name(&self) -> &str {
        &self.name
    }

    fn assign_class(&self, _person: &Person) -> i64 {
        0
    }

    fn select_action(&self, _ctx: &BehaviorContext<'_>, _rng: &mut KeyedRng) -> Action {
        Action::default()
    }
}

#[derive(Debug)]
struct MaskDistancing {
    name: String,
    fixed: bool,
    fraction: f64,
    seed: u64,
}

impl BehaviorModel for MaskDistancing {
    fn name(&self) -> &str {
        &self.name
    }

    fn assign_class(&self, person: &Person) -> i64 {
        i64::from(self.fixed && fixed_member(self.seed, &self.name, person.pid, self.fraction))
    }

    fn select_action(&self, ctx: &BehaviorContext<'_>, rng: &mut KeyedRng) -> Action {
        let on = if self.fixed {
            ctx.model_class & 1 == 1
        } else {
            rng.bernoulli(self.fraction)
        };
        Action {
            mask: on,
            distancing: on,
            ..Action::default()
        }
    }
}

#[derive(Debug)]
struct VisitDropMandated {
    name: String,
    fixed: bool,
    fraction: f64,
    start_day: i64,
    income_threshold: f64,
    seed: u64,
}

impl BehaviorModel for VisitDropMandated {
    fn name(&self) -> &str {
        &self.name
    }

    /// Bit 0: member of the fixed subset. Bit 1: income at or above the threshold.
    fn assign_class(&self, person: &Person) -> i64 {
        let member = self.fixed && fixed_member(self.seed, &self.name, person.pid, self.fraction);
        let wealthy = person.hh_income as f64 >= self.income_threshold;
        i64::from(member) | (i64::from(wealthy) << 1)
    }

    fn select_action(&self, ctx: &BehaviorContext<'_>, rng: &mut KeyedRng) -> Action {
        let mut a = Action::default();
        if ctx.time_step < self.start_day {
            return a;
        }
        let member = if self.fixed {
            ctx.model_class & 1 == 1
        } else {
            rng.bernoulli(self.fraction)
        };
        if member {
            for t in NON_ESSENTIAL {
                a.set_drop(t, true);
            }
        }
        a.no_work = ctx.person.hh_income as f64 >= self.income_threshold;
        a
    }
}

#[derive(Debug)]
struct VisitDropObserved {
    income_threshold: f64,
    window_days: i64,
}

impl VisitDropObserved {
    fn alarming(&self, obs: &LocalObservable, now: i64) -> bool {
        obs.is_observed() && now - obs.obs_step < self.window_days && obs.symp_abs >= 1
    }
}

impl BehaviorModel for VisitDropObserved {
    fn name(&self) -> &str {
        "visit_drop_observed"
    }

    fn assign_class(&self, person: &Person) -> i64 {
        i64::from(person.hh_income as f64 >= self.income_threshold) << 1
    }

    fn select_action(&self, ctx: &BehaviorContext<'_>, _rng: &mut KeyedRng) -> Action {
        let mut a = Action::default();
        for t in NON_ESSENTIAL {
            if let Some(obs) = ctx.observable(t) {
                a.set_drop(t, self.alarming(obs, ctx.time_step));
            }
        }
        if ctx.person.hh_income as f64 >= self.income_threshold {
            if let Some(obs) = ctx.observable(ActivityType::Work) {
                a.no_work = self.alarming(obs, ctx.time_step);
            }
        }
        a
    }
}
