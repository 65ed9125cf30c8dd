//! Extended SEIR disease model and its stochastic kernels.
//!
//! Transmission at a location is sampled with the direct Gillespie method
//! over all `(infector, exit state, contact state)` triples a susceptible
//! person is exposed to there. Progression is sampled on entry to a state:
//! the next state from the edge probabilities, then an integer dwell time.

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::KeyedRng;

#[derive(Debug, Error, PartialEq)]
pub enum DiseaseError {
    #[error("outgoing probabilities of state {state} sum to {sum}, expected 1")]
    ProbabilitySum { state: HealthState, sum: f64 },
    #[error("{what} must be non-negative, got {value}")]
    Negative { what: String, value: f64 },
    #[error("invalid dwell distribution on edge {from}->{to}: {reason}")]
    BadDwell {
        from: HealthState,
        to: HealthState,
        reason: String,
    },
    #[error("unknown health state '{0}'")]
    UnknownState(String),
}

/// Health states. The integer codes are what every output file carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HealthState {
    S = 0,
    E = 1,
    Is = 2,
    Ia = 3,
    R = 4,
}

impl HealthState {
    pub const ALL: [HealthState; 5] = [
        HealthState::S,
        HealthState::E,
        HealthState::Is,
        HealthState::Ia,
        HealthState::R,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            HealthState::S => "S",
            HealthState::E => "E",
            HealthState::Is => "Is",
            HealthState::Ia => "Ia",
            HealthState::R => "R",
        }
    }
}

impl fmt::Display for HealthState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HealthState {
    type Err = DiseaseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|h| h.name() == s)
            .ok_or_else(|| DiseaseError::UnknownState(s.to_string()))
    }
}

/// Dwell-time distribution, in days (simulation steps).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DwellSpec {
    Fixed { days: f64 },
    DiscretizedGamma { shape: f64, scale: f64 },
}

impl DwellSpec {
    fn check(&self) -> Result<(), String> {
        match *self {
            DwellSpec::Fixed { days } if !(days >= 0.0) => Err(format!("fixed dwell {days} < 0")),
            DwellSpec::DiscretizedGamma { shape, scale } if !(shape > 0.0 && scale > 0.0) => Err(
                format!("gamma needs shape > 0 and scale > 0, got shape={shape} scale={scale}"),
            ),
            _ => Ok(()),
        }
    }

    /// Integer number of steps: nearest integer (halves away from zero), floored at 0.
    pub fn sample(&self, rng: &mut KeyedRng) -> i64 {
        let raw = match *self {
            DwellSpec::Fixed { days } => days,
            DwellSpec::DiscretizedGamma { shape, scale } => Gamma::new(shape, scale)
                .expect("validated gamma parameters")
                .sample(rng),
        };
        round_dwell(raw)
    }
}

/// Nearest integer with halves away from zero, clamped at 0.
pub fn round_dwell(raw: f64) -> i64 {
    let r = raw.round();
    if r.is_nan() || r < 0.0 {
        0
    } else {
        r as i64
    }
}

/// `(entry, exit, contact)` with weight ω.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissionConfiguration {
    pub entry: HealthState,
    pub exit: HealthState,
    pub contact: HealthState,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProgressionEdge {
    pub from: HealthState,
    pub to: HealthState,
    pub probability: f64,
    pub dwell: DwellSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiseaseModel {
    /// ι per state, indexed by state code.
    pub infectivity: [f64; 5],
    /// σ per state, indexed by state code.
    pub susceptibility: [f64; 5],
    /// τ, per second of overlap per step.
    pub tau: f64,
    transmissions: Vec<TransmissionConfiguration>,
    edges: Vec<ProgressionEdge>,
    /// Duration of one step in step units; `a <= step_duration` decides transmission.
    pub step_duration: f64,
}

impl DiseaseModel {
    pub fn new(
        infectivity: [f64; 5],
        susceptibility: [f64; 5],
        tau: f64,
        mut transmissions: Vec<TransmissionConfiguration>,
        edges: Vec<ProgressionEdge>,
    ) -> Result<Self, DiseaseError> {
        for s in HealthState::ALL {
            for (what, v) in [
                ("iota", infectivity[s.index()]),
                ("sigma", susceptibility[s.index()]),
            ] {
                if !(v >= 0.0) {
                    return Err(DiseaseError::Negative {
                        what: format!("{what}({s})"),
                        value: v,
                    });
                }
            }
        }
        if !(tau >= 0.0) {
            return Err(DiseaseError::Negative {
                what: "tau".into(),
                value: tau,
            });
        }
        for c in &transmissions {
            if !(c.weight >= 0.0) {
                return Err(DiseaseError::Negative {
                    what: format!("weight({},{},{})", c.entry, c.exit, c.contact),
                    value: c.weight,
                });
            }
        }
        for e in &edges {
            if !(e.probability >= 0.0) {
                return Err(DiseaseError::Negative {
                    what: format!("probability({}->{})", e.from, e.to),
                    value: e.probability,
                });
            }
            e.dwell.check().map_err(|reason| DiseaseError::BadDwell {
                from: e.from,
                to: e.to,
                reason,
            })?;
        }
        for s in HealthState::ALL {
            let out: Vec<_> = edges.iter().filter(|e| e.from == s).collect();
            if out.is_empty() {
                continue;
            }
            let sum: f64 = out.iter().map(|e| e.probability).sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(DiseaseError::ProbabilitySum { state: s, sum });
            }
        }
        // Triples are enumerated in (exit, contact) order for each infector.
        transmissions.sort_by_key(|c| (c.entry, c.exit, c.contact));
        Ok(Self {
            infectivity,
            susceptibility,
            tau,
            transmissions,
            edges,
            step_duration: 1.0,
        })
    }

    pub fn transmissions(&self) -> &[TransmissionConfiguration] {
        &self.transmissions
    }

    pub fn edges(&self) -> &[ProgressionEdge] {
        &self.edges
    }

    pub fn outgoing(&self, state: HealthState) -> impl Iterator<Item = &ProgressionEdge> {
        self.edges.iter().filter(move |e| e.from == state)
    }

    /// True when some transmission configuration has `state` as entry.
    pub fn is_susceptible_state(&self, state: HealthState) -> bool {
        self.transmissions.iter().any(|c| c.entry == state)
    }

    /// True when some transmission configuration has `state` as contact.
    pub fn is_infectious_state(&self, state: HealthState) -> bool {
        self.transmissions.iter().any(|c| c.contact == state)
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }
}

pub const DEFAULT_E_TO_IS: f64 = 0.67;
pub const DEFAULT_E_TO_IA: f64 = 0.33;

pub fn default_incubation_dwell() -> DwellSpec {
    DwellSpec::DiscretizedGamma {
        shape: 2.0,
        scale: 2.5,
    }
}

pub fn default_infectious_dwell() -> DwellSpec {
    DwellSpec::DiscretizedGamma {
        shape: 4.0,
        scale: 2.0,
    }
}

pub fn default_infectivity() -> [f64; 5] {
    [0.0, 0.0, 1.0, 1.0, 0.0]
}

pub fn default_susceptibility() -> [f64; 5] {
    [1.0, 0.0, 0.0, 0.0, 0.0]
}

pub fn default_transmissions() -> Vec<TransmissionConfiguration> {
    use HealthState::*;
    vec![
        TransmissionConfiguration {
            entry: S,
            exit: E,
            contact: Is,
            weight: 1.0,
        },
        TransmissionConfiguration {
            entry: S,
            exit: E,
            contact: Ia,
            weight: 1.0,
        },
    ]
}

pub fn default_edges() -> Vec<ProgressionEdge> {
    use HealthState::*;
    vec![
        ProgressionEdge {
            from: E,
            to: Is,
            probability: DEFAULT_E_TO_IS,
            dwell: default_incubation_dwell(),
        },
        ProgressionEdge {
            from: E,
            to: Ia,
            probability: DEFAULT_E_TO_IA,
            dwell: default_incubation_dwell(),
        },
        ProgressionEdge {
            from: Is,
            to: R,
            probability: 1.0,
            dwell: default_infectious_dwell(),
        },
        ProgressionEdge {
            from: Ia,
            to: R,
            probability: 1.0,
            dwell: default_infectious_dwell(),
        },
    ]
}

/// The S, E, Is, Ia, R model with unit ι on Is/Ia and unit σ on S.
pub fn default_seir_model(tau: f64) -> DiseaseModel {
    DiseaseModel::new(
        default_infectivity(),
        default_susceptibility(),
        tau,
        default_transmissions(),
        default_edges(),
    )
    .expect("default model is valid")
}

/// σ_p(X) = β_σ(p)·σ(X)
pub fn effective_susceptibility(model: &DiseaseModel, scale: f64, state: HealthState) -> f64 {
    scale * model.susceptibility[state.index()]
}

/// ι_p(X) = β_ι(p)·ι(X)
pub fn effective_infectivity(model: &DiseaseModel, scale: f64, state: HealthState) -> f64 {
    scale * model.infectivity[state.index()]
}

/// ρ = [T·τ]·w·σ_eff·ι_eff·ω
pub fn propensity(
    duration_secs: f64,
    tau: f64,
    location_weight: f64,
    susceptibility_eff: f64,
    infectivity_eff: f64,
    weight: f64,
) -> f64 {
    (duration_secs * tau) * location_weight * susceptibility_eff * infectivity_eff * weight
}

/// The susceptible side of a location-level transmission draw.
#[derive(Debug, Clone, Copy)]
pub struct SusceptibleVisitor {
    pub index: usize,
    pub pid: u64,
    pub state: HealthState,
    pub susceptibility_scale: f64,
}

/// One person the susceptible was in contact with at the location, with the
/// total overlap over the day.
#[derive(Debug, Clone, Copy)]
pub struct ContactTerm {
    pub index: usize,
    pub pid: u64,
    pub state: HealthState,
    pub infectivity_scale: f64,
    pub duration_secs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmissionCandidate {
    pub susceptible: usize,
    pub susceptible_pid: u64,
    pub infector: usize,
    pub infector_pid: u64,
    pub exit: HealthState,
    pub lid: u64,
    pub propensity: f64,
}

/// One applicable triple with its propensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripleTerm {
    /// Position in the contact slice.
    pub contact: usize,
    pub exit: HealthState,
    pub contact_state: HealthState,
    pub propensity: f64,
}

/// All applicable triples in well-order: contacts in slice order, then
/// configurations in (exit, contact) order.
pub fn transmission_triples(
    susceptible: &SusceptibleVisitor,
    location_weight: f64,
    contacts: &[ContactTerm],
    model: &DiseaseModel,
) -> Vec<TripleTerm> {
    let sigma = effective_susceptibility(model, susceptible.susceptibility_scale, susceptible.state);
    let mut out = Vec::new();
    for (ci, c) in contacts.iter().enumerate() {
        for cfg in model
            .transmissions
            .iter()
            .filter(|cfg| cfg.entry == susceptible.state && cfg.contact == c.state)
        {
            let iota = effective_infectivity(model, c.infectivity_scale, c.state);
            out.push(TripleTerm {
                contact: ci,
                exit: cfg.exit,
                contact_state: c.state,
                propensity: propensity(
                    c.duration_secs,
                    model.tau,
                    location_weight,
                    sigma,
                    iota,
                    cfg.weight,
                ),
            });
        }
    }
    out
}

/// Direct Gillespie draw for one susceptible person at one location.
///
/// Draws `a = -ln(u)/A` and, when `a <= step_duration`, picks the triple
/// whose cumulative propensity first reaches `α ∈ (0, A]`. Two uniforms are
/// consumed whenever `contacts` is non-empty, whatever the outcome.
pub fn sample_location_transmission(
    susceptible: &SusceptibleVisitor,
    lid: u64,
    location_weight: f64,
    contacts: &[ContactTerm],
    model: &DiseaseModel,
    rng: &mut KeyedRng,
) -> Option<TransmissionCandidate> {
    if contacts.is_empty() {
        return None;
    }
    let u_wait = rng.uniform_open_closed();
    let u_pick = rng.uniform();

    let triples = transmission_triples(susceptible, location_weight, contacts, model);
    let total: f64 = triples.iter().map(|t| t.propensity).sum();
    if !(total > 0.0) {
        return None;
    }
    let wait = -u_wait.ln() / total;
    if wait > model.step_duration {
        return None;
    }
    let alpha = (1.0 - u_pick) * total;
    let chosen = select_cumulative(triples.iter().map(|t| t.propensity), alpha)?;
    let t = triples[chosen];
    let c = contacts[t.contact];
    Some(TransmissionCandidate {
        susceptible: susceptible.index,
        susceptible_pid: susceptible.pid,
        infector: c.index,
        infector_pid: c.pid,
        exit: t.exit,
        lid,
        propensity: t.propensity,
    })
}

/// Index κ with `Σ_{<κ} w < alpha <= Σ_{≤κ} w`, for `alpha` in `(0, Σ w]`.
/// Rounding at the top end falls back to the last positive weight.
pub fn select_cumulative(weights: impl Iterator<Item = f64>, alpha: f64) -> Option<usize> {
    let mut acc = 0.0;
    let mut last_positive = None;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            last_positive = Some(i);
            acc += w;
            if alpha <= acc {
                return Some(i);
            }
        }
    }
    last_positive
}

/// A progression fixed on entry to a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduledTransition {
    pub target: HealthState,
    /// The transition fires at the end of this step.
    pub due_step: i64,
}

/// Next state by cumulative probability in edge declaration order, then the dwell.
pub fn sample_progression(
    state: HealthState,
    model: &DiseaseModel,
    rng: &mut KeyedRng,
    current_step: i64,
) -> Option<ScheduledTransition> {
    let edges: Vec<&ProgressionEdge> = model.outgoing(state).collect();
    if edges.is_empty() {
        return None;
    }
    let u = rng.uniform();
    let mut acc = 0.0;
    let mut chosen = edges[edges.len() - 1];
    for e in &edges {
        acc += e.probability;
        if u < acc {
            chosen = e;
            break;
        }
    }
    let dwell = chosen.dwell.sample(rng);
    Some(ScheduledTransition {
        target: chosen.to,
        due_step: current_step + dwell,
    })
}
