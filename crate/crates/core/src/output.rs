//! CSV output files.
//!
//! [`OutputWriter`] appends rows as steps complete; [`write_outputs`] feeds a
//! finished run through the same writer, so both produce identical bytes.
//! Reals are printed in shortest round-trip form with Python-style exponents
//! (`4.86393146275077e-05`, `0.0`).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::behavior::{Action, GlobalObservables, LocalObservable, OBSERVED_TYPES};
use crate::disease::HealthState;
use crate::engine::{SimulationOutputs, StepRecord, TransitionRecord};
use crate::population::ActivityType;

pub const MODEL_CLASS_FILE: &str = "model_class.csv";
pub const LOCAL_OBSERVABLES_FILE: &str = "local_observables.csv";
pub const GLOBAL_OBSERVABLES_FILE: &str = "global_observables.csv";
pub const ACTIONS_FILE: &str = "actions.csv";
pub const TRANSITIONS_FILE: &str = "transitions.csv";
pub const EPICURVE_FILE: &str = "epicurve.csv";
pub const EPICURVE_SVG_FILE: &str = "epicurve.svg";

pub const MODEL_CLASS_HEADER: &str = "index,pid,model_class";
pub const LOCAL_OBSERVABLES_HEADER: &str = "iteration,obs_iteration,pid,lid,activity_type,n_total,symp_abs,symp_rel,mask_abs,mask_rel,distancing_abs,distancing_rel";
pub const GLOBAL_OBSERVABLES_HEADER: &str =
    "iteration,S_abs,S_rel,E_abs,E_rel,Is_abs,Is_rel,Ia_abs,Ia_rel,R_abs,R_rel";
pub const ACTIONS_HEADER: &str =
    "iteration,pid,mask,distancing,no_other,no_college,no_shopping,no_religion,no_school,no_work";
pub const TRANSITIONS_HEADER: &str = "iteration,state,p1_pid,p2_pid";
pub const EPICURVE_HEADER: &str = "iteration,S,E,Is,Ia,R";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Shortest round-trip decimal, as Python's `repr(float)` prints it.
pub fn format_real(x: f64) -> String {
    let s = format!("{x:?}");
    match s.split_once('e') {
        None => s,
        Some((mantissa, exp)) => {
            let (sign, digits) = match exp.strip_prefix('-') {
                Some(d) => ('-', d),
                None => ('+', exp),
            };
            format!("{mantissa}e{sign}{digits:0>2}")
        }
    }
}

pub fn transition_row(r: &TransitionRecord) -> String {
    let p2 = r.p2_pid.map_or("-1".to_string(), |p| p.to_string());
    format!("{},{},{},{}", r.iteration, r.state.code(), r.p1_pid, p2)
}

pub fn global_row(g: &GlobalObservables) -> String {
    let mut s = g.iteration.to_string();
    for i in 0..5 {
        s.push(',');
        s.push_str(&g.counts[i].to_string());
        s.push(',');
        s.push_str(&format_real(g.fractions[i]));
    }
    s
}

pub fn action_row(iteration: i64, pid: u64, a: &Action) -> String {
    let mut s = format!("{iteration},{pid}");
    for b in a.bits() {
        s.push_str(if b { ",1" } else { ",0" });
    }
    s
}

/// Never-observed slots print `obs_iteration` 0 at iteration 0 and -1 afterwards.
pub fn local_row(iteration: i64, o: &LocalObservable) -> String {
    let obs = if o.is_observed() {
        o.obs_step
    } else if iteration == 0 {
        0
    } else {
        -1
    };
    format!(
        "{iteration},{obs},{},{},{},{},{},{},{},{},{},{}",
        o.pid,
        o.lid,
        o.activity_type.code(),
        o.n_total,
        o.symp_abs,
        format_real(o.symp_rel),
        o.mask_abs,
        format_real(o.mask_rel),
        o.distancing_abs,
        format_real(o.distancing_rel)
    )
}

pub fn epicurve_row(g: &GlobalObservables) -> String {
    let c = g.counts;
    format!("{},{},{},{},{},{}", g.iteration, c[0], c[1], c[2], c[3], c[4])
}

struct Sink {
    path: PathBuf,
    out: BufWriter<File>,
}

impl Sink {
    fn create(path: PathBuf, header: &str) -> Result<Self, OutputError> {
        let f = File::create(&path).map_err(io_err(&path))?;
        let mut s = Self {
            path,
            out: BufWriter::new(f),
        };
        s.line(header)?;
        Ok(s)
    }

    fn line(&mut self, row: &str) -> Result<(), OutputError> {
        writeln!(self.out, "{row}").map_err(io_err(&self.path))
    }

    fn finish(mut self) -> Result<PathBuf, OutputError> {
        self.out.flush().map_err(io_err(&self.path))?;
        Ok(self.path)
    }
}

/// Paths of the files produced by a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFiles {
    pub model_class: PathBuf,
    pub local_observables: PathBuf,
    pub global_observables: PathBuf,
    pub actions: PathBuf,
    pub transitions: PathBuf,
    pub epicurve: PathBuf,
}

impl OutputFiles {
    pub fn in_directory(dir: &Path) -> Self {
        Self {
            model_class: dir.join(MODEL_CLASS_FILE),
            local_observables: dir.join(LOCAL_OBSERVABLES_FILE),
            global_observables: dir.join(GLOBAL_OBSERVABLES_FILE),
            actions: dir.join(ACTIONS_FILE),
            transitions: dir.join(TRANSITIONS_FILE),
            epicurve: dir.join(EPICURVE_FILE),
        }
    }

    pub fn all(&self) -> [&Path; 6] {
        [
            &self.model_class,
            &self.local_observables,
            &self.global_observables,
            &self.actions,
            &self.transitions,
            &self.epicurve,
        ]
    }
}

/// Appends rows step by step.
pub struct OutputWriter {
    files: OutputFiles,
    /// Dense indices in pid order.
    by_pid: Vec<usize>,
    pids: Vec<u64>,
    local: Option<Sink>,
    global: Sink,
    actions: Sink,
    transitions: Sink,
    history: Vec<GlobalObservables>,
}

impl OutputWriter {
    /// Creates the directory and all files, and writes the model class file.
    /// With `write_local_observables` off the local file holds only its header.
    pub fn create(
        dir: &Path,
        pids: &[u64],
        model_classes: &[i64],
        write_local_observables: bool,
    ) -> Result<Self, OutputError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let files = OutputFiles::in_directory(dir);
        let mut classes = Sink::create(files.model_class.clone(), MODEL_CLASS_HEADER)?;
        for (i, (pid, c)) in pids.iter().zip(model_classes).enumerate() {
            classes.line(&format!("{i},{pid},{c}"))?;
        }
        classes.finish()?;
        let mut local = Some(Sink::create(
            files.local_observables.clone(),
            LOCAL_OBSERVABLES_HEADER,
        )?);
        if !write_local_observables {
            local.take().unwrap().finish()?;
        }
        let mut by_pid: Vec<usize> = (0..pids.len()).collect();
        by_pid.sort_by_key(|&i| pids[i]);
        Ok(Self {
            global: Sink::create(files.global_observables.clone(), GLOBAL_OBSERVABLES_HEADER)?,
            actions: Sink::create(files.actions.clone(), ACTIONS_HEADER)?,
            transitions: Sink::create(files.transitions.clone(), TRANSITIONS_HEADER)?,
            files,
            by_pid,
            pids: pids.to_vec(),
            local,
            history: Vec::new(),
        })
    }

    pub fn write_transitions(&mut self, records: &[TransitionRecord]) -> Result<(), OutputError> {
        for r in records {
            self.transitions.line(&transition_row(r))?;
        }
        Ok(())
    }

    pub fn write_step(&mut self, step: &StepRecord) -> Result<(), OutputError> {
        let t = step.iteration;
        if let Some(local) = &mut self.local {
            if !step.local.is_empty() {
                for &i in &self.by_pid {
                    for o in &step.local[i] {
                        local.line(&local_row(t, o))?;
                    }
                }
            }
        }
        self.global.line(&global_row(&step.global))?;
        for &i in &self.by_pid {
            self.actions.line(&action_row(t, self.pids[i], &step.actions[i]))?;
        }
        self.write_transitions(&step.transitions)?;
        self.history.push(step.global);
        Ok(())
    }

    /// Flushes everything and writes the epicurve.
    pub fn finish(self) -> Result<OutputFiles, OutputError> {
        if let Some(local) = self.local {
            local.finish()?;
        }
        self.global.finish()?;
        self.actions.finish()?;
        self.transitions.finish()?;
        emit_epicurve(&self.history, &self.files.epicurve)?;
        Ok(self.files)
    }
}

pub fn write_outputs(
    outputs: &SimulationOutputs,
    dir: &Path,
    write_local_observables: bool,
) -> Result<OutputFiles, OutputError> {
    let mut w = OutputWriter::create(dir, &outputs.pids, &outputs.model_classes, write_local_observables)?;
    w.write_transitions(&outputs.initial_transitions)?;
    for s in &outputs.steps {
        w.write_step(s)?;
    }
    w.finish()
}

/// Writes per-iteration state counts.
pub fn emit_epicurve(history: &[GlobalObservables], path: &Path) -> Result<PathBuf, OutputError> {
    let mut s = Sink::create(path.to_path_buf(), EPICURVE_HEADER)?;
    for g in history {
        s.line(&epicurve_row(g))?;
    }
    s.finish()
}

/// Line chart of the five state counts over time.
pub fn render_epicurve_svg(history: &[GlobalObservables], path: &Path) -> Result<PathBuf, OutputError> {
    const W: f64 = 800.0;
    const H: f64 = 400.0;
    const PAD: f64 = 40.0;
    const COLORS: [&str; 5] = ["#1f77b4", "#ff7f0e", "#d62728", "#9467bd", "#2ca02c"];
    let n = history
        .first()
        .map_or(0, |g| g.counts.iter().sum::<u64>())
        .max(1) as f64;
    let span = (history.len().max(2) - 1) as f64;
    let x = |i: usize| PAD + (W - 2.0 * PAD) * i as f64 / span;
    let y = |c: u64| H - PAD - (H - 2.0 * PAD) * c as f64 / n;

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <line x1=\"{PAD}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{b}\" stroke=\"black\"/>\n",
        b = H - PAD,
        r = W - PAD
    );
    for (k, state) in HealthState::ALL.iter().enumerate() {
        let pts: Vec<String> = history
            .iter()
            .enumerate()
            .map(|(i, g)| format!("{:.1},{:.1}", x(i), y(g.counts[k])))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n",
            COLORS[k],
            pts.join(" ")
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" fill=\"{}\" font-size=\"12\">{}</text>\n",
            W - PAD + 4.0,
            PAD + 16.0 * k as f64,
            COLORS[k],
            state.name()
        ));
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg).map_err(io_err(path))?;
    Ok(path.to_path_buf())
}

fn open_rows(path: &Path, header: &str) -> Result<Vec<(u64, csv::StringRecord)>, OutputError> {
    let parse_err = |line: u64, message: String| OutputError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let f = File::open(path).map_err(io_err(path))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(f);
    let got = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if got != header {
        return Err(parse_err(1, format!("unexpected header {got:?}")));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec));
    }
    Ok(rows)
}

fn field<T: std::str::FromStr>(path: &Path, line: u64, rec: &csv::StringRecord, i: usize) -> Result<T, OutputError> {
    let raw = rec.get(i).unwrap_or_default();
    raw.parse().map_err(|_| OutputError::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("column {}: cannot parse {raw:?}", i + 1),
    })
}

pub fn read_transitions(path: &Path) -> Result<Vec<TransitionRecord>, OutputError> {
    open_rows(path, TRANSITIONS_HEADER)?
        .into_iter()
        .map(|(line, r)| {
            let code: u8 = field(path, line, &r, 1)?;
            let p2: i64 = field(path, line, &r, 3)?;
            Ok(TransitionRecord {
                iteration: field(path, line, &r, 0)?,
                state: HealthState::from_code(code).ok_or_else(|| OutputError::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("unknown state {code}"),
                })?,
                p1_pid: field(path, line, &r, 2)?,
                p2_pid: (p2 >= 0).then_some(p2 as u64),
            })
        })
        .collect()
}

pub fn read_global_observables(path: &Path) -> Result<Vec<GlobalObservables>, OutputError> {
    open_rows(path, GLOBAL_OBSERVABLES_HEADER)?
        .into_iter()
        .map(|(line, r)| {
            let mut counts = [0u64; 5];
            let mut fractions = [0f64; 5];
            for k in 0..5 {
                counts[k] = field(path, line, &r, 1 + 2 * k)?;
                fractions[k] = field(path, line, &r, 2 + 2 * k)?;
            }
            Ok(GlobalObservables {
                iteration: field(path, line, &r, 0)?,
                counts,
                fractions,
            })
        })
        .collect()
}

/// Rows of (iteration, pid, action).
pub fn read_actions(path: &Path) -> Result<Vec<(i64, u64, Action)>, OutputError> {
    open_rows(path, ACTIONS_HEADER)?
        .into_iter()
        .map(|(line, r)| {
            let mut bits = [false; 8];
            for (k, b) in bits.iter_mut().enumerate() {
                *b = field::<u8>(path, line, &r, 2 + k)? == 1;
            }
            Ok((field(path, line, &r, 0)?, field(path, line, &r, 1)?, Action::from_bits(bits)))
        })
        .collect()
}

/// Rows of (index, pid, model_class).
pub fn read_model_classes(path: &Path) -> Result<Vec<(usize, u64, i64)>, OutputError> {
    open_rows(path, MODEL_CLASS_HEADER)?
        .into_iter()
        .map(|(line, r)| Ok((field(path, line, &r, 0)?, field(path, line, &r, 1)?, field(path, line, &r, 2)?)))
        .collect()
}

/// Rows of (iteration, observable). Rows with `n_total == 0` come back unobserved.
pub fn read_local_observables(path: &Path) -> Result<Vec<(i64, LocalObservable)>, OutputError> {
    open_rows(path, LOCAL_OBSERVABLES_HEADER)?
        .into_iter()
        .map(|(line, r)| {
            let code: u8 = field(path, line, &r, 4)?;
            let activity_type = ActivityType::from_code(code)
                .filter(|t| OBSERVED_TYPES.contains(t))
                .ok_or_else(|| OutputError::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("activity type {code} has no observable"),
                })?;
            let n_total: u32 = field(path, line, &r, 5)?;
            let obs_step: i64 = field(path, line, &r, 1)?;
            Ok((
                field(path, line, &r, 0)?,
                LocalObservable {
                    obs_step: if n_total == 0 { -1 } else { obs_step },
                    pid: field(path, line, &r, 2)?,
                    lid: field(path, line, &r, 3)?,
                    activity_type,
                    n_total,
                    symp_abs: field(path, line, &r, 6)?,
                    symp_rel: field(path, line, &r, 7)?,
                    mask_abs: field(path, line, &r, 8)?,
                    mask_rel: field(path, line, &r, 9)?,
                    distancing_abs: field(path, line, &r, 10)?,
                    distancing_rel: field(path, line, &r, 11)?,
                },
            ))
        })
        .collect()
}

pub fn read_epicurve(path: &Path) -> Result<Vec<(i64, [u64; 5])>, OutputError> {
    open_rows(path, EPICURVE_HEADER)?
        .into_iter()
        .map(|(line, r)| {
            let mut c = [0u64; 5];
            for (k, v) in c.iter_mut().enumerate() {
                *v = field(path, line, &r, 1 + k)?;
            }
            Ok((field(path, line, &r, 0)?, c))
        })
        .collect()
}
