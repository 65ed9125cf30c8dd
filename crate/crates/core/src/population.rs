//! Synthetic population: persons, weekly visit schedules, locations.
//!
//! Person and visit CSV ingestion follows the fixed column layouts below.
//! Visit times are seconds within the day (`0..=86400`).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::rng::{stream, KeyedRng, Purpose};

pub const PERSON_HEADER: [&str; 18] = [
    "hid",
    "pid",
    "age",
    "sex",
    "employment_status",
    "race",
    "hispanic",
    "designation",
    "hh_size",
    "hh_income",
    "workers_in_family",
    "lid",
    "longitude",
    "latitude",
    "admin1",
    "admin2",
    "admin3",
    "admin4",
];

pub const VISIT_HEADER: [&str; 8] = [
    "daynum",
    "pid",
    "activity_number",
    "activity_type",
    "start_time",
    "end_time",
    "duration",
    "lid",
];

pub const SECONDS_PER_DAY: u32 = 86_400;
pub const DAYS_PER_WEEK: usize = 7;

#[derive(Debug, Error)]
pub enum PopulationError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: header mismatch, expected '{expected}', found '{found}'")]
    HeaderMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{path}:{line}: {message}")]
    RowParse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}:{line}: duplicate pid {pid}")]
    DuplicatePid { path: PathBuf, line: u64, pid: u64 },
    #[error("{path}:{line}: visit for unknown pid {pid}")]
    UnknownPid { path: PathBuf, line: u64, pid: u64 },
    #[error("{path}:{line}: end_time {end} before start_time {start}")]
    NegativeDuration {
        path: PathBuf,
        line: u64,
        start: u32,
        end: u32,
    },
    #[error("{path}:{line}: duration {duration} differs from end_time - start_time = {span}")]
    DurationMismatch {
        path: PathBuf,
        line: u64,
        duration: u32,
        span: u32,
    },
    #[error("{path}:{line}: household {hid} has residences {first} and {second}")]
    ResidenceMismatch {
        path: PathBuf,
        line: u64,
        hid: i64,
        first: u64,
        second: u64,
    },
    #[error("{path}:{line}: negative location weight {weight} for lid {lid}")]
    NegativeWeight {
        path: PathBuf,
        line: u64,
        lid: u64,
        weight: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ActivityType {
    Transit = 0,
    Home = 1,
    Work = 2,
    Shopping = 3,
    Other = 4,
    School = 5,
    College = 6,
    Religion = 7,
}

impl ActivityType {
    pub const ALL: [ActivityType; 8] = [
        ActivityType::Transit,
        ActivityType::Home,
        ActivityType::Work,
        ActivityType::Shopping,
        ActivityType::Other,
        ActivityType::School,
        ActivityType::College,
        ActivityType::Religion,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivityType::Transit => "transit",
            ActivityType::Home => "home",
            ActivityType::Work => "work",
            ActivityType::Shopping => "shopping",
            ActivityType::Other => "other",
            ActivityType::School => "school",
            ActivityType::College => "college",
            ActivityType::Religion => "religion",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sex {
    Male = 1,
    Female = 2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Person {
    pub hid: i64,
    pub pid: u64,
    pub age: u32,
    pub sex: Sex,
    pub employment_status: i64,
    pub race: i64,
    pub hispanic: bool,
    pub designation: String,
    pub hh_size: u32,
    pub hh_income: i64,
    pub workers_in_family: i64,
    pub residence_lid: u64,
    pub longitude: f64,
    pub latitude: f64,
    pub admin1: String,
    pub admin2: String,
    pub admin3: String,
    pub admin4: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Visit {
    pub daynum: u8,
    pub pid: u64,
    pub activity_number: i64,
    pub activity_type: ActivityType,
    pub start_time: u32,
    pub end_time: u32,
    pub duration: u32,
    pub lid: u64,
}

impl Visit {
    pub fn span(&self) -> u32 {
        self.end_time - self.start_time
    }
}

/// Persons, their weekly visits and the location set with weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    persons: Vec<Person>,
    index_by_pid: HashMap<u64, usize>,
    /// `[person][day]`, sorted by start time.
    schedules: Vec<[Vec<Visit>; DAYS_PER_WEEK]>,
    /// `[day]`: lid -> visits sorted by (start_time, pid).
    by_location: Vec<BTreeMap<u64, Vec<Visit>>>,
    locations: BTreeMap<u64, f64>,
}

impl Population {
    /// Builds the indexes. Visits must reference known pids.
    pub fn new(persons: Vec<Person>, visits: Vec<Visit>) -> Result<Self, String> {
        let mut index_by_pid = HashMap::with_capacity(persons.len());
        for (i, p) in persons.iter().enumerate() {
            if index_by_pid.insert(p.pid, i).is_some() {
                return Err(format!("duplicate pid {}", p.pid));
            }
        }
        let mut schedules: Vec<[Vec<Visit>; DAYS_PER_WEEK]> =
            (0..persons.len()).map(|_| Default::default()).collect();
        let mut by_location: Vec<BTreeMap<u64, Vec<Visit>>> = vec![BTreeMap::new(); DAYS_PER_WEEK];
        let mut locations: BTreeMap<u64, f64> = BTreeMap::new();
        for p in &persons {
            locations.insert(p.residence_lid, 1.0);
        }
        for v in visits {
            let &i = index_by_pid
                .get(&v.pid)
                .ok_or_else(|| format!("visit for unknown pid {}", v.pid))?;
            if v.daynum as usize >= DAYS_PER_WEEK {
                return Err(format!("daynum {} out of range", v.daynum));
            }
            locations.insert(v.lid, 1.0);
            schedules[i][v.daynum as usize].push(v);
            by_location[v.daynum as usize]
                .entry(v.lid)
                .or_default()
                .push(v);
        }
        for days in &mut schedules {
            for day in days.iter_mut() {
                day.sort_by_key(|v| (v.start_time, v.end_time, v.activity_number));
            }
        }
        for day in &mut by_location {
            for list in day.values_mut() {
                list.sort_by_key(|v| (v.start_time, v.pid));
            }
        }
        Ok(Self {
            persons,
            index_by_pid,
            schedules,
            by_location,
            locations,
        })
    }

    pub fn persons(&self) -> &[Person] {
        &self.persons
    }

    pub fn len(&self) -> usize {
        self.persons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.persons.is_empty()
    }

    pub fn index_of(&self, pid: u64) -> Option<usize> {
        self.index_by_pid.get(&pid).copied()
    }

    /// Visits of person `index` on `day`, sorted by start time.
    pub fn day_visits(&self, index: usize, day: usize) -> &[Visit] {
        &self.schedules[index][day]
    }

    /// Base visits at `lid` on `day`, sorted by (start_time, pid).
    pub fn location_visits(&self, day: usize, lid: u64) -> &[Visit] {
        self.by_location[day]
            .get(&lid)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn location_days(&self, day: usize) -> &BTreeMap<u64, Vec<Visit>> {
        &self.by_location[day]
    }

    /// All visits in (pid order of the person file, day, start) order.
    pub fn all_visits(&self) -> impl Iterator<Item = &Visit> {
        self.schedules.iter().flat_map(|d| d.iter().flatten())
    }

    pub fn locations(&self) -> &BTreeMap<u64, f64> {
        &self.locations
    }

    pub fn location_weight(&self, lid: u64) -> f64 {
        self.locations.get(&lid).copied().unwrap_or(1.0)
    }

    /// Overrides location weights; unknown lids are added to the location set.
    pub fn set_location_weights(&mut self, weights: &BTreeMap<u64, f64>) {
        for (&lid, &w) in weights {
            self.locations.insert(lid, w);
        }
    }

    /// Number of visits per location over the whole week.
    pub fn location_loads(&self) -> BTreeMap<u64, u64> {
        let mut loads: BTreeMap<u64, u64> = self.locations.keys().map(|&l| (l, 0)).collect();
        for day in &self.by_location {
            for (lid, list) in day {
                *loads.entry(*lid).or_default() += list.len() as u64;
            }
        }
        loads
    }
}

/// Describes every violated population invariant; empty when the population is well formed.
pub fn check_invariants(pop: &Population) -> Vec<String> {
    let mut problems = Vec::new();
    let mut residence_of: HashMap<i64, u64> = HashMap::new();
    for p in pop.persons() {
        if let Some(&r) = residence_of.get(&p.hid) {
            if r != p.residence_lid {
                problems.push(format!("household {} split over lids {r} and {}", p.hid, p.residence_lid));
            }
        } else {
            residence_of.insert(p.hid, p.residence_lid);
        }
        if p.hh_size < 1 {
            problems.push(format!("pid {} has hh_size 0", p.pid));
        }
        if !pop.locations().contains_key(&p.residence_lid) {
            problems.push(format!("residence {} of pid {} not a location", p.residence_lid, p.pid));
        }
    }
    for (i, p) in pop.persons().iter().enumerate() {
        for day in 0..DAYS_PER_WEEK {
            let visits = pop.day_visits(i, day);
            for v in visits {
                if v.pid != p.pid {
                    problems.push(format!("visit of pid {} filed under pid {}", v.pid, p.pid));
                }
                if v.end_time < v.start_time || v.duration != v.end_time - v.start_time {
                    problems.push(format!("pid {} day {day}: bad duration {:?}", p.pid, v));
                }
                if v.end_time > SECONDS_PER_DAY {
                    problems.push(format!("pid {} day {day}: visit ends after midnight", p.pid));
                }
                if !pop.locations().contains_key(&v.lid) {
                    problems.push(format!("lid {} unknown", v.lid));
                }
            }
            for w in visits.windows(2) {
                if w[1].start_time < w[0].start_time || w[1].start_time < w[0].end_time {
                    problems.push(format!("pid {} day {day}: overlapping visits", p.pid));
                }
            }
        }
    }
    for day in 0..DAYS_PER_WEEK {
        for list in pop.location_days(day).values() {
            for w in list.windows(2) {
                if (w[0].start_time, w[0].pid) > (w[1].start_time, w[1].pid) {
                    problems.push(format!("day {day}: location list out of order"));
                }
            }
        }
    }
    problems
}

#[derive(Debug, Deserialize)]
struct PersonRow {
    hid: i64,
    pid: u64,
    age: u32,
    sex: u8,
    employment_status: i64,
    race: i64,
    hispanic: u8,
    designation: String,
    hh_size: u32,
    hh_income: i64,
    workers_in_family: i64,
    lid: u64,
    longitude: f64,
    latitude: f64,
    admin1: String,
    admin2: String,
    admin3: String,
    admin4: String,
}

#[derive(Debug, Deserialize)]
struct VisitRow {
    daynum: u8,
    pid: u64,
    activity_number: i64,
    activity_type: u8,
    start_time: u32,
    end_time: u32,
    duration: u32,
    lid: u64,
}

fn open_reader(path: &Path, expected: &[&str]) -> Result<csv::Reader<File>, PopulationError> {
    let file = File::open(path).map_err(|source| PopulationError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = rdr.headers().map_err(|e| PopulationError::RowParse {
        path: path.to_path_buf(),
        line: 1,
        message: e.to_string(),
    })?;
    let found: Vec<&str> = headers.iter().collect();
    if found != expected {
        return Err(PopulationError::HeaderMismatch {
            path: path.to_path_buf(),
            expected: expected.join(","),
            found: found.join(","),
        });
    }
    Ok(rdr)
}

fn row_error(path: &Path, line: u64, e: impl ToString) -> PopulationError {
    PopulationError::RowParse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}

/// Reads the person file; row order is kept and becomes the dense person index.
pub fn load_persons(path: &Path) -> Result<Vec<Person>, PopulationError> {
    let mut rdr = open_reader(path, &PERSON_HEADER)?;
    let mut persons = Vec::new();
    let mut seen: HashMap<u64, ()> = HashMap::new();
    let mut residence_of: HashMap<i64, u64> = HashMap::new();
    let headers = rdr.headers().map_err(|e| row_error(path, 1, e))?.clone();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            row_error(path, line, e)
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row: PersonRow = record
            .deserialize(Some(&headers))
            .map_err(|e| row_error(path, line, e))?;
        let sex = match row.sex {
            1 => Sex::Male,
            2 => Sex::Female,
            other => return Err(row_error(path, line, format!("sex must be 1 or 2, got {other}"))),
        };
        let hispanic = match row.hispanic {
            0 => false,
            1 => true,
            other => {
                return Err(row_error(path, line, format!("hispanic must be 0 or 1, got {other}")))
            }
        };
        if row.hh_size < 1 {
            return Err(row_error(path, line, "hh_size must be at least 1"));
        }
        if seen.insert(row.pid, ()).is_some() {
            return Err(PopulationError::DuplicatePid {
                path: path.to_path_buf(),
                line,
                pid: row.pid,
            });
        }
        match residence_of.get(&row.hid) {
            Some(&first) if first != row.lid => {
                return Err(PopulationError::ResidenceMismatch {
                    path: path.to_path_buf(),
                    line,
                    hid: row.hid,
                    first,
                    second: row.lid,
                })
            }
            Some(_) => {}
            None => {
                residence_of.insert(row.hid, row.lid);
            }
        }
        persons.push(Person {
            hid: row.hid,
            pid: row.pid,
            age: row.age,
            sex,
            employment_status: row.employment_status,
            race: row.race,
            hispanic,
            designation: row.designation,
            hh_size: row.hh_size,
            hh_income: row.hh_income,
            workers_in_family: row.workers_in_family,
            residence_lid: row.lid,
            longitude: row.longitude,
            latitude: row.latitude,
            admin1: row.admin1,
            admin2: row.admin2,
            admin3: row.admin3,
            admin4: row.admin4,
        });
    }
    Ok(persons)
}

/// Reads the visit file against already loaded persons and builds the population.
pub fn load_visits(path: &Path, persons: Vec<Person>) -> Result<Population, PopulationError> {
    let mut rdr = open_reader(path, &VISIT_HEADER)?;
    let known: HashMap<u64, ()> = persons.iter().map(|p| (p.pid, ())).collect();
    let mut visits = Vec::new();
    let headers = rdr.headers().map_err(|e| row_error(path, 1, e))?.clone();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            row_error(path, line, e)
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row: VisitRow = record
            .deserialize(Some(&headers))
            .map_err(|e| row_error(path, line, e))?;
        if !known.contains_key(&row.pid) {
            return Err(PopulationError::UnknownPid {
                path: path.to_path_buf(),
                line,
                pid: row.pid,
            });
        }
        if row.daynum as usize >= DAYS_PER_WEEK {
            return Err(row_error(path, line, format!("daynum {} not in 0..=6", row.daynum)));
        }
        let activity_type = ActivityType::from_code(row.activity_type).ok_or_else(|| {
            row_error(path, line, format!("activity_type {} not in 0..=7", row.activity_type))
        })?;
        if row.end_time < row.start_time {
            return Err(PopulationError::NegativeDuration {
                path: path.to_path_buf(),
                line,
                start: row.start_time,
                end: row.end_time,
            });
        }
        let span = row.end_time - row.start_time;
        if row.duration != span {
            if row.duration.abs_diff(span) > 1 {
                return Err(PopulationError::DurationMismatch {
                    path: path.to_path_buf(),
                    line,
                    duration: row.duration,
                    span,
                });
            }
            log::warn!(
                "{}:{line}: duration {} differs from end-start {span} by 1s",
                path.display(),
                row.duration
            );
        }
        visits.push(Visit {
            daynum: row.daynum,
            pid: row.pid,
            activity_number: row.activity_number,
            activity_type,
            start_time: row.start_time,
            end_time: row.end_time,
            duration: row.duration,
            lid: row.lid,
        });
    }
    Population::new(persons, visits).map_err(|m| row_error(path, 0, m))
}

/// Optional `lid,weight` sidecar.
pub fn load_location_weights(path: &Path) -> Result<BTreeMap<u64, f64>, PopulationError> {
    #[derive(Deserialize)]
    struct Row {
        lid: u64,
        weight: f64,
    }
    let mut rdr = open_reader(path, &["lid", "weight"])?;
    let mut out = BTreeMap::new();
    for (i, r) in rdr.deserialize::<Row>().enumerate() {
        let line = i as u64 + 2;
        let r = r.map_err(|e| row_error(path, line, e))?;
        if !(r.weight >= 0.0) {
            return Err(PopulationError::NegativeWeight {
                path: path.to_path_buf(),
                line,
                lid: r.lid,
                weight: r.weight,
            });
        }
        out.insert(r.lid, r.weight);
    }
    Ok(out)
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> PopulationError + '_ {
    move |source| PopulationError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_io(path: &Path) -> impl Fn(csv::Error) -> PopulationError + '_ {
    move |e| PopulationError::Io {
        path: path.to_path_buf(),
        source: io::Error::other(e),
    }
}

pub fn write_persons(path: &Path, persons: &[Person]) -> Result<(), PopulationError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(io::BufWriter::new(file));
    w.write_record(PERSON_HEADER).map_err(csv_io(path))?;
    for p in persons {
        w.write_record([
            p.hid.to_string(),
            p.pid.to_string(),
            p.age.to_string(),
            (p.sex as u8).to_string(),
            p.employment_status.to_string(),
            p.race.to_string(),
            u8::from(p.hispanic).to_string(),
            p.designation.clone(),
            p.hh_size.to_string(),
            p.hh_income.to_string(),
            p.workers_in_family.to_string(),
            p.residence_lid.to_string(),
            p.longitude.to_string(),
            p.latitude.to_string(),
            p.admin1.clone(),
            p.admin2.clone(),
            p.admin3.clone(),
            p.admin4.clone(),
        ])
        .map_err(csv_io(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes visits in (day, person file order, start) order.
pub fn write_visits(path: &Path, pop: &Population) -> Result<(), PopulationError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = io::BufWriter::new(file);
    writeln!(w, "{}", VISIT_HEADER.join(",")).map_err(io_err(path))?;
    for day in 0..DAYS_PER_WEEK {
        for i in 0..pop.len() {
            for v in pop.day_visits(i, day) {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{}",
                    v.daynum,
                    v.pid,
                    v.activity_number,
                    v.activity_type.code(),
                    v.start_time,
                    v.end_time,
                    v.duration,
                    v.lid
                )
                .map_err(io_err(path))?;
            }
        }
    }
    w.flush().map_err(io_err(path))
}

/// Work location of Smallville person `pid` (1..=3) on `day`.
pub fn smallville_work_lid(pid: u64, day: usize) -> u64 {
    match (pid, day) {
        (1, _) => 1,
        (2, 0..=2) => 1,
        (2, _) => 2,
        (3, 0) => 1,
        (3, 1..=2) => 3,
        // Weekends continue the Thursday/Friday assignment.
        (3, _) => 2,
        _ => panic!("Smallville has persons 1, 2 and 3 only"),
    }
}

/// Three persons who work one hour from midnight and spend the rest of the day at home.
pub fn generate_smallville() -> Population {
    let persons: Vec<Person> = (1..=3u64)
        .map(|pid| Person {
            hid: pid as i64,
            pid,
            age: 30 + pid as u32,
            sex: if pid == 2 { Sex::Female } else { Sex::Male },
            employment_status: 1,
            race: 1,
            hispanic: false,
            designation: "none".into(),
            hh_size: 1,
            hh_income: 50_000,
            workers_in_family: 1,
            residence_lid: pid + 10,
            longitude: 0.0,
            latitude: 0.0,
            admin1: "51".into(),
            admin2: "540".into(),
            admin3: "000100".into(),
            admin4: "1".into(),
        })
        .collect();
    let mut visits = Vec::new();
    for day in 0..DAYS_PER_WEEK {
        for pid in 1..=3u64 {
            visits.push(Visit {
                daynum: day as u8,
                pid,
                activity_number: 0,
                activity_type: ActivityType::Work,
                start_time: 0,
                end_time: 3600,
                duration: 3600,
                lid: smallville_work_lid(pid, day),
            });
            visits.push(Visit {
                daynum: day as u8,
                pid,
                activity_number: 1,
                activity_type: ActivityType::Home,
                start_time: 3600,
                end_time: SECONDS_PER_DAY,
                duration: SECONDS_PER_DAY - 3600,
                lid: pid + 10,
            });
        }
    }
    Population::new(persons, visits).expect("Smallville is well formed")
}

/// Residence lids of generated populations start here; activity lids are `1..=n_locations`.
pub const GENERATED_RESIDENCE_BASE: u64 = 1_000_000;

const QUARTER_HOUR: u32 = 900;

/// Seeded desk-scale population: households of 1 to 5 persons, each person with
/// a home visit framing 1 to 3 daily out-of-home visits. Work and school
/// locations are fixed per person; other venues are drawn per day.
///
/// A single-household population gets home-only schedules.
pub fn generate_random_population(n_people: usize, n_locations: u64, seed: u64) -> Population {
    assert!(n_people >= 1, "n_people must be at least 1");
    let n_locations = n_locations.max(1);
    let mut r = stream(seed, Purpose::Population, 0, 0, 0);

    let mut persons = Vec::with_capacity(n_people);
    let mut hid = 0i64;
    while persons.len() < n_people {
        hid += 1;
        let size = (r.range_inclusive(1, 5) as usize).min(n_people - persons.len());
        let income = r.range_inclusive(10, 200) as i64 * 1000;
        let residence = GENERATED_RESIDENCE_BASE + hid as u64;
        let mut workers = 0;
        let start = persons.len();
        for _ in 0..size {
            let age = r.range_inclusive(0, 85) as u32;
            let employed = (18..65).contains(&age) && r.bernoulli(0.75);
            if employed {
                workers += 1;
            }
            persons.push(Person {
                hid,
                pid: persons.len() as u64 + 1,
                age,
                sex: if r.bernoulli(0.5) { Sex::Male } else { Sex::Female },
                employment_status: if employed { 1 } else { 6 },
                race: r.range_inclusive(1, 9) as i64,
                hispanic: r.bernoulli(0.1),
                designation: if employed { "worker".into() } else { "none".into() },
                hh_size: size as u32,
                hh_income: income,
                workers_in_family: 0,
                residence_lid: residence,
                longitude: 0.0,
                latitude: 0.0,
                admin1: "51".into(),
                admin2: "540".into(),
                admin3: "000100".into(),
                admin4: "1".into(),
            });
        }
        for p in &mut persons[start..] {
            p.workers_in_family = workers;
        }
    }

    let home_only = hid == 1;
    let mut visits = Vec::new();
    for p in &persons {
        let mut pr = stream(seed, Purpose::Population, 1, p.pid, 0);
        let anchor_type = anchor_activity(p);
        let anchor_lid = pr.range_inclusive(1, n_locations);
        for day in 0..DAYS_PER_WEEK {
            let mut dr = stream(seed, Purpose::Population, 2, p.pid, day as u64);
            if home_only {
                visits.push(home_visit(p, day, 0, 0, SECONDS_PER_DAY));
                continue;
            }
            day_schedule(p, day, anchor_type, anchor_lid, n_locations, &mut dr, &mut visits);
        }
    }
    Population::new(persons, visits).expect("generated population is well formed")
}

fn anchor_activity(p: &Person) -> Option<ActivityType> {
    match p.age {
        5..=17 => Some(ActivityType::School),
        18..=22 if p.employment_status != 1 => Some(ActivityType::College),
        _ if p.employment_status == 1 => Some(ActivityType::Work),
        _ => None,
    }
}

fn home_visit(p: &Person, day: usize, number: i64, start: u32, end: u32) -> Visit {
    Visit {
        daynum: day as u8,
        pid: p.pid,
        activity_number: number,
        activity_type: ActivityType::Home,
        start_time: start,
        end_time: end,
        duration: end - start,
        lid: p.residence_lid,
    }
}

fn day_schedule(
    p: &Person,
    day: usize,
    anchor_type: Option<ActivityType>,
    anchor_lid: u64,
    n_locations: u64,
    r: &mut KeyedRng,
    out: &mut Vec<Visit>,
) {
    let weekday = day < 5;
    let n_out = r.range_inclusive(1, 3) as usize;
    let mut plan: Vec<(ActivityType, u64, u32)> = Vec::with_capacity(n_out);
    for k in 0..n_out {
        if k == 0 && weekday {
            if let Some(t) = anchor_type {
                let hours = r.range_inclusive(16, 32) as u32; // 4h..8h in quarter hours
                plan.push((t, anchor_lid, hours * QUARTER_HOUR));
                continue;
            }
        }
        let t = match r.range_inclusive(0, 9) {
            0..=4 => ActivityType::Shopping,
            5..=8 => ActivityType::Other,
            _ => ActivityType::Religion,
        };
        let lid = r.range_inclusive(1, n_locations);
        let quarters = r.range_inclusive(2, 8) as u32;
        plan.push((t, lid, quarters * QUARTER_HOUR));
    }

    let mut clock = r.range_inclusive(24, 40) as u32 * QUARTER_HOUR; // 06:00..10:00
    let mut number = 0i64;
    out.push(home_visit(p, day, number, 0, clock));
    for (t, lid, dur) in plan {
        let end = (clock + dur).min(SECONDS_PER_DAY - QUARTER_HOUR);
        if end <= clock {
            break;
        }
        number += 1;
        out.push(Visit {
            daynum: day as u8,
            pid: p.pid,
            activity_number: number,
            activity_type: t,
            start_time: clock,
            end_time: end,
            duration: end - clock,
            lid,
        });
        clock = end;
    }
    number += 1;
    out.push(home_visit(p, day, number, clock, SECONDS_PER_DAY));
}

/// Distinct unordered person pairs that overlap in time at some location on some day.
pub fn weekly_contact_pairs(pop: &Population) -> BTreeSet<(u64, u64)> {
    let mut pairs = BTreeSet::new();
    for day in 0..DAYS_PER_WEEK {
        for list in pop.location_days(day).values() {
            for (i, a) in list.iter().enumerate() {
                for b in &list[i + 1..] {
                    if b.start_time >= a.end_time {
                        break;
                    }
                    if a.pid != b.pid && a.activity_type != ActivityType::Transit
                        && b.activity_type != ActivityType::Transit
                        && a.end_time.min(b.end_time) > a.start_time.max(b.start_time)
                    {
                        pairs.insert((a.pid.min(b.pid), a.pid.max(b.pid)));
                    }
                }
            }
        }
    }
    pairs
}
