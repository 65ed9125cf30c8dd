//! Run configuration: loading, range checks, schema validation.
//!
//! The configuration is a JSON object. Relative paths are resolved against
//! the directory that holds the configuration file. Keys that are not
//! recognized are kept verbatim in [`Config::legacy_keys`] and otherwise
//! ignored, so configurations carrying process-layout keys such as
//! `num_procs` or buffer sizes still load.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};
use thiserror::Error;

use crate::behavior::{ScaleFactors, DEFAULT_SCALE};
use crate::disease::{
    default_edges, default_infectivity, default_susceptibility, default_transmissions,
    DiseaseError, DiseaseModel, HealthState, ProgressionEdge, TransmissionConfiguration,
};
use crate::schema::{ValidationReport, Validator};

/// The schema shipped with the crate.
pub const CONFIG_SCHEMA: &str = include_str!("../schema/config.schema.json");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("configuration file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid value for '{key}': {message}")]
    Validation { key: String, message: String },
    #[error("schema {path}: {message}")]
    SchemaParse { path: PathBuf, message: String },
}

impl ConfigError {
    fn invalid(key: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Validation {
            key: key.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorModelSpec {
    pub name: String,
    pub params: BTreeMap<String, Value>,
}

impl Default for BehaviorModelSpec {
    fn default() -> Self {
        Self {
            name: "default".into(),
            params: BTreeMap::new(),
        }
    }
}

/// Disease parameters; every part falls back to the default SEIR model.
#[derive(Debug, Clone, PartialEq)]
pub struct DiseaseModelConfig {
    pub infectivity: [f64; 5],
    pub susceptibility: [f64; 5],
    pub transmissions: Vec<TransmissionConfiguration>,
    pub progressions: Vec<ProgressionEdge>,
}

impl Default for DiseaseModelConfig {
    fn default() -> Self {
        Self {
            infectivity: default_infectivity(),
            susceptibility: default_susceptibility(),
            transmissions: default_transmissions(),
            progressions: default_edges(),
        }
    }
}

impl DiseaseModelConfig {
    pub fn build(&self, tau: f64) -> Result<DiseaseModel, DiseaseError> {
        DiseaseModel::new(
            self.infectivity,
            self.susceptibility,
            tau,
            self.transmissions.clone(),
            self.progressions.clone(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub person_file: PathBuf,
    pub visit_file: PathBuf,
    pub location_weight_file: Option<PathBuf>,
    pub behavior_model: BehaviorModelSpec,
    pub output_directory: PathBuf,
    pub num_workers: usize,
    pub iterations: u32,
    pub initial_exposed: u64,
    pub tau: f64,
    pub contact_probability: f64,
    pub seed: u64,
    pub scales: ScaleFactors,
    pub disease: DiseaseModelConfig,
    pub write_local_observables: bool,
    pub legacy_keys: BTreeMap<String, Value>,
}

impl Config {
    /// A configuration with defaults for everything but the file locations.
    pub fn new(person_file: PathBuf, visit_file: PathBuf, output_directory: PathBuf) -> Self {
        Self {
            person_file,
            visit_file,
            location_weight_file: None,
            behavior_model: BehaviorModelSpec::default(),
            output_directory,
            num_workers: 1,
            iterations: 0,
            initial_exposed: 0,
            tau: 0.0,
            contact_probability: 1.0,
            seed: 0,
            scales: ScaleFactors::default(),
            disease: DiseaseModelConfig::default(),
            write_local_observables: true,
            legacy_keys: BTreeMap::new(),
        }
    }

    pub fn disease_model(&self) -> Result<DiseaseModel, DiseaseError> {
        self.disease.build(self.tau)
    }

    /// Serializes every recognized field plus the legacy keys.
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        for (k, v) in &self.legacy_keys {
            m.insert(k.clone(), v.clone());
        }
        let path = |p: &Path| Value::String(p.to_string_lossy().into_owned());
        m.insert("person_file".into(), path(&self.person_file));
        m.insert("visit_file".into(), path(&self.visit_file));
        if let Some(w) = &self.location_weight_file {
            m.insert("location_weight_file".into(), path(w));
        }
        m.insert("output_directory".into(), path(&self.output_directory));
        let mut bm = Map::new();
        bm.insert("name".into(), Value::String(self.behavior_model.name.clone()));
        bm.insert(
            "params".into(),
            Value::Object(self.behavior_model.params.clone().into_iter().collect()),
        );
        m.insert("behavior_model".into(), Value::Object(bm));
        m.insert("num_workers".into(), Value::from(self.num_workers));
        m.insert("iterations".into(), Value::from(self.iterations));
        m.insert("initial_exposed".into(), Value::from(self.initial_exposed));
        m.insert("tau".into(), Value::from(self.tau));
        m.insert("contact_probability".into(), Value::from(self.contact_probability));
        m.insert("seed".into(), Value::from(self.seed));
        m.insert("mask_inf_scale".into(), Value::from(self.scales.mask_inf));
        m.insert("mask_susc_scale".into(), Value::from(self.scales.mask_susc));
        m.insert("distancing_inf_scale".into(), Value::from(self.scales.distancing_inf));
        m.insert("distancing_susc_scale".into(), Value::from(self.scales.distancing_susc));
        m.insert("write_local_observables".into(), Value::from(self.write_local_observables));
        m.insert("disease".into(), disease_to_json(&self.disease));
        Value::Object(m)
    }

    pub fn from_json(doc: &Value, base_dir: &Path) -> Result<Self, ConfigError> {
        let map = doc
            .as_object()
            .ok_or_else(|| ConfigError::invalid("", "configuration must be a JSON object"))?;
        let mut rest = map.clone();
        let mut take = |k: &str| rest.remove(k);

        let path_of = |key: &str, v: Option<Value>| -> Result<PathBuf, ConfigError> {
            match v {
                Some(Value::String(s)) if !s.is_empty() => Ok(resolve(base_dir, &s)),
                Some(_) => Err(ConfigError::invalid(key, "expected a non-empty path string")),
                None => Err(ConfigError::invalid(key, "required key is missing")),
            }
        };
        let person_file = path_of("person_file", take("person_file"))?;
        let visit_file = path_of("visit_file", take("visit_file"))?;
        let output_directory = path_of("output_directory", take("output_directory"))?;
        let location_weight_file = match take("location_weight_file") {
            None | Some(Value::Null) => None,
            v => Some(path_of("location_weight_file", v)?),
        };

        let behavior_model = match take("behavior_model") {
            None => BehaviorModelSpec::default(),
            Some(Value::String(name)) => BehaviorModelSpec {
                name,
                params: BTreeMap::new(),
            },
            Some(Value::Object(o)) => {
                let name = o
                    .get("name")
                    .and_then(Value::as_str)
                    .ok_or_else(|| ConfigError::invalid("behavior_model.name", "expected a string"))?
                    .to_string();
                let params = match o.get("params") {
                    None | Some(Value::Null) => BTreeMap::new(),
                    Some(Value::Object(p)) => p.clone().into_iter().collect(),
                    Some(_) => {
                        return Err(ConfigError::invalid("behavior_model.params", "expected an object"))
                    }
                };
                if let Some(k) = o.keys().find(|k| *k != "name" && *k != "params") {
                    return Err(ConfigError::invalid(format!("behavior_model.{k}"), "unknown key"));
                }
                BehaviorModelSpec { name, params }
            }
            Some(_) => return Err(ConfigError::invalid("behavior_model", "expected a string or an object")),
        };

        let num_workers = match take("num_workers") {
            None => 1,
            Some(v) => {
                let n = uint("num_workers", &v)?;
                if n < 1 {
                    return Err(ConfigError::invalid("num_workers", "must be at least 1"));
                }
                n as usize
            }
        };
        let iterations = required(take("iterations"), "iterations", uint)?;
        let iterations = u32::try_from(iterations)
            .map_err(|_| ConfigError::invalid("iterations", "too large"))?;
        let initial_exposed = required(take("initial_exposed"), "initial_exposed", uint)?;
        let tau = required(take("tau"), "tau", real)?;
        if !(tau >= 0.0) {
            return Err(ConfigError::invalid("tau", format!("{tau} must be >= 0")));
        }
        let contact_probability = required(take("contact_probability"), "contact_probability", real)?;
        unit_interval("contact_probability", contact_probability)?;
        let seed = required(take("seed"), "seed", uint)?;

        let mut scale = |key: &str| -> Result<f64, ConfigError> {
            match take(key) {
                None => Ok(DEFAULT_SCALE),
                Some(v) => {
                    let x = real(key, &v)?;
                    unit_interval(key, x)?;
                    Ok(x)
                }
            }
        };
        let scales = ScaleFactors {
            mask_inf: scale("mask_inf_scale")?,
            mask_susc: scale("mask_susc_scale")?,
            distancing_inf: scale("distancing_inf_scale")?,
            distancing_susc: scale("distancing_susc_scale")?,
        };
        let write_local_observables = match take("write_local_observables") {
            None => true,
            Some(Value::Bool(b)) => b,
            Some(_) => return Err(ConfigError::invalid("write_local_observables", "expected a boolean")),
        };
        let disease = match take("disease") {
            None | Some(Value::Null) => DiseaseModelConfig::default(),
            Some(v) => disease_from_json(&v)?,
        };
        disease
            .build(tau)
            .map_err(|e| ConfigError::invalid("disease", e.to_string()))?;

        Ok(Config {
            person_file,
            visit_file,
            location_weight_file,
            behavior_model,
            output_directory,
            num_workers,
            iterations,
            initial_exposed,
            tau,
            contact_probability,
            seed,
            scales,
            disease,
            write_local_observables,
            legacy_keys: rest.into_iter().collect(),
        })
    }
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn required<T>(
    v: Option<Value>,
    key: &str,
    f: impl Fn(&str, &Value) -> Result<T, ConfigError>,
) -> Result<T, ConfigError> {
    match v {
        Some(v) => f(key, &v),
        None => Err(ConfigError::invalid(key, "required key is missing")),
    }
}

fn uint(key: &str, v: &Value) -> Result<u64, ConfigError> {
    if let Some(n) = v.as_u64() {
        return Ok(n);
    }
    match v.as_f64() {
        Some(f) if f >= 0.0 && f.fract() == 0.0 && f < u64::MAX as f64 => Ok(f as u64),
        Some(f) if f < 0.0 => Err(ConfigError::invalid(key, format!("{f} must be >= 0"))),
        _ => Err(ConfigError::invalid(key, format!("expected a non-negative integer, found {v}"))),
    }
}

fn real(key: &str, v: &Value) -> Result<f64, ConfigError> {
    v.as_f64()
        .ok_or_else(|| ConfigError::invalid(key, format!("expected a number, found {v}")))
}

fn unit_interval(key: &str, x: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(ConfigError::invalid(key, format!("{x} not in [0, 1]")))
    }
}

fn state_map(key: &str, v: &Value, base: [f64; 5]) -> Result<[f64; 5], ConfigError> {
    let obj = v
        .as_object()
        .ok_or_else(|| ConfigError::invalid(key, "expected an object keyed by state"))?;
    let mut out = base;
    for (k, x) in obj {
        let s: HealthState = k
            .parse()
            .map_err(|_| ConfigError::invalid(format!("{key}.{k}"), "unknown health state"))?;
        let x = real(&format!("{key}.{k}"), x)?;
        if !(x >= 0.0) {
            return Err(ConfigError::invalid(format!("{key}.{k}"), "must be >= 0"));
        }
        out[s.index()] = x;
    }
    Ok(out)
}

fn disease_from_json(v: &Value) -> Result<DiseaseModelConfig, ConfigError> {
    let obj = v
        .as_object()
        .ok_or_else(|| ConfigError::invalid("disease", "expected an object"))?;
    let mut cfg = DiseaseModelConfig::default();
    for (k, x) in obj {
        match k.as_str() {
            "iota" => cfg.infectivity = state_map("disease.iota", x, cfg.infectivity)?,
            "sigma" => cfg.susceptibility = state_map("disease.sigma", x, cfg.susceptibility)?,
            "transmissions" => {
                cfg.transmissions = serde_json::from_value(x.clone())
                    .map_err(|e| ConfigError::invalid("disease.transmissions", e.to_string()))?
            }
            "progressions" => {
                cfg.progressions = serde_json::from_value(x.clone())
                    .map_err(|e| ConfigError::invalid("disease.progressions", e.to_string()))?
            }
            other => return Err(ConfigError::invalid(format!("disease.{other}"), "unknown key")),
        }
    }
    Ok(cfg)
}

fn disease_to_json(d: &DiseaseModelConfig) -> Value {
    let map = |xs: &[f64; 5]| {
        Value::Object(
            HealthState::ALL
                .iter()
                .map(|s| (s.name().to_string(), Value::from(xs[s.index()])))
                .collect(),
        )
    };
    let mut m = Map::new();
    m.insert("iota".into(), map(&d.infectivity));
    m.insert("sigma".into(), map(&d.susceptibility));
    m.insert(
        "transmissions".into(),
        serde_json::to_value(&d.transmissions).expect("serializable"),
    );
    m.insert(
        "progressions".into(),
        serde_json::to_value(&d.progressions).expect("serializable"),
    );
    Value::Object(m)
}

fn read_json(path: &Path) -> Result<Value, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| {
        if source.kind() == io::ErrorKind::NotFound {
            ConfigError::FileNotFound(path.to_path_buf())
        } else {
            ConfigError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })?;
    serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Reads and range-checks a configuration file.
pub fn load_config(path: &Path) -> Result<Config, ConfigError> {
    let doc = read_json(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    Config::from_json(&doc, base)
}

pub fn load_schema(path: &Path) -> Result<Value, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let schema: Value = serde_json::from_str(&text).map_err(|e| ConfigError::SchemaParse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if !schema.is_object() && !schema.is_boolean() {
        return Err(ConfigError::SchemaParse {
            path: path.to_path_buf(),
            message: "a schema must be an object or a boolean".into(),
        });
    }
    Ok(schema)
}

/// Checks a configuration document against the schema at `schema_path`.
pub fn validate_config(config: &Value, schema_path: &Path) -> Result<ValidationReport, ConfigError> {
    let schema = load_schema(schema_path)?;
    Ok(Validator::new(&schema).validate(config))
}

/// Same as [`validate_config`] but reads the configuration from disk.
pub fn validate_config_file(config_path: &Path, schema_path: &Path) -> Result<ValidationReport, ConfigError> {
    let doc = read_json(config_path)?;
    validate_config(&doc, schema_path)
}

/// Validates against the schema bundled with the crate.
pub fn validate_with_bundled_schema(config: &Value) -> ValidationReport {
    let schema: Value = serde_json::from_str(CONFIG_SCHEMA).expect("bundled schema parses");
    Validator::new(&schema).validate(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn smallville_doc() -> Value {
        json!({
            "person_file": "smallville_persons.csv",
            "visit_file": "smallville_visits.csv",
            "output_directory": "out",
            "behavior_model": "default",
            "num_workers": 2,
            "iterations": 30,
            "initial_exposed": 1,
            "tau": 0.05,
            "contact_probability": 1.0,
            "seed": 7,
            "num_procs": 2,
            "observable_max_items_per_iteration": 5000
        })
    }

    fn write(dir: &Path, doc: &Value) -> PathBuf {
        let p = dir.join("cfg.json");
        fs::write(&p, serde_json::to_string_pretty(doc).unwrap()).unwrap();
        p
    }

    fn schema_file(dir: &Path) -> PathBuf {
        let p = dir.join("schema.json");
        fs::write(&p, CONFIG_SCHEMA).unwrap();
        p
    }

    #[test]
    fn loads_smallville_values_and_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let c = load_config(&write(dir.path(), &smallville_doc())).unwrap();
        assert_eq!(c.tau, 0.05);
        assert_eq!(c.contact_probability, 1.0);
        assert_eq!(c.scales, ScaleFactors::default());
        assert_eq!(c.scales.mask_inf, 0.8);
        assert_eq!(c.person_file, dir.path().join("smallville_persons.csv"));
        assert_eq!(c.disease, DiseaseModelConfig::default());
        assert_eq!(c.legacy_keys.len(), 2);
        assert!(c.legacy_keys.contains_key("num_procs"));
        assert!(c.write_local_observables);
    }

    #[test]
    fn contact_probability_out_of_range() {
        let dir = tempfile::tempdir().unwrap();
        let mut doc = smallville_doc();
        doc["contact_probability"] = json!(1.5);
        match load_config(&write(dir.path(), &doc)) {
            Err(ConfigError::Validation { key, .. }) => assert_eq!(key, "contact_probability"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scale_out_of_range_names_key() {
        let dir = tempfile::tempdir().unwrap();
        let mut doc = smallville_doc();
        doc["distancing_susc_scale"] = json!(-0.1);
        match load_config(&write(dir.path(), &doc)) {
            Err(ConfigError::Validation { key, .. }) => assert_eq!(key, "distancing_susc_scale"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_file_and_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_config(&dir.path().join("nope.json")),
            Err(ConfigError::FileNotFound(_))
        ));
        let p = dir.path().join("bad.json");
        fs::write(&p, "{\n  \"tau\": 0.05,\n  oops\n}").unwrap();
        match load_config(&p) {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_iterations_rejected_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let mut doc = smallville_doc();
        doc["iterations"] = json!(-3);
        assert!(matches!(
            load_config(&write(dir.path(), &doc)),
            Err(ConfigError::Validation { key, .. }) if key == "iterations"
        ));
    }

    #[test]
    fn disease_block_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let mut doc = smallville_doc();
        doc["disease"] = json!({
            "iota": {"Ia": 0.5},
            "progressions": [
                {"from": "E", "to": "Is", "probability": 1.0, "dwell": {"kind": "fixed", "days": 2}},
                {"from": "Is", "to": "R", "probability": 1.0, "dwell": {"kind": "fixed", "days": 2}}
            ]
        });
        let c = load_config(&write(dir.path(), &doc)).unwrap();
        assert_eq!(c.disease.infectivity, [0.0, 0.0, 1.0, 0.5, 0.0]);
        assert_eq!(c.disease.progressions.len(), 2);
        assert!(validate_with_bundled_schema(&doc).is_valid());

        doc["disease"]["progressions"][0]["probability"] = json!(0.5);
        assert!(matches!(
            load_config(&write(dir.path(), &doc)),
            Err(ConfigError::Validation { key, .. }) if key == "disease"
        ));
    }

    #[test]
    fn reserialize_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let mut doc = smallville_doc();
        doc["behavior_model"] = json!({"name": "mask_distancing_fixed", "params": {"fraction": 0.6}});
        let c1 = load_config(&write(dir.path(), &doc)).unwrap();
        let c2 = Config::from_json(&c1.to_json(), Path::new("/elsewhere")).unwrap();
        assert_eq!(c1, c2);
        assert!(validate_with_bundled_schema(&c1.to_json()).is_valid());
    }

    #[test]
    fn schema_accepts_smallville() {
        let dir = tempfile::tempdir().unwrap();
        let r = validate_config(&smallville_doc(), &schema_file(dir.path())).unwrap();
        assert!(r.is_valid(), "{r}");
    }

    #[test]
    fn schema_reports_missing_person_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut doc = smallville_doc();
        doc.as_object_mut().unwrap().remove("person_file");
        let r = validate_config(&doc, &schema_file(dir.path())).unwrap();
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].path, "person_file");
        assert_eq!(r.violations[0].rule, "required");
    }

    #[test]
    fn schema_reports_negative_iterations() {
        let dir = tempfile::tempdir().unwrap();
        let mut doc = smallville_doc();
        doc["iterations"] = json!(-3);
        let r = validate_config(&doc, &schema_file(dir.path())).unwrap();
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].path, "iterations");
        assert_eq!(r.violations[0].rule, "minimum");
    }

    #[test]
    fn unparsable_schema() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.json");
        fs::write(&p, "{ not json").unwrap();
        assert!(matches!(
            validate_config(&smallville_doc(), &p),
            Err(ConfigError::SchemaParse { .. })
        ));
    }
}
