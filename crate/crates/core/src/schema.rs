//! A JSON Schema validator covering the draft-07 keywords used by the
//! configuration schema: `type`, `properties`, `required`,
//! `additionalProperties`, `items`, `minItems`, `enum`, `const`, `minimum`,
//! `maximum`, `exclusiveMinimum`, `exclusiveMaximum`, `minLength`, `anyOf`,
//! `oneOf` and local `$ref` into `definitions`/`$defs`. Other keywords are
//! ignored.

use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Dotted key path, e.g. `disease.progressions[0].probability`. Empty for the root.
    pub path: String,
    /// The schema keyword that failed.
    pub rule: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.violations.is_empty() {
            return writeln!(f, "valid");
        }
        for v in &self.violations {
            let path = if v.path.is_empty() { "<root>" } else { &v.path };
            writeln!(f, "{path}: [{}] {}", v.rule, v.message)?;
        }
        Ok(())
    }
}

pub struct Validator<'s> {
    root: &'s Value,
}

impl<'s> Validator<'s> {
    pub fn new(schema: &'s Value) -> Self {
        Self { root: schema }
    }

    pub fn validate(&self, instance: &Value) -> ValidationReport {
        let mut out = Vec::new();
        self.check(self.root, instance, "", &mut out);
        ValidationReport { violations: out }
    }

    fn resolve(&self, reference: &str) -> Option<&'s Value> {
        let pointer = reference.strip_prefix('#')?;
        self.root.pointer(pointer)
    }

    fn check(&self, schema: &'s Value, inst: &Value, path: &str, out: &mut Vec<Violation>) {
        let obj = match schema {
            Value::Bool(true) => return,
            Value::Bool(false) => {
                push(out, path, "false", "no value is allowed here");
                return;
            }
            Value::Object(o) => o,
            _ => return,
        };

        if let Some(Value::String(r)) = obj.get("$ref") {
            match self.resolve(r) {
                Some(target) => self.check(target, inst, path, out),
                None => push(out, path, "$ref", &format!("unresolvable reference {r}")),
            }
            return;
        }

        if let Some(t) = obj.get("type") {
            let allowed: Vec<&str> = match t {
                Value::String(s) => vec![s.as_str()],
                Value::Array(a) => a.iter().filter_map(Value::as_str).collect(),
                _ => vec![],
            };
            if !allowed.is_empty() && !allowed.iter().any(|t| type_matches(t, inst)) {
                push(
                    out,
                    path,
                    "type",
                    &format!("expected {}, found {}", allowed.join(" or "), type_name(inst)),
                );
                return;
            }
        }

        if let Some(Value::Array(options)) = obj.get("enum") {
            if !options.iter().any(|o| json_eq(o, inst)) {
                push(out, path, "enum", &format!("{inst} is not one of {}", Value::Array(options.clone())));
            }
        }
        if let Some(c) = obj.get("const") {
            if !json_eq(c, inst) {
                push(out, path, "const", &format!("expected {c}, found {inst}"));
            }
        }

        if let Some(x) = inst.as_f64() {
            self.check_number(obj, x, path, out);
        }
        if let Value::String(s) = inst {
            if let Some(min) = obj.get("minLength").and_then(Value::as_u64) {
                if (s.chars().count() as u64) < min {
                    push(out, path, "minLength", &format!("shorter than {min} characters"));
                }
            }
        }
        if let Value::Object(map) = inst {
            self.check_object(obj, map, path, out);
        }
        if let Value::Array(items) = inst {
            if let Some(min) = obj.get("minItems").and_then(Value::as_u64) {
                if (items.len() as u64) < min {
                    push(out, path, "minItems", &format!("fewer than {min} items"));
                }
            }
            if let Some(item_schema) = obj.get("items") {
                for (i, item) in items.iter().enumerate() {
                    self.check(item_schema, item, &format!("{path}[{i}]"), out);
                }
            }
        }

        if let Some(Value::Array(options)) = obj.get("anyOf") {
            if !options.iter().any(|s| self.passes(s, inst, path)) {
                push(out, path, "anyOf", "matches none of the allowed forms");
            }
        }
        if let Some(Value::Array(options)) = obj.get("oneOf") {
            let n = options.iter().filter(|s| self.passes(s, inst, path)).count();
            if n != 1 {
                push(out, path, "oneOf", &format!("matches {n} of the alternatives, expected exactly 1"));
            }
        }
    }

    fn passes(&self, schema: &'s Value, inst: &Value, path: &str) -> bool {
        let mut tmp = Vec::new();
        self.check(schema, inst, path, &mut tmp);
        tmp.is_empty()
    }

    fn check_number(&self, obj: &Map<String, Value>, x: f64, path: &str, out: &mut Vec<Violation>) {
        if let Some(m) = obj.get("minimum").and_then(Value::as_f64) {
            if x < m {
                push(out, path, "minimum", &format!("{x} is less than {m}"));
            }
        }
        if let Some(m) = obj.get("maximum").and_then(Value::as_f64) {
            if x > m {
                push(out, path, "maximum", &format!("{x} is greater than {m}"));
            }
        }
        if let Some(m) = obj.get("exclusiveMinimum").and_then(Value::as_f64) {
            if x <= m {
                push(out, path, "exclusiveMinimum", &format!("{x} is not greater than {m}"));
            }
        }
        if let Some(m) = obj.get("exclusiveMaximum").and_then(Value::as_f64) {
            if x >= m {
                push(out, path, "exclusiveMaximum", &format!("{x} is not less than {m}"));
            }
        }
    }

    fn check_object(
        &self,
        obj: &'s Map<String, Value>,
        map: &Map<String, Value>,
        path: &str,
        out: &mut Vec<Violation>,
    ) {
        if let Some(Value::Array(req)) = obj.get("required") {
            for key in req.iter().filter_map(Value::as_str) {
                if !map.contains_key(key) {
                    push(out, &join(path, key), "required", "required key is missing");
                }
            }
        }
        let props = obj.get("properties").and_then(Value::as_object);
        for (key, value) in map {
            let child = join(path, key);
            match props.and_then(|p| p.get(key)) {
                Some(s) => self.check(s, value, &child, out),
                None => match obj.get("additionalProperties") {
                    Some(Value::Bool(false)) => {
                        push(out, &child, "additionalProperties", "key is not allowed")
                    }
                    Some(s @ Value::Object(_)) => self.check(s, value, &child, out),
                    _ => {}
                },
            }
        }
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn push(out: &mut Vec<Violation>, path: &str, rule: &str, message: &str) {
    out.push(Violation {
        path: path.to_string(),
        rule: rule.to_string(),
        message: message.to_string(),
    });
}

fn is_integer(v: &Value) -> bool {
    match v {
        Value::Number(n) => {
            n.is_i64() || n.is_u64() || n.as_f64().is_some_and(|f| f.is_finite() && f.fract() == 0.0)
        }
        _ => false,
    }
}

fn type_matches(t: &str, v: &Value) -> bool {
    match t {
        "null" => v.is_null(),
        "boolean" => v.is_boolean(),
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "number" => v.is_number(),
        "integer" => is_integer(v),
        _ => false,
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) if is_integer(v) => "integer",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

/// Equality with numbers compared by value (`1` equals `1.0`).
fn json_eq(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => x.as_f64() == y.as_f64(),
        _ => a == b,
    }
}
