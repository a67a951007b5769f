//! Checker for the JSON-Schema subset used by the shipped report schema:
//! `type`, `enum`, `required`, `properties`, `additionalProperties`,
//! `items`, `minItems`, `maxItems`, `minimum`, `maximum`, `$ref` into
//! `$defs`.

use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("{path}: {message}")]
pub struct SchemaError {
    pub path: String,
    pub message: String,
}

pub fn validate(schema: &Value, instance: &Value) -> Result<(), SchemaError> {
    check(schema, schema, instance, "$")
}

fn err(path: &str, message: String) -> SchemaError {
    SchemaError { path: path.to_string(), message }
}

fn type_matches(t: &str, v: &Value) -> bool {
    match t {
        "null" => v.is_null(),
        "boolean" => v.is_boolean(),
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "number" => v.is_number(),
        "integer" => v.as_f64().is_some_and(|x| x.fract() == 0.0),
        _ => false,
    }
}

fn resolve<'a>(root: &'a Value, r: &str, path: &str) -> Result<&'a Value, SchemaError> {
    let name = r.strip_prefix("#/$defs/").ok_or_else(|| err(path, format!("unsupported $ref {r}")))?;
    root.get("$defs").and_then(|d| d.get(name)).ok_or_else(|| err(path, format!("unknown $ref {r}")))
}

fn check(root: &Value, schema: &Value, v: &Value, path: &str) -> Result<(), SchemaError> {
    if let Some(r) = schema.get("$ref").and_then(Value::as_str) {
        return check(root, resolve(root, r, path)?, v, path);
    }
    if let Some(t) = schema.get("type") {
        let ok = match t {
            Value::String(s) => type_matches(s, v),
            Value::Array(ts) => ts.iter().filter_map(Value::as_str).any(|s| type_matches(s, v)),
            _ => return Err(err(path, "malformed type".into())),
        };
        if !ok {
            return Err(err(path, format!("expected type {t}, got {v}")));
        }
    }
    if let Some(Value::Array(options)) = schema.get("enum") {
        if !options.contains(v) {
            return Err(err(path, format!("{v} not in enum")));
        }
    }
    if let Some(x) = v.as_f64() {
        if let Some(min) = schema.get("minimum").and_then(Value::as_f64) {
            if x < min {
                return Err(err(path, format!("{x} < minimum {min}")));
            }
        }
        if let Some(max) = schema.get("maximum").and_then(Value::as_f64) {
            if x > max {
                return Err(err(path, format!("{x} > maximum {max}")));
            }
        }
    }
    if let Value::Object(obj) = v {
        if let Some(Value::Array(req)) = schema.get("required") {
            for k in req.iter().filter_map(Value::as_str) {
                if !obj.contains_key(k) {
                    return Err(err(path, format!("missing required property '{k}'")));
                }
            }
        }
        let props = schema.get("properties").and_then(Value::as_object);
        for (k, child) in obj {
            let sub = format!("{path}.{k}");
            match props.and_then(|p| p.get(k)) {
                Some(s) => check(root, s, child, &sub)?,
                None => match schema.get("additionalProperties") {
                    Some(Value::Bool(false)) => return Err(err(path, format!("unexpected property '{k}'"))),
                    Some(s @ Value::Object(_)) => check(root, s, child, &sub)?,
                    _ => {}
                },
            }
        }
    }
    if let Value::Array(items) = v {
        if let Some(n) = schema.get("minItems").and_then(Value::as_u64) {
            if (items.len() as u64) < n {
                return Err(err(path, format!("{} items, minimum {n}", items.len())));
            }
        }
        if let Some(n) = schema.get("maxItems").and_then(Value::as_u64) {
            if items.len() as u64 > n {
                return Err(err(path, format!("{} items, maximum {n}", items.len())));
            }
        }
        if let Some(s) = schema.get("items") {
            for (i, item) in items.iter().enumerate() {
                check(root, s, item, &format!("{path}[{i}]"))?;
            }
        }
    }
    Ok(())
}
