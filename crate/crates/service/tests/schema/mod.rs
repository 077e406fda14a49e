//! Minimal JSON Schema checker covering the keywords used under `schemas/`:
//! type, enum, properties, required, additionalProperties, items,
//! min/maxItems, min/maxLength, minimum, maximum, exclusiveMinimum, anyOf
//! and `$ref` (same file or `other.schema.json#/pointer`).

use std::path::PathBuf;

use serde_json::Value;

pub fn schema_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../schemas")
}

pub fn load(file: &str) -> Value {
    let text = std::fs::read_to_string(schema_dir().join(file)).unwrap_or_else(|e| panic!("{file}: {e}"));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("{file}: {e}"))
}

/// Returns every violation as `path: message`.
pub fn validate(file: &str, instance: &Value) -> Vec<String> {
    let root = load(file);
    let mut errors = Vec::new();
    check(&root, &root, instance, "$", &mut errors);
    errors
}

pub fn assert_valid(file: &str, instance: &Value) {
    let errors = validate(file, instance);
    assert!(errors.is_empty(), "{file} violations:\n{}\ninstance: {instance}", errors.join("\n"));
}

fn resolve(root: &Value, reference: &str) -> (Value, Value) {
    let (file, pointer) = reference.split_once('#').unwrap_or((reference, ""));
    let doc = if file.is_empty() { root.clone() } else { load(file) };
    let target = doc.pointer(pointer).unwrap_or_else(|| panic!("unresolved $ref {reference}")).clone();
    (doc, target)
}

fn type_matches(t: &str, v: &Value) -> bool {
    match t {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        "number" => v.is_number(),
        "integer" => v.is_u64() || v.is_i64(),
        other => panic!("unsupported type {other}"),
    }
}

fn check(root: &Value, schema: &Value, v: &Value, path: &str, errors: &mut Vec<String>) {
    let Some(s) = schema.as_object() else { return };
    if let Some(r) = s.get("$ref").and_then(Value::as_str) {
        let (doc, target) = resolve(root, r);
        check(&doc, &target, v, path, errors);
    }
    if let Some(t) = s.get("type") {
        let ok = match t {
            Value::String(t) => type_matches(t, v),
            Value::Array(ts) => ts.iter().filter_map(Value::as_str).any(|t| type_matches(t, v)),
            _ => true,
        };
        if !ok {
            errors.push(format!("{path}: expected type {t}, found {v}"));
            return;
        }
    }
    if let Some(options) = s.get("enum").and_then(Value::as_array) {
        if !options.contains(v) {
            errors.push(format!("{path}: {v} not in {options:?}"));
        }
    }
    if let Some(any) = s.get("anyOf").and_then(Value::as_array) {
        let ok = any.iter().any(|alt| {
            let mut sub = Vec::new();
            check(root, alt, v, path, &mut sub);
            sub.is_empty()
        });
        if !ok {
            errors.push(format!("{path}: matches no anyOf alternative"));
        }
    }
    if let Some(x) = v.as_f64() {
        if let Some(m) = s.get("minimum").and_then(Value::as_f64) {
            if x < m {
                errors.push(format!("{path}: {x} < minimum {m}"));
            }
        }
        if let Some(m) = s.get("maximum").and_then(Value::as_f64) {
            if x > m {
                errors.push(format!("{path}: {x} > maximum {m}"));
            }
        }
        if let Some(m) = s.get("exclusiveMinimum").and_then(Value::as_f64) {
            if x <= m {
                errors.push(format!("{path}: {x} <= exclusiveMinimum {m}"));
            }
        }
    }
    if let Some(text) = v.as_str() {
        let n = text.chars().count() as u64;
        if s.get("minLength").and_then(Value::as_u64).is_some_and(|m| n < m) {
            errors.push(format!("{path}: string shorter than minLength"));
        }
        if s.get("maxLength").and_then(Value::as_u64).is_some_and(|m| n > m) {
            errors.push(format!("{path}: string longer than maxLength"));
        }
    }
    if let Some(items) = v.as_array() {
        let n = items.len() as u64;
        if s.get("minItems").and_then(Value::as_u64).is_some_and(|m| n < m) {
            errors.push(format!("{path}: {n} items < minItems"));
        }
        if s.get("maxItems").and_then(Value::as_u64).is_some_and(|m| n > m) {
            errors.push(format!("{path}: {n} items > maxItems"));
        }
        if let Some(item_schema) = s.get("items") {
            for (i, item) in items.iter().enumerate() {
                check(root, item_schema, item, &format!("{path}[{i}]"), errors);
            }
        }
    }
    if let Some(obj) = v.as_object() {
        let props = s.get("properties").and_then(Value::as_object);
        if let Some(required) = s.get("required").and_then(Value::as_array) {
            for r in required.iter().filter_map(Value::as_str) {
                if !obj.contains_key(r) {
                    errors.push(format!("{path}: missing required property {r}"));
                }
            }
        }
        for (k, val) in obj {
            match props.and_then(|p| p.get(k)) {
                Some(ps) => check(root, ps, val, &format!("{path}.{k}"), errors),
                None if s.get("additionalProperties") == Some(&Value::Bool(false)) => {
                    errors.push(format!("{path}: unexpected property {k}"))
                }
                None => {}
            }
        }
    }
}
