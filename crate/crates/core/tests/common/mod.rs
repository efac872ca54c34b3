use serde_json::Value;

pub fn schema_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/schemas/odeco-tt.schema.json")
}

/// Validator for one `$defs` entry of the shipped schema.
pub fn validator(def: &str) -> jsonschema::Validator {
    let text = std::fs::read_to_string(schema_path()).expect("schema file");
    let mut schema: Value = serde_json::from_str(&text).expect("schema JSON");
    let obj = schema.as_object_mut().expect("schema object");
    obj.remove("anyOf");
    obj.insert("$ref".into(), Value::String(format!("#/$defs/{def}")));
    jsonschema::validator_for(&schema).expect("schema compiles")
}

/// Validation errors of `value` against `def`, joined; empty when valid.
pub fn schema_errors(def: &str, value: &Value) -> String {
    validator(def)
        .iter_errors(value)
        .map(|e| format!("{} at {}", e, e.instance_path()))
        .collect::<Vec<_>>()
        .join("; ")
}
