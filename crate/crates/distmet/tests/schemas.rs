//! Every JSON document the crate emits must validate against the schema
//! files shipped under `schemas/`. The checker below supports the subset of
//! JSON Schema those files use: `type`, `required`, `properties`, `items`.

use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn type_matches(value: &Value, ty: &str) -> bool {
    match ty {
        "object" => value.is_object(),
        "array" => value.is_array(),
        "string" => value.is_string(),
        "boolean" => value.is_boolean(),
        "integer" => value.is_i64() || value.is_u64(),
        "number" => value.is_number(),
        "null" => value.is_null(),
        other => panic!("unsupported type keyword '{other}'"),
    }
}

fn validate(value: &Value, schema: &Value, path: &str) -> Result<(), String> {
    if let Some(ty) = schema.get("type").and_then(Value::as_str) {
        if !type_matches(value, ty) {
            return Err(format!("{path}: expected {ty}, got {value}"));
        }
    }
    if let Some(required) = schema.get("required").and_then(Value::as_array) {
        let obj = value
            .as_object()
            .ok_or_else(|| format!("{path}: required on non-object"))?;
        for key in required {
            let key = key.as_str().expect("required entries are strings");
            if !obj.contains_key(key) {
                return Err(format!("{path}: missing required field '{key}'"));
            }
        }
    }
    if let Some(props) = schema.get("properties").and_then(Value::as_object) {
        if let Some(obj) = value.as_object() {
            for (key, sub) in props {
                if let Some(field) = obj.get(key) {
                    validate(field, sub, &format!("{path}.{key}"))?;
                }
            }
        }
    }
    if let Some(items) = schema.get("items") {
        if let Some(arr) = value.as_array() {
            for (i, item) in arr.iter().enumerate() {
                validate(item, items, &format!("{path}[{i}]"))?;
            }
        }
    }
    Ok(())
}

fn load_schema(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(name);
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("bad schema {name}: {e}"))
}

fn cli_json(args: &[&str]) -> Value {
    let output = Command::new(env!("CARGO_BIN_EXE_distmet"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        output.status.success(),
        "distmet {args:?} failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    serde_json::from_slice(&output.stdout)
        .unwrap_or_else(|e| panic!("distmet {args:?} emitted invalid JSON: {e}"))
}

fn check(value: &Value, schema_name: &str) {
    let schema = load_schema(schema_name);
    if let Err(msg) = validate(value, &schema, "$") {
        panic!("{schema_name}: {msg}");
    }
}

#[test]
fn protocol_outputs_match_schema() {
    check(
        &cli_json(&["protocol", "twin-fock", "-d", "2", "-N", "4"]),
        "protocol_result.schema.json",
    );
    check(
        &cli_json(&["protocol", "fig2", "-n", "2"]),
        "protocol_result.schema.json",
    );
    check(
        &cli_json(&["protocol", "classical", "-n", "2", "-d", "2"]),
        "classical_result.schema.json",
    );
}

#[test]
fn qfi_output_matches_schema() {
    check(&cli_json(&["qfi", "-d", "2", "-N", "2"]), "qfi_output.schema.json");
}

#[test]
fn bound_outputs_match_schema() {
    check(
        &cli_json(&["bound", "fock", "--photons", "1,1,0,0", "--weights", "0.5,0.5"]),
        "fock_bounds.schema.json",
    );
    check(
        &cli_json(&["bound", "separable", "--photons", "1,1,0,0", "-d", "2"]),
        "separable_bounds.schema.json",
    );
}

#[test]
fn optimization_report_matches_schema() {
    check(
        &cli_json(&[
            "optimize", "--family", "hoarded", "-d", "1", "--budget", "200",
            "--restarts", "2", "--seed", "1",
        ]),
        "optimization_report.schema.json",
    );
}

#[test]
fn library_serial_forms_match_schemas() {
    use distmet::fock::{product_state, SingleModeState};
    use distmet::network::hoarding_unitary;
    use distmet::qfi::WeightVector;

    let state = product_state(&[SingleModeState::fock(1), SingleModeState::fock(1)]).unwrap();
    let value = serde_json::to_value(state.to_serial()).unwrap();
    check(&value, "fock_state.schema.json");

    let w = WeightVector::new(vec![0.5, 0.5]).unwrap();
    let u = hoarding_unitary(&w).unwrap();
    let value = serde_json::to_value(u.to_serial()).unwrap();
    check(&value, "mode_unitary.schema.json");
}

#[test]
fn validator_rejects_wrong_shapes() {
    let schema = load_schema("classical_result.schema.json");
    let missing = serde_json::json!({ "delta_q": 0.5, "n_per_node": 2, "d": 2 });
    assert!(validate(&missing, &schema, "$").is_err());
    let wrong_type = serde_json::json!({
        "delta_q": "0.5", "n_per_node": 2, "d": 2, "weights": [0.5, 0.5]
    });
    assert!(validate(&wrong_type, &schema, "$").is_err());
}
