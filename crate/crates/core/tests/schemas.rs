use std::path::PathBuf;

use hullforge::pipeline::{assemble_counterexample, RunConfig};
use serde_json::Value;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn load(rel: &str) -> Value {
    serde_json::from_slice(&std::fs::read(root().join(rel)).unwrap()).unwrap()
}

fn check(schema: &Value, doc: &Value, what: &str) {
    let v = jsonschema::validator_for(schema).unwrap();
    let errors: Vec<String> = v.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{what}: {errors:?}");
}

#[test]
fn shipped_configs_match_schema_and_parse() {
    let schema = load("schemas/run-config.schema.json");
    for name in ["configs/lacunary.json", "configs/poles-disc.json"] {
        let doc = load(name);
        check(&schema, &doc, name);
        RunConfig::from_json(&doc.to_string()).unwrap();
    }
    let mut bad = load("configs/lacunary.json");
    bad["mc"]["n_walks"] = 10.into();
    assert!(!jsonschema::is_valid(&schema, &bad));
}

#[test]
fn bundles_match_schemas() {
    let manifest_schema = load("schemas/manifest.schema.json");
    let cert_schema = load("schemas/certificate.schema.json");
    let mut lac = RunConfig::lacunary_default(3);
    lac.mc.n_walks = 5000;
    for cfg in [lac, RunConfig::pole_disc_default(3)] {
        let b = assemble_counterexample(&cfg).unwrap();
        check(&manifest_schema, &serde_json::to_value(&b.manifest).unwrap(), "manifest");
        for c in &b.certificates {
            check(&cert_schema, &serde_json::to_value(c).unwrap(), &c.id);
        }
    }
}
