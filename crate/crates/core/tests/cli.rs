use std::path::Path;
use std::process::{Command, Output};

use hullforge::exact::parse_rational;
use hullforge::pipeline::{RunConfig, SeriesFile};

fn hf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hullforge")).args(args).output().unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn write_config(dir: &Path, name: &str, cfg: &RunConfig) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p.display().to_string()
}

#[test]
fn hm_eighth_arc() {
    let o = hf(&["hm", "--rho", "1", "--arc", "0/8", "--walks", "100000", "--seed", "7", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let (x, sd) = (v["value"].as_f64().unwrap(), v["stderr"].as_f64().unwrap());
    assert!((x - 0.125).abs() <= 3.0 * sd, "{x}");
}

#[test]
fn hm_annulus_and_csv() {
    let o = hf(&["hm", "--rho", "1", "--hole", "0,0,0.25", "--start", "0.5,0", "--seed", "3"]);
    let v = json(&o);
    let (x, sd) = (v["value"].as_f64().unwrap(), v["stderr"].as_f64().unwrap());
    assert!((x - 0.5).abs() <= 3.0 * sd + 1e-4, "{x}");
    let o = hf(&["hm", "--rho", "1", "--hole", "0,0,0.25", "--start", "0.5,0", "--seed", "3", "--walks", "500", "--csv"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("value,stderr,hits,n_walks,seed,valid\n"));
    let o = hf(&["hm", "--rho", "1", "--hole", "-0.5,0,0.1", "--start", "-0.2,0", "--seed", "3", "--walks", "1000"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn hm_rejections_exit_2() {
    let o = hf(&["hm", "--rho", "1", "--hole", "0.3,0,0.2", "--hole", "0.4,0,0.2", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("overlap"));
    assert_eq!(hf(&["hm", "--rho", "1"]).status.code(), Some(2));
    assert_eq!(hf(&["hm", "--rho", "1", "--seed", "1", "--walks", "10"]).status.code(), Some(2));
    assert_eq!(hf(&["hm", "--rho", "1", "--seed", "1", "--start", "2,0"]).status.code(), Some(2));
}

#[test]
fn witness_unit_example() {
    let o = hf(&["witness", "--eps", "1", "--stage", "0", "--threshold", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["inputs"]["k"], 2);
    assert_eq!(v["valid"], true);
    let o = hf(&["witness", "--eps", "1", "--stage", "0", "--threshold", "3/2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn smooth_from_weights() {
    let o = hf(&["smooth", "--eps", "1/10,1/100", "--order", "2", "--k-max", "4096"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&o)["valid"], true);
}

#[test]
fn construct_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::lacunary_default(1);
    cfg.mc.n_walks = 10;
    let p = write_config(dir.path(), "few.json", &cfg);
    let o = hf(&["construct", "--config", &p]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("minimum 100"));
    let mut v = serde_json::to_value(RunConfig::lacunary_default(1)).unwrap();
    v["mc"].as_object_mut().unwrap().remove("seed");
    let p = dir.path().join("noseed.json");
    std::fs::write(&p, v.to_string()).unwrap();
    assert_eq!(hf(&["construct", "--config", p.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(hf(&["construct", "--config", "/nonexistent/forge.json"]).status.code(), Some(2));
}

#[test]
fn bundle_commands_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::lacunary_default(5);
    cfg.mc.n_walks = 20_000;
    let p = write_config(dir.path(), "forge.json", &cfg);
    let out = dir.path().join("bundle");
    let out_s = out.to_str().unwrap();
    let o = hf(&["construct", "--config", &p, "--out", out_s]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = json(&o);
    assert_eq!(manifest["valid"], true);
    assert!(manifest["certificates"].as_array().unwrap().len() >= 5);

    let o = hf(&["construct", "--config", &p, "--out", out_s, "--verify-only"]);
    assert_eq!(o.status.code(), Some(0));
    let report = json(&o);
    assert_eq!(report["flags_match"], true);
    assert!(report["entries"].as_array().unwrap().iter().all(|e| e["identical"] == true));

    let o = hf(&["coeffs", "--bundle", out_s, "--k", "0..64"]);
    assert_eq!(o.status.code(), Some(0));
    let file: SeriesFile = serde_json::from_slice(&std::fs::read(out.join("series.json")).unwrap()).unwrap();
    let series = file.lacunary().unwrap();
    let mut rdr = csv::Reader::from_reader(o.stdout.as_slice());
    assert_eq!(rdr.headers().unwrap(), vec!["k", "numerator", "denominator", "decimal"]);
    let mut rows = 0;
    for (i, r) in rdr.records().enumerate() {
        let r = r.unwrap();
        let q = parse_rational(&format!("{}/{}", &r[1], &r[2])).unwrap();
        assert_eq!(q, series.coefficient(i as u64));
        rows += 1;
    }
    assert_eq!(rows, 65);

    let o = hf(&["plot", "--bundle", out_s, "--what", "domain"]);
    let svg = String::from_utf8(o.stdout).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<circle"));
    let o = hf(&["probe", "--bundle", out_s]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&o)["evidence"]["strictly_decreasing"], true);
    let o = hf(&["witness", "--bundle", out_s, "--stage", "4"]);
    assert_eq!(json(&o)["valid"], true);

    std::fs::write(out.join("plots/poles.svg"), "<svg/>").unwrap();
    let o = hf(&["plot", "--bundle", out_s, "--what", "poles"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("stale manifest"));
    assert_eq!(hf(&["coeffs", "--bundle", dir.path().to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn pole_bundle_is_not_lacunary() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "poles.json", &RunConfig::pole_disc_default(9));
    let out = dir.path().join("b");
    let o = hf(&["--threads", "2", "construct", "--config", &p, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = hf(&["coeffs", "--bundle", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = hf(&["plot", "--bundle", out.to_str().unwrap(), "--what", "probe"]);
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("<svg"));
}
