use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "hullforge.h"

int main(void) {
    const char *eps[] = {"1"};
    HfLacunary *h = NULL;
    if (hf_lacunary_new(eps, 1, &h) != HF_STATUS_OK) return 1;
    uint64_t k = 0;
    if (hf_lacunary_witness(h, 0, "3", 100, &k) != HF_STATUS_OK || k != 2) return 2;
    char *s = NULL;
    if (hf_lacunary_coefficient(h, 3, &s, NULL) != HF_STATUS_OK || strcmp(s, "1/16") != 0) return 3;
    hf_string_free(s);
    hf_lacunary_free(h);
    HfHole holes[] = {{0.0, 0.0, 0.25}};
    HfDomain *d = NULL;
    if (hf_domain_new(1.0, holes, 1, 0, 1, &d) != HF_STATUS_OK) return 4;
    HfEstimate e;
    if (hf_estimate(d, 0.5, 0.0, HF_TARGET_OUTER_CIRCLE, 1000, 3, 1e-6, &e) != HF_STATUS_OK) return 5;
    hf_domain_free(d);
    if (hf_domain_new(-1.0, NULL, 0, 0, 1, &d) != HF_STATUS_INVALID_ARGUMENT) return 6;
    printf("%s|%.2f\n", hf_last_error() ? "err" : "none", e.value);
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // target/<profile>/deps/<test binary>
    std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libhullforge_ffi.a");
    assert!(lib.is_file(), "static library missing at {}", lib.display());
    let work = tempfile::tempdir().unwrap();
    let src = work.path().join("smoke.c");
    let exe = work.path().join("smoke");
    std::fs::write(&src, PROGRAM).unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let out = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(root.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .output()
        .expect("C compiler available");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let text = String::from_utf8(run.stdout).unwrap();
    let (err, value) = text.trim().split_once('|').unwrap();
    assert_eq!(err, "err");
    let v: f64 = value.parse().unwrap();
    assert!((v - 0.5).abs() < 0.1);
}
