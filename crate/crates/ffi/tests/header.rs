//! The generated header is consistent with the exported symbols and usable
//! from a C compiler.

use std::path::{Path, PathBuf};
use std::process::Command;

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include").join("manymac.h")
}

const EXPORTS: [&str; 13] = [
    "mm_status_string",
    "mm_last_error_message",
    "mm_config_new",
    "mm_config_free",
    "mm_bound_evaluate",
    "mm_bound_evaluate_named",
    "mm_q_func_ln",
    "mm_q_inv_ln",
    "mm_se_fixed_point",
    "mm_replica_point",
    "mm_amp_sim_new",
    "mm_amp_sim_run",
    "mm_amp_sim_trace",
];

#[test]
fn header_declares_every_export() {
    let text = std::fs::read_to_string(header()).expect("header generated by build.rs");
    for f in EXPORTS.iter().chain(&["mm_amp_sim_free"]) {
        assert!(text.contains(&format!("{f}(")), "missing {f}");
    }
    assert!(text.contains("typedef struct MmConfig MmConfig;"));
    assert!(text.contains("typedef struct MmAmpSim MmAmpSim;"));
    assert!(text.contains("MM_STATUS_OK = 0"));
    assert!(text.contains("MM_BOUND_KIND_CONVERSE = 7"));
}

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "manymac.h"

int main(void) {
    MmConfig *cfg = NULL;
    if (mm_config_new(100.0, 0.01, 0.1, &cfg) != MM_STATUS_OK) return 10;
    MmBoundResult r;
    if (mm_bound_evaluate(cfg, MM_BOUND_KIND_AMP, &r) != MM_STATUS_OK) return 11;
    if (!r.feasible || !(r.ebno_db > 0.0 && r.ebno_db < 30.0)) return 12;
    MmBoundResult c;
    if (mm_bound_evaluate_named(cfg, "converse", &c) != MM_STATUS_OK) return 13;
    if (!(c.ebno_db <= r.ebno_db)) return 14;
    mm_config_free(cfg);

    MmConfig *bad = NULL;
    if (mm_config_new(100.0, 2.0, 0.1, &bad) != MM_STATUS_DOMAIN) return 20;
    char msg[256];
    size_t n = mm_last_error_message(msg, sizeof msg);
    if (n == 0) return 21;

    MmAmpSim *sim = NULL;
    if (mm_amp_sim_new(256, 0.1, 2, 100.0, 3, &sim) != MM_STATUS_OK) return 30;
    MmAmpSummary s;
    if (mm_amp_sim_run(sim, 8, 1, &s) != MM_STATUS_OK) return 31;
    mm_amp_sim_free(sim);
    printf("%.6f %.6f %zu\n", r.ebno_db, c.ebno_db, s.iters);
    return fabs(mm_q_func_ln(0.0) - log(0.5)) < 1e-12 ? 0 : 40;
}
"#;

#[test]
fn c_program_links_against_static_library() {
    // Test binaries live in target/<profile>/deps; the library one level up.
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libmanymac_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    let bin = dir.path().join("probe");
    std::fs::write(&src, PROGRAM).unwrap();
    let include = header().parent().unwrap().to_path_buf();
    let status = Command::new(std::env::var("CC").unwrap_or_else(|_| "cc".into()))
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl"])
        .arg("-o")
        .arg(&bin)
        .status()
        .expect("C compiler available");
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "probe exited with {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    let line = String::from_utf8(out.stdout).unwrap();
    assert_eq!(line.split_whitespace().count(), 3, "{line}");
}
