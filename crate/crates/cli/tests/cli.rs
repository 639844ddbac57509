use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_poincare-chaos"))
}

#[test]
fn basis_run_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("basis");
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        format!(
            r#"{{"measure": {{"family": "uniform", "lower": 0, "upper": 1}}, "n_modes": 4, "output_dir": {:?}}}"#,
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    let st = bin().arg("basis").arg(&spec).status().unwrap();
    assert!(st.success());
    let curves = std::fs::read_to_string(out.join("basis.csv")).unwrap();
    assert!(curves.starts_with("x,psi_1,"));
    assert!(out.join("basis_spectrum.json").exists());

    let results = dir.path().join("run");
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"model": "toy", "degree": 2, "ed_sizes": [12], "n_bootstrap": 1, "validation_size": 200,
                "mesh_size": 100, "reference_mc": 0, "seed": 3, "output_dir": {:?}}}"#,
            results.to_str().unwrap()
        ),
    )
    .unwrap();
    let st = bin().arg("run").arg(&cfg).env("POINCARE_CHAOS_WORKERS", "2").status().unwrap();
    assert!(st.success());
    assert!(results.join("results.csv").exists());
    assert!(results.join("summary.json").exists());

    let out = bin().arg("report").arg(&results).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("PoinCE-der-aggr"));
}

#[test]
fn bad_config_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"model": "toy", "ed_sizes": [20, 10], "seed": 1, "output_dir": "x"}"#).unwrap();
    let st = bin().arg("run").arg(&cfg).status().unwrap();
    assert!(!st.success());
    assert!(!bin().arg("run").arg(dir.path().join("missing.json")).status().unwrap().success());
}
