use std::process::Command;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_noonlike"));
    c.env_remove(noonlike::cli::OUTPUT_DIR_ENV);
    c
}

#[test]
fn figures_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    for id in ["2", "3", "4", "6"] {
        for format in ["csv", "json"] {
            let paths: Vec<_> = (0..2)
                .map(|k| dir.path().join(format!("fig{id}_{k}.{format}")))
                .collect();
            for p in &paths {
                let status = bin()
                    .args(["figure", "--id", id, "--format", format, "--output"])
                    .arg(p)
                    .status()
                    .unwrap();
                assert!(status.success());
            }
            assert_eq!(
                std::fs::read(&paths[0]).unwrap(),
                std::fs::read(&paths[1]).unwrap()
            );
        }
    }
}

#[test]
fn figure_headers() {
    let expected = [
        ("2", "n_bar,noon,ecs,escs_r1,esvs"),
        ("3", "n_bar,ecs,escs_r0.4,escs_r0.8,escs_r1.2,esvs"),
        ("4", "r,n_bar_balanced,balanced,n_bar_unbalanced,unbalanced"),
        ("6", "n_bar,noon_effective,ecs,phi"),
    ];
    for (id, header) in expected {
        let out = bin().args(["figure", "--id", id]).output().unwrap();
        let text = String::from_utf8(out.stdout).unwrap();
        assert_eq!(text.lines().next(), Some(header));
        let rows = text.lines().count() - 1;
        assert_eq!(
            rows,
            match id {
                "2" | "3" => 40,
                "4" => 60,
                _ => 20,
            }
        );
    }
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .env(noonlike::cli::OUTPUT_DIR_ENV, dir.path())
        .args(["figure", "--id", "2", "--format", "json"])
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(dir.path().join("figure2.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["columns"][0], "n_bar");
    assert_eq!(v["rows"][0][1], 60.0);
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| bin().args(args).output().unwrap().status.code();
    assert_eq!(
        code(&["qcrb", "--family", "noon", "--d", "5", "--n", "2"]),
        Some(0)
    );
    assert_eq!(code(&["figure", "--id", "7"]), Some(2));
    assert_eq!(code(&["compare", "--d", "5"]), Some(2));
    assert_eq!(code(&["compare", "--d", "1", "--n-bar", "0.5"]), Some(1));
    assert_eq!(
        code(&["experiment", "--circuit", "/nonexistent/circuit.toml"]),
        Some(1)
    );
    assert_eq!(code(&["--help"]), Some(0));
}

#[test]
fn qcrb_command_prints_noon_value() {
    let out = bin()
        .args(["qcrb", "--family", "noon", "--d", "5", "--n", "2"])
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        text,
        "d,qcrb,f,r_ratio,b2,n_tilde,n_bar,noon_bound\n5,3.75,0.5,1,0.166666666667,2,2,3.75\n"
    );
}

#[test]
fn experiment_with_shipped_circuit_file() {
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/configs/reference_circuit.toml"
    );
    let out = bin()
        .args(["experiment", "--r", "1", "--circuit", path])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let n_bar = row[header.iter().position(|c| *c == "n_bar").unwrap()];
    assert_eq!(n_bar, "2.24618590785");
}
