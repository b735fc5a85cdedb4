mod common;

use std::fs;
use std::path::Path;

use common::{csv, dro, dro_env, object, p, robot, sample};
use dro_core::io::{read_cloud, read_matrix, MATRIX_HEADER_LEN};
use dro_core::metrics::{write_grasps, GraspRecord, Provenance};
use dro_core::pipeline::{load_model, open_hand_init, random_configuration, Scene};
use dro_core::{LinkClouds, SamplingConfig, SolveParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

/// Every file except wall-clock timing reports must match byte for byte.
fn assert_same_payloads(a: &Path, b: &Path) {
    assert_eq!(files(a), files(b));
    for name in files(a) {
        if name.ends_with("timings.json") || name.starts_with("bench") {
            continue;
        }
        assert!(fs::read(a.join(&name)).unwrap() == fs::read(b.join(&name)).unwrap(), "{name} differs");
    }
}

#[test]
fn sample_is_deterministic_and_records_inputs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(sample(a.path(), "three_finger", "sphere", 5).code, 0);
    assert_eq!(sample(b.path(), "three_finger", "sphere", 5).code, 0);
    assert_same_payloads(a.path(), b.path());

    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(a.path().join("sample.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
    let model_hash = manifest["inputs"]["model"]["sha256"].as_str().unwrap();
    assert_eq!(model_hash.len(), 64);
    assert_eq!(manifest["outputs"]["robot.dropc"]["points"], 512);

    let c = tempfile::tempdir().unwrap();
    sample(c.path(), "three_finger", "sphere", 6);
    assert!(fs::read(a.path().join("object.dropc")).unwrap() != fs::read(c.path().join("object.dropc")).unwrap());
}

#[test]
fn one_link_model_yields_one_full_robot_cloud() {
    let dir = tempfile::tempdir().unwrap();
    let urdf = dir.path().join("block.urdf");
    fs::write(
        &urdf,
        r#"<robot name="block"><link name="body"><visual><geometry><box size="0.05 0.03 0.02"/></geometry></visual></link></robot>"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let run = dro(&out, &["sample", "--model", p(&urdf), "--object", p(&object("box"))]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert_eq!(files(&out).iter().filter(|f| f.ends_with(".dropc")).count(), 2);
    let cloud = read_cloud(&out.join("robot.dropc")).unwrap();
    assert_eq!(cloud.len(), 512);
    let labels = cloud.labels.unwrap();
    assert!(labels.ids.iter().all(|&i| labels.names[i as usize] == "body"));
}

#[test]
fn missing_mesh_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let urdf = dir.path().join("hand.urdf");
    fs::write(
        &urdf,
        r#"<robot name="h"><link name="palm"><visual><geometry><mesh filename="package://hand/meshes/palm.obj"/></geometry></visual></link></robot>"#,
    )
    .unwrap();
    let run = dro(&dir.path().join("out"), &["sample", "--model", p(&urdf), "--object", p(&object("box"))]);
    assert_eq!(run.code, 3);
    assert!(run.stderr.contains("palm.obj"), "{}", run.stderr);

    let run = dro(
        &dir.path().join("out"),
        &["sample", "--model", "/no/such/hand.urdf", "--object", p(&object("box"))],
    );
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("/no/such/hand.urdf"), "{}", run.stderr);
}

/// Sample, pose at a grasp record, recover from the open hand.
#[test]
fn compute_dro_then_recover_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert_eq!(sample(out, "shadow_hand", "sphere", 2).code, 0);
    let model = load_model(&robot("shadow_hand")).unwrap();
    let q_star = random_configuration(&model, &mut ChaCha8Rng::seed_from_u64(9));
    let grasps = out.join("grasps.jsonl");
    let record = GraspRecord {
        robot: "shadow_hand".into(),
        object: "sphere".into(),
        q: q_star.clone(),
        provenance: Provenance::Manual,
        success: None,
    };
    write_grasps(fs::File::create(&grasps).unwrap(), &[record]).unwrap();

    let model_path = robot("shadow_hand");
    let (robot_cloud, object_cloud) = (out.join("robot.dropc"), out.join("object.dropc"));
    let run = dro(
        out,
        &[
            "compute-dro", "--model", p(&model_path), "--robot-cloud", p(&robot_cloud),
            "--object-cloud", p(&object_cloud), "--grasp", p(&grasps),
        ],
    );
    assert_eq!(run.code, 0, "{}", run.stderr);
    let dro_path = out.join("dro.dromx");
    assert_eq!(fs::metadata(&dro_path).unwrap().len() as usize, 6 + 1 + 4 + 4 + 4 + 512 * 512 * 8);

    // Naive recompute: pose every canonical point with the link poses, then loop.
    let canonical = LinkClouds::from_point_cloud(&model, &read_cloud(&robot_cloud).unwrap()).unwrap();
    let object_pts = read_cloud(&object_cloud).unwrap().points;
    let poses = model.link_poses(&q_star).unwrap();
    let matrix = read_matrix(&dro_path).unwrap().into_dro().unwrap();
    let mut row = 0;
    for (link, pts) in canonical.iter() {
        for c in pts {
            let x = poses[link].transform_point(c);
            for (j, o) in object_pts.iter().enumerate() {
                assert!((matrix.get(row, j) - (x - o).norm()).abs() < 1e-12);
            }
            row += 1;
        }
    }

    let q_init = csv(&open_hand_init(&model, &q_star));
    let q_arg = format!("--q={q_init}");
    let run = dro(
        out,
        &[
            "recover", "--model", p(&model_path), "--robot-cloud", p(&robot_cloud), "--object-cloud",
            p(&object_cloud), "--dro", p(&dro_path), &q_arg, "--emit-cloud",
        ],
    );
    assert_eq!(run.code, 0, "{}", run.stderr);
    let result: serde_json::Value = serde_json::from_slice(&fs::read(out.join("result.json")).unwrap()).unwrap();
    let q: Vec<f64> = serde_json::from_value(result["q"].clone()).unwrap();
    let got = model.link_poses(&q).unwrap();
    let errors: Vec<f64> = model
        .target_links()
        .map(|l| (got[l].translation - poses[l].translation).norm())
        .collect();
    assert!(errors.iter().sum::<f64>() / (errors.len() as f64) < 1e-3);
    assert!(errors.iter().copied().fold(0.0, f64::max) < 5e-3);
    assert_eq!(result["converged"], true);

    let recovered = read_cloud(&out.join("recovered.dropc")).unwrap();
    assert_eq!(recovered.len(), 512);
    assert_eq!(recovered.labels.unwrap().names, canonical.to_point_cloud().labels.unwrap().names);
}

#[test]
fn malformed_inputs_fail_with_the_right_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    sample(out, "three_finger", "box", 1);
    let model = load_model(&robot("three_finger")).unwrap();
    let q = format!("--q={}", csv(&open_hand_init(&model, &vec![0.0; model.n_dof()])));
    let m = robot("three_finger");
    let (rc, oc) = (out.join("robot.dropc"), out.join("object.dropc"));
    let run = dro(
        out,
        &["compute-dro", "--model", p(&m), "--robot-cloud", p(&rc), "--object-cloud", p(&oc), &q],
    );
    assert_eq!(run.code, 0, "{}", run.stderr);

    // Truncated matrix: format error carrying the byte offset where data ran out.
    let bytes = fs::read(out.join("dro.dromx")).unwrap();
    let short = out.join("short.dromx");
    fs::write(&short, &bytes[..MATRIX_HEADER_LEN + 1000]).unwrap();
    let recover = |dro_file: &Path, object_file: &Path| {
        dro(
            out,
            &[
                "recover", "--model", p(&m), "--robot-cloud", p(&rc), "--object-cloud", p(object_file),
                "--dro", p(dro_file), &q,
            ],
        )
    };
    let run = recover(&short, &oc);
    assert_eq!(run.code, 3);
    assert!(run.stderr.contains(&format!("byte {}", MATRIX_HEADER_LEN + 1000)), "{}", run.stderr);

    // Matrix/object shape mismatch is a validation error raised before recovery.
    let other = tempfile::tempdir().unwrap();
    let cfg = other.path().join("cfg.json");
    fs::write(&cfg, r#"{"sampling": {"n_object": 100}}"#).unwrap();
    let run = dro(
        other.path(),
        &["--config", p(&cfg), "sample", "--model", p(&m), "--object", p(&object("box"))],
    );
    assert_eq!(run.code, 0, "{}", run.stderr);
    let run = recover(&out.join("dro.dromx"), &other.path().join("object.dropc"));
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("columns"), "{}", run.stderr);
    assert!(!run.stderr.contains("multilateration"), "{}", run.stderr);

    // Wrong configuration length.
    let run = dro(
        out,
        &["compute-dro", "--model", p(&m), "--robot-cloud", p(&rc), "--object-cloud", p(&oc), "--q=0,0,0"],
    );
    assert_eq!(run.code, 2);

    // Unknown flag: usage error.
    assert_eq!(dro(out, &["sample", "--nope"]).code, 2);
}

#[test]
fn roundtrip_reports_and_gates_on_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let args = |trials: &str, extra: &[&'static str]| {
        let mut v = vec![
            "roundtrip".to_string(),
            "--model".into(),
            p(&robot("three_finger")).into(),
            "--object".into(),
            p(&object("sphere")).into(),
            "--trials".into(),
            trials.into(),
        ];
        v.extend(extra.iter().map(|s| s.to_string()));
        v
    };
    let call = |out: &Path, a: Vec<String>| dro(out, &a.iter().map(String::as_str).collect::<Vec<_>>());

    let empty = call(dir.path(), args("0", &[]));
    assert_eq!(empty.code, 0);
    let s = empty.json();
    assert_eq!(s["n_trials"], 0);
    assert_eq!(s["mean_link_error"].to_string(), "0.0");

    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let ra = call(&a, args("8", &[]));
    assert_eq!(ra.code, 0, "{}", ra.stderr);
    assert!(ra.json()["mean_link_error"].as_f64().unwrap() < 1e-3);
    call(&b, args("8", &[]));
    assert_same_payloads(&a, &b);

    let strict = call(&dir.path().join("c"), args("2", &["--mean-tolerance", "1e-12"]));
    assert_eq!(strict.code, 4);
    assert!(strict.stderr.contains("tolerance"));
}

#[test]
fn bench_schema_and_thread_override() {
    let dir = tempfile::tempdir().unwrap();
    let run = dro_env(
        dir.path(),
        &[
            "--threads", "1", "bench", "--model", p(&robot("three_finger")), "--object", p(&object("sphere")),
            "--runs", "3", "--warmup", "1",
        ],
        &[("DRO_THREADS", "2")],
    );
    assert_eq!(run.code, 0, "{}", run.stderr);
    let report = run.json();
    let keys: Vec<&String> = report.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["multilateration", "registration", "optimization", "total"]);
    for stage in report.as_object().unwrap().values() {
        let fields: Vec<&String> = stage.as_object().unwrap().keys().collect();
        assert_eq!(fields, ["median_s", "p95_s"]);
        assert!(stage["median_s"].as_f64().unwrap() <= stage["p95_s"].as_f64().unwrap());
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("bench.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["threads"], 2);

    let bad = dro_env(dir.path(), &["bench"], &[("DRO_THREADS", "lots")]);
    assert_eq!(bad.code, 2);
}

#[test]
fn multilateration_time_grows_with_object_size() {
    let medians: Vec<f64> = [128, 256, 512]
        .iter()
        .map(|&n| {
            let sampling = SamplingConfig {
                n_object: n,
                ..SamplingConfig::default()
            };
            let scene = Scene::load(
                &robot("shadow_hand"),
                &common::assets().join("robots"),
                &object("sphere"),
                &sampling,
            )
            .unwrap();
            dro_cli::bench::measure(&scene, 0, 9, 2, &SolveParams::default())
                .unwrap()
                .multilateration
                .median_s
        })
        .collect();
    assert!(medians.windows(2).all(|w| w[0] <= w[1]), "{medians:?}");
}

#[test]
fn losses_command_emits_requested_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    sample(out, "three_finger", "sphere", 4);
    let m = robot("three_finger");
    let model = load_model(&m).unwrap();
    let (rc, oc) = (out.join("robot.dropc"), out.join("object.dropc"));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut matrices = Vec::new();
    for name in ["a", "b"] {
        let q = format!("--q={}", csv(&random_configuration(&model, &mut rng)));
        let sub = out.join(name);
        let run = dro(
            &sub,
            &["compute-dro", "--model", p(&m), "--robot-cloud", p(&rc), "--object-cloud", p(&oc), &q],
        );
        assert_eq!(run.code, 0, "{}", run.stderr);
        matrices.push(sub.join("dro.dromx"));
    }
    let run = dro(
        out,
        &[
            "losses", "--dro-pred", p(&matrices[0]), "--dro-true", p(&matrices[1]), "--cloud", p(&rc), "--mesh",
            p(&object("sphere")),
        ],
    );
    assert_eq!(run.code, 0, "{}", run.stderr);
    let v = run.json();
    let a = read_matrix(&matrices[0]).unwrap().values;
    let b = read_matrix(&matrices[1]).unwrap().values;
    let naive = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64;
    assert!((v["dro_l1"].as_f64().unwrap() - naive).abs() < 1e-12);
    assert!(v["penetration"].as_f64().unwrap() >= 0.0);
    assert!(v.get("contrastive").is_none());

    assert_eq!(dro(out, &["losses"]).code, 2);
}
