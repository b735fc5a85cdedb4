use std::path::Path;

use dro_core::cloud::{load_obj, sample_object_cloud};
use dro_core::io::{encode_cloud, encode_matrix, read_cloud, read_matrix};
use dro_core::losses::{
    contrastive_loss, dro_l1_loss, penetration_loss, pose_loss, ContrastiveParams, WeightNormalization,
};
use dro_core::metrics::read_grasps;
use dro_core::pipeline::{load_model_with, run_roundtrip, sample_canonical};
use dro_core::{
    cloud_fk, recover_grasp, Dtype, JointConfig, KinematicModel, LinkClouds, LinkPoseSet, PointCloud,
    Scene, StoredMatrix,
};
use serde_json::{json, Map, Value};

use crate::bench;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult, Context};
use crate::manifest::{json_bytes, write_bytes, write_json, Manifest};
use crate::{BenchArgs, ComputeDroArgs, ConfigSource, DtypeArg, LossesArgs, Outcome, RecoverArgs, RoundtripArgs};

pub const ROBOT_CLOUD_FILE: &str = "robot.dropc";
pub const OBJECT_CLOUD_FILE: &str = "object.dropc";
pub const DRO_FILE: &str = "dro.dromx";
pub const RESULT_FILE: &str = "result.json";
pub const RECOVERED_CLOUD_FILE: &str = "recovered.dropc";
pub const ROUNDTRIP_FILE: &str = "roundtrip.json";
pub const BENCH_FILE: &str = "bench.json";
pub const LOSSES_FILE: &str = "losses.json";

fn done(summary: Value) -> CliResult<Outcome> {
    Ok(Outcome {
        summary,
        tolerance_failure: None,
    })
}

fn load_model(cfg: &RunConfig) -> CliResult<(KinematicModel, &Path)> {
    let path = cfg.model_path()?;
    Ok((load_model_with(path, cfg.load).in_file(path)?, path))
}

fn load_cloud(path: &Path) -> CliResult<PointCloud> {
    read_cloud(path).in_file(path)
}

fn load_canonical(model: &KinematicModel, path: &Path) -> CliResult<LinkClouds> {
    LinkClouds::from_point_cloud(model, &load_cloud(path)?).in_file(path)
}

/// Writes a payload file and records it in the manifest.
fn emit(manifest: &mut Manifest, path: &Path, bytes: &[u8], extra: Value) -> CliResult<()> {
    write_bytes(path, bytes)?;
    manifest.output(path, bytes, extra);
    Ok(())
}

/// A configuration from `--q` or a grasp record, checked against the model.
fn configuration(src: &ConfigSource, model: &KinematicModel, manifest: &mut Manifest) -> CliResult<JointConfig> {
    let q = match (&src.q, &src.grasp) {
        (Some(values), _) => JointConfig::new(values.clone()),
        (None, Some(path)) => {
            let file = std::fs::File::open(path).map_err(|e| CliError::file(path, e.into()))?;
            let records = read_grasps(std::io::BufReader::new(file)).in_file(path)?;
            let record = records.into_iter().nth(src.record).ok_or_else(|| {
                CliError::validation(format!("{}: no grasp record {}", path.display(), src.record))
            })?;
            record.validate(model).in_file(path)?;
            manifest.input("grasp", path)?;
            manifest.set("grasp_record", json!(src.record));
            record.q
        }
        (None, None) => return Err(CliError::validation("a configuration is required (--q or --grasp)")),
    };
    model.check_dim(&q).context(|| "configuration".into())?;
    if q.iter().any(|v| !v.is_finite()) {
        return Err(CliError::validation("configuration values must be finite"));
    }
    Ok(q)
}

pub fn sample(cfg: &RunConfig) -> CliResult<Outcome> {
    let (model, model_path) = load_model(cfg)?;
    let object_path = cfg.object_path()?;
    let mesh_dir = cfg.mesh_dir()?;
    let sampling = cfg.sampling();
    let canonical = sample_canonical(&model, &mesh_dir, &sampling)
        .context(|| format!("sampling links of {}", model_path.display()))?;
    let mesh = load_obj(object_path).in_file(object_path)?;
    let object = sample_object_cloud(&mesh, &sampling).in_file(object_path)?;

    let mut manifest = Manifest::new("sample");
    manifest.set("seed", json!(cfg.seed));
    manifest.set("sampling", json!(sampling));
    manifest.set("load", json!(cfg.load));
    manifest.set("robot", json!(model.name()));
    manifest.input("model", model_path)?;
    manifest.input("object", object_path)?;

    let per_link: Map<String, Value> = canonical
        .names()
        .iter()
        .zip(canonical.iter())
        .filter(|(_, (_, pts))| !pts.is_empty())
        .map(|(name, (_, pts))| (name.clone(), json!(pts.len())))
        .collect();
    let dir = &cfg.output_dir;
    let robot_path = dir.join(ROBOT_CLOUD_FILE);
    let robot_bytes = encode_cloud(&canonical.to_point_cloud()).in_file(&robot_path)?;
    emit(
        &mut manifest,
        &robot_path,
        &robot_bytes,
        json!({"points": canonical.total_points(), "links": per_link}),
    )?;
    let object_path_out = dir.join(OBJECT_CLOUD_FILE);
    let object_bytes = encode_cloud(&object).in_file(&object_path_out)?;
    emit(&mut manifest, &object_path_out, &object_bytes, json!({"points": object.len()}))?;
    manifest.write(dir)?;
    done(json!({
        "robot_cloud": robot_path.display().to_string(),
        "robot_points": canonical.total_points(),
        "object_cloud": object_path_out.display().to_string(),
        "object_points": object.len(),
    }))
}

pub fn compute_dro(cfg: &RunConfig, args: &ComputeDroArgs) -> CliResult<Outcome> {
    let (model, model_path) = load_model(cfg)?;
    let mut manifest = Manifest::new("compute-dro");
    let q = configuration(&args.q, &model, &mut manifest)?;
    let canonical = load_canonical(&model, &args.robot_cloud)?;
    let object = load_cloud(&args.object_cloud)?;
    let posed = cloud_fk(&model, &q, &canonical).context(|| "posing robot cloud".into())?;
    let dro = dro_core::compute_dro(&posed, &object, args.blocks).context(|| "computing distance matrix".into())?;
    let dtype = match args.dtype {
        DtypeArg::F64 => Dtype::F64,
        DtypeArg::F32 => Dtype::F32,
    };
    let path = cfg.output_dir.join(DRO_FILE);
    let bytes = encode_matrix(&StoredMatrix::from_dro(&dro, dtype)).in_file(&path)?;

    manifest.set("q", json!(q));
    manifest.set("blocks", json!(args.blocks));
    manifest.set("load", json!(cfg.load));
    manifest.input("model", model_path)?;
    manifest.input("robot_cloud", &args.robot_cloud)?;
    manifest.input("object_cloud", &args.object_cloud)?;
    let shape = json!({"rows": dro.rows(), "cols": dro.cols(), "dtype": format!("{dtype:?}").to_lowercase()});
    emit(&mut manifest, &path, &bytes, shape.clone())?;
    manifest.write(&cfg.output_dir)?;
    done(json!({"dro": path.display().to_string(), "shape": shape}))
}

pub fn recover(cfg: &RunConfig, args: &RecoverArgs) -> CliResult<Outcome> {
    let (model, model_path) = load_model(cfg)?;
    let mut manifest = Manifest::new("recover");
    let q_init = configuration(&args.q_init, &model, &mut manifest)?;
    let canonical = load_canonical(&model, &args.robot_cloud)?;
    let object = load_cloud(&args.object_cloud)?;
    let dro = read_matrix(&args.dro)
        .and_then(StoredMatrix::into_dro)
        .in_file(&args.dro)?;
    let result = recover_grasp(&model, &canonical, &dro, &object, &q_init, &cfg.solve)
        .context(|| "recovering grasp".into())?;

    manifest.set("q_init", json!(q_init));
    manifest.set("solve", json!(cfg.solve));
    manifest.set("load", json!(cfg.load));
    manifest.input("model", model_path)?;
    manifest.input("dro", &args.dro)?;
    manifest.input("robot_cloud", &args.robot_cloud)?;
    manifest.input("object_cloud", &args.object_cloud)?;

    let payload = json!({
        "q": result.q,
        "residual": result.report.final_residual,
        "iterations": result.report.iterations,
        "converged": result.report.converged,
        "fallback_links": result.fallback_links,
        "link_poses": result.link_poses.to_json(),
    });
    let dir = &cfg.output_dir;
    let result_path = dir.join(RESULT_FILE);
    emit(&mut manifest, &result_path, &json_bytes(&payload), json!({}))?;
    if args.emit_cloud {
        let path = dir.join(RECOVERED_CLOUD_FILE);
        let bytes = encode_cloud(&result.recovered_cloud).in_file(&path)?;
        emit(&mut manifest, &path, &bytes, json!({"points": result.recovered_cloud.len()}))?;
    }
    write_json(&dir.join("recover.timings.json"), &json!({"elapsed": result.elapsed}))?;
    manifest.write(dir)?;
    let mut summary = result.to_json();
    summary["fallback_links"] = json!(result.fallback_links);
    done(summary)
}

/// Loads the configured hand and object and records both as manifest inputs.
fn load_scene(cfg: &RunConfig, manifest: &mut Manifest) -> CliResult<Scene> {
    let model_path = cfg.model_path()?;
    let object_path = cfg.object_path()?;
    let mesh_dir = cfg.mesh_dir()?;
    let scene = Scene::load_with(model_path, cfg.load, &mesh_dir, object_path, &cfg.sampling())
        .context(|| format!("loading {} with {}", model_path.display(), object_path.display()))?;
    manifest.input("model", model_path)?;
    manifest.input("object", object_path)?;
    Ok(scene)
}

pub fn roundtrip(cfg: &RunConfig, args: &RoundtripArgs) -> CliResult<Outcome> {
    for tol in [args.mean_tolerance, args.max_tolerance] {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(CliError::validation("tolerances must be positive"));
        }
    }
    let mut manifest = Manifest::new("roundtrip");
    let scene = load_scene(cfg, &mut manifest)?;
    let s = run_roundtrip(&scene, args.trials, cfg.seed, &cfg.solve).context(|| "round trip".into())?;
    let passed = s.n_trials == 0 || (s.mean_link_error < args.mean_tolerance && s.max_link_error < args.max_tolerance);
    let trials: Vec<Value> = s
        .trials
        .iter()
        .map(|t| {
            json!({
                "q_star": t.q_star,
                "q": t.q,
                "mean_link_error": t.mean_link_error,
                "max_link_error": t.max_link_error,
                "mean_joint_error": t.mean_joint_error,
                "converged": t.converged,
                "iterations": t.iterations,
            })
        })
        .collect();
    let report = json!({
        "robot": scene.model.name(),
        "n_dof": scene.model.n_dof(),
        "seed": cfg.seed,
        "n_trials": s.n_trials,
        "mean_link_error": s.mean_link_error,
        "max_link_error": s.max_link_error,
        "mean_joint_error": s.mean_joint_error,
        "converged_trials": s.converged_trials,
        "tolerances": {"mean_link_error": args.mean_tolerance, "max_link_error": args.max_tolerance},
        "passed": passed,
        "trials": trials,
    });
    let timings = json!({"mean_elapsed": s.mean_elapsed, "wall_time_s": s.wall_time_s});

    manifest.set("seed", json!(cfg.seed));
    manifest.set("n_trials", json!(args.trials));
    manifest.set("sampling", json!(cfg.sampling()));
    manifest.set("solve", json!(cfg.solve));
    manifest.set("load", json!(cfg.load));
    let dir = &cfg.output_dir;
    emit(&mut manifest, &dir.join(ROUNDTRIP_FILE), &json_bytes(&report), json!({}))?;
    write_json(&dir.join("roundtrip.timings.json"), &timings)?;
    manifest.write(dir)?;

    let mut summary = report;
    summary.as_object_mut().expect("object").remove("trials");
    summary["timings"] = timings;
    let tolerance_failure = (!passed).then(|| {
        format!(
            "round trip exceeded tolerance: mean {:.3e} m (limit {:.1e}), max {:.3e} m (limit {:.1e})",
            s.mean_link_error, args.mean_tolerance, s.max_link_error, args.max_tolerance
        )
    });
    Ok(Outcome {
        summary,
        tolerance_failure,
    })
}

pub fn bench(cfg: &RunConfig, args: &BenchArgs) -> CliResult<Outcome> {
    let mut manifest = Manifest::new("bench");
    let scene = load_scene(cfg, &mut manifest)?;
    let report = bench::measure(&scene, cfg.seed, args.runs, args.warmup, &cfg.solve)?;
    let value = json!(report);
    manifest.set("seed", json!(cfg.seed));
    manifest.set("runs", json!(args.runs));
    manifest.set("warmup", json!(args.warmup));
    manifest.set("n_dof", json!(scene.model.n_dof()));
    manifest.set("matrix", json!([scene.canonical.total_points(), scene.object.len()]));
    manifest.set("threads", json!(rayon::current_num_threads()));
    manifest.set(
        "scope",
        json!("geometric stages only (multilateration, registration, optimization); network inference is not timed"),
    );
    let path = cfg.output_dir.join(BENCH_FILE);
    emit(&mut manifest, &path, &json_bytes(&value), json!({}))?;
    manifest.write(&cfg.output_dir)?;
    done(value)
}

fn load_features(path: &Path) -> CliResult<nalgebra::DMatrix<f64>> {
    Ok(read_matrix(path).in_file(path)?.into_dmatrix())
}

fn load_poses(path: &Path) -> CliResult<LinkPoseSet> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::file(path, e.into()))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| CliError::file(path, e.into()))?;
    LinkPoseSet::from_json(&value).in_file(path)
}

pub fn losses(cfg: &RunConfig, args: &LossesArgs) -> CliResult<Outcome> {
    let mut manifest = Manifest::new("losses");
    let mut out = Map::new();
    if let (Some(pred), Some(truth)) = (&args.dro_pred, &args.dro_true) {
        let a = read_matrix(pred).and_then(StoredMatrix::into_dro).in_file(pred)?;
        let b = read_matrix(truth).and_then(StoredMatrix::into_dro).in_file(truth)?;
        out.insert("dro_l1".into(), json!(dro_l1_loss(&a, &b).context(|| "dro_l1".into())?));
        manifest.input("dro_pred", pred)?;
        manifest.input("dro_true", truth)?;
    }
    if let (Some(fa), Some(fb), Some(pts)) = (&args.features_a, &args.features_b, &args.feature_points) {
        let params = ContrastiveParams {
            tau: args.tau,
            lambda: args.lambda,
        };
        let norm = if args.per_row {
            WeightNormalization::PerRow
        } else {
            WeightNormalization::Global
        };
        let points = load_cloud(pts)?.points;
        let loss = contrastive_loss(&load_features(fa)?, &load_features(fb)?, &points, &params, norm)
            .context(|| "contrastive".into())?;
        out.insert("contrastive".into(), json!(loss));
        manifest.set("contrastive", json!({"tau": args.tau, "lambda": args.lambda, "normalization": norm}));
        manifest.input("features_a", fa)?;
        manifest.input("features_b", fb)?;
        manifest.input("feature_points", pts)?;
    }
    if let (Some(pred), Some(truth)) = (&args.poses_pred, &args.poses_true) {
        let (p, t) = (load_poses(pred)?, load_poses(truth)?);
        if p.is_empty() {
            return Err(CliError::validation(format!("{}: no link poses", pred.display())));
        }
        let mut total = 0.0;
        for (link, pose) in p.iter() {
            let gt = t.get(link).ok_or_else(|| {
                CliError::validation(format!("{}: link `{link}` has no ground-truth pose", truth.display()))
            })?;
            total += pose_loss(pose, gt).context(|| format!("pose loss of `{link}`"))?;
        }
        out.insert("pose".into(), json!(total / p.len() as f64));
        manifest.input("poses_pred", pred)?;
        manifest.input("poses_true", truth)?;
    }
    if let (Some(cloud), Some(mesh)) = (&args.cloud, &args.mesh) {
        let points = load_cloud(cloud)?.points;
        let mesh_data = load_obj(mesh).in_file(mesh)?;
        out.insert(
            "penetration".into(),
            json!(penetration_loss(&points, &mesh_data).in_file(mesh)?),
        );
        manifest.input("cloud", cloud)?;
        manifest.input("mesh", mesh)?;
    }
    if out.is_empty() {
        return Err(CliError::validation(
            "no loss selected: pass --dro-pred/--dro-true, --features-a/--features-b/--feature-points, \
             --poses-pred/--poses-true or --cloud/--mesh",
        ));
    }
    let value = Value::Object(out);
    let path = cfg.output_dir.join(LOSSES_FILE);
    emit(&mut manifest, &path, &json_bytes(&value), json!({}))?;
    manifest.write(&cfg.output_dir)?;
    done(value)
}

