use avsi::geometry::Vec3;
use avsi::scene::SceneConfig;
use avsi::simkernel::{execute_trial, FailureMode, Pipeline, RimModel, TrialConfig};

fn exact_config(shunt_od: f64, pipeline: Pipeline) -> TrialConfig {
    TrialConfig {
        shunt_outer_diameter: shunt_od,
        scene: SceneConfig::noise_free(),
        pipeline,
        rim_model: RimModel { grasp_noise_sigma: 0.0, margin_noise_sigma: 0.0, ..RimModel::default() },
        ..TrialConfig::default()
    }
}

const FULL: Pipeline = Pipeline { use_dilation: true, use_screw: true };
const NO_SCREW: Pipeline = Pipeline { use_dilation: true, use_screw: false };
const NO_DILATION: Pipeline = Pipeline { use_dilation: false, use_screw: false };

#[test]
fn calibrated_full_pipeline_inserts_small_shunt() {
    for seed in 0..5 {
        let o = execute_trial(&TrialConfig { seed, ..exact_config(8.0, FULL) }).unwrap();
        assert!(o.success, "{o:?}");
        assert_eq!(o.failure_mode, FailureMode::None);
        assert!(o.diagnostics.grasp_rim_dist_mm.unwrap() < 1.5);
        assert!(o.time_s > 0.0);
    }
}

#[test]
fn large_shunt_without_dilation_fails_insertion() {
    let o = execute_trial(&exact_config(14.0, NO_DILATION)).unwrap();
    assert!(!o.success);
    assert_eq!(o.failure_mode, FailureMode::S);
    assert!(o.diagnostics.grasp_rim_dist_mm.is_none());
}

#[test]
fn forced_grasp_offset_misses_the_rim() {
    let cfg = TrialConfig { grasp_offset_override: Some(Vec3::new(0.0, 0.0, 5.0)), ..exact_config(8.0, FULL) };
    let o = execute_trial(&cfg).unwrap();
    assert_eq!(o.failure_mode, FailureMode::D);
    assert!(o.diagnostics.grasp_rim_dist_mm.unwrap() > cfg.rim_model.jaw_halfwidth);
    assert!(o.diagnostics.margin_mm.is_none());
    assert!(o.time_s > 0.0);
}

#[test]
fn larger_shunts_never_do_better() {
    for pipeline in [FULL, NO_SCREW, NO_DILATION] {
        for seed in 0..10 {
            let mut cfg = TrialConfig { seed, ..TrialConfig::default() };
            cfg.pipeline = pipeline;
            let outcomes: Vec<_> = [6.0, 8.0, 10.0, 12.0, 14.0]
                .iter()
                .map(|&od| execute_trial(&TrialConfig { shunt_outer_diameter: od, ..cfg.clone() }).unwrap())
                .collect();
            for w in outcomes.windows(2) {
                assert!(w[0].success || !w[1].success);
                if let (Some(a), Some(b)) = (w[0].diagnostics.margin_mm, w[1].diagnostics.margin_mm) {
                    assert!((a - b - 1.0).abs() < 1e-9, "margin drops by the radius step");
                }
            }
        }
    }
}

#[test]
fn screw_adds_exactly_its_bonus() {
    for seed in 0..10 {
        let screw = execute_trial(&TrialConfig { seed, ..exact_config(8.0, FULL) }).unwrap();
        let plain = execute_trial(&TrialConfig { seed, ..exact_config(8.0, NO_SCREW) }).unwrap();
        let d = screw.diagnostics.capture_radius_mm.unwrap() - plain.diagnostics.capture_radius_mm.unwrap();
        assert!((d - RimModel::default().eta_screw).abs() < 1e-12);
    }
}

#[test]
fn undilated_capture_is_radius_minus_buckle_plus_bonuses() {
    let cfg = exact_config(8.0, NO_DILATION);
    let o = execute_trial(&cfg).unwrap();
    let m = &cfg.rim_model;
    let expected = cfg.scene.vessel_inner_radius - m.beta_buckle + m.eta_tilt0;
    assert!((o.diagnostics.capture_radius_mm.unwrap() - expected).abs() < 1e-12);
}

#[test]
fn trials_are_deterministic() {
    for seed in [0, 1, u64::MAX] {
        let cfg = TrialConfig { seed, ..TrialConfig::default() };
        assert_eq!(execute_trial(&cfg).unwrap(), execute_trial(&cfg).unwrap());
    }
}

#[test]
fn skipping_dilation_is_faster() {
    for seed in 0..5 {
        let full = execute_trial(&TrialConfig { seed, ..exact_config(8.0, FULL) }).unwrap();
        let bare = execute_trial(&TrialConfig { seed, ..exact_config(8.0, NO_DILATION) }).unwrap();
        assert!(bare.time_s < full.time_s);
    }
}

#[test]
fn invalid_configs_are_rejected() {
    assert!(execute_trial(&TrialConfig { shunt_outer_diameter: 16.0, ..TrialConfig::default() }).is_err());
    assert!(execute_trial(&TrialConfig { shunt_outer_diameter: -1.0, ..TrialConfig::default() }).is_err());
    let mut cfg = TrialConfig::default();
    cfg.rim_model.v_max = 0.0;
    assert!(execute_trial(&cfg).is_err());
}
