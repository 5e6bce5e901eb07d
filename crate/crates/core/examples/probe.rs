use soz_pipeline::experiment::{run_experiment, PipelineConfig, Profile, RunConfig};
use soz_pipeline::synth::GenConfig;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let args: Vec<String> = std::env::args().collect();
    let lo: usize = args.get(1).and_then(|v| v.parse().ok()).unwrap_or(20);
    let hi: usize = args.get(2).and_then(|v| v.parse().ok()).unwrap_or(26);
    let gain: f64 = args.get(3).and_then(|v| v.parse().ok()).unwrap_or(1.25);
    let shift: f64 = args.get(4).and_then(|v| v.parse().ok()).unwrap_or(1.5);
    let n_splits: usize = args.get(5).and_then(|v| v.parse().ok()).unwrap_or(3);
    let models: Vec<String> = args
        .get(6)
        .map(|s| s.split(',').map(str::to_string).collect())
        .unwrap_or_else(|| {
            vec![
                "fcn-ts".into(),
                "fcn-tsm".into(),
                "rf".into(),
                "extra-trees".into(),
                "gbdt-x".into(),
                "gbdt-c".into(),
                "soft-ensemble".into(),
            ]
        });

    let fcn = std::env::var("PROBE_FCN").ok().map(|spec| {
        // "filters,epochs,lr,batch,subsample"
        let parts: Vec<&str> = spec.split(',').collect();
        soz_pipeline::fcn::FcnConfig {
            filters: parts[0].parse().unwrap(),
            epochs: parts[1].parse().unwrap(),
            lr: parts[2].parse().unwrap(),
            batch_size: parts[3].parse().unwrap(),
            train_subsample: parts.get(4).and_then(|v| v.parse().ok()),
            ..Default::default()
        }
    });
    let cfg = RunConfig {
        seed: 20260810,
        profile: Profile::Desk,
        fcn,
        generator: Some(GenConfig {
            n_patients: 7,
            electrodes_per_patient_range: (lo, hi),
            soz_fraction: 0.08,
            seed: 20260810,
            noise_sd: 3.0,
            soz_amp_gain: gain,
            soz_meta_shift: shift,
        }),
        pipeline: PipelineConfig {
            n_splits,
            ..PipelineConfig::default()
        },
        models,
        ..RunConfig::default()
    };
    let t = std::time::Instant::now();
    let out = run_experiment(&cfg, None, None).unwrap();
    println!("{}", out.table.to_markdown());
    println!("total wall time: {:.1}s", t.elapsed().as_secs_f64());
}
