//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! Oracles here are written independently of the library implementation:
//! exhaustive DTW path enumeration, brute-force AUC pair counting,
//! brute-force neighbor scans, and hand arithmetic.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use soz_pipeline::dataset::FeatureMatrix;
use soz_pipeline::experiment::{run_experiment, PipelineConfig, Profile, RunConfig};
use soz_pipeline::fcn::{fcn_train, FcnConfig, FcnVariant, Net};
use soz_pipeline::knn::{dtw, knn_fit, DtwConfig};
use soz_pipeline::metrics::roc_auc;
use soz_pipeline::model::Classifier;
use soz_pipeline::preprocess::{apply_encoder, fit_encoder, trim_artifact};
use soz_pipeline::resample::{smote, SmoteConfig};
use soz_pipeline::splits::{make_splits, partition};
use soz_pipeline::svm::{svm_fit, KernelSpec, SvmConfig};
use soz_pipeline::synth::{generate, GenConfig};
use soz_pipeline::tree::{fit_cart_boosting, fit_gbdt, BoostConfig, Node};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn matrix(rows: &[(Vec<f64>, u8)], keys: Option<&[String]>) -> FeatureMatrix {
    let d = rows[0].0.len();
    FeatureMatrix::from_parts(
        rows.iter().flat_map(|(r, _)| r.iter().copied()).collect(),
        d,
        rows.iter().map(|&(_, l)| l).collect(),
        keys.map(<[String]>::to_vec)
            .unwrap_or_else(|| rows.iter().map(|_| "A".to_string()).collect()),
        (0..d).map(|i| format!("c{i}")).collect(),
    )
    .unwrap()
}

/// Exhaustive monotone-path DTW, optionally band-restricted.
fn dtw_exhaustive(a: &[f64], b: &[f64], i: usize, j: usize, band: usize) -> f64 {
    if i.abs_diff(j) > band {
        return f64::INFINITY;
    }
    let d = (a[i] - b[j]) * (a[i] - b[j]);
    if i + 1 == a.len() && j + 1 == b.len() {
        return d;
    }
    let mut best = f64::INFINITY;
    if i + 1 < a.len() {
        best = best.min(dtw_exhaustive(a, b, i + 1, j, band));
    }
    if j + 1 < b.len() {
        best = best.min(dtw_exhaustive(a, b, i, j + 1, band));
    }
    if i + 1 < a.len() && j + 1 < b.len() {
        best = best.min(dtw_exhaustive(a, b, i + 1, j + 1, band));
    }
    d + best
}

fn auc_pair_counting(y: &[u8], s: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..y.len() {
        for j in 0..y.len() {
            if y[i] == 1 && y[j] == 0 {
                den += 1.0;
                if s[i] > s[j] {
                    num += 1.0;
                } else if s[i] == s[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / den
}

#[test]
fn criterion_1_oracle_suites() {
    let t0 = Instant::now();

    // DTW vs exhaustive path enumeration: 200 random pairs, length <= 6
    let mut r = rng(101);
    for case in 0..200 {
        let n = r.gen_range(1..=6);
        let a: Vec<f64> = (0..n).map(|_| r.gen_range(-3.0..3.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| r.gen_range(-3.0..3.0)).collect();
        for band in [1usize, 2, 6] {
            let got = dtw(&a, &b, band).unwrap();
            let want = dtw_exhaustive(&a, &b, 0, 0, band);
            assert!(
                (got - want).abs() <= 1e-9,
                "case {case} band {band}: {got} vs {want}"
            );
        }
    }

    // ROC AUC vs brute-force pair counting: 500 random instances with ties
    let mut r = rng(102);
    let mut done = 0;
    while done < 500 {
        let n = r.gen_range(2..40);
        let y: Vec<u8> = (0..n).map(|_| r.gen_range(0..2) as u8).collect();
        let pos = y.iter().filter(|&&v| v == 1).count();
        if pos == 0 || pos == n {
            continue;
        }
        let s: Vec<f64> = (0..n).map(|_| r.gen_range(0..6) as f64 / 5.0).collect();
        let fast = roc_auc(&y, &s).unwrap();
        let slow = auc_pair_counting(&y, &s);
        assert!((fast - slow).abs() <= 1e-12, "{fast} vs {slow}");
        done += 1;
    }

    // SMOTE segment membership and convex hull over 1,000 synthetics:
    // 30 minority + 1030 majority rows -> exactly 1,000 synthetic rows
    let mut r = rng(103);
    let d = 5;
    let n_min = 30;
    let mut rows: Vec<(Vec<f64>, u8)> = (0..n_min + 1030)
        .map(|i| {
            let label = u8::from(i < n_min);
            ((0..d).map(|_| r.gen_range(-8.0..8.0)).collect(), label)
        })
        .collect();
    rows.rotate_left(n_min / 2); // interleave a bit
    let m = matrix(&rows, None);
    let k = 5;
    let out = smote(&m, &SmoteConfig { k_neighbors: k, seed: 77 }).unwrap();
    assert_eq!(out.n_rows() - m.n_rows(), 1000);
    let minority: Vec<&[f64]> = (0..m.n_rows())
        .filter(|&i| m.labels()[i] == 1)
        .map(|i| m.row(i))
        .collect();
    let mut hull_lo = vec![f64::INFINITY; d];
    let mut hull_hi = vec![f64::NEG_INFINITY; d];
    for row in &minority {
        for c in 0..d {
            hull_lo[c] = hull_lo[c].min(row[c]);
            hull_hi[c] = hull_hi[c].max(row[c]);
        }
    }
    // brute-force k-NN lists per minority row
    let sq = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    };
    let neighbor_lists: Vec<Vec<usize>> = (0..minority.len())
        .map(|i| {
            let mut ds: Vec<(f64, usize)> = (0..minority.len())
                .filter(|&j| j != i)
                .map(|j| (sq(minority[i], minority[j]), j))
                .collect();
            ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ds[..k].iter().map(|&(_, j)| j).collect()
        })
        .collect();
    let on_segment = |s: &[f64], x: &[f64], y: &[f64]| -> bool {
        let mut lambda = None;
        for c in 0..d {
            if (y[c] - x[c]).abs() > 1e-12 {
                lambda = Some((s[c] - x[c]) / (y[c] - x[c]));
                break;
            }
        }
        let Some(l) = lambda else {
            return s.iter().zip(x).all(|(a, b)| (a - b).abs() < 1e-9);
        };
        if !(-1e-9..=1.0 + 1e-9).contains(&l) {
            return false;
        }
        s.iter().zip(x.iter().zip(y)).all(|(&sv, (&xv, &yv))| {
            let scale = xv.abs().max(yv.abs()).max(1.0);
            (sv - (xv + l * (yv - xv))).abs() <= 1e-9 * scale
        })
    };
    for i in m.n_rows()..out.n_rows() {
        let srow = out.row(i);
        let ok = (0..minority.len()).any(|b| {
            neighbor_lists[b]
                .iter()
                .any(|&nb| on_segment(srow, minority[b], minority[nb]))
        });
        assert!(ok, "synthetic {i} lies on no base-to-neighbor segment");
        for c in 0..d {
            assert!(srow[c] >= hull_lo[c] - 1e-9 && srow[c] <= hull_hi[c] + 1e-9);
        }
    }

    // KNN vs brute-force neighbor scan on 50-row sets (short series so the
    // oracle's DTW is itself exhaustive)
    let mut r = rng(104);
    let series_len = 6;
    let band = 2;
    let train_rows: Vec<(Vec<f64>, u8)> = (0..50)
        .map(|_| {
            (
                (0..series_len + 2).map(|_| r.gen_range(-2.0..2.0)).collect(),
                r.gen_range(0..2) as u8,
            )
        })
        .collect();
    let test_rows: Vec<(Vec<f64>, u8)> = (0..25)
        .map(|_| {
            (
                (0..series_len + 2).map(|_| r.gen_range(-2.0..2.0)).collect(),
                0,
            )
        })
        .collect();
    let train = matrix(&train_rows, None);
    let test = matrix(&test_rows, None);
    let cfg = DtwConfig {
        k: 3,
        band_radius: band,
        meta_weight: 0.5,
        series_len,
        train_subsample: None,
        seed: 0,
    };
    let model = knn_fit(&train, &cfg).unwrap();
    let proba = model.predict_proba(&test).unwrap();
    for (t, (row, _)) in test_rows.iter().enumerate() {
        let mut ds: Vec<(f64, usize)> = train_rows
            .iter()
            .enumerate()
            .map(|(i, (tr, _))| {
                let series = dtw_exhaustive(&row[..series_len], &tr[..series_len], 0, 0, band);
                let meta = sq(&row[series_len..], &tr[series_len..]);
                (series + 0.5 * meta, i)
            })
            .collect();
        ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let votes = ds[..3].iter().filter(|&&(_, i)| train_rows[i].1 == 1).count();
        assert!((proba[t][1] - votes as f64 / 3.0).abs() < 1e-12);
    }

    let elapsed = t0.elapsed();
    assert!(
        elapsed.as_secs() < 60,
        "oracle suites took {elapsed:?}, budget is 60 s"
    );
    println!("ACCEPTANCE 1 (oracle suites, {elapsed:?}): PASS");
}

#[test]
fn criterion_2_svm_kkt_and_hand_duals() {
    // KKT residual <= tol on 20 random 100-point problems
    for seed in 0..20u64 {
        let mut r = rng(200 + seed);
        let rows: Vec<(Vec<f64>, u8)> = (0..100)
            .map(|_| {
                let y = r.gen_range(0..2) as u8;
                let c = if y == 1 { 0.9 } else { -0.9 };
                (
                    vec![c + r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)],
                    y,
                )
            })
            .collect();
        let m = matrix(&rows, None);
        let cfg = SvmConfig {
            kernel: KernelSpec::Rbf { gamma: None },
            c: 1.0,
            tol: 1e-3,
            max_passes: 20_000,
            seed,
            standardize: true,
            track_objective: false,
        };
        let model = svm_fit(&m, &cfg).unwrap();
        assert!(model.converged, "problem {seed} did not converge");
        assert!(
            model.max_kkt_violation <= cfg.tol,
            "problem {seed}: residual {}",
            model.max_kkt_violation
        );
    }

    // two-point dual solved by hand: alpha = (0.5, 0.5), b = 0, f(x) = x
    let m = matrix(&[(vec![-1.0], 0), (vec![1.0], 1)], None);
    let cfg = SvmConfig {
        kernel: KernelSpec::Poly {
            degree: 1,
            gamma: Some(1.0),
            coef0: 1.0,
        },
        c: 1e6,
        tol: 1e-6,
        max_passes: 1000,
        seed: 0,
        standardize: false,
        track_objective: false,
    };
    let model = svm_fit(&m, &cfg).unwrap();
    assert!((model.alpha_y()[0] - (-0.5)).abs() < 1e-12);
    assert!((model.alpha_y()[1] - 0.5).abs() < 1e-12);
    assert!(model.bias().abs() < 1e-12);
    assert!((model.decision_score(&[0.25]).unwrap() - 0.25).abs() < 1e-12);

    // separable 2-D data, C = 1e6: training accuracy 1.0
    let mut r = rng(222);
    let rows: Vec<(Vec<f64>, u8)> = (0..100)
        .map(|_| {
            let y = r.gen_range(0..2) as u8;
            let c = if y == 1 { 3.0 } else { -3.0 };
            (
                vec![c + r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)],
                y,
            )
        })
        .collect();
    let m = matrix(&rows, None);
    let cfg = SvmConfig {
        kernel: KernelSpec::Rbf { gamma: Some(0.5) },
        c: 1e6,
        tol: 1e-3,
        max_passes: 20_000,
        seed: 3,
        standardize: false,
        track_objective: false,
    };
    let model = svm_fit(&m, &cfg).unwrap();
    assert!(model.converged);
    let labels = model.predict(&m).unwrap().labels();
    assert_eq!(labels, m.labels(), "separable data not perfectly fit");
    println!("ACCEPTANCE 2 (SVM KKT + hand duals): PASS");
}

#[test]
fn criterion_3_boosting_contracts() {
    // leaf weight -G/(H+lambda): single-leaf tree, G=2, H=4, lambda=1
    let m = matrix(&[(vec![1.0], 0), (vec![1.0], 0)], None);
    let tree = fit_cart_boosting(&m, &[1.25, 0.75], &[3.0, 1.0], 1.0, 0.0, 4).unwrap();
    assert_eq!(tree.nodes().len(), 1);
    assert!((tree.predict_value(&[1.0])[0] - (-0.4)).abs() < 1e-15);

    // training logistic loss never worsens by more than 1e-9 over 100 rounds
    let mut r = rng(300);
    let rows: Vec<(Vec<f64>, u8)> = (0..500)
        .map(|_| {
            let y = r.gen_range(0..2) as u8;
            let x: Vec<f64> = (0..8)
                .map(|c| r.gen_range(-1.0..1.0) + if c < 3 && y == 1 { 0.7 } else { 0.0 })
                .collect();
            (x, y)
        })
        .collect();
    let m = matrix(&rows, None);
    for oblivious in [false, true] {
        let cfg = BoostConfig {
            n_estimators: 100,
            learning_rate: 0.3,
            max_depth: 4,
            lambda: 1.0,
            gamma: 0.0,
            oblivious,
            seed: 0,
        };
        let model = fit_gbdt(&m, &cfg).unwrap();
        let trace = model.loss_trace();
        assert_eq!(trace.len(), 101);
        for (i, w) in trace.windows(2).enumerate() {
            assert!(
                w[1] <= w[0] + 1e-9,
                "round {i}: loss {} -> {} (oblivious={oblivious})",
                w[0],
                w[1]
            );
        }
        if oblivious {
            // structural constraint: every level of every tree shares one
            // (feature, threshold)
            for (t, tree) in model.trees().iter().enumerate() {
                let levels = tree.splits_by_depth();
                for (d, level) in levels.iter().enumerate() {
                    let first = level[0];
                    assert!(
                        level.iter().all(|&p| p == first),
                        "tree {t} depth {d} mixes split pairs"
                    );
                    let expected = 1usize << d;
                    assert_eq!(level.len(), expected, "tree {t} is not complete at depth {d}");
                }
                // leaves are all at the bottom level
                let n_internal: usize = levels.iter().map(Vec::len).sum();
                let n_leaves = tree
                    .nodes()
                    .iter()
                    .filter(|n| matches!(n, Node::Leaf { .. }))
                    .count();
                assert_eq!(n_leaves, n_internal + 1);
            }
        }
    }
    println!("ACCEPTANCE 3 (boosting leaf weights, loss trace, oblivious structure): PASS");
}

#[test]
fn criterion_4_fcn_gradients_and_loss() {
    // finite-difference gradient check on a reduced net
    let net = Net::new(20, 8, 44);
    let mut r = rng(400);
    let batch = 4;
    let input: Vec<f64> = (0..batch * 20).map(|_| r.gen_range(-2.0..2.0)).collect();
    let labels = [0u8, 1, 1, 0];
    let mut grads = vec![0.0; net.n_params()];
    net.loss_and_grad(&input, &labels, batch, &mut grads);
    let eps = 1e-4;
    let mut net = net;
    let n = net.n_params();
    let mut agree = 0usize;
    for p in 0..n {
        let orig = net.params()[p];
        net.params_mut()[p] = orig + eps;
        let up = net.loss(&input, &labels, batch);
        net.params_mut()[p] = orig - eps;
        let down = net.loss(&input, &labels, batch);
        net.params_mut()[p] = orig;
        let fd = (up - down) / (2.0 * eps);
        let denom = grads[p].abs().max(fd.abs()).max(1e-8);
        if ((grads[p] - fd) / denom).abs() <= 1e-3 {
            agree += 1;
        }
    }
    let frac = agree as f64 / n as f64;
    assert!(frac >= 0.99, "only {frac:.4} of {n} gradients agree");

    // softmax and shape invariants on the full-width net
    let net = Net::new(495, 8, 7);
    let mut r = rng(401);
    let rows: Vec<(Vec<f64>, u8)> = (0..8)
        .map(|_| ((0..495).map(|_| r.gen_range(-10.0..10.0)).collect(), 0))
        .collect();
    let m = matrix(&rows, None);
    let proba = net.predict_proba(&m).unwrap();
    assert_eq!(proba.len(), 8);
    for p in &proba {
        assert!(p[0] > 0.0 && p[1] > 0.0 && p[0] < 1.0 && p[1] < 1.0);
        assert!((p[0] + p[1] - 1.0).abs() <= 1e-6);
    }

    // training loss strictly decreases from epoch 0 to epoch 5
    let mut r = rng(402);
    let rows: Vec<(Vec<f64>, u8)> = (0..400)
        .map(|_| {
            let y = r.gen_range(0..2) as u8;
            let amp = if y == 1 { 2.2 } else { 0.8 };
            (
                (0..40)
                    .map(|t| amp * (t as f64 * 0.4).sin() + r.gen_range(-0.5..0.5))
                    .collect(),
                y,
            )
        })
        .collect();
    let m = matrix(&rows, None);
    let cfg = FcnConfig {
        filters: 6,
        lr: 2e-3,
        epochs: 6,
        batch_size: 32,
        seed: 5,
        variant: FcnVariant::Ts,
        train_subsample: None,
    };
    let model = fcn_train(&m, &cfg).unwrap();
    assert!(
        model.epoch_losses[5] < model.epoch_losses[0],
        "loss did not fall: {:?}",
        model.epoch_losses
    );
    println!("ACCEPTANCE 4 (FCN gradient check, invariants, loss decrease): PASS");
}

#[test]
fn criterion_5_leakage_guards() {
    let raw = generate(&GenConfig {
        n_patients: 7,
        electrodes_per_patient_range: (8, 12),
        soz_fraction: 0.2,
        seed: 55,
        ..GenConfig::default()
    })
    .unwrap();
    let cleaned = trim_artifact(raw).unwrap();
    let patients = cleaned.patients();
    let plan = make_splits(&patients, 7, 99).unwrap();
    assert_eq!(plan.splits.len(), 7);

    for (s, entry) in plan.splits.iter().enumerate() {
        // patient-key disjointness on every split
        assert!(entry.train_patients.is_disjoint(&entry.test_patients));
        let train_cohort = cleaned.filter_patients(&entry.train_patients);
        let test_cohort = cleaned.filter_patients(&entry.test_patients);

        // target-encoder output is invariant to test-label permutation
        let encoder = fit_encoder(&train_cohort, 20.0, &format!("split-{s}")).unwrap();
        let out_a = apply_encoder(&encoder, &test_cohort).unwrap();
        let mut flipped = test_cohort.records().to_vec();
        for rec in &mut flipped {
            rec.soz = 1 - rec.soz;
        }
        let flipped =
            soz_pipeline::dataset::CleanedCohort::new(flipped).unwrap();
        let out_b = apply_encoder(&encoder, &flipped).unwrap();
        for (a, b) in out_a.records().iter().zip(out_b.records()) {
            assert_eq!(
                a.meta.map(f64::to_bits),
                b.meta.map(f64::to_bits),
                "split {s}: encoded output depends on test labels"
            );
        }

        // SMOTE row-provenance audit: originals pass through bit-exact, the
        // test matrix is untouched, and every synthetic's patient key is a
        // training patient
        let train_m = apply_encoder(&encoder, &train_cohort)
            .unwrap()
            .to_matrix(true);
        let test_m = out_a.to_matrix(true);
        let test_before = test_m.clone();
        let balanced = smote(
            &train_m,
            &SmoteConfig {
                k_neighbors: 3,
                seed: 1000 + s as u64,
            },
        )
        .unwrap();
        assert_eq!(test_m, test_before);
        for i in 0..train_m.n_rows() {
            assert_eq!(balanced.row(i), train_m.row(i));
            assert_eq!(balanced.patient_keys()[i], train_m.patient_keys()[i]);
        }
        for i in train_m.n_rows()..balanced.n_rows() {
            assert!(
                entry.train_patients.contains(&balanced.patient_keys()[i]),
                "split {s}: synthetic row {i} carries a non-train patient key"
            );
        }

        // matrix-level partition keeps the sides disjoint and exhaustive
        let all_m = apply_encoder(&encoder, &cleaned).unwrap().to_matrix(true);
        let (tr, te) = partition(&all_m, entry).unwrap();
        assert_eq!(tr.n_rows() + te.n_rows(), all_m.n_rows());
        let tr_keys: BTreeSet<&String> = tr.patient_keys().iter().collect();
        let te_keys: BTreeSet<&String> = te.patient_keys().iter().collect();
        assert!(tr_keys.is_disjoint(&te_keys));
    }
    println!("ACCEPTANCE 5 (leakage guards): PASS");
}

fn directional_config() -> RunConfig {
    RunConfig {
        seed: 20260810,
        profile: Profile::Desk,
        generator: Some(GenConfig {
            n_patients: 7,
            electrodes_per_patient_range: (50, 90),
            soz_fraction: 0.08,
            seed: 20260810,
            noise_sd: 3.0,
            soz_amp_gain: 1.6,
            soz_meta_shift: 20.0,
        }),
        pipeline: PipelineConfig {
            n_splits: 7,
            ..PipelineConfig::default()
        },
        models: vec![
            "fcn-ts".into(),
            "fcn-tsm".into(),
            "rf".into(),
            "extra-trees".into(),
            "gbdt-x".into(),
            "gbdt-c".into(),
            "soft-ensemble".into(),
        ],
        ..RunConfig::default()
    }
}

#[test]
fn criterion_6_directional_reproduction() {
    let t0 = Instant::now();
    let cfg = directional_config();
    let out = run_experiment(&cfg, None, None).unwrap();
    let auc = |name: &str| out.table.get(name).unwrap().roc_auc.mean;

    let ts = auc("fcn-ts");
    let tsm = auc("fcn-tsm");
    assert!(
        tsm - ts >= 0.05,
        "metadata did not help the FCN enough: TSM {tsm:.3} vs TS {ts:.3}"
    );

    let members = ["extra-trees", "rf", "gbdt-x", "gbdt-c"];
    let best_member = members.iter().map(|m| auc(m)).fold(f64::MIN, f64::max);
    let ensemble = auc("soft-ensemble");
    assert!(
        ensemble >= best_member - 0.02,
        "ensemble {ensemble:.3} trails best member {best_member:.3}"
    );
    assert!(ensemble >= 0.90, "ensemble AUC {ensemble:.3} below 0.90");

    let elapsed = t0.elapsed();
    assert!(
        elapsed.as_secs() < 15 * 60,
        "directional run took {elapsed:?}, budget is 15 min"
    );
    println!(
        "ACCEPTANCE 6 (directional: TSM {tsm:.3} > TS {ts:.3} + 0.05; ensemble {ensemble:.3} >= max({best_member:.3}) - 0.02 and >= 0.90; {elapsed:?}): PASS"
    );
}

#[test]
fn criterion_7_null_signal_control() {
    // soz_amp_gain = 1, soz_meta_shift = 0: labels carry no signal, so every
    // model must score chance-level AUC
    let cfg = RunConfig {
        seed: 777,
        profile: Profile::Desk,
        generator: Some(GenConfig {
            n_patients: 7,
            electrodes_per_patient_range: (20, 20),
            soz_fraction: 0.08,
            seed: 777,
            noise_sd: 3.0,
            soz_amp_gain: 1.0,
            soz_meta_shift: 0.0,
        }),
        pipeline: PipelineConfig {
            n_splits: 3,
            ..PipelineConfig::default()
        },
        ..RunConfig::default()
    };
    let n_records: usize = 7 * 20 * 19;
    assert!(n_records >= 2000);
    let out = run_experiment(&cfg, None, None).unwrap();
    for row in &out.table.rows {
        assert!(
            (row.roc_auc.mean - 0.5).abs() <= 0.05,
            "model {} scored {:.3} on label-free data",
            row.model,
            row.roc_auc.mean
        );
    }
    println!("ACCEPTANCE 7 (null-signal control, 10 models): PASS");
}

#[test]
fn criterion_8_determinism() {
    let cfg = RunConfig {
        seed: 31337,
        profile: Profile::Desk,
        generator: Some(GenConfig {
            n_patients: 5,
            electrodes_per_patient_range: (6, 8),
            soz_fraction: 0.25,
            seed: 31337,
            noise_sd: 2.0,
            soz_amp_gain: 1.5,
            soz_meta_shift: 2.0,
        }),
        pipeline: PipelineConfig {
            n_splits: 2,
            ..PipelineConfig::default()
        },
        models: vec!["knn-dtw".into(), "rf".into(), "gbdt-c".into(), "fcn-ts".into()],
        fcn: Some(FcnConfig {
            filters: 4,
            epochs: 2,
            batch_size: 32,
            ..FcnConfig::default()
        }),
        ..RunConfig::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_experiment(&cfg, None, Some(&a)).unwrap();
    run_experiment(&cfg, None, Some(&b)).unwrap();
    for file in ["results.csv", "table1.md"] {
        let x = std::fs::read(a.join(file)).unwrap();
        let y = std::fs::read(b.join(file)).unwrap();
        assert_eq!(x, y, "{file} differs between identical runs");
    }
    println!("ACCEPTANCE 8 (byte-identical results.csv and table1.md): PASS");
}
