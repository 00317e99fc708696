//! Acceptance suite: one test per shipping criterion, each printing a
//! PASS line with the measured values (visible with `--nocapture`).
//!
//! Run with `cargo test -p alm-cli --test acceptance`.

use std::path::PathBuf;
use std::process::Command;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use alm_core::alm::{
    fit_alm, fit_phi, project_rotation, AlmArch, ClassifierArch, TransformSpec,
};
use alm_core::baselines::{
    centering_matrix, kmm_weights, mmd_coefficient_matrix, rbf_kernel, resolve_bandwidth,
    tca_fit_transform, KernelConfig, KmmConfig, TcaConfig,
};
use alm_core::data::{gen_mixture_domains, write_domain_csv, MixtureBenchConfig};
use alm_core::experiment::{run_experiment, DomainSpec, ExperimentConfig, Method};
use alm_core::nn::{mlp_init, Activation, DenseLayer, FeedForwardNet, TrainConfig};
use alm_core::{Domain, MultiDomainSet};

/// Copy of `net` with one parameter of one layer shifted by `delta`;
/// `param` indexes weights row-major first, then the bias.
fn perturbed(net: &FeedForwardNet, layer: usize, param: usize, delta: f64) -> FeedForwardNet {
    let mut layers: Vec<DenseLayer> = net.layers().to_vec();
    let old = &layers[layer];
    let mut w = old.weights().clone();
    let mut b = old.bias().clone();
    let weight_count = w.nrows() * w.ncols();
    if param < weight_count {
        let (r, c) = (param / w.ncols(), param % w.ncols());
        w[(r, c)] += delta;
    } else {
        b[param - weight_count] += delta;
    }
    layers[layer] = DenseLayer::new(w, b, old.activation(), old.trainable()).unwrap();
    FeedForwardNet::from_layers(layers).unwrap()
}

/// Criterion 1 — sine-wave reproduction: `sine-bench` defaults over 100
/// trials give mean errors g = 0.16 ± 0.05, local vote = 0.08 ± 0.04,
/// ALM = 0.07 ± 0.04, ordered ALM ≤ vote < g.
#[test]
fn criterion_1_sine_bench_reproduction() {
    let cfg = ExperimentConfig::sine_default();
    assert_eq!(cfg.trials, 100);
    let report = run_experiment(&cfg).unwrap();

    let g = report.mean_error(Method::Global).unwrap() / 100.0;
    let vote = report.mean_error(Method::LocalVote).unwrap() / 100.0;
    let alm = report.mean_error(Method::Alm).unwrap() / 100.0;

    assert!(
        (g - 0.16).abs() <= 0.05,
        "global mean {g:.4} outside 0.16 ± 0.05"
    );
    assert!(
        (vote - 0.08).abs() <= 0.04,
        "local-vote mean {vote:.4} outside 0.08 ± 0.04"
    );
    assert!(
        (alm - 0.07).abs() <= 0.04,
        "ALM mean {alm:.4} outside 0.07 ± 0.04"
    );
    assert!(alm <= vote, "ordering: ALM {alm:.4} > vote {vote:.4}");
    assert!(vote < g, "ordering: vote {vote:.4} >= global {g:.4}");
    println!("PASS criterion 1: g {g:.3}, vote {vote:.3}, alm {alm:.3} (bands 0.16/0.08/0.07 ±0.05/±0.04/±0.04)");
}

/// Criterion 2 — gradient oracle: analytic gradients of 100 random small
/// nets match central finite differences to relative error < 1e-4.
#[test]
fn criterion_2_gradient_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let acts = [Activation::Tanh, Activation::Sigmoid, Activation::Identity];
    let mut checked_params = 0usize;
    for net_index in 0..100 {
        let d = rng.gen_range(1..=5);
        let num_hidden = rng.gen_range(0..=2); // up to 3 layers total
        let mut sizes = vec![d];
        for _ in 0..num_hidden {
            sizes.push(rng.gen_range(1..=5));
        }
        sizes.push(1);
        let layer_acts: Vec<Activation> = (0..sizes.len() - 1)
            .map(|_| acts[rng.gen_range(0..acts.len())])
            .collect();
        let net = mlp_init(&sizes, &layer_acts, 31_000 + net_index).unwrap();

        let n = rng.gen_range(1..=6);
        let x = DMatrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0));
        let y = DVector::from_fn(n, |_, _| if rng.gen_range(0..2) == 0 { -1.0 } else { 1.0 });

        let (_, grads) = net.loss_and_gradient(&x, &y).unwrap();
        let step = 1e-5;
        for (l, grad) in grads.iter().enumerate() {
            let weight_count = net.layers()[l].weights().len();
            let total = weight_count + net.layers()[l].bias().len();
            for p in 0..total {
                let plus = perturbed(&net, l, p, step);
                let minus = perturbed(&net, l, p, -step);
                let numeric =
                    (plus.mse(&x, &y).unwrap() - minus.mse(&x, &y).unwrap()) / (2.0 * step);
                let analytic = if p < weight_count {
                    let cols = net.layers()[l].weights().ncols();
                    grad.weights[(p / cols, p % cols)]
                } else {
                    grad.bias[p - weight_count]
                };
                let rel =
                    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
                assert!(
                    rel < 1e-4,
                    "net {net_index} layer {l} param {p}: rel err {rel:.2e}"
                );
                checked_params += 1;
            }
        }
    }
    println!("PASS criterion 2: 100 nets, {checked_params} parameters, rel err < 1e-4");
}

fn gaussian_domain(center: (f64, f64), n: usize, seed: u64) -> Domain {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, 2, |_, j| {
        let c = if j == 0 { center.0 } else { center.1 };
        c + rng.gen_range(-1.5..1.5)
    });
    let y = DVector::from_fn(n, |i, _| {
        if x[(i, 0)] + 0.4 * x[(i, 1)] >= center.0 {
            1.0
        } else {
            -1.0
        }
    });
    Domain::labeled(x, y).unwrap()
}

/// Criterion 3 — identity and freezing contract: a zero-epoch fit is
/// bit-exactly the base net on 1000 random inputs, and a nonzero fit leaves
/// the base parameters bit-identical.
#[test]
fn criterion_3_identity_and_freezing() {
    let source = gaussian_domain((0.0, 0.0), 150, 5);
    let cfg = TrainConfig::default().with_seed(9);
    let base = alm_core::alm::train_local(&source, &ClassifierArch::mlp(vec![4]), &cfg).unwrap();
    let global =
        alm_core::alm::train_local(&source, &ClassifierArch::logistic(), &cfg).unwrap();
    let target = gaussian_domain((1.0, -0.5), 120, 6);

    let zero_spec = TransformSpec {
        train: TrainConfig {
            epochs: 0,
            ..TransformSpec::default().train
        },
        ..TransformSpec::default()
    };
    let zero_fit = fit_phi(&base, &global, target.features(), &zero_spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..1000 {
        let x = DVector::from_fn(2, |_, _| rng.gen_range(-10.0..10.0));
        let fused = zero_fit.score(&x).unwrap();
        let direct = base.forward(&x).unwrap();
        assert_eq!(fused.to_bits(), direct.to_bits(), "zero-epoch fit not bit-exact");
    }

    let fit = fit_phi(&base, &global, target.features(), &TransformSpec::default()).unwrap();
    for (after, before) in fit.base().layers().iter().zip(base.layers()) {
        assert_eq!(
            after.weights(),
            before.weights(),
            "frozen weights changed"
        );
        assert_eq!(after.bias(), before.bias(), "frozen bias changed");
    }
    println!("PASS criterion 3: zero-epoch fit bit-exact on 1000 inputs; base frozen bitwise");
}

/// Criterion 4 — rotation projection: 1000 random matrices (d ≤ 5) project
/// to orthogonal, det-positive matrices matching an SVD oracle within 1e-8;
/// 2-D cases match a brute-force angle search in objective within 1e-6.
#[test]
fn criterion_4_rotation_projection() {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let mut two_d_checked = 0usize;
    for i in 0..1000 {
        let d = rng.gen_range(1..=5);
        let m = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-3.0..3.0));
        let p = project_rotation(&m).unwrap();
        let r = &p.rotation;

        let gram_dev = (r.transpose() * r - DMatrix::identity(d, d)).abs().max();
        assert!(gram_dev < 1e-8, "matrix {i}: RᵀR deviation {gram_dev:.2e}");
        assert!(r.determinant() > 0.0, "matrix {i}: determinant not positive");

        // Independent SVD oracle, straight from the closed form.
        let svd = m.clone().svd(true, true);
        let mut u = svd.u.unwrap();
        let v_t = svd.v_t.unwrap();
        if (&u * &v_t).determinant() < 0.0 {
            let last = u.ncols() - 1;
            u.column_mut(last).neg_mut();
        }
        let oracle = u * v_t;
        assert!(
            (r - &oracle).abs().max() < 1e-8,
            "matrix {i}: differs from SVD oracle"
        );

        if d == 2 {
            two_d_checked += 1;
            let my_objective: f64 = (r - &m).iter().map(|v| v * v).sum();
            let mut best = f64::INFINITY;
            let steps = (2.0 * std::f64::consts::PI / 1e-4) as usize;
            for s in 0..steps {
                let theta = s as f64 * 1e-4;
                let (sin, cos) = theta.sin_cos();
                let obj = (cos - m[(0, 0)]).powi(2)
                    + (-sin - m[(0, 1)]).powi(2)
                    + (sin - m[(1, 0)]).powi(2)
                    + (cos - m[(1, 1)]).powi(2);
                if obj < best {
                    best = obj;
                }
            }
            assert!(
                (my_objective - best).abs() < 1e-6,
                "matrix {i}: objective {my_objective} vs brute force {best}"
            );
        }
    }
    println!("PASS criterion 4: 1000 projections legal and oracle-matched ({two_d_checked} 2-D brute-force checks)");
}

/// Criterion 5 — KMM properties on 50 seeded instances: exact feasibility,
/// non-increasing trace, near-uniform weights for identical sets, and
/// mean-matching at least as good as uniform.
#[test]
fn criterion_5_kmm_properties() {
    let kmm_objective = |k_ss: &DMatrix<f64>, k_st: &DMatrix<f64>, beta: &DVector<f64>| -> f64 {
        let m = k_ss.nrows() as f64;
        let n = k_st.ncols() as f64;
        let ones = DVector::from_element(k_st.ncols(), 1.0);
        beta.dot(&(k_ss * beta)) / (m * m) - (2.0 / (m * n)) * beta.dot(&(k_st * &ones))
    };

    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(9_000 + seed);
        let m = rng.gen_range(15..40);
        let n = rng.gen_range(15..40);
        let d = rng.gen_range(2..5);
        let xs = DMatrix::from_fn(m, d, |_, _| rng.gen_range(-2.0..2.0));
        let xt = DMatrix::from_fn(n, d, |_, _| rng.gen_range(-2.0..2.0));

        let cfg = KmmConfig::default();
        let res = kmm_weights(&xs, &xt, &cfg).unwrap();

        let eps = ((m as f64).sqrt() - 1.0) / (m as f64).sqrt();
        assert!(
            res.beta.iter().all(|&b| (0.0..=cfg.weight_cap).contains(&b)),
            "seed {seed}: box violated"
        );
        assert!(
            (res.beta.mean() - 1.0).abs() <= eps,
            "seed {seed}: slack violated"
        );
        for w in res.objective_trace.windows(2) {
            assert!(w[1] <= w[0], "seed {seed}: trace increased");
        }

        let sigma = resolve_bandwidth(&xs, &xt, &cfg.kernel).unwrap();
        let kernel = KernelConfig::fixed(sigma);
        let k_ss = rbf_kernel(&xs, &xs, &kernel).unwrap();
        let k_st = rbf_kernel(&xs, &xt, &kernel).unwrap();
        let k_tt = rbf_kernel(&xt, &xt, &kernel).unwrap();
        // Squared distance between the weighted source mean and the target
        // mean in feature space, assembled purely from kernel blocks.
        let ones_t = DVector::from_element(n, 1.0);
        let target_term = ones_t.dot(&(&k_tt * &ones_t)) / (n * n) as f64;
        let mean_match =
            |beta: &DVector<f64>| kmm_objective(&k_ss, &k_st, beta) + target_term;
        let ones = DVector::from_element(m, 1.0);
        assert!(
            mean_match(&res.beta) <= mean_match(&ones) + 1e-12,
            "seed {seed}: worse than uniform weighting"
        );
        assert!(mean_match(&res.beta) >= -1e-9, "squared distance negative");

        // Identical sets: weights stay near uniform.
        let same = kmm_weights(&xs, &xs, &cfg).unwrap();
        let mad = same.beta.iter().map(|&b| (b - 1.0).abs()).sum::<f64>() / m as f64;
        assert!(mad < 0.05, "seed {seed}: mean |beta - 1| = {mad}");
    }
    println!("PASS criterion 5: 50 KMM instances feasible, monotone, uniform-on-identical, never worse than uniform");
}

/// Criterion 6 — TCA properties on 30×30 stacked instances: eigen residuals
/// ≤ 1e-6 against the dense operator, H idempotent and 1ᵀL1 = 0 within
/// 1e-12.
#[test]
fn criterion_6_tca_properties() {
    let h = centering_matrix(30);
    let ones = DVector::from_element(30, 1.0);
    assert!((&h * &ones).abs().max() < 1e-12);
    assert!(((&h * &h) - &h).abs().max() < 1e-12);

    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(5_000 + seed);
        let xs = DMatrix::from_fn(15, 3, |_, _| rng.gen_range(-2.0..2.0));
        let xt = DMatrix::from_fn(15, 3, |_, _| rng.gen_range(-2.0..2.0));

        let l = mmd_coefficient_matrix(15, 15);
        let total = DVector::from_element(30, 1.0).dot(&(&l * DVector::from_element(30, 1.0)));
        assert!(total.abs() < 1e-12, "1ᵀL1 = {total}");

        let cfg = TcaConfig {
            num_components: Some(5),
            ..TcaConfig::default()
        };
        let res = tca_fit_transform(&xs, &xt, &cfg).unwrap();
        assert_eq!(res.projected_source.shape(), (15, 5));
        assert_eq!(res.projected_target.shape(), (15, 5));

        // Residuals against the explicitly reassembled operator.
        let mut stacked = DMatrix::zeros(30, 3);
        stacked.rows_mut(0, 15).copy_from(&xs);
        stacked.rows_mut(15, 15).copy_from(&xt);
        let k = rbf_kernel(&stacked, &stacked, &cfg.kernel).unwrap();
        let mut klk = &k * &l * &k;
        for i in 0..30 {
            klk[(i, i)] += cfg.mu;
        }
        let a = klk.lu().try_inverse().unwrap() * (&k * centering_matrix(30) * &k);
        for c in 0..5 {
            let w = res.components.column(c).into_owned();
            let lambda = res.eigenvalues[c];
            let residual = (&a * &w - lambda * &w).norm();
            assert!(residual <= 1e-6, "seed {seed} pair {c}: residual {residual:.2e}");
        }
    }
    println!("PASS criterion 6: H and L identities at 1e-12; all eigen residuals <= 1e-6 on 30x30 instances");
}

/// Criterion 7 — six-domain mixture benchmark: over 20 seeds, mean ALM error
/// is at most the mean errors of the global classifier and the local vote;
/// and `run` executes end to end on CSV exports, emitting the six-column
/// table.
#[test]
fn criterion_7_mixture_benchmark_and_csv_run() {
    let mut cfg = ExperimentConfig::run_default();
    cfg.domains = DomainSpec::Mixture(MixtureBenchConfig::default());
    cfg.methods = vec![Method::Global, Method::LocalVote, Method::Alm];
    cfg.trials = 20;
    let report = run_experiment(&cfg).unwrap();
    assert!(report.notes.is_empty(), "notes: {:?}", report.notes);

    let g = report.mean_error(Method::Global).unwrap();
    let vote = report.mean_error(Method::LocalVote).unwrap();
    let alm = report.mean_error(Method::Alm).unwrap();
    assert!(alm <= g, "mean ALM {alm:.2} > mean global {g:.2}");
    assert!(alm <= vote, "mean ALM {alm:.2} > mean local vote {vote:.2}");

    // CSV end-to-end through the binary.
    let dir = tempfile::tempdir().unwrap();
    let domains = gen_mixture_domains(&MixtureBenchConfig {
        num_domains: 3,
        points_per_domain: 60,
        ..MixtureBenchConfig::default()
    })
    .unwrap();
    let mut paths = Vec::new();
    for (i, d) in domains.iter().enumerate() {
        let path = dir.path().join(format!("domain{i}.csv"));
        write_domain_csv(d, &path).unwrap();
        paths.push(path);
    }
    let out_path = dir.path().join("table.csv");
    let config_path = dir.path().join("run.cfg");
    std::fs::write(
        &config_path,
        "hidden = 4\nepochs = 40\nphi_epochs = 40\ntca_components = 2\n",
    )
    .unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_alm"))
        .arg("run")
        .args(&paths)
        .arg("--config")
        .arg(&config_path)
        .arg("--format")
        .arg("csv")
        .arg("--out")
        .arg(&out_path)
        .status()
        .unwrap();
    assert!(status.success());
    let table = std::fs::read_to_string(&out_path).unwrap();
    let mut lines = table.lines();
    assert_eq!(
        lines.next().unwrap(),
        "domain,cheat,global,local_vote,alm,tca,kmm"
    );
    let body: Vec<&str> = lines.collect();
    assert_eq!(body.len(), 4, "3 domain rows plus the mean row");
    assert!(body[3].starts_with("mean,"));
    for row in &body[..3] {
        assert_eq!(row.split(',').count(), 7);
    }

    println!("PASS criterion 7: mixture means alm {alm:.2} <= g {g:.2}, <= vote {vote:.2}; CSV run emits the six-column table");
}

/// Criterion 8 — determinism: repeating any harness command with identical
/// config and seed produces byte-identical output files.
#[test]
fn criterion_8_byte_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();

    // sine-bench, reduced size for runtime.
    let sine_cfg = dir.path().join("sine.cfg");
    std::fs::write(
        &sine_cfg,
        "trials = 2\nsine_points = 80\nepochs = 30\nphi_epochs = 3\n",
    )
    .unwrap();
    let run_sine = |out: &PathBuf| {
        let status = Command::new(env!("CARGO_BIN_EXE_alm"))
            .args(["sine-bench", "--seed", "11", "--format", "csv"])
            .arg("--config")
            .arg(&sine_cfg)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    };
    let sine_a = dir.path().join("sine_a.csv");
    let sine_b = dir.path().join("sine_b.csv");
    run_sine(&sine_a);
    run_sine(&sine_b);
    let bytes_a = std::fs::read(&sine_a).unwrap();
    assert!(!bytes_a.is_empty());
    assert_eq!(bytes_a, std::fs::read(&sine_b).unwrap(), "sine-bench outputs differ");

    // run over CSV domains, text format.
    let domains = gen_mixture_domains(&MixtureBenchConfig {
        num_domains: 3,
        points_per_domain: 50,
        ..MixtureBenchConfig::default()
    })
    .unwrap();
    let mut paths = Vec::new();
    for (i, d) in domains.iter().enumerate() {
        let path = dir.path().join(format!("dom{i}.csv"));
        write_domain_csv(d, &path).unwrap();
        paths.push(path);
    }
    let run_cfg = dir.path().join("run.cfg");
    std::fs::write(
        &run_cfg,
        "hidden = 3\nepochs = 25\nphi_epochs = 10\nmethods = cheat,global,local_vote,alm\n",
    )
    .unwrap();
    let run_table = |out: &PathBuf| {
        let status = Command::new(env!("CARGO_BIN_EXE_alm"))
            .arg("run")
            .args(&paths)
            .args(["--seed", "3", "--format", "text"])
            .arg("--config")
            .arg(&run_cfg)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    };
    let table_a = dir.path().join("table_a.txt");
    let table_b = dir.path().join("table_b.txt");
    run_table(&table_a);
    run_table(&table_b);
    let bytes_a = std::fs::read(&table_a).unwrap();
    assert!(!bytes_a.is_empty());
    assert_eq!(bytes_a, std::fs::read(&table_b).unwrap(), "run outputs differ");

    println!("PASS criterion 8: sine-bench and run outputs byte-identical across repeats");
}

/// Exercises the model-persistence interface end to end alongside the
/// criteria: a fitted model written to the flat text format reloads
/// identically and predicts identically.
#[test]
fn model_roundtrip_through_text_format() {
    let domains = gen_mixture_domains(&MixtureBenchConfig {
        num_domains: 3,
        points_per_domain: 60,
        ..MixtureBenchConfig::default()
    })
    .unwrap();
    let target = domains[0].without_labels();
    let sources = domains[1..].to_vec();
    let data = MultiDomainSet::new(sources, target.clone()).unwrap();
    let cfg = TrainConfig {
        epochs: 40,
        ..TrainConfig::default()
    };
    let spec = TransformSpec {
        train: TrainConfig {
            epochs: 40,
            l2_penalty: 0.0,
            ..TrainConfig::default()
        },
        ..TransformSpec::default()
    };
    let model = fit_alm(&data, &AlmArch::shared(vec![4]), &spec, &cfg).unwrap();

    let mut buf = Vec::new();
    model.write_text(&mut buf).unwrap();
    let reloaded = alm_core::alm::AlmModel::read_text(buf.as_slice(), "<roundtrip>").unwrap();
    assert_eq!(model, reloaded);
    for i in 0..target.len() {
        let x = target.features().row(i).transpose();
        assert_eq!(
            model.predict_consensus(&x).unwrap(),
            reloaded.predict_consensus(&x).unwrap()
        );
    }
    println!("PASS: model text roundtrip identical");
}
