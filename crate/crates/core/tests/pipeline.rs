//! End-to-end library flows: generate, adapt, predict, persist.

use nalgebra::DVector;

use alm_core::alm::{fit_alm, AlmArch, AlmModel, TransformSpec};
use alm_core::data::{gen_mixture_domains, gen_sine_domains, MixtureBenchConfig, SineBenchConfig};
use alm_core::nn::TrainConfig;
use alm_core::{Domain, MultiDomainSet};

fn quick_train(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 40,
        ..TrainConfig::default().with_seed(seed)
    }
}

fn quick_spec() -> TransformSpec {
    TransformSpec {
        train: TrainConfig {
            epochs: 40,
            l2_penalty: 0.0,
            ..TrainConfig::default()
        },
        ..TransformSpec::default()
    }
}

#[test]
fn adapt_and_predict_over_generated_domains() {
    let mut domains = gen_mixture_domains(&MixtureBenchConfig {
        num_domains: 4,
        points_per_domain: 80,
        ..MixtureBenchConfig::default()
    })
    .unwrap();
    let target = domains.pop().unwrap();
    let labels = target.labels().unwrap().clone();

    let data = MultiDomainSet::new(domains, target.without_labels()).unwrap();
    let model = fit_alm(&data, &AlmArch::shared(vec![4]), &quick_spec(), &quick_train(1)).unwrap();

    let predictions = model.predict_rows(target.features()).unwrap();
    assert!(predictions.iter().all(|&p| p == 1.0 || p == -1.0));
    let wrong = predictions
        .iter()
        .zip(labels.iter())
        .filter(|(p, y)| p != y)
        .count();
    // Better than chance on a benchmark built from one shared concept.
    assert!(wrong * 2 < target.len(), "{wrong}/{} wrong", target.len());
}

#[test]
fn predictions_blind_to_held_out_labels() {
    // The same target features, arriving once via a labeled domain that is
    // stripped and once as a never-labeled domain, produce identical models:
    // held-out labels cannot influence training.
    let domains = gen_sine_domains(&SineBenchConfig {
        num_sources: 3,
        points_per_source: 120,
        seed: 3,
        ..SineBenchConfig::default()
    })
    .unwrap();
    let (labeled_target, sources) = (domains[0].clone(), domains[1..].to_vec());

    let stripped = labeled_target.without_labels();
    let fresh = Domain::unlabeled(labeled_target.features().clone()).unwrap();

    let arch = AlmArch::shared(vec![3]);
    let model_a = fit_alm(
        &MultiDomainSet::new(sources.clone(), stripped).unwrap(),
        &arch,
        &quick_spec(),
        &quick_train(5),
    )
    .unwrap();
    let model_b = fit_alm(
        &MultiDomainSet::new(sources, fresh).unwrap(),
        &arch,
        &quick_spec(),
        &quick_train(5),
    )
    .unwrap();
    assert_eq!(model_a, model_b);
}

#[test]
fn model_file_reloads_and_predicts_identically() {
    let mut domains = gen_mixture_domains(&MixtureBenchConfig {
        num_domains: 3,
        points_per_domain: 60,
        ..MixtureBenchConfig::default()
    })
    .unwrap();
    let target = domains.pop().unwrap().without_labels();
    let data = MultiDomainSet::new(domains, target.clone()).unwrap();
    let model = fit_alm(&data, &AlmArch::shared(vec![3]), &quick_spec(), &quick_train(9)).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.txt");
    let mut file = std::fs::File::create(&path).unwrap();
    model.write_text(&mut file).unwrap();
    drop(file);

    let reader = std::io::BufReader::new(std::fs::File::open(&path).unwrap());
    let reloaded = AlmModel::read_text(reader, &path.display().to_string()).unwrap();
    assert_eq!(model, reloaded);

    for i in 0..target.len() {
        let x: DVector<f64> = target.features().row(i).transpose();
        assert_eq!(
            model.predict_consensus(&x).unwrap().to_bits(),
            reloaded.predict_consensus(&x).unwrap().to_bits()
        );
    }
}
