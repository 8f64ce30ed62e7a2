use elimboost::io::{load_model, read_dataset, read_predictions, save_model, write_dataset, write_predictions, AnyModel};
use elimboost::synth::{sample_rng, synth, Generator, GeneratorKind};
use elimboost::{adaboost_train, samme_train, train, Execution, PoolSpec, StumpPool, TrainConfig};

#[test]
fn models_survive_save_and_load() {
    let data = synth(GeneratorKind::Regions, 4, 120, 5).unwrap();
    let fresh = Generator::new(GeneratorKind::Regions, 4, 0.0, 5)
        .unwrap()
        .sample(300, &mut sample_rng(5, 9))
        .unwrap();
    let pool = StumpPool::build(data.features(), 4, &PoolSpec::Axis).unwrap();
    let binary = synth(GeneratorKind::Interval, 2, 40, 1).unwrap();
    let binary_pool = StumpPool::build(binary.features(), 2, &PoolSpec::Axis).unwrap();
    let models = [
        AnyModel::Tau(train(&data, &TrainConfig::new(15)).unwrap()),
        AnyModel::Samme(samme_train(&data, 40, &pool, Execution::Sequential).unwrap()),
        AnyModel::Adaboost(adaboost_train(&binary, 10, &binary_pool, Execution::Sequential).unwrap()),
    ];
    let dir = tempfile::tempdir().unwrap();
    for (i, model) in models.iter().enumerate() {
        let path = dir.path().join(format!("model{i}.json"));
        save_model(&path, model).unwrap();
        let loaded = load_model(&path).unwrap();
        let features = if i == 2 { binary.features() } else { fresh.features() };
        assert_eq!(model.predict_all(features).unwrap(), loaded.predict_all(features).unwrap());
        let again = dir.path().join(format!("again{i}.json"));
        save_model(&again, &loaded).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }
}

#[test]
fn datasets_and_predictions_round_trip() {
    let data = synth(GeneratorKind::Regions, 5, 50, 2).unwrap();
    let mut buf = Vec::new();
    write_dataset(&mut buf, &data).unwrap();
    assert_eq!(read_dataset(buf.as_slice(), Some(5)).unwrap(), data);

    let labels = data.labels().to_vec();
    let mut buf = Vec::new();
    write_predictions(&mut buf, &labels).unwrap();
    assert!(String::from_utf8(buf.clone()).unwrap().starts_with("# format_version: 1\nlabel\n"));
    assert_eq!(read_predictions(buf.as_slice()).unwrap(), labels);
}
