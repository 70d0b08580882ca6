use stringgp::data::{gen_binary_toy, gen_poisson_tf};
use stringgp::model_io::{load_full, load_sparse, read_full, read_sparse, save_full, save_sparse, write_full, write_sparse};
use stringgp::select::{select_random, SelectionConfig};
use stringgp::{Dataset, FullGpModel, KernelConfig, Likelihood, SparseGpModel, SparseOptions};

fn cases() -> Vec<(Dataset, Likelihood)> {
    let (reg, cls) = gen_binary_toy(40, 10, 3).unwrap();
    let (counts, _) = gen_poisson_tf(40, 10, 1.0, 3).unwrap();
    vec![
        (reg, Likelihood::gaussian(0.1).unwrap()),
        (cls, Likelihood::Bernoulli),
        (counts, Likelihood::Poisson),
    ]
}

#[test]
fn full_models_round_trip_bit_exactly() {
    let cfg = KernelConfig::new(3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for (i, (data, lik)) in cases().into_iter().enumerate() {
        let model = FullGpModel::fit(&data, &cfg, lik).unwrap();
        let path = dir.path().join(format!("full{i}.json"));
        save_full(&model, &path).unwrap();
        let back = load_full(&path).unwrap();
        assert_eq!(back.state(), model.state());
        assert_eq!(back.log_evidence().to_bits(), model.log_evidence().to_bits());
        let (a, b) = (model.predict(data.inputs(), false), back.predict(data.inputs(), false));
        assert_eq!(a, b);

        let mut first = Vec::new();
        write_full(&model, &mut first).unwrap();
        let mut second = Vec::new();
        write_full(&read_full(first.as_slice()).unwrap(), &mut second).unwrap();
        assert_eq!(first, second);
        assert!(read_sparse(first.as_slice()).is_err());
    }
}

#[test]
fn sparse_models_round_trip_bit_exactly() {
    let cfg = KernelConfig::new(3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for (i, (data, lik)) in cases().into_iter().enumerate() {
        let z = select_random(&data, &SelectionConfig { m: 6, seed: i as u64, ..Default::default() }).unwrap();
        let model = SparseGpModel::fit(&data, &z, &cfg, lik, &SparseOptions::default()).unwrap();
        let path = dir.path().join(format!("sparse{i}.json"));
        save_sparse(&model, data.alphabet(), &path).unwrap();
        let back = load_sparse(&path).unwrap();
        assert_eq!(back.state(), model.state());
        assert_eq!(back.inducing(), model.inducing());
        let (a, b) = (model.predict(data.inputs(), true), back.predict(data.inputs(), true));
        assert_eq!(a, b);

        let mut first = Vec::new();
        write_sparse(&model, data.alphabet(), &mut first).unwrap();
        let mut second = Vec::new();
        write_sparse(&read_sparse(first.as_slice()).unwrap(), data.alphabet(), &mut second).unwrap();
        assert_eq!(first, second);
        assert!(read_full(first.as_slice()).is_err());
    }
}
