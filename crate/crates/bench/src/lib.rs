//! Fixtures shared by the benchmarks.

use advi_core::{infer_dims, make_model, synth, Dataset, Dims, Hypers, Model, ZooModel};

/// A zoo model with its data, dimensions inferred from the data.
pub fn fixture(name: &str, data: Dataset, dims: &[(&str, usize)]) -> (ZooModel, Dataset) {
    let explicit: Dims = dims.iter().map(|&(k, v)| (k.to_owned(), v)).collect();
    let dims = infer_dims(name, &data, &explicit).expect("dimensions resolve");
    let model = make_model(name, &Hypers::new(), &dims).expect("model builds");
    model.check_data(&data).expect("data fits the model");
    (model, data)
}

/// Three clusters in 2-D, 1000 points.
pub fn gmm() -> (ZooModel, Dataset) {
    let means = [vec![-4.0, 0.0], vec![4.0, 0.0], vec![0.0, 5.0]];
    fixture("gmm", synth::mixture(1000, &means, 0.5, 3).data, &[("K", 3)])
}

/// 50 regressors, 2000 observations.
pub fn linreg() -> (ZooModel, Dataset) {
    fixture("linreg_ard", synth::linreg(2000, 0, 50, 25, 1.0, 0).train, &[])
}

/// 50 users by 40 items from rank-5 rates, fitted at the default rank 10.
pub fn nmf() -> (ZooModel, Dataset) {
    fixture("gamma_poisson_nmf", synth::count_matrix(50, 40, 5, 1.0, 1).train, &[])
}
