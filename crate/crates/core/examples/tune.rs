// scratch experiment harness; not part of the deliverable API
use ctesn_core::ctesn::{
    train_lpctesn, train_npctesn, validate_surrogate, ReservoirSpec, TrainOptions, ValidateOptions,
};
use ctesn_core::models;

fn main() {
    let model = models::robertson();
    let opts0 = TrainOptions { n_train: 100, seed: 7, ..TrainOptions::for_model(&model) };

    let spec = ReservoirSpec::with_defaults(1000, 42);
    let surr = train_lpctesn(&model, &model.param_space, &spec, &opts0).unwrap();
    let rep = validate_surrogate(&surr, &model, 100, &ValidateOptions::for_model(&model)).unwrap();
    println!("LP n_r=1000: avg={:.5}%", rep.avg_rel_err_pct);

    for n_train in [100usize, 200] {
        let spec = ReservoirSpec::with_defaults(1000, 42);
        let opts = TrainOptions { n_train, ..opts0.clone() };
        let surr = train_lpctesn(&model, &model.param_space, &spec, &opts).unwrap();
        let rep = validate_surrogate(&surr, &model, 100, &ValidateOptions::for_model(&model)).unwrap();
        println!("LP n_r=1000 n={n_train}: avg={:.5}%", rep.avg_rel_err_pct);
    }
    for n_r in [3usize] {
        for (centers, n_train) in [(128usize, 100usize), (128, 200), (160, 200), (96, 200)] {
            let spec = ReservoirSpec::with_defaults(n_r, 42);
            let opts = TrainOptions { np_centers: centers, n_train, ..opts0.clone() };
            let surr = train_npctesn(&model, &model.param_space, &spec, &opts).unwrap();
            let rep =
                validate_surrogate(&surr, &model, 100, &ValidateOptions::for_model(&model)).unwrap();
            println!("NP n_r={n_r:2} c={centers:3} n={n_train}: avg={:.5}% self={:.5}%",
                rep.avg_rel_err_pct, surr.train_meta.train_self_error_pct);
        }
    }
}
