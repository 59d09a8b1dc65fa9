mod checks;
mod common;
mod oracles;

use lsa_core::exec::Sequential;
use lsa_core::model::Variant;
use lsa_core::training::{batch_gradient, batch_loss};

#[test]
fn tiny_model_gradients_match_central_differences() {
    if let Err(e) = checks::gradients::tiny_all_variants() {
        panic!("{e}");
    }
}

#[test]
fn absent_user_bias_has_zero_gradient_both_ways() {
    let f = common::fixture(10, 8, 6, 12);
    let (model, long, prepared) = common::model_on(&f, common::tiny_model_config(), Variant::Full, 2);
    let batch: Vec<_> = prepared.iter().filter(|e| e.user != 0).take(3).cloned().collect();
    let refs: Vec<_> = batch.iter().collect();
    let (_, grads) = batch_gradient(&model, &long, &refs, &Sequential);
    let bias = model.layout.fm.user_bias;
    assert_eq!(grads.dense(bias, &model.params).row(0), &[0.0]);
    let mut p = model.params.clone();
    let base = batch_loss(&model, &p, &long, &batch);
    p.get_mut(bias).data_mut()[0] += 0.5;
    assert_eq!(batch_loss(&model, &p, &long, &batch), base);
}

#[test]
fn halving_eps_quarters_truncation_error() {
    let f = common::fixture(10, 8, 6, 13);
    let (model, long, prepared) = common::model_on(&f, common::tiny_model_config(), Variant::Full, 4);
    let batch: Vec<_> = prepared.iter().take(3).cloned().collect();
    let refs: Vec<_> = batch.iter().collect();
    let (_, grads) = batch_gradient(&model, &long, &refs, &Sequential);
    let id = model.layout.user.gate.w_gate;
    let analytic = grads.dense(id, &model.params).data()[0];
    let fd = |eps: f64| {
        let mut p = model.params.clone();
        let x = p.get(id).data()[0];
        p.get_mut(id).data_mut()[0] = x + eps;
        let plus = batch_loss(&model, &p, &long, &batch);
        p.get_mut(id).data_mut()[0] = x - eps;
        let minus = batch_loss(&model, &p, &long, &batch);
        (plus - minus) / (2.0 * eps)
    };
    let e1 = (fd(0.1) - analytic).abs();
    let e2 = (fd(0.05) - analytic).abs();
    let ratio = e1 / e2;
    assert!((3.0..5.0).contains(&ratio), "error ratio {ratio} ({e1} / {e2})");
}
