use lsa_core::model::Variant;
use lsa_core::training::gradient_check;

use crate::common;

/// Central differences on the tiny configuration, every variant, up to 24
/// coordinates of every tensor.
pub fn tiny_all_variants() -> Result<String, String> {
    let f = common::fixture(10, 8, 6, 11);
    let mut worst = 0.0f64;
    let mut tensors = 0;
    for variant in Variant::ALL {
        let (model, long, prepared) = common::model_on(&f, common::tiny_model_config(), variant, 2);
        let batch: Vec<_> = prepared.iter().step_by(7).take(4).cloned().collect();
        let check = gradient_check(&model, &long, &batch, 1e-5, 24, 9).map_err(|e| e.to_string())?;
        if check.tensors.len() != model.params.len() {
            return Err(format!("{variant}: checked {} of {} tensors", check.tensors.len(), model.params.len()));
        }
        for t in &check.tensors {
            let size = model.params.get(model.params.find(&t.name).unwrap()).data().len();
            if t.coordinates != size.min(24) {
                return Err(format!("{variant}/{}: {} coordinates checked", t.name, t.coordinates));
            }
            if t.max_relative_error > 1e-3 {
                return Err(format!("{variant}/{}: rel err {:.2e}", t.name, t.max_relative_error));
            }
        }
        tensors += check.tensors.len();
        worst = worst.max(check.max_relative_error);
    }
    Ok(format!("{tensors} tensors over {} variants, max rel err {worst:.2e}", Variant::ALL.len()))
}
