use super::tensor::Parameterized;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub step: f64,
    /// Denominator floor for the relative error, so coordinates whose true
    /// gradient is ~0 are judged on absolute error.
    pub floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            floor: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

/// Compares analytic gradients with central differences.
///
/// `objective` must return the loss and accumulate its analytic gradient into
/// the model's gradient buffers; it is called with buffers zeroed. The model
/// is restored and its gradients cleared on return.
pub fn grad_check<P, F>(model: &mut P, mut objective: F, config: &GradCheckConfig) -> GradCheckReport
where
    P: Parameterized,
    F: FnMut(&mut P) -> f64,
{
    model.zero_grad();
    objective(model);
    let analytic: Vec<Vec<f64>> = model.params().iter().map(|p| p.grad.clone()).collect();
    let names: Vec<String> = model.params().iter().map(|p| p.name().to_string()).collect();
    model.zero_grad();

    let h = config.step;
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
    };
    for (k, grads) in analytic.iter().enumerate() {
        for (i, &a) in grads.iter().enumerate() {
            let original = model.params()[k].values[i];
            model.params_mut()[k].values[i] = original + h;
            let up = objective(model);
            model.params_mut()[k].values[i] = original - h;
            let down = objective(model);
            model.params_mut()[k].values[i] = original;
            model.zero_grad();

            let numeric = (up - down) / (2.0 * h);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(config.floor);
            report.checked += 1;
            if report.worst.is_none() || rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((names[k].clone(), i));
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffkit::{softmax_cross_entropy, Linear};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linear_layer_under_cross_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let (i, o) = (rng.gen_range(1..8), rng.gen_range(2..5));
            let mut layer = Linear::init("fc", i, o, &mut rng);
            let x: Vec<f64> = (0..i).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut target = vec![0.0; o];
            target[rng.gen_range(0..o)] = 1.0;
            let report = grad_check(
                &mut layer,
                |m| {
                    let z = m.forward(&x);
                    let (loss, _, dz) = softmax_cross_entropy(&z, &target);
                    m.backward(&x, &dz);
                    loss
                },
                &GradCheckConfig::default(),
            );
            assert!(report.max_rel_error < 1e-6, "{report:?}");
        }
    }

    #[test]
    fn detects_a_wrong_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut layer = Linear::init("fc", 3, 2, &mut rng);
        let x = [0.5, -0.25, 1.0];
        let report = grad_check(
            &mut layer,
            |m| {
                let z = m.forward(&x);
                let (loss, _, dz) = softmax_cross_entropy(&z, &[1.0, 0.0]);
                let doubled: Vec<f64> = dz.iter().map(|g| 2.0 * g).collect();
                m.backward(&x, &doubled);
                loss
            },
            &GradCheckConfig::default(),
        );
        assert!(report.max_rel_error > 0.4);
    }
}
