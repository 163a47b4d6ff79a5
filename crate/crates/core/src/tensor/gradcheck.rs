//! Central finite-difference validation of tape gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{Fault, Matrix, Tape, Var};

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    /// Maximum accepted relative error.
    pub tolerance: f64,
    /// Central-difference step.
    pub step: f64,
    /// Scalar parameters to probe; every entry is probed when there are fewer.
    pub samples: usize,
    pub seed: u64,
    /// Negative-control hook: corrupts a backward rule on the analytic pass.
    pub fault: Option<Fault>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-4,
            step: 1e-5,
            samples: 100,
            seed: 0,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// `(parameter index, flat entry index)` of the worst disagreement.
    pub worst: Option<(usize, usize)>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares tape gradients of `forward` against central differences.
///
/// `forward` receives a fresh tape and one leaf per entry of `params` and
/// must return a `1×1` loss; it has to be deterministic. Relative error is
/// `|a - n| / max(1e-8, |a| + |n|)`.
pub fn gradient_check<F>(params: &mut [Matrix<f64>], mut forward: F, opts: GradCheckOptions) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let mut tape = match opts.fault {
        Some(f) => Tape::with_fault(f),
        None => Tape::new(),
    };
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone(), true)).collect();
    let loss = forward(&mut tape, &vars)?;
    let loss_value = tape.value(loss).get(0, 0);
    if !loss_value.is_finite() {
        return Err(Error::NonFinite(format!("loss {loss_value}")));
    }
    let mut grads = tape.backward(loss)?;
    let analytic: Vec<Matrix<f64>> = vars
        .iter()
        .zip(params.iter())
        .map(|(&v, p)| grads.take(v).unwrap_or_else(|| Matrix::zeros(p.rows(), p.cols())))
        .collect();
    for g in &analytic {
        if !g.all_finite() {
            return Err(Error::NonFinite("analytic gradient".into()));
        }
    }

    let mut eval = |params: &[Matrix<f64>]| -> Result<f64> {
        let mut t = Tape::new();
        let vs: Vec<Var> = params.iter().map(|p| t.leaf(p.clone(), false)).collect();
        let l = forward(&mut t, &vs)?;
        let v = t.value(l).get(0, 0);
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("perturbed loss {v}")));
        }
        Ok(v)
    };

    let offsets: Vec<usize> = params
        .iter()
        .scan(0, |acc, p| {
            let start = *acc;
            *acc += p.len();
            Some(start)
        })
        .collect();
    let total: usize = params.iter().map(Matrix::len).sum();
    let picks: Vec<usize> = if total <= opts.samples {
        (0..total).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut v = sample(&mut rng, total, opts.samples).into_vec();
        v.sort_unstable();
        v
    };

    let checked = picks.len();
    let mut max_rel = 0.0f64;
    let mut worst = None;
    for flat in picks {
        let p = offsets.partition_point(|&o| o <= flat) - 1;
        let e = flat - offsets[p];
        let original = params[p].as_slice()[e];
        params[p].as_mut_slice()[e] = original + opts.step;
        let plus = eval(params);
        params[p].as_mut_slice()[e] = original - opts.step;
        let minus = eval(params);
        params[p].as_mut_slice()[e] = original;
        let numeric = (plus? - minus?) / (2.0 * opts.step);
        let a = analytic[p].as_slice()[e];
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
        if rel > max_rel || worst.is_none() {
            max_rel = max_rel.max(rel);
            worst = Some((p, e));
        }
    }
    Ok(GradCheckReport {
        checked,
        max_rel_error: max_rel,
        worst,
        tolerance: opts.tolerance,
        passed: max_rel <= opts.tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_chain_passes_and_fault_fails() {
        let x0 = Matrix::from_fn(4, 3, |i, j| (i as f64 - 1.5) * 0.4 + j as f64 * 0.3);
        let w0 = Matrix::from_fn(3, 2, |i, j| 0.5 - (i + 2 * j) as f64 * 0.2);
        let f = |t: &mut Tape<f64>, v: &[Var]| -> Result<Var> {
            let h = t.matmul(v[0], v[1])?;
            let s = t.sigmoid(h);
            let sq = t.hadamard(s, s)?;
            Ok(t.sum(sq))
        };
        let mut params = vec![x0.clone(), w0.clone()];
        let ok = gradient_check(&mut params, f, GradCheckOptions::default()).unwrap();
        assert!(ok.passed, "{ok:?}");
        assert_eq!(params, vec![x0, w0], "parameters restored after probing");

        let bad = gradient_check(
            &mut params,
            f,
            GradCheckOptions {
                fault: Some(Fault::SigmoidBackward),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(!bad.passed, "{bad:?}");
    }
}
