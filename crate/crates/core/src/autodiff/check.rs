use serde::Serialize;

use super::{AdError, Real, Tape, Var};

/// A scalar function of a parameter vector, written once for any [`Real`].
pub trait Objective {
    fn eval<S: Real>(&self, params: &[S]) -> S;

    /// Fingerprint of the discrete branch decisions taken at `params`.
    ///
    /// Two points with different regimes are separated by a discontinuity or
    /// kink of the objective; finite differences straddling them are
    /// meaningless. The default treats the objective as smooth everywhere.
    fn regime(&self, _params: &[f64]) -> u64 {
        0
    }
}

/// Value and gradient from one forward recording and one backward sweep.
pub fn gradient<O: Objective + ?Sized>(
    objective: &O,
    params: &[f64],
) -> Result<(f64, Vec<f64>), AdError> {
    let tape = Tape::with_capacity(4096);
    let vars: Vec<Var<'_>> = tape.vars(params);
    let out = objective.eval(&vars);
    let grad = tape.gradient(out, &vars)?;
    Ok((out.value(), grad))
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    /// Largest `|analytic - numeric| / max(1, |analytic|)` over checked
    /// components.
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
    pub checked: usize,
    /// Components skipped because the central difference straddles a branch
    /// boundary of the objective.
    pub excluded: Vec<usize>,
}

/// Compares the tape gradient against central differences on every component.
pub fn grad_check<O: Objective + ?Sized>(
    objective: &O,
    params: &[f64],
    h: f64,
) -> Result<GradCheckReport, AdError> {
    let (_, analytic) = gradient(objective, params)?;
    let indices: Vec<usize> = (0..params.len()).collect();
    Ok(grad_check_components(
        &analytic,
        |p| objective.eval(p),
        |p| objective.regime(p),
        params,
        h,
        &indices,
    ))
}

/// Central-difference check of an externally computed gradient on the given
/// components.
pub fn grad_check_components(
    analytic: &[f64],
    f: impl Fn(&[f64]) -> f64,
    regime: impl Fn(&[f64]) -> u64,
    params: &[f64],
    h: f64,
    indices: &[usize],
) -> GradCheckReport {
    assert!(h > 0.0, "finite-difference step must be positive");
    let base_regime = regime(params);
    let mut x = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: None,
        checked: 0,
        excluded: Vec::new(),
    };
    for &i in indices {
        let orig = x[i];
        x[i] = orig + h;
        let plus_regime = regime(&x);
        let fp = f(&x);
        x[i] = orig - h;
        let minus_regime = regime(&x);
        let fm = f(&x);
        x[i] = orig;
        if plus_regime != base_regime || minus_regime != base_regime {
            report.excluded.push(i);
            continue;
        }
        let numeric = (fp - fm) / (2.0 * h);
        let err = (analytic[i] - numeric).abs() / analytic[i].abs().max(1.0);
        report.checked += 1;
        if err > report.max_rel_error || report.worst_index.is_none() {
            report.max_rel_error = err;
            report.worst_index = Some(i);
        }
    }
    report
}
