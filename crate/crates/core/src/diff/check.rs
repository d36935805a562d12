//! Central finite-difference gradient checking.

use super::{ParamStore, Tape, Var};
use crate::error::Result;

/// Gradients smaller than this are compared in absolute rather than relative terms.
pub const RELATIVE_FLOOR: f64 = 1e-6;

/// Outcome of [`finite_diff_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub coordinates_checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compare tape gradients of `f` against central differences with step `h`,
/// one coordinate at a time over every parameter in `params`.
///
/// `f` records a scalar loss on the supplied tape using values from the
/// supplied store. `params` is left unchanged.
pub fn finite_diff_check<'g, F>(params: &ParamStore, h: f64, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<'g>, &ParamStore) -> Result<Var>,
{
    let mut analytic_store = params.clone();
    analytic_store.zero_grad();
    let mut tape = Tape::new();
    let loss = f(&mut tape, &analytic_store)?;
    tape.backward(loss, &mut analytic_store)?;

    let eval = |store: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let loss = f(&mut tape, store)?;
        Ok(tape.value(loss).item())
    };

    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        coordinates_checked: 0,
    };
    let names: Vec<String> = params.names().map(str::to_string).collect();
    for name in names {
        let len = params.value(&name)?.len();
        for i in 0..len {
            let orig = params.value(&name)?.data()[i];
            probe.get_mut(&name)?.value.data_mut()[i] = orig + h;
            let plus = eval(&probe)?;
            probe.get_mut(&name)?.value.data_mut()[i] = orig - h;
            let minus = eval(&probe)?;
            probe.get_mut(&name)?.value.data_mut()[i] = orig;

            let numeric = (plus - minus) / (2.0 * h);
            let analytic = analytic_store.grad(&name)?.data()[i];
            let err = relative_error(analytic, numeric);
            report.coordinates_checked += 1;
            if err > report.max_relative_error || report.worst_param.is_empty() {
                report.max_relative_error = err;
                report.worst_param = name.clone();
                report.worst_index = i;
                report.analytic = analytic;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
