use super::{Matrix, Tape, TensorError, Var};

/// Outcome of a finite-difference gradient comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// Max over coordinates of `|a − n| / max(1, |a|, |n|)`.
    pub max_rel_error: f64,
    /// `(parameter index, flat coordinate)` where the maximum occurred.
    pub worst: Option<(usize, usize)>,
    pub coordinates: usize,
}

fn evaluate<F, E>(f: &mut F, params: &[Matrix]) -> Result<(Tape, Vec<Var>, Var), E>
where
    F: FnMut(&mut Tape, &[Var]) -> Result<Var, E>,
    E: From<TensorError>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let out = f(&mut tape, &vars)?;
    if tape.shape(out) != (1, 1) {
        return Err(TensorError::ShapeMismatch {
            op: "grad_check",
            left: tape.shape(out),
            right: (1, 1),
        }
        .into());
    }
    if !tape.value(out).item().is_finite() {
        return Err(TensorError::NonFinite { op: "grad_check" }.into());
    }
    Ok((tape, vars, out))
}

/// Compares tape gradients of the scalar `f(params)` against central differences.
///
/// `f` is re-run twice per coordinate, so keep fixtures small.
pub fn grad_check<F, E>(mut f: F, params: &[Matrix], eps: f64) -> Result<GradCheck, E>
where
    F: FnMut(&mut Tape, &[Var]) -> Result<Var, E>,
    E: From<TensorError>,
{
    let (tape, vars, out) = evaluate(&mut f, params)?;
    let grads = tape.backward(out)?;
    let analytic: Vec<Matrix> = vars.iter().map(|&v| grads.wrt(v)).collect();
    drop(tape);

    let mut work: Vec<Matrix> = params.to_vec();
    let mut result = GradCheck {
        max_rel_error: 0.0,
        worst: None,
        coordinates: 0,
    };
    for p in 0..work.len() {
        for k in 0..work[p].len() {
            let orig = work[p].as_slice()[k];
            work[p].as_mut_slice()[k] = orig + eps;
            let plus = {
                let (t, _, o) = evaluate(&mut f, &work)?;
                t.value(o).item()
            };
            work[p].as_mut_slice()[k] = orig - eps;
            let minus = {
                let (t, _, o) = evaluate(&mut f, &work)?;
                t.value(o).item()
            };
            work[p].as_mut_slice()[k] = orig;

            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[p].as_slice()[k];
            let err = (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs());
            result.coordinates += 1;
            if result.worst.is_none() || err > result.max_rel_error {
                result.max_rel_error = err;
                result.worst = Some((p, k));
            }
        }
    }
    Ok(result)
}
