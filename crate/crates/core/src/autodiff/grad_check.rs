use super::tape::{Tape, Var};
use super::{AutodiffError, Result};

/// Verdict for one coordinate of a gradient check.
#[derive(Debug, Clone)]
pub struct CoordCheck {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
    /// Set when the coordinate was not compared (e.g. the probe pair
    /// straddles a kink of `abs` or a clamp).
    pub skipped: Option<String>,
}

/// Comparison of reverse-mode adjoints against central finite differences.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub tol: f64,
    pub coords: Vec<CoordCheck>,
    pub checked: usize,
    pub skipped: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err <= self.tol
    }
}

/// Checks the reverse-mode gradient of a scalar-valued function against
/// central finite differences with step `h`.
///
/// `f` receives a fresh tape and the point as a differentiable vector leaf
/// and must return a scalar var. Coordinates whose `x+h`/`x-h` probes land
/// on different sides of a non-differentiable point (a kink of `abs`, or a
/// clamp boundary) are skipped and reported instead of compared.
///
/// The relative error uses an absolute floor of `1e-4 * max(1, |f(x)|)` in
/// the denominator so that coordinates with near-zero true gradient are not
/// dominated by floating-point noise in the difference quotient. Two exact
/// zeros compare with error 0.
pub fn grad_check<F>(f: F, point: &[f64], h: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let x0 = tape.input(point);
    let root = f(&mut tape, x0)?;
    if !root.shape().is_scalar() {
        return Err(AutodiffError::NonScalarRoot(root.shape()));
    }
    let center_value = tape.scalar_value(root);
    if !center_value.is_finite() {
        return Err(AutodiffError::NonFinite {
            probe: "center point".to_string(),
        });
    }
    let grads = tape.backward(root)?;
    let analytic = grads.wrt(x0).to_vec();
    drop(grads);

    let floor = 1e-4 * center_value.abs().max(1.0);
    let mut coords = Vec::with_capacity(point.len());
    let mut max_rel_err: f64 = 0.0;
    let mut checked = 0;
    let mut skipped = 0;

    let mut probe = point.to_vec();
    for i in 0..point.len() {
        probe[i] = point[i] + h;
        let (v_plus, sig_plus) = eval_probe(&f, &probe, i, "+h")?;
        probe[i] = point[i] - h;
        let (v_minus, sig_minus) = eval_probe(&f, &probe, i, "-h")?;
        probe[i] = point[i];

        if sig_plus != sig_minus {
            skipped += 1;
            coords.push(CoordCheck {
                index: i,
                analytic: analytic[i],
                numeric: f64::NAN,
                rel_err: f64::NAN,
                skipped: Some("non-differentiable point".to_string()),
            });
            continue;
        }

        let numeric = (v_plus - v_minus) / (2.0 * h);
        let a = analytic[i];
        let rel_err = if a == numeric {
            0.0
        } else {
            (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor)
        };
        max_rel_err = max_rel_err.max(rel_err);
        checked += 1;
        coords.push(CoordCheck {
            index: i,
            analytic: a,
            numeric,
            rel_err,
            skipped: None,
        });
    }

    Ok(GradCheckReport {
        max_rel_err,
        tol,
        coords,
        checked,
        skipped,
    })
}

fn eval_probe<F>(f: &F, point: &[f64], coord: usize, side: &str) -> Result<(f64, Vec<i8>)>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let x = tape.input(point);
    let root = f(&mut tape, x)?;
    let value = tape.scalar_value(root);
    if !value.is_finite() {
        return Err(AutodiffError::NonFinite {
            probe: format!("coordinate {coord} probe {side}"),
        });
    }
    Ok((value, tape.kink_signature()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares_tight() {
        let report = grad_check(
            |t, x| t.sumsq(x),
            &[1.0, -2.0, 0.5],
            1e-6,
            1e-7,
        )
        .unwrap();
        assert!(report.passed(), "max rel err {}", report.max_rel_err);
        assert!(report.max_rel_err < 1e-7);
        assert_eq!(report.checked, 3);
    }

    #[test]
    fn constant_function_zero_error() {
        let report = grad_check(
            |t, x| {
                let c = t.constant_scalar(4.0);
                let z = t.scale(x, 0.0)?;
                let zs = t.sum(z)?;
                t.add(zs, c)
            },
            &[0.3, 0.7],
            1e-6,
            1e-7,
        )
        .unwrap();
        assert_eq!(report.max_rel_err, 0.0);
    }

    #[test]
    fn abs_kink_is_skipped() {
        let report = grad_check(
            |t, x| {
                let a = t.abs(x)?;
                t.sum(a)
            },
            &[1.0, 0.0, -2.0],
            1e-6,
            1e-5,
        )
        .unwrap();
        assert_eq!(report.skipped, 1);
        let kinked = &report.coords[1];
        assert_eq!(
            kinked.skipped.as_deref(),
            Some("non-differentiable point")
        );
        assert!(report.passed());
    }

    #[test]
    fn non_finite_probe_is_named() {
        let err = grad_check(|t, x| { let l = t.ln(x)?; t.sum(l) }, &[0.0], 1e-6, 1e-5)
            .unwrap_err();
        assert!(matches!(err, AutodiffError::NonFinite { .. }));
    }

    #[test]
    fn tanh_chain_within_tolerance() {
        let report = grad_check(
            |t, x| {
                let y = t.tanh(x)?;
                let s = t.sumsq(y)?;
                let o = t.offset(s, 1.0)?;
                t.ln(o)
            },
            &[0.2, -0.8, 1.5, 0.0],
            1e-6,
            1e-5,
        )
        .unwrap();
        assert!(report.passed(), "max rel err {}", report.max_rel_err);
    }
}
