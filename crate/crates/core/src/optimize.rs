use crate::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Maximum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
///
/// The endpoints are evaluated too, so maxima sitting on the boundary are
/// returned exactly. Fails with [`Error::NoConvergence`] if the bracket is
/// still wider than `tol` after `max_iter` reductions.
pub(crate) fn golden_section_max<F>(mut f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Result<Maximum>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut evaluations = 0;
    let mut eval = |x: f64, n: &mut usize| -> Result<f64> {
        *n += 1;
        f(x)
    };

    if b - a <= tol {
        let x = 0.5 * (a + b);
        let value = eval(x, &mut evaluations)?;
        return Ok(Maximum { x, value, evaluations });
    }

    let fa = eval(a, &mut evaluations)?;
    let fb = eval(b, &mut evaluations)?;
    let (lo0, flo0, hi0, fhi0) = (a, fa, b, fb);

    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c, &mut evaluations)?;
    let mut fd = eval(d, &mut evaluations)?;

    let mut iter = 0;
    while b - a > tol {
        if iter == max_iter {
            return Err(Error::NoConvergence { iterations: max_iter });
        }
        iter += 1;
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c, &mut evaluations)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d, &mut evaluations)?;
        }
    }

    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for (x, v) in [(lo0, flo0), (hi0, fhi0)] {
        if v > best.1 {
            best = (x, v);
        }
    }
    Ok(Maximum {
        x: best.0,
        value: best.1,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_maximum() {
        // x^2 e^{-x} peaks at x = 2 with value 4 e^{-2}
        let m = golden_section_max(|x| Ok(x * x * (-x).exp()), 0.0, 6.0, 1e-8, 200).unwrap();
        assert!((m.x - 2.0).abs() < 1e-6);
        assert!((m.value - 4.0 * (-2.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn finds_boundary_maximum() {
        let m = golden_section_max(Ok, 1.0, 3.0, 1e-6, 200).unwrap();
        assert_eq!(m.x, 3.0);
    }

    #[test]
    fn reports_non_convergence() {
        let r = golden_section_max(|x| Ok(-x * x), -1.0, 1.0, 1e-12, 5);
        assert!(matches!(r, Err(Error::NoConvergence { iterations: 5 })));
    }
}
