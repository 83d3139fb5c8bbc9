//! One-dimensional minimization on a bracket.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for the minimizer of a unimodal `f` on `[lo, hi]`.
/// Stops once the bracket is narrower than `tol`.
pub fn golden_section_min<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    // Bracket shrinks by 1/phi per step; 200 steps covers any f64 interval.
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    // Report the best of the evaluated interior points and the midpoint.
    let fm = f(mid);
    if fm <= fc && fm <= fd {
        mid
    } else if fc <= fd {
        c
    } else {
        d
    }
}
