//! Bessel function of the first kind, order one.
//!
//! Evaluated with Miller's backward recurrence normalised by the identity
//! `J0(x) + 2 Σ J2k(x) = 1`, which is stable for every real argument and
//! accurate to a few ulp across the range used by the antenna pattern
//! (`|x| ≲ 2π·η`).

const RESCALE_ABOVE: f64 = 1e250;
const RESCALE_BY: f64 = 1e-250;

pub fn bessel_j1(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if !x.is_finite() {
        return if x.is_nan() { f64::NAN } else { 0.0 };
    }
    let ax = x.abs();

    // Start well above the turning point so the recurrence converges
    // on the minimal solution; the start index must be even.
    let mut start = (ax + 30.0 + 12.0 * ax.sqrt()).ceil() as usize;
    if start % 2 == 1 {
        start += 1;
    }

    let two_over_x = 2.0 / ax;
    let mut j_next = 0.0_f64; // J_{k+1}
    let mut j_cur = 1e-30_f64; // J_k
    let mut norm = 0.0_f64;
    let mut j1 = 0.0_f64;

    for k in (1..=start).rev() {
        let j_prev = k as f64 * two_over_x * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        let order = k - 1;
        if order == 1 {
            j1 = j_cur;
        }
        if order == 0 {
            norm += j_cur;
        } else if order % 2 == 0 {
            norm += 2.0 * j_cur;
        }
        if j_cur.abs() > RESCALE_ABOVE {
            j_cur *= RESCALE_BY;
            j_next *= RESCALE_BY;
            norm *= RESCALE_BY;
            j1 *= RESCALE_BY;
        }
    }

    let value = j1 / norm;
    if x < 0.0 {
        -value
    } else {
        value
    }
}
