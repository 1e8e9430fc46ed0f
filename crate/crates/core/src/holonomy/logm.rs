use nalgebra::DMatrix;

/// Principal square root by the Denman–Beavers iteration.
fn sqrtm(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::identity(n, n);
    for _ in 0..60 {
        let yi = y.clone().try_inverse()?;
        let zi = z.clone().try_inverse()?;
        let y_next = (&y + zi) * 0.5;
        let z_next = (&z + yi) * 0.5;
        let change = (&y_next - &y).amax();
        y = y_next;
        z = z_next;
        if !y.iter().all(|x| x.is_finite()) {
            return None;
        }
        if change <= 1e-15 * y.amax().max(1.0) {
            return Some(y);
        }
    }
    None
}

/// Principal matrix logarithm by inverse scaling and squaring.
///
/// Returns `None` when a square root fails to converge, which happens for
/// eigenvalues on or near the closed negative real axis.
pub fn principal_log(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let mut x = a.clone();
    let mut halvings = 0;
    while (&x - &id).norm() > 0.1 {
        if halvings >= 40 {
            return None;
        }
        x = sqrtm(&x)?;
        halvings += 1;
    }
    let e = &x - &id;
    let mut term = e.clone();
    let mut sum = e.clone();
    for m in 2..200 {
        term = &term * &e;
        let t = &term / m as f64;
        if m % 2 == 0 {
            sum -= &t;
        } else {
            sum += &t;
        }
        if t.amax() < 1e-18 {
            break;
        }
    }
    Some(sum * 2f64.powi(halvings))
}
