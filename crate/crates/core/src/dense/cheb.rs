/// Chebyshev polynomial of the first kind, `T_k(x)`.
///
/// Uses `½((x+√(x²−1))^k + (x+√(x²−1))^{−k})` for `|x| ≥ 1` and
/// `cos(k·arccos x)` inside the interval.
pub fn chebyshev_eval(k: u32, x: f64) -> f64 {
    match k {
        0 => return 1.0,
        1 => return x,
        _ => {}
    }
    if x.abs() <= 1.0 {
        return (k as f64 * x.acos()).cos();
    }
    let ax = x.abs();
    let z = ax + (ax * ax - 1.0).sqrt();
    let zk = z.powi(k as i32);
    let value = 0.5 * (zk + 1.0 / zk);
    if x < 0.0 && k % 2 == 1 {
        -value
    } else {
        value
    }
}
