//! Float helpers backed by `libm` so the crate stays `no_std` and the
//! math is bit-identical across platforms and build modes.

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn log2(x: f64) -> f64 {
    libm::log2(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub fn powi(x: f64, n: i32) -> f64 {
    match n {
        2 => x * x,
        3 => x * x * x,
        _ => libm::pow(x, n as f64),
    }
}

/// Squared Euclidean distance in the ground plane.
#[inline]
pub fn dist2(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    let dx = ax - bx;
    let dy = ay - by;
    dx * dx + dy * dy
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn powi_matches_repeated_multiplication() {
        assert_eq!(powi(3.0, 2), 9.0);
        assert_eq!(powi(2.0, 3), 8.0);
        assert!((powi(1.7, 5) - 1.7f64.powi(5)).abs() < 1e-12);
    }

    #[test]
    fn log2_of_power_of_two_is_exact() {
        assert_eq!(log2(1024.0), 10.0);
    }
}
