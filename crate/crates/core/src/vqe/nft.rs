use std::f64::consts::{FRAC_PI_2, PI};

/// Amplitudes below this are treated as a flat direction.
pub const FLAT_AMPLITUDE: f64 = 1e-12;

/// Sinusoid `C(theta) = c0 + c1 cos(theta - c2)` through three samples taken
/// at `theta0` and `theta0 +- pi/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sinusoid {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Sinusoid {
    pub fn from_samples(theta0: f64, at: f64, plus: f64, minus: f64) -> Self {
        let c0 = 0.5 * (plus + minus);
        let a = at - c0;
        let b = 0.5 * (minus - plus);
        // a = c1 cos(theta0 - c2), b = c1 sin(theta0 - c2)
        Self {
            c0,
            c1: a.hypot(b),
            c2: theta0 - b.atan2(a),
        }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.c0 + self.c1 * (theta - self.c2).cos()
    }

    pub fn minimum(&self) -> f64 {
        self.c0 - self.c1
    }

    pub fn argmin(&self) -> f64 {
        wrap_angle(self.c2 + PI)
    }
}

/// Map into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}

/// One coordinate step: sample `cost` at `theta0` and `theta0 +- pi/2` and
/// jump to the minimum of the reconstructed sinusoid. A flat direction
/// leaves `theta0` unchanged.
pub fn nft_update(mut cost: impl FnMut(f64) -> f64, theta0: f64) -> f64 {
    let at = cost(theta0);
    let plus = cost(theta0 + FRAC_PI_2);
    let minus = cost(theta0 - FRAC_PI_2);
    step(theta0, at, plus, minus).0
}

/// New angle and the model value there.
pub(crate) fn step(theta0: f64, at: f64, plus: f64, minus: f64) -> (f64, f64) {
    let s = Sinusoid::from_samples(theta0, at, plus, minus);
    if s.c1 < FLAT_AMPLITUDE {
        (theta0, at)
    } else {
        (s.argmin(), s.minimum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_minimum_at_pi() {
        let t = nft_update(|t| t.cos(), 0.0);
        assert!((t - PI).abs() < 1e-12);
    }

    #[test]
    fn shifted_sinusoid_recovered() {
        let c = |t: f64| 2.0 + 0.5 * (t - 0.3).cos();
        for theta0 in [-2.0, 0.0, 0.7, 3.0] {
            let t = nft_update(c, theta0);
            assert!((wrap_angle(t - (0.3 + PI))).abs() < 1e-9);
        }
        let s = Sinusoid::from_samples(1.1, c(1.1), c(1.1 + FRAC_PI_2), c(1.1 - FRAC_PI_2));
        assert!((s.c0 - 2.0).abs() < 1e-12);
        assert!((s.c1 - 0.5).abs() < 1e-12);
        assert!((s.minimum() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn flat_cost_does_not_move() {
        assert_eq!(nft_update(|_| 4.2, 0.37), 0.37);
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
    }
}
