//! Triangle quadrature in barycentric form. Weights sum to one and are
//! scaled by the triangle area at the point of use.

/// A quadrature rule on the reference triangle.
#[derive(Clone, Debug)]
pub struct Rule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl Rule {
    /// Radon's 7-point rule, exact for polynomials of degree 5.
    pub fn degree5() -> Rule {
        let s15 = 15f64.sqrt();
        let a = (6.0 - s15) / 21.0;
        let b = (6.0 + s15) / 21.0;
        let wa = (155.0 - s15) / 1200.0;
        let wb = (155.0 + s15) / 1200.0;
        let third = 1.0 / 3.0;
        Rule {
            points: vec![
                [third, third, third],
                [a, a, 1.0 - 2.0 * a],
                [a, 1.0 - 2.0 * a, a],
                [1.0 - 2.0 * a, a, a],
                [b, b, 1.0 - 2.0 * b],
                [b, 1.0 - 2.0 * b, b],
                [1.0 - 2.0 * b, b, b],
            ],
            weights: vec![9.0 / 40.0, wa, wa, wa, wb, wb, wb],
        }
    }

    /// Collapsed (Duffy) tensor Gauss-Legendre rule with `m × m` points,
    /// exact for degree `2m - 2` on the triangle. Independent of
    /// [`Rule::degree5`]; used as a reference in checks.
    pub fn collapsed_gauss(m: usize) -> Rule {
        let (x, w) = gauss_legendre(m);
        let mut points = Vec::with_capacity(m * m);
        let mut weights = Vec::with_capacity(m * m);
        for i in 0..m {
            // map to [0, 1]
            let u = 0.5 * (x[i] + 1.0);
            let wu = 0.5 * w[i];
            for j in 0..m {
                let v = 0.5 * (x[j] + 1.0);
                let wv = 0.5 * w[j];
                // (u, v) in the square -> (s, t) = (u, v (1 - u)) in the triangle
                let s = u;
                let t = v * (1.0 - u);
                points.push([1.0 - s - t, s, t]);
                // Jacobian (1 - u); the reference area 1/2 is divided out.
                weights.push(2.0 * wu * wv * (1.0 - u));
            }
        }
        Rule { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on
/// the Legendre recurrence.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            if m == 1 {
                p1 = z;
            } else {
                for k in 2..=m {
                    let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
            }
            // p1 = P_m(z), p0 = P_{m-1}(z)
            dp = m as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if m == 1 {
            dp = 1.0;
            z = 0.0;
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// ∫ over the reference triangle of s^a t^b = a! b! / (a + b + 2)!,
    /// divided by the reference area 1/2 to match normalized weights.
    fn monomial_mean(a: u32, b: u32) -> f64 {
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        2.0 * fact(a) * fact(b) / fact(a + b + 2)
    }

    fn apply(rule: &Rule, a: u32, b: u32) -> f64 {
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| w * p[1].powi(a as i32) * p[2].powi(b as i32))
            .sum()
    }

    #[test]
    fn degree5_exact_up_to_five() {
        let rule = Rule::degree5();
        assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for a in 0..=5 {
            for b in 0..=(5 - a) {
                let err = (apply(&rule, a, b) - monomial_mean(a, b)).abs();
                assert!(err < 1e-15, "s^{a} t^{b}: {err}");
            }
        }
        // not exact at degree 6
        assert!((apply(&rule, 6, 0) - monomial_mean(6, 0)).abs() > 1e-6);
    }

    #[test]
    fn collapsed_gauss_high_degree() {
        let rule = Rule::collapsed_gauss(6);
        for a in 0..=10 {
            for b in 0..=(10 - a) {
                let err = (apply(&rule, a, b) - monomial_mean(a, b)).abs();
                assert!(err < 1e-14, "s^{a} t^{b}: {err}");
            }
        }
    }

    #[test]
    fn legendre_small() {
        let (x, w) = gauss_legendre(2);
        assert!((x[0].abs() - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15);
        let (x, w) = gauss_legendre(1);
        assert_eq!(x, vec![0.0]);
        assert_eq!(w, vec![2.0]);
    }
}
