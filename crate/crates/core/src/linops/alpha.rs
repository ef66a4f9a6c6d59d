//! Differentiation weights for the staggered central stencil.
//!
//! The first derivative at a cell center is approximated from face values at
//! half-integer offsets `eps = 1/2, 3/2, ...`:
//!
//! ```text
//! f'(0) ~ (1/h) sum_eps alpha(eps) (f(eps h) - f(-eps h))
//! ```
//!
//! Exactness on all odd monomials up to the requested order gives the linear
//! system `sum_k alpha_k 2 eps_k^(2j-1) = delta_{j,1}`. The system is solved
//! in exact rational arithmetic so the classical values come out bit-exact
//! (order 2: `[1]`; order 4: `[9/8, -1/24]`).

use crate::{Error, Result};

/// Reduced fraction over i128. All quantities stay far below overflow for
/// the supported orders.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Frac {
    num: i128,
    den: i128,
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.max(1)
}

impl Frac {
    fn new(num: i128, den: i128) -> Frac {
        debug_assert!(den != 0);
        let sign = if den < 0 { -1 } else { 1 };
        let g = gcd(num, den);
        Frac {
            num: sign * num / g,
            den: sign * den / g,
        }
    }

    fn zero() -> Frac {
        Frac { num: 0, den: 1 }
    }

    fn sub(self, o: Frac) -> Frac {
        Frac::new(self.num * o.den - o.num * self.den, self.den * o.den)
    }

    fn mul(self, o: Frac) -> Frac {
        Frac::new(self.num * o.num, self.den * o.den)
    }

    fn div(self, o: Frac) -> Frac {
        debug_assert!(o.num != 0);
        Frac::new(self.num * o.den, self.den * o.num)
    }

    fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// Stencil weights `alpha(1/2), alpha(3/2), ..., alpha((order-1)/2)`.
pub fn alpha_coefficients(order: usize) -> Result<Vec<f64>> {
    if order < 2 || order % 2 != 0 {
        return Err(Error::InvalidInput(format!(
            "differentiation order must be even and >= 2, got {order}"
        )));
    }
    let n = order / 2;
    // Row j (j = 1..n): sum_k alpha_k * 2 * ((2k-1)/2)^(2j-1) = [j == 1].
    let mut a = vec![vec![Frac::zero(); n + 1]; n];
    for (j, row) in a.iter_mut().enumerate() {
        let pow = 2 * j + 1;
        for (k, entry) in row.iter_mut().take(n).enumerate() {
            let odd = (2 * k + 1) as i128;
            *entry = Frac::new(2 * odd.pow(pow as u32), 1 << pow);
        }
        row[n] = if j == 0 { Frac::new(1, 1) } else { Frac::zero() };
    }
    // Gaussian elimination with partial (largest-magnitude) pivoting.
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| {
                let ap = (a[p][col].num as f64 / a[p][col].den as f64).abs();
                let aq = (a[q][col].num as f64 / a[q][col].den as f64).abs();
                ap.partial_cmp(&aq).unwrap()
            })
            .unwrap();
        a.swap(col, pivot);
        if a[col][col].num == 0 {
            return Err(Error::Numerical("singular differentiation system".into()));
        }
        for r in 0..n {
            if r == col || a[r][col].num == 0 {
                continue;
            }
            let f = a[r][col].div(a[col][col]);
            for c in col..=n {
                a[r][c] = a[r][c].sub(f.mul(a[col][c]));
            }
        }
    }
    Ok((0..n).map(|k| a[k][n].div(a[k][k]).to_f64()).collect())
}
