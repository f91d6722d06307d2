//! Test-only oracles, independent of the library's algorithms.
#![allow(dead_code)]


#[derive(Clone, Copy, PartialEq)]
pub enum Cmp {
    Le,
    Ge,
}

/// Dense two-phase tableau simplex with Bland's rule:
/// minimise `cost . x` subject to the rows and `x >= 0`.
pub struct LinearProgram {
    cost: Vec<f64>,
    rows: Vec<(Vec<f64>, Cmp, f64)>,
}

const EPS: f64 = 1e-11;
/// Smallest admissible pivot element.
const PIVOT_EPS: f64 = 1e-7;

impl LinearProgram {
    pub fn new(cost: Vec<f64>) -> Self {
        Self { cost, rows: Vec::new() }
    }

    pub fn add(&mut self, coeffs: Vec<f64>, cmp: Cmp, rhs: f64) {
        assert_eq!(coeffs.len(), self.cost.len());
        self.rows.push((coeffs, cmp, rhs));
    }

    /// Optimal objective, or `None` when infeasible or unbounded.
    pub fn minimum(&self) -> Option<f64> {
        let n = self.cost.len();
        let m = self.rows.len();
        // Normalise to non-negative right-hand sides.
        let rows: Vec<(Vec<f64>, Cmp, f64)> = self
            .rows
            .iter()
            .map(|(a, cmp, b)| {
                // Rows `a.x >= 0` become `-a.x <= 0` and need no artificial.
                if *b < 0.0 || (*b == 0.0 && *cmp == Cmp::Ge) {
                    let flipped = if *cmp == Cmp::Le { Cmp::Ge } else { Cmp::Le };
                    (a.iter().map(|x| -x).collect(), flipped, -b)
                } else {
                    (a.clone(), *cmp, *b)
                }
            })
            .collect();
        let n_art = rows.iter().filter(|r| r.1 == Cmp::Ge).count();
        let width = n + m + n_art;
        let mut t = vec![vec![0.0; width + 1]; m];
        let mut basis = vec![0usize; m];
        let mut art = n + m;
        for (i, (a, cmp, b)) in rows.iter().enumerate() {
            t[i][..n].copy_from_slice(a);
            t[i][width] = *b;
            match cmp {
                Cmp::Le => {
                    t[i][n + i] = 1.0;
                    basis[i] = n + i;
                }
                Cmp::Ge => {
                    t[i][n + i] = -1.0;
                    t[i][art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
            }
        }
        let is_art = |j: usize| j >= n + m;

        // Phase 1: minimise the sum of artificials.
        let mut phase1 = vec![0.0; width];
        for j in n + m..width {
            phase1[j] = 1.0;
        }
        let value = Self::run(&mut t, &mut basis, &phase1, width, |_| true)?;
        if value > 1e-9 {
            return None;
        }
        // Drive zero-level artificials out of the basis.
        for i in 0..m {
            if is_art(basis[i]) {
                if let Some(j) = (0..n + m).find(|&j| t[i][j].abs() > PIVOT_EPS) {
                    Self::pivot(&mut t, &mut basis, i, j, width);
                }
            }
        }
        let mut cost = vec![0.0; width];
        cost[..n].copy_from_slice(&self.cost);
        Self::run(&mut t, &mut basis, &cost, width, |j| !is_art(j))
    }

    fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], r: usize, c: usize, width: usize) {
        let p = t[r][c];
        for v in t[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = t[r].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != r && row[c] != 0.0 {
                let f = row[c];
                for j in 0..=width {
                    row[j] -= f * pivot_row[j];
                }
            }
        }
        basis[r] = c;
    }

    fn run(
        t: &mut [Vec<f64>],
        basis: &mut [usize],
        cost: &[f64],
        width: usize,
        allowed: impl Fn(usize) -> bool,
    ) -> Option<f64> {
        loop {
            // Reduced costs from scratch keep the arithmetic simple.
            let reduced: Vec<f64> = (0..width)
                .map(|j| cost[j] - t.iter().zip(basis.iter()).map(|(row, &b)| cost[b] * row[j]).sum::<f64>())
                .collect();
            let Some(enter) = (0..width).find(|&j| allowed(j) && reduced[j] < -EPS) else {
                return Some(t.iter().zip(basis.iter()).map(|(row, &b)| cost[b] * row[width]).sum());
            };
            let mut leave: Option<usize> = None;
            for i in 0..t.len() {
                if t[i][enter] > PIVOT_EPS {
                    let ratio = t[i][width] / t[i][enter];
                    leave = match leave {
                        None => Some(i),
                        Some(l) => {
                            let best = t[l][width] / t[l][enter];
                            if ratio < best - EPS || ((ratio - best).abs() <= EPS && basis[i] < basis[l]) {
                                Some(i)
                            } else {
                                Some(l)
                            }
                        }
                    };
                }
            }
            Self::pivot(t, basis, leave?, enter, width);
        }
    }
}

/// Dip by direct minimisation.
///
/// A unimodal CDF is convex up to its mode and concave after it, and may
/// jump at the mode itself. For every candidate mode among the distinct
/// sample values `u_i`, solve the linear program
///
///   min t  s.t.  |G(u_i-) - F(u_i-)| <= t,  |G(u_i) - F(u_i)| <= t,
///                G nondecreasing, convex left of the mode, concave right,
///
/// over the values of G at the `u_i` (with a separate left limit at the
/// mode). Placing the mode at a sample point loses nothing: a chord across
/// the modal gap always satisfies one of the two curvature conditions.
/// The result is floored at `1/(2n)`, the statistic's minimum.
pub fn brute_force_dip(sample: &[f64]) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut u: Vec<f64> = Vec::new();
    let mut f_plus: Vec<f64> = Vec::new();
    for (i, &x) in xs.iter().enumerate() {
        if u.last() == Some(&x) {
            *f_plus.last_mut().unwrap() = (i + 1) as f64 / n;
        } else {
            u.push(x);
            f_plus.push((i + 1) as f64 / n);
        }
    }
    let m = u.len();
    let f_minus: Vec<f64> = (0..m).map(|i| if i == 0 { 0.0 } else { f_plus[i - 1] }).collect();
    let floor = 1.0 / (2.0 * n);
    if m == 1 {
        return floor;
    }

    // Variables: G(u_0..u_{m-1}), G(u_mode-), t.
    let (left_limit, t) = (m, m + 1);
    let row = |entries: &[(usize, f64)]| {
        let mut v = vec![0.0; m + 2];
        for &(j, c) in entries {
            v[j] += c;
        }
        v
    };
    let mut best = f64::INFINITY;
    for mode in 0..m {
        let mut cost = vec![0.0; m + 2];
        cost[t] = 1.0;
        let mut lp = LinearProgram::new(cost);
        // Value of G just left of u_i; differs from G(u_i) only at the mode.
        let below = |i: usize| if i == mode { left_limit } else { i };
        for i in 0..m {
            lp.add(row(&[(i, 1.0), (t, 1.0)]), Cmp::Ge, f_plus[i]);
            lp.add(row(&[(i, 1.0), (t, -1.0)]), Cmp::Le, f_plus[i]);
            lp.add(row(&[(below(i), 1.0), (t, 1.0)]), Cmp::Ge, f_minus[i]);
            lp.add(row(&[(below(i), 1.0), (t, -1.0)]), Cmp::Le, f_minus[i]);
            lp.add(row(&[(i, 1.0)]), Cmp::Le, 1.0);
        }
        lp.add(row(&[(mode, 1.0), (left_limit, -1.0)]), Cmp::Ge, 0.0);
        for i in 0..m - 1 {
            lp.add(row(&[(below(i + 1), 1.0), (i, -1.0)]), Cmp::Ge, 0.0);
        }
        // Segment i runs from G(u_i) to G(u_{i+1}-) over width h_i. The row is
        // slope_i - slope_{i+1}; consecutive segments share the knot u_{i+1},
        // which is never the mode on the convex side and always a plain
        // value on the concave side.
        let h: Vec<f64> = u.windows(2).map(|w| w[1] - w[0]).collect();
        for i in 0..m.saturating_sub(2) {
            let coeffs = row(&[
                (i, -1.0 / h[i]),
                (below(i + 1), 1.0 / h[i]),
                (i + 1, 1.0 / h[i + 1]),
                (below(i + 2), -1.0 / h[i + 1]),
            ]);
            if i + 2 <= mode {
                lp.add(coeffs, Cmp::Le, 0.0);
            } else if i >= mode {
                lp.add(coeffs, Cmp::Ge, 0.0);
            }
        }
        best = best.min(lp.minimum().expect("dip LP is always feasible"));
    }
    best.max(floor)
}

/// Standard normal upper tail by the continued fraction for large z and the
/// Maclaurin series of erf otherwise, both summed to convergence.
pub fn normal_upper_tail(z: f64) -> f64 {
    if z < 0.0 {
        return 1.0 - normal_upper_tail(-z);
    }
    let x = z / std::f64::consts::SQRT_2;
    if x < 3.0 {
        // erf(x) = 2/sqrt(pi) * sum (-1)^k x^(2k+1) / (k! (2k+1))
        let mut sum = 0.0f64;
        let mut term = x;
        let mut k = 0.0f64;
        loop {
            let add = term / (2.0 * k + 1.0);
            sum += add;
            if add.abs() < 1e-18 {
                break;
            }
            k += 1.0;
            term *= -x * x / k;
        }
        0.5 * (1.0 - 2.0 / std::f64::consts::PI.sqrt() * sum)
    } else {
        // erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + 1/2/(x + 1/(x + 3/2/(x + ...))))
        let mut frac = 0.0f64;
        for k in (1..200).rev() {
            frac = (k as f64 / 2.0) / (x + frac);
        }
        0.5 * (-x * x).exp() / std::f64::consts::PI.sqrt() / (x + frac)
    }
}
