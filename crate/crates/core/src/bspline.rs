//! B-spline bases on arbitrary breakpoint sequences.
//!
//! Used as the Galerkin basis for the hyperangular problem (in `alpha`) and
//! for the coupled hyperradial problem (in `ln rho`).

/// Largest supported spline order.
pub const MAX_ORDER: usize = 10;

/// Clamped B-spline basis of order `order` (degree `order - 1`).
///
/// The first and/or last function can be dropped to impose a homogeneous
/// Dirichlet condition at that end.
#[derive(Debug, Clone)]
pub struct SplineBasis {
    order: usize,
    knots: Vec<f64>,
    breakpoints: Vec<f64>,
    skip_first: bool,
    skip_last: bool,
}

impl SplineBasis {
    pub fn new(breakpoints: Vec<f64>, order: usize, skip_first: bool, skip_last: bool) -> Self {
        assert!((2..=MAX_ORDER).contains(&order), "spline order must be in 2..={MAX_ORDER}");
        assert!(breakpoints.len() >= 2);
        assert!(
            breakpoints.windows(2).all(|w| w[1] > w[0]),
            "breakpoints must be strictly increasing"
        );
        let mut knots = Vec::with_capacity(breakpoints.len() + 2 * (order - 1));
        knots.extend(std::iter::repeat_n(breakpoints[0], order - 1));
        knots.extend_from_slice(&breakpoints);
        knots.extend(std::iter::repeat_n(*breakpoints.last().unwrap(), order - 1));
        Self {
            order,
            knots,
            breakpoints,
            skip_first,
            skip_last,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    fn n_full(&self) -> usize {
        self.knots.len() - self.order
    }

    /// Number of active basis functions.
    pub fn len(&self) -> usize {
        self.n_full() - self.skip_first as usize - self.skip_last as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lo(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn hi(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    /// Index of the breakpoint interval containing `x` (clamped to the domain).
    pub fn interval(&self, x: f64) -> usize {
        let bp = &self.breakpoints;
        let n_int = bp.len() - 1;
        if x <= bp[0] {
            return 0;
        }
        if x >= bp[n_int] {
            return n_int - 1;
        }
        bp.partition_point(|&b| b <= x) - 1
    }

    /// Values and derivatives (up to `nder`, at most 2) of the non-zero
    /// functions at `x`.
    ///
    /// Returns the active index of the first entry (may be negative when the
    /// first function is skipped) and `order` rows of `[B, B', B'']`.
    pub fn eval(&self, x: f64, nder: usize) -> (isize, Vec<[f64; 3]>) {
        let mut rows = [[0.0; 3]; MAX_ORDER];
        let first = self.eval_into(x, nder, &mut rows);
        (first, rows[..self.order].to_vec())
    }

    /// Allocation-free form of [`eval`](Self::eval); fills the first `order` rows.
    pub fn eval_into(&self, x: f64, nder: usize, out: &mut [[f64; 3]; MAX_ORDER]) -> isize {
        let k = self.order;
        let p = k - 1;
        let span = self.interval(x) + p; // knot span index in the full knot vector
        let t = &self.knots;

        // ndu table, NURBS-book style.
        let mut ndu = [[0.0; MAX_ORDER]; MAX_ORDER];
        let mut left = [0.0; MAX_ORDER];
        let mut right = [0.0; MAX_ORDER];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = x - t[span + 1 - j];
            right[j] = t[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }

        let nder = nder.min(2).min(p);
        for (j, row) in out.iter_mut().take(k).enumerate() {
            *row = [ndu[j][p], 0.0, 0.0];
        }
        let mut a = [[0.0; MAX_ORDER]; 2];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            for kd in 1..=nder {
                let mut d = 0.0;
                let rk = r as isize - kd as isize;
                let pk = p - kd;
                if r >= kd {
                    let rk = rk as usize;
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                    d = a[s2][0] * ndu[rk][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if (r as isize - 1) <= pk as isize { kd - 1 } else { p - r };
                for j in j1..=j2 {
                    let idx = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                    d += a[s2][j] * ndu[idx][pk];
                }
                if r as isize <= pk as isize {
                    a[s2][kd] = -a[s1][kd - 1] / ndu[pk + 1][r];
                    d += a[s2][kd] * ndu[r][pk];
                }
                out[r][kd] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut fac = p as f64;
        for kd in 1..=nder {
            for row in out.iter_mut().take(k) {
                row[kd] *= fac;
            }
            fac *= (p - kd) as f64;
        }

        let first_full = span - p;
        first_full as isize - self.skip_first as isize
    }

    /// Calls `f(active_index, [B, B', B''])` for every non-zero active function at `x`.
    pub fn for_each_active(&self, x: f64, nder: usize, mut f: impl FnMut(usize, [f64; 3])) {
        let mut rows = [[0.0; 3]; MAX_ORDER];
        let first = self.eval_into(x, nder, &mut rows);
        let n = self.len() as isize;
        for (j, &row) in rows.iter().take(self.order).enumerate() {
            let idx = first + j as isize;
            if idx >= 0 && idx < n {
                f(idx as usize, row);
            }
        }
    }

    /// Evaluates `sum_i c_i B_i^{(nder)}(x)`.
    pub fn combine(&self, coeffs: &[f64], x: f64, nder: usize) -> f64 {
        let mut s = 0.0;
        self.for_each_active(x, nder, |i, row| s += coeffs[i] * row[nder]);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis() -> SplineBasis {
        let bp: Vec<f64> = (0..=10).map(|i| (i as f64 / 10.0).powf(1.5)).collect();
        SplineBasis::new(bp, 5, false, false)
    }

    #[test]
    fn partition_of_unity() {
        let b = basis();
        for i in 0..=200 {
            let x = i as f64 / 200.0;
            let mut s = 0.0;
            let mut ds = 0.0;
            b.for_each_active(x, 1, |_, r| {
                s += r[0];
                ds += r[1];
            });
            assert!((s - 1.0).abs() < 1e-13);
            assert!(ds.abs() < 1e-10);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let b = basis();
        let coeffs: Vec<f64> = (0..b.len()).map(|i| ((i * 7 % 5) as f64).sin()).collect();
        for &x in &[0.05, 0.33, 0.61, 0.9] {
            let h = 1e-5;
            let d1 = (b.combine(&coeffs, x + h, 0) - b.combine(&coeffs, x - h, 0)) / (2.0 * h);
            let d2 = (b.combine(&coeffs, x + h, 1) - b.combine(&coeffs, x - h, 1)) / (2.0 * h);
            let a1 = b.combine(&coeffs, x, 1);
            let a2 = b.combine(&coeffs, x, 2);
            assert!((d1 - a1).abs() < 1e-6 * a1.abs().max(1.0), "{d1} vs {a1}");
            assert!((d2 - a2).abs() < 1e-6 * a2.abs().max(1.0), "{d2} vs {a2}");
        }
    }

    #[test]
    fn reproduces_polynomials_of_its_degree() {
        // Marsden identity: Greville abscissae as coefficients reproduce x.
        let b = basis();
        let k = b.order();
        let greville: Vec<f64> = (0..b.len())
            .map(|i| b.knots[i + 1..i + k].iter().sum::<f64>() / (k - 1) as f64)
            .collect();
        for i in 0..=50 {
            let x = i as f64 / 50.0;
            assert!((b.combine(&greville, x, 0) - x).abs() < 1e-13);
        }
    }

    #[test]
    fn skipped_ends_vanish() {
        let bp: Vec<f64> = (0..=6).map(|i| i as f64).collect();
        let b = SplineBasis::new(bp, 4, true, true);
        assert_eq!(b.len(), 6 + 3 - 2);
        let mut s = 0.0;
        b.for_each_active(0.0, 0, |_, r| s += r[0]);
        assert!(s.abs() < 1e-15);
        b.for_each_active(6.0, 0, |_, r| s += r[0]);
        assert!(s.abs() < 1e-15);
    }
}
