//! Log-domain arithmetic, compensated summation, and quadrature helpers.
//!
//! The solver manipulates products of hundreds of rates and polynomial
//! factors whose magnitudes overflow `f64` well before N = 100, so every
//! long product in the library is carried as a sign plus log-magnitude.

/// A real number stored as `sign * exp(ln_abs)`.
///
/// `sign == 0` encodes exact zero (with `ln_abs = -inf`), so multiplying by
/// zero and adding zero behave as expected.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignedLog {
    pub sign: i8,
    pub ln_abs: f64,
}

impl SignedLog {
    pub const ZERO: SignedLog = SignedLog {
        sign: 0,
        ln_abs: f64::NEG_INFINITY,
    };

    pub const ONE: SignedLog = SignedLog {
        sign: 1,
        ln_abs: 0.0,
    };

    pub fn new(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            SignedLog {
                sign: if x > 0.0 { 1 } else { -1 },
                ln_abs: x.abs().ln(),
            }
        }
    }

    /// Builds `sign * exp(ln_abs)` directly (used for products already
    /// accumulated in log space).
    pub fn from_parts(sign: i8, ln_abs: f64) -> Self {
        if sign == 0 || ln_abs == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            SignedLog { sign, ln_abs }
        }
    }

    /// Collapses back to a plain f64; test-only because production code
    /// must stay in log space until the final normalized division.
    #[cfg(test)]
    pub fn value(self) -> f64 {
        f64::from(self.sign) * self.ln_abs.exp()
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    pub fn mul(self, other: SignedLog) -> SignedLog {
        if self.is_zero() || other.is_zero() {
            Self::ZERO
        } else {
            SignedLog {
                sign: self.sign * other.sign,
                ln_abs: self.ln_abs + other.ln_abs,
            }
        }
    }

    pub fn neg(self) -> SignedLog {
        SignedLog {
            sign: -self.sign,
            ln_abs: self.ln_abs,
        }
    }

    /// Signed addition in log space. Equal magnitudes of opposite sign
    /// cancel to exact zero; otherwise the result keeps the sign of the
    /// larger magnitude and uses `ln_1p` to stay accurate near cancellation.
    pub fn add(self, other: SignedLog) -> SignedLog {
        if self.is_zero() {
            return other;
        }
        if other.is_zero() {
            return self;
        }
        let (hi, lo) = if self.ln_abs >= other.ln_abs {
            (self, other)
        } else {
            (other, self)
        };
        let d = lo.ln_abs - hi.ln_abs; // <= 0
        if hi.sign == lo.sign {
            SignedLog {
                sign: hi.sign,
                ln_abs: hi.ln_abs + d.exp().ln_1p(),
            }
        } else if d == 0.0 {
            Self::ZERO
        } else {
            // ln(1 - e^d) for d < 0; exact cancellation handled above.
            let diff = (-d.exp()).ln_1p();
            SignedLog::from_parts(hi.sign, hi.ln_abs + diff)
        }
    }
}

/// Kahan–Neumaier compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// log(exp(a) + exp(b)) without overflow; tolerates -inf arguments.
pub fn logaddexp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// log(sum_i exp(x_i)) with the max factored out; tolerates -inf entries.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut acc = KahanSum::default();
    for &x in xs {
        acc.add((x - max).exp());
    }
    max + acc.value().ln()
}

/// Adaptive Simpson quadrature with a hard recursion cap. The tolerance is
/// an absolute error target, distributed over subintervals as usual.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let err = left + right - whole;
        if depth == 0 || err.abs() <= 15.0 * tol {
            left + right + err / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }

    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, b - a);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}
