//! Fourth-order splitting integrator.
//!
//! A problem supplies two flows: `linear` (exact in frequency space, advances
//! the clock) and `local` (evaluated with the clock frozen). Composing three
//! symmetric Strang steps with Yoshida's weights gives a fourth-order method
//! for non-autonomous problems.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

pub trait SplitProblem {
    /// Exact flow of the linear part over duration h.
    fn linear(&self, f: &mut Vec<C64>, h: f64);
    /// Flow of the remaining part over duration h with the clock frozen at t.
    fn local(&self, f: &mut Vec<C64>, t: f64, h: f64) -> Result<()>;
}

fn weights() -> ([f64; 4], [f64; 3]) {
    let cbrt2 = 2f64.powf(1.0 / 3.0);
    let w1 = 1.0 / (2.0 - cbrt2);
    let w0 = -cbrt2 / (2.0 - cbrt2);
    ([w1 / 2.0, (w0 + w1) / 2.0, (w0 + w1) / 2.0, w1 / 2.0], [w1, w0, w1])
}

/// One composed step from t to t + h (h may be negative).
pub fn step<P: SplitProblem + ?Sized>(p: &P, f: &mut Vec<C64>, t: f64, h: f64) -> Result<()> {
    let (c, d) = weights();
    let mut clock = t;
    for k in 0..3 {
        p.linear(f, c[k] * h);
        clock += c[k] * h;
        p.local(f, clock, d[k] * h)?;
    }
    p.linear(f, c[3] * h);
    Ok(())
}

/// Sixth-order triple-jump composition of `step`.
pub fn step6<P: SplitProblem + ?Sized>(p: &P, f: &mut Vec<C64>, t: f64, h: f64) -> Result<()> {
    let r = 2f64.powf(0.2);
    let z1 = 1.0 / (2.0 - r);
    let z0 = -r / (2.0 - r);
    step(p, f, t, z1 * h)?;
    step(p, f, t + z1 * h, z0 * h)?;
    step(p, f, t + (z1 + z0) * h, z1 * h)
}

/// One Strang step, second order, used for step-error estimates.
pub fn strang_step<P: SplitProblem + ?Sized>(p: &P, f: &mut Vec<C64>, t: f64, h: f64) -> Result<()> {
    p.linear(f, 0.5 * h);
    p.local(f, t + 0.5 * h, h)?;
    p.linear(f, 0.5 * h);
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    Four,
    Six,
}

/// Integrate from t0 to t1 in `n` equal steps; halts on non-finite values.
pub fn integrate<P: SplitProblem + ?Sized>(
    p: &P,
    f: &mut Vec<C64>,
    t0: f64,
    t1: f64,
    n: usize,
    order: Order,
) -> Result<()> {
    let n = n.max(1);
    let h = (t1 - t0) / n as f64;
    for k in 0..n {
        let t = t0 + k as f64 * h;
        let mut g = f.clone();
        match order {
            Order::Four => step(p, &mut g, t, h)?,
            Order::Six => step6(p, &mut g, t, h)?,
        }
        if g.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite { what: "split-step state", time: t + h });
        }
        *f = g;
    }
    Ok(())
}

/// Classical RK4 for f' = rhs(f) over duration h, used inside `local` flows.
pub fn rk4(f: &mut [C64], h: f64, rhs: &dyn Fn(&[C64]) -> Result<Vec<C64>>) -> Result<()> {
    let n = f.len();
    let k1 = rhs(f)?;
    let tmp: Vec<C64> = (0..n).map(|i| f[i] + 0.5 * h * k1[i]).collect();
    let k2 = rhs(&tmp)?;
    let tmp: Vec<C64> = (0..n).map(|i| f[i] + 0.5 * h * k2[i]).collect();
    let k3 = rhs(&tmp)?;
    let tmp: Vec<C64> = (0..n).map(|i| f[i] + h * k3[i]).collect();
    let k4 = rhs(&tmp)?;
    for i in 0..n {
        f[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    // f' = i a f + i b(t) f, both parts commuting: exact solution known.
    struct Phase;
    impl SplitProblem for Phase {
        fn linear(&self, f: &mut Vec<C64>, h: f64) {
            for v in f.iter_mut() {
                *v *= C64::from_polar(1.0, 2.0 * h);
            }
        }
        fn local(&self, f: &mut Vec<C64>, t: f64, h: f64) -> Result<()> {
            for v in f.iter_mut() {
                *v *= C64::from_polar(1.0, t.cos() * h);
            }
            Ok(())
        }
    }

    #[test]
    fn fourth_order_on_time_dependent_phase() {
        let exact = C64::from_polar(1.0, 2.0 + 1f64.sin());
        let err = |n: usize, o: Order| {
            let mut f = vec![C64::new(1.0, 0.0)];
            integrate(&Phase, &mut f, 0.0, 1.0, n, o).unwrap();
            (f[0] - exact).norm()
        };
        let order = (err(10, Order::Four) / err(20, Order::Four)).log2();
        assert!(order > 3.7, "order {order}");
        let order = (err(4, Order::Six) / err(8, Order::Six)).log2();
        assert!(order > 5.5, "order {order}");
    }
}

