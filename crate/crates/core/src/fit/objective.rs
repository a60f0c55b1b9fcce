//! Sums per-observation derivatives into gradients and Hessians over the
//! optimizer vector.

use super::local::{local, local_with, Local, Order, Rising, RisingTable, ETA, TABLE_MAX_Y, U, ZETA};
use super::model::{CountDataset, Layout};
use super::optim::Eval;
use crate::special::{logistic, softplus};

fn predictors(layout: &Layout, theta: &[f64], x: f64) -> (f64, f64, f64) {
    let eta = theta[0] + theta[1] * x;
    let zeta = layout.zeta.map_or(f64::NEG_INFINITY, |i| theta[i] + theta[i + 1] * x);
    let u = layout.u.map_or(0.0, |i| theta[i]);
    (eta, zeta, u)
}

/// Weighted sums of local derivatives times powers of x, from which the
/// gradient and Hessian over the optimizer vector are assembled.
#[derive(Default)]
struct Moments {
    ll: f64,
    g: [[f64; 2]; 3],
    h: [[[f64; 3]; 3]; 3],
}

impl Moments {
    fn add(&mut self, x: f64, w: f64, loc: &Local, order: Order) {
        self.ll += w * loc.ll;
        if order == Order::Value {
            return;
        }
        let xs = [w, w * x, w * x * x];
        for a in 0..3 {
            self.g[a][0] += xs[0] * loc.g[a];
            self.g[a][1] += xs[1] * loc.g[a];
            if order == Order::Hessian {
                for b in a..3 {
                    for k in 0..3 {
                        self.h[a][b][k] += xs[k] * loc.h[a][b];
                    }
                }
            }
        }
    }

    fn into_eval(self, layout: &Layout, order: Order) -> Eval {
        let p = layout.dim();
        let mut ev = empty(p);
        ev.ll = self.ll;
        if order == Order::Value {
            return ev;
        }
        // (slot, power of x) for each optimizer coordinate
        let mut coords = vec![(ETA, 0), (ETA, 1)];
        if layout.zeta.is_some() {
            coords.extend([(ZETA, 0), (ZETA, 1)]);
        }
        if layout.u.is_some() {
            coords.push((U, 0));
        }
        for (i, &(a, ka)) in coords.iter().enumerate() {
            ev.grad[i] = self.g[a][ka];
            if order == Order::Hessian {
                for (j, &(b, kb)) in coords.iter().enumerate() {
                    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                    ev.hess[i * p + j] = self.h[lo][hi][ka + kb];
                }
            }
        }
        ev
    }
}

fn empty(p: usize) -> Eval {
    Eval {
        ll: 0.0,
        grad: vec![0.0; p],
        hess: vec![0.0; p * p],
    }
}

/// ν-only terms for every observed count, or `None` when the family has no
/// dispersion.
fn rising_table(layout: &Layout, data: &CountDataset, theta: &[f64], order: Order) -> Option<RisingTable> {
    let u = layout.u?;
    let max_y = data.y().iter().copied().max().unwrap_or(0);
    (max_y <= TABLE_MAX_Y).then(|| RisingTable::new(theta[u].exp(), max_y, order))
}

fn rising_for(table: &Option<RisingTable>, layout: &Layout, theta: &[f64], y: u64, order: Order) -> Rising {
    match (table, layout.u) {
        (Some(t), _) => t.get(y),
        (None, Some(u)) => Rising::direct(theta[u].exp(), y, order),
        (None, None) => Rising::default(),
    }
}

/// Full log-likelihood of `layout.family` with optional per-observation
/// weights.
pub(crate) fn evaluate(
    layout: &Layout,
    data: &CountDataset,
    theta: &[f64],
    weights: Option<&[f64]>,
    order: Order,
) -> Eval {
    let (y, x, lf) = (data.y(), data.x(), data.ln_fact());
    let table = rising_table(layout, data, theta, order);
    let mut m = Moments::default();
    for i in 0..data.n() {
        let w = weights.map_or(1.0, |w| w[i]);
        if w == 0.0 {
            continue;
        }
        let (eta, zeta, u) = predictors(layout, theta, x[i]);
        let rising = rising_for(&table, layout, theta, y[i], order);
        let loc = local_with(layout.family, y[i], lf[i], eta, zeta, u, rising, order);
        m.add(x[i], w, &loc, order);
    }
    m.into_eval(layout, order)
}

/// Logistic log-likelihood with soft labels `tau` for `(gamma0, gamma_x)`.
pub(crate) fn zero_part(data: &CountDataset, gamma: &[f64], tau: &[f64]) -> Eval {
    let mut ev = empty(2);
    for (i, &x) in data.x().iter().enumerate() {
        let zeta = gamma[0] + gamma[1] * x;
        let omega = logistic(zeta);
        ev.ll += tau[i] * zeta - softplus(zeta);
        let g = tau[i] - omega;
        let h = -omega * (1.0 - omega);
        ev.grad[0] += g;
        ev.grad[1] += g * x;
        ev.hess[0] += h;
        ev.hess[1] += h * x;
        ev.hess[3] += h * x * x;
    }
    ev.hess[2] = ev.hess[1];
    ev
}

/// Log-probability of each observation.
pub(crate) fn pointwise(layout: &Layout, data: &CountDataset, theta: &[f64]) -> Vec<f64> {
    let (y, x, lf) = (data.y(), data.x(), data.ln_fact());
    (0..data.n())
        .map(|i| {
            let (eta, zeta, u) = predictors(layout, theta, x[i]);
            local(layout.family, y[i], lf[i], eta, zeta, u, Order::Value).ll
        })
        .collect()
}

/// Posterior probability that each observation is a structural zero.
pub(crate) fn structural_posterior(layout: &Layout, data: &CountDataset, theta: &[f64]) -> Vec<f64> {
    let (y, x, lf) = (data.y(), data.x(), data.ln_fact());
    (0..data.n())
        .map(|i| {
            if y[i] > 0 {
                return 0.0;
            }
            let (eta, zeta, u) = predictors(layout, theta, x[i]);
            let lp = local(layout.family, 0, lf[i], eta, zeta, u, Order::Value).ll;
            (-softplus(-zeta) - lp).exp().min(1.0)
        })
        .collect()
}
