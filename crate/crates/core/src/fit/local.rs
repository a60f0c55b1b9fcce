//! Per-observation log-likelihood derivatives in linear-predictor
//! coordinates: `eta` (log count mean), `zeta` (logit structural-zero
//! probability) and `u = ln nu`. Slot order in the arrays is
//! `[eta, zeta, u]`; slots a family does not use stay zero.

use crate::dist::FamilyKind;
use crate::special::{digamma_rising, ln_rising, log_add_exp, logistic, softplus, trigamma_rising};

pub(crate) const ETA: usize = 0;
pub(crate) const ZETA: usize = 1;
pub(crate) const U: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum Order {
    Value,
    Gradient,
    Hessian,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Local {
    pub ll: f64,
    pub g: [f64; 3],
    pub h: [[f64; 3]; 3],
}

/// `ln Γ(ν+y) − ln Γ(ν)` and its first two derivatives in ν.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Rising {
    pub ln: f64,
    pub digamma: f64,
    pub trigamma: f64,
}

impl Rising {
    pub fn direct(nu: f64, y: u64, order: Order) -> Self {
        Rising {
            ln: ln_rising(nu, y),
            digamma: if order >= Order::Gradient { digamma_rising(nu, y) } else { 0.0 },
            trigamma: if order == Order::Hessian { trigamma_rising(nu, y) } else { 0.0 },
        }
    }
}

/// Largest count for which [`RisingTable`] is built.
pub(crate) const TABLE_MAX_Y: u64 = 1 << 16;

/// [`Rising`] for every `y` up to a maximum at one fixed ν, by running sums.
pub(crate) struct RisingTable {
    rows: Vec<Rising>,
}

impl RisingTable {
    pub fn new(nu: f64, max_y: u64, order: Order) -> Self {
        let mut rows = Vec::with_capacity(max_y as usize + 1);
        let mut acc = Rising::default();
        rows.push(acc);
        for j in 0..max_y {
            let t = nu + j as f64;
            acc.ln += t.ln();
            if order >= Order::Gradient {
                acc.digamma += 1.0 / t;
            }
            if order == Order::Hessian {
                acc.trigamma -= 1.0 / (t * t);
            }
            rows.push(acc);
        }
        Self { rows }
    }

    pub fn get(&self, y: u64) -> Rising {
        self.rows[y as usize]
    }
}

/// Base count model: log-PMF and derivatives, plus the log-probability of
/// zero `s` with its derivatives (needed by the zero-inflated mixture).
#[derive(Debug, Clone, Copy, Default)]
struct Base {
    ll: f64,
    g_eta: f64,
    g_u: f64,
    h_eta_eta: f64,
    h_eta_u: f64,
    h_u_u: f64,
}

fn poisson_base(y: u64, ln_fact: f64, eta: f64) -> Base {
    let lambda = eta.exp();
    let yf = y as f64;
    Base {
        ll: yf * eta - lambda - ln_fact,
        g_eta: yf - lambda,
        h_eta_eta: -lambda,
        ..Base::default()
    }
}

fn negbin_base(y: u64, ln_fact: f64, eta: f64, u: f64, rising: Rising, order: Order) -> Base {
    let lambda = eta.exp();
    let nu = u.exp();
    let yf = y as f64;
    let r = (lambda / nu).ln_1p();
    let ll = rising.ln - ln_fact - nu * r + yf * (eta - u - r);
    if order == Order::Value {
        return Base {
            ll,
            ..Base::default()
        };
    }
    let w = nu + lambda;
    let g_eta = nu * (yf - lambda) / w;
    let g_u = nu * (rising.digamma - r + (lambda - yf) / w);
    if order == Order::Gradient {
        return Base {
            ll,
            g_eta,
            g_u,
            ..Base::default()
        };
    }
    let w2 = w * w;
    Base {
        ll,
        g_eta,
        g_u,
        h_eta_eta: -nu * lambda * (nu + yf) / w2,
        h_eta_u: nu * lambda * (yf - lambda) / w2,
        h_u_u: g_u
            + nu * nu * (rising.trigamma + lambda / (nu * w) - (lambda - yf) / w2),
    }
}

/// Log-probability of zero under the base model and its derivatives.
struct ZeroBase {
    s: f64,
    s_eta: f64,
    s_u: f64,
    s_eta_eta: f64,
    s_eta_u: f64,
    s_u_u: f64,
}

fn zero_base(family: FamilyKind, eta: f64, u: f64) -> ZeroBase {
    let lambda = eta.exp();
    if family.has_dispersion() {
        let nu = u.exp();
        let w = nu + lambda;
        let r = (lambda / nu).ln_1p();
        let lw = lambda / w;
        ZeroBase {
            s: -nu * r,
            s_eta: -nu * lw,
            s_u: nu * (lw - r),
            s_eta_eta: -nu * nu * lambda / (w * w),
            s_eta_u: -nu * lw * lw,
            s_u_u: nu * (lw - r + lw * lw),
        }
    } else {
        ZeroBase {
            s: -lambda,
            s_eta: -lambda,
            s_u: 0.0,
            s_eta_eta: -lambda,
            s_eta_u: 0.0,
            s_u_u: 0.0,
        }
    }
}

fn base(family: FamilyKind, y: u64, ln_fact: f64, eta: f64, u: f64, rising: Rising, order: Order) -> Base {
    if family.has_dispersion() {
        negbin_base(y, ln_fact, eta, u, rising, order)
    } else {
        poisson_base(y, ln_fact, eta)
    }
}

/// Derivatives of one observation's log-likelihood up to `order`.
pub(crate) fn local(
    family: FamilyKind,
    y: u64,
    ln_fact: f64,
    eta: f64,
    zeta: f64,
    u: f64,
    order: Order,
) -> Local {
    let rising = if family.has_dispersion() {
        Rising::direct(u.exp(), y, order)
    } else {
        Rising::default()
    };
    local_with(family, y, ln_fact, eta, zeta, u, rising, order)
}

/// [`local`] with the ν-only terms supplied by the caller.
#[allow(clippy::too_many_arguments)]
pub(crate) fn local_with(
    family: FamilyKind,
    y: u64,
    ln_fact: f64,
    eta: f64,
    zeta: f64,
    u: f64,
    rising: Rising,
    order: Order,
) -> Local {
    let mut out = Local::default();
    if !family.is_zero_inflated() || y > 0 {
        let b = base(family, y, ln_fact, eta, u, rising, order);
        out.ll = b.ll;
        out.g[ETA] = b.g_eta;
        out.g[U] = b.g_u;
        out.h[ETA][ETA] = b.h_eta_eta;
        out.h[ETA][U] = b.h_eta_u;
        out.h[U][ETA] = b.h_eta_u;
        out.h[U][U] = b.h_u_u;
        if family.is_zero_inflated() {
            // y > 0: only ln(1 - omega) involves zeta
            let omega = logistic(zeta);
            out.ll -= softplus(zeta);
            out.g[ZETA] = -omega;
            out.h[ZETA][ZETA] = -omega * (1.0 - omega);
        }
        return out;
    }

    // Structural-zero mixture at y = 0.
    let zb = zero_base(family, eta, u);
    let ln_omega = -softplus(-zeta);
    let ln_keep = -softplus(zeta);
    let lp = log_add_exp(ln_omega, ln_keep + zb.s);
    out.ll = lp;
    if order == Order::Value {
        return out;
    }
    let omega = logistic(zeta);
    let tau = (ln_omega - lp).exp();
    let q = (ln_keep + zb.s - lp).exp();
    let s_d = [zb.s_eta, 0.0, zb.s_u];
    out.g[ZETA] = tau - omega;
    out.g[ETA] = q * zb.s_eta;
    out.g[U] = q * zb.s_u;
    if order == Order::Gradient {
        return out;
    }
    let s_dd = [
        [zb.s_eta_eta, 0.0, zb.s_eta_u],
        [0.0, 0.0, 0.0],
        [zb.s_eta_u, 0.0, zb.s_u_u],
    ];
    let d = tau - omega;
    out.h[ZETA][ZETA] = (1.0 - 2.0 * omega) * d - d * d;
    for a in [ETA, U] {
        let v = -tau * q * s_d[a];
        out.h[ZETA][a] = v;
        out.h[a][ZETA] = v;
        for b in [ETA, U] {
            out.h[a][b] = q * s_dd[a][b] + q * tau * s_d[a] * s_d[b];
        }
    }
    out
}
