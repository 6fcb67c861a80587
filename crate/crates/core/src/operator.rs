//! Stencil entries of the linear part of the semi-discrete system.
//!
//! Both the time stepper (node-interleaved banded layout) and the generator
//! (field-blocked dense layout) are assembled from the same entry list, so the
//! two can only disagree through their index maps.

use crate::grid::Grid;
use crate::model::Coefficients;

/// Unknown fields in stacking order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    Phi,
    U,
    Psi,
    V,
    Theta,
    Z,
}

impl Var {
    pub const ALL: [Var; 6] = [Var::Phi, Var::U, Var::Psi, Var::V, Var::Theta, Var::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_dirichlet(self) -> bool {
        matches!(self, Var::Phi | Var::U | Var::Psi | Var::V)
    }

    pub fn name(self) -> &'static str {
        match self {
            Var::Phi => "phi",
            Var::U => "u",
            Var::Psi => "psi",
            Var::V => "v",
            Var::Theta => "theta",
            Var::Z => "z",
        }
    }
}

/// `d/dt row += val · col`, where rows and columns are `(field, node)` pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Entry {
    pub row: (Var, usize),
    pub col: (Var, usize),
    pub val: f64,
}

/// Entries of the linear right-hand side with linear friction slope `alpha`
/// (0 when friction is treated separately). Dirichlet boundary nodes carry no
/// rows and no columns.
pub(crate) fn linear_entries(grid: &Grid, c: &Coefficients, alpha: f64) -> Vec<Entry> {
    let n = grid.n();
    let h = grid.dx();
    let h2 = h * h;
    let mut out = Vec::new();
    let mut push = |row: (Var, usize), col: (Var, usize), val: f64| {
        if col.0.is_dirichlet() && (col.1 == 0 || col.1 == n) {
            return;
        }
        if val != 0.0 {
            out.push(Entry { row, col, val });
        }
    };

    for j in 1..n {
        push((Var::Phi, j), (Var::U, j), 1.0);

        let r = (Var::U, j);
        push(r, (Var::Phi, j - 1), c.k1 / (c.rho1 * h2));
        push(r, (Var::Phi, j), -2.0 * c.k1 / (c.rho1 * h2));
        push(r, (Var::Phi, j + 1), c.k1 / (c.rho1 * h2));
        push(r, (Var::Psi, j + 1), c.k1 / (2.0 * h * c.rho1));
        push(r, (Var::Psi, j - 1), -c.k1 / (2.0 * h * c.rho1));
        push(r, (Var::U, j), -c.mu / c.rho1);

        push((Var::Psi, j), (Var::V, j), 1.0);

        let r = (Var::V, j);
        push(r, (Var::Psi, j - 1), c.k2 / (c.rho2 * h2));
        push(
            r,
            (Var::Psi, j),
            -2.0 * c.k2 / (c.rho2 * h2) - c.k1 / c.rho2,
        );
        push(r, (Var::Psi, j + 1), c.k2 / (c.rho2 * h2));
        push(r, (Var::Phi, j + 1), -c.k1 / (2.0 * h * c.rho2));
        push(r, (Var::Phi, j - 1), c.k1 / (2.0 * h * c.rho2));
        push(r, (Var::V, j), -alpha / c.rho2);
        push(r, (Var::Z, j + 1), -c.gamma / (2.0 * h * c.rho2));
        push(r, (Var::Z, j - 1), c.gamma / (2.0 * h * c.rho2));
    }

    for j in 0..=n {
        push((Var::Theta, j), (Var::Z, j), 1.0);

        let r = (Var::Z, j);
        // −γ·ddx_conservative(v)
        let g = c.gamma / c.rho3;
        if j == 0 {
            push(r, (Var::V, 1), -g / h);
        } else if j == n {
            push(r, (Var::V, n - 1), g / h);
        } else {
            push(r, (Var::V, j + 1), -g / (2.0 * h));
            push(r, (Var::V, j - 1), g / (2.0 * h));
        }
        for (var, k) in [(Var::Theta, c.delta / c.rho3), (Var::Z, c.beta / c.rho3)] {
            let s = k / h2;
            if j == 0 {
                push(r, (var, 0), -2.0 * s);
                push(r, (var, 1), 2.0 * s);
            } else if j == n {
                push(r, (var, n), -2.0 * s);
                push(r, (var, n - 1), 2.0 * s);
            } else {
                push(r, (var, j - 1), s);
                push(r, (var, j), -2.0 * s);
                push(r, (var, j + 1), s);
            }
        }
    }
    out
}
