//! Scenario hyperparameter tables.
//!
//! Three fixed grids over the admissibility machinery:
//! - `gamma`: discardable `r` against the violation level at `m = 2500`,
//!   `kappa = 0.001`;
//! - `m`: discardable `r` against the batch size at `gamma = 0.01`,
//!   `kappa = 0.001`;
//! - `kappa`: the zero-discard confidence `(1-gamma)^m` against the batch
//!   size at `gamma = 0.01`.

use safebo_core::runlog::fmt_g;
use safebo_core::scenario::{binomial_tail, max_admissible_r};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    GammaGrid,
    MGrid,
    KappaGrid,
}

impl TableKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gamma" | "r-vs-gamma" => Some(TableKind::GammaGrid),
            "m" | "r-vs-m" => Some(TableKind::MGrid),
            "kappa" | "kappa-vs-m" | "r0-kappa" => Some(TableKind::KappaGrid),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TableKind::GammaGrid => "gamma",
            TableKind::MGrid => "m",
            TableKind::KappaGrid => "kappa",
        }
    }
}

/// Renders one table as CSV text (header comment + column line + rows).
pub fn render(kind: TableKind, seed: u64) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "# artifact = safebo {}\n# table = {}\n# seed = {}\n",
        env!("CARGO_PKG_VERSION"),
        kind.name(),
        seed
    ));
    match kind {
        TableKind::GammaGrid => {
            out.push_str("# m = 2500, kappa = 0.001\ngamma,r\n");
            for i in 1..=99 {
                let gamma = i as f64 / 1000.0;
                let r = max_admissible_r(2500, gamma, 0.001);
                out.push_str(&format!("{},{r}\n", fmt_g(gamma, 12)));
            }
        }
        TableKind::MGrid => {
            out.push_str("# gamma = 0.01, kappa = 0.001\nm,r\n");
            for m in (500..=7000).step_by(500) {
                let r = max_admissible_r(m, 0.01, 0.001);
                out.push_str(&format!("{m},{r}\n"));
            }
        }
        TableKind::KappaGrid => {
            out.push_str("# r = 0, gamma = 0.01\nm,kappa\n");
            for m in (500..=7000).step_by(500) {
                let kappa = binomial_tail(m, 0, 0.01);
                out.push_str(&format!("{m},{}\n", fmt_g(kappa, 12)));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m_grid_matches_published_points() {
        let table = render(TableKind::MGrid, 0);
        for line in ["500,0", "1000,1", "1500,4", "2000,7", "2500,10", "3000,14"] {
            assert!(table.contains(&format!("\n{line}\n")), "missing row {line}");
        }
    }

    #[test]
    fn gamma_grid_spot_rows() {
        let table = render(TableKind::GammaGrid, 0);
        for line in ["0.001,0", "0.004,1", "0.01,10", "0.05,92", "0.099,202"] {
            assert!(table.contains(&format!("\n{line}\n")), "missing row {line}");
        }
    }

    #[test]
    fn kappa_grid_spot_rows() {
        let table = render(TableKind::KappaGrid, 0);
        assert!(table.contains("\n500,0.00657048304241\n"));
        assert!(table.contains("\n1000,4.31712474107e-05\n"));
    }
}
