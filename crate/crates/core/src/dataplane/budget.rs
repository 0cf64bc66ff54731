use serde::{Deserialize, Serialize};

/// Accounting window for the tamper budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetWindow {
    /// Whole run.
    Cumulative,
    /// Counters reset every this many transited packets.
    Packets(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetConfig {
    /// Maximum tampered fraction D of transited packets.
    pub fraction: f64,
    pub window: BudgetWindow,
}

/// Caps tampering at a fraction D of transited traffic: an action is allowed
/// only while `consumed + 1 ≤ D × transited` within the current window.
#[derive(Clone, Debug, PartialEq)]
pub struct TamperBudget {
    cfg: Option<BudgetConfig>,
    transited: u64,
    consumed: u64,
    total_transited: u64,
    total_consumed: u64,
    refused: u64,
}

impl TamperBudget {
    pub fn unlimited() -> TamperBudget {
        TamperBudget::new(None)
    }

    pub fn new(cfg: Option<BudgetConfig>) -> TamperBudget {
        TamperBudget {
            cfg,
            transited: 0,
            consumed: 0,
            total_transited: 0,
            total_consumed: 0,
            refused: 0,
        }
    }

    pub fn is_limited(&self) -> bool {
        self.cfg.is_some()
    }

    /// Counts one packet passing the switch.
    pub fn observe(&mut self) {
        if let Some(BudgetConfig { window: BudgetWindow::Packets(n), .. }) = self.cfg {
            if n > 0 && self.transited >= n {
                self.transited = 0;
                self.consumed = 0;
            }
        }
        self.transited += 1;
        self.total_transited += 1;
    }

    /// Reserves one tampering action; false means the attack must forward untouched.
    pub fn try_consume(&mut self) -> bool {
        self.try_consume_n(1)
    }

    /// Reserves `n` actions at once (e.g. a drop plus a forged clone), all or nothing.
    pub fn try_consume_n(&mut self, n: u64) -> bool {
        if let Some(cfg) = self.cfg {
            if (self.consumed + n) as f64 > cfg.fraction * self.transited as f64 {
                self.refused += 1;
                return false;
            }
        }
        self.consumed += n;
        self.total_consumed += n;
        true
    }

    pub fn total_transited(&self) -> u64 {
        self.total_transited
    }

    pub fn total_consumed(&self) -> u64 {
        self.total_consumed
    }

    pub fn refused(&self) -> u64 {
        self.refused
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unlimited_always_allows() {
        let mut b = TamperBudget::unlimited();
        assert!(b.try_consume());
        assert_eq!(b.total_consumed(), 1);
    }

    #[test]
    fn fraction_enforced() {
        let mut b = TamperBudget::new(Some(BudgetConfig { fraction: 0.01, window: BudgetWindow::Cumulative }));
        for _ in 0..99 {
            b.observe();
        }
        assert!(!b.try_consume());
        b.observe();
        assert!(b.try_consume());
        assert!(!b.try_consume());
    }

    proptest! {
        #[test]
        fn ceiling_holds(d in 0.0001f64..0.5, ops in prop::collection::vec(any::<bool>(), 1..3000), window in prop::option::of(10u64..500)) {
            let w = window.map(BudgetWindow::Packets).unwrap_or(BudgetWindow::Cumulative);
            let mut b = TamperBudget::new(Some(BudgetConfig { fraction: d, window: w }));
            for want in ops {
                b.observe();
                if want {
                    b.try_consume();
                }
            }
            prop_assert!(b.total_consumed() as f64 <= d * b.total_transited() as f64 + 1e-9);
        }
    }
}
