//! Closed-form attack payoffs under the transaction-volume constraint.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{Amount, Ratio};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyticError {
    #[error("precondition violated: {0}")]
    PreconditionViolated(&'static str),
}

/// Signed token amount with millionth-of-a-token resolution, so `k * R` is exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Payoff {
    pub micro: i128,
}

impl Payoff {
    pub fn tokens(self) -> f64 {
        self.micro as f64 / Ratio::SCALE as f64
    }

    pub fn is_negative(self) -> bool {
        self.micro < 0
    }

    fn gain_minus_burn(gain: Amount, k: Ratio, reward: Amount) -> Self {
        Payoff { micro: gain.0 as i128 * Ratio::SCALE as i128 - k.ppm() as i128 * reward.0 as i128 }
    }
}

/// Upper bound on the gain from reverting a transaction of value `v_tx` by mining a block
/// for a self-made problem worth `r_attacker`: `v_tx - k * r_attacker`.
///
/// Requires `v_tx <= volume < k * r_problem` (the victim block was valid) and
/// `r_attacker >= r_problem` (the attacker block must outweigh the victim block).
pub fn analytic_double_spend_payoff(
    v_tx: Amount,
    volume: Amount,
    r_problem: Amount,
    r_attacker: Amount,
    k: Ratio,
) -> Result<Payoff, AnalyticError> {
    if v_tx > volume {
        return Err(AnalyticError::PreconditionViolated("v_tx exceeds the block volume"));
    }
    if !k.strictly_exceeds(volume, r_problem) {
        return Err(AnalyticError::PreconditionViolated("victim block violates the volume constraint"));
    }
    if r_attacker < r_problem {
        return Err(AnalyticError::PreconditionViolated("attacker reward cannot outweigh the victim block"));
    }
    Ok(Payoff::gain_minus_burn(v_tx, k, r_attacker))
}

/// Payoff from collecting fees `fees` in a block for a self-made problem: `fees - k * r_attacker`.
///
/// Requires `fees <= volume < k * r_attacker` (fees never exceed amounts; the block is valid).
pub fn analytic_fee_grab_payoff(fees: Amount, volume: Amount, r_attacker: Amount, k: Ratio) -> Result<Payoff, AnalyticError> {
    if fees > volume {
        return Err(AnalyticError::PreconditionViolated("fees exceed the block volume"));
    }
    if !k.strictly_exceeds(volume, r_attacker) {
        return Err(AnalyticError::PreconditionViolated("attacker block violates the volume constraint"));
    }
    Ok(Payoff::gain_minus_burn(fees, k, r_attacker))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        let k = Ratio::from_f64(0.05);
        let p = analytic_double_spend_payoff(Amount(4), Amount(4), Amount(100), Amount(100), k).unwrap();
        assert_eq!(p.micro, -1_000_000);
        let f = analytic_fee_grab_payoff(Amount(4), Amount(4), Amount(100), k).unwrap();
        assert_eq!(f.tokens(), -1.0);
        let zero = analytic_fee_grab_payoff(Amount(0), Amount(0), Amount(100), k).unwrap();
        assert_eq!(zero.tokens(), -5.0);
    }

    #[test]
    fn preconditions_rejected() {
        let k = Ratio::from_f64(0.05);
        assert!(analytic_double_spend_payoff(Amount(5), Amount(4), Amount(100), Amount(100), k).is_err());
        assert!(analytic_double_spend_payoff(Amount(5), Amount(5), Amount(100), Amount(100), k).is_err());
        assert!(analytic_double_spend_payoff(Amount(4), Amount(4), Amount(100), Amount(99), k).is_err());
        assert!(analytic_fee_grab_payoff(Amount(5), Amount(5), Amount(100), k).is_err());
    }

    #[test]
    fn boundary_stays_negative() {
        // v = V just under k * R with R_attacker = R.
        let k = Ratio::from_ppm(50_001);
        let p = analytic_double_spend_payoff(Amount(5), Amount(5), Amount(100), Amount(100), k).unwrap();
        assert_eq!(p.micro, -100);
    }
}
