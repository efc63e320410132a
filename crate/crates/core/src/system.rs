use alloc::vec::Vec;

use crate::error::{infeasible, invalid, Result};

/// Transceiver dimensions and operating point of one downlink scenario.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SystemConfig {
    pub n_bs: usize,
    pub n_ms: usize,
    pub users: usize,
    pub streams_per_user: usize,
    pub rf_chains_ms: usize,
    pub rf_chains_bs: usize,
    /// Transmit power over noise power, in dB.
    #[cfg_attr(feature = "serde", serde(default))]
    pub snr_db: f64,
    /// Per-user rate weights; empty means all ones.
    #[cfg_attr(feature = "serde", serde(default))]
    pub weights: Vec<f64>,
}

impl SystemConfig {
    /// Hybrid configuration with `rf_chains_bs = users * rf_chains_ms` and
    /// unit weights.
    pub fn hybrid(n_bs: usize, n_ms: usize, users: usize, streams_per_user: usize, rf_chains_ms: usize) -> Self {
        SystemConfig {
            n_bs,
            n_ms,
            users,
            streams_per_user,
            rf_chains_ms,
            rf_chains_bs: users * rf_chains_ms,
            snr_db: 0.0,
            weights: Vec::new(),
        }
    }

    pub fn total_streams(&self) -> usize {
        self.users * self.streams_per_user
    }

    /// Weights expanded to one per user.
    pub fn user_weights(&self) -> Vec<f64> {
        if self.weights.is_empty() {
            alloc::vec![1.0; self.users]
        } else {
            self.weights.clone()
        }
    }

    /// Stream and RF-chain ordering constraints shared by every scheme.
    pub fn validate(&self) -> Result<()> {
        let SystemConfig { n_bs, n_ms, users, streams_per_user: n_s, rf_chains_ms: m_ms, rf_chains_bs: m_bs, .. } =
            *self;
        if n_bs == 0 || n_ms == 0 || users == 0 || n_s == 0 {
            return Err(invalid!("antenna, user and stream counts must be positive"));
        }
        if !(n_s <= m_ms && m_ms <= n_ms) {
            return Err(invalid!("need streams_per_user <= rf_chains_ms <= n_ms, got {n_s} <= {m_ms} <= {n_ms}"));
        }
        if !(users * n_s <= m_bs && m_bs <= n_bs) {
            return Err(invalid!(
                "need users*streams_per_user <= rf_chains_bs <= n_bs, got {} <= {m_bs} <= {n_bs}",
                users * n_s
            ));
        }
        if !self.weights.is_empty() {
            if self.weights.len() != users {
                return Err(invalid!("expected {users} weights, got {}", self.weights.len()));
            }
            if let Some(w) = self.weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
                return Err(invalid!("weights must be positive, got {w}"));
            }
        }
        if !self.snr_db.is_finite() {
            return Err(invalid!("snr_db must be finite"));
        }
        Ok(())
    }

    /// Equal-gain RF precoding needs one BS chain per user RF chain.
    pub fn validate_hybrid(&self) -> Result<()> {
        self.validate()?;
        if self.rf_chains_bs != self.users * self.rf_chains_ms {
            return Err(infeasible!(
                "hybrid design needs rf_chains_bs = users * rf_chains_ms ({} != {} * {})",
                self.rf_chains_bs,
                self.users,
                self.rf_chains_ms
            ));
        }
        Ok(())
    }

    /// Raw-channel block diagonalization needs a null space of dimension at
    /// least `streams_per_user` for every user.
    pub fn validate_full_bd(&self) -> Result<()> {
        let SystemConfig { n_bs, n_ms, users, streams_per_user: n_s, .. } = *self;
        if n_bs == 0 || n_ms == 0 || users == 0 || n_s == 0 {
            return Err(invalid!("antenna, user and stream counts must be positive"));
        }
        if n_s > n_ms {
            return Err(infeasible!("streams_per_user {n_s} exceeds n_ms {n_ms}"));
        }
        let others = (users - 1) * n_ms;
        if n_bs <= others || n_bs - others < n_s {
            return Err(infeasible!(
                "full BD needs n_bs - (users-1)*n_ms >= streams_per_user, got {n_bs} - {others} < {n_s}"
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constraints() {
        let ok = SystemConfig::hybrid(64, 4, 8, 2, 2);
        assert!(ok.validate_hybrid().is_ok());
        assert!(ok.validate_full_bd().is_ok());
        let mut bad = ok.clone();
        bad.rf_chains_ms = 1;
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.rf_chains_bs = 20;
        assert!(bad.validate().is_ok());
        assert!(matches!(bad.validate_hybrid(), Err(crate::Error::DesignInfeasible(_))));
        let crowded = SystemConfig::hybrid(16, 4, 5, 1, 1);
        assert!(crowded.validate_full_bd().is_err());
        let mut weighted = ok.clone();
        weighted.weights = alloc::vec![1.0; 3];
        assert!(weighted.validate().is_err());
    }
}
