//! Named parameter sets: base ring, seed and truncation.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coleman::Coleman;
use crate::error::{ForgeError, Result};
use crate::lubin_tate::FormalGroup;
use crate::okring::{OKConfig, OkRing};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Profile {
    pub name: String,
    pub config: OKConfig,
    pub seed: String,
    /// x-adic truncation of single-variable series.
    #[serde(rename = "N")]
    pub n: usize,
    /// Total-degree truncation of the group law.
    pub nf: usize,
}

pub const NAMES: [&str; 4] = ["q3", "q27-cubic", "gm", "p5"];

impl Profile {
    pub fn named(name: &str) -> Result<Self> {
        let (config, seed, n, nf) = match name {
            "q3" => (OKConfig::qp(3, -1, 40), "-3*x + x^3", 24, 64),
            "q27-cubic" => (OKConfig::new(3, 3, vec![1, 2, 0, 1], -1, 40), "pi*x + x^q", 832, 54),
            "gm" => (OKConfig::qp(3, 1, 40), "(1+x)^p - 1", 24, 64),
            "p5" => (OKConfig::qp(5, -1, 20), "-5*x + x^5", 16, 36),
            _ => return Err(ForgeError::InvalidConfig(format!("unknown profile {name}"))),
        };
        Ok(Profile { name: name.into(), config, seed: seed.into(), n, nf })
    }

    /// Replace the truncations, keeping `nf > n` for single-variable work.
    pub fn with_truncation(mut self, n: Option<usize>, prec: Option<u32>) -> Self {
        if let Some(m) = prec {
            self.config.prec = m;
        }
        if let Some(n) = n {
            self.n = n;
            self.nf = self.nf.max(n + 1);
        }
        self
    }

    pub fn ring(&self) -> Result<OkRing> {
        OkRing::new(self.config.clone())
    }

    pub fn group(&self) -> Result<Arc<FormalGroup>> {
        Ok(Arc::new(FormalGroup::from_str(self.ring()?, &self.seed, self.n, self.nf)?))
    }

    pub fn coleman(&self) -> Result<Coleman> {
        Coleman::new(self.group()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_profiles_build() {
        for name in ["q3", "gm", "p5"] {
            let p = Profile::named(name).unwrap();
            let g = p.group().unwrap();
            assert_eq!(g.n(), p.n);
        }
        assert!(Profile::named("nope").is_err());
        let p = Profile::named("q3").unwrap().with_truncation(Some(70), Some(30));
        assert_eq!((p.n, p.nf, p.config.prec), (70, 71, 30));
    }

    #[test]
    fn profile_json_round_trip() {
        let p = Profile::named("q27-cubic").unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<Profile>(&s).unwrap(), p);
    }
}
