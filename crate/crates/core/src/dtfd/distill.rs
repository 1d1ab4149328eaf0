use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::abmil::AbmilForward;
use crate::attribution::InstanceAttribution;
use crate::diffcore::Real;

/// Rule for the feature a pseudo-bag forwards to Tier-2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Instance with the highest derived positive probability.
    MaxS,
    /// Highest and lowest positive-probability instances, concatenated.
    MaxMinS,
    /// Instance with the highest attention weight.
    Mas,
    /// Attention-pooled pseudo-bag embedding.
    Afs,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::MaxS, Strategy::MaxMinS, Strategy::Mas, Strategy::Afs];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::MaxS => "maxs",
            Strategy::MaxMinS => "maxmins",
            Strategy::Mas => "mas",
            Strategy::Afs => "afs",
        }
    }

    /// Tier-2 input width for instance width `d`.
    pub fn output_dim(self, d: usize) -> usize {
        match self {
            Strategy::MaxMinS => 2 * d,
            _ => d,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "maxs" => Ok(Strategy::MaxS),
            "maxmins" => Ok(Strategy::MaxMinS),
            "mas" => Ok(Strategy::Mas),
            "afs" => Ok(Strategy::Afs),
            other => Err(format!("unknown strategy {other:?} (expected maxs, maxmins, mas or afs)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DistillSource {
    /// Rows of the pseudo-bag that were copied, in output order.
    Instances(Vec<usize>),
    Aggregate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistilledFeature<T> {
    pub vector: Vec<T>,
    pub source: DistillSource,
}

/// First index of the maximum.
pub fn argmax<T: Real>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// First index of the minimum.
pub fn argmin<T: Real>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Distills one feature from a pseudo-bag's Tier-1 pass. Selected features are
/// the raw instance rows `h_k`, not the weighted `ĥ_k`.
pub fn distill<T: Real>(
    forward: &AbmilForward<T>,
    attribution: &InstanceAttribution<T>,
    strategy: Strategy,
) -> DistilledFeature<T> {
    let h = &forward.h;
    match strategy {
        Strategy::MaxS => {
            let k = argmax(&attribution.positive_probs());
            DistilledFeature {
                vector: h.row(k).to_vec(),
                source: DistillSource::Instances(vec![k]),
            }
        }
        Strategy::MaxMinS => {
            let probs = attribution.positive_probs();
            let (hi, lo) = (argmax(&probs), argmin(&probs));
            let mut vector = h.row(hi).to_vec();
            vector.extend_from_slice(h.row(lo));
            DistilledFeature {
                vector,
                source: DistillSource::Instances(vec![hi, lo]),
            }
        }
        Strategy::Mas => {
            let k = argmax(&forward.a);
            DistilledFeature {
                vector: h.row(k).to_vec(),
                source: DistillSource::Instances(vec![k]),
            }
        }
        Strategy::Afs => DistilledFeature {
            vector: forward.f.clone(),
            source: DistillSource::Aggregate,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_go_to_lowest_index() {
        assert_eq!(argmax(&[0.2, 0.9, 0.9, 0.1]), 1);
        assert_eq!(argmin(&[0.5, 0.1, 0.3, 0.1]), 1);
    }

    #[test]
    fn parse_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
        }
        assert!("max".parse::<Strategy>().is_err());
    }

    #[test]
    fn dims() {
        assert_eq!(Strategy::MaxMinS.output_dim(64), 128);
        assert_eq!(Strategy::Afs.output_dim(64), 64);
    }
}
