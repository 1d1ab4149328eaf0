//! Double-tier training: Tier-1 attention MIL over random pseudo-bags,
//! attribution-guided feature distillation, and Tier-2 attention MIL over the
//! distilled features. The two parameter sets are optimized separately; the
//! distilled features enter Tier-2 as constants.

mod distill;
mod model_dir;
mod partition;
mod train;

pub use distill::{argmax, argmin, distill, DistillSource, DistilledFeature, Strategy};
pub use model_dir::{load_model, save_model, write_history, ModelMeta, MODEL_FORMAT_VERSION};
pub use partition::{effective_m, eval_partition, split_pseudobags, PseudoBagPartition};
pub use train::{
    evaluate_auc, fit, infer, infer_all, infer_with_partition, tier1_loss, tier1_loss_on_graph,
    tier2_forward, train_step, EpochRecord, FitConfig, Inference, TrainHistory, TrainState,
};

use thiserror::Error;

use crate::abmil::{AbmilDims, AbmilParams, ModelError};
use crate::diffcore::{rng_for, stream, TensorError};
use crate::metrics::MetricError;

#[derive(Debug, Error)]
pub enum DtfdError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("distilled feature width {actual} does not match Tier-2 input width {expected}")]
    DistilledDim { expected: usize, actual: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Tier-1 and Tier-2 parameters with the framework settings they were trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct DtfdModel {
    pub tier1: AbmilParams<f32>,
    pub tier2: AbmilParams<f32>,
    /// Pseudo-bags per slide.
    pub m: usize,
    pub strategy: Strategy,
}

impl DtfdModel {
    /// Fresh model for instance width `d`. Tier-2 reads `2d` features under MaxMinS.
    pub fn init(d: usize, cfg: &FitConfig) -> Result<Self, DtfdError> {
        if cfg.m == 0 {
            return Err(DtfdError::Config("M must be at least 1".into()));
        }
        let dims1 = AbmilDims {
            d,
            d_att: cfg.d_att,
            c: 2,
            hidden: cfg.head_hidden,
        };
        let dims2 = AbmilDims {
            d: cfg.strategy.output_dim(d),
            ..dims1
        };
        Ok(Self {
            tier1: AbmilParams::init(dims1, cfg.head_bias, &mut rng_for(cfg.seed, stream::INIT_TIER1))?,
            tier2: AbmilParams::init(dims2, cfg.head_bias, &mut rng_for(cfg.seed, stream::INIT_TIER2))?,
            m: cfg.m,
            strategy: cfg.strategy,
        })
    }

    pub fn validate(&self) -> Result<(), DtfdError> {
        let expected = self.strategy.output_dim(self.tier1.dims.d);
        if self.tier2.dims.d != expected {
            return Err(DtfdError::DistilledDim {
                expected: self.tier2.dims.d,
                actual: expected,
            });
        }
        Ok(())
    }
}
