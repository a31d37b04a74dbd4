//! Concentrated-liquidity AMM mechanics, LP profit and loss accounting,
//! price-path simulation, bandwidth calibration and liquidity-allocation
//! optimization under bucketed tick schemes.

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amm;
pub mod calibration;
pub mod error;
pub mod experiments;
pub mod gas;
pub mod optimizer;
pub mod pnl;
pub mod price_process;
pub mod replay;
pub mod swap;

pub use amm::{Bucket, BucketScheme, LiquidityAllocation, PricePair, TokenBundle};
pub use calibration::{FitResult, PriceSeries, SubsampleSpec};
pub use error::{Error, Result};
pub use experiments::ExperimentConfig;
pub use gas::GasEstimate;
pub use optimizer::{OptResult, OptimizerConfig, PathCoefficients};
pub use pnl::{PricePath, RiskParameter};
pub use price_process::{BeliefProfile, MarketModel, TradeModel};
pub use swap::{Direction, LpId, Pool, PositionId, SwapOrder, SwapResult};
