//! Coarse-to-fine attention BiRNN for joint intent detection and slot
//! filling, with user-information distillation.
//!
//! The crate is organised as an autodiff core ([`autodiff`]), data handling
//! ([`corpus`], [`gazetteer`], [`iob`]), the prior-distance features
//! ([`distill`]), the network ([`model`]), its two-phase training
//! ([`training`]) and metrics plus experiments ([`eval`]).

pub mod autodiff;
pub mod config;
pub mod corpus;
pub mod distill;
pub mod error;
pub mod eval;
pub mod gazetteer;
pub mod iob;
pub mod model;
pub mod training;

pub use config::RunConfig;
pub use corpus::{UserInfoDictionary, UserInfoEntry, Utterance, Vocab};
pub use distill::{Distiller, PriorDistanceTable};
pub use error::{Error, Result};
pub use gazetteer::Gazetteer;
pub use model::{ModelConfig, ProgModel};
pub use training::{Context, TrainConfig, Trainer};
