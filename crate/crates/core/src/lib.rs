//! Acoustic modeling with joint acoustic and articulatory features.
//!
//! The crate is split along the processing chain:
//!
//! - [`dsp`]: wav i/o, log-mel filterbanks, deltas, modulation features,
//!   normalization, splicing and noise mixing.
//! - [`nn`]: a small batch-major network engine (dense, axis convolution,
//!   max-pooling, activations, softmax) with backpropagation and SGD.
//! - [`arch`]: the DNN, CNN, TFCNN and fused-feature-map CNN builders.
//! - [`inversion`]: synthetic articulatory corpora and the acoustic-to-
//!   articulatory inversion network.
//! - [`training`]: mini-batch SGD epochs, the halving learning-rate schedule
//!   and training checkpoints.
//! - [`acoustic`]: frame-classification acoustic models over labelled
//!   utterances, with frozen feature normalization.
//! - [`eval`]: greedy frame decoding, word error rate and results tables.

pub mod acoustic;
pub mod arch;
pub mod config;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod inversion;
pub mod nn;
pub mod training;

pub use acoustic::{AcousticModel, AcousticReport, LabelledUtterance, TvSource};
pub use arch::{ArchKind, ArchSpec, FusionLayout, Scale};
pub use dsp::{FeatureMatrix, Layout, SpliceSpec, Waveform};
pub use error::{Error, Result};
pub use eval::{FramePosteriors, WerReport};
pub use inversion::{GesturalScore, ParallelCorpus, TvTrajectory};
pub use nn::{Gradients, Matrix, Mode, ModelInput, NetworkGraph};
pub use training::{TrainConfig, TrainState};
