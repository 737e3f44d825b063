//! Shared fixtures for the criterion benches.

use boxseg_core::classify::{featurize, Features, FeaturizerSpec};
use boxseg_core::synth::CrackScene;
use boxseg_core::{GrayImage, LabelMask};

/// Square crack scene of the given side.
pub fn scene(side: usize, seed: u64) -> (GrayImage, LabelMask) {
    CrackScene {
        width: side,
        height: side,
        cracks: (side / 48).max(3),
        ..CrackScene::default()
    }
    .generate(seed)
    .expect("valid scene")
}

/// Intensity features and labels of a crack scene.
pub fn pixels(side: usize, seed: u64) -> (Features, Vec<u8>) {
    let (img, mask) = scene(side, seed);
    let f = featurize(&img, FeaturizerSpec::Intensity).expect("featurize");
    (f, mask.labels().to_vec())
}
